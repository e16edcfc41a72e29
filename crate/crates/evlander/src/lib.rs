//! File formats, diagnostics and the `evlander` command-line tool for
//! event-camera descent velocity estimation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataio;
pub mod error;
pub mod render;
