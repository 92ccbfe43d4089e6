//! Reference implementations written independently of the library code.
//! Shared with the CLI acceptance harness through a `#[path]` include.

#![allow(dead_code, clippy::needless_range_loop)]

pub mod gru;
pub mod half;
pub mod median;
pub mod quant;
