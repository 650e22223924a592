//! The book chapters, compiled as doc-tests.
//!
//! mdbook cannot run example blocks against the workspace crates, so the
//! chapters are included here verbatim and `cargo test --doc -p guide`
//! exercises every Rust block in the book. One module per chapter keeps a
//! failing test traceable to its file.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/pseudo-observations.md")]
pub mod pseudo_observations {}

#[doc = include_str!("../../../book/src/balancing-weights.md")]
pub mod balancing_weights {}

#[doc = include_str!("../../../book/src/estimates-and-intervals.md")]
pub mod estimates_and_intervals {}

#[doc = include_str!("../../../book/src/simulation-and-cli.md")]
pub mod simulation_and_cli {}
