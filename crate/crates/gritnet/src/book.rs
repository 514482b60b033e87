//! Runs the guide's code snippets as doc-tests.
//!
//! Each chapter of `book/` is attached to an empty module via
//! `#[doc = include_str!(...)]`, so `cargo test --doc` compiles and runs
//! every fenced Rust block in the book. mdbook renders the same files; the
//! two can't drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/encoding.md")]
pub mod encoding {}

#[doc = include_str!("../../../book/src/baseline.md")]
pub mod baseline {}

#[doc = include_str!("../../../book/src/network.md")]
pub mod network {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
