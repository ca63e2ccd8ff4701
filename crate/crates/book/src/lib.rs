//! The book's chapters, one module each, so that `cargo test` runs every
//! Rust block in them as a doctest. The HTML book itself is built with
//! `mdbook build book` from the workspace root.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/learner.md")]
pub mod learner {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}

#[doc = include_str!("../../../book/src/snapshots.md")]
pub mod snapshots {}
