//! The guide under `book/` is plain mdbook, which cannot link against
//! workspace crates when it tests snippets. Each chapter is included here as
//! module docs instead, so `cargo test --doc` runs every code block.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spectral-model.md")]
pub mod spectral_model {}

#[doc = include_str!("../../../book/src/rates.md")]
pub mod rates {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
