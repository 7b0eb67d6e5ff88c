//! The book chapters under `book/` as doc-tested modules.
//!
//! Every Rust code block in the guide compiles and runs under
//! `cargo test --doc`, which keeps the book in sync with the library. Read
//! the rendered book with `mdbook serve book/`, or browse the same chapters
//! here.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/concepts/frame-blocks.md")]
pub mod frame_blocks {}

#[doc = include_str!("../../../book/src/concepts/size-priors.md")]
pub mod size_priors {}

#[doc = include_str!("../../../book/src/concepts/degradation.md")]
pub mod degradation {}

#[doc = include_str!("../../../book/src/concepts/selection.md")]
pub mod selection {}

#[doc = include_str!("../../../book/src/concepts/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/guide/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/guide/synthetic.md")]
pub mod synthetic_scenarios {}

#[doc = include_str!("../../../book/src/guide/cli.md")]
pub mod cli {}
