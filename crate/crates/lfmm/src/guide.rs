//! The narrative guide, assembled from the book chapters.
//!
//! Each chapter is included as module documentation so that
//! `cargo test --doc` compiles and runs every code snippet in the book;
//! the guide cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/losses.md")]
pub mod losses {}

#[doc = include_str!("../../../book/src/fixed_point.md")]
pub mod fixed_point {}

#[doc = include_str!("../../../book/src/predictions.md")]
pub mod predictions {}

#[doc = include_str!("../../../book/src/monte_carlo.md")]
pub mod monte_carlo {}

#[doc = include_str!("../../../book/src/universality.md")]
pub mod universality {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
