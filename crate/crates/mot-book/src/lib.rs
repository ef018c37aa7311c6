//! mdbook cannot run a chapter's code blocks against this workspace's
//! crates, so each chapter is included here as module documentation and
//! `cargo test --doc` runs every snippet. A failing example in the book
//! fails the build.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/marginals.md")]
pub mod marginals {}

#[doc = include_str!("../../../book/src/numeraire.md")]
pub mod numeraire {}

#[doc = include_str!("../../../book/src/couplings.md")]
pub mod couplings {}

#[doc = include_str!("../../../book/src/pricing.md")]
pub mod pricing {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
