//! The roughwave guide, compiled so its examples run as doc-tests.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/grids.md")]
pub mod grids {}
#[doc = include_str!("../../book/src/kernels.md")]
pub mod kernels {}
#[doc = include_str!("../../book/src/orlicz.md")]
pub mod orlicz {}
#[doc = include_str!("../../book/src/weights.md")]
pub mod weights {}
#[doc = include_str!("../../book/src/sparse.md")]
pub mod sparse {}
#[doc = include_str!("../../book/src/cz.md")]
pub mod cz {}
#[doc = include_str!("../../book/src/checks.md")]
pub mod checks {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
