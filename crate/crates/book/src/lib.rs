//! The `iov-offload` guide. Each module holds one chapter so its examples
//! run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/communication.md")]
pub mod communication {}

#[doc = include_str!("../../../book/src/execution.md")]
pub mod execution {}

#[doc = include_str!("../../../book/src/constraints.md")]
pub mod constraints {}

#[doc = include_str!("../../../book/src/ga.md")]
pub mod ga {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
