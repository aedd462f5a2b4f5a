//! The chapters of the guide, compiled as doc-tests so the snippets stay
//! runnable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/two-body.md")]
pub mod two_body {}

#[doc = include_str!("../../../book/src/events.md")]
pub mod events {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/running.md")]
pub mod running {}
