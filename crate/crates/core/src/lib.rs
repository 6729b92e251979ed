//! Explanations for answer set programs annotated with `%!` directives.

pub mod cli;
pub mod error;
pub mod explain;
pub mod ground;
pub mod pipeline;
pub mod render;
pub mod solve;
pub mod syntax;
pub mod translate;

pub use error::{Error, Result, Span};
