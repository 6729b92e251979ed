//! Surface syntax: terms, rules, and `%!` annotations.

mod ast;
mod lexer;
mod parser;

pub(crate) use ast::write_quoted;
pub use ast::*;
pub use lexer::{tokenize, tokenize_at, Token, TokenKind};
pub use parser::{parse_annotation, parse_const_override, parse_program, parse_source, parse_term};
