//! Front end for the logic-program dialect: tokens, AST, parser, printer.

mod ast;
mod lexer;
mod parser;
mod print;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_program;
pub use print::print_program;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("lexical error at {line}:{column}: {message}")]
    Lex {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        expected: String,
        found: String,
        line: usize,
        column: usize,
    },
    #[error("syntax error at {line}:{column}: unexpected end of input, expected {expected}")]
    UnexpectedEof {
        expected: String,
        line: usize,
        column: usize,
    },
    #[error("`#show {predicate}/{shown}` does not match its use with arity {used:?}")]
    ArityConflict {
        predicate: String,
        shown: usize,
        used: Vec<usize>,
    },
}
