//! NanoJS syntax: AST, parser and pretty printer.

mod ast;
mod parser;
mod pretty;

pub use ast::{BaseValue, BinOp, Expr, Loc, LocParseError, Name, NotAWhile, Stmt};
pub use parser::{parse, parse_expr, SyntaxError};
