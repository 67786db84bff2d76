//! Recursive-descent parser for the NanoJS concrete syntax.
//!
//! ```text
//! program := stmt*
//! stmt    := "skip" ";"
//!          | name "=" expr ";"
//!          | name "." name "=" expr ";"
//!          | "if" "(" expr ")" block ("else" block)?
//!          | "while" "(" expr ")" block
//!          | "sink" "(" expr ")" ";"
//!          | "upgrade" "(" name ")" ";"
//!          | "markSrc" "(" name ")" ";"
//! block   := "{" stmt* "}"
//! expr    := or
//! or      := and ("||" and)*
//! and     := eq ("&&" eq)*
//! eq      := rel (("===" | "!==") rel)*
//! rel     := add ("<" add)*
//! add     := mul (("+" | "-") mul)*
//! mul     := unary ("*" unary)*
//! unary   := "!" unary | primary
//! primary := int | string | "true" | "false" | name | name "." name
//!          | "(" expr ")" | "{" (name ":" expr ("," name ":" expr)*)? "}"
//! ```
//!
//! Comments run from `//` to the end of the line.

use std::sync::Arc;

use super::ast::{BaseValue, BinOp, Expr, Loc, Name, Stmt};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{loc}: syntax error: {message}")]
pub struct SyntaxError {
    pub loc: Loc,
    pub message: String,
}

const KEYWORDS: &[&str] = &[
    "skip", "if", "else", "while", "sink", "upgrade", "markSrc", "true", "false",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    column: u32,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    file: &'a Arc<str>,
    line: u32,
    column: u32,
}

const PUNCTS: &[&str] = &[
    "===", "!==", "&&", "||", "=", "!", "<", "+", "-", "*", ";", ".", ",", ":", "(", ")", "{", "}",
];

impl<'a> Lexer<'a> {
    fn new(text: &'a str, file: &'a Arc<str>) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            file,
            line: 1,
            column: 1,
        }
    }

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            loc: Loc::new(self.file.clone(), line, column),
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let n = s
                    .parse::<i64>()
                    .map_err(|_| self.error(line, column, format!("integer literal {s} out of range")))?;
                Tok::Int(n)
            } else if c == '"' {
                self.bump();
                Tok::Str(self.string_body(line, column)?)
            } else {
                let rest: String = self.chars.clone().take(3).collect();
                let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
                    return Err(self.error(line, column, format!("unexpected character `{c}`")));
                };
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            };
            out.push(Token { tok, line, column });
        }
    }

    fn string_body(&mut self, line: u32, column: u32) -> Result<String, SyntaxError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error(line, column, "unterminated string literal")),
                Some('"') => return Ok(s),
                Some('\\') => {
                    let esc = match self.bump() {
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        other => {
                            return Err(self.error(
                                self.line,
                                self.column,
                                format!("invalid escape {:?}", other.map(String::from).unwrap_or_default()),
                            ))
                        }
                    };
                    s.push(esc);
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') => {
                    let mut ahead = self.chars.clone();
                    ahead.next();
                    if ahead.next() == Some('/') {
                        while let Some(&c) = self.chars.peek() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    } else {
                        return;
                    }
                }
                _ => return,
            }
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    file: Arc<str>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn loc_of(&self, t: &Token) -> Loc {
        Loc::new(self.file.clone(), t.line, t.column)
    }

    fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            loc: self.loc_of(self.peek()),
            message: message.into(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn expect(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{p}`, found {}", Self::describe(&self.peek().tok))))
        }
    }

    fn name(&mut self) -> Result<Name, SyntaxError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected a name, found {}", Self::describe(other)))),
        }
    }

    fn program(&mut self) -> Result<Stmt, SyntaxError> {
        let mut stmts = Vec::new();
        while self.peek().tok != Tok::Eof {
            stmts.push(self.stmt()?);
        }
        Ok(Stmt::block(stmts))
    }

    fn block(&mut self) -> Result<Stmt, SyntaxError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek().tok == Tok::Eof {
                return Err(self.error_here("unclosed block, expected `}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(Stmt::block(stmts))
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.peek().clone();
        let loc = self.loc_of(&start);
        let keyword = match &start.tok {
            Tok::Ident(s) => s.clone(),
            other => return Err(self.error_here(format!("expected a statement, found {}", Self::describe(other)))),
        };
        match keyword.as_str() {
            "skip" => {
                self.advance();
                self.expect(";")?;
                Ok(Stmt::Skip)
            }
            "if" => {
                self.advance();
                self.expect("(")?;
                let guard = self.expr()?;
                self.expect(")")?;
                let then_branch = self.block()?;
                let else_branch = if matches!(&self.peek().tok, Tok::Ident(s) if s == "else") {
                    self.advance();
                    self.block()?
                } else {
                    Stmt::Skip
                };
                Ok(Stmt::If {
                    guard,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    loc,
                })
            }
            "while" => {
                self.advance();
                self.expect("(")?;
                let guard = self.expr()?;
                self.expect(")")?;
                let body = self.block()?;
                Ok(Stmt::While {
                    guard,
                    body: Box::new(body),
                    loc,
                })
            }
            "sink" => {
                self.advance();
                self.expect("(")?;
                let arg = self.expr()?;
                self.expect(")")?;
                self.expect(";")?;
                Ok(Stmt::Sink { arg, loc })
            }
            "upgrade" | "markSrc" => {
                self.advance();
                self.expect("(")?;
                let target = self.name()?;
                self.expect(")")?;
                self.expect(";")?;
                Ok(if keyword == "upgrade" {
                    Stmt::Upgrade { target, loc }
                } else {
                    Stmt::MarkSrc { target, loc }
                })
            }
            _ => {
                let target = self.name()?;
                if self.is_punct(".") {
                    self.advance();
                    let field = self.name()?;
                    self.expect("=")?;
                    let rhs = self.expr()?;
                    self.expect(";")?;
                    Ok(Stmt::AssignField {
                        obj: target,
                        field,
                        rhs,
                        loc,
                    })
                } else {
                    self.expect("=")?;
                    let rhs = self.expr()?;
                    self.expect(";")?;
                    Ok(Stmt::Assign { target, rhs, loc })
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary(1)
    }

    fn binop_here(&self) -> Option<BinOp> {
        let Tok::Punct(p) = &self.peek().tok else {
            return None;
        };
        Some(match *p {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "===" => BinOp::StrictEq,
            "!==" => BinOp::StrictNe,
            "<" => BinOp::Lt,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        if min_prec > 6 {
            return self.unary();
        }
        let mut lhs = self.binary(min_prec + 1)?;
        while let Some(op) = self.binop_here().filter(|op| op.precedence() == min_prec) {
            self.advance();
            let rhs = self.binary(min_prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_punct("!") {
            self.advance();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().tok.clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Lit(BaseValue::Int(n)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Lit(BaseValue::Str(s)))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok(Expr::Lit(BaseValue::Bool(s == "true")))
            }
            Tok::Ident(_) => {
                let x = self.name()?;
                if self.is_punct(".") {
                    self.advance();
                    let f = self.name()?;
                    Ok(Expr::Field(x, f))
                } else {
                    Ok(Expr::Var(x))
                }
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.advance();
                let mut fields: Vec<(Name, Expr)> = Vec::new();
                if !self.is_punct("}") {
                    loop {
                        let field_tok = self.peek().clone();
                        let f = self.name()?;
                        if fields.iter().any(|(g, _)| *g == f) {
                            return Err(SyntaxError {
                                loc: self.loc_of(&field_tok),
                                message: format!("duplicate field `{f}` in object literal"),
                            });
                        }
                        self.expect(":")?;
                        let e = self.expr()?;
                        fields.push((f, e));
                        if self.is_punct(",") {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect("}")?;
                Ok(Expr::Object(fields))
            }
            other => Err(self.error_here(format!("expected an expression, found {}", Self::describe(&other)))),
        }
    }
}

/// Parses a whole NanoJS program. Statement locations are the positions of
/// the statements' first tokens, so they are unique within the program.
pub fn parse(text: &str, filename: &str) -> Result<Stmt, SyntaxError> {
    let file: Arc<str> = Arc::from(filename);
    let tokens = Lexer::new(text, &file).tokens()?;
    let mut parser = Parser { tokens, pos: 0, file };
    parser.program()
}

/// Parses a single expression (used for policy and test inputs).
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let file: Arc<str> = Arc::from("<expr>");
    let tokens = Lexer::new(text, &file).tokens()?;
    let mut parser = Parser { tokens, pos: 0, file };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::Eof {
        return Err(parser.error_here("trailing input after expression"));
    }
    Ok(e)
}
