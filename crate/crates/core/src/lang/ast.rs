use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Identifier of a variable or object field.
pub type Name = String;

/// A source position, `file:line:column`, both components 1-based.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Loc {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl Loc {
    pub fn new(file: impl Into<Arc<str>>, line: u32, column: u32) -> Self {
        Loc {
            file: file.into(),
            line,
            column,
        }
    }

    /// Synthetic location for a value that is sensitive before the first
    /// statement runs (an initial binding or a policy source).
    pub fn input(name: &str) -> Self {
        Loc::new(format!("<input:{name}>"), 1, 1)
    }
}

impl Ord for Loc {
    fn cmp(&self, other: &Self) -> Ordering {
        (&*self.file, self.line, self.column).cmp(&(&*other.file, other.line, other.column))
    }
}

impl PartialOrd for Loc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

impl fmt::Debug for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid location `{0}`, expected file:line:column")]
pub struct LocParseError(pub String);

impl FromStr for Loc {
    type Err = LocParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LocParseError(s.to_string());
        let mut parts = s.rsplitn(3, ':');
        let column = parts.next().ok_or_else(err)?;
        let line = parts.next().ok_or_else(err)?;
        let file = parts.next().ok_or_else(err)?;
        let line: u32 = line.parse().map_err(|_| err())?;
        let column: u32 = column.parse().map_err(|_| err())?;
        if file.is_empty() || line == 0 || column == 0 {
            return Err(err());
        }
        Ok(Loc::new(file, line, column))
    }
}

impl Serialize for Loc {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Loc {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Primitive values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseValue {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl BaseValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            BaseValue::Bool(_) => "bool",
            BaseValue::Int(_) => "int",
            BaseValue::Str(_) => "string",
        }
    }
}

impl Serialize for BaseValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BaseValue::Bool(b) => s.serialize_bool(*b),
            BaseValue::Int(n) => s.serialize_i64(*n),
            BaseValue::Str(x) => s.serialize_str(x),
        }
    }
}

impl fmt::Display for BaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseValue::Bool(b) => write!(f, "{b}"),
            BaseValue::Int(n) => write!(f, "{n}"),
            BaseValue::Str(s) => write_string_literal(f, s),
        }
    }
}

pub(crate) fn write_string_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    StrictEq,
    StrictNe,
    Lt,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::StrictEq => "===",
            BinOp::StrictNe => "!==",
            BinOp::Lt => "<",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::StrictEq | BinOp::StrictNe => 3,
            BinOp::Lt => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }
}

/// Side-effect free expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(BaseValue),
    Var(Name),
    Field(Name, Name),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Object(Vec<(Name, Expr)>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Variables read by this expression, in evaluation order.
    pub fn free_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(x) | Expr::Field(x, _) => out.push(x),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Not(e) => e.collect_vars(out),
            Expr::Object(fields) => fields.iter().for_each(|(_, e)| e.collect_vars(out)),
        }
    }
}

/// NanoJS statements. The internal `pop` of the flow-counting semantics is
/// not a statement here; the monitor keeps it on its continuation stack, so a
/// parsed program can never contain one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Seq(Box<Stmt>, Box<Stmt>),
    Assign {
        target: Name,
        rhs: Expr,
        loc: Loc,
    },
    AssignField {
        obj: Name,
        field: Name,
        rhs: Expr,
        loc: Loc,
    },
    If {
        guard: Expr,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
        loc: Loc,
    },
    While {
        guard: Expr,
        body: Box<Stmt>,
        loc: Loc,
    },
    Sink {
        arg: Expr,
        loc: Loc,
    },
    Upgrade {
        target: Name,
        loc: Loc,
    },
    MarkSrc {
        target: Name,
        loc: Loc,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected a while statement")]
pub struct NotAWhile;

impl Stmt {
    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        Stmt::Seq(Box::new(first), Box::new(second))
    }

    /// Right-nested sequence of `stmts`; empty input yields `skip`.
    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        let mut iter = stmts.into_iter().rev();
        match iter.next() {
            None => Stmt::Skip,
            Some(last) => iter.fold(last, |acc, s| Stmt::seq(s, acc)),
        }
    }

    pub fn loc(&self) -> Option<&Loc> {
        match self {
            Stmt::Skip | Stmt::Seq(..) => None,
            Stmt::Assign { loc, .. }
            | Stmt::AssignField { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::While { loc, .. }
            | Stmt::Sink { loc, .. }
            | Stmt::Upgrade { loc, .. }
            | Stmt::MarkSrc { loc, .. } => Some(loc),
        }
    }

    /// One-step unfolding `while (e) { c }` into `if (e) { c; while (e) { c } } else { skip }`.
    pub fn desugar_while(&self) -> Result<Stmt, NotAWhile> {
        match self {
            Stmt::While { guard, body, loc } => Ok(Stmt::If {
                guard: guard.clone(),
                then_branch: Box::new(Stmt::seq((**body).clone(), self.clone())),
                else_branch: Box::new(Stmt::Skip),
                loc: loc.clone(),
            }),
            _ => Err(NotAWhile),
        }
    }

    /// Flattens nested sequences into program order.
    pub fn flatten(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        match self {
            Stmt::Seq(a, b) => {
                a.flatten_into(out);
                b.flatten_into(out);
            }
            s => out.push(s),
        }
    }

    /// Visits every statement in the tree, pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Seq(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                else_branch.walk(f);
            }
            Stmt::While { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// All statement locations in pre-order.
    pub fn locs(&self) -> Vec<&Loc> {
        let mut out = Vec::new();
        self.walk(&mut |s| out.extend(s.loc()));
        out
    }

    /// Removes `skip` operands of sequences: `skip; c` and `c; skip` both become `c`.
    pub fn normalize_skips(&self) -> Stmt {
        match self {
            Stmt::Seq(a, b) => match (a.normalize_skips(), b.normalize_skips()) {
                (Stmt::Skip, s) | (s, Stmt::Skip) => s,
                (a, b) => Stmt::seq(a, b),
            },
            Stmt::If {
                guard,
                then_branch,
                else_branch,
                loc,
            } => Stmt::If {
                guard: guard.clone(),
                then_branch: Box::new(then_branch.normalize_skips()),
                else_branch: Box::new(else_branch.normalize_skips()),
                loc: loc.clone(),
            },
            Stmt::While { guard, body, loc } => Stmt::While {
                guard: guard.clone(),
                body: Box::new(body.normalize_skips()),
                loc: loc.clone(),
            },
            s => s.clone(),
        }
    }

    /// Canonical sequence shape: sequences re-associated to the right.
    pub fn reassociate(&self) -> Stmt {
        let parts: Vec<Stmt> = self
            .flatten()
            .into_iter()
            .map(|s| match s {
                Stmt::If {
                    guard,
                    then_branch,
                    else_branch,
                    loc,
                } => Stmt::If {
                    guard: guard.clone(),
                    then_branch: Box::new(then_branch.reassociate()),
                    else_branch: Box::new(else_branch.reassociate()),
                    loc: loc.clone(),
                },
                Stmt::While { guard, body, loc } => Stmt::While {
                    guard: guard.clone(),
                    body: Box::new(body.reassociate()),
                    loc: loc.clone(),
                },
                s => s.clone(),
            })
            .collect();
        Stmt::block(parts)
    }

    /// Same tree with every location replaced by `loc`; used to compare
    /// programs that came from different source texts.
    pub fn with_locs(&self, loc: &Loc) -> Stmt {
        match self {
            Stmt::Skip => Stmt::Skip,
            Stmt::Seq(a, b) => Stmt::seq(a.with_locs(loc), b.with_locs(loc)),
            Stmt::Assign { target, rhs, .. } => Stmt::Assign {
                target: target.clone(),
                rhs: rhs.clone(),
                loc: loc.clone(),
            },
            Stmt::AssignField { obj, field, rhs, .. } => Stmt::AssignField {
                obj: obj.clone(),
                field: field.clone(),
                rhs: rhs.clone(),
                loc: loc.clone(),
            },
            Stmt::If {
                guard,
                then_branch,
                else_branch,
                ..
            } => Stmt::If {
                guard: guard.clone(),
                then_branch: Box::new(then_branch.with_locs(loc)),
                else_branch: Box::new(else_branch.with_locs(loc)),
                loc: loc.clone(),
            },
            Stmt::While { guard, body, .. } => Stmt::While {
                guard: guard.clone(),
                body: Box::new(body.with_locs(loc)),
                loc: loc.clone(),
            },
            Stmt::Sink { arg, .. } => Stmt::Sink {
                arg: arg.clone(),
                loc: loc.clone(),
            },
            Stmt::Upgrade { target, .. } => Stmt::Upgrade {
                target: target.clone(),
                loc: loc.clone(),
            },
            Stmt::MarkSrc { target, .. } => Stmt::MarkSrc {
                target: target.clone(),
                loc: loc.clone(),
            },
        }
    }

    /// Number of assignment and field-assignment statements in the tree.
    pub fn assignment_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |s| {
            if matches!(s, Stmt::Assign { .. } | Stmt::AssignField { .. }) {
                n += 1;
            }
        });
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(line: u32) -> Loc {
        Loc::new("t.njs", line, 1)
    }

    #[test]
    fn loc_round_trips_through_text() {
        let l = Loc::new("dir/f.njs", 9, 3);
        assert_eq!(l.to_string(), "dir/f.njs:9:3");
        assert_eq!("dir/f.njs:9:3".parse::<Loc>().unwrap(), l);
        assert_eq!(Loc::input("x").to_string().parse::<Loc>().unwrap(), Loc::input("x"));
        assert!("f.njs:0:1".parse::<Loc>().is_err());
        assert!("nocolon".parse::<Loc>().is_err());
    }

    #[test]
    fn locs_order_by_file_then_position() {
        assert!(Loc::new("a", 2, 1) < Loc::new("a", 2, 5));
        assert!(Loc::new("a", 2, 9) < Loc::new("a", 3, 1));
        assert!(Loc::new("a", 9, 9) < Loc::new("b", 1, 1));
    }

    #[test]
    fn desugar_while_unfolds_once() {
        let body = Stmt::Assign {
            target: "x".into(),
            rhs: Expr::Lit(BaseValue::Int(1)),
            loc: loc(2),
        };
        let w = Stmt::While {
            guard: Expr::Var("b".into()),
            body: Box::new(body.clone()),
            loc: loc(1),
        };
        let unfolded = w.desugar_while().unwrap();
        assert_eq!(
            unfolded,
            Stmt::If {
                guard: Expr::Var("b".into()),
                then_branch: Box::new(Stmt::seq(body, w.clone())),
                else_branch: Box::new(Stmt::Skip),
                loc: loc(1),
            }
        );
        assert_eq!(Stmt::Skip.desugar_while(), Err(NotAWhile));
    }

    #[test]
    fn desugar_nested_while_unfolds_outer_only() {
        let inner = Stmt::While {
            guard: Expr::Var("c".into()),
            body: Box::new(Stmt::Skip),
            loc: loc(2),
        };
        let outer = Stmt::While {
            guard: Expr::Var("b".into()),
            body: Box::new(inner.clone()),
            loc: loc(1),
        };
        match outer.desugar_while().unwrap() {
            Stmt::If { then_branch, .. } => match *then_branch {
                Stmt::Seq(first, second) => {
                    assert_eq!(*first, inner);
                    assert_eq!(*second, outer);
                }
                other => panic!("unexpected then-branch {other:?}"),
            },
            other => panic!("unexpected unfolding {other:?}"),
        }
    }

    #[test]
    fn skip_normalization_drops_empty_sequence_parts() {
        let a = Stmt::Sink {
            arg: Expr::Var("l".into()),
            loc: loc(1),
        };
        let s = Stmt::seq(Stmt::Skip, Stmt::seq(a.clone(), Stmt::Skip));
        assert_eq!(s.normalize_skips(), a);
        assert_eq!(Stmt::seq(Stmt::Skip, Stmt::Skip).normalize_skips(), Stmt::Skip);
    }
}
