use std::fmt::{self, Write};

use super::ast::{write_string_literal, BaseValue, BinOp, Expr, Stmt};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

/// Binding strength of an expression's head; atoms bind tightest.
fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Lit(BaseValue::Int(n)) if *n < 0 => BinOp::Sub.precedence(),
        Expr::Not(_) => 7,
        _ => 8,
    }
}

fn write_operand(f: &mut impl Write, e: &Expr, needs_parens: bool) -> fmt::Result {
    if needs_parens {
        f.write_char('(')?;
        write_expr(f, e)?;
        f.write_char(')')
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut impl Write, e: &Expr) -> fmt::Result {
    match e {
        // The grammar has no unary minus.
        Expr::Lit(BaseValue::Int(n)) if *n == i64::MIN => write!(f, "0 - {} - 1", i64::MAX),
        Expr::Lit(BaseValue::Int(n)) if *n < 0 => write!(f, "0 - {}", n.unsigned_abs()),
        Expr::Lit(BaseValue::Str(s)) => write_string_literal(f, s),
        Expr::Lit(b) => write!(f, "{b}"),
        Expr::Var(x) => f.write_str(x),
        Expr::Field(x, a) => write!(f, "{x}.{a}"),
        Expr::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            write_operand(f, lhs, strength(lhs) < p)?;
            write!(f, " {} ", op.symbol())?;
            write_operand(f, rhs, strength(rhs) <= p)
        }
        Expr::Not(inner) => {
            f.write_char('!')?;
            write_operand(f, inner, strength(inner) < 7)
        }
        Expr::Object(fields) => {
            f.write_char('{')?;
            for (i, (name, value)) in fields.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{name}: ")?;
                write_expr(f, value)?;
            }
            f.write_char('}')
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_block(&mut out, self, 0)?;
        f.write_str(&out)
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, s: &Stmt, depth: usize) -> fmt::Result {
    for stmt in s.flatten() {
        write_stmt(out, stmt, depth)?;
    }
    Ok(())
}

fn write_braced(out: &mut String, s: &Stmt, depth: usize) -> fmt::Result {
    out.push_str("{\n");
    write_block(out, s, depth + 1)?;
    indent(out, depth);
    out.push('}');
    Ok(())
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) -> fmt::Result {
    indent(out, depth);
    match s {
        Stmt::Skip => out.push_str("skip;"),
        Stmt::Seq(..) => unreachable!("flatten removes sequences"),
        Stmt::Assign { target, rhs, .. } => write!(out, "{target} = {rhs};")?,
        Stmt::AssignField { obj, field, rhs, .. } => write!(out, "{obj}.{field} = {rhs};")?,
        Stmt::If {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            write!(out, "if ({guard}) ")?;
            write_braced(out, then_branch, depth)?;
            if **else_branch != Stmt::Skip {
                out.push_str(" else ");
                write_braced(out, else_branch, depth)?;
            }
        }
        Stmt::While { guard, body, .. } => {
            write!(out, "while ({guard}) ")?;
            write_braced(out, body, depth)?;
        }
        Stmt::Sink { arg, .. } => write!(out, "sink({arg});")?,
        Stmt::Upgrade { target, .. } => write!(out, "upgrade({target});")?,
        Stmt::MarkSrc { target, .. } => write!(out, "markSrc({target});")?,
    }
    out.push('\n');
    Ok(())
}
