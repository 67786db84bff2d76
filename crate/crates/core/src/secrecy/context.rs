use crate::lang::{Expr, Loc, Stmt};

/// A statement with exactly one hole, in tree form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cxt {
    Hole,
    /// `c; C`
    Seq(Stmt, Box<Cxt>),
    /// `if e then C else skip`
    Then {
        guard: Expr,
        loc: Loc,
        inner: Box<Cxt>,
    },
    /// `if e then skip else C`
    Else {
        guard: Expr,
        loc: Loc,
        inner: Box<Cxt>,
    },
}

impl Cxt {
    pub fn hole_count(&self) -> usize {
        match self {
            Cxt::Hole => 1,
            Cxt::Seq(_, c) | Cxt::Then { inner: c, .. } | Cxt::Else { inner: c, .. } => c.hole_count(),
        }
    }

    /// Plugs the hole with `s`.
    pub fn insert(&self, s: Stmt) -> Stmt {
        match self {
            Cxt::Hole => s,
            Cxt::Seq(c, rest) => Stmt::seq(c.clone(), rest.insert(s)),
            Cxt::Then { guard, loc, inner } => Stmt::If {
                guard: guard.clone(),
                then_branch: Box::new(inner.insert(s)),
                else_branch: Box::new(Stmt::Skip),
                loc: loc.clone(),
            },
            Cxt::Else { guard, loc, inner } => Stmt::If {
                guard: guard.clone(),
                then_branch: Box::new(Stmt::Skip),
                else_branch: Box::new(inner.insert(s)),
                loc: loc.clone(),
            },
        }
    }
}

struct Frame {
    before: Vec<Stmt>,
    guard: Expr,
    loc: Loc,
    taken: bool,
}

/// Zipper over a [`Cxt`]: the statements run so far in the innermost open
/// branch, plus one frame per enclosing branch. The hole sits after `done`.
#[derive(Default)]
pub struct EvalContext {
    done: Vec<Stmt>,
    frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("leaveBranch outside of any branch")]
pub struct NoOpenBranch;

impl EvalContext {
    pub fn new() -> Self {
        EvalContext::default()
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// `cxt[c; ●]`
    pub fn append(&mut self, c: Stmt) {
        self.done.push(c);
    }

    /// `cxt[if e then ● else skip]`, or the else-side form when `!taken`.
    pub fn enter_branch(&mut self, guard: Expr, loc: Loc, taken: bool) {
        self.frames.push(Frame {
            before: std::mem::take(&mut self.done),
            guard,
            loc,
            taken,
        });
    }

    /// Closes the innermost branch: `cxt'[if e then C[skip] else skip; ●]`.
    pub fn leave_branch(&mut self) -> Result<(), NoOpenBranch> {
        let f = self.frames.pop().ok_or(NoOpenBranch)?;
        let body = Stmt::block(std::mem::replace(&mut self.done, f.before));
        let (then_branch, else_branch) = if f.taken {
            (body, Stmt::Skip)
        } else {
            (Stmt::Skip, body)
        };
        self.done.push(Stmt::If {
            guard: f.guard,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
            loc: f.loc,
        });
        Ok(())
    }

    /// Plugs the hole with `s`.
    pub fn insert(&self, s: Stmt) -> Stmt {
        let mut inner = self.done.clone();
        inner.push(s);
        let mut stmt = Stmt::block(inner);
        for f in self.frames.iter().rev() {
            let (t, e) = if f.taken {
                (stmt, Stmt::Skip)
            } else {
                (Stmt::Skip, stmt)
            };
            let mut outer = f.before.clone();
            outer.push(Stmt::If {
                guard: f.guard.clone(),
                then_branch: Box::new(t),
                else_branch: Box::new(e),
                loc: f.loc.clone(),
            });
            stmt = Stmt::block(outer);
        }
        stmt
    }

    /// The same context as a tree.
    pub fn to_cxt(&self) -> Cxt {
        let wrap = |stmts: &[Stmt], tail: Cxt| {
            stmts
                .iter()
                .rev()
                .fold(tail, |acc, s| Cxt::Seq(s.clone(), Box::new(acc)))
        };
        let mut cxt = wrap(&self.done, Cxt::Hole);
        for f in self.frames.iter().rev() {
            let branch = if f.taken {
                Cxt::Then {
                    guard: f.guard.clone(),
                    loc: f.loc.clone(),
                    inner: Box::new(cxt),
                }
            } else {
                Cxt::Else {
                    guard: f.guard.clone(),
                    loc: f.loc.clone(),
                    inner: Box::new(cxt),
                }
            };
            cxt = wrap(&f.before, branch);
        }
        cxt
    }
}
