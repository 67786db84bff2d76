use super::context::EvalContext;
use crate::lang::{Name, Stmt};
use crate::monitor::{run_observed, ExecEvent, InitState, Observer, Outcome, RunError, RunResult, StrategyConfig};

/// Program extracted from one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedProgram {
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("run did not finish within its step budget")]
    BudgetExhausted,
    #[error("run stopped at {0}")]
    Stopped(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Default)]
struct Explicit(Vec<Stmt>);

impl Observer for Explicit {
    fn observe(&mut self, event: ExecEvent<'_>) {
        if let ExecEvent::Executed(s) = event {
            self.0.push(s.clone());
        }
    }
}

#[derive(Default)]
struct Observable(EvalContext);

impl Observer for Observable {
    fn observe(&mut self, event: ExecEvent<'_>) {
        match event {
            ExecEvent::Executed(s) => self.0.append(s.clone()),
            ExecEvent::Branch { guard, loc, taken } => self.0.enter_branch(guard.clone(), loc.clone(), taken),
            ExecEvent::Pop => self.0.leave_branch().expect("pops follow branches"),
        }
    }
}

fn finished(r: &RunResult) -> Result<(), ExtractError> {
    match &r.outcome {
        Outcome::Completed => Ok(()),
        Outcome::BudgetExhausted => Err(ExtractError::BudgetExhausted),
        Outcome::Stopped { reason, loc } => Err(ExtractError::Stopped(format!("{loc}: {reason}"))),
    }
}

/// The assignments, field assignments and sinks of one run, in execution
/// order, without control flow.
pub fn extract_explicit(
    program: &Stmt,
    init: &InitState,
    sources: &[Name],
    cfg: &StrategyConfig,
) -> Result<(ExtractedProgram, RunResult), ExtractError> {
    let mut obs = Explicit::default();
    let r = run_observed(program, init, sources, cfg, &mut obs)?;
    finished(&r)?;
    let body = Stmt::block(obs.0);
    Ok((ExtractedProgram { body }, r))
}

/// Like [`extract_explicit`] but keeping every branch the run entered, with
/// the untaken side replaced by `skip`.
pub fn extract_observable(
    program: &Stmt,
    init: &InitState,
    sources: &[Name],
    cfg: &StrategyConfig,
) -> Result<(ExtractedProgram, RunResult), ExtractError> {
    let mut obs = Observable::default();
    let r = run_observed(program, init, sources, cfg, &mut obs)?;
    finished(&r)?;
    debug_assert_eq!(obs.0.depth(), 0);
    let body = obs.0.insert(Stmt::Skip).normalize_skips();
    Ok((ExtractedProgram { body }, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::monitor::{Label, Strategy};

    fn cfg() -> StrategyConfig {
        StrategyConfig::measure(Strategy::Pu)
    }

    fn h(b: bool) -> InitState {
        InitState::new().with("h", b, Label::H)
    }

    fn canon(s: &Stmt) -> String {
        s.normalize_skips().to_string()
    }

    #[test]
    fn explicit_drops_control_flow() {
        let p = parse("if (h) { l = 1; } else { l = 2; } sink(l);", "e.njs").unwrap();
        let (e, _) = extract_explicit(&p, &h(true), &[], &cfg()).unwrap();
        assert_eq!(canon(&e.body), "l = 1;\nsink(l);\n");
    }

    #[test]
    fn explicit_of_straight_line_is_the_program() {
        let p = parse("a = 1; b = a + 2; sink(b);", "e.njs").unwrap();
        let (e, _) = extract_explicit(&p, &h(true), &[], &cfg()).unwrap();
        assert_eq!(canon(&e.body), canon(&p));
    }

    #[test]
    fn explicit_repeats_loop_bodies() {
        let p = parse("i = 0; while (i < 2) { i = i + 1; }", "e.njs").unwrap();
        let (e, _) = extract_explicit(&p, &h(true), &[], &cfg()).unwrap();
        assert_eq!(canon(&e.body), "i = 0;\ni = i + 1;\ni = i + 1;\n");
    }

    #[test]
    fn observable_keeps_taken_branches() {
        let p = parse("l = 0; if (h) { l = 1; } sink(l);", "o.njs").unwrap();
        let (t, _) = extract_observable(&p, &h(true), &[], &cfg()).unwrap();
        assert_eq!(canon(&t.body), "l = 0;\nif (h) {\n  l = 1;\n}\nsink(l);\n");
        let (f, _) = extract_observable(&p, &h(false), &[], &cfg()).unwrap();
        assert_eq!(canon(&f.body), "l = 0;\nif (h) {\n  skip;\n}\nsink(l);\n");
    }

    #[test]
    fn without_branches_both_extractions_agree() {
        let p = parse("a = 1; b = h; sink(a);", "o.njs").unwrap();
        let (e, _) = extract_explicit(&p, &h(true), &[], &cfg()).unwrap();
        let (o, _) = extract_observable(&p, &h(true), &[], &cfg()).unwrap();
        assert_eq!(canon(&e.body), canon(&o.body));
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let p = parse("while (true) { skip; }", "o.njs").unwrap();
        let c = cfg().with_budget(100);
        assert_eq!(
            extract_explicit(&p, &h(true), &[], &c).unwrap_err(),
            ExtractError::BudgetExhausted
        );
    }
}
