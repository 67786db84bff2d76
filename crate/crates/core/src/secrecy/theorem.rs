use serde::Serialize;

use super::generate::Generator;
use super::oracle::{check_secrecy, Condition, LowDomain, Verdict};
use crate::lang::Stmt;
use crate::monitor::{run, FlowCount, InitState, Strategy, StrategyConfig};

pub const SUITE_BUDGET: u64 = 100_000;

/// A run whose sink counters claim a secrecy condition that the oracle
/// refutes.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremViolation {
    pub index: usize,
    pub condition: Condition,
    pub source: String,
    pub sink_count: FlowCount,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TheoremReport {
    pub programs: usize,
    /// Runs where the explicit-secrecy premise held and was checked.
    pub explicit_checked: usize,
    pub observable_checked: usize,
    pub undecided: usize,
    pub violations: Vec<TheoremViolation>,
}

impl TheoremReport {
    pub fn undecided_rate(&self) -> f64 {
        if self.programs == 0 {
            0.0
        } else {
            self.undecided as f64 / self.programs as f64
        }
    }
}

/// Checks both theorems on one program and start state, taking the sink
/// counters from a measure-mode run under `strategy`.
pub fn check_case(
    strategy: Strategy,
    index: usize,
    source: &str,
    program: &Stmt,
    init: &InitState,
    report: &mut TheoremReport,
) {
    report.programs += 1;
    let cfg = StrategyConfig::measure(strategy).with_budget(SUITE_BUDGET);
    let r = match run(program, init, &[], &cfg) {
        Ok(r) if r.completed() => r,
        _ => {
            report.undecided += 1;
            return;
        }
    };
    let domain = LowDomain::default();
    let mut conditions = Vec::new();
    if r.sink_count.explicit == 0 {
        conditions.push(Condition::Explicit);
        if r.sink_count.observable == 0 {
            conditions.push(Condition::Observable);
        }
    }
    let mut undecided = false;
    for condition in conditions {
        let verdict = check_secrecy(condition, program, init, &[], &domain, SUITE_BUDGET);
        match condition {
            Condition::Explicit => report.explicit_checked += 1,
            Condition::Observable => report.observable_checked += 1,
        }
        match verdict {
            Verdict::Holds => {}
            Verdict::Undecided { .. } => undecided = true,
            Verdict::Fails { .. } => report.violations.push(TheoremViolation {
                index,
                condition,
                source: source.to_string(),
                sink_count: r.sink_count,
                verdict,
            }),
        }
    }
    report.undecided += undecided as usize;
}

/// Runs `n` generated programs from `seed` through both theorems under PU.
pub fn theorem_suite(seed: u64, n: usize) -> TheoremReport {
    theorem_suite_with(Strategy::Pu, seed, n)
}

pub fn theorem_suite_with(strategy: Strategy, seed: u64, n: usize) -> TheoremReport {
    let mut g = Generator::new(seed);
    let mut report = TheoremReport::default();
    for i in 0..n {
        let case = g.generate(i);
        check_case(strategy, i, &case.source, &case.program, &case.init, &mut report);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::monitor::Label;

    #[test]
    fn empty_suite() {
        let r = theorem_suite(1, 0);
        assert_eq!(r.programs, 0);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn password_run_is_vacuous_but_consistent() {
        let src = "gotIt = false;\nmarkSrc(passwd);\npaddedPasswd = \"xx\" + passwd;\nknownPasswd = \"\";\nif (paddedPasswd === \"xxtopSecret\") {\n  gotIt = true;\n  knownPasswd = passwd;\n}\nupgrade(gotIt); sink(gotIt);\n";
        let p = parse(src, "pw.njs").unwrap();
        let init = InitState::new().with("passwd", "abc", Label::L);
        let cfg = StrategyConfig::measure(Strategy::Pu);
        let r = run(&p, &init, &[], &cfg).unwrap();
        assert!(r.sink_count.explicit >= 1);
        let mut report = TheoremReport::default();
        check_case(Strategy::Pu, 0, src, &p, &init, &mut report);
        assert_eq!(report.explicit_checked, 0);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn small_suite_has_no_violations() {
        let r = theorem_suite(3, 150);
        assert_eq!(r.programs, 150);
        assert!(r.violations.is_empty(), "{:#?}", r.violations);
        assert!(r.explicit_checked > 0 && r.observable_checked > 0);
    }

    #[test]
    fn generated_programs_do_leak_sometimes() {
        // Without the counter premise the oracle must find leaks, or the
        // suite above would pass vacuously.
        let mut g = Generator::new(3);
        let domain = LowDomain::default();
        let mut fails = [0; 2];
        for i in 0..150 {
            let c = g.generate(i);
            for (k, cond) in [Condition::Explicit, Condition::Observable].into_iter().enumerate() {
                if check_secrecy(cond, &c.program, &c.init, &[], &domain, SUITE_BUDGET).name() == "fails" {
                    fails[k] += 1;
                }
            }
        }
        assert!(fails[0] > 0 && fails[1] > fails[0], "{fails:?}");
    }
}
