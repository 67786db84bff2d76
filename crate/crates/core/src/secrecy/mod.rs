//! Explicit and observable secrecy: program extraction from runs, a
//! brute-force noninterference oracle, and the soundness property suite.

mod context;
mod extract;
mod generate;
mod oracle;
mod theorem;

pub use context::{Cxt, EvalContext, NoOpenBranch};
pub use extract::{extract_explicit, extract_observable, ExtractError, ExtractedProgram};
pub use generate::{GenConfig, Generated, Generator};
pub use oracle::{
    check_explicit_secrecy, check_noninterference, check_observable_secrecy, check_secrecy, low_equivalent,
    low_variants, sensitive_inputs, Condition, Counterexample, LowDomain, Observed, State, Verdict, MAX_VARIANTS,
};
pub use theorem::{check_case, theorem_suite, theorem_suite_with, TheoremReport, TheoremViolation, SUITE_BUDGET};
