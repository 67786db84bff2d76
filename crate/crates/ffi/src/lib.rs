//! C ABI over `nanoflow`.
//!
//! Every fallible function returns an [`NfStatus`]; on failure the message
//! is available from [`nf_last_error`] on the same thread until the next
//! call. Strings handed out by the library are freed with
//! [`nf_string_free`], handles with their own `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nanoflow::cli::{Policy, TestCase};
use nanoflow::lang::{parse, Stmt};
use nanoflow::monitor::{run, Mode, Outcome, RunResult, Strategy, StrategyConfig};
use nanoflow::trace::{analyze, from_jsonl, to_jsonl};
use nanoflow::upgrades::{default_max_rounds, infer_upgrades, TestSuite, UpgradePlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    PolicyError = 4,
    RunError = 5,
    TraceError = 6,
    InferError = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStrategy {
    Taint = 0,
    Observable = 1,
    Nsu = 2,
    Pu = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfMode {
    Enforce = 0,
    Measure = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfOutcome {
    Completed = 0,
    Stopped = 1,
    BudgetExhausted = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NfCounters {
    pub explicit_flows: u64,
    pub observable_flows: u64,
    pub hidden_flows: u64,
}

/// A parsed program.
pub struct NfProgram(Stmt);

/// Sources and initial bindings.
pub struct NfPolicy(Policy);

/// The result of one monitored run.
pub struct NfRun(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', "\\0")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (NfStatus, String);

/// Runs `f`, recording its error message and turning panics into
/// [`NfStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            NfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((NfStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (NfStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (NfStatus::NullArgument, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err((NfStatus::NullArgument, "out is null".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| (NfStatus::Panic, e.to_string()))?;
    if out.is_null() {
        return Err((NfStatus::NullArgument, "out is null".into()));
    }
    out.write(c.into_raw());
    Ok(())
}

fn test_case(json: &str) -> Result<TestCase, Failure> {
    serde_json::from_str(json).map_err(|e| (NfStatus::PolicyError, format!("test case: {e}")))
}

fn counters(c: nanoflow::monitor::FlowCount) -> NfCounters {
    NfCounters {
        explicit_flows: c.explicit,
        observable_flows: c.observable,
        hidden_flows: c.hidden,
    }
}

impl From<NfStrategy> for Strategy {
    fn from(s: NfStrategy) -> Self {
        match s {
            NfStrategy::Taint => Strategy::Taint,
            NfStrategy::Observable => Strategy::Observable,
            NfStrategy::Nsu => Strategy::Nsu,
            NfStrategy::Pu => Strategy::Pu,
        }
    }
}

impl From<NfMode> for Mode {
    fn from(m: NfMode) -> Self {
        match m {
            NfMode::Enforce => Mode::Enforce,
            NfMode::Measure => Mode::Measure,
        }
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn nf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses NanoJS source; locations in results name `filename`.
///
/// # Safety
/// `source` and `filename` must be NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn nf_program_parse(
    source: *const c_char,
    filename: *const c_char,
    out: *mut *mut NfProgram,
) -> NfStatus {
    guard(|| {
        let src = str_arg(source, "source")?;
        let name = str_arg(filename, "filename")?;
        let stmt = parse(src, name).map_err(|e| (NfStatus::ParseError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(NfProgram(stmt))))
    })
}

/// # Safety
/// `p` must be null or a handle from [`nf_program_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_program_free(p: *mut NfProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Reads a policy, `{"sources":[..],"env":{..}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_policy_parse(json: *const c_char, out: *mut *mut NfPolicy) -> NfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let policy: Policy = serde_json::from_str(text).map_err(|e| (NfStatus::PolicyError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(NfPolicy(policy))))
    })
}

/// # Safety
/// `p` must be null or a handle from [`nf_policy_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_policy_free(p: *mut NfPolicy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs `program` under `policy`. `test_json` (a test case layered over the
/// policy bindings) and `plan_json` (an upgrade plan) may be null.
///
/// # Safety
/// Handles must be live; non-null strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_run(
    program: *const NfProgram,
    policy: *const NfPolicy,
    test_json: *const c_char,
    plan_json: *const c_char,
    strategy: NfStrategy,
    mode: NfMode,
    out: *mut *mut NfRun,
) -> NfStatus {
    guard(|| {
        let program = ref_arg(program, "program")?;
        let policy = &ref_arg(policy, "policy")?.0;
        let init = match opt_str_arg(test_json, "test_json")? {
            Some(t) => policy.with_test(&test_case(t)?),
            None => policy.init(),
        };
        let mut cfg = StrategyConfig::new(strategy.into(), mode.into());
        if let Some(p) = opt_str_arg(plan_json, "plan_json")? {
            let plan = UpgradePlan::from_json(p).map_err(|e| (NfStatus::PolicyError, format!("plan: {e}")))?;
            cfg = plan.apply(cfg);
        }
        let r = run(&program.0, &init, &policy.sources, &cfg).map_err(|e| (NfStatus::RunError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(NfRun(r))))
    })
}

/// # Safety
/// `r` must be null or a handle from [`nf_run`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_run_free(r: *mut NfRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live run handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_run_outcome(r: *const NfRun, out: *mut NfOutcome) -> NfStatus {
    guard(|| {
        let o = match ref_arg(r, "run")?.0.outcome {
            Outcome::Completed => NfOutcome::Completed,
            Outcome::Stopped { .. } => NfOutcome::Stopped,
            Outcome::BudgetExhausted => NfOutcome::BudgetExhausted,
        };
        write_out(out, o)
    })
}

/// Global micro-flow counters of the run.
///
/// # Safety
/// `r` must be a live run handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_run_counters(r: *const NfRun, out: *mut NfCounters) -> NfStatus {
    guard(|| write_out(out, counters(ref_arg(r, "run")?.0.counters)))
}

/// Flows that reached sinks.
///
/// # Safety
/// `r` must be a live run handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_run_sink_counters(r: *const NfRun, out: *mut NfCounters) -> NfStatus {
    guard(|| write_out(out, counters(ref_arg(r, "run")?.0.sink_count)))
}

/// The run's iFlow trace as JSON Lines.
///
/// # Safety
/// `r` must be a live run handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_run_trace_jsonl(r: *const NfRun, out: *mut *mut c_char) -> NfStatus {
    guard(|| write_string(out, to_jsonl(&ref_arg(r, "run")?.0.trace)))
}

/// Analysis report (micro-flow counts and classified source-to-sink flows)
/// of a JSON Lines trace, as JSON.
///
/// # Safety
/// `trace_jsonl` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_analyze_jsonl(trace_jsonl: *const c_char, out: *mut *mut c_char) -> NfStatus {
    guard(|| {
        let text = str_arg(trace_jsonl, "trace_jsonl")?;
        let t = from_jsonl(text).map_err(|e| (NfStatus::TraceError, e.to_string()))?;
        let report = analyze(&t, None).map_err(|e| (NfStatus::TraceError, e.to_string()))?;
        write_string(out, serde_json::to_string(&report).expect("reports serialize"))
    })
}

/// Infers upgrade statements from `n_tests` test cases (the policy alone
/// when zero) and returns the plan as JSON.
///
/// # Safety
/// Handles must be live; `tests` must point to `n_tests` NUL-terminated
/// strings (or be null when `n_tests` is zero); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_infer_upgrades(
    program: *const NfProgram,
    policy: *const NfPolicy,
    tests: *const *const c_char,
    n_tests: usize,
    out: *mut *mut c_char,
) -> NfStatus {
    guard(|| {
        let program = &ref_arg(program, "program")?.0;
        let policy = &ref_arg(policy, "policy")?.0;
        let cases = if n_tests == 0 {
            vec![policy.init()]
        } else {
            if tests.is_null() {
                return Err((NfStatus::NullArgument, "tests is null".into()));
            }
            std::slice::from_raw_parts(tests, n_tests)
                .iter()
                .map(|&t| Ok(policy.with_test(&test_case(str_arg(t, "test")?)?)))
                .collect::<Result<Vec<_>, Failure>>()?
        };
        let plan = infer_upgrades(
            program,
            &TestSuite::new(cases),
            &policy.sources,
            default_max_rounds(program),
        )
        .map_err(|e| (NfStatus::InferError, e.to_string()))?;
        write_string(out, plan.to_json())
    })
}
