use std::collections::BTreeMap;

use super::*;
use crate::lang::parse;
use crate::trace::{interpret_trace, IFlowEvent};

const PASSWORD: &str = "gotIt = false;
markSrc(passwd);
paddedPasswd = \"xx\" + passwd;
knownPasswd = \"\";
if (paddedPasswd === \"xxtopSecret\") {
  gotIt = true;
  knownPasswd = passwd;
}
sink(gotIt);
";

fn go(src: &str, init: InitState, cfg: StrategyConfig) -> RunResult {
    let p = parse(src, "t.njs").unwrap();
    run(&p, &init, &[], &cfg).unwrap()
}

fn measure(src: &str, init: InitState, s: Strategy) -> RunResult {
    go(src, init, StrategyConfig::measure(s))
}

fn password(pw: &str) -> InitState {
    InitState::new().with("passwd", pw, Label::L)
}

/// Event shapes with figure ids; `None` for ⊥ or an absent operand.
#[derive(Debug, Clone, Copy)]
enum Shape {
    Source(u64),
    Op(u64, u64, u64),
    Write(Option<u64>, u64),
    Upgrade(u64, u64),
    Push(u64),
    Pop,
    Sink(u64),
}

/// The ids in `events` are a consistent renaming of the figure's ids.
fn assert_matches_figure(events: &[IFlowEvent], figure: &[Shape]) {
    assert_eq!(events.len(), figure.len(), "{events:?}");
    let mut map: BTreeMap<u64, u64> = BTreeMap::new();
    let mut bind = |fig: u64, ours: u64| {
        let prev = *map.entry(fig).or_insert(ours);
        assert_eq!(prev, ours, "figure v{fig} maps to both v{prev} and v{ours}");
    };
    for (e, s) in events.iter().zip(figure) {
        match (e, *s) {
            (IFlowEvent::Source { v, .. }, Shape::Source(f)) => bind(f, *v),
            (IFlowEvent::Sink { v, .. }, Shape::Sink(f)) => bind(f, *v),
            (IFlowEvent::Push { v, .. }, Shape::Push(f)) => bind(f, *v),
            (IFlowEvent::Pop { .. }, Shape::Pop) => {}
            (
                IFlowEvent::Op {
                    a1, a2: Some(a2), new, ..
                },
                Shape::Op(f1, f2, f3),
            ) => {
                bind(f1, *a1);
                bind(f2, *a2);
                bind(f3, *new);
            }
            (IFlowEvent::Write { old, new, .. }, Shape::Write(fo, fnew)) => {
                assert_eq!(old.is_none(), fo.is_none(), "{e}");
                if let (Some(o), Some(f)) = (old, fo) {
                    bind(f, *o);
                }
                bind(fnew, *new);
            }
            (IFlowEvent::Upgrade { old, new, .. }, Shape::Upgrade(fo, fnew)) => {
                bind(fo, *old);
                bind(fnew, *new);
            }
            _ => panic!("event {e} does not have the shape {s:?}"),
        }
    }
}

#[test]
fn delta_examples() {
    assert_eq!(delta(Label::L, Label::H, []), FlowCount::new(1, 0, 0));
    assert_eq!(delta(Label::L, Label::L, [Label::H]), FlowCount::new(0, 1, 0));
    assert_eq!(delta(Label::H, Label::H, [Label::H]), FlowCount::ZERO);
    assert_eq!(delta(Label::L, Label::L, []), FlowCount::ZERO);
}

#[test]
fn skip_program_is_silent() {
    let r = measure("skip;", InitState::new(), Strategy::Pu);
    assert!(r.completed());
    assert_eq!(r.counters, FlowCount::ZERO);
    assert!(r.trace.is_empty());
}

#[test]
fn concatenation_with_a_secret_is_sensitive() {
    let r = measure(
        "markSrc(passwd); q = \"xx\" + passwd;",
        password("topSecret"),
        Strategy::Pu,
    );
    let q = &r.env["q"];
    assert_eq!(
        q.payload,
        Payload::Base(crate::lang::BaseValue::Str("xxtopSecret".into()))
    );
    assert_eq!(q.label, Label::H);
}

#[test]
fn counts_add_through_operators() {
    let src = "a = 2; b = 3; markSrc(s); a = s; b = s; a = 2 + a; c = a + b;";
    let init = InitState::new().with("s", 1i64, Label::L);
    let r = measure(src, init, Strategy::Taint);
    assert_eq!(r.env["c"].count, FlowCount::new(2 + 1, 0, 0));
}

#[test]
fn top_secret_run_matches_the_figure() {
    let r = measure(PASSWORD, password("topSecret"), Strategy::Pu);
    assert_eq!(r.counters.as_tuple(), (2, 2, 0));
    use Shape::*;
    assert_matches_figure(
        &r.trace.events,
        &[
            Source(2),
            Op(3, 2, 4),
            Write(None, 4),
            Op(4, 6, 7),
            Push(7),
            Write(Some(1), 8),
            Write(Some(5), 2),
            Pop,
            Sink(8),
        ],
    );
    let snaps: Vec<_> = interpret_trace(&r.trace).unwrap().snapshots;
    let counts: Vec<_> = snaps.iter().map(|s| s.counters.as_tuple()).collect();
    assert_eq!(
        counts,
        [
            (0, 0, 0),
            (0, 0, 0),
            (1, 0, 0),
            (1, 0, 0),
            (1, 0, 0),
            (1, 1, 0),
            (2, 2, 0),
            (2, 2, 0),
            (2, 2, 0)
        ]
    );
    let depth: Vec<_> = snaps.iter().map(|s| s.depth).collect();
    assert_eq!(depth, [0, 0, 0, 0, 1, 1, 1, 0, 0]);
}

#[test]
fn abc_run_with_upgrade_matches_the_figure() {
    let p = parse(PASSWORD, "t.njs").unwrap();
    let sink_loc = Loc::new("t.njs", 9, 1);
    let cfg = StrategyConfig::measure(Strategy::Pu).with_upgrades([(sink_loc.clone(), "gotIt".to_string())]);
    let r = run(&p, &password("abc"), &[], &cfg).unwrap();
    assert_eq!(r.counters.as_tuple(), (1, 0, 1));
    use Shape::*;
    assert_matches_figure(
        &r.trace.events,
        &[
            Source(2),
            Op(3, 2, 4),
            Write(None, 4),
            Op(4, 5, 6),
            Upgrade(1, 7),
            Sink(7),
        ],
    );
    assert_eq!(r.trace.events[4].loc(), &sink_loc);
    assert_eq!(interpret_trace(&r.trace).unwrap().counters, r.counters);
}

#[test]
fn strategies_agree_on_explicit_counts() {
    let taint = measure(PASSWORD, password("topSecret"), Strategy::Taint);
    let pu = measure(PASSWORD, password("topSecret"), Strategy::Pu);
    assert_eq!(taint.counters.explicit, pu.counters.explicit);
}

const LOCATION: &str = "y = \"\";
z = \"\";
if (10 < location && location < 20) {
  y = \"Home\";
}
z = \"You are at \" + y;
";

fn location() -> InitState {
    InitState::new().with("location", 15i64, Label::H)
}

#[test]
fn location_example_stops_where_expected() {
    let nsu = go(LOCATION, location(), StrategyConfig::new(Strategy::Nsu, Mode::Enforce));
    assert_eq!(
        nsu.outcome,
        Outcome::Stopped {
            reason: StopReason::NSUWrite("y".into()),
            loc: Loc::new("t.njs", 4, 3)
        }
    );
    let pu = go(LOCATION, location(), StrategyConfig::new(Strategy::Pu, Mode::Enforce));
    assert_eq!(
        pu.outcome,
        Outcome::Stopped {
            reason: StopReason::PUUse("y".into()),
            loc: Loc::new("t.njs", 6, 1)
        }
    );
    let obs = go(
        LOCATION,
        location(),
        StrategyConfig::new(Strategy::Observable, Mode::Enforce),
    );
    assert!(obs.completed());
    assert!(obs.env["z"].is_sensitive());
    let cfg =
        StrategyConfig::new(Strategy::Pu, Mode::Enforce).with_upgrades([(Loc::new("t.njs", 6, 1), "y".to_string())]);
    assert!(go(LOCATION, location(), cfg).completed());
}

#[test]
fn measure_mode_records_instead_of_stopping() {
    let r = go(LOCATION, location(), StrategyConfig::measure(Strategy::Nsu));
    assert!(r.completed());
    assert_eq!(r.violations.len(), 1);
    assert_eq!(r.violations[0].reason, StopReason::NSUWrite("y".into()));
}

#[test]
fn one_partially_leaked_use_is_one_violation() {
    let r = measure(PASSWORD, password("topSecret"), Strategy::Pu);
    let reasons: Vec<_> = r.violations.iter().map(|v| v.reason.clone()).collect();
    assert_eq!(reasons, [StopReason::PUUse("gotIt".into()), StopReason::SinkViolation]);
    // P reached only through a field is still reported once, by the sink.
    let r = measure(
        "o = {a: 0}; if (h) { o.a = 1; } sink(o);",
        InitState::new().with("h", true, Label::H),
        Strategy::Pu,
    );
    assert_eq!(
        r.violations
            .iter()
            .filter(|v| matches!(v.reason, StopReason::PUUse(_)))
            .count(),
        1
    );
}

#[test]
fn upgrade_is_idempotent() {
    let once = measure("y = 1; upgrade(y);", InitState::new(), Strategy::Pu);
    let twice = measure("y = 1; upgrade(y); upgrade(y);", InitState::new(), Strategy::Pu);
    assert_eq!(once.counters.hidden, 1);
    assert_eq!(twice.counters, once.counters);
    assert_eq!(twice.trace.events.len(), 1);
}

#[test]
fn upgrade_of_an_object_counts_each_component() {
    let r = measure("o = {a: 1, b: {c: 2}}; upgrade(o);", InitState::new(), Strategy::Pu);
    assert_eq!(r.counters.hidden, 4);
}

#[test]
fn mark_source_tags_everything_reachable() {
    let r = measure("o = {a: 1, b: {c: 2}}; markSrc(o);", InitState::new(), Strategy::Pu);
    assert_eq!(r.trace.events.len(), 4);
    assert!(r.trace.events.iter().all(|e| e.kind() == "source"));
}

#[test]
fn sink_of_a_source_is_one_explicit_flow() {
    let r = measure(
        "markSrc(x); sink(x);",
        InitState::new().with("x", 1i64, Label::L),
        Strategy::Pu,
    );
    assert_eq!(r.sink_count, FlowCount::new(1, 0, 0));
    assert_eq!(r.violations.len(), 1);
    let kinds: Vec<_> = r.trace.events.iter().map(|e| e.kind()).collect();
    assert_eq!(kinds, ["source", "sink"]);
}

#[test]
fn enforce_mode_stops_at_sinks() {
    let cfg = StrategyConfig::new(Strategy::Taint, Mode::Enforce);
    let r = go("l = h; sink(l);", InitState::new().with("h", 1i64, Label::H), cfg);
    assert_eq!(
        r.outcome,
        Outcome::Stopped {
            reason: StopReason::SinkViolation,
            loc: Loc::new("t.njs", 1, 8)
        }
    );
    assert!(r.outputs.is_empty());
}

#[test]
fn taint_ignores_the_context_for_labels() {
    let src = "y = 0; if (x) { y = 5; } sink(y);";
    let init = InitState::new().with("x", true, Label::H);
    let t = measure(src, init.clone(), Strategy::Taint);
    assert!(!t.env["y"].is_sensitive());
    assert_eq!(t.counters.observable, 1);
    let o = measure(src, init, Strategy::Observable);
    assert!(o.env["y"].is_sensitive());
}

#[test]
fn loops_unfold_inside_the_guard_frame() {
    let src = "i = 0; while (i < 3) { i = i + 1; }";
    let r = measure(src, InitState::new(), Strategy::Pu);
    assert!(r.completed());
    assert_eq!(r.env["i"].payload, Payload::Base(crate::lang::BaseValue::Int(3)));
    assert_eq!(r.branch_log.len(), 4);
}

#[test]
fn runtime_errors_carry_locations() {
    let p = parse("x = 1;\ny = x + true;", "t.njs").unwrap();
    let err = run(&p, &InitState::new(), &[], &StrategyConfig::measure(Strategy::Pu)).unwrap_err();
    assert_eq!(err.loc, Loc::new("t.njs", 2, 1));
    assert!(matches!(err.kind, EvalError::TypeError(_)));
    let p = parse("o = {a: 1}; o.a = o;", "t.njs").unwrap();
    let err = run(&p, &InitState::new(), &[], &StrategyConfig::measure(Strategy::Pu)).unwrap_err();
    assert!(matches!(err.kind, EvalError::CyclicHeap(_)));
    let p = parse("x = 9223372036854775807 + 1;", "t.njs").unwrap();
    let err = run(&p, &InitState::new(), &[], &StrategyConfig::measure(Strategy::Pu)).unwrap_err();
    assert_eq!(err.kind, EvalError::Overflow);
}

#[test]
fn budget_exhaustion_keeps_the_partial_trace() {
    let cfg = StrategyConfig::measure(Strategy::Pu).with_budget(50);
    let r = go(
        "markSrc(h); while (true) { x = h; }",
        InitState::new().with("h", 1i64, Label::L),
        cfg,
    );
    assert_eq!(r.outcome, Outcome::BudgetExhausted);
    assert!(!r.trace.is_empty());
    assert_eq!(r.steps, 50);
}

#[test]
fn runs_are_deterministic() {
    let a = measure(PASSWORD, password("topSecret"), Strategy::Pu);
    let b = measure(PASSWORD, password("topSecret"), Strategy::Pu);
    assert_eq!(crate::trace::to_jsonl(&a.trace), crate::trace::to_jsonl(&b.trace));
}

#[test]
fn counters_never_decrease() {
    let p = parse(PASSWORD, "t.njs").unwrap();
    let mut last = (FlowCount::ZERO, FlowCount::ZERO);
    for budget in 1..40 {
        let cfg = StrategyConfig::measure(Strategy::Pu).with_budget(budget);
        let r = run(&p, &password("topSecret"), &[], &cfg).unwrap();
        let now = (r.counters, r.sink_count);
        for (a, b) in [(last.0, now.0), (last.1, now.1)] {
            assert!(a.explicit <= b.explicit && a.observable <= b.observable && a.hidden <= b.hidden);
        }
        last = now;
    }
}

#[test]
fn pu_reads_of_partial_leaks_in_guards_stop() {
    let src = "y = false; if (h) { y = true; } if (y) { skip; }";
    let cfg = StrategyConfig::enforce_without_sink_stops(Strategy::Pu);
    let r = go(src, InitState::new().with("h", true, Label::H), cfg);
    assert!(matches!(r.outcome, Outcome::Stopped { reason: StopReason::PUUse(ref x), .. } if x == "y"));
}

#[test]
fn field_reads_through_sensitive_references_are_sensitive() {
    let src = "o = {a: 1}; markSrc(o); x = o.a;";
    let r = measure(src, InitState::new(), Strategy::Pu);
    assert!(r.env["x"].is_sensitive());
}

#[test]
fn policy_sources_are_marked_at_the_input_location() {
    let p = parse("sink(x);", "t.njs").unwrap();
    let init = InitState::new().with("x", 1i64, Label::L);
    let r = run(&p, &init, &["x".to_string()], &StrategyConfig::measure(Strategy::Pu)).unwrap();
    assert_eq!(
        r.trace.events[0],
        IFlowEvent::Source {
            v: 2,
            loc: Loc::input("x")
        }
    );
    assert_eq!(r.sink_count.explicit, 1);
}
