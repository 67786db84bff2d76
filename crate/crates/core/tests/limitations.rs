//! Known gaps, pinned so that a change in behavior is noticed.

use nanoflow::lang::{parse, Loc};
use nanoflow::monitor::{run, FlowCount, InitState, Label, Strategy, StrategyConfig};
use nanoflow::secrecy::{check_secrecy, Condition, LowDomain, SUITE_BUDGET};
use nanoflow::upgrades::{default_max_rounds, infer_upgrades, TestSuite, UpgradePlan};

const ALIAS: &str = "o1 = {a: 1};
o2 = {a: 1};
p = o2;
if (h) {
  p = o1;
}
p.a = 5;
sink(o2.a);
";

const LOCATION: &str = "y = \"\";
z = \"\";
if (10 < location && location < 20) {
  y = \"Home\";
}
z = \"You are at \" + y;
";

fn h(b: bool) -> InitState {
    InitState::new().with("h", b, Label::H)
}

#[test]
fn aliased_field_write_escapes_the_counters() {
    // With h true the write lands in o1, so o2.a keeps its low label and a
    // zero count although its value depends on h.
    let p = parse(ALIAS, "alias.njs").unwrap();
    let r = run(&p, &h(true), &[], &StrategyConfig::measure(Strategy::Pu)).unwrap();
    assert!(r.completed());
    assert_eq!(r.sink_count, FlowCount::ZERO);
    let verdict = check_secrecy(
        Condition::Observable,
        &p,
        &h(true),
        &[],
        &LowDomain::default(),
        SUITE_BUDGET,
    );
    assert_eq!(verdict.name(), "fails");
}

#[test]
fn inferred_upgrade_does_not_cover_the_alias() {
    let p = parse(ALIAS, "alias.njs").unwrap();
    let suite = TestSuite::new(vec![h(true)]);
    let plan = infer_upgrades(&p, &suite, &[], default_max_rounds(&p)).unwrap();
    let mut want = UpgradePlan::new();
    want.insert(Loc::new("alias.njs", 7, 1), "p");
    assert_eq!(plan, want);
    let r = run(&p, &h(true), &[], &plan.apply(StrategyConfig::measure(Strategy::Pu))).unwrap();
    assert_eq!(r.sink_count, FlowCount::ZERO);
}

#[test]
fn untested_branch_yields_no_upgrade() {
    // Only a run outside the range is tested, so the branch never executes,
    // nothing is partially leaked, and the hidden flow into y is missed.
    let p = parse(LOCATION, "loc.njs").unwrap();
    let outside = InitState::new().with("location", 5i64, Label::H);
    let plan = infer_upgrades(&p, &TestSuite::new(vec![outside.clone()]), &[], default_max_rounds(&p)).unwrap();
    assert!(plan.is_empty());
    let r = run(&p, &outside, &[], &StrategyConfig::measure(Strategy::Pu)).unwrap();
    assert_eq!(r.counters.hidden, 0);
    // The same run with a test inside the range finds it.
    let inside = InitState::new().with("location", 15i64, Label::H);
    let plan = infer_upgrades(
        &p,
        &TestSuite::new(vec![outside.clone(), inside]),
        &[],
        default_max_rounds(&p),
    )
    .unwrap();
    let r = run(&p, &outside, &[], &plan.apply(StrategyConfig::measure(Strategy::Pu))).unwrap();
    assert_eq!(r.counters.hidden, 1);
}
