use std::collections::{BTreeMap, HashSet};

use super::flow::{delta, FlowCount, Label};
use super::value::{Addr, Heap, InitData, InitState, Payload, Value, ValueId};
use super::{
    AssignRecord, BranchRecord, EvalError, Mode, Observation, Outcome, RunError, RunResult, StopReason, Strategy,
    StrategyConfig, Violation,
};
use crate::lang::{BaseValue, BinOp, Expr, Loc, Name, Stmt};
use crate::trace::{IFlowEvent, Trace, ValueInfo};

/// Execution steps reported to an [`Observer`], used by program extraction.
#[derive(Debug, Clone, Copy)]
pub enum ExecEvent<'a> {
    /// An assignment, field assignment or sink statement finished.
    Executed(&'a Stmt),
    /// A conditional (or loop guard) chose a branch.
    Branch { guard: &'a Expr, loc: &'a Loc, taken: bool },
    /// The branch opened by the matching `Branch` ended.
    Pop,
}

pub trait Observer {
    fn observe(&mut self, event: ExecEvent<'_>);
}

impl Observer for () {
    fn observe(&mut self, _: ExecEvent<'_>) {}
}

enum Task<'p> {
    Exec(&'p Stmt),
    Pop { emitted: bool, loc: &'p Loc },
}

struct Frame {
    label: Label,
}

enum Halt {
    Stop(StopReason),
    Error(EvalError),
}

impl From<EvalError> for Halt {
    fn from(e: EvalError) -> Self {
        Halt::Error(e)
    }
}

impl From<super::value::CyclicHeap> for Halt {
    fn from(e: super::value::CyclicHeap) -> Self {
        Halt::Error(EvalError::CyclicHeap(e))
    }
}

/// Place holding a value: a variable or an object field.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Var(Name),
    Field(Addr, Name),
}

struct Machine<'p, 'o> {
    cfg: &'p StrategyConfig,
    env: BTreeMap<Name, Value>,
    heap: Heap,
    stack: Vec<Frame>,
    next_vid: ValueId,
    counters: FlowCount,
    sink_count: FlowCount,
    trace: Trace,
    assign_log: Vec<AssignRecord>,
    branch_log: Vec<BranchRecord>,
    violations: Vec<Violation>,
    outputs: Vec<Observation>,
    observer: &'o mut dyn Observer,
}

type Step<T = ()> = Result<T, Halt>;

fn type_error(msg: String) -> Halt {
    Halt::Error(EvalError::TypeError(msg))
}

fn describe(p: &Payload) -> &'static str {
    match p {
        Payload::Base(b) => b.type_name(),
        Payload::Addr(_) => "object",
    }
}

fn apply(op: BinOp, a: &Payload, b: &Payload) -> Result<Payload, Halt> {
    use BaseValue::*;
    let bad = || type_error(format!("`{}` on {} and {}", op.symbol(), describe(a), describe(b)));
    let result = match op {
        BinOp::StrictEq => Bool(a == b),
        BinOp::StrictNe => Bool(a != b),
        _ => {
            let (Payload::Base(x), Payload::Base(y)) = (a, b) else {
                return Err(bad());
            };
            match (op, x, y) {
                (BinOp::Add, Int(m), Int(n)) => Int(m.checked_add(*n).ok_or(Halt::Error(EvalError::Overflow))?),
                (BinOp::Sub, Int(m), Int(n)) => Int(m.checked_sub(*n).ok_or(Halt::Error(EvalError::Overflow))?),
                (BinOp::Mul, Int(m), Int(n)) => Int(m.checked_mul(*n).ok_or(Halt::Error(EvalError::Overflow))?),
                (BinOp::Add, Str(s), Str(t)) => Str(format!("{s}{t}")),
                (BinOp::Add, Str(s), Int(_) | Bool(_)) => Str(format!("{s}{y}")),
                (BinOp::Add, Int(_) | Bool(_), Str(t)) => Str(format!("{x}{t}")),
                (BinOp::Lt, Int(m), Int(n)) => Bool(m < n),
                (BinOp::Lt, Str(s), Str(t)) => Bool(s < t),
                (BinOp::And, Bool(p), Bool(q)) => Bool(*p && *q),
                (BinOp::Or, Bool(p), Bool(q)) => Bool(*p || *q),
                _ => return Err(bad()),
            }
        }
    };
    Ok(Payload::Base(result))
}

impl<'p, 'o> Machine<'p, 'o> {
    fn fresh(&mut self) -> ValueId {
        let v = self.next_vid;
        self.next_vid += 1;
        v
    }

    fn new_value(&mut self, payload: Payload) -> Value {
        Value {
            payload,
            label: Label::L,
            count: FlowCount::ZERO,
            vid: self.fresh(),
        }
    }

    fn note(&mut self, v: &Value) {
        let info = ValueInfo {
            label: v.label,
            show: self.heap.render(v),
        };
        self.trace.values.insert(v.vid, info);
    }

    fn emit(&mut self, event: IFlowEvent) {
        self.trace.events.push(event);
    }

    fn stack_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.stack.iter().map(|f| f.label)
    }

    fn stack_sensitive(&self) -> bool {
        self.stack_labels().any(Label::is_sensitive)
    }

    fn pc(&self) -> Label {
        self.stack_labels().fold(Label::L, Label::join)
    }

    fn violation(&mut self, reason: StopReason, loc: &Loc) {
        self.violations.push(Violation {
            reason,
            loc: loc.clone(),
        });
    }

    /// Reading a partially leaked value.
    fn check_use(&mut self, v: &Value, var: &str, loc: &Loc) -> Step {
        if self.cfg.strategy == Strategy::Pu && v.label == Label::P {
            let reason = StopReason::PUUse(var.to_string());
            if self.cfg.mode == Mode::Enforce {
                return Err(Halt::Stop(reason));
            }
            self.violation(reason, loc);
        }
        Ok(())
    }

    fn lookup(&self, x: &str) -> Step<Value> {
        self.env
            .get(x)
            .cloned()
            .ok_or_else(|| Halt::Error(EvalError::UnboundName(x.to_string())))
    }

    fn eval(&mut self, e: &Expr, loc: &Loc) -> Step<Value> {
        match e {
            Expr::Lit(b) => Ok(self.new_value(Payload::Base(b.clone()))),
            Expr::Var(x) => {
                let v = self.lookup(x)?;
                self.check_use(&v, x, loc)?;
                Ok(v)
            }
            Expr::Field(x, f) => {
                let obj = self.lookup(x)?;
                self.check_use(&obj, x, loc)?;
                let Some(a) = obj.addr() else {
                    return Err(type_error(format!(
                        "field access `{x}.{f}` on {}",
                        describe(&obj.payload)
                    )));
                };
                let field = self
                    .heap
                    .get(a)
                    .get(f)
                    .cloned()
                    .ok_or_else(|| Halt::Error(EvalError::NoSuchField(a, f.clone())))?;
                self.check_use(&field, x, loc)?;
                if !obj.is_sensitive() {
                    return Ok(field);
                }
                let result = Value {
                    payload: field.payload.clone(),
                    label: obj.label.join(field.label),
                    count: obj.count + field.count,
                    vid: self.fresh(),
                };
                self.record_op(&obj, Some(&field), &result, loc);
                Ok(result)
            }
            Expr::Binary(op, lhs, rhs) => {
                let a = self.eval(lhs, loc)?;
                let b = self.eval(rhs, loc)?;
                let payload = apply(*op, &a.payload, &b.payload)?;
                let result = Value {
                    payload,
                    label: a.label.join(b.label),
                    count: a.count + b.count,
                    vid: self.fresh(),
                };
                if a.is_sensitive() || b.is_sensitive() {
                    self.record_op(&a, Some(&b), &result, loc);
                }
                Ok(result)
            }
            Expr::Not(inner) => {
                let a = self.eval(inner, loc)?;
                let Payload::Base(BaseValue::Bool(b)) = a.payload else {
                    return Err(type_error(format!("`!` on {}", describe(&a.payload))));
                };
                let result = Value {
                    payload: Payload::Base(BaseValue::Bool(!b)),
                    label: a.label,
                    count: a.count,
                    vid: self.fresh(),
                };
                if a.is_sensitive() {
                    self.record_op(&a, None, &result, loc);
                }
                Ok(result)
            }
            Expr::Object(fields) => {
                let mut obj = BTreeMap::new();
                for (name, fe) in fields {
                    let v = self.eval(fe, loc)?;
                    obj.insert(name.clone(), v);
                }
                let a = self.heap.alloc(obj);
                Ok(self.new_value(Payload::Addr(a)))
            }
        }
    }

    fn record_op(&mut self, a: &Value, b: Option<&Value>, result: &Value, loc: &Loc) {
        self.note(a);
        if let Some(b) = b {
            self.note(b);
        }
        self.note(result);
        self.emit(IFlowEvent::Op {
            a1: a.vid,
            a2: b.map(|b| b.vid),
            new: result.vid,
            loc: loc.clone(),
        });
    }

    fn slot_value(&self, slot: &Slot) -> Option<&Value> {
        match slot {
            Slot::Var(x) => self.env.get(x),
            Slot::Field(a, f) => self.heap.get(*a).get(f),
        }
    }

    fn slot_value_mut(&mut self, slot: &Slot) -> &mut Value {
        match slot {
            Slot::Var(x) => self.env.get_mut(x).expect("slot exists"),
            Slot::Field(a, f) => self.heap.get_mut(*a).get_mut(f).expect("slot exists"),
        }
    }

    /// `root` and every slot reachable from it, depth-first, fields in name order.
    fn slots(&self, root: Slot) -> Result<Vec<Slot>, Halt> {
        let mut out = Vec::new();
        let mut done = HashSet::new();
        let mut path = Vec::new();
        self.collect_slots(root, &mut out, &mut done, &mut path)?;
        Ok(out)
    }

    fn collect_slots(
        &self,
        slot: Slot,
        out: &mut Vec<Slot>,
        done: &mut HashSet<Addr>,
        path: &mut Vec<Addr>,
    ) -> Result<(), Halt> {
        let addr = self.slot_value(&slot).and_then(Value::addr);
        out.push(slot);
        let Some(a) = addr else { return Ok(()) };
        if path.contains(&a) {
            return Err(super::value::CyclicHeap(a).into());
        }
        if !done.insert(a) {
            return Ok(());
        }
        path.push(a);
        let names: Vec<Name> = self.heap.get(a).keys().cloned().collect();
        for f in names {
            self.collect_slots(Slot::Field(a, f), out, done, path)?;
        }
        path.pop();
        Ok(())
    }

    /// Marks `x` and everything reachable from it sensitive, emitting one
    /// source event per value.
    fn mark_source(&mut self, x: &str, loc: &Loc) -> Step {
        self.lookup(x)?;
        for slot in self.slots(Slot::Var(x.to_string()))? {
            let fresh = self.slot_value(&slot).is_some_and(|v| v.label == Label::L);
            let vid = if fresh { Some(self.fresh()) } else { None };
            let v = self.slot_value_mut(&slot);
            v.label = Label::H;
            if let Some(vid) = vid {
                v.vid = vid;
            }
            let v = v.clone();
            self.note(&v);
            self.emit(IFlowEvent::Source {
                v: v.vid,
                loc: loc.clone(),
            });
        }
        Ok(())
    }

    /// Raises `x` and everything reachable from it to `H`; each component
    /// that was `L` counts one hidden flow.
    fn upgrade(&mut self, x: &str, loc: &Loc) -> Step {
        self.lookup(x)?;
        for slot in self.slots(Slot::Var(x.to_string()))? {
            let old = self.slot_value(&slot).cloned().expect("slot exists");
            match old.label {
                Label::H => {}
                Label::P => self.slot_value_mut(&slot).label = Label::H,
                Label::L => {
                    let vid = self.fresh();
                    let v = self.slot_value_mut(&slot);
                    v.label = Label::H;
                    v.vid = vid;
                    v.count.hidden += 1;
                    let new = v.clone();
                    self.counters.hidden += 1;
                    self.note(&old);
                    self.note(&new);
                    self.emit(IFlowEvent::Upgrade {
                        old: old.vid,
                        new: new.vid,
                        loc: loc.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Id recorded as the overwritten value of a write.
    fn old_vid(&self, old: Option<&Value>) -> Result<Option<ValueId>, Halt> {
        let Some(old) = old else { return Ok(None) };
        if old.is_sensitive() {
            return Ok(Some(old.vid));
        }
        let reach = self.heap.reachable(old)?;
        Ok(Some(reach.iter().find(|u| u.is_sensitive()).map_or(old.vid, |u| u.vid)))
    }

    /// Shared part of variable and field assignment.
    fn write(&mut self, slot: Slot, target: &str, v: Value, stmt: &'p Stmt, loc: &Loc) -> Step {
        let old = self.slot_value(&slot).cloned();
        let old_label = match &old {
            Some(o) => self.heap.reach_join_label(o)?,
            None => Label::L,
        };
        let sensitive_ctx = self.stack_sensitive();
        let upgrade_in_ctx = sensitive_ctx && !old_label.is_sensitive();
        if self.cfg.strategy == Strategy::Nsu && upgrade_in_ctx && !self.cfg.suppressed.contains(loc) {
            let reason = StopReason::NSUWrite(target.to_string());
            if self.cfg.mode == Mode::Enforce {
                return Err(Halt::Stop(reason));
            }
            self.violation(reason, loc);
        }
        let label = match self.cfg.strategy {
            Strategy::Taint => v.label,
            Strategy::Pu if upgrade_in_ctx => Label::P,
            _ => v.label.join(self.pc()),
        };
        let d = delta(old_label, v.label, self.stack_labels());
        let vid = if label.is_sensitive() == v.is_sensitive() {
            v.vid
        } else {
            self.fresh()
        };
        let stored = Value {
            payload: v.payload,
            label,
            count: v.count + d,
            vid,
        };
        self.counters += d;
        if stored.is_sensitive() || sensitive_ctx {
            let old_vid = self.old_vid(old.as_ref())?;
            if let Some(o) = &old {
                let shown = match old_vid {
                    Some(id) if id != o.vid => self.heap.reachable(o)?.into_iter().find(|u| u.vid == id).cloned(),
                    _ => Some(o.clone()),
                };
                if let Some(s) = shown {
                    self.note(&s);
                }
            }
            self.note(&stored);
            self.emit(IFlowEvent::Write {
                old: old_vid,
                new: stored.vid,
                loc: loc.clone(),
            });
        }
        self.assign_log.push(AssignRecord {
            loc: loc.clone(),
            target: target.to_string(),
            sensitive: stored.is_sensitive(),
        });
        match slot {
            Slot::Var(x) => {
                self.env.insert(x, stored);
            }
            Slot::Field(a, f) => {
                self.heap.get_mut(a).insert(f, stored);
            }
        }
        self.observer.observe(ExecEvent::Executed(stmt));
        Ok(())
    }

    fn sink(&mut self, arg: &Expr, stmt: &'p Stmt, loc: &Loc) -> Step {
        let seen = self.violations.len();
        let v = self.eval(arg, loc)?;
        let reach: Vec<Value> = self.heap.reachable(&v)?.into_iter().cloned().collect();
        let label = reach.iter().fold(Label::L, |acc, u| acc.join(u.label));
        // P reached only through the heap has not been reported by eval.
        let reported = self.violations[seen..]
            .iter()
            .any(|v| matches!(v.reason, StopReason::PUUse(_)));
        if self.cfg.strategy == Strategy::Pu && !reported && reach.iter().any(|u| u.label == Label::P) {
            let root = arg.free_vars().first().map_or("<sink>", |s| *s).to_string();
            let reason = StopReason::PUUse(root);
            if self.cfg.mode == Mode::Enforce {
                return Err(Halt::Stop(reason));
            }
            self.violation(reason, loc);
        }
        if label.is_sensitive() && self.cfg.mode == Mode::Enforce && self.cfg.stop_on_sink {
            return Err(Halt::Stop(StopReason::SinkViolation));
        }
        let ka = reach.iter().fold(FlowCount::ZERO, |acc, u| acc + u.count);
        self.sink_count += ka + delta(Label::L, label, self.stack_labels());
        let observation = self.heap.to_val(&v)?;
        self.outputs.push(observation);
        for u in reach.iter().filter(|u| u.is_sensitive()) {
            self.note(u);
            self.emit(IFlowEvent::Sink {
                v: u.vid,
                loc: loc.clone(),
            });
        }
        if label.is_sensitive() {
            self.violation(StopReason::SinkViolation, loc);
        }
        self.observer.observe(ExecEvent::Executed(stmt));
        Ok(())
    }

    fn open_branch(
        &mut self,
        guard: &'p Expr,
        loc: &'p Loc,
        chosen: &[&'p Stmt],
        taken: bool,
        v: &Value,
        tasks: &mut Vec<Task<'p>>,
    ) {
        let non_trivial = chosen.iter().any(|s| **s != Stmt::Skip);
        let emitted = v.is_sensitive() && non_trivial;
        self.branch_log.push(BranchRecord {
            loc: loc.clone(),
            guard_sensitive: v.is_sensitive(),
            taken,
        });
        self.observer.observe(ExecEvent::Branch { guard, loc, taken });
        if emitted {
            self.note(v);
            self.emit(IFlowEvent::Push {
                v: v.vid,
                loc: loc.clone(),
            });
        }
        self.stack.push(Frame { label: v.label });
        tasks.push(Task::Pop { emitted, loc });
        for s in chosen.iter().rev() {
            tasks.push(Task::Exec(s));
        }
    }

    fn exec(&mut self, stmt: &'p Stmt, tasks: &mut Vec<Task<'p>>) -> Step {
        if let Some(loc) = stmt.loc() {
            let names: Vec<Name> = self
                .cfg
                .upgrades
                .range((loc.clone(), String::new())..)
                .take_while(|(l, _)| l == loc)
                .map(|(_, x)| x.clone())
                .collect();
            for x in names {
                if self.env.contains_key(&x) {
                    self.upgrade(&x, loc)?;
                }
            }
        }
        match stmt {
            Stmt::Skip => {}
            Stmt::Seq(a, b) => {
                tasks.push(Task::Exec(b));
                tasks.push(Task::Exec(a));
            }
            Stmt::Assign { target, rhs, loc } => {
                let v = self.eval(rhs, loc)?;
                self.write(Slot::Var(target.clone()), target, v, stmt, loc)?;
            }
            Stmt::AssignField { obj, field, rhs, loc } => {
                let v = self.eval(rhs, loc)?;
                let o = self.lookup(obj)?;
                self.check_use(&o, obj, loc)?;
                let Some(a) = o.addr() else {
                    return Err(type_error(format!(
                        "field assignment `{obj}.{field}` on {}",
                        describe(&o.payload)
                    )));
                };
                if self.heap.reachable_addrs(&v)?.contains(&a) {
                    return Err(super::value::CyclicHeap(a).into());
                }
                self.write(Slot::Field(a, field.clone()), &format!("{obj}.{field}"), v, stmt, loc)?;
            }
            Stmt::If {
                guard,
                then_branch,
                else_branch,
                loc,
            } => {
                let v = self.eval(guard, loc)?;
                let taken = v.payload == Payload::Base(BaseValue::Bool(true));
                let chosen: &Stmt = if taken { then_branch } else { else_branch };
                self.open_branch(guard, loc, &[chosen], taken, &v, tasks);
            }
            Stmt::While { guard, body, loc } => {
                let v = self.eval(guard, loc)?;
                let taken = v.payload == Payload::Base(BaseValue::Bool(true));
                if taken {
                    self.open_branch(guard, loc, &[body, stmt], taken, &v, tasks);
                } else {
                    self.open_branch(guard, loc, &[], taken, &v, tasks);
                }
            }
            Stmt::Sink { arg, loc } => self.sink(arg, stmt, loc)?,
            Stmt::Upgrade { target, loc } => self.upgrade(target, loc)?,
            Stmt::MarkSrc { target, loc } => self.mark_source(target, loc)?,
        }
        Ok(())
    }

    fn pop(&mut self, emitted: bool, loc: &Loc) {
        self.stack.pop();
        if emitted {
            self.emit(IFlowEvent::Pop { loc: loc.clone() });
        }
        self.observer.observe(ExecEvent::Pop);
    }

    fn build(&mut self, data: &InitData, label: Label) -> Value {
        let payload = match data {
            InitData::Bool(b) => Payload::Base(BaseValue::Bool(*b)),
            InitData::Int(n) => Payload::Base(BaseValue::Int(*n)),
            InitData::Str(s) => Payload::Base(BaseValue::Str(s.clone())),
            InitData::Object(fields) => {
                let obj = fields.iter().map(|(k, d)| (k.clone(), self.build(d, label))).collect();
                Payload::Addr(self.heap.alloc(obj))
            }
        };
        Value {
            payload,
            label,
            count: FlowCount::ZERO,
            vid: self.fresh(),
        }
    }

    fn initialize(&mut self, init: &InitState, sources: &[Name]) -> Step {
        for (name, binding) in &init.env {
            let v = self.build(&binding.value, binding.label);
            self.env.insert(name.clone(), v);
        }
        for (name, binding) in &init.env {
            if binding.label.is_sensitive() {
                let loc = Loc::input(name);
                for slot in self.slots(Slot::Var(name.clone()))? {
                    let v = self.slot_value(&slot).cloned().expect("slot exists");
                    self.note(&v);
                    self.emit(IFlowEvent::Source {
                        v: v.vid,
                        loc: loc.clone(),
                    });
                }
            }
        }
        for name in sources {
            self.mark_source(name, &Loc::input(name))?;
        }
        Ok(())
    }
}

/// Runs `program` from `init` with the policy `sources` marked sensitive.
pub fn run(program: &Stmt, init: &InitState, sources: &[Name], cfg: &StrategyConfig) -> Result<RunResult, RunError> {
    run_observed(program, init, sources, cfg, &mut ())
}

pub fn run_observed(
    program: &Stmt,
    init: &InitState,
    sources: &[Name],
    cfg: &StrategyConfig,
    observer: &mut dyn Observer,
) -> Result<RunResult, RunError> {
    let file = program.locs().first().map_or(String::new(), |l| l.file.to_string());
    let mut m = Machine {
        cfg,
        env: BTreeMap::new(),
        heap: Heap::new(),
        stack: Vec::new(),
        next_vid: 1,
        counters: FlowCount::ZERO,
        sink_count: FlowCount::ZERO,
        trace: Trace::new(file, cfg.strategy.name()),
        assign_log: Vec::new(),
        branch_log: Vec::new(),
        violations: Vec::new(),
        outputs: Vec::new(),
        observer,
    };
    let fail = |h: Halt, loc: &Loc| match h {
        Halt::Error(kind) => RunError { kind, loc: loc.clone() },
        Halt::Stop(_) => unreachable!("initialization never stops"),
    };
    if let Err(h) = m.initialize(init, sources) {
        let loc = match &h {
            Halt::Error(EvalError::UnboundName(x)) => Loc::input(x),
            _ => Loc::input("init"),
        };
        return Err(fail(h, &loc));
    }
    let mut tasks = vec![Task::Exec(program)];
    let mut steps = 0u64;
    let mut outcome = Outcome::Completed;
    while let Some(task) = tasks.pop() {
        if steps >= cfg.budget {
            outcome = Outcome::BudgetExhausted;
            break;
        }
        steps += 1;
        let (result, loc) = match task {
            Task::Exec(stmt) => (m.exec(stmt, &mut tasks), stmt.loc()),
            Task::Pop { emitted, loc } => {
                m.pop(emitted, loc);
                (Ok(()), Some(loc))
            }
        };
        match result {
            Ok(()) => {}
            Err(Halt::Stop(reason)) => {
                let loc = loc.expect("only located statements stop").clone();
                m.violation(reason.clone(), &loc);
                outcome = Outcome::Stopped { reason, loc };
                break;
            }
            Err(Halt::Error(kind)) => {
                return Err(RunError {
                    kind,
                    loc: loc.expect("only located statements fail").clone(),
                })
            }
        }
    }
    Ok(RunResult {
        outcome,
        trace: m.trace,
        counters: m.counters,
        sink_count: m.sink_count,
        assign_log: m.assign_log,
        branch_log: m.branch_log,
        violations: m.violations,
        outputs: m.outputs,
        env: m.env,
        heap: m.heap,
        steps,
    })
}
