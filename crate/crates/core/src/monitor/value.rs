use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::flow::{FlowCount, Label};
use crate::lang::{BaseValue, Name};

pub type ValueId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Addr(pub usize);

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Base(BaseValue),
    Addr(Addr),
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Base(b) => write!(f, "{b}"),
            Payload::Addr(a) => write!(f, "{a}"),
        }
    }
}

/// A runtime value: payload, label, accumulated flow counts and the id used
/// in iFlow traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Value {
    pub payload: Payload,
    pub label: Label,
    pub count: FlowCount,
    pub vid: ValueId,
}

impl Value {
    pub fn is_sensitive(&self) -> bool {
        self.label.is_sensitive()
    }

    pub fn addr(&self) -> Option<Addr> {
        match self.payload {
            Payload::Addr(a) => Some(a),
            Payload::Base(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cyclic heap through object {0}")]
pub struct CyclicHeap(pub Addr);

pub type Object = BTreeMap<Name, Value>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Heap {
    objects: Vec<Object>,
}

impl Heap {
    pub fn new() -> Self {
        Heap::default()
    }

    pub fn alloc(&mut self, obj: Object) -> Addr {
        self.objects.push(obj);
        Addr(self.objects.len() - 1)
    }

    pub fn get(&self, a: Addr) -> &Object {
        &self.objects[a.0]
    }

    pub fn get_mut(&mut self, a: Addr) -> &mut Object {
        &mut self.objects[a.0]
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// `v` followed by everything reachable from it, depth-first with fields
    /// in name order. Each object is expanded once.
    pub fn reachable<'a>(&'a self, v: &'a Value) -> Result<Vec<&'a Value>, CyclicHeap> {
        let mut out = Vec::new();
        let mut done = HashSet::new();
        let mut path = Vec::new();
        self.collect(v, &mut out, &mut done, &mut path)?;
        Ok(out)
    }

    fn collect<'a>(
        &'a self,
        v: &'a Value,
        out: &mut Vec<&'a Value>,
        done: &mut HashSet<Addr>,
        path: &mut Vec<Addr>,
    ) -> Result<(), CyclicHeap> {
        out.push(v);
        let Some(a) = v.addr() else { return Ok(()) };
        if path.contains(&a) {
            return Err(CyclicHeap(a));
        }
        if !done.insert(a) {
            return Ok(());
        }
        path.push(a);
        for field in self.get(a).values() {
            self.collect(field, out, done, path)?;
        }
        path.pop();
        Ok(())
    }

    /// Addresses reachable from `v`, including `v`'s own.
    pub fn reachable_addrs(&self, v: &Value) -> Result<Vec<Addr>, CyclicHeap> {
        Ok(self.reachable(v)?.into_iter().filter_map(Value::addr).collect())
    }

    pub fn reach_join_label(&self, v: &Value) -> Result<Label, CyclicHeap> {
        Ok(self.reachable(v)?.iter().fold(Label::L, |acc, u| acc.join(u.label)))
    }

    pub fn reach_join_count(&self, v: &Value) -> Result<FlowCount, CyclicHeap> {
        Ok(self.reachable(v)?.iter().fold(FlowCount::ZERO, |acc, u| acc + u.count))
    }

    /// Flattening of a value into base values paired with their field paths.
    pub fn to_val(&self, v: &Value) -> Result<BTreeSet<(BaseValue, Vec<Name>)>, CyclicHeap> {
        let mut out = BTreeSet::new();
        let mut path = Vec::new();
        let mut names = Vec::new();
        self.flatten_into(v, &mut names, &mut path, &mut out)?;
        Ok(out)
    }

    fn flatten_into(
        &self,
        v: &Value,
        names: &mut Vec<Name>,
        path: &mut Vec<Addr>,
        out: &mut BTreeSet<(BaseValue, Vec<Name>)>,
    ) -> Result<(), CyclicHeap> {
        match &v.payload {
            Payload::Base(b) => {
                out.insert((b.clone(), names.clone()));
            }
            Payload::Addr(a) => {
                if path.contains(a) {
                    return Err(CyclicHeap(*a));
                }
                path.push(*a);
                for (name, field) in self.get(*a) {
                    names.push(name.clone());
                    self.flatten_into(field, names, path, out)?;
                    names.pop();
                }
                path.pop();
            }
        }
        Ok(())
    }

    /// Readable rendering with object contents inlined.
    pub fn render(&self, v: &Value) -> String {
        let mut s = String::new();
        self.render_into(v, &mut s, 0);
        s
    }

    fn render_into(&self, v: &Value, out: &mut String, depth: usize) {
        match &v.payload {
            Payload::Base(b) => out.push_str(&b.to_string()),
            Payload::Addr(a) if depth > 8 => out.push_str(&a.to_string()),
            Payload::Addr(a) => {
                out.push('{');
                for (i, (name, field)) in self.get(*a).iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(name);
                    out.push_str(": ");
                    self.render_into(field, out, depth + 1);
                }
                out.push('}');
            }
        }
    }
}

/// Plain data for initial bindings: base values or nested objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitData {
    Bool(bool),
    Int(i64),
    Str(String),
    Object(BTreeMap<Name, InitData>),
}

impl From<BaseValue> for InitData {
    fn from(b: BaseValue) -> Self {
        match b {
            BaseValue::Bool(x) => InitData::Bool(x),
            BaseValue::Int(n) => InitData::Int(n),
            BaseValue::Str(s) => InitData::Str(s),
        }
    }
}

/// One initial variable binding; the label applies to the value and to
/// everything reachable from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub value: InitData,
    #[serde(default)]
    pub label: Label,
}

impl Binding {
    pub fn new(value: impl Into<InitData>, label: Label) -> Self {
        Binding {
            value: value.into(),
            label,
        }
    }
}

impl From<bool> for InitData {
    fn from(b: bool) -> Self {
        InitData::Bool(b)
    }
}

impl From<i64> for InitData {
    fn from(n: i64) -> Self {
        InitData::Int(n)
    }
}

impl From<&str> for InitData {
    fn from(s: &str) -> Self {
        InitData::Str(s.to_string())
    }
}

/// Initial environment of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitState {
    #[serde(default)]
    pub env: BTreeMap<Name, Binding>,
}

impl InitState {
    pub fn new() -> Self {
        InitState::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<InitData>, label: Label) -> Self {
        self.env.insert(name.to_string(), Binding::new(value, label));
        self
    }

    /// Bindings of `other` override those of `self`.
    pub fn overlay(&self, other: &InitState) -> InitState {
        let mut env = self.env.clone();
        env.extend(other.env.iter().map(|(k, v)| (k.clone(), v.clone())));
        InitState { env }
    }
}
