use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Security label. `P` marks a value as partially leaked and only arises
/// under the permissive-upgrade strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Label {
    #[default]
    L,
    H,
    P,
}

impl Label {
    pub fn is_sensitive(self) -> bool {
        self != Label::L
    }

    /// `L` is bottom; joining `H` with `P` gives `H`.
    pub fn join(self, other: Label) -> Label {
        match (self, other) {
            (Label::L, x) | (x, Label::L) => x,
            (Label::P, Label::P) => Label::P,
            _ => Label::H,
        }
    }

    pub fn leq(self, other: Label) -> bool {
        self.join(other) == other
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::L => "L",
            Label::H => "H",
            Label::P => "P",
        })
    }
}

/// Explicit, observable and hidden flow counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FlowCount {
    pub explicit: u64,
    pub observable: u64,
    pub hidden: u64,
}

impl FlowCount {
    pub const ZERO: FlowCount = FlowCount::new(0, 0, 0);

    pub const fn new(explicit: u64, observable: u64, hidden: u64) -> Self {
        FlowCount {
            explicit,
            observable,
            hidden,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == FlowCount::ZERO
    }

    /// Pointwise addition.
    pub fn join(self, other: FlowCount) -> FlowCount {
        FlowCount {
            explicit: self.explicit + other.explicit,
            observable: self.observable + other.observable,
            hidden: self.hidden + other.hidden,
        }
    }

    /// `self ⊑ other` iff `other` being zero forces `self` to be zero.
    pub fn leq(&self, other: &FlowCount) -> bool {
        !other.is_zero() || self.is_zero()
    }

    pub fn as_tuple(&self) -> (u64, u64, u64) {
        (self.explicit, self.observable, self.hidden)
    }
}

impl Add for FlowCount {
    type Output = FlowCount;

    fn add(self, rhs: FlowCount) -> FlowCount {
        self.join(rhs)
    }
}

impl AddAssign for FlowCount {
    fn add_assign(&mut self, rhs: FlowCount) {
        *self = self.join(rhs);
    }
}

impl fmt::Display for FlowCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.explicit, self.observable, self.hidden)
    }
}

/// Flow counts induced by writing a value labelled `new` over one labelled
/// `old` while the security stack holds `stack`. The hidden component is
/// always zero.
pub fn delta(old: Label, new: Label, stack: impl IntoIterator<Item = Label>) -> FlowCount {
    let fresh = !old.is_sensitive();
    let explicit = u64::from(fresh && new.is_sensitive());
    let observable = u64::from(fresh && stack.into_iter().any(Label::is_sensitive));
    FlowCount::new(explicit, observable, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_cases() {
        assert_eq!(delta(Label::L, Label::H, []), FlowCount::new(1, 0, 0));
        assert_eq!(delta(Label::L, Label::L, [Label::H]), FlowCount::new(0, 1, 0));
        assert_eq!(delta(Label::H, Label::H, [Label::H]), FlowCount::ZERO);
        assert_eq!(delta(Label::L, Label::L, []), FlowCount::ZERO);
        assert_eq!(delta(Label::L, Label::H, [Label::L, Label::H]), FlowCount::new(1, 1, 0));
        assert_eq!(delta(Label::L, Label::L, [Label::L]), FlowCount::ZERO);
        assert_eq!(delta(Label::P, Label::H, [Label::H]), FlowCount::ZERO);
    }

    #[test]
    fn label_lattice() {
        assert_eq!(Label::L.join(Label::H), Label::H);
        assert_eq!(Label::P.join(Label::L), Label::P);
        assert_eq!(Label::P.join(Label::H), Label::H);
        assert!(Label::L.leq(Label::P) && Label::L.leq(Label::H));
        assert!(!Label::H.leq(Label::L));
        assert!(Label::P.leq(Label::H) && !Label::H.leq(Label::P));
        assert!(!Label::L.is_sensitive() && Label::P.is_sensitive());
    }

    fn count() -> impl Strategy<Value = FlowCount> {
        (0u64..4, 0u64..4, 0u64..4).prop_map(|(e, o, h)| FlowCount::new(e, o, h))
    }

    fn label() -> impl Strategy<Value = Label> {
        prop_oneof![Just(Label::L), Just(Label::H), Just(Label::P)]
    }

    proptest! {
        #[test]
        fn join_is_commutative_and_associative(a in count(), b in count(), c in count()) {
            prop_assert_eq!(a.join(b), b.join(a));
            prop_assert_eq!(a.join(b).join(c), a.join(b.join(c)));
            prop_assert_eq!(a.join(FlowCount::ZERO), a);
        }

        #[test]
        fn leq_is_a_preorder(a in count(), b in count(), c in count()) {
            prop_assert!(a.leq(&a));
            if a.leq(&b) && b.leq(&c) {
                prop_assert!(a.leq(&c));
            }
            prop_assert!(a.leq(&a.join(b)));
        }

        #[test]
        fn delta_never_counts_hidden(old in label(), new in label(), stack in proptest::collection::vec(label(), 0..4)) {
            prop_assert_eq!(delta(old, new, stack).hidden, 0);
        }

        #[test]
        fn label_join_is_a_semilattice(a in label(), b in label(), c in label()) {
            prop_assert_eq!(a.join(b), b.join(a));
            prop_assert_eq!(a.join(b).join(c), a.join(b.join(c)));
            prop_assert_eq!(a.join(a), a);
            prop_assert!(a.leq(a.join(b)));
        }
    }
}
