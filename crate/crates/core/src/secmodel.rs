//! The security semi-lattice and the visibility relation between activities.
//!
//! A security class pairs a local level (L below H) with a global level: the
//! set of activity identities allowed to see a value. Classes are ordered by
//!
//! ```text
//! (S0, I0) <= (S1, I1)  iff  (S0, I0) = (S1, I1)
//!                        or  (S0 < S1 or S0 = S1 = L)  and  I0 subset I1
//! ```
//!
//! so distinct H classes are incomparable even when their global levels are
//! nested. Meets always exist (equal classes meet at themselves, anything
//! else at L with intersected global level); joins do not in general, which
//! is what confines H data to its home set of activities.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::{ConfigError, Configuration};
use crate::term::{ActivityId, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SecLevel {
    L,
    H,
}

impl fmt::Display for SecLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecLevel::L => write!(f, "L"),
            SecLevel::H => write!(f, "H"),
        }
    }
}

impl SecLevel {
    pub fn join(self, other: SecLevel) -> SecLevel {
        if self == SecLevel::H || other == SecLevel::H {
            SecLevel::H
        } else {
            SecLevel::L
        }
    }
}

/// Global level: the set of activities a value may flow to.
pub type GlobalLevel = BTreeSet<ActivityId>;

/// A security class (S, delta).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SecClass {
    pub local: SecLevel,
    pub global: GlobalLevel,
}

impl SecClass {
    pub fn new(local: SecLevel, global: GlobalLevel) -> Self {
        SecClass { local, global }
    }
}

impl fmt::Display for SecClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> =
            self.global.iter().map(|a| alloc::format!("{a}")).collect();
        write!(f, "({}, {{{}}})", self.local, names.join(", "))
    }
}

pub fn leq_local(a: SecLevel, b: SecLevel) -> bool {
    a <= b
}

/// The partial order on security classes.
pub fn leq_class(c0: &SecClass, c1: &SecClass) -> bool {
    if c0 == c1 {
        return true;
    }
    let local_ok = c0.local < c1.local || (c0.local == SecLevel::L && c1.local == SecLevel::L);
    local_ok && c0.global.is_subset(&c1.global)
}

/// Greatest lower bound; total, which makes the classes a meet semi-lattice.
pub fn meet_class(c0: &SecClass, c1: &SecClass) -> SecClass {
    if c0 == c1 {
        return c0.clone();
    }
    SecClass::new(SecLevel::L, c0.global.intersection(&c1.global).cloned().collect())
}

/// Security assignment: labels to local levels. Unlisted labels are public,
/// so the assignment is total with default L; `listed` keeps the explicit
/// domain for printing and for reporting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SecAssignment {
    map: BTreeMap<Label, SecLevel>,
}

impl SecAssignment {
    pub fn new() -> Self {
        SecAssignment { map: BTreeMap::new() }
    }

    pub fn from_pairs(pairs: &[(&str, SecLevel)]) -> Self {
        let mut s = SecAssignment::new();
        for (l, lv) in pairs {
            s.insert(l, *lv);
        }
        s
    }

    pub fn insert(&mut self, label: &str, level: SecLevel) {
        self.map.insert(String::from(label), level);
    }

    pub fn get(&self, label: &str) -> SecLevel {
        self.map.get(label).copied().unwrap_or(SecLevel::L)
    }

    pub fn listed(&self) -> impl Iterator<Item = (&Label, SecLevel)> {
        self.map.iter().map(|(l, lv)| (l, *lv))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Base visibility pairs (gamma, beta): gamma occurs in the body of a method
/// of beta's active object whose label is public under `sec`. The closure
/// adds reflexivity and transitivity; a pair (x, y) means x is visible to y.
pub fn visibility_closure(
    config: &Configuration,
    sec: &SecAssignment,
) -> BTreeSet<(ActivityId, ActivityId)> {
    let mut rel: BTreeSet<(ActivityId, ActivityId)> = BTreeSet::new();
    for alpha in config.activities.keys() {
        rel.insert((alpha.clone(), alpha.clone()));
    }
    for (beta, act) in &config.activities {
        if let crate::term::Term::Object(ms) = &act.active_object {
            for m in ms {
                if sec.get(&m.label) == SecLevel::L {
                    for gamma in m.body.act_refs() {
                        rel.insert((gamma, beta.clone()));
                    }
                }
            }
        }
    }
    // Transitive closure by saturation; configurations are small.
    loop {
        let mut added = false;
        let snapshot: Vec<(ActivityId, ActivityId)> = rel.iter().cloned().collect();
        for (x, y) in &snapshot {
            for (y2, z) in &snapshot {
                if y == y2 && !rel.contains(&(x.clone(), z.clone())) {
                    rel.insert((x.clone(), z.clone()));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    rel
}

/// Everything visible to `alpha`: the activities at or below it in the
/// visibility preorder, always including `alpha` itself.
pub fn visibility_range(
    alpha: &ActivityId,
    config: &Configuration,
    sec: &SecAssignment,
) -> Result<GlobalLevel, ConfigError> {
    if !config.activities.contains_key(alpha) {
        return Err(ConfigError::UnknownActivity(alpha.name.clone()));
    }
    let rel = visibility_closure(config, sec);
    Ok(rel
        .into_iter()
        .filter(|(_, y)| y == alpha)
        .map(|(x, _)| x)
        .collect())
}

/// The global level of an activity is its visibility range.
pub fn global_level(
    alpha: &ActivityId,
    config: &Configuration,
    sec: &SecAssignment,
) -> Result<GlobalLevel, ConfigError> {
    visibility_range(alpha, config, sec)
}
