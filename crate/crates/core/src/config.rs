//! Configurations: parallel activities with request queues and an immutable
//! active object each.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::{ActivityId, FutureId, Label, Term};

/// One pending request: a future identity and the term computing its value.
/// The origin records which method call created the request (absent for
/// initial requests installed by `init_conf` or written directly in source)
/// and whether the caller was another activity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RequestEntry {
    pub future: FutureId,
    pub term: Term,
    pub origin_label: Option<Label>,
    pub origin_remote: bool,
}

impl RequestEntry {
    pub fn initial(future: FutureId, term: Term) -> Self {
        RequestEntry { future, term, origin_label: None, origin_remote: false }
    }
}

/// An activity: a request queue (newest first, matching the reduction rules
/// which prepend) and an immutable active object.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Activity {
    pub queue: Vec<RequestEntry>,
    pub active_object: Term,
}

impl Activity {
    pub fn new(active_object: Term) -> Self {
        Activity { queue: Vec::new(), active_object }
    }

    pub fn request(&self, f: FutureId) -> Option<&RequestEntry> {
        self.queue.iter().find(|r| r.future == f)
    }
}

/// A whole configuration. Fresh-name counters live in the configuration so
/// that step enumeration is deterministic.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Configuration {
    pub activities: BTreeMap<ActivityId, Activity>,
    pub next_fut: u32,
    pub next_act: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    /// `init_conf` requires a static closed program.
    NotStatic(String),
    UnknownFuture(FutureId),
    UnknownActivity(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::NotStatic(why) => write!(f, "program is not static: {why}"),
            ConfigError::UnknownFuture(fut) => write!(f, "unknown future {fut}"),
            ConfigError::UnknownActivity(name) => write!(f, "unknown activity {name}"),
        }
    }
}

impl Default for Configuration {
    fn default() -> Self {
        Self::new()
    }
}

impl Configuration {
    pub fn new() -> Self {
        Configuration { activities: BTreeMap::new(), next_fut: 0, next_act: 0 }
    }

    /// Declares a new activity with the given display name and active object.
    pub fn add_activity(&mut self, name: &str, active_object: Term) -> ActivityId {
        let id = ActivityId::new(self.next_act, name);
        self.next_act += 1;
        self.activities.insert(id.clone(), Activity::new(active_object));
        id
    }

    pub fn fresh_future(&mut self) -> FutureId {
        let f = FutureId(self.next_fut);
        self.next_fut += 1;
        f
    }

    /// Draws a fresh activity identity named `gammaN`, skipping display names
    /// already in use so printed configurations stay unambiguous.
    pub fn fresh_activity_name(&self) -> String {
        let taken: BTreeSet<&str> =
            self.activities.keys().map(|a| a.name.as_str()).collect();
        let mut n = self.next_act;
        loop {
            let cand = format!("gamma{n}");
            if !taken.contains(cand.as_str()) {
                return cand;
            }
            n += 1;
        }
    }

    pub fn get(&self, alpha: &ActivityId) -> Option<&Activity> {
        self.activities.get(alpha)
    }

    pub fn find_activity(&self, name: &str) -> Option<ActivityId> {
        self.activities.keys().find(|a| a.name == name).cloned()
    }

    /// All future identities present in some queue.
    pub fn futures(&self) -> BTreeSet<FutureId> {
        self.activities
            .values()
            .flat_map(|a| a.queue.iter().map(|r| r.future))
            .collect()
    }

    /// The activity whose queue holds future `f`.
    pub fn future_home(&self, f: FutureId) -> Option<&ActivityId> {
        self.activities
            .iter()
            .find(|(_, act)| act.queue.iter().any(|r| r.future == f))
            .map(|(id, _)| id)
    }

    /// Home activity and originating method label of a future.
    pub fn future_origin(
        &self,
        f: FutureId,
    ) -> Result<(ActivityId, Option<Label>), ConfigError> {
        for (id, act) in &self.activities {
            if let Some(r) = act.request(f) {
                return Ok((id.clone(), r.origin_label.clone()));
            }
        }
        Err(ConfigError::UnknownFuture(f))
    }

    /// Well-formedness: every activity reference names a declared activity,
    /// every future reference names an existing request, future identities
    /// are globally unique, and every stored term is closed.
    pub fn is_wellformed(&self) -> bool {
        self.wellformedness_error().is_none()
    }

    /// First well-formedness defect found, as a human-readable description.
    pub fn wellformedness_error(&self) -> Option<String> {
        let declared: BTreeSet<&ActivityId> = self.activities.keys().collect();
        let mut futures = BTreeSet::new();
        for act in self.activities.values() {
            for r in &act.queue {
                if !futures.insert(r.future) {
                    return Some(format!("future {} bound by two requests", r.future));
                }
            }
        }
        for (id, act) in &self.activities {
            let mut terms: Vec<(&Term, String)> =
                alloc::vec![(&act.active_object, format!("active object of {id}"))];
            for r in &act.queue {
                terms.push((&r.term, format!("request {} of {id}", r.future)));
            }
            for (t, whom) in terms {
                for a in t.act_refs() {
                    if !declared.contains(&a) {
                        return Some(format!("{whom} references undeclared activity {a}"));
                    }
                }
                for f in t.fut_refs() {
                    if !futures.contains(&f) {
                        return Some(format!("{whom} references unknown future {f}"));
                    }
                }
                if !t.free_vars().is_empty() {
                    let x = t.free_vars().into_iter().next().unwrap();
                    return Some(format!("{whom} has free variable {x}"));
                }
                if t.has_free_this() {
                    return Some(format!("{whom} has a free this"));
                }
            }
        }
        None
    }
}

/// Builds the initial configuration of a static program: a single activity
/// with an empty active object and one request computing the program.
pub fn init_conf(program: Term) -> Result<Configuration, ConfigError> {
    if !program.is_static() {
        return Err(ConfigError::NotStatic(String::from(
            "contains activity or future references",
        )));
    }
    if let Some(x) = program.free_vars().into_iter().next() {
        return Err(ConfigError::NotStatic(format!("free variable {x}")));
    }
    if program.has_free_this() {
        return Err(ConfigError::NotStatic(String::from("free this")));
    }
    let mut c = Configuration::new();
    let alpha = c.add_activity("alpha", Term::empty());
    let f0 = c.fresh_future();
    c.activities
        .get_mut(&alpha)
        .unwrap()
        .queue
        .push(RequestEntry::initial(f0, program));
    Ok(c)
}
