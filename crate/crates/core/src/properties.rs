//! Executable metatheory: preservation and confinement over explored
//! transitions, indistinguishability up to typed name bijections and
//! erasure, and bounded noninterference / multi-lateral security.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::Configuration;
use crate::printer::{print_configuration, print_term};
use crate::secmodel::{visibility_range, SecAssignment, SecLevel};
use crate::semantics::{enumerate_config_steps, local_eval, EvalResult, Rule};
use crate::term::{ActivityId, FutureId, Label, Method, Term};
use crate::typecheck::{check_configuration, ConfigType};

/// Partial name bijections relating two configurations. Related activities
/// have equal types whenever both configurations type-check; positions whose
/// context types are perturbed (H-variant comparisons) fall back to
/// structural compatibility.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NameBijections {
    pub sigma: BTreeMap<ActivityId, ActivityId>,
    pub tau: BTreeMap<FutureId, FutureId>,
}

impl fmt::Display for NameBijections {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> =
            self.sigma.iter().map(|(a, b)| format!("{a} <-> {b}")).collect();
        let t: Vec<String> =
            self.tau.iter().map(|(a, b)| format!("{a} <-> {b}")).collect();
        write!(f, "sigma: [{}], tau: [{}]", s.join(", "), t.join(", "))
    }
}

impl NameBijections {
    pub fn inverse(&self) -> NameBijections {
        NameBijections {
            sigma: self.sigma.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            tau: self.tau.iter().map(|(a, b)| (*b, *a)).collect(),
        }
    }

    /// `other` after `self`, defined where the composite is.
    pub fn compose(&self, other: &NameBijections) -> NameBijections {
        NameBijections {
            sigma: self
                .sigma
                .iter()
                .filter_map(|(a, b)| other.sigma.get(b).map(|c| (a.clone(), c.clone())))
                .collect(),
            tau: self
                .tau
                .iter()
                .filter_map(|(a, b)| other.tau.get(b).map(|c| (*a, *c)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub trace0: Vec<String>,
    pub trace1: Vec<String>,
    pub observation: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    FailsWith(Counterexample),
    Inconclusive(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Holds => write!(f, "holds"),
            Verdict::FailsWith(cx) => {
                writeln!(f, "fails")?;
                writeln!(f, "  trace of C:  {}", cx.trace0.join("; "))?;
                writeln!(f, "  trace of C1: {}", cx.trace1.join("; "))?;
                write!(f, "  observation: {}", cx.observation)
            }
            Verdict::Inconclusive(why) => write!(f, "inconclusive: {why}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportEntry {
    pub step: String,
    pub claim: String,
    pub outcome: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "(no transitions explored)");
        }
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{} | {} | {}", e.step, e.claim, e.outcome)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropError {
    Inconclusive(String),
    Preservation { step: String, detail: String },
    Confinement { future: FutureId, label: Label },
}

impl fmt::Display for PropError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropError::Inconclusive(why) => write!(f, "inconclusive: {why}"),
            PropError::Preservation { step, detail } => {
                write!(f, "preservation violated at {step}: {detail}")
            }
            PropError::Confinement { future, label } => {
                write!(
                    f,
                    "confinement violated: cross-level future {future} originates from H label {label}"
                )
            }
        }
    }
}

fn hidden() -> Term {
    Term::Var(String::from("<hidden>"))
}

/// Erasure "=|_sec": replaces every H-labeled method body (and H-labeled
/// update body) with an opaque marker.
pub fn erase(term: &Term, sec: &SecAssignment) -> Term {
    match term {
        Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => term.clone(),
        Term::Object(ms) => Term::Object(
            ms.iter()
                .map(|m| Method {
                    label: m.label.clone(),
                    binder: m.binder.clone(),
                    body: if sec.get(&m.label) == SecLevel::H {
                        hidden()
                    } else {
                        erase(&m.body, sec)
                    },
                })
                .collect(),
        ),
        Term::Call { target, label, arg } => Term::Call {
            target: alloc::boxed::Box::new(erase(target, sec)),
            label: label.clone(),
            arg: alloc::boxed::Box::new(erase(arg, sec)),
        },
        Term::Update { target, label, binder, body } => Term::Update {
            target: alloc::boxed::Box::new(erase(target, sec)),
            label: label.clone(),
            binder: binder.clone(),
            body: alloc::boxed::Box::new(if sec.get(label) == SecLevel::H {
                hidden()
            } else {
                erase(body, sec)
            }),
        },
        Term::Activate(inner) => {
            Term::Activate(alloc::boxed::Box::new(erase(inner, sec)))
        }
    }
}

fn config_key(c: &Configuration) -> String {
    print_configuration(c, &SecAssignment::default())
}

/// Local evaluation of a request term for comparison purposes. Values and
/// stuck terms compare as they stand; fuel exhaustion is inconclusive.
fn eval_for_compare(t: &Term, fuel: u32) -> Result<Term, PropError> {
    match local_eval(t, fuel) {
        EvalResult::Value(v) => Ok(v),
        EvalResult::Stuck(s, _) => Ok(s),
        EvalResult::OutOfFuel(_) => Err(PropError::Inconclusive(format!(
            "local evaluation of {} exhausted fuel",
            print_term(t)
        ))),
    }
}

fn perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return alloc::vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in perms(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Searches for typed name bijections (sigma, tau) on alpha's visibility
/// ranges under which the two configurations agree after local evaluation
/// and erasure. Returns the first witness, or None when no bijection works.
pub fn indistinguishable(
    c0: &Configuration,
    c1: &Configuration,
    alpha: &ActivityId,
    sec: &SecAssignment,
    fuel: u32,
) -> Result<Option<NameBijections>, PropError> {
    let a0 = match c0.activities.keys().find(|a| a.name == alpha.name) {
        Some(a) => a.clone(),
        None => {
            return Err(PropError::Inconclusive(format!(
                "activity {alpha} is not present in the first configuration"
            )))
        }
    };
    let a1 = match c1.activities.keys().find(|a| a.name == alpha.name) {
        Some(a) => a.clone(),
        None => {
            return Err(PropError::Inconclusive(format!(
                "activity {alpha} is not present in the second configuration"
            )))
        }
    };
    let v0: Vec<ActivityId> = visibility_range(&a0, c0, sec)
        .map_err(|e| PropError::Inconclusive(format!("{e}")))?
        .into_iter()
        .collect();
    let v1: Vec<ActivityId> = visibility_range(&a1, c1, sec)
        .map_err(|e| PropError::Inconclusive(format!("{e}")))?
        .into_iter()
        .collect();
    if v0.len() != v1.len() {
        return Ok(None);
    }

    // Evaluate every visible request once; bijection search reuses these.
    // Comparison needs normal forms even when `fuel` (the bisimulation
    // depth) is small, so the local budget is scaled up independently.
    let eval_budget = fuel.saturating_mul(32).max(256);
    let mut values0: BTreeMap<FutureId, Term> = BTreeMap::new();
    let mut values1: BTreeMap<FutureId, Term> = BTreeMap::new();
    for a in &v0 {
        for r in &c0.activities[a].queue {
            values0.insert(r.future, eval_for_compare(&r.term, eval_budget)?);
        }
    }
    for b in &v1 {
        for r in &c1.activities[b].queue {
            values1.insert(r.future, eval_for_compare(&r.term, eval_budget)?);
        }
    }

    let gamma0 = check_configuration(c0, sec).ok();
    let gamma1 = check_configuration(c1, sec).ok();
    let allowed = |a: &ActivityId, b: &ActivityId| -> bool {
        let act0 = &c0.activities[a];
        let act1 = &c1.activities[b];
        if act0.queue.len() != act1.queue.len() {
            return false;
        }
        if let (Some(g0), Some(g1)) = (&gamma0, &gamma1) {
            if g0.gamma_act[a] == g1.gamma_act[b] {
                return true;
            }
        }
        // Structural fallback: same top-level method labels on the active
        // objects. Nested labels may sit inside H bodies and must not count.
        act0.active_object.own_labels() == act1.active_object.own_labels()
    };

    // Backtracking assignment of v0 -> v1, alpha pinned to itself.
    let mut used = alloc::vec![false; v1.len()];
    let mut sigma: BTreeMap<ActivityId, ActivityId> = BTreeMap::new();
    search_sigma(
        c0, c1, sec, &v0, &v1, 0, &mut used, &mut sigma, &a0, &a1, &allowed, &values0,
        &values1,
    )
}

#[allow(clippy::too_many_arguments)]
fn search_sigma(
    c0: &Configuration,
    c1: &Configuration,
    sec: &SecAssignment,
    v0: &[ActivityId],
    v1: &[ActivityId],
    i: usize,
    used: &mut Vec<bool>,
    sigma: &mut BTreeMap<ActivityId, ActivityId>,
    a0: &ActivityId,
    a1: &ActivityId,
    allowed: &dyn Fn(&ActivityId, &ActivityId) -> bool,
    values0: &BTreeMap<FutureId, Term>,
    values1: &BTreeMap<FutureId, Term>,
) -> Result<Option<NameBijections>, PropError> {
    if i == v0.len() {
        return match_queues(c0, c1, sec, sigma, values0, values1);
    }
    let a = &v0[i];
    for (j, b) in v1.iter().enumerate() {
        if used[j] {
            continue;
        }
        // The observer is exempt from renaming: it maps to itself.
        if (a == a0) != (b == a1) {
            continue;
        }
        if !allowed(a, b) {
            continue;
        }
        used[j] = true;
        sigma.insert(a.clone(), b.clone());
        let r = search_sigma(
            c0, c1, sec, v0, v1, i + 1, used, sigma, a0, a1, allowed, values0, values1,
        )?;
        if r.is_some() {
            return Ok(r);
        }
        sigma.remove(a);
        used[j] = false;
    }
    Ok(None)
}

fn match_queues(
    c0: &Configuration,
    c1: &Configuration,
    sec: &SecAssignment,
    sigma: &BTreeMap<ActivityId, ActivityId>,
    values0: &BTreeMap<FutureId, Term>,
    values1: &BTreeMap<FutureId, Term>,
) -> Result<Option<NameBijections>, PropError> {
    // Queue pairings per related activity compose into one tau; the identity
    // pairing is tried first, then permutations.
    let pairs: Vec<(&ActivityId, &ActivityId)> = sigma.iter().collect();
    let mut pairings_per_activity: Vec<Vec<Vec<usize>>> = Vec::new();
    for (a, b) in &pairs {
        let n0 = c0.activities[*a].queue.len();
        let n1 = c1.activities[*b].queue.len();
        if n0 != n1 {
            return Ok(None);
        }
        let mut ps = perms(n0);
        // Identity first.
        ps.sort_by_key(|p| p.iter().enumerate().filter(|(i, v)| i != *v).count());
        pairings_per_activity.push(ps);
    }
    let mut choice: Vec<usize> = alloc::vec![0; pairs.len()];
    loop {
        let mut tau: BTreeMap<FutureId, FutureId> = BTreeMap::new();
        for (k, (a, b)) in pairs.iter().enumerate() {
            let perm = &pairings_per_activity[k][choice[k]];
            for (idx0, idx1) in perm.iter().enumerate() {
                tau.insert(
                    c0.activities[*a].queue[idx0].future,
                    c1.activities[*b].queue[*idx1].future,
                );
            }
        }
        let cand = NameBijections { sigma: sigma.clone(), tau };
        if bijection_matches(c0, c1, sec, &cand, values0, values1) {
            return Ok(Some(cand));
        }
        // Advance to the next combination of pairings.
        let mut k = 0;
        loop {
            if k == pairs.len() {
                return Ok(None);
            }
            choice[k] += 1;
            if choice[k] < pairings_per_activity[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn bijection_matches(
    c0: &Configuration,
    c1: &Configuration,
    sec: &SecAssignment,
    bij: &NameBijections,
    values0: &BTreeMap<FutureId, Term>,
    values1: &BTreeMap<FutureId, Term>,
) -> bool {
    for (a, b) in &bij.sigma {
        let act0 = &c0.activities[a];
        let act1 = &c1.activities[b];
        let renamed = act0.active_object.rename_refs(&bij.sigma, &bij.tau);
        if erase(&renamed, sec) != erase(&act1.active_object, sec) {
            return false;
        }
        for r0 in &act0.queue {
            let f1 = bij.tau[&r0.future];
            let v0 = &values0[&r0.future];
            let Some(v1) = values1.get(&f1) else { return false };
            let renamed_v = v0.rename_refs(&bij.sigma, &bij.tau);
            if erase(&renamed_v, sec) != erase(v1, sec) {
                return false;
            }
        }
    }
    true
}

/// Explores transitions breadth-first up to `steps` of them, re-typing each
/// successor and asserting the typing context only grows in domain. Entries
/// are compared by name, not by value: consuming a request can shrink a
/// future's method set, and updating onto a fresh activity can widen the
/// global level of every request that held a copy of the old object, so the
/// context that types the successor is resynthesised rather than patched.
pub fn check_preservation(
    config: &Configuration,
    sec: &SecAssignment,
    steps: u32,
) -> Result<Report, PropError> {
    let gamma = check_configuration(config, sec).map_err(|e| {
        PropError::Inconclusive(format!("configuration is not typable: {e}"))
    })?;
    let mut report = Report::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut frontier: VecDeque<(Configuration, ConfigType)> = VecDeque::new();
    seen.insert(config_key(config));
    frontier.push_back((config.clone(), gamma));
    let mut budget = steps;
    while let Some((c, g)) = frontier.pop_front() {
        for (label, succ) in enumerate_config_steps(&c) {
            if budget == 0 {
                return Ok(report);
            }
            budget -= 1;
            let step = format!("{label}");
            let g2 = check_configuration(&succ, sec).map_err(|e| {
                PropError::Preservation {
                    step: step.clone(),
                    detail: format!("successor does not type: {e}"),
                }
            })?;
            if let Some(a) =
                g.gamma_act.keys().find(|a| !g2.gamma_act.contains_key(*a))
            {
                return Err(PropError::Preservation {
                    step,
                    detail: format!(
                        "successor context dropped the activity entry for {a}"
                    ),
                });
            }
            if let Some(f) =
                g.gamma_fut.keys().find(|f| !g2.gamma_fut.contains_key(*f))
            {
                return Err(PropError::Preservation {
                    step,
                    detail: format!(
                        "successor context dropped the future entry #f{f}"
                    ),
                });
            }
            report.entries.push(ReportEntry {
                step,
                claim: String::from(
                    "successor types under a context extending the old domain",
                ),
                outcome: String::from("ok"),
            });
            if seen.insert(config_key(&succ)) {
                frontier.push_back((succ, g2));
            }
        }
    }
    Ok(report)
}

/// Explores transitions up to `fuel` of them and checks that every remote
/// request crossing a strict global-level increase originates from an L
/// label. Typing of the input is deliberately not required, so ill-typed
/// configurations can be used as negative controls.
pub fn check_confinement(
    config: &Configuration,
    sec: &SecAssignment,
    fuel: u32,
) -> Result<Report, PropError> {
    let mut report = Report::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut frontier: VecDeque<Configuration> = VecDeque::new();
    seen.insert(config_key(config));
    frontier.push_back(config.clone());
    let mut budget = fuel;
    while let Some(c) = frontier.pop_front() {
        for (label, succ) in enumerate_config_steps(&c) {
            if budget == 0 {
                return Ok(report);
            }
            budget -= 1;
            let step = format!("{label}");
            let mut claim = String::from("no cross-activity flow");
            let mut outcome = String::from("ok");
            if label.rule == Rule::Request {
                let before: BTreeSet<FutureId> = c.futures().into_iter().collect();
                let f = succ
                    .futures()
                    .into_iter()
                    .find(|f| !before.contains(f))
                    .expect("a request step creates a fresh future");
                let (home, origin) = succ
                    .future_origin(f)
                    .map_err(|e| PropError::Inconclusive(format!("{e}")))?;
                let caller = &label.activity;
                let range_caller = visibility_range(caller, &c, sec)
                    .map_err(|e| PropError::Inconclusive(format!("{e}")))?;
                let range_home = visibility_range(&home, &c, sec)
                    .map_err(|e| PropError::Inconclusive(format!("{e}")))?;
                let l = origin.expect("remote requests carry their origin label");
                claim = format!("remote request {f} from {caller} to {home} on {l}");
                if range_caller != range_home && range_caller.is_superset(&range_home) {
                    if sec.get(&l) != SecLevel::L {
                        return Err(PropError::Confinement { future: f, label: l });
                    }
                    outcome = String::from("cross-level, origin is L");
                } else {
                    outcome = String::from("no strict level increase");
                }
            }
            report.entries.push(ReportEntry { step, claim, outcome });
            if seen.insert(config_key(&succ)) {
                frontier.push_back(succ);
            }
        }
    }
    Ok(report)
}

/// Closed result values used to perturb H-method bodies.
fn variant_pool() -> Vec<Term> {
    let boolean_true = Term::obj(alloc::vec![
        Method::new("if", "b", Term::call(Term::This, "then", Term::empty())),
        Method::new("then", "b", Term::This),
        Method::new("else", "b", Term::This),
    ]);
    alloc::vec![
        Term::obj(alloc::vec![Method::new(
            "q",
            "z",
            Term::obj(alloc::vec![Method::new("iszero", "w", boolean_true)]),
        )]),
        Term::obj(alloc::vec![Method::new("c1042", "z", Term::empty())]),
        Term::obj(alloc::vec![Method::new("c42", "z", Term::empty())]),
        Term::obj(alloc::vec![Method::new("note", "z", Term::empty())]),
    ]
}

/// Configurations differing from `config` in exactly one H-labeled method
/// body of one active object, up to `budget` of them.
pub fn h_variants(
    config: &Configuration,
    sec: &SecAssignment,
    budget: u32,
) -> Vec<Configuration> {
    let pool = variant_pool();
    let mut out = Vec::new();
    for (alpha, act) in &config.activities {
        let Term::Object(ms) = &act.active_object else { continue };
        for (i, m) in ms.iter().enumerate() {
            if sec.get(&m.label) != SecLevel::H {
                continue;
            }
            for val in &pool {
                if out.len() as u32 >= budget {
                    return out;
                }
                if *val == m.body {
                    continue;
                }
                let mut ms2 = ms.clone();
                ms2[i] = Method {
                    label: m.label.clone(),
                    binder: m.binder.clone(),
                    body: val.clone(),
                };
                let mut c2 = config.clone();
                c2.activities.get_mut(alpha).unwrap().active_object = Term::Object(ms2);
                out.push(c2);
            }
        }
    }
    out
}

/// Bounded alpha-noninterference: every H-variant that is
/// initially indistinguishable must stay matchable step for step, up to the
/// fuel bound. A matched prefix of the full depth counts as Holds; this is
/// a bounded verdict, not a proof.
pub fn check_noninterference(
    config: &Configuration,
    alpha: &ActivityId,
    sec: &SecAssignment,
    fuel: u32,
    variant_budget: u32,
) -> Verdict {
    if !config.activities.keys().any(|a| a.name == alpha.name) {
        return Verdict::Inconclusive(format!("no activity named {alpha}"));
    }
    let variants = h_variants(config, sec, variant_budget);
    if variants.is_empty() {
        return Verdict::Holds;
    }
    for c1 in variants {
        match indistinguishable(config, &c1, alpha, sec, fuel) {
            Err(PropError::Inconclusive(why)) => return Verdict::Inconclusive(why),
            Err(e) => return Verdict::Inconclusive(format!("{e}")),
            Ok(None) => continue,
            Ok(Some(_)) => {}
        }
        match bisim(config, &c1, alpha, sec, fuel) {
            Verdict::Holds => {}
            other => return other,
        }
    }
    Verdict::Holds
}

fn bisim(
    c0: &Configuration,
    c1: &Configuration,
    alpha: &ActivityId,
    sec: &SecAssignment,
    fuel: u32,
) -> Verdict {
    // Bounded transfer check along the canonical schedule: every step the
    // First policy takes from C must be answered by C1 with a short run
    // that restores indistinguishability. Exhaustive interleaving makes the
    // pair space explode on realistic configurations; the canonical walk
    // keeps the check linear in `fuel` while still catching any flow the
    // scheduler actually exercises.
    let mut a = c0.clone();
    let mut b = c1.clone();
    let mut t0: Vec<String> = Vec::new();
    let mut t1: Vec<String> = Vec::new();
    for _ in 0..fuel {
        let Some((label, a2)) = enumerate_config_steps(&a).into_iter().next() else {
            break;
        };
        t0.push(format!("{label}"));
        match find_match(&a2, &b, alpha, sec, fuel) {
            Err(PropError::Inconclusive(why)) => return Verdict::Inconclusive(why),
            Err(e) => return Verdict::Inconclusive(format!("{e}")),
            Ok(Some((b2, steps1))) => {
                t1.extend(steps1);
                a = a2;
                b = b2;
            }
            Ok(None) => {
                let observation = observe_difference(&a2, &b, sec, fuel);
                return Verdict::FailsWith(Counterexample {
                    trace0: t0,
                    trace1: t1,
                    observation,
                });
            }
        }
    }
    Verdict::Holds
}

/// Searches b ->* b2 for a b2 indistinguishable from `target`. Prefers
/// shorter matches; zero steps is tried first. A matching run only ever
/// needs the mirrored step plus a handful of invisible ones, so the search
/// depth and the number of visited configurations are capped independently
/// of the caller's fuel.
fn find_match(
    target: &Configuration,
    b: &Configuration,
    alpha: &ActivityId,
    sec: &SecAssignment,
    fuel: u32,
) -> Result<Option<(Configuration, Vec<String>)>, PropError> {
    let depth = fuel.min(4);
    let mut visited: u32 = 0;
    let mut inconclusive: Option<PropError> = None;
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut layer: Vec<(Configuration, Vec<String>)> = alloc::vec![(b.clone(), Vec::new())];
    seen.insert(config_key(b));
    for _ in 0..=depth {
        for (cand, steps) in &layer {
            match indistinguishable(target, cand, alpha, sec, fuel) {
                Ok(Some(_)) => return Ok(Some((cand.clone(), steps.clone()))),
                Ok(None) => {}
                Err(e) => inconclusive = Some(e),
            }
        }
        visited += layer.len() as u32;
        if visited >= 512 {
            break;
        }
        let mut next = Vec::new();
        for (cand, steps) in &layer {
            for (label, succ) in enumerate_config_steps(cand) {
                if seen.insert(config_key(&succ)) {
                    let mut s2 = steps.clone();
                    s2.push(format!("{label}"));
                    next.push((succ, s2));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    match inconclusive {
        Some(e) => Err(e),
        None => Ok(None),
    }
}

/// Builds a human-readable account of why no candidate matched: the first
/// visible position whose evaluated, erased contents differ.
fn observe_difference(
    a: &Configuration,
    b: &Configuration,
    sec: &SecAssignment,
    fuel: u32,
) -> String {
    // Run both sides on until exhaustion so the report shows what the
    // diverging computation actually delivers, not the raw mid-step state.
    let budget = fuel.saturating_mul(32).max(256);
    let (a, _) = crate::semantics::run_config(a, crate::semantics::Policy::First, budget);
    let (b, _) = crate::semantics::run_config(b, crate::semantics::Policy::First, budget);
    let (a, b) = (&a, &b);
    // A request that still carries its origin label names the method call
    // that produced it; such a position makes the better report, so keep
    // the first unlabeled difference only as a fallback.
    let mut fallback: Option<String> = None;
    for (id, act_a) in &a.activities {
        let Some(act_b) = b.activities.get(id) else {
            return format!("activity {id} exists only in one side");
        };
        if erase(&act_a.active_object, sec) != erase(&act_b.active_object, sec) {
            fallback
                .get_or_insert(format!("active object of {id} differs after erasure"));
        }
        for r_a in &act_a.queue {
            let Some(r_b) = act_b.queue.iter().find(|r| r.future == r_a.future) else {
                fallback.get_or_insert(format!(
                    "request {} of {id} exists only in one side",
                    r_a.future
                ));
                continue;
            };
            let v_a = match local_eval(&r_a.term, fuel) {
                EvalResult::Value(v) | EvalResult::Stuck(v, _) => v,
                EvalResult::OutOfFuel(_) => continue,
            };
            let v_b = match local_eval(&r_b.term, fuel) {
                EvalResult::Value(v) | EvalResult::Stuck(v, _) => v,
                EvalResult::OutOfFuel(_) => continue,
            };
            if erase(&v_a, sec) != erase(&v_b, sec) {
                let rendered = format!(
                    "evaluates to {} in C but {} in C1",
                    print_term(&erase(&v_a, sec)),
                    print_term(&erase(&v_b, sec))
                );
                match &r_a.origin_label {
                    Some(l) => {
                        return format!(
                            "request {} ({l}) of {id} {rendered}",
                            r_a.future
                        )
                    }
                    None => {
                        fallback.get_or_insert(format!(
                            "request {} of {id} {rendered}",
                            r_a.future
                        ));
                    }
                }
            }
        }
        if act_a.queue.len() != act_b.queue.len() {
            fallback.get_or_insert(format!(
                "request queues of {id} have different lengths"
            ));
        }
    }
    fallback.unwrap_or_else(|| {
        String::from("configurations diverge with no single differing position")
    })
}

/// Alpha-noninterference for every activity of the configuration.
pub fn check_multilateral(
    config: &Configuration,
    sec: &SecAssignment,
    fuel: u32,
    variant_budget: u32,
) -> Verdict {
    let mut inconclusive: Option<String> = None;
    for alpha in config.activities.keys() {
        match check_noninterference(config, alpha, sec, fuel, variant_budget) {
            Verdict::Holds => {}
            Verdict::FailsWith(cx) => {
                let mut cx = cx;
                cx.observation = format!("at observer {alpha}: {}", cx.observation);
                return Verdict::FailsWith(cx);
            }
            Verdict::Inconclusive(why) => {
                inconclusive.get_or_insert(format!("at observer {alpha}: {why}"));
            }
        }
    }
    match inconclusive {
        Some(why) => Verdict::Inconclusive(why),
        None => Verdict::Holds,
    }
}
