//! Operational semantics: strong local reduction inside requests, lifted to
//! configurations together with the communication rules (activation, remote
//! and self requests, replies, and update of active objects).

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::{Configuration, RequestEntry};
use crate::term::{ActivityId, FutureId, Label, Method, Term, VarName};

/// One step into a term: which child was entered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PathStep {
    Method(usize),
    CallTarget,
    CallArg,
    UpdateTarget,
    UpdateBody,
    ActivateInner,
}

pub type Path = Vec<PathStep>;

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathStep::Method(i) => write!(f, "m{i}"),
            PathStep::CallTarget => write!(f, "t"),
            PathStep::CallArg => write!(f, "a"),
            PathStep::UpdateTarget => write!(f, "u"),
            PathStep::UpdateBody => write!(f, "b"),
            PathStep::ActivateInner => write!(f, "i"),
        }
    }
}

pub fn path_to_string(p: &Path) -> String {
    if p.is_empty() {
        return String::from("top");
    }
    let parts: Vec<String> = p.iter().map(|s| format!("{s}")).collect();
    parts.join(".")
}

/// Names of the reduction rules. `Call` and `Update` are the two ς-calculus
/// contractions; configuration enumeration reports both as `Local` steps and
/// the redex kind is recoverable through [`classify_redex`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    Call,
    Update,
    Local,
    Active,
    Request,
    SelfRequest,
    Reply,
    UpdateAo,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Call => "call",
            Rule::Update => "update",
            Rule::Local => "local",
            Rule::Active => "active",
            Rule::Request => "request",
            Rule::SelfRequest => "self-request",
            Rule::Reply => "reply",
            Rule::UpdateAo => "update-AO",
        };
        write!(f, "{s}")
    }
}

/// Label of one configuration step: the rule, the activity whose queue was
/// reduced (for sends, the caller), the future whose request changed, and the
/// path to the redex inside that request.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StepLabel {
    pub rule: Rule,
    pub activity: ActivityId,
    pub future: FutureId,
    pub path: Path,
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}:{} at {}",
            self.rule,
            self.activity,
            self.future,
            path_to_string(&self.path)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StuckReason {
    MissingLabel(Label),
    UnresolvedReference,
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::MissingLabel(l) => write!(f, "missing label {l}"),
            StuckReason::UnresolvedReference => write!(f, "unresolved reference"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalResult {
    Value(Term),
    OutOfFuel(Term),
    Stuck(Term, StuckReason),
}

impl EvalResult {
    pub fn term(&self) -> &Term {
        match self {
            EvalResult::Value(t) | EvalResult::OutOfFuel(t) | EvalResult::Stuck(t, _) => t,
        }
    }
}

fn fresh_var(base: &str, avoid: &BTreeSet<VarName>) -> VarName {
    let mut n = 1u32;
    loop {
        let cand = format!("{base}_{n}");
        if !avoid.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// Renames free occurrences of variable `old` to `new` (used only with a
/// fresh `new`, so no capture can occur).
fn rename_var(t: &Term, old: &str, new: &str) -> Term {
    match t {
        Term::Var(x) if x == old => Term::Var(String::from(new)),
        Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => t.clone(),
        Term::Object(ms) => Term::Object(
            ms.iter()
                .map(|m| {
                    if m.binder == old {
                        m.clone()
                    } else {
                        Method {
                            label: m.label.clone(),
                            binder: m.binder.clone(),
                            body: rename_var(&m.body, old, new),
                        }
                    }
                })
                .collect(),
        ),
        Term::Call { target, label, arg } => Term::Call {
            target: Box::new(rename_var(target, old, new)),
            label: label.clone(),
            arg: Box::new(rename_var(arg, old, new)),
        },
        Term::Update { target, label, binder, body } => Term::Update {
            target: Box::new(rename_var(target, old, new)),
            label: label.clone(),
            binder: binder.clone(),
            body: if binder == old {
                body.clone()
            } else {
                Box::new(rename_var(body, old, new))
            },
        },
        Term::Activate(inner) => Term::Activate(Box::new(rename_var(inner, old, new))),
    }
}

/// Simultaneous capture-avoiding substitution of the self and the parameter
/// of one method: `body[this := this_val, param := arg]`. Method and update
/// bodies rebind `this`, so the self substitution stops there while the
/// parameter substitution continues under non-shadowing binders.
pub fn substitute(body: &Term, this_val: &Term, param: &str, arg: &Term) -> Term {
    fn go(t: &Term, this_val: Option<&Term>, param: &str, arg: &Term) -> Term {
        match t {
            Term::Var(x) => {
                if x == param {
                    arg.clone()
                } else {
                    t.clone()
                }
            }
            Term::This => this_val.cloned().unwrap_or(Term::This),
            Term::ActRef(_) | Term::FutRef(_) => t.clone(),
            Term::Object(ms) => Term::Object(
                ms.iter().map(|m| go_binding(m, this_val, param, arg)).collect(),
            ),
            Term::Call { target, label, arg: a } => Term::Call {
                target: Box::new(go(target, this_val, param, arg)),
                label: label.clone(),
                arg: Box::new(go(a, this_val, param, arg)),
            },
            Term::Update { target, label, binder, body } => {
                let m = Method {
                    label: label.clone(),
                    binder: binder.clone(),
                    body: (**body).clone(),
                };
                let m2 = go_binding(&m, this_val, param, arg);
                Term::Update {
                    target: Box::new(go(target, this_val, param, arg)),
                    label: label.clone(),
                    binder: m2.binder,
                    body: Box::new(m2.body),
                }
            }
            Term::Activate(inner) => {
                Term::Activate(Box::new(go(inner, this_val, param, arg)))
            }
        }
    }

    // Descend into a body that rebinds `this` and binds `m.binder`.
    fn go_binding(m: &Method, _this_val: Option<&Term>, param: &str, arg: &Term) -> Method {
        if m.binder == param || !m.body.free_vars().contains(param) {
            return m.clone();
        }
        let arg_fv = arg.free_vars();
        if arg_fv.contains(&m.binder) {
            let mut avoid = arg_fv;
            avoid.extend(m.body.free_vars());
            avoid.insert(String::from(param));
            let fresh = fresh_var(&m.binder, &avoid);
            let renamed = rename_var(&m.body, &m.binder, &fresh);
            Method {
                label: m.label.clone(),
                binder: fresh,
                body: go(&renamed, None, param, arg),
            }
        } else {
            Method {
                label: m.label.clone(),
                binder: m.binder.clone(),
                body: go(&m.body, None, param, arg),
            }
        }
    }

    go(body, Some(this_val), param, arg)
}

/// The redex kind at a node, if the node is a ς-contraction.
pub fn classify_redex(t: &Term) -> Option<Rule> {
    match t {
        Term::Call { target, label, .. } => match &**target {
            Term::Object(ms) if ms.iter().any(|m| m.label == *label) => Some(Rule::Call),
            _ => None,
        },
        Term::Update { target, label, .. } => match &**target {
            Term::Object(ms) if ms.iter().any(|m| m.label == *label) => Some(Rule::Update),
            _ => None,
        },
        _ => None,
    }
}

/// Contracts a redex at the root of `t`.
fn contract(t: &Term) -> Option<Term> {
    match t {
        Term::Call { target, label, arg } => {
            let m = target.method(label)?;
            Some(substitute(&m.body, target, &m.binder, arg))
        }
        Term::Update { target, label, binder, body } => match &**target {
            Term::Object(ms) if ms.iter().any(|m| m.label == *label) => Some(Term::Object(
                ms.iter()
                    .map(|m| {
                        if m.label == *label {
                            Method {
                                label: label.clone(),
                                binder: binder.clone(),
                                body: (**body).clone(),
                            }
                        } else {
                            m.clone()
                        }
                    })
                    .collect(),
            )),
            _ => None,
        },
        _ => None,
    }
}

/// All local reduction steps of a term, leftmost-outermost first. Reduction
/// is strong: contexts descend into method and update bodies.
pub fn local_steps(t: &Term) -> Vec<(Path, Term)> {
    fn go(t: &Term) -> Vec<(Path, Term)> {
        let mut steps: Vec<(Path, Term)> = Vec::new();
        if let Some(t2) = contract(t) {
            steps.push((Vec::new(), t2));
        }
        let children: Vec<(PathStep, &Term)> = match t {
            Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => Vec::new(),
            Term::Object(ms) => ms
                .iter()
                .enumerate()
                .map(|(i, m)| (PathStep::Method(i), &m.body))
                .collect(),
            Term::Call { target, arg, .. } => {
                alloc::vec![(PathStep::CallTarget, &**target), (PathStep::CallArg, &**arg)]
            }
            Term::Update { target, body, .. } => {
                alloc::vec![(PathStep::UpdateTarget, &**target), (PathStep::UpdateBody, &**body)]
            }
            Term::Activate(inner) => alloc::vec![(PathStep::ActivateInner, &**inner)],
        };
        for (step, child) in children {
            for (sub_path, new_child) in go(child) {
                let mut path = alloc::vec![step];
                path.extend(sub_path);
                steps.push((path, replace_child(t, step, new_child)));
            }
        }
        steps
    }
    go(t)
}

fn replace_child(t: &Term, step: PathStep, new_child: Term) -> Term {
    match (t, step) {
        (Term::Object(ms), PathStep::Method(i)) => {
            let mut ms2 = ms.clone();
            ms2[i].body = new_child;
            Term::Object(ms2)
        }
        (Term::Call { label, arg, .. }, PathStep::CallTarget) => Term::Call {
            target: Box::new(new_child),
            label: label.clone(),
            arg: arg.clone(),
        },
        (Term::Call { target, label, .. }, PathStep::CallArg) => Term::Call {
            target: target.clone(),
            label: label.clone(),
            arg: Box::new(new_child),
        },
        (Term::Update { label, binder, body, .. }, PathStep::UpdateTarget) => Term::Update {
            target: Box::new(new_child),
            label: label.clone(),
            binder: binder.clone(),
            body: body.clone(),
        },
        (Term::Update { target, label, binder, .. }, PathStep::UpdateBody) => Term::Update {
            target: target.clone(),
            label: label.clone(),
            binder: binder.clone(),
            body: Box::new(new_child),
        },
        (Term::Activate(_), PathStep::ActivateInner) => Term::Activate(Box::new(new_child)),
        _ => unreachable!("path step does not match term shape"),
    }
}

/// Replaces the subterm at `path` with the result of `f`.
pub fn replace_at(t: &Term, path: &[PathStep], new_sub: Term) -> Term {
    match path.split_first() {
        None => new_sub,
        Some((step, rest)) => {
            let child = child_at(t, *step);
            replace_child(t, *step, replace_at(child, rest, new_sub))
        }
    }
}

fn child_at(t: &Term, step: PathStep) -> &Term {
    match (t, step) {
        (Term::Object(ms), PathStep::Method(i)) => &ms[i].body,
        (Term::Call { target, .. }, PathStep::CallTarget) => target,
        (Term::Call { arg, .. }, PathStep::CallArg) => arg,
        (Term::Update { target, .. }, PathStep::UpdateTarget) => target,
        (Term::Update { body, .. }, PathStep::UpdateBody) => body,
        (Term::Activate(inner), PathStep::ActivateInner) => inner,
        _ => unreachable!("path step does not match term shape"),
    }
}

fn stuck_reason(t: &Term) -> StuckReason {
    for sub in t.subterms() {
        match sub {
            Term::Call { target, label, .. } | Term::Update { target, label, .. } => {
                if let Term::Object(ms) = &**target {
                    if !ms.iter().any(|m| m.label == *label) {
                        return StuckReason::MissingLabel(label.clone());
                    }
                }
            }
            _ => {}
        }
    }
    StuckReason::UnresolvedReference
}

/// Reduces a term with local steps only (leftmost-outermost), up to `fuel`
/// contractions.
pub fn local_eval(t: &Term, fuel: u32) -> EvalResult {
    let mut cur = t.clone();
    let mut left = fuel;
    loop {
        let steps = local_steps(&cur);
        match steps.into_iter().next() {
            None => {
                return if cur.is_result() {
                    EvalResult::Value(cur)
                } else {
                    let reason = stuck_reason(&cur);
                    EvalResult::Stuck(cur, reason)
                };
            }
            Some((_, next)) => {
                if left == 0 {
                    return EvalResult::OutOfFuel(cur);
                }
                left -= 1;
                cur = next;
            }
        }
    }
}

/// A send position found inside a request term.
enum Send {
    Activate,
    Call { callee: ActivityId, label: Label, arg: Term },
    UpdateAo { callee: ActivityId, label: Label, binder: VarName, body: Term },
}

/// Post-order collection of communication redexes, innermost first.
fn send_positions(t: &Term, path: &mut Path, acc: &mut Vec<(Path, Send)>) {
    let children: Vec<(PathStep, &Term)> = match t {
        Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => Vec::new(),
        Term::Object(ms) => ms
            .iter()
            .enumerate()
            .map(|(i, m)| (PathStep::Method(i), &m.body))
            .collect(),
        Term::Call { target, arg, .. } => {
            alloc::vec![(PathStep::CallTarget, &**target), (PathStep::CallArg, &**arg)]
        }
        Term::Update { target, body, .. } => {
            alloc::vec![(PathStep::UpdateTarget, &**target), (PathStep::UpdateBody, &**body)]
        }
        Term::Activate(inner) => alloc::vec![(PathStep::ActivateInner, &**inner)],
    };
    for (step, child) in children {
        path.push(step);
        send_positions(child, path, acc);
        path.pop();
    }
    match t {
        Term::Activate(inner) if inner.no_fv() => {
            acc.push((path.clone(), Send::Activate));
        }
        Term::Call { target, label, arg } => {
            if let Term::ActRef(beta) = &**target {
                if arg.no_fv() {
                    acc.push((
                        path.clone(),
                        Send::Call {
                            callee: beta.clone(),
                            label: label.clone(),
                            arg: (**arg).clone(),
                        },
                    ));
                }
            }
        }
        Term::Update { target, label, binder, body } => {
            if let Term::ActRef(beta) = &**target {
                // The sent method binds both `this` and the parameter, so the
                // body may mention nothing else.
                let closed = body.free_vars().iter().all(|v| v == binder);
                if closed {
                    acc.push((
                        path.clone(),
                        Send::UpdateAo {
                            callee: beta.clone(),
                            label: label.clone(),
                            binder: binder.clone(),
                            body: (**body).clone(),
                        },
                    ));
                }
            }
        }
        _ => {}
    }
}

/// All configuration steps, deterministically ordered: local reductions
/// first, then communication steps innermost-first, then replies. Fresh
/// identities come from the configuration counters.
pub fn enumerate_config_steps(config: &Configuration) -> Vec<(StepLabel, Configuration)> {
    let mut out: Vec<(StepLabel, Configuration)> = Vec::new();

    // Local ς-reduction inside request terms.
    for (alpha, act) in &config.activities {
        for (ridx, entry) in act.queue.iter().enumerate() {
            for (path, new_term) in local_steps(&entry.term) {
                let mut succ = config.clone();
                succ.activities.get_mut(alpha).unwrap().queue[ridx].term = new_term;
                out.push((
                    StepLabel {
                        rule: Rule::Local,
                        activity: alpha.clone(),
                        future: entry.future,
                        path,
                    },
                    succ,
                ));
            }
        }
    }

    // Communication redexes, innermost first.
    for (alpha, act) in &config.activities {
        for (ridx, entry) in act.queue.iter().enumerate() {
            let mut positions = Vec::new();
            send_positions(&entry.term, &mut Vec::new(), &mut positions);
            for (path, send) in positions {
                match send {
                    Send::Activate => {
                        let mut succ = config.clone();
                        let name = succ.fresh_activity_name();
                        let inner = match follow(&entry.term, &path) {
                            Term::Activate(inner) => (**inner).clone(),
                            _ => unreachable!(),
                        };
                        let gamma = succ.add_activity(&name, inner);
                        let new_term =
                            replace_at(&entry.term, &path, Term::ActRef(gamma));
                        succ.activities.get_mut(alpha).unwrap().queue[ridx].term = new_term;
                        out.push((
                            StepLabel {
                                rule: Rule::Active,
                                activity: alpha.clone(),
                                future: entry.future,
                                path,
                            },
                            succ,
                        ));
                    }
                    Send::Call { callee, label, arg } => {
                        let mut succ = config.clone();
                        let fk = succ.fresh_future();
                        let callee_obj =
                            succ.activities.get(&callee).map(|a| a.active_object.clone());
                        let Some(callee_obj) = callee_obj else { continue };
                        let remote = callee != *alpha;
                        let request = RequestEntry {
                            future: fk,
                            term: Term::Call {
                                target: Box::new(callee_obj),
                                label: label.clone(),
                                arg: Box::new(arg),
                            },
                            origin_label: Some(label),
                            origin_remote: remote,
                        };
                        succ.activities.get_mut(&callee).unwrap().queue.insert(0, request);
                        let new_term =
                            replace_at(&entry.term, &path, Term::FutRef(fk));
                        let slot = succ
                            .activities
                            .get_mut(alpha)
                            .unwrap()
                            .queue
                            .iter_mut()
                            .find(|r| r.future == entry.future)
                            .unwrap();
                        slot.term = new_term;
                        out.push((
                            StepLabel {
                                rule: if remote { Rule::Request } else { Rule::SelfRequest },
                                activity: alpha.clone(),
                                future: entry.future,
                                path,
                            },
                            succ,
                        ));
                    }
                    Send::UpdateAo { callee, label, binder, body } => {
                        let mut succ = config.clone();
                        let name = succ.fresh_activity_name();
                        let callee_obj =
                            succ.activities.get(&callee).map(|a| a.active_object.clone());
                        let Some(callee_obj) = callee_obj else { continue };
                        let updated = Term::Update {
                            target: Box::new(callee_obj),
                            label,
                            binder,
                            body: Box::new(body),
                        };
                        let gamma = succ.add_activity(&name, updated);
                        let new_term =
                            replace_at(&entry.term, &path, Term::ActRef(gamma));
                        succ.activities.get_mut(alpha).unwrap().queue[ridx].term = new_term;
                        out.push((
                            StepLabel {
                                rule: Rule::UpdateAo,
                                activity: alpha.clone(),
                                future: entry.future,
                                path,
                            },
                            succ,
                        ));
                    }
                }
            }
        }
    }

    // Replies: copy a request's current term over a reference to its future.
    for (alpha, act) in &config.activities {
        for (ridx, entry) in act.queue.iter().enumerate() {
            let mut paths: Vec<(Path, FutureId)> = Vec::new();
            collect_futrefs(&entry.term, &mut Vec::new(), &mut paths);
            for (path, fk) in paths {
                let Some((_, value)) = config
                    .activities
                    .iter()
                    .flat_map(|(b, a)| a.queue.iter().map(move |r| (b, r)))
                    .find(|(_, r)| r.future == fk)
                    .map(|(b, r)| (b.clone(), r.term.clone()))
                else {
                    continue;
                };
                let mut succ = config.clone();
                let new_term = replace_at(&entry.term, &path, value);
                succ.activities.get_mut(alpha).unwrap().queue[ridx].term = new_term;
                out.push((
                    StepLabel {
                        rule: Rule::Reply,
                        activity: alpha.clone(),
                        future: entry.future,
                        path,
                    },
                    succ,
                ));
            }
        }
    }

    out
}

fn follow<'a>(t: &'a Term, path: &[PathStep]) -> &'a Term {
    let mut cur = t;
    for step in path {
        cur = child_at(cur, *step);
    }
    cur
}

fn collect_futrefs(t: &Term, path: &mut Path, acc: &mut Vec<(Path, FutureId)>) {
    if let Term::FutRef(f) = t {
        acc.push((path.clone(), *f));
        return;
    }
    let children: Vec<(PathStep, &Term)> = match t {
        Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => Vec::new(),
        Term::Object(ms) => ms
            .iter()
            .enumerate()
            .map(|(i, m)| (PathStep::Method(i), &m.body))
            .collect(),
        Term::Call { target, arg, .. } => {
            alloc::vec![(PathStep::CallTarget, &**target), (PathStep::CallArg, &**arg)]
        }
        Term::Update { target, body, .. } => {
            alloc::vec![(PathStep::UpdateTarget, &**target), (PathStep::UpdateBody, &**body)]
        }
        Term::Activate(inner) => alloc::vec![(PathStep::ActivateInner, &**inner)],
    };
    for (step, child) in children {
        path.push(step);
        collect_futrefs(child, path, acc);
        path.pop();
    }
}

/// Scheduling policy for [`run_config`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    First,
    RoundRobin,
    Seeded(u64),
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs a configuration until quiescence or until `fuel` steps were taken.
pub fn run_config(
    config: &Configuration,
    policy: Policy,
    fuel: u32,
) -> (Configuration, Vec<StepLabel>) {
    let mut cur = config.clone();
    let mut trace = Vec::new();
    let mut rr_cursor: usize = 0;
    let mut rng_state = match policy {
        Policy::Seeded(seed) => seed,
        _ => 0,
    };
    for _ in 0..fuel {
        let succs = enumerate_config_steps(&cur);
        if succs.is_empty() {
            break;
        }
        let idx = match policy {
            Policy::First => 0,
            Policy::RoundRobin => {
                let acts: Vec<ActivityId> = cur.activities.keys().cloned().collect();
                let mut chosen = 0;
                'outer: for k in 0..acts.len() {
                    let a = &acts[(rr_cursor + k) % acts.len()];
                    for (i, (label, _)) in succs.iter().enumerate() {
                        if label.activity == *a {
                            chosen = i;
                            rr_cursor = (rr_cursor + k + 1) % acts.len();
                            break 'outer;
                        }
                    }
                }
                chosen
            }
            Policy::Seeded(_) => (splitmix64(&mut rng_state) % succs.len() as u64) as usize,
        };
        let (label, next) = succs.into_iter().nth(idx).unwrap();
        trace.push(label);
        cur = next;
    }
    (cur, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::init_conf;
    use crate::parser::{parse_configuration, parse_term};
    use crate::printer::print_term;

    fn t(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    #[test]
    fn call_substitutes_both_this_and_the_parameter() {
        let obj = t("[l = sigma(y) this.m(y), m = sigma(z) z]");
        let call = Term::call(obj.clone(), "l", Term::empty());
        let steps = local_steps(&call);
        assert_eq!(steps.len(), 1);
        let (path, reduced) = &steps[0];
        assert!(path.is_empty());
        assert_eq!(*reduced, Term::call(obj, "m", Term::empty()));
    }

    #[test]
    fn substitution_stops_at_nested_binders() {
        // The inner method rebinds this; only the outer occurrence changes.
        let body = t("this.l([m = sigma(w) this])");
        let arg = Term::empty();
        let result = substitute(&body, &t("[l = sigma(y) y]"), "y", &arg);
        assert_eq!(result, t("[l = sigma(y) y].l([m = sigma(w) this])"));
    }

    #[test]
    fn substitution_avoids_capture() {
        // y is free in the argument and bound in the body: the binder must
        // be renamed before the argument goes under it.
        let body = t("[l = sigma(y) x.go(y)]");
        let result = substitute(&body, &Term::empty(), "x", &t("y"));
        match result {
            Term::Object(ms) => {
                let m = &ms[0];
                assert_ne!(m.binder, "y");
                let printed = print_term(&m.body);
                assert!(printed.contains("y.go"), "argument vanished: {printed}");
            }
            other => panic!("expected object, got {other}"),
        }
    }

    #[test]
    fn update_replaces_the_method_in_place() {
        let u = t("[l = sigma(y) [], m = sigma(z) z].l := sigma(w) this");
        let steps = local_steps(&u);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].1, t("[l = sigma(w) this, m = sigma(z) z]"));
    }

    #[test]
    fn reduction_is_leftmost_outermost() {
        // Both the argument and the enclosing call are redexes; the
        // outermost comes first, and reduction descends under sigma.
        let redex = "[go = sigma(z) z].go([])";
        let term = t(&format!("[l = sigma(y) {redex}].l([n = sigma(w) {redex}])"));
        let steps = local_steps(&term);
        assert_eq!(steps.len(), 3);
        assert!(steps[0].0.is_empty(), "first step is not at the root");
        // Reduction descends under sigma: the target's method body comes
        // before the argument's.
        assert_eq!(steps[1].0[0], PathStep::CallTarget);
        assert_eq!(steps[2].0[0], PathStep::CallArg);
        let under_sigma = t(&format!("[l = sigma(y) {redex}]"));
        let inner = local_steps(&under_sigma);
        assert_eq!(inner.len(), 1);
        assert_eq!(inner[0].0, alloc::vec![PathStep::Method(0)]);
    }

    #[test]
    fn local_eval_reaches_results_and_reports_stuck_terms() {
        match local_eval(&t("[val = sigma(y) [l = sigma(z) z]].val([])"), 10) {
            EvalResult::Value(v) => assert_eq!(v, t("[l = sigma(z) z]")),
            other => panic!("expected value, got {:?}", other.term()),
        }
        match local_eval(&t("[].missing([])"), 10) {
            EvalResult::Stuck(_, StuckReason::MissingLabel(l)) => assert_eq!(l, "missing"),
            other => panic!("expected stuck, got {:?}", other.term()),
        }
        // A remote call is not locally reducible.
        match local_eval(&t("#f0.go([])"), 10) {
            EvalResult::Stuck(_, StuckReason::UnresolvedReference) => {}
            other => panic!("expected stuck, got {:?}", other.term()),
        }
    }

    #[test]
    fn omega_runs_out_of_fuel() {
        let omega = t("[l = sigma(y) this.l([])].l([])");
        assert!(matches!(local_eval(&omega, 50), EvalResult::OutOfFuel(_)));
    }

    #[test]
    fn request_step_moves_the_call_to_the_callee() {
        let (config, _) = parse_configuration(
            "alpha [ #f0 -> beta.go([]) | [] ]\n\
             beta [ | [go = sigma(y) y] ]",
        )
        .unwrap();
        let steps = enumerate_config_steps(&config);
        let (label, succ) = steps
            .iter()
            .find(|(l, _)| l.rule == Rule::Request)
            .expect("no request step offered");
        assert_eq!(label.activity.name, "alpha");
        let beta = succ.find_activity("beta").unwrap();
        let bq = &succ.get(&beta).unwrap().queue;
        assert_eq!(bq.len(), 1);
        assert_eq!(bq[0].origin_label.as_deref(), Some("go"));
        assert!(bq[0].origin_remote);
        // The caller's request now holds the future.
        let alpha = succ.find_activity("alpha").unwrap();
        let aq = &succ.get(&alpha).unwrap().queue;
        assert_eq!(aq[0].term, Term::FutRef(bq[0].future));
    }

    #[test]
    fn self_request_prepends_and_keeps_the_caller_slot() {
        let (config, _) = parse_configuration(
            "alpha [ #f0 -> alpha.go([]) | [go = sigma(y) []] ]",
        )
        .unwrap();
        let steps = enumerate_config_steps(&config);
        let (label, succ) = steps
            .iter()
            .find(|(l, _)| l.rule == Rule::SelfRequest)
            .expect("no self-request step offered");
        assert_eq!(format!("{}", label.rule), "self-request");
        let alpha = succ.find_activity("alpha").unwrap();
        let q = &succ.get(&alpha).unwrap().queue;
        assert_eq!(q.len(), 2);
        // New request is prepended; the original slot now holds its future.
        assert_eq!(q[1].term, Term::FutRef(q[0].future));
        assert!(!q[0].origin_remote);
    }

    #[test]
    fn reply_copies_the_current_term() {
        let (config, _) = parse_configuration(
            "alpha [ #f0 -> #f1.l([]) | [] ]\n\
             beta [ #f1 -> [l = sigma(y) y, v = sigma(w) w] | [] ]",
        )
        .unwrap();
        let steps = enumerate_config_steps(&config);
        let reply = steps.iter().find(|(l, _)| l.rule == Rule::Reply);
        let (_, succ) = reply.expect("no reply step offered");
        let alpha = succ.find_activity("alpha").unwrap();
        let term = &succ.get(&alpha).unwrap().queue[0].term;
        assert_eq!(*term, t("[l = sigma(y) y, v = sigma(w) w].l([])"));
    }

    #[test]
    fn activate_creates_a_fresh_activity() {
        let config = init_conf(t("Active([go = sigma(y) y])")).unwrap();
        let steps = enumerate_config_steps(&config);
        let (label, succ) = steps
            .iter()
            .find(|(l, _)| l.rule == Rule::Active)
            .expect("no active step offered");
        assert_eq!(label.rule, Rule::Active);
        assert_eq!(succ.activities.len(), 2);
        let gamma = succ.find_activity("gamma1").expect("fresh activity not named gamma1");
        assert_eq!(succ.get(&gamma).unwrap().active_object, t("[go = sigma(y) y]"));
    }

    #[test]
    fn update_ao_clones_the_callee() {
        let (config, _) = parse_configuration(
            "alpha [ #f0 -> beta.go := sigma(y) [] | [] ]\n\
             beta [ | [go = sigma(y) this] ]",
        )
        .unwrap();
        let steps = enumerate_config_steps(&config);
        let (_, succ) = steps
            .iter()
            .find(|(l, _)| l.rule == Rule::UpdateAo)
            .expect("no update-AO step offered");
        assert_eq!(succ.activities.len(), 3);
        // The clone starts with the unreduced update as its active object.
        let gamma = succ.find_activity("gamma2").unwrap();
        assert_eq!(
            succ.get(&gamma).unwrap().active_object,
            t("[go = sigma(y) this].go := sigma(y) []"),
        );
    }

    #[test]
    fn run_config_is_deterministic_under_a_fixed_policy() {
        let src = "alpha [ #f0 -> beta.go([]) | [] ]\n\
                   beta [ | [go = sigma(y) [done = sigma(z) z]] ]";
        let (config, _) = parse_configuration(src).unwrap();
        let (end1, trace1) = run_config(&config, Policy::First, 50);
        let (end2, trace2) = run_config(&config, Policy::First, 50);
        assert_eq!(end1, end2);
        assert_eq!(trace1.len(), trace2.len());
        let (end3, _) = run_config(&config, Policy::Seeded(42), 50);
        let (end4, _) = run_config(&config, Policy::Seeded(42), 50);
        assert_eq!(end3, end4);
        // The sound run finishes with the reply delivered.
        let alpha = end1.find_activity("alpha").unwrap();
        assert_eq!(end1.get(&alpha).unwrap().queue[0].term, t("[done = sigma(z) z]"));
    }

    #[test]
    fn fresh_names_skip_taken_ones() {
        let (config, _) = parse_configuration(
            "gamma0 [ #f0 -> Active([]) | [] ]",
        )
        .unwrap();
        let steps = enumerate_config_steps(&config);
        let (_, succ) = steps.iter().find(|(l, _)| l.rule == Rule::Active).unwrap();
        assert!(succ.find_activity("gamma1").is_some());
    }
}
