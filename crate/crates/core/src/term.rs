//! Static and runtime syntax of ASPfun terms.
//!
//! The static calculus is the ς-calculus: objects are finite suites of
//! labeled methods `[l_i = sigma(y_i) b_i]` with a self binder (`this`),
//! method call `t.l(s)`, method update `t.l := sigma(y) b`, and `Active(t)`.
//! The runtime syntax adds activity references and future references.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Method label. Labels are compared textually; one global namespace.
pub type Label = String;

/// Parameter variable name. The name "this" is reserved and never a binder.
pub type VarName = String;

/// Identity of an activity. The creation index makes identities unique even
/// when display names collide; ordering is by creation index first so that
/// iteration over configurations follows creation order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivityId {
    pub index: u32,
    pub name: String,
}

impl ActivityId {
    pub fn new(index: u32, name: &str) -> Self {
        ActivityId { index, name: String::from(name) }
    }
}

impl PartialOrd for ActivityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ActivityId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.index, &self.name).cmp(&(other.index, &other.name))
    }
}

impl fmt::Display for ActivityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Identity of a future; printed as `#fN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FutureId(pub u32);

impl fmt::Display for FutureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#f{}", self.0)
    }
}

/// One labeled method of an object: `label = sigma(binder) body`.
#[derive(Clone, Debug)]
pub struct Method {
    pub label: Label,
    pub binder: VarName,
    pub body: Term,
}

impl Method {
    pub fn new(label: &str, binder: &str, body: Term) -> Self {
        Method { label: String::from(label), binder: String::from(binder), body }
    }
}

/// ASPfun terms. `Object` keeps methods in source order for printing, but
/// equality and ordering treat the suite as a label-keyed map.
#[derive(Clone, Debug)]
pub enum Term {
    Var(VarName),
    This,
    Object(Vec<Method>),
    Call { target: Box<Term>, label: Label, arg: Box<Term> },
    Update { target: Box<Term>, label: Label, binder: VarName, body: Box<Term> },
    Activate(Box<Term>),
    ActRef(ActivityId),
    FutRef(FutureId),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(String::from(name))
    }

    pub fn obj(methods: Vec<Method>) -> Term {
        Term::Object(methods)
    }

    pub fn empty() -> Term {
        Term::Object(Vec::new())
    }

    pub fn call(target: Term, label: &str, arg: Term) -> Term {
        Term::Call { target: Box::new(target), label: String::from(label), arg: Box::new(arg) }
    }

    pub fn update(target: Term, label: &str, binder: &str, body: Term) -> Term {
        Term::Update {
            target: Box::new(target),
            label: String::from(label),
            binder: String::from(binder),
            body: Box::new(body),
        }
    }

    pub fn activate(inner: Term) -> Term {
        Term::Activate(Box::new(inner))
    }

    fn sorted_methods(methods: &[Method]) -> Vec<&Method> {
        let mut v: Vec<&Method> = methods.iter().collect();
        v.sort_by(|a, b| a.label.cmp(&b.label));
        v
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Var(_) => 0,
            Term::This => 1,
            Term::Object(_) => 2,
            Term::Call { .. } => 3,
            Term::Update { .. } => 4,
            Term::Activate(_) => 5,
            Term::ActRef(_) => 6,
            Term::FutRef(_) => 7,
        }
    }

    /// A result is a finished request value: an object or an activity reference.
    pub fn is_result(&self) -> bool {
        matches!(self, Term::Object(_) | Term::ActRef(_))
    }

    /// Static syntax contains no runtime references anywhere.
    pub fn is_static(&self) -> bool {
        match self {
            Term::ActRef(_) | Term::FutRef(_) => false,
            Term::Var(_) | Term::This => true,
            Term::Object(ms) => ms.iter().all(|m| m.body.is_static()),
            Term::Call { target, arg, .. } => target.is_static() && arg.is_static(),
            Term::Update { target, body, .. } => target.is_static() && body.is_static(),
            Term::Activate(t) => t.is_static(),
        }
    }

    /// Free variables. Method and update bodies bind their parameter; `this`
    /// is tracked separately by [`Term::has_free_this`].
    pub fn free_vars(&self) -> BTreeSet<VarName> {
        fn go(t: &Term, bound: &mut Vec<VarName>, acc: &mut BTreeSet<VarName>) {
            match t {
                Term::Var(x) => {
                    if !bound.iter().any(|b| b == x) {
                        acc.insert(x.clone());
                    }
                }
                Term::This | Term::ActRef(_) | Term::FutRef(_) => {}
                Term::Object(ms) => {
                    for m in ms {
                        bound.push(m.binder.clone());
                        go(&m.body, bound, acc);
                        bound.pop();
                    }
                }
                Term::Call { target, arg, .. } => {
                    go(target, bound, acc);
                    go(arg, bound, acc);
                }
                Term::Update { target, binder, body, .. } => {
                    go(target, bound, acc);
                    bound.push(binder.clone());
                    go(body, bound, acc);
                    bound.pop();
                }
                Term::Activate(inner) => go(inner, bound, acc),
            }
        }
        let mut acc = BTreeSet::new();
        go(self, &mut Vec::new(), &mut acc);
        acc
    }

    /// True when `this` occurs outside every method or update body.
    pub fn has_free_this(&self) -> bool {
        match self {
            Term::This => true,
            Term::Var(_) | Term::ActRef(_) | Term::FutRef(_) => false,
            // Method and update bodies rebind `this` to the host object.
            Term::Object(_) => false,
            Term::Call { target, arg, .. } => target.has_free_this() || arg.has_free_this(),
            Term::Update { target, .. } => target.has_free_this(),
            Term::Activate(inner) => inner.has_free_this(),
        }
    }

    /// The noFV side condition of the semantics: closed under both binders.
    pub fn no_fv(&self) -> bool {
        !self.has_free_this() && self.free_vars().is_empty()
    }

    /// Every label occurring syntactically: method suites, calls, updates.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut acc = BTreeSet::new();
        self.collect_labels(&mut acc);
        acc
    }

    fn collect_labels(&self, acc: &mut BTreeSet<Label>) {
        match self {
            Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => {}
            Term::Object(ms) => {
                for m in ms {
                    acc.insert(m.label.clone());
                    m.body.collect_labels(acc);
                }
            }
            Term::Call { target, label, arg } => {
                acc.insert(label.clone());
                target.collect_labels(acc);
                arg.collect_labels(acc);
            }
            Term::Update { target, label, body, .. } => {
                acc.insert(label.clone());
                target.collect_labels(acc);
                body.collect_labels(acc);
            }
            Term::Activate(inner) => inner.collect_labels(acc),
        }
    }

    /// All activity references occurring anywhere in the term.
    pub fn act_refs(&self) -> BTreeSet<ActivityId> {
        let mut acc = BTreeSet::new();
        for t in self.subterms() {
            if let Term::ActRef(a) = t {
                acc.insert(a.clone());
            }
        }
        acc
    }

    /// All future references occurring anywhere in the term.
    pub fn fut_refs(&self) -> BTreeSet<FutureId> {
        let mut acc = BTreeSet::new();
        for t in self.subterms() {
            if let Term::FutRef(f) = t {
                acc.insert(*f);
            }
        }
        acc
    }

    /// Pre-order traversal of all subterms, including `self`.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut acc = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(t) = stack.pop() {
            acc.push(t);
            match t {
                Term::Var(_) | Term::This | Term::ActRef(_) | Term::FutRef(_) => {}
                Term::Object(ms) => {
                    for m in ms.iter().rev() {
                        stack.push(&m.body);
                    }
                }
                Term::Call { target, arg, .. } => {
                    stack.push(arg);
                    stack.push(target);
                }
                Term::Update { target, body, .. } => {
                    stack.push(body);
                    stack.push(target);
                }
                Term::Activate(inner) => stack.push(inner),
            }
        }
        acc
    }

    /// Node count, used for oracle size guards.
    pub fn size(&self) -> usize {
        self.subterms().len()
    }

    /// Looks up a method by label in an object term.
    pub fn method(&self, label: &str) -> Option<&Method> {
        match self {
            Term::Object(ms) => ms.iter().find(|m| m.label == label),
            _ => None,
        }
    }

    /// Own labels of an object term, empty for anything else.
    pub fn own_labels(&self) -> BTreeSet<Label> {
        match self {
            Term::Object(ms) => ms.iter().map(|m| m.label.clone()).collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Renames activity and future references throughout the term. Identities
    /// absent from a map are left unchanged.
    pub fn rename_refs(
        &self,
        sigma: &BTreeMap<ActivityId, ActivityId>,
        tau: &BTreeMap<FutureId, FutureId>,
    ) -> Term {
        match self {
            Term::Var(_) | Term::This => self.clone(),
            Term::ActRef(a) => Term::ActRef(sigma.get(a).cloned().unwrap_or_else(|| a.clone())),
            Term::FutRef(f) => Term::FutRef(tau.get(f).copied().unwrap_or(*f)),
            Term::Object(ms) => Term::Object(
                ms.iter()
                    .map(|m| Method {
                        label: m.label.clone(),
                        binder: m.binder.clone(),
                        body: m.body.rename_refs(sigma, tau),
                    })
                    .collect(),
            ),
            Term::Call { target, label, arg } => Term::Call {
                target: Box::new(target.rename_refs(sigma, tau)),
                label: label.clone(),
                arg: Box::new(arg.rename_refs(sigma, tau)),
            },
            Term::Update { target, label, binder, body } => Term::Update {
                target: Box::new(target.rename_refs(sigma, tau)),
                label: label.clone(),
                binder: binder.clone(),
                body: Box::new(body.rename_refs(sigma, tau)),
            },
            Term::Activate(inner) => Term::Activate(Box::new(inner.rename_refs(sigma, tau))),
        }
    }
}

impl PartialEq for Method {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.binder == other.binder && self.body == other.body
    }
}

impl Eq for Method {}

impl PartialOrd for Method {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Method {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.label, &self.binder, &self.body).cmp(&(&other.label, &other.binder, &other.body))
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Term {}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Var(a), Term::Var(b)) => a.cmp(b),
            (Term::This, Term::This) => Ordering::Equal,
            (Term::Object(a), Term::Object(b)) => {
                Term::sorted_methods(a).cmp(&Term::sorted_methods(b))
            }
            (
                Term::Call { target: t0, label: l0, arg: a0 },
                Term::Call { target: t1, label: l1, arg: a1 },
            ) => (t0, l0, a0).cmp(&(t1, l1, a1)),
            (
                Term::Update { target: t0, label: l0, binder: y0, body: b0 },
                Term::Update { target: t1, label: l1, binder: y1, body: b1 },
            ) => (t0, l0, y0, b0).cmp(&(t1, l1, y1, b1)),
            (Term::Activate(a), Term::Activate(b)) => a.cmp(b),
            (Term::ActRef(a), Term::ActRef(b)) => a.cmp(b),
            (Term::FutRef(a), Term::FutRef(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::printer::print_term(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Term {
        Term::obj(alloc::vec![
            Method::new("l", "y", Term::call(Term::This, "m", Term::var("y"))),
            Method::new("m", "z", Term::empty()),
        ])
    }

    #[test]
    fn objects_compare_modulo_method_order() {
        let a = Term::obj(alloc::vec![
            Method::new("l", "y", Term::empty()),
            Method::new("m", "y", Term::This),
        ]);
        let b = Term::obj(alloc::vec![
            Method::new("m", "y", Term::This),
            Method::new("l", "y", Term::empty()),
        ]);
        assert_eq!(a, b);
    }

    #[test]
    fn free_vars_respect_binders() {
        let t = Term::obj(alloc::vec![Method::new(
            "l",
            "y",
            Term::call(Term::var("y"), "m", Term::var("x")),
        )]);
        let fv = t.free_vars();
        assert!(fv.contains("x"));
        assert!(!fv.contains("y"));
    }

    #[test]
    fn this_is_bound_inside_method_bodies() {
        assert!(!sample().has_free_this());
        assert!(Term::call(Term::This, "l", Term::empty()).has_free_this());
        // An update binds this only in its body, not in its target.
        let u = Term::update(Term::This, "l", "y", Term::This);
        assert!(u.has_free_this());
        let u2 = Term::update(Term::var("x"), "l", "y", Term::This);
        assert!(!u2.has_free_this());
    }

    #[test]
    fn static_terms_have_no_references() {
        assert!(sample().is_static());
        assert!(!Term::ActRef(ActivityId::new(0, "alpha")).is_static());
        assert!(!Term::FutRef(FutureId(3)).is_static());
    }

    #[test]
    fn subterms_are_preorder() {
        let t = Term::call(Term::var("a"), "l", Term::var("b"));
        let subs = t.subterms();
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[0], &t);
        assert_eq!(subs[1], &Term::var("a"));
        assert_eq!(subs[2], &Term::var("b"));
    }

    #[test]
    fn rename_refs_leaves_unmapped_names_alone() {
        let alpha = ActivityId::new(0, "alpha");
        let beta = ActivityId::new(1, "beta");
        let t = Term::call(Term::ActRef(alpha.clone()), "l", Term::FutRef(FutureId(0)));
        let mut sigma = alloc::collections::BTreeMap::new();
        sigma.insert(alpha.clone(), beta.clone());
        let tau = alloc::collections::BTreeMap::new();
        let r = t.rename_refs(&sigma, &tau);
        assert_eq!(r, Term::call(Term::ActRef(beta), "l", Term::FutRef(FutureId(0))));
    }
}
