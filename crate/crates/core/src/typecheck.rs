//! The security type system: term typing with subsumption, configuration
//! typing, and minimal types, validated against a brute-force derivation
//! search oracle.
//!
//! Types are pairs Σ = (ass, δ): a security assignment from labels to local
//! levels and a global level. One Σ threads through a derivation region;
//! it changes only at references (which carry their own context types) and
//! at subsumption steps. Subsumption is folded into the checker at rule
//! boundaries:
//!
//!   - SecAss: an assignment may grow (pairwise inclusion), at any PC;
//!   - Glob: a global level may grow, but only at PC L, and only while no
//!     enclosing H conclusion constrains the region (tracked by an exactness
//!     flag, which is what makes "Glob never fires under PC H" structural);
//!   - Loc: an object literal whose own level is L may be used at PC H.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::Configuration;
use crate::printer::print_term;
use crate::secmodel::{global_level, SecAssignment, SecLevel};
use crate::secmodel::GlobalLevel;
use crate::semantics::{Path, PathStep};
use crate::term::{ActivityId, FutureId, Label, Term, VarName};

/// An object security type Σ = (ass, δ).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ObjType {
    pub ass: BTreeMap<Label, SecLevel>,
    pub glob: GlobalLevel,
}

impl ObjType {
    pub fn new(ass: BTreeMap<Label, SecLevel>, glob: GlobalLevel) -> Self {
        ObjType { ass, glob }
    }

    pub fn empty() -> Self {
        ObjType { ass: BTreeMap::new(), glob: BTreeSet::new() }
    }

    /// Pairwise inclusion: every binding of `self` appears in `other`.
    pub fn ass_included_in(&self, other: &BTreeMap<Label, SecLevel>) -> bool {
        self.ass.iter().all(|(l, lv)| other.get(l) == Some(lv))
    }
}

impl fmt::Display for ObjType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ass: Vec<String> =
            self.ass.iter().map(|(l, lv)| format!("{l}: {lv}")).collect();
        let glob: Vec<String> = self.glob.iter().map(|a| format!("{a}")).collect();
        write!(f, "({{{}}}, {{{}}})", ass.join(", "), glob.join(", "))
    }
}

#[derive(Clone, Debug)]
enum Binding {
    Var(VarName, ObjType),
    /// `this` together with the level at which it is usable.
    This(ObjType, SecLevel),
}

/// Stack of variable and self bindings; lookup takes the topmost.
#[derive(Clone, Debug, Default)]
pub struct TypeEnv {
    stack: Vec<Binding>,
}

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv { stack: Vec::new() }
    }

    pub fn bind_var(&self, name: &str, ty: ObjType) -> TypeEnv {
        let mut e = self.clone();
        e.stack.push(Binding::Var(String::from(name), ty));
        e
    }

    pub fn bind_this(&self, ty: ObjType, level: SecLevel) -> TypeEnv {
        let mut e = self.clone();
        e.stack.push(Binding::This(ty, level));
        e
    }

    pub fn lookup_var(&self, name: &str) -> Option<&ObjType> {
        self.stack.iter().rev().find_map(|b| match b {
            Binding::Var(n, ty) if n == name => Some(ty),
            _ => None,
        })
    }

    pub fn lookup_this(&self) -> Option<(&ObjType, SecLevel)> {
        self.stack.iter().rev().find_map(|b| match b {
            Binding::This(ty, lv) => Some((ty, *lv)),
            _ => None,
        })
    }

    /// Global levels mentioned by the environment, used by minimal_type.
    fn globs(&self) -> Vec<&GlobalLevel> {
        self.stack
            .iter()
            .map(|b| match b {
                Binding::Var(_, ty) | Binding::This(ty, _) => &ty.glob,
            })
            .collect()
    }
}

/// The type of a whole configuration. `fut_label` records each future's
/// originating method label; it determines the PC at which the request is
/// checked and is carried here because the origin is part of the typing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigType {
    pub gamma_act: BTreeMap<ActivityId, ObjType>,
    pub gamma_fut: BTreeMap<FutureId, ObjType>,
    pub fut_label: BTreeMap<FutureId, Option<Label>>,
    pub sec: SecAssignment,
}

impl ConfigType {
    pub fn empty(sec: SecAssignment) -> Self {
        ConfigType {
            gamma_act: BTreeMap::new(),
            gamma_fut: BTreeMap::new(),
            fut_label: BTreeMap::new(),
            sec,
        }
    }

    /// The level M of an activity: join of its assignment values.
    pub fn activity_level(&self, alpha: &ActivityId) -> Option<SecLevel> {
        self.gamma_act.get(alpha).map(|ty| join_all(ty.ass.values().copied()))
    }
}

fn join_all<I: Iterator<Item = SecLevel>>(levels: I) -> SecLevel {
    let mut acc = SecLevel::L;
    for l in levels {
        acc = acc.join(l);
    }
    acc
}

/// Names of the typing and subsumption rules a derivation node may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivRule {
    ValLocal,
    ValSelf,
    ValActRef,
    ValFutRef,
    TypeObject,
    TypeCall,
    TypeUpdate,
    TypeActive,
    SubSecAss,
    SubGlob,
    SubLoc,
}

impl DerivRule {
    pub fn name(self) -> &'static str {
        match self {
            DerivRule::ValLocal => "Val Local",
            DerivRule::ValSelf => "Val Self",
            DerivRule::ValActRef => "Type Active Object Reference",
            DerivRule::ValFutRef => "Type Future Reference",
            DerivRule::TypeObject => "Type Object",
            DerivRule::TypeCall => "Type Call",
            DerivRule::TypeUpdate => "Type Update",
            DerivRule::TypeActive => "Type Active",
            DerivRule::SubSecAss => "SecAss Subsumption",
            DerivRule::SubGlob => "Glob Subsumption",
            DerivRule::SubLoc => "Loc Subsumption",
        }
    }
}

/// One node of a typing derivation: a rule instance concluding
/// `pc |- term : ty` with premises in `children`.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub rule: DerivRule,
    pub pc: SecLevel,
    pub term: Term,
    pub ty: ObjType,
    pub children: Vec<Derivation>,
}

impl Derivation {
    fn leaf(rule: DerivRule, pc: SecLevel, term: &Term, ty: ObjType) -> Self {
        Derivation { rule, pc, term: term.clone(), ty, children: Vec::new() }
    }

    fn node(
        rule: DerivRule,
        pc: SecLevel,
        term: &Term,
        ty: ObjType,
        children: Vec<Derivation>,
    ) -> Self {
        Derivation { rule, pc, term: term.clone(), ty, children }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        let mut t = print_term(&self.term);
        if t.len() > 56 {
            t.truncate(53);
            t.push_str("...");
        }
        out.push_str(&format!("{}: [{}] {} : {}\n", self.rule.name(), self.pc, t, self.ty));
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// A structured type-check refusal. `forces` carries repair hints: labels
/// whose assignment would have to be H for the failing judgement to go
/// through, used to build the constraint chains reported for rejected
/// configurations. `chain` is filled by configuration-level diagnosis.
#[derive(Clone, Debug)]
pub struct TypeError {
    pub path: Path,
    pub message: String,
    pub needs_pc: Option<SecLevel>,
    pub pinned_delta: Option<GlobalLevel>,
    pub forces: Vec<(Label, String)>,
    pub chain: Vec<String>,
}

impl TypeError {
    fn new(message: String) -> Self {
        TypeError {
            path: Vec::new(),
            message,
            needs_pc: None,
            pinned_delta: None,
            forces: Vec::new(),
            chain: Vec::new(),
        }
    }

    fn with_needs(mut self, pc: SecLevel) -> Self {
        self.needs_pc = Some(pc);
        self
    }

    fn with_pinned(mut self, delta: GlobalLevel) -> Self {
        self.pinned_delta = Some(delta);
        self
    }

    fn with_force(mut self, label: &str, why: String) -> Self {
        self.forces.push((String::from(label), why));
        self
    }

    fn prepend(mut self, step: PathStep) -> Self {
        self.path.insert(0, step);
        self
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)?;
        if !self.path.is_empty() {
            write!(f, " (at {})", crate::semantics::path_to_string(&self.path))?;
        }
        for line in &self.chain {
            write!(f, "\n  {line}")?;
        }
        Ok(())
    }
}

fn validate_ctx(ctx: &ConfigType) -> Result<(), TypeError> {
    let all = ctx.gamma_act.values().chain(ctx.gamma_fut.values());
    for ty in all {
        for (l, lv) in &ty.ass {
            if ctx.sec.get(l) != *lv {
                return Err(TypeError::new(format!(
                    "internal inconsistency: context assigns {l}: {lv} but sec maps it to {}",
                    ctx.sec.get(l)
                )));
            }
        }
    }
    Ok(())
}

/// Labels a term's typing can mention: labels occurring syntactically plus
/// the assignment domains of every reference and free variable in the term.
pub fn needed_labels(ctx: &ConfigType, env: &TypeEnv, term: &Term) -> BTreeSet<Label> {
    let mut acc = term.labels();
    for a in term.act_refs() {
        if let Some(ty) = ctx.gamma_act.get(&a) {
            acc.extend(ty.ass.keys().cloned());
        }
    }
    for f in term.fut_refs() {
        if let Some(ty) = ctx.gamma_fut.get(&f) {
            acc.extend(ty.ass.keys().cloned());
        }
    }
    for x in term.free_vars() {
        if let Some(ty) = env.lookup_var(&x) {
            acc.extend(ty.ass.keys().cloned());
        }
    }
    acc
}

/// PC of a future occurrence: the sec level of its originating label.
fn future_pc(ctx: &ConfigType, f: FutureId) -> Result<SecLevel, TypeError> {
    match ctx.fut_label.get(&f) {
        Some(Some(l)) => Ok(ctx.sec.get(l)),
        Some(None) => Err(TypeError::new(format!(
            "future {f} has no originating method label, so its occurrences cannot be typed"
        ))),
        None => Err(TypeError::new(format!("no type recorded for future {f}"))),
    }
}

/// The PC at which a call target naturally concludes. Flexible shapes (plain
/// variables, activity references) pick L, the weakest choice.
fn natural_pc(
    ctx: &ConfigType,
    env: &TypeEnv,
    t: &Term,
    ass: &BTreeMap<Label, SecLevel>,
) -> Result<SecLevel, TypeError> {
    match t {
        Term::Var(_) | Term::ActRef(_) => Ok(SecLevel::L),
        Term::This => match env.lookup_this() {
            Some((_, m)) => Ok(m),
            None => Err(TypeError::new(String::from("this is not bound here"))),
        },
        Term::FutRef(f) => future_pc(ctx, *f),
        Term::Object(ms) => {
            let mut m0 = SecLevel::L;
            for m in ms {
                match ass.get(&m.label) {
                    Some(lv) => m0 = m0.join(*lv),
                    None => {
                        return Err(TypeError::new(format!(
                            "method {} is not covered by the security assignment",
                            m.label
                        )))
                    }
                }
            }
            Ok(m0)
        }
        Term::Call { label, .. } => match ass.get(label) {
            Some(lv) => Ok(*lv),
            None => Err(TypeError::new(format!(
                "label {label} is not covered by the security assignment"
            ))),
        },
        Term::Update { target, .. } => natural_pc(ctx, env, target, ass),
        Term::Activate(inner) => natural_pc(ctx, env, inner, ass),
    }
}

/// Leaf conclusion: bridges a core type to the expected one with SecAss and,
/// when permitted, Glob subsumption.
fn leaf(
    rule: DerivRule,
    pc: SecLevel,
    t: &Term,
    core: &ObjType,
    want: &ObjType,
    exact: bool,
) -> Result<Derivation, TypeError> {
    for (l, lv) in &core.ass {
        match want.ass.get(l) {
            Some(w) if w == lv => {}
            Some(w) => {
                return Err(TypeError::new(format!(
                    "label {l} has level {lv} here but {w} in the expected assignment"
                )))
            }
            None => {
                return Err(TypeError::new(format!(
                    "label {l} (level {lv}) is missing from the expected assignment"
                )))
            }
        }
    }
    let mut d = Derivation::leaf(rule, pc, t, core.clone());
    if core.glob != want.glob {
        if !exact && pc == SecLevel::L && core.glob.is_subset(&want.glob) {
            d = Derivation::node(
                DerivRule::SubGlob,
                pc,
                t,
                ObjType::new(core.ass.clone(), want.glob.clone()),
                alloc::vec![d],
            );
        } else {
            let mut err = TypeError::new(format!(
                "global level {} does not match the expected {}",
                render_glob(&core.glob),
                render_glob(&want.glob)
            ));
            if core.glob.is_subset(&want.glob) {
                err = err.with_pinned(core.glob.clone());
            }
            return Err(err);
        }
    }
    if core.ass != want.ass {
        d = Derivation::node(
            DerivRule::SubSecAss,
            pc,
            t,
            ObjType::new(want.ass.clone(), want.glob.clone()),
            alloc::vec![d],
        );
    }
    Ok(d)
}

fn render_glob(g: &GlobalLevel) -> String {
    let names: Vec<String> = g.iter().map(|a| format!("{a}")).collect();
    format!("{{{}}}", names.join(", "))
}

/// Attaches a repair hint when a premise keyed by `label` at level L fails
/// because its subterm can only conclude at H.
fn force_on_premise(mut err: TypeError, label: &str, level: SecLevel) -> TypeError {
    if err.needs_pc == Some(SecLevel::H) && level == SecLevel::L && err.forces.is_empty() {
        let why = err.message.clone();
        err = err.with_force(label, why);
    }
    err
}

fn derive(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    t: &Term,
    want: &ObjType,
    exact: bool,
) -> Result<Derivation, TypeError> {
    match derive_core(ctx, env, pc, t, want, exact) {
        Ok(d) => Ok(d),
        Err(e) => {
            // A failed region may still conclude at a smaller global level
            // and be lifted by Glob, when the node's own level permits it.
            if !exact {
                if let Some(pinned) = e.pinned_delta.clone() {
                    let gate = glob_gate(ctx, env, pc, t, want);
                    if gate == Some(SecLevel::L)
                        && pinned != want.glob
                        && pinned.is_subset(&want.glob)
                    {
                        let inner_want = ObjType::new(want.ass.clone(), pinned);
                        if let Ok(d) = derive_core(ctx, env, pc, t, &inner_want, exact) {
                            return Ok(Derivation::node(
                                DerivRule::SubGlob,
                                pc,
                                t,
                                ObjType::new(want.ass.clone(), want.glob.clone()),
                                alloc::vec![d],
                            ));
                        }
                    }
                }
            }
            Err(e)
        }
    }
}

/// The level that gates Glob subsumption at this node's conclusion: an
/// object's own level, a call's label level, an update's context level.
fn glob_gate(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    t: &Term,
    want: &ObjType,
) -> Option<SecLevel> {
    match t {
        Term::Object(_) => natural_pc(ctx, env, t, &want.ass).ok(),
        Term::Call { label, .. } => want.ass.get(label).copied(),
        Term::Update { .. } => Some(pc),
        _ => None,
    }
}

fn derive_core(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    t: &Term,
    want: &ObjType,
    exact: bool,
) -> Result<Derivation, TypeError> {
    match t {
        Term::Var(x) => {
            let ty = env.lookup_var(x).ok_or_else(|| {
                TypeError::new(format!("unbound variable {x}"))
            })?;
            leaf(DerivRule::ValLocal, pc, t, &ty.clone(), want, exact)
        }
        Term::This => {
            let (ty, m) = env
                .lookup_this()
                .ok_or_else(|| TypeError::new(String::from("this is not bound here")))?;
            if pc != m {
                return Err(TypeError::new(format!(
                    "this is usable only at its object's level {m}, context is {pc}"
                ))
                .with_needs(m));
            }
            leaf(DerivRule::ValSelf, pc, t, &ty.clone(), want, exact)
        }
        Term::ActRef(a) => {
            let ty = ctx.gamma_act.get(a).ok_or_else(|| {
                TypeError::new(format!("no type recorded for activity {a}"))
            })?;
            leaf(DerivRule::ValActRef, pc, t, &ty.clone(), want, exact)
        }
        Term::FutRef(f) => {
            let ty = ctx
                .gamma_fut
                .get(f)
                .ok_or_else(|| TypeError::new(format!("no type recorded for future {f}")))?
                .clone();
            let pcf = future_pc(ctx, *f)?;
            if pc != pcf {
                return Err(TypeError::new(format!(
                    "future {f} originates from a {pcf} method, context is {pc}"
                ))
                .with_needs(pcf));
            }
            leaf(DerivRule::ValFutRef, pc, t, &ty, want, exact)
        }
        Term::Object(ms) => {
            for m in ms {
                if !want.ass.contains_key(&m.label) {
                    return Err(TypeError::new(format!(
                        "method {} is not covered by the security assignment",
                        m.label
                    )));
                }
            }
            let needed = needed_labels(ctx, env, t);
            let a0: BTreeMap<Label, SecLevel> = want
                .ass
                .iter()
                .filter(|(l, _)| needed.contains(*l))
                .map(|(l, lv)| (l.clone(), *lv))
                .collect();
            let m0 = join_all(ms.iter().map(|m| a0[&m.label]));
            let loc = if pc == m0 {
                false
            } else if pc == SecLevel::H && m0 == SecLevel::L {
                true
            } else {
                // m0 == H, pc == L
                return Err(TypeError::new(format!(
                    "object's own level is {m0} but the context requires {pc}"
                ))
                .with_needs(m0));
            };
            let sigma0 = ObjType::new(a0.clone(), want.glob.clone());
            let child_exact = exact || m0 == SecLevel::H;
            let env_this = env.bind_this(sigma0.clone(), m0);
            let mut children = Vec::new();
            let mut errors: Vec<TypeError> = Vec::new();
            for (i, m) in ms.iter().enumerate() {
                let env_m = env_this.bind_var(&m.binder, sigma0.clone());
                match derive(ctx, &env_m, a0[&m.label], &m.body, &sigma0, child_exact) {
                    Ok(d) => children.push(d),
                    Err(e) => {
                        let e = force_on_premise(e, &m.label, a0[&m.label]);
                        errors.push(e.prepend(PathStep::Method(i)));
                    }
                }
            }
            if !errors.is_empty() {
                let mut primary = errors.remove(0);
                for e in errors {
                    primary.forces.extend(e.forces);
                }
                return Err(primary);
            }
            let mut d =
                Derivation::node(DerivRule::TypeObject, m0, t, sigma0.clone(), children);
            if loc {
                d = Derivation::node(DerivRule::SubLoc, pc, t, sigma0, alloc::vec![d]);
            }
            if a0 != want.ass {
                d = Derivation::node(DerivRule::SubSecAss, pc, t, want.clone(), alloc::vec![d]);
            }
            Ok(d)
        }
        Term::Call { target, label, arg } => {
            let la = *want.ass.get(label).ok_or_else(|| {
                TypeError::new(format!(
                    "label {label} is not covered by the security assignment"
                ))
            })?;
            if pc != la {
                let err = TypeError::new(format!(
                    "call on {label} concludes at {la} but the context requires {pc}"
                ));
                return Err(if la == SecLevel::H {
                    err.with_needs(SecLevel::H)
                } else {
                    let why = format!("call on {label} occurs in an H context");
                    err.with_force(label, why)
                });
            }
            let child_exact = exact || la == SecLevel::H;
            let s = natural_pc(ctx, env, target, &want.ass)?;
            let dt = derive(ctx, env, s, target, want, child_exact)
                .map_err(|e| e.prepend(PathStep::CallTarget))?;
            let da = derive(ctx, env, la, arg, want, child_exact)
                .map_err(|e| force_on_premise(e, label, la).prepend(PathStep::CallArg))?;
            Ok(Derivation::node(
                DerivRule::TypeCall,
                pc,
                t,
                want.clone(),
                alloc::vec![dt, da],
            ))
        }
        Term::Update { target, label, binder, body } => {
            let needed = needed_labels(ctx, env, t);
            let a_r: BTreeMap<Label, SecLevel> = want
                .ass
                .iter()
                .filter(|(l, _)| needed.contains(*l))
                .map(|(l, lv)| (l.clone(), *lv))
                .collect();
            let lb = *a_r.get(label).ok_or_else(|| {
                TypeError::new(format!(
                    "label {label} is not covered by the security assignment"
                ))
            })?;
            let sigma_r = ObjType::new(a_r.clone(), want.glob.clone());
            let m_upd = join_all(a_r.values().copied());
            let child_exact = exact || pc == SecLevel::H;
            let dt = derive(ctx, env, pc, target, &sigma_r, child_exact)
                .map_err(|e| e.prepend(PathStep::UpdateTarget))?;
            let env_b = env.bind_this(sigma_r.clone(), m_upd).bind_var(binder, sigma_r.clone());
            let db = derive(ctx, &env_b, lb, body, &sigma_r, child_exact)
                .map_err(|e| force_on_premise(e, label, lb).prepend(PathStep::UpdateBody))?;
            let mut d = Derivation::node(
                DerivRule::TypeUpdate,
                pc,
                t,
                sigma_r,
                alloc::vec![dt, db],
            );
            if a_r != want.ass {
                d = Derivation::node(DerivRule::SubSecAss, pc, t, want.clone(), alloc::vec![d]);
            }
            Ok(d)
        }
        Term::Activate(inner) => {
            let di = derive(ctx, env, pc, inner, want, exact)
                .map_err(|e| e.prepend(PathStep::ActivateInner))?;
            Ok(Derivation::node(DerivRule::TypeActive, pc, t, want.clone(), alloc::vec![di]))
        }
    }
}

/// Checks `pc |- term : expected` under the given context and environment.
pub fn check_term(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    term: &Term,
    expected: &ObjType,
) -> Result<Derivation, TypeError> {
    validate_ctx(ctx)?;
    derive(ctx, env, pc, term, expected, false)
}

/// The least (ass, glob) the term can be checked against at the given PC.
/// Search space: assignments over the term's needed labels crossed with the
/// global levels generated by the references in scope.
pub fn minimal_type(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    term: &Term,
) -> Result<ObjType, TypeError> {
    validate_ctx(ctx)?;
    let needed: Vec<Label> = needed_labels(ctx, env, term).into_iter().collect();
    if needed.len() > 8 {
        return Err(TypeError::new(format!(
            "minimal type search space too large ({} candidate labels)",
            needed.len()
        )));
    }
    let mut universe: GlobalLevel = BTreeSet::new();
    for a in term.act_refs() {
        if let Some(ty) = ctx.gamma_act.get(&a) {
            universe.extend(ty.glob.iter().cloned());
        }
    }
    for f in term.fut_refs() {
        if let Some(ty) = ctx.gamma_fut.get(&f) {
            universe.extend(ty.glob.iter().cloned());
        }
    }
    for g in env.globs() {
        universe.extend(g.iter().cloned());
    }
    let ids: Vec<ActivityId> = universe.into_iter().collect();
    if ids.len() > 6 {
        return Err(TypeError::new(String::from(
            "minimal type search space too large (global level universe)",
        )));
    }

    let mut accepted: Vec<ObjType> = Vec::new();
    let mut first_err: Option<TypeError> = None;
    // Each needed label is absent, L, or H; globals range over subsets.
    let n = needed.len() as u32;
    for mask in 0..3u64.pow(n) {
        let mut ass = BTreeMap::new();
        let mut m = mask;
        for l in &needed {
            match m % 3 {
                0 => {}
                1 => {
                    ass.insert(l.clone(), SecLevel::L);
                }
                _ => {
                    ass.insert(l.clone(), SecLevel::H);
                }
            }
            m /= 3;
        }
        for gmask in 0..(1u64 << ids.len()) {
            let glob: GlobalLevel = ids
                .iter()
                .enumerate()
                .filter(|(i, _)| gmask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            let cand = ObjType::new(ass.clone(), glob);
            match derive(ctx, env, pc, term, &cand, false) {
                Ok(_) => accepted.push(cand),
                Err(e) => {
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(first_err
            .unwrap_or_else(|| TypeError::new(String::from("term has no type at this PC"))));
    }
    let leq = |a: &ObjType, b: &ObjType| {
        a.ass_included_in(&b.ass) && a.glob.is_subset(&b.glob)
    };
    for cand in &accepted {
        if accepted.iter().all(|other| leq(cand, other)) {
            return Ok(cand.clone());
        }
    }
    Err(TypeError::new(String::from(
        "no least type exists among the derivable candidates",
    )))
}

/// Builds the context maps for a configuration: each activity's assignment
/// is sec restricted to the labels its active object and requests can reach
/// (their syntactic labels closed under the references they hold), and its
/// global level is the visibility range.
pub(crate) fn build_ctx(
    config: &Configuration,
    sec: &SecAssignment,
) -> Result<ConfigType, TypeError> {
    fn terms_of(
        act: &crate::config::Activity,
    ) -> impl Iterator<Item = &Term> {
        core::iter::once(&act.active_object).chain(act.queue.iter().map(|r| &r.term))
    }
    let mut needed: BTreeMap<ActivityId, BTreeSet<Label>> = BTreeMap::new();
    for (alpha, act) in &config.activities {
        let mut labels = BTreeSet::new();
        for t in terms_of(act) {
            labels.extend(t.labels());
        }
        needed.insert(alpha.clone(), labels);
    }
    loop {
        let mut changed = false;
        let snapshot = needed.clone();
        for (alpha, act) in &config.activities {
            let mut grow: BTreeSet<Label> = BTreeSet::new();
            for t in terms_of(act) {
                for beta in t.act_refs() {
                    if let Some(s) = snapshot.get(&beta) {
                        grow.extend(s.iter().cloned());
                    }
                }
                for f in t.fut_refs() {
                    if let Some(home) = config.future_home(f) {
                        if let Some(s) = snapshot.get(home) {
                            grow.extend(s.iter().cloned());
                        }
                    }
                }
            }
            let entry = needed.get_mut(alpha).unwrap();
            let before = entry.len();
            entry.extend(grow);
            if entry.len() != before {
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut gamma_act = BTreeMap::new();
    for alpha in config.activities.keys() {
        let glob = global_level(alpha, config, sec)
            .map_err(|e| TypeError::new(format!("{e}")))?;
        let ass: BTreeMap<Label, SecLevel> = needed[alpha]
            .iter()
            .map(|l| (l.clone(), sec.get(l)))
            .collect();
        gamma_act.insert(alpha.clone(), ObjType::new(ass, glob));
    }
    // Futures type at what their request term can reach: its own labels and
    // globals, those of referenced activities, and those of referenced
    // futures (a fixpoint, since replies copy terms between requests).
    let mut fut_shape: BTreeMap<FutureId, (BTreeSet<Label>, GlobalLevel)> = BTreeMap::new();
    let mut fut_label = BTreeMap::new();
    for (alpha, act) in &config.activities {
        for r in &act.queue {
            let home = &gamma_act[alpha];
            let mut labels = r.term.labels();
            let mut glob = home.glob.clone();
            for b in r.term.act_refs() {
                if let Some(ty) = gamma_act.get(&b) {
                    labels.extend(ty.ass.keys().cloned());
                    glob.extend(ty.glob.iter().cloned());
                }
            }
            fut_shape.insert(r.future, (labels, glob));
            fut_label.insert(r.future, r.origin_label.clone());
        }
    }
    loop {
        let mut changed = false;
        let snapshot = fut_shape.clone();
        for act in config.activities.values() {
            for r in &act.queue {
                let mut grow_labels: BTreeSet<Label> = BTreeSet::new();
                let mut grow_glob: BTreeSet<ActivityId> = BTreeSet::new();
                for f in r.term.fut_refs() {
                    if let Some((ls, gl)) = snapshot.get(&f) {
                        grow_labels.extend(ls.iter().cloned());
                        grow_glob.extend(gl.iter().cloned());
                    }
                }
                let entry = fut_shape.get_mut(&r.future).unwrap();
                let before = (entry.0.len(), entry.1.len());
                entry.0.extend(grow_labels);
                entry.1.extend(grow_glob);
                if (entry.0.len(), entry.1.len()) != before {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let gamma_fut = fut_shape
        .into_iter()
        .map(|(f, (labels, glob))| {
            let ass: BTreeMap<Label, SecLevel> =
                labels.iter().map(|l| (l.clone(), sec.get(l))).collect();
            (f, ObjType::new(ass, glob))
        })
        .collect();
    Ok(ConfigType { gamma_act, gamma_fut, fut_label, sec: sec.clone() })
}

/// All judgement failures for the configuration under the given sec.
pub(crate) fn check_all(
    config: &Configuration,
    ctx: &ConfigType,
) -> Vec<(String, TypeError)> {
    let mut errs = Vec::new();
    for (alpha, act) in &config.activities {
        let want = &ctx.gamma_act[alpha];
        let m_alpha = join_all(want.ass.values().copied());
        if let Err(e) = derive(ctx, &TypeEnv::new(), m_alpha, &act.active_object, want, false)
        {
            errs.push((format!("active object of {alpha}"), e));
        }
        for r in &act.queue {
            let want_f = &ctx.gamma_fut[&r.future];
            let result = match &r.origin_label {
                Some(l) => {
                    derive(ctx, &TypeEnv::new(), ctx.sec.get(l), &r.term, want_f, false)
                }
                None => {
                    // Initial requests have no originating label; their PC is
                    // existential.
                    derive(ctx, &TypeEnv::new(), SecLevel::L, &r.term, want_f, false).or_else(
                        |e| {
                            derive(ctx, &TypeEnv::new(), SecLevel::H, &r.term, want_f, false)
                                .map_err(|_| e)
                        },
                    )
                }
            };
            if let Err(e) = result {
                errs.push((format!("request {} of {alpha}", r.future), e));
            }
        }
    }
    errs
}

/// Types a whole configuration against a security assignment. On rejection
/// the error carries a constraint chain showing which labels are forced to H
/// and where that conflicts with the given sec.
pub fn check_configuration(
    config: &Configuration,
    sec: &SecAssignment,
) -> Result<ConfigType, TypeError> {
    if let Some(w) = config.wellformedness_error() {
        return Err(TypeError::new(format!("configuration is not well-formed: {w}")));
    }
    let ctx = build_ctx(config, sec)?;
    let errs = check_all(config, &ctx);
    if errs.is_empty() {
        return Ok(ctx);
    }

    // Diagnosis: raise forced labels to H one round at a time and watch what
    // else the raise forces, stopping at labels the given sec pins to L.
    let mut sec2 = sec.clone();
    let mut chain: Vec<String> = Vec::new();
    let mut flagged: BTreeSet<Label> = BTreeSet::new();
    let pinned_l: BTreeSet<Label> = sec
        .listed()
        .filter(|(_, lv)| *lv == SecLevel::L)
        .map(|(l, _)| l.clone())
        .collect();
    for _ in 0..24 {
        let ctx2 = match build_ctx(config, &sec2) {
            Ok(c) => c,
            Err(_) => break,
        };
        let round = check_all(config, &ctx2);
        if round.is_empty() {
            break;
        }
        let mut progress = false;
        for (_, e) in &round {
            for (l, why) in &e.forces {
                if flagged.contains(l) {
                    continue;
                }
                flagged.insert(l.clone());
                progress = true;
                if pinned_l.contains(l) {
                    chain.push(format!(
                        "{l} forced H: {why} (but sec fixes {l}: L)"
                    ));
                } else {
                    chain.push(format!("{l} forced H: {why}"));
                    sec2.insert(l, SecLevel::H);
                }
            }
        }
        if !progress {
            break;
        }
    }

    let (where_, mut primary) = errs.into_iter().next().unwrap();
    primary.message = format!("{where_}: {}", primary.message);
    primary.chain = chain;
    Err(primary)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleError {
    SizeLimitExceeded,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "oracle size limit exceeded")
    }
}

/// Brute-force derivation search over the same rule system: subsumption
/// choices (assignment sub-maps, global sub-levels where the PC permits,
/// Loc on literals) and the call target PC are enumerated exhaustively.
pub fn derivation_search_oracle(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    term: &Term,
    expected: &ObjType,
    depth_bound: u32,
) -> Result<bool, OracleError> {
    if term.size() > 96 {
        return Err(OracleError::SizeLimitExceeded);
    }
    let mut budget: u64 = 4_000_000;
    prove(ctx, env, pc, term, expected, false, depth_bound, &mut budget)
}

fn subsets(set: &GlobalLevel) -> Vec<GlobalLevel> {
    let items: Vec<&ActivityId> = set.iter().collect();
    let mut out = Vec::new();
    for mask in 0..(1u64 << items.len()) {
        out.push(
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << *i) != 0)
                .map(|(_, a)| (*a).clone())
                .collect(),
        );
    }
    out
}

/// Sub-maps of `ass` that contain all of `required`.
fn submaps(
    ass: &BTreeMap<Label, SecLevel>,
    required: &BTreeSet<Label>,
) -> Vec<BTreeMap<Label, SecLevel>> {
    if required.iter().any(|l| !ass.contains_key(l)) {
        return Vec::new();
    }
    let optional: Vec<(&Label, SecLevel)> = ass
        .iter()
        .filter(|(l, _)| !required.contains(*l))
        .map(|(l, lv)| (l, *lv))
        .collect();
    let base: BTreeMap<Label, SecLevel> = required
        .iter()
        .map(|l| (l.clone(), ass[l]))
        .collect();
    let mut out = Vec::new();
    for mask in 0..(1u64 << optional.len()) {
        let mut m = base.clone();
        for (i, (l, lv)) in optional.iter().enumerate() {
            if mask & (1 << i) != 0 {
                m.insert((*l).clone(), *lv);
            }
        }
        out.push(m);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn prove(
    ctx: &ConfigType,
    env: &TypeEnv,
    pc: SecLevel,
    t: &Term,
    want: &ObjType,
    exact: bool,
    depth: u32,
    budget: &mut u64,
) -> Result<bool, OracleError> {
    if *budget == 0 {
        return Err(OracleError::SizeLimitExceeded);
    }
    *budget -= 1;
    if depth == 0 {
        return Err(OracleError::SizeLimitExceeded);
    }
    let glob_choices = |node_pc: SecLevel| -> Vec<GlobalLevel> {
        if !exact && node_pc == SecLevel::L {
            subsets(&want.glob)
        } else {
            alloc::vec![want.glob.clone()]
        }
    };
    let leaf_ok = |core: &ObjType, leaf_pc: SecLevel| -> bool {
        let ass_ok = core.ass_included_in(&want.ass);
        let glob_ok = core.glob == want.glob
            || (!exact && leaf_pc == SecLevel::L && core.glob.is_subset(&want.glob));
        ass_ok && glob_ok
    };
    match t {
        Term::Var(x) => Ok(env.lookup_var(x).map_or(false, |ty| leaf_ok(ty, pc))),
        Term::This => Ok(env
            .lookup_this()
            .map_or(false, |(ty, m)| pc == m && leaf_ok(ty, pc))),
        Term::ActRef(a) => Ok(ctx.gamma_act.get(a).map_or(false, |ty| leaf_ok(ty, pc))),
        Term::FutRef(f) => {
            let Some(ty) = ctx.gamma_fut.get(f) else { return Ok(false) };
            let Ok(pcf) = future_pc(ctx, *f) else { return Ok(false) };
            Ok(pc == pcf && leaf_ok(ty, pc))
        }
        Term::Activate(inner) => prove(ctx, env, pc, inner, want, exact, depth - 1, budget),
        Term::Object(ms) => {
            let required: BTreeSet<Label> = ms.iter().map(|m| m.label.clone()).collect();
            for a_c in submaps(&want.ass, &required) {
                let m0 = join_all(ms.iter().map(|m| a_c[&m.label]));
                if !(pc == m0 || (pc == SecLevel::H && m0 == SecLevel::L)) {
                    continue;
                }
                for glob_c in glob_choices(m0) {
                    let sigma0 = ObjType::new(a_c.clone(), glob_c);
                    let child_exact = exact || m0 == SecLevel::H;
                    let env_this = env.bind_this(sigma0.clone(), m0);
                    let mut all = true;
                    for m in ms {
                        let env_m = env_this.bind_var(&m.binder, sigma0.clone());
                        if !prove(
                            ctx,
                            &env_m,
                            a_c[&m.label],
                            &m.body,
                            &sigma0,
                            child_exact,
                            depth - 1,
                            budget,
                        )? {
                            all = false;
                            break;
                        }
                    }
                    if all {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
        Term::Call { target, label, arg } => {
            let mut required = BTreeSet::new();
            required.insert(label.clone());
            for a_c in submaps(&want.ass, &required) {
                let la = a_c[label];
                if pc != la {
                    continue;
                }
                for glob_c in glob_choices(pc) {
                    let sigma = ObjType::new(a_c.clone(), glob_c);
                    let child_exact = exact || la == SecLevel::H;
                    let mut target_ok = false;
                    for s in [SecLevel::L, SecLevel::H] {
                        if prove(ctx, env, s, target, &sigma, child_exact, depth - 1, budget)? {
                            target_ok = true;
                            break;
                        }
                    }
                    if target_ok
                        && prove(ctx, env, la, arg, &sigma, child_exact, depth - 1, budget)?
                    {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
        Term::Update { target, label, binder, body } => {
            let mut required = BTreeSet::new();
            required.insert(label.clone());
            for a_c in submaps(&want.ass, &required) {
                let lb = a_c[label];
                let m_upd = join_all(a_c.values().copied());
                for glob_c in glob_choices(pc) {
                    let sigma = ObjType::new(a_c.clone(), glob_c);
                    let child_exact = exact || pc == SecLevel::H;
                    if !prove(ctx, env, pc, target, &sigma, child_exact, depth - 1, budget)? {
                        continue;
                    }
                    let env_b =
                        env.bind_this(sigma.clone(), m_upd).bind_var(binder, sigma.clone());
                    if prove(ctx, &env_b, lb, body, &sigma, child_exact, depth - 1, budget)? {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
    }
}
