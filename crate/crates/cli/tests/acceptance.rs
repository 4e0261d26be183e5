//! Acceptance suite: one test per criterion, each ending in a single
//! `criterion N PASS - ...` line (run with --nocapture to see them). A
//! failing criterion panics with a matching FAIL line.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use aspfun_cli::corpus;
use aspfun_core::parser::parse_term;
use aspfun_core::printer::print_term;
use aspfun_core::properties::{
    check_confinement, check_multilateral, check_noninterference,
    check_preservation, h_variants, indistinguishable, PropError, Verdict,
};
use aspfun_core::secmodel::{
    leq_class, meet_class, SecAssignment, SecClass, SecLevel,
};
use aspfun_core::semantics::{enumerate_config_steps, run_config, Policy};
use aspfun_core::typecheck::{
    check_configuration, check_term, derivation_search_oracle, minimal_type,
    ObjType, OracleError, TypeEnv,
};
use aspfun_core::{Activity, ActivityId, Configuration, FutureId, Method, Term};

fn pass(n: u32, detail: &str) {
    println!("criterion {n} PASS - {detail}");
}

fn load(name: &str) -> (Configuration, SecAssignment) {
    corpus::load_example(name).unwrap()
}

#[test]
fn criterion_1_fallacious_rejection() {
    let t0 = Instant::now();
    let (config, sec) = load("privatesort-fallacious");
    let err = check_configuration(&config, &sec)
        .expect_err("criterion 1 FAIL - fallacious entry was accepted");
    let rendered = err.to_string();
    for needle in [
        "income",
        "div forced H",
        "gt0 forced H",
        "if forced H",
        "ord forced H",
        "(but sec fixes ord: L)",
    ] {
        assert!(
            rendered.contains(needle),
            "criterion 1 FAIL - chain lacks {needle:?}:\n{rendered}"
        );
    }
    let out = Command::new(env!("CARGO_BIN_EXE_aspfun"))
        .args(["typecheck", "privatesort-fallacious"])
        .output()
        .expect("criterion 1 FAIL - cannot run the binary");
    assert_eq!(
        out.status.code(),
        Some(1),
        "criterion 1 FAIL - typecheck exit code was {:?}",
        out.status.code()
    );
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "criterion 1 FAIL - took {elapsed:?}"
    );
    pass(
        1,
        &format!(
            "rejection chain forces income, div, gt0, if and ord to H, \
             conflicts with ord pinned at L, exit code 1, in {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_2_corpus_acceptance() {
    let mut timings = Vec::new();
    for name in ["privatesort", "nspk", "booleans", "borderline"] {
        let (config, sec) = load(name);
        let t0 = Instant::now();
        check_configuration(&config, &sec).unwrap_or_else(|e| {
            panic!("criterion 2 FAIL - {name} rejected: {e}")
        });
        let elapsed = t0.elapsed();
        assert!(
            elapsed.as_secs_f64() < 1.0,
            "criterion 2 FAIL - {name} took {elapsed:?}"
        );
        timings.push(format!("{name} {elapsed:?}"));
    }
    let (config, _) = load("borderline");
    let repinned =
        SecAssignment::from_pairs(&[("leak", SecLevel::L), ("key", SecLevel::H)]);
    let err = check_configuration(&config, &repinned)
        .expect_err("criterion 2 FAIL - repinned borderline was accepted");
    let rendered = err.to_string();
    assert!(
        rendered.contains("leak forced H"),
        "criterion 2 FAIL - repinned borderline cause is {rendered}"
    );
    pass(
        2,
        &format!(
            "accepted {}; repinning leak to L rejected with \"leak forced H\"",
            timings.join(", ")
        ),
    );
}

#[test]
fn criterion_3_if_then_else_constraint() {
    let (mut config, _) = load("booleans");
    config
        .activities
        .retain(|id, _| id.name == "troo" || id.name == "falz");
    assert_eq!(config.activities.len(), 2, "criterion 3 FAIL - corpus drift");
    let levels = [SecLevel::L, SecLevel::H];
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for l_if in levels {
        for l_then in levels {
            for l_else in levels {
                let sec = SecAssignment::from_pairs(&[
                    ("if", l_if),
                    ("then", l_then),
                    ("else", l_else),
                ]);
                let ok = check_configuration(&config, &sec).is_ok();
                let uniform = l_if == l_then && l_then == l_else;
                assert_eq!(
                    ok, uniform,
                    "criterion 3 FAIL - if:{l_if} then:{l_then} else:{l_else} \
                     {} but the levels are {}",
                    if ok { "accepted" } else { "rejected" },
                    if uniform { "uniform" } else { "mixed" },
                );
                if ok {
                    accepted.push(format!("{l_if}{l_then}{l_else}"));
                } else {
                    rejected += 1;
                }
            }
        }
    }
    pass(
        3,
        &format!(
            "of 8 assignments exactly {:?} accepted, {rejected} rejected",
            accepted
        ),
    );
}

fn rank_of(act: &Activity) -> u32 {
    let Term::Object(ms) = &act.active_object else {
        panic!("criterion 4 FAIL - worker is not an object")
    };
    let ord = ms.iter().find(|m| m.label == "ord").unwrap();
    let Term::Object(rms) = &ord.body else {
        panic!("criterion 4 FAIL - ord body is not a numeral")
    };
    let rank = rms.iter().find(|m| m.label == "rank").unwrap();
    let Term::Call { label, .. } = &rank.body else {
        panic!("criterion 4 FAIL - rank body is not a selector call")
    };
    label.strip_prefix('r').unwrap().parse().unwrap()
}

fn walk_list(t: &Term) -> Vec<ActivityId> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        let Term::Object(ms) = cur else {
            panic!("criterion 4 FAIL - list cell is {}", print_term(cur))
        };
        let Some(hd) = ms.iter().find(|m| m.label == "hd") else {
            return out;
        };
        let Term::ActRef(a) = &hd.body else {
            panic!(
                "criterion 4 FAIL - hd is {} instead of a reference",
                print_term(&hd.body)
            )
        };
        out.push(a.clone());
        cur = &ms.iter().find(|m| m.label == "tl").unwrap().body;
    }
}

#[test]
fn criterion_4_semantics_against_oracles() {
    // privatesort: the delivered list must match an independent sort of the
    // workers by the rank constants read off their ord numerals.
    let (config, _) = load("privatesort");
    let (fin, trace) = run_config(&config, Policy::First, 500);
    assert!(
        enumerate_config_steps(&fin).is_empty(),
        "criterion 4 FAIL - privatesort not quiescent within 500 steps"
    );
    let mut expected: Vec<(u32, ActivityId)> = fin
        .activities
        .iter()
        .filter(|(id, _)| id.name.starts_with("beta"))
        .map(|(id, act)| (rank_of(act), id.clone()))
        .collect();
    expected.sort();
    let expected: Vec<ActivityId> =
        expected.into_iter().map(|(_, id)| id).collect();
    let alpha = fin
        .activities
        .iter()
        .find(|(id, _)| id.name == "alpha")
        .map(|(_, act)| act)
        .unwrap();
    let result = alpha
        .queue
        .iter()
        .find(|r| r.future == FutureId(0))
        .expect("criterion 4 FAIL - privatesort #f0 is gone");
    let delivered = walk_list(&result.term);
    assert_eq!(
        delivered, expected,
        "criterion 4 FAIL - delivered order differs from the sort oracle"
    );
    let delivered_names: Vec<&str> =
        delivered.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(
        delivered_names,
        ["beta2", "beta1", "beta3"],
        "criterion 4 FAIL - rank constants moved under the corpus"
    );

    // nspk: each side ends up knowing the peer's nonce and neither took the
    // err branch.
    let (config, _) = load("nspk");
    let (fin, _) = run_config(&config, Policy::First, 200);
    assert!(
        enumerate_config_steps(&fin).is_empty(),
        "criterion 4 FAIL - nspk not quiescent within 200 steps"
    );
    let knows_of = |who: &str, origin: &str| -> Term {
        let act = fin
            .activities
            .iter()
            .find(|(id, _)| id.name == who)
            .map(|(_, act)| act)
            .unwrap();
        let req = act
            .queue
            .iter()
            .find(|r| r.origin_label.as_deref() == Some(origin))
            .unwrap_or_else(|| {
                panic!("criterion 4 FAIL - no {origin} request at {who}")
            });
        let Term::Object(ms) = &req.term else {
            panic!("criterion 4 FAIL - {origin} value is not an object")
        };
        ms.iter()
            .find(|m| m.label == "knows")
            .unwrap_or_else(|| {
                panic!("criterion 4 FAIL - {origin} value has no knows")
            })
            .body
            .clone()
    };
    let alice_knows = knows_of("alice", "step3");
    let bob_knows = knows_of("bob", "step2");
    let nb = parse_term("[check = sigma(p) p.isnb([])]").unwrap();
    let na = parse_term("[check = sigma(p) p.isna([])]").unwrap();
    assert_eq!(
        alice_knows, nb,
        "criterion 4 FAIL - alice knows {} instead of the nb nonce",
        print_term(&alice_knows)
    );
    assert_eq!(
        bob_knows, na,
        "criterion 4 FAIL - bob knows {} instead of the na nonce",
        print_term(&bob_knows)
    );
    for (who, knows) in [("alice", &alice_knows), ("bob", &bob_knows)] {
        assert!(
            !knows.labels().contains("err"),
            "criterion 4 FAIL - {who} took the err branch"
        );
    }
    pass(
        4,
        &format!(
            "privatesort delivers beta2, beta1, beta3 per the sort oracle \
             ({} steps); alice knows the nb nonce, bob the na nonce, no err",
            trace.len()
        ),
    );
}

#[test]
fn criterion_5_semilattice() {
    let t0 = Instant::now();
    let ids: Vec<ActivityId> = ["a", "b", "c"]
        .iter()
        .enumerate()
        .map(|(i, n)| ActivityId::new(i as u32, n))
        .collect();
    let mut universe = Vec::new();
    for level in [SecLevel::L, SecLevel::H] {
        for mask in 0..8u32 {
            let glob = ids
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            universe.push(SecClass::new(level, glob));
        }
    }
    assert_eq!(universe.len(), 16);
    for x in &universe {
        assert!(leq_class(x, x), "criterion 5 FAIL - {x} not reflexive");
        for y in &universe {
            if leq_class(x, y) && leq_class(y, x) {
                assert_eq!(x, y, "criterion 5 FAIL - antisymmetry at {x}, {y}");
            }
            let m = meet_class(x, y);
            assert!(
                leq_class(&m, x) && leq_class(&m, y),
                "criterion 5 FAIL - meet {m} above {x} or {y}"
            );
            for z in &universe {
                if leq_class(x, y) && leq_class(y, z) {
                    assert!(
                        leq_class(x, z),
                        "criterion 5 FAIL - transitivity at {x}, {y}, {z}"
                    );
                }
                if leq_class(z, x) && leq_class(z, y) {
                    assert!(
                        leq_class(z, &m),
                        "criterion 5 FAIL - {z} below {x} and {y} but not {m}"
                    );
                }
            }
        }
    }
    let ha = SecClass::new(SecLevel::H, [ids[0].clone()].into_iter().collect());
    let hb = SecClass::new(SecLevel::H, [ids[1].clone()].into_iter().collect());
    for cand in &universe {
        assert!(
            !(leq_class(&ha, cand) && leq_class(&hb, cand)),
            "criterion 5 FAIL - {cand} is an upper bound of {ha} and {hb}"
        );
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 5 FAIL - {elapsed:?}");
    pass(
        5,
        &format!(
            "order axioms, glb law and the missing upper bound of {ha} vs {hb} \
             verified over 16 classes in {elapsed:?}"
        ),
    );
}

struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }
}

fn gen_term(rng: &mut Rng, depth: u32, binders: &[String]) -> Term {
    if depth == 0 || rng.next() % 4 == 0 {
        return match rng.next() % 4 {
            0 if !binders.is_empty() => {
                Term::var(&binders[rng.next() as usize % binders.len()])
            }
            1 => Term::This,
            _ => Term::empty(),
        };
    }
    let labels = ["l", "m", "k"];
    match rng.next() % 4 {
        0 | 3 => {
            let n = 1 + rng.next() as usize % 3;
            let mut ms = Vec::new();
            for (i, l) in labels.iter().take(n).enumerate() {
                let binder = format!("x{depth}{i}");
                let mut inner = binders.to_vec();
                inner.push(binder.clone());
                ms.push(Method::new(l, &binder, gen_term(rng, depth - 1, &inner)));
            }
            Term::Object(ms)
        }
        1 => Term::call(
            gen_term(rng, depth - 1, binders),
            labels[rng.next() as usize % 3],
            gen_term(rng, depth - 1, binders),
        ),
        _ => {
            let binder = format!("y{depth}");
            let mut inner = binders.to_vec();
            inner.push(binder.clone());
            Term::update(
                gen_term(rng, depth - 1, binders),
                labels[rng.next() as usize % 3],
                &binder,
                gen_term(rng, depth - 1, &inner),
            )
        }
    }
}

fn subterms<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
    out.push(t);
    match t {
        Term::Object(ms) => {
            for m in ms {
                subterms(&m.body, out);
            }
        }
        Term::Call { target, arg, .. } => {
            subterms(target, out);
            subterms(arg, out);
        }
        Term::Update { target, body, .. } => {
            subterms(target, out);
            subterms(body, out);
        }
        Term::Activate(inner) => subterms(inner, out),
        _ => {}
    }
}

#[test]
fn criterion_6_oracle_equivalence() {
    // Random closed-ish terms against a two-label context.
    let (config, sec) = aspfun_core::parser::parse_configuration(
        "a [ | [l = sigma(x) [], m = sigma(x) []] ]\nsec { l: L, m: H }",
    )
    .unwrap();
    let ctx = check_configuration(&config, &sec).unwrap();
    let aid = config.activities.keys().next().unwrap().clone();
    let mut rng = Rng(0x5eed);
    let mut compared = 0u32;
    let mut skipped = 0u32;
    while compared < 200 {
        let depth = 1 + (rng.next() % 4) as u32;
        let term = gen_term(&mut rng, depth, &[]);
        let pc = if rng.next() % 2 == 0 { SecLevel::L } else { SecLevel::H };
        let mut ass = BTreeMap::new();
        if rng.next() % 2 == 0 {
            ass.insert(
                String::from("l"),
                if rng.next() % 2 == 0 { SecLevel::L } else { SecLevel::H },
            );
        }
        if rng.next() % 2 == 0 {
            ass.insert(
                String::from("m"),
                if rng.next() % 2 == 0 { SecLevel::L } else { SecLevel::H },
            );
        }
        let glob = if rng.next() % 2 == 0 {
            [aid.clone()].into_iter().collect()
        } else {
            Default::default()
        };
        let want = ObjType::new(ass, glob);
        let env = TypeEnv::new();
        let checked = check_term(&ctx, &env, pc, &term, &want).is_ok();
        match derivation_search_oracle(&ctx, &env, pc, &term, &want, 24) {
            Ok(found) => {
                assert_eq!(
                    checked,
                    found,
                    "criterion 6 FAIL - checker {checked} oracle {found} on {} at {pc} against {want:?}",
                    print_term(&term)
                );
                compared += 1;
            }
            Err(OracleError::SizeLimitExceeded) => skipped += 1,
        }
    }

    // Corpus sub-terms, deduplicated, against the entry's own context.
    let mut corpus_compared = 0u32;
    let mut corpus_skipped = 0u32;
    for name in corpus::NAMES {
        let (config, sec) = load(name);
        let Ok(ctx) = check_configuration(&config, &sec) else {
            continue;
        };
        let mut seen = std::collections::BTreeSet::new();
        let mut terms: Vec<&Term> = Vec::new();
        for act in config.activities.values() {
            subterms(&act.active_object, &mut terms);
            for r in &act.queue {
                subterms(&r.term, &mut terms);
            }
        }
        for term in terms {
            if term.size() > 96 || !seen.insert(print_term(term)) {
                continue;
            }
            for pc in [SecLevel::L, SecLevel::H] {
                let env = TypeEnv::new();
                let mut wants = vec![ObjType::empty()];
                if let Ok(min) = minimal_type(&ctx, &env, pc, term) {
                    wants.push(min);
                }
                for want in wants {
                    let checked =
                        check_term(&ctx, &env, pc, term, &want).is_ok();
                    match derivation_search_oracle(&ctx, &env, pc, term, &want, 24)
                    {
                        Ok(found) => {
                            assert_eq!(
                                checked,
                                found,
                                "criterion 6 FAIL - {name} sub-term {} at {pc} against {want:?}",
                                print_term(term)
                            );
                            corpus_compared += 1;
                        }
                        Err(OracleError::SizeLimitExceeded) => {
                            corpus_skipped += 1
                        }
                    }
                }
            }
        }
    }
    assert!(
        corpus_compared > 0,
        "criterion 6 FAIL - no corpus sub-term was comparable"
    );
    pass(
        6,
        &format!(
            "zero disagreements on {compared} random terms ({skipped} over the \
             size limit) and {corpus_compared} corpus sub-term checks \
             ({corpus_skipped} over the limit)"
        ),
    );
}

#[test]
fn criterion_7_preservation() {
    let mut details = Vec::new();
    for name in ["privatesort", "nspk", "booleans", "borderline"] {
        let (config, sec) = load(name);
        match check_preservation(&config, &sec, 50) {
            Ok(report) => details.push(format!("{name} {} steps", report.entries.len())),
            Err(e) => panic!("criterion 7 FAIL - {name}: {e}"),
        }
    }
    let (config, sec) = load("privatesort-fallacious");
    match check_preservation(&config, &sec, 50) {
        Err(PropError::Inconclusive(why)) => {
            assert!(
                why.contains("not typable"),
                "criterion 7 FAIL - unexpected precondition report: {why}"
            );
        }
        other => panic!(
            "criterion 7 FAIL - fallacious entry should be inconclusive, got {other:?}"
        ),
    }
    pass(
        7,
        &format!(
            "every explored successor re-types under an extended context: {}; \
             fallacious entry correctly inconclusive (untypable start)",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_8_confinement() {
    let mut crossing = 0u32;
    let mut checked = 0usize;
    for name in ["privatesort", "nspk", "booleans", "borderline"] {
        let (config, sec) = load(name);
        match check_confinement(&config, &sec, 64) {
            Ok(report) => {
                checked += report.entries.len();
                for e in &report.entries {
                    if e.outcome.contains("cross-level") {
                        assert!(
                            e.outcome.contains("origin is L"),
                            "criterion 8 FAIL - {name}: {} | {}",
                            e.claim,
                            e.outcome
                        );
                        crossing += 1;
                    }
                }
            }
            Err(e) => panic!("criterion 8 FAIL - {name}: {e}"),
        }
    }
    assert!(
        crossing > 0,
        "criterion 8 FAIL - no cross-level request was ever exercised"
    );
    pass(
        8,
        &format!(
            "{checked} explored steps across accepted corpora, {crossing} \
             cross-level requests, all with sec(origin) = L"
        ),
    );
}

#[test]
fn criterion_9_noninterference() {
    let t0 = Instant::now();
    let (config, sec) = load("privatesort");
    let variants = h_variants(&config, &sec, 4);
    assert_eq!(variants.len(), 4, "criterion 9 FAIL - expected 4 H-variants");
    let mut seen_incomes = std::collections::BTreeSet::new();
    for v in &variants {
        for act in v.activities.values() {
            for l in act.active_object.labels() {
                if l.starts_with('c') {
                    seen_incomes.insert(l);
                }
            }
        }
    }
    for needle in ["c42", "c1042"] {
        assert!(
            seen_incomes.contains(needle),
            "criterion 9 FAIL - variant incomes {seen_incomes:?} lack {needle}"
        );
    }
    match check_multilateral(&config, &sec, 8, 4) {
        Verdict::Holds => {}
        other => panic!("criterion 9 FAIL - sound privatesort: {other}"),
    }

    let (config, sec) = load("privatesort-fallacious");
    let alpha = config
        .activities
        .keys()
        .find(|a| a.name == "alpha")
        .cloned()
        .unwrap();
    let verdict = check_noninterference(&config, &alpha, &sec, 64, 4);
    let Verdict::FailsWith(cx) = verdict else {
        panic!("criterion 9 FAIL - fallacious entry: {verdict}")
    };
    for needle in ["(ord)", "[one", "[zero"] {
        assert!(
            cx.observation.contains(needle),
            "criterion 9 FAIL - observation lacks {needle:?}: {}",
            cx.observation
        );
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 9 FAIL - took {elapsed:?}"
    );
    pass(
        9,
        &format!(
            "multilateral noninterference holds on privatesort over variants \
             with incomes 42 and 1042; fallacious ord observed as one vs zero; \
             {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_10_indistinguishability_equivalence() {
    let fuel = 8;
    let mut triples = 0u32;
    for name in ["privatesort", "borderline"] {
        let (c0, sec) = load(name);
        let variants = h_variants(&c0, &sec, 4);
        assert!(
            variants.len() >= 2,
            "criterion 10 FAIL - {name} yields too few variants"
        );
        let c1 = &variants[0];
        let c2 = &variants[1];
        for alpha in c0.activities.keys() {
            let refl = indistinguishable(&c0, &c0, alpha, &sec, fuel)
                .unwrap_or_else(|e| panic!("criterion 10 FAIL - {name}: {e}"));
            assert!(
                refl.is_some(),
                "criterion 10 FAIL - {name}: {alpha} cannot see C ~ C"
            );
            let fwd = indistinguishable(&c0, c1, alpha, &sec, fuel).unwrap();
            let bwd = indistinguishable(c1, &c0, alpha, &sec, fuel).unwrap();
            assert_eq!(
                fwd.is_some(),
                bwd.is_some(),
                "criterion 10 FAIL - {name}: symmetry broken at {alpha}"
            );
            let snd = indistinguishable(c1, c2, alpha, &sec, fuel).unwrap();
            if fwd.is_some() && snd.is_some() {
                let thr = indistinguishable(&c0, c2, alpha, &sec, fuel).unwrap();
                assert!(
                    thr.is_some(),
                    "criterion 10 FAIL - {name}: transitivity broken at {alpha}"
                );
            }
            triples += 1;
        }
    }
    pass(
        10,
        &format!(
            "reflexivity, symmetry and transitivity witnessed on {triples} \
             configuration triples at fuel {fuel}"
        ),
    );
}
