//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_repairs, Instance, Preference};
use repairdb::frontend::{oracle_problem, parse_problem, run, ProblemFile};
use repairdb::logic::{sym, unify, EqualityStore, Substitution};
use repairdb::optimizer::{dominates, preferred_repairs, Frontier};
use repairdb::oracle::{
    eval3, generators, mdb_min_elements, preferred_repairs_oracle, preferred_via_models, repair_from_join,
    AtomUniverse, OracleProblem, TruthValue, Valuation, DEFAULT_CAP,
};
use repairdb::{Atom, Formula, PreferenceCriterion, RunOptions, Status, Term, Var};

const SMALL: Duration = Duration::from_secs(1);
const NON_GROUND: Duration = Duration::from_secs(5);
const COMPLETENESS: Duration = Duration::from_secs(300);
const INSTANCES: u64 = 200;
const LT_FORMULAS: u64 = common::LT_FORMULAS;
const TERM_PAIRS: usize = 1000;

const BOTH: [PreferenceCriterion; 2] = [PreferenceCriterion::Inclusion, PreferenceCriterion::Cardinality];

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn problem(name: &str) -> ProblemFile {
    let path = format!("{}/problems/{name}.rdb", env!("CARGO_MANIFEST_DIR"));
    parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn engine_repairs(p: &ProblemFile, options: RunOptions) -> Result<BTreeSet<String>, String> {
    let out = run(p, &options.with_problem(p)).map_err(|e| e.to_string())?;
    if out.result.status != Status::Complete {
        return Err(format!("status {}", out.result.status));
    }
    Ok(out.report.rendered())
}

fn exact_under_both(name: &str, expected: &[&str]) -> Outcome {
    let p = problem(name);
    for c in BOTH {
        let got = engine_repairs(&p, RunOptions { criterion: c, ..RunOptions::default() })?;
        if got != set(expected) {
            return Err(format!("{c}: got {got:?}"));
        }
    }
    Ok(format!("{} repairs under both criteria", expected.len()))
}

fn criterion_1() -> Outcome {
    exact_under_both("example1", &["insert {} retract {teaches(c2, n3)}", "insert {} retract {teaches(c2, n2)}"])
}

fn criterion_2() -> Outcome {
    exact_under_both("example2", &["insert {} retract {supply(c2, d2, i2)}", "insert {} retract {class(i2, t1)}"])
}

fn criterion_3() -> Outcome {
    exact_under_both("example3", &["insert {q(b)} retract {}", "insert {} retract {p(b)}"])
}

fn oracle_for(name: &str) -> Result<OracleProblem, String> {
    oracle_problem(&problem(name)).map_err(|e| e.to_string())
}

fn preferred_strings(o: &OracleProblem, c: PreferenceCriterion) -> Result<BTreeSet<String>, String> {
    Ok(preferred_repairs_oracle(o, c).map_err(|e| e.to_string())?.iter().map(|r| r.to_string()).collect())
}

fn criterion_4() -> Outcome {
    let o = oracle_for("example4")?;
    let joined: BTreeSet<String> = generators(&o).iter().map(|n| n.render(&o.universe)).collect();
    let expected_models = set(&[
        "{p:t, q:⊤, r:t}",
        "{p:t, q:⊤, r:⊤}",
        "{p:⊤, q:⊤, r:t}",
        "{p:⊤, q:⊤, r:⊤}",
        "{p:⊤, q:f, r:t}",
        "{p:⊤, q:f, r:⊤}",
    ]);
    if joined != expected_models {
        return Err(format!("models {joined:?}"));
    }
    let repairs: BTreeSet<String> = generators(&o).iter().map(|n| repair_from_join(&o, n).to_string()).collect();
    let expected_repairs =
        set(&["({q}, {})", "({q}, {r})", "({q}, {p})", "({q}, {p, r})", "({}, {p})", "({}, {p, r})"]);
    if repairs != expected_repairs {
        return Err(format!("repairs {repairs:?}"));
    }
    for c in BOTH {
        let got = preferred_strings(&o, c)?;
        if got != set(&["({q}, {})", "({}, {p})"]) {
            return Err(format!("{c}: preferred {got:?}"));
        }
    }
    Ok("6 models, 6 repairs, 2 preferred".into())
}

fn criterion_5() -> Outcome {
    let o = oracle_for("example3")?;
    let mins = mdb_min_elements(&o);
    for c in BOTH {
        let chosen: BTreeSet<String> = preferred_via_models(&o, c).iter().map(|r| r.to_string()).collect();
        let tops = chosen.len();
        let maximal: BTreeSet<String> = mins
            .iter()
            .filter(|n| chosen.contains(&repair_from_join(&o, n).to_string()))
            .map(|n| n.render(&o.universe))
            .collect();
        let expected = set(&[
            "{p(a):t, p(b):⊤, p(c):f, q(a):t, q(b):f, q(c):t}",
            "{p(a):t, p(b):t, p(c):f, q(a):t, q(b):⊤, q(c):t}",
        ]);
        if maximal != expected || tops != 2 {
            return Err(format!("{c}: models {maximal:?}"));
        }
        let got = preferred_strings(&o, c)?;
        if got != set(&["({}, {p(b)})", "({q(b)}, {})"]) {
            return Err(format!("{c}: preferred {got:?}"));
        }
    }
    Ok("M1, M2 and both repairs".into())
}

fn criterion_6() -> Outcome {
    let p = problem("example9");
    let got = engine_repairs(&p, RunOptions::default())?;
    let target = "insert {teaches(_V1, n3)} retract {teaches(c2, n3)} where _V1 != c1, _V1 != c2";
    if !got.contains(target) {
        return Err(format!("missing non-ground solution among {got:?}"));
    }
    let ground = engine_repairs(&p, RunOptions { ground: true, ..RunOptions::default() })?;
    if !ground.contains("insert {teaches(fresh, n3)} retract {teaches(c2, n3)}") {
        return Err("fresh answer substitution missing".into());
    }
    if ground.iter().any(|r| {
        r.contains("teaches(c1, n3)} retract {teaches(c2, n3)}")
            || r.contains("teaches(c2, n3)} retract {teaches(c2, n3)}")
    }) {
        return Err("residual constraint violated by a grounding".into());
    }
    Ok(format!("{} preferred solutions, Y/fresh admitted", got.len()))
}

fn criterion_7() -> Outcome {
    let p = problem("example10");
    let out = run(&p, &RunOptions::default().with_problem(&p)).map_err(|e| e.to_string())?;
    if out.result.status != Status::Complete || out.result.repairs.len() != 1 {
        return Err(format!("got {:?}", out.report.rendered()));
    }
    let r = &out.result.repairs[0];
    if !r.insert.is_empty() {
        return Err(format!("unexpected insertions {r}"));
    }
    let mut retracted = BTreeSet::new();
    for s in &p.sources {
        for f in &s.facts {
            if r.retract.contains(&f.atom) {
                retracted.insert(format!("db({}, {})", f.atom, s.id));
            }
        }
    }
    let expected = set(&["db(observe(object1, t60), gunchar)", "db(observe(object1, t80), speedometer)"]);
    if retracted != expected {
        return Err(format!("retracted {retracted:?}"));
    }
    Ok("radar kept".into())
}

fn instances() -> Vec<Instance> {
    (0..INSTANCES).map(|seed| common::random_instance(&mut common::rng(seed))).collect()
}

fn engine_on(inst: &Instance, c: PreferenceCriterion) -> Result<repairdb::frontend::RunOutput, String> {
    let p = parse_problem(&inst.to_source()).map_err(|e| e.to_string())?;
    run(&p, &RunOptions { criterion: c, ..RunOptions::default() }).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for (seed, inst) in instances().iter().enumerate() {
        let o = OracleProblem::new(inst.facts.clone(), inst.constraints.clone(), false, DEFAULT_CAP)
            .map_err(|e| e.to_string())?;
        for c in BOTH {
            for r in &engine_on(inst, c)?.result.repairs {
                if !r.is_ground() {
                    return Err(format!("seed {seed}: non-ground {r}"));
                }
                let repaired = common::apply(&inst.facts, &r.insert, &r.retract);
                let v = Valuation::two_valued(&o.universe, o.universe.mask_of(&repaired));
                if !inst.constraints.iter().all(|f| eval3(&o.universe, &v, f).designated()) {
                    return Err(format!("seed {seed}: {r} violates a constraint"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} repairs verified, 0 violations"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut compared = 0;
    for (seed, inst) in instances().iter().enumerate() {
        let o = OracleProblem::new(inst.facts.clone(), inst.constraints.clone(), false, DEFAULT_CAP)
            .map_err(|e| e.to_string())?;
        for c in BOTH {
            let out = engine_on(inst, c)?;
            if out.result.status != Status::Complete {
                continue;
            }
            let oracle: BTreeSet<String> = preferred_repairs_oracle(&o, c)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|r| common::render(&r.insert, &r.retract))
                .collect();
            let pref =
                if c == PreferenceCriterion::Inclusion { Preference::Inclusion } else { Preference::Cardinality };
            if oracle != brute_force_repairs(inst, pref) {
                return Err(format!("seed {seed} {c}: oracle disagrees with exhaustive search"));
            }
            if out.report.rendered() != oracle {
                return Err(format!("seed {seed} {c}: engine {:?} oracle {oracle:?}", out.report.rendered()));
            }
            compared += 1;
        }
    }
    if start.elapsed() > COMPLETENESS {
        return Err(format!("took {:?}", start.elapsed()));
    }
    Ok(format!("{compared}/{} runs compared, 0 diffs", 2 * INSTANCES))
}

fn criterion_10() -> Outcome {
    for seed in 0..LT_FORMULAS {
        let f = common::lt_formula(seed);
        let bad = common::lt_disagreements(&f);
        if bad > 0 {
            return Err(format!("seed {seed}: {f} differs on {bad} interpretations"));
        }
    }
    Ok(format!("{LT_FORMULAS} formulas, 0 diffs"))
}

fn random_term(rng: &mut ChaCha8Rng, depth: u32) -> Term {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.6) {
            Term::var(["X", "Y", "Z", "W"].choose(rng).unwrap())
        } else {
            Term::constant(["a", "b"].choose(rng).unwrap())
        };
    }
    if rng.gen_bool(0.5) {
        Term::app("f", vec![random_term(rng, depth - 1)])
    } else {
        Term::app("g", vec![random_term(rng, depth - 1), random_term(rng, depth - 1)])
    }
}

fn check_unification() -> Result<usize, String> {
    let mut rng = common::rng(11);
    let mut unifiable = 0;
    for _ in 0..TERM_PAIRS {
        let (s, t) = (random_term(&mut rng, 3), random_term(&mut rng, 3));
        let (st, ts) = (unify(&s, &t), unify(&t, &s));
        match (st, ts) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                let mut vars = BTreeSet::new();
                s.collect_vars(&mut vars);
                t.collect_vars(&mut vars);
                let idem = vars.iter().all(|v| {
                    let x = Term::Var(v.clone());
                    a.apply(&a.apply(&x)) == a.apply(&x)
                });
                let inst = |p: &Substitution, q: &Substitution| {
                    vars.iter().all(|v| {
                        let x = Term::Var(v.clone());
                        p.apply(&q.apply(&x)) == p.apply(&x)
                    })
                };
                if a.apply(&s) != a.apply(&t) || !idem || !inst(&a, &b) || !inst(&b, &a) {
                    return Err(format!("mgu of {s} and {t}"));
                }
                unifiable += 1;
            }
            _ => return Err(format!("asymmetric unifiability for {s} and {t}")),
        }
    }
    Ok(unifiable)
}

fn ground_term(rng: &mut ChaCha8Rng) -> Term {
    match rng.gen_range(0..3) {
        0 => Term::var(["X", "Y", "Z"].choose(rng).unwrap()),
        1 => Term::constant(["a", "b", "c"].choose(rng).unwrap()),
        _ => Term::app("f", vec![Term::var(["X", "Y"].choose(rng).unwrap())]),
    }
}

fn check_store() -> Result<(), String> {
    let values: Vec<Term> = ["a", "b", "c"].iter().map(|c| Term::constant(c)).collect();
    let names = ["X", "Y", "Z"];
    let groundings: Vec<Substitution> = common::tuples(&values, 3)
        .into_iter()
        .map(|vals| Substitution::from_pairs(names.iter().map(|v| Var::named(v)).zip(vals)))
        .collect();
    let admitted = |store: &EqualityStore, g: &Substitution| {
        let full = Substitution::from_pairs(
            names.iter().map(|v| (Var::named(v), g.apply(&store.solved().apply(&Term::var(v))))),
        );
        names.iter().all(|v| full.apply(&Term::var(v)) == g.apply(&Term::var(v))) && store.admits(&full)
    };
    let mut rng = common::rng(12);
    for _ in 0..300 {
        let mut store = EqualityStore::new();
        let mut before: Vec<bool> = vec![true; groundings.len()];
        for _ in 0..rng.gen_range(1..6) {
            let (s, t, eq) = (ground_term(&mut rng), ground_term(&mut rng), rng.gen_bool(0.5));
            let next = if eq { store.add_equality(&s, &t) } else { store.add_disequality(BTreeSet::new(), &s, &t) };
            let Ok(next) = next else {
                break;
            };
            let after: Vec<bool> = groundings.iter().map(|g| admitted(&next, g)).collect();
            if after.iter().zip(&before).any(|(a, b)| *a && !b) {
                return Err(format!("store gained solutions after {s} {} {t}", if eq { "=" } else { "!=" }));
            }
            store = next;
            before = after;
        }
    }
    Ok(())
}

fn random_prop(rng: &mut ChaCha8Rng, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return Formula::atom(["p", "q", "r"].choose(rng).unwrap(), vec![]);
    }
    match rng.gen_range(0..4) {
        0 => Formula::not(random_prop(rng, depth - 1)),
        1 => Formula::And(vec![random_prop(rng, depth - 1), random_prop(rng, depth - 1)]),
        2 => Formula::Or(vec![random_prop(rng, depth - 1), random_prop(rng, depth - 1)]),
        _ => Formula::implies(random_prop(rng, depth - 1), random_prop(rng, depth - 1)),
    }
}

fn check_k_monotone() -> Result<usize, String> {
    let sig = BTreeMap::from([(sym("p"), 0), (sym("q"), 0), (sym("r"), 0)]);
    let u = AtomUniverse::new(&sig, &BTreeSet::new(), DEFAULT_CAP).map_err(|e| e.to_string())?;
    let values = [TruthValue::T, TruthValue::F, TruthValue::Top];
    let vals: Vec<Valuation> =
        (0..27).map(|k: usize| Valuation((0..3).map(|i| values[k / 3usize.pow(i) % 3]).collect())).collect();
    let mut rng = common::rng(13);
    let mut pairs = 0;
    for _ in 0..200 {
        let f = random_prop(&mut rng, 4);
        for v in &vals {
            for w in vals.iter().filter(|w| v.leq_k(w)) {
                if !eval3(&u, v, &f).leq_k(eval3(&u, w, &f)) {
                    return Err(format!("{f} at {} vs {}", v.render(&u), w.render(&u)));
                }
                pairs += 1;
            }
        }
    }
    Ok(pairs)
}

fn check_optimizer() -> Result<(), String> {
    let mut rng = common::rng(14);
    for _ in 0..300 {
        let mut f = Frontier::new(PreferenceCriterion::Inclusion);
        for _ in 0..rng.gen_range(1..12) {
            let delta: Vec<Atom> = ["a", "b", "c", "d"]
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .map(|c| Atom::new("p", vec![Term::constant(c)]))
                .collect();
            f.record(&delta);
            if !f.bound_history().windows(2).all(|w| w[1] < w[0]) {
                return Err("bound history not decreasing".into());
            }
            let p = f.pareto();
            if p.iter().enumerate().any(|(i, a)| p.iter().enumerate().any(|(j, b)| i != j && a.is_subset(b))) {
                return Err("pareto set not an antichain".into());
            }
        }
    }
    for inst in instances().iter().take(100) {
        let theory =
            repairdb::frontend::build_theory(&parse_problem(&inst.to_source()).unwrap(), &RunOptions::default())
                .map_err(|e| e.to_string())?;
        for c in BOTH {
            let res = preferred_repairs(&theory, c, Default::default());
            if res.repairs.iter().any(|a| res.repairs.iter().any(|b| dominates(c, a, b))) {
                return Err(format!("{c}: preferred repairs not an antichain"));
            }
            if !res.bound_history.windows(2).all(|w| w[1] < w[0]) {
                return Err(format!("{c}: bound history not decreasing"));
            }
        }
    }
    Ok(())
}

fn criterion_11() -> Outcome {
    let unifiable = check_unification()?;
    check_store()?;
    let pairs = check_k_monotone()?;
    check_optimizer()?;
    Ok(format!("{TERM_PAIRS} term pairs ({unifiable} unifiable), {pairs} k-ordered valuation pairs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "teacher database repairs (example1)", SMALL, criterion_1),
        (2, "supplier database repairs (example2)", SMALL, criterion_2),
        (3, "p/q database repairs (example3)", SMALL, criterion_3),
        (4, "three-valued models and repairs of the p/q/r database", SMALL, criterion_4),
        (5, "maximally consistent models of the p/q database", SMALL, criterion_5),
        (6, "non-ground solution with residual disequalities", NON_GROUND, criterion_6),
        (7, "source trust keeps the radar reading", SMALL, criterion_7),
        (8, "soundness on random instances", Duration::MAX, criterion_8),
        (9, "completeness against the oracle", COMPLETENESS, criterion_9),
        (10, "denial form equivalence", Duration::MAX, criterion_10),
        (11, "property suite", Duration::MAX, criterion_11),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; exceeded {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
