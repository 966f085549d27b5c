mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use repairdb::engine::Options;
use repairdb::frontend::{build_theory, parse_problem, RunOptions};
use repairdb::logic::{sym, unify, EqualityStore, Substitution};
use repairdb::optimizer::{dominates, preferred_repairs, Frontier, PreferenceCriterion};
use repairdb::oracle::{eval3, AtomUniverse, TruthValue, Valuation, DEFAULT_CAP};
use repairdb::{Atom, Formula, Term, Var};

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
        prop::sample::select(vec!["a", "b"]).prop_map(Term::constant),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("f", vec![t])),
            (inner.clone(), inner).prop_map(|(s, t)| Term::app("g", vec![s, t])),
        ]
    })
}

fn vars_of(ts: &[&Term]) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    ts.iter().for_each(|t| t.collect_vars(&mut out));
    out
}

/// `a` is an instance of `b` on every variable: applying `b` first changes
/// nothing once `a` is applied.
fn instance_of(a: &Substitution, b: &Substitution, vars: &BTreeSet<Var>) -> bool {
    vars.iter().all(|v| {
        let x = Term::Var(v.clone());
        a.apply(&b.apply(&x)) == a.apply(&x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mgu_is_idempotent_and_symmetric(s in term(), t in term()) {
        let st = unify(&s, &t);
        let ts = unify(&t, &s);
        prop_assert_eq!(st.is_some(), ts.is_some());
        if let (Some(a), Some(b)) = (st, ts) {
            prop_assert_eq!(a.apply(&s), a.apply(&t));
            prop_assert_eq!(b.apply(&s), b.apply(&t));
            let vars = vars_of(&[&s, &t]);
            for v in &vars {
                let x = Term::Var(v.clone());
                prop_assert_eq!(a.apply(&a.apply(&x)), a.apply(&x));
            }
            prop_assert!(instance_of(&a, &b, &vars) && instance_of(&b, &a, &vars));
        }
    }
}

#[derive(Clone, Debug)]
enum Constraint {
    Eq(Term, Term),
    Neq(Term, Term),
}

fn flat_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z"]).prop_map(Term::var),
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::constant),
        prop::sample::select(vec!["X", "Y", "a"])
            .prop_map(|x| Term::app("f", vec![if x == "a" { Term::constant(x) } else { Term::var(x) }])),
    ]
}

fn constraint() -> impl Strategy<Value = Constraint> {
    (any::<bool>(), flat_term(), flat_term())
        .prop_map(|(eq, s, t)| if eq { Constraint::Eq(s, t) } else { Constraint::Neq(s, t) })
}

fn add(store: &EqualityStore, c: &Constraint) -> Option<EqualityStore> {
    match c {
        Constraint::Eq(s, t) => store.add_equality(s, t).ok(),
        Constraint::Neq(s, t) => store.add_disequality(BTreeSet::new(), s, t).ok(),
    }
}

fn groundings() -> Vec<BTreeMap<Var, Term>> {
    let values: Vec<Term> = ["a", "b", "c"].iter().map(|c| Term::constant(c)).collect();
    common::tuples(&values, 3)
        .into_iter()
        .map(|vals| ["X", "Y", "Z"].iter().map(|v| Var::named(v)).zip(vals).collect())
        .collect()
}

fn subst(g: &BTreeMap<Var, Term>) -> Substitution {
    Substitution::from_pairs(g.iter().map(|(v, t)| (v.clone(), t.clone())))
}

fn store_admits(store: &EqualityStore, g: &BTreeMap<Var, Term>) -> bool {
    let g = subst(g);
    let full = Substitution::from_pairs(["X", "Y", "Z"].iter().map(|v| {
        let v = Var::named(v);
        let t = g.apply(&store.solved().apply(&Term::Var(v.clone())));
        (v, t)
    }));
    ["X", "Y", "Z"]
        .iter()
        .all(|v| full.apply(&Term::var(v)).is_ground() && full.apply(&Term::var(v)) == g.apply(&Term::var(v)))
        && store.admits(&full)
}

fn constraint_holds(c: &Constraint, g: &BTreeMap<Var, Term>) -> bool {
    let g = subst(g);
    match c {
        Constraint::Eq(s, t) => g.apply(s) == g.apply(t),
        Constraint::Neq(s, t) => g.apply(s) != g.apply(t),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Adding constraints only removes admitted groundings, exactly those
    /// violating the new constraint, and an inconsistent store has none.
    #[test]
    fn store_is_monotone(cs in prop::collection::vec(constraint(), 1..6)) {
        let all = groundings();
        let mut store = Some(EqualityStore::new());
        let mut admitted: Vec<bool> = vec![true; all.len()];
        for c in &cs {
            let next = store.as_ref().and_then(|s| add(s, c));
            let expected: Vec<bool> = all.iter().zip(&admitted).map(|(g, a)| *a && constraint_holds(c, g)).collect();
            match &next {
                Some(s) => {
                    let now: Vec<bool> = all.iter().map(|g| store_admits(s, g)).collect();
                    prop_assert_eq!(&now, &expected);
                }
                None => prop_assert!(expected.iter().all(|a| !a) || store.is_none()),
            }
            if next.is_none() {
                break;
            }
            store = next;
            admitted = expected;
        }
    }
}

fn prop_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["p", "q", "r"]).prop_map(|p| Formula::atom(p, vec![])),
        Just(Formula::True),
        Just(Formula::False),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::And(vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::Or(vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    })
}

fn all_valuations(n: usize) -> Vec<Valuation> {
    let values = [TruthValue::T, TruthValue::F, TruthValue::Top];
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v: Vec<TruthValue>| values.iter().map(move |x| [v.clone(), vec![*x]].concat()))
            .collect();
    }
    out.into_iter().map(Valuation).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Raising a valuation in the knowledge order raises every formula's value.
    #[test]
    fn eval3_is_k_monotone(f in prop_formula()) {
        let sig = BTreeMap::from([(sym("p"), 0), (sym("q"), 0), (sym("r"), 0)]);
        let u = AtomUniverse::new(&sig, &BTreeSet::new(), DEFAULT_CAP).unwrap();
        let vals = all_valuations(u.len());
        for v in &vals {
            for w in vals.iter().filter(|w| v.leq_k(w)) {
                prop_assert!(eval3(&u, v, &f).leq_k(eval3(&u, w, &f)), "{} {:?} {:?}", f, v, w);
            }
        }
    }
}

fn atom_set() -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..4)
        .prop_map(|s| s.into_iter().map(|c| Atom::new("p", vec![Term::constant(c)])).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// The recorded bounds strictly decrease and the pareto set stays an
    /// antichain containing no superset of a recorded solution.
    #[test]
    fn frontier_invariants(deltas in prop::collection::vec(atom_set(), 1..12)) {
        let mut f = Frontier::new(PreferenceCriterion::Inclusion);
        for d in &deltas {
            f.record(d);
            prop_assert!(f.bound_history().windows(2).all(|w| w[1] < w[0]));
            let p = f.pareto();
            for (i, a) in p.iter().enumerate() {
                for (j, b) in p.iter().enumerate() {
                    prop_assert!(i == j || !a.is_subset(b));
                }
            }
            let set: BTreeSet<Atom> = d.iter().cloned().collect();
            prop_assert!(p.iter().any(|q| q.is_subset(&set)));
        }
        prop_assert_eq!(f.best_bound(), deltas.iter().map(Vec::len).min());
    }

    /// Optimizer output on random instances is an antichain under the
    /// criterion.
    #[test]
    fn preferred_repairs_form_an_antichain(seed in 0u64..10_000, card in any::<bool>()) {
        let inst = common::random_instance(&mut common::rng(seed));
        let problem = parse_problem(&inst.to_source()).unwrap();
        let theory = build_theory(&problem, &RunOptions::default()).unwrap();
        let c = if card { PreferenceCriterion::Cardinality } else { PreferenceCriterion::Inclusion };
        let result = preferred_repairs(&theory, c, Options::default());
        for a in &result.repairs {
            for b in &result.repairs {
                prop_assert!(!dominates(c, a, b), "{} dominates {}", a, b);
            }
        }
        prop_assert!(result.bound_history.windows(2).all(|w| w[1] < w[0]));
    }
}
