//! Random instances and brute-force reference implementations shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repairdb::oracle::DenialEvaluator;
use repairdb::transform::{guard_unsafe, Transformer, DOMAIN_PREDICATE};
use repairdb::{Atom, Formula, Term, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const CONSTANTS: [&str; 4] = ["a", "b", "c", "d"];
const PREDICATES: [(&str, usize); 4] = [("p", 1), ("q", 1), ("r", 2), ("s", 2)];
const VARIABLES: [&str; 3] = ["X", "Y", "Z"];
pub const MAX_UNIVERSE: usize = 12;

#[derive(Clone, Debug)]
pub struct Instance {
    pub constants: Vec<Term>,
    pub signature: Vec<(String, usize)>,
    pub facts: BTreeSet<Atom>,
    pub constraints: Vec<Formula>,
}

impl Instance {
    /// Surface syntax accepted by the problem-file parser.
    pub fn to_source(&self) -> String {
        let mut out = String::from("source d.\n");
        for f in &self.facts {
            out.push_str(&format!("fact {f}.\n"));
        }
        for c in &self.constraints {
            out.push_str(&format!("constraint {c}.\n"));
        }
        out
    }

    /// Constants occurring in the facts or the constraints.
    pub fn active_domain(&self) -> Vec<Term> {
        let mut out = BTreeSet::new();
        for f in &self.facts {
            out.extend(f.args.iter().cloned());
        }
        for c in &self.constraints {
            c.collect_consts(&mut out);
        }
        out.into_iter().collect()
    }

    /// Every ground atom of the signature over the active domain.
    pub fn universe(&self) -> Vec<Atom> {
        let domain = self.active_domain();
        let mut out = Vec::new();
        for (p, arity) in &self.signature {
            for args in tuples(&domain, *arity) {
                out.push(Atom::new(p, args));
            }
        }
        out
    }

    pub fn satisfied_by(&self, db: &BTreeSet<Atom>) -> bool {
        let domain = self.active_domain();
        self.constraints.iter().all(|c| holds(c, db, &domain, &BTreeMap::new()))
    }
}

pub fn tuples(domain: &[Term], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                domain.iter().map(move |c| {
                    let mut t = prefix.clone();
                    t.push(c.clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn universe_size(constants: usize, signature: &[(String, usize)]) -> usize {
    signature.iter().map(|(_, a)| constants.pow(*a as u32)).sum()
}

/// At most four constants, three unary or binary predicates, a universe of at
/// most twelve atoms and three safe denial constraints.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let n = rng.gen_range(2..=4);
        let constants: Vec<Term> = CONSTANTS[..n].iter().map(|c| Term::constant(c)).collect();
        let k = rng.gen_range(1..=3);
        let mut preds = PREDICATES.to_vec();
        preds.shuffle(rng);
        let mut signature: Vec<(String, usize)> = preds[..k].iter().map(|(p, a)| (p.to_string(), *a)).collect();
        signature.sort();
        if universe_size(n, &signature) > MAX_UNIVERSE {
            continue;
        }
        let mut facts = BTreeSet::new();
        for (p, arity) in &signature {
            for args in tuples(&constants, *arity) {
                if rng.gen_bool(0.4) {
                    facts.insert(Atom::new(p, args));
                }
            }
        }
        let m = rng.gen_range(1..=3);
        let constraints = (0..m).map(|_| random_denial(rng, &constants, &signature)).collect();
        let inst = Instance { constants, signature, facts, constraints };
        if inst.universe().len() <= MAX_UNIVERSE {
            return inst;
        }
    }
}

fn random_args(rng: &mut ChaCha8Rng, arity: usize, vars: &[&str], constants: &[Term]) -> Vec<Term> {
    (0..arity)
        .map(|_| {
            if rng.gen_bool(0.8) {
                Term::var(vars.choose(rng).unwrap())
            } else {
                constants.choose(rng).unwrap().clone()
            }
        })
        .collect()
}

/// `forall V: ~(l1 & ... & ln)` where every variable occurs in a positive atom.
pub fn random_denial(rng: &mut ChaCha8Rng, constants: &[Term], signature: &[(String, usize)]) -> Formula {
    let nvars = rng.gen_range(1..=3);
    let pool = &VARIABLES[..nvars];
    let npos = rng.gen_range(1..=2);
    let mut lits = Vec::new();
    for _ in 0..npos {
        let (p, a) = signature.choose(rng).unwrap();
        lits.push(Formula::atom(p, random_args(rng, *a, pool, constants)));
    }
    let mut bound = BTreeSet::new();
    for l in &lits {
        if let Formula::Atom(a) = l {
            a.args.iter().for_each(|t| t.collect_vars(&mut bound));
        }
    }
    let bound: Vec<&str> = pool.iter().copied().filter(|v| bound.contains(&Var::named(v))).collect();
    let extra = rng.gen_range(0..=2);
    for _ in 0..extra {
        if bound.is_empty() {
            break;
        }
        if rng.gen_bool(0.7) {
            let (p, a) = signature.choose(rng).unwrap();
            let neg = Formula::atom(p, random_args(rng, *a, &bound, constants));
            if !lits.contains(&neg) {
                lits.push(Formula::not(neg));
            }
        } else {
            let s = Term::var(bound.choose(rng).unwrap());
            let t = if rng.gen_bool(0.6) {
                Term::var(bound.choose(rng).unwrap())
            } else {
                constants.choose(rng).unwrap().clone()
            };
            lits.push(if rng.gen_bool(0.5) { Formula::Eq(s, t) } else { Formula::neq(s, t) });
        }
    }
    let body = if lits.len() == 1 { lits.pop().unwrap() } else { Formula::And(lits) };
    if bound.is_empty() {
        Formula::not(body)
    } else {
        Formula::forall(&bound, Formula::not(body))
    }
}

/// Closed formula with quantifiers, connectives and equality over the given
/// signature, used to compare original and transformed constraints.
pub fn random_formula(rng: &mut ChaCha8Rng, constants: &[Term], signature: &[(String, usize)], depth: u32) -> Formula {
    fn go(
        rng: &mut ChaCha8Rng,
        constants: &[Term],
        signature: &[(String, usize)],
        scope: &mut Vec<&'static str>,
        depth: u32,
    ) -> Formula {
        let term = |rng: &mut ChaCha8Rng, scope: &[&'static str]| {
            if !scope.is_empty() && rng.gen_bool(0.75) {
                Term::var(scope.choose(rng).unwrap())
            } else {
                constants.choose(rng).unwrap().clone()
            }
        };
        if depth == 0 || rng.gen_bool(0.25) {
            if rng.gen_bool(0.85) {
                let (p, a) = signature.choose(rng).unwrap();
                let args = (0..*a).map(|_| term(rng, scope)).collect();
                return Formula::atom(p, args);
            }
            return Formula::Eq(term(rng, scope), term(rng, scope));
        }
        match rng.gen_range(0..7) {
            0 => Formula::not(go(rng, constants, signature, scope, depth - 1)),
            1 => Formula::And(vec![
                go(rng, constants, signature, scope, depth - 1),
                go(rng, constants, signature, scope, depth - 1),
            ]),
            2 => Formula::Or(vec![
                go(rng, constants, signature, scope, depth - 1),
                go(rng, constants, signature, scope, depth - 1),
            ]),
            3 | 4 => Formula::implies(
                go(rng, constants, signature, scope, depth - 1),
                go(rng, constants, signature, scope, depth - 1),
            ),
            q => {
                let fresh = VARIABLES.iter().find(|v| !scope.contains(v)).copied();
                let Some(v) = fresh else {
                    return go(rng, constants, signature, scope, depth - 1);
                };
                scope.push(v);
                let body = go(rng, constants, signature, scope, depth - 1);
                scope.pop();
                if q == 5 {
                    Formula::forall(&[v], body)
                } else {
                    Formula::exists(&[v], body)
                }
            }
        }
    }
    go(rng, constants, signature, &mut Vec::new(), depth)
}

fn ground(t: &Term, env: &BTreeMap<Var, Term>) -> Term {
    match t {
        Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| panic!("unbound {v}")),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| ground(a, env)).collect()),
        _ => t.clone(),
    }
}

/// Two-valued truth of `f` in `db`, quantifiers ranging over `domain`.
pub fn holds(f: &Formula, db: &BTreeSet<Atom>, domain: &[Term], env: &BTreeMap<Var, Term>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            db.contains(&Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| ground(t, env)).collect() })
        }
        Formula::Eq(s, t) => ground(s, env) == ground(t, env),
        Formula::Not(g) => !holds(g, db, domain, env),
        Formula::And(gs) => gs.iter().all(|g| holds(g, db, domain, env)),
        Formula::Or(gs) => gs.iter().any(|g| holds(g, db, domain, env)),
        Formula::Implies(a, b) => !holds(a, db, domain, env) || holds(b, db, domain, env),
        Formula::Forall(vs, body) => bindings(vs, domain, env).all(|e| holds(body, db, domain, &e)),
        Formula::Exists(vs, body) => bindings(vs, domain, env).any(|e| holds(body, db, domain, &e)),
    }
}

fn bindings<'a>(
    vs: &'a [Var],
    domain: &'a [Term],
    env: &'a BTreeMap<Var, Term>,
) -> impl Iterator<Item = BTreeMap<Var, Term>> + 'a {
    tuples(domain, vs.len()).into_iter().map(move |vals| {
        let mut e = env.clone();
        e.extend(vs.iter().cloned().zip(vals));
        e
    })
}

/// `insert {..} retract {..}`, the engine report's rendering.
pub fn render(insert: &BTreeSet<Atom>, retract: &BTreeSet<Atom>) -> String {
    let join = |s: &BTreeSet<Atom>| s.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    format!("insert {{{}}} retract {{{}}}", join(insert), join(retract))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Preference {
    Inclusion,
    Cardinality,
}

/// Preferred repairs by enumerating every candidate database over the
/// universe.
pub fn brute_force_repairs(inst: &Instance, preference: Preference) -> BTreeSet<String> {
    let universe = inst.universe();
    assert!(universe.len() <= 20);
    let mut repairs: Vec<(BTreeSet<Atom>, BTreeSet<Atom>)> = Vec::new();
    for mask in 0u32..(1 << universe.len()) {
        let db: BTreeSet<Atom> =
            universe.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, a)| a.clone()).collect();
        if !inst.satisfied_by(&db) {
            continue;
        }
        let insert: BTreeSet<Atom> = db.difference(&inst.facts).cloned().collect();
        let retract: BTreeSet<Atom> = inst.facts.difference(&db).cloned().collect();
        repairs.push((insert, retract));
    }
    let size = |r: &(BTreeSet<Atom>, BTreeSet<Atom>)| r.0.len() + r.1.len();
    let below = |a: &(BTreeSet<Atom>, BTreeSet<Atom>), b: &(BTreeSet<Atom>, BTreeSet<Atom>)| match preference {
        Preference::Cardinality => size(a) < size(b),
        Preference::Inclusion => a.0.is_subset(&b.0) && a.1.is_subset(&b.1) && a != b,
    };
    repairs.iter().filter(|r| !repairs.iter().any(|o| below(o, r))).map(|(i, d)| render(i, d)).collect()
}

/// Applies a rendered-free repair to the instance's facts.
pub fn apply(facts: &BTreeSet<Atom>, insert: &BTreeSet<Atom>, retract: &BTreeSet<Atom>) -> BTreeSet<Atom> {
    facts.difference(retract).cloned().chain(insert.iter().cloned()).collect()
}

pub const LT_FORMULAS: u64 = 100;

fn lt_signature() -> Vec<(String, usize)> {
    vec![("p".into(), 1), ("q".into(), 1), ("r".into(), 2)]
}

fn lt_domain() -> Vec<Term> {
    ["a", "b", "c"].iter().map(|c| Term::constant(c)).collect()
}

/// Atoms over the predicates that occur in `f`; other atoms cannot affect it.
fn relevant_atoms(f: &Formula) -> Vec<Atom> {
    let mut preds = BTreeMap::new();
    f.predicates(&mut preds);
    let domain = lt_domain();
    lt_signature()
        .into_iter()
        .filter(|(p, _)| preds.keys().any(|k| &**k == p))
        .flat_map(|(p, a)| tuples(&domain, a).into_iter().map(move |args| Atom::new(&p, args)))
        .collect()
}

/// Number of interpretations on which the formula and its denial form
/// disagree.
pub fn lt_disagreements(f: &Formula) -> usize {
    let guarded = guard_unsafe(f, DOMAIN_PREDICATE);
    let theory = Transformer::new().lloyd_topor(&guarded, None).unwrap();
    let atoms = relevant_atoms(f);
    let domain = lt_domain();
    let mut bad = 0;
    for mask in 0u32..(1 << atoms.len()) {
        let db: BTreeSet<Atom> =
            atoms.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, a)| a.clone()).collect();
        let expected = holds(f, &db, &domain, &BTreeMap::new());
        let holds = |a: &Atom| {
            if &*a.pred == DOMAIN_PREDICATE {
                domain.contains(&a.args[0])
            } else {
                db.contains(a)
            }
        };
        if DenialEvaluator::new(&theory, &domain, &holds).satisfied() != expected {
            bad += 1;
        }
    }
    bad
}

pub fn lt_formula(seed: u64) -> Formula {
    let mut rng = rng(seed);
    random_formula(&mut rng, &lt_domain(), &lt_signature(), 4)
}
