//! Brute-force model-theoretic reference: three-valued valuations, two-valued
//! model enumeration over a finite atom universe, and preferred repairs
//! computed two independent ways.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::composer::{DatabaseInstance, Repair};
use crate::engine::fresh_constant;
use crate::logic::{Atom, Literal, Substitution, Sym, Term, Var};
use crate::optimizer::PreferenceCriterion;
use crate::transform::{DenialTheory, Formula, DOMAIN_PREDICATE};

pub const DEFAULT_CAP: usize = 16;

/// THREE: `f <=_t Top <=_t t`; under `<=_k`, `Top` is above both `t` and `f`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum TruthValue {
    T,
    F,
    Top,
}

impl TruthValue {
    fn rank(self) -> u8 {
        match self {
            TruthValue::F => 0,
            TruthValue::Top => 1,
            TruthValue::T => 2,
        }
    }

    pub fn from_bool(b: bool) -> TruthValue {
        if b {
            TruthValue::T
        } else {
            TruthValue::F
        }
    }

    pub fn meet(self, o: TruthValue) -> TruthValue {
        if self.rank() <= o.rank() {
            self
        } else {
            o
        }
    }

    pub fn join(self, o: TruthValue) -> TruthValue {
        if self.rank() >= o.rank() {
            self
        } else {
            o
        }
    }

    /// `<=_k` join.
    pub fn oplus(self, o: TruthValue) -> TruthValue {
        if self == o {
            self
        } else {
            TruthValue::Top
        }
    }

    pub fn leq_k(self, o: TruthValue) -> bool {
        self == o || o == TruthValue::Top
    }

    pub fn designated(self) -> bool {
        self != TruthValue::F
    }
}

impl std::ops::Not for TruthValue {
    type Output = TruthValue;

    fn not(self) -> TruthValue {
        match self {
            TruthValue::T => TruthValue::F,
            TruthValue::F => TruthValue::T,
            TruthValue::Top => TruthValue::Top,
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::T => "t",
            TruthValue::F => "f",
            TruthValue::Top => "⊤",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum OracleError {
    #[error("atom universe has {size} atoms, above the cap of {cap}")]
    UniverseTooLarge { size: usize, cap: usize },
    #[error("the two preferred-repair computations disagree: {0}")]
    RouteMismatch(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Every ground atom over the declared predicates and the domain, in a fixed
/// order.
#[derive(Clone, Debug)]
pub struct AtomUniverse {
    pub domain: Vec<Term>,
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
}

impl AtomUniverse {
    pub fn new(
        signature: &BTreeMap<Sym, usize>,
        domain: &BTreeSet<Term>,
        cap: usize,
    ) -> Result<AtomUniverse, OracleError> {
        let domain: Vec<Term> = domain.iter().cloned().collect();
        let mut size = 0usize;
        for &arity in signature.values() {
            size = size.saturating_add(domain.len().saturating_pow(arity as u32));
        }
        if size > cap || size > 63 {
            return Err(OracleError::UniverseTooLarge { size, cap });
        }
        let mut atoms = Vec::with_capacity(size);
        for (pred, &arity) in signature {
            if domain.is_empty() && arity > 0 {
                continue;
            }
            let mut tuple = vec![0usize; arity];
            loop {
                atoms.push(Atom { pred: pred.clone(), args: tuple.iter().map(|&i| domain[i].clone()).collect() });
                let mut k = arity;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    tuple[k] += 1;
                    if tuple[k] < domain.len() {
                        break;
                    }
                    tuple[k] = 0;
                }
                if tuple.iter().all(|&i| i == 0) {
                    break;
                }
            }
        }
        let index = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Ok(AtomUniverse { domain, atoms, index })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn index_of(&self, a: &Atom) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn mask_of<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> u64 {
        atoms.into_iter().filter_map(|a| self.index_of(a)).fold(0, |m, i| m | (1 << i))
    }

    pub fn atoms_of(&self, mask: u64) -> BTreeSet<Atom> {
        (0..self.len()).filter(|i| mask >> i & 1 == 1).map(|i| self.atoms[i].clone()).collect()
    }
}

/// A valuation over an `AtomUniverse`, indexed like `AtomUniverse::atoms`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Valuation(pub Vec<TruthValue>);

impl Valuation {
    pub fn two_valued(universe: &AtomUniverse, mask: u64) -> Valuation {
        Valuation((0..universe.len()).map(|i| TruthValue::from_bool(mask >> i & 1 == 1)).collect())
    }

    pub fn leq_k(&self, o: &Valuation) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a.leq_k(*b))
    }

    /// Indices of atoms mapped to `x`.
    pub fn with_value(&self, x: TruthValue) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, v)| **v == x).map(|(i, _)| i).collect()
    }

    pub fn top_mask(&self) -> u64 {
        self.with_value(TruthValue::Top).into_iter().fold(0, |m, i| m | (1 << i))
    }

    pub fn render(&self, universe: &AtomUniverse) -> String {
        let parts: Vec<String> = universe.atoms().iter().zip(&self.0).map(|(a, v)| format!("{a}:{v}")).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A formula grounded over a universe.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Ground {
    Const(bool),
    Atom(usize),
    Not(Box<Ground>),
    And(Vec<Ground>),
    Or(Vec<Ground>),
}

impl Ground {
    pub fn eval3(&self, v: &[TruthValue]) -> TruthValue {
        match self {
            Ground::Const(b) => TruthValue::from_bool(*b),
            Ground::Atom(i) => v[*i],
            Ground::Not(g) => !g.eval3(v),
            Ground::And(gs) => gs.iter().fold(TruthValue::T, |acc, g| acc.meet(g.eval3(v))),
            Ground::Or(gs) => gs.iter().fold(TruthValue::F, |acc, g| acc.join(g.eval3(v))),
        }
    }

    pub fn eval2(&self, mask: u64) -> bool {
        match self {
            Ground::Const(b) => *b,
            Ground::Atom(i) => mask >> i & 1 == 1,
            Ground::Not(g) => !g.eval2(mask),
            Ground::And(gs) => gs.iter().all(|g| g.eval2(mask)),
            Ground::Or(gs) => gs.iter().any(|g| g.eval2(mask)),
        }
    }

    fn not(g: Ground) -> Ground {
        match g {
            Ground::Const(b) => Ground::Const(!b),
            Ground::Not(inner) => *inner,
            g => Ground::Not(Box::new(g)),
        }
    }

    fn and(gs: Vec<Ground>) -> Ground {
        let mut out = Vec::new();
        for g in gs {
            match g {
                Ground::Const(true) => {}
                Ground::Const(false) => return Ground::Const(false),
                Ground::And(inner) => out.extend(inner),
                g => out.push(g),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else if out.is_empty() {
            Ground::Const(true)
        } else {
            Ground::And(out)
        }
    }

    fn or(gs: Vec<Ground>) -> Ground {
        let mut out = Vec::new();
        for g in gs {
            match g {
                Ground::Const(false) => {}
                Ground::Const(true) => return Ground::Const(true),
                Ground::Or(inner) => out.extend(inner),
                g => out.push(g),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else if out.is_empty() {
            Ground::Const(false)
        } else {
            Ground::Or(out)
        }
    }
}

fn ground_term(t: &Term, env: &Substitution) -> Term {
    let t = env.apply(t);
    t.eval_arith().unwrap_or(t)
}

/// Grounds `f` with quantifiers ranging over the universe's domain. Atoms
/// outside the universe are false; `dom(c)` is domain membership; equality
/// is syntactic identity of ground terms.
pub fn compile(universe: &AtomUniverse, f: &Formula) -> Ground {
    compile_in(universe, f, &Substitution::new())
}

fn compile_in(u: &AtomUniverse, f: &Formula, env: &Substitution) -> Ground {
    match f {
        Formula::True => Ground::Const(true),
        Formula::False => Ground::Const(false),
        Formula::Atom(a) => {
            let a = Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| ground_term(t, env)).collect() };
            if &*a.pred == DOMAIN_PREDICATE && a.args.len() == 1 {
                return Ground::Const(u.domain.contains(&a.args[0]));
            }
            match u.index_of(&a) {
                Some(i) => Ground::Atom(i),
                None => Ground::Const(false),
            }
        }
        Formula::Eq(s, t) => Ground::Const(ground_term(s, env) == ground_term(t, env)),
        Formula::Not(g) => Ground::not(compile_in(u, g, env)),
        Formula::And(gs) => Ground::and(gs.iter().map(|g| compile_in(u, g, env)).collect()),
        Formula::Or(gs) => Ground::or(gs.iter().map(|g| compile_in(u, g, env)).collect()),
        Formula::Implies(a, b) => Ground::or(vec![Ground::not(compile_in(u, a, env)), compile_in(u, b, env)]),
        Formula::Forall(vs, body) => Ground::and(instances(u, vs, env).map(|e| compile_in(u, body, &e)).collect()),
        Formula::Exists(vs, body) => Ground::or(instances(u, vs, env).map(|e| compile_in(u, body, &e)).collect()),
    }
}

fn instances<'a>(u: &'a AtomUniverse, vs: &'a [Var], env: &'a Substitution) -> impl Iterator<Item = Substitution> + 'a {
    let n = u.domain.len();
    let total = if vs.is_empty() { 1 } else { n.checked_pow(vs.len() as u32).unwrap_or(0) };
    (0..total).map(move |mut k| {
        let mut e = env.restrict(|v| !vs.contains(v));
        for v in vs {
            e.bind(v.clone(), u.domain[k % n].clone());
            k /= n;
        }
        e
    })
}

/// Three-valued value of `f` under `v`.
pub fn eval3(universe: &AtomUniverse, v: &Valuation, f: &Formula) -> TruthValue {
    compile(universe, f).eval3(&v.0)
}

/// A ground database with its constraints over a finite universe.
#[derive(Clone, Debug)]
pub struct OracleProblem {
    pub facts: BTreeSet<Atom>,
    pub constraints: Vec<Formula>,
    pub universe: AtomUniverse,
    compiled: Vec<Ground>,
}

impl OracleProblem {
    /// The universe ranges over the predicates and constants mentioned in the
    /// facts and constraints, plus one fresh constant when asked.
    pub fn new(
        facts: BTreeSet<Atom>,
        constraints: Vec<Formula>,
        with_fresh: bool,
        cap: usize,
    ) -> Result<OracleProblem, OracleError> {
        let mut signature = BTreeMap::new();
        let mut domain = BTreeSet::new();
        for a in &facts {
            signature.insert(a.pred.clone(), a.arity());
            a.args.iter().for_each(|t| t.collect_consts(&mut domain));
        }
        for c in &constraints {
            c.predicates(&mut signature);
            c.collect_consts(&mut domain);
        }
        signature.remove(DOMAIN_PREDICATE);
        if with_fresh {
            domain.insert(fresh_constant(&domain));
        }
        Self::with_universe(facts, constraints, AtomUniverse::new(&signature, &domain, cap)?)
    }

    pub fn with_universe(
        facts: BTreeSet<Atom>,
        constraints: Vec<Formula>,
        universe: AtomUniverse,
    ) -> Result<OracleProblem, OracleError> {
        if let Some(a) = facts.iter().find(|a| universe.index_of(a).is_none()) {
            return Err(OracleError::Unsupported(format!("fact {a} is outside the atom universe")));
        }
        let compiled = constraints.iter().map(|c| compile(&universe, c)).collect();
        Ok(OracleProblem { facts, constraints, universe, compiled })
    }

    pub fn from_databases(
        dbs: &[DatabaseInstance],
        constraints: Vec<Formula>,
        with_fresh: bool,
    ) -> Result<OracleProblem, OracleError> {
        if dbs.iter().any(|d| !d.events.is_empty()) {
            return Err(OracleError::Unsupported("timestamped events are not supported by the oracle".into()));
        }
        let facts = dbs.iter().flat_map(|d| d.facts.iter().cloned()).collect();
        OracleProblem::new(facts, constraints, with_fresh, DEFAULT_CAP)
    }

    pub fn fact_mask(&self) -> u64 {
        self.universe.mask_of(&self.facts)
    }

    /// Whether the instance given by `mask` satisfies every constraint.
    pub fn consistent(&self, mask: u64) -> bool {
        self.compiled.iter().all(|g| g.eval2(mask))
    }

    fn all_masks(&self) -> impl Iterator<Item = u64> {
        0..(1u64 << self.universe.len())
    }
}

pub fn herbrand_min_model(p: &OracleProblem) -> Valuation {
    Valuation::two_valued(&p.universe, p.fact_mask())
}

/// Two-valued models of the constraints, as valuations.
pub fn two_valued_models(p: &OracleProblem) -> Vec<Valuation> {
    p.all_masks().filter(|&m| p.consistent(m)).map(|m| Valuation::two_valued(&p.universe, m)).collect()
}

fn true_mask(v: &Valuation) -> u64 {
    v.with_value(TruthValue::T).into_iter().fold(0, |m, i| m | (1 << i))
}

/// `(M^t \ D, D \ M^t)`.
pub fn repair_from_model(p: &OracleProblem, m: &Valuation) -> Repair {
    let t = true_mask(m);
    let d = p.fact_mask();
    Repair::new(p.universe.atoms_of(t & !d), p.universe.atoms_of(d & !t))
}

pub fn knowledge_join(a: &Valuation, b: &Valuation) -> Valuation {
    Valuation(a.0.iter().zip(&b.0).map(|(x, y)| x.oplus(*y)).collect())
}

/// `{H ⊕ M : M a two-valued model}`, deduplicated, in model order.
pub fn generators(p: &OracleProblem) -> Vec<Valuation> {
    let h = herbrand_min_model(p);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in two_valued_models(p) {
        let n = knowledge_join(&h, &m);
        if seen.insert(n.0.iter().map(|v| v.rank()).collect::<Vec<_>>()) {
            out.push(n);
        }
    }
    out
}

/// The `<=_k`-minimal generators.
pub fn mdb_min_elements(p: &OracleProblem) -> Vec<Valuation> {
    let gens = generators(p);
    gens.iter().filter(|v| !gens.iter().any(|u| u != *v && u.leq_k(v))).cloned().collect()
}

/// `(N^Top \ D, N^Top ∩ D)`.
pub fn repair_from_join(p: &OracleProblem, n: &Valuation) -> Repair {
    let top = n.top_mask();
    let d = p.fact_mask();
    Repair::new(p.universe.atoms_of(top & !d), p.universe.atoms_of(top & d))
}

/// Masks minimal under the criterion: subset-minimal or minimum popcount.
fn minimal_masks(criterion: PreferenceCriterion, mut masks: Vec<u64>) -> Vec<u64> {
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.dedup();
    match criterion {
        PreferenceCriterion::Cardinality => {
            let best = masks.first().map(|m| m.count_ones());
            masks.into_iter().filter(|m| Some(m.count_ones()) == best).collect()
        }
        PreferenceCriterion::Inclusion => {
            let mut kept: Vec<u64> = Vec::new();
            for m in masks {
                if !kept.iter().any(|k| k & m == *k && *k != m) {
                    kept.push(m);
                }
            }
            kept
        }
    }
}

fn sorted(mut rs: Vec<Repair>) -> Vec<Repair> {
    rs.sort_by_key(|r| r.to_string());
    rs.dedup();
    rs
}

/// Preferred repairs from the maximally consistent `H ⊕ M` valuations.
pub fn preferred_via_models(p: &OracleProblem, criterion: PreferenceCriterion) -> Vec<Repair> {
    let mins = mdb_min_elements(p);
    let tops = minimal_masks(criterion, mins.iter().map(Valuation::top_mask).collect());
    let chosen = mins.iter().filter(|n| tops.contains(&n.top_mask()));
    sorted(chosen.map(|n| repair_from_join(p, n)).collect())
}

/// Every repair, by enumerating all `(Insert, Retract)` pairs over the
/// universe. A pair corresponds to the instance `D ∪ Insert \ Retract`.
pub fn all_repairs(p: &OracleProblem) -> Vec<Repair> {
    let d = p.fact_mask();
    sorted(
        p.all_masks()
            .filter(|&m| p.consistent(m))
            .map(|m| Repair::new(p.universe.atoms_of(m & !d), p.universe.atoms_of(d & !m)))
            .collect(),
    )
}

/// Preferred repairs by direct enumeration and the preference definition.
pub fn preferred_via_enumeration(p: &OracleProblem, criterion: PreferenceCriterion) -> Vec<Repair> {
    let d = p.fact_mask();
    // Insert and Retract are disjoint parts of the symmetric difference, so
    // comparing pairs componentwise is comparing difference masks.
    let diffs: Vec<u64> = p.all_masks().filter(|&m| p.consistent(m)).map(|m| m ^ d).collect();
    let best = minimal_masks(criterion, diffs);
    sorted(best.into_iter().map(|x| Repair::new(p.universe.atoms_of(x & !d), p.universe.atoms_of(x & d))).collect())
}

/// Both routes, cross-checked.
pub fn preferred_repairs_oracle(p: &OracleProblem, criterion: PreferenceCriterion) -> Result<Vec<Repair>, OracleError> {
    let a = preferred_via_models(p, criterion);
    let b = preferred_via_enumeration(p, criterion);
    if a != b {
        let show = |rs: &[Repair]| rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ");
        return Err(OracleError::RouteMismatch(format!("models [{}] vs enumeration [{}]", show(&a), show(&b))));
    }
    Ok(a)
}

/// Symmetric difference.
pub fn dist(d1: &BTreeSet<Atom>, d2: &BTreeSet<Atom>) -> BTreeSet<Atom> {
    d1.symmetric_difference(d2).cloned().collect()
}

/// Evaluates a denial theory on a two-valued instance, with auxiliary
/// predicates read as the completion of their (non-recursive) clauses and
/// variables ranging over `domain`.
pub struct DenialEvaluator<'a> {
    theory: &'a DenialTheory,
    domain: &'a [Term],
    holds: &'a dyn Fn(&Atom) -> bool,
}

impl<'a> DenialEvaluator<'a> {
    pub fn new(theory: &'a DenialTheory, domain: &'a [Term], holds: &'a dyn Fn(&Atom) -> bool) -> DenialEvaluator<'a> {
        DenialEvaluator { theory, domain, holds }
    }

    /// No denial body is satisfiable.
    pub fn satisfied(&self) -> bool {
        self.theory.denials.iter().all(|d| !self.satisfiable(&d.body, Substitution::new()))
    }

    fn satisfiable(&self, body: &[Literal], env: Substitution) -> bool {
        let mut vars = Vec::new();
        for l in body {
            match l {
                Literal::Pos(a) | Literal::Neg(a) => a.args.iter().for_each(|t| env.apply(t).vars_ordered(&mut vars)),
                Literal::Eq(s, t) | Literal::Neq(s, t) | Literal::Cmp(_, s, t) => {
                    env.apply(s).vars_ordered(&mut vars);
                    env.apply(t).vars_ordered(&mut vars);
                }
            }
        }
        self.search(body, &vars, env)
    }

    fn search(&self, body: &[Literal], vars: &[Var], env: Substitution) -> bool {
        match vars.split_first() {
            None => body.iter().all(|l| self.literal(l, &env)),
            Some((v, rest)) => self.domain.iter().any(|c| {
                let mut e = env.clone();
                e.bind(v.clone(), c.clone());
                self.search(body, rest, e)
            }),
        }
    }

    fn literal(&self, l: &Literal, env: &Substitution) -> bool {
        let g = |t: &Term| ground_term(t, env);
        match l {
            Literal::Pos(a) => self.atom(&Atom { pred: a.pred.clone(), args: a.args.iter().map(g).collect() }),
            Literal::Neg(a) => !self.atom(&Atom { pred: a.pred.clone(), args: a.args.iter().map(g).collect() }),
            Literal::Eq(s, t) => g(s) == g(t),
            Literal::Neq(s, t) => g(s) != g(t),
            Literal::Cmp(op, s, t) => matches!((g(s), g(t)), (Term::Int(a), Term::Int(b)) if op.holds(a, b)),
        }
    }

    fn atom(&self, a: &Atom) -> bool {
        if &*a.pred == DOMAIN_PREDICATE && a.args.len() == 1 {
            return self.domain.contains(&a.args[0]);
        }
        if !self.theory.fresh_predicates.contains(&a.pred) {
            return (self.holds)(a);
        }
        self.theory.auxiliary_clauses.iter().filter(|c| c.head.pred == a.pred && c.head.args.len() == a.args.len()).any(
            |c| {
                let Some(env) = crate::logic::unify_args(&c.head.args, &a.args) else { return false };
                self.satisfiable(&c.body, env)
            },
        )
    }
}
