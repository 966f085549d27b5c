//! Preferred repairs: branch-and-bound over the abductive derivation tree,
//! followed by a final preference filter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use crate::composer::{solution_to_repair, AbductiveTheory, Repair};
use crate::engine::{Derivation, DerivationOutcome, Options, State, Stats, Store, TraceStep};
use crate::logic::{unify_with, Atom, Disequality, EqualityStore, Substitution, Term};

/// `a.leq(b)`: `b` is at least as preferred as `a`.
pub trait PreOrder<T> {
    fn leq(&self, a: &T, b: &T) -> bool;

    fn strictly_below(&self, a: &T, b: &T) -> bool {
        self.leq(a, b) && !self.leq(b, a)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum PreferenceCriterion {
    #[default]
    Inclusion,
    Cardinality,
}

impl FromStr for PreferenceCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inclusion" => Ok(PreferenceCriterion::Inclusion),
            "cardinality" => Ok(PreferenceCriterion::Cardinality),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

impl fmt::Display for PreferenceCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreferenceCriterion::Inclusion => "inclusion",
            PreferenceCriterion::Cardinality => "cardinality",
        })
    }
}

/// Defined on ground repairs.
impl PreOrder<Repair> for PreferenceCriterion {
    fn leq(&self, a: &Repair, b: &Repair) -> bool {
        match self {
            PreferenceCriterion::Inclusion => b.insert.is_subset(&a.insert) && b.retract.is_subset(&a.retract),
            PreferenceCriterion::Cardinality => b.size() <= a.size(),
        }
    }
}

/// Repair members tagged with their side, so one set comparison covers both.
fn tagged(r: &Repair) -> Vec<Term> {
    let side = |tag: &str, s: &BTreeSet<Atom>| s.iter().map(|a| Term::app(tag, vec![a.to_term()])).collect::<Vec<_>>();
    let mut out = side("insert", &r.insert);
    out.extend(side("retract", &r.retract));
    out
}

fn residual_store(r: &Repair) -> Option<EqualityStore> {
    r.residual.iter().try_fold(EqualityStore::new(), |e, d| e.add_disequality(d.universal.clone(), &d.lhs, &d.rhs).ok())
}

/// Substitutions θ (admitted by `small`'s residual) with θ(small) ⊆ `big`.
fn embeds(
    small: &[Term],
    big: &[Term],
    theta: Substitution,
    store: &EqualityStore,
    out: &mut dyn FnMut(&Substitution) -> bool,
) -> bool {
    let Some((first, rest)) = small.split_first() else {
        return store.admits(&theta) && out(&theta);
    };
    big.iter().any(|b| match unify_with(first, b, &|_| false, theta.clone()) {
        Some(t) => embeds(rest, big, t, store, out),
        None => false,
    })
}

/// One-way matching: binds only variables of `pattern`.
fn match_term(pattern: &Term, target: &Term, theta: &mut Substitution) -> bool {
    match (pattern, target) {
        (Term::Var(v), _) => match theta.get(v) {
            Some(bound) => bound == target,
            None => {
                theta.bind(v.clone(), target.clone());
                true
            }
        },
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_term(x, y, theta))
        }
        _ => pattern == target,
    }
}

fn matches_into(small: &[Term], big: &[Term], theta: Substitution, out: &mut dyn FnMut(&Substitution) -> bool) -> bool {
    let Some((first, rest)) = small.split_first() else {
        return out(&theta);
    };
    big.iter().any(|b| {
        let mut t = theta.clone();
        match_term(first, b, &mut t) && matches_into(rest, big, t, out)
    })
}

/// `worse` is non-ground and read as the set of its admitted instances. It is
/// dominated when `better` maps into a proper subset of it and `worse`'s
/// residual implies every mapped residual constraint of `better`.
fn dominates_schema(better: &Repair, worse: &Repair) -> bool {
    let apart = Substitution::renaming(
        better.vars().into_iter().enumerate().map(|(i, v)| (v, crate::logic::Var::named(&format!("_B{}", i + 1)))),
    );
    let better = Repair {
        insert: better.insert.iter().map(|a| apart.apply_atom(a)).collect(),
        retract: better.retract.iter().map(|a| apart.apply_atom(a)).collect(),
        residual: better
            .residual
            .iter()
            .map(|d| Disequality { universal: d.universal.clone(), lhs: apart.apply(&d.lhs), rhs: apart.apply(&d.rhs) })
            .collect(),
    };
    let small = tagged(&better);
    let big = tagged(worse);
    let known: BTreeSet<(BTreeSet<crate::logic::Var>, Term, Term)> = worse
        .residual
        .iter()
        .flat_map(|d| {
            [(d.universal.clone(), d.lhs.clone(), d.rhs.clone()), (d.universal.clone(), d.rhs.clone(), d.lhs.clone())]
        })
        .collect();
    matches_into(&small, &big, Substitution::new(), &mut |theta| {
        let image: BTreeSet<Term> = small.iter().map(|t| theta.apply(t)).collect();
        image.len() < big.len()
            && better.residual.iter().all(|d| {
                let (l, r) = (theta.apply(&d.lhs), theta.apply(&d.rhs));
                if l.is_ground() && r.is_ground() && d.universal.is_empty() {
                    return l != r;
                }
                known.contains(&(d.universal.clone(), l, r))
            })
    })
}

/// Whether `better` is strictly preferred to `worse` under `criterion`. A
/// non-ground repair counts as dominating a ground one when one of its
/// admitted instances does.
pub fn dominates(criterion: PreferenceCriterion, better: &Repair, worse: &Repair) -> bool {
    match criterion {
        PreferenceCriterion::Cardinality => better.size() < worse.size(),
        PreferenceCriterion::Inclusion => {
            if better.is_ground() && worse.is_ground() {
                return criterion.strictly_below(worse, better);
            }
            let small = tagged(better);
            let big = tagged(worse);
            if !worse.is_ground() {
                return dominates_schema(better, worse);
            }
            let Some(store) = residual_store(better) else { return false };
            embeds(&small, &big, Substitution::new(), &store, &mut |theta| {
                let image: BTreeSet<Term> = small.iter().map(|t| theta.apply(t)).collect();
                image.len() < big.len()
            })
        }
    }
}

/// Keeps the candidates no other candidate dominates, deduplicated and in
/// rendered order.
pub fn preferred_only(criterion: PreferenceCriterion, candidates: &[Repair]) -> Vec<Repair> {
    let mut unique: BTreeMap<String, Repair> = BTreeMap::new();
    for r in candidates {
        let r = r.canonical();
        unique.entry(r.to_string()).or_insert(r);
    }
    let all: Vec<&Repair> = unique.values().collect();
    all.iter().filter(|r| !all.iter().any(|o| dominates(criterion, o, r))).map(|r| (*r).clone()).collect()
}

pub fn is_preferred(criterion: PreferenceCriterion, r: &Repair, among: &[Repair]) -> bool {
    !among.iter().any(|o| dominates(criterion, o, r))
}

/// Incumbent information used for pruning.
#[derive(Clone, Debug)]
pub struct Frontier {
    pub criterion: PreferenceCriterion,
    best_bound: Option<usize>,
    history: Vec<usize>,
    /// Ground Δ sets of the solutions found so far, kept as an antichain.
    pareto: Vec<BTreeSet<Atom>>,
}

impl Frontier {
    pub fn new(criterion: PreferenceCriterion) -> Frontier {
        Frontier { criterion, best_bound: None, history: Vec::new(), pareto: Vec::new() }
    }

    pub fn best_bound(&self) -> Option<usize> {
        self.best_bound
    }

    pub fn bound_history(&self) -> &[usize] {
        &self.history
    }

    pub fn pareto(&self) -> &[BTreeSet<Atom>] {
        &self.pareto
    }

    pub fn record(&mut self, delta: &[Atom]) {
        let size = delta.len();
        if self.best_bound.is_none_or(|b| size < b) {
            self.best_bound = Some(size);
            self.history.push(size);
        }
        if delta.iter().all(Atom::is_ground) {
            let set: BTreeSet<Atom> = delta.iter().cloned().collect();
            if self.pareto.iter().any(|p| p.is_subset(&set)) {
                return;
            }
            self.pareto.retain(|p| !set.is_subset(p));
            self.pareto.push(set);
        }
        debug_assert!(self.history.windows(2).all(|w| w[1] < w[0]), "bound history not decreasing");
        debug_assert!(
            self.pareto.iter().enumerate().all(|(i, a)| self
                .pareto
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !a.is_subset(b))),
            "pareto set is not an antichain"
        );
    }

    /// Whether every completion of `store` is dominated by a recorded
    /// solution.
    pub fn prunes(&self, store: &Store) -> bool {
        match self.criterion {
            PreferenceCriterion::Cardinality => self.best_bound.is_some_and(|b| store.delta.len() > b),
            PreferenceCriterion::Inclusion => {
                if self.pareto.is_empty() {
                    return false;
                }
                let ground: BTreeSet<&Atom> = store.ground_delta().collect();
                self.pareto.iter().any(|p| p.len() < store.delta.len() && p.iter().all(|a| ground.contains(a)))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Complete,
    BudgetExhausted,
    Floundered,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Complete => "complete",
            Status::BudgetExhausted => "budget_exhausted",
            Status::Floundered => "floundered",
        })
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub repairs: Vec<Repair>,
    pub status: Status,
    pub stats: Stats,
    pub bound_history: Vec<usize>,
    /// Replay log of the (sequential) search, when recording was requested.
    pub trace: Vec<TraceStep>,
}

struct Shared {
    frontier: Mutex<Frontier>,
    found: Mutex<Vec<Repair>>,
}

fn explore(
    theory: &AbductiveTheory,
    states: Vec<State>,
    options: Options,
    shared: &Shared,
    prune: bool,
) -> (Stats, Vec<TraceStep>) {
    let mut d = Derivation::from_states(theory, states, options);
    let mut check = |s: &Store| prune && shared.frontier.lock().expect("frontier lock").prunes(s);
    while let Some(outcome) = d.next_with(&mut check) {
        if let DerivationOutcome::Solution(sol) = outcome {
            let delta: Vec<Atom> = sol.delta.iter().map(|a| sol.store.solved().apply_atom(a)).collect();
            shared.frontier.lock().expect("frontier lock").record(&delta);
            shared.found.lock().expect("found lock").push(solution_to_repair(&delta, &sol.store));
        }
    }
    (d.stats(), d.trace().to_vec())
}

fn finish(criterion: PreferenceCriterion, shared: Shared, stats: Stats, trace: Vec<TraceStep>) -> OptimizeResult {
    let frontier = shared.frontier.into_inner().expect("frontier lock");
    let found = shared.found.into_inner().expect("found lock");
    let status = if stats.floundered > 0 {
        Status::Floundered
    } else if stats.budget_exhausted {
        Status::BudgetExhausted
    } else {
        Status::Complete
    };
    OptimizeResult { repairs: preferred_only(criterion, &found), status, stats, bound_history: frontier.history, trace }
}

fn shared(criterion: PreferenceCriterion) -> Shared {
    Shared { frontier: Mutex::new(Frontier::new(criterion)), found: Mutex::new(Vec::new()) }
}

/// All preferred repairs of `theory`.
pub fn preferred_repairs(theory: &AbductiveTheory, criterion: PreferenceCriterion, options: Options) -> OptimizeResult {
    let sh = shared(criterion);
    let (stats, trace) = explore(theory, vec![State::initial(theory, &[])], options, &sh, true);
    finish(criterion, sh, stats, trace)
}

/// Every repair the derivation produces, without pruning or filtering.
pub fn all_repairs(theory: &AbductiveTheory, options: Options) -> OptimizeResult {
    let sh = shared(PreferenceCriterion::Inclusion);
    let (stats, trace) = explore(theory, vec![State::initial(theory, &[])], options, &sh, false);
    let found = sh.found.into_inner().expect("found lock");
    let mut unique: BTreeMap<String, Repair> = BTreeMap::new();
    for r in found {
        let r = r.canonical();
        unique.entry(r.to_string()).or_insert(r);
    }
    let status = if stats.floundered > 0 {
        Status::Floundered
    } else if stats.budget_exhausted {
        Status::BudgetExhausted
    } else {
        Status::Complete
    };
    OptimizeResult { repairs: unique.into_values().collect(), status, stats, bound_history: Vec::new(), trace }
}

/// Like `preferred_repairs`, exploring independent subtrees on `threads`
/// workers that share one frontier. The result does not depend on
/// scheduling; the step budget applies per worker.
pub fn preferred_repairs_parallel(
    theory: &AbductiveTheory,
    criterion: PreferenceCriterion,
    options: Options,
    threads: usize,
) -> OptimizeResult {
    let threads = threads.max(1);
    let root = Derivation::new(theory, &[], options.clone());
    let (states, outcomes, mut stats) = root.split(threads * 4);
    let sh = shared(criterion);
    for o in outcomes {
        match o {
            DerivationOutcome::Solution(sol) => {
                let delta: Vec<Atom> = sol.delta.iter().map(|a| sol.store.solved().apply_atom(a)).collect();
                sh.frontier.lock().expect("frontier lock").record(&delta);
                sh.found.lock().expect("found lock").push(solution_to_repair(&delta, &sol.store));
            }
            DerivationOutcome::Floundered(_) => stats.floundered += 1,
            DerivationOutcome::Failure => {}
        }
    }
    let mut buckets: Vec<Vec<State>> = vec![Vec::new(); threads];
    for (i, s) in states.into_iter().enumerate() {
        buckets[i % threads].push(s);
    }
    let worker_stats: Vec<Stats> = std::thread::scope(|scope| {
        let handles: Vec<_> = buckets
            .into_iter()
            .map(|b| {
                let sh = &sh;
                let options = options.clone();
                scope.spawn(move || explore(theory, b, options, sh, true).0)
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for s in &worker_stats {
        stats.absorb(s);
    }
    finish(criterion, sh, stats, Vec::new())
}
