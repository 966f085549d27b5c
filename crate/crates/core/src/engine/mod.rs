//! SLDNFA-style abductive derivations.
//!
//! A state is a set of goals plus a store `(Δ, Δ*, E)`. Each step selects one
//! goal and rewrites it with one of the unfolding (D), negation (N),
//! abduction (A) or equality (E) rules. Search is depth first with
//! chronological backtracking; goals whose rule has a single outcome are
//! selected before branching ones.

mod rules;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::composer::AbductiveTheory;
use crate::logic::{Atom, Denial, EqualityStore, Literal, Renamer, Substitution, Term, Var};

pub use rules::{Plan, RuleId};

/// A goal. Positive conjunctions are split into one goal per literal, which is
/// sound because their variables are free at the state level.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Goal {
    Positive(Literal),
    Denial(Denial),
}

impl Goal {
    fn apply(&self, s: &Substitution) -> Goal {
        match self {
            Goal::Positive(l) => Goal::Positive(s.apply_literal(l)),
            Goal::Denial(d) => Goal::Denial(s.apply_denial(d)),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Positive(l) => write!(f, "{l}"),
            Goal::Denial(d) => write!(f, "{d}"),
        }
    }
}

/// `(Δ, Δ*, E)`.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Store {
    pub delta: Vec<Atom>,
    pub delta_star: Vec<Denial>,
    pub equalities: EqualityStore,
}

impl Store {
    /// Ground members of Δ after applying the solved equalities.
    pub fn ground_delta(&self) -> impl Iterator<Item = &Atom> {
        self.delta.iter().filter(|a| a.is_ground())
    }
}

#[derive(Clone, Debug)]
pub struct State {
    pub goals: Vec<Goal>,
    pub store: Store,
    renamer: Renamer,
}

impl State {
    pub fn initial(theory: &AbductiveTheory, query: &[Literal]) -> State {
        let mut goals: Vec<Goal> = query.iter().cloned().map(Goal::Positive).collect();
        goals.extend(theory.constraints.iter().cloned().map(Goal::Denial));
        State { goals, store: Store::default(), renamer: Renamer::new() }
    }

    /// Re-applies the solved equalities everywhere after E grew.
    fn normalize(&mut self) {
        let s = self.store.equalities.solved().clone();
        if s.is_empty() {
            return;
        }
        for g in &mut self.goals {
            *g = g.apply(&s);
        }
        for a in &mut self.store.delta {
            *a = s.apply_atom(a);
        }
        for d in &mut self.store.delta_star {
            *d = s.apply_denial(d);
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Solution {
    pub delta: Vec<Atom>,
    pub store: EqualityStore,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DerivationOutcome {
    Solution(Solution),
    Failure,
    /// A negative literal or disequality with universal variables, or a
    /// comparison that never became ground.
    Floundered(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Budget {
    pub max_steps: u64,
    pub max_delta: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 2_000_000, max_delta: 32 }
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct Stats {
    pub steps: u64,
    pub branches: u64,
    pub pruned: u64,
    pub budget_exhausted: bool,
    pub floundered: u64,
}

impl Stats {
    pub fn absorb(&mut self, other: &Stats) {
        self.steps += other.steps;
        self.branches += other.branches;
        self.pruned += other.pruned;
        self.floundered += other.floundered;
        self.budget_exhausted |= other.budget_exhausted;
    }
}

/// One replay-log record.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TraceStep {
    pub step: u64,
    pub rule: RuleId,
    pub goal: usize,
    pub branch: usize,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} rule {} goal {} branch {}", self.step, self.rule, self.goal, self.branch)
    }
}

impl TraceStep {
    pub fn parse(line: &str) -> Option<TraceStep> {
        let w: Vec<&str> = line.split_whitespace().collect();
        match w.as_slice() {
            ["step", n, "rule", r, "goal", g, "branch", b] => Some(TraceStep {
                step: n.parse().ok()?,
                rule: RuleId::parse(r)?,
                goal: g.parse().ok()?,
                branch: b.parse().ok()?,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub enum Strategy {
    /// Single-outcome goals first, then denials with a ground negative
    /// literal, then insertion order.
    #[default]
    DeterministicFirst,
    /// Always the first selectable goal.
    LeftmostFirst,
    /// Goal indices forced step by step (e.g. from a replay log); falls back
    /// to `DeterministicFirst` when the script runs out or does not apply.
    Scripted(VecDeque<usize>),
}

#[derive(Clone, Debug)]
pub struct Options {
    pub budget: Budget,
    pub strategy: Strategy,
    /// Order reuse-by-unification branches before the fresh-abduction branch.
    pub reuse_first: bool,
    pub record_trace: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { budget: Budget::default(), strategy: Strategy::default(), reuse_first: true, record_trace: false }
    }
}

/// A lazily explored derivation tree.
pub struct Derivation<'a> {
    theory: &'a AbductiveTheory,
    stack: Vec<(State, usize)>,
    options: Options,
    stats: Stats,
    trace: Vec<TraceStep>,
}

impl<'a> Derivation<'a> {
    pub fn new(theory: &'a AbductiveTheory, query: &[Literal], options: Options) -> Derivation<'a> {
        Derivation::from_states(theory, vec![State::initial(theory, query)], options)
    }

    pub fn from_states(theory: &'a AbductiveTheory, states: Vec<State>, options: Options) -> Derivation<'a> {
        Derivation {
            theory,
            stack: states.into_iter().rev().map(|s| (s, 0)).collect(),
            options,
            stats: Stats::default(),
            trace: Vec::new(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn trace(&self) -> &[TraceStep] {
        &self.trace
    }

    /// Advances until the next outcome. `prune` is consulted before a state
    /// is expanded; returning `true` discards its subtree.
    pub fn next_with(&mut self, prune: &mut dyn FnMut(&Store) -> bool) -> Option<DerivationOutcome> {
        loop {
            let (mut state, branch) = self.stack.pop()?;
            if prune(&state.store) {
                self.stats.pruned += 1;
                continue;
            }
            if state.goals.is_empty() {
                return Some(DerivationOutcome::Solution(Solution {
                    delta: state.store.delta,
                    store: state.store.equalities,
                }));
            }
            if self.stats.steps >= self.options.budget.max_steps {
                self.stats.budget_exhausted = true;
                self.stack.clear();
                return None;
            }
            self.stats.steps += 1;
            let forced = match &mut self.options.strategy {
                Strategy::Scripted(script) => script.pop_front(),
                _ => None,
            };
            let leftmost = matches!(self.options.strategy, Strategy::LeftmostFirst);
            let Some((index, plan)) = rules::select(self.theory, &state, forced, leftmost) else {
                self.stats.floundered += 1;
                let culprit = state.goals.first().map(|g| g.to_string()).unwrap_or_default();
                return Some(DerivationOutcome::Floundered(culprit));
            };
            if self.options.record_trace {
                self.trace.push(TraceStep { step: self.stats.steps, rule: plan.rule(), goal: index, branch });
            }
            let goal = state.goals.remove(index);
            let mut ctx = rules::Ctx { theory: self.theory, options: &self.options, exhausted: false };
            let children = rules::apply(&mut ctx, state, goal, plan);
            if ctx.exhausted {
                self.stats.budget_exhausted = true;
            }
            if children.is_empty() {
                return Some(DerivationOutcome::Failure);
            }
            self.stats.branches += children.len() as u64;
            for (i, child) in children.into_iter().enumerate().rev() {
                self.stack.push((child, i));
            }
        }
    }

    /// Expands the tree breadth-first until at least `n` open states exist (or
    /// no state can be expanded), returning them for independent exploration.
    pub fn split(mut self, n: usize) -> (Vec<State>, Vec<DerivationOutcome>, Stats) {
        let mut outcomes = Vec::new();
        let mut frontier: VecDeque<State> = self.stack.drain(..).rev().map(|(s, _)| s).collect();
        while frontier.len() < n {
            let Some(mut state) = frontier.pop_front() else { break };
            if state.goals.is_empty() {
                outcomes.push(DerivationOutcome::Solution(Solution {
                    delta: state.store.delta,
                    store: state.store.equalities,
                }));
                continue;
            }
            self.stats.steps += 1;
            let Some((index, plan)) = rules::select(self.theory, &state, None, false) else {
                self.stats.floundered += 1;
                outcomes.push(DerivationOutcome::Floundered(state.goals[0].to_string()));
                continue;
            };
            let goal = state.goals.remove(index);
            let mut ctx = rules::Ctx { theory: self.theory, options: &self.options, exhausted: false };
            let children = rules::apply(&mut ctx, state, goal, plan);
            self.stats.budget_exhausted |= ctx.exhausted;
            self.stats.branches += children.len() as u64;
            frontier.extend(children);
        }
        (frontier.into_iter().collect(), outcomes, self.stats)
    }
}

impl Iterator for Derivation<'_> {
    type Item = DerivationOutcome;

    fn next(&mut self) -> Option<DerivationOutcome> {
        self.next_with(&mut |_| false)
    }
}

/// Starts a derivation for `query` (usually empty, i.e. `true`).
pub fn derive<'a>(theory: &'a AbductiveTheory, query: &[Literal], budget: Budget) -> Derivation<'a> {
    Derivation::new(theory, query, Options { budget, ..Options::default() })
}

/// A constant not in `domain`, used to witness "some other value".
pub fn fresh_constant(domain: &BTreeSet<Term>) -> Term {
    let mut k = 0;
    loop {
        let name = if k == 0 { "fresh".to_string() } else { format!("fresh{k}") };
        let t = Term::constant(&name);
        if !domain.contains(&t) {
            return t;
        }
        k += 1;
    }
}

/// Groundings of the solution's free variables over `domain` plus one fresh
/// constant that satisfy every disequality in E.
pub fn answer_substitutions(solution: &Solution, domain: &BTreeSet<Term>) -> Vec<Substitution> {
    let mut vars: Vec<Var> = Vec::new();
    for a in &solution.delta {
        a.args.iter().for_each(|t| t.vars_ordered(&mut vars));
    }
    let mut values: Vec<Term> = domain.iter().cloned().collect();
    values.push(fresh_constant(domain));
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(vars.len());
    fn go(vars: &[Var], values: &[Term], current: &mut Vec<Term>, store: &EqualityStore, out: &mut Vec<Substitution>) {
        if current.len() == vars.len() {
            let s = Substitution::from_pairs(vars.iter().cloned().zip(current.iter().cloned()));
            if store.admits(&s) {
                out.push(s);
            }
            return;
        }
        for v in values {
            current.push(v.clone());
            go(vars, values, current, store, out);
            current.pop();
        }
    }
    go(&vars, &values, &mut current, &solution.store, &mut out);
    out
}
