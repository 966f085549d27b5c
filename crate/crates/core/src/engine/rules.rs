use std::collections::BTreeSet;
use std::fmt;

use super::{Goal, Options, State};
use crate::composer::AbductiveTheory;
use crate::logic::{unify, unify_many, Atom, Denial, EqualityStore, Literal, Substitution, Term, Var};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RuleId {
    D1,
    D2,
    N1,
    N2,
    A1,
    A2,
    E1,
    E2,
    E3,
    E4,
    /// Evaluation of a ground comparison.
    Cmp,
    /// A denial with an empty body.
    Fail,
}

impl RuleId {
    pub fn parse(s: &str) -> Option<RuleId> {
        Some(match s {
            "D.1" => RuleId::D1,
            "D.2" => RuleId::D2,
            "N.1" => RuleId::N1,
            "N.2" => RuleId::N2,
            "A.1" => RuleId::A1,
            "A.2" => RuleId::A2,
            "E.1" => RuleId::E1,
            "E.2" => RuleId::E2,
            "E.3" => RuleId::E3,
            "E.4" => RuleId::E4,
            "cmp" => RuleId::Cmp,
            "fail" => RuleId::Fail,
            _ => return None,
        })
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::D1 => "D.1",
            RuleId::D2 => "D.2",
            RuleId::N1 => "N.1",
            RuleId::N2 => "N.2",
            RuleId::A1 => "A.1",
            RuleId::A2 => "A.2",
            RuleId::E1 => "E.1",
            RuleId::E2 => "E.2",
            RuleId::E3 => "E.3",
            RuleId::E4 => "E.4",
            RuleId::Cmp => "cmp",
            RuleId::Fail => "fail",
        };
        f.write_str(s)
    }
}

/// What to do with a selected goal.
#[derive(Clone, Debug)]
pub enum Plan {
    /// Positive `s = t`.
    Equate,
    /// Positive `s != t`, turned into `<- s = t`.
    NegateNeq,
    /// Positive `~a`, turned into `<- a`.
    NegateAtom,
    /// Positive ground comparison with its value.
    Compare(bool),
    Unfold,
    Abduce,
    Fail,
    Denial {
        lit: usize,
        step: DenialStep,
    },
}

#[derive(Clone, Debug)]
pub enum DenialStep {
    /// The selected literal is false in every instance; drop the denial.
    Satisfied(RuleId),
    /// The selected literal is true in every instance; drop the literal.
    RemoveLiteral(RuleId),
    /// Equality whose mgu binds universal variables only.
    Substitute(Substitution),
    /// A body made of equalities only: one universally quantified
    /// disequality goes to the store.
    StoreDisequality,
    /// Equality binding a free variable; the substitution is the full mgu.
    Split(Substitution),
    Resolve,
    Propagate,
    CaseNeg,
    CaseNeq,
}

impl Plan {
    pub fn rule(&self) -> RuleId {
        match self {
            Plan::Equate => RuleId::E1,
            Plan::NegateNeq | Plan::NegateAtom => RuleId::N1,
            Plan::Compare(_) => RuleId::Cmp,
            Plan::Unfold => RuleId::D1,
            Plan::Abduce => RuleId::A1,
            Plan::Fail => RuleId::Fail,
            Plan::Denial { step, .. } => match step {
                DenialStep::Satisfied(r) | DenialStep::RemoveLiteral(r) => *r,
                DenialStep::Substitute(s) if s.is_empty() => RuleId::E2,
                DenialStep::Substitute(_) => RuleId::E3,
                DenialStep::StoreDisequality | DenialStep::Split(_) => RuleId::E4,
                DenialStep::Resolve => RuleId::D2,
                DenialStep::Propagate => RuleId::A2,
                DenialStep::CaseNeg | DenialStep::CaseNeq => RuleId::N2,
            },
        }
    }
}

struct Analysis {
    plan: Plan,
    branches: usize,
    ground_split: bool,
}

/// Structural compatibility ignoring variable sharing; over-approximates
/// unifiability and is only used to skip hopeless branches early.
fn compatible(s: &Term, t: &Term) -> bool {
    if s.is_arith() || t.is_arith() {
        return true;
    }
    match (s, t) {
        (Term::Var(_), _) | (_, Term::Var(_)) => true,
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| compatible(x, y))
        }
        _ => s == t,
    }
}

fn atoms_compatible(a: &Atom, b: &Atom) -> bool {
    a.pred == b.pred && a.args.len() == b.args.len() && a.args.iter().zip(&b.args).all(|(x, y)| compatible(x, y))
}

/// Evaluates arithmetic; `None` while an arithmetic subterm is non-ground.
fn evaluated(t: &Term) -> Option<Term> {
    t.eval_arith().filter(|t| !t.has_arith())
}

fn compare(op: crate::logic::CmpOp, s: &Term, t: &Term) -> Option<bool> {
    let (s, t) = (evaluated(s)?, evaluated(t)?);
    match (&s, &t) {
        (Term::Int(a), Term::Int(b)) => Some(op.holds(*a, *b)),
        _ if s.is_ground() && t.is_ground() => Some(false),
        _ => None,
    }
}

fn analyze_positive(theory: &AbductiveTheory, state: &State, lit: &Literal) -> Option<Analysis> {
    let single = |plan| Some(Analysis { plan, branches: 1, ground_split: false });
    match lit {
        Literal::Eq(s, t) => {
            evaluated(s)?;
            evaluated(t)?;
            single(Plan::Equate)
        }
        Literal::Neq(s, t) => {
            evaluated(s)?;
            evaluated(t)?;
            single(Plan::NegateNeq)
        }
        Literal::Neg(_) => single(Plan::NegateAtom),
        Literal::Cmp(op, s, t) => {
            let v = compare(*op, s, t)?;
            Some(Analysis { plan: Plan::Compare(v), branches: usize::from(v), ground_split: false })
        }
        Literal::Pos(a) if theory.is_abducible(&a.pred) => {
            let reuse = state.store.delta.iter().filter(|m| atoms_compatible(a, m)).count();
            Some(Analysis { plan: Plan::Abduce, branches: reuse + 1, ground_split: false })
        }
        Literal::Pos(a) => {
            let n = theory.clauses(&a.pred).filter(|c| atoms_compatible(a, &c.head)).count();
            Some(Analysis { plan: Plan::Unfold, branches: n, ground_split: false })
        }
    }
}

/// Splits an mgu into its universal and free parts.
fn partition(sigma: &Substitution, universal: &BTreeSet<Var>) -> (Substitution, Vec<(Var, Term)>) {
    let u = sigma.restrict(|v| universal.contains(v));
    let free = sigma.iter().filter(|(v, _)| !universal.contains(*v)).map(|(v, t)| (v.clone(), t.clone())).collect();
    (u, free)
}

fn has_universal(l: &Literal, universal: &BTreeSet<Var>) -> bool {
    l.vars().iter().any(|v| universal.contains(v))
}

/// Picks the literal of a denial to work on, with its step and rank
/// (lower ranks first); `None` when every literal must wait.
fn analyze_denial(theory: &AbductiveTheory, d: &Denial) -> Option<Analysis> {
    if d.body.is_empty() {
        return Some(Analysis { plan: Plan::Fail, branches: 0, ground_split: false });
    }
    let u = &d.universal;
    let all_equalities =
        d.body.iter().all(|l| matches!(l, Literal::Eq(s, t) if evaluated(s).is_some() && evaluated(t).is_some()));
    let mut best: Option<(u8, usize, DenialStep, bool)> = None;
    for (i, l) in d.body.iter().enumerate() {
        let found: Option<(u8, DenialStep, bool)> = match l {
            Literal::Eq(s, t) => {
                let (Some(s), Some(t)) = (evaluated(s), evaluated(t)) else { continue };
                match unify_many(vec![(s, t)], &|v| u.contains(v), Substitution::new()) {
                    None => Some((0, DenialStep::Satisfied(RuleId::E2), false)),
                    Some(sigma) => {
                        let (_, free) = partition(&sigma, u);
                        if free.is_empty() {
                            Some((0, DenialStep::Substitute(sigma), false))
                        } else if all_equalities {
                            Some((0, DenialStep::StoreDisequality, false))
                        } else {
                            Some((3, DenialStep::Split(sigma), false))
                        }
                    }
                }
            }
            Literal::Neq(s, t) => {
                let (Some(s), Some(t)) = (evaluated(s), evaluated(t)) else { continue };
                if s == t {
                    Some((0, DenialStep::Satisfied(RuleId::E2), false))
                } else if unify(&s, &t).is_none() {
                    Some((0, DenialStep::RemoveLiteral(RuleId::E2), false))
                } else if !has_universal(l, u) {
                    Some((4, DenialStep::CaseNeq, s.is_ground() && t.is_ground()))
                } else {
                    None
                }
            }
            Literal::Cmp(op, s, t) => compare(*op, s, t).map(|v| {
                let step = if v { DenialStep::RemoveLiteral(RuleId::Cmp) } else { DenialStep::Satisfied(RuleId::Cmp) };
                (0, step, false)
            }),
            Literal::Pos(a) if theory.is_abducible(&a.pred) => Some((1, DenialStep::Propagate, false)),
            Literal::Pos(a) if theory.is_defined(&a.pred) => Some((2, DenialStep::Resolve, false)),
            Literal::Pos(_) => Some((0, DenialStep::Satisfied(RuleId::D2), false)),
            Literal::Neg(a) if !has_universal(l, u) => Some((4, DenialStep::CaseNeg, a.is_ground())),
            Literal::Neg(_) => None,
        };
        if let Some((rank, step, ground)) = found {
            if best.as_ref().is_none_or(|b| rank < b.0) {
                let done = rank == 0;
                best = Some((rank, i, step, ground));
                if done {
                    break;
                }
            }
        }
    }
    let (rank, lit, step, ground_split) = best?;
    let branches = if rank >= 3 { 2 } else { 1 };
    Some(Analysis { plan: Plan::Denial { lit, step }, branches, ground_split })
}

fn analyze(theory: &AbductiveTheory, state: &State, goal: &Goal) -> Option<Analysis> {
    match goal {
        Goal::Positive(l) => analyze_positive(theory, state, l),
        Goal::Denial(d) => analyze_denial(theory, d),
    }
}

/// Chooses the goal to rewrite. `None` means every goal is delayed or
/// floundering.
pub(super) fn select(
    theory: &AbductiveTheory,
    state: &State,
    forced: Option<usize>,
    leftmost: bool,
) -> Option<(usize, Plan)> {
    if let Some(i) = forced.filter(|&i| i < state.goals.len()) {
        if let Some(a) = analyze(theory, state, &state.goals[i]) {
            return Some((i, a.plan));
        }
    }
    let mut ground: Option<(usize, Plan)> = None;
    let mut first: Option<(usize, Plan)> = None;
    for (i, g) in state.goals.iter().enumerate() {
        let Some(a) = analyze(theory, state, g) else { continue };
        if leftmost || a.branches <= 1 {
            return Some((i, a.plan));
        }
        if a.ground_split && ground.is_none() {
            ground = Some((i, a.plan));
        } else if first.is_none() {
            first = Some((i, a.plan));
        }
    }
    ground.or(first)
}

pub(super) struct Ctx<'a> {
    pub theory: &'a AbductiveTheory,
    pub options: &'a Options,
    pub exhausted: bool,
}

fn with_store(mut state: State, e: EqualityStore) -> State {
    let changed = e.solved() != state.store.equalities.solved();
    state.store.equalities = e;
    if changed {
        state.normalize();
    }
    state
}

fn arg_pairs(xs: &[Term], ys: &[Term]) -> Vec<(Term, Term)> {
    xs.iter().cloned().zip(ys.iter().cloned()).collect()
}

fn equalities(xs: &[Term], ys: &[Term]) -> Vec<Literal> {
    xs.iter().zip(ys).map(|(x, y)| Literal::Eq(x.clone(), y.clone())).collect()
}

fn push_denial(state: &mut State, universal: BTreeSet<Var>, body: Vec<Literal>) {
    state.goals.push(Goal::Denial(Denial::new(universal, body).tidy()));
}

/// Applies `plan` to `goal`, already removed from `state`. Returns the child
/// states in branch order; inconsistent children are dropped.
pub(super) fn apply(ctx: &mut Ctx<'_>, mut state: State, goal: Goal, plan: Plan) -> Vec<State> {
    match (goal, plan) {
        (Goal::Positive(Literal::Eq(s, t)), Plan::Equate) => match state.store.equalities.add_equality(&s, &t) {
            Ok(e) => vec![with_store(state, e)],
            Err(_) => vec![],
        },
        (Goal::Positive(Literal::Neq(s, t)), Plan::NegateNeq) => {
            push_denial(&mut state, BTreeSet::new(), vec![Literal::Eq(s, t)]);
            vec![state]
        }
        (Goal::Positive(Literal::Neg(a)), Plan::NegateAtom) => {
            push_denial(&mut state, BTreeSet::new(), vec![Literal::Pos(a)]);
            vec![state]
        }
        (Goal::Positive(_), Plan::Compare(v)) => {
            if v {
                vec![state]
            } else {
                vec![]
            }
        }
        (Goal::Positive(Literal::Pos(a)), Plan::Unfold) => unfold(ctx, state, &a),
        (Goal::Positive(Literal::Pos(a)), Plan::Abduce) => abduce(ctx, state, a),
        (Goal::Denial(_), Plan::Fail) => vec![],
        (Goal::Denial(d), Plan::Denial { lit, step }) => denial_step(ctx, state, d, lit, step),
        (goal, plan) => unreachable!("plan {plan:?} does not fit goal {goal}"),
    }
}

fn unfold(ctx: &Ctx<'_>, mut state: State, a: &Atom) -> Vec<State> {
    let mut children = Vec::new();
    let clauses: Vec<_> = ctx.theory.clauses(&a.pred).filter(|c| atoms_compatible(a, &c.head)).cloned().collect();
    let renamed: Vec<_> = clauses.iter().map(|c| state.renamer.rename_clause(c)).collect();
    for c in renamed {
        let Ok(e) = state.store.equalities.add_equalities(&arg_pairs(&a.args, &c.head.args)) else { continue };
        let mut child = state.clone();
        child.goals.extend(c.body.into_iter().map(Goal::Positive));
        children.push(with_store(child, e));
    }
    children
}

fn abduce(ctx: &mut Ctx<'_>, mut state: State, a: Atom) -> Vec<State> {
    let mut reuse = Vec::new();
    for m in state.store.delta.iter().filter(|m| atoms_compatible(&a, m)) {
        if let Ok(e) = state.store.equalities.add_equalities(&arg_pairs(&a.args, &m.args)) {
            reuse.push(with_store(state.clone(), e));
        }
    }
    let fresh = if state.store.delta.len() >= ctx.options.budget.max_delta {
        ctx.exhausted = true;
        None
    } else {
        fresh_abduction(&mut state, a)
    };
    let mut children = Vec::new();
    if !ctx.options.reuse_first {
        children.extend(fresh.clone());
    }
    children.extend(reuse);
    if ctx.options.reuse_first {
        children.extend(fresh);
    }
    children
}

fn fresh_abduction(state: &mut State, a: Atom) -> Option<State> {
    let mut e = state.store.equalities.clone();
    for m in state.store.delta.iter().filter(|m| m.pred == a.pred && m.args.len() == a.args.len()) {
        e = e.add_disequality(BTreeSet::new(), &Term::tuple(a.args.clone()), &Term::tuple(m.args.clone())).ok()?;
    }
    let triggered: Vec<Denial> = state
        .store
        .delta_star
        .iter()
        .filter(|d| matches!(d.body.first(), Some(Literal::Pos(b)) if atoms_compatible(&a, b)))
        .cloned()
        .collect();
    let mut child = state.clone();
    for d in triggered {
        let d = child.renamer.rename_denial(&d);
        let Some(Literal::Pos(b)) = d.body.first() else { unreachable!() };
        let mut body = equalities(&b.args, &a.args);
        body.extend(d.body[1..].iter().cloned());
        push_denial(&mut child, d.universal, body);
    }
    child.store.delta.push(a);
    Some(with_store(child, e))
}

fn without(body: &[Literal], lit: usize) -> Vec<Literal> {
    body.iter().enumerate().filter(|(i, _)| *i != lit).map(|(_, l)| l.clone()).collect()
}

fn denial_step(ctx: &mut Ctx<'_>, mut state: State, d: Denial, lit: usize, step: DenialStep) -> Vec<State> {
    let rest = without(&d.body, lit);
    let u = d.universal.clone();
    match step {
        DenialStep::Satisfied(_) => vec![state],
        DenialStep::RemoveLiteral(_) => {
            push_denial(&mut state, u, rest);
            vec![state]
        }
        DenialStep::Substitute(sigma) => {
            let body = rest.iter().map(|l| sigma.apply_literal(l)).collect();
            let u = u.into_iter().filter(|v| sigma.get(v).is_none()).collect();
            push_denial(&mut state, u, body);
            vec![state]
        }
        DenialStep::StoreDisequality => {
            let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
            for l in &d.body {
                let Literal::Eq(s, t) = l else { unreachable!() };
                lhs.push(evaluated(s).expect("evaluable"));
                rhs.push(evaluated(t).expect("evaluable"));
            }
            match state.store.equalities.add_disequality(u, &Term::tuple(lhs), &Term::tuple(rhs)) {
                Ok(e) => vec![with_store(state, e)],
                Err(_) => vec![],
            }
        }
        DenialStep::Split(sigma) => split(state, &u, rest, &sigma),
        DenialStep::Resolve => vec![resolve(ctx, state, d, lit, rest)],
        DenialStep::Propagate => {
            let Literal::Pos(a) = &d.body[lit] else { unreachable!() };
            let members: Vec<Atom> = state.store.delta.iter().filter(|m| atoms_compatible(a, m)).cloned().collect();
            for m in members {
                let mut body = equalities(&a.args, &m.args);
                body.extend(rest.iter().cloned());
                push_denial(&mut state, u.clone(), body);
            }
            let mut moved = vec![d.body[lit].clone()];
            moved.extend(rest);
            state.store.delta_star.push(Denial::new(u, moved));
            vec![state]
        }
        DenialStep::CaseNeg => {
            let Literal::Neg(a) = &d.body[lit] else { unreachable!() };
            let mut holds = state.clone();
            holds.goals.push(Goal::Positive(Literal::Pos(a.clone())));
            let mut fails = state;
            push_denial(&mut fails, BTreeSet::new(), vec![Literal::Pos(a.clone())]);
            push_denial(&mut fails, u, rest);
            vec![holds, fails]
        }
        DenialStep::CaseNeq => {
            let Literal::Neq(s, t) = &d.body[lit] else { unreachable!() };
            let (s, t) = (evaluated(s).expect("evaluable"), evaluated(t).expect("evaluable"));
            let mut children = Vec::new();
            if let Ok(e) = state.store.equalities.add_equality(&s, &t) {
                children.push(with_store(state.clone(), e));
            }
            if let Ok(e) = state.store.equalities.add_disequality(BTreeSet::new(), &s, &t) {
                let mut child = state;
                push_denial(&mut child, u, rest);
                children.push(with_store(child, e));
            }
            children
        }
    }
}

/// Case split on a free variable `x` bound by an equality in a denial:
/// either `forall Ū: x != t`, or `x = t` with the universals of `t` made free.
fn split(mut state: State, universal: &BTreeSet<Var>, rest: Vec<Literal>, sigma: &Substitution) -> Vec<State> {
    let (su, free) = partition(sigma, universal);
    let remaining: BTreeSet<Var> = universal.iter().filter(|v| su.get(v).is_none()).cloned().collect();
    let (x, t) = free[0].clone();
    let mut body: Vec<Literal> = free[1..].iter().map(|(y, s)| Literal::Eq(Term::Var(y.clone()), s.clone())).collect();
    body.extend(rest.iter().map(|l| su.apply_literal(l)));
    let ut: BTreeSet<Var> = t.vars().into_iter().filter(|v| remaining.contains(v)).collect();
    let mut children = Vec::new();
    if let Ok(e) = state.store.equalities.add_disequality(ut.clone(), &Term::Var(x.clone()), &t) {
        children.push(with_store(state.clone(), e));
    }
    let (rho, _) = state.renamer.renaming(&ut);
    if let Ok(e) = state.store.equalities.add_equality(&Term::Var(x), &rho.apply(&t)) {
        let body = body.iter().map(|l| rho.apply_literal(l)).collect();
        let u = remaining.into_iter().filter(|v| !ut.contains(v)).collect();
        push_denial(&mut state, u, body);
        children.push(with_store(state, e));
    }
    children
}

/// D.2 with the head equalities already solved where they only bind
/// universal variables.
fn resolve(ctx: &Ctx<'_>, mut state: State, d: Denial, lit: usize, rest: Vec<Literal>) -> State {
    let Literal::Pos(a) = &d.body[lit] else { unreachable!() };
    let clauses: Vec<_> = ctx.theory.clauses(&a.pred).filter(|c| atoms_compatible(a, &c.head)).cloned().collect();
    for c in clauses {
        let c = state.renamer.rename_clause(&c);
        let mut u = d.universal.clone();
        u.extend(c.vars());
        let mut body = Vec::new();
        let args: Option<Vec<(Term, Term)>> =
            a.args.iter().zip(&c.head.args).map(|(x, y)| Some((evaluated(x)?, evaluated(y)?))).collect();
        let sigma = match args {
            Some(pairs) => match unify_many(pairs, &|v| u.contains(v), Substitution::new()) {
                None => continue,
                Some(sigma) => {
                    let (su, free) = partition(&sigma, &u);
                    body.extend(free.into_iter().map(|(x, t)| Literal::Eq(Term::Var(x), t)));
                    su
                }
            },
            None => {
                body.extend(equalities(&a.args, &c.head.args));
                Substitution::new()
            }
        };
        body.extend(c.body.iter().chain(&rest).map(|l| sigma.apply_literal(l)));
        let u = u.into_iter().filter(|v| sigma.get(v).is_none()).collect();
        push_denial(&mut state, u, body);
    }
    state
}
