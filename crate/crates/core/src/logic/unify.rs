use std::collections::BTreeMap;
use std::fmt;

use super::term::{Atom, Clause, Denial, Literal, Term, Var};

/// An idempotent substitution: no bound variable occurs in any binding.
#[derive(Clone, Default, PartialEq, Eq, Hash, Debug)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Substitution {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            let t = s.apply(&t);
            s.bind(v, t);
        }
        s
    }

    /// Simultaneous variable renaming; permutations such as `X ↦ Y, Y ↦ X`
    /// are allowed since `apply` rewrites in a single pass.
    pub fn renaming(pairs: impl IntoIterator<Item = (Var, Var)>) -> Substitution {
        Substitution { bindings: pairs.into_iter().filter(|(v, w)| v != w).map(|(v, w)| (v, Term::Var(w))).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    /// Adds `v ↦ t`, where `t` is already normalized under `self` and does not
    /// contain `v`. Existing bindings are rewritten to keep idempotence.
    pub fn bind(&mut self, v: Var, t: Term) {
        debug_assert!(!t.contains_var(&v), "occurs check violated for {v}");
        let single = Substitution { bindings: BTreeMap::from([(v.clone(), t.clone())]) };
        for rhs in self.bindings.values_mut() {
            if rhs.contains_var(&v) {
                *rhs = single.apply(rhs);
            }
        }
        self.bindings.insert(v, t);
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in &self.bindings {
            out.bindings.insert(v.clone(), other.apply(t));
        }
        for (v, t) in &other.bindings {
            out.bindings.entry(v.clone()).or_insert_with(|| t.clone());
        }
        out.bindings.retain(|v, t| *t != Term::Var(v.clone()));
        out
    }

    pub fn restrict(&self, keep: impl Fn(&Var) -> bool) -> Substitution {
        Substitution {
            bindings: self.bindings.iter().filter(|(v, _)| keep(v)).map(|(v, t)| (v.clone(), t.clone())).collect(),
        }
    }

    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) | Term::Int(_) => t.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| self.apply(t)).collect() }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        match l {
            Literal::Pos(a) => Literal::Pos(self.apply_atom(a)),
            Literal::Neg(a) => Literal::Neg(self.apply_atom(a)),
            Literal::Eq(s, t) => Literal::Eq(self.apply(s), self.apply(t)),
            Literal::Neq(s, t) => Literal::Neq(self.apply(s), self.apply(t)),
            Literal::Cmp(op, s, t) => Literal::Cmp(*op, self.apply(s), self.apply(t)),
        }
    }

    /// Applies to the free part of a denial.
    ///
    /// # Panics
    /// Binding a universally quantified variable would capture it; this is a
    /// programming error.
    pub fn apply_denial(&self, d: &Denial) -> Denial {
        if let Some(v) = d.universal.iter().find(|v| self.bindings.contains_key(*v)) {
            panic!("substitution captures universal variable {v} of {d}");
        }
        Denial { universal: d.universal.clone(), body: d.body.iter().map(|l| self.apply_literal(l)).collect() }
    }

    pub fn apply_clause(&self, c: &Clause) -> Clause {
        Clause { head: self.apply_atom(&c.head), body: c.body.iter().map(|l| self.apply_literal(l)).collect() }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            write!(f, "{}{v}/{t}", if i == 0 { "" } else { ", " })?;
        }
        write!(f, "}}")
    }
}

/// Most general unifier of `s` and `t`, with occurs check.
pub fn unify(s: &Term, t: &Term) -> Option<Substitution> {
    unify_with(s, t, &|_| false, Substitution::new())
}

pub fn unify_args(xs: &[Term], ys: &[Term]) -> Option<Substitution> {
    if xs.len() != ys.len() {
        return None;
    }
    unify_many(xs.iter().cloned().zip(ys.iter().cloned()).collect(), &|_| false, Substitution::new())
}

/// Martelli–Montanari unification extending `base`. When two variables meet,
/// the one satisfying `prefer_bound` is the one that gets bound.
pub fn unify_with(s: &Term, t: &Term, prefer_bound: &dyn Fn(&Var) -> bool, base: Substitution) -> Option<Substitution> {
    unify_many(vec![(s.clone(), t.clone())], prefer_bound, base)
}

pub fn unify_many(
    mut equations: Vec<(Term, Term)>,
    prefer_bound: &dyn Fn(&Var) -> bool,
    mut sigma: Substitution,
) -> Option<Substitution> {
    while let Some((s, t)) = equations.pop() {
        let s = sigma.apply(&s);
        let t = sigma.apply(&t);
        if s == t {
            continue;
        }
        match (s, t) {
            (Term::Var(x), Term::Var(y)) => {
                if prefer_bound(&y) && !prefer_bound(&x) {
                    sigma.bind(y, Term::Var(x));
                } else {
                    sigma.bind(x, Term::Var(y));
                }
            }
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if t.contains_var(&x) {
                    return None;
                }
                sigma.bind(x, t);
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                equations.extend(xs.into_iter().zip(ys));
            }
            _ => return None,
        }
    }
    Some(sigma)
}
