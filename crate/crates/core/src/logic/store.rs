use std::collections::BTreeSet;
use std::fmt;

use super::term::{Term, Var};
use super::unify::{unify_with, Substitution};

/// `forall universal: lhs != rhs`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Disequality {
    pub universal: BTreeSet<Var>,
    pub lhs: Term,
    pub rhs: Term,
}

impl Disequality {
    pub fn new(universal: BTreeSet<Var>, lhs: Term, rhs: Term) -> Disequality {
        Disequality { universal, lhs, rhs }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = self.lhs.vars();
        self.rhs.collect_vars(&mut out);
        out.retain(|v| !self.universal.contains(v));
        out
    }
}

impl fmt::Display for Disequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.universal.is_empty() {
            let vs: Vec<String> = self.universal.iter().map(|v| v.to_string()).collect();
            write!(f, "forall {}: ", vs.join(", "))?;
        }
        write!(f, "{} != {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, thiserror::Error)]
#[error("equality store is inconsistent")]
pub struct Inconsistent;

pub enum Simplified {
    /// Holds in every instance; can be dropped.
    True,
    /// Fails in some instance required by the quantifier; store inconsistent.
    False,
    Residual(Disequality),
}

/// Normalizes a disequality against the solved equalities.
pub fn simplify_disequality(solved: &Substitution, d: &Disequality) -> Simplified {
    let lhs = solved.apply(&d.lhs);
    let rhs = solved.apply(&d.rhs);
    let (lhs, rhs) = match (lhs.eval_arith(), rhs.eval_arith()) {
        (Some(l), Some(r)) => (l, r),
        _ => (lhs, rhs),
    };
    let universal = &d.universal;
    let Some(mgu) = unify_with(&lhs, &rhs, &|v| universal.contains(v), Substitution::new()) else {
        return Simplified::True;
    };
    let free: Vec<(Var, Term)> =
        mgu.iter().filter(|(v, _)| !universal.contains(*v)).map(|(v, t)| (v.clone(), t.clone())).collect();
    if free.is_empty() {
        return Simplified::False;
    }
    let lhs = Term::tuple(free.iter().map(|(v, _)| Term::Var(v.clone())).collect());
    let rhs = Term::tuple(free.into_iter().map(|(_, t)| t).collect());
    let mut used = rhs.vars();
    used.retain(|v| universal.contains(v));
    Simplified::Residual(Disequality { universal: used, lhs, rhs })
}

/// The store E: solved equalities plus simplified disequalities. Every value
/// of this type is consistent; operations that would break consistency
/// return `Inconsistent` instead.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct EqualityStore {
    solved: Substitution,
    disequalities: Vec<Disequality>,
}

impl EqualityStore {
    pub fn new() -> EqualityStore {
        EqualityStore::default()
    }

    pub fn solved(&self) -> &Substitution {
        &self.solved
    }

    pub fn disequalities(&self) -> &[Disequality] {
        &self.disequalities
    }

    pub fn add_equality(&self, s: &Term, t: &Term) -> Result<EqualityStore, Inconsistent> {
        self.add_equalities(&[(s.clone(), t.clone())])
    }

    pub fn add_equalities(&self, pairs: &[(Term, Term)]) -> Result<EqualityStore, Inconsistent> {
        let mut sigma = self.solved.clone();
        for (s, t) in pairs {
            let s = sigma.apply(s).eval_arith().unwrap_or_else(|| sigma.apply(s));
            let t = sigma.apply(t).eval_arith().unwrap_or_else(|| sigma.apply(t));
            sigma = unify_with(&s, &t, &|_| false, sigma).ok_or(Inconsistent)?;
        }
        if sigma == self.solved {
            return Ok(self.clone());
        }
        let mut out = EqualityStore { solved: sigma, disequalities: Vec::new() };
        for d in &self.disequalities {
            out.push(d)?;
        }
        Ok(out)
    }

    pub fn add_disequality(&self, universal: BTreeSet<Var>, s: &Term, t: &Term) -> Result<EqualityStore, Inconsistent> {
        let mut out = self.clone();
        out.push(&Disequality { universal, lhs: s.clone(), rhs: t.clone() })?;
        Ok(out)
    }

    fn push(&mut self, d: &Disequality) -> Result<(), Inconsistent> {
        match simplify_disequality(&self.solved, d) {
            Simplified::True => Ok(()),
            Simplified::False => Err(Inconsistent),
            Simplified::Residual(r) => {
                if !self.disequalities.contains(&r) {
                    self.disequalities.push(r);
                }
                Ok(())
            }
        }
    }

    /// Whether extending the solved part with `grounding` violates no
    /// disequality.
    pub fn admits(&self, grounding: &Substitution) -> bool {
        self.disequalities.iter().all(|d| {
            let d = Disequality {
                universal: d.universal.clone(),
                lhs: grounding.apply(&d.lhs),
                rhs: grounding.apply(&d.rhs),
            };
            !matches!(simplify_disequality(&Substitution::new(), &d), Simplified::False)
        })
    }
}

impl fmt::Display for EqualityStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.solved)?;
        for d in &self.disequalities {
            write!(f, ", {d}")?;
        }
        Ok(())
    }
}
