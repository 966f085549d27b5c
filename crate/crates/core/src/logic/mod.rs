//! Terms, atoms, literals, denials and clauses; substitutions and
//! unification; the equality/disequality store.

mod store;
mod term;
mod unify;

use std::collections::{BTreeMap, BTreeSet};

pub use store::{simplify_disequality, Disequality, EqualityStore, Inconsistent, Simplified};
pub use term::{sym, Atom, Clause, CmpOp, Denial, Literal, Sym, Term, Var};
pub use unify::{unify, unify_args, unify_many, unify_with, Substitution};

/// Standardization apart with a monotone counter. Renamings are recorded so
/// traces can map fresh names back to their origin.
#[derive(Clone, Debug)]
pub struct Renamer {
    next: u32,
    log: Vec<(Var, Var)>,
    record: bool,
}

impl Default for Renamer {
    fn default() -> Self {
        Renamer::new()
    }
}

impl Renamer {
    pub fn new() -> Renamer {
        Renamer { next: 1, log: Vec::new(), record: false }
    }

    pub fn recording() -> Renamer {
        Renamer { record: true, ..Renamer::new() }
    }

    pub fn counter(&self) -> u32 {
        self.next
    }

    pub fn log(&self) -> &[(Var, Var)] {
        &self.log
    }

    pub fn fresh(&mut self, v: &Var) -> Var {
        let w = v.renamed(self.next);
        self.next += 1;
        if self.record {
            self.log.push((v.clone(), w.clone()));
        }
        w
    }

    pub fn fresh_named(&mut self, name: &str) -> Var {
        self.fresh(&Var::named(name))
    }

    /// A substitution mapping each of `vars` to a fresh variable.
    pub fn renaming<'a>(&mut self, vars: impl IntoIterator<Item = &'a Var>) -> (Substitution, BTreeMap<Var, Var>) {
        let mut map = BTreeMap::new();
        for v in vars {
            let w = self.fresh(v);
            map.insert(v.clone(), w);
        }
        let sub = Substitution::from_pairs(map.iter().map(|(v, w)| (v.clone(), Term::Var(w.clone()))));
        (sub, map)
    }

    pub fn rename_clause(&mut self, c: &Clause) -> Clause {
        let (sub, _) = self.renaming(&c.vars());
        sub.apply_clause(c)
    }

    /// Renames the universal variables of a denial.
    pub fn rename_denial(&mut self, d: &Denial) -> Denial {
        let (sub, map) = self.renaming(&d.universal);
        Denial {
            universal: map.into_values().collect::<BTreeSet<_>>(),
            body: d.body.iter().map(|l| sub.apply_literal(l)).collect(),
        }
    }
}
