//! First-order integrity constraints and their compilation to denials.
//!
//! A constraint `F` is compiled by expanding the body of `<- ~F`: conjunctions
//! are flattened, disjunctions split the denial, existentials in positive
//! position become universally quantified body variables, and a negated
//! existential is replaced by a negated auxiliary atom defined by a fresh
//! clause.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::logic::{sym, Atom, Clause, Denial, Literal, Renamer, Substitution, Sym, Term, Var};

/// Predicates owned by the meta-theories; user constraints may not define them.
pub const RESERVED_PREDICATES: &[&str] = &[
    "db",
    "fact",
    "insert",
    "retract",
    "dom",
    "holds",
    "in_db",
    "holds_at",
    "clipped",
    "add",
    "del",
    "add_db",
    "del_db",
    "initially",
    "time",
    "trust",
    "more_trusted",
    "@",
];

pub const DOMAIN_PREDICATE: &str = "dom";

pub fn is_reserved(pred: &str) -> bool {
    RESERVED_PREDICATES.contains(&pred) || pred.starts_with("aux_") || pred.starts_with("ic_")
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Vec<Var>, Box<Formula>),
    Exists(Vec<Var>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(Atom::new(pred, args))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(vars: &[&str], body: Formula) -> Formula {
        Formula::Forall(vars.iter().map(|v| Var::named(v)).collect(), Box::new(body))
    }

    pub fn exists(vars: &[&str], body: Formula) -> Formula {
        Formula::Exists(vars.iter().map(|v| Var::named(v)).collect(), Box::new(body))
    }

    pub fn neq(s: Term, t: Term) -> Formula {
        Formula::not(Formula::Eq(s, t))
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = Vec::new();
        self.free_vars_ordered(&mut Vec::new(), &mut out);
        out.into_iter().collect()
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars_ordered(&self, bound: &mut Vec<Var>, out: &mut Vec<Var>) {
        let push_term = |t: &Term, bound: &Vec<Var>, out: &mut Vec<Var>| {
            let mut vs = Vec::new();
            t.vars_ordered(&mut vs);
            for v in vs {
                if !bound.contains(&v) && !out.contains(&v) {
                    out.push(v);
                }
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.args.iter().for_each(|t| push_term(t, bound, out)),
            Formula::Eq(s, t) => {
                push_term(s, bound, out);
                push_term(t, bound, out);
            }
            Formula::Not(f) => f.free_vars_ordered(bound, out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.free_vars_ordered(bound, out)),
            Formula::Implies(a, b) => {
                a.free_vars_ordered(bound, out);
                b.free_vars_ordered(bound, out);
            }
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.free_vars_ordered(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Universal closure over the free variables.
    pub fn closure(&self) -> Formula {
        let mut free = Vec::new();
        self.free_vars_ordered(&mut Vec::new(), &mut free);
        if free.is_empty() {
            self.clone()
        } else {
            Formula::Forall(free, Box::new(self.clone()))
        }
    }

    /// Predicate names with their arities, in first-occurrence order.
    pub fn predicates(&self, out: &mut BTreeMap<Sym, usize>) {
        match self {
            Formula::Atom(a) => {
                out.entry(a.pred.clone()).or_insert(a.arity());
            }
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.predicates(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.predicates(out)),
            Formula::Implies(a, b) => {
                a.predicates(out);
                b.predicates(out);
            }
            Formula::True | Formula::False | Formula::Eq(..) => {}
        }
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => g.visit_atoms(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_atoms(f)),
            Formula::Implies(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Formula::True | Formula::False | Formula::Eq(..) => {}
        }
    }

    pub fn collect_consts(&self, out: &mut BTreeSet<Term>) {
        match self {
            Formula::Atom(a) => a.args.iter().for_each(|t| t.collect_consts(out)),
            Formula::Eq(s, t) => {
                s.collect_consts(out);
                t.collect_consts(out);
            }
            Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => g.collect_consts(out),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.collect_consts(out)),
            Formula::Implies(a, b) => {
                a.collect_consts(out);
                b.collect_consts(out);
            }
            Formula::True | Formula::False => {}
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        let open = |f: &mut fmt::Formatter<'_>, need: bool| if need { write!(f, "(") } else { Ok(()) };
        let close = |f: &mut fmt::Formatter<'_>, need: bool| if need { write!(f, ")") } else { Ok(()) };
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Eq(s, t) => write!(f, "{s} = {t}"),
            Formula::Not(g) => match &**g {
                Formula::Eq(s, t) => write!(f, "{s} != {t}"),
                g => {
                    write!(f, "~")?;
                    g.fmt_prec(f, 3)
                }
            },
            Formula::And(gs) | Formula::Or(gs) if gs.is_empty() => {
                write!(f, "{}", if matches!(self, Formula::And(_)) { "true" } else { "false" })
            }
            Formula::And(gs) => {
                open(f, prec > 2)?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    g.fmt_prec(f, 3)?;
                }
                close(f, prec > 2)
            }
            Formula::Or(gs) => {
                open(f, prec > 1)?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    g.fmt_prec(f, 2)?;
                }
                close(f, prec > 1)
            }
            Formula::Implies(a, b) => {
                open(f, prec > 0)?;
                a.fmt_prec(f, 1)?;
                write!(f, " -> ")?;
                b.fmt_prec(f, 0)?;
                close(f, prec > 0)
            }
            Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
                open(f, prec > 0)?;
                let q = if matches!(self, Formula::Forall(..)) { "forall" } else { "exists" };
                let names: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "{q} {}: ", names.join(", "))?;
                g.fmt_prec(f, 0)?;
                close(f, prec > 0)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Denials plus the non-recursive auxiliary program they refer to.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct DenialTheory {
    pub denials: Vec<Denial>,
    pub auxiliary_clauses: Vec<Clause>,
    pub fresh_predicates: BTreeSet<Sym>,
}

impl DenialTheory {
    pub fn extend(&mut self, other: DenialTheory) {
        self.denials.extend(other.denials);
        self.auxiliary_clauses.extend(other.auxiliary_clauses);
        self.fresh_predicates.extend(other.fresh_predicates);
    }

    pub fn uses_predicate(&self, pred: &str) -> bool {
        let in_body = |body: &[Literal]| body.iter().any(|l| l.atom().is_some_and(|a| &*a.pred == pred));
        self.denials.iter().any(|d| in_body(&d.body)) || self.auxiliary_clauses.iter().any(|c| in_body(&c.body))
    }
}

impl fmt::Display for DenialTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.denials {
            writeln!(f, "{d}")?;
        }
        for c in &self.auxiliary_clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum TransformError {
    #[error("auxiliary name `{0}` clashes with an existing predicate")]
    NameClash(String),
    #[error("auxiliary program is recursive through `{0}`")]
    Recursive(String),
}

/// Compiles constraints one after another, sharing the `aux_<k>` counter so
/// fresh names are reproducible for a given input order.
#[derive(Debug)]
pub struct Transformer {
    aux_counter: usize,
    renamer: Renamer,
    taken: BTreeSet<Sym>,
}

impl Default for Transformer {
    fn default() -> Self {
        Transformer::new()
    }
}

impl Transformer {
    pub fn new() -> Transformer {
        Transformer { aux_counter: 0, renamer: Renamer::new(), taken: BTreeSet::new() }
    }

    /// Marks predicate names that fresh names and aliases must avoid.
    pub fn reserve(&mut self, preds: impl IntoIterator<Item = Sym>) {
        self.taken.extend(preds);
    }

    pub fn lloyd_topor(&mut self, ic: &Formula, alias: Option<&str>) -> Result<DenialTheory, TransformError> {
        let closed = ic.closure();
        let mut user = BTreeMap::new();
        closed.predicates(&mut user);
        self.taken.extend(user.into_keys());

        let mut job = Expansion { owner: self, seen: BTreeSet::new(), clauses: Vec::new(), fresh: Vec::new() };
        let bodies = job.expand(VecDeque::from([Formula::not(closed)]))?;
        let Expansion { mut clauses, fresh, .. } = job;
        let mut denials: Vec<Denial> = bodies.into_iter().map(Denial::closed).collect();

        let mut fresh_set: BTreeSet<Sym> = fresh.iter().cloned().collect();
        if let (Some(alias), [only]) = (alias, fresh.as_slice()) {
            let alias = sym(alias);
            if self.taken.contains(&alias) || is_reserved(&alias) {
                return Err(TransformError::NameClash(alias.to_string()));
            }
            let rename =
                |a: &Atom| if a.pred == *only { Atom { pred: alias.clone(), args: a.args.clone() } } else { a.clone() };
            for d in &mut denials {
                d.body = d.body.iter().map(|l| l.map_atom(&mut |a| rename(a))).collect();
            }
            for c in &mut clauses {
                c.head = rename(&c.head);
                c.body = c.body.iter().map(|l| l.map_atom(&mut |a| rename(a))).collect();
            }
            fresh_set = BTreeSet::from([alias.clone()]);
            self.taken.insert(alias);
        }
        check_non_recursive(&clauses, &fresh_set)?;
        Ok(DenialTheory { denials, auxiliary_clauses: clauses, fresh_predicates: fresh_set })
    }

    fn fresh_predicate(&mut self) -> Sym {
        loop {
            self.aux_counter += 1;
            let name = sym(&format!("aux_{}", self.aux_counter));
            if !self.taken.contains(&name) {
                self.taken.insert(name.clone());
                return name;
            }
        }
    }
}

/// Compiles one constraint with a private counter.
pub fn lloyd_topor(ic: &Formula) -> Result<DenialTheory, TransformError> {
    Transformer::new().lloyd_topor(ic, None)
}

struct Expansion<'a> {
    owner: &'a mut Transformer,
    seen: BTreeSet<Var>,
    clauses: Vec<Clause>,
    fresh: Vec<Sym>,
}

impl Expansion<'_> {
    /// Expands a conjunction of formulas into alternative literal
    /// conjunctions (the denial body is their disjunction).
    fn expand(&mut self, todo: VecDeque<Formula>) -> Result<Vec<Vec<Literal>>, TransformError> {
        let mut out = Vec::new();
        let mut stack = vec![(todo, Vec::new())];
        while let Some((mut todo, mut done)) = stack.pop() {
            let mut alive = true;
            while let Some(f) = todo.pop_front() {
                match f {
                    Formula::True => {}
                    Formula::False => {
                        alive = false;
                        break;
                    }
                    Formula::Atom(a) => done.push(Literal::Pos(a)),
                    Formula::Eq(s, t) => done.push(Literal::Eq(s, t)),
                    Formula::And(fs) => fs.into_iter().rev().for_each(|g| todo.push_front(g)),
                    Formula::Or(fs) => {
                        for g in fs.into_iter().rev() {
                            let mut branch = todo.clone();
                            branch.push_front(g);
                            stack.push((branch, done.clone()));
                        }
                        alive = false;
                        break;
                    }
                    Formula::Implies(a, b) => todo.push_front(Formula::Or(vec![Formula::Not(a), *b])),
                    Formula::Exists(vs, g) => {
                        let g = self.open_binder(&vs, *g);
                        todo.push_front(g);
                    }
                    Formula::Forall(vs, g) => {
                        todo.push_front(Formula::not(Formula::Exists(vs, Box::new(Formula::not(*g)))))
                    }
                    Formula::Not(g) => match *g {
                        Formula::True => {
                            alive = false;
                            break;
                        }
                        Formula::False => {}
                        Formula::Atom(a) => done.push(Literal::Neg(a)),
                        Formula::Eq(s, t) => done.push(Literal::Neq(s, t)),
                        Formula::Not(h) => todo.push_front(*h),
                        Formula::And(fs) => todo.push_front(Formula::Or(fs.into_iter().map(Formula::not).collect())),
                        Formula::Or(fs) => todo.push_front(Formula::And(fs.into_iter().map(Formula::not).collect())),
                        Formula::Implies(a, b) => todo.push_front(Formula::And(vec![*a, Formula::Not(b)])),
                        Formula::Forall(vs, h) => todo.push_front(Formula::Exists(vs, Box::new(Formula::not(*h)))),
                        Formula::Exists(vs, h) => {
                            let atom = self.auxiliary(vs, *h)?;
                            done.push(Literal::Neg(atom));
                        }
                    },
                }
            }
            if alive {
                out.push(done);
            }
        }
        Ok(out)
    }

    /// Keeps binder names unless they were already used in this constraint.
    fn open_binder(&mut self, vs: &[Var], body: Formula) -> Formula {
        let mut pairs = Vec::new();
        for v in vs {
            if self.seen.contains(v) {
                let w = self.owner.renamer.fresh(v);
                pairs.push((v.clone(), w.clone()));
                self.seen.insert(w);
            } else {
                self.seen.insert(v.clone());
            }
        }
        if pairs.is_empty() {
            body
        } else {
            rename_free(&body, &pairs.into_iter().collect())
        }
    }

    fn auxiliary(&mut self, vs: Vec<Var>, body: Formula) -> Result<Atom, TransformError> {
        let ex = Formula::Exists(vs.clone(), Box::new(body.clone()));
        let mut head_vars = Vec::new();
        ex.free_vars_ordered(&mut Vec::new(), &mut head_vars);
        let pred = self.owner.fresh_predicate();
        self.fresh.push(pred.clone());
        let head = Atom { pred, args: head_vars.into_iter().map(Term::Var).collect() };
        let body = self.open_binder(&vs, body);
        for lits in self.expand(VecDeque::from([body]))? {
            self.clauses.push(Clause::new(head.clone(), lits));
        }
        Ok(head)
    }
}

/// Renames free occurrences; inner binders of the same name shadow.
fn rename_free(f: &Formula, map: &BTreeMap<Var, Var>) -> Formula {
    let sub = Substitution::from_pairs(map.iter().map(|(v, w)| (v.clone(), Term::Var(w.clone()))));
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(a) => Formula::Atom(sub.apply_atom(a)),
        Formula::Eq(s, t) => Formula::Eq(sub.apply(s), sub.apply(t)),
        Formula::Not(g) => Formula::not(rename_free(g, map)),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| rename_free(g, map)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| rename_free(g, map)).collect()),
        Formula::Implies(a, b) => Formula::implies(rename_free(a, map), rename_free(b, map)),
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let mut inner = map.clone();
            vs.iter().for_each(|v| {
                inner.remove(v);
            });
            let g = Box::new(rename_free(g, &inner));
            if matches!(f, Formula::Forall(..)) {
                Formula::Forall(vs.clone(), g)
            } else {
                Formula::Exists(vs.clone(), g)
            }
        }
    }
}

/// Rejects auxiliary programs with a dependency cycle among `defined`.
pub fn check_non_recursive(clauses: &[Clause], defined: &BTreeSet<Sym>) -> Result<(), TransformError> {
    let mut deps: BTreeMap<&Sym, BTreeSet<&Sym>> = BTreeMap::new();
    for c in clauses {
        let entry = deps.entry(&c.head.pred).or_default();
        for l in &c.body {
            if let Some(a) = l.atom() {
                if defined.contains(&a.pred) || a.pred == c.head.pred {
                    entry.insert(&a.pred);
                }
            }
        }
    }
    fn visit<'a>(
        p: &'a Sym,
        deps: &BTreeMap<&'a Sym, BTreeSet<&'a Sym>>,
        path: &mut Vec<&'a Sym>,
        done: &mut BTreeSet<&'a Sym>,
    ) -> Result<(), TransformError> {
        if path.contains(&p) {
            return Err(TransformError::Recursive(p.to_string()));
        }
        if done.contains(p) {
            return Ok(());
        }
        path.push(p);
        for q in deps.get(p).into_iter().flatten() {
            visit(q, deps, path, done)?;
        }
        path.pop();
        done.insert(p);
        Ok(())
    }
    let mut done = BTreeSet::new();
    for p in deps.keys() {
        visit(p, &deps, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}

/// Whether `f`, placed as a conjunct of a rule body, binds `x` through a
/// positive literal (or an equality with a variable-free term).
fn covers(x: &Var, f: &Formula) -> bool {
    match f {
        Formula::Atom(a) => a.args.iter().any(|t| t.contains_var(x)),
        Formula::Eq(s, t) => {
            (*s == Term::Var(x.clone()) && t.vars().is_empty()) || (*t == Term::Var(x.clone()) && s.vars().is_empty())
        }
        Formula::Not(g) => covers_neg(x, g),
        Formula::And(gs) => gs.iter().any(|g| covers(x, g)),
        Formula::Or(gs) => !gs.is_empty() && gs.iter().all(|g| covers(x, g)),
        Formula::Implies(a, b) => covers_neg(x, a) && covers(x, b),
        Formula::Exists(vs, g) => !vs.contains(x) && covers(x, g),
        Formula::Forall(..) | Formula::True | Formula::False => false,
    }
}

/// `covers(x, ~f)`.
fn covers_neg(x: &Var, f: &Formula) -> bool {
    match f {
        Formula::Not(g) => covers(x, g),
        Formula::And(gs) => !gs.is_empty() && gs.iter().all(|g| covers_neg(x, g)),
        Formula::Or(gs) => gs.iter().any(|g| covers_neg(x, g)),
        Formula::Implies(a, b) => covers(x, a) || covers_neg(x, b),
        Formula::Forall(vs, g) => !vs.contains(x) && covers_neg(x, g),
        Formula::Atom(_) | Formula::Eq(..) | Formula::Exists(..) | Formula::True | Formula::False => false,
    }
}

/// Guards quantified variables that would otherwise flounder with the unary
/// domain predicate. Safe formulas come back unchanged (up to universal
/// closure of free variables).
pub fn guard_unsafe(ic: &Formula, domain_predicate: &str) -> Formula {
    guard(&ic.closure(), domain_predicate)
}

fn guard(f: &Formula, dom: &str) -> Formula {
    let guard_atoms =
        |vs: &[Var]| vs.iter().map(|v| Formula::atom(dom, vec![Term::Var(v.clone())])).collect::<Vec<_>>();
    match f {
        Formula::True | Formula::False | Formula::Atom(_) | Formula::Eq(..) => f.clone(),
        Formula::Not(g) => Formula::not(guard(g, dom)),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| guard(g, dom)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| guard(g, dom)).collect()),
        Formula::Implies(a, b) => Formula::implies(guard(a, dom), guard(b, dom)),
        Formula::Forall(vs, g) => {
            let unsafe_vars: Vec<Var> = vs.iter().filter(|v| !covers_neg(v, g)).cloned().collect();
            let inner = guard(g, dom);
            if unsafe_vars.is_empty() {
                return Formula::Forall(vs.clone(), Box::new(inner));
            }
            let mut guards = guard_atoms(&unsafe_vars);
            let premise = if guards.len() == 1 { guards.pop().unwrap() } else { Formula::And(guards) };
            Formula::Forall(vs.clone(), Box::new(Formula::implies(premise, inner)))
        }
        Formula::Exists(vs, g) => {
            let unsafe_vars: Vec<Var> = vs.iter().filter(|v| !covers(v, g)).cloned().collect();
            let inner = guard(g, dom);
            if unsafe_vars.is_empty() {
                return Formula::Exists(vs.clone(), Box::new(inner));
            }
            let mut parts = guard_atoms(&unsafe_vars);
            parts.push(inner);
            Formula::Exists(vs.clone(), Box::new(Formula::And(parts)))
        }
    }
}

/// Wraps every user-predicate atom `p(t)` as `fact(p(t))`. Fresh predicates,
/// the domain predicate and (in)equalities are left alone.
pub fn rewrite_fact_level(theory: &DenialTheory) -> DenialTheory {
    let keep = |a: &Atom| theory.fresh_predicates.contains(&a.pred) || &*a.pred == DOMAIN_PREDICATE;
    let mut wrap = |a: &Atom| if keep(a) { a.clone() } else { Atom::new("fact", vec![a.to_term()]) };
    DenialTheory {
        denials: theory
            .denials
            .iter()
            .map(|d| Denial {
                universal: d.universal.clone(),
                body: d.body.iter().map(|l| l.map_atom(&mut wrap)).collect(),
            })
            .collect(),
        auxiliary_clauses: theory
            .auxiliary_clauses
            .iter()
            .map(|c| Clause::new(c.head.clone(), c.body.iter().map(|l| l.map_atom(&mut wrap)).collect()))
            .collect(),
        fresh_predicates: theory.fresh_predicates.clone(),
    }
}
