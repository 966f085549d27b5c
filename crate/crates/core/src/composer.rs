//! Meta-theories relating source facts, repaired facts and repair actions.
//!
//! The plain composer is
//!
//! ```text
//! fact(X) <- db(X) & ~retract(X)
//! fact(X) <- insert(X)
//! <- insert(X) & db(X)
//! <- retract(X) & ~db(X)
//! ```
//!
//! with `insert` and `retract` abducible. Source and timestamp variants extend
//! it with provenance and event-calculus clauses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::logic::{
    simplify_disequality, sym, Atom, Clause, CmpOp, Denial, Disequality, EqualityStore, Literal, Simplified,
    Substitution, Sym, Term, Var,
};
use crate::transform::{DenialTheory, Formula, DOMAIN_PREDICATE};

/// Reserved source name for facts introduced by the composer itself.
pub const COMPOSER_SOURCE: &str = "composer";

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum EventKind {
    Add,
    Del,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Event {
    pub atom: Atom,
    pub time: i64,
    pub kind: EventKind,
}

/// One source database. `facts` are untimestamped; `events` carry integer
/// timestamps and are only interpreted by the timestamp composer (additions
/// count as plain facts elsewhere).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DatabaseInstance {
    pub source_id: Sym,
    pub facts: BTreeSet<Atom>,
    pub events: Vec<Event>,
}

impl DatabaseInstance {
    pub fn new(source_id: &str, facts: impl IntoIterator<Item = Atom>) -> DatabaseInstance {
        DatabaseInstance { source_id: sym(source_id), facts: facts.into_iter().collect(), events: Vec::new() }
    }

    /// Facts plus timestamped additions.
    pub fn all_facts(&self) -> BTreeSet<Atom> {
        let mut out = self.facts.clone();
        out.extend(self.events.iter().filter(|e| e.kind == EventKind::Add).map(|e| e.atom.clone()));
        out
    }
}

/// Union of the facts of several databases.
pub fn merged_facts(dbs: &[DatabaseInstance]) -> BTreeSet<Atom> {
    dbs.iter().flat_map(DatabaseInstance::all_facts).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ComposerMode {
    Plain,
    Sources,
    Timestamps,
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum ComposeError {
    #[error("trust assigned to unknown source `{0}`")]
    UnknownSource(String),
    #[error("source name `{0}` is reserved")]
    ReservedSource(String),
    #[error("negative timestamp {time} on `{atom}`")]
    NegativeTimestamp { atom: String, time: i64 },
    #[error("deletion events need the timestamp composer (`{0}`)")]
    UntimedDeletion(String),
    #[error("predicate `{0}` is neither defined nor abducible")]
    UndeclaredPredicate(String),
    #[error("fact `{0}` is not ground")]
    NonGroundFact(String),
    #[error("grounding leaves `{0}` unbound")]
    IncompleteGrounding(String),
    #[error("grounding violates residual constraint `{0}`")]
    ResidualViolated(String),
}

/// `(P, A, IC')`: program clauses, abducible predicates, denial constraints.
#[derive(Clone, Debug)]
pub struct AbductiveTheory {
    pub program: Vec<Clause>,
    pub abducibles: BTreeSet<Sym>,
    pub constraints: Vec<Denial>,
    pub mode: ComposerMode,
    /// Predicates that may legitimately have no clauses (empty relations).
    pub extensional: BTreeSet<Sym>,
    index: BTreeMap<Sym, Vec<usize>>,
}

impl AbductiveTheory {
    pub fn new(
        program: Vec<Clause>,
        abducibles: BTreeSet<Sym>,
        constraints: Vec<Denial>,
        mode: ComposerMode,
        extensional: BTreeSet<Sym>,
    ) -> AbductiveTheory {
        let mut index: BTreeMap<Sym, Vec<usize>> = BTreeMap::new();
        for (i, c) in program.iter().enumerate() {
            debug_assert!(!abducibles.contains(&c.head.pred), "abducible {} defined by a clause", c.head.pred);
            index.entry(c.head.pred.clone()).or_default().push(i);
        }
        AbductiveTheory { program, abducibles, constraints, mode, extensional, index }
    }

    pub fn clauses(&self, pred: &str) -> impl Iterator<Item = &Clause> {
        self.index.get(pred).into_iter().flatten().map(|&i| &self.program[i])
    }

    pub fn clause_count(&self, pred: &str) -> usize {
        self.index.get(pred).map_or(0, Vec::len)
    }

    pub fn is_abducible(&self, pred: &str) -> bool {
        self.abducibles.contains(pred)
    }

    pub fn is_defined(&self, pred: &str) -> bool {
        self.index.contains_key(pred)
    }

    /// Every body predicate must be defined, abducible, or extensional.
    pub fn validate(&self) -> Result<(), ComposeError> {
        let check = |l: &Literal| -> Result<(), ComposeError> {
            match l.atom() {
                Some(a)
                    if !self.is_defined(&a.pred)
                        && !self.is_abducible(&a.pred)
                        && !self.extensional.contains(&a.pred) =>
                {
                    Err(ComposeError::UndeclaredPredicate(a.pred.to_string()))
                }
                _ => Ok(()),
            }
        };
        for c in &self.program {
            c.body.iter().try_for_each(check)?;
        }
        for d in &self.constraints {
            d.body.iter().try_for_each(check)?;
        }
        Ok(())
    }
}

impl PartialEq for AbductiveTheory {
    fn eq(&self, other: &Self) -> bool {
        self.program == other.program
            && self.abducibles == other.abducibles
            && self.constraints == other.constraints
            && self.mode == other.mode
    }
}

impl fmt::Display for AbductiveTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.program {
            writeln!(f, "{c}.")?;
        }
        for d in &self.constraints {
            writeln!(f, "{d}.")?;
        }
        Ok(())
    }
}

fn var(name: &str) -> Term {
    Term::var(name)
}

fn atom(pred: &str, args: Vec<Term>) -> Atom {
    Atom::new(pred, args)
}

fn pos(pred: &str, args: Vec<Term>) -> Literal {
    Literal::Pos(atom(pred, args))
}

fn neg(pred: &str, args: Vec<Term>) -> Literal {
    Literal::Neg(atom(pred, args))
}

fn abducibles(names: &[&str]) -> BTreeSet<Sym> {
    names.iter().map(|n| sym(n)).collect()
}

fn active_domain(facts: &BTreeSet<Atom>, ics: &DenialTheory) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for a in facts {
        a.args.iter().for_each(|t| t.collect_consts(&mut out));
    }
    let mut visit = |body: &[Literal]| {
        for l in body {
            let mut lits = BTreeSet::new();
            match l {
                Literal::Pos(a) | Literal::Neg(a) => match (&*a.pred, a.args.as_slice()) {
                    ("fact", [inner]) => match Atom::from_term(inner) {
                        Some(inner) => inner.args.iter().for_each(|t| t.collect_consts(&mut lits)),
                        None => inner.collect_consts(&mut lits),
                    },
                    _ => a.args.iter().for_each(|t| t.collect_consts(&mut lits)),
                },
                Literal::Eq(s, t) | Literal::Neq(s, t) | Literal::Cmp(_, s, t) => {
                    s.collect_consts(&mut lits);
                    t.collect_consts(&mut lits);
                }
            }
            out.extend(lits);
        }
    };
    ics.denials.iter().for_each(|d| visit(&d.body));
    ics.auxiliary_clauses.iter().for_each(|c| visit(&c.body));
    out
}

fn domain_clauses(facts: &BTreeSet<Atom>, ics: &DenialTheory) -> Vec<Clause> {
    if !ics.uses_predicate(DOMAIN_PREDICATE) {
        return Vec::new();
    }
    active_domain(facts, ics).into_iter().map(|c| Clause::fact(atom(DOMAIN_PREDICATE, vec![c]))).collect()
}

fn check_ground(facts: &BTreeSet<Atom>) -> Result<(), ComposeError> {
    match facts.iter().find(|a| !a.is_ground()) {
        Some(a) => Err(ComposeError::NonGroundFact(a.to_string())),
        None => Ok(()),
    }
}

/// The plain composer over the union of the databases. `ics` must already be
/// rewritten to fact level.
pub fn compose(databases: &[DatabaseInstance], ics: &DenialTheory) -> Result<AbductiveTheory, ComposeError> {
    for db in databases {
        if let Some(e) = db.events.iter().find(|e| e.kind == EventKind::Del) {
            return Err(ComposeError::UntimedDeletion(e.atom.to_string()));
        }
    }
    let facts = merged_facts(databases);
    check_ground(&facts)?;
    let mut program: Vec<Clause> = facts.iter().map(|a| Clause::fact(atom("db", vec![a.to_term()]))).collect();
    program.push(Clause::new(
        atom("fact", vec![var("X")]),
        vec![pos("db", vec![var("X")]), neg("retract", vec![var("X")])],
    ));
    program.push(Clause::new(atom("fact", vec![var("X")]), vec![pos("insert", vec![var("X")])]));
    program.extend(ics.auxiliary_clauses.iter().cloned());
    program.extend(domain_clauses(&facts, ics));

    let mut constraints = ics.denials.clone();
    constraints.push(Denial::closed(vec![pos("insert", vec![var("X")]), pos("db", vec![var("X")])]));
    constraints.push(Denial::closed(vec![pos("retract", vec![var("X")]), neg("db", vec![var("X")])]));

    let extensional = abducibles(&["db", DOMAIN_PREDICATE]);
    let theory = AbductiveTheory::new(
        program,
        abducibles(&["insert", "retract"]),
        constraints,
        ComposerMode::Plain,
        extensional,
    );
    theory.validate()?;
    Ok(theory)
}

/// Renames `fact(p)` atoms with `f`, leaving other literals untouched.
fn map_fact_atoms(body: &[Literal], f: &mut impl FnMut(&Term, bool) -> Literal) -> Vec<Literal> {
    body.iter()
        .map(|l| match l {
            Literal::Pos(a) if &*a.pred == "fact" && a.arity() == 1 => f(&a.args[0], true),
            Literal::Neg(a) if &*a.pred == "fact" && a.arity() == 1 => f(&a.args[0], false),
            other => other.clone(),
        })
        .collect()
}

/// Source-annotated composer. Facts keep their origin in `db(X, S)`, inserted
/// facts are attributed to the composer, and for every constraint with two or
/// more positive facts a trust denial forbids keeping a fact that conflicts
/// with a fact from a strictly more trusted source.
pub fn compose_with_sources(
    databases: &[DatabaseInstance],
    ics: &DenialTheory,
    trust: &BTreeMap<Sym, i64>,
) -> Result<AbductiveTheory, ComposeError> {
    let known: BTreeSet<&Sym> = databases.iter().map(|d| &d.source_id).collect();
    if let Some(db) = databases.iter().find(|d| &*d.source_id == COMPOSER_SOURCE) {
        return Err(ComposeError::ReservedSource(db.source_id.to_string()));
    }
    if let Some(s) = trust.keys().find(|s| !known.contains(s)) {
        return Err(ComposeError::UnknownSource(s.to_string()));
    }
    let mut program = Vec::new();
    let mut all = BTreeSet::new();
    for db in databases {
        if let Some(e) = db.events.iter().find(|e| e.kind == EventKind::Del) {
            return Err(ComposeError::UntimedDeletion(e.atom.to_string()));
        }
        let facts = db.all_facts();
        check_ground(&facts)?;
        for a in &facts {
            let c = Clause::fact(atom("db", vec![a.to_term(), Term::Const(db.source_id.clone())]));
            if !program.contains(&c) {
                program.push(c);
            }
        }
        all.extend(facts);
    }
    let (x, s) = (var("X"), var("S"));
    program.push(Clause::new(
        atom("fact", vec![x.clone(), s.clone()]),
        vec![pos("db", vec![x.clone(), s.clone()]), neg("retract", vec![x.clone()])],
    ));
    program.push(Clause::new(
        atom("fact", vec![x.clone(), Term::constant(COMPOSER_SOURCE)]),
        vec![pos("insert", vec![x.clone()])],
    ));
    program.push(Clause::new(atom("holds", vec![x.clone()]), vec![pos("fact", vec![x.clone(), s.clone()])]));
    program.push(Clause::new(atom("in_db", vec![x.clone()]), vec![pos("db", vec![x.clone(), s.clone()])]));
    for (src, amount) in trust {
        program.push(Clause::fact(atom("trust", vec![Term::Const(src.clone()), Term::Int(*amount)])));
    }
    let (s0, a0, a) = (var("S0"), var("A0"), var("A"));
    program.push(Clause::new(
        atom("more_trusted", vec![s0.clone(), s.clone()]),
        vec![
            pos("trust", vec![s0.clone(), a0.clone()]),
            pos("trust", vec![s.clone(), a.clone()]),
            Literal::Cmp(CmpOp::Gt, a0, a),
        ],
    ));
    let mut to_holds = |t: &Term, positive: bool| {
        let at = atom("holds", vec![t.clone()]);
        if positive {
            Literal::Pos(at)
        } else {
            Literal::Neg(at)
        }
    };
    for c in &ics.auxiliary_clauses {
        program.push(Clause::new(c.head.clone(), map_fact_atoms(&c.body, &mut to_holds)));
    }
    program.extend(domain_clauses(&all, ics));

    let mut constraints = Vec::new();
    for d in &ics.denials {
        constraints.push(Denial::new(d.universal.clone(), map_fact_atoms(&d.body, &mut to_holds)));
        constraints.extend(trust_denials(d));
    }
    constraints.push(Denial::closed(vec![pos("insert", vec![x.clone()]), pos("db", vec![x.clone(), s.clone()])]));
    constraints.push(Denial::closed(vec![pos("retract", vec![x.clone()]), neg("in_db", vec![x])]));

    let extensional = abducibles(&["db", "trust", DOMAIN_PREDICATE]);
    let theory = AbductiveTheory::new(
        program,
        abducibles(&["insert", "retract"]),
        constraints,
        ComposerMode::Sources,
        extensional,
    );
    theory.validate()?;
    Ok(theory)
}

/// For each ordered pair of positive facts in a conflict-defining denial:
/// `<- fact(p_i, S) & db(p_j, S0) & ... & S != S0 & more_trusted(S0, S)`.
fn trust_denials(d: &Denial) -> Vec<Denial> {
    let positions: Vec<usize> = d
        .body
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Literal::Pos(a) if &*a.pred == "fact" && a.arity() == 1))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    if positions.len() < 2 {
        return out;
    }
    let fresh = |name: &str, d: &Denial| {
        let mut k = 0;
        loop {
            let v = Var::named(&if k == 0 { name.to_string() } else { format!("{name}{k}") });
            if !d.body_vars().contains(&v) {
                return v;
            }
            k += 1;
        }
    };
    let s = fresh("S", d);
    let s0 = fresh("S0", d);
    for &i in &positions {
        for &j in &positions {
            if i == j {
                continue;
            }
            let mut body = Vec::new();
            for (k, l) in d.body.iter().enumerate() {
                let inner = match l {
                    Literal::Pos(a) if positions.contains(&k) => a.args[0].clone(),
                    other => {
                        body.push(
                            map_fact_atoms(std::slice::from_ref(other), &mut |t, p| {
                                let at = atom("holds", vec![t.clone()]);
                                if p {
                                    Literal::Pos(at)
                                } else {
                                    Literal::Neg(at)
                                }
                            })
                            .remove(0),
                        );
                        continue;
                    }
                };
                if k == i {
                    body.push(pos("fact", vec![inner, Term::Var(s.clone())]));
                } else if k == j {
                    body.push(pos("db", vec![inner, Term::Var(s0.clone())]));
                } else {
                    body.push(pos("holds", vec![inner]));
                }
            }
            body.push(Literal::Neq(Term::Var(s.clone()), Term::Var(s0.clone())));
            body.push(pos("more_trusted", vec![Term::Var(s0.clone()), Term::Var(s.clone())]));
            let mut universal = d.universal.clone();
            universal.insert(s.clone());
            universal.insert(s0.clone());
            out.push(Denial::new(universal, body));
        }
    }
    out
}

/// Event-calculus composer. Untimestamped facts hold initially; events are
/// `add_db`/`del_db` records. Each constraint is checked at time 0 and right
/// after every event touching one of its predicates. Repair actions are
/// timestamped with one of the known time points.
pub fn compose_with_timestamps(
    databases: &[DatabaseInstance],
    ics: &DenialTheory,
) -> Result<AbductiveTheory, ComposeError> {
    let mut program = Vec::new();
    let mut times = BTreeSet::from([0i64]);
    let mut initial = BTreeSet::new();
    let mut events = BTreeSet::new();
    for db in databases {
        check_ground(&db.facts)?;
        initial.extend(db.facts.iter().cloned());
        for e in &db.events {
            if e.time < 0 {
                return Err(ComposeError::NegativeTimestamp { atom: e.atom.to_string(), time: e.time });
            }
            if !e.atom.is_ground() {
                return Err(ComposeError::NonGroundFact(e.atom.to_string()));
            }
            times.insert(e.time);
            events.insert(e.clone());
        }
    }
    for a in &initial {
        program.push(Clause::fact(atom("initially", vec![a.to_term()])));
    }
    for e in &events {
        let pred = if e.kind == EventKind::Add { "add_db" } else { "del_db" };
        program.push(Clause::fact(atom(pred, vec![e.atom.to_term(), Term::Int(e.time)])));
    }
    for t in &times {
        program.push(Clause::fact(atom("time", vec![Term::Int(*t)])));
    }
    let (p, t, e, c) = (var("P"), var("T"), var("E"), var("C"));
    program.push(Clause::new(
        atom("holds_at", vec![p.clone(), t.clone()]),
        vec![pos("initially", vec![p.clone()]), neg("clipped", vec![Term::Int(0), p.clone(), t.clone()])],
    ));
    program.push(Clause::new(
        atom("holds_at", vec![p.clone(), t.clone()]),
        vec![
            pos("add", vec![p.clone(), e.clone()]),
            Literal::Cmp(CmpOp::Lt, e.clone(), t.clone()),
            neg("clipped", vec![e.clone(), p.clone(), t.clone()]),
        ],
    ));
    program.push(Clause::new(
        atom("clipped", vec![e.clone(), p.clone(), t.clone()]),
        vec![
            pos("del", vec![p.clone(), c.clone()]),
            Literal::Cmp(CmpOp::Le, e.clone(), c.clone()),
            Literal::Cmp(CmpOp::Lt, c.clone(), t.clone()),
        ],
    ));
    program.push(Clause::new(atom("add", vec![p.clone(), t.clone()]), vec![pos("add_db", vec![p.clone(), t.clone()])]));
    program.push(Clause::new(
        atom("add", vec![p.clone(), t.clone()]),
        vec![pos("time", vec![t.clone()]), pos("insert", vec![p.clone(), t.clone()])],
    ));
    program.push(Clause::new(atom("del", vec![p.clone(), t.clone()]), vec![pos("del_db", vec![p.clone(), t.clone()])]));
    program.push(Clause::new(
        atom("del", vec![p.clone(), t.clone()]),
        vec![pos("time", vec![t.clone()]), pos("retract", vec![p.clone(), t.clone()])],
    ));

    let mut constraints = vec![
        Denial::closed(vec![pos("insert", vec![p.clone(), t.clone()]), pos("retract", vec![p.clone(), t.clone()])]),
        Denial::closed(vec![pos("insert", vec![p.clone(), t.clone()]), pos("add_db", vec![p.clone(), t.clone()])]),
        Denial::closed(vec![pos("retract", vec![p.clone(), t.clone()]), pos("del_db", vec![p.clone(), t.clone()])]),
    ];

    // Time-indexed auxiliaries take the time point as an extra last argument.
    let time_var = Var::named("T_");
    let tv = Term::Var(time_var.clone());
    let timed = |body: &[Literal]| -> Vec<Literal> {
        body.iter()
            .map(|l| {
                l.map_atom(&mut |a| {
                    if &*a.pred == "fact" && a.arity() == 1 {
                        atom("holds_at", vec![a.args[0].clone(), tv.clone()])
                    } else if ics.fresh_predicates.contains(&a.pred) {
                        let mut args = a.args.clone();
                        args.push(tv.clone());
                        Atom { pred: a.pred.clone(), args }
                    } else {
                        a.clone()
                    }
                })
            })
            .collect()
    };
    for cl in &ics.auxiliary_clauses {
        let mut head = cl.head.clone();
        head.args.push(tv.clone());
        program.push(Clause::new(head, timed(&cl.body)));
    }
    let all_facts: BTreeSet<Atom> = initial.iter().cloned().chain(events.iter().map(|e| e.atom.clone())).collect();
    program.extend(domain_clauses(&all_facts, ics));

    for (k, d) in ics.denials.iter().enumerate() {
        let ic = format!("ic_{}", k + 1);
        program.push(Clause::new(atom(&ic, vec![tv.clone()]), timed(&d.body)));
        let mut preds = BTreeMap::new();
        collect_fact_predicates(&d.body, &mut preds);
        for cl in &ics.auxiliary_clauses {
            collect_fact_predicates(&cl.body, &mut preds);
        }
        for (pred, arity) in preds {
            let pattern = Term::app(&pred, (0..arity).map(|i| var(&format!("Any{i}"))).collect());
            for event in ["add_db", "insert", "del_db", "retract"] {
                constraints.push(Denial::closed(vec![
                    pos(event, vec![pattern.clone(), t.clone()]),
                    Literal::Eq(var("NT"), Term::app("+", vec![t.clone(), Term::Int(1)])),
                    pos(&ic, vec![var("NT")]),
                ]));
            }
        }
        constraints.push(Denial::closed(vec![pos(&ic, vec![Term::Int(0)])]));
    }

    let extensional = abducibles(&["initially", "add_db", "del_db", "time", DOMAIN_PREDICATE]);
    let theory = AbductiveTheory::new(
        program,
        abducibles(&["insert", "retract"]),
        constraints,
        ComposerMode::Timestamps,
        extensional,
    );
    theory.validate()?;
    Ok(theory)
}

fn collect_fact_predicates(body: &[Literal], out: &mut BTreeMap<Sym, usize>) {
    for l in body {
        if let Some(a) = l.atom() {
            if &*a.pred == "fact" && a.arity() == 1 {
                if let Some(inner) = Atom::from_term(&a.args[0]) {
                    out.insert(inner.pred.clone(), inner.arity());
                }
            }
        }
    }
}

/// `(Insert, Retract)` with possibly non-ground members. A non-ground repair
/// stands for all its groundings that satisfy `residual`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Repair {
    pub insert: BTreeSet<Atom>,
    pub retract: BTreeSet<Atom>,
    pub residual: Vec<Disequality>,
}

impl Repair {
    pub fn new(insert: impl IntoIterator<Item = Atom>, retract: impl IntoIterator<Item = Atom>) -> Repair {
        Repair { insert: insert.into_iter().collect(), retract: retract.into_iter().collect(), residual: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.insert.len() + self.retract.len()
    }

    pub fn is_ground(&self) -> bool {
        self.insert.iter().chain(&self.retract).all(Atom::is_ground)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for a in self.insert.iter().chain(&self.retract) {
            a.args.iter().for_each(|t| t.vars_ordered(&mut out));
        }
        out
    }

    /// Renames variables to `_V1, _V2, ...` in a renaming-independent order,
    /// so equal repairs from different derivations compare equal.
    pub fn canonical(&self) -> Repair {
        let vars = self.vars();
        if vars.is_empty() {
            let mut r = self.clone();
            r.residual.sort();
            r.residual.dedup();
            return r;
        }
        let blank = Substitution::from_pairs(vars.iter().map(|v| (v.clone(), Term::var("_"))));
        let key = |a: &Atom| (blank.apply_atom(a).to_string(), a.clone());
        let mut ordered: Vec<(bool, Atom)> = Vec::new();
        let mut ins: Vec<&Atom> = self.insert.iter().collect();
        ins.sort_by_key(|a| key(a));
        let mut ret: Vec<&Atom> = self.retract.iter().collect();
        ret.sort_by_key(|a| key(a));
        ordered.extend(ins.into_iter().map(|a| (true, a.clone())));
        ordered.extend(ret.into_iter().map(|a| (false, a.clone())));
        let mut seen = Vec::new();
        for (_, a) in &ordered {
            a.args.iter().for_each(|t| t.vars_ordered(&mut seen));
        }
        let sub = Substitution::renaming(
            seen.iter().enumerate().map(|(i, v)| (v.clone(), Var::named(&format!("_V{}", i + 1)))),
        );
        let mut residual: Vec<Disequality> = self
            .residual
            .iter()
            .map(|d| Disequality { universal: d.universal.clone(), lhs: sub.apply(&d.lhs), rhs: sub.apply(&d.rhs) })
            .collect();
        residual.sort();
        residual.dedup();
        Repair {
            insert: self.insert.iter().map(|a| sub.apply_atom(a)).collect(),
            retract: self.retract.iter().map(|a| sub.apply_atom(a)).collect(),
            residual,
        }
    }

    /// Ground instance under `grounding`, if every variable is bound and the
    /// residual constraints hold.
    pub fn ground(&self, grounding: &Substitution) -> Result<Repair, ComposeError> {
        for v in self.vars() {
            if !grounding.apply(&Term::Var(v.clone())).is_ground() {
                return Err(ComposeError::IncompleteGrounding(v.to_string()));
            }
        }
        for d in &self.residual {
            let inst = Disequality {
                universal: d.universal.clone(),
                lhs: grounding.apply(&d.lhs),
                rhs: grounding.apply(&d.rhs),
            };
            if matches!(simplify_disequality(&Substitution::new(), &inst), Simplified::False) {
                return Err(ComposeError::ResidualViolated(d.to_string()));
            }
        }
        Ok(Repair {
            insert: self.insert.iter().map(|a| grounding.apply_atom(a)).collect(),
            retract: self.retract.iter().map(|a| grounding.apply_atom(a)).collect(),
            residual: Vec::new(),
        })
    }
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |s: &BTreeSet<Atom>| s.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
        write!(f, "({{{}}}, {{{}}})", set(&self.insert), set(&self.retract))?;
        if !self.residual.is_empty() {
            let rs: Vec<String> = self.residual.iter().map(|d| d.to_string()).collect();
            write!(f, " where {}", rs.join(", "))?;
        }
        Ok(())
    }
}

/// Strips the `insert`/`retract` wrappers from an abductive solution and keeps
/// the disequalities that mention its free variables.
pub fn solution_to_repair(delta: &[Atom], store: &EqualityStore) -> Repair {
    let sigma = store.solved();
    let mut repair = Repair::default();
    for a in delta {
        let a = sigma.apply_atom(a);
        let target = match a.args.as_slice() {
            [x] => Atom::from_term(x),
            [x, t] => Atom::from_term(x).map(|inner| Atom::timed(&inner, t.clone())),
            _ => None,
        };
        let Some(target) = target else { continue };
        match &*a.pred {
            "insert" => {
                repair.insert.insert(target);
            }
            "retract" => {
                repair.retract.insert(target);
            }
            _ => {}
        }
    }
    let vars: BTreeSet<Var> = repair.vars().into_iter().collect();
    repair.residual = store.disequalities().iter().filter(|d| !d.free_vars().is_disjoint(&vars)).cloned().collect();
    repair
}

/// `(D ∪ Insert \ Retract, IC)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RepairedDatabase {
    pub facts: BTreeSet<Atom>,
    pub constraints: Vec<Formula>,
}

pub fn apply_repair(
    databases: &[DatabaseInstance],
    constraints: &[Formula],
    repair: &Repair,
    grounding: &Substitution,
) -> Result<RepairedDatabase, ComposeError> {
    let ground = repair.ground(grounding)?;
    let mut facts = merged_facts(databases);
    facts.extend(ground.insert);
    for a in &ground.retract {
        facts.remove(a);
    }
    Ok(RepairedDatabase { facts, constraints: constraints.to_vec() })
}
