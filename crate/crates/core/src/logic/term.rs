use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// A logic variable. `id` is 0 for variables written by the user and a fresh
/// counter value for renamed copies.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var {
    pub name: Sym,
    pub id: u32,
}

impl Var {
    pub fn named(name: &str) -> Var {
        Var { name: sym(name), id: 0 }
    }

    pub fn renamed(&self, id: u32) -> Var {
        Var { name: self.name.clone(), id }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.id == 0 {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}_{}", self.name, self.id)
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(Var),
    Const(Sym),
    Int(i64),
    /// Compound term; arity is at least one. The empty functor is a tuple.
    App(Sym, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::named(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(sym(name))
    }

    /// Builds `f(args)`, collapsing to a constant when `args` is empty.
    pub fn app(functor: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Const(sym(functor))
        } else {
            Term::App(sym(functor), args)
        }
    }

    pub fn tuple(items: Vec<Term>) -> Term {
        if items.len() == 1 {
            items.into_iter().next().unwrap()
        } else {
            Term::App(sym(""), items)
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Int(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) | Term::Int(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Variables in first-occurrence order.
    pub fn vars_ordered(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Const(_) | Term::Int(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.vars_ordered(out)),
        }
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::Const(_) | Term::Int(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(v)),
        }
    }

    pub fn is_arith(&self) -> bool {
        matches!(self, Term::App(f, args) if args.len() == 2 && (&**f == "+" || &**f == "-"))
    }

    pub fn has_arith(&self) -> bool {
        match self {
            Term::App(_, args) => self.is_arith() || args.iter().any(Term::has_arith),
            _ => false,
        }
    }

    /// Evaluates `+`/`-` subterms whose operands are ground integers. Returns
    /// `None` when an arithmetic subterm is not yet evaluable.
    pub fn eval_arith(&self) -> Option<Term> {
        match self {
            Term::App(f, args) if self.is_arith() => {
                let a = args[0].eval_arith()?;
                let b = args[1].eval_arith()?;
                match (a, b) {
                    (Term::Int(x), Term::Int(y)) => {
                        Some(Term::Int(if &**f == "+" { x.checked_add(y)? } else { x.checked_sub(y)? }))
                    }
                    _ => None,
                }
            }
            Term::App(f, args) => {
                let args = args.iter().map(Term::eval_arith).collect::<Option<Vec<_>>>()?;
                Some(Term::App(f.clone(), args))
            }
            other => Some(other.clone()),
        }
    }

    /// Mentions a constant in this term.
    pub fn collect_consts(&self, out: &mut BTreeSet<Term>) {
        match self {
            Term::Var(_) => {}
            Term::Const(_) | Term::Int(_) => {
                out.insert(self.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_consts(out)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::Int(i) => write!(f, "{i}"),
            Term::App(op, args) if self.is_arith() => write!(f, "{}{}{}", args[0], op, args[1]),
            Term::App(func, args) => {
                write!(f, "{func}(")?;
                write_list(f, args)?;
                write!(f, ")")
            }
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom { pred: sym(pred), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// The atom reified as a term, as used inside `db(..)` and `fact(..)`.
    pub fn to_term(&self) -> Term {
        Term::app(&self.pred, self.args.clone())
    }

    pub fn from_term(t: &Term) -> Option<Atom> {
        match t {
            Term::Const(c) => Some(Atom { pred: c.clone(), args: vec![] }),
            Term::App(f, args) if !f.is_empty() && !t.is_arith() => Some(Atom { pred: f.clone(), args: args.clone() }),
            _ => None,
        }
    }

    /// Packs a timestamped repair action `atom @ time` into a single atom.
    pub fn timed(atom: &Atom, time: Term) -> Atom {
        Atom { pred: sym("@"), args: vec![atom.to_term(), time] }
    }

    pub fn is_timed(&self) -> bool {
        &*self.pred == "@" && self.args.len() == 2
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_timed() {
            return write!(f, "{} @ {}", self.args[0], self.args[1]);
        }
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            write_list(f, &self.args)?;
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A body element: a positive or negative atom, an (in)equality, or an
/// integer comparison.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Eq(Term, Term),
    Neq(Term, Term),
    Cmp(CmpOp, Term, Term),
}

impl Literal {
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(out),
            Literal::Eq(s, t) | Literal::Neq(s, t) | Literal::Cmp(_, s, t) => {
                s.collect_vars(out);
                t.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn atom(&self) -> Option<&Atom> {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => Some(a),
            _ => None,
        }
    }

    pub fn map_atom(&self, f: &mut impl FnMut(&Atom) -> Atom) -> Literal {
        match self {
            Literal::Pos(a) => Literal::Pos(f(a)),
            Literal::Neg(a) => Literal::Neg(f(a)),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "~{a}"),
            Literal::Eq(s, t) => write!(f, "{s} = {t}"),
            Literal::Neq(s, t) => write!(f, "{s} != {t}"),
            Literal::Cmp(op, s, t) => write!(f, "{s} {} {t}", op.symbol()),
        }
    }
}

/// `forall universal: <- body`. Body variables outside `universal` are free.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Denial {
    pub universal: BTreeSet<Var>,
    pub body: Vec<Literal>,
}

impl Denial {
    /// A denial whose every variable is universally quantified.
    pub fn closed(body: Vec<Literal>) -> Denial {
        let mut universal = BTreeSet::new();
        body.iter().for_each(|l| l.collect_vars(&mut universal));
        Denial { universal, body }
    }

    pub fn new(universal: BTreeSet<Var>, body: Vec<Literal>) -> Denial {
        Denial { universal, body }
    }

    pub fn body_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.body.iter().for_each(|l| l.collect_vars(&mut out));
        out
    }

    /// Drops universal variables that no longer occur in the body.
    pub fn tidy(mut self) -> Denial {
        let used = self.body_vars();
        self.universal.retain(|v| used.contains(v));
        self
    }
}

impl fmt::Display for Denial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.universal.is_empty() {
            write!(f, "forall ")?;
            write_list(f, &self.universal.iter().collect::<Vec<_>>())?;
            write!(f, ": ")?;
        }
        write!(f, "<-")?;
        if self.body.is_empty() {
            return write!(f, " true");
        }
        for (i, l) in self.body.iter().enumerate() {
            write!(f, "{}{l}", if i == 0 { " " } else { " & " })?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn fact(head: Atom) -> Clause {
        Clause { head, body: vec![] }
    }

    pub fn new(head: Atom, body: Vec<Literal>) -> Clause {
        Clause { head, body }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.head.vars();
        self.body.iter().for_each(|l| l.collect_vars(&mut out));
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " <-")?;
            for (i, l) in self.body.iter().enumerate() {
                write!(f, "{}{l}", if i == 0 { " " } else { " & " })?;
            }
        }
        Ok(())
    }
}
