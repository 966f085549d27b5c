use std::collections::BTreeMap;

use super::{ConstraintDecl, FactDecl, ParseError, ProblemFile, SourceDecl, DEFAULT_SOURCE};
use crate::logic::{sym, Atom, Sym, Term, Var};
use crate::optimizer::PreferenceCriterion;
use crate::transform::{is_reserved, Formula};

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Amp,
    Bar,
    Arrow,
    Tilde,
    Eq,
    Neq,
    At,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::At => "`@`".into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

fn err(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError { line: pos.line, column: pos.col, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Pos { line: ln + 1, col: i + 1 };
            let c = chars[i];
            if c == '%' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let word = |i: &mut usize| {
                let start = *i;
                while *i < chars.len() && (chars[*i].is_alphanumeric() || chars[*i] == '_') {
                    *i += 1;
                }
                chars[start..*i].iter().collect::<String>()
            };
            let tok = if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                Tok::Int(s.parse().map_err(|_| err(pos, format!("integer `{s}` out of range")))?)
            } else if c.is_lowercase() {
                Tok::Ident(word(&mut i))
            } else if c.is_uppercase() || c == '_' {
                Tok::Var(word(&mut i))
            } else {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let (t, n) = match (c, two.as_str()) {
                    (_, "->") => (Tok::Arrow, 2),
                    (_, "!=") => (Tok::Neq, 2),
                    ('(', _) => (Tok::LParen, 1),
                    (')', _) => (Tok::RParen, 1),
                    (',', _) => (Tok::Comma, 1),
                    ('.', _) => (Tok::Dot, 1),
                    (':', _) => (Tok::Colon, 1),
                    ('&', _) => (Tok::Amp, 1),
                    ('|', _) => (Tok::Bar, 1),
                    ('~', _) => (Tok::Tilde, 1),
                    ('=', _) => (Tok::Eq, 1),
                    ('@', _) => (Tok::At, 1),
                    _ => return Err(err(pos, format!("unexpected character `{c}`"))),
                };
                i += n;
                t
            };
            out.push((tok, pos));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    arities: BTreeMap<Sym, usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        let t = self.toks.get(self.at).cloned().ok_or_else(|| err(self.end, "unexpected end of input"))?;
        self.at += 1;
        Ok(t)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.next() {
            Ok((got, _)) if got == *t => Ok(()),
            Ok((got, _)) => Err(err(pos, format!("expected {}, found {}", t.describe(), got.describe()))),
            Err(_) => Err(err(pos, format!("expected {}, found end of input", t.describe()))),
        }
    }

    fn keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.next()? {
            (Tok::Ident(s), p) => Ok((s, p)),
            (t, _) => Err(err(pos, format!("expected an identifier, found {}", t.describe()))),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos();
        match self.next()? {
            (Tok::Int(i), _) => Ok(i),
            (t, _) => Err(err(pos, format!("expected an integer, found {}", t.describe()))),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let pos = self.pos();
        match self.next()? {
            (Tok::Var(v), _) => Ok(Term::Var(Var::named(&v))),
            (Tok::Int(i), _) => Ok(Term::Int(i)),
            (Tok::Ident(f), _) => {
                let args = self.args()?;
                Ok(Term::app(&f, args))
            }
            (t, _) => Err(err(pos, format!("expected a term, found {}", t.describe()))),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RParen)?;
        }
        Ok(args)
    }

    /// Registers `pred/arity`, rejecting reserved names and arity clashes.
    fn check_atom(&mut self, a: &Atom, pos: Pos) -> Result<(), ParseError> {
        if is_reserved(&a.pred) {
            return Err(err(pos, format!("predicate `{}` is reserved", a.pred)));
        }
        match self.arities.get(&a.pred) {
            Some(&n) if n != a.arity() => Err(err(
                pos,
                format!("predicate `{}` used with arity {} but earlier with arity {n}", a.pred, a.arity()),
            )),
            _ => {
                self.arities.insert(a.pred.clone(), a.arity());
                Ok(())
            }
        }
    }

    fn atom(&mut self) -> Result<(Atom, Pos), ParseError> {
        let (name, pos) = self.ident()?;
        let atom = Atom::new(&name, self.args()?);
        self.check_atom(&atom, pos)?;
        Ok((atom, pos))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut items = vec![self.conjunction()?];
        while self.eat(&Tok::Bar) {
            items.push(self.conjunction()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::Or(items) })
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut items = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::And(items) })
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(&Tok::Tilde) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.keyword("forall") || self.keyword("exists") {
            let (q, _) = self.ident()?;
            let mut vars = Vec::new();
            loop {
                let pos = self.pos();
                match self.next()? {
                    (Tok::Var(v), _) => vars.push(Var::named(&v)),
                    (t, _) => return Err(err(pos, format!("expected a variable, found {}", t.describe()))),
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::Colon)?;
            let body = Box::new(self.formula()?);
            return Ok(if q == "forall" { Formula::Forall(vars, body) } else { Formula::Exists(vars, body) });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(&Tok::RParen)?;
            return Ok(f);
        }
        if self.keyword("true") || self.keyword("false") {
            let (k, _) = self.ident()?;
            return Ok(if k == "true" { Formula::True } else { Formula::False });
        }
        let pos = self.pos();
        let is_atom_start = matches!(self.peek(), Some(Tok::Ident(_)));
        let start = self.at;
        let lhs = self.term()?;
        if self.eat(&Tok::Eq) {
            return Ok(Formula::Eq(lhs, self.term()?));
        }
        if self.eat(&Tok::Neq) {
            return Ok(Formula::neq(lhs, self.term()?));
        }
        if !is_atom_start {
            return Err(err(pos, "expected an atom, an equality or a parenthesized formula"));
        }
        self.at = start;
        let (a, _) = self.atom()?;
        Ok(Formula::Atom(a))
    }

    fn statement(&mut self, problem: &mut ProblemFile, current: &mut Option<usize>) -> Result<(), ParseError> {
        let (kw, pos) = self.ident()?;
        match kw.as_str() {
            "source" => {
                let (id, id_pos) = self.ident()?;
                let trust = if self.keyword("trust") {
                    self.ident()?;
                    Some(self.int()?)
                } else {
                    None
                };
                let index = match problem.sources.iter().position(|s| s.id == id) {
                    Some(i) => {
                        if trust.is_some() && problem.sources[i].trust.is_some() && problem.sources[i].trust != trust {
                            return Err(err(id_pos, format!("conflicting trust for source `{id}`")));
                        }
                        problem.sources[i].trust = problem.sources[i].trust.or(trust);
                        i
                    }
                    None => {
                        problem.sources.push(SourceDecl { id, trust, facts: Vec::new() });
                        problem.sources.len() - 1
                    }
                };
                *current = Some(index);
            }
            "fact" | "delete" => {
                let (atom, apos) = self.atom()?;
                if !atom.is_ground() {
                    return Err(err(apos, format!("fact `{atom}` is not ground")));
                }
                let time = if self.eat(&Tok::At) { Some(self.int()?) } else { None };
                let delete = kw == "delete";
                if delete && time.is_none() {
                    return Err(err(pos, "a deletion needs a timestamp (`@ <int>`)"));
                }
                let index = match *current {
                    Some(i) => i,
                    None => {
                        let i = match problem.sources.iter().position(|s| s.id == DEFAULT_SOURCE) {
                            Some(i) => i,
                            None => {
                                problem.sources.push(SourceDecl {
                                    id: DEFAULT_SOURCE.into(),
                                    trust: None,
                                    facts: Vec::new(),
                                });
                                problem.sources.len() - 1
                            }
                        };
                        *current = Some(i);
                        i
                    }
                };
                problem.sources[index].facts.push(FactDecl { atom, time, delete });
            }
            "constraint" => {
                let formula = self.formula()?;
                let alias = if self.keyword("as") {
                    self.ident()?;
                    let (name, npos) = self.ident()?;
                    if is_reserved(&name) || self.arities.contains_key(&sym(&name)) {
                        return Err(err(npos, format!("alias `{name}` clashes with a predicate")));
                    }
                    Some(name)
                } else {
                    None
                };
                problem.constraints.push(ConstraintDecl { formula, alias });
            }
            "option" => {
                let (name, npos) = self.ident()?;
                match name.as_str() {
                    "criterion" => {
                        let (v, vpos) = self.ident()?;
                        problem.options.criterion = Some(v.parse::<PreferenceCriterion>().map_err(|m| err(vpos, m))?);
                    }
                    "sources" => problem.options.sources = true,
                    "timestamps" => problem.options.timestamps = true,
                    _ => return Err(err(npos, format!("unknown option `{name}`"))),
                }
            }
            other => return Err(err(pos, format!("unknown statement `{other}`"))),
        }
        self.expect(&Tok::Dot)
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, ParseError> {
    let toks = lex(text)?;
    let end = Pos { line: text.lines().count().max(1), col: text.lines().last().map_or(1, |l| l.chars().count() + 1) };
    let mut p = Parser { toks, at: 0, end, arities: BTreeMap::new() };
    let mut problem = ProblemFile::default();
    let mut current = None;
    while p.peek().is_some() {
        p.statement(&mut problem, &mut current)?;
    }
    Ok(problem)
}

/// Parses a single formula, e.g. for tests and tools.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end: Pos { line: 1, col: text.len() + 1 }, arities: BTreeMap::new() };
    let f = p.formula()?;
    if p.peek().is_some() {
        return Err(err(p.pos(), "trailing input after formula"));
    }
    Ok(f)
}
