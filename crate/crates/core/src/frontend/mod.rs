//! Problem files, the end-to-end pipeline and repair reports.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

pub use parser::{parse_formula, parse_problem};

use crate::composer::{
    compose, compose_with_sources, compose_with_timestamps, AbductiveTheory, ComposeError, DatabaseInstance, Event,
    EventKind, Repair,
};
use crate::engine::{fresh_constant, Budget, Options, Stats, Strategy, TraceStep};
use crate::logic::{sym, Atom, Substitution, Term};
use crate::optimizer::{all_repairs, preferred_only, preferred_repairs, OptimizeResult, PreferenceCriterion, Status};
use crate::oracle::{self, OracleError, OracleProblem};
use crate::transform::{
    guard_unsafe, rewrite_fact_level, DenialTheory, Formula, TransformError, Transformer, DOMAIN_PREDICATE,
};

/// Facts stated before any `source` line belong to this source.
pub const DEFAULT_SOURCE: &str = "default";

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FactDecl {
    pub atom: Atom,
    pub time: Option<i64>,
    pub delete: bool,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SourceDecl {
    pub id: String,
    pub trust: Option<i64>,
    pub facts: Vec<FactDecl>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConstraintDecl {
    pub formula: Formula,
    /// Name for the auxiliary predicate when the constraint needs exactly one.
    pub alias: Option<String>,
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct ProblemOptions {
    pub criterion: Option<PreferenceCriterion>,
    pub sources: bool,
    pub timestamps: bool,
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct ProblemFile {
    pub sources: Vec<SourceDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub options: ProblemOptions,
}

impl ProblemFile {
    pub fn databases(&self) -> Vec<DatabaseInstance> {
        self.sources
            .iter()
            .map(|s| {
                let mut db = DatabaseInstance::new(&s.id, []);
                for f in &s.facts {
                    match (f.time, f.delete) {
                        (None, _) => {
                            db.facts.insert(f.atom.clone());
                        }
                        (Some(time), delete) => db.events.push(Event {
                            atom: f.atom.clone(),
                            time,
                            kind: if delete { EventKind::Del } else { EventKind::Add },
                        }),
                    }
                }
                db
            })
            .collect()
    }

    pub fn formulas(&self) -> Vec<Formula> {
        self.constraints.iter().map(|c| c.formula.clone()).collect()
    }

    pub fn trust(&self) -> BTreeMap<crate::logic::Sym, i64> {
        self.sources.iter().filter_map(|s| s.trust.map(|t| (sym(&s.id), t))).collect()
    }
}

impl fmt::Display for ProblemFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.options.criterion {
            writeln!(f, "option criterion {c}.")?;
        }
        if self.options.sources {
            writeln!(f, "option sources.")?;
        }
        if self.options.timestamps {
            writeln!(f, "option timestamps.")?;
        }
        for s in &self.sources {
            match s.trust {
                Some(t) => writeln!(f, "source {} trust {t}.", s.id)?,
                None => writeln!(f, "source {}.", s.id)?,
            }
            for fact in &s.facts {
                let kw = if fact.delete { "delete" } else { "fact" };
                match fact.time {
                    Some(t) => writeln!(f, "{kw} {} @ {t}.", fact.atom)?,
                    None => writeln!(f, "{kw} {}.", fact.atom)?,
                }
            }
        }
        for c in &self.constraints {
            match &c.alias {
                Some(a) => writeln!(f, "constraint {} as {a}.", c.formula)?,
                None => writeln!(f, "constraint {}.", c.formula)?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub criterion: PreferenceCriterion,
    pub sources: bool,
    pub timestamps: bool,
    pub budget: Budget,
    pub all_repairs: bool,
    /// Replace non-ground repairs by their instances over the active domain
    /// plus one fresh constant.
    pub ground: bool,
    pub record_trace: bool,
    /// Goal indices to force, e.g. read back from a trace.
    pub replay: Option<Vec<usize>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            criterion: PreferenceCriterion::Inclusion,
            sources: false,
            timestamps: false,
            budget: Budget::default(),
            all_repairs: false,
            ground: false,
            record_trace: false,
            replay: None,
        }
    }
}

impl RunOptions {
    /// Applies `option` lines from the problem file on top of these options.
    pub fn with_problem(mut self, problem: &ProblemFile) -> RunOptions {
        if let Some(c) = problem.options.criterion {
            self.criterion = c;
        }
        self.sources |= problem.options.sources;
        self.timestamps |= problem.options.timestamps;
        self
    }
}

/// Constraints in denial form, in the order of the file.
pub fn compile_constraints(problem: &ProblemFile) -> Result<DenialTheory, FrontendError> {
    let mut t = Transformer::new();
    t.reserve(problem.sources.iter().flat_map(|s| s.facts.iter().map(|f| f.atom.pred.clone())));
    let mut all = DenialTheory::default();
    for c in &problem.constraints {
        let guarded = guard_unsafe(&c.formula, DOMAIN_PREDICATE);
        all.extend(t.lloyd_topor(&guarded, c.alias.as_deref())?);
    }
    Ok(rewrite_fact_level(&all))
}

pub fn build_theory(problem: &ProblemFile, options: &RunOptions) -> Result<AbductiveTheory, FrontendError> {
    let ics = compile_constraints(problem)?;
    let dbs = problem.databases();
    if options.sources && options.timestamps {
        return Err(FrontendError::Usage("--sources and --timestamps cannot be combined".into()));
    }
    Ok(if options.timestamps {
        compose_with_timestamps(&dbs, &ics)?
    } else if options.sources {
        compose_with_sources(&dbs, &ics, &problem.trust())?
    } else {
        compose(&dbs, &ics)?
    })
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ReportRepair {
    pub insert: Vec<String>,
    pub retract: Vec<String>,
    #[serde(rename = "where")]
    pub residual: Vec<String>,
}

impl ReportRepair {
    pub fn from_repair(r: &Repair) -> ReportRepair {
        let strings = |s: &BTreeSet<Atom>| s.iter().map(|a| a.to_string()).collect();
        ReportRepair {
            insert: strings(&r.insert),
            retract: strings(&r.retract),
            residual: r.residual.iter().map(|d| d.to_string()).collect(),
        }
    }
}

impl fmt::Display for ReportRepair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "insert {{{}}} retract {{{}}}", self.insert.join(", "), self.retract.join(", "))?;
        if !self.residual.is_empty() {
            write!(f, " where {}", self.residual.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize)]
pub struct ReportStats {
    pub steps: u64,
    pub branches: u64,
    pub pruned: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct RepairReport {
    pub repairs: Vec<ReportRepair>,
    pub status: String,
    pub stats: ReportStats,
}

impl RepairReport {
    pub fn new(repairs: &[Repair], status: Status, stats: Stats) -> RepairReport {
        let mut repairs: Vec<ReportRepair> =
            repairs.iter().map(|r| ReportRepair::from_repair(&r.canonical())).collect();
        repairs.sort_by_key(|r| r.to_string());
        repairs.dedup();
        RepairReport {
            repairs,
            status: status.to_string(),
            stats: ReportStats { steps: stats.steps, branches: stats.branches, pruned: stats.pruned },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.repairs.iter().enumerate() {
            out.push_str(&format!("repair {}: {r}\n", i + 1));
        }
        out.push_str(&format!("status: {}\n", self.status));
        out.push_str(&format!(
            "steps: {} branches: {} pruned: {}\n",
            self.stats.steps, self.stats.branches, self.stats.pruned
        ));
        out
    }

    pub fn rendered(&self) -> BTreeSet<String> {
        self.repairs.iter().map(|r| r.to_string()).collect()
    }
}

/// Constants of the facts and constraints.
pub fn active_domain(problem: &ProblemFile) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for s in &problem.sources {
        for f in &s.facts {
            f.atom.args.iter().for_each(|t| t.collect_consts(&mut out));
        }
    }
    for c in &problem.constraints {
        c.formula.collect_consts(&mut out);
    }
    out
}

/// Instances of `r` over `values` that satisfy its residual constraints.
pub fn groundings(r: &Repair, values: &[Term]) -> Vec<Repair> {
    let vars = r.vars();
    let mut out = BTreeSet::new();
    let total = values.len().checked_pow(vars.len() as u32).unwrap_or(0);
    for mut k in 0..total {
        let mut theta = Substitution::new();
        for v in &vars {
            theta.bind(v.clone(), values[k % values.len()].clone());
            k /= values.len();
        }
        if let Ok(g) = r.ground(&theta) {
            out.insert(g);
        }
    }
    out.into_iter().collect()
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RepairReport,
    pub result: OptimizeResult,
    pub trace: Vec<TraceStep>,
}

pub fn run(problem: &ProblemFile, options: &RunOptions) -> Result<RunOutput, FrontendError> {
    let theory = build_theory(problem, options)?;
    let engine = Options {
        budget: options.budget,
        strategy: match &options.replay {
            Some(goals) => Strategy::Scripted(goals.iter().copied().collect()),
            None => Strategy::DeterministicFirst,
        },
        reuse_first: true,
        record_trace: options.record_trace,
    };
    let mut result = if options.all_repairs {
        all_repairs(&theory, engine)
    } else {
        preferred_repairs(&theory, options.criterion, engine)
    };
    if options.ground {
        let mut values: Vec<Term> = active_domain(problem).into_iter().collect();
        let domain: BTreeSet<Term> = values.iter().cloned().collect();
        values.push(fresh_constant(&domain));
        let ground: Vec<Repair> = result.repairs.iter().flat_map(|r| groundings(r, &values)).collect();
        result.repairs = if options.all_repairs { ground } else { preferred_only(options.criterion, &ground) };
    }
    let report = RepairReport::new(&result.repairs, result.status, result.stats);
    let trace = std::mem::take(&mut result.trace);
    Ok(RunOutput { report, result, trace })
}

pub fn oracle_problem(problem: &ProblemFile) -> Result<OracleProblem, FrontendError> {
    Ok(OracleProblem::from_databases(&problem.databases(), problem.formulas(), false)?)
}

/// Same report shape, computed by the brute-force oracle.
pub fn run_oracle(problem: &ProblemFile, options: &RunOptions) -> Result<RepairReport, FrontendError> {
    if options.sources || options.timestamps {
        return Err(FrontendError::Usage("the oracle supports plain databases only".into()));
    }
    let p = oracle_problem(problem)?;
    let repairs = if options.all_repairs {
        oracle::all_repairs(&p)
    } else {
        oracle::preferred_repairs_oracle(&p, options.criterion)?
    };
    Ok(RepairReport::new(&repairs, Status::Complete, Stats::default()))
}

/// Differences between the engine and the oracle, with engine repairs
/// grounded over the active domain and re-filtered for preference.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckDiff {
    pub engine_only: Vec<String>,
    pub oracle_only: Vec<String>,
}

impl CheckDiff {
    pub fn is_empty(&self) -> bool {
        self.engine_only.is_empty() && self.oracle_only.is_empty()
    }
}

pub fn check(problem: &ProblemFile, options: &RunOptions) -> Result<CheckDiff, FrontendError> {
    let options = &RunOptions { all_repairs: false, ..options.clone() };
    let expected = run_oracle(problem, options)?.rendered();
    let plain = RunOptions { ground: false, ..options.clone() };
    let out = run(problem, &plain)?;
    let values: Vec<Term> = active_domain(problem).into_iter().collect();
    let ground: Vec<Repair> = out.result.repairs.iter().flat_map(|r| groundings(r, &values)).collect();
    let engine = if options.all_repairs { ground } else { preferred_only(options.criterion, &ground) };
    let got = RepairReport::new(&engine, out.result.status, out.result.stats).rendered();
    Ok(CheckDiff {
        engine_only: got.difference(&expected).cloned().collect(),
        oracle_only: expected.difference(&got).cloned().collect(),
    })
}
