use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use repairdb::engine::TraceStep;
use repairdb::frontend::{check, run, run_oracle, FrontendError, ProblemFile, RepairReport, RunOptions};
use repairdb::{parse_problem, Budget, PreferenceCriterion};

const EXIT_CHECK_MISMATCH: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_FLOUNDERED: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "repairdb", version, about = "Compute preferred repairs of inconsistent fact databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the abductive engine on a problem file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = Budget::default().max_steps)]
        max_steps: u64,
        #[arg(long, default_value_t = Budget::default().max_delta)]
        max_delta: usize,
        /// Write the derivation trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Force the goal selections recorded in a trace file.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Compare against the brute-force oracle; exits 1 on disagreement.
        #[arg(long)]
        check: bool,
        /// Expand non-ground repairs over the active domain plus a fresh constant.
        #[arg(long)]
        ground: bool,
    },
    /// Compute repairs by brute-force model enumeration.
    Oracle {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::Args)]
struct Common {
    /// inclusion or cardinality; overrides the file's option line [default: inclusion]
    #[arg(long, value_parser = parse_criterion)]
    criterion: Option<PreferenceCriterion>,
    /// Treat sources as ranked by trust.
    #[arg(long)]
    sources: bool,
    /// Treat facts as timed events.
    #[arg(long)]
    timestamps: bool,
    /// Report every repair, not only preferred ones.
    #[arg(long)]
    all_repairs: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn parse_criterion(s: &str) -> Result<PreferenceCriterion, String> {
    s.parse().map_err(|_| format!("unknown criterion `{s}` (expected inclusion or cardinality)"))
}

fn load(path: &PathBuf) -> Result<ProblemFile, FrontendError> {
    let text = std::fs::read_to_string(path).map_err(|e| FrontendError::Usage(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| FrontendError::Usage(format!("{}:{e}", path.display())))
}

fn options(problem: &ProblemFile, common: &Common) -> RunOptions {
    let mut opts = RunOptions {
        sources: common.sources,
        timestamps: common.timestamps,
        all_repairs: common.all_repairs,
        ..RunOptions::default()
    }
    .with_problem(problem);
    if let Some(c) = common.criterion {
        opts.criterion = c;
    }
    opts
}

fn read_replay(path: &PathBuf) -> Result<Vec<usize>, FrontendError> {
    let text = std::fs::read_to_string(path).map_err(|e| FrontendError::Usage(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            TraceStep::parse(l)
                .map(|s| s.goal)
                .ok_or_else(|| FrontendError::Usage(format!("{}:{}: malformed trace line", path.display(), i + 1)))
        })
        .collect()
}

fn emit(report: &RepairReport, format: Format) {
    match format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    if report.repairs.is_empty() {
        eprintln!("warning: no repair exists; the constraints are unsatisfiable on their own");
    }
}

fn status_code(report: &RepairReport) -> u8 {
    match report.status.as_str() {
        "budget_exhausted" => EXIT_BUDGET,
        "floundered" => EXIT_FLOUNDERED,
        _ => 0,
    }
}

fn execute(cli: Cli) -> Result<u8, FrontendError> {
    match cli.command {
        Command::Run { file, common, max_steps, max_delta, trace, replay, check: do_check, ground } => {
            let problem = load(&file)?;
            let mut opts = options(&problem, &common);
            opts.budget = Budget { max_steps, max_delta };
            opts.ground = ground;
            opts.record_trace = trace.is_some();
            if let Some(path) = &replay {
                opts.replay = Some(read_replay(path)?);
            }
            let out = run(&problem, &opts)?;
            if let Some(path) = &trace {
                let text: String = out.trace.iter().map(|s| format!("{s}\n")).collect();
                std::fs::write(path, text).map_err(|e| FrontendError::Usage(format!("{}: {e}", path.display())))?;
            }
            emit(&out.report, common.format);
            let code = status_code(&out.report);
            if do_check {
                let diff = check(&problem, &opts)?;
                for r in &diff.engine_only {
                    eprintln!("check: engine only: {r}");
                }
                for r in &diff.oracle_only {
                    eprintln!("check: oracle only: {r}");
                }
                if !diff.is_empty() {
                    return Ok(EXIT_CHECK_MISMATCH);
                }
            }
            Ok(code)
        }
        Command::Oracle { file, common } => {
            let problem = load(&file)?;
            let report = run_oracle(&problem, &options(&problem, &common))?;
            emit(&report, common.format);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
