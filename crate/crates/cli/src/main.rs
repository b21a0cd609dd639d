//! `sqrtreg`: solve, benchmark and self-check square-root regularized regression.

mod bench;
mod error;
mod problem;
mod record;
mod run;

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use sqrtreg::data::Example;
use sqrtreg::verify::{run_all, Family};

use error::{CliError, Result};
use problem::Source;
use record::{render_row, render_table, RunRecord};
use run::{Cell, LambdaChoice, PenaltyKind, SolverKind};

#[derive(Parser)]
#[command(name = "sqrtreg", version, about = "Square-root regularized regression with sparse group and fused Lasso penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and print a table row.
    Solve(SolveArgs),
    /// Run every cell of a manifest in parallel.
    Bench(BenchArgs),
    /// Run the oracle and identity checks.
    Verify(VerifyArgs),
    /// Render a results file as a table.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Ex1,
    Ex2,
    Ex3,
}

#[derive(Args)]
struct SolveArgs {
    /// Data file: `.csv` (header, last column is the response) or sparse text format.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    synthetic: Option<ExampleArg>,
    /// Number of samples of a synthetic example.
    #[arg(long = "N", default_value_t = 1000)]
    n_samples: usize,
    /// Groups: `n = 3g` for synthetic data, random groups for files (default 300).
    #[arg(long)]
    g: Option<usize>,
    #[arg(long, value_enum, default_value_t = PenaltyKind::Sgl)]
    penalty: PenaltyKind,
    #[arg(long, default_value_t = 0.5)]
    w1: f64,
    /// A positive number, a rule (bel, sts, bls, bun, stg, blg, jia) or cv.
    #[arg(long, default_value = "bun")]
    lambda: String,
    /// With `--lambda cv`, tune w1 over {0, 0.1, …, 1} as well.
    #[arg(long)]
    cv_w1: bool,
    #[arg(long, value_enum, default_value_t = SolverKind::Ppdna)]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Seconds before the solver stops with status time_limit.
    #[arg(long, default_value_t = 1800.0)]
    max_time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append the run record as one JSON line.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the coefficients, one per line.
    #[arg(long)]
    beta_out: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    normalize: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// One JSON object per line: problem, solver, penalty, w1, lambda_rule, seed.
    #[arg(long)]
    manifest: PathBuf,
    /// Results file, one JSON record per line.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1800.0)]
    max_time: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// dro, prox, jacobian or gradient; repeat for several (default all).
    #[arg(long)]
    family: Vec<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RenderArgs {
    results: PathBuf,
}

fn append_record(path: &Path, r: &RunRecord) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(r)?)?;
    Ok(())
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    if !(a.tol > 0.0) || !(a.max_time > 0.0) {
        return Err(CliError::Usage("--tol and --max-time must be positive".into()));
    }
    let lambda: LambdaChoice = a.lambda.parse()?;
    let source = match (&a.input, a.synthetic) {
        (Some(p), _) => Source::from_path(p),
        (None, Some(ex)) => Source::Synthetic {
            example: match ex {
                ExampleArg::Ex1 => Example::Ex1,
                ExampleArg::Ex2 => Example::Ex2,
                ExampleArg::Ex3 => Example::Ex3,
            },
            n_samples: a.n_samples,
            g: a.g.unwrap_or(200),
        },
        (None, None) => unreachable!("clap requires one source"),
    };
    let problem = problem::build(&source, a.seed, a.normalize, a.g)?;
    let cell = Cell {
        solver: a.solver,
        penalty: a.penalty,
        w1: a.w1,
        lambda,
        cv_w1: a.cv_w1,
        seed: a.seed,
        tol: a.tol,
        max_time: a.max_time,
    };
    let out = run::run(&problem, &cell)?;
    println!("{}", render_row(&out.record));
    if let Some(p) = &a.out {
        append_record(p, &out.record)?;
    }
    if let Some(p) = &a.beta_out {
        let mut w = BufWriter::new(File::create(p)?);
        for b in &out.result.beta {
            writeln!(w, "{b:e}")?;
        }
        w.flush()?;
    }
    Ok(if out.result.status.is_cap() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let entries = bench::read_manifest(BufReader::new(File::open(&a.manifest)?))?;
    let records = bench::run_manifest(&entries, a.tol, a.max_time, bench::pool_threads()?)?;
    if let Some(p) = &a.out {
        let mut w = BufWriter::new(File::create(p)?);
        for r in &records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()?;
    }
    print!("{}", render_table(&records));
    for r in records.iter().filter(|r| r.failure.is_some()) {
        eprintln!("{} {} {}: {}", r.problem, r.solver, r.lambda_rule, r.failure.as_deref().unwrap_or_default());
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let families: Vec<Family> = if a.family.is_empty() {
        Family::ALL.to_vec()
    } else {
        a.family.iter().map(|f| f.parse()).collect::<sqrtreg::Result<_>>()?
    };
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let reports = run_all(&families, a.trials, a.seed);
    for r in &reports {
        println!("{r}");
    }
    Ok(if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn render(a: RenderArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.results)?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<RunRecord>, _>>()?;
    print!("{}", render_table(&records));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            let mut cmd = Cli::command();
            cmd.build();
            let sub = std::env::args().nth(1).unwrap_or_default();
            let usage = match cmd.find_subcommand_mut(&sub) {
                Some(c) => c.render_usage(),
                None => cmd.render_usage(),
            };
            eprintln!("\n{usage}");
            return ExitCode::FAILURE;
        }
    };
    let res = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Render(a) => render(a),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
