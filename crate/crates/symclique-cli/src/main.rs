//! Benchmark and collective-inference command line.
//!
//! Subcommands: `gen` writes synthetic clique suites, `clique-bench`
//! compares solvers over a suite, `collective` runs cluster-graph message
//! passing over a model manifest, and `oracle-check` runs invariant suites.
//!
//! Exit codes: 0 on success, 1 when an invariant check fails, 2 on input
//! errors. Set `SYMCLIQUE_THREADS` to bound the solver thread pool.

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use symclique::bench::{
    clique_bench, oracle_check, token_accuracy, write_bench_csv, BenchRow, Solver,
    COLLECTIVE_CSV_HEADER,
};
use symclique::clique::CliqueProblem;
use symclique::cluster::{build, DEFAULT_ROUNDS};
use symclique::io::{read_manifest, read_problems_with_seeds, write_problems_with_seeds};
use symclique::synth::{gen_clique_dataset, CliqueDatasetSpec, CliqueFamily, LambdaSweep};

#[derive(Parser)]
#[command(
    name = "symclique",
    about = "MAP inference benchmarks for cliques with symmetric potentials, and collective chain labeling",
    long_about = None,
    after_help = "\
FILE FORMATS
  Problem files hold one block per problem: a header `n R family params`
  (family one of potts/entropy/makespan/makespan2 with a lambda, or
  majority), n rows of R vertex potentials, and R weight rows for majority.
  `# seed N` comments carry the generating seed.

  Collective manifests declare `labels ...`, `option key=value`
  (sentinels=exclude|include, restrict-ranges=on|off, damping=x),
  `instance <path>` chain files, and `property kind=... potential=...
  lambda=...` blocks (kinds: tokenlabel, firstnonother, nextlabel,
  beforetoken).

CSV COLUMNS
  clique-bench: problem,solver,status,score,reference,ratio,time_us,seed
  collective:   round,objective,max_delta,accuracy
  Numbers use dot-decimal shortest round-trip formatting; reports are
  byte-stable given the same inputs except for the time_us column."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clique suite.
    Gen(GenArgs),
    /// Run solvers over a problem suite and write a CSV report.
    CliqueBench(BenchArgs),
    /// Run collective inference over a model manifest.
    Collective(CollectiveArgs),
    /// Run invariant checks for one solver over a suite.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// potts | entropy | makespan | makespan2 | maj-dense | maj-sparse
    #[arg(long)]
    family: String,
    /// Vertices per clique.
    #[arg(long)]
    n: usize,
    /// Values per clique.
    #[arg(long)]
    r: usize,
    /// Coupling sweep `a:b:step` (inclusive) or `a:b:step:open` (half-open).
    #[arg(long)]
    lambda: String,
    /// Problems per sweep value.
    #[arg(long = "per-lambda", default_value_t = 25)]
    per_lambda: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale the coupling as lambda/n.
    #[arg(long = "lambda-over-n", default_value_t = false)]
    lambda_over_n: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated: alpha,qpass2,expansion,icm,lr,exact,brute
    #[arg(long, default_value = "alpha,icm,brute")]
    solvers: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CollectiveArgs {
    /// Model manifest path.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Solver whose invariants to check.
    #[arg(long)]
    solver: String,
    /// Check only the first T problems.
    #[arg(long)]
    trials: Option<usize>,
}

enum CliError {
    /// Bad input: exit code 2.
    Input(String),
    /// Violated invariant: exit code 1.
    Invariant(String),
}

impl From<symclique::Error> for CliError {
    fn from(e: symclique::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::CliqueBench(args) => cmd_bench(args),
        Command::Collective(args) => cmd_collective(args),
        Command::OracleCheck(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn init_thread_pool() {
    if let Ok(threads) = std::env::var("SYMCLIQUE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn parse_lambda(spec: &str) -> Result<LambdaSweep, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Input(format!("bad lambda range {spec}; expected a:b:step[:open]"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [single] => Ok(LambdaSweep::single(num(single)?)),
        [a, b, step] => Ok(LambdaSweep::inclusive(num(a)?, num(b)?, num(step)?)?),
        [a, b, step, mode] if *mode == "open" => {
            Ok(LambdaSweep::half_open(num(a)?, num(b)?, num(step)?)?)
        }
        _ => Err(bad()),
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let family = CliqueFamily::parse(&args.family)
        .ok_or_else(|| CliError::Input(format!("unknown family {}", args.family)))?;
    let spec = CliqueDatasetSpec {
        family,
        n: args.n,
        r: args.r,
        sweep: parse_lambda(&args.lambda)?,
        cliques_per_lambda: args.per_lambda,
        seed: args.seed,
        lambda_over_n: args.lambda_over_n,
    };
    let generated = gen_clique_dataset(&spec)?;
    let with_seeds: Vec<(CliqueProblem, u64)> =
        generated.into_iter().map(|g| (g.problem, g.seed)).collect();
    let text = write_problems_with_seeds(&with_seeds)?;
    std::fs::write(&args.out, text).map_err(|e| CliError::Input(e.to_string()))?;
    println!("wrote {} problems to {}", with_seeds.len(), args.out.display());
    Ok(())
}

fn parse_solvers(spec: &str) -> Result<Vec<Solver>, CliError> {
    spec.split(',')
        .map(|s| {
            Solver::parse(s.trim()).ok_or_else(|| CliError::Input(format!("unknown solver {s}")))
        })
        .collect()
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| CliError::Input(e.to_string()))?;
    let problems = read_problems_with_seeds(&text)?;
    let solvers = parse_solvers(&args.solvers)?;

    // problem-level parallelism; rows re-keyed and sorted for deterministic
    // output
    let chunks: Vec<Vec<BenchRow>> = problems
        .par_iter()
        .enumerate()
        .map(|(id, (problem, seed))| {
            let mut rows = clique_bench(std::slice::from_ref(problem), &[*seed], &solvers)?;
            for row in &mut rows {
                row.problem_id = id;
            }
            Ok(rows)
        })
        .collect::<Result<_, symclique::Error>>()?;
    let mut rows: Vec<BenchRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.problem_id.cmp(&b.problem_id).then(a.solver.name().cmp(b.solver.name()))
    });

    let csv = write_bench_csv(&rows);
    std::fs::write(&args.out, csv).map_err(|e| CliError::Input(e.to_string()))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_collective(args: CollectiveArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| CliError::Input(e.to_string()))?;
    let dir = args.model.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    let manifest = read_manifest(&text, &dir)?;
    let gold = manifest.gold.clone();
    let mut model =
        build(manifest.labels, manifest.instances, manifest.couplings, manifest.options)?;
    let start = Instant::now();
    let diagnostics = model.run(args.rounds)?;
    let elapsed = start.elapsed();

    let mut csv = String::new();
    csv.push_str(COLLECTIVE_CSV_HEADER);
    csv.push('\n');
    for d in &diagnostics {
        let accuracy =
            token_accuracy(&d.labelings, &gold).map(|a| a.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{}", d.round, d.objective, d.max_message_delta, accuracy)
            .expect("writing to a string");
    }
    std::fs::write(&args.out, csv).map_err(|e| CliError::Input(e.to_string()))?;
    let last = diagnostics.last().expect("at least one round");
    println!(
        "{} rounds over {} instances in {:.1?}; final objective {}",
        diagnostics.len(),
        model.instances().len(),
        elapsed,
        last.objective
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| CliError::Input(e.to_string()))?;
    let problems: Vec<CliqueProblem> =
        read_problems_with_seeds(&text)?.into_iter().map(|(p, _)| p).collect();
    let subset = match args.trials {
        Some(t) => &problems[..t.min(problems.len())],
        None => &problems[..],
    };
    let solver = Solver::parse(&args.solver)
        .ok_or_else(|| CliError::Input(format!("unknown solver {}", args.solver)))?;
    match oracle_check(subset, solver) {
        Ok(count) => {
            println!("{}: {count} problems pass", solver.name());
            Ok(())
        }
        Err(e) => Err(CliError::Invariant(e.to_string())),
    }
}
