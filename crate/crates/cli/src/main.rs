//! `synthspan` command-line front end.
//!
//! Exit codes: 0 success, 2 parse/config error, 3 precondition violation,
//! 4 resource cap.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use synthspan::batching::{plan_strategy, Strategy};
use synthspan::cost::evaluate_plan;
use synthspan::exact_dist::fmt_sig17;
use synthspan::experiments::{run_suite, run_suite_csv, ExperimentConfig, Suite};
use synthspan::lb_lab::{bounds_csv, bounds_row, lambda_grid, BoundsRow};
use synthspan::rng::rng_from_seed;
use synthspan::scs::{optimal_partition_cost_capped, scs_length_capped, DEFAULT_STATE_CAP};
use synthspan::{BatchPlan, Error, ReferenceStrand, Result, Strand, StrandPool, Universe};

#[derive(Parser)]
#[command(name = "synthspan", version, about = "Batch printing costs for array-based DNA synthesis")]
struct Cli {
    /// Base seed; overrides `seed` from a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random strand pool.
    Gen(ConfigArgs),
    /// Per-strand printing costs of a pool.
    Cost(CostArgs),
    /// Partition a pool into batches, or evaluate a given plan.
    Plan(PlanArgs),
    /// Run a seeded Monte Carlo suite.
    Experiment(ConfigArgs),
    /// Exact shortest-common-supersequence oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Tail-bound comparison table.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<Suite>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "m", alias = "M")]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    universe: Option<Universe>,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Per-step repeat probability of generated strands.
    #[arg(long, conflicts_with = "delta")]
    p: Option<f64>,
    /// Bias: sets p = 1/4 + delta for `gen`, and the coupling bias for `experiment`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    points: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct CostArgs {
    pool: PathBuf,
    /// Reference prefix before the periodic tail.
    #[arg(long, default_value = "")]
    prefix: String,
    /// Period of the reference tail; must contain all four bases.
    #[arg(long, default_value = "ACGT")]
    period: String,
}

#[derive(Args)]
struct PlanArgs {
    pool: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "quantile")]
    strategy: Strategy,
    /// Evaluate this plan JSON instead of computing one.
    #[arg(long, conflicts_with_all = ["k"])]
    plan_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact SCS length of a set of strands.
    Scs {
        strands: Vec<String>,
        /// Read the strands from a pool file instead.
        #[arg(long, conflicts_with = "strands")]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u64,
    },
    /// Optimal balanced k-partition by exhaustive search.
    Partition {
        pool: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u64,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 4)]
    ell: u32,
    /// Comma-separated strand lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Explicit comma-separated lambda values; an empty value gives an empty grid.
    #[arg(long, conflicts_with = "points")]
    lambda: Option<String>,
    /// Evenly spaced grid over the valid range.
    #[arg(long, default_value_t = 10)]
    points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen(args) => cmd_gen(&cli, args, out),
        Command::Cost(args) => cmd_cost(&cli, args, out),
        Command::Plan(args) => cmd_plan(&cli, args, out),
        Command::Experiment(args) => cmd_experiment(&cli, args, out),
        Command::Oracle(sub) => cmd_oracle(sub, out),
        Command::Bounds(args) => cmd_bounds(&cli, args, out),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn json_text(value: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn build_config(cli: &Cli, args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    if let Some(path) = &args.config {
        c.apply_text(&fs::read_to_string(path)?)?;
    }
    if let Some(v) = args.suite {
        c.suite = v;
    }
    if let Some(v) = args.n {
        c.n = v;
    }
    if let Some(v) = args.m {
        c.m = v;
    }
    if let Some(v) = args.k {
        c.k = v;
    }
    if let Some(v) = args.universe {
        c.universe = v;
    }
    if let Some(v) = args.strategy {
        c.strategy = v;
    }
    if let Some(v) = args.p {
        c.p = Some(v);
    }
    if let Some(v) = args.delta {
        c.delta = Some(v);
    }
    if let Some(v) = args.replications {
        c.replications = v;
    }
    if let Some(v) = args.ell {
        c.ell = v;
    }
    if let Some(v) = args.points {
        c.points = v;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        c.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.out = Some(o.display().to_string());
    }
    Ok(c)
}

fn cmd_gen(cli: &Cli, args: &ConfigArgs, out: Option<&Path>) -> Result<()> {
    let mut c = build_config(cli, args)?;
    if let (Some(d), None) = (c.delta, args.p) {
        c.p = Some(0.25 + d);
    }
    if c.n == 0 || c.m == 0 {
        return Err(Error::InvalidParameter("gen needs n >= 1 and m >= 1".into()));
    }
    if let Some(p) = c.p {
        if c.universe == Universe::NoHomopolymer && p != 0.0 {
            return Err(Error::InvalidParameter("no-homopolymer pools require p=0".into()));
        }
    }
    let law = c.strand_law()?;
    let pool = StrandPool::generate_parallel(&law, c.universe, c.m, c.seed)?;
    emit(out, &pool.to_text())
}

fn cmd_cost(cli: &Cli, args: &CostArgs, out: Option<&Path>) -> Result<()> {
    let pool = StrandPool::load(&args.pool)?;
    let reference = ReferenceStrand::parse(&args.prefix, &args.period)?;
    let costs = reference.costs(pool.strands());
    let max = costs.iter().copied().max().unwrap_or(0);
    let text = match cli.format {
        Format::Json => json_text(&json!({
            "reference": reference.to_string(),
            "costs": costs,
            "max": max,
        }))?,
        Format::Csv => {
            let mut s = String::from("index,strand,cost\n");
            for (i, (strand, c)) in pool.strands().iter().zip(&costs).enumerate() {
                let _ = writeln!(s, "{i},{strand},{c}");
            }
            let _ = writeln!(
                s,
                "#config=command=cost pool={} reference={reference} max={max}",
                args.pool.display()
            );
            s
        }
    };
    emit(out, &text)
}

fn cmd_plan(cli: &Cli, args: &PlanArgs, out: Option<&Path>) -> Result<()> {
    let pool = StrandPool::load(&args.pool)?;
    let plan = match &args.plan_file {
        Some(path) => evaluate_plan(&pool, &BatchPlan::from_json(&fs::read_to_string(path)?)?)?,
        None => {
            let k = args
                .k
                .ok_or_else(|| Error::InvalidParameter("plan needs --k or --plan-file".into()))?;
            let mut rng = rng_from_seed(cli.seed.unwrap_or(0));
            plan_strategy(&pool, k, args.strategy, &mut rng)?
        }
    };
    let json = plan.to_json_pretty()? + "\n";
    match out {
        Some(path) => fs::write(path, json)?,
        None => print!("{json}"),
    }
    println!("{}", plan.summary_line());
    Ok(())
}

fn row_json(r: &synthspan::experiments::ExperimentRow) -> Value {
    json!({
        "suite": r.suite.as_str(),
        "seed": r.seed,
        "n": r.n,
        "M": r.m,
        "k": r.k,
        "strategy": r.strategy,
        "total_cost": r.total_cost,
        "bound_value": r.bound_value,
        "within_bound": r.within_bound,
    })
}

fn bounds_json(r: &BoundsRow) -> Value {
    json!({
        "ell": r.ell,
        "n": r.n,
        "lambda": r.lambda,
        "exact_tail": r.exact_tail,
        "hoeffding": r.hoeffding,
        "pz_lower": r.pz_lower,
    })
}

fn cmd_experiment(cli: &Cli, args: &ConfigArgs, out: Option<&Path>) -> Result<()> {
    let c = build_config(cli, args)?;
    let text = match cli.format {
        Format::Csv => run_suite_csv(&c)?,
        Format::Json => {
            c.validate()?;
            let rows: Vec<Value> = if c.suite == Suite::Bounds {
                lambda_grid(c.ell, c.n, c.points)
                    .into_iter()
                    .map(|l| bounds_row(c.ell, c.n, l).map(|r| bounds_json(&r)))
                    .collect::<Result<_>>()?
            } else {
                run_suite(&c)?.iter().map(row_json).collect()
            };
            json_text(&json!({ "config": c.canonical(), "rows": rows }))?
        }
    };
    emit(out, &text)
}

fn parse_strands(raw: &[String]) -> Result<Vec<Strand>> {
    raw.iter().map(|s| s.parse()).collect()
}

fn cmd_oracle(sub: &OracleCommand, out: Option<&Path>) -> Result<()> {
    let text = match sub {
        OracleCommand::Scs { strands, pool, cap } => {
            let strands = match pool {
                Some(path) => StrandPool::load(path)?.strands().to_vec(),
                None => parse_strands(strands)?,
            };
            if strands.is_empty() {
                return Err(Error::InvalidParameter("oracle scs needs at least one strand".into()));
            }
            format!("length={}\n", scs_length_capped(&strands, *cap)?)
        }
        OracleCommand::Partition { pool, k, cap } => {
            let pool = StrandPool::load(pool)?;
            let (plan, total) = optimal_partition_cost_capped(&pool, *k, *cap)?;
            format!("length={total}\n{}\n", plan.summary_line())
        }
    };
    emit(out, &text)
}

fn parse_lambdas(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("invalid lambda {s:?}"))))
        .collect()
}

fn cmd_bounds(cli: &Cli, args: &BoundsArgs, out: Option<&Path>) -> Result<()> {
    let explicit = args.lambda.as_deref().map(parse_lambdas).transpose()?;
    let mut rows = Vec::new();
    for &n in &args.n {
        let grid = explicit.clone().unwrap_or_else(|| lambda_grid(args.ell, n, args.points));
        for lambda in grid {
            rows.push(bounds_row(args.ell, n, lambda)?);
        }
    }
    let ns: Vec<String> = args.n.iter().map(usize::to_string).collect();
    let grid = match &explicit {
        Some(ls) => ls.iter().map(|&l| fmt_sig17(l)).collect::<Vec<_>>().join(","),
        None => format!("points:{}", args.points),
    };
    let config = format!("command=bounds ell={} n={} lambda={grid}", args.ell, ns.join(","));
    let text = match cli.format {
        Format::Csv => format!("{}#config={config}\n", bounds_csv(&rows)),
        Format::Json => json_text(&json!({
            "config": config,
            "rows": rows.iter().map(bounds_json).collect::<Vec<_>>(),
        }))?,
    };
    emit(out, &text)
}
