//! Seeded Monte Carlo experiment suites and their configuration.
//!
//! Replication `i` of a run seeded with `seed` uses the derived seed
//! `mix64(seed, i)` for everything it draws, so rows do not depend on the
//! number of worker threads.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::batching::{
    dual_reference_partition_with_costs, quantile_partition_with_costs, random_partition_with_costs, Strategy,
};
use crate::cost::ReferenceStrand;
use crate::error::{Error, Result};
use crate::exact_dist::fmt_sig17;
use crate::lb_lab::{bounds_csv, bounds_row, coupled_sample, lambda_grid, CouplingParams};
use crate::pool::StrandPool;
use crate::rng::{mix64, task_rng};
use crate::strand::{RepeatDistribution, Universe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    SingleBatch,
    MultiBatch,
    LowerBound,
    Coupling,
    Bounds,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::SingleBatch => "single-batch",
            Suite::MultiBatch => "multi-batch",
            Suite::LowerBound => "lower-bound",
            Suite::Coupling => "coupling",
            Suite::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-batch" => Ok(Suite::SingleBatch),
            "multi-batch" => Ok(Suite::MultiBatch),
            "lower-bound" => Ok(Suite::LowerBound),
            "coupling" => Ok(Suite::Coupling),
            "bounds" => Ok(Suite::Bounds),
            other => Err(Error::parse(format!("unknown suite {other:?}"))),
        }
    }
}

/// Flat `key=value` experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub universe: Universe,
    pub strategy: Strategy,
    /// Repeat probability override for generated strands.
    pub p: Option<f64>,
    /// Bias of the coupling; `None` means the largest admissible value.
    pub delta: Option<f64>,
    pub seed: u64,
    pub replications: usize,
    /// Alphabet size of the bounds table.
    pub ell: u32,
    /// Grid points per bounds table.
    pub points: usize,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: Suite::SingleBatch,
            n: 100,
            m: 1000,
            k: 1,
            universe: Universe::Unconstrained,
            strategy: Strategy::Quantile,
            p: None,
            delta: None,
            seed: 0,
            replications: 1,
            ell: 4,
            points: 10,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(format!("invalid value {value:?} for {key}")))
}

fn parse_opt_f64(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 13] = [
        "suite",
        "n",
        "m",
        "k",
        "universe",
        "strategy",
        "p",
        "delta",
        "seed",
        "replications",
        "ell",
        "points",
        "out",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "suite" => self.suite = value.parse()?,
            "n" => self.n = parse_num(key, value)?,
            "m" | "M" => self.m = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "universe" => self.universe = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "p" => self.p = parse_opt_f64(key, value)?,
            "delta" => self.delta = parse_opt_f64(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "replications" => self.replications = parse_num(key, value)?,
            "ell" => self.ell = parse_num(key, value)?,
            "points" => self.points = parse_num(key, value)?,
            "out" => self.out = (value != "none").then(|| value.to_string()),
            other => return Err(Error::parse(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("config line {} lacks '='", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("suite", self.suite.to_string()),
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("k", self.k.to_string()),
            ("universe", self.universe.to_string()),
            ("strategy", self.strategy.to_string()),
            ("p", fmt_opt(self.p)),
            ("delta", fmt_opt(self.delta)),
            ("seed", self.seed.to_string()),
            ("replications", self.replications.to_string()),
            ("ell", self.ell.to_string()),
            ("points", self.points.to_string()),
            ("out", self.out.clone().unwrap_or_else(|| "none".to_string())),
        ]
    }

    /// One `key=value` per line, in canonical key order.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Space-separated canonical form, used in `#config=` trailer lines.
    pub fn canonical(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Strand law implied by `p` (if set) or the universe.
    pub fn strand_law(&self) -> Result<RepeatDistribution> {
        match self.p {
            Some(p) => RepeatDistribution::new(p, self.n),
            None => RepeatDistribution::for_universe(self.universe, self.n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.replications == 0 && self.suite != Suite::Bounds {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("p={p} outside [0, 1]")));
            }
            if self.universe == Universe::NoHomopolymer && p != 0.0 {
                return Err(Error::invalid("no-homopolymer pools require p=0"));
            }
        }
        match self.suite {
            Suite::MultiBatch | Suite::LowerBound if self.k == 0 || self.k > self.m => {
                Err(Error::invalid(format!("k={} must lie in [1, m={}]", self.k, self.m)))
            }
            Suite::MultiBatch | Suite::LowerBound
                if self.strategy == Strategy::DualReference && self.universe != Universe::NoHomopolymer =>
            {
                Err(Error::precondition("dual-reference batching requires a no-homopolymer pool"))
            }
            Suite::Coupling => {
                if self.m < 16 {
                    return Err(Error::invalid("coupling needs m >= 16"));
                }
                self.coupling_params().map(|_| ())
            }
            Suite::Bounds if self.ell < 2 => Err(Error::invalid("ell must be at least 2")),
            _ => Ok(()),
        }
    }

    pub fn coupling_params(&self) -> Result<CouplingParams> {
        match self.delta {
            Some(d) => CouplingParams::new(self.m, self.n, d),
            None => CouplingParams::at_max_delta(self.m, self.n),
        }
    }
}

/// One CSV row of a replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub suite: Suite,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub strategy: String,
    pub total_cost: u64,
    pub bound_value: f64,
    pub within_bound: bool,
}

pub const EXPERIMENT_CSV_HEADER: &str = "suite,seed,n,M,k,strategy,total_cost,bound_value,within_bound";

impl ExperimentRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.suite,
            self.seed,
            self.n,
            self.m,
            self.k,
            self.strategy,
            self.total_cost,
            fmt_sig17(self.bound_value),
            self.within_bound
        )
    }
}

/// Single-batch band `[lower, upper]` on the maximum `(ACGT)*` cost of `M` strands.
///
/// Upper: `c n + 3 sqrt(n ln M')` with `M' = max(M, n)`, `c = 2.5` (uniform) or `2`.
/// Lower: `(c - eps) n` with `eps = sqrt(21/M)` (uniform) or `sqrt(9/M)`.
pub fn single_batch_band(n: usize, m: usize, universe: Universe) -> (f64, f64) {
    let nf = n as f64;
    let mf = m as f64;
    let m_prime = mf.max(nf);
    let (c, eps) = match universe {
        Universe::Unconstrained => (2.5, (21.0 / mf).sqrt()),
        Universe::NoHomopolymer => (2.0, (9.0 / mf).sqrt()),
    };
    ((c - eps) * nf, c * nf + 3.0 * (nf * m_prime.ln()).sqrt())
}

/// Upper bound used for multi-batch rows.
///
/// Quantile: `2.5 n k + 12 sqrt(n ln M)`. Dual: `2 n k + 1`. Random: the
/// per-strand cap times `k` (`4n` or `3n + 1`).
pub fn multi_batch_bound(strategy: Strategy, n: usize, m: usize, k: usize, universe: Universe) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    match strategy {
        Strategy::Quantile => 2.5 * nf * kf + 12.0 * (nf * (m as f64).ln()).sqrt(),
        Strategy::DualReference => 2.0 * nf * kf + 1.0,
        Strategy::Random => match universe {
            Universe::Unconstrained => 4.0 * nf * kf,
            Universe::NoHomopolymer => (3.0 * nf + 1.0) * kf,
        },
    }
}

/// `k (c n - sqrt(5 n ln 2k))`, `c = 2` without homopolymers and `2.5` otherwise.
pub fn multi_batch_lower_bound(n: usize, k: usize, universe: Universe) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let c = match universe {
        Universe::Unconstrained => 2.5,
        Universe::NoHomopolymer => 2.0,
    };
    kf * (c * nf - (5.0 * nf * (2.0 * kf).ln()).sqrt())
}

/// Pool of replication `rep` of a run.
pub fn replication_pool(config: &ExperimentConfig, rep: u64) -> Result<StrandPool> {
    let law = config.strand_law()?;
    StrandPool::generate_parallel(&law, config.universe, config.m, mix64(config.seed, rep))
}

/// Total of `strategy` on `pool` with `k` batches; `rep_seed` drives the random baseline.
pub fn strategy_total(pool: &StrandPool, costs: &[u64], k: usize, strategy: Strategy, rep_seed: u64) -> Result<u64> {
    let plan = match strategy {
        Strategy::Random => random_partition_with_costs(costs, k, &mut task_rng(rep_seed, u64::MAX))?,
        Strategy::Quantile => quantile_partition_with_costs(costs, k)?,
        Strategy::DualReference => dual_reference_partition_with_costs(pool, costs, k)?,
    };
    Ok(plan.total_cost)
}

fn run_replication(config: &ExperimentConfig, rep: u64) -> Result<ExperimentRow> {
    let rep_seed = mix64(config.seed, rep);
    let row = |strategy: &str, total: u64, bound: f64, within: bool| ExperimentRow {
        suite: config.suite,
        seed: rep_seed,
        n: config.n,
        m: config.m,
        k: config.k,
        strategy: strategy.to_string(),
        total_cost: total,
        bound_value: bound,
        within_bound: within,
    };
    match config.suite {
        Suite::SingleBatch => {
            let pool = replication_pool(config, rep)?;
            let total = ReferenceStrand::acgt().costs(pool.strands()).into_iter().max().unwrap_or(0);
            let (lo, hi) = single_batch_band(config.n, config.m, config.universe);
            Ok(row("single", total, hi, lo <= total as f64 && total as f64 <= hi))
        }
        Suite::MultiBatch => {
            let pool = replication_pool(config, rep)?;
            let costs = ReferenceStrand::acgt().costs(pool.strands());
            let total = strategy_total(&pool, &costs, config.k, config.strategy, rep_seed)?;
            let bound = multi_batch_bound(config.strategy, config.n, config.m, config.k, config.universe);
            Ok(row(config.strategy.as_str(), total, bound, total as f64 <= bound))
        }
        Suite::LowerBound => {
            let pool = replication_pool(config, rep)?;
            let costs = ReferenceStrand::acgt().costs(pool.strands());
            let total = strategy_total(&pool, &costs, config.k, config.strategy, rep_seed)?;
            let bound = multi_batch_lower_bound(config.n, config.k, config.universe);
            Ok(row(config.strategy.as_str(), total, bound, total as f64 >= bound))
        }
        Suite::Coupling => {
            let params = config.coupling_params()?;
            let sample = coupled_sample(&params, &mut task_rng(config.seed, rep))?;
            let bound = sample.s_prime.len() as f64 / 3.0;
            Ok(row(
                "coupling",
                sample.intersection as u64,
                bound,
                sample.intersection as f64 >= bound,
            ))
        }
        Suite::Bounds => Err(Error::invalid("the bounds suite has no replications")),
    }
}

/// Rows of every replication, in replication order.
pub fn run_suite(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect()
}

/// Full CSV output of a suite, with header and `#config=` trailer.
pub fn run_suite_csv(config: &ExperimentConfig) -> Result<String> {
    config.validate()?;
    let mut out = if config.suite == Suite::Bounds {
        let rows = lambda_grid(config.ell, config.n, config.points)
            .into_iter()
            .map(|l| bounds_row(config.ell, config.n, l))
            .collect::<Result<Vec<_>>>()?;
        bounds_csv(&rows)
    } else {
        let mut s = format!("{EXPERIMENT_CSV_HEADER}\n");
        for r in run_suite(config)? {
            let _ = writeln!(s, "{}", r.to_csv_line());
        }
        s
    };
    let _ = writeln!(out, "#config={}", config.canonical());
    Ok(out)
}
