//! Batching strategies, empirical quantiles and DKW bands.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::cost::{batch_sizes, BatchPlan, ReferenceStrand};
use crate::error::{Error, Result};
use crate::pool::StrandPool;
use crate::strand::Universe;

/// Smallest `i` in `1..=m` with `i / m >= q`, i.e. the order statistic index
/// of the empirical `q`-quantile.
fn quantile_rank(m: usize, q: f64) -> usize {
    let mf = m as f64;
    let mut i = ((q * mf).ceil() as usize).clamp(1, m);
    while i > 1 && (i - 1) as f64 / mf >= q {
        i -= 1;
    }
    while i < m && (i as f64 / mf) < q {
        i += 1;
    }
    i
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("quantile level {q} outside (0, 1]")))
    }
}

/// Sorted costs of a pool under one reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalQuantileTable {
    sorted_costs: Vec<u64>,
}

impl EmpiricalQuantileTable {
    pub fn new(mut costs: Vec<u64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::invalid("empirical quantile needs at least one cost"));
        }
        costs.sort_unstable();
        Ok(EmpiricalQuantileTable { sorted_costs: costs })
    }

    /// Element-wise minimum of several tables over the same pool size; the
    /// quantile of the result is the minimum over the family.
    pub fn family_min(tables: &[EmpiricalQuantileTable]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::invalid("reference family must be non-empty"))?;
        let m = first.len();
        if tables.iter().any(|t| t.len() != m) {
            return Err(Error::invalid("family tables must share one pool size"));
        }
        let sorted_costs = (0..m)
            .map(|i| tables.iter().map(|t| t.sorted_costs[i]).min().expect("non-empty"))
            .collect();
        Ok(EmpiricalQuantileTable { sorted_costs })
    }

    pub fn len(&self) -> usize {
        self.sorted_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_costs.is_empty()
    }

    pub fn sorted_costs(&self) -> &[u64] {
        &self.sorted_costs
    }

    /// `min { t : |{c <= t}| / M >= q }`.
    pub fn quantile(&self, q: f64) -> Result<u64> {
        check_level(q)?;
        Ok(self.sorted_costs[quantile_rank(self.len(), q) - 1])
    }
}

pub fn empirical_quantile(costs: &[u64], q: f64) -> Result<u64> {
    check_level(q)?;
    EmpiricalQuantileTable::new(costs.to_vec())?.quantile(q)
}

/// `1 - 2 exp(-2 M eps^2)`, clamped to `[0, 1]`.
pub fn dkw_band_probability(m: usize, epsilon: f64) -> Result<f64> {
    dkw_family_band_probability(m, epsilon, 1)
}

/// `1 - 2 |family| exp(-2 M eps^2)`, clamped to `[0, 1]`.
pub fn dkw_family_band_probability(m: usize, epsilon: f64, family: usize) -> Result<f64> {
    if m == 0 || !(epsilon > 0.0) || family == 0 {
        return Err(Error::invalid("DKW band needs M >= 1, epsilon > 0 and a non-empty family"));
    }
    let fail = 2.0 * family as f64 * (-2.0 * m as f64 * epsilon * epsilon).exp();
    Ok((1.0 - fail).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Quantile,
    DualReference,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Quantile => "quantile",
            Strategy::DualReference => "dual",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "quantile" => Ok(Strategy::Quantile),
            "dual" | "dual-reference" => Ok(Strategy::DualReference),
            other => Err(Error::parse(format!(
                "unknown strategy {other:?} (expected random, quantile or dual)"
            ))),
        }
    }
}

fn check_k(pool: &StrandPool, k: usize) -> Result<()> {
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "k={k} must lie in [1, M={}]",
            pool.len()
        )));
    }
    Ok(())
}

/// Cuts `order` into consecutive balanced chunks, larger chunks first.
fn chunk(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for size in batch_sizes(order.len(), k) {
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

/// Pool indices sorted by `(cost, index)`.
fn sorted_order(costs: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_unstable_by_key(|&i| (costs[i], i));
    order
}

fn max_over(batch: &[usize], costs: &[u64]) -> u64 {
    batch.iter().map(|&i| costs[i]).max().expect("batches are non-empty")
}

/// Plan whose batches all use `(ACGT)*`, costed from precomputed costs.
fn acgt_plan(batches: Vec<Vec<usize>>, costs: &[u64]) -> BatchPlan {
    let per_batch_cost: Vec<u64> = batches.iter().map(|b| max_over(b, costs)).collect();
    BatchPlan {
        references: vec![ReferenceStrand::acgt(); batches.len()],
        total_cost: per_batch_cost.iter().sum(),
        per_batch_cost,
        batches,
    }
}

/// Uniformly random balanced partition; every batch uses `(ACGT)*`.
pub fn random_partition<R: Rng + ?Sized>(pool: &StrandPool, k: usize, rng: &mut R) -> Result<BatchPlan> {
    check_k(pool, k)?;
    let costs = ReferenceStrand::acgt().costs(pool.strands());
    random_partition_with_costs(&costs, k, rng)
}

/// [`random_partition`] given the pool's `(ACGT)*` costs.
pub fn random_partition_with_costs<R: Rng + ?Sized>(costs: &[u64], k: usize, rng: &mut R) -> Result<BatchPlan> {
    if k == 0 || k > costs.len() {
        return Err(Error::invalid(format!("k={k} must lie in [1, M={}]", costs.len())));
    }
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.shuffle(rng);
    let mut batches = chunk(&order, k);
    for b in &mut batches {
        b.sort_unstable();
    }
    Ok(acgt_plan(batches, costs))
}

/// Sort by `(ACGT)*` cost and cut into `k` consecutive chunks, all printed with `(ACGT)*`.
pub fn quantile_partition(pool: &StrandPool, k: usize) -> Result<BatchPlan> {
    check_k(pool, k)?;
    let costs = ReferenceStrand::acgt().costs(pool.strands());
    quantile_partition_with_costs(&costs, k)
}

pub fn quantile_partition_with_costs(costs: &[u64], k: usize) -> Result<BatchPlan> {
    if k == 0 || k > costs.len() {
        return Err(Error::invalid(format!("k={k} must lie in [1, M={}]", costs.len())));
    }
    Ok(acgt_plan(chunk(&sorted_order(costs), k), costs))
}

/// Sort by `(ACGT)*` cost and cut into `k` chunks; the first `ceil(k/2)` are
/// printed with `(ACGT)*`, the rest with `(TGCA)*`.
pub fn dual_reference_partition(pool: &StrandPool, k: usize) -> Result<BatchPlan> {
    check_k(pool, k)?;
    if pool.universe() != Universe::NoHomopolymer {
        return Err(Error::precondition(
            "dual-reference batching requires a no-homopolymer pool",
        ));
    }
    let costs = ReferenceStrand::acgt().costs(pool.strands());
    dual_reference_partition_with_costs(pool, &costs, k)
}

/// [`dual_reference_partition`] given the pool's `(ACGT)*` costs.
pub fn dual_reference_partition_with_costs(pool: &StrandPool, costs: &[u64], k: usize) -> Result<BatchPlan> {
    check_k(pool, k)?;
    if pool.universe() != Universe::NoHomopolymer {
        return Err(Error::precondition(
            "dual-reference batching requires a no-homopolymer pool",
        ));
    }
    let batches = chunk(&sorted_order(costs), k);
    let split = k.div_ceil(2);
    let tgca = ReferenceStrand::tgca();
    let per_batch_cost: Vec<u64> = batches
        .iter()
        .enumerate()
        .map(|(b, batch)| {
            if b < split {
                max_over(batch, costs)
            } else {
                batch
                    .par_iter()
                    .map(|&i| tgca.cost(pool.get(i)))
                    .max()
                    .expect("batches are non-empty")
            }
        })
        .collect();
    let references = (0..k)
        .map(|b| if b < split { ReferenceStrand::acgt() } else { tgca.clone() })
        .collect();
    Ok(BatchPlan {
        total_cost: per_batch_cost.iter().sum(),
        per_batch_cost,
        references,
        batches,
    })
}

pub fn plan_strategy<R: Rng + ?Sized>(
    pool: &StrandPool,
    k: usize,
    strategy: Strategy,
    rng: &mut R,
) -> Result<BatchPlan> {
    match strategy {
        Strategy::Random => random_partition(pool, k, rng),
        Strategy::Quantile => quantile_partition(pool, k),
        Strategy::DualReference => dual_reference_partition(pool, k),
    }
}
