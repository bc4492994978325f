//! Exact printing-cost laws.
//!
//! Under `(ACGT)*` a uniform unconstrained strand has i.i.d. increments,
//! uniform on `{1,2,3,4}`; a uniform homopolymer-free strand has a first
//! increment uniform on `{1,2,3,4}` and later ones uniform on `{1,2,3}`. The
//! cost law is therefore an iterated convolution of small uniform kernels.

use std::fmt::Write as _;

use rand::Rng;

use crate::cost::ReferenceStrand;
use crate::error::{Error, Result};
use crate::strand::{enumerate_universe_capped, Base, Universe, DEFAULT_ENUMERATION_CAP};

/// Default limit on the number of cells in a convolved pmf.
pub const DEFAULT_PMF_CAP: usize = 1 << 24;

const SYMMETRY_TOL: f64 = 1e-12;

/// Cumulative sums within this of `q` count as reaching `q`; absorbs
/// rounding when `q` sits exactly on an atom boundary.
const QUANTILE_TOL: f64 = 1e-12;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Probability mass on the consecutive integers `offset, offset+1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPmf {
    pub offset: u64,
    pub mass: Vec<f64>,
}

impl CostPmf {
    pub fn new(offset: u64, mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::invalid("pmf needs at least one cell"));
        }
        if mass.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("pmf masses must be finite and non-negative"));
        }
        Ok(CostPmf { offset, mass })
    }

    /// Largest cost cell (which may carry underflowed zero mass).
    pub fn max_cost(&self) -> u64 {
        self.offset + self.mass.len() as u64 - 1
    }

    pub fn mass_at(&self, t: i64) -> f64 {
        if t < self.offset as i64 {
            return 0.0;
        }
        self.mass.get((t - self.offset as i64) as usize).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().copied().collect::<KahanSum>().value()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total_mass();
        let k: KahanSum = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, &p)| p * (self.offset + i as u64) as f64)
            .collect();
        k.value() / total
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let total = self.total_mass();
        let k: KahanSum = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d = (self.offset + i as u64) as f64 - mean;
                p * d * d
            })
            .collect();
        k.value() / total
    }

    /// `E[cost^2]`.
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// `P{cost <= t}`.
    pub fn cdf(&self, t: i64) -> f64 {
        1.0 - self.tail(t)
    }

    /// `P{cost > t}`, summed from the top so small tails keep their precision.
    pub fn tail(&self, t: i64) -> f64 {
        if t < self.offset as i64 {
            return 1.0;
        }
        let first = (t - self.offset as i64 + 1) as usize;
        if first >= self.mass.len() {
            return 0.0;
        }
        let k: KahanSum = self.mass[first..].iter().rev().copied().collect();
        k.value().min(1.0)
    }

    /// `P{cost >= t}`.
    pub fn tail_at_least(&self, t: i64) -> f64 {
        self.tail(t - 1)
    }

    /// Smallest `t` with `P{cost <= t} >= q` (up to [`QUANTILE_TOL`]).
    pub fn quantile(&self, q: f64) -> Result<u64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(format!("quantile level {q} outside (0, 1]")));
        }
        let last_positive = self.mass.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        if q == 1.0 {
            return Ok(self.offset + last_positive as u64);
        }
        let mut cum = KahanSum::default();
        for (i, &p) in self.mass.iter().enumerate().take(last_positive + 1) {
            cum.add(p);
            if cum.value() >= q - QUANTILE_TOL {
                return Ok(self.offset + i as u64);
            }
        }
        Ok(self.offset + last_positive as u64)
    }

    /// Inverse-CDF sampler over this pmf.
    pub fn sampler(&self) -> PmfSampler {
        let mut cum = KahanSum::default();
        let cumulative = self
            .mass
            .iter()
            .map(|&p| {
                cum.add(p);
                cum.value()
            })
            .collect::<Vec<_>>();
        let total = *cumulative.last().expect("non-empty pmf");
        PmfSampler {
            offset: self.offset,
            cumulative,
            total,
        }
    }

    /// `cost,probability` rows in ascending cost order, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cost,probability\n");
        for (i, &p) in self.mass.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.offset + i as u64, fmt_sig17(p));
        }
        out
    }

    /// True iff `P{self <= t} <= P{other <= t} + tol` for every integer `t`.
    pub fn cdf_dominated_by(&self, other: &CostPmf, tol: f64) -> bool {
        let lo = self.offset.min(other.offset) as i64;
        let hi = self.max_cost().max(other.max_cost()) as i64;
        let mut a = KahanSum::default();
        let mut b = KahanSum::default();
        (lo..=hi).all(|t| {
            a.add(self.mass_at(t));
            b.add(other.mass_at(t));
            a.value() <= b.value() + tol
        })
    }
}

pub struct PmfSampler {
    offset: u64,
    cumulative: Vec<f64>,
    total: f64,
}

impl PmfSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>() * self.total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.offset + i.min(self.cumulative.len() - 1) as u64
    }
}

/// `x` with 17 significant digits, in fixed notation when the exponent is
/// in `[-5, 17)` and scientific otherwise.
pub fn fmt_sig17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        sci
    }
}

/// Convolves `mass` (starting at `offset`) with the uniform law on `1..=width`.
fn convolve_uniform(mass: &[f64], width: usize) -> Vec<f64> {
    let w = 1.0 / width as f64;
    let out_len = mass.len() + width - 1;
    (0..out_len)
        .map(|j| {
            let lo = j.saturating_sub(width - 1);
            let hi = j.min(mass.len() - 1);
            let k: KahanSum = mass[lo..=hi].iter().copied().collect();
            k.value() * w
        })
        .collect()
}

/// Exact law of the `(ACGT)*` cost of a uniform strand of length `n`.
pub fn exact_cost_pmf(n: usize, universe: Universe) -> Result<CostPmf> {
    exact_cost_pmf_capped(n, universe, DEFAULT_PMF_CAP)
}

pub fn exact_cost_pmf_capped(n: usize, universe: Universe, cap: usize) -> Result<CostPmf> {
    if n == 0 {
        return Err(Error::invalid("strand length must be at least 1"));
    }
    let later = match universe {
        Universe::Unconstrained => 4,
        Universe::NoHomopolymer => 3,
    };
    let len = (n - 1) as u128 * (later as u128 - 1) + 4;
    if len > cap as u128 {
        return Err(Error::CapExceeded {
            what: "pmf length",
            size: len,
            cap: cap as u128,
        });
    }
    let mut mass = vec![0.25; 4];
    for _ in 1..n {
        mass = convolve_uniform(&mass, later);
    }
    CostPmf::new(n as u64, mass)
}

/// Exact law of `Y_1 + ... + Y_n` with `Y_i` i.i.d. uniform on `{1, ..., ell}`.
pub fn iid_uniform_sum_pmf(ell: usize, n: usize) -> Result<CostPmf> {
    if ell == 0 || n == 0 {
        return Err(Error::invalid("need ell >= 1 and n >= 1"));
    }
    let len = n as u128 * (ell as u128 - 1) + 1;
    if len > DEFAULT_PMF_CAP as u128 {
        return Err(Error::CapExceeded {
            what: "pmf length",
            size: len,
            cap: DEFAULT_PMF_CAP as u128,
        });
    }
    let mut mass = vec![1.0 / ell as f64; ell];
    for _ in 1..n {
        mass = convolve_uniform(&mass, ell);
    }
    CostPmf::new(n as u64, mass)
}

/// Law of the cost under `reference` over a uniformly drawn strand of the universe, by enumeration.
pub fn exhaustive_cost_law(n: usize, universe: Universe, reference: &ReferenceStrand) -> Result<CostPmf> {
    exhaustive_cost_law_capped(n, universe, reference, DEFAULT_ENUMERATION_CAP)
}

pub fn exhaustive_cost_law_capped(
    n: usize,
    universe: Universe,
    reference: &ReferenceStrand,
    cap: u64,
) -> Result<CostPmf> {
    let mut counts: Vec<u64> = Vec::new();
    let mut total = 0u64;
    for strand in enumerate_universe_capped(n, universe, cap)? {
        let c = reference.cost(&strand) as usize;
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        counts[c] += 1;
        total += 1;
    }
    let lo = counts.iter().position(|&c| c > 0).expect("universe is non-empty");
    let mass = counts[lo..].iter().map(|&c| c as f64 / total as f64).collect();
    CostPmf::new(lo as u64, mass)
}

/// True iff `mass(center - j) == mass(center + j)` for every `j`, within `1e-12`.
pub fn symmetry_check(pmf: &CostPmf, center: f64) -> bool {
    let center2 = 2.0 * center;
    if center2.fract() != 0.0 || !center2.is_finite() {
        return false;
    }
    let center2 = center2 as i64;
    let lo = pmf.offset as i64;
    let hi = pmf.max_cost() as i64;
    let from = lo.min(center2 - hi);
    let to = hi.max(center2 - lo);
    (from..=to).all(|t| (pmf.mass_at(t) - pmf.mass_at(center2 - t)).abs() <= SYMMETRY_TOL)
}

/// Reference with a uniform random prefix of length in `[0, max_prefix]` and a
/// uniform random period of length 4..=8, redrawn until it holds all four bases.
pub fn random_reference<R: Rng + ?Sized>(max_prefix: usize, rng: &mut R) -> ReferenceStrand {
    let plen = rng.random_range(0..=max_prefix);
    let prefix = (0..plen).map(|_| Base::from_code(rng.random_range(0..4u8))).collect();
    let period = random_full_period(rng);
    ReferenceStrand::new(prefix, period).expect("period holds all bases")
}

/// Uniform random period of length 4..=8 containing all four bases.
pub fn random_full_period<R: Rng + ?Sized>(rng: &mut R) -> Vec<Base> {
    let len = rng.random_range(4..=8usize);
    loop {
        let period: Vec<Base> = (0..len).map(|_| Base::from_code(rng.random_range(0..4u8))).collect();
        if Base::ALL.iter().all(|b| period.contains(b)) {
            return period;
        }
    }
}
