//! Reference strands, greedy printing cost and batch plans.
//!
//! A reference strand is a finite prefix followed by an infinite repetition
//! of a period that contains all four bases. Printing a strand greedily
//! consumes reference bases until each strand base is matched at its earliest
//! possible position; the index of the last match is the strand's cost.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::StrandPool;
use crate::strand::{bases_to_string, parse_bases, Base, Strand};

/// Pools at least this large are costed in parallel.
const PAR_THRESHOLD: usize = 1024;

#[derive(Debug, Clone, Copy)]
struct Step {
    dist: u32,
    next: u32,
}

/// `prefix` followed by `period` repeated forever, indexed from 1.
///
/// Positions are folded into canonical states: position `tau < P + L` is its
/// own state, later positions map to `P + (tau - P) mod L`. A next-occurrence
/// table over states answers each greedy step in O(1).
#[derive(Clone)]
pub struct ReferenceStrand {
    prefix: Vec<Base>,
    period: Vec<Base>,
    table: Vec<[Step; 4]>,
}

impl PartialEq for ReferenceStrand {
    fn eq(&self, other: &Self) -> bool {
        self.prefix == other.prefix && self.period == other.period
    }
}

impl Eq for ReferenceStrand {}

impl fmt::Debug for ReferenceStrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReferenceStrand({self})")
    }
}

impl fmt::Display for ReferenceStrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({})*",
            bases_to_string(&self.prefix),
            bases_to_string(&self.period)
        )
    }
}

impl ReferenceStrand {
    pub fn new(prefix: Vec<Base>, period: Vec<Base>) -> Result<Self> {
        for b in Base::ALL {
            if !period.contains(&b) {
                return Err(Error::invalid(format!(
                    "reference period {} lacks base {b}",
                    bases_to_string(&period)
                )));
            }
        }
        let (p, l) = (prefix.len(), period.len());
        let states = p + l;
        // 1-based window covering every next occurrence from any state
        let window = p + 2 * l;
        let base_at = |j: usize| -> Base {
            if j <= p {
                prefix[j - 1]
            } else {
                period[(j - p - 1) % l]
            }
        };
        let mut next_pos = vec![[u32::MAX; 4]; window + 2];
        for j in (1..=window).rev() {
            next_pos[j] = next_pos[j + 1];
            next_pos[j][base_at(j).code() as usize] = j as u32;
        }
        let table = (0..states)
            .map(|s| {
                let mut row = [Step { dist: 0, next: 0 }; 4];
                for (b, step) in row.iter_mut().enumerate() {
                    let j = next_pos[s + 1][b] as usize;
                    debug_assert!(j <= window);
                    let mut next = j;
                    if next >= states {
                        next -= l;
                    }
                    *step = Step {
                        dist: (j - s) as u32,
                        next: next as u32,
                    };
                }
                row
            })
            .collect();
        Ok(ReferenceStrand {
            prefix,
            period,
            table,
        })
    }

    pub fn parse(prefix: &str, period: &str) -> Result<Self> {
        Self::new(parse_bases(prefix)?, parse_bases(period)?)
    }

    /// `(ACGT)*`, written R̃ in the cost analysis.
    pub fn acgt() -> Self {
        Self::new(vec![], vec![Base::A, Base::C, Base::G, Base::T]).expect("valid period")
    }

    /// `(TGCA)*`, the complement of `(ACGT)*`.
    pub fn tgca() -> Self {
        Self::new(vec![], vec![Base::T, Base::G, Base::C, Base::A]).expect("valid period")
    }

    /// Finite prefix followed by `(ACGT)*`.
    pub fn with_acgt_tail(prefix: Vec<Base>) -> Self {
        Self::new(prefix, vec![Base::A, Base::C, Base::G, Base::T]).expect("valid period")
    }

    pub fn prefix(&self) -> &[Base] {
        &self.prefix
    }

    pub fn period(&self) -> &[Base] {
        &self.period
    }

    /// Number of canonical positions, `|prefix| + |period|`.
    pub fn num_states(&self) -> usize {
        self.table.len()
    }

    /// Base at 1-based index `j`.
    pub fn base_at(&self, j: u64) -> Base {
        assert!(j >= 1, "reference indices start at 1");
        let p = self.prefix.len() as u64;
        if j <= p {
            self.prefix[(j - 1) as usize]
        } else {
            self.period[((j - p - 1) % self.period.len() as u64) as usize]
        }
    }

    /// The first `len` bases.
    pub fn first_bases(&self, len: usize) -> Vec<Base> {
        (1..=len as u64).map(|j| self.base_at(j)).collect()
    }

    /// Canonical state of position `tau` (number of bases consumed).
    pub fn cursor_at(&self, tau: u64) -> Cursor {
        let p = self.prefix.len() as u64;
        let l = self.period.len() as u64;
        let state = if tau < p + l { tau } else { p + (tau - p) % l };
        Cursor {
            tau,
            state: state as u32,
        }
    }

    /// Advances `cursor` to the next occurrence of `base`; returns the jump.
    #[inline]
    pub fn step(&self, cursor: &mut Cursor, base: Base) -> u32 {
        self.step_code(cursor, base.code())
    }

    #[inline]
    fn step_code(&self, cursor: &mut Cursor, code: u8) -> u32 {
        let s = self.table[cursor.state as usize][code as usize];
        cursor.tau += s.dist as u64;
        cursor.state = s.next;
        s.dist
    }

    /// Cost of `strand` without materializing the profile.
    pub fn cost(&self, strand: &Strand) -> u64 {
        let mut state = 0u32;
        let mut total = 0u64;
        let len = strand.len();
        for (j, &w) in strand.words().iter().enumerate() {
            let lanes = (len - j * 32).min(32);
            let mut w = w;
            for _ in 0..lanes {
                let s = self.table[state as usize][(w & 3) as usize];
                total += s.dist as u64;
                state = s.next;
                w >>= 2;
            }
        }
        total
    }

    /// Costs of every strand, in order; parallel for large inputs.
    pub fn costs(&self, strands: &[Strand]) -> Vec<u64> {
        if strands.len() >= PAR_THRESHOLD {
            strands.par_iter().map(|s| self.cost(s)).collect()
        } else {
            strands.iter().map(|s| self.cost(s)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    /// Reference bases consumed so far.
    pub tau: u64,
    state: u32,
}

/// Greedy embedding of a strand into a reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostProfile {
    /// `tau[i]` is the 1-based reference index matched by strand base `i`.
    pub tau: Vec<u64>,
    /// `increments[i] = tau[i] - tau[i-1]`, with `tau[-1] = 0`.
    pub increments: Vec<u32>,
    pub total: u64,
}

pub fn cost_of_strand(strand: &Strand, reference: &ReferenceStrand) -> CostProfile {
    let mut cursor = reference.cursor_at(0);
    let mut tau = Vec::with_capacity(strand.len());
    let mut increments = Vec::with_capacity(strand.len());
    for code in strand.codes() {
        increments.push(reference.step_code(&mut cursor, code));
        tau.push(cursor.tau);
    }
    CostProfile {
        tau,
        increments,
        total: cursor.tau,
    }
}

/// Maximum cost over a non-empty batch.
pub fn batch_cost<'a, I>(batch: I, reference: &ReferenceStrand) -> Result<u64>
where
    I: IntoIterator<Item = &'a Strand>,
{
    batch
        .into_iter()
        .map(|s| reference.cost(s))
        .max()
        .ok_or_else(|| Error::invalid("batch must be non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualCosts {
    pub acgt: u64,
    pub tgca: u64,
    pub sum: u64,
}

/// Costs of a homopolymer-free strand under `(ACGT)*` and `(TGCA)*`; they sum to `4n + 1`.
pub fn dual_identity_check(strand: &Strand) -> Result<DualCosts> {
    if strand.has_homopolymer() {
        return Err(Error::precondition(format!(
            "strand {strand} has a homopolymer; the dual identity needs none"
        )));
    }
    thread_local! {
        static REFS: (ReferenceStrand, ReferenceStrand) =
            (ReferenceStrand::acgt(), ReferenceStrand::tgca());
    }
    Ok(REFS.with(|(a, b)| {
        let acgt = a.cost(strand);
        let tgca = b.cost(strand);
        DualCosts {
            acgt,
            tgca,
            sum: acgt + tgca,
        }
    }))
}

/// Batch sizes for `m` strands in `k` batches: the first `m mod k` batches
/// hold `ceil(m/k)`, the rest `floor(m/k)`.
pub fn batch_sizes(m: usize, k: usize) -> Vec<usize> {
    let (q, r) = (m / k, m % k);
    (0..k).map(|i| if i < r { q + 1 } else { q }).collect()
}

/// A partition of pool indices into batches, each printed with its own reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    pub references: Vec<ReferenceStrand>,
    pub per_batch_cost: Vec<u64>,
    pub total_cost: u64,
}

impl BatchPlan {
    /// An unevaluated plan; costs are zero until [`evaluate_plan`] fills them.
    pub fn unevaluated(batches: Vec<Vec<usize>>, references: Vec<ReferenceStrand>) -> Self {
        let k = batches.len();
        BatchPlan {
            batches,
            references,
            per_batch_cost: vec![0; k],
            total_cost: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.batches.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PlanJson::from(self))?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PlanJson::from(self))?)
    }

    /// Parses plan JSON v1. Stored costs are kept as written; re-evaluate to trust them.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PlanJson = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("invalid plan JSON: {e}")))?;
        if raw.version != 1 {
            return Err(Error::parse(format!("unsupported plan version {}", raw.version)));
        }
        if raw.k != raw.batches.len() || raw.k != raw.references.len() {
            return Err(Error::parse(format!(
                "plan declares k={} but has {} batches and {} references",
                raw.k,
                raw.batches.len(),
                raw.references.len()
            )));
        }
        let references = raw
            .references
            .iter()
            .map(|r| ReferenceStrand::parse(&r.prefix, &r.period))
            .collect::<Result<Vec<_>>>()?;
        let k = raw.k;
        let per_batch_cost = if raw.per_batch_cost.len() == k {
            raw.per_batch_cost
        } else if raw.per_batch_cost.is_empty() {
            vec![0; k]
        } else {
            return Err(Error::parse("per_batch_cost length differs from k"));
        };
        Ok(BatchPlan {
            batches: raw.batches,
            references,
            per_batch_cost,
            total_cost: raw.total_cost,
        })
    }

    /// `total=<int> per_batch=<c1,c2,...>`
    pub fn summary_line(&self) -> String {
        let per: Vec<String> = self.per_batch_cost.iter().map(u64::to_string).collect();
        format!("total={} per_batch={}", self.total_cost, per.join(","))
    }
}

#[derive(Serialize, Deserialize)]
struct ReferenceJson {
    prefix: String,
    period: String,
}

#[derive(Serialize, Deserialize)]
struct PlanJson {
    version: u32,
    k: usize,
    references: Vec<ReferenceJson>,
    batches: Vec<Vec<usize>>,
    #[serde(default)]
    per_batch_cost: Vec<u64>,
    #[serde(default)]
    total_cost: u64,
}

impl From<&BatchPlan> for PlanJson {
    fn from(plan: &BatchPlan) -> Self {
        PlanJson {
            version: 1,
            k: plan.k(),
            references: plan
                .references
                .iter()
                .map(|r| ReferenceJson {
                    prefix: bases_to_string(r.prefix()),
                    period: bases_to_string(r.period()),
                })
                .collect(),
            batches: plan.batches.clone(),
            per_batch_cost: plan.per_batch_cost.clone(),
            total_cost: plan.total_cost,
        }
    }
}

/// Checks that `plan` is a balanced partition of the pool and fills in its costs.
pub fn evaluate_plan(pool: &StrandPool, plan: &BatchPlan) -> Result<BatchPlan> {
    let m = pool.len();
    let k = plan.batches.len();
    if k == 0 {
        return Err(Error::precondition("plan has no batches"));
    }
    if plan.references.len() != k {
        return Err(Error::precondition(format!(
            "plan has {k} batches but {} references",
            plan.references.len()
        )));
    }
    let mut seen = vec![false; m];
    for batch in &plan.batches {
        for &i in batch {
            if i >= m {
                return Err(Error::precondition(format!(
                    "strand index {i} outside pool of size {m}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::precondition(format!("strand index {i} appears twice")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::precondition(format!(
            "strand index {missing} is not assigned to any batch"
        )));
    }
    if k > m {
        return Err(Error::precondition(format!("k={k} exceeds pool size {m}")));
    }
    let (lo, hi) = (m / k, m.div_ceil(k));
    let mut sizes: Vec<usize> = plan.batches.iter().map(Vec::len).collect();
    if sizes.iter().any(|&s| s < lo || s > hi) {
        return Err(Error::precondition(format!(
            "batch sizes must lie in [{lo}, {hi}] for M={m}, k={k}"
        )));
    }
    let mut want = batch_sizes(m, k);
    sizes.sort_unstable();
    want.sort_unstable();
    if sizes != want {
        return Err(Error::precondition("batch sizes are not a balanced split"));
    }
    let per_batch_cost = plan
        .batches
        .iter()
        .zip(&plan.references)
        .map(|(batch, r)| batch_cost_indices(pool, batch, r))
        .collect::<Result<Vec<u64>>>()?;
    Ok(BatchPlan {
        batches: plan.batches.clone(),
        references: plan.references.clone(),
        total_cost: per_batch_cost.iter().sum(),
        per_batch_cost,
    })
}

fn batch_cost_indices(pool: &StrandPool, batch: &[usize], reference: &ReferenceStrand) -> Result<u64> {
    if batch.len() >= PAR_THRESHOLD {
        batch
            .par_iter()
            .map(|&i| reference.cost(pool.get(i)))
            .max()
            .ok_or_else(|| Error::invalid("batch must be non-empty"))
    } else {
        batch_cost(batch.iter().map(|&i| pool.get(i)), reference)
    }
}
