//! Lower-bound machinery: tail bounds, exact conditional expectations under
//! the repeat-biased law, and the coupling of a uniform pool with a biased one.

use std::fmt::Write as _;

use rand::{Rng, RngCore};

use crate::cost::ReferenceStrand;
use crate::error::{Error, Result};
use crate::exact_dist::{fmt_sig17, iid_uniform_sum_pmf, KahanSum};
use crate::rng::rng_from_seed;
use crate::strand::{Base, RepeatDistribution, Strand, Universe};

/// Largest bias accepted by the conditional-expectation checks.
pub const MAX_LEMMA_DELTA: f64 = 1.0 / 600.0;

/// Retry cap of the rejection sampler for `B`.
pub const B_RETRY_CAP: u64 = 1_000_000;

/// Jumps are capped at this value before averaging.
const JUMP_CAP: u32 = 5;

// ---------------------------------------------------------------------------
// Tail bounds

/// `exp(-2 t^2 / sum (b_i - a_i)^2)` for independent summands with ranges `[a_i, b_i]`.
pub fn hoeffding_tail_bound(ranges: &[(f64, f64)], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("Hoeffding deviation t={t} must be positive")));
    }
    if ranges.iter().any(|&(a, b)| !(b >= a)) {
        return Err(Error::invalid("every range needs b_i >= a_i"));
    }
    let denom: f64 = ranges.iter().map(|&(a, b)| (b - a) * (b - a)).sum();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * t * t / denom).exp())
}

/// [`hoeffding_tail_bound`] for `n` summands sharing the range `[a, b]`.
pub fn hoeffding_iid(n: usize, a: f64, b: f64, t: f64) -> Result<f64> {
    hoeffding_tail_bound(&vec![(a, b); n], t)
}

fn check_ell_n(ell: u32, n: usize) -> Result<()> {
    if ell < 2 || n == 0 {
        return Err(Error::invalid(format!("need ell >= 2 and n >= 1, got ell={ell}, n={n}")));
    }
    Ok(())
}

/// Largest deviation for which the right-tail lower bound holds, `ell n / 50`.
pub fn right_tail_max_lambda(ell: u32, n: usize) -> f64 {
    ell as f64 * n as f64 / 50.0
}

/// `(exp(12.5 l^2 / (ell^2 n)) - 1)^2 exp(-400 l^2 / (ell^2 n))` without range checks.
pub fn right_tail_general_unchecked(ell: u32, n: usize, lambda: f64) -> f64 {
    let s = lambda * lambda / ((ell * ell) as f64 * n as f64);
    let first = (12.5 * s).exp_m1();
    first * first * (-400.0 * s).exp()
}

/// `exp(-400 l^2 / (ell^2 n))` without range checks.
pub fn right_tail_simplified_unchecked(ell: u32, n: usize, lambda: f64) -> f64 {
    (-400.0 * lambda * lambda / ((ell * ell) as f64 * n as f64)).exp()
}

/// Lower bound on `P{sum (Y_i - E Y_i) >= lambda}` for `Y_i` i.i.d. uniform on
/// `{1..ell}`; valid for `0 < lambda <= ell n / 50`.
pub fn right_tail_lower_bound(ell: u32, n: usize, lambda: f64) -> Result<f64> {
    check_ell_n(ell, n)?;
    let hi = right_tail_max_lambda(ell, n);
    if !(lambda > 0.0 && lambda <= hi) {
        return Err(Error::invalid(format!("lambda={lambda} outside (0, {hi}]")));
    }
    Ok(right_tail_general_unchecked(ell, n, lambda))
}

/// The simplified form, valid for `ell sqrt(n) / 3 <= lambda <= ell n / 50`.
pub fn right_tail_lower_bound_simplified(ell: u32, n: usize, lambda: f64) -> Result<f64> {
    check_ell_n(ell, n)?;
    let lo = ell as f64 * (n as f64).sqrt() / 3.0;
    let hi = right_tail_max_lambda(ell, n);
    if !(lambda >= lo && lambda <= hi) {
        return Err(Error::invalid(format!("lambda={lambda} outside [{lo}, {hi}]")));
    }
    Ok(right_tail_simplified_unchecked(ell, n, lambda))
}

/// Exact `P{sum (Y_i - E Y_i) >= lambda}` for `Y_i` i.i.d. uniform on `{1..ell}`.
pub fn exact_centered_tail(ell: u32, n: usize, lambda: f64) -> Result<f64> {
    check_ell_n(ell, n)?;
    let pmf = iid_uniform_sum_pmf(ell as usize, n)?;
    let threshold = n as f64 * (ell as f64 + 1.0) / 2.0 + lambda;
    Ok(pmf.tail_at_least((threshold - 1e-9).ceil() as i64))
}

/// `(1 - theta)^2 E[Z]^2 / E[Z^2]`.
pub fn paley_zygmund(mean: f64, second_moment: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta={theta} outside [0, 1]")));
    }
    if !(mean >= 0.0) || !(second_moment > 0.0) || mean * mean > second_moment * (1.0 + 1e-12) {
        return Err(Error::invalid("need mean >= 0, E[Z^2] > 0 and E[Z]^2 <= E[Z^2]"));
    }
    Ok((1.0 - theta).powi(2) * mean * mean / second_moment)
}

/// `lambda_j = j / points * ell n / 50` for `j = 1..=points`.
pub fn lambda_grid(ell: u32, n: usize, points: usize) -> Vec<f64> {
    let hi = right_tail_max_lambda(ell, n);
    (1..=points).map(|j| j as f64 / points as f64 * hi).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub ell: u32,
    pub n: usize,
    pub lambda: f64,
    pub exact_tail: f64,
    pub hoeffding: f64,
    /// `None` when `lambda` lies outside `(0, ell n / 50]`.
    pub pz_lower: Option<f64>,
}

pub fn bounds_row(ell: u32, n: usize, lambda: f64) -> Result<BoundsRow> {
    check_ell_n(ell, n)?;
    if !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda={lambda} is not finite")));
    }
    let hoeffding = if lambda > 0.0 {
        hoeffding_iid(n, 1.0, ell as f64, lambda)?
    } else {
        1.0
    };
    Ok(BoundsRow {
        ell,
        n,
        lambda,
        exact_tail: exact_centered_tail(ell, n, lambda)?,
        hoeffding,
        pz_lower: right_tail_lower_bound(ell, n, lambda).ok(),
    })
}

pub const BOUNDS_CSV_HEADER: &str = "ell,n,lambda,exact_tail,hoeffding,pz_lower";

pub fn bounds_csv(rows: &[BoundsRow]) -> String {
    let mut out = format!("{BOUNDS_CSV_HEADER}\n");
    for r in rows {
        let pz = r.pz_lower.map_or_else(|| "invalid".to_string(), fmt_sig17);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.ell,
            r.n,
            fmt_sig17(r.lambda),
            fmt_sig17(r.exact_tail),
            fmt_sig17(r.hoeffding),
            pz
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Quantile lower bounds

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileBoundForm {
    /// Uniform over homopolymer-free strands: `2n - sqrt(5 n ln(1/q))`.
    NoHomopolymer,
    /// Uniform over all strands: `2.5n - sqrt(5 n ln(1/q))`.
    Uniform,
    /// Repeat-biased law: `2.5n + (2/3) delta n - 5 sqrt(n ln(1/q))`.
    Biased { delta: f64 },
}

impl QuantileBoundForm {
    pub fn for_universe(universe: Universe) -> Self {
        match universe {
            Universe::Unconstrained => QuantileBoundForm::Uniform,
            Universe::NoHomopolymer => QuantileBoundForm::NoHomopolymer,
        }
    }
}

/// Closed-form lower bound on the `q`-quantile of the best reference's cost.
/// `q = 1` is accepted and drops the logarithmic term.
pub fn lb_quantile_bound(form: QuantileBoundForm, n: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("quantile level {q} outside (0, 1]")));
    }
    let n = n as f64;
    let log = (1.0 / q).ln();
    match form {
        QuantileBoundForm::NoHomopolymer => Ok(2.0 * n - (5.0 * n * log).sqrt()),
        QuantileBoundForm::Uniform => Ok(2.5 * n - (5.0 * n * log).sqrt()),
        QuantileBoundForm::Biased { delta } => {
            if !(delta > 0.0 && delta <= MAX_LEMMA_DELTA) {
                return Err(Error::invalid(format!("delta={delta} outside (0, 1/600]")));
            }
            Ok(2.5 * n + 2.0 / 3.0 * delta * n - 5.0 * (n * log).sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// Conditional expectations under the repeat-biased law

fn check_lemma_delta(delta: f64) -> Result<()> {
    if !(0.0..=MAX_LEMMA_DELTA).contains(&delta) {
        return Err(Error::invalid(format!("delta={delta} outside [0, 1/600]")));
    }
    Ok(())
}

/// Next-base law: repeat `prev` with `1/4 + delta`, others `1/4 - delta/3`;
/// uniform when there is no previous base.
fn transition(prev: Option<Base>, delta: f64) -> [f64; 4] {
    match prev {
        None => [0.25; 4],
        Some(p) => {
            let mut t = [0.25 - delta / 3.0; 4];
            t[p.code() as usize] = 0.25 + delta;
            t
        }
    }
}

/// Previous strand base implied by the reference position; position 0 means
/// nothing has been printed and the next base is uniform.
fn previous_base(reference: &ReferenceStrand, tau_star: u64) -> Option<Base> {
    (tau_star > 0).then(|| reference.base_at(tau_star))
}

/// `E[min(X_i, 5) | tau_{i-1} = tau_star]` under `D_{1/4 + delta}`.
pub fn conditional_single_expectation(reference: &ReferenceStrand, tau_star: u64, delta: f64) -> Result<f64> {
    check_lemma_delta(delta)?;
    let start = reference.cursor_at(tau_star);
    let probs = transition(previous_base(reference, tau_star), delta);
    let k: KahanSum = Base::ALL
        .iter()
        .map(|&b| {
            let mut c = start;
            probs[b.code() as usize] * reference.step(&mut c, b).min(JUMP_CAP) as f64
        })
        .collect();
    Ok(k.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletExpectation {
    /// `E[Y_i], E[Y_{i+1}], E[Y_{i+2}]` given `tau_{i-1} = tau_star`.
    pub per_position: [f64; 3],
    /// Mean of the three.
    pub mean: f64,
}

/// Exact conditional expectations of the next three capped jumps, by
/// enumerating all 64 base triples.
pub fn conditional_triplet_expectation(
    reference: &ReferenceStrand,
    tau_star: u64,
    delta: f64,
) -> Result<TripletExpectation> {
    check_lemma_delta(delta)?;
    let start = reference.cursor_at(tau_star);
    let first = transition(previous_base(reference, tau_star), delta);
    let mut acc = [KahanSum::default(); 3];
    for b1 in Base::ALL {
        let p1 = first[b1.code() as usize];
        let mut c1 = start;
        let y1 = reference.step(&mut c1, b1).min(JUMP_CAP) as f64;
        let second = transition(Some(b1), delta);
        for b2 in Base::ALL {
            let p2 = p1 * second[b2.code() as usize];
            let mut c2 = c1;
            let y2 = reference.step(&mut c2, b2).min(JUMP_CAP) as f64;
            let third = transition(Some(b2), delta);
            for b3 in Base::ALL {
                let p3 = p2 * third[b3.code() as usize];
                let mut c3 = c2;
                let y3 = reference.step(&mut c3, b3).min(JUMP_CAP) as f64;
                acc[0].add(p3 * y1);
                acc[1].add(p3 * y2);
                acc[2].add(p3 * y3);
            }
        }
    }
    let per_position = [acc[0].value(), acc[1].value(), acc[2].value()];
    Ok(TripletExpectation {
        per_position,
        mean: per_position.iter().sum::<f64>() / 3.0,
    })
}

// ---------------------------------------------------------------------------
// Coupling

/// Parameters of the coupling between a uniform pool of size `M` and a biased
/// pool of size `floor(sqrt(M))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    /// Mixing weight `1 / sqrt(M)`.
    pub phi: f64,
    /// `ceil((1/4 + delta) n)`; `L` is the set of strands with at most this many repeats.
    pub threshold_l: usize,
}

/// `min(sqrt(ln(M/16) / (16 n)), 0.1)`, and `0` when `M <= 16`.
pub fn max_coupling_delta(m: usize, n: usize) -> f64 {
    if m <= 16 || n == 0 {
        return 0.0;
    }
    ((m as f64 / 16.0).ln() / (16.0 * n as f64)).sqrt().min(0.1)
}

impl CouplingParams {
    pub fn new(m: usize, n: usize, delta: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("need M >= 1 and n >= 1"));
        }
        let hi = max_coupling_delta(m, n);
        if !(delta >= 0.0 && delta <= hi * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("delta={delta} outside [0, {hi}] for M={m}, n={n}")));
        }
        Ok(CouplingParams {
            m,
            n,
            delta,
            phi: 1.0 / (m as f64).sqrt(),
            threshold_l: ((0.25 + delta) * n as f64).ceil() as usize,
        })
    }

    pub fn at_max_delta(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, max_coupling_delta(m, n))
    }

    pub fn uniform(&self) -> RepeatDistribution {
        RepeatDistribution::new(0.25, self.n).expect("valid law")
    }

    pub fn biased(&self) -> RepeatDistribution {
        RepeatDistribution::new(0.25 + self.delta, self.n).expect("valid law")
    }

    pub fn in_l(&self, strand: &Strand) -> bool {
        strand.repetition_count() <= self.threshold_l
    }
}

/// `P{Binomial(trials, p) <= k}` by a log-space term recurrence.
pub fn binomial_cdf(trials: usize, p: f64, k: usize) -> f64 {
    if k >= trials {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_term = trials as f64 * lq;
    let mut sum = KahanSum::default();
    sum.add(log_term.exp());
    for j in 1..=k {
        log_term += ((trials - j + 1) as f64 / j as f64).ln() + lp - lq;
        sum.add(log_term.exp());
    }
    sum.value().min(1.0)
}

/// `D_{1/4+delta}(L)`: the Binomial(n-1, 1/4+delta) CDF at the threshold.
pub fn mass_of_l(params: &CouplingParams) -> f64 {
    binomial_cdf(params.n - 1, 0.25 + params.delta, params.threshold_l)
}

/// Does `D_{1/4}(S) >= 2 phi D_{1/4+delta}(S)` hold for `S` in `L`?
pub fn measure_ratio_check(params: &CouplingParams, strand: &Strand) -> Result<bool> {
    if strand.len() != params.n {
        return Err(Error::invalid("strand length differs from the coupling's n"));
    }
    if !params.in_l(strand) {
        return Err(Error::precondition(format!(
            "strand has {} repeats, above the L threshold {}",
            strand.repetition_count(),
            params.threshold_l
        )));
    }
    let lhs = params.uniform().log_mass(strand);
    let rhs = (2.0 * params.phi).ln() + params.biased().log_mass(strand);
    Ok(lhs >= rhs)
}

/// The measures `A = D_{1/4+delta}( . | L)` and `B = (D_{1/4} - phi A) / (1 - phi)`.
/// Both depend on a strand only through its repetition count.
#[derive(Debug, Clone)]
pub struct MixtureMeasures {
    params: CouplingParams,
    pub mass_l: f64,
    log_uniform: f64,
    log_a_by_d: Vec<f64>,
}

impl MixtureMeasures {
    pub fn new(params: CouplingParams) -> Self {
        let mass_l = mass_of_l(&params);
        let biased = params.biased();
        let log_a_by_d = (0..params.n)
            .map(|d| {
                if d <= params.threshold_l {
                    biased.log_mass_for_repeats(d) - mass_l.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        MixtureMeasures {
            params,
            mass_l,
            log_uniform: -(params.n as f64) * 4f64.ln(),
            log_a_by_d,
        }
    }

    pub fn params(&self) -> &CouplingParams {
        &self.params
    }

    pub fn log_a(&self, strand: &Strand) -> f64 {
        self.log_a_by_d[strand.repetition_count()]
    }

    pub fn a(&self, strand: &Strand) -> f64 {
        self.log_a(strand).exp()
    }

    pub fn uniform(&self, strand: &Strand) -> f64 {
        debug_assert_eq!(strand.len(), self.params.n);
        self.log_uniform.exp()
    }

    /// `B(S)`, computed as `D_{1/4}(S) (1 - phi A(S)/D_{1/4}(S)) / (1 - phi)`.
    pub fn b(&self, strand: &Strand) -> f64 {
        self.log_uniform.exp() * self.b_ratio(strand.repetition_count()) / (1.0 - self.params.phi)
    }

    pub fn log_b(&self, strand: &Strand) -> f64 {
        self.log_uniform + self.b_ratio(strand.repetition_count()).ln() - (1.0 - self.params.phi).ln()
    }

    /// `1 - phi A(S) / D_{1/4}(S)` for strands with `d` repeats; the rejection
    /// sampler's acceptance probability.
    fn b_ratio(&self, d: usize) -> f64 {
        1.0 - self.params.phi * (self.log_a_by_d[d] - self.log_uniform).exp()
    }
}

/// One draw of the coupled pair of pools.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    /// Uniform pool of size `M`.
    pub s: Vec<Strand>,
    /// Biased pool of size `floor(sqrt(M))`.
    pub s_prime: Vec<Strand>,
    /// For each slot of `s`, the index `j` of the `L_j` placed there (0-based), if any.
    pub s_from_l: Vec<Option<usize>>,
    /// For each element of `s_prime`, its index in the `L`-subsequence, if it lies in `L`.
    pub s_prime_l_index: Vec<Option<usize>>,
    /// Number of `L_j` consumed by `s` (always the prefix `L_0..L_{taken-1}`).
    pub l_taken_by_s: usize,
    /// Number of `L_j` among `s_prime` (always a prefix of the `L` sequence).
    pub l_in_s_prime: usize,
    /// Shared `L`-prefix length: `min(l_taken_by_s, l_in_s_prime)`.
    pub intersection: usize,
}

/// Draws the coupling: an i.i.d. biased stream whose first `floor(sqrt(M))`
/// elements form `S'`, and `M` slots of `S` filled by the next unused
/// `L`-element with probability `phi`, otherwise by an independent draw from `B`.
pub fn coupled_sample<R: RngCore + ?Sized>(params: &CouplingParams, rng: &mut R) -> Result<CoupledSample> {
    if params.m < 16 {
        return Err(Error::invalid("coupling needs M >= 16"));
    }
    let measures = MixtureMeasures::new(*params);
    let accept: Vec<f64> = (0..params.n).map(|d| measures.b_ratio(d).clamp(0.0, 1.0)).collect();
    if accept.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("B has a non-finite acceptance probability"));
    }
    let mut stream_rng = rng_from_seed(rng.next_u64());
    let mut pool_rng = rng_from_seed(rng.next_u64());
    let biased = params.biased();
    let uniform = params.uniform();
    let sqrt_m = (params.m as f64).sqrt().floor() as usize;

    let mut l_seq: Vec<Strand> = Vec::new();
    let mut s_prime = Vec::with_capacity(sqrt_m);
    let mut s_prime_l_index = Vec::with_capacity(sqrt_m);
    for _ in 0..sqrt_m {
        let x = biased.sample(&mut stream_rng);
        if params.in_l(&x) {
            s_prime_l_index.push(Some(l_seq.len()));
            l_seq.push(x.clone());
        } else {
            s_prime_l_index.push(None);
        }
        s_prime.push(x);
    }
    let l_in_s_prime = l_seq.len();

    let mut s = Vec::with_capacity(params.m);
    let mut s_from_l = Vec::with_capacity(params.m);
    let mut taken = 0usize;
    for _ in 0..params.m {
        if pool_rng.random::<f64>() < params.phi {
            while l_seq.len() <= taken {
                let x = biased.sample(&mut stream_rng);
                if params.in_l(&x) {
                    l_seq.push(x);
                }
            }
            s.push(l_seq[taken].clone());
            s_from_l.push(Some(taken));
            taken += 1;
        } else {
            let mut tries = 0u64;
            let x = loop {
                let x = uniform.sample(&mut pool_rng);
                if pool_rng.random::<f64>() < accept[x.repetition_count()] {
                    break x;
                }
                tries += 1;
                if tries >= B_RETRY_CAP {
                    return Err(Error::CapExceeded {
                        what: "rejection sampler retries",
                        size: tries as u128,
                        cap: B_RETRY_CAP as u128,
                    });
                }
            };
            s.push(x);
            s_from_l.push(None);
        }
    }
    Ok(CoupledSample {
        s,
        s_prime,
        s_from_l,
        s_prime_l_index,
        l_taken_by_s: taken,
        l_in_s_prime,
        intersection: taken.min(l_in_s_prime),
    })
}
