//! Exact shortest common supersequences and exact optimal batching for tiny pools.
//!
//! The search walks tuples of per-strand cursors. Appending a base advances
//! every cursor whose next character matches it; the goal is the all-done
//! tuple. `h = max remaining characters` is admissible and consistent, since
//! one appended base shortens every remainder by at most one.

use std::collections::HashMap;

use crate::cost::{evaluate_plan, BatchPlan, ReferenceStrand};
use crate::error::{Error, Result};
use crate::pool::StrandPool;
use crate::strand::{Base, Strand};

/// Default limit on the cursor-tuple space `prod (n_i + 1)`.
pub const DEFAULT_STATE_CAP: u64 = 1 << 24;

/// Largest pool accepted by [`optimal_partition_cost`].
pub const MAX_PARTITION_POOL: usize = 12;

/// Greedy subsequence test: does `reference` contain `strand` as a subsequence?
pub fn is_supersequence(reference: &[Base], strand: &Strand) -> bool {
    let mut it = reference.iter();
    strand.bases().all(|b| it.any(|&r| r == b))
}

/// Smallest `t` such that the first `t` bases of `reference` contain `strand`,
/// found by testing `t = 0, 1, 2, ...` with [`is_supersequence`].
pub fn shortest_embedding_prefix(strand: &Strand, reference: &ReferenceStrand) -> u64 {
    // period holds all bases, so 4 periods per base always suffice
    let bound = reference.prefix().len() + reference.period().len() * strand.len();
    let full = reference.first_bases(bound);
    (0..=bound)
        .find(|&t| is_supersequence(&full[..t], strand))
        .expect("the bound always embeds") as u64
}

/// Longest common subsequence length, quadratic dynamic program.
pub fn lcs_length(a: &Strand, b: &Strand) -> usize {
    let a = a.to_bases();
    let b = b.to_bases();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in &a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Exact SCS length. Two-strand inputs use `|a| + |b| - LCS(a, b)`.
pub fn scs_length(batch: &[Strand]) -> Result<usize> {
    scs_length_capped(batch, DEFAULT_STATE_CAP)
}

pub fn scs_length_capped(batch: &[Strand], cap: u64) -> Result<usize> {
    let batch = dedup(batch)?;
    match batch.as_slice() {
        [one] => Ok(one.len()),
        [a, b] => Ok(a.len() + b.len() - lcs_length(a, b)),
        _ => Ok(scs_search(&batch, cap, true)?.len()),
    }
}

/// A shortest common supersequence.
pub fn shortest_common_supersequence(batch: &[Strand]) -> Result<Vec<Base>> {
    shortest_common_supersequence_capped(batch, DEFAULT_STATE_CAP)
}

pub fn shortest_common_supersequence_capped(batch: &[Strand], cap: u64) -> Result<Vec<Base>> {
    let batch = dedup(batch)?;
    match batch.as_slice() {
        [one] => Ok(one.to_bases()),
        [a, b] => Ok(pair_scs(a, b)),
        _ => scs_search(&batch, cap, true),
    }
}

fn dedup(batch: &[Strand]) -> Result<Vec<Strand>> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    let mut v = batch.to_vec();
    v.sort();
    v.dedup();
    Ok(v)
}

fn pair_scs(a: &Strand, b: &Strand) -> Vec<Base> {
    let a = a.to_bases();
    let b = b.to_bases();
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS of a[i..], b[j..]
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i] == b[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(n + m - lcs[0][0]);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push(a[i]);
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Best-first search over cursor tuples. With `heuristic = false` this is
/// plain uniform-cost (breadth-first) search.
pub fn scs_search(batch: &[Strand], cap: u64, heuristic: bool) -> Result<Vec<Base>> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    let strands: Vec<Vec<u8>> = batch.iter().map(|s| s.codes().collect()).collect();
    let radix: Vec<u64> = strands.iter().map(|s| s.len() as u64 + 1).collect();
    let size = radix
        .iter()
        .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
        .unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            what: "SCS state space",
            size,
            cap: cap as u128,
        });
    }
    let encode = |cur: &[usize]| -> u64 {
        cur.iter().zip(&radix).rev().fold(0u64, |acc, (&c, &r)| acc * r + c as u64)
    };
    let decode = |mut key: u64, out: &mut Vec<usize>| {
        out.clear();
        for &r in &radix {
            out.push((key % r) as usize);
            key /= r;
        }
    };
    let h = |cur: &[usize]| -> usize {
        if !heuristic {
            return 0;
        }
        cur.iter().zip(&strands).map(|(&c, s)| s.len() - c).max().unwrap_or(0)
    };

    let start = vec![0usize; strands.len()];
    let goal_key = encode(&strands.iter().map(Vec::len).collect::<Vec<_>>());
    let start_key = encode(&start);
    // key -> (g, parent key, base appended to reach key)
    let mut best: HashMap<u64, (u32, u64, u8)> = HashMap::new();
    best.insert(start_key, (0, u64::MAX, 0));
    // bucket queue indexed by f = g + h
    let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); strands.iter().map(Vec::len).sum::<usize>() + 2];
    buckets[h(&start)].push(start_key);
    let mut cur = Vec::with_capacity(strands.len());
    let mut next = Vec::with_capacity(strands.len());
    let mut f = 0;
    while f < buckets.len() {
        let Some(key) = buckets[f].pop() else {
            f += 1;
            continue;
        };
        let g = best[&key].0;
        decode(key, &mut cur);
        if g as usize + h(&cur) != f {
            // stale entry superseded by a cheaper path
            continue;
        }
        if key == goal_key {
            let mut out = Vec::with_capacity(g as usize);
            let mut k = key;
            while k != start_key {
                let (_, parent, base) = best[&k];
                out.push(Base::from_code(base));
                k = parent;
            }
            out.reverse();
            return Ok(out);
        }
        for code in 0..4u8 {
            next.clear();
            let mut advanced = false;
            for (&c, s) in cur.iter().zip(&strands) {
                if c < s.len() && s[c] == code {
                    next.push(c + 1);
                    advanced = true;
                } else {
                    next.push(c);
                }
            }
            if !advanced {
                continue;
            }
            let nk = encode(&next);
            let ng = g + 1;
            if best.get(&nk).is_none_or(|&(old, _, _)| ng < old) {
                best.insert(nk, (ng, key, code));
                buckets[ng as usize + h(&next)].push(nk);
            }
        }
    }
    unreachable!("the all-done state is always reachable")
}

/// Exact minimum over balanced partitions of `sum SCS(batch)`.
///
/// Candidates are restricted-growth strings (strand 0 opens batch 0, each
/// later strand joins an open batch or opens the next one), so every
/// unordered partition is visited once. Only strict improvements replace the
/// incumbent, which makes the winner the lexicographically smallest
/// assignment among optimal ones. Each batch is printed from its SCS followed
/// by an `(ACGT)*` tail, so the evaluated plan cost equals the SCS sum.
pub fn optimal_partition_cost(pool: &StrandPool, k: usize) -> Result<(BatchPlan, u64)> {
    optimal_partition_cost_capped(pool, k, DEFAULT_STATE_CAP)
}

pub fn optimal_partition_cost_capped(pool: &StrandPool, k: usize, cap: u64) -> Result<(BatchPlan, u64)> {
    let m = pool.len();
    if m > MAX_PARTITION_POOL {
        return Err(Error::CapExceeded {
            what: "partition pool size",
            size: m as u128,
            cap: MAX_PARTITION_POOL as u128,
        });
    }
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k={k} must lie in [1, {m}]")));
    }
    let mut search = PartitionSearch {
        strands: pool.strands(),
        k,
        small: m / k,
        big_needed: m % k,
        cap,
        assign: vec![0; m],
        sizes: Vec::with_capacity(k),
        memo: HashMap::new(),
        best: None,
    };
    search.recurse(0)?;
    let (total, assign) = search.best.expect("a balanced partition always exists");
    let mut batches = vec![Vec::new(); k];
    for (i, &g) in assign.iter().enumerate() {
        batches[g].push(i);
    }
    let references = batches
        .iter()
        .map(|b| {
            let members: Vec<Strand> = b.iter().map(|&i| pool.get(i).clone()).collect();
            Ok(ReferenceStrand::with_acgt_tail(shortest_common_supersequence_capped(&members, cap)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = evaluate_plan(pool, &BatchPlan::unevaluated(batches, references))?;
    debug_assert_eq!(plan.total_cost, total);
    Ok((plan, total))
}

struct PartitionSearch<'a> {
    strands: &'a [Strand],
    k: usize,
    small: usize,
    big_needed: usize,
    cap: u64,
    assign: Vec<usize>,
    sizes: Vec<usize>,
    memo: HashMap<u32, usize>,
    best: Option<(u64, Vec<usize>)>,
}

impl PartitionSearch<'_> {
    fn recurse(&mut self, i: usize) -> Result<()> {
        let m = self.strands.len();
        if i == m {
            if self.sizes.len() != self.k {
                return Ok(());
            }
            let total = self.total()?;
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.assign.clone()));
            }
            return Ok(());
        }
        // batches still to open must each receive at least `small` strands
        let open = self.sizes.len();
        let unopened = self.k - open;
        let capacity: usize = self
            .sizes
            .iter()
            .map(|&s| self.max_size().saturating_sub(s))
            .sum::<usize>()
            + unopened * self.max_size();
        if capacity < m - i {
            return Ok(());
        }
        let deficit: usize = self.sizes.iter().map(|&s| self.small.saturating_sub(s)).sum::<usize>()
            + unopened * self.small;
        if deficit > m - i {
            return Ok(());
        }
        for g in 0..=open.min(self.k - 1) {
            if g == open {
                self.sizes.push(0);
            }
            if self.sizes[g] < self.max_size() && self.big_ok_after_add(g) {
                self.sizes[g] += 1;
                self.assign[i] = g;
                self.recurse(i + 1)?;
                self.sizes[g] -= 1;
            }
            if g == open {
                self.sizes.pop();
            }
        }
        Ok(())
    }

    fn max_size(&self) -> usize {
        if self.big_needed > 0 {
            self.small + 1
        } else {
            self.small
        }
    }

    fn big_ok_after_add(&self, g: usize) -> bool {
        let big = self.sizes.iter().filter(|&&s| s == self.small + 1).count();
        self.sizes[g] < self.small || big < self.big_needed
    }

    fn total(&mut self) -> Result<u64> {
        let mut masks = vec![0u32; self.k];
        for (i, &g) in self.assign.iter().enumerate() {
            masks[g] |= 1 << i;
        }
        let mut total = 0u64;
        for mask in masks {
            let len = match self.memo.get(&mask) {
                Some(&v) => v,
                None => {
                    let members: Vec<Strand> = (0..self.strands.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| self.strands[i].clone())
                        .collect();
                    let v = scs_length_capped(&members, self.cap)?;
                    self.memo.insert(mask, v);
                    v
                }
            };
            total += len as u64;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::strand::{enumerate_universe, RepeatDistribution, Universe};
    use rand::Rng;

    fn s(x: &str) -> Strand {
        x.parse().unwrap()
    }

    fn random_batch(rng: &mut impl Rng, size: usize, max_n: usize) -> Vec<Strand> {
        let n = rng.random_range(1..=max_n);
        let dist = RepeatDistribution::new(0.25, n).unwrap();
        (0..size).map(|_| dist.sample(rng)).collect()
    }

    /// Every common subsequence of `a` and `b`, by subset enumeration of `a`.
    fn lcs_by_subsets(a: &Strand, b: &Strand) -> usize {
        let a = a.to_bases();
        let b = b.to_bases();
        (0u32..1 << a.len())
            .filter_map(|mask| {
                let sub: Vec<Base> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
                is_supersequence(&b, &Strand::from_bases(&sub)).then_some(sub.len())
            })
            .max()
            .unwrap()
    }

    #[test]
    fn supersequence_examples() {
        assert!(is_supersequence(&s("AGCT").to_bases(), &s("AGCT")));
        assert!(is_supersequence(&s("AGCAT").to_bases(), &s("AGCT")));
        assert!(!is_supersequence(&s("AGC").to_bases(), &s("AGCT")));
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length(&s("ACGTTG"), &s("ACGTTG")), 6);
        assert_eq!(lcs_length(&s("AAAA"), &s("CCCC")), 0);
        assert_eq!(lcs_length(&s("AGCT"), &s("GCAT")), 3);
        assert_eq!(lcs_by_subsets(&s("AGCT"), &s("GCAT")), 3);
    }

    #[test]
    fn lcs_matches_subset_oracle() {
        let mut rng = rng_from_seed(21);
        for _ in 0..200 {
            let b = random_batch(&mut rng, 2, 9);
            assert_eq!(lcs_length(&b[0], &b[1]), lcs_by_subsets(&b[0], &b[1]));
        }
    }

    #[test]
    fn scs_examples() {
        assert_eq!(scs_length(&[s("ACGTA"), s("ACGTA"), s("ACGTA")]).unwrap(), 5);
        let v = scs_length(&[s("AGCT"), s("GCAT")]).unwrap();
        assert_eq!(v, 5);
        let w = shortest_common_supersequence(&[s("AGCT"), s("GCAT")]).unwrap();
        assert_eq!(w.len(), 5);
        assert!(is_supersequence(&w, &s("AGCT")) && is_supersequence(&w, &s("GCAT")));
        assert!(scs_length(&[]).is_err());
    }

    #[test]
    fn search_matches_pair_identity() {
        let mut rng = rng_from_seed(8);
        for _ in 0..200 {
            let b = random_batch(&mut rng, 2, 12);
            let n = b[0].len();
            let found = scs_search(&b, DEFAULT_STATE_CAP, true).unwrap();
            assert_eq!(found.len(), 2 * n - lcs_length(&b[0], &b[1]));
            assert!(b.iter().all(|x| is_supersequence(&found, x)));
        }
    }

    #[test]
    fn heuristic_is_admissible() {
        let mut rng = rng_from_seed(13);
        for _ in 0..200 {
            let size = rng.random_range(2..=4);
            let b = random_batch(&mut rng, size, 7);
            let guided = scs_search(&b, DEFAULT_STATE_CAP, true).unwrap();
            let plain = scs_search(&b, DEFAULT_STATE_CAP, false).unwrap();
            assert_eq!(guided.len(), plain.len());
        }
    }

    #[test]
    fn state_cap() {
        let mut rng = rng_from_seed(1);
        let dist = RepeatDistribution::new(0.25, 20).unwrap();
        let b: Vec<Strand> = (0..6).map(|_| dist.sample(&mut rng)).collect();
        let err = scs_length(&b).unwrap_err();
        assert_eq!(err.class().exit_code(), 4);
    }

    #[test]
    fn greedy_cost_is_shortest_embedding() {
        let mut rng = rng_from_seed(31);
        let refs: Vec<ReferenceStrand> = (0..20)
            .map(|_| crate::exact_dist::random_reference(8, &mut rng))
            .chain([ReferenceStrand::acgt(), ReferenceStrand::tgca()])
            .collect();
        for n in 1..=4 {
            for strand in enumerate_universe(n, Universe::Unconstrained).unwrap() {
                for r in &refs {
                    assert_eq!(r.cost(&strand), shortest_embedding_prefix(&strand, r));
                }
            }
        }
    }

    #[test]
    fn monotone_and_bounded() {
        let mut rng = rng_from_seed(17);
        for _ in 0..100 {
            let b = random_batch(&mut rng, 4, 6);
            let n = b[0].len();
            let full = scs_length(&b).unwrap();
            let part = scs_length(&b[..3]).unwrap();
            assert!(part <= full);
            assert!(full >= n && full <= 4 * n);
        }
    }

    #[test]
    fn singleton_partition() {
        let pool = StrandPool::from_strs(&["AGCT", "GCAT", "CAGA"], Universe::Unconstrained).unwrap();
        let (plan, total) = optimal_partition_cost(&pool, 3).unwrap();
        assert_eq!(total, 12);
        assert_eq!(plan.total_cost, 12);
    }

    #[test]
    fn worked_example_partition() {
        let pool = StrandPool::from_strs(&["AGCT", "GCAT", "CAGA", "GAGC"], Universe::NoHomopolymer).unwrap();
        let (plan, total) = optimal_partition_cost(&pool, 2).unwrap();
        assert!(total <= 11);
        assert_eq!(plan.total_cost, total);
        assert_eq!(plan.batches.len(), 2);
    }

    #[test]
    fn uneven_partition_sizes() {
        let mut rng = rng_from_seed(3);
        let dist = RepeatDistribution::new(0.25, 3).unwrap();
        let pool = StrandPool::generate(&dist, Universe::Unconstrained, 7, &mut rng).unwrap();
        let (plan, _) = optimal_partition_cost(&pool, 3).unwrap();
        let mut sizes: Vec<usize> = plan.batches.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 3]);
        assert!(optimal_partition_cost(&pool, 8).is_err());
    }

    #[test]
    fn partition_matches_exhaustive_assignment() {
        // every labelled assignment, not just restricted-growth ones
        let mut rng = rng_from_seed(44);
        for _ in 0..10 {
            let dist = RepeatDistribution::new(0.25, 4).unwrap();
            let pool = StrandPool::generate(&dist, Universe::Unconstrained, 6, &mut rng).unwrap();
            let (_, total) = optimal_partition_cost(&pool, 3).unwrap();
            let mut best = u64::MAX;
            for code in 0..3usize.pow(6) {
                let labels: Vec<usize> = (0..6).map(|i| code / 3usize.pow(i) % 3).collect();
                if (0..3).any(|g| labels.iter().filter(|&&l| l == g).count() != 2) {
                    continue;
                }
                let sum: u64 = (0..3)
                    .map(|g| {
                        let b: Vec<Strand> = (0..6).filter(|&i| labels[i] == g).map(|i| pool.get(i).clone()).collect();
                        scs_length(&b).unwrap() as u64
                    })
                    .sum();
                best = best.min(sum);
            }
            assert_eq!(total, best);
        }
    }
}
