//! Strands over the DNA alphabet, stored 2 bits per base.
//!
//! Base codes are `A=0, C=1, G=2, T=3`. Base `i` of a strand lives in word
//! `i / 32` at bit offset `2 * (i % 32)`; bits past the strand length are
//! always zero, so derived equality and hashing act on the packed words.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

const BASES_PER_WORD: usize = 32;
const LOW_LANES: u64 = 0x5555_5555_5555_5555;

/// Default limit on the number of strands an exhaustive enumeration may yield.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Base {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Base {
    pub const ALL: [Base; 4] = [Base::A, Base::C, Base::G, Base::T];

    #[inline]
    pub fn from_code(code: u8) -> Base {
        Base::ALL[(code & 3) as usize]
    }

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Watson-Crick complement: A<->T, C<->G.
    #[inline]
    pub fn complement(self) -> Base {
        Base::from_code(self.code() ^ 3)
    }

    pub fn to_char(self) -> char {
        match self {
            Base::A => 'A',
            Base::C => 'C',
            Base::G => 'G',
            Base::T => 'T',
        }
    }

    pub fn from_char(c: char) -> Result<Base> {
        match c {
            'A' => Ok(Base::A),
            'C' => Ok(Base::C),
            'G' => Ok(Base::G),
            'T' => Ok(Base::T),
            other => Err(Error::parse(format!("invalid base {other:?}"))),
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// Parses a base string such as `"ACGT"`; used for reference prefixes and periods.
pub fn parse_bases(s: &str) -> Result<Vec<Base>> {
    s.chars().map(Base::from_char).collect()
}

pub fn bases_to_string(bases: &[Base]) -> String {
    bases.iter().map(|b| b.to_char()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Universe {
    Unconstrained,
    NoHomopolymer,
}

impl Universe {
    pub fn as_str(self) -> &'static str {
        match self {
            Universe::Unconstrained => "unconstrained",
            Universe::NoHomopolymer => "no-homopolymer",
        }
    }

    /// Number of strands of length `n` in this universe, saturating at `u128::MAX`.
    pub fn size(self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let pow = |base: u128, exp: usize| -> u128 {
            (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX)
        };
        match self {
            Universe::Unconstrained => pow(4, n),
            Universe::NoHomopolymer => pow(3, n - 1).saturating_mul(4),
        }
    }

    pub fn contains(self, strand: &Strand) -> bool {
        match self {
            Universe::Unconstrained => true,
            Universe::NoHomopolymer => !strand.has_homopolymer(),
        }
    }
}

impl fmt::Display for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Universe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unconstrained" => Ok(Universe::Unconstrained),
            "no-homopolymer" => Ok(Universe::NoHomopolymer),
            other => Err(Error::parse(format!("unknown universe {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Strand {
    words: Vec<u64>,
    len: usize,
}

impl Strand {
    fn zeroed(len: usize) -> Strand {
        Strand {
            words: vec![0; len.div_ceil(BASES_PER_WORD)],
            len,
        }
    }

    pub fn from_bases(bases: &[Base]) -> Strand {
        let mut s = Strand::zeroed(bases.len());
        for (i, &b) in bases.iter().enumerate() {
            s.words[i / BASES_PER_WORD] |= (b.code() as u64) << (2 * (i % BASES_PER_WORD));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Packed words; base `i` occupies bits `2*(i%32)..2*(i%32)+2` of word `i/32`.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> Base {
        assert!(i < self.len, "base index {i} out of range for length {}", self.len);
        Base::from_code((self.words[i / BASES_PER_WORD] >> (2 * (i % BASES_PER_WORD))) as u8)
    }

    /// Raw 2-bit codes, in order.
    #[inline]
    pub fn codes(&self) -> impl Iterator<Item = u8> + '_ {
        let len = self.len;
        self.words.iter().enumerate().flat_map(move |(j, &w)| {
            let lanes = (len - j * BASES_PER_WORD).min(BASES_PER_WORD);
            (0..lanes).map(move |l| ((w >> (2 * l)) & 3) as u8)
        })
    }

    pub fn bases(&self) -> impl Iterator<Item = Base> + '_ {
        self.codes().map(Base::from_code)
    }

    pub fn to_bases(&self) -> Vec<Base> {
        self.bases().collect()
    }

    /// The first `len` bases.
    pub fn prefix(&self, len: usize) -> Strand {
        assert!(len <= self.len);
        Strand::from_bases(&self.to_bases()[..len])
    }

    fn last_word_mask(&self) -> u64 {
        match self.len % BASES_PER_WORD {
            0 => u64::MAX,
            r => (1u64 << (2 * r)) - 1,
        }
    }

    /// Base-wise complement, computed on the packed words.
    pub fn complement(&self) -> Strand {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= self.last_word_mask();
        }
        Strand {
            words,
            len: self.len,
        }
    }

    /// Number of indices `i` with `S_i = S_{i+1}`.
    pub fn repetition_count(&self) -> usize {
        if self.len < 2 {
            return 0;
        }
        let pairs = self.len - 1;
        let mut count = 0usize;
        for (j, &w) in self.words.iter().enumerate() {
            let next = self.words.get(j + 1).copied().unwrap_or(0);
            let shifted = (w >> 2) | (next << 62);
            let x = w ^ shifted;
            let mut equal = !(x | (x >> 1)) & LOW_LANES;
            let first = j * BASES_PER_WORD;
            if first >= pairs {
                break;
            }
            let valid = (pairs - first).min(BASES_PER_WORD);
            if valid < BASES_PER_WORD {
                equal &= (1u64 << (2 * valid)) - 1;
            }
            count += equal.count_ones() as usize;
        }
        count
    }

    pub fn has_homopolymer(&self) -> bool {
        self.repetition_count() > 0
    }

    pub fn is_supersequence_of(&self, other: &Strand) -> bool {
        crate::scs::is_supersequence(&self.to_bases(), other)
    }
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bases().map(Base::to_char).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Strand({self})")
    }
}

impl FromStr for Strand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Strand::from_bases(&parse_bases(s)?))
    }
}

/// The repeat-biased strand law `D_{p,n}`: uniform first base, then each base
/// repeats its predecessor with probability `p` and otherwise is uniform over
/// the three other bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatDistribution {
    p: f64,
    n: usize,
}

impl RepeatDistribution {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("repeat probability {p} outside [0, 1]")));
        }
        if n == 0 {
            return Err(Error::invalid("strand length must be at least 1"));
        }
        Ok(RepeatDistribution { p, n })
    }

    /// The law matching a universe: `p = 1/4` (uniform) or `p = 0` (no homopolymers).
    pub fn for_universe(universe: Universe, n: usize) -> Result<Self> {
        match universe {
            Universe::Unconstrained => Self::new(0.25, n),
            Universe::NoHomopolymer => Self::new(0.0, n),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Strand {
        let n = self.n;
        let mut strand = Strand::zeroed(n);
        if self.p == 0.25 {
            for w in strand.words.iter_mut() {
                *w = rng.next_u64();
            }
            if let Some(last) = strand.words.last_mut() {
                *last &= match n % BASES_PER_WORD {
                    0 => u64::MAX,
                    r => (1u64 << (2 * r)) - 1,
                };
            }
            return strand;
        }
        let mut prev = rng.random_range(0..4u8);
        strand.words[0] = prev as u64;
        for i in 1..n {
            let repeat = self.p > 0.0 && rng.random::<f64>() < self.p;
            let code = if repeat {
                prev
            } else {
                (prev + 1 + rng.random_range(0..3u8)) & 3
            };
            strand.words[i / BASES_PER_WORD] |= (code as u64) << (2 * (i % BASES_PER_WORD));
            prev = code;
        }
        strand
    }

    /// `log D_{p,n}(S) = log(1/4) + (n - d - 1) log((1-p)/3) + d log p`, with
    /// `-inf` for zero-mass strands.
    pub fn log_mass(&self, strand: &Strand) -> f64 {
        debug_assert_eq!(strand.len(), self.n);
        self.log_mass_for_repeats(strand.repetition_count())
    }

    /// Log-mass of any strand with `d` repetitions (the mass depends on `d` only).
    pub fn log_mass_for_repeats(&self, d: usize) -> f64 {
        let n = self.n;
        if d + 1 > n {
            return f64::NEG_INFINITY;
        }
        let changes = (n - d - 1) as f64;
        let d = d as f64;
        let term = |count: f64, prob: f64| -> f64 {
            if count == 0.0 {
                0.0
            } else if prob == 0.0 {
                f64::NEG_INFINITY
            } else {
                count * prob.ln()
            }
        };
        -(4f64.ln()) + term(changes, (1.0 - self.p) / 3.0) + term(d, self.p)
    }
}

/// Lexicographic enumeration of a strand universe.
pub struct UniverseIter {
    n: usize,
    universe: Universe,
    // digit[0] in 0..4, digit[i>0] in 0..4 (unconstrained) or 0..3 (no-homopolymer)
    digits: Vec<u8>,
    done: bool,
}

impl UniverseIter {
    fn radix(&self, i: usize) -> u8 {
        match (self.universe, i) {
            (_, 0) | (Universe::Unconstrained, _) => 4,
            (Universe::NoHomopolymer, _) => 3,
        }
    }

    fn current(&self) -> Strand {
        let mut bases = Vec::with_capacity(self.n);
        let mut prev = 0u8;
        for (i, &d) in self.digits.iter().enumerate() {
            let code = match (self.universe, i) {
                (_, 0) | (Universe::Unconstrained, _) => d,
                // d-th base (ascending) among the three bases != prev
                (Universe::NoHomopolymer, _) => {
                    if d < prev {
                        d
                    } else {
                        d + 1
                    }
                }
            };
            bases.push(Base::from_code(code));
            prev = code;
        }
        Strand::from_bases(&bases)
    }
}

impl Iterator for UniverseIter {
    type Item = Strand;

    fn next(&mut self) -> Option<Strand> {
        if self.done {
            return None;
        }
        let out = self.current();
        let mut i = self.n;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.radix(i) {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

/// Every strand of length `n` in `universe`, in lexicographic order (A < C < G < T).
pub fn enumerate_universe(n: usize, universe: Universe) -> Result<UniverseIter> {
    enumerate_universe_capped(n, universe, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_universe_capped(n: usize, universe: Universe, cap: u64) -> Result<UniverseIter> {
    if n == 0 {
        return Err(Error::invalid("strand length must be at least 1"));
    }
    let size = universe.size(n);
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            what: "universe size",
            size,
            cap: cap as u128,
        });
    }
    Ok(UniverseIter {
        n,
        universe,
        digits: vec![0; n],
        done: false,
    })
}
