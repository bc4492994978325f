//! Strand pools and their on-disk text format.
//!
//! ```text
//! #synthspan-pool v1 n=4 universe=no-homopolymer
//! AGCT
//! GCAT
//! ```
//!
//! One strand per line, uppercase `ACGT`, LF endings, no trailing blank lines.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::task_rng;
use crate::strand::{RepeatDistribution, Strand, Universe};

const HEADER_MAGIC: &str = "#synthspan-pool";
const HEADER_VERSION: &str = "v1";

/// Strands per seeded chunk in [`StrandPool::generate_parallel`].
const GEN_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandPool {
    strands: Vec<Strand>,
    universe: Universe,
    n: usize,
}

impl StrandPool {
    pub fn new(strands: Vec<Strand>, universe: Universe, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("strand length must be at least 1"));
        }
        for (i, s) in strands.iter().enumerate() {
            if s.len() != n {
                return Err(Error::invalid(format!(
                    "strand {i} has length {}, pool length is {n}",
                    s.len()
                )));
            }
            if !universe.contains(s) {
                return Err(Error::invalid(format!("strand {i} ({s}) contains a homopolymer")));
            }
        }
        Ok(StrandPool { strands, universe, n })
    }

    /// Parses strands from text lines; the pool length is taken from the first strand.
    pub fn from_strs(lines: &[&str], universe: Universe) -> Result<Self> {
        let strands: Vec<Strand> = lines.iter().map(|l| l.parse()).collect::<Result<_>>()?;
        let n = strands
            .first()
            .map(Strand::len)
            .ok_or_else(|| Error::invalid("pool must contain at least one strand"))?;
        Self::new(strands, universe, n)
    }

    /// `m` i.i.d. draws from `dist`, using one generator for the whole pool.
    pub fn generate<R: Rng + ?Sized>(
        dist: &RepeatDistribution,
        universe: Universe,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let strands = (0..m).map(|_| dist.sample(rng)).collect();
        Self::new(strands, universe, dist.n())
    }

    /// `m` i.i.d. draws, generated in fixed-size chunks seeded by
    /// `mix64(seed, chunk)`. Output does not depend on the thread count.
    pub fn generate_parallel(
        dist: &RepeatDistribution,
        universe: Universe,
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        let chunks = m.div_ceil(GEN_CHUNK);
        let strands: Vec<Strand> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = task_rng(seed, c as u64);
                let len = GEN_CHUNK.min(m - c * GEN_CHUNK);
                (0..len).map(move |_| dist.sample(&mut rng)).collect::<Vec<_>>()
            })
            .collect();
        Self::new(strands, universe, dist.n())
    }

    pub fn strands(&self) -> &[Strand] {
        &self.strands
    }

    pub fn get(&self, i: usize) -> &Strand {
        &self.strands[i]
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.strands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strands.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.strands.len() * (self.n + 1) + 64);
        let _ = writeln!(
            out,
            "{HEADER_MAGIC} {HEADER_VERSION} n={} universe={}",
            self.n, self.universe
        );
        for s in &self.strands {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        if text.contains('\r') {
            return Err(Error::parse("pool file must use LF line endings"));
        }
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut lines = body.split('\n');
        let header = lines.next().unwrap_or("");
        let (n, universe) = parse_header(header)?;
        let mut strands = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.is_empty() {
                return Err(Error::parse(format!("blank line at line {lineno}")));
            }
            let s: Strand = line
                .parse()
                .map_err(|e| Error::parse(format!("line {lineno}: {e}")))?;
            if s.len() != n {
                return Err(Error::parse(format!(
                    "line {lineno}: strand length {} does not match header n={n}",
                    s.len()
                )));
            }
            if !universe.contains(&s) {
                return Err(Error::parse(format!(
                    "line {lineno}: homopolymer in a no-homopolymer pool"
                )));
            }
            strands.push(s);
        }
        Self::new(strands, universe, n)
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::parse(format!("pool file is not valid text: {e}")))?;
        Self::parse_text(&text)
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(header: &str) -> Result<(usize, Universe)> {
    let mut parts = header.split(' ');
    if parts.next() != Some(HEADER_MAGIC) {
        return Err(Error::parse(format!("missing pool header, found {header:?}")));
    }
    if parts.next() != Some(HEADER_VERSION) {
        return Err(Error::parse("unsupported pool format version"));
    }
    let mut n = None;
    let mut universe = None;
    for field in parts {
        match field.split_once('=') {
            Some(("n", v)) => {
                let v: usize = v
                    .parse()
                    .map_err(|_| Error::parse(format!("invalid header n={v:?}")))?;
                n = Some(v);
            }
            Some(("universe", v)) => universe = Some(v.parse()?),
            _ => return Err(Error::parse(format!("unexpected header field {field:?}"))),
        }
    }
    match (n, universe) {
        (Some(0), _) => Err(Error::parse("header n must be at least 1")),
        (Some(n), Some(u)) => Ok((n, u)),
        _ => Err(Error::parse("header requires n= and universe=")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn round_trip() {
        let dist = RepeatDistribution::new(0.0, 9).unwrap();
        let pool = StrandPool::generate(&dist, Universe::NoHomopolymer, 17, &mut rng_from_seed(1)).unwrap();
        let text = pool.to_text();
        assert!(text.starts_with("#synthspan-pool v1 n=9 universe=no-homopolymer\n"));
        assert!(!text.ends_with("\n\n"));
        assert_eq!(StrandPool::parse_text(&text).unwrap(), pool);
    }

    #[test]
    fn rejects_malformed() {
        let h = "#synthspan-pool v1 n=4 universe=no-homopolymer\n";
        assert!(StrandPool::parse_text("AGCT\n").is_err());
        assert!(StrandPool::parse_text(&format!("{h}AGCT\r\n")).is_err());
        assert!(StrandPool::parse_text(&format!("{h}AGCT\n\n")).is_err());
        assert!(StrandPool::parse_text(&format!("{h}agct\n")).is_err());
        assert!(StrandPool::parse_text(&format!("{h}AGC\n")).is_err());
        assert!(StrandPool::parse_text(&format!("{h}AACT\n")).is_err());
        assert!(StrandPool::parse_text("#synthspan-pool v2 n=4 universe=unconstrained\n").is_err());
        assert!(StrandPool::parse_text("#synthspan-pool v1 n=4 universe=other\n").is_err());
        let ok = StrandPool::parse_text("#synthspan-pool v1 n=4 universe=unconstrained\nAACT\n").unwrap();
        assert_eq!(ok.len(), 1);
    }

    #[test]
    fn parallel_generation_is_deterministic() {
        let dist = RepeatDistribution::new(0.25, 33).unwrap();
        let a = StrandPool::generate_parallel(&dist, Universe::Unconstrained, 10_000, 5).unwrap();
        let b = StrandPool::generate_parallel(&dist, Universe::Unconstrained, 10_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_000);
        let c = StrandPool::generate_parallel(&dist, Universe::Unconstrained, 10_000, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn universe_is_enforced() {
        let strands = vec!["AACG".parse().unwrap()];
        assert!(StrandPool::new(strands.clone(), Universe::NoHomopolymer, 4).is_err());
        assert!(StrandPool::new(strands, Universe::Unconstrained, 4).is_ok());
    }
}
