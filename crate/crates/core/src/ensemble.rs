//! Compact storage of measurement records.
//!
//! Binary layout: UTF-8 header lines `key=value` (`version`, `n`, `k`, `povm`,
//! `noise`, `prep`, `seeds`, `records`), a line `---`, then `records × n`
//! bytes, one outcome index per qubit, record-major.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Outcome indices of one shot, one per qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShadowRecord<'a> {
    outcomes: &'a [u8],
}

impl<'a> ShadowRecord<'a> {
    pub fn outcomes(&self) -> &'a [u8] {
        self.outcomes
    }

    #[inline]
    pub fn outcome(&self, site: usize) -> usize {
        self.outcomes[site] as usize
    }
}

/// `N` records of `n` outcomes each, with the POVM name, the seeds that
/// produced them, and two kinds of noise provenance: `noise` is measurement
/// noise that estimators must invert, `prep` is noise that belongs to the
/// measured state and is only recorded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowEnsemble {
    n: usize,
    k: usize,
    povm: String,
    noise: Option<String>,
    prep: Option<String>,
    seeds: Vec<u64>,
    outcomes: Vec<u8>,
}

impl ShadowEnsemble {
    pub fn new(
        n: usize,
        k: usize,
        povm: impl Into<String>,
        noise: Option<String>,
        seeds: Vec<u64>,
        outcomes: Vec<u8>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("records need at least one qubit"));
        }
        if !(2..=255).contains(&k) {
            return Err(invalid(format!("outcome count k = {k} outside [2, 255]")));
        }
        if outcomes.len() % n != 0 {
            return Err(invalid(format!(
                "{} outcomes do not split into records of {n}",
                outcomes.len()
            )));
        }
        if let Some(bad) = outcomes.iter().find(|&&a| a as usize >= k) {
            return Err(invalid(format!("outcome index {bad} ≥ k = {k}")));
        }
        Ok(Self {
            n,
            k,
            povm: povm.into(),
            noise,
            prep: None,
            seeds,
            outcomes,
        })
    }

    pub fn with_prep_noise(mut self, prep: Option<String>) -> Self {
        self.prep = prep;
        self
    }

    pub fn empty(n: usize, k: usize, povm: impl Into<String>, noise: Option<String>) -> Result<Self> {
        Self::new(n, k, povm, noise, Vec::new(), Vec::new())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn povm(&self) -> &str {
        &self.povm
    }

    pub fn noise(&self) -> Option<&str> {
        self.noise.as_deref()
    }

    pub fn prep_noise(&self) -> Option<&str> {
        self.prep.as_deref()
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn len(&self) -> usize {
        self.outcomes.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn record(&self, j: usize) -> ShadowRecord<'_> {
        ShadowRecord {
            outcomes: &self.outcomes[j * self.n..(j + 1) * self.n],
        }
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = ShadowRecord<'_>> + '_ {
        self.outcomes
            .chunks_exact(self.n)
            .map(|outcomes| ShadowRecord { outcomes })
    }

    /// Records `range` as a new ensemble with the same provenance.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            outcomes: self.outcomes[range.start * self.n..range.end * self.n].to_vec(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Self {
        Self {
            n: self.n,
            k: self.k,
            povm: self.povm.clone(),
            noise: self.noise.clone(),
            prep: self.prep.clone(),
            seeds: self.seeds.clone(),
            outcomes: Vec::new(),
        }
    }

    /// Appends `other`'s records. Both must come from the same measurement.
    pub fn merge(&mut self, other: &ShadowEnsemble) -> Result<()> {
        if (self.n, self.k, &self.povm, &self.noise, &self.prep)
            != (other.n, other.k, &other.povm, &other.noise, &other.prep)
        {
            return Err(Error::Mismatch(format!(
                "cannot merge ensembles ({}, n={}, noise={:?}, prep={:?}) and ({}, n={}, noise={:?}, prep={:?})",
                self.povm, self.n, self.noise, self.prep, other.povm, other.n, other.noise, other.prep
            )));
        }
        self.outcomes.extend_from_slice(&other.outcomes);
        for s in &other.seeds {
            if !self.seeds.contains(s) {
                self.seeds.push(*s);
            }
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        writeln!(w, "version={FORMAT_VERSION}")?;
        writeln!(w, "n={}", self.n)?;
        writeln!(w, "k={}", self.k)?;
        writeln!(w, "povm={}", self.povm)?;
        writeln!(w, "noise={}", self.noise.as_deref().unwrap_or("none"))?;
        writeln!(w, "prep={}", self.prep.as_deref().unwrap_or("none"))?;
        writeln!(w, "seeds={}", seeds.join(","))?;
        writeln!(w, "records={}", self.len())?;
        writeln!(w, "---")?;
        w.write_all(&self.outcomes)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut fields = std::collections::HashMap::new();
        let mut line = String::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format("missing `---` header terminator".into()));
            }
            let l = line.trim_end_matches(['\n', '\r']);
            if l == "---" {
                break;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header line `{l}`")))?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Format(format!("missing header field `{key}`")))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("header field `{key}` is not an integer")))
        };
        if num("version")? != FORMAT_VERSION as usize {
            return Err(Error::Format(format!("unsupported version {}", get("version")?)));
        }
        let (n, k, records) = (num("n")?, num("k")?, num("records")?);
        let noise = Some(get("noise")?).filter(|s| s != "none");
        let prep = Some(get("prep")?).filter(|s| s != "none");
        let seeds = get("seeds")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad seed `{s}`"))))
            .collect::<Result<Vec<u64>>>()?;
        let mut outcomes = Vec::with_capacity(n * records);
        r.read_to_end(&mut outcomes)?;
        if outcomes.len() != n * records {
            return Err(Error::Format(format!(
                "expected {} outcome bytes, found {}",
                n * records,
                outcomes.len()
            )));
        }
        Self::new(n, k, get("povm")?, noise, seeds, outcomes)
            .map(|e| e.with_prep_noise(prep))
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// One CSV row per record: `record,q0,q1,…`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = (0..self.n).map(|i| format!("q{i}")).collect();
        writeln!(w, "record,{}", header.join(","))?;
        for (j, rec) in self.records().enumerate() {
            let row: Vec<String> = rec.outcomes().iter().map(u8::to_string).collect();
            writeln!(w, "{j},{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ShadowEnsemble {
        ShadowEnsemble::new(3, 6, "pauli6", Some("depolarizing:0.2".into()), vec![7], vec![0, 1, 2, 5, 4, 3])
            .unwrap()
            .with_prep_noise(Some("amplitude_damping:0.1".into()))
    }

    #[test]
    fn binary_round_trip() {
        let e = sample();
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        assert_eq!(ShadowEnsemble::read_from(&buf[..]).unwrap(), e);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(ShadowEnsemble::read_from(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn merge_checks_provenance() {
        let mut a = sample();
        let b = ShadowEnsemble::new(3, 6, "pauli6", Some("depolarizing:0.2".into()), vec![8], vec![1, 1, 1])
            .unwrap()
            .with_prep_noise(Some("amplitude_damping:0.1".into()));
        assert!(a.clone().merge(&b.clone().with_prep_noise(None)).is_err());
        a.merge(&b).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.seeds(), &[7, 8]);
        let c = ShadowEnsemble::new(3, 6, "pauli6", None, vec![8], vec![]).unwrap();
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn out_of_range_outcome_is_rejected() {
        assert!(ShadowEnsemble::new(2, 4, "pauli4", None, vec![], vec![0, 4]).is_err());
        assert!(ShadowEnsemble::new(2, 4, "pauli4", None, vec![], vec![0]).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "record,q0,q1,q2\n0,0,1,2\n1,5,4,3\n");
    }
}
