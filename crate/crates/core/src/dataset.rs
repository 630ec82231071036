//! Per-sequence outcome counts: simulation, persistence and merging.
//!
//! Simulated counts are drawn from a binomial distribution using ChaCha8
//! (a counter-based generator with a 64-bit block counter). Every distinct
//! sequence gets its own stream: the generator is seeded from the user seed
//! and its stream id is the 64-bit FNV-1a hash of the canonical sequence key,
//! so counts do not depend on design order or thread scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::ExperimentDesign;
use crate::error::{GstError, Result};
use crate::model::{GateSet, Sequence};

/// Repetitions per training sequence used by default.
pub const DEFAULT_TRAIN_REPETITIONS: u64 = 1900;
/// Repetitions per test sequence used by default.
pub const DEFAULT_TEST_REPETITIONS: u64 = 950;

const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Number of times outcome `E` was observed.
    pub n_plus: u64,
    pub n_total: u64,
}

impl Counts {
    pub fn new(n_plus: u64, n_total: u64) -> Self {
        Counts { n_plus, n_total }
    }

    pub fn n_minus(&self) -> u64 {
        self.n_total - self.n_plus
    }

    pub fn frequency(&self) -> f64 {
        self.n_plus as f64 / self.n_total as f64
    }

    fn validate(&self, key: &str) -> Result<()> {
        if self.n_total == 0 || self.n_plus > self.n_total {
            return Err(GstError::CountViolation {
                sequence: key.to_owned(),
                n_plus: self.n_plus,
                n_total: self.n_total,
            });
        }
        Ok(())
    }
}

/// Observed counts keyed by canonical sequence key (labels joined by `:`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataSet {
    records: BTreeMap<String, Counts>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    sequence: Sequence,
    n_plus: u64,
    n_total: u64,
}

impl DataSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, seq: &Sequence, counts: Counts) -> Result<()> {
        let key = seq.key();
        counts.validate(&key)?;
        self.records.insert(key, counts);
        Ok(())
    }

    pub fn get(&self, seq: &Sequence) -> Option<Counts> {
        self.records.get(&seq.key()).copied()
    }

    pub fn get_key(&self, key: &str) -> Option<Counts> {
        self.records.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Counts)> {
        self.records.iter()
    }

    pub fn total_counts(&self) -> u64 {
        self.records.values().map(|c| c.n_total).sum()
    }

    /// `n_plus / n_total` for every record.
    pub fn frequencies(&self) -> BTreeMap<String, f64> {
        self.records
            .iter()
            .map(|(k, c)| (k.clone(), c.frequency()))
            .collect()
    }

    /// Records whose sequences appear in `design`.
    pub fn restrict(&self, design: &ExperimentDesign) -> Result<DataSet> {
        let mut out = DataSet::new();
        for seq in design.unique_sequences() {
            let counts = self
                .get(&seq)
                .ok_or_else(|| GstError::MissingData(seq.to_string()))?;
            out.insert(&seq, counts)?;
        }
        Ok(out)
    }

    /// Counts summed per key.
    pub fn merge(&self, other: &DataSet) -> DataSet {
        let mut records = self.records.clone();
        for (k, c) in &other.records {
            records
                .entry(k.clone())
                .and_modify(|e| {
                    e.n_plus += c.n_plus;
                    e.n_total += c.n_total;
                })
                .or_insert(*c);
        }
        DataSet { records }
    }

    /// One JSON object per line, keys in canonical order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (k, c) in &self.records {
            let rec = Record {
                sequence: Sequence::from_key(k),
                n_plus: c.n_plus,
                n_total: c.n_total,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<DataSet> {
        let mut ds = DataSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(line).map_err(|err| GstError::MalformedRecord {
                    line: i + 1,
                    reason: err.to_string(),
                })?;
            if ds.get(&rec.sequence).is_some() {
                return Err(GstError::MalformedRecord {
                    line: i + 1,
                    reason: format!("duplicate sequence `{}`", rec.sequence),
                });
            }
            ds.insert(&rec.sequence, Counts::new(rec.n_plus, rec.n_total))?;
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DataSet> {
        DataSet::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Draw `n_plus ~ Binomial(n_total, p_s)` for every distinct design sequence.
pub fn simulate_counts(
    gs: &GateSet,
    design: &ExperimentDesign,
    n_total: u64,
    seed: u64,
) -> Result<DataSet> {
    if n_total == 0 {
        return Err(GstError::InvalidArgument("n_total must be positive".into()));
    }
    let sequences = design.unique_sequences();
    let drawn: Vec<Result<(Sequence, Counts)>> = sequences
        .into_par_iter()
        .map(|seq| {
            let key = seq.key();
            let p = gs.probability(&seq)?;
            if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) || !p.is_finite() {
                return Err(GstError::NonPhysicalProbability {
                    sequence: seq.to_string(),
                    probability: p,
                });
            }
            let p = p.clamp(0.0, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(fnv1a(key.as_bytes()));
            let dist = Binomial::new(n_total, p).expect("p lies in [0, 1]");
            Ok((seq, Counts::new(dist.sample(&mut rng), n_total)))
        })
        .collect();
    let mut ds = DataSet::new();
    for item in drawn {
        let (seq, counts) = item?;
        ds.insert(&seq, counts)?;
    }
    Ok(ds)
}

/// Anything that can report the observed (or exact) frequency of a sequence.
pub trait FrequencySource {
    fn frequency(&self, seq: &Sequence) -> Result<f64>;
}

impl FrequencySource for DataSet {
    fn frequency(&self, seq: &Sequence) -> Result<f64> {
        self.get(seq)
            .map(|c| c.frequency())
            .ok_or_else(|| GstError::MissingData(seq.to_string()))
    }
}

/// Exact Born-rule probabilities of a model, used in place of data.
pub struct ExactProbabilities<'a>(pub &'a GateSet);

impl FrequencySource for ExactProbabilities<'_> {
    fn frequency(&self, seq: &Sequence) -> Result<f64> {
        self.0.probability(seq)
    }
}
