//! Predictive scoring of estimates on held-out data with the logarithmic
//! rule, renormalized so a perfect predictor of the empirical frequencies
//! scores zero. Scores depend only on predicted probabilities, so they are
//! gauge invariant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::design::{ExperimentDesign, Role};
use crate::error::{GstError, Result};
use crate::model::{GateSet, Sequence};

pub const DEFAULT_EPSILON: f64 = 1e-3;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(GstError::InvalidArgument(format!(
            "epsilon {epsilon} must lie in (0, 0.5)"
        )))
    }
}

/// Model probability truncated to `[epsilon, 1 - epsilon]`.
pub fn predict_clipped(gs: &GateSet, seq: &Sequence, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(gs.probability(seq)?.clamp(epsilon, 1.0 - epsilon))
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `-[n+ ln p + n- ln(1 - p)]` in nats.
pub fn raw_score(n_plus: u64, n_total: u64, p: f64) -> f64 {
    -(xlogy(n_plus as f64, p) + xlogy((n_total - n_plus) as f64, 1.0 - p))
}

/// `n+ ln(f+/p) + n- ln(f-/(1-p))` = `N KL(f || p)`, with `0 ln 0 = 0`.
pub fn renormalized_score(n_plus: u64, n_total: u64, p: f64) -> f64 {
    let f = n_plus as f64 / n_total as f64;
    let (np, nm) = (n_plus as f64, (n_total - n_plus) as f64);
    let v = xlogy(np, f) - xlogy(np, p) + xlogy(nm, 1.0 - f) - xlogy(nm, 1.0 - p);
    v.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub raw_score: f64,
    pub renorm_score: f64,
    pub n_plus: u64,
    pub n_total: u64,
    pub predicted_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_sequence: BTreeMap<String, SequenceScore>,
    /// Mean per-count renormalized score over base sequences at each length.
    pub per_length: BTreeMap<usize, f64>,
    pub total_renorm: f64,
    pub epsilon: f64,
}

/// Score `gs` on every `TEST_PARTIAL` entry of `design`.
pub fn score(
    gs: &GateSet,
    ds_test: &DataSet,
    design: &ExperimentDesign,
    epsilon: f64,
) -> Result<ScoreReport> {
    check_epsilon(epsilon)?;
    let mut per_sequence = BTreeMap::new();
    let mut by_length: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in design.with_role(Role::TestPartial) {
        let key = e.sequence.key();
        let counts = ds_test
            .get_key(&key)
            .ok_or_else(|| GstError::MissingData(e.sequence.to_string()))?;
        if !per_sequence.contains_key(&key) {
            let p = predict_clipped(gs, &e.sequence, epsilon)?;
            per_sequence.insert(
                key.clone(),
                SequenceScore {
                    raw_score: raw_score(counts.n_plus, counts.n_total, p),
                    renorm_score: renormalized_score(counts.n_plus, counts.n_total, p),
                    n_plus: counts.n_plus,
                    n_total: counts.n_total,
                    predicted_p: p,
                },
            );
        }
        let entry = &per_sequence[&key];
        let length = e.meta_usize("L")?;
        by_length
            .entry(length)
            .or_default()
            .push(entry.renorm_score / entry.n_total as f64);
    }
    let per_length = by_length
        .into_iter()
        .map(|(l, v)| (l, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let total_renorm = per_sequence.values().map(|s| s.renorm_score).sum();
    Ok(ScoreReport {
        per_sequence,
        per_length,
        total_renorm,
        epsilon,
    })
}

/// Per-length score curves of several estimates on the same test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub epsilon: f64,
    pub lengths: Vec<usize>,
    /// Estimate name to mean per-count score, aligned with `lengths`.
    pub curves: BTreeMap<String, Vec<f64>>,
    pub totals: BTreeMap<String, f64>,
}

impl ScoreTable {
    /// Rows `L,estimate_name,mean_per_count_score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,estimate_name,mean_per_count_score\n");
        for (i, l) in self.lengths.iter().enumerate() {
            for (name, curve) in &self.curves {
                let _ = writeln!(out, "{l},{name},{:.10e}", curve[i]);
            }
        }
        out
    }

    /// Fixed-width text table, one column per estimate.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>5}", "L");
        for name in self.curves.keys() {
            let _ = write!(out, " {name:>14}");
        }
        out.push('\n');
        for (i, l) in self.lengths.iter().enumerate() {
            let _ = write!(out, "{l:>5}");
            for curve in self.curves.values() {
                let _ = write!(out, " {:>14.6e}", curve[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Mean of an estimate's curve over lengths `>= min_length`.
    pub fn mean_over(&self, name: &str, min_length: usize) -> Option<f64> {
        let curve = self.curves.get(name)?;
        let picked: Vec<f64> = self
            .lengths
            .iter()
            .zip(curve)
            .filter(|(l, _)| **l >= min_length)
            .map(|(_, v)| *v)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

pub fn score_comparison(
    estimates: &BTreeMap<String, GateSet>,
    ds_test: &DataSet,
    design: &ExperimentDesign,
    epsilon: f64,
) -> Result<ScoreTable> {
    let mut curves = BTreeMap::new();
    let mut totals = BTreeMap::new();
    let mut lengths = Vec::new();
    for (name, gs) in estimates {
        let report = score(gs, ds_test, design, epsilon)?;
        lengths = report.per_length.keys().cloned().collect();
        curves.insert(name.clone(), report.per_length.values().cloned().collect());
        totals.insert(name.clone(), report.total_renorm);
    }
    Ok(ScoreTable {
        epsilon,
        lengths,
        curves,
        totals,
    })
}
