//! Linear-inversion gate set tomography.
//!
//! With fiducial states `|rho_k>> = F_k|rho>>` and effects `<<E_j| = <<E|F_j`,
//! the observable matrices are
//!
//! ```text
//! gram[j][k]      = <<E| F_j F_k |rho>>
//! tilde_G_i[j][k] = <<E| F_j G_i F_k |rho>>
//! tilde_rho[j]    = <<E| F_j |rho>>
//! tilde_E[k]      = <<E| F_k |rho>>
//! ```
//!
//! and `gram^-1 tilde_G_i`, `gram^-1 tilde_rho`, `tilde_E` form a gate set
//! gauge-equivalent to the truth.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::FrequencySource;
use crate::design::{numerical_rank, singular_values_desc, ExperimentDesign, Role, RANK_THRESHOLD};
use crate::error::{GstError, Result};
use crate::model::{EffectVector, GateSet, Sequence, StateVector, SuperOperator};

/// Condition number of the Gram matrix above which a warning is logged.
pub const DEFAULT_CONDITION_WARNING: f64 = 1e4;

/// Observable-probability matrices assembled from data.
#[derive(Debug, Clone, PartialEq)]
pub struct LgstIntermediates {
    pub gram: DMatrix<f64>,
    pub tilde_gates: BTreeMap<String, DMatrix<f64>>,
    pub tilde_rho: DVector<f64>,
    pub tilde_effect: DVector<f64>,
    pub condition_number: f64,
    pub min_singular_value: f64,
    pub rank: usize,
}

impl LgstIntermediates {
    pub fn diagnostics(&self) -> LgstDiagnostics {
        LgstDiagnostics {
            condition_number: self.condition_number,
            min_singular_value: self.min_singular_value,
            rank: self.rank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgstDiagnostics {
    pub condition_number: f64,
    pub min_singular_value: f64,
    pub rank: usize,
}

fn require(design: &ExperimentDesign, role: Role, seq: &Sequence) -> Result<()> {
    if design.contains(role, seq) {
        Ok(())
    } else {
        Err(GstError::MissingData(format!(
            "design has no {role:?} entry for {seq}"
        )))
    }
}

/// Fill the observable matrices for every gate label that has sandwich
/// experiments in `design`.
pub fn assemble(
    data: &dyn FrequencySource,
    design: &ExperimentDesign,
) -> Result<LgstIntermediates> {
    let fids = design.fiducials()?;
    let n = fids.len();
    let labels: Vec<String> = {
        let mut set = std::collections::BTreeSet::new();
        for e in design
            .with_role(Role::Sandwich)
            .filter(|e| !e.is_appended())
        {
            let g = e.meta.get("gate").ok_or_else(|| {
                GstError::InconsistentFiducials(format!("SANDWICH entry `{}` lacks `gate`", e.id))
            })?;
            set.insert(g.clone());
        }
        set.into_iter().collect()
    };

    let mut tilde_rho = DVector::zeros(n);
    for j in 0..n {
        tilde_rho[j] = data.frequency(fids.get(j))?;
    }
    let tilde_effect = tilde_rho.clone();

    let mut gram = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let seq = fids.get(k).then(fids.get(j));
            if !seq.is_empty() {
                require(design, Role::FidPair, &seq)?;
            }
            gram[(j, k)] = data.frequency(&seq)?;
        }
    }

    let mut tilde_gates = BTreeMap::new();
    for label in &labels {
        let g = Sequence::new([label.as_str()]);
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let seq = fids.get(k).then(&g).then(fids.get(j));
                require(design, Role::Sandwich, &seq)?;
                m[(j, k)] = data.frequency(&seq)?;
            }
        }
        tilde_gates.insert(label.clone(), m);
    }

    let sv = singular_values_desc(&gram);
    let max = sv.first().cloned().unwrap_or(0.0);
    let min = sv.last().cloned().unwrap_or(0.0);
    Ok(LgstIntermediates {
        condition_number: if min > 0.0 { max / min } else { f64::INFINITY },
        min_singular_value: min,
        rank: numerical_rank(&sv),
        gram,
        tilde_gates,
        tilde_rho,
        tilde_effect,
    })
}

/// Closed-form estimate of the gate set in the gauge fixed by the fiducials.
pub fn lgst_estimate(
    data: &dyn FrequencySource,
    design: &ExperimentDesign,
    gate_labels: &[String],
) -> Result<(GateSet, LgstIntermediates)> {
    lgst_estimate_with(data, design, gate_labels, DEFAULT_CONDITION_WARNING)
}

/// [`lgst_estimate`] with a configurable ill-conditioning warning threshold.
pub fn lgst_estimate_with(
    data: &dyn FrequencySource,
    design: &ExperimentDesign,
    gate_labels: &[String],
    condition_warning: f64,
) -> Result<(GateSet, LgstIntermediates)> {
    let inter = assemble(data, design)?;
    let n = inter.gram.nrows();
    let dim = (n as f64).sqrt().round() as usize;
    if dim * dim != n || dim < 2 {
        return Err(GstError::NonSquareFiducials { found: n });
    }
    let sv = singular_values_desc(&inter.gram);
    let threshold = RANK_THRESHOLD * sv[0];
    if sv[0].is_nan() || sv[0] <= 0.0 || inter.min_singular_value <= threshold {
        return Err(GstError::SingularGram {
            min_singular_value: inter.min_singular_value,
            threshold,
        });
    }
    if inter.condition_number > condition_warning {
        log::warn!(
            "Gram matrix is ill-conditioned (condition number {:.3e})",
            inter.condition_number
        );
    }
    let gram_inv = inter
        .gram
        .clone()
        .svd(true, true)
        .pseudo_inverse(threshold)
        .map_err(|e| GstError::InvalidArgument(e.to_string()))?;

    let mut gates = BTreeMap::new();
    for label in gate_labels {
        let tilde = inter
            .tilde_gates
            .get(label)
            .ok_or_else(|| GstError::MissingData(format!("no sandwich data for gate {label}")))?;
        gates.insert(label.clone(), SuperOperator(&gram_inv * tilde));
    }
    let rho = StateVector(&gram_inv * &inter.tilde_rho);
    let effect = EffectVector(inter.tilde_effect.clone());
    Ok((GateSet::new(dim, rho, effect, gates)?, inter))
}
