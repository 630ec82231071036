//! Standard linear-inversion state and process tomography.
//!
//! These estimators trust a reference frame: the states prepared and the
//! effects measured are taken as known. They serve as the baseline that
//! self-consistent estimation is compared against.

use nalgebra::{DMatrix, DVector};

use crate::dataset::FrequencySource;
use crate::design::{numerical_rank, singular_values_desc, ExperimentDesign, RANK_THRESHOLD};
use crate::error::{GstError, Result};
use crate::model::{EffectVector, GateSet, Sequence, StateVector, SuperOperator};

fn check_spanning(rows: &DMatrix<f64>, required: usize) -> Result<()> {
    let sv = singular_values_desc(rows);
    let rank = numerical_rank(&sv);
    if rank < required {
        return Err(GstError::InformationallyIncomplete {
            rank,
            required,
            min_singular_value: sv.get(required - 1).cloned().unwrap_or(0.0),
        });
    }
    Ok(())
}

/// Minimize `sum_i w_i (a_i . x - b_i)^2` for a full-column-rank `a`.
fn weighted_least_squares(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    weights: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let (mut a, mut b) = (a.clone(), b.clone());
    if let Some(w) = weights {
        if w.len() != b.len() {
            return Err(GstError::DimensionMismatch {
                expected: b.len(),
                found: w.len(),
            });
        }
        for (i, wi) in w.iter().enumerate() {
            if wi.is_nan() || *wi < 0.0 {
                return Err(GstError::InvalidArgument(format!("negative weight {wi}")));
            }
            let s = wi.sqrt();
            a.row_mut(i).scale_mut(s);
            b[i] *= s;
        }
    }
    let svd = a.svd(true, true);
    let top = svd.singular_values.max();
    svd.solve(&b, RANK_THRESHOLD * top)
        .map_err(|e| GstError::InvalidArgument(e.to_string()))
}

/// Solve `<<E_k|rho>> = p_k` in the least-squares sense.
pub fn state_tomography(
    effects: &[EffectVector],
    freqs: &[f64],
    weights: Option<&[f64]>,
) -> Result<StateVector> {
    if effects.is_empty() {
        return Err(GstError::InvalidArgument("no effects given".into()));
    }
    if effects.len() != freqs.len() {
        return Err(GstError::DimensionMismatch {
            expected: effects.len(),
            found: freqs.len(),
        });
    }
    let n = effects[0].len();
    let a = DMatrix::from_fn(effects.len(), n, |r, c| effects[r].0[c]);
    check_spanning(&a, n)?;
    let b = DVector::from_column_slice(freqs);
    let w = weights.map(DVector::from_column_slice);
    Ok(StateVector(weighted_least_squares(&a, &b, w.as_ref())?))
}

/// Solve `<<E_k| G |rho_j>> = p_{j,k}` in the least-squares sense.
///
/// `freq_matrix[(j, k)]` holds the frequency for state `j` and effect `k`;
/// `weights`, when given, has the same layout.
pub fn process_tomography(
    states: &[StateVector],
    effects: &[EffectVector],
    freq_matrix: &DMatrix<f64>,
    weights: Option<&DMatrix<f64>>,
) -> Result<SuperOperator> {
    if states.is_empty() || effects.is_empty() {
        return Err(GstError::InvalidArgument(
            "no states or effects given".into(),
        ));
    }
    if freq_matrix.shape() != (states.len(), effects.len()) {
        return Err(GstError::DimensionMismatch {
            expected: states.len() * effects.len(),
            found: freq_matrix.len(),
        });
    }
    let n = states[0].len();
    check_spanning(&DMatrix::from_fn(states.len(), n, |r, c| states[r].0[c]), n)?;
    check_spanning(
        &DMatrix::from_fn(effects.len(), n, |r, c| effects[r].0[c]),
        n,
    )?;

    // Row (j, k) of the vectorized system: coefficient of G[a][b] is E_k[a] rho_j[b].
    let rows = states.len() * effects.len();
    let mut a = DMatrix::zeros(rows, n * n);
    let mut b = DVector::zeros(rows);
    let mut w = weights.map(|_| DVector::zeros(rows));
    for (j, rho) in states.iter().enumerate() {
        for (k, e) in effects.iter().enumerate() {
            let r = j * effects.len() + k;
            for ia in 0..n {
                for ib in 0..n {
                    a[(r, ia * n + ib)] = e.0[ia] * rho.0[ib];
                }
            }
            b[r] = freq_matrix[(j, k)];
            if let (Some(w), Some(src)) = (w.as_mut(), weights) {
                w[r] = src[(j, k)];
            }
        }
    }
    let x = weighted_least_squares(&a, &b, w.as_ref())?;
    Ok(SuperOperator(DMatrix::from_row_slice(n, n, x.as_slice())))
}

/// Standard-tomography gate set from LGST-style data, assuming the
/// fiducial states `F_k|rho>>` and effects `<<E|F_j` are exactly those of
/// `frame`. Preparation and measurement are taken from the frame as well;
/// each gate comes from process tomography on its sandwich experiments.
pub fn standard_gate_set(
    data: &dyn FrequencySource,
    design: &ExperimentDesign,
    frame: &GateSet,
    gate_labels: &[String],
) -> Result<GateSet> {
    let fiducials = design.fiducials()?;
    let mut states = Vec::with_capacity(fiducials.len());
    let mut effects = Vec::with_capacity(fiducials.len());
    for f in fiducials.sequences() {
        let m = frame.compose(f)?;
        states.push(StateVector(&m.0 * &frame.rho().0));
        effects.push(EffectVector(m.0.transpose() * &frame.effect().0));
    }
    let n = fiducials.len();
    let mut estimate = frame.clone();
    for label in gate_labels {
        let g = Sequence::new([label.as_str()]);
        let mut freqs = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let seq = fiducials.get(k).then(&g).then(fiducials.get(j));
                freqs[(k, j)] = data.frequency(&seq)?;
            }
        }
        estimate.set_gate(label, process_tomography(&states, &effects, &freqs, None)?)?;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::pauli_basis;
    use crate::model::density_to_vector;
    use crate::targets::{ideal_targets, rotation, rotation_superop};

    /// Projectors onto the six Pauli eigenstates.
    fn pauli_axis_projectors() -> Vec<DVector<f64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::new();
        for axis in 1..4 {
            for sign in [1.0, -1.0] {
                let mut v = DVector::zeros(4);
                v[0] = s;
                v[axis] = sign * s;
                out.push(v);
            }
        }
        out
    }

    fn effects() -> Vec<EffectVector> {
        pauli_axis_projectors()
            .into_iter()
            .map(EffectVector)
            .collect()
    }

    fn states() -> Vec<StateVector> {
        pauli_axis_projectors()
            .into_iter()
            .map(StateVector)
            .collect()
    }

    #[test]
    fn state_tomography_exact_inversion() {
        let basis = pauli_basis(2).unwrap();
        let truth = density_to_vector(&crate::targets::ket_projector(0), &basis).unwrap();
        let freqs: Vec<f64> = effects().iter().map(|e| e.0.dot(&truth.0)).collect();
        let est = state_tomography(&effects(), &freqs, None).unwrap();
        assert!((est.0 - truth.0).amax() < 1e-10);
    }

    #[test]
    fn state_tomography_maximally_mixed() {
        let est = state_tomography(&effects(), &[0.5; 6], None).unwrap();
        let mixed = DVector::from_vec(vec![std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, 0.0]);
        assert!((est.0 - mixed).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_effects_rejected() {
        let e = effects();
        let three = vec![e[0].clone(), e[1].clone(), e[2].clone()];
        assert!(matches!(
            state_tomography(&three, &[0.5, 0.5, 0.5], None),
            Err(GstError::InformationallyIncomplete { rank: 3, .. })
        ));
    }

    #[test]
    fn weighted_solution_is_stationary() {
        // Inconsistent frequencies: the weighted residual gradient A^T W r must vanish.
        let e = effects();
        let freqs = [0.9, 0.12, 0.47, 0.55, 0.3, 0.66];
        let w = [1.0, 2.0, 0.5, 3.0, 1.5, 0.25];
        let est = state_tomography(&e, &freqs, Some(&w)).unwrap();
        let mut grad = DVector::zeros(4);
        for i in 0..6 {
            let r = e[i].0.dot(&est.0) - freqs[i];
            grad += &e[i].0 * (2.0 * w[i] * r);
        }
        assert!(grad.amax() < 1e-8);
    }

    fn exact_freqs(g: &DMatrix<f64>, st: &[StateVector], ef: &[EffectVector]) -> DMatrix<f64> {
        DMatrix::from_fn(st.len(), ef.len(), |j, k| ef[k].0.dot(&(g * &st[j].0)))
    }

    #[test]
    fn process_tomography_recovers_identity_and_x_pi() {
        let (st, ef) = (states(), effects());
        let id = DMatrix::identity(4, 4);
        let est = process_tomography(&st, &ef, &exact_freqs(&id, &st, &ef), None).unwrap();
        assert!((est.0 - &id).amax() < 1e-10);
        let t4 = ideal_targets().gate("G4").unwrap().0.clone();
        let est = process_tomography(&st, &ef, &exact_freqs(&t4, &st, &ef), None).unwrap();
        assert!((est.0 - t4).amax() < 1e-10);
    }

    #[test]
    fn process_least_squares_is_stationary() {
        let (st, ef) = (states(), effects());
        let mut freqs = exact_freqs(&rotation_superop([1.0, 0.3, 0.0], 0.7).0, &st, &ef);
        freqs[(0, 1)] += 0.03;
        freqs[(4, 2)] -= 0.05;
        let g = process_tomography(&st, &ef, &freqs, None).unwrap().0;
        let mut grad = DMatrix::zeros(4, 4);
        for j in 0..st.len() {
            for k in 0..ef.len() {
                let r = ef[k].0.dot(&(&g * &st[j].0)) - freqs[(j, k)];
                grad += &ef[k].0 * st[j].0.transpose() * (2.0 * r);
            }
        }
        assert!(grad.amax() < 1e-8);
    }

    #[test]
    fn miscalibrated_frame_biases_estimate() {
        // Forward-simulate with a frame rotated by `angle`, invert assuming the ideal frame.
        let basis = pauli_basis(2).unwrap();
        let truth = ideal_targets().gate("G2").unwrap().0.clone();
        let mut errors = Vec::new();
        for angle in [0.0, 0.02, 0.05, 0.1] {
            let u = rotation([0.0, 1.0, 1.0], angle);
            let rot = crate::model::unitary_to_superop(&u, &basis).unwrap().0;
            let real_states: Vec<StateVector> =
                states().iter().map(|s| StateVector(&rot * &s.0)).collect();
            let real_effects: Vec<EffectVector> = effects()
                .iter()
                .map(|e| EffectVector(&rot * &e.0))
                .collect();
            let freqs = exact_freqs(&truth, &real_states, &real_effects);
            let est = process_tomography(&states(), &effects(), &freqs, None).unwrap();
            errors.push((est.0 - &truth).norm());
        }
        assert!(errors[0] < 1e-10);
        assert!(errors.windows(2).all(|w| w[1] > w[0]), "{errors:?}");
    }
}
