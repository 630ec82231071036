//! Gauge transformations `rho -> M rho`, `E -> M^-T E`, `G -> M G M^-1` and
//! fixing the gauge of an estimate against a target.
//!
//! Every gauge transformation leaves all sequence probabilities unchanged, so
//! gauge fixing only chooses a representative for comparison with a target.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GstError, Result};
use crate::model::{EffectVector, GateSet, StateVector, SuperOperator};
use crate::optimize::{bfgs, BfgsOptions};

/// Smallest `|det M|` accepted by [`GaugeTransform::new`].
pub const SINGULAR_DET: f64 = 1e-12;
/// Below this `|det M|` the gauge search treats the objective as infinite.
pub const BARRIER_DET: f64 = 1e-8;
/// Sequences up to this length are used for the invariance check.
pub const INVARIANCE_CHECK_LENGTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

impl GaugeTransform {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(GstError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let det = m.determinant();
        if det.is_nan() || det.abs() <= SINGULAR_DET {
            return Err(GstError::SingularGauge { det });
        }
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or(GstError::SingularGauge { det })?;
        Ok(GaugeTransform { m, m_inv })
    }

    pub fn identity(n: usize) -> Self {
        GaugeTransform {
            m: DMatrix::identity(n, n),
            m_inv: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.m_inv
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &GaugeTransform) -> GaugeTransform {
        GaugeTransform {
            m: &self.m * &first.m,
            m_inv: &first.m_inv * &self.m_inv,
        }
    }
}

pub fn apply_gauge(gs: &GateSet, t: &GaugeTransform) -> Result<GateSet> {
    if t.m.nrows() != gs.hs_dim() {
        return Err(GstError::DimensionMismatch {
            expected: gs.hs_dim(),
            found: t.m.nrows(),
        });
    }
    let gates = gs
        .gates()
        .iter()
        .map(|(l, g)| (l.clone(), SuperOperator(&t.m * &g.0 * &t.m_inv)))
        .collect();
    GateSet::new(
        gs.dim(),
        StateVector(&t.m * &gs.rho().0),
        EffectVector(t.m_inv.transpose() * &gs.effect().0),
        gates,
    )
}

fn check_compatible(a: &GateSet, b: &GateSet) -> Result<()> {
    if a.dim() != b.dim() || a.labels() != b.labels() {
        Err(GstError::LabelMismatch)
    } else {
        Ok(())
    }
}

/// `sum_k ||A_k - B_k||_F^2 + spam_weight (||rho_a - rho_b||^2 + ||E_a - E_b||^2)`.
pub fn frobenius_discrepancy(a: &GateSet, b: &GateSet, spam_weight: f64) -> Result<f64> {
    check_compatible(a, b)?;
    let mut total: f64 = a
        .gates()
        .values()
        .zip(b.gates().values())
        .map(|(x, y)| (&x.0 - &y.0).norm_squared())
        .sum();
    if spam_weight != 0.0 {
        total += spam_weight
            * ((&a.rho().0 - &b.rho().0).norm_squared()
                + (&a.effect().0 - &b.effect().0).norm_squared());
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeOptions {
    pub spam_weight: f64,
    /// Extra searches started from random perturbations of the identity.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions {
            spam_weight: 0.0,
            restarts: 0,
            seed: 0,
            max_iter: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFit {
    pub transform: GaugeTransform,
    pub gate_set: GateSet,
    pub discrepancy_before: f64,
    pub discrepancy_after: f64,
    pub det_m: f64,
    /// Largest probability change over all sequences up to
    /// [`INVARIANCE_CHECK_LENGTH`] gates.
    pub invariance_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub discrepancy_before: f64,
    pub discrepancy_after: f64,
    pub det_m: f64,
    pub invariance_error: f64,
}

impl GaugeFit {
    pub fn report(&self) -> GaugeReport {
        GaugeReport {
            discrepancy_before: self.discrepancy_before,
            discrepancy_after: self.discrepancy_after,
            det_m: self.det_m,
            invariance_error: self.invariance_error,
        }
    }
}

/// Objective and analytic gradient with respect to the row-major entries of `M`.
fn objective(gs: &GateSet, target: &GateSet, w: f64, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = gs.hs_dim();
    let m = DMatrix::from_row_slice(n, n, x.as_slice());
    let det = m.determinant();
    let inv = match m.clone().try_inverse() {
        Some(inv) if det.abs() >= BARRIER_DET => inv,
        _ => return (f64::INFINITY, DVector::zeros(n * n)),
    };
    let inv_t = inv.transpose();
    let mut f = 0.0;
    let mut grad = DMatrix::zeros(n, n);
    for (g, t) in gs.gates().values().zip(target.gates().values()) {
        let x = &m * &g.0 * &inv;
        let r = &x - &t.0;
        f += r.norm_squared();
        grad += (&r * &inv_t * g.0.transpose() - x.transpose() * &r * &inv_t) * 2.0;
    }
    if w != 0.0 {
        let r = &m * &gs.rho().0 - &target.rho().0;
        let e = &inv_t * &gs.effect().0;
        let q = &e - &target.effect().0;
        f += w * (r.norm_squared() + q.norm_squared());
        grad += (&r * gs.rho().0.transpose()) * (2.0 * w);
        grad -= (&e * q.transpose() * &inv_t) * (2.0 * w);
    }
    (f, DVector::from_row_slice(grad.transpose().as_slice()))
}

/// Largest `|p_s(a) - p_s(b)|` over every sequence of at most `max_len` gates.
pub fn max_probability_difference(a: &GateSet, b: &GateSet, max_len: usize) -> Result<f64> {
    check_compatible(a, b)?;
    let n = a.hs_dim();
    // Breadth-first over sequences, carrying both propagated states.
    let mut frontier = vec![(a.rho().0.clone(), b.rho().0.clone())];
    let mut worst: f64 = 0.0;
    for depth in 0..=max_len {
        let mut next = Vec::new();
        for (va, vb) in &frontier {
            worst = worst.max((a.effect().0.dot(va) - b.effect().0.dot(vb)).abs());
            if depth < max_len {
                for (ga, gb) in a.gates().values().zip(b.gates().values()) {
                    next.push((&ga.0 * va, &gb.0 * vb));
                }
            }
        }
        frontier = next;
    }
    debug_assert!(n > 0);
    Ok(worst)
}

/// Search over invertible `M` for the gauge that brings `gs` closest to
/// `target` in [`frobenius_discrepancy`]. Starts at the identity (plus
/// `restarts` random starts) and never returns a worse gauge than the
/// identity.
pub fn gauge_optimize(gs: &GateSet, target: &GateSet, opts: &GaugeOptions) -> Result<GaugeFit> {
    check_compatible(gs, target)?;
    let n = gs.hs_dim();
    let before = frobenius_discrepancy(gs, target, opts.spam_weight)?;
    let f = |x: &DVector<f64>| objective(gs, target, opts.spam_weight, x);
    let bfgs_opts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: 1e-10,
        ..BfgsOptions::default()
    };

    let identity = DVector::from_row_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let mut starts = vec![identity.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let jitter: Vec<f64> = (0..n * n)
            .map(|_| 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        starts.push(&identity + DVector::from_vec(jitter));
    }

    let mut best = (identity, before);
    for start in starts {
        let r = bfgs(start, f, &bfgs_opts);
        if r.f.is_finite() && r.f < best.1 {
            best = (r.x, r.f);
        }
    }
    let m = DMatrix::from_row_slice(n, n, best.0.as_slice());
    let transform = match GaugeTransform::new(m) {
        Ok(t) => t,
        Err(_) => {
            log::warn!("gauge search left the invertible region; keeping the identity");
            GaugeTransform::identity(n)
        }
    };
    let out = apply_gauge(gs, &transform)?;
    let after = frobenius_discrepancy(&out, target, opts.spam_weight)?;
    let invariance_error = max_probability_difference(gs, &out, INVARIANCE_CHECK_LENGTH)?;
    if invariance_error > 1e-9 {
        log::warn!("gauge transform changed probabilities by {invariance_error:.3e}");
    }
    Ok(GaugeFit {
        det_m: transform.determinant(),
        transform,
        gate_set: out,
        discrepancy_before: before,
        discrepancy_after: after,
        invariance_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{pauli_basis, C64};
    use crate::model::Sequence;
    use crate::model::{density_to_vector, effect_to_vector, unitary_to_superop};
    use crate::targets::{
        depolarizing_superop, ideal_targets, random_gate_set, random_sequence, sigma_x, sigma_y,
        sigma_z, TARGET_LABELS,
    };
    use rand::Rng;

    pub(crate) fn random_transform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> GaugeTransform {
        loop {
            let m = DMatrix::from_fn(n, n, |i, j| {
                (i == j) as u8 as f64 + scale * rng.random_range(-1.0..1.0)
            });
            let sv = m.clone().singular_values();
            if sv.max() / sv.min() <= 1e3 {
                return GaugeTransform::new(m).unwrap();
            }
        }
    }

    #[test]
    fn identity_and_scalar_leave_gate_set_unchanged() {
        let gs = ideal_targets();
        assert_eq!(apply_gauge(&gs, &GaugeTransform::identity(4)).unwrap(), gs);
        let scaled = apply_gauge(
            &gs,
            &GaugeTransform::new(DMatrix::identity(4, 4) * 2.5).unwrap(),
        )
        .unwrap();
        for (a, b) in gs.gates().values().zip(scaled.gates().values()) {
            assert!((&a.0 - &b.0).amax() < 1e-12);
        }
        // Scalars cancel between rho and E in every probability.
        assert!(max_probability_difference(&gs, &scaled, 4).unwrap() < 1e-12);
    }

    #[test]
    fn singular_transform_rejected() {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = 0.0;
        assert!(matches!(
            GaugeTransform::new(m),
            Err(GstError::SingularGauge { .. })
        ));
    }

    /// Exponential `exp(i theta sigma)`.
    fn exp_i(theta: f64, s: crate::basis::CMatrix) -> crate::basis::CMatrix {
        let id = crate::basis::CMatrix::identity(2, 2);
        id * C64::new(theta.cos(), 0.0) + s * C64::new(0.0, theta.sin())
    }

    #[test]
    fn textbook_gauge_pair_is_indistinguishable() {
        let basis = pauli_basis(2).unwrap();
        let quarter = std::f64::consts::FRAC_PI_4;
        let zero = crate::targets::ket_projector(0);
        let plus = crate::basis::CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        let make = |state: &crate::basis::CMatrix, a, b| {
            let mut gates = std::collections::BTreeMap::new();
            gates.insert(
                "A".to_string(),
                unitary_to_superop(&exp_i(quarter, a), &basis).unwrap(),
            );
            gates.insert(
                "B".to_string(),
                unitary_to_superop(&exp_i(quarter, b), &basis).unwrap(),
            );
            GateSet::new(
                2,
                density_to_vector(state, &basis).unwrap(),
                effect_to_vector(state, &basis).unwrap(),
                gates,
            )
            .unwrap()
        };
        let g0 = make(&zero, sigma_z(), sigma_x());
        let g1 = make(&plus, sigma_x(), sigma_y());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let labels = g0.labels();
        for _ in 0..100 {
            let s = random_sequence(&mut rng, &labels, 12);
            let (a, b) = (g0.probability(&s).unwrap(), g1.probability(&s).unwrap());
            assert!((a - b).abs() < 1e-12, "{s}: {a} vs {b}");
        }
    }

    #[test]
    fn composition_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gs = random_gate_set(&mut rng, &TARGET_LABELS, 0.1);
        let t1 = random_transform(&mut rng, 4, 0.3);
        let t2 = random_transform(&mut rng, 4, 0.3);
        let twice = apply_gauge(&apply_gauge(&gs, &t1).unwrap(), &t2).unwrap();
        let once = apply_gauge(&gs, &t2.compose(&t1)).unwrap();
        assert!(twice.max_abs_diff(&once).unwrap() < 1e-10);
    }

    #[test]
    fn discrepancy_basics() {
        let gs = ideal_targets();
        assert_eq!(frobenius_discrepancy(&gs, &gs, 0.0).unwrap(), 0.0);
        let shifted = crate::targets::rotate_spam(&gs, [0.0, 1.0, 0.0], 0.3);
        assert_eq!(frobenius_discrepancy(&gs, &shifted, 0.0).unwrap(), 0.0);
        assert!(frobenius_discrepancy(&gs, &shifted, 1.0).unwrap() > 0.0);
        let mut other = gs.clone();
        other.set_gate("G9", SuperOperator::identity(4)).unwrap();
        assert!(matches!(
            frobenius_discrepancy(&gs, &other, 0.0),
            Err(GstError::LabelMismatch)
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gs = random_gate_set(&mut rng, &TARGET_LABELS, 0.1);
        let target = ideal_targets();
        for w in [0.0, 0.7] {
            let x = DVector::from_row_slice(
                random_transform(&mut rng, 4, 0.2)
                    .matrix()
                    .transpose()
                    .as_slice(),
            );
            let (_, g) = objective(&gs, &target, w, &x);
            let h = 1e-6;
            let numeric = DVector::from_fn(16, |i, _| {
                let mut p = x.clone();
                p[i] += h;
                let mut m = x.clone();
                m[i] -= h;
                (objective(&gs, &target, w, &p).0 - objective(&gs, &target, w, &m).0) / (2.0 * h)
            });
            assert!((&g - &numeric).norm() / numeric.norm() < 1e-6);
        }
    }

    #[test]
    fn recovers_gauge_transformed_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = crate::targets::noisy_targets(0.0, 0.02);
        let t = random_transform(&mut rng, 4, 0.15);
        let moved = apply_gauge(&target, &t).unwrap();
        let fit = gauge_optimize(&moved, &target, &GaugeOptions::default()).unwrap();
        assert!(fit.discrepancy_after < 1e-6, "{}", fit.discrepancy_after);
        assert!(fit.invariance_error < 1e-9);
    }

    #[test]
    fn target_is_a_fixed_point() {
        let target = ideal_targets();
        let fit = gauge_optimize(&target, &target, &GaugeOptions::default()).unwrap();
        assert_eq!(fit.discrepancy_after, 0.0);
        assert!((fit.transform.matrix() - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn depolarized_target_does_not_get_worse() {
        let target = ideal_targets();
        let mut noisy = target.clone();
        let dep = depolarizing_superop(0.05).0;
        for l in target.labels() {
            noisy
                .set_gate(&l, SuperOperator(&dep * &target.gate(&l).unwrap().0))
                .unwrap();
        }
        let opts = GaugeOptions {
            restarts: 2,
            seed: 1,
            ..GaugeOptions::default()
        };
        let fit = gauge_optimize(&noisy, &target, &opts).unwrap();
        assert!(fit.discrepancy_after <= fit.discrepancy_before);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn probabilities_are_gauge_invariant(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gs = random_gate_set(&mut rng, &TARGET_LABELS, 0.1);
            let t = random_transform(&mut rng, 4, 1.0);
            let moved = apply_gauge(&gs, &t).unwrap();
            let labels = gs.labels();
            for _ in 0..10 {
                let s: Sequence = random_sequence(&mut rng, &labels, 10);
                let d = (gs.probability(&s).unwrap() - moved.probability(&s).unwrap()).abs();
                proptest::prop_assert!(d < 1e-9);
            }
        }
    }
}
