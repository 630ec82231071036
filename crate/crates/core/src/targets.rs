//! Named qubit gates, the four-gate Clifford-generating target set, and
//! noisy or random variants of it used for simulation.
//!
//! Rotations follow the convention `R_n(theta) = exp(-i theta n.sigma / 2)`,
//! a right-handed rotation of the Bloch vector. With it the `X_{pi/2}` gate
//! maps `y -> z` and `z -> -y`, giving the transfer matrix
//! `[[1,0,0,0],[0,1,0,0],[0,0,0,-1],[0,0,1,0]]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::{pauli_basis, CMatrix, C64};
use crate::model::{
    density_to_vector, effect_to_vector, kraus_to_superop, unitary_to_superop, EffectVector,
    GateSet, Sequence, StateVector, SuperOperator,
};

/// Labels of the default four-gate qubit set.
pub const TARGET_LABELS: [&str; 4] = ["G1", "G2", "G3", "G4"];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `exp(-i angle (n . sigma) / 2)` for a (not necessarily normalized) axis.
pub fn rotation(axis: [f64; 3], angle: f64) -> CMatrix {
    let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    let [nx, ny, nz] = axis.map(|a| a / norm);
    let generator = sigma_x() * c(nx, 0.0) + sigma_y() * c(ny, 0.0) + sigma_z() * c(nz, 0.0);
    CMatrix::identity(2, 2) * c((angle / 2.0).cos(), 0.0) - generator * c(0.0, (angle / 2.0).sin())
}

/// `|k><k|` on a qubit.
pub fn ket_projector(k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(k, k)] = c(1.0, 0.0);
    m
}

/// Kraus operators `{sqrt(1-3p/4) 1l, sqrt(p/4) sx, sqrt(p/4) sy, sqrt(p/4) sz}`.
pub fn depolarizing_kraus(p: f64) -> Vec<CMatrix> {
    let a = c((1.0 - 0.75 * p).sqrt(), 0.0);
    let b = c((p / 4.0).sqrt(), 0.0);
    vec![
        CMatrix::identity(2, 2) * a,
        sigma_x() * b,
        sigma_y() * b,
        sigma_z() * b,
    ]
}

/// Qubit superoperator of a rotation.
pub fn rotation_superop(axis: [f64; 3], angle: f64) -> SuperOperator {
    let basis = pauli_basis(2).expect("qubit basis");
    unitary_to_superop(&rotation(axis, angle), &basis).expect("rotations are unitary")
}

/// Qubit depolarizing superoperator `diag(1, 1-p, 1-p, 1-p)`.
pub fn depolarizing_superop(p: f64) -> SuperOperator {
    let basis = pauli_basis(2).expect("qubit basis");
    kraus_to_superop(&depolarizing_kraus(p), &basis).expect("depolarizing channel is complete")
}

const X: [f64; 3] = [1.0, 0.0, 0.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];

/// Target set: `G1 = 1l`, `G2 = X_{pi/2}`, `G3 = Y_{pi/2}`, `G4 = X_pi`,
/// prepared in `|1><1|` and measured with effect `|0><0|`.
pub fn ideal_targets() -> GateSet {
    noisy_targets(0.0, 0.0)
}

/// The target set with every gate over-rotated by `over_rotation` radians
/// (the idle gate picks up a z rotation of that size) and followed by a
/// depolarizing channel of strength `depolarization`. SPAM stays ideal.
pub fn noisy_targets(over_rotation: f64, depolarization: f64) -> GateSet {
    let basis = pauli_basis(2).expect("qubit basis");
    let rho = density_to_vector(&ket_projector(1), &basis).expect("projector is Hermitian");
    let effect = effect_to_vector(&ket_projector(0), &basis).expect("projector is Hermitian");
    let dep = depolarizing_superop(depolarization);
    let specs: [(&str, [f64; 3], f64); 4] = [
        ("G1", Z, 0.0),
        ("G2", X, PI / 2.0),
        ("G3", Y, PI / 2.0),
        ("G4", X, PI),
    ];
    let gates = specs
        .iter()
        .map(|(label, axis, angle)| {
            let mut g = rotation_superop(*axis, angle + over_rotation).0;
            if depolarization != 0.0 {
                g = &dep.0 * g;
            }
            // Exact integers for the ideal Clifford entries.
            g.apply(|v| {
                if (*v - v.round()).abs() < 1e-14 {
                    *v = v.round()
                }
            });
            (label.to_string(), SuperOperator(g))
        })
        .collect();
    GateSet::new(2, rho, effect, gates).expect("target set is well formed")
}

/// Rotate the preparation and measurement frame of a qubit gate set by a
/// unitary rotation, leaving the gates untouched.
pub fn rotate_spam(gs: &GateSet, axis: [f64; 3], angle: f64) -> GateSet {
    let r = rotation_superop(axis, angle).0;
    let mut out = gs.clone();
    out.set_rho(StateVector(&r * &gs.rho().0));
    out.set_effect(EffectVector(&r * &gs.effect().0));
    out
}

/// Haar-random element of SU(2).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
    let q: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [a, b, cc, d] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
    CMatrix::from_row_slice(2, 2, &[c(a, b), c(cc, d), c(-cc, d), c(a, -b)])
}

/// A random but physical qubit gate set: each gate is a Haar-random unitary
/// followed by depolarization of strength uniform in `[0, max_depolarization]`;
/// the state and effect are randomly oriented, slightly mixed projectors.
pub fn random_gate_set<R: Rng + ?Sized>(
    rng: &mut R,
    labels: &[&str],
    max_depolarization: f64,
) -> GateSet {
    let basis = pauli_basis(2).expect("qubit basis");
    let mut gates = BTreeMap::new();
    for label in labels {
        let u = unitary_to_superop(&random_unitary(rng), &basis).expect("unitary");
        let p = rng.random_range(0.0..=max_depolarization);
        gates.insert(
            label.to_string(),
            SuperOperator(depolarizing_superop(p).0 * u.0),
        );
    }
    let mut random_projector = |shrink: f64| {
        let u = random_unitary(rng);
        let proj = &u * ket_projector(0) * u.adjoint();
        let mixed = proj * c(1.0 - shrink, 0.0) + CMatrix::identity(2, 2) * c(shrink / 2.0, 0.0);
        density_to_vector(&mixed, &basis).expect("Hermitian").0
    };
    let rho = random_projector(RANDOM_SPAM_MIXING);
    let effect = random_projector(RANDOM_SPAM_MIXING);
    GateSet::new(2, StateVector(rho), EffectVector(effect), gates).expect("well formed")
}

const RANDOM_SPAM_MIXING: f64 = 0.02;

/// Uniformly random sequence over `labels` with length uniform in `0..=max_len`.
pub fn random_sequence<R: Rng + ?Sized>(
    rng: &mut R,
    labels: &[String],
    max_len: usize,
) -> Sequence {
    let len = rng.random_range(0..=max_len);
    Sequence(
        (0..len)
            .map(|_| labels[rng.random_range(0..labels.len())].clone())
            .collect(),
    )
}

/// Column vector from a slice.
pub fn vector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

/// Row-major matrix helper.
pub fn matrix(n: usize, values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_half_transfer_matrix() {
        let gs = ideal_targets();
        let t2 = matrix(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert!((&gs.gate("G2").unwrap().0 - t2).amax() < 1e-15);
    }

    #[test]
    fn y_half_transfer_matrix() {
        let gs = ideal_targets();
        let t3 = matrix(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0,
            ],
        );
        assert!((&gs.gate("G3").unwrap().0 - t3).amax() < 1e-15);
    }

    #[test]
    fn x_pi_and_idle_targets() {
        let gs = ideal_targets();
        let t4 = DMatrix::from_diagonal(&vector(&[1.0, 1.0, -1.0, -1.0]));
        assert_eq!(gs.gate("G4").unwrap().0, t4);
        assert_eq!(gs.gate("G1").unwrap().0, DMatrix::identity(4, 4));
    }

    #[test]
    fn noisy_targets_are_physical() {
        let gs = noisy_targets(0.01, 0.005);
        let basis = pauli_basis(2).unwrap();
        for g in gs.gates().values() {
            assert!(g.is_trace_preserving(1e-12));
            assert!(g.choi_min_eigenvalue(&basis) > -1e-12);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = random_unitary(&mut rng);
            let dev = (u.adjoint() * &u - CMatrix::identity(2, 2)).camax();
            assert!(dev < 1e-12);
        }
    }
}
