//! Hilbert-Schmidt representation of states, effects, gates and gate sets.
//!
//! States are column vectors `|rho>>`, effects are row vectors `<<E|`, and
//! gates are real `d^2 x d^2` superoperators, all expressed in an orthonormal
//! Hermitian basis (the normalized Pauli basis for a qubit). Nothing here
//! enforces positivity: probabilities are reported exactly as the linear
//! algebra produces them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{hermitian_deviation, pauli_basis, CMatrix, HermitianBasis, C64};
use crate::error::{GstError, Result};

const HERMITIAN_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

/// Hilbert-Schmidt coordinates of a density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub DVector<f64>);

/// Hilbert-Schmidt coordinates of a POVM effect (used as a row vector).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectVector(pub DVector<f64>);

/// A real `d^2 x d^2` matrix acting on Hilbert-Schmidt space.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator(pub DMatrix<f64>);

impl StateVector {
    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when entry 0 equals `1/sqrt(d)`, i.e. the operator has unit trace.
    pub fn is_trace_one(&self, dim: usize) -> bool {
        (self.0[0] - 1.0 / (dim as f64).sqrt()).abs() < 1e-12
    }
}

impl EffectVector {
    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl SuperOperator {
    pub fn identity(size: usize) -> Self {
        SuperOperator(DMatrix::identity(size, size))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    /// First row equal to `(1, 0, ..., 0)`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.0
            .row(0)
            .iter()
            .enumerate()
            .all(|(i, v)| (v - if i == 0 { 1.0 } else { 0.0 }).abs() <= tol)
    }

    /// Minimum eigenvalue of the (normalized) Choi matrix of this map.
    ///
    /// Informational only: negative values indicate a map that is not
    /// completely positive. Nothing in the toolkit acts on it.
    pub fn choi_min_eigenvalue(&self, basis: &HermitianBasis) -> f64 {
        let d = basis.dim();
        let zero = C64::new(0.0, 0.0);
        let mut choi = CMatrix::from_element(d * d, d * d, zero);
        for i in 0..d {
            for j in 0..d {
                let mut unit = CMatrix::from_element(d, d, zero);
                unit[(i, j)] = C64::new(1.0, 0.0);
                let coords = basis.coordinates(&unit);
                let mapped: Vec<C64> = (0..coords.len())
                    .map(|r| {
                        coords
                            .iter()
                            .enumerate()
                            .map(|(c, v)| v * self.0[(r, c)])
                            .fold(zero, |a, b| a + b)
                    })
                    .collect();
                let out = basis.reconstruct(&mapped);
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = out[(a, b)] / C64::new(d as f64, 0.0);
                    }
                }
            }
        }
        let choi = (&choi + choi.adjoint()) * C64::new(0.5, 0.0);
        choi.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Coordinates `Tr[B_i^dagger m]` of a Hermitian matrix.
pub fn density_to_vector(m: &CMatrix, basis: &HermitianBasis) -> Result<StateVector> {
    Ok(StateVector(hermitian_coordinates(m, basis)?))
}

/// Same expansion as [`density_to_vector`], typed as an effect.
pub fn effect_to_vector(m: &CMatrix, basis: &HermitianBasis) -> Result<EffectVector> {
    Ok(EffectVector(hermitian_coordinates(m, basis)?))
}

fn hermitian_coordinates(m: &CMatrix, basis: &HermitianBasis) -> Result<DVector<f64>> {
    basis.check_dim(m.nrows(), m.ncols())?;
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(GstError::NotHermitian { deviation });
    }
    let coords = basis.coordinates(m);
    Ok(DVector::from_iterator(
        coords.len(),
        coords.iter().map(|c| c.re),
    ))
}

/// Rebuild the `d x d` matrix from Hilbert-Schmidt coordinates.
pub fn vector_to_density(v: &DVector<f64>, basis: &HermitianBasis) -> Result<CMatrix> {
    if v.len() != basis.size() {
        return Err(GstError::DimensionMismatch {
            expected: basis.size(),
            found: v.len(),
        });
    }
    let coords: Vec<C64> = v.iter().map(|x| C64::new(*x, 0.0)).collect();
    Ok(basis.reconstruct(&coords))
}

/// Superoperator of `rho -> u rho u^dagger`.
pub fn unitary_to_superop(u: &CMatrix, basis: &HermitianBasis) -> Result<SuperOperator> {
    basis.check_dim(u.nrows(), u.ncols())?;
    let deviation = identity_deviation(&(u.adjoint() * u));
    if deviation > UNITARY_TOL {
        return Err(GstError::NotUnitary { deviation });
    }
    Ok(channel_matrix(std::slice::from_ref(u), basis))
}

/// Superoperator of the Kraus map `rho -> sum_k K_k rho K_k^dagger`.
pub fn kraus_to_superop(kraus: &[CMatrix], basis: &HermitianBasis) -> Result<SuperOperator> {
    if kraus.is_empty() {
        return Err(GstError::InvalidArgument("empty Kraus set".into()));
    }
    let d = basis.dim();
    let mut completeness = CMatrix::zeros(d, d);
    for k in kraus {
        basis.check_dim(k.nrows(), k.ncols())?;
        completeness += k.adjoint() * k;
    }
    let deviation = identity_deviation(&completeness);
    if deviation > UNITARY_TOL {
        return Err(GstError::IncompleteKraus { deviation });
    }
    Ok(channel_matrix(kraus, basis))
}

fn channel_matrix(kraus: &[CMatrix], basis: &HermitianBasis) -> SuperOperator {
    let n = basis.size();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut image = CMatrix::zeros(basis.dim(), basis.dim());
        for k in kraus {
            image += k * basis.element(j) * k.adjoint();
        }
        for (i, c) in basis.coordinates(&image).into_iter().enumerate() {
            m[(i, j)] = c.re;
        }
    }
    SuperOperator(m)
}

fn identity_deviation(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `K d^4 - (K - 2) d^2 - 1`, the approximate number of independent
/// experiments needed to identify a gate set with `K` gates.
pub fn parameter_count(num_gates: usize, dim: usize) -> i64 {
    let k = num_gates as i64;
    let d2 = (dim * dim) as i64;
    k * d2 * d2 - (k - 2) * d2 - 1
}

/// An ordered list of gate labels; the first label is applied first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(pub Vec<String>);

impl Sequence {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Sequence(labels.into_iter().map(Into::into).collect())
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    /// Canonical key: labels joined by `:`; the empty sequence maps to `""`.
    pub fn key(&self) -> String {
        self.0.join(":")
    }

    pub fn from_key(key: &str) -> Self {
        if key.is_empty() {
            Sequence::empty()
        } else {
            Sequence(key.split(':').map(str::to_owned).collect())
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Sequence) -> Sequence {
        let mut labels = self.0.clone();
        labels.extend(other.0.iter().cloned());
        Sequence(labels)
    }

    pub fn repeat(&self, times: usize) -> Sequence {
        Sequence(
            std::iter::repeat_n(self.0.iter().cloned(), times)
                .flatten()
                .collect(),
        )
    }

    pub fn prefix(&self, len: usize) -> Sequence {
        Sequence(self.0[..len].to_vec())
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "{{}}")
        } else {
            write!(f, "{}", self.key())
        }
    }
}

pub(crate) fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(':') || label.contains(',') {
        return Err(GstError::InvalidLabel(label.to_owned()));
    }
    Ok(())
}

/// The complete black-box model: one state, one two-outcome effect `{E, 1l-E}`
/// and a labeled set of gates, all in the same basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    dim: usize,
    rho: StateVector,
    effect: EffectVector,
    gates: BTreeMap<String, SuperOperator>,
}

impl GateSet {
    pub fn new(
        dim: usize,
        rho: StateVector,
        effect: EffectVector,
        gates: BTreeMap<String, SuperOperator>,
    ) -> Result<Self> {
        let n = dim * dim;
        let check = |found: usize| {
            if found != n {
                Err(GstError::DimensionMismatch { expected: n, found })
            } else {
                Ok(())
            }
        };
        check(rho.len())?;
        check(effect.len())?;
        for (label, g) in &gates {
            validate_label(label)?;
            check(g.0.nrows())?;
            check(g.0.ncols())?;
        }
        Ok(GateSet {
            dim,
            rho,
            effect,
            gates,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hilbert-Schmidt dimension `d^2`.
    pub fn hs_dim(&self) -> usize {
        self.dim * self.dim
    }

    pub fn rho(&self) -> &StateVector {
        &self.rho
    }

    pub fn effect(&self) -> &EffectVector {
        &self.effect
    }

    pub fn gates(&self) -> &BTreeMap<String, SuperOperator> {
        &self.gates
    }

    pub fn gate(&self, label: &str) -> Result<&SuperOperator> {
        self.gates
            .get(label)
            .ok_or_else(|| GstError::UnknownGate(label.to_owned()))
    }

    pub fn labels(&self) -> Vec<String> {
        self.gates.keys().cloned().collect()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn set_rho(&mut self, rho: StateVector) {
        assert_eq!(rho.len(), self.hs_dim());
        self.rho = rho;
    }

    pub fn set_effect(&mut self, effect: EffectVector) {
        assert_eq!(effect.len(), self.hs_dim());
        self.effect = effect;
    }

    pub fn set_gate(&mut self, label: &str, gate: SuperOperator) -> Result<()> {
        validate_label(label)?;
        if gate.size() != self.hs_dim() || gate.0.ncols() != self.hs_dim() {
            return Err(GstError::DimensionMismatch {
                expected: self.hs_dim(),
                found: gate.size(),
            });
        }
        self.gates.insert(label.to_owned(), gate);
        Ok(())
    }

    /// Gate indices (in label order) for each element of `seq`.
    pub fn compile(&self, seq: &Sequence) -> Result<Vec<usize>> {
        seq.labels()
            .iter()
            .map(|l| {
                self.gates
                    .keys()
                    .position(|k| k == l)
                    .ok_or_else(|| GstError::UnknownGate(l.clone()))
            })
            .collect()
    }

    /// `G_{s_L} ... G_{s_1}`; the identity for the empty sequence.
    pub fn compose(&self, seq: &Sequence) -> Result<SuperOperator> {
        let mut acc = DMatrix::identity(self.hs_dim(), self.hs_dim());
        for label in seq.labels() {
            acc = self.gate(label)?.matrix() * acc;
        }
        Ok(SuperOperator(acc))
    }

    /// Born-rule probability `<<E| G_{s_L} ... G_{s_1} |rho>>`, unclipped.
    pub fn probability(&self, seq: &Sequence) -> Result<f64> {
        let mut state = self.rho.0.clone();
        for label in seq.labels() {
            state = self.gate(label)?.matrix() * state;
        }
        Ok(self.effect.0.dot(&state))
    }

    /// Largest absolute difference of every scalar parameter.
    pub fn max_abs_diff(&self, other: &GateSet) -> Result<f64> {
        if self.labels() != other.labels() || self.dim != other.dim {
            return Err(GstError::LabelMismatch);
        }
        let mut worst = (&self.rho.0 - &other.rho.0).amax();
        worst = worst.max((&self.effect.0 - &other.effect.0).amax());
        for (a, b) in self.gates.values().zip(other.gates.values()) {
            worst = worst.max((&a.0 - &b.0).amax());
        }
        Ok(worst)
    }

    pub fn to_file_format(&self) -> GateSetFile {
        GateSetFile {
            dim: self.dim,
            basis: basis_name(self.dim).to_owned(),
            rho: self.rho.0.iter().cloned().collect(),
            effect: self.effect.0.iter().cloned().collect(),
            gates: self
                .gates
                .iter()
                .map(|(k, g)| {
                    let rows = (0..g.size())
                        .map(|r| g.0.row(r).iter().cloned().collect())
                        .collect();
                    (k.clone(), rows)
                })
                .collect(),
        }
    }

    pub fn from_file_format(file: GateSetFile) -> Result<Self> {
        if file.basis != basis_name(file.dim) {
            return Err(GstError::InvalidArgument(format!(
                "unsupported basis `{}` for dim {}",
                file.basis, file.dim
            )));
        }
        let n = file.dim * file.dim;
        let mut gates = BTreeMap::new();
        for (label, rows) in file.gates {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(GstError::DimensionMismatch {
                    expected: n,
                    found: rows.len(),
                });
            }
            let m = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
            gates.insert(label, SuperOperator(m));
        }
        GateSet::new(
            file.dim,
            StateVector(DVector::from_vec(file.rho)),
            EffectVector(DVector::from_vec(file.effect)),
            gates,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("gate set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        GateSet::from_file_format(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        GateSet::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

fn basis_name(dim: usize) -> &'static str {
    if dim == 2 {
        "pauli-normalized"
    } else {
        "gell-mann-normalized"
    }
}

/// On-disk JSON layout of a gate set. Matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateSetFile {
    pub dim: usize,
    pub basis: String,
    pub rho: Vec<f64>,
    pub effect: Vec<f64>,
    pub gates: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Convenience: the normalized basis matching a gate set's dimension.
pub fn basis_for(gs: &GateSet) -> HermitianBasis {
    pauli_basis(gs.dim()).expect("gate set dimension is at least 2")
}
