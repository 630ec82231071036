//! Orthonormal Hermitian operator bases for Hilbert-Schmidt space.

use nalgebra::{Complex, DMatrix};

use crate::error::{GstError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// An ordered basis of `d^2` Hermitian `d x d` matrices, orthonormal under
/// `Tr[A^dagger B]`, whose first element is `1l / sqrt(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

/// Normalized Pauli basis `(1l, sx, sy, sz) / sqrt(2)` for `dim = 2`, and the
/// normalized generalized Gell-Mann basis for larger dimensions.
///
/// The Gell-Mann ordering is: identity, then for every pair `j < k` the
/// symmetric and antisymmetric off-diagonal elements, then the diagonal
/// traceless elements. For `d = 2` this is exactly the Pauli ordering.
pub fn pauli_basis(dim: usize) -> Result<HermitianBasis> {
    if dim < 2 {
        return Err(GstError::UnsupportedDimension(dim));
    }
    let zero = C64::new(0.0, 0.0);
    let mut elements = Vec::with_capacity(dim * dim);
    elements.push(CMatrix::identity(dim, dim) / C64::new((dim as f64).sqrt(), 0.0));

    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut sym = CMatrix::from_element(dim, dim, zero);
            sym[(j, k)] = C64::new(s, 0.0);
            sym[(k, j)] = C64::new(s, 0.0);
            elements.push(sym);

            let mut anti = CMatrix::from_element(dim, dim, zero);
            anti[(j, k)] = C64::new(0.0, -s);
            anti[(k, j)] = C64::new(0.0, s);
            elements.push(anti);
        }
    }
    for l in 1..dim {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMatrix::from_element(dim, dim, zero);
        for m in 0..l {
            diag[(m, m)] = C64::new(norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        elements.push(diag);
    }

    Ok(HermitianBasis { dim, elements })
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, `d^2`.
    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    /// Coordinates `c_i = Tr[B_i^dagger X]` of an arbitrary (possibly
    /// non-Hermitian) matrix.
    pub fn coordinates(&self, m: &CMatrix) -> Vec<C64> {
        self.elements.iter().map(|b| hs_inner(b, m)).collect()
    }

    /// Inverse of [`coordinates`](Self::coordinates).
    pub fn reconstruct(&self, coords: &[C64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (c, b) in coords.iter().zip(&self.elements) {
            out += b * *c;
        }
        out
    }

    pub(crate) fn check_dim(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.dim || cols != self.dim {
            return Err(GstError::DimensionMismatch {
                expected: self.dim,
                found: rows.max(cols),
            });
        }
        Ok(())
    }
}

/// Hilbert-Schmidt inner product `Tr[A^dagger B]`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
}

/// Largest absolute entry of `m - m^dagger`.
pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    m.iter()
        .zip(adj.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn qubit_basis_is_orthonormal() {
        let basis = pauli_basis(2).unwrap();
        assert_eq!(basis.size(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let v = hs_inner(basis.element(i), basis.element(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - c(expected)).norm() < 1e-12, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn qubit_basis_elements() {
        let basis = pauli_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b0 = basis.element(0);
        assert!((b0[(0, 0)] - c(s)).norm() < 1e-15);
        assert!((b0[(1, 1)] - c(s)).norm() < 1e-15);
        assert!(b0[(0, 1)].norm() < 1e-15);
        let b3 = basis.element(3);
        assert!((b3[(0, 0)] - c(s)).norm() < 1e-15);
        assert!((b3[(1, 1)] - c(-s)).norm() < 1e-15);
        // sigma_y / sqrt(2)
        let b2 = basis.element(2);
        assert!((b2[(0, 1)] - C64::new(0.0, -s)).norm() < 1e-15);
        assert!((b2[(1, 0)] - C64::new(0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn gell_mann_basis_is_orthonormal_and_hermitian() {
        for d in 3..=4 {
            let basis = pauli_basis(d).unwrap();
            assert_eq!(basis.size(), d * d);
            for (i, bi) in basis.elements().iter().enumerate() {
                assert!(hermitian_deviation(bi) < 1e-15);
                for (j, bj) in basis.elements().iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((hs_inner(bi, bj) - c(expected)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_dimension_one() {
        assert!(matches!(
            pauli_basis(1),
            Err(GstError::UnsupportedDimension(1))
        ));
    }
}
