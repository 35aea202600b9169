//! Standard local operators and kets.
//!
//! Qubit basis: index 0 = |down> (ground), index 1 = |up> (excited), so
//! sigma_z = |up><up| - |down><down| and sigma_plus = |up><down|. Resonator
//! ladder operators act on a Fock space truncated at `dim - 1` photons.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// sigma_x = |up><down| + |down><up|.
pub fn sigma_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// sigma_y = -i|up><down| + i|down><up|.
pub fn sigma_y() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)])
}

/// sigma_z = |up><up| - |down><down|.
pub fn sigma_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
}

/// Raising operator sigma_plus = |up><down|.
pub fn sigma_plus() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Lowering operator sigma_minus = |down><up|.
pub fn sigma_minus() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
}

pub fn identity(dim: usize) -> DMatrix<Complex64> {
    DMatrix::identity(dim, dim)
}

/// Annihilation operator on a `dim`-level Fock space: a|n> = sqrt(n)|n-1>.
pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Creation operator, adjoint of [`annihilation`].
pub fn creation(dim: usize) -> DMatrix<Complex64> {
    annihilation(dim).adjoint()
}

/// Photon number operator a^dag a.
pub fn number(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |r, c_| {
        if r == c_ { c(r as f64, 0.0) } else { Complex64::default() }
    })
}

/// Basis ket |index> in a `dim`-level space.
pub fn basis_ket(dim: usize, index: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(dim);
    v[index] = c(1.0, 0.0);
    v
}

/// Rank-1 operator |a><b|.
pub fn outer(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DMatrix<Complex64> {
    a * b.adjoint()
}
