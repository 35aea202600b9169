//! Fidelities, expectation values, projective measurement, entanglement.
//!
//! All overlap quantities are global-phase insensitive: pure-pure fidelity
//! is |<a|b>|^2 and pure-mixed fidelity is <a|rho|a>. Projective measurement
//! samples from the Born distribution using a caller-owned seeded generator,
//! so trials are reproducible.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertLayout, OperatorMatrix, QuantumState};
use crate::operators;

/// Largest |<i|P_a P_b|j>| two distinct projectors may share.
pub const PROJECTOR_ORTHOGONALITY_TOL: f64 = 1e-10;
/// How far the total outcome probability may deviate from 1.
pub const MEASUREMENT_SUPPORT_TOL: f64 = 1e-6;

/// Pure or mixed operand for [`fidelity`].
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a QuantumState),
    Mixed(&'a DensityMatrix),
}

/// Overlap fidelity between two states; mixed-mixed pairs are rejected.
pub fn fidelity(a: StateRef<'_>, b: StateRef<'_>) -> Result<f64> {
    match (a, b) {
        (StateRef::Pure(x), StateRef::Pure(y)) => pure_fidelity(x, y),
        (StateRef::Pure(x), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(x)) => {
            density_fidelity(x, r)
        }
        (StateRef::Mixed(_), StateRef::Mixed(_)) => Err(Error::InvalidArgument(
            "mixed-mixed fidelity is not defined by this crate".into(),
        )),
    }
}

/// |<a|b>|^2.
pub fn pure_fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// <a|rho|a>.
pub fn density_fidelity(a: &QuantumState, rho: &DensityMatrix) -> Result<f64> {
    if a.layout() != rho.layout() {
        return Err(Error::LayoutMismatch("fidelity across different layouts".into()));
    }
    let v = rho.elements() * a.amplitudes();
    Ok(a.amplitudes().dotc(&v).re)
}

/// <psi|O|psi>.
pub fn expectation(state: &QuantumState, op: &OperatorMatrix) -> Result<Complex64> {
    let v = op.apply_raw(state)?;
    Ok(state.amplitudes().dotc(&v))
}

/// tr(rho O).
pub fn expectation_density(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<Complex64> {
    if rho.layout() != op.layout() {
        return Err(Error::LayoutMismatch("expectation across different layouts".into()));
    }
    Ok((rho.elements() * op.matrix()).trace())
}

/// Result of a projective measurement on a pure state.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub index: usize,
    pub probability: f64,
    pub state: QuantumState,
}

/// Result of a projective measurement on a density matrix.
#[derive(Debug, Clone)]
pub struct DensityMeasurementOutcome {
    pub index: usize,
    pub probability: f64,
    pub state: DensityMatrix,
}

fn check_projectors(projectors: &[OperatorMatrix], layout: &HilbertLayout) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::InvalidArgument("no projectors supplied".into()));
    }
    for p in projectors {
        if p.layout() != layout {
            return Err(Error::LayoutMismatch("projector layout differs from state".into()));
        }
    }
    for (i, p) in projectors.iter().enumerate() {
        for q in &projectors[i + 1..] {
            let prod = p.matrix() * q.matrix();
            let max = prod.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if max > PROJECTOR_ORTHOGONALITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "projectors are not mutually orthogonal (overlap {max:e})"
                )));
            }
        }
    }
    Ok(())
}

fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], total: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probabilities.len() - 1
}

/// Born-rule measurement of a complete orthogonal projector family.
///
/// The outcome probabilities must sum to 1 within the given support
/// tolerance; the sampled post-measurement state is renormalized.
pub fn measure_projective<R: Rng + ?Sized>(
    state: &QuantumState,
    projectors: &[OperatorMatrix],
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    measure_projective_with_tol(state, projectors, MEASUREMENT_SUPPORT_TOL, rng)
}

pub(crate) fn measure_projective_with_tol<R: Rng + ?Sized>(
    state: &QuantumState,
    projectors: &[OperatorMatrix],
    support_tol: f64,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    check_projectors(projectors, state.layout())?;
    let branches: Vec<_> =
        projectors.iter().map(|p| p.apply_raw(state)).collect::<Result<_>>()?;
    let probabilities: Vec<f64> = branches.iter().map(|b| b.norm_squared()).collect();
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > support_tol {
        return Err(Error::StateSupport(format!(
            "outcome probabilities sum to {total}, beyond {support_tol:e} of 1"
        )));
    }
    let index = sample_index(&probabilities, total, rng);
    let state = QuantumState::normalized(state.layout().clone(), branches[index].clone())?;
    Ok(MeasurementOutcome { index, probability: probabilities[index], state })
}

/// Born-rule measurement on a density matrix; post state P rho P / p.
pub fn measure_projective_density<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    projectors: &[OperatorMatrix],
    rng: &mut R,
) -> Result<DensityMeasurementOutcome> {
    measure_density_with_tol(rho, projectors, MEASUREMENT_SUPPORT_TOL, rng)
}

pub(crate) fn measure_density_with_tol<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    projectors: &[OperatorMatrix],
    support_tol: f64,
    rng: &mut R,
) -> Result<DensityMeasurementOutcome> {
    check_projectors(projectors, rho.layout())?;
    let probabilities: Vec<f64> = projectors
        .iter()
        .map(|p| (p.matrix() * rho.elements()).trace().re)
        .collect();
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > support_tol {
        return Err(Error::StateSupport(format!(
            "outcome probabilities sum to {total}, beyond {support_tol:e} of 1"
        )));
    }
    let index = sample_index(&probabilities, total, rng);
    let p = probabilities[index];
    if p <= 0.0 {
        return Err(Error::StateSupport("sampled a zero-probability outcome".into()));
    }
    let m = projectors[index].matrix();
    let collapsed = (m * rho.elements() * m.adjoint()).unscale(p);
    Ok(DensityMeasurementOutcome {
        index,
        probability: p,
        state: DensityMatrix::from_parts_unchecked(rho.layout().clone(), collapsed),
    })
}

/// Hermitian square root via eigendecomposition; tiny negative eigenvalues
/// are clamped to zero.
fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).scale(lambda.sqrt());
    }
    out
}

/// Wootters concurrence of a two-qubit density matrix.
///
/// Factor rho = A A^dag from its eigendecomposition, keeping only
/// eigenvalues above arithmetic noise. The Wootters lambdas then equal
/// the singular values of the complex symmetric matrix
/// `M = A^T (sy (x) sy) A`, because the nonzero spectrum of
/// `rho rho_tilde` is that of `M* M` by cyclic permutation, and
/// C = max(0, l1 - l2 - l3 - l4).
///
/// Computing the lambdas as singular values (instead of square roots of
/// eigenvalues) keeps rank-deficient states accurate: a pure state's
/// concurrence resolves to ~1e-13 rather than the sqrt(eps) floor of the
/// squared route.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.layout().dims() != [2, 2] {
        return Err(Error::LayoutMismatch(format!(
            "concurrence needs a (2, 2) layout, got {:?}",
            rho.layout().dims()
        )));
    }
    let herm = (rho.elements() + rho.elements().adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let p_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    // Eigenvalues at arithmetic-noise level are exact zeros of the state.
    let cut = p_max * 64.0 * f64::EPSILON;
    let kept: Vec<usize> = (0..4).filter(|&k| eig.eigenvalues[k] > cut).collect();
    let mut a = DMatrix::<Complex64>::zeros(4, kept.len());
    for (j, &k) in kept.iter().enumerate() {
        a.set_column(j, &eig.eigenvectors.column(k).scale(eig.eigenvalues[k].sqrt()));
    }
    let sy2 = operators::sigma_y().kronecker(&operators::sigma_y());
    let m = a.transpose() * sy2 * &a;
    let mut lambdas: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.resize(4, 0.0);
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}
