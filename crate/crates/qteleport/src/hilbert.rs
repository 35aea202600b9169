//! States and operators on composite Hilbert spaces.
//!
//! A composite space is an ordered list of subsystem dimensions. The flat
//! basis index follows the Kronecker convention with the *left* factor most
//! significant:
//!
//! ```text
//! |i0, i1, ..., ik>  ->  ((i0 * d1 + i1) * d2 + i2) * ...
//! ```
//!
//! Teleportation states use the fixed order (qubit 1, resonator, qubit 2)
//! with qubit basis index 0 = |down> (ground) and 1 = |up> (excited).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Norm deviation tolerated by [`QuantumState`] constructors.
pub const STATE_NORM_TOL: f64 = 1e-9;
/// Hermiticity tolerance for density matrices.
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-9;
/// Trace deviation tolerated by [`DensityMatrix`] constructors.
pub const DENSITY_TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue a valid density matrix may carry.
pub const DENSITY_EIGENVALUE_FLOOR: f64 = -1e-8;
/// Hermiticity tolerance for operators constructed with the hermitian flag.
pub const OPERATOR_HERMITIAN_TOL: f64 = 1e-12;

/// Ordered subsystem dimensions of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
}

impl HilbertLayout {
    /// Layout from explicit subsystem dimensions; every dimension must be >= 2.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("layout needs at least one subsystem".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimension {d} < 2 is not a quantum system"
            )));
        }
        Ok(Self { dims })
    }

    /// Single qubit.
    pub fn qubit() -> Self {
        Self { dims: vec![2] }
    }

    /// Resonator truncated at Fock level `n_max`.
    pub fn resonator(n_max: usize) -> Result<Self> {
        Self::new(vec![n_max + 1])
    }

    /// Full protocol layout (qubit 1, resonator, qubit 2).
    pub fn protocol(n_max: usize) -> Result<Self> {
        Self::new(vec![2, n_max + 1, 2])
    }

    /// Channel layout (resonator, qubit 2).
    pub fn channel(n_max: usize) -> Result<Self> {
        Self::new(vec![n_max + 1, 2])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn subsystem_count(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Stride of each subsystem in the flat index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Flat basis index of a multi-index.
    pub fn basis_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dims.len() {
            return Err(Error::LayoutMismatch(format!(
                "multi-index rank {} vs layout rank {}",
                multi.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0usize;
        for (k, (&i, &d)) in multi.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of range for subsystem {k} (dim {d})"
                )));
            }
            flat = flat * d + i;
        }
        Ok(flat)
    }

    /// Multi-index of a flat basis index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0usize; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            multi[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        multi
    }

    /// Layout restricted to the given subsystems (must be sorted, unique).
    pub fn keep(&self, keep: &[usize]) -> Result<Self> {
        self.check_sorted_sites(keep)?;
        Self::new(keep.iter().map(|&k| self.dims[k]).collect())
    }

    /// Sites `(resonator, qubit)` of the given qubit in a layout that
    /// contains the resonator: (qubit, resonator, qubit) or
    /// (resonator, qubit).
    pub fn exchange_sites(&self, qubit: usize) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [2, _, 2] => match qubit {
                0 => Ok((1, 0)),
                1 => Ok((1, 2)),
                _ => Err(Error::InvalidArgument(format!("qubit index {qubit} out of range"))),
            },
            [_, 2] if qubit == 1 => Ok((0, 1)),
            [_, 2] => Err(Error::InvalidArgument(
                "only the receiving qubit lives in a (resonator, qubit) layout".into(),
            )),
            _ => Err(Error::LayoutMismatch(format!(
                "no resonator-qubit pair for qubit {qubit} in layout {:?}",
                self.dims
            ))),
        }
    }

    /// Site of the given qubit in any supported layout: the full
    /// (qubit, resonator, qubit), the (resonator, qubit) channel half, or
    /// a lone qubit.
    pub fn qubit_slot(&self, qubit: usize) -> Result<usize> {
        match self.dims.as_slice() {
            [2, _, 2] => match qubit {
                0 => Ok(0),
                1 => Ok(2),
                _ => Err(Error::InvalidArgument(format!("qubit index {qubit} out of range"))),
            },
            [_, 2] if qubit == 1 => Ok(1),
            [2] if qubit <= 1 => Ok(0),
            _ => Err(Error::LayoutMismatch(format!(
                "no slot for qubit {qubit} in layout {:?}",
                self.dims
            ))),
        }
    }

    fn check_sorted_sites(&self, sites: &[usize]) -> Result<()> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty subsystem selection".into()));
        }
        for w in sites.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(format!(
                    "subsystem selection {sites:?} must be strictly increasing"
                )));
            }
        }
        if *sites.last().unwrap() >= self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "subsystem index {} out of range ({} subsystems)",
                sites.last().unwrap(),
                self.dims.len()
            )));
        }
        Ok(())
    }

    fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }
}

/// Pure state on a composite layout; unit norm enforced at construction.
#[derive(Debug, Clone)]
pub struct QuantumState {
    layout: HilbertLayout,
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    /// Wrap amplitudes, requiring unit norm within [`STATE_NORM_TOL`].
    pub fn new(layout: HilbertLayout, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch(format!(
                "{} amplitudes vs layout dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "state norm {norm} deviates from 1 beyond {STATE_NORM_TOL:e}"
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Wrap amplitudes after normalizing; zero vectors are rejected.
    pub fn normalized(layout: HilbertLayout, amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        Self::new(layout, amplitudes / Complex64::from(norm))
    }

    /// Computational basis state |multi>.
    pub fn basis_state(layout: HilbertLayout, multi: &[usize]) -> Result<Self> {
        let flat = layout.basis_index(multi)?;
        let mut amplitudes = DVector::zeros(layout.total_dim());
        amplitudes[flat] = Complex64::new(1.0, 0.0);
        Ok(Self { layout, amplitudes })
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Amplitude on the basis state |multi>.
    pub fn amplitude(&self, multi: &[usize]) -> Result<Complex64> {
        Ok(self.amplitudes[self.layout.basis_index(multi)?])
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("inner product across different layouts".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Projector |self><self| as a density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { layout: self.layout.clone(), elements: m }
    }

    pub(crate) fn from_parts_unchecked(
        layout: HilbertLayout,
        amplitudes: DVector<Complex64>,
    ) -> Self {
        Self { layout, amplitudes }
    }
}

/// Mixed state on a composite layout.
///
/// `new` enforces hermiticity, unit trace and spectrum >= the eigenvalue
/// floor; internal paths that produce controlled violations (integration,
/// tomography estimates) construct unchecked and report their own checks.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(layout: HilbertLayout, elements: DMatrix<Complex64>) -> Result<Self> {
        let dim = layout.total_dim();
        if elements.nrows() != dim || elements.ncols() != dim {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix vs layout dimension {}",
                elements.nrows(),
                elements.ncols(),
                dim
            )));
        }
        let dev = hermitian_deviation(&elements);
        if dev > DENSITY_HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix deviates from hermitian by {dev:e}"
            )));
        }
        let trace = elements.trace();
        if (trace.re - 1.0).abs() > DENSITY_TRACE_TOL || trace.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidArgument(format!("density matrix trace {trace} is not 1")));
        }
        let rho = Self { layout, elements };
        let min = rho.min_eigenvalue();
        if min < DENSITY_EIGENVALUE_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "density matrix has eigenvalue {min:e} below {DENSITY_EIGENVALUE_FLOOR:e}"
            )));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &QuantumState) -> Self {
        state.to_density()
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn trace(&self) -> Complex64 {
        self.elements.trace()
    }

    /// Smallest eigenvalue of the hermitized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.elements + self.elements.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        eig.eigenvalues.min()
    }

    pub(crate) fn from_parts_unchecked(
        layout: HilbertLayout,
        elements: DMatrix<Complex64>,
    ) -> Self {
        Self { layout, elements }
    }
}

/// Operator on a composite layout, tagging hermiticity when known.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    layout: HilbertLayout,
    elements: DMatrix<Complex64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Operator with no hermiticity claim.
    pub fn general(layout: HilbertLayout, elements: DMatrix<Complex64>) -> Result<Self> {
        Self::check_shape(&layout, &elements)?;
        Ok(Self { layout, elements, hermitian: false })
    }

    /// Operator asserted hermitian; verified within [`OPERATOR_HERMITIAN_TOL`].
    pub fn hermitian(layout: HilbertLayout, elements: DMatrix<Complex64>) -> Result<Self> {
        Self::check_shape(&layout, &elements)?;
        let dev = hermitian_deviation(&elements);
        if dev > OPERATOR_HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!(
                "operator deviates from hermitian by {dev:e}"
            )));
        }
        Ok(Self { layout, elements, hermitian: true })
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let dim = layout.total_dim();
        Self { layout, elements: DMatrix::identity(dim, dim), hermitian: true }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Apply to a pure state: O|psi> (result not renormalized).
    pub fn apply_raw(&self, state: &QuantumState) -> Result<DVector<Complex64>> {
        if self.layout != state.layout {
            return Err(Error::LayoutMismatch("operator and state layouts differ".into()));
        }
        Ok(&self.elements * state.amplitudes())
    }

    /// Apply a (presumed norm-preserving) operator: O|psi>, renormalized
    /// within the state tolerance.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        let amplitudes = self.apply_raw(state)?;
        QuantumState::new(self.layout.clone(), amplitudes)
    }

    fn check_shape(layout: &HilbertLayout, elements: &DMatrix<Complex64>) -> Result<()> {
        let dim = layout.total_dim();
        if elements.nrows() != dim || elements.ncols() != dim {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix vs layout dimension {}",
                elements.nrows(),
                elements.ncols(),
                dim
            )));
        }
        Ok(())
    }
}

pub(crate) fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for super::QuantumState {}
    impl Sealed for super::DensityMatrix {}
    impl Sealed for super::OperatorMatrix {}
}

/// Kinds that admit a Kronecker tensor product.
pub trait TensorFactor: sealed::Sealed + Sized {
    fn tensor_with(&self, other: &Self) -> Self;
}

impl TensorFactor for QuantumState {
    fn tensor_with(&self, other: &Self) -> Self {
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        QuantumState {
            layout: self.layout.concat(&other.layout),
            amplitudes: DVector::from_column_slice(amplitudes.as_slice()),
        }
    }
}

impl TensorFactor for DensityMatrix {
    fn tensor_with(&self, other: &Self) -> Self {
        DensityMatrix {
            layout: self.layout.concat(&other.layout),
            elements: self.elements.kronecker(&other.elements),
        }
    }
}

impl TensorFactor for OperatorMatrix {
    fn tensor_with(&self, other: &Self) -> Self {
        OperatorMatrix {
            layout: self.layout.concat(&other.layout),
            elements: self.elements.kronecker(&other.elements),
            hermitian: self.hermitian && other.hermitian,
        }
    }
}

/// Tensor product; the left factor is the most significant index block.
pub fn tensor<T: TensorFactor>(a: &T, b: &T) -> T {
    a.tensor_with(b)
}

/// Embed local operators at the given subsystems, identity elsewhere.
///
/// `factors` must name strictly increasing subsystem indices; each local
/// matrix must match that subsystem's dimension.
pub fn embed_product(
    layout: &HilbertLayout,
    factors: &[(usize, &DMatrix<Complex64>)],
) -> Result<DMatrix<Complex64>> {
    let sites: Vec<usize> = factors.iter().map(|(s, _)| *s).collect();
    layout.check_sorted_sites(&sites)?;
    for &(site, m) in factors {
        let d = layout.dims()[site];
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} local operator vs subsystem {site} dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut out = DMatrix::identity(1, 1);
    for (k, &d) in layout.dims().iter().enumerate() {
        out = match factors.iter().find(|(s, _)| *s == k) {
            Some((_, m)) => out.kronecker(m),
            None => out.kronecker(&DMatrix::identity(d, d)),
        };
    }
    Ok(out)
}

/// Embed a single local operator at `site`.
pub fn embed(
    layout: &HilbertLayout,
    site: usize,
    local: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    embed_product(layout, &[(site, local)])
}

/// Trace out every subsystem not listed in `keep` (sorted indices).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let kept_layout = layout.keep(keep)?;
    let traced: Vec<usize> =
        (0..layout.subsystem_count()).filter(|k| !keep.contains(k)).collect();
    if traced.is_empty() {
        return Ok(rho.clone());
    }
    let strides = layout.strides();
    let kept_dim = kept_layout.total_dim();
    let traced_dim: usize = traced.iter().map(|&k| layout.dims()[k]).product();

    // Flat offsets contributed by each group of indices.
    let offsets = |sites: &[usize], dim: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(dim);
        let dims: Vec<usize> = sites.iter().map(|&k| layout.dims()[k]).collect();
        for mut idx in 0..dim {
            let mut flat = 0;
            for j in (0..sites.len()).rev() {
                flat += (idx % dims[j]) * strides[sites[j]];
                idx /= dims[j];
            }
            out.push(flat);
        }
        out
    };
    let kept_offsets = offsets(keep, kept_dim);
    let traced_offsets = offsets(&traced, traced_dim);

    let src = rho.elements();
    let mut out = DMatrix::zeros(kept_dim, kept_dim);
    for (r, &ro) in kept_offsets.iter().enumerate() {
        for (c, &co) in kept_offsets.iter().enumerate() {
            let mut acc = Complex64::default();
            for &to in &traced_offsets {
                acc += src[(ro + to, co + to)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(kept_layout, out))
}
