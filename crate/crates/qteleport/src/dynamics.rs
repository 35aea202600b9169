//! Time evolution and signal extraction.
//!
//! Unitary Schrodinger and Lindblad master-equation integration with a
//! fixed-step fourth-order Runge-Kutta scheme, the resonant
//! qubit-resonator exchange pulse used to shuttle excitations in and out
//! of the resonator, and sinusoid fitting for pulling oscillation
//! frequencies out of simulated records.
//!
//! Step sizes are chosen by phase resolution: [`IntegratorConfig::for_frequency_scale`]
//! targets [`PHASE_STEP`] radians of the fastest phase per step, which
//! keeps the global fourth-order error orders of magnitude below the
//! tolerances asserted downstream. Integrators renormalize pure states
//! and hermitize density matrices every step, and fail loudly (rather
//! than silently degrading) when conservation defects exceed their
//! budgets.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonians::{jaynes_cummings_at, CollapseSet, DeviceParams, TWO_PI};
use crate::hilbert::{DensityMatrix, HilbertLayout, OperatorMatrix, QuantumState};

/// Target phase advance of the fastest component per step, radians.
pub const PHASE_STEP: f64 = 0.01;
/// Largest per-step norm-squared or trace defect before the step size is
/// declared too coarse for the dynamics.
pub const STEP_DEFECT_TOL: f64 = 1e-6;
/// Allowed deviation of tr(rho) from one at any point of an integration.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;
/// Most negative admissible density-matrix eigenvalue at checkpoints.
pub const POSITIVITY_FLOOR: f64 = -1e-6;
/// Hard cap on recorded snapshots per trajectory.
pub const MAX_SNAPSHOTS: usize = 2048;
/// Probability allowed on the truncation-edge state |up, n_max> when an
/// exchange pulse is applied; more would leak out of the kept Fock space.
pub const EDGE_SUPPORT_TOL: f64 = 1e-10;

/// How many intermediate states an integration keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    /// Keep only the state at the final time.
    FinalOnly,
    /// Keep about this many states, evenly spaced, plus start and end.
    Uniform(usize),
}

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Requested step, microseconds; shrunk to land exactly on the end time.
    pub dt: f64,
    /// Refuse integrations needing more steps than this.
    pub max_steps: usize,
    pub snapshots: SnapshotPolicy,
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
        }
        Ok(Self { dt, max_steps: 5_000_000, snapshots: SnapshotPolicy::FinalOnly })
    }

    /// Step size resolving [`PHASE_STEP`] radians of a linear frequency
    /// `f_max` (MHz). Pass the largest eigenfrequency of the generator.
    pub fn for_frequency_scale(f_max: f64) -> Result<Self> {
        if !(f_max > 0.0) || !f_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency scale must be positive, got {f_max}"
            )));
        }
        Self::with_dt(PHASE_STEP / (TWO_PI * f_max))
    }

    pub fn snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }
}

/// Generator of the evolution, in angular units (rad/us).
pub enum Hamiltonian<'a> {
    /// Time-independent generator.
    Constant(&'a OperatorMatrix),
    /// Generator rebuilt at each stage time.
    TimeDependent {
        layout: HilbertLayout,
        build: &'a dyn Fn(f64) -> Result<DMatrix<Complex64>>,
    },
}

impl Hamiltonian<'_> {
    pub fn layout(&self) -> &HilbertLayout {
        match self {
            Hamiltonian::Constant(op) => op.layout(),
            Hamiltonian::TimeDependent { layout, .. } => layout,
        }
    }

    fn matrix_at(&self, t: f64) -> Result<std::borrow::Cow<'_, DMatrix<Complex64>>> {
        match self {
            Hamiltonian::Constant(op) => Ok(std::borrow::Cow::Borrowed(op.matrix())),
            Hamiltonian::TimeDependent { build, .. } => Ok(std::borrow::Cow::Owned(build(t)?)),
        }
    }
}

/// Recorded states of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Accumulated conservation defect: sum of per-step |norm^2 - 1| for
    /// pure states, largest |tr(rho) - 1| seen for density matrices.
    pub drift: f64,
}

impl<S> Trajectory<S> {
    pub fn final_state(&self) -> &S {
        self.states.last().expect("trajectory holds at least the final state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the final time")
    }
}

struct StepPlan {
    steps: usize,
    dt: f64,
    stride: usize,
}

fn plan_steps(duration: f64, config: &IntegratorConfig) -> Result<StepPlan> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be >= 0, got {duration}")));
    }
    let steps = (duration / config.dt).ceil().max(1.0) as usize;
    if steps > config.max_steps {
        return Err(Error::StepBudget(format!(
            "integration over {duration} us needs {steps} steps of {} us, budget is {}",
            config.dt, config.max_steps
        )));
    }
    let stride = match config.snapshots {
        SnapshotPolicy::FinalOnly => usize::MAX,
        SnapshotPolicy::Uniform(n) => {
            let n = n.clamp(1, MAX_SNAPSHOTS);
            (steps / n).max(1)
        }
    };
    Ok(StepPlan { steps, dt: duration / steps as f64, stride })
}

/// Integrate the Schrodinger equation `d|psi>/dt = -i H(t) |psi>`.
///
/// The state is renormalized after every step; the per-step norm defect
/// must stay below [`STEP_DEFECT_TOL`], otherwise the step size is too
/// coarse and the run fails with [`Error::IntegrationQuality`].
pub fn evolve_unitary(
    state: &QuantumState,
    hamiltonian: &Hamiltonian,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory<QuantumState>> {
    if state.layout() != hamiltonian.layout() {
        return Err(Error::LayoutMismatch(format!(
            "state layout {:?} vs generator layout {:?}",
            state.layout().dims(),
            hamiltonian.layout().dims()
        )));
    }
    if duration == 0.0 {
        return Ok(Trajectory { times: vec![0.0], states: vec![state.clone()], drift: 0.0 });
    }
    let plan = plan_steps(duration, config)?;
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |m: &DMatrix<Complex64>, psi: &DVector<Complex64>| (m * psi) * minus_i;

    let mut psi = state.amplitudes().clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let record = |t: f64, v: &DVector<Complex64>, times: &mut Vec<f64>, states: &mut Vec<QuantumState>| {
        times.push(t);
        states.push(QuantumState::from_parts_unchecked(state.layout().clone(), v.clone()));
    };
    if plan.stride != usize::MAX {
        record(0.0, &psi, &mut times, &mut states);
    }
    let mut drift = 0.0;
    for step in 0..plan.steps {
        let t = step as f64 * plan.dt;
        let h1 = hamiltonian.matrix_at(t)?;
        let h2 = hamiltonian.matrix_at(t + 0.5 * plan.dt)?;
        let h3 = hamiltonian.matrix_at(t + plan.dt)?;
        let k1 = rhs(h1.as_ref(), &psi);
        let k2 = rhs(h2.as_ref(), &(&psi + k1.scale(0.5 * plan.dt)));
        let k3 = rhs(h2.as_ref(), &(&psi + k2.scale(0.5 * plan.dt)));
        let k4 = rhs(h3.as_ref(), &(&psi + k3.scale(plan.dt)));
        psi += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(plan.dt / 6.0);

        let norm_sq = psi.norm_squared();
        let defect = (norm_sq - 1.0).abs();
        if defect > STEP_DEFECT_TOL {
            return Err(Error::IntegrationQuality(format!(
                "norm defect {defect:.3e} in one step of {} us: step size too coarse",
                plan.dt
            )));
        }
        drift += defect;
        psi.unscale_mut(norm_sq.sqrt());

        let done = step + 1 == plan.steps;
        if done || (plan.stride != usize::MAX && (step + 1) % plan.stride == 0) {
            record((step + 1) as f64 * plan.dt, &psi, &mut times, &mut states);
        }
    }
    Ok(Trajectory { times, states, drift })
}

struct AngularCollapse {
    op: DMatrix<Complex64>,
    adj: DMatrix<Complex64>,
}

/// Integrate the Lindblad master equation
/// `drho/dt = -i[H, rho] + sum_j L_j rho L_j^dag - (1/2){L_j^dag L_j, rho}`
/// with `L_j = sqrt(2 pi rate_j) op_j`.
///
/// The state is hermitized after every step. Trace drift beyond
/// [`TRACE_DRIFT_TOL`] or an eigenvalue below [`POSITIVITY_FLOOR`] at a
/// recorded snapshot fails the run.
pub fn evolve_lindblad(
    rho0: &DensityMatrix,
    hamiltonian: &Hamiltonian,
    collapse: &CollapseSet,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory<DensityMatrix>> {
    if rho0.layout() != hamiltonian.layout() {
        return Err(Error::LayoutMismatch(format!(
            "density layout {:?} vs generator layout {:?}",
            rho0.layout().dims(),
            hamiltonian.layout().dims()
        )));
    }
    let dim = rho0.layout().total_dim();
    let mut jumps = Vec::with_capacity(collapse.terms().len());
    let mut damping = DMatrix::<Complex64>::zeros(dim, dim);
    for term in collapse.terms() {
        if term.operator.layout() != rho0.layout() {
            return Err(Error::LayoutMismatch(format!(
                "collapse operator '{}' layout {:?} vs state layout {:?}",
                term.label,
                term.operator.layout().dims(),
                rho0.layout().dims()
            )));
        }
        if !(term.rate >= 0.0) {
            return Err(Error::Unphysical(format!(
                "collapse rate for '{}' must be >= 0, got {}",
                term.label, term.rate
            )));
        }
        let op = term.operator.matrix() * Complex64::from((TWO_PI * term.rate).sqrt());
        let adj = op.adjoint();
        damping += &adj * &op;
        jumps.push(AngularCollapse { op, adj });
    }

    if duration == 0.0 {
        return Ok(Trajectory { times: vec![0.0], states: vec![rho0.clone()], drift: 0.0 });
    }
    let plan = plan_steps(duration, config)?;
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |m: &DMatrix<Complex64>, rho: &DMatrix<Complex64>| {
        let mut out = (m * rho - rho * m) * minus_i;
        for j in &jumps {
            out += &j.op * rho * &j.adj;
        }
        out -= (&damping * rho + rho * &damping).scale(0.5);
        out
    };

    let mut rho = rho0.elements().clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut drift = 0.0f64;
    let record = |t: f64,
                      m: &DMatrix<Complex64>,
                      times: &mut Vec<f64>,
                      states: &mut Vec<DensityMatrix>|
     -> Result<()> {
        let snapshot = DensityMatrix::from_parts_unchecked(rho0.layout().clone(), m.clone());
        let min_eig = snapshot.min_eigenvalue();
        if min_eig < POSITIVITY_FLOOR {
            return Err(Error::IntegrationQuality(format!(
                "density eigenvalue {min_eig:.3e} at t = {t} us breaches the positivity floor"
            )));
        }
        times.push(t);
        states.push(snapshot);
        Ok(())
    };
    if plan.stride != usize::MAX {
        record(0.0, &rho, &mut times, &mut states)?;
    }
    for step in 0..plan.steps {
        let t = step as f64 * plan.dt;
        let h1 = hamiltonian.matrix_at(t)?;
        let h2 = hamiltonian.matrix_at(t + 0.5 * plan.dt)?;
        let h3 = hamiltonian.matrix_at(t + plan.dt)?;
        let k1 = rhs(h1.as_ref(), &rho);
        let k2 = rhs(h2.as_ref(), &(&rho + k1.scale(0.5 * plan.dt)));
        let k3 = rhs(h2.as_ref(), &(&rho + k2.scale(0.5 * plan.dt)));
        let k4 = rhs(h3.as_ref(), &(&rho + k3.scale(plan.dt)));
        rho += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(plan.dt / 6.0);
        rho = (&rho + rho.adjoint()).scale(0.5);

        let trace: Complex64 = rho.diagonal().sum();
        let defect = (trace.re - 1.0).abs();
        if defect > TRACE_DRIFT_TOL {
            return Err(Error::IntegrationQuality(format!(
                "trace drift {defect:.3e} at t = {} us exceeds {TRACE_DRIFT_TOL:.0e}",
                (step + 1) as f64 * plan.dt
            )));
        }
        drift = drift.max(defect);

        let done = step + 1 == plan.steps;
        if done || (plan.stride != usize::MAX && (step + 1) % plan.stride == 0) {
            record((step + 1) as f64 * plan.dt, &rho, &mut times, &mut states)?;
        }
    }
    Ok(Trajectory { times, states, drift })
}

/// How a pulse is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseMode {
    /// Closed-form unitary of the target rotation.
    Ideal,
    /// Full time integration of the underlying generator.
    Integrated,
}

/// Result of an exchange pulse: the transformed state and how long the
/// qubit spent on resonance.
#[derive(Debug, Clone)]
pub struct ExchangePulse {
    pub state: QuantumState,
    pub duration: f64,
}

/// Total probability on |up, n_max>, the state the truncated exchange
/// cannot rotate.
fn edge_support(
    state: &QuantumState,
    resonator_site: usize,
    qubit_site: usize,
    dim_r: usize,
) -> f64 {
    let layout = state.layout();
    let mut support = 0.0;
    for flat in 0..layout.total_dim() {
        let multi = layout.multi_index(flat);
        if multi[resonator_site] == dim_r - 1 && multi[qubit_site] == 1 {
            support += state.amplitudes()[flat].norm_sqr();
        }
    }
    support
}

/// Resonant vacuum-Rabi exchange between one qubit and the resonator.
///
/// The qubit is tuned onto the resonator frequency for
/// `t = angle / (4 pi g)`, realizing the interaction-picture unitary
/// `exp(-i (angle/2) (a^dag s- + a s+))`: each pair
/// {|up, n>, |down, n+1>} rotates by `theta_n = (angle/2) sqrt(n+1)`,
/// so `angle = pi` swaps a single excitation as |up, 0> -> -i |down, 1>.
///
/// [`PulseMode::Integrated`] integrates the lab-frame Jaynes-Cummings
/// Hamiltonian and then strips the deterministic free-evolution phases
/// `exp(-i 2 pi omega_r t n_exc)`, returning interaction-picture
/// amplitudes directly comparable to the ideal mode. States are tracked
/// in each qubit's own rotating frame throughout, so the spectator qubit
/// accumulates no phase.
pub fn jc_pulse(
    state: &QuantumState,
    qubit: usize,
    angle: f64,
    params: &DeviceParams,
    mode: PulseMode,
) -> Result<ExchangePulse> {
    if !(angle > 0.0) || !angle.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exchange angle must be positive, got {angle}"
        )));
    }
    params.check_coupled(qubit)?;
    let layout = state.layout().clone();
    let (resonator_site, qubit_site) = layout.exchange_sites(qubit)?;
    let dim_r = layout.dims()[resonator_site];
    let g = params.g[qubit];
    let duration = angle / (2.0 * TWO_PI * g);

    let support = edge_support(state, resonator_site, qubit_site, dim_r);
    if support > EDGE_SUPPORT_TOL {
        return Err(Error::StateSupport(format!(
            "probability {support:.3e} on |up, n_max = {}>: raise n_max, the exchange would \
             leave the kept Fock space",
            dim_r - 1
        )));
    }

    match mode {
        PulseMode::Ideal => {
            let old = state.amplitudes().clone();
            let mut new = old.clone();
            for flat in 0..layout.total_dim() {
                let multi = layout.multi_index(flat);
                // Visit each pair once, from its |up, n> member.
                if multi[qubit_site] != 1 || multi[resonator_site] >= dim_r - 1 {
                    continue;
                }
                let n = multi[resonator_site];
                let mut partner_multi = multi.clone();
                partner_multi[qubit_site] = 0;
                partner_multi[resonator_site] = n + 1;
                let partner = layout.basis_index(&partner_multi)?;
                let theta = 0.5 * angle * ((n + 1) as f64).sqrt();
                let (sin, cos) = theta.sin_cos();
                let mix = Complex64::new(0.0, -sin);
                new[flat] = cos * old[flat] + mix * old[partner];
                new[partner] = mix * old[flat] + cos * old[partner];
            }
            Ok(ExchangePulse {
                state: QuantumState::from_parts_unchecked(layout, new),
                duration,
            })
        }
        PulseMode::Integrated => {
            let h = jaynes_cummings_at(
                &layout,
                resonator_site,
                qubit_site,
                params.omega_r,
                params.omega_r,
                g,
            )?;
            // Fastest lab-frame eigenfrequency: the top excitation manifold.
            let config =
                IntegratorConfig::for_frequency_scale(params.omega_r * (dim_r as f64 + 0.5))?;
            let traj = evolve_unitary(state, &Hamiltonian::Constant(&h), duration, &config)?;
            let mut psi = traj.final_state().amplitudes().clone();
            for flat in 0..layout.total_dim() {
                let multi = layout.multi_index(flat);
                let n_exc = multi[resonator_site] + multi[qubit_site];
                let phase =
                    Complex64::from_polar(1.0, TWO_PI * params.omega_r * duration * n_exc as f64);
                psi[flat] *= phase;
            }
            Ok(ExchangePulse {
                state: QuantumState::from_parts_unchecked(layout, psi),
                duration,
            })
        }
    }
}

/// Sinusoid parameters recovered from a record, as
/// `y(t) = amplitude * cos(2 pi frequency * t - phase) + offset`
/// with `frequency` linear (cycles per microsecond = MHz).
#[derive(Debug, Clone, Copy)]
pub struct OscillationFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

/// Least-squares residual of the best (amplitude, phase, offset) at a
/// fixed frequency, plus those coefficients as (cos, sin, constant).
fn projected_residual(times: &[f64], values: &[f64], freq: f64) -> (f64, [f64; 3]) {
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&t, &y) in times.iter().zip(values) {
        let (s, c) = (TWO_PI * freq * t).sin_cos();
        let basis = [c, s, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                normal[(i, j)] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * y;
        }
    }
    let Some(coeff) = normal.lu().solve(&rhs) else {
        return (f64::INFINITY, [0.0; 3]);
    };
    let mut ssr = 0.0;
    for (&t, &y) in times.iter().zip(values) {
        let (s, c) = (TWO_PI * freq * t).sin_cos();
        let r = y - coeff[0] * c - coeff[1] * s - coeff[2];
        ssr += r * r;
    }
    (ssr, [coeff[0], coeff[1], coeff[2]])
}

/// Fit a single sinusoid to a record by variable projection: scan a
/// frequency grid, solve the linear subproblem at each node, then refine
/// the best node by golden-section search.
///
/// Fails with [`Error::Fit`] when the record is too short, flat, or
/// carries no resolvable oscillation.
pub fn fit_oscillation(times: &[f64], values: &[f64]) -> Result<OscillationFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "times ({}) and values ({}) differ in length",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 8 {
        return Err(Error::Fit(format!("{} samples are too few to fit", times.len())));
    }
    if values.iter().any(|v| !v.is_finite()) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Fit("record contains non-finite samples".into()));
    }
    let mut min_gap = f64::INFINITY;
    for pair in times.windows(2) {
        let gap = pair[1] - pair[0];
        if gap <= 0.0 {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        min_gap = min_gap.min(gap);
    }
    let span = times[times.len() - 1] - times[0];
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let swing = hi - lo;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if swing < 1e-13 * (1.0 + mean.abs()) {
        return Err(Error::Fit("record is constant; no oscillation to fit".into()));
    }

    let f_lo = 0.5 / span;
    let f_hi = 0.45 / min_gap;
    if f_lo >= f_hi {
        return Err(Error::Fit("record too short to bracket any frequency".into()));
    }
    // Grid fine enough that the residual valley (width ~ 1/span) cannot
    // fall between nodes.
    let nodes = (((f_hi - f_lo) * span * 4.0).ceil() as usize).clamp(64, 16384);
    let mut best = (f64::INFINITY, f_lo);
    for k in 0..=nodes {
        let f = f_lo + (f_hi - f_lo) * k as f64 / nodes as f64;
        let (ssr, _) = projected_residual(times, values, f);
        if ssr < best.0 {
            best = (ssr, f);
        }
    }
    let df = (f_hi - f_lo) / nodes as f64;
    let (mut a, mut b) = ((best.1 - df).max(f_lo), (best.1 + df).min(f_hi));
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = projected_residual(times, values, x1).0;
    let mut f2 = projected_residual(times, values, x2).0;
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = projected_residual(times, values, x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = projected_residual(times, values, x2).0;
        }
    }
    let frequency = 0.5 * (a + b);
    let (ssr, coeff) = projected_residual(times, values, frequency);
    let amplitude = coeff[0].hypot(coeff[1]);
    if amplitude < 1e-8 * swing {
        return Err(Error::Fit("no resolvable oscillation in the record".into()));
    }
    Ok(OscillationFit {
        frequency,
        amplitude,
        phase: coeff[1].atan2(coeff[0]),
        offset: coeff[2],
        rms_residual: (ssr / times.len() as f64).sqrt(),
    })
}
