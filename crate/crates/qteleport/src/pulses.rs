//! Single-qubit gates as calibrated pulses.
//!
//! Rotations about in-plane axes are microwave pulses: a drive at the
//! chi-shifted qubit frequency, felt by the qubit as a Rabi term of
//! strength `2 eps g / Delta_r`. Rotations about z are bias pulses: the
//! qubit frequency is shifted by a fixed amount and the detuning phase is
//! left to accumulate. [`compile_rotation`] turns a requested rotation
//! into a [`PulseSpec`] (duration, amplitude, carrier);
//! [`apply_pulse`] realizes a spec either as the closed-form rotation or
//! by integrating the rotating-frame generator, exchange coupling
//! included, so the compiled pulse inherits the physical infidelity of
//! driving through the resonator.
//!
//! States are tracked in each subsystem's own rotating frame: the
//! resonator at its bare frequency and each qubit at the frequency of
//! its current frame, with frame changes at pulse edges absorbed into
//! calibrated pulse phases. Integrated microwave pulses therefore strip
//! the deterministic `Delta_r a^dag a` phases after integrating.

use num_complex::Complex64;

use crate::dynamics::{evolve_unitary, Hamiltonian, IntegratorConfig};
use crate::error::{Error, Result};
use crate::hamiltonians::{rotating_frame_at, DeviceParams, TWO_PI};
use crate::hilbert::{embed, HilbertLayout, OperatorMatrix, QuantumState};
use crate::operators;
use nalgebra::DMatrix;

/// Tolerance on the compiled invariant `2 pi amplitude duration = angle`.
pub const PULSE_CONSISTENCY_TOL: f64 = 1e-9;

/// Rotation axis on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationAxis {
    /// Equatorial axis at `phase` radians from x (0 = x, pi/2 = y).
    InPlane { phase: f64 },
    Z,
}

impl RotationAxis {
    pub fn x() -> Self {
        RotationAxis::InPlane { phase: 0.0 }
    }

    pub fn y() -> Self {
        RotationAxis::InPlane { phase: std::f64::consts::FRAC_PI_2 }
    }

    pub fn z() -> Self {
        RotationAxis::Z
    }
}

/// Physical realization of a pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseKind {
    /// Drive through the resonator at `carrier` (linear MHz); rotates
    /// about the in-plane axis at `axis_phase`.
    Microwave { axis_phase: f64, carrier: f64 },
    /// Qubit frequency bias; rotates about z.
    Bias,
}

/// A compiled pulse: what to apply, for how long, and how strongly.
/// `amplitude` is the Rabi frequency (microwave) or the bias shift
/// (bias), linear MHz, always positive; the rotation angle is
/// `2 pi amplitude duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub angle: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl PulseSpec {
    fn check(&self) -> Result<()> {
        if !(self.angle > 0.0 && self.duration > 0.0 && self.amplitude > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse fields must be positive: angle {}, duration {}, amplitude {}",
                self.angle, self.duration, self.amplitude
            )));
        }
        let residual = (TWO_PI * self.amplitude * self.duration - self.angle).abs();
        if residual > PULSE_CONSISTENCY_TOL {
            return Err(Error::InvalidArgument(format!(
                "pulse is inconsistent: 2 pi x {} MHz x {} us differs from angle {} by {residual:.3e}",
                self.amplitude, self.duration, self.angle
            )));
        }
        Ok(())
    }
}

/// Closed-form single-qubit rotation `exp(-i angle (n . sigma) / 2)`.
pub fn ideal_rotation(axis: RotationAxis, angle: f64) -> DMatrix<Complex64> {
    let generator = match axis {
        RotationAxis::InPlane { phase } => {
            operators::sigma_x().scale(phase.cos()) + operators::sigma_y().scale(phase.sin())
        }
        RotationAxis::Z => operators::sigma_z(),
    };
    let (sin, cos) = (0.5 * angle).sin_cos();
    operators::identity(2).scale(cos) + generator * Complex64::new(0.0, -sin)
}

/// Compile a rotation into a pulse for one qubit of the device.
///
/// Microwave pulses are compiled onto the chi-shifted qubit frequency
/// `omega_a + g^2/Delta` with Rabi amplitude `|2 eps g / Delta_r|`; a
/// negative Rabi frequency is absorbed into the (unmodeled) drive phase
/// offset, so the stored axis is always the effective one. Bias pulses
/// use the configured frequency shift. Angles are limited to (0, 2 pi].
pub fn compile_rotation(
    axis: RotationAxis,
    angle: f64,
    params: &DeviceParams,
    qubit: usize,
) -> Result<PulseSpec> {
    if !(angle > 0.0 && angle <= TWO_PI) {
        return Err(Error::InvalidArgument(format!(
            "rotation angle must lie in (0, 2 pi], got {angle}"
        )));
    }
    if qubit > 1 {
        return Err(Error::InvalidArgument(format!("qubit index {qubit} out of range")));
    }
    match axis {
        RotationAxis::InPlane { phase } => {
            params.check_coupled(qubit)?;
            let delta = params.omega_a[qubit] - params.omega_r;
            if delta == 0.0 {
                return Err(Error::Singularity(
                    "qubit resonant with the resonator: no dispersive carrier to compile onto"
                        .into(),
                ));
            }
            let chi = params.g[qubit] * params.g[qubit] / delta;
            let carrier = params.omega_a[qubit] + chi;
            let delta_r = params.omega_r - carrier;
            if delta_r == 0.0 {
                return Err(Error::Singularity(
                    "carrier resonant with the resonator: no Rabi drive there".into(),
                ));
            }
            let rabi = 2.0 * params.epsilon * params.g[qubit] / delta_r;
            if rabi == 0.0 {
                return Err(Error::Configuration(
                    "zero drive amplitude cannot rotate the qubit".into(),
                ));
            }
            let amplitude = rabi.abs();
            Ok(PulseSpec {
                kind: PulseKind::Microwave { axis_phase: phase, carrier },
                angle,
                duration: angle / (TWO_PI * amplitude),
                amplitude,
            })
        }
        RotationAxis::Z => {
            let amplitude = params.z_bias_shift;
            if !(amplitude > 0.0) {
                return Err(Error::Configuration(format!(
                    "bias shift must be positive, got {amplitude}"
                )));
            }
            Ok(PulseSpec {
                kind: PulseKind::Bias,
                angle,
                duration: angle / (TWO_PI * amplitude),
                amplitude,
            })
        }
    }
}

/// Rotating-frame generator realizing a compiled pulse on a qubit, in
/// angular units on the given layout. Microwave pulses include the
/// resonator detuning and exchange coupling; bias pulses are a pure
/// sigma_z shift.
pub fn pulse_generator(
    params: &DeviceParams,
    qubit: usize,
    spec: &PulseSpec,
    layout: &HilbertLayout,
) -> Result<OperatorMatrix> {
    spec.check()?;
    match spec.kind {
        PulseKind::Microwave { axis_phase, carrier } => {
            params.check_coupled(qubit)?;
            let (resonator_site, qubit_site) = layout.exchange_sites(qubit)?;
            rotating_frame_at(
                layout,
                resonator_site,
                qubit_site,
                params.omega_r - carrier,
                params.omega_a[qubit] - carrier,
                params.g[qubit],
                spec.amplitude,
                axis_phase,
            )
        }
        PulseKind::Bias => {
            let site = layout.qubit_slot(qubit)?;
            let m = embed(layout, site, &operators::sigma_z())
                .map(|m| m.scale(TWO_PI * spec.amplitude / 2.0))?;
            OperatorMatrix::hermitian(layout.clone(), m)
        }
    }
}

/// Diagonal phases returning a microwave pulse's result from the carrier
/// frame to the resonator's own frame: `exp(+i 2 pi Delta_r t n)` per
/// Fock level. Identity for bias pulses.
pub fn frame_restoration(
    params: &DeviceParams,
    qubit: usize,
    spec: &PulseSpec,
    layout: &HilbertLayout,
) -> Result<Vec<Complex64>> {
    let dim = layout.total_dim();
    match spec.kind {
        PulseKind::Microwave { carrier, .. } => {
            let (resonator_site, _) = layout.exchange_sites(qubit)?;
            let delta_r = params.omega_r - carrier;
            Ok((0..dim)
                .map(|flat| {
                    let n = layout.multi_index(flat)[resonator_site] as f64;
                    Complex64::from_polar(1.0, TWO_PI * delta_r * spec.duration * n)
                })
                .collect())
        }
        PulseKind::Bias => Ok(vec![Complex64::new(1.0, 0.0); dim]),
    }
}

/// Step size for integrating a pulse generator: resolves the fastest
/// eigenfrequency of detunings, exchange, and drive.
pub fn pulse_integration_config(
    params: &DeviceParams,
    qubit: usize,
    spec: &PulseSpec,
    layout: &HilbertLayout,
) -> Result<IntegratorConfig> {
    let scale = match spec.kind {
        PulseKind::Microwave { carrier, .. } => {
            let dim_r = layout.dims()[layout.exchange_sites(qubit)?.0] as f64;
            ((params.omega_r - carrier).abs() + params.g[qubit]) * dim_r
                + (params.omega_a[qubit] - carrier).abs()
                + spec.amplitude
        }
        PulseKind::Bias => spec.amplitude,
    };
    IntegratorConfig::for_frequency_scale(scale)
}

/// Apply a compiled pulse to one qubit of a state.
///
/// [`PulseMode::Ideal`](crate::dynamics::PulseMode::Ideal) applies the
/// closed-form rotation; integrated mode evolves under
/// [`pulse_generator`] and then applies [`frame_restoration`], so the
/// result is directly comparable to the ideal one.
pub fn apply_pulse(
    state: &QuantumState,
    qubit: usize,
    spec: &PulseSpec,
    mode: crate::dynamics::PulseMode,
    params: &DeviceParams,
) -> Result<QuantumState> {
    spec.check()?;
    let layout = state.layout().clone();
    match mode {
        crate::dynamics::PulseMode::Ideal => {
            let axis = match spec.kind {
                PulseKind::Microwave { axis_phase, .. } => {
                    RotationAxis::InPlane { phase: axis_phase }
                }
                PulseKind::Bias => RotationAxis::Z,
            };
            let site = layout.qubit_slot(qubit)?;
            let u = embed(&layout, site, &ideal_rotation(axis, spec.angle))?;
            let rotated = &u * state.amplitudes();
            Ok(QuantumState::from_parts_unchecked(layout, rotated))
        }
        crate::dynamics::PulseMode::Integrated => {
            let generator = pulse_generator(params, qubit, spec, &layout)?;
            let config = pulse_integration_config(params, qubit, spec, &layout)?;
            let traj = evolve_unitary(
                state,
                &Hamiltonian::Constant(&generator),
                spec.duration,
                &config,
            )?;
            let phases = frame_restoration(params, qubit, spec, &layout)?;
            let mut psi = traj.final_state().amplitudes().clone();
            for (amp, phase) in psi.iter_mut().zip(&phases) {
                *amp *= phase;
            }
            Ok(QuantumState::from_parts_unchecked(layout, psi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PulseMode;
    use crate::measure::{fidelity, StateRef};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Device with a 50 MHz Rabi drive and a 5 MHz dispersive shift:
    /// g = 100 MHz on a 2 GHz detuning.
    fn drive_test_params(chi: f64) -> DeviceParams {
        let g = 100.0;
        let omega_r = 5000.0;
        let delta = g * g / chi;
        let omega_a = omega_r + delta;
        let carrier = omega_a + chi;
        let delta_r = omega_r - carrier;
        // |2 eps g / Delta_r| = 50 MHz.
        let epsilon = 50.0 * delta_r / (2.0 * g);
        DeviceParams {
            omega_a: [omega_a, omega_a],
            g: [g, g],
            epsilon,
            n_max: 2,
            ..DeviceParams::default()
        }
    }

    #[test]
    fn pi_pulse_at_50_mhz_lasts_10_ns() {
        let params = drive_test_params(5.0);
        let spec = compile_rotation(RotationAxis::x(), PI, &params, 0).unwrap();
        assert_relative_eq!(spec.amplitude, 50.0, max_relative = 1e-9);
        assert_relative_eq!(spec.duration, 0.01, max_relative = 1e-9);
        match spec.kind {
            PulseKind::Microwave { axis_phase, carrier } => {
                assert_relative_eq!(axis_phase, 0.0);
                assert_relative_eq!(carrier, params.omega_a[0] + 5.0, max_relative = 1e-12);
            }
            PulseKind::Bias => panic!("expected a microwave pulse"),
        }
    }

    #[test]
    fn compiled_angle_equals_2pi_amplitude_duration() {
        let params = DeviceParams::default();
        for angle in [0.3, PI / 2.0, PI, 1.9 * PI] {
            for (axis, qubit) in
                [(RotationAxis::x(), 0), (RotationAxis::y(), 1), (RotationAxis::z(), 0)]
            {
                let spec = compile_rotation(axis, angle, &params, qubit).unwrap();
                assert_relative_eq!(
                    TWO_PI * spec.amplitude * spec.duration,
                    angle,
                    max_relative = 1e-12
                );
            }
        }
        assert!(compile_rotation(RotationAxis::x(), 0.0, &params, 0).is_err());
        assert!(compile_rotation(RotationAxis::x(), 2.1 * TWO_PI, &params, 0).is_err());
    }

    #[test]
    fn bias_pulse_duration_follows_the_shift() {
        // 25 MHz shift: a pi rotation takes 20 ns.
        let spec =
            compile_rotation(RotationAxis::z(), PI, &DeviceParams::default(), 1).unwrap();
        assert_relative_eq!(spec.duration, 0.02, max_relative = 1e-12);
        assert_eq!(spec.kind, PulseKind::Bias);
    }

    #[test]
    fn ideal_rotations_act_as_expected() {
        let layout = HilbertLayout::qubit();
        let down = QuantumState::basis_state(layout.clone(), &[0]).unwrap();
        // A pi rotation about x takes |down> to -i |up>.
        let x_pi = ideal_rotation(RotationAxis::x(), PI);
        let up = &x_pi * down.amplitudes();
        assert!((up[1] - c(0.0, -1.0)).norm() < 1e-12);
        // A pi/2 rotation about z is diagonal with phases exp(-+ i pi/4)
        // on |up>, |down>.
        let z_half = ideal_rotation(RotationAxis::z(), PI / 2.0);
        assert!((z_half[(0, 0)] - Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);
        assert!((z_half[(1, 1)] - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-12);
        // Unitarity.
        let probe = ideal_rotation(RotationAxis::InPlane { phase: 0.83 }, 1.1);
        assert!(((&probe * probe.adjoint()) - operators::identity(2)).norm() < 1e-12);
    }

    #[test]
    fn integrated_pi_pulse_reaches_the_dispersive_fidelity() {
        // Rabi/chi = 10 at g/Delta = 0.05: dressed-state leakage of
        // (g/Delta)^2 = 2.5e-3 bounds the fidelity near 0.9975.
        let params = drive_test_params(5.0);
        let layout = HilbertLayout::channel(params.n_max).unwrap();
        let start = QuantumState::basis_state(layout.clone(), &[0, 0]).unwrap();
        let spec = compile_rotation(RotationAxis::x(), PI, &params, 1).unwrap();
        let pulsed = apply_pulse(&start, 1, &spec, PulseMode::Integrated, &params).unwrap();
        let target = apply_pulse(&start, 1, &spec, PulseMode::Ideal, &params).unwrap();
        let f = fidelity(StateRef::Pure(&target), StateRef::Pure(&pulsed)).unwrap();
        assert!(f > 0.99, "pi pulse fidelity {f}");
        assert!(f < 1.0 - 1e-6, "exchange coupling should cost something, got {f}");
    }

    #[test]
    fn pulse_fidelity_grows_with_the_rabi_to_chi_ratio() {
        let mut last = 0.0;
        for chi in [25.0, 10.0, 5.0, 2.5] {
            let params = drive_test_params(chi);
            let layout = HilbertLayout::channel(params.n_max).unwrap();
            let start = QuantumState::basis_state(layout.clone(), &[0, 0]).unwrap();
            let spec = compile_rotation(RotationAxis::x(), PI, &params, 1).unwrap();
            let pulsed = apply_pulse(&start, 1, &spec, PulseMode::Integrated, &params).unwrap();
            let target = apply_pulse(&start, 1, &spec, PulseMode::Ideal, &params).unwrap();
            let f = fidelity(StateRef::Pure(&target), StateRef::Pure(&pulsed)).unwrap();
            assert!(
                f > last,
                "fidelity should rise with Rabi/chi: {f} after {last} at chi = {chi}"
            );
            last = f;
        }
    }

    #[test]
    fn integrated_bias_pulse_matches_the_closed_form() {
        let params = DeviceParams::default();
        let layout = HilbertLayout::qubit();
        let start = QuantumState::new(
            layout.clone(),
            DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]),
        )
        .unwrap();
        let spec = compile_rotation(RotationAxis::z(), PI, &params, 1).unwrap();
        let ideal = apply_pulse(&start, 1, &spec, PulseMode::Ideal, &params).unwrap();
        let integrated = apply_pulse(&start, 1, &spec, PulseMode::Integrated, &params).unwrap();
        let overlap = ideal.inner(&integrated).unwrap();
        assert!((overlap - c(1.0, 0.0)).norm() < 1e-8, "overlap {overlap}");
    }

    #[test]
    fn uncoupled_qubit_cannot_be_driven_through_the_resonator() {
        let params =
            DeviceParams { qubit_coupled: [true, false], ..DeviceParams::default() };
        assert!(compile_rotation(RotationAxis::x(), PI, &params, 1).is_err());
        // Bias pulses need no resonator.
        assert!(compile_rotation(RotationAxis::z(), PI, &params, 1).is_ok());
    }

    #[test]
    fn inconsistent_pulse_specs_are_rejected() {
        let params = DeviceParams::default();
        let layout = HilbertLayout::qubit();
        let start = QuantumState::basis_state(layout, &[0]).unwrap();
        let mut spec = compile_rotation(RotationAxis::z(), PI, &params, 1).unwrap();
        spec.duration *= 1.5;
        let err = apply_pulse(&start, 1, &spec, PulseMode::Ideal, &params);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
