//! Device model: charge-qubit and circuit-QED Hamiltonians, loss channels.
//!
//! Public frequency-like quantities are *linear* frequencies in MHz (the
//! experimenter's omega/2pi numbers) and times are in microseconds. The
//! conversion to angular units happens once, inside the constructors here,
//! so matrix elements are in rad/us.
//!
//! Frames, for a qubit at omega_a coupled to a resonator at omega_r with
//! strength g and driven at omega_d:
//!
//! ```text
//! lab:        H = w_r (a^dag a + 1/2) + (w_a/2) sz + g (a^dag s- + a s+)
//! displaced:  H = D_r a^dag a + (D_a/2) sz - g (a^dag s- + a s+) + (W_R/2) sx
//! dispersive: H = D_r a^dag a + (D~_a/2) sz + (W_R/2) sx
//! ```
//!
//! with D_r = w_r - w_d, D_a = w_a - w_d, W_R = 2 e g / D_r, chi = g^2/D
//! (D = w_a - w_r), and D~_a measured from the chi-shifted qubit frequency.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{embed, embed_product, HilbertLayout, OperatorMatrix};
use crate::operators;

/// Linear-to-angular conversion applied inside constructors.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Coupling ratio g/|Delta| above which the dispersive picture is flagged.
pub const DISPERSIVE_VALIDITY_RATIO: f64 = 0.1;

/// Static description of the two-qubit/one-resonator device.
///
/// Per-qubit arrays are ordered (qubit 1, qubit 2) = index (0, 1). The
/// default profile is the high-Q coplanar design this simulator targets:
/// a 5 GHz resonator with Q = 1e6 (kappa/2pi = 5 kHz), qubits at 6 and
/// 7 GHz, g/2pi = 17 MHz, and rates derived from T1 = 7.3 us, T2 = 500 ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Resonator frequency, linear MHz.
    pub omega_r: f64,
    /// Qubit transition frequencies, linear MHz.
    pub omega_a: [f64; 2],
    /// Qubit-resonator couplings, linear MHz.
    pub g: [f64; 2],
    /// Resonator energy decay rate, linear MHz.
    pub kappa: f64,
    /// Qubit relaxation rates, linear MHz.
    pub gamma1: [f64; 2],
    /// Qubit pure-dephasing rates, linear MHz.
    pub gamma_phi: [f64; 2],
    /// Drive amplitude, linear MHz.
    pub epsilon: f64,
    /// Drive carrier frequency, linear MHz.
    pub omega_d: f64,
    /// Fock truncation: the resonator keeps levels 0..=n_max.
    pub n_max: usize,
    /// Which qubits are coupled to the resonator in this scenario.
    pub qubit_coupled: [bool; 2],
    /// Bias shift used by z pulses, linear MHz.
    pub z_bias_shift: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        let loss = kappa_from_quality(5000.0, 1e6).expect("default quality factor");
        let rates = rates_from_coherence_times(7.3, 0.5).expect("default coherence times");
        Self {
            omega_r: 5000.0,
            omega_a: [6000.0, 7000.0],
            g: [17.0, 17.0],
            kappa: loss.kappa,
            gamma1: [rates.gamma1; 2],
            gamma_phi: [rates.gamma_phi; 2],
            epsilon: 1471.0,
            omega_d: 6000.0,
            n_max: 3,
            qubit_coupled: [true, true],
            z_bias_shift: 25.0,
        }
    }
}

impl DeviceParams {
    /// Composite layout of protocol states: (qubit 1, resonator, qubit 2).
    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::protocol(self.n_max)
    }

    /// Subsystem index of a qubit in the protocol layout.
    pub fn qubit_site(&self, qubit: usize) -> Result<usize> {
        match qubit {
            0 => Ok(0),
            1 => Ok(2),
            _ => Err(Error::InvalidArgument(format!("qubit index {qubit} out of range"))),
        }
    }

    /// Subsystem index of the resonator in the protocol layout.
    pub fn resonator_site(&self) -> usize {
        1
    }

    pub fn check_coupled(&self, qubit: usize) -> Result<()> {
        if !self.qubit_coupled[qubit] {
            return Err(Error::Configuration(format!(
                "qubit {} is not coupled to the resonator in this scenario",
                qubit + 1
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("omega_r", self.omega_r),
            ("omega_a[0]", self.omega_a[0]),
            ("omega_a[1]", self.omega_a[1]),
            ("g[0]", self.g[0]),
            ("g[1]", self.g[1]),
            ("kappa", self.kappa),
            ("gamma1[0]", self.gamma1[0]),
            ("gamma1[1]", self.gamma1[1]),
            ("gamma_phi[0]", self.gamma_phi[0]),
            ("gamma_phi[1]", self.gamma_phi[1]),
            ("epsilon", self.epsilon),
            ("omega_d", self.omega_d),
            ("z_bias_shift", self.z_bias_shift),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::Unphysical(format!("{name} is not finite")));
            }
        }
        for (name, v) in [
            ("omega_r", self.omega_r),
            ("omega_a[0]", self.omega_a[0]),
            ("omega_a[1]", self.omega_a[1]),
            ("g[0]", self.g[0]),
            ("g[1]", self.g[1]),
            ("z_bias_shift", self.z_bias_shift),
        ] {
            if v <= 0.0 {
                return Err(Error::Unphysical(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma1[0]", self.gamma1[0]),
            ("gamma1[1]", self.gamma1[1]),
            ("gamma_phi[0]", self.gamma_phi[0]),
            ("gamma_phi[1]", self.gamma_phi[1]),
            ("omega_d", self.omega_d),
        ] {
            if v < 0.0 {
                return Err(Error::Unphysical(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.n_max < 1 {
            return Err(Error::Unphysical("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Qubit decoherence rates derived from coherence times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceRates {
    /// Relaxation rate 1/(2pi T1), linear MHz.
    pub gamma1: f64,
    /// Total dephasing rate 1/(2pi T2), linear MHz.
    pub gamma2: f64,
    /// Pure dephasing gamma2 - gamma1/2, linear MHz.
    pub gamma_phi: f64,
}

/// Convert (T1, T2) in microseconds to linear-MHz rates.
///
/// T2 may not exceed 2 T1 (that would need negative pure dephasing).
pub fn rates_from_coherence_times(t1: f64, t2: f64) -> Result<CoherenceRates> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::Unphysical(format!("coherence times must be positive: T1={t1}, T2={t2}")));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::Unphysical(format!(
            "T2={t2} exceeds 2*T1={} (negative pure dephasing)",
            2.0 * t1
        )));
    }
    let gamma1 = 1.0 / (TWO_PI * t1);
    let gamma2 = 1.0 / (TWO_PI * t2);
    Ok(CoherenceRates { gamma1, gamma2, gamma_phi: gamma2 - gamma1 / 2.0 })
}

/// Resonator loss derived from the quality factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorLoss {
    /// Energy decay rate omega_r / Q, linear MHz.
    pub kappa: f64,
    /// Photon lifetime 1/(2pi kappa), microseconds.
    pub photon_lifetime: f64,
}

pub fn kappa_from_quality(omega_r: f64, quality: f64) -> Result<ResonatorLoss> {
    if !(omega_r > 0.0) || !(quality > 0.0) {
        return Err(Error::Unphysical(format!(
            "resonator frequency and quality must be positive: omega_r={omega_r}, Q={quality}"
        )));
    }
    let kappa = omega_r / quality;
    Ok(ResonatorLoss { kappa, photon_lifetime: 1.0 / (TWO_PI * kappa) })
}

/// Charge-qubit Hamiltonian near a degeneracy point:
/// H = -(1/2)(E_el sz + E_J sx), energies in linear MHz.
pub fn cpb_hamiltonian(e_el: f64, e_j: f64) -> Result<OperatorMatrix> {
    let m = (operators::sigma_z().scale(e_el) + operators::sigma_x().scale(e_j))
        .scale(-0.5 * TWO_PI);
    OperatorMatrix::hermitian(HilbertLayout::qubit(), m)
}

fn exchange_term(
    layout: &HilbertLayout,
    resonator_site: usize,
    qubit_site: usize,
) -> Result<DMatrix<Complex64>> {
    let create = operators::creation(layout.dims()[resonator_site]);
    let lower = operators::sigma_minus();
    let mut factors = [(resonator_site, &create), (qubit_site, &lower)];
    factors.sort_by_key(|(site, _)| *site);
    let up = embed_product(layout, &factors)?;
    Ok(&up + up.adjoint())
}

/// Resonant-exchange generator g (a^dag s- + a s+) on arbitrary sites,
/// in angular units. This is the rotating-frame Jaynes-Cummings interaction.
pub fn jc_exchange_at(
    layout: &HilbertLayout,
    resonator_site: usize,
    qubit_site: usize,
    g: f64,
) -> Result<OperatorMatrix> {
    let m = exchange_term(layout, resonator_site, qubit_site)?.scale(TWO_PI * g);
    OperatorMatrix::hermitian(layout.clone(), m)
}

/// Lab-frame Jaynes-Cummings Hamiltonian on arbitrary sites:
/// w_r (a^dag a + 1/2) + (w_a/2) sz + g (a^dag s- + a s+), angular units.
pub fn jaynes_cummings_at(
    layout: &HilbertLayout,
    resonator_site: usize,
    qubit_site: usize,
    omega_r: f64,
    omega_a: f64,
    g: f64,
) -> Result<OperatorMatrix> {
    let dim_r = layout.dims()[resonator_site];
    let full = layout.total_dim();
    let photon = embed(layout, resonator_site, &operators::number(dim_r))?
        + DMatrix::<Complex64>::identity(full, full).scale(0.5);
    let qubit = embed(layout, qubit_site, &operators::sigma_z())?;
    let m = photon.scale(TWO_PI * omega_r)
        + qubit.scale(TWO_PI * omega_a / 2.0)
        + exchange_term(layout, resonator_site, qubit_site)?.scale(TWO_PI * g);
    OperatorMatrix::hermitian(layout.clone(), m)
}

/// Lab-frame Jaynes-Cummings Hamiltonian for one coupled qubit of the
/// device, on the full protocol layout.
pub fn jaynes_cummings(params: &DeviceParams, qubit: usize) -> Result<OperatorMatrix> {
    let site = params.qubit_site(qubit)?;
    params.check_coupled(qubit)?;
    jaynes_cummings_at(
        &params.layout()?,
        params.resonator_site(),
        site,
        params.omega_r,
        params.omega_a[qubit],
        params.g[qubit],
    )
}

/// Classical drive term at time `t`:
/// sum_k [eps_k a^dag e^{-i w_dk t} + eps_k^* a e^{+i w_dk t}],
/// with eps in linear MHz and w_dk supplied as linear MHz.
pub fn drive_hamiltonian(
    layout: &HilbertLayout,
    resonator_site: usize,
    drives: &[(Complex64, f64)],
    t: f64,
) -> Result<OperatorMatrix> {
    let dim = layout.dims()[resonator_site];
    let create = embed(layout, resonator_site, &operators::creation(dim))?;
    let mut m = DMatrix::zeros(layout.total_dim(), layout.total_dim());
    for &(eps, omega_d) in drives {
        let phase = Complex64::from_polar(1.0, -TWO_PI * omega_d * t);
        let term = create.map(|z| z * eps * phase * TWO_PI);
        m += &term + term.adjoint();
    }
    OperatorMatrix::hermitian(layout.clone(), m)
}

/// Rotating-frame generator on explicit sites:
/// `D_r a^dag a + (D_a/2) sz - g (a^dag s- + a s+) + (amp/2) s_phi`
/// with `s_phi = cos(phase) sx + sin(phase) sy`, all linear MHz in,
/// angular units out.
#[allow(clippy::too_many_arguments)]
pub fn rotating_frame_at(
    layout: &HilbertLayout,
    resonator_site: usize,
    qubit_site: usize,
    delta_r: f64,
    delta_a: f64,
    g: f64,
    amplitude: f64,
    axis_phase: f64,
) -> Result<OperatorMatrix> {
    let dim_r = layout.dims()[resonator_site];
    let axis = operators::sigma_x().scale(axis_phase.cos())
        + operators::sigma_y().scale(axis_phase.sin());
    let m = embed(layout, resonator_site, &operators::number(dim_r))?.scale(TWO_PI * delta_r)
        + embed(layout, qubit_site, &operators::sigma_z())?.scale(TWO_PI * delta_a / 2.0)
        - exchange_term(layout, resonator_site, qubit_site)?.scale(TWO_PI * g)
        + embed(layout, qubit_site, &axis)?.scale(TWO_PI * amplitude / 2.0);
    OperatorMatrix::hermitian(layout.clone(), m)
}

/// Displaced (drive-eliminated) frame: detuned resonator and qubit, the
/// retained exchange coupling, and the Rabi drive term.
#[derive(Debug, Clone)]
pub struct DisplacedFrame {
    pub hamiltonian: OperatorMatrix,
    /// Rabi frequency 2 eps g / Delta_r, linear MHz (sign follows Delta_r).
    pub rabi: f64,
}

/// Build the displaced-frame Hamiltonian for one coupled qubit:
/// D_r a^dag a + (D_a/2) sz - g (a^dag s- + a s+) + (W_R/2) sx.
pub fn displaced_hamiltonian(params: &DeviceParams, qubit: usize) -> Result<DisplacedFrame> {
    displaced_with_drive(params, qubit, params.omega_d, 0.0)
}

/// Displaced frame with an explicit carrier and drive phase; the drive term
/// becomes (W_R/2)(cos(phase) sx + sin(phase) sy).
pub fn displaced_with_drive(
    params: &DeviceParams,
    qubit: usize,
    omega_d: f64,
    drive_phase: f64,
) -> Result<DisplacedFrame> {
    let site = params.qubit_site(qubit)?;
    params.check_coupled(qubit)?;
    let layout = params.layout()?;
    let delta_r = params.omega_r - omega_d;
    if delta_r == 0.0 {
        return Err(Error::Singularity(
            "drive resonant with the resonator: Delta_r = 0 has no displaced frame".into(),
        ));
    }
    let delta_a = params.omega_a[qubit] - omega_d;
    let rabi = 2.0 * params.epsilon * params.g[qubit] / delta_r;
    let hamiltonian = rotating_frame_at(
        &layout,
        params.resonator_site(),
        site,
        delta_r,
        delta_a,
        params.g[qubit],
        rabi,
        drive_phase,
    )?;
    Ok(DisplacedFrame { hamiltonian, rabi })
}

/// Dispersive frame: exchange coupling absorbed into the chi shift.
#[derive(Debug, Clone)]
pub struct DispersiveFrame {
    pub hamiltonian: OperatorMatrix,
    /// Dispersive shift g^2/Delta, linear MHz.
    pub chi: f64,
    /// Shifted qubit frequency omega_a + chi, linear MHz.
    pub omega_a_shifted: f64,
    /// Rabi frequency 2 eps g / Delta_r, linear MHz.
    pub rabi: f64,
    /// Set when g/|Delta| exceeds [`DISPERSIVE_VALIDITY_RATIO`].
    pub validity_warning: bool,
}

/// Build the dispersive-frame Hamiltonian for one coupled qubit:
/// D_r a^dag a + (D~_a/2) sz + (W_R/2) sx.
pub fn dispersive_hamiltonian(params: &DeviceParams, qubit: usize) -> Result<DispersiveFrame> {
    let site = params.qubit_site(qubit)?;
    params.check_coupled(qubit)?;
    let layout = params.layout()?;
    let delta = params.omega_a[qubit] - params.omega_r;
    if delta == 0.0 {
        return Err(Error::Singularity(
            "qubit resonant with the resonator: the dispersive shift g^2/Delta diverges".into(),
        ));
    }
    let chi = params.g[qubit] * params.g[qubit] / delta;
    let omega_a_shifted = params.omega_a[qubit] + chi;
    let delta_r = params.omega_r - params.omega_d;
    let rabi = if params.epsilon == 0.0 {
        0.0
    } else {
        if delta_r == 0.0 {
            return Err(Error::Singularity(
                "drive resonant with the resonator: Delta_r = 0 has no Rabi frequency".into(),
            ));
        }
        2.0 * params.epsilon * params.g[qubit] / delta_r
    };
    let delta_a_shifted = omega_a_shifted - params.omega_d;
    let dim_r = layout.dims()[params.resonator_site()];
    let m = embed(&layout, params.resonator_site(), &operators::number(dim_r))?
        .scale(TWO_PI * delta_r)
        + embed(&layout, site, &operators::sigma_z())?.scale(TWO_PI * delta_a_shifted / 2.0)
        + embed(&layout, site, &operators::sigma_x())?.scale(TWO_PI * rabi / 2.0);
    Ok(DispersiveFrame {
        hamiltonian: OperatorMatrix::hermitian(layout, m)?,
        chi,
        omega_a_shifted,
        rabi,
        validity_warning: params.g[qubit] / delta.abs() > DISPERSIVE_VALIDITY_RATIO,
    })
}

/// One Lindblad jump channel: rate in linear MHz plus the bare operator.
/// Integrators apply sqrt(2pi * rate) * operator.
#[derive(Debug, Clone)]
pub struct CollapseTerm {
    pub rate: f64,
    pub operator: OperatorMatrix,
    pub label: String,
}

/// Ordered set of jump channels for a scenario.
#[derive(Debug, Clone, Default)]
pub struct CollapseSet {
    terms: Vec<CollapseTerm>,
}

impl CollapseSet {
    pub fn empty() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[CollapseTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: CollapseTerm) {
        self.terms.push(term);
    }
}

/// Jump channels of the device on the protocol layout: resonator decay
/// sqrt(kappa) a, plus sqrt(gamma1) s- and sqrt(gamma_phi/2) sz for each
/// *coupled* qubit. Uncoupled qubits contribute nothing.
pub fn collapse_operators(params: &DeviceParams) -> Result<CollapseSet> {
    let layout = params.layout()?;
    let dim_r = layout.dims()[params.resonator_site()];
    let mut set = CollapseSet::empty();
    set.push(CollapseTerm {
        rate: params.kappa,
        operator: OperatorMatrix::general(
            layout.clone(),
            embed(&layout, params.resonator_site(), &operators::annihilation(dim_r))?,
        )?,
        label: "resonator_decay".into(),
    });
    for qubit in 0..2 {
        if !params.qubit_coupled[qubit] {
            continue;
        }
        let site = params.qubit_site(qubit)?;
        set.push(CollapseTerm {
            rate: params.gamma1[qubit],
            operator: OperatorMatrix::general(
                layout.clone(),
                embed(&layout, site, &operators::sigma_minus())?,
            )?,
            label: format!("qubit{}_relaxation", qubit + 1),
        });
        set.push(CollapseTerm {
            rate: params.gamma_phi[qubit] / 2.0,
            operator: OperatorMatrix::general(
                layout.clone(),
                embed(&layout, site, &operators::sigma_z())?,
            )?,
            label: format!("qubit{}_dephasing", qubit + 1),
        });
    }
    Ok(set)
}
