//! Pulse-level simulator of quantum teleportation between two
//! superconducting charge qubits coupled to a single high-Q coplanar
//! resonator.
//!
//! The crate models the device at three levels:
//!
//! * **Operators and states** ([`hilbert`], [`operators`]): dense complex
//!   matrices on a fixed (qubit 1, resonator, qubit 2) tensor layout with a
//!   truncated Fock space for the resonator.
//! * **Dynamics** ([`hamiltonians`], [`dynamics`], [`pulses`]): lab,
//!   displaced, and dispersive frames; unitary and Lindblad integration;
//!   microwave and flux pulses compiled to durations and amplitudes.
//! * **Protocol** ([`protocol`], [`scenario`]): resonator-mediated Bell
//!   channel preparation, Bell-basis measurement of the sender pair,
//!   classical feed-forward, fidelity and tomography reporting, and the
//!   scenario runner behind the command-line interface.
//!
//! Conventions, used everywhere without further comment:
//!
//! * Frequencies in public APIs are *linear* MHz; times are microseconds.
//!   Generators are converted to angular units (rad/us) exactly once,
//!   inside the Hamiltonian constructors.
//! * Qubit basis index 0 is the ground state, index 1 the excited state,
//!   and `sigma_z = |1><1| - |0><0|`.
//! * Composite indices follow the layout order with the leftmost factor
//!   most significant.

pub mod dynamics;
pub mod error;
pub mod hamiltonians;
pub mod hilbert;
pub mod measure;
pub mod operators;
pub mod protocol;
pub mod pulses;
pub mod scenario;

pub use dynamics::{
    evolve_lindblad, evolve_unitary, fit_oscillation, jc_pulse, ExchangePulse, Hamiltonian,
    IntegratorConfig, OscillationFit, PulseMode, SnapshotPolicy, Trajectory,
};
pub use error::{Error, Result};
pub use hamiltonians::{
    collapse_operators, cpb_hamiltonian, dispersive_hamiltonian, displaced_hamiltonian,
    drive_hamiltonian, jaynes_cummings, kappa_from_quality, rates_from_coherence_times,
    CoherenceRates, CollapseSet, CollapseTerm, DeviceParams, DispersiveFrame, DisplacedFrame,
    ResonatorLoss,
};
pub use hilbert::{
    embed, embed_product, partial_trace, tensor, DensityMatrix, HilbertLayout, OperatorMatrix,
    QuantumState,
};
pub use measure::{
    concurrence, expectation, expectation_density, fidelity, measure_projective,
    measure_projective_density, DensityMeasurementOutcome, MeasurementOutcome, StateRef,
};
pub use protocol::{
    bell_projectors, channel_pair_density, correction_pulses, correction_unitary,
    decompose_bell, measure_tomography, physical_projectors, prepare_channel, prepare_input,
    run_teleportation, teleport_branches, tomography_reconstruct, BellBranch, BellLabel,
    ChannelMode, ChannelPrep, MeasurementScheme, TeleportBranch, TeleportOptions, TeleportResult,
    TomographyEstimate, TomographyRecord,
};
pub use pulses::{
    apply_pulse, compile_rotation, ideal_rotation, pulse_generator, PulseKind, PulseSpec,
    RotationAxis,
};
