//! Reverse quantum annealing of the ferromagnetic p-spin model.
//!
//! The crate covers closed-system (Schrödinger) dynamics and open-system
//! dynamics under an adiabatic Davies-type master equation with collective or
//! independent dephasing, unravelled by Monte Carlo wavefunction trajectories.
//!
//! Conventions used throughout:
//!
//! * schedule energies `A(s)`, `B(s)` and temperatures are given in GHz
//!   (ordinary frequency); they are converted to angular frequency in rad/ns
//!   exactly once, by [`units::ghz_to_rad_per_ns`];
//! * times are in ns;
//! * collective operators are Pauli sums, `S_a = sum_i sigma_i^a`, so `S_z`
//!   has eigenvalue `n - 2w` on the Dicke state `|w>`;
//! * in the full `2^n` space qubit 1 is the most significant bit and bit value
//!   0 is spin up (`sigma_z = +1`).

pub mod closed;
pub mod davies;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod mcwf;
pub mod ode;
pub mod operators;
pub mod schedule;
pub mod sweep;
pub mod units;

pub use closed::{evolve_unitary, success_probability, sweep_unitary, PureState, UnitaryOutcome};
pub use davies::{rate, BathSpec, DaviesBundle, DephasingModel};
pub use error::{Error, Result};
pub use hamiltonian::{
    decompose, min_gap_scan, GapScan, ProblemSpec, Space, SpectralDecomposition,
};
pub use mcwf::{
    average, lindblad_oracle, run_trajectory, sweep_open, EnsembleResult, McwfOptions,
    OracleOptions,
};
pub use operators::{
    build_dicke_sector, build_full_space, CollectiveOperators, DickeSector, FullSpaceOperators,
};
pub use schedule::{AnnealPath, InversionRule, PathKind, ScheduleCurves};
pub use sweep::{SweepPoint, SweepResult};

/// Complex scalar used for state amplitudes.
pub type C64 = num_complex::Complex64;
