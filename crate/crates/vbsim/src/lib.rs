//! Coherence dynamics of a spin defect coupled to a nuclear-spin bath in a
//! two-dimensional honeycomb lattice, with an additional phonon dephasing
//! channel.
//!
//! The model is an electron spin sitting at a vacancy of a boron-nitride-like
//! monolayer. Under a strong out-of-plane magnetic field the electron-nuclear
//! and nuclear-nuclear dipolar interactions reduce to their secular parts, and
//! the electron coherence measured in free-induction-decay or Hahn-echo
//! protocols is a pure dephasing signal driven by the slow rearrangement of
//! the surrounding nuclear spins. At elevated temperature a two-phonon Raman
//! process adds an exponential decay channel on top of the spin-bath
//! envelope.
//!
//! # Pipeline
//!
//! * [`lattice`] builds deterministic site sets (rings of boron or nitrogen
//!   neighbours, or the nearest-`n` mixed bath) around the vacancy.
//! * [`couplings`] converts site geometry into dipolar coupling tables:
//!   electron-nuclear couplings, nuclear-nuclear couplings and nuclear Zeeman
//!   frequencies.
//! * [`exact`] propagates the full bath Hilbert space and is the reference
//!   engine for small baths (a few nuclei).
//! * [`hpa`] treats each nuclear spin as a bosonic mode whose Gaussian
//!   covariance is propagated exactly over piecewise-constant mode
//!   Hamiltonians; it scales to hundreds of sites.
//! * [`phonon`] computes the two-phonon dephasing rate of the defect spin and
//!   combines it with a spin-bath coherence time.
//! * [`analysis`] extracts envelopes, coherence times and stretched
//!   exponential fits from computed traces.
//! * [`config`] parses the flat key-value run configuration used by the
//!   `vbsim` command-line binary.
//!
//! # Units
//!
//! All Hamiltonian coefficients are angular frequencies in rad/s; energies
//! are divided by the reduced Planck constant at construction time. Distances
//! are metres, magnetic fields tesla, temperatures kelvin, times seconds.
//! Gyromagnetic ratios are rad s^-1 T^-1.
//!
//! # Scalar genericity
//!
//! Every numerical routine is generic over the floating-point scalar through
//! the [`Real`] trait, which `f32` and `f64` both satisfy. Concrete `f64`
//! aliases for the common result types are exported at the crate root; the
//! command-line binary uses `f64` throughout.

// Reference constants keep the full digit strings of the extended-precision
// values they were computed from, and validation guards use negated
// comparisons (`!(x > lo)`) so that NaN fails them.
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod couplings;
pub mod exact;
pub mod hpa;
pub mod lattice;
pub mod linalg;
pub mod phonon;
pub mod special;
pub mod spin;
pub mod trace;

use std::fmt;

/// Floating-point scalar type usable throughout the crate.
///
/// This is a convenience trait bundling the arithmetic, transcendental and
/// conversion capabilities the numerical code relies on. It is
/// blanket-implemented for every type that satisfies the bounds, in
/// particular `f32` and `f64`.
pub trait Real:
    Copy
    + fmt::Debug
    + fmt::Display
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + nalgebra::RealField
{
}

impl<T> Real for T where
    T: Copy
        + fmt::Debug
        + fmt::Display
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + nalgebra::RealField
{
}

/// Converts an `f64` constant to the active scalar type.
#[inline]
pub(crate) fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant must be representable in the scalar type")
}

/// Physical constants (SI units) and model defaults.
pub mod consts {
    use std::f64::consts::PI;

    /// Reduced Planck constant (J s).
    pub const HBAR: f64 = 1.054571817e-34;
    /// Boltzmann constant (J/K).
    pub const K_B: f64 = 1.380649e-23;
    /// Vacuum permeability divided by 4 pi (T m/A).
    pub const MU0_OVER_4PI: f64 = 1.0e-7;
    /// Electron gyromagnetic ratio (rad s^-1 T^-1).
    pub const GAMMA_E: f64 = 2.0 * PI * 28.0249e9;
    /// Boron-11 gyromagnetic ratio (rad s^-1 T^-1).
    pub const GAMMA_B11: f64 = 2.0 * PI * 13.66e6;
    /// Nitrogen-14 gyromagnetic ratio (rad s^-1 T^-1).
    pub const GAMMA_N14: f64 = 2.0 * PI * 3.078e6;
    /// Twice the nuclear spin of boron-11 (I = 3/2).
    pub const TWO_S_B11: u32 = 3;
    /// Twice the nuclear spin of nitrogen-14 (I = 1).
    pub const TWO_S_N14: u32 = 2;
    /// Zero-field splitting of the defect ground state (rad/s).
    pub const ZERO_FIELD_SPLITTING: f64 = 2.0 * PI * 3.5e9;
    /// In-plane bond length between neighbouring lattice sites (m).
    pub const BOND_LENGTH: f64 = 1.5e-10;
    /// Debye cutoff frequency of the phonon bath (rad/s), i.e. 175 meV
    /// divided by hbar.
    pub const DEBYE_FREQUENCY: f64 = 0.175 * 1.602176634e-19 / HBAR;
    /// Effective sound speed of the relevant phonon branch (m/s).
    pub const SOUND_SPEED: f64 = 1.0e4;
    /// Exponent parameter of the phonon spectral density.
    pub const UPSILON: f64 = 0.375;
    /// Geometric prefactor of the phonon coupling, 3 a sin(pi/6) with `a`
    /// the bond length (m).
    pub const CELL_FACTOR: f64 = 3.0 * BOND_LENGTH * 0.5;
    /// Temperature used for room-temperature phonon estimates (K).
    pub const ROOM_TEMPERATURE: f64 = 300.0;
}

/// Errors produced by simulation setup and execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its physical or structural domain.
    #[error("invalid {what}: {why}")]
    Domain {
        /// Name of the offending parameter or input.
        what: &'static str,
        /// Explanation of the violated requirement.
        why: String,
    },
    /// A configuration file or key could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    /// A resource guard was hit (Hilbert-space dimension, lattice extent,
    /// sample budget and similar limits).
    #[error("{0}")]
    Resource(String),
    /// A numerical procedure failed to converge or produced non-finite
    /// values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An input or output file operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error: `2` for validation and
    /// i/o problems, `3` for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    /// Shorthand for a [`Error::Domain`] value.
    pub(crate) fn domain(what: &'static str, why: impl Into<String>) -> Self {
        Error::Domain {
            what,
            why: why.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub use analysis::StretchedExpFit;
pub use couplings::{CouplingSet, FieldParams};
pub use lattice::{BathPreset, LatticeSpec, Selection, Site, Species, SpeciesParams};
pub use phonon::PhononParams;
pub use trace::{CoherenceTrace, Protocol, TimeGrid};

/// `f64` lattice site.
pub type SiteF64 = lattice::Site<f64>;
/// `f64` coupling tables.
pub type CouplingSetF64 = couplings::CouplingSet<f64>;
/// `f64` coherence trace.
pub type CoherenceTraceF64 = trace::CoherenceTrace<f64>;
/// `f64` exact-engine configuration.
pub type ExactConfigF64 = exact::ExactConfig<f64>;
/// `f64` bosonic-bath engine configuration.
pub type HpaConfigF64 = hpa::HpaConfig<f64>;
/// `f64` phonon parameter set.
pub type PhononParamsF64 = phonon::PhononParams<f64>;
