//! Energy-conserving multiple-relaxation-time lattice Boltzmann schemes on the
//! D2Q9, D2Q13 and D2Q17 lattices.
//!
//! The crate covers moment bases and equilibria, isotropy constraints with
//! transport predictions, linear stability analysis of the one-step
//! amplification matrix, and a periodic simulator with an anti-bounce-back
//! isothermal wall for a disc.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constraints;
pub mod eigen;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod params;
pub mod scheme;
pub mod simulator;

pub use constraints::{
    derive_parameters, predicted_transport, tied_groups, validate, ConstraintCheck, FreeParameters,
    IsotropyLevel, TransportCoefficients, ValidationReport,
};
pub use equilibrium::{
    collide, equilibrium_jacobian, equilibrium_nonlinear, relax_moments, Collider,
    EquilibriumModel,
};
pub use error::{ConfigError, LbmError, Result};
pub use params::{
    rate_from_sigma, sigma_from_rate, ConservedState, ParameterSet, RateGroup, ReferenceState,
};
pub use scheme::{build_scheme, MomentKind, SchemeDescriptor, SchemeName};
pub use config::{parse_config, Command, ExperimentConfig};
pub use experiments::run_command;
pub use linear::{
    effective_coefficients, fit_dispersion, LinearModel, ModeLabel, ModeSpectrum, TrackedRay, WaveVector,
};
pub use simulator::{
    run_disc_acoustics, run_relaxation, FieldState, Grid, InitKind, PulseSource, Simulator, Topology, WaveInit,
};
