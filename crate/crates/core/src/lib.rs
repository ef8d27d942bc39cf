//! Stability analysis of DC-DC converters under constant on-time control.
//!
//! The crate computes period-doubling (PDB) and saddle-node (SNB) bifurcation
//! boundaries three independent ways:
//!
//! * [`sampled`] and [`bifurcation`]: exact sampled-data analysis of the
//!   cycle-to-cycle map and its Jacobian, the S plot, and closed-form design
//!   rules for the buck converter;
//! * [`harmonic`]: harmonic-balance sums over the power-stage transfer
//!   functions;
//! * [`simulator`]: brute-force iteration of the exact large-signal map.
//!
//! All quantities are SI. The buck state is ordered `x = (iL, vC)`.

pub mod bifurcation;
mod error;
pub mod fixtures;
pub mod harmonic;
pub mod model;
pub mod numeric;
pub mod sampled;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{
    build_model, slope_normalizer, BuckParams, ConverterModel, Input, OperatingPoint, RampSpec,
    Scheme, INTEGRATOR_DELTA,
};
pub use num_complex::Complex64;
pub use sampled::{
    audio_susceptibility, consistent_control, control_to_output, linearize, solve_period,
    steady_state_at, LinearizedMap, PeriodRoot, SteadyState,
};
pub use sweep::Execution;
