//! Grid-based Eulerian simulator for self-gravitating, open-system,
//! compressible thermo-viscous flow with one or two interpenetrating
//! components, together with the integral balance ledgers that audit it.
//!
//! The crate is organised bottom-up:
//!
//! * [`constitutive`] free energy, viscosity and conductivity laws
//! * [`mixture`] metal/silicate interaction terms
//! * [`gravity`] free-space self-gravity and rotating-frame forces
//! * [`state`] grid geometry, fields, border-zone sources, snapshots
//! * [`solver`] finite-volume right-hand sides and explicit stepping
//! * [`diagnostics`] per-step ledgers and post-hoc audits
//! * [`scenario`] TOML scenario description and validation
//! * [`simulation`] the run driver shared by the CLI and the test suites

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod gravity;
pub mod mixture;
pub mod quadrature;
pub mod scenario;
pub mod simulation;
pub mod solver;
pub mod state;
pub mod tensor;
pub mod verify;

pub use constitutive::{
    check_assumptions, eval_thermo, temperature_from_w, viscous_stress, AssumptionConfig,
    AssumptionReport, ConstitutiveModel, FreeEnergyParams, Segment, ThermoEval, ViscosityParams,
};
pub use diagnostics::{BalanceLedger, LedgerRow};
pub use error::{Error, Result};
pub use gravity::{GravityContext, GravityMethod, PotentialField};
pub use mixture::MixtureParams;
pub use scenario::Scenario;
pub use simulation::Simulation;
pub use solver::{Flux, Integrator, SolverConfig, Tendency};
pub use state::{FieldState, Grid, SourceSpec, TwoPhaseState};
pub use tensor::{Mat3, Vec3};
