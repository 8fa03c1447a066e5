//! Cumulant-hierarchy simulator for damped quantum solitons in optical fibres.
//!
//! The field is sampled on a 1-D grid. Its quantum state is carried as
//! s-parametrized cumulants truncated at second order (Gaussian closure).
//! Kerr nonlinearity, dispersion, linear loss and thermal noise drive the
//! dynamics. A truncated Fock-space Lindblad solver provides an exact
//! reference for one- and two-mode systems.

pub mod cli;
pub mod error;
pub mod fock_oracle;
pub mod dynamics_rhs;
pub mod observables;
pub mod ode_integrator;
pub mod physical_params;
pub mod cumulant_state;

pub use cumulant_state::{Boundary, CumulantState, GridSpec, ValidationReport};
pub use dynamics_rhs::{CumulantSystem, RhsCoefficients};
pub use error::{Error, Result};
pub use ode_integrator::{integrate, IntegrationStats, OdeSystem, StepControl, Tableau};
pub use physical_params::{PhysicalInputs, ScaledParams, Sign};
