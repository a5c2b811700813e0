//! Piecewise-constant phase modulation of the coupling between two detuned
//! modes: exact propagators, Bloch-sphere geometry, switching-schedule
//! solvers and planners, a two-stage isolator model, and an independent
//! RK4 integrator for cross-checks.

pub mod bloch;
pub mod dynamics;
pub mod error;
pub mod isolator;
pub mod optim;
pub mod oracle;
pub mod planner;
pub mod transfer;

pub use bloch::{BlochVector, CircleIntersection, RotationAxis, SphericalCircle};
pub use dynamics::{CouplerParams, CouplingSegment, ModeState, Protocol, TransferMatrix};
pub use error::{Error, Result};
pub use isolator::{Direction, DirectionalResponse, IsolatorSpec};
pub use oracle::IntegrationConfig;
pub use planner::{PlanSearch, SearchConfig, StaircasePlan};
pub use transfer::{TwoStepOutcome, TwoStepSolution};
