//! Security-constrained economic dispatch with a power-oriented inertia service.
//!
//! The crate co-optimizes energy, a bidirectional inertia service quantified in
//! MW, and two-stage primary frequency response (ramp and droop) for a fleet of
//! synchronous generators and storage-backed inverter-based resources. The
//! pipeline is
//!
//! ```text
//! Scenario --build--> ConicProblem --solve--> (DispatchSolution, DualSolution)
//!          --prices--> PriceSet --capacity_payments / deployment_payments--> statements
//!          --security_check--> SecurityReport (swing-equation replay of the cleared dispatch)
//! ```
//!
//! Internal units are MW, MW·s, Hz and s throughout.

pub mod builder;
pub mod error;
pub mod model;
pub mod pricing;
pub mod settlement;
pub mod solver;
pub mod verifier;

pub use builder::{build, ConicProblem, Direction};
pub use error::{Error, Result};
pub use model::{load_scenario, InverterResource, Scenario, SyncGenerator, SystemParams};
pub use pricing::{contingency_setter, prices, PriceSet};
pub use solver::{solve, DispatchSolution, DualSolution, SolveReport, SolveStatus};
pub use verifier::{security_check, simulate_event, SecurityReport};
