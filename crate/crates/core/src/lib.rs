//! Numerical laboratory for conformal Ricci flow on surfaces.
//!
//! Metrics are written `g = e^{2u} g₀` over a flat coordinate chart and
//! evolve by `∂u/∂t = e^{−2u} Δu`, the conformal form of `∂g/∂t = −2K g`.

pub mod chart;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod scenarios;
pub mod validate;

pub use chart::{ChartKind, ConformalChart};
pub use diagnostics::DiagnosticReport;
pub use error::{Error, Result};
pub use exact::{CigarModel, SphereModel};
pub use field::ScalarField;
pub use flow::{BoundaryCondition, FlowState, StepControl};
pub use geometry::Domain;
pub use scenarios::{run_scenario, ScenarioConfig, ScenarioResult};
