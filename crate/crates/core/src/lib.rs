//! Pseudo-spectral solver for the Pitaevskii superfluid model: a nonlinear
//! Schrödinger wavefunction exchanging mass and momentum with a viscous,
//! incompressible, variable-density normal fluid, plus the diagnostics and
//! stability harness used to check its energy structure numerically.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod initial;
pub mod integrator;
pub mod io;
pub mod model;
pub mod norm;
pub mod oracle;
pub mod spectral;
pub mod stability;
pub mod validator;

pub use error::{Error, Result};
pub use diagnostics::DiagnosticsRecord;
pub use grid::{ComplexField, Field, Grid, RealField, RealVectorField, VectorField};
pub use integrator::{run, Integrator, StepConfig, Termination, Trajectory};
pub use model::{Params, State};
pub use norm::{inner_product, norm, vector_norm, NormSpec};
pub use spectral::SpectralPlan;
