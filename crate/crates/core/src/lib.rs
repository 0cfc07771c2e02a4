//! Sublinear Markovian semigroups of jump processes under drift, volatility
//! and jump-intensity uncertainty.
//!
//! The semigroup `S_t(psi)(x)` is computed as the bounded viscosity solution
//! of `u_t = G(x, u)`, where `G` is the supremum over a control grid of
//! Lévy-type generators. A weak-control Monte Carlo engine provides the
//! matching lower bound, and the robust double-exponential (Kou) model is
//! available end to end.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod control;
pub mod error;
pub mod field;
pub mod functions;
pub mod generator;
pub mod kou;
pub mod measure;
pub mod pide;
pub mod simulate;
pub mod transform;
pub mod truncation;

pub use audit::{audit_conditions, AuditSpec, ConditionAudit, ConditionId, Majorant, StateBox};
pub use control::{ControlGrid, ControlId};
pub use error::{Error, Result};
pub use field::{CoefficientField, Coefficients, LevyTriplet, ScalarCoefficients};
pub use measure::{DoubleExponential, JumpReferenceMeasure, Mass, MarkDensity, NoJumps, QuadratureSpec};
pub use truncation::{TruncationFunction, TruncationKind};
pub use functions::{FunctionBounds, GaussianBump, SmoothBump, TestFunction};
pub use generator::{apply_generator, drift_correction, hamiltonian_g, small_symbol_sup, symbol, GeneratorValue};
pub use pide::{cfl_timestep, restart, solve, viscosity_residual, DiscreteOperator, SolveMeta, SolveOptions, SpatialGrid, ValueField};
pub use simulate::{estimate_value, mc_lower_bound, policy_from_pide, sample_path, Estimate, McComparison, PolicySchedule, Provenance, SamplePath};
pub use transform::{quantile_k, verify_transport, Quantile, QuantileOptions, Tail, TailPair};
