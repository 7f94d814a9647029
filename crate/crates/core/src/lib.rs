//! Conditional expectation on finite probability spaces.
//!
//! Given a finite space, a random variable X and a sub-sigma-algebra G
//! represented by its atom partition, three independent routes compute the
//! conditional expectation E(X | G):
//!
//! * atom averaging ([`solvers::solve_oracle`]),
//! * orthogonal projection onto a measurable basis
//!   ([`solvers::solve_projection`]),
//! * minimization of the energy J(Y) = 1/2 <Y,Y> - <X,Y> by gradient
//!   descent ([`solvers::solve_gradient`]).
//!
//! Every identity tying the routes together can be machine-checked: the
//! defining integral property over the atoms, the product identity against
//! measurable directions, the minimum principle with its exact quadratic
//! gap, and the closed-form directional derivatives of the energy. The
//! [`density`] module adds staircase approximation by simple functions and
//! truncation schedules for unbounded inputs.

pub mod density;
pub mod error;
pub mod functional;
pub mod gram;
pub mod prob_space;
pub mod sigma_algebra;
pub mod solvers;
pub mod sum;

pub use density::{
    approximation_trace, l1_extension_trace, staircase, truncate, ApproximationTrace, TraceKind,
};
pub use error::{Error, Result};
pub use functional::{
    DerivativeCheckReport, EnergyProblem, FormulaCheck, FunctionalKind, StepDefects,
    DEFAULT_GATEAUX_STEPS,
};
pub use prob_space::{Event, ProbabilitySpace, RandomVariable, ALMOST_SURE_TOL};
pub use sigma_algebra::{indicator, SigmaAlgebra};
pub use solvers::{
    default_fixed_step, solve_gradient, solve_oracle, solve_projection, tower_check,
    verify_defining_property, verify_defining_property_with, verify_dirichlet_gap,
    verify_product_identity, CondExpResult, GradientConfig, InitialPoint, Method, StepPolicy,
    VerificationCheck, VerificationReport,
};
