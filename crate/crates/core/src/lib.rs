//! Numerical laboratory for elliptic equations whose conductivity breaks
//! across the solution's own zero level set,
//!
//! ```text
//! div(A_s(x,u) ∇u) = div f(x),      A_s(x,u) = a(x) + b(x) (u^+)^s,
//! ```
//!
//! with `(u^+)^0` read as the characteristic function of `{u > 0}` (jump
//! regime `A = a_+ H(u) + a_- (1 - H(u))`).
//!
//! The crate provides:
//!
//! * [`expr`] -- a small expression language with exact derivatives, so
//!   coefficient gradients and Laplacians carry no discretization noise;
//! * [`grid`] -- tensor grids, fields, interpolation, and the circle/disk
//!   quadratures behind the frequency function;
//! * [`coefficients`] -- the broken coefficient and its structure audit;
//! * [`solver`] -- Picard iteration over five-point divergence-form systems
//!   with harmonic-mean interface conductivities;
//! * [`transforms`] -- the changes of variable that straighten the equation
//!   (`φ_z`, `σ_z`, `w`, `φ(·; s)` and its inverse);
//! * [`nodal`] -- marching-squares extraction of the zero set, lengths, sign
//!   measures, and normal estimation;
//! * [`analysis`] -- vanishing-order estimation, harmonic-polynomial fits,
//!   tangent-space diagnostics and the Almgren frequency profile;
//! * [`oracles`] -- closed-form and transform-based reference solutions.

pub mod analysis;
pub mod coefficients;
pub mod expr;
pub mod grid;
pub mod nodal;
pub mod oracles;
pub mod solver;
pub mod transforms;

pub use analysis::{
    ball_sup_abs, classify, frequency, frequency_profile, harmonic_fit, tangent_dim,
    vanishing_order, AnalysisError, FrequencyFields, FrequencyProfile, FrequencyRow,
    FrequencyTriple, OrderEstimate, PolyFit,
};
pub use coefficients::{CoefficientModel, CoefficientRange, ModelError, Phases, StructureReport};
pub use expr::{DiffError, EvalError, Expr, ParseError, Var};
pub use grid::{
    circle_integral, disk_integral, GridError, GridSpec, Point, ScalarField, VectorField,
};
pub use nodal::{
    extract_nodal, holder_modulus, nodal_length, normal_at, sign_measures, NodalError, NodalSet,
    NormalSample, PointClass, Segment,
};
pub use oracles::{harmonic_inversion_exact, transmission_1d, OracleError, OracleSolution};
pub use solver::{assemble, picard_solve, solve_linear, BrokenProblem, LinearSystem, SolveReport, SolverError};
pub use transforms::{
    phi_freeze, phi_jump, phi_jump_inverse, phi_s, phi_s_inverse, sigma_freeze, w_transform,
    TransformError, TransformFields,
};
