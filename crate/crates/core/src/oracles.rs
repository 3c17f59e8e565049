//! Closed-form and transform-based reference solutions that make the solver
//! and analysis outputs falsifiable.
//!
//! * [`transmission_1d`] solves the one-dimensional constant-phase problem
//!   exactly: the flux `A u'` is a constant `c`, continuity at the zero of
//!   `u` pins the interface, and the two boundary values determine `(c, x₀)`.
//! * [`harmonic_inversion_exact`] handles constant coefficients in any
//!   dimension: with `φ` the scalar transform, `φ(u)` is discretely harmonic,
//!   so solving the plain Laplace problem with boundary data `φ(g)` and
//!   inverting node-wise yields a reference with *no* broken-coefficient
//!   error -- only pure-Laplacian discretization error remains, which is
//!   exactly what the solver comparisons need to isolate.

use thiserror::Error;

use crate::coefficients::{CoefficientModel, Phases};
use crate::expr::Expr;
use crate::grid::{GridError, GridSpec, Point, ScalarField};
use crate::solver::{laplace_system, solve_linear_to, SolverError};
use crate::transforms::{phi_jump, phi_jump_inverse, phi_s, phi_s_inverse};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("boundary data must straddle zero: g_left = {g_left}, g_right = {g_right}")]
    NoSignChange { g_left: f64, g_right: f64 },
    #[error("oracle requires constant coefficients; `{name}` varies by {spread:.3e} over the grid")]
    NonConstantCoefficients { name: &'static str, spread: f64 },
    #[error("oracle requires f = 0; max |f| = {0:.3e}")]
    NonZeroForcing(f64),
    #[error(transparent)]
    Field(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Exact piecewise-linear transmission solution on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct TransmissionSolution {
    pub a_plus: f64,
    pub a_minus: f64,
    /// The constant flux `A u'`.
    pub flux: f64,
    /// Zero of the solution.
    pub interface: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TransmissionSolution {
    pub fn evaluate(&self, x: f64) -> f64 {
        if x <= self.interface {
            self.flux / self.a_minus * (x - self.interface)
        } else {
            self.flux / self.a_plus * (x - self.interface)
        }
    }

    pub fn slope_negative_side(&self) -> f64 {
        self.flux / self.a_minus
    }

    pub fn slope_positive_side(&self) -> f64 {
        self.flux / self.a_plus
    }
}

/// Reference solution: either closed form or exact up to pure-Laplacian
/// discretization error.
#[derive(Debug, Clone)]
pub enum OracleSolution {
    Transmission(TransmissionSolution),
    /// Transform-inverted discrete harmonic: `u` and the harmonic field it
    /// was inverted from.
    Inversion { u: ScalarField, transformed: ScalarField },
}

impl OracleSolution {
    pub fn evaluate(&self, p: Point) -> Result<f64, GridError> {
        match self {
            OracleSolution::Transmission(t) => Ok(t.evaluate(p[0])),
            OracleSolution::Inversion { u, .. } => u.interpolate(p),
        }
    }

    pub fn sample(&self, g: &GridSpec) -> Result<ScalarField, GridError> {
        match self {
            OracleSolution::Transmission(t) => ScalarField::from_fn(g, |p| t.evaluate(p[0])),
            OracleSolution::Inversion { u, .. } => {
                if u.spec() == g {
                    Ok(u.clone())
                } else {
                    ScalarField::try_from_fn(g, |p| {
                        u.interpolate(p).map_err(|_| crate::expr::EvalError::DivisionByZero {
                            x: p[0],
                            y: p[1],
                        })
                    })
                }
            }
        }
    }

    /// Interface location, known in closed form only for the 1-d oracle.
    pub fn interface(&self) -> Option<f64> {
        match self {
            OracleSolution::Transmission(t) => Some(t.interface),
            OracleSolution::Inversion { .. } => None,
        }
    }
}

/// Exact 1-d transmission solve on `[lo, hi]` with constant phases and
/// boundary values `g_left < 0 < g_right`.
///
/// Writing `c` for the flux, the boundary conditions read
/// `c (lo - x₀) / a₋ = g_left` and `c (hi - x₀) / a₊ = g_right`, a linear
/// system for `(c, c x₀)`.
pub fn transmission_1d(
    a_plus: f64,
    a_minus: f64,
    g_left: f64,
    g_right: f64,
    lo: f64,
    hi: f64,
) -> Result<OracleSolution, OracleError> {
    if !(g_left < 0.0 && g_right > 0.0) {
        return Err(OracleError::NoSignChange { g_left, g_right });
    }
    assert!(a_plus > 0.0 && a_minus > 0.0 && lo < hi);
    // c*lo - c*x0 = a_minus g_left ; c*hi - c*x0 = a_plus g_right.
    let c = (a_plus * g_right - a_minus * g_left) / (hi - lo);
    let cx0 = lo * c - a_minus * g_left;
    let interface = cx0 / c;
    Ok(OracleSolution::Transmission(TransmissionSolution {
        a_plus,
        a_minus,
        flux: c,
        interface,
        lo,
        hi,
    }))
}

fn constant_value(e: &Expr, g: &GridSpec, name: &'static str) -> Result<f64, OracleError> {
    let f = ScalarField::sample(e, g)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in f.values() {
        min = min.min(v);
        max = max.max(v);
    }
    let spread = max - min;
    if spread > 1e-13 * max.abs().max(1.0) {
        return Err(OracleError::NonConstantCoefficients { name, spread });
    }
    Ok(0.5 * (min + max))
}

/// Reference solution for constant coefficients and `f = 0` on `grid`:
/// solve the discrete Laplace problem with boundary data `φ(g)` and invert
/// the transform node-wise.
pub fn harmonic_inversion_exact(
    m: &CoefficientModel,
    g: &Expr,
    grid: &GridSpec,
) -> Result<OracleSolution, OracleError> {
    let f_field_x = ScalarField::sample(&m.f()[0], grid)?;
    let f_field_y = ScalarField::sample(&m.f()[1], grid)?;
    let f_max = f_field_x
        .values()
        .iter()
        .zip(f_field_y.values())
        .fold(0.0_f64, |mm, (a, b)| mm.max((a * a + b * b).sqrt()));
    if f_max > 1e-14 {
        return Err(OracleError::NonZeroForcing(f_max));
    }

    enum Transform {
        Jump { a_plus: f64, a_minus: f64 },
        Power { a: f64, b: f64, s: f64 },
    }
    let transform = match m.phases() {
        Phases::Jump { a_plus, a_minus } => Transform::Jump {
            a_plus: constant_value(a_plus, grid, "a_plus")?,
            a_minus: constant_value(a_minus, grid, "a_minus")?,
        },
        Phases::Power { a, b } => Transform::Power {
            a: constant_value(a, grid, "a")?,
            b: constant_value(b, grid, "b")?,
            s: m.s(),
        },
    };
    let forward = |u: f64| match &transform {
        Transform::Jump { a_plus, a_minus } => phi_jump(u, *a_plus, *a_minus),
        Transform::Power { a, b, s } => phi_s(u, *a, *b, *s),
    };
    let inverse = |v: f64| match &transform {
        Transform::Jump { a_plus, a_minus } => phi_jump_inverse(v, *a_plus, *a_minus),
        Transform::Power { a, b, s } => phi_s_inverse(v, *a, *b, *s),
    };

    let g_field = ScalarField::sample(g, grid)?;
    let boundary = g_field.map(forward)?;
    let sys = laplace_system(grid, &boundary, 1e-12, 40 * grid.node_count())?;
    // By the maximum principle the harmonic field tops out at the boundary
    // sup, so this target keeps the discrete Laplacian of the reference below
    // 1e-9 * ||h||_inf on every grid size.
    let target = 5e-10 * boundary.sup_norm().max(f64::MIN_POSITIVE);
    let transformed = solve_linear_to(&sys, Some(target))?;
    let u = transformed.map(inverse)?;
    Ok(OracleSolution::Inversion { u, transformed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;
    use crate::expr::Expr;
    use approx::assert_relative_eq;

    fn e(text: &str) -> Expr {
        Expr::parse(text).unwrap()
    }

    #[test]
    fn transmission_reference_case() {
        let sol = transmission_1d(2.0, 1.0, -1.0, 1.0, -1.0, 1.0).unwrap();
        let OracleSolution::Transmission(t) = &sol else { panic!() };
        assert_relative_eq!(t.interface, -1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(t.flux, 1.5, epsilon = 1e-14);
        assert_relative_eq!(t.slope_negative_side(), 1.5);
        assert_relative_eq!(t.slope_positive_side(), 0.75);
        // Flux continuity across the break is exact by construction.
        assert_relative_eq!(
            1.0 * t.slope_negative_side(),
            2.0 * t.slope_positive_side(),
            epsilon = 1e-14
        );
        assert_relative_eq!(sol.evaluate([-1.0, 0.0]).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(sol.evaluate([1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn transmission_without_break_is_identity() {
        let sol = transmission_1d(1.0, 1.0, -1.0, 1.0, -1.0, 1.0).unwrap();
        let OracleSolution::Transmission(t) = &sol else { panic!() };
        assert_relative_eq!(t.interface, 0.0, epsilon = 1e-14);
        assert_relative_eq!(sol.evaluate([0.37, 0.0]).unwrap(), 0.37, epsilon = 1e-14);
    }

    #[test]
    fn transmission_mirror_case() {
        let sol = transmission_1d(1.0, 2.0, -1.0, 1.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(sol.interface().unwrap(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn transmission_requires_sign_change() {
        assert!(matches!(
            transmission_1d(2.0, 1.0, 0.5, 1.0, -1.0, 1.0),
            Err(OracleError::NoSignChange { .. })
        ));
    }

    #[test]
    fn inversion_identity_phase_is_plain_harmonic() {
        let grid = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let m = CoefficientModel::jump(e("1"), e("1"), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap();
        let sol = harmonic_inversion_exact(&m, &e("x"), &grid).unwrap();
        let exact = ScalarField::sample(&e("x"), &grid).unwrap();
        let u = sol.sample(&grid).unwrap();
        let err = u
            .values()
            .iter()
            .zip(exact.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "error {err}");
    }

    #[test]
    fn inversion_transform_is_discretely_harmonic() {
        let grid = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let m = CoefficientModel::jump(e("2"), e("1"), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap();
        let sol = harmonic_inversion_exact(&m, &e("x"), &grid).unwrap();
        let OracleSolution::Inversion { u, transformed } = &sol else { panic!() };
        let lap = transformed.interior_laplacian();
        assert!(
            lap.sup_norm() <= 1e-9 * transformed.sup_norm(),
            "laplacian residual {}",
            lap.sup_norm()
        );
        // phi(u) recovers the harmonic field.
        for (uv, hv) in u.values().iter().zip(transformed.values()) {
            assert_relative_eq!(phi_jump(*uv, 2.0, 1.0), *hv, epsilon = 1e-12);
        }
    }

    #[test]
    fn inversion_power_regime_newton_branch() {
        let grid = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let m =
            CoefficientModel::power(1.0, e("1"), e("1"), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap();
        let sol = harmonic_inversion_exact(&m, &e("x"), &grid).unwrap();
        let OracleSolution::Inversion { u, transformed } = &sol else { panic!() };
        for (uv, hv) in u.values().iter().zip(transformed.values()) {
            assert!((phi_s(*uv, 1.0, 1.0, 1.0) - hv).abs() <= 1e-12 * hv.abs().max(1.0));
        }
    }

    #[test]
    fn inversion_rejects_variable_coefficients_and_forcing() {
        let grid = GridSpec::square(-1.0, 1.0, 17).unwrap();
        let m =
            CoefficientModel::jump(e("2 + x"), e("1"), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap();
        assert!(matches!(
            harmonic_inversion_exact(&m, &e("x"), &grid),
            Err(OracleError::NonConstantCoefficients { name: "a_plus", .. })
        ));
        let m2 = CoefficientModel::jump(e("2"), e("1"), [e("1"), e("0")], 0.4, 0.5, 0.3).unwrap();
        assert!(matches!(
            harmonic_inversion_exact(&m2, &e("x"), &grid),
            Err(OracleError::NonZeroForcing(_))
        ));
    }
}
