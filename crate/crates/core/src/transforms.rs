//! The changes of variable that straighten the broken equation.
//!
//! For the jump regime (`s = 0`):
//!
//! * the frozen transform `φ_z(u)(x) = a_+(z) u^+(x) - a_-(z) u^-(x)` turns
//!   the equation into a perturbed Laplace equation near `z`, with the
//!   perturbation carried by
//!   `σ_z(x) = (a_+(z) - a_+(x)) H(u) + (a_-(z) - a_-(x)) (1 - H(u))`;
//! * the variable-coefficient transform `w(x) = a_+(x) u^+ - a_-(x) u^-`
//!   satisfies `Δw = b·∇w + c w` with the phase-wise fields
//!   `b = ∇a_±/a_±` and `c = div(∇a_±/a_±)`.
//!
//! For the power regime (`s > 0`) the transform is
//! `w = a(x) u + b(x) (u^+)^{s+1}/(s+1)`, satisfying `Δw = B·∇u + c u` with
//! `B = ∇a + (u^+)^s ∇b` and `c = Δa + (u^+)^s Δb/(s+1)`.
//!
//! All lower-order fields come from exact expression derivatives, never from
//! finite differences of sampled coefficients: the frequency quadratures are
//! sensitive to noise in these terms. Every transform preserves the sign of
//! `u` node-wise, so nodal sets are shared with the original solution.

use thiserror::Error;

use crate::coefficients::{CoefficientModel, Phases};
use crate::expr::{DiffError, EvalError, Expr, Var};
use crate::grid::{GridError, Point, ScalarField, VectorField};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("operation requires the {expected} regime, model has s = {s}")]
    WrongRegime { expected: &'static str, s: f64 },
    #[error(transparent)]
    NonDifferentiable(#[from] DiffError),
    #[error("coefficient evaluation failed at ({x}, {y}): {source}")]
    Eval {
        x: f64,
        y: f64,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Field(#[from] GridError),
}

/// Transform output: the transformed field and the lower-order coefficient
/// fields feeding the frequency integrals. Sign patterns of `v` and the
/// source `u` agree node-wise.
#[derive(Debug, Clone)]
pub struct TransformFields {
    pub v: ScalarField,
    pub b_vec: VectorField,
    pub c: ScalarField,
}

fn eval_at(e: &Expr, p: Point) -> Result<f64, TransformError> {
    e.evaluate(p[0], p[1])
        .map_err(|source| TransformError::Eval { x: p[0], y: p[1], source })
}

fn jump_phases(m: &CoefficientModel) -> Result<(&Expr, &Expr), TransformError> {
    match m.phases() {
        Phases::Jump { a_plus, a_minus } => Ok((a_plus, a_minus)),
        Phases::Power { .. } => {
            Err(TransformError::WrongRegime { expected: "s = 0", s: m.s() })
        }
    }
}

/// Frozen transform `φ_z(u) = a_+(z) u^+ - a_-(z) u^-` (jump regime only).
pub fn phi_freeze(
    u: &ScalarField,
    z: Point,
    m: &CoefficientModel,
) -> Result<ScalarField, TransformError> {
    let (a_plus, a_minus) = jump_phases(m)?;
    let ap = eval_at(a_plus, z)?;
    let am = eval_at(a_minus, z)?;
    Ok(u.map(|v| if v > 0.0 { ap * v } else { am * v })?)
}

/// Frozen-coefficient defect `σ_z` with the `H(0) = 0` convention.
pub fn sigma_freeze(
    u: &ScalarField,
    z: Point,
    m: &CoefficientModel,
) -> Result<ScalarField, TransformError> {
    let (a_plus, a_minus) = jump_phases(m)?;
    let ap_z = eval_at(a_plus, z)?;
    let am_z = eval_at(a_minus, z)?;
    let g = u.spec().clone();
    let values = (0..g.node_count())
        .map(|idx| {
            let p = g.node_point(idx);
            if u.values()[idx] > 0.0 {
                Ok(ap_z - eval_at(a_plus, p)?)
            } else {
                Ok(am_z - eval_at(a_minus, p)?)
            }
        })
        .collect::<Result<Vec<_>, TransformError>>()?;
    Ok(ScalarField::from_values(&g, values)?)
}

struct PhaseDerivatives {
    grad: [Expr; 2],
    lap: Expr,
}

fn derivatives(e: &Expr, dim: usize) -> Result<PhaseDerivatives, DiffError> {
    let dx = e.differentiate(Var::X)?;
    let dxx = dx.differentiate(Var::X)?;
    if dim == 1 {
        return Ok(PhaseDerivatives { grad: [dx, Expr::Const(0.0)], lap: dxx });
    }
    let dy = e.differentiate(Var::Y)?;
    let dyy = dy.differentiate(Var::Y)?;
    Ok(PhaseDerivatives { grad: [dx, dy], lap: crate::expr::add(dxx, dyy) })
}

/// The variable-coefficient transform `w` with its analytic lower-order
/// fields. Requires twice-differentiable coefficient expressions.
pub fn w_transform(
    u: &ScalarField,
    m: &CoefficientModel,
) -> Result<TransformFields, TransformError> {
    let g = u.spec().clone();
    let dim = g.dim();
    match m.phases() {
        Phases::Jump { a_plus, a_minus } => {
            let dp = derivatives(a_plus, dim)?;
            let dm = derivatives(a_minus, dim)?;
            let mut w = Vec::with_capacity(g.node_count());
            let mut b = Vec::with_capacity(g.node_count());
            let mut c = Vec::with_capacity(g.node_count());
            for idx in 0..g.node_count() {
                let p = g.node_point(idx);
                let uv = u.values()[idx];
                let (a_e, d) = if uv > 0.0 { (a_plus, &dp) } else { (a_minus, &dm) };
                let a = eval_at(a_e, p)?;
                let gx = eval_at(&d.grad[0], p)?;
                let gy = eval_at(&d.grad[1], p)?;
                let lap = eval_at(&d.lap, p)?;
                w.push(a * uv);
                b.push([gx / a, gy / a]);
                // div(grad a / a) = (a Δa - |grad a|^2) / a^2
                c.push((a * lap - (gx * gx + gy * gy)) / (a * a));
            }
            Ok(TransformFields {
                v: ScalarField::from_values(&g, w)?,
                b_vec: VectorField::from_components(&g, b)?,
                c: ScalarField::from_values(&g, c)?,
            })
        }
        Phases::Power { a, b } => {
            let s = m.s();
            let da = derivatives(a, dim)?;
            let db = derivatives(b, dim)?;
            let mut w = Vec::with_capacity(g.node_count());
            let mut bv = Vec::with_capacity(g.node_count());
            let mut c = Vec::with_capacity(g.node_count());
            for idx in 0..g.node_count() {
                let p = g.node_point(idx);
                let uv = u.values()[idx];
                let av = eval_at(a, p)?;
                let bvv = eval_at(b, p)?;
                let up_s = uv.max(0.0).powf(s);
                w.push(av * uv + bvv * uv.max(0.0).powf(s + 1.0) / (s + 1.0));
                bv.push([
                    eval_at(&da.grad[0], p)? + up_s * eval_at(&db.grad[0], p)?,
                    eval_at(&da.grad[1], p)? + up_s * eval_at(&db.grad[1], p)?,
                ]);
                c.push(eval_at(&da.lap, p)? + up_s / (s + 1.0) * eval_at(&db.lap, p)?);
            }
            Ok(TransformFields {
                v: ScalarField::from_values(&g, w)?,
                b_vec: VectorField::from_components(&g, bv)?,
                c: ScalarField::from_values(&g, c)?,
            })
        }
    }
}

/// Scalar transform `φ(u; s) = a u + b (u^+)^{s+1}/(s+1)` for `s > 0`.
/// Strictly increasing with `φ' >= a`.
pub fn phi_s(u: f64, a: f64, b: f64, s: f64) -> f64 {
    assert!(a > 0.0 && b >= 0.0 && s > 0.0, "phi_s needs a > 0, b >= 0, s > 0");
    a * u + b * u.max(0.0).powf(s + 1.0) / (s + 1.0)
}

/// Inverse of [`phi_s`], safeguarded Newton to `|φ(u) - v| <= 1e-13 max(1,|v|)`.
/// The negative branch is exactly `v / a`.
pub fn phi_s_inverse(v: f64, a: f64, b: f64, s: f64) -> f64 {
    assert!(a > 0.0 && b >= 0.0 && s > 0.0, "phi_s_inverse needs a > 0, b >= 0, s > 0");
    if v <= 0.0 {
        return v / a;
    }
    let tol = 1e-13 * v.abs().max(1.0);
    // phi is increasing with phi(0) = 0 and phi(v/a) >= v, so [0, v/a]
    // brackets the root; Newton steps are projected into the bracket.
    let mut lo = 0.0_f64;
    let mut hi = v / a;
    let mut x = hi;
    for _ in 0..200 {
        let fx = phi_s(x, a, b, s) - v;
        if fx.abs() <= tol {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dfx = a + b * x.max(0.0).powf(s);
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    x
}

/// Piecewise-linear analogue of [`phi_s`] for the jump regime:
/// `φ(u) = a_+ u^+ - a_- u^-`.
pub fn phi_jump(u: f64, a_plus: f64, a_minus: f64) -> f64 {
    if u > 0.0 {
        a_plus * u
    } else {
        a_minus * u
    }
}

/// Inverse of [`phi_jump`].
pub fn phi_jump_inverse(v: f64, a_plus: f64, a_minus: f64) -> f64 {
    if v > 0.0 {
        v / a_plus
    } else {
        v / a_minus
    }
}
