//! The broken conductivity `A_s(x, u)` and its structure audit.
//!
//! Two regimes are supported:
//!
//! * `s = 0` (jump): `A(x,u) = a_+(x) H(u) + a_-(x) (1 - H(u))` with the
//!   convention `H(0) = 0`, so the nodal set itself takes the minus-phase
//!   coefficient. Weak solutions do not see this measure-zero choice; the
//!   discrete solver needs one.
//! * `s > 0` (power): `A_s(x,u) = a(x) + b(x) (u^+)^s`.
//!
//! The ellipticity bounds `λ <= a_±, a, b <= 1/λ`, the bound `|f| <= 1/λ`
//! and the declared Hölder data `(ω₀, α)` are audited by
//! [`CoefficientModel::check_structure`], never enforced at construction:
//! experiments deliberately probing marginal coefficients need a report,
//! not a gate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::grid::{dist, GridSpec, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("exponent s must be >= 0, got {0}")]
    BadExponent(f64),
    #[error("lambda must lie in (0, 1), got {0}")]
    BadLambda(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("omega0 must be positive, got {0}")]
    BadOmega(f64),
}

/// Phase data of the conductivity: either the two jump phases or the
/// power-law pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Phases {
    /// `s = 0`: the plus/minus conductivities `a_+`, `a_-`.
    Jump { a_plus: Expr, a_minus: Expr },
    /// `s > 0`: the base `a` and the break amplitude `b`.
    Power { a: Expr, b: Expr },
}

/// The coefficient `A_s(x,u)` together with its declared structure data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    s: f64,
    phases: Phases,
    f: [Expr; 2],
    lambda: f64,
    alpha: f64,
    omega0: f64,
}

impl CoefficientModel {
    /// Jump model (`s = 0`).
    pub fn jump(
        a_plus: Expr,
        a_minus: Expr,
        f: [Expr; 2],
        lambda: f64,
        alpha: f64,
        omega0: f64,
    ) -> Result<Self, ModelError> {
        validate(lambda, alpha, omega0)?;
        Ok(CoefficientModel {
            s: 0.0,
            phases: Phases::Jump { a_plus, a_minus },
            f,
            lambda,
            alpha,
            omega0,
        })
    }

    /// Power model (`s > 0`).
    pub fn power(
        s: f64,
        a: Expr,
        b: Expr,
        f: [Expr; 2],
        lambda: f64,
        alpha: f64,
        omega0: f64,
    ) -> Result<Self, ModelError> {
        if !s.is_finite() || s <= 0.0 {
            return Err(ModelError::BadExponent(s));
        }
        validate(lambda, alpha, omega0)?;
        Ok(CoefficientModel { s, phases: Phases::Power { a, b }, f, lambda, alpha, omega0 })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_jump(&self) -> bool {
        self.s == 0.0
    }

    pub fn phases(&self) -> &Phases {
        &self.phases
    }

    pub fn f(&self) -> &[Expr; 2] {
        &self.f
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// `A_s(x, u)`. With `s = 0` the value `u = 0` maps to the minus phase.
    pub fn evaluate_a(&self, p: Point, u: f64) -> Result<f64, EvalError> {
        match &self.phases {
            Phases::Jump { a_plus, a_minus } => {
                if u > 0.0 {
                    a_plus.evaluate(p[0], p[1])
                } else {
                    a_minus.evaluate(p[0], p[1])
                }
            }
            Phases::Power { a, b } => {
                let av = a.evaluate(p[0], p[1])?;
                let bv = b.evaluate(p[0], p[1])?;
                Ok(av + bv * u.max(0.0).powf(self.s))
            }
        }
    }

    /// Audits the ellipticity bounds and the declared Hölder data on `g`.
    ///
    /// Violations show up as report flags, never as errors. The Hölder
    /// quotient is the max of `|e(x) - e(y)| / |x - y|^α` over 500 random
    /// node pairs per coefficient; the declared `ω₀` is flagged when it is
    /// exceeded by more than 5%.
    pub fn check_structure(&self, g: &GridSpec, seed: u64) -> Result<StructureReport, EvalError> {
        let coeffs: Vec<(&'static str, &Expr)> = match &self.phases {
            Phases::Jump { a_plus, a_minus } => vec![("a_plus", a_plus), ("a_minus", a_minus)],
            Phases::Power { a, b } => vec![("a", a), ("b", b)],
        };
        let mut ranges = Vec::new();
        let mut sampled = Vec::new();
        for (name, e) in &coeffs {
            let mut values = Vec::with_capacity(g.node_count());
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for idx in 0..g.node_count() {
                let p = g.node_point(idx);
                let v = e.evaluate(p[0], p[1])?;
                min = min.min(v);
                max = max.max(v);
                values.push(v);
            }
            ranges.push(CoefficientRange { name, min, max });
            sampled.push(values);
        }
        let mut f_max = 0.0_f64;
        for idx in 0..g.node_count() {
            let p = g.node_point(idx);
            let fx = self.f[0].evaluate(p[0], p[1])?;
            let fy = self.f[1].evaluate(p[0], p[1])?;
            f_max = f_max.max((fx * fx + fy * fy).sqrt());
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut holder_quotient = 0.0_f64;
        let node_count = g.node_count();
        for _ in 0..500 {
            let i = rng.gen_range(0..node_count);
            let j = rng.gen_range(0..node_count);
            if i == j {
                continue;
            }
            let p = g.node_point(i);
            let q = g.node_point(j);
            let d = dist(p, q);
            if d == 0.0 {
                continue;
            }
            let denom = d.powf(self.alpha);
            for values in &sampled {
                holder_quotient = holder_quotient.max((values[i] - values[j]).abs() / denom);
            }
        }

        let slack = 1e-12;
        let upper = 1.0 / self.lambda;
        let lambda_bounds_ok = ranges
            .iter()
            .all(|r| r.min >= self.lambda - slack && r.max <= upper + slack);
        let f_bound_ok = f_max <= upper + slack;
        let holder_ok = holder_quotient <= 1.05 * self.omega0;
        Ok(StructureReport {
            coefficient_ranges: ranges,
            f_max,
            holder_quotient,
            lambda_bounds_ok,
            f_bound_ok,
            holder_ok,
        })
    }
}

fn validate(lambda: f64, alpha: f64, omega0: f64) -> Result<(), ModelError> {
    if lambda.is_nan() || lambda <= 0.0 || lambda >= 1.0 {
        return Err(ModelError::BadLambda(lambda));
    }
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(ModelError::BadAlpha(alpha));
    }
    if omega0.is_nan() || omega0 <= 0.0 {
        return Err(ModelError::BadOmega(omega0));
    }
    Ok(())
}

/// Observed node-wise range of one coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

/// Outcome of [`CoefficientModel::check_structure`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub coefficient_ranges: Vec<CoefficientRange>,
    pub f_max: f64,
    pub holder_quotient: f64,
    pub lambda_bounds_ok: bool,
    pub f_bound_ok: bool,
    pub holder_ok: bool,
}

impl StructureReport {
    pub fn pass(&self) -> bool {
        self.lambda_bounds_ok && self.f_bound_ok && self.holder_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn e(text: &str) -> Expr {
        Expr::parse(text).unwrap()
    }

    fn zero_f() -> [Expr; 2] {
        [e("0"), e("0")]
    }

    pub(crate) fn two_one(lambda: f64) -> CoefficientModel {
        CoefficientModel::jump(e("2"), e("1"), [e("0"), e("0")], lambda, 0.5, 0.3).unwrap()
    }

    #[test]
    fn jump_picks_phase_with_h0_convention() {
        let m = two_one(0.4);
        assert_eq!(m.evaluate_a([0.0, 0.0], 0.5).unwrap(), 2.0);
        assert_eq!(m.evaluate_a([0.0, 0.0], 0.0).unwrap(), 1.0);
        assert_eq!(m.evaluate_a([0.0, 0.0], -0.3).unwrap(), 1.0);
    }

    #[test]
    fn power_model_value() {
        let m =
            CoefficientModel::power(1.0, e("1"), e("1"), zero_f(), 0.4, 0.5, 0.3).unwrap();
        assert_eq!(m.evaluate_a([0.0, 0.0], 0.5).unwrap(), 1.5);
        assert_eq!(m.evaluate_a([0.0, 0.0], -0.5).unwrap(), 1.0);
    }

    #[test]
    fn structure_pass_for_constant_phases() {
        let g = GridSpec::square(-1.0, 1.0, 17).unwrap();
        let rep = two_one(0.4).check_structure(&g, 42).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert_eq!(rep.coefficient_ranges[0].min, 2.0);
        assert_eq!(rep.coefficient_ranges[1].max, 1.0);
    }

    #[test]
    fn structure_flags_upper_bound_violation() {
        let g = GridSpec::square(-1.0, 1.0, 17).unwrap();
        let m = CoefficientModel::jump(e("3"), e("1"), zero_f(), 0.4, 0.5, 0.3).unwrap();
        let rep = m.check_structure(&g, 42).unwrap();
        assert!(!rep.lambda_bounds_ok);
        assert!(!rep.pass());
    }

    #[test]
    fn structure_holder_sweep_accepts_sqrt_profile() {
        // 0.25 |x|^(1/2) has Hölder-1/2 seminorm 0.25 <= declared 0.3.
        let g = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let m = CoefficientModel::jump(
            e("1 + 0.25*((x^2+y^2)^0.5)^0.5"),
            e("1"),
            zero_f(),
            0.4,
            0.5,
            0.3,
        )
        .unwrap();
        let rep = m.check_structure(&g, 42).unwrap();
        assert!(rep.holder_ok, "quotient {}", rep.holder_quotient);
        assert!(rep.holder_quotient <= 0.3);
        assert!(rep.pass());
    }

    #[test]
    fn structure_flags_understated_omega() {
        let g = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let m = CoefficientModel::jump(
            e("1 + 0.25*((x^2+y^2)^0.5)^0.5"),
            e("1"),
            zero_f(),
            0.4,
            0.5,
            0.05,
        )
        .unwrap();
        let rep = m.check_structure(&g, 42).unwrap();
        assert!(!rep.holder_ok);
    }

    proptest::proptest! {
        // A_s is nondecreasing in u when b >= 0, and stays in [lambda, 2/lambda]
        // for admissible models with |u| <= 1.
        #[test]
        fn monotone_and_bounded(u1 in -1.0f64..1.0, u2 in -1.0f64..1.0, s in 0.25f64..3.0) {
            let m = CoefficientModel::power(
                s,
                Expr::parse("1").unwrap(),
                Expr::parse("1").unwrap(),
                [Expr::parse("0").unwrap(), Expr::parse("0").unwrap()],
                0.5,
                0.5,
                0.3,
            ).unwrap();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            let alo = m.evaluate_a([0.0, 0.0], lo).unwrap();
            let ahi = m.evaluate_a([0.0, 0.0], hi).unwrap();
            proptest::prop_assert!(alo <= ahi + 1e-15);
            proptest::prop_assert!(alo >= 0.5 && ahi <= 4.0);
        }

        #[test]
        fn jump_is_piecewise_constant(u in -1.0f64..1.0) {
            let m = two_one(0.4);
            let v = m.evaluate_a([0.3, -0.2], u).unwrap();
            proptest::prop_assert_eq!(v, if u > 0.0 { 2.0 } else { 1.0 });
        }
    }
}
