//! Pointwise diagnostics of nodal behavior: vanishing-order estimation,
//! harmonic-polynomial approximation, tangent-space dimension at degenerate
//! points, and the Almgren frequency machinery
//!
//! ```text
//! H(r) = ∫_{∂B_r} w²,   I(r) = ∫_{B_r} (|∇w|² + w b·∇u + c w u),
//! N(r) = r I(r) / H(r),
//! ```
//!
//! together with the doubling ratios `H(2r)/H(r)`. On a homogeneous harmonic
//! polynomial of degree `d` with zero lower-order fields, `N ≡ d` and the
//! doubling ratio is `2^(n-1+2d)`, which the test suite uses as closed-form
//! ground truth.
//!
//! Suprema over balls are taken on a 4x supersampled lattice of the bilinear
//! interpolant; grid-node maxima alone underestimate sups near the center
//! where small balls contain few nodes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{circle_integral, disk_integral, GridError, Point, ScalarField, VectorField};
use crate::nodal::PointClass;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Field(#[from] GridError),
    #[error("need at least 4 levels, got {0}")]
    TooFewLevels(usize),
    #[error("smallest radius {r_min} is below the floor {floor} (= 2h)")]
    RadiiTooSmall { r_min: f64, floor: f64 },
    #[error("harmonic fit degree must be 1..=4, got {0}")]
    BadDegree(usize),
    #[error("field vanishes identically on the sampled balls")]
    DegenerateData,
    #[error("polynomial has zero leading part")]
    ZeroPolynomial,
    #[error("H({r}) = {h:.3e} is below the degeneracy floor")]
    DegenerateH { r: f64, h: f64 },
}

/// Supremum of `|u|` over `B_r(z)` on a lattice with step `h/4`.
pub fn ball_sup_abs(u: &ScalarField, z: Point, r: f64) -> Result<f64, GridError> {
    let g = u.spec();
    if !g.contains_ball(z, r) {
        return Err(GridError::OutOfBounds(z[0], z[1]));
    }
    let r2 = r * r;
    let mut sup = 0.0_f64;
    if g.dim() == 1 {
        let step = g.spacing(0) / 4.0;
        let m = (2.0 * r / step).ceil() as usize;
        for k in 0..=m {
            let x = (z[0] - r + k as f64 * step).min(z[0] + r);
            sup = sup.max(u.interpolate([x, 0.0])?.abs());
        }
        return Ok(sup);
    }
    let sx = g.spacing(0) / 4.0;
    let sy = g.spacing(1) / 4.0;
    let my = (2.0 * r / sy).ceil() as usize;
    for j in 0..=my {
        let y = (z[1] - r + j as f64 * sy).min(z[1] + r);
        let dy2 = (y - z[1]).powi(2);
        if dy2 > r2 {
            continue;
        }
        let half = (r2 - dy2).sqrt();
        let mx = (2.0 * half / sx).ceil() as usize;
        for i in 0..=mx {
            let x = (z[0] - half + i as f64 * sx).min(z[0] + half);
            sup = sup.max(u.interpolate([x, y])?.abs());
        }
    }
    Ok(sup)
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Empirical vanishing order at `z`: sup norms over the dyadic balls
/// `B_{r_max 2^{-j}}(z)` and the least-squares slope of `log sup` vs `log r`.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub z: Point,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    pub d_hat: f64,
    pub amplitude: f64,
    pub nearest_integer_gap: f64,
}

pub fn vanishing_order(
    u: &ScalarField,
    z: Point,
    r_max: f64,
    levels: usize,
) -> Result<OrderEstimate, AnalysisError> {
    if levels < 4 {
        return Err(AnalysisError::TooFewLevels(levels));
    }
    let floor = 2.0 * u.spec().max_spacing();
    let r_min = r_max * 0.5_f64.powi(levels as i32 - 1);
    if r_min < floor {
        return Err(AnalysisError::RadiiTooSmall { r_min, floor });
    }
    let mut radii = Vec::with_capacity(levels);
    let mut sups = Vec::with_capacity(levels);
    for j in 0..levels {
        let r = r_max * 0.5_f64.powi(j as i32);
        radii.push(r);
        sups.push(ball_sup_abs(u, z, r)?);
    }
    if sups.iter().any(|&s| s <= 0.0) {
        return Err(AnalysisError::DegenerateData);
    }
    let logs_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let logs_s: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let (d_hat, intercept) = fit_line(&logs_r, &logs_s);
    Ok(OrderEstimate {
        z,
        radii,
        sups,
        d_hat,
        amplitude: intercept.exp(),
        nearest_integer_gap: (d_hat - d_hat.round()).abs(),
    })
}

/// Order-based classification of a nodal point. An estimate close to an
/// integer `>= 2` is degenerate; a large gap signals numerics, not
/// mathematics, since proven vanishing orders are integers.
pub fn classify(est: &OrderEstimate) -> PointClass {
    if est.d_hat < 1.5 {
        PointClass::Nondegenerate
    } else if est.nearest_integer_gap <= 0.25 {
        PointClass::Degenerate(est.d_hat.round() as u32)
    } else {
        PointClass::Unresolved
    }
}

/// Least-squares fit of a field against the 2-d harmonic basis
/// `{1, Re ζ, Im ζ, ..., Re ζ^d, Im ζ^d}` translated to `z` (`ζ = (x-z_x) +
/// i (y-z_y)`), which keeps the fitted polynomial exactly harmonic.
#[derive(Debug, Clone)]
pub struct PolyFit {
    pub z: Point,
    pub degree: usize,
    /// Constant term (zero when pinned).
    pub constant: f64,
    /// `(Re, Im)` coefficient pair per degree `1..=degree`.
    pub coeffs: Vec<[f64; 2]>,
    pub pinned: bool,
    /// Condition number of the (scaled) normal equations of the main fit.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// Per-scale best-approximation errors: at each halving radius the basis
    /// is refit and the sup residual over that ball recorded.
    pub residual_profile: Vec<(f64, f64)>,
    /// Least-squares slope of `log residual` vs `log r`; infinite when the
    /// input is harmonic to machine precision.
    pub decay_exponent: f64,
}

impl PolyFit {
    pub fn evaluate(&self, p: Point) -> f64 {
        let (dx, dy) = (p[0] - self.z[0], p[1] - self.z[1]);
        let mut re = 1.0;
        let mut im = 0.0;
        let mut acc = self.constant;
        for c in &self.coeffs {
            let nre = re * dx - im * dy;
            let nim = re * dy + im * dx;
            re = nre;
            im = nim;
            acc += c[0] * re + c[1] * im;
        }
        acc
    }

    /// Leading (degree-`d`) coefficient pair.
    pub fn leading(&self) -> [f64; 2] {
        self.coeffs[self.degree - 1]
    }
}

struct BasisFit {
    constant: f64,
    coeffs: Vec<[f64; 2]>,
    condition: f64,
}

fn fit_at_radius(
    v: &ScalarField,
    z: Point,
    degree: usize,
    r: f64,
    pin_constant: bool,
) -> Result<BasisFit, AnalysisError> {
    let g = v.spec();
    let hx = g.spacing(0);
    let hy = g.spacing(1);
    let (lx, _) = g.bounds(0);
    let (ly, _) = g.bounds(1);
    let i_min = (((z[0] - r - lx) / hx).floor().max(0.0)) as usize;
    let i_max = ((((z[0] + r - lx) / hx).ceil()) as usize).min(g.n(0) - 1);
    let j_min = (((z[1] - r - ly) / hy).floor().max(0.0)) as usize;
    let j_max = ((((z[1] + r - ly) / hy).ceil()) as usize).min(g.n(1) - 1);
    let ncols = 2 * degree + usize::from(!pin_constant);
    let mut rows: Vec<f64> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let r2 = r * r;
    for j in j_min..=j_max {
        for i in i_min..=i_max {
            let p = [g.coord(0, i), g.coord(1, j)];
            let dx = p[0] - z[0];
            let dy = p[1] - z[1];
            if dx * dx + dy * dy > r2 {
                continue;
            }
            if !pin_constant {
                rows.push(1.0);
            }
            // Columns are scaled by r^-k so the normal equations stay
            // balanced across degrees.
            let mut re = 1.0;
            let mut im = 0.0;
            for _ in 0..degree {
                let nre = (re * dx - im * dy) / r;
                let nim = (re * dy + im * dx) / r;
                re = nre;
                im = nim;
                rows.push(re);
                rows.push(im);
            }
            vals.push(v.value(i, j));
        }
    }
    let nrows = vals.len();
    if nrows < ncols {
        return Err(AnalysisError::DegenerateData);
    }
    let design = DMatrix::from_row_slice(nrows, ncols, &rows);
    let rhs = DVector::from_vec(vals);
    let gram = design.transpose() * &design;
    let grhs = design.transpose() * rhs;
    let eig = gram.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lam_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if lam_min > 0.0 { lam_max / lam_min } else { f64::INFINITY };
    // Pseudo-inverse through the eigenbasis keeps ill-conditioned fits
    // usable; modes at rounding level are dropped rather than amplified.
    let floor = lam_max * 1e-14;
    let mut coeff_scaled = DVector::zeros(ncols);
    let proj = eig.eigenvectors.transpose() * grhs;
    for k in 0..ncols {
        if eig.eigenvalues[k] > floor {
            coeff_scaled += eig.eigenvectors.column(k) * (proj[k] / eig.eigenvalues[k]);
        }
    }
    let mut it = 0usize;
    let constant = if pin_constant {
        0.0
    } else {
        it = 1;
        coeff_scaled[0]
    };
    let mut coeffs = Vec::with_capacity(degree);
    for k in 1..=degree {
        let scale = r.powi(k as i32);
        coeffs.push([coeff_scaled[it] / scale, coeff_scaled[it + 1] / scale]);
        it += 2;
    }
    Ok(BasisFit { constant, coeffs, condition })
}

// Residuals are compared at grid nodes, where the field carries no
// interpolation error; the fit balls are several cells wide so nodes sample
// them densely enough.
fn sup_residual(v: &ScalarField, fit: &PolyFit, r: f64) -> f64 {
    let g = v.spec();
    let z = fit.z;
    let r2 = r * r;
    let hx = g.spacing(0);
    let hy = g.spacing(1);
    let (lx, _) = g.bounds(0);
    let (ly, _) = g.bounds(1);
    let i_min = (((z[0] - r - lx) / hx).floor().max(0.0)) as usize;
    let i_max = ((((z[0] + r - lx) / hx).ceil()) as usize).min(g.n(0) - 1);
    let j_min = (((z[1] - r - ly) / hy).floor().max(0.0)) as usize;
    let j_max = ((((z[1] + r - ly) / hy).ceil()) as usize).min(g.n(1) - 1);
    let mut sup = 0.0_f64;
    for j in j_min..=j_max {
        for i in i_min..=i_max {
            let p = [g.coord(0, i), g.coord(1, j)];
            if (p[0] - z[0]).powi(2) + (p[1] - z[1]).powi(2) > r2 {
                continue;
            }
            sup = sup.max((v.value(i, j) - fit.evaluate(p)).abs());
        }
    }
    sup
}

/// Harmonic-basis least squares over `B_{r_fit}(z)` with degree `d <= 4`.
///
/// `pin_constant` forces `P(z) = 0` and should be set when `z` lies on the
/// nodal set. The residual profile refits at each halving radius (down to
/// `max(3h, r_fit/16)`) so it measures the best degree-`d` harmonic
/// approximation error at that scale.
pub fn harmonic_fit(
    v: &ScalarField,
    z: Point,
    d: usize,
    r_fit: f64,
    pin_constant: bool,
) -> Result<PolyFit, AnalysisError> {
    if d == 0 || d > 4 {
        return Err(AnalysisError::BadDegree(d));
    }
    let g = v.spec();
    if !g.contains_ball(z, r_fit) {
        return Err(AnalysisError::Field(GridError::OutOfBounds(z[0], z[1])));
    }
    let h = g.max_spacing();
    if r_fit < 2.0 * h {
        return Err(AnalysisError::RadiiTooSmall { r_min: r_fit, floor: 2.0 * h });
    }
    let main = fit_at_radius(v, z, d, r_fit, pin_constant)?;
    let mut fit = PolyFit {
        z,
        degree: d,
        constant: main.constant,
        coeffs: main.coeffs,
        pinned: pin_constant,
        condition: main.condition,
        ill_conditioned: main.condition > 1e12,
        residual_profile: Vec::new(),
        decay_exponent: f64::INFINITY,
    };
    let r_floor = (3.0 * h).max(r_fit / 16.0);
    let mut r = r_fit;
    let mut scratch = fit.clone();
    while r >= r_floor && fit.residual_profile.len() < 6 {
        let local = fit_at_radius(v, z, d, r, pin_constant)?;
        scratch.constant = local.constant;
        scratch.coeffs = local.coeffs;
        fit.residual_profile.push((r, sup_residual(v, &scratch, r)));
        r *= 0.5;
    }
    let noise = 1e-13 * v.sup_norm().max(1.0);
    if fit.residual_profile.iter().any(|&(_, e)| e > noise) {
        let xs: Vec<f64> = fit.residual_profile.iter().map(|&(r, _)| r.ln()).collect();
        let ys: Vec<f64> =
            fit.residual_profile.iter().map(|&(_, e)| e.max(1e-300).ln()).collect();
        fit.decay_exponent = fit_line(&xs, &ys).0;
    }
    Ok(fit)
}

/// Dimension of the invariant subspace of the leading homogeneous part: `1`
/// for a nontrivial degree-1 polynomial (its zero line), `0` for any
/// nontrivial homogeneous harmonic of degree `>= 2` in the plane.
pub fn tangent_dim(p: &PolyFit) -> Result<usize, AnalysisError> {
    let lead = p.leading();
    let lead_norm = (lead[0] * lead[0] + lead[1] * lead[1]).sqrt();
    let scale = p
        .coeffs
        .iter()
        .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
        .fold(p.constant.abs(), f64::max)
        .max(1e-30);
    if lead_norm <= 1e-12 * scale {
        return Err(AnalysisError::ZeroPolynomial);
    }
    Ok(if p.degree == 1 { 1 } else { 0 })
}

/// Precomputed integrand fields for the frequency quadratures: `w²` for
/// `H` and `|∇w|² + w b·∇u + c w u` for `I`.
#[derive(Debug, Clone)]
pub struct FrequencyFields {
    w_sq: ScalarField,
    energy: ScalarField,
}

impl FrequencyFields {
    /// Zero lower-order fields: `I` integrates `|∇w|²` alone.
    pub fn new(w: &ScalarField) -> Self {
        let grad = w.gradient();
        FrequencyFields {
            w_sq: w.map(|v| v * v).expect("finite"),
            energy: grad.norm_sq_field(),
        }
    }

    /// Full integrand with the transform's lower-order fields. For the jump
    /// regime the transformed equation reads `Δw = b·∇w + c w`, so callers
    /// pass `u = w` there; the power regime passes the original solution.
    pub fn with_lower_order(
        w: &ScalarField,
        u: &ScalarField,
        b: &VectorField,
        c: &ScalarField,
    ) -> Self {
        let grad_w = w.gradient();
        let grad_u = u.gradient();
        let n = w.spec().node_count();
        let mut energy = Vec::with_capacity(n);
        for idx in 0..n {
            let gw = grad_w.at(idx);
            let gu = grad_u.at(idx);
            let bv = b.at(idx);
            let wv = w.values()[idx];
            let uv = u.values()[idx];
            energy.push(
                gw[0] * gw[0] + gw[1] * gw[1]
                    + wv * (bv[0] * gu[0] + bv[1] * gu[1])
                    + c.values()[idx] * wv * uv,
            );
        }
        FrequencyFields {
            w_sq: w.map(|v| v * v).expect("finite"),
            energy: ScalarField::from_values(w.spec(), energy).expect("finite"),
        }
    }

    pub fn boundary_energy(&self, z: Point, r: f64) -> Result<f64, GridError> {
        circle_integral(&self.w_sq, z, r)
    }
}

/// One Almgren triple `(H, I, N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyTriple {
    pub h: f64,
    pub i: f64,
    pub n: f64,
}

const H_FLOOR: f64 = 1e-14;

/// `H`, `I` and `N = r I / H` at a single radius.
pub fn frequency(
    fields: &FrequencyFields,
    z: Point,
    r: f64,
) -> Result<FrequencyTriple, AnalysisError> {
    let h = circle_integral(&fields.w_sq, z, r)?;
    if h <= H_FLOOR {
        return Err(AnalysisError::DegenerateH { r, h });
    }
    let i = disk_integral(&fields.energy, z, r)?;
    Ok(FrequencyTriple { h, i, n: r * i / h })
}

/// Per-radius frequency data; `n` and `doubling` are absent where the
/// degeneracy floor or the domain boundary interferes.
#[derive(Debug, Clone)]
pub struct FrequencyRow {
    pub r: f64,
    pub h: f64,
    pub i: f64,
    pub n: Option<f64>,
    pub doubling: Option<f64>,
    pub degenerate: bool,
}

/// Frequency profile over a strictly increasing radius list. Radii that fail
/// their quadrature preconditions are recorded in `skipped`; the profile
/// itself never aborts.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    pub center: Point,
    pub rows: Vec<FrequencyRow>,
    pub skipped: Vec<(f64, String)>,
}

impl FrequencyProfile {
    pub fn max_n(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.n).fold(None, |m, v| {
            Some(match m {
                Some(m) => m.max(v),
                None => v,
            })
        })
    }

    pub fn n_at(&self, r: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| (row.r - r).abs() <= 1e-12 * r.max(1.0))
            .and_then(|row| row.n)
    }

    pub fn any_degenerate(&self) -> bool {
        self.rows.iter().any(|r| r.degenerate)
    }
}

pub fn frequency_profile(fields: &FrequencyFields, z: Point, radii: &[f64]) -> FrequencyProfile {
    debug_assert!(radii.windows(2).all(|w| w[0] < w[1]), "radii must be increasing");
    let results: Vec<(f64, Result<FrequencyRow, String>)> = radii
        .par_iter()
        .map(|&r| {
            let row = (|| {
                let h = circle_integral(&fields.w_sq, z, r).map_err(|e| e.to_string())?;
                let degenerate = h <= H_FLOOR;
                let i = disk_integral(&fields.energy, z, r).map_err(|e| e.to_string())?;
                let n = if degenerate { None } else { Some(r * i / h) };
                let doubling = match circle_integral(&fields.w_sq, z, 2.0 * r) {
                    Ok(h2) if !degenerate => Some(h2 / h),
                    _ => None,
                };
                Ok(FrequencyRow { r, h, i, n, doubling, degenerate })
            })();
            (r, row)
        })
        .collect();
    let mut profile = FrequencyProfile { center: z, rows: Vec::new(), skipped: Vec::new() };
    for (r, row) in results {
        match row {
            Ok(row) => profile.rows.push(row),
            Err(msg) => profile.skipped.push((r, msg)),
        }
    }
    profile
}
