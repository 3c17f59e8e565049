//! Extraction and measurement of the nodal set `Γ(u) = {u = 0}`.
//!
//! Marching squares walks every grid cell and emits polyline segments whose
//! endpoints are linear roots on cell edges; the ambiguous saddle case
//! (alternating corner signs) is resolved with the sign of the cell-center
//! value, consistent with the bilinear model of the field. Exact nodal zeros
//! count as the minus side, matching the `H(0) = 0` coefficient convention.
//!
//! Unit normals at nondegenerate points come from a weighted affine fit of
//! the frozen transform `φ_z(u)` with the constant term pinned to zero --
//! this mirrors the definition of the normal through the approximating
//! degree-one polynomial and is robust to the gradient jump across the
//! interface, unlike one-sided limits of `∇u`.

use thiserror::Error;

use crate::grid::{dist, Point, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodalError {
    #[error("fit ball of radius {r} around ({0}, {1}) leaves the grid", z[0], z[1])]
    OutOfBounds { z: Point, r: f64 },
    #[error("degenerate gradient |∇P| = {magnitude:.3e} at ({0}, {1})", z[0], z[1])]
    DegenerateGradient { z: Point, magnitude: f64 },
}

/// Classification of a nodal point by its estimated vanishing order
/// (filled in by the order-estimation pass).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Nondegenerate,
    Degenerate(u32),
    Unresolved,
}

/// Straight segment of the extracted nodal polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }

    /// Length of the part of the segment inside the closed disk `B_r(c)`.
    pub fn length_in_disk(&self, c: Point, r: f64) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let m = [self.a[0] - c[0], self.a[1] - c[1]];
        let aa = d[0] * d[0] + d[1] * d[1];
        if aa == 0.0 {
            return 0.0;
        }
        let bb = 2.0 * (d[0] * m[0] + d[1] * m[1]);
        let cc = m[0] * m[0] + m[1] * m[1] - r * r;
        let disc = bb * bb - 4.0 * aa * cc;
        if disc <= 0.0 {
            return 0.0;
        }
        let sq = disc.sqrt();
        let t0 = ((-bb - sq) / (2.0 * aa)).max(0.0);
        let t1 = ((-bb + sq) / (2.0 * aa)).min(1.0);
        if t1 > t0 {
            (t1 - t0) * aa.sqrt()
        } else {
            0.0
        }
    }
}

/// The extracted nodal set: segments, deduplicated endpoints, and a parallel
/// per-point classification slot.
#[derive(Debug, Clone, Default)]
pub struct NodalSet {
    pub segments: Vec<Segment>,
    pub sample_points: Vec<Point>,
    pub classes: Vec<Option<PointClass>>,
}

impl NodalSet {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.sample_points.is_empty()
    }

    pub fn set_class(&mut self, point_idx: usize, class: PointClass) {
        self.classes[point_idx] = Some(class);
    }
}

/// Positive side of the break: strictly positive values; zeros are minus side.
#[inline]
fn pos(v: f64) -> bool {
    v > 0.0
}

/// Linear root on an edge whose endpoint values straddle the sign classes.
#[inline]
fn cross(pa: Point, va: f64, pb: Point, vb: f64) -> Point {
    let t = if va == vb { 0.5 } else { va / (va - vb) };
    let t = t.clamp(0.0, 1.0);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

/// Extracts `Γ(u)` with marching squares; the 1-d variant returns the
/// sign-change points with no segments.
pub fn extract_nodal(u: &ScalarField) -> NodalSet {
    let g = u.spec();
    let mut set = NodalSet::default();
    let mut seen = std::collections::BTreeSet::new();
    let mut push_point = |set: &mut NodalSet, p: Point| {
        if seen.insert((p[0].to_bits(), p[1].to_bits())) {
            set.sample_points.push(p);
            set.classes.push(None);
        }
    };
    if g.dim() == 1 {
        for i in 0..g.n(0) - 1 {
            let (va, vb) = (u.values()[i], u.values()[i + 1]);
            if pos(va) != pos(vb) {
                let pa = [g.coord(0, i), 0.0];
                let pb = [g.coord(0, i + 1), 0.0];
                push_point(&mut set, cross(pa, va, pb, vb));
            }
        }
        return set;
    }
    let min_len = 1e-12 * g.max_spacing();
    for j in 0..g.n(1) - 1 {
        for i in 0..g.n(0) - 1 {
            let p00 = [g.coord(0, i), g.coord(1, j)];
            let p10 = [g.coord(0, i + 1), g.coord(1, j)];
            let p01 = [g.coord(0, i), g.coord(1, j + 1)];
            let p11 = [g.coord(0, i + 1), g.coord(1, j + 1)];
            let v00 = u.value(i, j);
            let v10 = u.value(i + 1, j);
            let v01 = u.value(i, j + 1);
            let v11 = u.value(i + 1, j + 1);
            let code = (pos(v00) as u8)
                | (pos(v10) as u8) << 1
                | (pos(v11) as u8) << 2
                | (pos(v01) as u8) << 3;
            if code == 0 || code == 0b1111 {
                continue;
            }
            // Edge crossings: bottom, right, top, left.
            let eb = (pos(v00) != pos(v10)).then(|| cross(p00, v00, p10, v10));
            let er = (pos(v10) != pos(v11)).then(|| cross(p10, v10, p11, v11));
            let et = (pos(v01) != pos(v11)).then(|| cross(p01, v01, p11, v11));
            let el = (pos(v00) != pos(v01)).then(|| cross(p00, v00, p01, v01));
            let mut emit = |a: Option<Point>, b: Option<Point>| {
                if let (Some(a), Some(b)) = (a, b) {
                    if dist(a, b) > min_len {
                        set.segments.push(Segment { a, b });
                        push_point(&mut set, a);
                        push_point(&mut set, b);
                    }
                }
            };
            match code {
                0b0001 | 0b1110 => emit(eb, el),
                0b0010 | 0b1101 => emit(eb, er),
                0b0100 | 0b1011 => emit(er, et),
                0b1000 | 0b0111 => emit(et, el),
                0b0011 | 0b1100 => emit(el, er),
                0b0110 | 0b1001 => emit(eb, et),
                // Saddles: join according to the sign of the center value.
                0b0101 | 0b1010 => {
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    let diag_pos_00 = code == 0b0101; // corners 00 and 11 positive
                    if pos(center) == diag_pos_00 {
                        emit(el, et);
                        emit(eb, er);
                    } else {
                        emit(el, eb);
                        emit(et, er);
                    }
                }
                _ => unreachable!("all mixed codes handled"),
            }
        }
    }
    set
}

/// Sum of segment lengths clipped to `B_radius(center)`.
pub fn nodal_length(ns: &NodalSet, center: Point, radius: f64) -> f64 {
    ns.segments.iter().map(|s| s.length_in_disk(center, radius)).sum()
}

/// Lebesgue measures of `{u > 0}` and `{u < 0}` inside `B_radius(center)`,
/// by 4x4 sub-cell sampling of the bilinear interpolant.
pub fn sign_measures(u: &ScalarField, center: Point, radius: f64) -> (f64, f64) {
    let g = u.spec();
    assert_eq!(g.dim(), 2, "sign measures are two-dimensional");
    let hx = g.spacing(0);
    let hy = g.spacing(1);
    let w = hx * hy / 16.0;
    let r2 = radius * radius;
    let mut pos_measure = 0.0;
    let mut neg_measure = 0.0;
    for j in 0..g.n(1) - 1 {
        let y0 = g.coord(1, j);
        for i in 0..g.n(0) - 1 {
            let x0 = g.coord(0, i);
            // Cell entirely outside the disk?
            let ddx = (center[0] - (x0 + hx).min(center[0].max(x0))).abs();
            let ddy = (center[1] - (y0 + hy).min(center[1].max(y0))).abs();
            if ddx * ddx + ddy * ddy > r2 {
                continue;
            }
            let v00 = u.value(i, j);
            let v10 = u.value(i + 1, j);
            let v01 = u.value(i, j + 1);
            let v11 = u.value(i + 1, j + 1);
            for sj in 0..4 {
                let ty = (sj as f64 + 0.5) / 4.0;
                let sy = y0 + ty * hy;
                for si in 0..4 {
                    let tx = (si as f64 + 0.5) / 4.0;
                    let sx = x0 + tx * hx;
                    let d2 = (sx - center[0]).powi(2) + (sy - center[1]).powi(2);
                    if d2 > r2 {
                        continue;
                    }
                    let v = v00 * (1.0 - tx) * (1.0 - ty)
                        + v10 * tx * (1.0 - ty)
                        + v01 * (1.0 - tx) * ty
                        + v11 * tx * ty;
                    if v > 0.0 {
                        pos_measure += w;
                    } else if v < 0.0 {
                        neg_measure += w;
                    }
                }
            }
        }
    }
    (pos_measure, neg_measure)
}

/// Unit normal sample on `Γ`, pointing into `{v > 0}`, with the fit amplitude
/// `|∇P_z|` as the nondegeneracy proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSample {
    pub z: Point,
    pub nu: [f64; 2],
    pub delta: f64,
}

/// Weighted least-squares affine fit of `v` over `B_{r_fit}(z)` with the
/// constant pinned to zero (`P_z(z) = 0` since `z ∈ Γ`); weights decay
/// linearly, `1 - |x - z| / r_fit`. The caller passes `v = φ_z(u)`.
pub fn normal_at(v: &ScalarField, z: Point, r_fit: f64) -> Result<NormalSample, NodalError> {
    let g = v.spec();
    assert_eq!(g.dim(), 2, "normals are two-dimensional");
    if !g.contains_ball(z, r_fit) {
        return Err(NodalError::OutOfBounds { z, r: r_fit });
    }
    let hx = g.spacing(0);
    let hy = g.spacing(1);
    let (lx, _) = g.bounds(0);
    let (ly, _) = g.bounds(1);
    let i_min = (((z[0] - r_fit - lx) / hx).floor().max(0.0)) as usize;
    let i_max = ((((z[0] + r_fit - lx) / hx).ceil()) as usize).min(g.n(0) - 1);
    let j_min = (((z[1] - r_fit - ly) / hy).floor().max(0.0)) as usize;
    let j_max = ((((z[1] + r_fit - ly) / hy).ceil()) as usize).min(g.n(1) - 1);
    let (mut sxx, mut sxy, mut syy) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut bx, mut by) = (0.0_f64, 0.0_f64);
    for j in j_min..=j_max {
        for i in i_min..=i_max {
            let p = [g.coord(0, i), g.coord(1, j)];
            let d = dist(p, z);
            if d >= r_fit {
                continue;
            }
            let w = 1.0 - d / r_fit;
            let dx = p[0] - z[0];
            let dy = p[1] - z[1];
            let val = v.value(i, j);
            sxx += w * dx * dx;
            sxy += w * dx * dy;
            syy += w * dy * dy;
            bx += w * dx * val;
            by += w * dy * val;
        }
    }
    let det = sxx * syy - sxy * sxy;
    if det <= 0.0 {
        return Err(NodalError::DegenerateGradient { z, magnitude: 0.0 });
    }
    let gx = (syy * bx - sxy * by) / det;
    let gy = (sxx * by - sxy * bx) / det;
    let magnitude = (gx * gx + gy * gy).sqrt();
    if magnitude <= 1e-8 * v.sup_norm() / r_fit {
        return Err(NodalError::DegenerateGradient { z, magnitude });
    }
    Ok(NormalSample { z, nu: [gx / magnitude, gy / magnitude], delta: magnitude })
}

/// Empirical Hölder modulus of the normal map:
/// `max |ν(x) - ν(y)| / |x - y|^α` over pairs separated by at least
/// `min_separation` (callers pass `2h` to skip noise-dominated pairs).
pub fn holder_modulus(samples: &[NormalSample], alpha: f64, min_separation: f64) -> f64 {
    let mut worst = 0.0_f64;
    for (k, a) in samples.iter().enumerate() {
        for b in &samples[k + 1..] {
            let d = dist(a.z, b.z);
            if d < min_separation {
                continue;
            }
            let dn = ((a.nu[0] - b.nu[0]).powi(2) + (a.nu[1] - b.nu[1]).powi(2)).sqrt();
            worst = worst.max(dn / d.powf(alpha));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn field(text: &str, n: usize) -> ScalarField {
        let g = GridSpec::square(-1.0, 1.0, n).unwrap();
        ScalarField::sample(&Expr::parse(text).unwrap(), &g).unwrap()
    }

    #[test]
    fn vertical_line_is_extracted_with_full_length() {
        let u = field("x", 65);
        let ns = extract_nodal(&u);
        assert!(!ns.is_empty());
        for s in &ns.segments {
            assert!(s.a[0].abs() < 1e-12 && s.b[0].abs() < 1e-12);
        }
        assert_relative_eq!(ns.total_length(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn positive_field_has_empty_nodal_set() {
        let u = field("x^2 + y^2 + 1", 33);
        assert!(extract_nodal(&u).is_empty());
    }

    #[test]
    fn saddle_diagonals_have_expected_length() {
        let u = field("x^2 - y^2", 129);
        let ns = extract_nodal(&u);
        // Exact level set is {y = ±x}; inside B_{1/2} that is two diameters.
        let len = nodal_length(&ns, [0.0, 0.0], 0.5);
        assert!((len - 2.0).abs() <= 0.04, "length {len}");
        for s in &ns.segments {
            for p in [s.a, s.b] {
                assert!((p[0].abs() - p[1].abs()).abs() < 1e-9, "point {p:?} off the diagonals");
            }
        }
    }

    #[test]
    fn segment_endpoints_are_linear_roots() {
        let u = field("x + 0.37*y - 0.11", 33);
        let ns = extract_nodal(&u);
        assert!(!ns.is_empty());
        for p in &ns.sample_points {
            let v = u.interpolate(*p).unwrap();
            assert!(v.abs() <= 1e-12 * u.sup_norm(), "residual {v} at {p:?}");
        }
    }

    #[test]
    fn no_segment_in_uniform_sign_cells() {
        let u = field("x", 17);
        let g = u.spec();
        let hx = g.spacing(0);
        for s in &extract_nodal(&u).segments {
            for p in [s.a, s.b] {
                assert!(p[0].abs() <= hx, "segment strayed to {p:?}");
            }
        }
    }

    #[test]
    fn one_dimensional_variant_returns_crossings() {
        let g = GridSpec::line(-1.0, 1.0, 65).unwrap();
        let u = ScalarField::sample(&Expr::parse("x - 0.25").unwrap(), &g).unwrap();
        let ns = extract_nodal(&u);
        assert!(ns.segments.is_empty());
        assert_eq!(ns.sample_points.len(), 1);
        assert_relative_eq!(ns.sample_points[0][0], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn nodal_length_clips_to_disk() {
        let u = field("x", 65);
        let ns = extract_nodal(&u);
        assert_relative_eq!(nodal_length(&ns, [0.0, 0.0], 0.5), 1.0, epsilon = 1e-6);
        let empty = NodalSet::default();
        assert_eq!(nodal_length(&empty, [0.0, 0.0], 0.5), 0.0);
    }

    #[test]
    fn nodal_length_monotone_in_radius() {
        let u = field("x^2 - y^2 + 0.05", 65);
        let ns = extract_nodal(&u);
        let mut prev = 0.0;
        for k in 1..=8 {
            let r = 0.1 * k as f64;
            let len = nodal_length(&ns, [0.0, 0.0], r);
            assert!(len >= prev - 1e-12);
            prev = len;
        }
    }

    #[test]
    fn sign_measures_split_halves() {
        let u = field("x", 129);
        let (p, n) = sign_measures(&u, [0.0, 0.0], 1.0);
        assert!((p - PI / 2.0).abs() <= 0.01 * PI, "pos {p}");
        assert!((n - PI / 2.0).abs() <= 0.01 * PI, "neg {n}");
        assert!(p + n <= PI * 1.01);
    }

    #[test]
    fn sign_measures_positive_field() {
        let g = GridSpec::square(-1.0, 1.0, 65).unwrap();
        let u = ScalarField::constant(&g, 1.0);
        let (p, n) = sign_measures(&u, [0.0, 0.0], 0.5);
        assert!((p - PI * 0.25).abs() <= 0.01 * PI * 0.25);
        assert_eq!(n, 0.0);
    }

    #[test]
    fn sign_measures_circular_segment() {
        // 1-d transmission profile mapped to 2-d: positive for x > -1/3.
        let u = field("x + 1/3", 129);
        let (p, n) = sign_measures(&u, [0.0, 0.0], 1.0);
        let c: f64 = 1.0 / 3.0;
        let neg_exact = c.acos() - c * (1.0 - c * c).sqrt();
        assert!((n - neg_exact).abs() <= 0.01 * PI, "neg {n} vs {neg_exact}");
        assert!((p - (PI - neg_exact)).abs() <= 0.01 * PI);
    }

    #[test]
    fn normal_of_coordinate_plane() {
        let v = field("x", 65);
        let s = normal_at(&v, [0.0, 0.0], 0.25).unwrap();
        assert_relative_eq!(s.nu[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.nu[1], 0.0, epsilon = 1e-12);
        let norm = (s.nu[0] * s.nu[0] + s.nu[1] * s.nu[1]).sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn normal_of_tilted_plane() {
        let v = field("2*x + y", 65);
        let s = normal_at(&v, [0.0, 0.0], 0.25).unwrap();
        let e = 5.0_f64.sqrt();
        assert_relative_eq!(s.nu[0], 2.0 / e, epsilon = 1e-10);
        assert_relative_eq!(s.nu[1], 1.0 / e, epsilon = 1e-10);
    }

    #[test]
    fn normal_degenerate_at_saddle_origin() {
        let v = field("x^2 - y^2", 65);
        assert!(matches!(
            normal_at(&v, [0.0, 0.0], 0.25),
            Err(NodalError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn normal_rejects_fit_ball_leaving_grid() {
        let v = field("x", 65);
        assert!(matches!(
            normal_at(&v, [0.9, 0.0], 0.25),
            Err(NodalError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn holder_modulus_zero_for_equal_normals() {
        let u = field("x", 65);
        let ns = extract_nodal(&u);
        let h = u.spec().max_spacing();
        let samples: Vec<_> = ns
            .sample_points
            .iter()
            .filter_map(|&z| normal_at(&u, z, 8.0 * h).ok())
            .collect();
        assert!(samples.len() > 10);
        assert!(holder_modulus(&samples, 0.5, 2.0 * h) <= 1e-6);
    }

    #[test]
    fn classification_slots_fill() {
        let u = field("x", 17);
        let mut ns = extract_nodal(&u);
        assert!(ns.classes.iter().all(Option::is_none));
        ns.set_class(0, PointClass::Nondegenerate);
        assert_eq!(ns.classes[0], Some(PointClass::Nondegenerate));
    }
}
