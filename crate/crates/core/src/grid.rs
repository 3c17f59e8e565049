//! Uniform tensor grids on intervals and rectangles, with the scalar/vector
//! fields, bilinear interpolation, centered gradients and ball quadratures
//! the rest of the library is built on.
//!
//! The computational domain for 2-d experiments is a rectangle (typically
//! `[-1,1]^2`); ball-localized quantities are obtained by masking to the
//! inscribed disk. Fields are immutable after construction and all operations
//! here are pure, so they can be used concurrently.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::expr::{EvalError, Expr};

/// Point in the plane; 1-d code uses the first coordinate and sets `p[1] = 0`.
pub type Point = [f64; 2];

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {min} points per axis, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("invalid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("point ({0}, {1}) is outside the grid bounds")]
    OutOfBounds(f64, f64),
    #[error("field evaluation failed at node ({x}, {y}): {source}")]
    Eval {
        x: f64,
        y: f64,
        #[source]
        source: EvalError,
    },
    #[error("non-finite value {value} at node ({x}, {y})")]
    NonFinite { value: f64, x: f64, y: f64 },
    #[error("value buffer has length {got}, grid has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("quadrature radius {r} is below the floor {floor} (= 2h)")]
    RadiusTooSmall { r: f64, floor: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

/// Uniform grid over an interval (`dim = 1`) or a rectangle (`dim = 2`).
///
/// Per-axis spacing is `h = (hi - lo)/(n - 1)`. An odd point count puts the
/// origin on a node when the bounds are symmetric, which the nodal-set and
/// frequency diagnostics prefer; an even count is accepted with a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    bounds: [(f64, f64); 2],
    n: [usize; 2],
}

impl GridSpec {
    /// 1-d grid on `[lo, hi]` with `n` nodes.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self, GridError> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(GridError::InvalidBounds { lo, hi });
        }
        if n < 3 {
            return Err(GridError::TooFewPoints { min: 3, got: n });
        }
        if n % 2 == 0 {
            log::warn!("grid has an even point count n = {n}; the midpoint is not a node");
        }
        Ok(GridSpec { dim: 1, bounds: [(lo, hi), (0.0, 0.0)], n: [n, 1] })
    }

    /// 2-d grid with per-axis bounds and point counts.
    pub fn rect(bounds: [(f64, f64); 2], n: [usize; 2]) -> Result<Self, GridError> {
        for &(lo, hi) in &bounds {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(GridError::InvalidBounds { lo, hi });
            }
        }
        for &k in &n {
            if k < 3 {
                return Err(GridError::TooFewPoints { min: 3, got: k });
            }
            if k % 2 == 0 {
                log::warn!("grid has an even point count n = {k}; the midpoint is not a node");
            }
        }
        Ok(GridSpec { dim: 2, bounds, n })
    }

    /// Square grid `[lo, hi]^2` with `n` nodes per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self, GridError> {
        Self::rect([(lo, hi), (lo, hi)], [n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        self.bounds[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.n[axis] - 1) as f64
    }

    /// Largest per-axis spacing; the `2h` quadrature floors use this.
    pub fn max_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.spacing(0)
        } else {
            self.spacing(0).max(self.spacing(1))
        }
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis].0 + i as f64 * self.spacing(axis)
    }

    /// Row-major node index; `x` varies fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    pub fn node_point(&self, idx: usize) -> Point {
        let i = idx % self.n[0];
        let j = idx / self.n[0];
        [self.coord(0, i), if self.dim == 2 { self.coord(1, j) } else { 0.0 }]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        if self.dim == 1 {
            i == 0 || i == self.n[0] - 1
        } else {
            i == 0 || i == self.n[0] - 1 || j == 0 || j == self.n[1] - 1
        }
    }

    /// True when the closed ball `B_r(z)` lies inside the closed rectangle.
    pub fn contains_ball(&self, z: Point, r: f64) -> bool {
        let slack = 1e-9 * self.max_spacing();
        let (lx, hx) = self.bounds[0];
        if z[0] - r < lx - slack || z[0] + r > hx + slack {
            return false;
        }
        if self.dim == 2 {
            let (ly, hy) = self.bounds[1];
            if z[1] - r < ly - slack || z[1] + r > hy + slack {
                return false;
            }
        }
        true
    }

    fn locate(&self, axis: usize, v: f64) -> Result<(usize, f64), GridError> {
        let (lo, hi) = self.bounds[axis];
        let h = self.spacing(axis);
        let slack = 1e-9 * h;
        if v < lo - slack || v > hi + slack {
            return Err(GridError::OutOfBounds(v, 0.0));
        }
        let mut cell = (((v - lo) / h).floor() as isize).clamp(0, self.n[axis] as isize - 2) as usize;
        let mut t = (v - (lo + cell as f64 * h)) / h;
        if t < 0.0 {
            t = 0.0;
        }
        if t > 1.0 {
            if cell + 2 < self.n[axis] {
                cell += 1;
                t -= 1.0;
            } else {
                t = 1.0;
            }
        }
        Ok((cell, t))
    }
}

/// Grid-sampled real function with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    /// Samples `e` at every node.
    pub fn sample(e: &Expr, g: &GridSpec) -> Result<Self, GridError> {
        Self::try_from_fn(g, |p| e.evaluate(p[0], p[1]))
    }

    pub fn try_from_fn(
        g: &GridSpec,
        f: impl Fn(Point) -> Result<f64, EvalError>,
    ) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(g.node_count());
        for idx in 0..g.node_count() {
            let p = g.node_point(idx);
            let v = f(p).map_err(|source| GridError::Eval { x: p[0], y: p[1], source })?;
            if !v.is_finite() {
                return Err(GridError::NonFinite { value: v, x: p[0], y: p[1] });
            }
            values.push(v);
        }
        Ok(ScalarField { spec: g.clone(), values })
    }

    pub fn from_fn(g: &GridSpec, f: impl Fn(Point) -> f64) -> Result<Self, GridError> {
        Self::try_from_fn(g, |p| Ok(f(p)))
    }

    pub fn from_values(g: &GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != g.node_count() {
            return Err(GridError::LengthMismatch { got: values.len(), want: g.node_count() });
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                let p = g.node_point(idx);
                return Err(GridError::NonFinite { value: v, x: p[0], y: p[1] });
            }
        }
        Ok(ScalarField { spec: g.clone(), values })
    }

    pub fn constant(g: &GridSpec, c: f64) -> Self {
        ScalarField { spec: g.clone(), values: vec![c; g.node_count()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Node-wise map to a new field (must stay finite).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Self::from_values(&self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Node-wise combination over matching grids.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        assert_eq!(self.spec, other.spec, "zip_map over mismatched grids");
        Self::from_values(
            &self.spec,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Bilinear interpolation (linear in 1-d). Exact at nodes and on fields
    /// sampled from affine expressions.
    pub fn interpolate(&self, p: Point) -> Result<f64, GridError> {
        let (i, tx) = self
            .spec
            .locate(0, p[0])
            .map_err(|_| GridError::OutOfBounds(p[0], p[1]))?;
        if self.spec.dim == 1 {
            let a = self.values[i];
            let b = self.values[i + 1];
            return Ok(a + tx * (b - a));
        }
        let (j, ty) = self
            .spec
            .locate(1, p[1])
            .map_err(|_| GridError::OutOfBounds(p[0], p[1]))?;
        let v00 = self.value(i, j);
        let v10 = self.value(i + 1, j);
        let v01 = self.value(i, j + 1);
        let v11 = self.value(i + 1, j + 1);
        Ok(v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty)
    }

    /// Centered differences in the interior, one-sided second order on the
    /// boundary. Exact on quadratics in the interior.
    pub fn gradient(&self) -> VectorField {
        let g = &self.spec;
        let nx = g.n(0);
        let ny = g.n(1);
        let hx = g.spacing(0);
        let mut comps = vec![[0.0_f64; 2]; g.node_count()];
        let d_axis = |vm2: f64, vm1: f64, v0: f64, vp1: f64, vp2: f64, pos: usize, last: usize, h: f64| {
            if pos == 0 {
                (-3.0 * v0 + 4.0 * vp1 - vp2) / (2.0 * h)
            } else if pos == last {
                (3.0 * v0 - 4.0 * vm1 + vm2) / (2.0 * h)
            } else {
                (vp1 - vm1) / (2.0 * h)
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                let idx = g.index(i, j);
                let at = |ii: isize, jj: isize| -> f64 {
                    let ii = ii.clamp(0, nx as isize - 1) as usize;
                    let jj = jj.clamp(0, ny as isize - 1) as usize;
                    self.value(ii, jj)
                };
                let ii = i as isize;
                let jj = j as isize;
                comps[idx][0] = d_axis(
                    at(ii - 2, jj),
                    at(ii - 1, jj),
                    at(ii, jj),
                    at(ii + 1, jj),
                    at(ii + 2, jj),
                    i,
                    nx - 1,
                    hx,
                );
                if g.dim() == 2 {
                    let hy = g.spacing(1);
                    comps[idx][1] = d_axis(
                        at(ii, jj - 2),
                        at(ii, jj - 1),
                        at(ii, jj),
                        at(ii, jj + 1),
                        at(ii, jj + 2),
                        j,
                        ny - 1,
                        hy,
                    );
                }
            }
        }
        VectorField { spec: g.clone(), comps }
    }

    /// Five-point (three-point in 1-d) Laplacian at interior nodes; boundary
    /// entries are set to zero. Used by the harmonicity diagnostics.
    pub fn interior_laplacian(&self) -> ScalarField {
        let g = &self.spec;
        let nx = g.n(0);
        let ny = g.n(1);
        let hx2 = g.spacing(0) * g.spacing(0);
        let mut out = vec![0.0; g.node_count()];
        if g.dim() == 1 {
            for (i, slot) in out.iter_mut().enumerate().take(nx - 1).skip(1) {
                *slot = (self.values[i + 1] - 2.0 * self.values[i] + self.values[i - 1]) / hx2;
            }
        } else {
            let hy2 = g.spacing(1) * g.spacing(1);
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let c = self.value(i, j);
                    out[g.index(i, j)] = (self.value(i + 1, j) - 2.0 * c + self.value(i - 1, j)) / hx2
                        + (self.value(i, j + 1) - 2.0 * c + self.value(i, j - 1)) / hy2;
                }
            }
        }
        ScalarField { spec: g.clone(), values: out }
    }

    /// Writes `x,y,value` (or `x,value`) rows, row-major, 17 significant digits.
    pub fn to_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.spec.dim() == 1 {
            writeln!(w, "x,value")?;
            for (idx, v) in self.values.iter().enumerate() {
                writeln!(w, "{:.16e},{:.16e}", self.spec.coord(0, idx), v)?;
            }
        } else {
            writeln!(w, "x,y,value")?;
            for (idx, v) in self.values.iter().enumerate() {
                let p = self.spec.node_point(idx);
                writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }

    /// Reads a field back from the CSV layout written by [`Self::to_csv`],
    /// reconstructing the grid from the coordinate columns.
    pub fn from_csv<R: BufRead>(r: R) -> Result<Self, GridError> {
        let bad = |msg: &str| GridError::Csv(msg.to_string());
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| bad(&e.to_string()))?;
        let dim = match header.trim() {
            "x,value" => 1,
            "x,y,value" => 2,
            other => return Err(GridError::Csv(format!("unexpected header `{other}`"))),
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
            let mut next = || {
                cols.next()
                    .ok_or_else(|| GridError::Csv(format!("row {}: missing column", lineno + 2)))?
                    .map_err(|e| GridError::Csv(format!("row {}: {e}", lineno + 2)))
            };
            xs.push(next()?);
            if dim == 2 {
                ys.push(next()?);
            }
            values.push(next()?);
        }
        if values.is_empty() {
            return Err(bad("no data rows"));
        }
        let spec = if dim == 1 {
            let n = values.len();
            let g = GridSpec::line(xs[0], xs[n - 1], n)?;
            check_axis(&xs, &g, 0)?;
            g
        } else {
            let nx = ys.iter().take_while(|&&y| y == ys[0]).count();
            if nx < 2 || values.len() % nx != 0 {
                return Err(bad("rows are not a row-major tensor grid"));
            }
            let ny = values.len() / nx;
            let g = GridSpec::rect(
                [(xs[0], xs[nx - 1]), (ys[0], ys[values.len() - 1])],
                [nx, ny],
            )?;
            for j in 0..ny {
                for i in 0..nx {
                    let k = j * nx + i;
                    let ex = g.coord(0, i);
                    let ey = g.coord(1, j);
                    if (xs[k] - ex).abs() > 1e-9 * g.max_spacing()
                        || (ys[k] - ey).abs() > 1e-9 * g.max_spacing()
                    {
                        return Err(bad("coordinates are not uniformly spaced"));
                    }
                }
            }
            g
        };
        ScalarField::from_values(&spec, values)
    }
}

fn check_axis(xs: &[f64], g: &GridSpec, axis: usize) -> Result<(), GridError> {
    for (i, &x) in xs.iter().enumerate() {
        if (x - g.coord(axis, i)).abs() > 1e-9 * g.max_spacing() {
            return Err(GridError::Csv("coordinates are not uniformly spaced".into()));
        }
    }
    Ok(())
}

/// Per-node vector of `dim` components (`comps[idx][1]` is zero in 1-d).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    spec: GridSpec,
    comps: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn from_components(g: &GridSpec, comps: Vec<[f64; 2]>) -> Result<Self, GridError> {
        if comps.len() != g.node_count() {
            return Err(GridError::LengthMismatch { got: comps.len(), want: g.node_count() });
        }
        for (idx, c) in comps.iter().enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                let p = g.node_point(idx);
                return Err(GridError::NonFinite { value: c[0].min(c[1]), x: p[0], y: p[1] });
            }
        }
        Ok(VectorField { spec: g.clone(), comps })
    }

    /// Samples a pair of expressions as the two components.
    pub fn sample(ex: &Expr, ey: &Expr, g: &GridSpec) -> Result<Self, GridError> {
        let fx = ScalarField::sample(ex, g)?;
        let fy = ScalarField::sample(ey, g)?;
        let comps = fx
            .values()
            .iter()
            .zip(fy.values())
            .map(|(&a, &b)| [a, b])
            .collect();
        VectorField::from_components(g, comps)
    }

    pub fn zeros(g: &GridSpec) -> Self {
        VectorField { spec: g.clone(), comps: vec![[0.0, 0.0]; g.node_count()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn components(&self) -> &[[f64; 2]] {
        &self.comps
    }

    pub fn at(&self, idx: usize) -> [f64; 2] {
        self.comps[idx]
    }

    pub fn max_norm(&self) -> f64 {
        self.comps
            .iter()
            .fold(0.0, |m, c| m.max((c[0] * c[0] + c[1] * c[1]).sqrt()))
    }

    /// Node-wise squared Euclidean norm as a scalar field.
    pub fn norm_sq_field(&self) -> ScalarField {
        ScalarField {
            spec: self.spec.clone(),
            values: self.comps.iter().map(|c| c[0] * c[0] + c[1] * c[1]).collect(),
        }
    }

    /// Writes `x,y,vx,vy` rows in the same layout as scalar CSV output.
    pub fn to_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,vx,vy")?;
        for (idx, c) in self.comps.iter().enumerate() {
            let p = self.spec.node_point(idx);
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], c[0], c[1])?;
        }
        Ok(())
    }

    /// Reads the layout written by [`Self::to_csv`].
    pub fn from_csv<R: BufRead>(r: R) -> Result<Self, GridError> {
        let bad = |msg: &str| GridError::Csv(msg.to_string());
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| bad(&e.to_string()))?;
        if header.trim() != "x,y,vx,vy" {
            return Err(GridError::Csv(format!("unexpected header `{header}`")));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut comps = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GridError::Csv(format!("row {}: {e}", lineno + 2)))?;
            if cols.len() != 4 {
                return Err(GridError::Csv(format!("row {}: expected 4 columns", lineno + 2)));
            }
            xs.push(cols[0]);
            ys.push(cols[1]);
            comps.push([cols[2], cols[3]]);
        }
        if comps.is_empty() {
            return Err(bad("no data rows"));
        }
        let nx = ys.iter().take_while(|&&y| y == ys[0]).count();
        if nx < 2 || comps.len() % nx != 0 {
            return Err(bad("rows are not a row-major tensor grid"));
        }
        let ny = comps.len() / nx;
        let g = GridSpec::rect([(xs[0], xs[nx - 1]), (ys[0], ys[comps.len() - 1])], [nx, ny])?;
        VectorField::from_components(&g, comps)
    }
}

fn quad_preflight(f: &ScalarField, z: Point, r: f64) -> Result<(), GridError> {
    let h = f.spec().max_spacing();
    if r < 2.0 * h {
        return Err(GridError::RadiusTooSmall { r, floor: 2.0 * h });
    }
    if !f.spec().contains_ball(z, r) {
        return Err(GridError::OutOfBounds(z[0], z[1]));
    }
    Ok(())
}

/// Integral of `f` over the circle `∂B_r(z)`: trapezoid rule over
/// `M = max(64, ceil(8πr/h))` equispaced angles through the bilinear
/// interpolant. In 1-d this degenerates to `f(z-r) + f(z+r)`.
pub fn circle_integral(f: &ScalarField, z: Point, r: f64) -> Result<f64, GridError> {
    quad_preflight(f, z, r)?;
    if f.spec().dim() == 1 {
        return Ok(f.interpolate([z[0] - r, 0.0])? + f.interpolate([z[0] + r, 0.0])?);
    }
    let h = f.spec().max_spacing();
    let m = 64usize.max((8.0 * std::f64::consts::PI * r / h).ceil() as usize);
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    let mut sum = 0.0;
    for k in 0..m {
        let theta = k as f64 * dtheta;
        let p = [z[0] + r * theta.cos(), z[1] + r * theta.sin()];
        sum += f.interpolate(p)?;
    }
    Ok(sum * r * dtheta)
}

/// Integral of `f` over the disk `B_r(z)`: midpoint rule over grid cells with
/// boundary cells weighted by the fraction of their area inside the disk,
/// estimated from a 4x4 supersample. The 1-d version integrates over
/// `[z-r, z+r]` with exact interval overlaps.
pub fn disk_integral(f: &ScalarField, z: Point, r: f64) -> Result<f64, GridError> {
    quad_preflight(f, z, r)?;
    let g = f.spec();
    if g.dim() == 1 {
        let h = g.spacing(0);
        let (lo, _) = g.bounds(0);
        let mut sum = 0.0;
        for i in 0..g.n(0) - 1 {
            let a = (lo + i as f64 * h).max(z[0] - r);
            let b = (lo + (i + 1) as f64 * h).min(z[0] + r);
            if b > a {
                sum += f.interpolate([0.5 * (a + b), 0.0])? * (b - a);
            }
        }
        return Ok(sum);
    }
    let hx = g.spacing(0);
    let hy = g.spacing(1);
    let (lx, _) = g.bounds(0);
    let (ly, _) = g.bounds(1);
    let i_min = (((z[0] - r - lx) / hx).floor().max(0.0)) as usize;
    let i_max = ((((z[0] + r - lx) / hx).ceil()) as usize).min(g.n(0) - 2);
    let j_min = (((z[1] - r - ly) / hy).floor().max(0.0)) as usize;
    let j_max = ((((z[1] + r - ly) / hy).ceil()) as usize).min(g.n(1) - 2);
    let r2 = r * r;
    let cell_area = hx * hy;
    let mut sum = 0.0;
    for j in j_min..=j_max {
        let y0 = ly + j as f64 * hy;
        for i in i_min..=i_max {
            let x0 = lx + i as f64 * hx;
            // Farthest / nearest corner tests classify full and empty cells.
            let dx_near = (z[0] - (x0 + hx).min(z[0].max(x0))).abs();
            let dy_near = (z[1] - (y0 + hy).min(z[1].max(y0))).abs();
            let near2 = dx_near * dx_near + dy_near * dy_near;
            if near2 > r2 {
                continue;
            }
            let dx_far = (z[0] - x0).abs().max((z[0] - (x0 + hx)).abs());
            let dy_far = (z[1] - y0).abs().max((z[1] - (y0 + hy)).abs());
            let frac = if dx_far * dx_far + dy_far * dy_far <= r2 {
                1.0
            } else {
                let mut inside = 0u32;
                for sj in 0..4 {
                    let sy = y0 + (sj as f64 + 0.5) * hy / 4.0;
                    for si in 0..4 {
                        let sx = x0 + (si as f64 + 0.5) * hx / 4.0;
                        let d2 = (sx - z[0]).powi(2) + (sy - z[1]).powi(2);
                        if d2 <= r2 {
                            inside += 1;
                        }
                    }
                }
                f64::from(inside) / 16.0
            };
            if frac > 0.0 {
                let center = [x0 + 0.5 * hx, y0 + 0.5 * hy];
                sum += f.interpolate(center)? * cell_area * frac;
            }
        }
    }
    Ok(sum)
}
