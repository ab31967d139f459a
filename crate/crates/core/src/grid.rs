//! Uniform tensor grids over a box, sampled functions, balls and cell-center
//! quadrature.
//!
//! A [`Domain`] covers `[-L, L]^n` with `N` cells per axis. Cell `k` on an axis
//! has center `((k + 1/2) - N/2) * h` with `h = 2L/N`, which puts the centers
//! symmetrically around the origin in exact arithmetic. Balls select cells by
//! center membership (`|c - x0|^2 <= r^2`), and every integral is
//! `h^n * sum(f(c))` over the selected cells.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point in `R^n` for `n <= 3`; unused trailing coordinates are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 3],
    dim: usize,
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if !(1..=3).contains(&v.len()) {
            return Err(serde::de::Error::invalid_length(v.len(), &"1 to 3 coordinates"));
        }
        Ok(Point::new(&v))
    }
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "points live in R^1, R^2 or R^3"
        );
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&[0.0, 0.0, 0.0][..dim])
    }

    /// One-dimensional point.
    pub fn x(x: f64) -> Self {
        Self::new(&[x])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let d0 = self.coords[0] - other.coords[0];
        let d1 = self.coords[1] - other.coords[1];
        let d2 = self.coords[2] - other.coords[2];
        d0 * d0 + d1 * d1 + d2 * d2
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// `lambda * self`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut p = *self;
        for c in &mut p.coords {
            *c *= lambda;
        }
        p
    }

    pub fn offset(&self, delta: &Point) -> Self {
        let mut p = *self;
        for (c, d) in p.coords.iter_mut().zip(delta.coords) {
            *c += d;
        }
        p
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Uniform grid over `[-L, L]^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    half_width: f64,
    cells: usize,
    spacing: f64,
}

/// Builds the grid `[-L, L]^n` with `N` cells per axis.
pub fn build_domain(dim: usize, half_width: f64, cells: usize) -> Result<Domain> {
    Domain::new(dim, half_width, cells)
}

impl Domain {
    pub fn new(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if cells < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 cells per axis, got {cells}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            cells,
            spacing: 2.0 * half_width / cells as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    /// Cell spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    /// Center of cell `k` along one axis.
    pub fn axis_center(&self, k: usize) -> f64 {
        ((k as f64 + 0.5) - self.cells as f64 / 2.0) * self.spacing
    }

    /// Per-axis indices of a flat row-major index (first axis slowest).
    pub fn unravel(&self, index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = index;
        for axis in (0..self.dim).rev() {
            out[axis] = rem % self.cells;
            rem /= self.cells;
        }
        out
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0, |acc, &k| acc * self.cells + k)
    }

    pub fn center(&self, index: usize) -> Point {
        let idx = self.unravel(index);
        let mut c = [0.0; 3];
        for axis in 0..self.dim {
            c[axis] = self.axis_center(idx[axis]);
        }
        Point::new(&c[..self.dim])
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.cell_count()).map(move |i| self.center(i))
    }

    /// Same box with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            cells: self.cells * factor,
            spacing: self.spacing / factor as f64,
            ..*self
        }
    }

    /// Same box with `stride` times fewer cells per axis (at least 2).
    pub fn coarsened(&self, stride: usize) -> Self {
        let cells = (self.cells / stride.max(1)).max(2);
        Self {
            cells,
            spacing: 2.0 * self.half_width / cells as f64,
            ..*self
        }
    }

    fn axis_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let n = self.cells as f64;
        let first = ((lo / self.spacing + n / 2.0 - 0.5).ceil() - 1.0).max(0.0);
        let last = ((hi / self.spacing + n / 2.0 - 0.5).floor() + 1.0).min(n - 1.0);
        if first > last {
            None
        } else {
            Some((first as usize, last as usize))
        }
    }

    /// Flat indices, ascending, of the cells whose center lies in `ball`.
    pub fn cells_in_ball(&self, ball: &Ball) -> Vec<usize> {
        let mut ranges = [(0usize, 0usize); 3];
        for (axis, range) in ranges.iter_mut().enumerate().take(self.dim) {
            let x = ball.center.coord(axis);
            match self.axis_range(x - ball.radius, x + ball.radius) {
                Some(r) => *range = r,
                None => return Vec::new(),
            }
        }
        let r2 = ball.radius * ball.radius;
        let mut out = Vec::new();
        let (a0, a1, a2) = (ranges[0], ranges[1], ranges[2]);
        for i0 in a0.0..=a0.1 {
            let c0 = self.axis_center(i0) - ball.center.coord(0);
            let d0 = c0 * c0;
            if d0 > r2 {
                continue;
            }
            for i1 in a1.0..=a1.1 {
                let d1 = if self.dim > 1 {
                    let c1 = self.axis_center(i1) - ball.center.coord(1);
                    d0 + c1 * c1
                } else {
                    d0
                };
                if d1 > r2 {
                    continue;
                }
                for i2 in a2.0..=a2.1 {
                    let d2 = if self.dim > 2 {
                        let c2 = self.axis_center(i2) - ball.center.coord(2);
                        d1 + c2 * c2
                    } else {
                        d1
                    };
                    if d2 <= r2 {
                        out.push(self.ravel([i0, i1, i2]));
                    }
                }
            }
        }
        out
    }

    /// Grid measure `h^n * #cells` of a ball.
    pub fn measure(&self, ball: &Ball) -> f64 {
        self.cells_in_ball(ball).len() as f64 * self.cell_volume()
    }

    /// Centers of a coarse sub-lattice: every `stride`-th cell per axis.
    pub fn sublattice(&self, stride: usize) -> Vec<Point> {
        let stride = stride.max(1);
        let offset = (stride / 2).min(self.cells - 1);
        let axis: Vec<usize> = (offset..self.cells).step_by(stride).collect();
        let mut out = Vec::new();
        match self.dim {
            1 => out.extend(axis.iter().map(|&i| self.center(i))),
            2 => {
                for &i in &axis {
                    for &j in &axis {
                        out.push(self.center(self.ravel([i, j, 0])));
                    }
                }
            }
            _ => {
                for &i in &axis {
                    for &j in &axis {
                        for &k in &axis {
                            out.push(self.center(self.ravel([i, j, k])));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Closed ball `B(x0, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist2(p) <= self.radius * self.radius
    }

    /// `B(x0, lambda r)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            center: self.center,
            radius: self.radius * lambda,
        }
    }
}

/// Continuum volume `v_n r^n` of a ball in `R^n`.
pub fn ball_volume(dim: usize, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    let unit = match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => return Err(invalid("dimension", format!("{dim} not in 1..=3"))),
    };
    Ok(unit * radius.powi(dim as i32))
}

/// Surface measure of the unit sphere `S^{n-1}` (2, 2π, 4π).
pub(crate) fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Samples on a [`Domain`], one per cell in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(invalid(
                "values",
                format!(
                    "expected {} samples, got {}",
                    domain.cell_count(),
                    values.len()
                ),
            ));
        }
        if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                cell,
                center: domain.center(cell),
                value,
            });
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: Domain, value: f64) -> Self {
        Self {
            domain,
            values: vec![value; domain.cell_count()],
        }
    }

    pub fn zeros(domain: Domain) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Value at an arbitrary point by multilinear interpolation between the
    /// surrounding cell centers (exact at centers, clamped at the box edge).
    pub fn value_at(&self, p: &Point) -> f64 {
        let d = &self.domain;
        let n = d.cells as f64;
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for axis in 0..d.dim {
            let s = (p.coord(axis) / d.spacing + n / 2.0 - 0.5).clamp(0.0, n - 1.0);
            let k = (s.floor() as usize).min(d.cells - 1);
            lo[axis] = k;
            frac[axis] = s - k as f64;
        }
        self.lerp(lo, &frac, 0)
    }

    fn lerp(&self, mut idx: [usize; 3], frac: &[f64; 3], axis: usize) -> f64 {
        if axis == self.domain.dim {
            return self.values[self.domain.ravel(idx)];
        }
        let a = self.lerp(idx, frac, axis + 1);
        if frac[axis] == 0.0 {
            return a;
        }
        idx[axis] += 1;
        let b = self.lerp(idx, frac, axis + 1);
        a + frac[axis] * (b - a)
    }
}

/// Closed-form test functions, evaluable at any point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    /// `chi_{B(center, radius)}`.
    BallIndicator { center: Point, radius: f64 },
    /// `|x - center|^{-gamma}` on `B(center, cutoff)`, zero outside.
    PowerBump {
        center: Point,
        gamma: f64,
        cutoff: f64,
    },
    /// `exp(-|x - center|^2 / (2 scale^2))`.
    Gaussian { center: Point, scale: f64 },
    /// `log |x - center|`.
    LogBump { center: Point },
    Constant { value: f64 },
    Zero,
    /// `x_axis`.
    Coordinate { axis: usize },
    /// `sign(x_axis)`.
    Sign { axis: usize },
    /// `exp(x_axis)`.
    Exponential { axis: usize },
}

impl TestFunctionSpec {
    /// Evaluates at `p`; singular kinds see distances clamped below at `h/2`.
    pub fn eval(&self, p: &Point, h: f64) -> f64 {
        let clamp = 0.5 * h;
        match self {
            Self::BallIndicator { center, radius } => {
                if center.dist2(p) <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::PowerBump {
                center,
                gamma,
                cutoff,
            } => {
                if center.dist2(p) <= cutoff * cutoff {
                    center.dist(p).max(clamp).powf(-gamma)
                } else {
                    0.0
                }
            }
            Self::Gaussian { center, scale } => (-center.dist2(p) / (2.0 * scale * scale)).exp(),
            Self::LogBump { center } => center.dist(p).max(clamp).ln(),
            Self::Constant { value } => *value,
            Self::Zero => 0.0,
            Self::Coordinate { axis } => p.coord(*axis),
            Self::Sign { axis } => {
                let x = p.coord(*axis);
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { axis } => p.coord(*axis).exp(),
        }
    }

    /// Same function moved by `delta`; kinds without a center are unchanged.
    pub fn translated(&self, delta: &Point) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::BallIndicator { center, .. }
            | Self::PowerBump { center, .. }
            | Self::Gaussian { center, .. }
            | Self::LogBump { center } => *center = center.offset(delta),
            _ => {}
        }
        out
    }
}

/// Samples `spec` at every cell center of `dom`.
pub fn sample_function(spec: &TestFunctionSpec, dom: &Domain) -> Result<GridFunction> {
    let h = dom.spacing();
    let values = dom.centers().map(|c| spec.eval(&c, h)).collect();
    GridFunction::new(*dom, values)
}

/// `h^n * sum f(c)` over cells of `f`'s domain whose center lies in `ball`.
pub fn integrate(f: &GridFunction, ball: &Ball) -> f64 {
    let cells = f.domain().cells_in_ball(ball);
    let terms: Vec<f64> = cells.iter().map(|&i| f.get(i)).collect();
    f.domain().cell_volume() * pairwise_sum(&terms)
}

/// Integral of `f` over the whole box.
pub fn integrate_box(f: &GridFunction) -> f64 {
    f.domain().cell_volume() * pairwise_sum(f.values())
}

/// Fixed-shape pairwise (cascade) summation; the result depends only on the
/// order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
