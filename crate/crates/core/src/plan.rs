//! Discrete ball families and log-spaced ladders standing in for every
//! `sup_{x, r}`, `sup_{t > r}` and `essinf_{eta > t}` scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Ball, Domain, Point};

/// Geometric ladder `start * 2^(k / per_octave)`, `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLadder {
    pub start: f64,
    pub per_octave: usize,
    pub steps: usize,
}

impl LogLadder {
    /// Ladder from `start` up to (at least) `end`.
    pub fn spanning(start: f64, end: f64, per_octave: usize) -> Result<Self> {
        if !(start > 0.0 && start.is_finite()) {
            return Err(invalid("ladder start", format!("must be positive, got {start}")));
        }
        if !(end >= start) {
            return Err(invalid("ladder end", format!("{end} is below start {start}")));
        }
        if per_octave == 0 {
            return Err(invalid("per_octave", "must be at least 1"));
        }
        let steps = ((end / start).log2() * per_octave as f64 - 1e-9).ceil().max(0.0) as usize;
        Ok(Self {
            start,
            per_octave,
            steps,
        })
    }

    /// Ladder of `octaves` whole octaves starting at `start`.
    pub fn octaves(start: f64, octaves: usize, per_octave: usize) -> Result<Self> {
        Self::spanning(start, start * (octaves as f64).exp2(), per_octave)
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start * (k as f64 / self.per_octave as f64).exp2()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.node(self.steps)
    }

    /// Number of octaves covered.
    pub fn span_octaves(&self) -> f64 {
        self.steps as f64 / self.per_octave as f64
    }

    /// The same grid extended by `extra` steps at the bottom.
    pub fn extended_down(&self, extra: usize) -> Self {
        Self {
            start: self.start * (-(extra as f64) / self.per_octave as f64).exp2(),
            per_octave: self.per_octave,
            steps: self.steps + extra,
        }
    }

    /// The same grid extended by `extra` steps at the top.
    pub fn extended_up(&self, extra: usize) -> Self {
        Self {
            steps: self.steps + extra,
            ..*self
        }
    }
}

/// Centers, radius ladder and outer `t`/`eta` scales for a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub centers: Vec<Point>,
    pub radii: LogLadder,
    /// Upper end of the `t` scan (`t_max <= eta_max`).
    pub t_max: f64,
    /// Upper end of the `eta` scan realizing the essential infimum.
    pub eta_max: f64,
    /// Radius cap for balls not centered at the origin, `None` for no cap.
    pub off_center_cap: Option<f64>,
    /// Use closed forms for power weights on balls centered at the
    /// singularity instead of grid quadrature.
    pub semi_analytic: bool,
}

impl SamplingPlan {
    pub fn new(centers: Vec<Point>, radii: LogLadder) -> Self {
        let top = radii.end();
        Self {
            centers,
            radii,
            t_max: top,
            eta_max: top,
            off_center_cap: None,
            semi_analytic: true,
        }
    }

    /// Origin-centered balls `r_min * 2^(k/P)` up to `r_max`.
    pub fn centered(dim: usize, r_min: f64, r_max: f64, per_octave: usize) -> Result<Self> {
        Ok(Self::new(
            vec![Point::origin(dim)],
            LogLadder::spanning(r_min, r_max, per_octave)?,
        ))
    }

    /// Origin plus eight offsets inside the box, radii from `h` to `L`, with
    /// the off-center cap at `L/2`.
    pub fn default_for(dom: &Domain, per_octave: usize) -> Result<Self> {
        let l = dom.half_width();
        let mut centers = vec![Point::origin(dom.dim())];
        centers.extend(default_offsets(dom.dim(), l));
        let mut plan = Self::new(
            centers,
            LogLadder::spanning(dom.spacing(), l, per_octave)?,
        );
        plan.off_center_cap = Some(0.5 * l);
        Ok(plan)
    }

    pub fn with_outer(mut self, t_max: f64, eta_max: f64) -> Self {
        self.t_max = t_max;
        self.eta_max = eta_max;
        self
    }

    pub fn with_centers(mut self, centers: Vec<Point>) -> Self {
        self.centers = centers;
        self
    }

    pub fn quadrature_only(mut self) -> Self {
        self.semi_analytic = false;
        self
    }

    pub fn validate(&self, dom: &Domain) -> Result<()> {
        if self.centers.is_empty() {
            return Err(invalid("plan.centers", "empty center set"));
        }
        if let Some(c) = self.centers.iter().find(|c| c.dim() != dom.dim()) {
            return Err(invalid(
                "plan.centers",
                format!("center {c} does not match dimension {}", dom.dim()),
            ));
        }
        if self.radii.start < dom.spacing() * (1.0 - 1e-12) {
            return Err(invalid(
                "plan.r_min",
                format!(
                    "r_min = {} is below the cell spacing {}",
                    self.radii.start,
                    dom.spacing()
                ),
            ));
        }
        if self.t_max > self.eta_max {
            return Err(invalid(
                "plan.t_max",
                format!("t_max = {} exceeds eta_max = {}", self.t_max, self.eta_max),
            ));
        }
        Ok(())
    }

    fn radius_allowed(&self, center: &Point, r: f64) -> bool {
        match self.off_center_cap {
            Some(cap) if center.coords().iter().any(|&c| c != 0.0) => r <= cap * (1.0 + 1e-12),
            _ => true,
        }
    }

    /// Every `(center, radius)` pair of the scan, centers outermost.
    pub fn balls(&self) -> Vec<Ball> {
        let radii = self.radii.nodes();
        let mut out = Vec::with_capacity(self.centers.len() * radii.len());
        for c in &self.centers {
            for &r in &radii {
                if self.radius_allowed(c, r) {
                    out.push(Ball {
                        center: *c,
                        radius: r,
                    });
                }
            }
        }
        out
    }

    /// Outer `t`/`eta` ladder: the radius grid continued up to `eta_max`.
    pub fn outer_ladder(&self) -> LogLadder {
        let steps = ((self.eta_max / self.radii.start).log2() * self.radii.per_octave as f64 - 1e-9)
            .ceil()
            .max(self.radii.steps as f64) as usize;
        LogLadder {
            start: self.radii.start,
            per_octave: self.radii.per_octave,
            steps,
        }
    }
}

fn default_offsets(dim: usize, l: f64) -> Vec<Point> {
    match dim {
        1 => [-0.5, -0.375, -0.25, -0.125, 0.125, 0.25, 0.375, 0.5]
            .iter()
            .map(|&s| Point::x(s * l))
            .collect(),
        2 => (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::FRAC_PI_4;
                Point::new(&[0.25 * l * a.cos(), 0.25 * l * a.sin()])
            })
            .collect(),
        _ => {
            let d = 0.25 * l;
            let s = d / 3f64.sqrt();
            vec![
                Point::new(&[d, 0.0, 0.0]),
                Point::new(&[-d, 0.0, 0.0]),
                Point::new(&[0.0, d, 0.0]),
                Point::new(&[0.0, -d, 0.0]),
                Point::new(&[0.0, 0.0, d]),
                Point::new(&[0.0, 0.0, -d]),
                Point::new(&[s, s, s]),
                Point::new(&[-s, -s, -s]),
            ]
        }
    }
}

/// A scanned supremum together with the ball attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sup {
    pub value: f64,
    pub center: Point,
    pub radius: f64,
}

impl Sup {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Evaluates `f` on every ball in parallel and reduces to the first maximum
/// in plan order, so the result does not depend on the thread count.
/// `f` returns `None` for balls to skip. NaN values abort.
pub(crate) fn scan_max<F>(balls: &[Ball], what: &'static str, f: F) -> Result<Option<Sup>>
where
    F: Fn(&Ball) -> Option<f64> + Sync,
{
    let values: Vec<Option<f64>> = balls.par_iter().map(&f).collect();
    reduce_max(balls, &values, what, |a, b| b > a)
}

/// Same as [`scan_max`] but keeps the minimum.
pub(crate) fn scan_min<F>(balls: &[Ball], what: &'static str, f: F) -> Result<Option<Sup>>
where
    F: Fn(&Ball) -> Option<f64> + Sync,
{
    let values: Vec<Option<f64>> = balls.par_iter().map(&f).collect();
    reduce_max(balls, &values, what, |a, b| b < a)
}

fn reduce_max(
    balls: &[Ball],
    values: &[Option<f64>],
    what: &'static str,
    better: impl Fn(f64, f64) -> bool,
) -> Result<Option<Sup>> {
    let mut best: Option<Sup> = None;
    for (ball, v) in balls.iter().zip(values) {
        let Some(v) = *v else { continue };
        if v.is_nan() {
            return Err(Error::NonFinite {
                what,
                center: ball.center,
                radius: ball.radius,
            });
        }
        if best.is_none_or(|b| better(b.value, v)) {
            best = Some(Sup {
                value: v,
                center: ball.center,
                radius: ball.radius,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_domain;

    #[test]
    fn ladder_nodes_are_dyadic_on_octaves() {
        let l = LogLadder::spanning(0.25, 8.0, 4).unwrap();
        assert_eq!(l.steps, 20);
        let nodes = l.nodes();
        assert_eq!(nodes[0], 0.25);
        assert_eq!(nodes[4], 0.5);
        assert_eq!(*nodes.last().unwrap(), 8.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(l.span_octaves(), 5.0);
        assert_eq!(l.extended_down(4).start, 0.125);
        assert_eq!(l.extended_up(4).end(), 16.0);
    }

    #[test]
    fn ladder_rejects_nonsense() {
        assert!(LogLadder::spanning(0.0, 1.0, 4).is_err());
        assert!(LogLadder::spanning(2.0, 1.0, 4).is_err());
        assert!(LogLadder::spanning(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn plan_validation() {
        let dom = build_domain(1, 4.0, 64).unwrap();
        let plan = SamplingPlan::default_for(&dom, 4).unwrap();
        plan.validate(&dom).unwrap();
        assert_eq!(plan.centers.len(), 9);
        let too_fine = SamplingPlan::centered(1, dom.spacing() / 4.0, 1.0, 4).unwrap();
        assert!(too_fine.validate(&dom).is_err());
        let bad_outer = plan.clone().with_outer(8.0, 4.0);
        assert!(bad_outer.validate(&dom).is_err());
    }

    #[test]
    fn off_center_cap_applies() {
        let dom = build_domain(1, 4.0, 64).unwrap();
        let plan = SamplingPlan::default_for(&dom, 1).unwrap();
        for b in plan.balls() {
            if b.center.coord(0) != 0.0 {
                assert!(b.radius <= 2.0);
            }
        }
        assert!(plan
            .balls()
            .iter()
            .any(|b| b.center.coord(0) == 0.0 && b.radius == 4.0));
    }

    #[test]
    fn outer_ladder_continues_radius_grid() {
        let plan = SamplingPlan::centered(1, 0.5, 2.0, 2)
            .unwrap()
            .with_outer(16.0, 32.0);
        let outer = plan.outer_ladder();
        assert_eq!(outer.start, 0.5);
        assert_eq!(outer.end(), 32.0);
        assert_eq!(&outer.nodes()[..5], &plan.radii.nodes()[..]);
    }

    #[test]
    fn reduction_keeps_first_maximum() {
        let balls: Vec<Ball> = (1..=4)
            .map(|k| Ball::new(Point::x(0.0), k as f64).unwrap())
            .collect();
        let s = scan_max(&balls, "test", |b| Some(if b.radius > 2.0 { 5.0 } else { 1.0 }))
            .unwrap()
            .unwrap();
        assert_eq!(s.radius, 3.0);
        let m = scan_min(&balls, "test", |b| Some(b.radius)).unwrap().unwrap();
        assert_eq!(m.value, 1.0);
        assert!(scan_max(&balls, "test", |_| Some(f64::NAN)).is_err());
        assert!(scan_max(&balls, "test", |_| None).unwrap().is_none());
    }
}
