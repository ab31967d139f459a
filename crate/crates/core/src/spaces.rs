//! Weighted Lebesgue and weak Lebesgue norms on balls, generalized weighted
//! Morrey norms (strong, weak, local), and BMO oscillations.
//!
//! Every `omega(B)` here is the same cell-center quadrature as the norms
//! themselves, so identities such as `phi = omega(B)^{-1/p}` collapsing the
//! Morrey prefactor to one hold exactly at finite `h`.

use crate::error::{invalid, Result};
use crate::grid::{pairwise_sum, Ball, Domain, GridFunction, Point};
use crate::plan::{scan_max, SamplingPlan, Sup};
use crate::weights::{Path, WeightSpec};

/// A positive scale function `phi(x, r)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiSpec {
    /// `scale * r^beta`.
    Power { beta: f64, scale: f64 },
    /// `omega(B(x, r))^{(kappa - 1)/p}`.
    WeightedPower {
        kappa: f64,
        p: f64,
        weight: WeightSpec,
    },
    /// `omega(B(x, r))^{-1/p}`.
    Lebesgue { p: f64, weight: WeightSpec },
    Product(Box<PhiSpec>, Box<PhiSpec>),
    Ratio(Box<PhiSpec>, Box<PhiSpec>),
}

/// `phi = scale * r^beta * prod_j omega_j(B)^{e_j}` with equal weights merged.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiFactors {
    pub scale: f64,
    pub beta: f64,
    pub weights: Vec<(WeightSpec, f64)>,
}

impl PhiFactors {
    fn unit() -> Self {
        Self {
            scale: 1.0,
            beta: 0.0,
            weights: Vec::new(),
        }
    }

    /// Multiplies in `omega(B)^e`.
    pub fn with_weight(mut self, w: &WeightSpec, e: f64) -> Self {
        match self.weights.iter_mut().find(|(x, _)| x == w) {
            Some((_, acc)) => *acc += e,
            None => self.weights.push((w.clone(), e)),
        }
        self
    }

    fn times(mut self, other: PhiFactors) -> Self {
        self.scale *= other.scale;
        self.beta += other.beta;
        for (w, e) in &other.weights {
            self = self.with_weight(w, *e);
        }
        self
    }

    pub fn inverse(self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            beta: -self.beta,
            weights: self.weights.into_iter().map(|(w, e)| (w, -e)).collect(),
        }
    }

    /// Value at `B(x, r)`; zero exponents are skipped so cancelled factors
    /// contribute exactly one.
    pub fn eval(&self, ball: &Ball, dom: &Domain, path: Path) -> f64 {
        let mut v = self.scale;
        if self.beta != 0.0 {
            v *= ball.radius.powf(self.beta);
        }
        for (w, e) in &self.weights {
            if *e != 0.0 {
                v *= w.moment(1.0, ball, dom, path).powf(*e);
            }
        }
        v
    }

    /// `(scale, beta)` when every weight factor is a power law in `r` at
    /// `x`: constants, and power weights singular at `x` itself.
    pub fn as_power_law(&self, x: &Point) -> Option<(f64, f64)> {
        let n = x.dim();
        let mut scale = self.scale;
        let mut beta = self.beta;
        for (w, e) in &self.weights {
            if *e == 0.0 {
                continue;
            }
            let unit = Ball {
                center: *x,
                radius: 1.0,
            };
            let growth = match w {
                WeightSpec::Constant { .. } => n as f64,
                WeightSpec::Power {
                    center, exponent, ..
                } if center == x => n as f64 + exponent,
                _ => return None,
            };
            let c = w.closed_form_moment(1.0, &unit)?;
            if !c.is_finite() {
                return None;
            }
            scale *= c.powf(*e);
            beta += growth * e;
        }
        Some((scale, beta))
    }
}

impl PhiSpec {
    pub fn power(beta: f64) -> Self {
        Self::Power { beta, scale: 1.0 }
    }

    pub fn product(a: PhiSpec, b: PhiSpec) -> Self {
        Self::Product(Box::new(a), Box::new(b))
    }

    pub fn ratio(a: PhiSpec, b: PhiSpec) -> Self {
        Self::Ratio(Box::new(a), Box::new(b))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power { beta, scale } => {
                if !(*scale > 0.0 && scale.is_finite() && beta.is_finite()) {
                    return Err(invalid("phi", format!("power(beta={beta}, scale={scale}) is not positive")));
                }
            }
            Self::WeightedPower { kappa, p, .. } => {
                if !(*p >= 1.0 && kappa.is_finite()) {
                    return Err(invalid("phi", format!("weighted power needs p >= 1, got {p}")));
                }
            }
            Self::Lebesgue { p, .. } => {
                if !(*p >= 1.0) {
                    return Err(invalid("phi", format!("lebesgue needs p >= 1, got {p}")));
                }
            }
            Self::Product(a, b) | Self::Ratio(a, b) => {
                a.validate()?;
                b.validate()?;
            }
        }
        Ok(())
    }

    pub fn factors(&self) -> PhiFactors {
        match self {
            Self::Power { beta, scale } => PhiFactors {
                scale: *scale,
                beta: *beta,
                weights: Vec::new(),
            },
            Self::WeightedPower { kappa, p, weight } => {
                PhiFactors::unit().with_weight(weight, (kappa - 1.0) / p)
            }
            Self::Lebesgue { p, weight } => PhiFactors::unit().with_weight(weight, -1.0 / p),
            Self::Product(a, b) => a.factors().times(b.factors()),
            Self::Ratio(a, b) => a.factors().times(b.factors().inverse()),
        }
    }

    /// `phi(x, r)`, weight measures along `path`.
    pub fn eval(&self, x: &Point, r: f64, dom: &Domain, path: Path) -> f64 {
        self.factors().eval(
            &Ball {
                center: *x,
                radius: r,
            },
            dom,
            path,
        )
    }

    pub fn as_power_law(&self, x: &Point) -> Option<(f64, f64)> {
        self.factors().as_power_law(x)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("exponent must be in [1, inf), got {p}")));
    }
    Ok(())
}

fn weight_at(omega: &WeightSpec, dom: &Domain, i: usize) -> f64 {
    match omega {
        WeightSpec::Grid(g) if g.domain() == dom => g.get(i),
        _ => omega.eval(&dom.center(i), dom.spacing()),
    }
}

/// `(int_B |f|^p omega)^{1/p}` by cell-center quadrature.
pub fn lp_norm(f: &GridFunction, p: f64, omega: &WeightSpec, ball: &Ball) -> Result<f64> {
    check_p(p)?;
    let dom = f.domain();
    let cells: Vec<usize> = dom
        .cells_in_ball(ball)
        .into_iter()
        .filter(|&i| f.get(i) != 0.0)
        .collect();
    // scaled by the max, so a single level sums the same terms as the weak norm
    let top = cells.iter().map(|&i| f.get(i).abs()).fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    let terms: Vec<f64> = cells
        .iter()
        .map(|&i| (f.get(i).abs() / top).powf(p) * weight_at(omega, dom, i))
        .collect();
    Ok(top * (dom.cell_volume() * pairwise_sum(&terms)).powf(1.0 / p))
}

/// `sup_lambda lambda * omega({x in B : |f| > lambda})^{1/p}`, exact on the
/// grid: the sup is attained just below a sample value of `|f|`.
pub fn weak_lp_quasinorm(f: &GridFunction, p: f64, omega: &WeightSpec, ball: &Ball) -> Result<f64> {
    check_p(p)?;
    let dom = f.domain();
    let mut cells: Vec<(f64, usize)> = dom
        .cells_in_ball(ball)
        .into_iter()
        .filter(|&i| f.get(i) != 0.0)
        .map(|i| (f.get(i).abs(), i))
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let vol = dom.cell_volume();
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut start = 0;
    while start < cells.len() {
        let level = cells[start].0;
        let end = start + cells[start..].iter().take_while(|c| c.0 == level).count();
        let group: Vec<f64> = cells[start..end]
            .iter()
            .map(|&(_, i)| weight_at(omega, dom, i))
            .collect();
        mass += pairwise_sum(&group);
        best = best.max(level * (vol * mass).powf(1.0 / p));
        start = end;
    }
    Ok(best)
}

fn morrey_scan(
    f: &GridFunction,
    p: f64,
    phi: &PhiSpec,
    omega: &WeightSpec,
    plan: &SamplingPlan,
    what: &'static str,
    inner: fn(&GridFunction, f64, &WeightSpec, &Ball) -> Result<f64>,
) -> Result<Sup> {
    check_p(p)?;
    phi.validate()?;
    let dom = f.domain();
    plan.validate(dom)?;
    let prefactor = phi.factors().inverse().with_weight(omega, -1.0 / p);
    let balls = plan.balls();
    scan_max(&balls, what, |b| {
        if dom.cells_in_ball(b).is_empty() {
            return None;
        }
        let norm = inner(f, p, omega, b).ok()?;
        if norm == 0.0 {
            return Some(0.0);
        }
        Some(prefactor.eval(b, dom, Path::Quadrature) * norm)
    })?
    .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// `max_{(x,r)} phi(x,r)^{-1} omega(B)^{-1/p} ||f||_{L^p(B, omega)}`.
pub fn morrey_norm(
    f: &GridFunction,
    p: f64,
    phi: &PhiSpec,
    omega: &WeightSpec,
    plan: &SamplingPlan,
) -> Result<Sup> {
    morrey_scan(f, p, phi, omega, plan, "Morrey norm", lp_norm)
}

/// [`morrey_norm`] with the weak quasinorm inside.
pub fn weak_morrey_norm(
    f: &GridFunction,
    p: f64,
    phi: &PhiSpec,
    omega: &WeightSpec,
    plan: &SamplingPlan,
) -> Result<Sup> {
    morrey_scan(f, p, phi, omega, plan, "weak Morrey norm", weak_lp_quasinorm)
}

/// [`morrey_norm`] restricted to balls centered at `x0`.
pub fn local_morrey_norm(
    f: &GridFunction,
    p: f64,
    phi: &PhiSpec,
    omega: &WeightSpec,
    x0: Point,
    plan: &SamplingPlan,
) -> Result<Sup> {
    morrey_norm(f, p, phi, omega, &plan.clone().with_centers(vec![x0]))
}

/// Weak variant of [`local_morrey_norm`].
pub fn local_weak_morrey_norm(
    f: &GridFunction,
    p: f64,
    phi: &PhiSpec,
    omega: &WeightSpec,
    x0: Point,
    plan: &SamplingPlan,
) -> Result<Sup> {
    weak_morrey_norm(f, p, phi, omega, &plan.clone().with_centers(vec![x0]))
}

/// Grid mean of `b` over `cells`, taken relative to the first sample so a
/// constant has mean exactly equal to itself.
fn grid_mean(b: &GridFunction, cells: &[usize]) -> f64 {
    let b0 = b.get(cells[0]);
    let diffs: Vec<f64> = cells.iter().map(|&i| b.get(i) - b0).collect();
    b0 + pairwise_sum(&diffs) / cells.len() as f64
}

/// `avg_B b` on the grid; `None` for a ball without cells.
pub fn ball_mean(b: &GridFunction, ball: &Ball) -> Option<f64> {
    let cells = b.domain().cells_in_ball(ball);
    (!cells.is_empty()).then(|| grid_mean(b, &cells))
}

fn oscillation(b: &GridFunction, p: f64, ball: &Ball) -> Option<f64> {
    let cells = b.domain().cells_in_ball(ball);
    if cells.is_empty() {
        return None;
    }
    let mean = grid_mean(b, &cells);
    let terms: Vec<f64> = cells.iter().map(|&i| (b.get(i) - mean).abs().powf(p)).collect();
    Some((pairwise_sum(&terms) / cells.len() as f64).powf(1.0 / p))
}

/// `max_B (avg_B |b - avg_B b|^p)^{1/p}` over the plan.
pub fn bmo_p_oscillation(b: &GridFunction, p: f64, plan: &SamplingPlan) -> Result<Sup> {
    check_p(p)?;
    plan.validate(b.domain())?;
    scan_max(&plan.balls(), "BMO oscillation", |ball| oscillation(b, p, ball))?
        .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// `max_B avg_B |b - avg_B b|`.
pub fn bmo_norm(b: &GridFunction, plan: &SamplingPlan) -> Result<Sup> {
    bmo_p_oscillation(b, 1.0, plan)
}

/// `(omega(B1)^{-1} int_{B1} |b - avg_{B2} b|^p omega)^{1/p}`.
pub fn two_radius_oscillation(
    b: &GridFunction,
    p: f64,
    omega: &WeightSpec,
    b1: &Ball,
    b2: &Ball,
) -> Result<f64> {
    check_p(p)?;
    let dom = b.domain();
    let mean = ball_mean(b, b2).ok_or_else(|| invalid("B2", "ball contains no cell"))?;
    let cells = dom.cells_in_ball(b1);
    if cells.is_empty() {
        return Err(invalid("B1", "ball contains no cell"));
    }
    let w: Vec<f64> = cells.iter().map(|&i| weight_at(omega, dom, i)).collect();
    let terms: Vec<f64> = cells
        .iter()
        .zip(&w)
        .map(|(&i, wi)| (b.get(i) - mean).abs().powf(p) * wi)
        .collect();
    Ok((pairwise_sum(&terms) / pairwise_sum(&w)).powf(1.0 / p))
}

/// Least-squares `(slope, intercept)` of `ys` against `xs`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}
