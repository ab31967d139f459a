//! Weights, multiple-weight vectors, exponent tuples, and numerical estimates
//! of the Muckenhoupt-type constants (`A_p`, `A_1`, `A_{P,q}`), doubling
//! ratios and the product-norm equivalence.
//!
//! Two evaluation paths exist. The quadrature path sums over cell centers and
//! takes averages against the grid measure of the ball. The semi-analytic path
//! applies when a power weight `|x - c|^a` is integrated over a ball centered
//! at `c` (or the weight is constant): the integral is the closed form
//! `sigma_{n-1} r^{n + s a} / (n + s a)` and averages use the continuum ball
//! volume. A divergent closed form (`n + s a <= 0`) is reported as `+inf`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{ball_volume, pairwise_sum, sphere_area, Ball, Domain, GridFunction, Point};
use crate::plan::{scan_max, scan_min, SamplingPlan, Sup};

/// A positive weight on `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// `scale * |x - center|^exponent`, distances clamped below at `h/2`.
    Power {
        center: Point,
        exponent: f64,
        scale: f64,
    },
    Grid(GridFunction),
}

/// Which integration path weight moments use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    Quadrature,
    SemiAnalytic,
}

impl Path {
    pub fn from_plan(plan: &SamplingPlan) -> Self {
        if plan.semi_analytic {
            Self::SemiAnalytic
        } else {
            Self::Quadrature
        }
    }
}

impl WeightSpec {
    pub fn unit() -> Self {
        Self::Constant { value: 1.0 }
    }

    /// `|x - center|^exponent`.
    pub fn power(center: Point, exponent: f64) -> Self {
        Self::Power {
            center,
            exponent,
            scale: 1.0,
        }
    }

    /// Wraps sampled values; every sample must be strictly positive.
    pub fn grid(samples: GridFunction) -> Result<Self> {
        if let Some((i, v)) = samples
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0))
        {
            return Err(invalid(
                "weight",
                format!("sample {v} at cell {i} is not positive"),
            ));
        }
        Ok(Self::Grid(samples))
    }

    pub fn eval(&self, p: &Point, h: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Power {
                center,
                exponent,
                scale,
            } => scale * center.dist(p).max(0.5 * h).powf(*exponent),
            Self::Grid(g) => g.value_at(p),
        }
    }

    /// Values at every cell center of `dom`.
    pub fn sample(&self, dom: &Domain) -> Vec<f64> {
        match self {
            Self::Grid(g) if g.domain() == dom => g.values().to_vec(),
            _ => {
                let h = dom.spacing();
                dom.centers().map(|c| self.eval(&c, h)).collect()
            }
        }
    }

    /// `omega^s`.
    pub fn pow(&self, s: f64) -> Self {
        match self {
            Self::Constant { value } => Self::Constant {
                value: value.powf(s),
            },
            Self::Power {
                center,
                exponent,
                scale,
            } => Self::Power {
                center: *center,
                exponent: exponent * s,
                scale: scale.powf(s),
            },
            Self::Grid(g) => Self::Grid(g.map(|v| v.powf(s))),
        }
    }

    /// `c * omega`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Self::Constant { value } => Self::Constant { value: c * value },
            Self::Power {
                center,
                exponent,
                scale,
            } => Self::Power {
                center: *center,
                exponent: *exponent,
                scale: c * scale,
            },
            Self::Grid(g) => Self::Grid(g.scale(c)),
        }
    }

    /// Pointwise product; stays in closed form when both factors are constant
    /// or power laws about the same center, otherwise samples on `dom`.
    pub fn product(&self, other: &Self, dom: &Domain) -> Self {
        use WeightSpec::*;
        match (self, other) {
            (Constant { value: a }, Constant { value: b }) => Constant { value: a * b },
            (Constant { value: c }, w @ Power { .. }) | (w @ Power { .. }, Constant { value: c }) => {
                w.scaled(*c)
            }
            (
                Power {
                    center: c1,
                    exponent: a1,
                    scale: s1,
                },
                Power {
                    center: c2,
                    exponent: a2,
                    scale: s2,
                },
            ) if c1 == c2 => Power {
                center: *c1,
                exponent: a1 + a2,
                scale: s1 * s2,
            },
            _ => {
                let a = self.sample(dom);
                let b = other.sample(dom);
                let values = a.iter().zip(&b).map(|(x, y)| x * y).collect();
                Grid(GridFunction::new(*dom, values).expect("product of finite weights"))
            }
        }
    }

    /// Closed form of `int_B omega^s`, when this weight admits one on `ball`.
    pub fn closed_form_moment(&self, s: f64, ball: &Ball) -> Option<f64> {
        let n = ball.center.dim();
        match self {
            Self::Constant { value } => Some(value.powf(s) * ball_volume(n, ball.radius).ok()?),
            Self::Power {
                center,
                exponent,
                scale,
            } if *center == ball.center => {
                let e = n as f64 + s * exponent;
                if e <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(scale.powf(s) * sphere_area(n) * ball.radius.powf(e) / e)
                }
            }
            _ => None,
        }
    }

    /// `int_B omega^s` along `path`; `+inf` for a divergent closed form.
    pub fn moment(&self, s: f64, ball: &Ball, dom: &Domain, path: Path) -> f64 {
        if path == Path::SemiAnalytic {
            if let Some(v) = self.closed_form_moment(s, ball) {
                return v;
            }
        }
        let h = dom.spacing();
        let terms: Vec<f64> = dom
            .cells_in_ball(ball)
            .into_iter()
            .map(|i| match self {
                Self::Grid(g) if g.domain() == dom => g.get(i).powf(s),
                _ => self.eval(&dom.center(i), h).powf(s),
            })
            .collect();
        dom.cell_volume() * pairwise_sum(&terms)
    }

    /// Average of `omega^s` over `ball` together with the measure used.
    fn average(&self, s: f64, ball: &Ball, dom: &Domain, path: Path) -> Option<f64> {
        if path == Path::SemiAnalytic {
            if let Some(v) = self.closed_form_moment(s, ball) {
                return Some(v / ball_volume(ball.center.dim(), ball.radius).ok()?);
            }
        }
        let cells = dom.cells_in_ball(ball);
        if cells.is_empty() {
            return None;
        }
        let h = dom.spacing();
        let terms: Vec<f64> = cells
            .iter()
            .map(|&i| match self {
                Self::Grid(g) if g.domain() == dom => g.get(i).powf(s),
                _ => self.eval(&dom.center(i), h).powf(s),
            })
            .collect();
        Some(pairwise_sum(&terms) / cells.len() as f64)
    }

    /// Minimum over the cell centers in `ball` (the grid essinf).
    fn grid_min(&self, ball: &Ball, dom: &Domain) -> Option<f64> {
        let h = dom.spacing();
        dom.cells_in_ball(ball)
            .into_iter()
            .map(|i| match self {
                Self::Grid(g) if g.domain() == dom => g.get(i),
                _ => self.eval(&dom.center(i), h),
            })
            .reduce(f64::min)
    }
}

/// `||omega||_{L^s(B)} = (int_B omega^s)^{1/s}`; `+inf` when not integrable.
pub fn lq_norm_on_ball(omega: &WeightSpec, s: f64, ball: &Ball, dom: &Domain, path: Path) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(invalid("s", format!("exponent must be >= 1, got {s}")));
    }
    Ok(omega.moment(s, ball, dom, path).powf(1.0 / s))
}

/// `(omega_1, ..., omega_m)` on a shared domain.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    components: Vec<WeightSpec>,
}

impl WeightVector {
    pub fn new(components: Vec<WeightSpec>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("weights", "need at least one component"));
        }
        for w in &components {
            match w {
                WeightSpec::Constant { value } if !(*value > 0.0) => {
                    return Err(invalid("weights", format!("constant {value} is not positive")))
                }
                WeightSpec::Power { scale, .. } if !(*scale > 0.0) => {
                    return Err(invalid("weights", format!("scale {scale} is not positive")))
                }
                _ => {}
            }
        }
        Ok(Self { components })
    }

    pub fn unit(m: usize) -> Self {
        Self {
            components: vec![WeightSpec::unit(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[WeightSpec] {
        &self.components
    }

    /// `u = prod omega_i`.
    pub fn product(&self, dom: &Domain) -> WeightSpec {
        let mut it = self.components.iter();
        let first = it.next().expect("non-empty").clone();
        it.fold(first, |acc, w| acc.product(w, dom))
    }
}

/// `(p_i, q_i, alpha_i)` with `1/p = sum 1/p_i`, `alpha_i/n = 1/p_i - 1/q_i`,
/// `alpha = sum alpha_i`, `1/q = sum 1/q_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentConfig {
    dim: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    alpha: Vec<f64>,
}

impl ExponentConfig {
    /// From the `p_i` and the split `alpha_i`.
    pub fn from_alphas(dim: usize, p: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("p", "need at least one exponent"));
        }
        if p.len() != alpha.len() {
            return Err(invalid(
                "alpha",
                format!("{} values for {} exponents", alpha.len(), p.len()),
            ));
        }
        if !(1..=3).contains(&dim) {
            return Err(invalid("dimension", format!("{dim} not in 1..=3")));
        }
        let n = dim as f64;
        let mut q = Vec::with_capacity(p.len());
        for (i, (&pi, &ai)) in p.iter().zip(&alpha).enumerate() {
            if !(pi >= 1.0 && pi.is_finite()) {
                return Err(invalid("p", format!("p_{} = {pi} is not in [1, inf)", i + 1)));
            }
            let ratio = ai / n;
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(invalid(
                    "alpha",
                    format!("alpha_{}/n = {ratio} is not in (0, 1)", i + 1),
                ));
            }
            let inv_q = 1.0 / pi - ratio;
            if !(inv_q > 0.0) {
                return Err(invalid(
                    "alpha",
                    format!("1/q_{} = 1/p_{} - alpha_{}/n = {inv_q} must be positive", i + 1, i + 1, i + 1),
                ));
            }
            q.push(1.0 / inv_q);
        }
        Ok(Self { dim, p, q, alpha })
    }

    /// From the `p_i` and targets `q_i`.
    pub fn from_targets(dim: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(invalid("q", format!("{} values for {} exponents", q.len(), p.len())));
        }
        let n = dim as f64;
        let alpha = p.iter().zip(&q).map(|(pi, qi)| n * (1.0 / pi - 1.0 / qi)).collect();
        Self::from_alphas(dim, p, alpha)
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn p_total(&self) -> f64 {
        1.0 / self.p.iter().map(|p| 1.0 / p).sum::<f64>()
    }

    pub fn q_total(&self) -> f64 {
        1.0 / self.q.iter().map(|q| 1.0 / q).sum::<f64>()
    }

    pub fn alpha_total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn min_p(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `sup_B (avg_B omega) (avg_B omega^{-1/(p-1)})^{p-1}` over the plan.
pub fn ap_constant(omega: &WeightSpec, p: f64, plan: &SamplingPlan, dom: &Domain) -> Result<Sup> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("A_p needs p > 1, got {p}")));
    }
    let path = Path::from_plan(plan);
    let dual = -1.0 / (p - 1.0);
    let balls = plan.balls();
    scan_max(&balls, "A_p constant", |b| {
        let a = omega.average(1.0, b, dom, path)?;
        let d = omega.average(dual, b, dom, path)?;
        Some(a * d.powf(p - 1.0))
    })?
    .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// `sup_B (avg_B omega) / essinf_B omega`.
pub fn a1_constant(omega: &WeightSpec, plan: &SamplingPlan, dom: &Domain) -> Result<Sup> {
    let path = Path::from_plan(plan);
    let balls = plan.balls();
    scan_max(&balls, "A_1 constant", |b| {
        Some(omega.average(1.0, b, dom, path)? / omega.grid_min(b, dom)?)
    })?
    .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// Finite `A_p` constant at `p`, used as the `A_inf` membership proxy.
pub fn a_infinity_proxy(omega: &WeightSpec, p: f64, plan: &SamplingPlan, dom: &Domain) -> Result<bool> {
    Ok(ap_constant(omega, p, plan, dom)?.value.is_finite())
}

/// `sup_B (avg u^q)^{1/q} prod_i (avg omega_i^{-p_i'})^{1/p_i'}`, with the
/// `p_i = 1` factor read as `(essinf_B omega_i)^{-1}`.
pub fn apq_constant(
    w: &WeightVector,
    cfg: &ExponentConfig,
    plan: &SamplingPlan,
    dom: &Domain,
) -> Result<Sup> {
    if w.len() != cfg.m() {
        return Err(invalid(
            "weights",
            format!("{} weights for m = {}", w.len(), cfg.m()),
        ));
    }
    let path = Path::from_plan(plan);
    let q = cfg.q_total();
    let u = w.product(dom);
    let balls = plan.balls();
    scan_max(&balls, "A_{P,q} constant", |b| {
        let mut value = u.average(q, b, dom, path)?.powf(1.0 / q);
        for (omega, &pi) in w.components().iter().zip(cfg.p()) {
            let factor = if pi == 1.0 {
                1.0 / omega.grid_min(b, dom)?
            } else {
                let conj = pi / (pi - 1.0);
                omega.average(-conj, b, dom, path)?.powf(1.0 / conj)
            };
            value *= factor;
        }
        Some(value)
    })?
    .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// `sup_B omega(lambda B) / omega(B)`.
pub fn doubling_ratio(omega: &WeightSpec, lambda: f64, plan: &SamplingPlan, dom: &Domain) -> Result<Sup> {
    if !(lambda > 1.0) {
        return Err(invalid("lambda", format!("must exceed 1, got {lambda}")));
    }
    let path = Path::from_plan(plan);
    let balls = plan.balls();
    scan_max(&balls, "doubling ratio", |b| {
        let inner = omega.moment(1.0, b, dom, path);
        if inner == 0.0 {
            return None;
        }
        Some(omega.moment(1.0, &b.dilate(lambda), dom, path) / inner)
    })?
    .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))
}

/// Extremes over the plan of `prod_i ||omega_i||_{L^{q_i}(B)} / ||u||_{L^q(B)}`.
pub fn norm_equivalence_ratio(
    w: &WeightVector,
    cfg: &ExponentConfig,
    plan: &SamplingPlan,
    dom: &Domain,
) -> Result<(Sup, Sup)> {
    if w.len() != cfg.m() {
        return Err(invalid(
            "weights",
            format!("{} weights for m = {}", w.len(), cfg.m()),
        ));
    }
    let path = Path::from_plan(plan);
    let q = cfg.q_total();
    let u = w.product(dom);
    let balls = plan.balls();
    let ratio = |b: &Ball| {
        let den = u.moment(q, b, dom, path).powf(1.0 / q);
        if den == 0.0 {
            return None;
        }
        let num: f64 = w
            .components()
            .iter()
            .zip(cfg.q())
            .map(|(omega, &qi)| omega.moment(qi, b, dom, path).powf(1.0 / qi))
            .product();
        Some(num / den)
    };
    let lo = scan_min(&balls, "norm equivalence", ratio)?;
    let hi = scan_max(&balls, "norm equivalence", ratio)?;
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(invalid("plan", "no ball of the plan contains a cell")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, sample_function, TestFunctionSpec};

    fn centered_plan(r_min: f64, r_max: f64) -> SamplingPlan {
        SamplingPlan::centered(1, r_min, r_max, 4).unwrap()
    }

    #[test]
    fn lq_norm_closed_forms() {
        let dom = build_domain(1, 4.0, 4096).unwrap();
        let ball = Ball::new(Point::x(0.0), 1.0).unwrap();
        let one = lq_norm_on_ball(&WeightSpec::unit(), 2.0, &ball, &dom, Path::SemiAnalytic).unwrap();
        assert!((one - 2f64.sqrt()).abs() < 1e-15);

        let sqrt = WeightSpec::power(Point::x(0.0), 0.5);
        for r in [0.25, 0.5, 1.0, 2.0] {
            let b = Ball::new(Point::x(0.0), r).unwrap();
            let exact = lq_norm_on_ball(&sqrt, 2.0, &b, &dom, Path::SemiAnalytic).unwrap();
            assert!((exact - r).abs() < 1e-14 * r.max(1.0));
            let quad = lq_norm_on_ball(&sqrt, 2.0, &b, &dom, Path::Quadrature).unwrap();
            assert!((quad - r).abs() / r < 0.01, "r = {r}: {quad}");
        }

        let inv = WeightSpec::power(Point::x(0.0), -1.0);
        let v = lq_norm_on_ball(&inv, 1.0, &ball, &dom, Path::SemiAnalytic).unwrap();
        assert!(v.is_infinite());
        assert!(lq_norm_on_ball(&inv, 0.5, &ball, &dom, Path::SemiAnalytic).is_err());
    }

    #[test]
    fn ap_of_constant_is_exactly_one() {
        let dom = build_domain(1, 8.0, 256).unwrap();
        let plan = SamplingPlan::default_for(&dom, 4).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let s = ap_constant(&WeightSpec::unit(), p, &plan, &dom).unwrap();
            assert_eq!(s.value, 1.0);
            let s = ap_constant(&WeightSpec::unit(), p, &plan.clone().quadrature_only(), &dom).unwrap();
            assert_eq!(s.value, 1.0);
        }
    }

    #[test]
    fn ap_of_square_root_weight() {
        let dom = build_domain(1, 32.0, 4096).unwrap();
        let plan = centered_plan(1.0 / 32.0, 32.0);
        let s = ap_constant(&WeightSpec::power(Point::x(0.0), 0.5), 2.0, &plan, &dom).unwrap();
        assert!((s.value - 4.0 / 3.0).abs() / (4.0 / 3.0) < 0.02, "{}", s.value);
        assert!(ap_constant(&WeightSpec::unit(), 1.0, &plan, &dom).is_err());
    }

    #[test]
    fn ap_of_non_integrable_weight() {
        let dom = build_domain(1, 4.0, 256).unwrap();
        let plan = centered_plan(dom.spacing(), 2.0);
        let w = WeightSpec::power(Point::x(0.0), -1.0);
        let s = ap_constant(&w, 2.0, &plan, &dom).unwrap();
        assert!(s.is_infinite());
        assert_eq!(s.center, Point::x(0.0));
        // the quadrature estimate keeps growing under refinement
        let values: Vec<f64> = [256usize, 512, 1024]
            .iter()
            .map(|&n| {
                let d = build_domain(1, 4.0, n).unwrap();
                let pl = centered_plan(d.spacing(), 2.0).quadrature_only();
                ap_constant(&w, 2.0, &pl, &d).unwrap().value
            })
            .collect();
        assert!(values.windows(2).all(|v| v[1] > v[0]), "{values:?}");
    }

    #[test]
    fn ap_scaling_invariance() {
        let dom = build_domain(1, 4.0, 512).unwrap();
        let plan = SamplingPlan::default_for(&dom, 4).unwrap();
        let w = WeightSpec::power(Point::x(0.0), 0.3);
        let base = ap_constant(&w, 2.0, &plan, &dom).unwrap().value;
        // powers of two scale every average exactly
        let exact = ap_constant(&w.scaled(4.0), 2.0, &plan, &dom).unwrap().value;
        assert_eq!(base, exact);
        let quad = plan.clone().quadrature_only();
        let b = ap_constant(&w, 2.0, &quad, &dom).unwrap().value;
        let s = ap_constant(&w.scaled(3.7), 2.0, &quad, &dom).unwrap().value;
        assert!((b - s).abs() <= 1e-12 * b);
        assert!(b >= 1.0);
    }

    #[test]
    fn a1_constants() {
        let dom = build_domain(1, 4.0, 1024).unwrap();
        let plan = centered_plan(0.125, 2.0);
        assert_eq!(a1_constant(&WeightSpec::unit(), &plan, &dom).unwrap().value, 1.0);
        let decreasing = WeightSpec::power(Point::x(0.0), -0.5);
        let v = a1_constant(&decreasing, &plan, &dom).unwrap().value;
        assert!((v - 2.0).abs() < 0.05, "{v}");
        let increasing = WeightSpec::power(Point::x(0.0), 0.5);
        let coarse = a1_constant(&increasing, &plan, &dom).unwrap().value;
        let d2 = dom.refined(4);
        let fine = a1_constant(&increasing, &plan, &d2).unwrap().value;
        assert!(fine > 1.8 * coarse, "{coarse} -> {fine}");
    }

    fn cfg_half() -> ExponentConfig {
        ExponentConfig::from_alphas(1, vec![2.0, 2.0], vec![0.25, 0.25]).unwrap()
    }

    #[test]
    fn exponent_config_relations() {
        let c = cfg_half();
        assert_eq!(c.q(), &[4.0, 4.0]);
        assert_eq!(c.q_total(), 2.0);
        assert_eq!(c.p_total(), 1.0);
        assert_eq!(c.alpha_total(), 0.5);
        let inv_q = 1.0 / c.q_total();
        assert!((inv_q - (1.0 / c.p_total() - c.alpha_total())).abs() < 1e-15);
        let t = ExponentConfig::from_targets(1, vec![2.0, 2.0], vec![4.0, 4.0]).unwrap();
        assert_eq!(t.alpha(), &[0.25, 0.25]);
        assert!(ExponentConfig::from_alphas(1, vec![0.5, 2.0], vec![0.25, 0.25]).is_err());
        assert!(ExponentConfig::from_alphas(1, vec![2.0, 2.0], vec![1.0, 0.25]).is_err());
        assert!(ExponentConfig::from_alphas(1, vec![2.0, 2.0], vec![0.6, 0.25]).is_err());
        assert!(ExponentConfig::from_alphas(1, vec![2.0], vec![0.25, 0.25]).is_err());
    }

    #[test]
    fn apq_unit_weights_are_one() {
        let dom = build_domain(1, 4.0, 256).unwrap();
        let plan = SamplingPlan::default_for(&dom, 4).unwrap();
        let s = apq_constant(&WeightVector::unit(2), &cfg_half(), &plan, &dom).unwrap();
        assert_eq!(s.value, 1.0);
        let s = apq_constant(&WeightVector::unit(2), &cfg_half(), &plan.clone().quadrature_only(), &dom).unwrap();
        assert_eq!(s.value, 1.0);
        let m1 = ExponentConfig::from_alphas(1, vec![2.0], vec![0.25]).unwrap();
        let s = apq_constant(&WeightVector::unit(1), &m1, &plan, &dom).unwrap();
        assert_eq!(s.value, 1.0);
        assert!(apq_constant(&WeightVector::unit(1), &cfg_half(), &plan, &dom).is_err());
    }

    #[test]
    fn apq_power_weights_stable_under_refinement() {
        let w = WeightVector::new(vec![
            WeightSpec::power(Point::x(0.0), 0.125),
            WeightSpec::power(Point::x(0.0), 0.125),
        ])
        .unwrap();
        let values: Vec<f64> = [512usize, 1024]
            .iter()
            .map(|&n| {
                let dom = build_domain(1, 8.0, n).unwrap();
                let plan = SamplingPlan::default_for(&dom, 4).unwrap();
                apq_constant(&w, &cfg_half(), &plan, &dom).unwrap().value
            })
            .collect();
        assert!(values[0].is_finite());
        assert!((values[1] - values[0]).abs() / values[0] < 0.05, "{values:?}");
    }

    #[test]
    fn apq_detects_non_integrable_dual_weight() {
        // omega_1^{-p_1'} = |x|^{-2}: divergent closed form, growing quadrature
        let w = WeightVector::new(vec![
            WeightSpec::power(Point::x(0.0), 1.0),
            WeightSpec::unit(),
        ])
        .unwrap();
        let dom = build_domain(1, 4.0, 256).unwrap();
        let plan = centered_plan(dom.spacing(), 2.0);
        assert!(apq_constant(&w, &cfg_half(), &plan, &dom).unwrap().is_infinite());
        let grow: Vec<f64> = [256usize, 512, 1024]
            .iter()
            .map(|&n| {
                let d = build_domain(1, 4.0, n).unwrap();
                let pl = centered_plan(d.spacing(), 2.0).quadrature_only();
                apq_constant(&w, &cfg_half(), &pl, &d).unwrap().value
            })
            .collect();
        assert!(grow[1] > 1.3 * grow[0] && grow[2] > 1.3 * grow[1], "{grow:?}");
    }

    #[test]
    fn doubling_ratios() {
        let dom = build_domain(1, 8.0, 2048).unwrap();
        // interior balls so that lambda B stays inside the box
        let plan = SamplingPlan::centered(1, 0.25, 2.0, 4).unwrap();
        let one = WeightSpec::unit();
        let quad = plan.clone().quadrature_only();
        let v = doubling_ratio(&one, 2.0, &quad, &dom).unwrap().value;
        assert!((v - 2.0).abs() <= 4.0 * dom.spacing() / 0.25, "{v}");
        let v = doubling_ratio(&one, 1.5, &quad, &dom).unwrap().value;
        assert!((v - 1.5).abs() <= 4.0 * dom.spacing() / 0.25, "{v}");
        let sqrt = WeightSpec::power(Point::x(0.0), 0.5);
        let v = doubling_ratio(&sqrt, 2.0, &plan, &dom).unwrap().value;
        assert!((v - 2f64.powf(1.5)).abs() / 2f64.powf(1.5) < 0.02);
        let v = doubling_ratio(&sqrt, 2.0, &quad, &dom).unwrap().value;
        assert!((v - 2f64.powf(1.5)).abs() / 2f64.powf(1.5) < 0.02, "{v}");
    }

    #[test]
    fn doubling_two_dimensional_constant() {
        let dom = build_domain(2, 4.0, 256).unwrap();
        let plan = SamplingPlan::centered(2, 0.5, 1.0, 2).unwrap().quadrature_only();
        let v = doubling_ratio(&WeightSpec::unit(), 2.0, &plan, &dom).unwrap().value;
        assert!((v - 4.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn norm_equivalence_unit_and_power() {
        let dom = build_domain(1, 16.0, 1024).unwrap();
        let plan = SamplingPlan::centered(1, 1.0 / 16.0, 16.0, 4).unwrap();
        let (lo, hi) = norm_equivalence_ratio(&WeightVector::unit(2), &cfg_half(), &plan, &dom).unwrap();
        assert!((lo.value - 1.0).abs() < 1e-12 && (hi.value - 1.0).abs() < 1e-12);
        let w = WeightVector::new(vec![
            WeightSpec::power(Point::x(0.0), 0.125),
            WeightSpec::power(Point::x(0.0), 0.125),
        ])
        .unwrap();
        let (lo, hi) = norm_equivalence_ratio(&w, &cfg_half(), &plan, &dom).unwrap();
        assert!(hi.value / lo.value < 4.0);
        let (lo2, hi2) =
            norm_equivalence_ratio(&w, &cfg_half(), &plan.clone().quadrature_only(), &dom).unwrap();
        assert!(hi2.value / lo2.value < 4.0);
        // c_i omega_i leaves the ratio unchanged
        let scaled = WeightVector::new(vec![
            w.components()[0].scaled(3.0),
            w.components()[1].scaled(0.2),
        ])
        .unwrap();
        let (slo, shi) = norm_equivalence_ratio(&scaled, &cfg_half(), &plan, &dom).unwrap();
        assert!((slo.value - lo.value).abs() < 1e-12 * lo.value);
        assert!((shi.value - hi.value).abs() < 1e-12 * hi.value);
    }

    #[test]
    fn norm_equivalence_exponential_weight_is_reported() {
        let dom = build_domain(1, 4.0, 256).unwrap();
        let e = sample_function(&TestFunctionSpec::Exponential { axis: 0 }, &dom).unwrap();
        let w = WeightVector::new(vec![WeightSpec::grid(e).unwrap(), WeightSpec::unit()]).unwrap();
        let plan = SamplingPlan::default_for(&dom, 2).unwrap();
        let (lo, hi) = norm_equivalence_ratio(&w, &cfg_half(), &plan, &dom).unwrap();
        assert!(lo.value > 0.0 && hi.value >= lo.value);
    }

    #[test]
    fn product_weight_stays_closed_form() {
        let dom = build_domain(1, 1.0, 8).unwrap();
        let a = WeightSpec::power(Point::x(0.0), 0.25);
        let u = WeightVector::new(vec![a.clone(), a.scaled(2.0)]).unwrap().product(&dom);
        assert_eq!(
            u,
            WeightSpec::Power {
                center: Point::x(0.0),
                exponent: 0.5,
                scale: 2.0
            }
        );
        let off = WeightSpec::power(Point::x(0.5), 0.25);
        assert!(matches!(a.product(&off, &dom), WeightSpec::Grid(_)));
        assert!(WeightSpec::grid(GridFunction::zeros(dom)).is_err());
    }
}
