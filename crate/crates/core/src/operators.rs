//! Multilinear fractional maximal and integral operators and their iterated
//! and sum commutators, evaluated at arbitrary points of the box.
//!
//! The integral is the full tuple sum
//! `h^{mn} sum prod_i g_i(y_i) * max(sum |x - y_i|, h/2)^{alpha - mn}`,
//! where `g_i` is `f_i` or `(b_i(x) - b_i(.)) f_i`. Components are summed in a
//! canonical order, so permuting the inputs repeats the same arithmetic.
//!
//! The maximal operator scans the radius ladder:
//! `max_t |B(x,t)|^{-m + alpha/n} prod_i h^n sum_{B(x,t)} |g_i|`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{ball_volume, pairwise_sum, Domain, GridFunction, Point};
use crate::plan::LogLadder;
use crate::spaces::ball_mean;

/// Inputs shared by every operator.
#[derive(Clone, Debug)]
pub struct OperatorRequest {
    pub functions: Vec<GridFunction>,
    pub symbols: Option<Vec<GridFunction>>,
    pub alpha: f64,
    pub points: Vec<Point>,
    pub radii: LogLadder,
}

impl OperatorRequest {
    /// Request evaluated on every 4th cell center, radii from `h` to `2L`.
    pub fn new(functions: Vec<GridFunction>, alpha: f64) -> Result<Self> {
        let dom = *functions
            .first()
            .ok_or_else(|| invalid("functions", "need at least one input"))?
            .domain();
        Ok(Self {
            points: dom.sublattice(4),
            radii: LogLadder::spanning(dom.spacing(), 2.0 * dom.half_width(), 8)?,
            functions,
            symbols: None,
            alpha,
        })
    }

    pub fn with_symbols(mut self, symbols: Vec<GridFunction>) -> Self {
        self.symbols = Some(symbols);
        self
    }

    pub fn with_points(mut self, points: Vec<Point>) -> Self {
        self.points = points;
        self
    }

    pub fn with_radii(mut self, radii: LogLadder) -> Self {
        self.radii = radii;
        self
    }

    pub fn m(&self) -> usize {
        self.functions.len()
    }

    pub fn domain(&self) -> &Domain {
        self.functions[0].domain()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.functions.first() else {
            return Err(invalid("functions", "need at least one input"));
        };
        let dom = first.domain();
        if self.functions.iter().any(|f| f.domain() != dom) {
            return Err(invalid("functions", "inputs live on different domains"));
        }
        if let Some(b) = &self.symbols {
            if b.len() != self.m() {
                return Err(invalid(
                    "symbols",
                    format!("{} symbols for {} functions", b.len(), self.m()),
                ));
            }
            if b.iter().any(|g| g.domain() != dom) {
                return Err(invalid("symbols", "symbols live on a different domain"));
            }
        }
        let mn = (self.m() * dom.dim()) as f64;
        if !(self.alpha > 0.0 && self.alpha < mn) {
            return Err(invalid("alpha", format!("{} is not in (0, {mn})", self.alpha)));
        }
        if self.points.is_empty() {
            return Err(invalid("points", "empty evaluation set"));
        }
        if let Some(p) = self.points.iter().find(|p| p.dim() != dom.dim()) {
            return Err(invalid("points", format!("{p} has the wrong dimension")));
        }
        if self.radii.start < dom.spacing() * (1.0 - 1e-12) {
            return Err(invalid(
                "radii",
                format!("smallest radius {} is below h = {}", self.radii.start, dom.spacing()),
            ));
        }
        Ok(())
    }

    fn symbols(&self) -> Result<&[GridFunction]> {
        self.symbols
            .as_deref()
            .ok_or_else(|| invalid("symbols", "commutators need symbols b"))
    }
}

/// Which symbol factors enter the integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Commutator {
    None,
    Iterated,
    /// Zero-based component index.
    Sum(usize),
}

/// The six operators of the family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Maximal,
    Integral,
    IteratedMaximal,
    IteratedIntegral,
    SumMaximal(usize),
    SumIntegral(usize),
}

impl OperatorKind {
    pub fn is_maximal(self) -> bool {
        matches!(self, Self::Maximal | Self::IteratedMaximal | Self::SumMaximal(_))
    }

    pub fn commutator(self) -> Commutator {
        match self {
            Self::Maximal | Self::Integral => Commutator::None,
            Self::IteratedMaximal | Self::IteratedIntegral => Commutator::Iterated,
            Self::SumMaximal(j) | Self::SumIntegral(j) => Commutator::Sum(j),
        }
    }

    pub fn name(self) -> String {
        match self {
            Self::Maximal => "maximal".into(),
            Self::Integral => "integral".into(),
            Self::IteratedMaximal => "iterated_maximal".into(),
            Self::IteratedIntegral => "iterated_integral".into(),
            Self::SumMaximal(j) => format!("sum_maximal_{}", j + 1),
            Self::SumIntegral(j) => format!("sum_integral_{}", j + 1),
        }
    }
}

/// Operator values at the evaluation points. Maximal operators also carry
/// the maximizing radius and an upper envelope of the sup between ladder
/// nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub argmax: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Evaluation {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `upper / value` over points with a nonzero value.
    pub fn ladder_gap(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.upper)
            .filter(|(v, _)| **v > 0.0)
            .map(|(v, u)| u / v)
            .fold(1.0, f64::max)
    }
}

/// Whether component `i` carries the factor `b_i(x) - b_i(y)`.
fn factor(comm: Commutator, i: usize) -> bool {
    match comm {
        Commutator::None => false,
        Commutator::Iterated => true,
        Commutator::Sum(j) => i == j,
    }
}

/// Nonzero integrand values of component `i` at `x` as `(|x - y|, g(y))`.
fn support(req: &OperatorRequest, comm: Commutator, i: usize, x: &Point) -> Vec<(f64, f64)> {
    let f = &req.functions[i];
    let dom = f.domain();
    let bx = if factor(comm, i) {
        let b = &req.symbols.as_ref().expect("validated")[i];
        Some((b, b.value_at(x)))
    } else {
        None
    };
    (0..dom.cell_count())
        .filter_map(|k| {
            let v = f.get(k);
            if v == 0.0 {
                return None;
            }
            let g = match bx {
                Some((b, bxv)) => (bxv - b.get(k)) * v,
                None => v,
            };
            (g != 0.0).then(|| (x.dist(&dom.center(k)), g))
        })
        .collect()
}

/// Order on `(distance, |value|)`; blind to sign, so negating a symbol keeps
/// the summation order.
fn canonical_cmp(a: &[(f64, f64)], b: &[(f64, f64)]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.0.total_cmp(&q.0).then(p.1.abs().total_cmp(&q.1.abs())))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn inner_sum(lists: &[Vec<(f64, f64)>], s: f64, e: f64, floor: f64) -> f64 {
    let (head, rest) = lists.split_first().expect("non-empty");
    if rest.is_empty() {
        head.iter().map(|&(d, v)| v * (s + d).max(floor).powf(e)).sum()
    } else {
        head.iter().map(|&(d, v)| v * inner_sum(rest, s + d, e, floor)).sum()
    }
}

fn tuple_sum(lists: &[Vec<(f64, f64)>], e: f64, floor: f64) -> f64 {
    let (head, rest) = lists.split_first().expect("non-empty");
    let partials: Vec<f64> = if rest.is_empty() {
        head.iter().map(|&(d, v)| v * d.max(floor).powf(e)).collect()
    } else {
        head.iter().map(|&(d, v)| v * inner_sum(rest, d, e, floor)).collect()
    };
    pairwise_sum(&partials)
}

fn integral_at(req: &OperatorRequest, comm: Commutator, x: &Point) -> f64 {
    let dom = req.domain();
    let m = req.m();
    let mut lists: Vec<Vec<(f64, f64)>> = (0..m).map(|i| support(req, comm, i, x)).collect();
    if lists.iter().any(Vec::is_empty) {
        return 0.0;
    }
    lists.sort_by(|a, b| canonical_cmp(a, b));
    let e = req.alpha - (m * dom.dim()) as f64;
    dom.cell_volume().powi(m as i32) * tuple_sum(&lists, e, 0.5 * dom.spacing())
}

fn maximal_at(req: &OperatorRequest, comm: Commutator, x: &Point) -> (f64, f64, f64) {
    let dom = req.domain();
    let n = dom.dim();
    let m = req.m();
    let vol = dom.cell_volume();
    let mut order: Vec<(f64, usize)> = (0..dom.cell_count())
        .map(|k| (x.dist2(&dom.center(k)), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let abs_values: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let f = &req.functions[i];
            let b = factor(comm, i).then(|| {
                let b = &req.symbols.as_ref().expect("validated")[i];
                (b, b.value_at(x))
            });
            order
                .iter()
                .map(|&(_, k)| match b {
                    Some((b, bx)) => ((bx - b.get(k)) * f.get(k)).abs(),
                    None => f.get(k).abs(),
                })
                .collect()
        })
        .collect();
    let power = -(m as f64) + req.alpha / n as f64;
    let radii = req.radii.nodes();
    let mut sums = vec![0.0; m];
    let mut cursor = 0;
    // integrals over B(x, t_k) for every ladder node
    let mut integrals: Vec<Vec<f64>> = Vec::with_capacity(radii.len());
    for &t in &radii {
        let t2 = t * t;
        while cursor < order.len() && order[cursor].0 <= t2 {
            for (s, vals) in sums.iter_mut().zip(&abs_values) {
                *s += vals[cursor];
            }
            cursor += 1;
        }
        integrals.push(sums.iter().map(|s| vol * s).collect());
    }
    let product = |ints: &[f64]| {
        let mut f = ints.to_vec();
        f.sort_by(f64::total_cmp);
        f.iter().product::<f64>()
    };
    let mut best = (0.0, radii[0]);
    let mut upper = 0.0f64;
    for (k, &t) in radii.iter().enumerate() {
        let scale = ball_volume(n, t).expect("positive radius").powf(power);
        let v = scale * product(&integrals[k]);
        if v > best.0 {
            best = (v, t);
        }
        let next = integrals.get(k + 1).unwrap_or(&integrals[k]);
        upper = upper.max(scale * product(next));
    }
    (best.0, best.1, upper.max(best.0))
}

fn evaluate(req: &OperatorRequest, kind: OperatorKind) -> Result<Evaluation> {
    req.validate()?;
    let comm = kind.commutator();
    if comm != Commutator::None {
        req.symbols()?;
    }
    if let Commutator::Sum(j) = comm {
        if j >= req.m() {
            return Err(invalid(
                "j",
                format!("component {} out of 1..={}", j + 1, req.m()),
            ));
        }
    }
    if kind.is_maximal() {
        let rows: Vec<(f64, f64, f64)> = req
            .points
            .par_iter()
            .map(|x| maximal_at(req, comm, x))
            .collect();
        Ok(Evaluation {
            points: req.points.clone(),
            values: rows.iter().map(|r| r.0).collect(),
            argmax: rows.iter().map(|r| r.1).collect(),
            upper: rows.iter().map(|r| r.2).collect(),
        })
    } else {
        let values = req
            .points
            .par_iter()
            .map(|x| integral_at(req, comm, x))
            .collect();
        Ok(Evaluation {
            points: req.points.clone(),
            values,
            argmax: Vec::new(),
            upper: Vec::new(),
        })
    }
}

/// Runs any operator of the family.
pub fn apply(req: &OperatorRequest, kind: OperatorKind) -> Result<Evaluation> {
    evaluate(req, kind)
}

pub fn frac_maximal(req: &OperatorRequest) -> Result<Evaluation> {
    evaluate(req, OperatorKind::Maximal)
}

pub fn frac_integral(req: &OperatorRequest) -> Result<Evaluation> {
    evaluate(req, OperatorKind::Integral)
}

pub fn iterated_commutator_maximal(req: &OperatorRequest) -> Result<Evaluation> {
    evaluate(req, OperatorKind::IteratedMaximal)
}

pub fn iterated_commutator_integral(req: &OperatorRequest) -> Result<Evaluation> {
    evaluate(req, OperatorKind::IteratedIntegral)
}

/// Component `j` (zero-based) of the sum commutator of the maximal operator.
pub fn sum_commutator_maximal(req: &OperatorRequest, j: usize) -> Result<Evaluation> {
    evaluate(req, OperatorKind::SumMaximal(j))
}

/// Component `j` (zero-based) of the sum commutator of the integral.
pub fn sum_commutator_integral(req: &OperatorRequest, j: usize) -> Result<Evaluation> {
    evaluate(req, OperatorKind::SumIntegral(j))
}

/// The full sum operator: components added in order `j = 0..m`.
pub fn sum_commutator_total(req: &OperatorRequest, maximal: bool) -> Result<Vec<f64>> {
    let mut total = vec![0.0; req.points.len()];
    for j in 0..req.m() {
        let e = if maximal {
            sum_commutator_maximal(req, j)?
        } else {
            sum_commutator_integral(req, j)?
        };
        for (t, v) in total.iter_mut().zip(&e.values) {
            *t += v;
        }
    }
    Ok(total)
}

/// Ratio of the maximal operator to the integral of `|f|` at each point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: f64,
    /// Points where both sides vanish.
    pub skipped: usize,
}

/// `M_alpha(f)(x) / I_alpha(|f|)(x)` over the request's points.
pub fn pointwise_domination_check(req: &OperatorRequest) -> Result<DominationReport> {
    let abs = OperatorRequest {
        functions: req.functions.iter().map(GridFunction::abs).collect(),
        symbols: None,
        ..req.clone()
    };
    let m = frac_maximal(&abs)?;
    let i = frac_integral(&abs)?;
    let mut skipped = 0;
    let ratios: Vec<Option<f64>> = m
        .values
        .iter()
        .zip(&i.values)
        .map(|(&a, &b)| {
            if a == 0.0 && b == 0.0 {
                skipped += 1;
                None
            } else {
                Some(a / b)
            }
        })
        .collect();
    let max_ratio = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(DominationReport {
        ratios,
        max_ratio,
        skipped,
    })
}

/// Smallest `C` with `r^alpha prod_i |b_i(x) - avg_B b_i| <= C * value(x)` for
/// the iterated maximal commutator applied to `chi_B`, over the request's
/// points inside `B`. Points where both sides vanish are skipped.
pub fn commutator_lower_bound_witness(
    req: &OperatorRequest,
    ball: &crate::grid::Ball,
) -> Result<f64> {
    let symbols = req.symbols()?;
    let means: Vec<f64> = symbols
        .iter()
        .map(|b| ball_mean(b, ball).ok_or_else(|| invalid("ball", "contains no cell")))
        .collect::<Result<_>>()?;
    let inside: Vec<Point> = req.points.iter().copied().filter(|p| ball.contains(p)).collect();
    if inside.is_empty() {
        return Err(invalid("points", "no evaluation point inside the ball"));
    }
    let r = OperatorRequest {
        points: inside.clone(),
        ..req.clone()
    };
    let values = iterated_commutator_maximal(&r)?.values;
    let mut c = 0.0f64;
    for (x, v) in inside.iter().zip(values) {
        let lhs = ball.radius.powf(req.alpha)
            * symbols
                .iter()
                .zip(&means)
                .map(|(b, mean)| (b.value_at(x) - mean).abs())
                .product::<f64>();
        if lhs == 0.0 {
            continue;
        }
        c = c.max(lhs / v);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, sample_function, Ball, TestFunctionSpec};

    fn chi(dom: &Domain, c: f64, r: f64) -> GridFunction {
        sample_function(
            &TestFunctionSpec::BallIndicator {
                center: Point::x(c),
                radius: r,
            },
            dom,
        )
        .unwrap()
    }

    fn coordinate(dom: &Domain) -> GridFunction {
        sample_function(&TestFunctionSpec::Coordinate { axis: 0 }, dom).unwrap()
    }

    fn origin_request(fs: Vec<GridFunction>) -> OperatorRequest {
        OperatorRequest::new(fs, 1.0).unwrap().with_points(vec![Point::x(0.0)])
    }

    #[test]
    fn indicator_closed_forms() {
        let mut errs = (Vec::new(), Vec::new());
        for n in [128usize, 256, 512] {
            let dom = build_domain(1, 2.0, n).unwrap();
            let f = chi(&dom, 0.0, 1.0);
            let req = origin_request(vec![f.clone(), f]);
            let m = frac_maximal(&req).unwrap();
            let i = frac_integral(&req).unwrap();
            errs.0.push((m.values[0] - 2.0).abs());
            errs.1.push((i.values[0] - 8.0 * 2f64.ln()).abs());
            if n == 512 {
                assert!(errs.0[2] / 2.0 < 0.03, "{:?}", m.values);
                assert!(errs.1[2] / (8.0 * 2f64.ln()) < 0.02, "{:?}", i.values);
                assert!((m.argmax[0] - 1.0).abs() < 0.1);
                assert!(m.ladder_gap() >= 1.0);
            }
        }
        assert!(errs.1.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs.0.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    }

    #[test]
    fn zero_component_gives_exact_zero() {
        let dom = build_domain(1, 2.0, 64).unwrap();
        let f = chi(&dom, 0.0, 1.0);
        let req = OperatorRequest::new(vec![f, GridFunction::zeros(dom)], 1.0).unwrap();
        assert!(frac_maximal(&req).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(frac_integral(&req).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_inputs_on_clipped_ladder() {
        let dom = build_domain(1, 2.0, 256).unwrap();
        let one = GridFunction::constant(dom, 1.0);
        let ladder = LogLadder::spanning(dom.spacing(), 2.0, 8).unwrap();
        let req = origin_request(vec![one.clone(), one]).with_radii(ladder);
        let v = frac_maximal(&req).unwrap().values[0];
        assert!((v - 2.0 * ladder.end()).abs() / (2.0 * ladder.end()) < 0.03, "{v}");
    }

    #[test]
    fn dilation_covariance() {
        let dom = build_domain(1, 8.0, 512).unwrap();
        let g = |s: f64| {
            sample_function(
                &TestFunctionSpec::Gaussian {
                    center: Point::x(0.0),
                    scale: s,
                },
                &dom,
            )
            .unwrap()
        };
        let alpha = 0.7;
        let lambda = 2.0;
        let x = 0.5;
        let base = OperatorRequest::new(vec![g(1.0), g(1.0)], alpha)
            .unwrap()
            .with_points(vec![Point::x(lambda * x)]);
        let dilated = OperatorRequest::new(vec![g(1.0 / lambda), g(1.0 / lambda)], alpha)
            .unwrap()
            .with_points(vec![Point::x(x)]);
        let a = frac_integral(&dilated).unwrap().values[0];
        let b = lambda.powf(-alpha) * frac_integral(&base).unwrap().values[0];
        assert!((a - b).abs() / b < 0.02, "{a} vs {b}");
    }

    #[test]
    fn iterated_commutator_examples() {
        let dom = build_domain(1, 2.0, 512).unwrap();
        let f = chi(&dom, 0.0, 1.0);
        let b = coordinate(&dom);
        let req = origin_request(vec![f.clone(), f.clone()]).with_symbols(vec![b.clone(), b.clone()]);
        let v = iterated_commutator_maximal(&req).unwrap().values[0];
        assert!((v - 0.5).abs() / 0.5 < 0.03, "{v}");
        let s = sum_commutator_maximal(&req, 0).unwrap().values[0];
        assert!((s - 1.0).abs() < 0.03, "{s}");
        let odd = iterated_commutator_integral(&req).unwrap().values[0];
        assert!(odd.abs() < 1e-10, "{odd}");
    }

    #[test]
    fn constant_symbols_vanish_exactly() {
        let dom = build_domain(1, 2.0, 128).unwrap();
        let f = sample_function(
            &TestFunctionSpec::Gaussian {
                center: Point::x(0.2),
                scale: 0.5,
            },
            &dom,
        )
        .unwrap();
        let c = GridFunction::constant(dom, 0.3);
        let req = OperatorRequest::new(vec![f.clone(), f], 1.0)
            .unwrap()
            .with_symbols(vec![c.clone(), c]);
        for kind in [
            OperatorKind::IteratedMaximal,
            OperatorKind::IteratedIntegral,
            OperatorKind::SumMaximal(0),
            OperatorKind::SumMaximal(1),
            OperatorKind::SumIntegral(0),
            OperatorKind::SumIntegral(1),
        ] {
            assert!(apply(&req, kind).unwrap().values.iter().all(|&v| v == 0.0), "{kind:?}");
        }
    }

    /// Brute force in reversed loop order with a plain running sum.
    fn oracle(f: &[GridFunction; 2], b: [Option<&GridFunction>; 2], alpha: f64, x: &Point) -> f64 {
        let dom = f[0].domain();
        let h = dom.spacing();
        let mut total = 0.0;
        for k2 in (0..dom.cell_count()).rev() {
            for k1 in (0..dom.cell_count()).rev() {
                let (y1, y2) = (dom.center(k1), dom.center(k2));
                let g = |i: usize, k: usize| {
                    let s = b[i].map_or(1.0, |b| b.value_at(x) - b.get(k));
                    s * f[i].get(k)
                };
                let d = (x.dist(&y1) + x.dist(&y2)).max(0.5 * h);
                total += g(0, k1) * g(1, k2) * d.powf(alpha - 2.0);
            }
        }
        total * h * h
    }

    #[test]
    fn commutator_integrals_match_oracle() {
        let dom = build_domain(1, 2.0, 256).unwrap();
        let f = sample_function(
            &TestFunctionSpec::BallIndicator {
                center: Point::x(0.5),
                radius: 0.5,
            },
            &dom,
        )
        .unwrap();
        let b = coordinate(&dom);
        let x = Point::x(0.0);
        let req = origin_request(vec![f.clone(), f.clone()]).with_symbols(vec![b.clone(), b.clone()]);
        let it = iterated_commutator_integral(&req).unwrap().values[0];
        let o = oracle(&[f.clone(), f.clone()], [Some(&b), Some(&b)], 1.0, &x);
        assert!(it > 0.0 && (it - o).abs() / o < 0.02, "{it} vs {o}");
        let s = sum_commutator_integral(&req, 0).unwrap().values[0];
        let o = oracle(&[f.clone(), f.clone()], [Some(&b), None], 1.0, &x);
        assert!((s - o).abs() / o.abs() < 0.02, "{s} vs {o}");
        let plain = frac_integral(&req).unwrap().values[0];
        let o = oracle(&[f.clone(), f], [None, None], 1.0, &x);
        assert!((plain - o).abs() / o < 1e-12);
    }

    #[test]
    fn negating_symbol_negates_sum_commutator() {
        let dom = build_domain(1, 2.0, 128).unwrap();
        let f = chi(&dom, 0.3, 0.8);
        let b = sample_function(&TestFunctionSpec::LogBump { center: Point::x(0.1) }, &dom).unwrap();
        let req = OperatorRequest::new(vec![f.clone(), f.clone()], 1.0)
            .unwrap()
            .with_symbols(vec![b.clone(), b.clone()]);
        let neg = req.clone().with_symbols(vec![b.scale(-1.0), b]);
        let a = sum_commutator_integral(&req, 0).unwrap().values;
        let n = sum_commutator_integral(&neg, 0).unwrap().values;
        assert!(a.iter().zip(&n).all(|(x, y)| *x == -*y));
        let total = sum_commutator_total(&req, false).unwrap();
        let c0 = sum_commutator_integral(&req, 0).unwrap().values;
        let c1 = sum_commutator_integral(&req, 1).unwrap().values;
        for k in 0..total.len() {
            assert_eq!(total[k], c0[k] + c1[k]);
        }
    }

    #[test]
    fn permutation_symmetry_is_exact() {
        let dom = build_domain(1, 2.0, 128).unwrap();
        let f = chi(&dom, 0.3, 0.8);
        let g = sample_function(
            &TestFunctionSpec::Gaussian {
                center: Point::x(-0.4),
                scale: 0.3,
            },
            &dom,
        )
        .unwrap();
        let a = OperatorRequest::new(vec![f.clone(), g.clone()], 0.6).unwrap();
        let b = OperatorRequest::new(vec![g, f], 0.6).unwrap();
        assert_eq!(frac_integral(&a).unwrap().values, frac_integral(&b).unwrap().values);
        assert_eq!(frac_maximal(&a).unwrap().values, frac_maximal(&b).unwrap().values);
    }

    #[test]
    fn homogeneity_and_monotonicity() {
        let dom = build_domain(1, 2.0, 128).unwrap();
        let f = sample_function(
            &TestFunctionSpec::Gaussian {
                center: Point::x(0.1),
                scale: 0.4,
            },
            &dom,
        )
        .unwrap();
        let g = chi(&dom, -0.2, 0.6);
        let req = OperatorRequest::new(vec![f.clone(), g.clone()], 1.0).unwrap();
        let base_m = frac_maximal(&req).unwrap().values;
        let base_i = frac_integral(&req).unwrap().values;
        let pow2 = OperatorRequest::new(vec![f.scale(2.0), g.scale(0.25)], 1.0).unwrap();
        let m2 = frac_maximal(&pow2).unwrap().values;
        assert!(base_m.iter().zip(&m2).all(|(a, b)| *b == 0.5 * a));
        let scaled = OperatorRequest::new(vec![f.scale(3.0), g.scale(1.7)], 1.0).unwrap();
        let ms = frac_maximal(&scaled).unwrap().values;
        let is = frac_integral(&scaled).unwrap().values;
        for k in 0..ms.len() {
            assert!((ms[k] - 5.1 * base_m[k]).abs() <= 1e-12 * ms[k].max(1e-300));
            assert!((is[k] - 5.1 * base_i[k]).abs() <= 1e-12 * is[k].abs().max(1e-300));
        }
        assert!(base_m.iter().all(|&v| v >= 0.0));
        let bigger = OperatorRequest::new(vec![f.map(|v| v + 0.1), g], 1.0).unwrap();
        let mb = frac_maximal(&bigger).unwrap().values;
        assert!(base_m.iter().zip(&mb).all(|(a, b)| b >= a));
    }

    #[test]
    fn domination_ratio_for_indicators() {
        let dom = build_domain(1, 2.0, 512).unwrap();
        let f = chi(&dom, 0.0, 1.0);
        let req = origin_request(vec![f.clone(), f.clone()]);
        let r = pointwise_domination_check(&req).unwrap();
        let exact = 2.0 / (8.0 * 2f64.ln());
        assert!((r.max_ratio - exact).abs() / exact < 0.05, "{r:?}");
        let z = OperatorRequest::new(vec![f, GridFunction::zeros(dom)], 1.0).unwrap();
        let r = pointwise_domination_check(&z).unwrap();
        assert_eq!(r.skipped, z.points.len());
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn lower_bound_witness_is_finite() {
        let dom = build_domain(1, 4.0, 256).unwrap();
        let f = chi(&dom, 0.0, 1.0);
        let b = coordinate(&dom);
        let req = OperatorRequest::new(vec![f.clone(), f], 1.0)
            .unwrap()
            .with_symbols(vec![b.clone(), b])
            .with_points(dom.sublattice(8));
        let c = commutator_lower_bound_witness(&req, &Ball::new(Point::x(0.0), 1.0).unwrap()).unwrap();
        assert!(c.is_finite() && c > 0.0, "{c}");
    }

    #[test]
    fn request_validation() {
        let dom = build_domain(1, 2.0, 32).unwrap();
        let f = chi(&dom, 0.0, 1.0);
        assert!(OperatorRequest::new(vec![f.clone(), f.clone()], 2.0).unwrap().validate().is_err());
        assert!(OperatorRequest::new(vec![f.clone(), f.clone()], 0.0).unwrap().validate().is_err());
        let req = OperatorRequest::new(vec![f.clone(), f.clone()], 1.0).unwrap();
        assert!(iterated_commutator_maximal(&req).is_err());
        let other = GridFunction::zeros(build_domain(1, 2.0, 64).unwrap());
        assert!(OperatorRequest::new(vec![f.clone(), other], 1.0).unwrap().validate().is_err());
        let low = req.clone().with_radii(LogLadder::octaves(0.01, 2, 1).unwrap());
        assert!(low.validate().is_err());
        let with_b = req.with_symbols(vec![f.clone(), f]);
        assert!(sum_commutator_integral(&with_b, 2).is_err());
    }

    #[test]
    fn two_dimensional_maximal_of_indicator() {
        // sup_t |B|^{-2 + 1/2} min(|B|, |B_1|)^2 peaks at t = 1: pi^{1/2}
        let dom = build_domain(2, 2.0, 128).unwrap();
        let f = sample_function(
            &TestFunctionSpec::BallIndicator {
                center: Point::origin(2),
                radius: 1.0,
            },
            &dom,
        )
        .unwrap();
        let req = OperatorRequest::new(vec![f.clone(), f], 1.0)
            .unwrap()
            .with_points(vec![Point::origin(2)]);
        let v = frac_maximal(&req).unwrap().values[0];
        let exact = std::f64::consts::PI.sqrt();
        assert!((v - exact).abs() / exact < 0.03, "{v}");
    }
}
