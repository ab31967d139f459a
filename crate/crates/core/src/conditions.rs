//! One-dimensional condition machinery: Hardy and supremal transforms, the
//! sup-form (`A`) and integral-form (`B`) condition functionals, the
//! characterization quantities and the `G_omega^p` class test.
//!
//! Every scan runs on the plan's log ladder. For a center `x` and outer scale
//! `tau_j` the scanner forms
//!
//! * `E_j = prod_i phi_1i(x, tau_j) ||omega_i||_{L^{p_i}(B(x, tau_j))}`,
//! * `S_j = min_{l >= j} E_l` (the essinf over `eta >= t`, truncated at
//!   `eta_max`),
//! * `D_j = prod_i ||omega_i||_{L^{q_i}(B(x, tau_j))}`,
//!
//! and reduces `(1 + ln(t/r))^k S/D` over `t in [r, t_max]` either by a max
//! (flavor `A`) or by the trapezoid rule in `ln t` (flavor `B`).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{pairwise_sum, Ball, Domain, GridFunction, Point};
use crate::plan::{LogLadder, SamplingPlan};
use crate::spaces::{ball_mean, bmo_norm, PhiSpec};
use crate::weights::{lq_norm_on_ball, ExponentConfig, Path, WeightSpec, WeightVector};

/// Ratio at which a doubled ladder end counts as divergence.
pub const GROWTH_THRESHOLD: f64 = 1.5;

/// A positive scalar function of `t > 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialProfile {
    /// `coeff * t^sigma`.
    Power { coeff: f64, sigma: f64 },
    /// `coeff * (1 + ln(t/r))^k * t^sigma`.
    LogPower { coeff: f64, r: f64, k: u32, sigma: f64 },
    /// Samples at the nodes of `ladder`, log-log interpolated between them.
    Tabulated { ladder: LogLadder, values: Vec<f64> },
}

impl RadialProfile {
    pub fn power(sigma: f64) -> Self {
        Self::Power { coeff: 1.0, sigma }
    }

    pub fn constant(c: f64) -> Self {
        Self::Power { coeff: c, sigma: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Power { coeff, sigma } => coeff * t.powf(*sigma),
            Self::LogPower { coeff, r, k, sigma } => {
                coeff * (1.0 + (t / r).ln()).powi(*k as i32) * t.powf(*sigma)
            }
            Self::Tabulated { ladder, values } => {
                let pos = (t / ladder.start).log2() * ladder.per_octave as f64;
                if !(pos >= -1e-9 && pos <= ladder.steps as f64 + 1e-9) {
                    return f64::NAN;
                }
                let pos = pos.clamp(0.0, ladder.steps as f64);
                let k = (pos.floor() as usize).min(ladder.steps.saturating_sub(1));
                if ladder.steps == 0 {
                    return values[0];
                }
                let frac = pos - k as f64;
                let (a, b) = (values[k], values[k + 1]);
                if a > 0.0 && b > 0.0 {
                    (a.ln() + frac * (b.ln() - a.ln())).exp()
                } else {
                    a + frac * (b - a)
                }
            }
        }
    }
}

/// Nodes `r 2^{j/P}` strictly below `t_max`, then `t_max` itself.
fn log_nodes(r: f64, t_max: f64, per_octave: usize) -> Result<Vec<f64>> {
    if !(r > 0.0 && t_max >= r) {
        return Err(invalid("t_max", format!("need 0 < r <= t_max, got r = {r}, t_max = {t_max}")));
    }
    let ladder = LogLadder::spanning(r, t_max, per_octave)?;
    let mut nodes: Vec<f64> = ladder.nodes().into_iter().filter(|&t| t < t_max).collect();
    nodes.push(t_max);
    Ok(nodes)
}

fn check_profile(what: &'static str, v: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteCondition {
            what,
            center: Point::x(0.0),
            radius: 0.0,
            t,
        })
    }
}

/// `int_r^{t_max} (1 + ln(t/r))^k g(t) w(t) dt/t`, trapezoid rule in `ln t`.
pub fn hardy_transform(
    g: &RadialProfile,
    w: &RadialProfile,
    r: f64,
    k: u32,
    t_max: f64,
    per_octave: usize,
) -> Result<f64> {
    let nodes = log_nodes(r, t_max, per_octave)?;
    let f: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            let v = check_profile("profile g", g.eval(t), t)? * check_profile("profile w", w.eval(t), t)?;
            Ok((1.0 + (t / r).ln()).powi(k as i32) * v)
        })
        .collect::<Result<_>>()?;
    let pieces: Vec<f64> = nodes
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] / t[0]).ln())
        .collect();
    Ok(pairwise_sum(&pieces))
}

/// `max_{t in [r, t_max]} u(t) g(t)` over the ladder nodes.
pub fn supremal_transform(
    g: &RadialProfile,
    u: &RadialProfile,
    r: f64,
    t_max: f64,
    per_octave: usize,
) -> Result<f64> {
    let mut best = 0.0f64;
    for t in log_nodes(r, t_max, per_octave)? {
        let v = check_profile("profile g", g.eval(t), t)? * check_profile("profile u", u.eval(t), t)?;
        best = best.max(v);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Flavor {
    /// `sup_{t > r}`.
    A,
    /// `int_r^inf dt/t`.
    B,
}

/// The prefactor multiplying the inner `t`-reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `phi_2(x, r)^{-1}`.
    Plain,
    /// `(r^alpha prod phi_1i(x, r))^{-1}`.
    Characterization,
    /// `(Osc(x, r) r^alpha prod phi_1i(x, r))^{-1}` with the iterated
    /// oscillation of all symbols.
    CommutatorIterated,
    /// Same with the oscillation of symbol `j` (zero-based) only.
    CommutatorSum(usize),
    /// The inner reduction itself, so every ball contributes exactly one.
    Diagnostic,
}

/// Everything a condition scan needs.
#[derive(Clone, Debug)]
pub struct ConditionInput {
    pub phi1: Vec<PhiSpec>,
    pub phi2: PhiSpec,
    pub weights: WeightVector,
    pub exponents: ExponentConfig,
    pub plan: SamplingPlan,
    pub domain: Domain,
    pub symbols: Option<Vec<GridFunction>>,
    pub log_power: u32,
    pub flavor: Flavor,
    pub normalization: Normalization,
}

impl ConditionInput {
    /// Plain flavor-`A` input with `k = 0`.
    pub fn new(
        phi1: Vec<PhiSpec>,
        phi2: PhiSpec,
        weights: WeightVector,
        exponents: ExponentConfig,
        plan: SamplingPlan,
        domain: Domain,
    ) -> Self {
        Self {
            phi1,
            phi2,
            weights,
            exponents,
            plan,
            domain,
            symbols: None,
            log_power: 0,
            flavor: Flavor::A,
            normalization: Normalization::Plain,
        }
    }

    pub fn with_flavor(mut self, flavor: Flavor, log_power: u32) -> Self {
        self.flavor = flavor;
        self.log_power = log_power;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_symbols(mut self, symbols: Vec<GridFunction>) -> Self {
        self.symbols = Some(symbols);
        self
    }

    fn validate(&self) -> Result<()> {
        let m = self.exponents.m();
        if self.phi1.len() != m {
            return Err(invalid("phi1", format!("{} functions for m = {m}", self.phi1.len())));
        }
        if self.weights.len() != m {
            return Err(invalid("weights", format!("{} weights for m = {m}", self.weights.len())));
        }
        for phi in self.phi1.iter().chain(std::iter::once(&self.phi2)) {
            phi.validate()?;
        }
        self.plan.validate(&self.domain)?;
        match self.normalization {
            Normalization::CommutatorIterated | Normalization::CommutatorSum(_) => {
                let b = self
                    .symbols
                    .as_ref()
                    .ok_or_else(|| invalid("symbols", "commutator normalization needs symbols"))?;
                if b.len() != m {
                    return Err(invalid("symbols", format!("{} symbols for m = {m}", b.len())));
                }
                if let Normalization::CommutatorSum(j) = self.normalization {
                    if j >= m {
                        return Err(invalid("j", format!("component {} out of 1..={m}", j + 1)));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One `(x, r)` line of a condition trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub x: Point,
    pub r: f64,
    pub t_star: f64,
    pub eta_star: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Growth,
}

/// Value before and after extending a ladder end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthDiagnostic {
    pub base: f64,
    pub extended: f64,
    pub ratio: f64,
    pub octaves: f64,
    pub rate_per_octave: f64,
    pub verdict: Verdict,
}

impl GrowthDiagnostic {
    pub fn new(base: f64, extended: f64, octaves: f64) -> Self {
        let ratio = if base == 0.0 {
            if extended == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            extended / base
        };
        Self {
            base,
            extended,
            ratio,
            octaves,
            rate_per_octave: ratio.powf(1.0 / octaves),
            verdict: if ratio >= GROWTH_THRESHOLD {
                Verdict::Growth
            } else {
                Verdict::Bounded
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub value: f64,
    pub witness: TraceRow,
    pub rows: Vec<TraceRow>,
    /// Full value over the value with `eta_max` halved.
    pub truncation: GrowthDiagnostic,
}

/// Weighted `L^q` mean of `prod_{j in idx} |b_j - avg_B b_j|` against `u^q`,
/// divided by the product of the BMO norms.
fn oscillation_factor(
    symbols: &[GridFunction],
    idx: &[usize],
    bmo: &[f64],
    u: &WeightSpec,
    q: f64,
    ball: &Ball,
    dom: &Domain,
) -> Option<f64> {
    let cells = dom.cells_in_ball(ball);
    if cells.is_empty() {
        return None;
    }
    let means: Vec<f64> = idx
        .iter()
        .map(|&j| ball_mean(&symbols[j], ball))
        .collect::<Option<_>>()?;
    let h = dom.spacing();
    let uq: Vec<f64> = cells
        .iter()
        .map(|&c| match u {
            WeightSpec::Grid(g) if g.domain() == dom => g.get(c).powf(q),
            _ => u.eval(&dom.center(c), h).powf(q),
        })
        .collect();
    let num: Vec<f64> = cells
        .iter()
        .zip(&uq)
        .map(|(&c, w)| {
            let prod: f64 = idx
                .iter()
                .zip(&means)
                .map(|(&j, mean)| (symbols[j].get(c) - mean).abs())
                .product();
            prod.powf(q) * w
        })
        .collect();
    let mean = (pairwise_sum(&num) / pairwise_sum(&uq)).powf(1.0 / q);
    let norm: f64 = idx.iter().map(|&j| bmo[j]).product();
    Some(mean / norm)
}

fn symbol_indices(norm: Normalization, m: usize) -> Vec<usize> {
    match norm {
        Normalization::CommutatorSum(j) => vec![j],
        _ => (0..m).collect(),
    }
}

fn bmo_norms(inp: &ConditionInput) -> Result<Vec<f64>> {
    let Some(symbols) = &inp.symbols else {
        return Ok(Vec::new());
    };
    let idx = symbol_indices(inp.normalization, symbols.len());
    let mut out = vec![0.0; symbols.len()];
    for j in idx {
        let v = bmo_norm(&symbols[j], &inp.plan)?.value;
        if v == 0.0 {
            return Err(invalid(
                "symbols",
                format!("b_{} has zero BMO norm (constant symbol), normalization undefined", j + 1),
            ));
        }
        out[j] = v;
    }
    Ok(out)
}

struct Scan {
    value: f64,
    witness: TraceRow,
    rows: Vec<TraceRow>,
}

fn non_finite(what: &'static str, x: &Point, r: f64, t: f64) -> Error {
    Error::NonFiniteCondition {
        what,
        center: *x,
        radius: r,
        t,
    }
}

fn scan_center(inp: &ConditionInput, plan: &SamplingPlan, bmo: &[f64], x: &Point) -> Result<Vec<TraceRow>> {
    let dom = &inp.domain;
    let path = Path::from_plan(plan);
    let outer = plan.outer_ladder().nodes();
    let ball_at = |t: f64| Ball { center: *x, radius: t };
    let comps = inp.weights.components();
    let mut e = Vec::with_capacity(outer.len());
    let mut d = Vec::with_capacity(outer.len());
    for &t in &outer {
        let b = ball_at(t);
        let mut ej = 1.0;
        let mut dj = 1.0;
        for ((phi, w), (&p, &q)) in inp
            .phi1
            .iter()
            .zip(comps)
            .zip(inp.exponents.p().iter().zip(inp.exponents.q()))
        {
            ej *= phi.eval(x, t, dom, path) * lq_norm_on_ball(w, p, &b, dom, path)?;
            dj *= lq_norm_on_ball(w, q, &b, dom, path)?;
        }
        if !ej.is_finite() {
            return Err(non_finite("essinf bracket", x, t, t));
        }
        if !(dj.is_finite() && dj > 0.0) {
            return Err(non_finite("weight norm product", x, t, t));
        }
        e.push(ej);
        d.push(dj);
    }
    // suffix minimum and its first argmin
    let mut s = vec![(0.0, 0usize); outer.len()];
    for j in (0..outer.len()).rev() {
        s[j] = match s.get(j + 1) {
            Some(&(v, at)) if j + 1 < outer.len() && v < e[j] => (v, at),
            _ => (e[j], j),
        };
    }
    let top = outer
        .iter()
        .rposition(|&t| t <= plan.t_max * (1.0 + 1e-12))
        .unwrap_or(0);
    let per_octave = plan.radii.per_octave as f64;
    let u = WeightVector::product(&inp.weights, dom);
    let q = inp.exponents.q_total();
    let alpha = inp.exponents.alpha_total();
    let mut rows = Vec::new();
    for (k, &r) in plan.radii.nodes().iter().enumerate() {
        if k > top || !plan.balls().iter().any(|b| b.center == *x && b.radius == r) {
            continue;
        }
        let inner: Vec<f64> = (k..=top)
            .map(|j| {
                let log = 1.0 + (j - k) as f64 / per_octave * std::f64::consts::LN_2;
                log.powi(inp.log_power as i32) * s[j].0 / d[j]
            })
            .collect();
        let (reduced, jstar) = match inp.flavor {
            Flavor::A => {
                let mut best = (inner[0], 0);
                for (i, &v) in inner.iter().enumerate() {
                    if v > best.0 {
                        best = (v, i);
                    }
                }
                best
            }
            Flavor::B => {
                let step = std::f64::consts::LN_2 / per_octave;
                let pieces: Vec<f64> = inner.windows(2).map(|v| 0.5 * (v[0] + v[1]) * step).collect();
                let arg = inner
                    .iter()
                    .enumerate()
                    .fold((f64::NEG_INFINITY, 0), |acc, (i, &v)| if v > acc.0 { (v, i) } else { acc });
                (pairwise_sum(&pieces), arg.1)
            }
        };
        let j = k + jstar;
        let ball = ball_at(r);
        let char_part = || {
            let mut v = r.powf(alpha);
            for phi in &inp.phi1 {
                v *= phi.eval(x, r, dom, path);
            }
            v
        };
        let prefactor = match inp.normalization {
            Normalization::Plain => Some(1.0 / inp.phi2.eval(x, r, dom, path)),
            Normalization::Characterization => Some(1.0 / char_part()),
            Normalization::CommutatorIterated | Normalization::CommutatorSum(_) => {
                let symbols = inp.symbols.as_deref().expect("validated");
                let idx = symbol_indices(inp.normalization, symbols.len());
                // balls where the symbols are constant carry no commutator information
                oscillation_factor(symbols, &idx, bmo, &u, q, &ball, dom)
                    .filter(|&osc| osc > 0.0)
                    .map(|osc| 1.0 / (osc * char_part()))
            }
            Normalization::Diagnostic => None,
        };
        let value = match (inp.normalization, prefactor) {
            (Normalization::Diagnostic, _) => {
                if reduced == 0.0 {
                    continue;
                }
                // the functional over itself: 1, or NaN when it is not finite
                if reduced.is_finite() {
                    1.0
                } else {
                    f64::NAN
                }
            }
            (_, Some(pf)) => pf * reduced,
            (_, None) => continue,
        };
        if value.is_nan() {
            return Err(non_finite("condition value", x, r, outer[j]));
        }
        rows.push(TraceRow {
            x: *x,
            r,
            t_star: outer[j],
            eta_star: outer[s[j].1],
            value,
        });
    }
    Ok(rows)
}

fn scan(inp: &ConditionInput, plan: &SamplingPlan, bmo: &[f64]) -> Result<Scan> {
    let per_center: Vec<Result<Vec<TraceRow>>> = plan
        .centers
        .par_iter()
        .map(|x| scan_center(inp, plan, bmo, x))
        .collect();
    let mut rows = Vec::new();
    for r in per_center {
        rows.extend(r?);
    }
    let mut witness: Option<TraceRow> = None;
    for row in &rows {
        if witness.is_none_or(|w| row.value > w.value) {
            witness = Some(*row);
        }
    }
    let witness = witness.ok_or_else(|| invalid("plan", "no (x, r) pair produced a value"))?;
    Ok(Scan {
        value: witness.value,
        witness,
        rows,
    })
}

/// Scans the configured condition functional and reports the truncation
/// diagnostic (value at `eta_max` over the value at `eta_max / 2`).
pub fn condition_value(inp: &ConditionInput) -> Result<ConditionReport> {
    inp.validate()?;
    let bmo = bmo_norms(inp)?;
    let full = scan(inp, &inp.plan, &bmo)?;
    let half = 0.5 * inp.plan.eta_max;
    let truncated_plan = inp.plan.clone().with_outer(inp.plan.t_max.min(half), half);
    let truncated = scan(inp, &truncated_plan, &bmo)?;
    Ok(ConditionReport {
        value: full.value,
        witness: full.witness,
        rows: full.rows,
        truncation: GrowthDiagnostic::new(truncated.value, full.value, 1.0),
    })
}

/// Result of a characterization scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharReport {
    pub value: f64,
    pub x: Point,
    pub r: f64,
    /// Ladder extended downward by its own depth.
    pub low: GrowthDiagnostic,
    /// Ladder extended upward by its own depth.
    pub high: GrowthDiagnostic,
}

impl CharReport {
    pub fn verdict(&self) -> Verdict {
        if self.low.verdict == Verdict::Growth || self.high.verdict == Verdict::Growth {
            Verdict::Growth
        } else {
            Verdict::Bounded
        }
    }
}

fn char_scan(
    balls: &[Ball],
    f: impl Fn(&Ball) -> Option<f64> + Sync,
) -> Result<Option<(f64, Point, f64)>> {
    let values: Vec<Option<f64>> = balls.par_iter().map(&f).collect();
    let mut best: Option<(f64, Point, f64)> = None;
    for (b, v) in balls.iter().zip(values) {
        let Some(v) = v else { continue };
        if v.is_nan() {
            return Err(Error::NonFinite {
                what: "characterization quantity",
                center: b.center,
                radius: b.radius,
            });
        }
        if best.is_none_or(|(bv, _, _)| v > bv) {
            best = Some((v, b.center, b.radius));
        }
    }
    Ok(best)
}

fn with_radii(plan: &SamplingPlan, radii: LogLadder) -> SamplingPlan {
    let mut p = plan.clone();
    p.radii = radii;
    p
}

fn char_with_growth(
    plan: &SamplingPlan,
    f: impl Fn(&Ball) -> Option<f64> + Sync,
) -> Result<CharReport> {
    let base = char_scan(&plan.balls(), &f)?
        .ok_or_else(|| invalid("plan", "no (x, r) pair produced a value"))?;
    let steps = plan.radii.steps.max(1);
    let octaves = steps as f64 / plan.radii.per_octave as f64;
    let low_plan = with_radii(plan, plan.radii.extended_down(steps));
    let high_plan = with_radii(plan, plan.radii.extended_up(steps));
    let low = char_scan(&low_plan.balls(), &f)?.map_or(base.0, |v| v.0.max(base.0));
    let high = char_scan(&high_plan.balls(), &f)?.map_or(base.0, |v| v.0.max(base.0));
    Ok(CharReport {
        value: base.0,
        x: base.1,
        r: base.2,
        low: GrowthDiagnostic::new(base.0, low, octaves),
        high: GrowthDiagnostic::new(base.0, high, octaves),
    })
}

/// `max_{(x,r)} r^alpha phi_2(x,r)^{-1} prod_i phi_1i(x,r)` with growth
/// diagnostics at both ladder ends. When every `phi` is a power law at `x`
/// the exponents are combined before evaluation.
pub fn char_quantity(
    phi1: &[PhiSpec],
    phi2: &PhiSpec,
    alpha: f64,
    plan: &SamplingPlan,
    dom: &Domain,
) -> Result<CharReport> {
    for phi in phi1.iter().chain(std::iter::once(phi2)) {
        phi.validate()?;
    }
    let path = Path::from_plan(plan);
    let f = |b: &Ball| {
        let x = &b.center;
        let r = b.radius;
        let laws: Option<Vec<(f64, f64)>> = phi1.iter().map(|p| p.as_power_law(x)).collect();
        if let (Some(laws), Some((c2, e2))) = (laws, phi2.as_power_law(x)) {
            let scale = laws.iter().map(|l| l.0).product::<f64>() / c2;
            let exponent = alpha - e2 + laws.iter().map(|l| l.1).sum::<f64>();
            return Some(if exponent == 0.0 { scale } else { scale * r.powf(exponent) });
        }
        let mut v = r.powf(alpha) / phi2.eval(x, r, dom, path);
        for p in phi1 {
            v *= p.eval(x, r, dom, path);
        }
        v.is_finite().then_some(v)
    };
    char_with_growth(plan, f)
}

/// Which symbols enter the commutator characterization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CommutatorMode {
    Iterated,
    /// Zero-based component index.
    Sum(usize),
}

/// `max_{(x,r)} phi_2^{-1} Osc(x,r) r^alpha prod phi_1i`, with `Osc` the
/// `u^q`-weighted `L^q` mean oscillation of the symbols over `B(x, r)`
/// normalized by their BMO norms.
#[allow(clippy::too_many_arguments)]
pub fn commutator_char_quantity(
    symbols: &[GridFunction],
    u: &WeightSpec,
    q: f64,
    phi1: &[PhiSpec],
    phi2: &PhiSpec,
    alpha: f64,
    plan: &SamplingPlan,
    mode: CommutatorMode,
) -> Result<CharReport> {
    let dom = *symbols
        .first()
        .ok_or_else(|| invalid("symbols", "need at least one symbol"))?
        .domain();
    plan.validate(&dom)?;
    let idx = match mode {
        CommutatorMode::Iterated => (0..symbols.len()).collect::<Vec<_>>(),
        CommutatorMode::Sum(j) if j < symbols.len() => vec![j],
        CommutatorMode::Sum(j) => {
            return Err(invalid("j", format!("component {} out of 1..={}", j + 1, symbols.len())))
        }
    };
    let mut bmo = vec![0.0; symbols.len()];
    for &j in &idx {
        bmo[j] = bmo_norm(&symbols[j], plan)?.value;
        if bmo[j] == 0.0 {
            return Err(invalid(
                "symbols",
                format!("b_{} has zero BMO norm (constant symbol), normalization undefined", j + 1),
            ));
        }
    }
    let path = Path::Quadrature;
    let f = |b: &Ball| {
        let osc = oscillation_factor(symbols, &idx, &bmo, u, q, b, &dom)?;
        let mut v = osc * b.radius.powf(alpha) / phi2.eval(&b.center, b.radius, &dom, path);
        for p in phi1 {
            v *= p.eval(&b.center, b.radius, &dom, path);
        }
        Some(v)
    };
    // extensions beyond the grid have no cells, so only the base scan counts
    let base = char_scan(&plan.balls(), f)?
        .ok_or_else(|| invalid("plan", "no ball of the plan contains a cell"))?;
    let octaves = plan.radii.span_octaves().max(1.0 / plan.radii.per_octave as f64);
    let flat = GrowthDiagnostic::new(base.0, base.0, octaves);
    let _ = (phi1, phi2);
    Ok(CharReport {
        value: base.0,
        x: base.1,
        r: base.2,
        low: flat,
        high: flat,
    })
}

/// Worst constants of the two `G_omega^p` comparisons over the plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GClassReport {
    /// `max phi(x0, r0) / phi(x, r)` over `r <= r0`.
    pub decreasing: f64,
    pub decreasing_at: (Point, f64),
    /// `max phi(x0,r0) W(B0)^{1/p} / (phi(x,r) W(B(x,r))^{1/p})`, `W = omega^p`.
    pub weighted: f64,
    pub weighted_at: (Point, f64),
    pub constant: f64,
    pub pass: bool,
}

/// Literal reading of the two `G_omega^p` conditions on the plan's balls.
pub fn g_class_check(
    phi: &PhiSpec,
    omega: &WeightSpec,
    p: f64,
    plan: &SamplingPlan,
    dom: &Domain,
    constant: f64,
) -> Result<GClassReport> {
    phi.validate()?;
    if !(p >= 1.0) {
        return Err(invalid("p", format!("must be >= 1, got {p}")));
    }
    let path = Path::from_plan(plan);
    let balls = plan.balls();
    let weighted = phi.factors().with_weight(&omega.pow(p), 1.0 / p);
    let plain = phi.factors();
    let vals: Vec<(f64, f64)> = balls
        .par_iter()
        .map(|b| (plain.eval(b, dom, path), weighted.eval(b, dom, path)))
        .collect();
    let mut dec = (0.0f64, balls[0].center, balls[0].radius);
    let mut wtd = (0.0f64, balls[0].center, balls[0].radius);
    for (b0, v0) in balls.iter().zip(&vals) {
        for (b, v) in balls.iter().zip(&vals) {
            if b.radius > b0.radius {
                continue;
            }
            let c1 = v0.0 / v.0;
            let c2 = v0.1 / v.1;
            if c1.is_nan() || c2.is_nan() {
                return Err(Error::NonFinite {
                    what: "G-class ratio",
                    center: b.center,
                    radius: b.radius,
                });
            }
            if c1 > dec.0 {
                dec = (c1, b0.center, b0.radius);
            }
            if c2 > wtd.0 {
                wtd = (c2, b0.center, b0.radius);
            }
        }
    }
    Ok(GClassReport {
        decreasing: dec.0,
        decreasing_at: (dec.1, dec.2),
        weighted: wtd.0,
        weighted_at: (wtd.1, wtd.2),
        constant,
        pass: dec.0 <= constant && wtd.0 <= constant,
    })
}
