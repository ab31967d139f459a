//! Experiment orchestration: specs, test families, the boundedness,
//! sharpness, condition, weight and refinement probes, and CSV/JSON output.

pub mod cli;
pub mod config;
pub mod selftest;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conditions::{
    char_quantity, commutator_char_quantity, condition_value, CommutatorMode, ConditionInput, Flavor,
    GrowthDiagnostic, Verdict,
};
use crate::error::{Error, Result};
use crate::grid::{sample_function, Domain, GridFunction, Point, TestFunctionSpec};
use crate::operators::{apply, Commutator, OperatorKind, OperatorRequest};
use crate::plan::{LogLadder, SamplingPlan};
use crate::spaces::{affine_fit, bmo_norm, morrey_norm, weak_morrey_norm, PhiSpec};
use crate::weights::{
    a1_constant, ap_constant, apq_constant, doubling_ratio, norm_equivalence_ratio, ExponentConfig, WeightSpec,
    WeightVector,
};

pub use cli::run_cli;
pub use config::{parse_config, ConditionSettings};

/// A weight as written in a config; sampled kinds are resolved per domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecl {
    Constant { value: f64 },
    Power { center: Point, exponent: f64, scale: f64 },
    Sampled(TestFunctionSpec),
}

impl WeightDecl {
    pub fn resolve(&self, dom: &Domain) -> Result<WeightSpec> {
        Ok(match self {
            Self::Constant { value } => WeightSpec::Constant { value: *value },
            Self::Power { center, exponent, scale } => WeightSpec::Power {
                center: *center,
                exponent: *exponent,
                scale: *scale,
            },
            Self::Sampled(f) => WeightSpec::grid(sample_function(f, dom)?)?,
        })
    }
}

/// Weight argument of a phi kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRef {
    /// `w_{i+1}`.
    Component(usize),
    /// `u = prod w_i`.
    Product,
    Inline(WeightDecl),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiDecl {
    Power { beta: f64, scale: f64 },
    WeightedPower { kappa: f64, p: f64, weight: WeightRef },
    Lebesgue { p: f64, weight: WeightRef },
    Product(Box<PhiDecl>, Box<PhiDecl>),
    Ratio(Box<PhiDecl>, Box<PhiDecl>),
}

impl PhiDecl {
    pub fn resolve(&self, w: &WeightVector, dom: &Domain) -> Result<PhiSpec> {
        let weight = |r: &WeightRef| -> Result<WeightSpec> {
            match r {
                WeightRef::Component(i) => w
                    .components()
                    .get(*i)
                    .cloned()
                    .ok_or_else(|| config_error("phi", format!("no weight w{}", i + 1))),
                WeightRef::Product => Ok(w.product(dom)),
                WeightRef::Inline(d) => d.resolve(dom),
            }
        };
        Ok(match self {
            Self::Power { beta, scale } => PhiSpec::Power {
                beta: *beta,
                scale: *scale,
            },
            Self::WeightedPower { kappa, p, weight: r } => PhiSpec::WeightedPower {
                kappa: *kappa,
                p: *p,
                weight: weight(r)?,
            },
            Self::Lebesgue { p, weight: r } => PhiSpec::Lebesgue { p: *p, weight: weight(r)? },
            Self::Product(a, b) => PhiSpec::product(a.resolve(w, dom)?, b.resolve(w, dom)?),
            Self::Ratio(a, b) => PhiSpec::ratio(a.resolve(w, dom)?, b.resolve(w, dom)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterSet {
    Origin,
    /// Origin plus eight offsets.
    Default,
    List(Vec<Point>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanSpec {
    /// Defaults to the output grid spacing.
    pub r_min: Option<f64>,
    /// Defaults to the half-width.
    pub r_max: Option<f64>,
    pub per_octave: usize,
    pub centers: CenterSet,
    /// Defaults to `r_max`.
    pub t_max: Option<f64>,
    /// Defaults to `2 t_max`.
    pub eta_max: Option<f64>,
    /// Defaults to `L/2` for the default center set.
    pub off_center_cap: Option<f64>,
    pub semi_analytic: bool,
}

impl Default for PlanSpec {
    fn default() -> Self {
        Self {
            r_min: None,
            r_max: None,
            per_octave: 4,
            centers: CenterSet::Default,
            t_max: None,
            eta_max: None,
            off_center_cap: None,
            semi_analytic: true,
        }
    }
}

impl PlanSpec {
    pub fn resolve(&self, dom: &Domain, default_r_min: f64) -> Result<SamplingPlan> {
        let l = dom.half_width();
        let r_min = self.r_min.unwrap_or(default_r_min);
        let r_max = self.r_max.unwrap_or(l);
        let radii = LogLadder::spanning(r_min, r_max, self.per_octave)
            .map_err(|e| config_error("plan.r_max", e.to_string()))?;
        let (centers, cap) = match &self.centers {
            CenterSet::Origin => (vec![Point::origin(dom.dim())], None),
            CenterSet::Default => (SamplingPlan::default_for(dom, self.per_octave)?.centers, Some(0.5 * l)),
            CenterSet::List(c) => (c.clone(), None),
        };
        let t_max = self.t_max.unwrap_or(radii.end());
        let mut plan = SamplingPlan::new(centers, radii).with_outer(t_max, self.eta_max.unwrap_or(2.0 * t_max));
        plan.off_center_cap = self.off_center_cap.or(cap);
        plan.semi_analytic = self.semi_analytic;
        plan.validate(dom).map_err(|e| match e {
            Error::InvalidArgument { name, reason } => config_error(name, reason),
            e => e,
        })?;
        Ok(plan)
    }
}

/// Dilates and translates of catalog functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilySpec {
    /// Indicator centers along the first axis.
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    /// Gaussian scales, centered at the origin.
    pub gaussians: Vec<f64>,
    /// Power-bump exponents `gamma`, cutoff `L/4`.
    pub power_bumps: Vec<f64>,
    pub include_zero: bool,
    /// Per-component multipliers.
    pub amplitudes: Option<Vec<f64>>,
    /// Uniform center jitter, drawn from the run seed.
    pub jitter: f64,
}

impl FamilySpec {
    /// 3 centers x 6 dyadic radii, two Gaussians and one power bump.
    pub fn default_for(l: f64) -> Self {
        Self {
            centers: vec![0.0, -0.25 * l, 0.25 * l],
            radii: (1..=6).map(|k| l / 2f64.powi(k + 1)).collect(),
            gaussians: vec![l / 8.0, l / 16.0],
            power_bumps: vec![0.2],
            include_zero: false,
            amplitudes: None,
            jitter: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Boundedness,
    Sharpness,
    Condition,
    Weights,
    Eval,
}

/// A fully parsed experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub dim: usize,
    pub half_width: f64,
    pub cells: usize,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub weights: Vec<WeightDecl>,
    pub phi1: Vec<PhiDecl>,
    pub phi2: PhiDecl,
    pub symbols: Vec<TestFunctionSpec>,
    pub operator: OperatorKind,
    pub probe: ProbeKind,
    /// Center of the sharpness family and of local evaluations.
    pub x0: Point,
    /// Output grid coarsening for operator values.
    pub stride: usize,
    pub levels: usize,
    /// Doubling factor for the weights probe.
    pub lambda: f64,
    pub g_constant: f64,
    /// Inputs of the eval probe; defaults to indicators of radius `L/4`.
    pub functions: Vec<TestFunctionSpec>,
    pub condition: ConditionSettings,
    pub family: FamilySpec,
    pub plan: PlanSpec,
}

impl ExperimentSpec {
    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.dim, self.half_width, self.cells)
    }

    pub fn exponents(&self) -> Result<ExponentConfig> {
        ExponentConfig::from_alphas(self.dim, self.p.clone(), self.alpha.clone()).map_err(|e| match e {
            Error::InvalidArgument { name, reason } => config_error(&format!("exponents.{name}"), reason),
            e => e,
        })
    }

    /// Same experiment with `factor` times as many cells per axis and the
    /// plan's smallest radius pinned to the current spacing.
    pub fn refined(&self, factor: usize) -> Self {
        let mut s = self.clone();
        let h = 2.0 * self.half_width / self.cells as f64;
        s.plan.r_min = Some(self.plan.r_min.unwrap_or(h * self.stride as f64));
        s.cells *= factor;
        s
    }
}

pub(crate) fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Seed and thread settings of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    pub seed: u64,
}


#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Floats with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn point_cell(p: &Point) -> Cell {
    if p.dim() == 1 {
        Cell::Num(p.coord(0))
    } else {
        Cell::Text(p.coords().iter().map(|&c| format_float(c)).collect::<Vec<_>>().join(";"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub x: Point,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
    pub witness: Option<Witness>,
}

fn scalar(name: &str, value: f64, witness: Option<Witness>) -> Scalar {
    Scalar {
        name: name.to_string(),
        value,
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedGrowth {
    pub name: String,
    pub diagnostic: GrowthDiagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeVerdict {
    Consistent,
    Growth,
    Inconclusive,
}

/// One scalar summary across refinement levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementRow {
    pub quantity: String,
    pub level: usize,
    pub cells: usize,
    pub value: f64,
    /// Change from the previous level.
    pub change: Option<f64>,
    /// Previous change over this change.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub probe: String,
    /// `full`, or `diagnostic_only` when the condition scan did not come out finite.
    pub mode: String,
    pub verdict: Option<ProbeVerdict>,
    pub scalars: Vec<Scalar>,
    pub growth: Vec<NamedGrowth>,
    pub refinement: Vec<RefinementRow>,
    pub skipped: usize,
    pub table: Table,
    pub wall_time_s: f64,
    pub seed: u64,
    pub spec: ExperimentSpec,
}

impl ExperimentResult {
    fn new(probe: &str, spec: &ExperimentSpec, opts: RunOptions, table: Table) -> Self {
        Self {
            probe: probe.into(),
            mode: "full".into(),
            verdict: None,
            scalars: Vec::new(),
            growth: Vec::new(),
            refinement: Vec::new(),
            skipped: 0,
            table,
            wall_time_s: 0.0,
            seed: opts.seed,
            spec: spec.clone(),
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn to_csv(&self) -> String {
        self.table.to_csv()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// JSON without the per-row table.
    pub fn summary_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("result serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("table");
        }
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }
}

/// Everything a probe needs, resolved on one domain.
pub struct Setup {
    pub dom: Domain,
    pub out_dom: Domain,
    pub cfg: ExponentConfig,
    pub weights: WeightVector,
    pub u: WeightSpec,
    pub phi1: Vec<PhiSpec>,
    pub phi2: PhiSpec,
    pub plan: SamplingPlan,
    pub out_plan: SamplingPlan,
    pub symbols: Vec<GridFunction>,
}

impl Setup {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        let dom = spec.domain()?;
        let cfg = spec.exponents()?;
        let weights = WeightVector::new(
            spec.weights
                .iter()
                .map(|w| w.resolve(&dom))
                .collect::<Result<_>>()?,
        )?;
        let u = weights.product(&dom);
        let phi1 = spec
            .phi1
            .iter()
            .map(|p| p.resolve(&weights, &dom))
            .collect::<Result<Vec<_>>>()?;
        let phi2 = spec.phi2.resolve(&weights, &dom)?;
        for phi in phi1.iter().chain(std::iter::once(&phi2)) {
            phi.validate().map_err(|e| config_error("phi", e.to_string()))?;
        }
        let out_dom = if spec.stride == 1 { dom } else { dom.coarsened(spec.stride) };
        let plan = spec.plan.resolve(&dom, out_dom.spacing())?;
        let out_plan = plan.clone();
        if out_plan.radii.start < out_dom.spacing() * (1.0 - 1e-12) {
            return Err(config_error(
                "probe.stride",
                format!(
                    "output spacing {} exceeds plan r_min {}",
                    out_dom.spacing(),
                    out_plan.radii.start
                ),
            ));
        }
        let symbols = spec
            .symbols
            .iter()
            .map(|b| sample_function(b, &dom))
            .collect::<Result<_>>()?;
        Ok(Self {
            dom,
            out_dom,
            cfg,
            weights,
            u,
            phi1,
            phi2,
            plan,
            out_plan,
            symbols,
        })
    }

    /// Operator values on the output grid.
    pub fn apply(&self, fs: Vec<GridFunction>, kind: OperatorKind) -> Result<GridFunction> {
        let mut req = OperatorRequest::new(fs, self.cfg.alpha_total())?.with_points(self.out_dom.centers().collect());
        if kind.commutator() != Commutator::None {
            req = req.with_symbols(self.symbols.clone());
        }
        GridFunction::new(self.out_dom, apply(&req, kind)?.values)
    }

    fn symbol_norm(&self, kind: OperatorKind) -> Result<f64> {
        let idx: Vec<usize> = match kind.commutator() {
            Commutator::None => return Ok(1.0),
            Commutator::Iterated => (0..self.symbols.len()).collect(),
            Commutator::Sum(j) => vec![j],
        };
        let mut prod = 1.0;
        for j in idx {
            prod *= bmo_norm(&self.symbols[j], &self.plan)?.value;
        }
        Ok(prod)
    }

    /// `prod_i ||f_i||_{M^{p_i, phi_1i}(w_i^{p_i})}`.
    fn source_norm(&self, fs: &[GridFunction]) -> Result<f64> {
        let mut prod = 1.0;
        for ((f, phi), (w, &p)) in fs
            .iter()
            .zip(&self.phi1)
            .zip(self.weights.components().iter().zip(self.cfg.p()))
        {
            prod *= morrey_norm(f, p, phi, &w.pow(p), &self.plan)?.value;
        }
        Ok(prod)
    }

    /// Strong and (for `min p_i = 1`) weak target norms.
    fn target_norms(&self, out: &GridFunction) -> Result<(f64, Option<f64>)> {
        let q = self.cfg.q_total();
        let uq = self.u.pow(q);
        let strong = morrey_norm(out, q, &self.phi2, &uq, &self.out_plan)?.value;
        let weak = if self.cfg.min_p() == 1.0 {
            Some(weak_morrey_norm(out, q, &self.phi2, &uq, &self.out_plan)?.value)
        } else {
            None
        };
        Ok((strong, weak))
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Numerator, denominator and ratio of one input tuple.
struct Sample {
    numerator: f64,
    weak_numerator: Option<f64>,
    denominator: f64,
}

impl Sample {
    fn ratio(&self) -> f64 {
        ratio(self.weak_numerator.unwrap_or(self.numerator), self.denominator)
    }
}

fn sample_ratio(setup: &Setup, fs: Vec<GridFunction>, kind: OperatorKind, bmo: f64) -> Result<Sample> {
    let den = setup.source_norm(&fs)? * bmo;
    let out = setup.apply(fs, kind)?;
    let (strong, weak) = setup.target_norms(&out)?;
    Ok(Sample {
        numerator: strong,
        weak_numerator: weak,
        denominator: den,
    })
}

fn default_condition_shape(kind: OperatorKind, m: usize) -> (Flavor, u32) {
    let flavor = if kind.is_maximal() { Flavor::A } else { Flavor::B };
    let k = match kind.commutator() {
        Commutator::None => 0,
        Commutator::Iterated => m as u32,
        Commutator::Sum(_) => 1,
    };
    (flavor, k)
}

fn condition_input(spec: &ExperimentSpec, setup: &Setup) -> ConditionInput {
    let (flavor, k) = default_condition_shape(spec.operator, spec.m());
    let mut inp = ConditionInput::new(
        setup.phi1.clone(),
        setup.phi2.clone(),
        setup.weights.clone(),
        setup.cfg.clone(),
        setup.plan.clone(),
        setup.dom,
    )
    .with_flavor(
        spec.condition.flavor.unwrap_or(flavor),
        spec.condition.log_power.unwrap_or(k),
    )
    .with_normalization(spec.condition.normalization);
    if !setup.symbols.is_empty() {
        inp = inp.with_symbols(setup.symbols.clone());
    }
    inp
}

struct Member {
    label: String,
    witness: Witness,
    function: TestFunctionSpec,
}

fn family_members(spec: &ExperimentSpec, dom: &Domain, opts: RunOptions) -> Vec<Member> {
    let fam = &spec.family;
    let n = spec.dim;
    let h = dom.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut jitter = |p: Point| {
        if fam.jitter > 0.0 {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-fam.jitter..=fam.jitter)).collect();
            p.offset(&Point::new(&d))
        } else {
            p
        }
    };
    let axis_point = |c: f64| {
        let mut v = vec![0.0; n];
        v[0] = c;
        Point::new(&v)
    };
    let mut out = Vec::new();
    for &c in &fam.centers {
        for &r in &fam.radii {
            if r < 2.0 * h {
                continue;
            }
            let center = jitter(axis_point(c));
            out.push(Member {
                label: format!("indicator(c={c},r={r})"),
                witness: Witness { x: center, r },
                function: TestFunctionSpec::BallIndicator { center, radius: r },
            });
        }
    }
    for &s in &fam.gaussians {
        let center = jitter(Point::origin(n));
        out.push(Member {
            label: format!("gaussian(scale={s})"),
            witness: Witness { x: center, r: s },
            function: TestFunctionSpec::Gaussian { center, scale: s },
        });
    }
    for &g in &fam.power_bumps {
        let center = jitter(Point::origin(n));
        let cutoff = 0.25 * spec.half_width;
        out.push(Member {
            label: format!("power_bump(gamma={g})"),
            witness: Witness { x: center, r: cutoff },
            function: TestFunctionSpec::PowerBump { center, gamma: g, cutoff },
        });
    }
    if fam.include_zero {
        out.push(Member {
            label: "zero".into(),
            witness: Witness {
                x: Point::origin(n),
                r: 0.0,
            },
            function: TestFunctionSpec::Zero,
        });
    }
    out
}

fn timed(mut res: ExperimentResult, start: Instant) -> ExperimentResult {
    res.wall_time_s = start.elapsed().as_secs_f64();
    res
}

/// `R(f) = ||T f||_target / prod ||f_i||_source` over the test family.
pub fn boundedness_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    let setup = Setup::new(spec)?;
    let mut res = ExperimentResult::new(
        "boundedness",
        spec,
        opts,
        Table::new(&["member", "label", "numerator", "denominator", "ratio", "weak_ratio", "strong_ratio", "skipped"]),
    );
    match condition_value(&condition_input(spec, &setup)) {
        Ok(rep) => {
            res.scalars.push(scalar(
                "condition_value",
                rep.value,
                Some(Witness {
                    x: rep.witness.x,
                    r: rep.witness.r,
                }),
            ));
            if !rep.value.is_finite() || rep.truncation.verdict == Verdict::Growth {
                res.mode = "diagnostic_only".into();
            }
            res.growth.push(NamedGrowth {
                name: "condition_truncation".into(),
                diagnostic: rep.truncation,
            });
        }
        Err(Error::NonFiniteCondition { .. }) | Err(Error::NonFinite { .. }) => {
            res.mode = "diagnostic_only".into();
        }
        Err(e) => return Err(e),
    }
    let bmo = setup.symbol_norm(spec.operator)?;
    let amps = spec.family.amplitudes.clone().unwrap_or_else(|| vec![1.0; spec.m()]);
    let mut best: Option<(f64, Witness)> = None;
    for (idx, member) in family_members(spec, &setup.dom, opts).into_iter().enumerate() {
        let base = sample_function(&member.function, &setup.dom)?;
        let fs: Vec<GridFunction> = amps.iter().map(|&a| base.scale(a)).collect();
        let mut row = vec![Cell::Int(idx as u64), Cell::Text(member.label.clone())];
        if fs.iter().any(GridFunction::is_zero) {
            res.skipped += 1;
            row.extend([
                Cell::Num(0.0),
                Cell::Num(0.0),
                Cell::Num(f64::NAN),
                Cell::Num(f64::NAN),
                Cell::Num(f64::NAN),
                Cell::Int(1),
            ]);
            res.table.rows.push(row);
            continue;
        }
        let s = sample_ratio(&setup, fs, spec.operator, bmo)?;
        let r = s.ratio();
        let weak = s.weak_numerator.map_or(f64::NAN, |w| ratio(w, s.denominator));
        row.extend([
            Cell::Num(s.weak_numerator.unwrap_or(s.numerator)),
            Cell::Num(s.denominator),
            Cell::Num(r),
            Cell::Num(weak),
            Cell::Num(ratio(s.numerator, s.denominator)),
            Cell::Int(0),
        ]);
        res.table.rows.push(row);
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, member.witness));
        }
    }
    let (max, witness) = best.map_or((0.0, None), |(v, w)| (v, Some(w)));
    res.scalars.push(scalar("max_ratio", max, witness));
    res.verdict = Some(if res.mode != "full" {
        ProbeVerdict::Inconclusive
    } else if max.is_finite() {
        ProbeVerdict::Consistent
    } else {
        ProbeVerdict::Growth
    });
    Ok(timed(res, start))
}

/// Trajectory statistics of a sharpness run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    /// `max / min` over the ladder.
    pub spread: f64,
    /// `2^|slope|` of `log2 R` against `log2 r`.
    pub rate_per_octave: f64,
    /// Growth of the far half of the ladder over the near half, in the
    /// direction of growth: what doubling the ladder depth adds.
    pub doubling_growth: f64,
    /// Whether `R` is monotone (to 2%) in the direction of growth.
    pub monotone: bool,
}

pub fn trajectory_stats(radii: &[f64], values: &[f64]) -> Trajectory {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let xs: Vec<f64> = radii.iter().map(|r| r.log2()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let (slope, _) = affine_fit(&xs, &ys);
    // order from the end where the ladder would be extended
    let mut ordered: Vec<f64> = values.to_vec();
    if slope > 0.0 {
        ordered.reverse();
    }
    // ordered[0] is the far end: small r when R decreases in r
    let n = ordered.len();
    let mid = n / 2;
    let doubling_growth = if n >= 2 { ordered[0] / ordered[mid] } else { 1.0 };
    let monotone = ordered.windows(2).all(|w| w[0] >= w[1] * 0.98);
    Trajectory {
        spread: max / min,
        rate_per_octave: 2f64.powf(slope.abs()),
        doubling_growth,
        monotone,
    }
}

/// The `chi_{B(x0, r)}` family along the plan's radius ladder (radii up to
/// `L/4`, so the norms still see balls several times larger), compared with
/// the growth verdict of the characterization quantity on the full ladder.
pub fn sharpness_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    if spec.m() < 2 {
        return Err(config_error("exponents.p", "sharpness needs m >= 2"));
    }
    let setup = Setup::new(spec)?;
    let mut res = ExperimentResult::new(
        "sharpness",
        spec,
        opts,
        Table::new(&["r", "numerator", "denominator", "ratio"]),
    );
    let bmo = setup.symbol_norm(spec.operator)?;
    let radii: Vec<f64> = setup
        .plan
        .radii
        .nodes()
        .into_iter()
        .filter(|&r| r <= 0.25 * spec.half_width * (1.0 + 1e-12))
        .collect();
    if radii.len() < 2 {
        return Err(config_error("plan.r_min", "sharpness needs at least two radii up to L/4"));
    }
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        let chi = sample_function(
            &TestFunctionSpec::BallIndicator {
                center: spec.x0,
                radius: r,
            },
            &setup.dom,
        )?;
        let s = sample_ratio(&setup, vec![chi; spec.m()], spec.operator, bmo)?;
        let v = s.ratio();
        values.push(v);
        res.table.rows.push(vec![
            Cell::Num(r),
            Cell::Num(s.weak_numerator.unwrap_or(s.numerator)),
            Cell::Num(s.denominator),
            Cell::Num(v),
        ]);
    }
    let traj = trajectory_stats(&radii, &values);
    let local = setup.plan.clone().with_centers(vec![spec.x0]);
    let alpha = setup.cfg.alpha_total();
    let ch = match spec.operator.commutator() {
        Commutator::None => char_quantity(&setup.phi1, &setup.phi2, alpha, &local, &setup.dom)?,
        c => commutator_char_quantity(
            &setup.symbols,
            &setup.u,
            setup.cfg.q_total(),
            &setup.phi1,
            &setup.phi2,
            alpha,
            &local,
            match c {
                Commutator::Sum(j) => CommutatorMode::Sum(j),
                _ => CommutatorMode::Iterated,
            },
        )?,
    };
    res.scalars.push(scalar("char_quantity", ch.value, Some(Witness { x: ch.x, r: ch.r })));
    let best = values
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    res.scalars.push(scalar(
        "max_ratio",
        best.1,
        radii.get(best.0).map(|&r| Witness { x: spec.x0, r }),
    ));
    res.scalars.push(scalar("spread", traj.spread, None));
    res.scalars.push(scalar("rate_per_octave", traj.rate_per_octave, None));
    res.scalars.push(scalar("doubling_growth", traj.doubling_growth, None));
    res.growth.push(NamedGrowth {
        name: "char_low".into(),
        diagnostic: ch.low,
    });
    res.growth.push(NamedGrowth {
        name: "char_high".into(),
        diagnostic: ch.high,
    });
    let consistent = match ch.verdict() {
        Verdict::Bounded => traj.spread <= 4.0,
        Verdict::Growth => traj.monotone && traj.doubling_growth >= crate::conditions::GROWTH_THRESHOLD,
    };
    res.verdict = Some(if consistent {
        ProbeVerdict::Consistent
    } else {
        ProbeVerdict::Inconclusive
    });
    Ok(timed(res, start))
}

/// Condition functional trace plus the characterization quantity.
pub fn condition_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    let setup = Setup::new(spec)?;
    let mut res = ExperimentResult::new(
        "condition",
        spec,
        opts,
        Table::new(&["x", "r", "t_star", "eta_star", "value"]),
    );
    let inp = condition_input(spec, &setup);
    let rep = condition_value(&inp)?;
    for row in &rep.rows {
        res.table.rows.push(vec![
            point_cell(&row.x),
            Cell::Num(row.r),
            Cell::Num(row.t_star),
            Cell::Num(row.eta_star),
            Cell::Num(row.value),
        ]);
    }
    res.scalars.push(scalar(
        "condition_value",
        rep.value,
        Some(Witness {
            x: rep.witness.x,
            r: rep.witness.r,
        }),
    ));
    res.growth.push(NamedGrowth {
        name: "condition_truncation".into(),
        diagnostic: rep.truncation,
    });
    let ch = char_quantity(&setup.phi1, &setup.phi2, setup.cfg.alpha_total(), &setup.plan, &setup.dom)?;
    res.scalars.push(scalar("char_quantity", ch.value, Some(Witness { x: ch.x, r: ch.r })));
    res.growth.push(NamedGrowth {
        name: "char_low".into(),
        diagnostic: ch.low,
    });
    res.growth.push(NamedGrowth {
        name: "char_high".into(),
        diagnostic: ch.high,
    });
    let growth = rep.truncation.verdict == Verdict::Growth || ch.verdict() == Verdict::Growth;
    res.verdict = Some(if growth {
        ProbeVerdict::Growth
    } else {
        ProbeVerdict::Consistent
    });
    Ok(timed(res, start))
}

/// A_p / A_1, doubling, A_{P,q} and the product-norm equivalence band.
pub fn weights_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    let setup = Setup::new(spec)?;
    let mut res = ExperimentResult::new(
        "weights",
        spec,
        opts,
        Table::new(&["quantity", "component", "value", "x", "r"]),
    );
    let push = |res: &mut ExperimentResult, name: &str, comp: usize, s: crate::plan::Sup| {
        res.table.rows.push(vec![
            Cell::Text(name.into()),
            Cell::Int(comp as u64),
            Cell::Num(s.value),
            point_cell(&s.center),
            Cell::Num(s.radius),
        ]);
        res.scalars.push(scalar(
            &format!("{name}_{comp}"),
            s.value,
            Some(Witness {
                x: s.center,
                r: s.radius,
            }),
        ));
    };
    for (i, (w, &p)) in setup.weights.components().iter().zip(setup.cfg.p()).enumerate() {
        let c = if p > 1.0 {
            ap_constant(w, p, &setup.plan, &setup.dom)?
        } else {
            a1_constant(w, &setup.plan, &setup.dom)?
        };
        push(&mut res, if p > 1.0 { "a_p" } else { "a_1" }, i + 1, c);
        push(&mut res, "doubling", i + 1, doubling_ratio(w, spec.lambda, &setup.plan, &setup.dom)?);
    }
    push(&mut res, "a_pq", 0, apq_constant(&setup.weights, &setup.cfg, &setup.plan, &setup.dom)?);
    let (lo, hi) = norm_equivalence_ratio(&setup.weights, &setup.cfg, &setup.plan, &setup.dom)?;
    push(&mut res, "equivalence_min", 0, lo);
    push(&mut res, "equivalence_max", 0, hi);
    let finite = res.scalars.iter().all(|s| s.value.is_finite());
    res.verdict = Some(if finite {
        ProbeVerdict::Consistent
    } else {
        ProbeVerdict::Growth
    });
    Ok(timed(res, start))
}

/// One operator evaluated on the output grid.
pub fn eval_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    let setup = Setup::new(spec)?;
    let mut res = ExperimentResult::new("eval", spec, opts, Table::new(&["x", "value", "argmax_r"]));
    let specs = if spec.functions.is_empty() {
        vec![
            TestFunctionSpec::BallIndicator {
                center: Point::origin(spec.dim),
                radius: 0.25 * spec.half_width,
            };
            spec.m()
        ]
    } else {
        spec.functions.clone()
    };
    let fs = specs
        .iter()
        .map(|f| sample_function(f, &setup.dom))
        .collect::<Result<Vec<_>>>()?;
    let mut req = OperatorRequest::new(fs, setup.cfg.alpha_total())?;
    if spec.operator.commutator() != Commutator::None {
        req = req.with_symbols(setup.symbols.clone());
    }
    let grid = apply(&req.clone().with_points(setup.out_dom.centers().collect()), spec.operator)?;
    let argmax = |e: &crate::operators::Evaluation, i: usize| e.argmax.get(i).copied().unwrap_or(f64::NAN);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, (p, &v)) in grid.points.iter().zip(&grid.values).enumerate() {
        res.table.rows.push(vec![point_cell(p), Cell::Num(v), Cell::Num(argmax(&grid, i))]);
        if v > best.0 {
            best = (v, i);
        }
    }
    res.scalars.push(scalar(
        "max",
        best.0,
        Some(Witness {
            x: grid.points[best.1],
            r: argmax(&grid, best.1),
        }),
    ));
    let at = apply(&req.with_points(vec![spec.x0]), spec.operator)?;
    res.scalars.push(scalar(
        "value_at_x0",
        at.values[0],
        Some(Witness {
            x: spec.x0,
            r: argmax(&at, 0),
        }),
    ));
    res.verdict = Some(ProbeVerdict::Consistent);
    Ok(timed(res, start))
}

/// Runs the probe selected by the experiment.
pub fn run_probe(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    match spec.probe {
        ProbeKind::Boundedness => boundedness_probe(spec, opts),
        ProbeKind::Sharpness => sharpness_probe(spec, opts),
        ProbeKind::Condition => condition_probe(spec, opts),
        ProbeKind::Weights => weights_probe(spec, opts),
        ProbeKind::Eval => eval_probe(spec, opts),
    }
}

/// Reruns the experiment's probe at `N, 2N, ...` (`levels` runs) and tabulates every
/// scalar summary with successive changes and their ratios.
pub fn refinement_study(spec: &ExperimentSpec, levels: usize, opts: RunOptions) -> Result<ExperimentResult> {
    let start = Instant::now();
    if levels == 0 {
        return Err(config_error("probe.levels", "need at least one level"));
    }
    let runs = (0..levels)
        .map(|k| {
            let s = spec.refined(1 << k);
            run_probe(&s, opts).map(|r| (s.cells, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = ExperimentResult::new(
        "refinement",
        spec,
        opts,
        Table::new(&["quantity", "level", "cells", "value", "change", "ratio"]),
    );
    for s in &runs[0].1.scalars {
        let mut prev: Option<(f64, Option<f64>)> = None;
        for (level, (cells, run)) in runs.iter().enumerate() {
            let Some(value) = run.scalar(&s.name) else { continue };
            let change = prev.map(|(v, _)| value - v);
            let ratio = match (prev.and_then(|p| p.1), change) {
                (Some(a), Some(b)) if b != 0.0 => Some(a / b),
                _ => None,
            };
            let row = RefinementRow {
                quantity: s.name.clone(),
                level,
                cells: *cells,
                value,
                change,
                ratio,
            };
            res.table.rows.push(vec![
                Cell::Text(row.quantity.clone()),
                Cell::Int(level as u64),
                Cell::Int(*cells as u64),
                Cell::Num(value),
                Cell::Num(change.unwrap_or(f64::NAN)),
                Cell::Num(ratio.unwrap_or(f64::NAN)),
            ]);
            res.refinement.push(row);
            prev = Some((value, change));
        }
        if let Some((_, last)) = runs.last() {
            if let Some(s2) = last.scalars.iter().find(|x| x.name == s.name) {
                res.scalars.push(s2.clone());
            }
        }
    }
    res.verdict = runs.last().and_then(|(_, r)| r.verdict);
    Ok(timed(res, start))
}
