//! TOML experiment configs and the tagged-string mini language used for
//! weight, phi and test-function kinds, e.g. `power(center=0, a=0.125)`.

use serde::{Deserialize, Serialize};

use crate::conditions::{Flavor, Normalization};
use crate::error::{Error, Result};
use crate::grid::{Point, TestFunctionSpec};
use crate::operators::OperatorKind;

use super::{CenterSet, ExperimentSpec, FamilySpec, PhiDecl, PlanSpec, ProbeKind, WeightDecl, WeightRef};

/// A parsed `name(arg, key=value, ...)` expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Tagged {
    pub name: String,
    pub args: Vec<(Option<String>, Value)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    List(Vec<f64>),
    Expr(Tagged),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> std::result::Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{c}` at column {}", self.pos + 1))
        }
    }

    fn ident(&mut self) -> std::result::Result<String, String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 || rest.starts_with(|c: char| c.is_ascii_digit()) {
            return Err(format!("expected a name at column {}", self.pos + 1));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn number(&mut self) -> std::result::Result<f64, String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let text = &rest[..len];
        let v = text
            .parse::<f64>()
            .map_err(|_| format!("bad number `{text}` at column {}", self.pos + 1))?;
        self.pos += len;
        Ok(v)
    }

    fn value(&mut self) -> std::result::Result<Value, String> {
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let mut xs = Vec::new();
                if !self.eat(']') {
                    loop {
                        xs.push(self.number()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                Ok(Value::List(xs))
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => Ok(Value::Num(self.number()?)),
            Some(_) => Ok(Value::Expr(self.tagged()?)),
            None => Err("unexpected end of input".into()),
        }
    }

    fn tagged(&mut self) -> std::result::Result<Tagged, String> {
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat('(') && !self.eat(')') {
            loop {
                let save = self.pos;
                let key = match self.ident() {
                    Ok(k) if self.eat('=') => Some(k),
                    _ => {
                        self.pos = save;
                        None
                    }
                };
                args.push((key, self.value()?));
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        Ok(Tagged { name, args })
    }
}

impl Tagged {
    pub fn parse(src: &str) -> std::result::Result<Self, String> {
        let mut lx = Lexer { src, pos: 0 };
        let t = lx.tagged()?;
        if lx.peek().is_some() {
            return Err(format!("trailing input at column {}", lx.pos + 1));
        }
        Ok(t)
    }

    /// Named argument, or the positional argument at `pos`.
    fn arg(&self, key: &str, pos: usize) -> Option<&Value> {
        self.args
            .iter()
            .find(|(k, _)| k.as_deref() == Some(key))
            .map(|(_, v)| v)
            .or_else(|| match self.args.get(pos) {
                Some((None, v)) => Some(v),
                _ => None,
            })
    }

    fn num(&self, key: &str, pos: usize) -> std::result::Result<Option<f64>, String> {
        match self.arg(key, pos) {
            None => Ok(None),
            Some(Value::Num(x)) => Ok(Some(*x)),
            Some(_) => Err(format!("`{key}` of {} must be a number", self.name)),
        }
    }

    fn req(&self, key: &str, pos: usize) -> std::result::Result<f64, String> {
        self.num(key, pos)?
            .ok_or_else(|| format!("{} needs `{key}`", self.name))
    }

    fn point(&self, key: &str, pos: usize, dim: usize) -> std::result::Result<Point, String> {
        let coords = match self.arg(key, pos) {
            None => vec![0.0; dim],
            Some(Value::Num(x)) => vec![*x; dim],
            Some(Value::List(xs)) if xs.len() == dim => xs.clone(),
            Some(_) => return Err(format!("`{key}` of {} must be a number or a list of {dim}", self.name)),
        };
        Ok(Point::new(&coords))
    }

    fn axis(&self, dim: usize) -> std::result::Result<usize, String> {
        let a = self.num("axis", 0)?.unwrap_or(0.0);
        if a < 0.0 || a.fract() != 0.0 || a as usize >= dim {
            return Err(format!("axis {a} out of range for dimension {dim}"));
        }
        Ok(a as usize)
    }
}

pub fn parse_function(src: &str, dim: usize) -> std::result::Result<TestFunctionSpec, String> {
    let t = Tagged::parse(src)?;
    function_from(&t, dim)
}

fn function_from(t: &Tagged, dim: usize) -> std::result::Result<TestFunctionSpec, String> {
    Ok(match t.name.as_str() {
        "indicator" | "chi" => TestFunctionSpec::BallIndicator {
            center: t.point("center", 99, dim)?,
            radius: t.num("r", 0)?.or(t.num("radius", 0)?).ok_or("indicator needs `r`")?,
        },
        "power_bump" => TestFunctionSpec::PowerBump {
            center: t.point("center", 99, dim)?,
            gamma: t.req("gamma", 0)?,
            cutoff: t.num("cutoff", 1)?.unwrap_or(1.0),
        },
        "gaussian" => TestFunctionSpec::Gaussian {
            center: t.point("center", 99, dim)?,
            scale: t.num("scale", 0)?.unwrap_or(1.0),
        },
        "log" => TestFunctionSpec::LogBump {
            center: t.point("center", 99, dim)?,
        },
        "const" | "constant" => TestFunctionSpec::Constant {
            value: t.num("value", 0)?.unwrap_or(1.0),
        },
        "zero" => TestFunctionSpec::Zero,
        "x" | "coordinate" => TestFunctionSpec::Coordinate { axis: t.axis(dim)? },
        "sign" => TestFunctionSpec::Sign { axis: t.axis(dim)? },
        "exp" => TestFunctionSpec::Exponential { axis: t.axis(dim)? },
        other => return Err(format!("unknown function kind `{other}`")),
    })
}

pub fn parse_weight(src: &str, dim: usize) -> std::result::Result<WeightDecl, String> {
    weight_from(&Tagged::parse(src)?, dim)
}

fn weight_from(t: &Tagged, dim: usize) -> std::result::Result<WeightDecl, String> {
    Ok(match t.name.as_str() {
        "const" | "constant" | "one" => WeightDecl::Constant {
            value: t.num("value", 0)?.unwrap_or(1.0),
        },
        "power" => WeightDecl::Power {
            center: t.point("center", 99, dim)?,
            exponent: t.num("a", 0)?.or(t.num("exponent", 0)?).ok_or("power weight needs `a`")?,
            scale: t.num("scale", 1)?.unwrap_or(1.0),
        },
        _ => WeightDecl::Sampled(function_from(t, dim).map_err(|_| format!("unknown weight kind `{}`", t.name))?),
    })
}

fn weight_ref(v: &Value, dim: usize) -> std::result::Result<WeightRef, String> {
    match v {
        Value::Expr(t) if t.args.is_empty() && t.name == "u" => Ok(WeightRef::Product),
        Value::Expr(t) if t.args.is_empty() && t.name.starts_with('w') && t.name[1..].parse::<usize>().is_ok() => {
            let i: usize = t.name[1..].parse().unwrap();
            if i == 0 {
                return Err("weights are numbered from w1".into());
            }
            Ok(WeightRef::Component(i - 1))
        }
        Value::Expr(t) => Ok(WeightRef::Inline(weight_from(t, dim)?)),
        Value::Num(c) => Ok(WeightRef::Inline(WeightDecl::Constant { value: *c })),
        Value::List(_) => Err("a weight cannot be a list".into()),
    }
}

pub fn parse_phi(src: &str, dim: usize) -> std::result::Result<PhiDecl, String> {
    phi_from(&Tagged::parse(src)?, dim)
}

fn phi_from(t: &Tagged, dim: usize) -> std::result::Result<PhiDecl, String> {
    let weight = |pos| match t.arg("weight", pos) {
        Some(v) => weight_ref(v, dim),
        None => Ok(WeightRef::Inline(WeightDecl::Constant { value: 1.0 })),
    };
    let sub = |pos: usize| match t.args.get(pos) {
        Some((_, Value::Expr(e))) => phi_from(e, dim),
        _ => Err(format!("{} needs two phi arguments", t.name)),
    };
    Ok(match t.name.as_str() {
        "power" => PhiDecl::Power {
            beta: t.req("beta", 0)?,
            scale: t.num("scale", 1)?.unwrap_or(1.0),
        },
        "weighted_power" => PhiDecl::WeightedPower {
            kappa: t.req("kappa", 0)?,
            p: t.req("p", 1)?,
            weight: weight(2)?,
        },
        "lebesgue" => PhiDecl::Lebesgue {
            p: t.req("p", 0)?,
            weight: weight(1)?,
        },
        "product" => PhiDecl::Product(Box::new(sub(0)?), Box::new(sub(1)?)),
        "ratio" => PhiDecl::Ratio(Box::new(sub(0)?), Box::new(sub(1)?)),
        other => return Err(format!("unknown phi kind `{other}`")),
    })
}

pub fn parse_operator(src: &str) -> std::result::Result<OperatorKind, String> {
    let t = Tagged::parse(src.trim())?;
    let idx = |name: &str| -> std::result::Result<usize, String> {
        let j = match t.num("j", 0)? {
            Some(j) => j,
            None => name
                .rsplit('_')
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or("sum commutators need a component j")?,
        };
        if j < 1.0 || j.fract() != 0.0 {
            return Err(format!("component j = {j} must be a positive integer"));
        }
        Ok(j as usize - 1)
    };
    Ok(match t.name.as_str() {
        "maximal" => OperatorKind::Maximal,
        "integral" => OperatorKind::Integral,
        "iterated_maximal" => OperatorKind::IteratedMaximal,
        "iterated_integral" => OperatorKind::IteratedIntegral,
        n if n.starts_with("sum_maximal") => OperatorKind::SumMaximal(idx(n)?),
        n if n.starts_with("sum_integral") => OperatorKind::SumIntegral(idx(n)?),
        other => return Err(format!("unknown operator `{other}`")),
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: Option<RawDomain>,
    exponents: Option<RawExponents>,
    weights: Option<RawWeights>,
    phi: Option<RawPhi>,
    symbols: Option<RawSymbols>,
    plan: Option<RawPlan>,
    probe: Option<RawProbe>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawDomain {
    n: Option<usize>,
    L: Option<f64>,
    N: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    p: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    q: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    w: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhi {
    phi1: Option<Vec<String>>,
    phi2: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymbols {
    b: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCenters {
    Named(String),
    Scalars(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    r_min: Option<f64>,
    r_max: Option<f64>,
    per_octave: Option<usize>,
    centers: Option<RawCenters>,
    t_max: Option<f64>,
    eta_max: Option<f64>,
    off_center_cap: Option<f64>,
    semi_analytic: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    centers: Option<Vec<f64>>,
    radii: Option<Vec<f64>>,
    gaussians: Option<Vec<f64>>,
    power_bumps: Option<Vec<f64>>,
    include_zero: Option<bool>,
    amplitudes: Option<Vec<f64>>,
    jitter: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    kind: Option<String>,
    operator: Option<String>,
    x0: Option<Vec<f64>>,
    stride: Option<usize>,
    levels: Option<usize>,
    lambda: Option<f64>,
    flavor: Option<String>,
    log_power: Option<u32>,
    normalization: Option<String>,
    functions: Option<Vec<String>>,
    g_constant: Option<f64>,
    family: Option<RawFamily>,
}

/// Serializable echo of a parsed config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionSettings {
    pub flavor: Option<Flavor>,
    pub log_power: Option<u32>,
    pub normalization: Normalization,
}

/// 1-based line of `key = ...` inside `[section]`, if present.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut in_section = false;
    let mut section_line = None;
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            in_section = t.trim_start_matches('[').trim_end_matches(']').trim() == section;
            if in_section {
                section_line = Some(i + 1);
            }
            continue;
        }
        if in_section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    section_line
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, reason: impl Into<String>) -> Error {
        let mut reason = reason.into();
        if let Some(line) = locate(self.src, section, key) {
            reason = format!("{reason} (line {line})");
        }
        Error::Config {
            field: format!("{section}.{key}"),
            reason,
        }
    }

    fn missing(&self, section: &str, key: &str) -> Error {
        self.err(section, key, "missing required field")
    }
}

/// Parses a config document into an [`ExperimentSpec`].
pub fn parse_config(src: &str) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| Error::Config {
        field: "document".into(),
        reason: e.to_string().trim().replace('\n', " "),
    })?;
    let cx = Ctx { src };
    let d = raw.domain.ok_or_else(|| cx.missing("domain", "n"))?;
    let dim = d.n.ok_or_else(|| cx.missing("domain", "n"))?;
    if !(1..=3).contains(&dim) {
        return Err(cx.err("domain", "n", format!("dimension {dim} not in 1..=3")));
    }
    let half_width = d.L.ok_or_else(|| cx.missing("domain", "L"))?;
    let cells = d.N.ok_or_else(|| cx.missing("domain", "N"))?;

    let e = raw.exponents.ok_or_else(|| cx.missing("exponents", "p"))?;
    let p = e.p.ok_or_else(|| cx.missing("exponents", "p"))?;
    let m = p.len();
    if m < 2 {
        return Err(cx.err("exponents", "p", format!("need m >= 2 exponents, got {m}")));
    }
    let alpha = match (e.alpha, e.q) {
        (Some(a), None) => a,
        (None, Some(q)) => {
            if q.len() != m {
                return Err(cx.err("exponents", "q", format!("{} values for m = {m}", q.len())));
            }
            p.iter()
                .zip(&q)
                .map(|(pi, qi)| dim as f64 * (1.0 / pi - 1.0 / qi))
                .collect()
        }
        (Some(_), Some(_)) => return Err(cx.err("exponents", "q", "give either alpha or q, not both")),
        (None, None) => return Err(cx.missing("exponents", "alpha")),
    };
    if alpha.len() != m {
        return Err(cx.err("exponents", "alpha", format!("{} values for m = {m}", alpha.len())));
    }

    let weights = match raw.weights.and_then(|w| w.w) {
        None => vec![WeightDecl::Constant { value: 1.0 }; m],
        Some(ws) => {
            if ws.len() != m {
                return Err(cx.err("weights", "w", format!("{} weights for m = {m}", ws.len())));
            }
            ws.iter()
                .map(|s| parse_weight(s, dim).map_err(|r| cx.err("weights", "w", r)))
                .collect::<Result<_>>()?
        }
    };

    let phi = raw.phi.ok_or_else(|| cx.missing("phi", "phi1"))?;
    let phi1: Vec<PhiDecl> = phi
        .phi1
        .ok_or_else(|| cx.missing("phi", "phi1"))?
        .iter()
        .map(|s| parse_phi(s, dim).map_err(|r| cx.err("phi", "phi1", r)))
        .collect::<Result<_>>()?;
    if phi1.len() != m {
        return Err(cx.err("phi", "phi1", format!("{} functions for m = {m}", phi1.len())));
    }
    let phi2 = parse_phi(&phi.phi2.ok_or_else(|| cx.missing("phi", "phi2"))?, dim)
        .map_err(|r| cx.err("phi", "phi2", r))?;

    let symbols: Vec<TestFunctionSpec> = match raw.symbols.and_then(|s| s.b) {
        None => Vec::new(),
        Some(bs) => {
            if bs.len() != m {
                return Err(cx.err("symbols", "b", format!("{} symbols for m = {m}", bs.len())));
            }
            bs.iter()
                .map(|s| parse_function(s, dim).map_err(|r| cx.err("symbols", "b", r)))
                .collect::<Result<_>>()?
        }
    };

    let mut plan = PlanSpec::default();
    if let Some(rp) = raw.plan {
        plan.r_min = rp.r_min;
        plan.r_max = rp.r_max;
        if let Some(po) = rp.per_octave {
            if po == 0 {
                return Err(cx.err("plan", "per_octave", "must be positive"));
            }
            plan.per_octave = po;
        }
        plan.t_max = rp.t_max;
        plan.eta_max = rp.eta_max;
        plan.off_center_cap = rp.off_center_cap;
        plan.semi_analytic = rp.semi_analytic.unwrap_or(true);
        plan.centers = match rp.centers {
            None => CenterSet::Default,
            Some(RawCenters::Named(s)) => match s.as_str() {
                "origin" => CenterSet::Origin,
                "default" => CenterSet::Default,
                other => return Err(cx.err("plan", "centers", format!("unknown center set `{other}`"))),
            },
            Some(RawCenters::Scalars(xs)) if dim == 1 => CenterSet::List(xs.iter().map(|&x| Point::x(x)).collect()),
            Some(RawCenters::Scalars(_)) => {
                return Err(cx.err("plan", "centers", format!("need a list of {dim}-vectors")))
            }
            Some(RawCenters::Points(ps)) => {
                if let Some(bad) = ps.iter().find(|p| p.len() != dim) {
                    return Err(cx.err("plan", "centers", format!("{bad:?} is not a {dim}-vector")));
                }
                CenterSet::List(ps.iter().map(|p| Point::new(p)).collect())
            }
        };
    }

    let probe = raw.probe.ok_or_else(|| cx.missing("probe", "kind"))?;
    let kind = match probe.kind.as_deref().unwrap_or("boundedness") {
        "boundedness" => ProbeKind::Boundedness,
        "sharpness" => ProbeKind::Sharpness,
        "condition" => ProbeKind::Condition,
        "weights" => ProbeKind::Weights,
        "eval" => ProbeKind::Eval,
        other => return Err(cx.err("probe", "kind", format!("unknown probe kind `{other}`"))),
    };
    let operator = parse_operator(probe.operator.as_deref().unwrap_or("maximal"))
        .map_err(|r| cx.err("probe", "operator", r))?;
    match operator {
        OperatorKind::SumMaximal(j) | OperatorKind::SumIntegral(j) if j >= m => {
            return Err(cx.err("probe", "operator", format!("component {} out of 1..={m}", j + 1)))
        }
        _ => {}
    }
    if operator != OperatorKind::Maximal && operator != OperatorKind::Integral && symbols.is_empty() {
        return Err(cx.missing("symbols", "b"));
    }
    let x0 = match probe.x0 {
        None => Point::origin(dim),
        Some(v) if v.len() == dim => Point::new(&v),
        Some(v) => return Err(cx.err("probe", "x0", format!("{v:?} is not a {dim}-vector"))),
    };
    let flavor = match probe.flavor.as_deref() {
        None => None,
        Some("A") | Some("a") => Some(Flavor::A),
        Some("B") | Some("b") => Some(Flavor::B),
        Some(other) => return Err(cx.err("probe", "flavor", format!("unknown flavor `{other}`"))),
    };
    let normalization = match probe.normalization.as_deref().unwrap_or("plain") {
        "plain" => Normalization::Plain,
        "characterization" => Normalization::Characterization,
        "commutator_iterated" => Normalization::CommutatorIterated,
        "diagnostic" => Normalization::Diagnostic,
        s if s.starts_with("commutator_sum") => {
            let j = parse_operator(&s.replace("commutator_sum", "sum_maximal"))
                .map_err(|r| cx.err("probe", "normalization", r))?;
            match j {
                OperatorKind::SumMaximal(j) => Normalization::CommutatorSum(j),
                _ => unreachable!(),
            }
        }
        other => return Err(cx.err("probe", "normalization", format!("unknown normalization `{other}`"))),
    };
    let functions = match probe.functions {
        None => Vec::new(),
        Some(fs) => {
            if fs.len() != m {
                return Err(cx.err("probe", "functions", format!("{} functions for m = {m}", fs.len())));
            }
            fs.iter()
                .map(|s| parse_function(s, dim).map_err(|r| cx.err("probe", "functions", r)))
                .collect::<Result<_>>()?
        }
    };
    let mut family = FamilySpec::default_for(half_width);
    if let Some(f) = probe.family {
        if let Some(c) = f.centers {
            family.centers = c;
        }
        if let Some(r) = f.radii {
            family.radii = r;
        }
        if let Some(g) = f.gaussians {
            family.gaussians = g;
        }
        if let Some(b) = f.power_bumps {
            family.power_bumps = b;
        }
        family.include_zero = f.include_zero.unwrap_or(false);
        if let Some(a) = f.amplitudes {
            if a.len() != m {
                return Err(cx.err("family", "amplitudes", format!("{} values for m = {m}", a.len())));
            }
            family.amplitudes = Some(a);
        }
        family.jitter = f.jitter.unwrap_or(0.0);
    }
    let stride = probe.stride.unwrap_or(1);
    if stride == 0 || cells % stride != 0 {
        return Err(cx.err("probe", "stride", format!("stride {stride} must divide N = {cells}")));
    }

    Ok(ExperimentSpec {
        dim,
        half_width,
        cells,
        p,
        alpha,
        weights,
        phi1,
        phi2,
        symbols,
        operator,
        probe: kind,
        x0,
        stride,
        levels: probe.levels.unwrap_or(2),
        lambda: probe.lambda.unwrap_or(2.0),
        g_constant: probe.g_constant.unwrap_or(8.0),
        functions,
        condition: ConditionSettings {
            flavor,
            log_power: probe.log_power,
            normalization,
        },
        family,
        plan,
    })
}
