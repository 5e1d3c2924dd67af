//! Scenario configuration files.
//!
//! Every scenario has its own TOML schema; unknown keys are rejected. Real
//! numbers may be written either as TOML numbers or as strings with a
//! multiple of π, e.g. `"1.5pi"`, `"pi/4"`, `"-3pi/2"`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::PathBuf;

use qnetsense::studies::NoiseAxis;
use qnetsense::{ParamSpace, StrategyKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Parses `"<coef>pi[/<den>]"`, `"pi"`, or a plain number.
pub fn parse_real(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let s = s.replace('π', "pi");
    let Some(pos) = s.find("pi") else {
        return s.parse().ok();
    };
    let coef = s[..pos].trim_end_matches('*');
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    let rest = &s[pos + 2..];
    let den = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().ok()?,
        None if rest.is_empty() => 1.0,
        None => return None,
    };
    Some(coef * std::f64::consts::PI / den)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RealRepr {
    Num(f64),
    Int(i64),
    Expr(String),
}

impl RealRepr {
    fn value<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            RealRepr::Num(v) => Ok(v),
            RealRepr::Int(v) => Ok(v as f64),
            RealRepr::Expr(s) => parse_real(&s).ok_or_else(|| E::custom(format!("cannot read `{s}` as a number"))),
        }
    }
}

fn real<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    RealRepr::deserialize(d)?.value()
}

fn opt_real<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<RealRepr>::deserialize(d)?.map(RealRepr::value).transpose()
}

fn reals<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Vec::<RealRepr>::deserialize(d)?.into_iter().map(RealRepr::value).collect()
}

fn opt_reals<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    Option::<Vec<RealRepr>>::deserialize(d)?
        .map(|v| v.into_iter().map(RealRepr::value).collect())
        .transpose()
}

fn real_rows<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    Vec::<Vec<RealRepr>>::deserialize(d)?
        .into_iter()
        .map(|r| r.into_iter().map(RealRepr::value).collect())
        .collect()
}

fn half_pi() -> f64 {
    FRAC_PI_2
}
fn quarter_pi() -> f64 {
    FRAC_PI_4
}
fn one() -> u32 {
    1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn shots() -> u64 {
    600
}
fn trials() -> usize {
    200
}
fn alpha() -> f64 {
    0.05
}
fn max_rounds() -> usize {
    40
}
fn tol() -> f64 {
    1e-4
}
fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

/// Fields shared by every scenario.
pub trait Scenario: DeserializeOwned + Serialize {
    const KIND: &'static str;
    fn name(&self) -> Option<&str>;
    fn seed(&self) -> Option<u64>;
    fn out(&self) -> Option<&PathBuf>;
    /// Semantic checks beyond the schema; errors carry a field path.
    fn validate(&self) -> Result<(), CliError>;
}

macro_rules! common {
    ($t:ty, $kind:literal) => {
        impl Scenario for $t {
            const KIND: &'static str = $kind;
            fn name(&self) -> Option<&str> {
                self.name.as_deref()
            }
            fn seed(&self) -> Option<u64> {
                self.seed
            }
            fn out(&self) -> Option<&PathBuf> {
                self.out.as_ref()
            }
            fn validate(&self) -> Result<(), CliError> {
                validate_name(self.name.as_deref())?;
                self.check()
            }
        }
    };
}

fn bad(path: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: msg.into() }
}

fn validate_name(name: Option<&str>) -> Result<(), CliError> {
    match name {
        Some(n) if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) => {
            Err(bad("name", "use letters, digits, '-', '_' or '.'"))
        }
        _ => Ok(()),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(path, format!("must be a positive number, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, "must be finite"))
    }
}

/// A field in spherical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(rename = "B", deserialize_with = "real")]
    pub b: f64,
    #[serde(default = "half_pi", deserialize_with = "real")]
    pub theta: f64,
    #[serde(default = "quarter_pi", deserialize_with = "real")]
    pub phi: f64,
}

impl FieldSpec {
    fn check(&self, path: &str) -> Result<(), CliError> {
        positive(&format!("{path}.B"), self.b)?;
        finite(&format!("{path}.theta"), self.theta)?;
        finite(&format!("{path}.phi"), self.phi)
    }
}

// ---- qfim -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfimPoint {
    #[serde(rename = "B", deserialize_with = "real")]
    pub b: f64,
    #[serde(default = "half_pi", deserialize_with = "real")]
    pub theta: f64,
    #[serde(default, deserialize_with = "real")]
    pub phi: f64,
    #[serde(rename = "T", deserialize_with = "real")]
    pub t: f64,
}

/// Numeric QFIM against the closed form at a list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfimConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strategy: StrategyKind,
    #[serde(default = "three")]
    pub components: usize,
    #[serde(default)]
    pub points: Vec<QfimPoint>,
    /// Extra seeded random points with `|sin BT| > 0.2`, `sin θ > 0.2`.
    #[serde(default)]
    pub random_points: usize,
}

impl QfimConfig {
    fn check(&self) -> Result<(), CliError> {
        if self.strategy == StrategyKind::LeOpt {
            return Err(bad("strategy", "LE_opt has no closed-form QFIM; use RS, NLE or LE_bell"));
        }
        if !matches!(self.components, 2 | 3) {
            return Err(bad("components", "must be 2 or 3"));
        }
        if self.points.is_empty() && self.random_points == 0 {
            return Err(bad("points", "give at least one point or set random_points"));
        }
        for (i, p) in self.points.iter().enumerate() {
            let path = format!("points[{i}]");
            positive(&format!("{path}.B"), p.b)?;
            positive(&format!("{path}.T"), p.t)?;
            finite(&format!("{path}.theta"), p.theta)?;
            finite(&format!("{path}.phi"), p.phi)?;
            if self.components == 2 && (p.theta - FRAC_PI_2).abs() > 1e-12 {
                return Err(bad(format!("{path}.theta"), "two-component tasks fix theta = pi/2"));
            }
        }
        Ok(())
    }
}
common!(QfimConfig, "qfim");

// ---- precision-sweep --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    B,
    T,
    N,
    /// Field z component at fixed `B`: `θ = acos(Bz/B)`.
    Bz,
}

/// Grid: either explicit `values` or `start`/`stop`/`points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl Grid {
    pub fn resolve(&self, path: &str) -> Result<Vec<f64>, CliError> {
        let v = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 1 => qnetsense::protocols::linspace(a, b, n),
            _ => return Err(bad(path, "give either `values` or all of `start`, `stop`, `points` (>= 1)")),
        };
        if v.is_empty() {
            return Err(bad(format!("{path}.values"), "must not be empty"));
        }
        for (i, x) in v.iter().enumerate() {
            finite(&format!("{path}.values[{i}]"), *x)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    #[serde(default, deserialize_with = "opt_reals")]
    pub values: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "opt_real")]
    pub start: Option<f64>,
    #[serde(default, deserialize_with = "opt_real")]
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl Sweep {
    pub fn grid(&self) -> Grid {
        Grid { values: self.values.clone(), start: self.start, stop: self.stop, points: self.points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    #[serde(default = "shots")]
    pub shots: u64,
    #[serde(default = "trials")]
    pub trials: usize,
}

/// Precision bounds of several strategies along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSweepConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default = "two")]
    pub components: usize,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyKind>,
    pub field: FieldSpec,
    #[serde(rename = "T", deserialize_with = "real")]
    pub t: f64,
    #[serde(rename = "N", default = "one")]
    pub n: u32,
    pub sweep: Sweep,
    pub monte_carlo: Option<MonteCarlo>,
}

impl PrecisionSweepConfig {
    fn check(&self) -> Result<(), CliError> {
        if !matches!(self.components, 2 | 3) {
            return Err(bad("components", "must be 2 or 3"));
        }
        if self.strategies.is_empty() {
            return Err(bad("strategies", "must not be empty"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(bad(format!("strategies[{i}]"), format!("{s} listed twice")));
            }
        }
        self.field.check("field")?;
        positive("T", self.t)?;
        if self.n == 0 {
            return Err(bad("N", "must be at least 1"));
        }
        if self.components == 2 && (self.field.theta - FRAC_PI_2).abs() > 1e-12 {
            return Err(bad("field.theta", "two-component tasks fix theta = pi/2"));
        }
        let values = self.sweep.grid().resolve("sweep")?;
        for (i, v) in values.iter().enumerate() {
            let path = format!("sweep.values[{i}]");
            match self.sweep.axis {
                SweepAxis::N if *v < 1.0 || v.fract() != 0.0 => return Err(bad(path, "N must be a positive integer")),
                SweepAxis::B | SweepAxis::T => positive(&path, *v)?,
                SweepAxis::Bz if v.abs() > self.field.b => return Err(bad(path, "|Bz| must not exceed field.B")),
                _ => {}
            }
        }
        if self.sweep.axis == SweepAxis::Bz && self.components == 2 {
            return Err(bad("sweep.axis", "a Bz sweep needs components = 3"));
        }
        if let Some(mc) = &self.monte_carlo {
            if self.components != 2 {
                return Err(bad("monte_carlo", "Monte-Carlo columns are available for components = 2 only"));
            }
            if mc.shots == 0 {
                return Err(bad("monte_carlo.shots", "must be at least 1"));
            }
            if mc.trials < 2 {
                return Err(bad("monte_carlo.trials", "must be at least 2"));
            }
        }
        Ok(())
    }
}
common!(PrecisionSweepConfig, "precision-sweep");

// ---- landscape --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeAxis {
    /// A parameter label of the strategy's space, or `T`.
    pub param: String,
    #[serde(default, deserialize_with = "opt_reals")]
    pub values: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "opt_real")]
    pub start: Option<f64>,
    #[serde(default, deserialize_with = "opt_real")]
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl LandscapeAxis {
    pub fn grid(&self) -> Grid {
        Grid { values: self.values.clone(), start: self.start, stop: self.stop, points: self.points }
    }
}

/// Normalized likelihood landscape over two axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strategy: StrategyKind,
    #[serde(default = "three")]
    pub components: usize,
    /// True parameters in the strategy's coordinates.
    #[serde(deserialize_with = "reals")]
    pub truth: Vec<f64>,
    /// Control setting; defaults to `truth`.
    #[serde(default, deserialize_with = "opt_reals")]
    pub control: Option<Vec<f64>>,
    #[serde(rename = "T", deserialize_with = "real")]
    pub t: f64,
    #[serde(rename = "N", default = "one")]
    pub n: u32,
    pub axes: Vec<LandscapeAxis>,
}

impl LandscapeConfig {
    pub fn space(&self) -> Option<ParamSpace> {
        Some(match (self.strategy, self.components) {
            (StrategyKind::Rs, 3) => ParamSpace::Spherical,
            (StrategyKind::Rs, 2) => ParamSpace::Planar,
            (StrategyKind::Nle, 3) => ParamSpace::GradSum3,
            (StrategyKind::Nle, 2) => ParamSpace::GradSum2,
            (StrategyKind::LeBell, 3) => ParamSpace::PairSpherical,
            (_, 2) => ParamSpace::PairPlanar,
            _ => return None,
        })
    }

    fn check(&self) -> Result<(), CliError> {
        let Some(space) = self.space() else {
            return Err(bad("components", format!("{} supports {} components only", self.strategy, 2)));
        };
        if self.truth.len() != space.dim() {
            return Err(bad("truth", format!("expected {} values {:?}", space.dim(), space.labels())));
        }
        if let Some(c) = &self.control {
            if c.len() != space.dim() {
                return Err(bad("control", format!("expected {} values {:?}", space.dim(), space.labels())));
            }
        }
        positive("T", self.t)?;
        if self.n == 0 {
            return Err(bad("N", "must be at least 1"));
        }
        if self.axes.len() != 2 {
            return Err(bad("axes", "exactly two axes are required"));
        }
        for (i, a) in self.axes.iter().enumerate() {
            let path = format!("axes[{i}]");
            if a.param != "T" && !space.labels().contains(&a.param.as_str()) {
                return Err(bad(
                    format!("{path}.param"),
                    format!("unknown parameter `{}`; expected T or one of {:?}", a.param, space.labels()),
                ));
            }
            let v = a.grid().resolve(&path)?;
            if a.param == "T" {
                for (k, x) in v.iter().enumerate() {
                    positive(&format!("{path}.values[{k}]"), *x)?;
                }
            }
        }
        if self.axes[0].param == self.axes[1].param {
            return Err(bad("axes[1].param", "the two axes must differ"));
        }
        Ok(())
    }
}
common!(LandscapeConfig, "landscape");

// ---- adaptive ---------------------------------------------------------

/// Adaptive RS estimation of `(B, θ, φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub truth: FieldSpec,
    #[serde(rename = "T", default = "quarter_pi", deserialize_with = "real")]
    pub t: f64,
    #[serde(default = "shots")]
    pub shots: u64,
    #[serde(default = "max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "tol", deserialize_with = "real")]
    pub tol: f64,
    /// Explicit initial controls `[B, theta, phi]`.
    #[serde(default, deserialize_with = "real_rows")]
    pub starts: Vec<Vec<f64>>,
    /// Extra seeded random starts.
    #[serde(default)]
    pub random_starts: usize,
}

impl AdaptiveConfig {
    fn check(&self) -> Result<(), CliError> {
        self.truth.check("truth")?;
        positive("T", self.t)?;
        if self.shots == 0 {
            return Err(bad("shots", "must be at least 1"));
        }
        if !(1..=qnetsense::estimation::MAX_ROUNDS).contains(&self.max_rounds) {
            return Err(bad("max_rounds", format!("must be in 1..={}", qnetsense::estimation::MAX_ROUNDS)));
        }
        positive("tol", self.tol)?;
        if self.starts.is_empty() && self.random_starts == 0 {
            return Err(bad("starts", "give at least one start or set random_starts"));
        }
        for (i, s) in self.starts.iter().enumerate() {
            if s.len() != 3 {
                return Err(bad(format!("starts[{i}]"), "expected [B, theta, phi]"));
            }
        }
        Ok(())
    }
}
common!(AdaptiveConfig, "adaptive");

// ---- noise-sweep ------------------------------------------------------

/// NLE gradient estimation under one noise source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub axis: NoiseAxis,
    #[serde(deserialize_with = "reals")]
    pub levels: Vec<f64>,
    #[serde(rename = "B", default = "unit", deserialize_with = "real")]
    pub b: f64,
    #[serde(rename = "T", deserialize_with = "real")]
    pub t: f64,
    #[serde(rename = "N", default = "one")]
    pub n: u32,
    #[serde(default = "shots")]
    pub shots: u64,
    #[serde(default = "trials")]
    pub trials: usize,
    /// Significance level of the monotonicity check.
    #[serde(default = "alpha", deserialize_with = "real")]
    pub alpha: f64,
}

fn unit() -> f64 {
    1.0
}

impl NoiseSweepConfig {
    fn check(&self) -> Result<(), CliError> {
        if self.levels.is_empty() {
            return Err(bad("levels", "must not be empty"));
        }
        let max = match self.axis {
            NoiseAxis::DephasingRate => f64::INFINITY,
            NoiseAxis::GateError => 0.75,
            NoiseAxis::ReadoutFlip => 0.5,
        };
        for (i, l) in self.levels.iter().enumerate() {
            if !(l.is_finite() && *l >= 0.0 && *l < max) {
                return Err(bad(format!("levels[{i}]"), format!("must lie in [0, {max})")));
            }
        }
        positive("B", self.b)?;
        positive("T", self.t)?;
        if self.n == 0 {
            return Err(bad("N", "must be at least 1"));
        }
        if self.shots == 0 {
            return Err(bad("shots", "must be at least 1"));
        }
        if self.trials < 2 {
            return Err(bad("trials", "must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad("alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }
}
common!(NoiseSweepConfig, "noise-sweep");

/// Parses and validates a scenario; errors name the offending field.
pub fn parse<S: Scenario>(text: &str) -> Result<S, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| bad("<document>", e.to_string().trim().to_string()))?;
    let cfg: S = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().message().trim().to_string();
        bad(if path == "." { "<document>".to_string() } else { path }, msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of the canonical JSON form of a parsed configuration, so that
/// formatting and comments do not change it.
pub fn config_hash<S: Serialize>(cfg: &S) -> String {
    let json = serde_json::to_vec(cfg).expect("configs serialize to JSON");
    hex::encode(Sha256::digest(&json))
}
