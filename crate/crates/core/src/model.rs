//! Continuous-lag transiogram models.
//!
//! Lags are in pixel lengths. Auto-transiograms start at 1 and decay to their
//! sill; cross-transiograms start at 0 and rise to (or peak above) their sill.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::gamma_pdf_unchecked;

/// `(lag, value)` pair of an empirical curve.
pub type Knot = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    ExponentialAuto,
    ExponentialCross,
    GaussianCross,
    SphericalCross,
    GammaExponential,
    GammaGaussian,
    GammaSpherical,
    Interpolated,
    Rest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::ExponentialAuto,
        ModelKind::ExponentialCross,
        ModelKind::GaussianCross,
        ModelKind::SphericalCross,
        ModelKind::GammaExponential,
        ModelKind::GammaGaussian,
        ModelKind::GammaSpherical,
        ModelKind::Interpolated,
        ModelKind::Rest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ExponentialAuto => "exponential-auto",
            ModelKind::ExponentialCross => "exponential-cross",
            ModelKind::GaussianCross => "gaussian-cross",
            ModelKind::SphericalCross => "spherical-cross",
            ModelKind::GammaExponential => "gamma-exponential",
            ModelKind::GammaGaussian => "gamma-gaussian",
            ModelKind::GammaSpherical => "gamma-spherical",
            ModelKind::Interpolated => "interpolated",
            ModelKind::Rest => "rest",
        }
    }

    pub fn is_gamma(self) -> bool {
        matches!(self, ModelKind::GammaExponential | ModelKind::GammaGaussian | ModelKind::GammaSpherical)
    }

    pub fn is_basic(self) -> bool {
        matches!(
            self,
            ModelKind::ExponentialAuto
                | ModelKind::ExponentialCross
                | ModelKind::GaussianCross
                | ModelKind::SphericalCross
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicParams {
    pub sill: f64,
    pub range: f64,
}

/// Parameters of a gamma-composite model: base curve plus `weight · f(h/range; alpha, theta)`,
/// all scaled by `sill`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub sill: f64,
    pub range: f64,
    pub alpha: f64,
    pub theta: f64,
    pub weight: f64,
}

/// Piecewise-linear curve through knots, the first of which is the analytic
/// origin `(0, 1)` or `(0, 0)`. Flat beyond the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedCurve {
    knots: Vec<Knot>,
}

impl InterpolatedCurve {
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        check_knots(&knots)?;
        Ok(Self { knots })
    }

    /// Prepends the origin knot (1 for auto entries, 0 for cross entries) to measured knots.
    pub fn from_measured(measured: &[Knot], auto: bool) -> Result<Self> {
        if measured.is_empty() {
            return Err(Error::ModelConstruction("no measured knots; this entry needs a mathematical model".into()));
        }
        let mut knots = Vec::with_capacity(measured.len() + 1);
        knots.push((0.0, if auto { 1.0 } else { 0.0 }));
        knots.extend_from_slice(measured);
        Self::new(knots)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    #[inline]
    pub fn value(&self, h: f64) -> f64 {
        interpolate_unchecked(&self.knots, h)
    }
}

fn check_knots(knots: &[Knot]) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::ModelConstruction("interpolated curve has no knots".into()));
    }
    for (i, &(lag, v)) in knots.iter().enumerate() {
        if !(lag >= 0.0 && lag.is_finite()) {
            return Err(Error::ModelConstruction(format!("knot {i} has invalid lag {lag}")));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ModelConstruction(format!("knot {i} value {v} is outside [0, 1]")));
        }
        if i > 0 && lag <= knots[i - 1].0 {
            return Err(Error::ModelConstruction(format!("knot lags must increase strictly (knot {i})")));
        }
    }
    Ok(())
}

/// Linear interpolation between bracketing knots; held flat outside the knot range.
pub fn interpolate_empirical(knots: &[Knot], h: f64) -> Result<f64> {
    if knots.is_empty() {
        return Err(Error::ModelConstruction("interpolated curve has no knots".into()));
    }
    if !(h >= 0.0) {
        return Err(Error::Argument(format!("lag must be >= 0, got {h}")));
    }
    Ok(interpolate_unchecked(knots, h))
}

#[inline]
fn interpolate_unchecked(knots: &[Knot], h: f64) -> f64 {
    // first knot with lag > h
    let upper = knots.partition_point(|k| k.0 <= h);
    if upper == 0 {
        return knots[0].1;
    }
    if upper == knots.len() {
        return knots[upper - 1].1;
    }
    let (h0, p0) = knots[upper - 1];
    let (h1, p1) = knots[upper];
    p0 + (p1 - p0) * ((h - h0) / (h1 - h0))
}

/// One transiogram model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDescriptor {
    ExponentialAuto(BasicParams),
    ExponentialCross(BasicParams),
    GaussianCross(BasicParams),
    SphericalCross(BasicParams),
    GammaExponential(GammaParams),
    GammaGaussian(GammaParams),
    GammaSpherical(GammaParams),
    Interpolated(InterpolatedCurve),
    /// One minus the other entries of its row; only meaningful inside a model set.
    Rest,
}

impl ModelDescriptor {
    pub fn basic(kind: ModelKind, sill: f64, range: f64) -> Result<Self> {
        let p = BasicParams { sill, range };
        let d = match kind {
            ModelKind::ExponentialAuto => ModelDescriptor::ExponentialAuto(p),
            ModelKind::ExponentialCross => ModelDescriptor::ExponentialCross(p),
            ModelKind::GaussianCross => ModelDescriptor::GaussianCross(p),
            ModelKind::SphericalCross => ModelDescriptor::SphericalCross(p),
            other => return Err(Error::Argument(format!("{other} is not a basic model kind"))),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn gamma(kind: ModelKind, sill: f64, range: f64, alpha: f64, theta: f64, weight: f64) -> Result<Self> {
        let p = GammaParams { sill, range, alpha, theta, weight };
        let d = match kind {
            ModelKind::GammaExponential => ModelDescriptor::GammaExponential(p),
            ModelKind::GammaGaussian => ModelDescriptor::GammaGaussian(p),
            ModelKind::GammaSpherical => ModelDescriptor::GammaSpherical(p),
            other => return Err(Error::Argument(format!("{other} is not a gamma-composite kind"))),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelDescriptor::ExponentialAuto(_) => ModelKind::ExponentialAuto,
            ModelDescriptor::ExponentialCross(_) => ModelKind::ExponentialCross,
            ModelDescriptor::GaussianCross(_) => ModelKind::GaussianCross,
            ModelDescriptor::SphericalCross(_) => ModelKind::SphericalCross,
            ModelDescriptor::GammaExponential(_) => ModelKind::GammaExponential,
            ModelDescriptor::GammaGaussian(_) => ModelKind::GammaGaussian,
            ModelDescriptor::GammaSpherical(_) => ModelKind::GammaSpherical,
            ModelDescriptor::Interpolated(_) => ModelKind::Interpolated,
            ModelDescriptor::Rest => ModelKind::Rest,
        }
    }

    pub fn sill(&self) -> Option<f64> {
        match self {
            ModelDescriptor::ExponentialAuto(p)
            | ModelDescriptor::ExponentialCross(p)
            | ModelDescriptor::GaussianCross(p)
            | ModelDescriptor::SphericalCross(p) => Some(p.sill),
            ModelDescriptor::GammaExponential(p)
            | ModelDescriptor::GammaGaussian(p)
            | ModelDescriptor::GammaSpherical(p) => Some(p.sill),
            ModelDescriptor::Interpolated(_) | ModelDescriptor::Rest => None,
        }
    }

    pub fn range(&self) -> Option<f64> {
        match self {
            ModelDescriptor::ExponentialAuto(p)
            | ModelDescriptor::ExponentialCross(p)
            | ModelDescriptor::GaussianCross(p)
            | ModelDescriptor::SphericalCross(p) => Some(p.range),
            ModelDescriptor::GammaExponential(p)
            | ModelDescriptor::GammaGaussian(p)
            | ModelDescriptor::GammaSpherical(p) => Some(p.range),
            ModelDescriptor::Interpolated(_) | ModelDescriptor::Rest => None,
        }
    }

    /// Checks parameter domains: sill in (0, 1), range > 0, and for gamma kinds
    /// alpha > 1, theta > 0, weight >= 0.
    pub fn validate(&self) -> Result<()> {
        let check_basic = |sill: f64, range: f64| -> Result<()> {
            if !(sill > 0.0 && sill < 1.0) {
                return Err(Error::Argument(format!("sill must be in (0, 1), got {sill}")));
            }
            if !(range > 0.0 && range.is_finite()) {
                return Err(Error::Argument(format!("range must be positive, got {range}")));
            }
            Ok(())
        };
        match self {
            ModelDescriptor::ExponentialAuto(p)
            | ModelDescriptor::ExponentialCross(p)
            | ModelDescriptor::GaussianCross(p)
            | ModelDescriptor::SphericalCross(p) => check_basic(p.sill, p.range),
            ModelDescriptor::GammaExponential(p)
            | ModelDescriptor::GammaGaussian(p)
            | ModelDescriptor::GammaSpherical(p) => {
                check_basic(p.sill, p.range)?;
                if !(p.alpha > 1.0 && p.alpha.is_finite()) {
                    return Err(Error::Argument(format!("alpha must be > 1, got {}", p.alpha)));
                }
                if !(p.theta > 0.0 && p.theta.is_finite()) {
                    return Err(Error::Argument(format!("theta must be > 0, got {}", p.theta)));
                }
                if !(p.weight >= 0.0 && p.weight.is_finite()) {
                    return Err(Error::Argument(format!("weight must be >= 0, got {}", p.weight)));
                }
                Ok(())
            }
            ModelDescriptor::Interpolated(c) => check_knots(c.knots()),
            ModelDescriptor::Rest => Ok(()),
        }
    }

    /// Value at lag `h`. Fails for `Rest`, which needs its row.
    pub fn eval(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return Err(Error::Argument(format!("lag must be >= 0, got {h}")));
        }
        if matches!(self, ModelDescriptor::Rest) {
            return Err(Error::Argument("a rest entry is evaluated through its model set row".into()));
        }
        Ok(self.value(h))
    }

    /// Unchecked evaluation for validated descriptors; `Rest` yields NaN.
    #[inline]
    pub(crate) fn value(&self, h: f64) -> f64 {
        match self {
            ModelDescriptor::ExponentialAuto(p) => 1.0 - (1.0 - p.sill) * exponential_base(h, p.range),
            ModelDescriptor::ExponentialCross(p) => p.sill * exponential_base(h, p.range),
            ModelDescriptor::GaussianCross(p) => p.sill * gaussian_base(h, p.range),
            ModelDescriptor::SphericalCross(p) => p.sill * spherical_base(h, p.range),
            ModelDescriptor::GammaExponential(p) => p.sill * (exponential_base(h, p.range) + gamma_term(h, p)),
            ModelDescriptor::GammaGaussian(p) => p.sill * (gaussian_base(h, p.range) + gamma_term(h, p)),
            ModelDescriptor::GammaSpherical(p) => p.sill * (spherical_base(h, p.range) + gamma_term(h, p)),
            ModelDescriptor::Interpolated(c) => c.value(h),
            ModelDescriptor::Rest => f64::NAN,
        }
    }
}

#[inline]
fn exponential_base(h: f64, range: f64) -> f64 {
    1.0 - (-3.0 * h / range).exp()
}

#[inline]
fn gaussian_base(h: f64, range: f64) -> f64 {
    let r = 3.0 * h / range;
    1.0 - (-(r * r)).exp()
}

#[inline]
fn spherical_base(h: f64, range: f64) -> f64 {
    if h < range {
        let r = h / range;
        1.5 * r - 0.5 * r * r * r
    } else {
        1.0
    }
}

#[inline]
fn gamma_term(h: f64, p: &GammaParams) -> f64 {
    if p.weight == 0.0 {
        return 0.0;
    }
    p.weight * gamma_pdf_unchecked(h / p.range, p.alpha, p.theta)
}

/// Exponential auto and exponential/Gaussian/spherical cross models.
pub fn eval_basic(descr: &ModelDescriptor, h: f64) -> Result<f64> {
    if !descr.kind().is_basic() {
        return Err(Error::Argument(format!("{} is not a basic model", descr.kind())));
    }
    descr.eval(h)
}

/// Gamma-exponential, gamma-Gaussian and gamma-spherical cross models.
pub fn eval_gamma_composite(descr: &ModelDescriptor, h: f64) -> Result<f64> {
    if !descr.kind().is_gamma() {
        return Err(Error::Argument(format!("{} is not a gamma-composite model", descr.kind())));
    }
    descr.validate()?;
    descr.eval(h)
}

/// Root-mean-square deviation of a model from experimental knots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    pub rmse_all: f64,
    /// Over knots with lag <= the cutoff; `None` when there are none.
    pub rmse_low: Option<f64>,
}

pub fn fit_rmse(model: &ModelDescriptor, knots: &[Knot], low_lag_cutoff: f64) -> Result<FitScore> {
    if knots.is_empty() {
        return Err(Error::EmptyInput("no experimental knots to score against".into()));
    }
    let mut all = 0.0;
    let mut low = 0.0;
    let mut n_low = 0usize;
    for &(lag, p) in knots {
        let r = model.eval(lag)? - p;
        all += r * r;
        if lag <= low_lag_cutoff {
            low += r * r;
            n_low += 1;
        }
    }
    Ok(FitScore {
        rmse_all: (all / knots.len() as f64).sqrt(),
        rmse_low: (n_low > 0).then(|| (low / n_low as f64).sqrt()),
    })
}

/// Loosely-typed model description as written in documents and requests.
/// Fields that do not apply to `kind` must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sill: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<Knot>>,
}

impl ModelSpec {
    pub fn of_kind(kind: ModelKind) -> Self {
        Self { kind, sill: None, range: None, alpha: None, theta: None, weight: None, knots: None }
    }

    pub fn rest() -> Self {
        Self::of_kind(ModelKind::Rest)
    }

    pub fn with_sill(mut self, sill: f64) -> Self {
        self.sill = Some(sill);
        self
    }

    pub fn with_range(mut self, range: f64) -> Self {
        self.range = Some(range);
        self
    }

    pub fn with_gamma(mut self, alpha: f64, theta: f64, weight: f64) -> Self {
        self.alpha = Some(alpha);
        self.theta = Some(theta);
        self.weight = Some(weight);
        self
    }

    /// Resolves to a descriptor. A missing sill takes `default_sill`.
    /// Errors name the offending field.
    pub fn resolve(&self, default_sill: Option<f64>) -> Result<ModelDescriptor> {
        let kind = self.kind;
        let need = |v: Option<f64>, field: &str| -> Result<f64> {
            v.ok_or_else(|| Error::Schema(format!("{kind} requires `{field}`")))
        };
        let forbid = |present: bool, field: &str| -> Result<()> {
            if present {
                Err(Error::Schema(format!("{kind} does not take `{field}`")))
            } else {
                Ok(())
            }
        };
        let descr = match kind {
            ModelKind::Rest => {
                forbid(self.sill.is_some(), "sill")?;
                forbid(self.range.is_some(), "range")?;
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.theta.is_some(), "theta")?;
                forbid(self.weight.is_some(), "weight")?;
                forbid(self.knots.is_some(), "knots")?;
                ModelDescriptor::Rest
            }
            ModelKind::Interpolated => {
                forbid(self.sill.is_some(), "sill")?;
                forbid(self.range.is_some(), "range")?;
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.theta.is_some(), "theta")?;
                forbid(self.weight.is_some(), "weight")?;
                let knots = self.knots.clone().ok_or_else(|| Error::Schema(format!("{kind} requires `knots`")))?;
                ModelDescriptor::Interpolated(InterpolatedCurve::new(knots).map_err(|e| Error::Schema(e.to_string()))?)
            }
            k if k.is_basic() => {
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.theta.is_some(), "theta")?;
                forbid(self.weight.is_some(), "weight")?;
                forbid(self.knots.is_some(), "knots")?;
                let sill = need(self.sill.or(default_sill), "sill")?;
                ModelDescriptor::basic(k, sill, need(self.range, "range")?)?
            }
            k => {
                forbid(self.knots.is_some(), "knots")?;
                let sill = need(self.sill.or(default_sill), "sill")?;
                ModelDescriptor::gamma(
                    k,
                    sill,
                    need(self.range, "range")?,
                    need(self.alpha, "alpha")?,
                    need(self.theta, "theta")?,
                    need(self.weight, "weight")?,
                )?
            }
        };
        Ok(descr)
    }
}

impl From<&ModelDescriptor> for ModelSpec {
    fn from(d: &ModelDescriptor) -> Self {
        let mut s = ModelSpec::of_kind(d.kind());
        match d {
            ModelDescriptor::ExponentialAuto(p)
            | ModelDescriptor::ExponentialCross(p)
            | ModelDescriptor::GaussianCross(p)
            | ModelDescriptor::SphericalCross(p) => {
                s.sill = Some(p.sill);
                s.range = Some(p.range);
            }
            ModelDescriptor::GammaExponential(p)
            | ModelDescriptor::GammaGaussian(p)
            | ModelDescriptor::GammaSpherical(p) => {
                s.sill = Some(p.sill);
                s.range = Some(p.range);
                s.alpha = Some(p.alpha);
                s.theta = Some(p.theta);
                s.weight = Some(p.weight);
            }
            ModelDescriptor::Interpolated(c) => s.knots = Some(c.knots().to_vec()),
            ModelDescriptor::Rest => {}
        }
        s
    }
}
