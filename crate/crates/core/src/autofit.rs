//! Scripted stand-in for expert model fitting.
//!
//! Auto entries get an exponential model, cross entries the best of the basic
//! and gamma-composite kinds by low-lag RMSE, with sills fixed to the head
//! class proportions. When a row's rest entry turns negative the row falls
//! back first to basic kinds and then to exponential cross models whose
//! ranges are at least the auto range, which keeps the rest entry nonnegative
//! whenever the sills sum to at most one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::ExperimentalTransiogramMatrix;
use crate::grid::{ClassId, ClassRole, ClassTable, ProportionVector};
use crate::model::{fit_rmse, Knot, ModelDescriptor, ModelKind, ModelSpec};
use crate::modelset::{
    build_model_set, check_model_set, EntrySpecs, JointMethod, TransiogramModelSet, VALIDATION_STEP,
};

/// Search grids of the scripted fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoFitOptions {
    /// Knots at lags up to this value drive model choice.
    pub low_lag_cutoff: f64,
    pub ranges: Vec<f64>,
    pub gamma_ranges: Vec<f64>,
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
    /// A gamma model must beat the best basic model's RMSE by this factor.
    pub gamma_advantage: f64,
    /// Range used for entries without any measured knot.
    pub default_range: f64,
    /// Lag up to which rows are checked.
    pub lag_max: f64,
}

impl Default for AutoFitOptions {
    fn default() -> Self {
        Self {
            low_lag_cutoff: 15.0,
            ranges: (1..=100).map(f64::from).collect(),
            gamma_ranges: (1..=24).map(|k| 5.0 * f64::from(k)).collect(),
            alphas: vec![1.5, 2.0, 2.5, 3.0, 4.0, 5.0],
            thetas: vec![0.3, 0.5, 0.75, 1.0, 1.5],
            weights: vec![0.5, 1.0, 1.5, 2.0, 3.0],
            gamma_advantage: 0.9,
            default_range: 10.0,
            lag_max: 100.0,
        }
    }
}

/// One fitted entry with its fallbacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEntry {
    /// Best model overall.
    pub best: ModelSpec,
    /// Best basic-kind model.
    pub basic: ModelSpec,
    /// Range of the best exponential model.
    pub exponential_range: f64,
}

/// How far a row had to fall back to stay valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFallback {
    None,
    BasicKinds,
    LongExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoFit {
    pub entries: BTreeMap<(ClassId, ClassId), FittedEntry>,
    pub rows: Vec<RowFallback>,
}

impl AutoFit {
    /// Specs chosen for each non-rest entry after row fallbacks.
    pub fn specs(&self) -> EntrySpecs {
        let mut out = EntrySpecs::new();
        for (&(i, j), e) in &self.entries {
            out.insert((i, j), choose(e, i == j, self.rows[i], self.auto_range(i)));
        }
        out
    }

    fn auto_range(&self, tail: ClassId) -> f64 {
        self.entries.get(&(tail, tail)).map(|e| e.exponential_range).unwrap_or(0.0)
    }
}

fn choose(e: &FittedEntry, auto: bool, fallback: RowFallback, auto_range: f64) -> ModelSpec {
    if auto {
        return e.best.clone();
    }
    match fallback {
        RowFallback::None => e.best.clone(),
        RowFallback::BasicKinds => e.basic.clone(),
        RowFallback::LongExponential => ModelSpec::of_kind(ModelKind::ExponentialCross)
            .with_sill(e.best.sill.unwrap_or_default())
            .with_range(e.exponential_range.max(auto_range)),
    }
}

fn score(d: &ModelDescriptor, knots: &[Knot], cutoff: f64) -> f64 {
    match fit_rmse(d, knots, cutoff) {
        Ok(s) => s.rmse_low.unwrap_or(s.rmse_all),
        Err(_) => f64::INFINITY,
    }
}

/// Fits one entry against its experimental knots.
pub fn fit_entry(knots: &[Knot], auto: bool, sill: f64, opts: &AutoFitOptions) -> Result<FittedEntry> {
    let spec = |kind, range| ModelSpec::of_kind(kind).with_sill(sill).with_range(range);
    if knots.is_empty() {
        let kind = if auto { ModelKind::ExponentialAuto } else { ModelKind::ExponentialCross };
        let s = spec(kind, opts.default_range);
        return Ok(FittedEntry { best: s.clone(), basic: s, exponential_range: opts.default_range });
    }
    let basic_kinds: &[ModelKind] = if auto {
        &[ModelKind::ExponentialAuto]
    } else {
        &[ModelKind::ExponentialCross, ModelKind::GaussianCross, ModelKind::SphericalCross]
    };
    let mut best_basic: Option<(f64, ModelSpec)> = None;
    let mut best_exp: Option<(f64, f64)> = None;
    for &kind in basic_kinds {
        for &d in &opts.ranges {
            let descr = ModelDescriptor::basic(kind, sill, d)?;
            let s = score(&descr, knots, opts.low_lag_cutoff);
            if best_basic.as_ref().is_none_or(|(b, _)| s < *b) {
                best_basic = Some((s, spec(kind, d)));
            }
            if matches!(kind, ModelKind::ExponentialAuto | ModelKind::ExponentialCross)
                && best_exp.is_none_or(|(b, _)| s < b)
            {
                best_exp = Some((s, d));
            }
        }
    }
    let (basic_score, basic) = best_basic.ok_or_else(|| Error::Argument("empty range grid".into()))?;
    let exponential_range = best_exp.map(|(_, d)| d).unwrap_or(opts.default_range);
    let mut best = basic.clone();
    if !auto {
        let mut best_gamma: Option<(f64, ModelSpec)> = None;
        for kind in [ModelKind::GammaExponential, ModelKind::GammaGaussian, ModelKind::GammaSpherical] {
            for &d in &opts.gamma_ranges {
                for &a in &opts.alphas {
                    for &t in &opts.thetas {
                        for &w in &opts.weights {
                            let descr = ModelDescriptor::gamma(kind, sill, d, a, t, w)?;
                            let s = score(&descr, knots, opts.low_lag_cutoff);
                            if best_gamma.as_ref().is_none_or(|(b, _)| s < *b) {
                                best_gamma = Some((s, spec(kind, d).with_gamma(a, t, w)));
                            }
                        }
                    }
                }
            }
        }
        if let Some((g, s)) = best_gamma {
            if g < opts.gamma_advantage * basic_score {
                best = s;
            }
        }
    }
    Ok(FittedEntry { best, basic, exponential_range })
}

/// Fits every non-rest entry. `sills` overrides the head proportion per
/// head class; `borrowed` replaces fits outright (e.g. descriptors carried
/// over from a denser dataset).
pub fn fit_all(
    exp: &ExperimentalTransiogramMatrix,
    marginals: &ProportionVector,
    rest_heads: &[ClassId],
    sills: &BTreeMap<ClassId, f64>,
    borrowed: &BTreeMap<(ClassId, ClassId), FittedEntry>,
    opts: &AutoFitOptions,
) -> Result<AutoFit> {
    let n = exp.n_classes();
    let mut entries = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if j == rest_heads[i] {
                continue;
            }
            let e = match borrowed.get(&(i, j)) {
                Some(b) => b.clone(),
                None => {
                    let sill = sills.get(&j).copied().unwrap_or(marginals.get(j));
                    fit_entry(&exp.knots(i, j), i == j, sill, opts)?
                }
            };
            entries.insert((i, j), e);
        }
    }
    let mut fit = AutoFit { entries, rows: vec![RowFallback::None; n] };
    for i in 0..n {
        for level in [RowFallback::None, RowFallback::BasicKinds, RowFallback::LongExponential] {
            fit.rows[i] = level;
            if row_ok(&fit, i, rest_heads[i], n, opts.lag_max)? {
                break;
            }
        }
    }
    Ok(fit)
}

fn row_ok(fit: &AutoFit, i: ClassId, rest_head: ClassId, n: usize, lag_max: f64) -> Result<bool> {
    let ar = fit.auto_range(i);
    let descrs = (0..n)
        .filter(|&j| j != rest_head)
        .map(|j| choose(&fit.entries[&(i, j)], i == j, fit.rows[i], ar).resolve(None))
        .collect::<Result<Vec<_>>>()?;
    let steps = (lag_max / VALIDATION_STEP).ceil() as usize;
    for k in 0..=steps {
        let h = (k as f64 * VALIDATION_STEP).min(lag_max);
        let mut others = 0.0;
        for d in &descrs {
            let v = d.value(h);
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Ok(false);
            }
            others += v;
        }
        if others > 1.0 + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Builds a mixed set from `specs`, lengthening the ranges of mathematically
/// modeled cross entries in failing rows until the set validates to `lag_max`.
/// Returns the set and the number of lengthening rounds.
pub fn mixed_until_valid(
    exp: &ExperimentalTransiogramMatrix,
    specs: &EntrySpecs,
    marginals: &ProportionVector,
    rest_heads: &[ClassId],
    classes: &ClassTable,
    lag_max: f64,
) -> Result<(TransiogramModelSet, usize)> {
    const FACTOR: f64 = 1.25;
    const MAX_ROUNDS: usize = 100;
    let roles = classes.roles();
    let mut specs = specs.clone();
    for round in 0..=MAX_ROUNDS {
        let set = build_model_set(exp, JointMethod::Mixed, &specs, marginals, rest_heads, classes)?;
        let report = check_model_set(&set, lag_max)?;
        if report.valid {
            return Ok((set, round));
        }
        for row in report.failing_rows() {
            let i = row.tail;
            for (&(t, h), s) in specs.iter_mut() {
                let math = roles[t] == ClassRole::Minor || roles[h] == ClassRole::Minor;
                if t == i && t != h && math {
                    if let Some(r) = s.range.as_mut() {
                        *r *= FACTOR;
                    }
                }
            }
        }
    }
    Err(Error::Config(format!("mixed model set still invalid after {MAX_ROUNDS} range adjustments")))
}
