//! Joint transiogram model sets.
//!
//! A set holds one model per (tail, head) pair. In every row exactly one entry
//! is `Rest`, defined as one minus the other entries of the row, which makes
//! every row sum to one at every lag. Nonnegativity of the rest entry is what
//! [`validate_model_set`] checks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::ExperimentalTransiogramMatrix;
use crate::grid::{ClassId, ClassRole, ClassTable, ProportionVector};
use crate::model::{InterpolatedCurve, ModelDescriptor, ModelKind, ModelSpec};

/// Tolerance on row sums and on negative/over-one entry values.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;
/// Lag step of the validation sweep, in pixel lengths.
pub const VALIDATION_STEP: f64 = 0.25;

/// How non-rest entries are derived from experimental transiograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointMethod {
    /// Every entry linearly interpolates its experimental transiogram.
    Linear,
    /// Every entry is a fitted mathematical model.
    #[serde(alias = "math")]
    Mathematical,
    /// Interpolation between non-minor classes, mathematical models wherever
    /// the tail or head class is minor.
    Mixed,
}

impl JointMethod {
    pub const ALL: [JointMethod; 3] = [JointMethod::Linear, JointMethod::Mathematical, JointMethod::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            JointMethod::Linear => "linear",
            JointMethod::Mathematical => "math",
            JointMethod::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for JointMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(JointMethod::Linear),
            "math" | "mathematical" => Ok(JointMethod::Mathematical),
            "mixed" => Ok(JointMethod::Mixed),
            other => Err(Error::Argument(format!("unknown joint modeling method `{other}`"))),
        }
    }
}

/// Per-entry model specifications keyed by `(tail, head)`.
pub type EntrySpecs = BTreeMap<(ClassId, ClassId), ModelSpec>;

#[derive(Debug, Clone, PartialEq)]
pub struct TransiogramModelSet {
    n_classes: usize,
    entries: Vec<ModelDescriptor>,
    rest_heads: Vec<ClassId>,
    marginals: ProportionVector,
    classes: ClassTable,
    validated_lag_max: Option<f64>,
}

impl TransiogramModelSet {
    /// `entries` are row-major `n × n`. Each row must hold exactly one `Rest`,
    /// at its rest head.
    pub fn new(
        entries: Vec<ModelDescriptor>,
        rest_heads: Vec<ClassId>,
        marginals: ProportionVector,
        classes: Option<ClassTable>,
    ) -> Result<Self> {
        let n = rest_heads.len();
        if n == 0 {
            return Err(Error::Schema("model set has no classes".into()));
        }
        if entries.len() != n * n {
            return Err(Error::Schema(format!("expected {} entries for {n} classes, got {}", n * n, entries.len())));
        }
        if marginals.len() != n {
            return Err(Error::Schema(format!("{} marginals given for {n} classes", marginals.len())));
        }
        let classes = match classes {
            Some(c) if c.len() == n => c,
            Some(c) => return Err(Error::Schema(format!("{} class descriptions for {n} classes", c.len()))),
            None => ClassTable::suggested(&marginals),
        };
        for (i, &rh) in rest_heads.iter().enumerate() {
            if rh >= n {
                return Err(Error::Schema(format!("row {i}: rest head {rh} out of range")));
            }
            let rests: Vec<_> = (0..n).filter(|&j| matches!(entries[i * n + j], ModelDescriptor::Rest)).collect();
            if rests != [rh] {
                return Err(Error::Schema(format!(
                    "row {i} must have exactly one rest entry at head {rh}, found rest at {rests:?}"
                )));
            }
            for j in 0..n {
                let e = &entries[i * n + j];
                e.validate().map_err(|err| Error::Schema(format!("entry ({i}, {j}): {err}")))?;
                check_origin(e, i == j).map_err(|msg| Error::Schema(format!("entry ({i}, {j}): {msg}")))?;
            }
        }
        Ok(Self { n_classes: n, entries, rest_heads, marginals, classes, validated_lag_max: None })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn entry(&self, tail: ClassId, head: ClassId) -> &ModelDescriptor {
        &self.entries[tail * self.n_classes + head]
    }

    pub fn rest_head(&self, tail: ClassId) -> ClassId {
        self.rest_heads[tail]
    }

    pub fn rest_heads(&self) -> &[ClassId] {
        &self.rest_heads
    }

    pub fn marginals(&self) -> &ProportionVector {
        &self.marginals
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn validated_lag_max(&self) -> Option<f64> {
        self.validated_lag_max
    }

    /// Replaces one non-rest entry, dropping any previous validation.
    pub fn set_entry(&mut self, tail: ClassId, head: ClassId, descr: ModelDescriptor) -> Result<()> {
        if tail >= self.n_classes || head >= self.n_classes {
            return Err(Error::Argument(format!("entry ({tail}, {head}) out of range")));
        }
        if head == self.rest_heads[tail] {
            return Err(Error::Argument(format!("entry ({tail}, {head}) is the row's rest entry")));
        }
        if matches!(descr, ModelDescriptor::Rest) {
            return Err(Error::Argument(format!("row {tail} already has its rest entry")));
        }
        descr.validate()?;
        check_origin(&descr, tail == head).map_err(Error::Argument)?;
        self.entries[tail * self.n_classes + head] = descr;
        self.validated_lag_max = None;
        Ok(())
    }

    /// Raw value of one entry at lag `h`; rest entries are computed from their row.
    pub fn eval(&self, tail: ClassId, head: ClassId, h: f64) -> f64 {
        match self.entry(tail, head) {
            ModelDescriptor::Rest => self.rest_value(tail, h),
            e => e.value(h),
        }
    }

    fn rest_value(&self, tail: ClassId, h: f64) -> f64 {
        let others: f64 = (0..self.n_classes)
            .filter(|&j| j != self.rest_heads[tail])
            .map(|j| self.entries[tail * self.n_classes + j].value(h))
            .sum();
        1.0 - others
    }

    /// Raw row values at lag `h` into `out`.
    pub fn row_values(&self, tail: ClassId, h: f64, out: &mut [f64]) {
        let n = self.n_classes;
        let rh = self.rest_heads[tail];
        let mut others = 0.0;
        for j in 0..n {
            if j != rh {
                let v = self.entries[tail * n + j].value(h);
                out[j] = v;
                others += v;
            }
        }
        out[rh] = 1.0 - others;
    }

    /// Row values usable as probabilities: negatives (within validation
    /// tolerance on a validated set) are clamped to zero and the row is
    /// renormalized.
    pub fn row_probabilities(&self, tail: ClassId, h: f64, out: &mut [f64]) {
        self.row_values(tail, h, out);
        if out.iter().any(|&v| v < 0.0) {
            let mut sum = 0.0;
            for v in out.iter_mut() {
                *v = v.max(0.0);
                sum += *v;
            }
            if sum > 0.0 {
                out.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    /// Probability `p_{tail,head}(h)` after clamping and renormalization.
    pub fn probability(&self, tail: ClassId, head: ClassId, h: f64) -> f64 {
        let mut row = vec![0.0; self.n_classes];
        self.row_probabilities(tail, h, &mut row);
        row[head]
    }

    pub fn roles(&self) -> Vec<ClassRole> {
        self.classes.roles()
    }

    /// The same curves with lags counted in pixels `factor` times larger,
    /// `p'(h) = p(factor · h)`. A validated lag carries over, divided by `factor`.
    pub fn with_lag_unit(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Argument(format!("lag unit factor must be positive, got {factor}")));
        }
        let entries = self.entries.iter().map(|e| rescale(e, factor)).collect::<Result<Vec<_>>>()?;
        Ok(Self { entries, validated_lag_max: self.validated_lag_max.map(|l| l / factor), ..self.clone() })
    }
}

fn rescale(e: &ModelDescriptor, f: f64) -> Result<ModelDescriptor> {
    use ModelDescriptor as D;
    let b = |p: &crate::model::BasicParams| crate::model::BasicParams { sill: p.sill, range: p.range / f };
    let g = |p: &crate::model::GammaParams| crate::model::GammaParams { range: p.range / f, ..*p };
    Ok(match e {
        D::ExponentialAuto(p) => D::ExponentialAuto(b(p)),
        D::ExponentialCross(p) => D::ExponentialCross(b(p)),
        D::GaussianCross(p) => D::GaussianCross(b(p)),
        D::SphericalCross(p) => D::SphericalCross(b(p)),
        D::GammaExponential(p) => D::GammaExponential(g(p)),
        D::GammaGaussian(p) => D::GammaGaussian(g(p)),
        D::GammaSpherical(p) => D::GammaSpherical(g(p)),
        D::Interpolated(c) => {
            D::Interpolated(InterpolatedCurve::new(c.knots().iter().map(|&(h, v)| (h / f, v)).collect())?)
        }
        D::Rest => D::Rest,
    })
}

fn check_origin(e: &ModelDescriptor, auto: bool) -> std::result::Result<(), String> {
    match e {
        ModelDescriptor::ExponentialAuto(_) if !auto => {
            Err("exponential-auto can only model an auto-transiogram".into())
        }
        ModelDescriptor::Rest | ModelDescriptor::ExponentialAuto(_) => Ok(()),
        ModelDescriptor::Interpolated(c) => {
            let want = if auto { 1.0 } else { 0.0 };
            match c.knots().first() {
                Some(&(0.0, v)) if v == want => Ok(()),
                _ => Err(format!("interpolated curve must start at the origin knot (0, {want})")),
            }
        }
        _ if auto => Err(format!("{} is a cross-transiogram model; auto entries start at 1", e.kind())),
        _ => Ok(()),
    }
}

/// Rest entry value `1 − Σ others` at lag `h`.
pub fn eval_rest(set: &TransiogramModelSet, row: ClassId, h: f64) -> Result<f64> {
    if row >= set.n_classes {
        return Err(Error::Argument(format!("row {row} out of range")));
    }
    if !(h >= 0.0) {
        return Err(Error::Argument(format!("lag must be >= 0, got {h}")));
    }
    Ok(set.rest_value(row, h))
}

/// Builds a joint model set from experimental transiograms.
///
/// `specs` supplies descriptors for mathematically modeled entries; a spec
/// without a sill takes `marginals[head]`, and an `interpolated` spec without
/// knots takes the experimental knots. `roles` is only consulted by
/// [`JointMethod::Mixed`].
pub fn build_model_set(
    exp: &ExperimentalTransiogramMatrix,
    method: JointMethod,
    specs: &EntrySpecs,
    marginals: &ProportionVector,
    rest_heads: &[ClassId],
    classes: &ClassTable,
) -> Result<TransiogramModelSet> {
    let n = exp.n_classes();
    if marginals.len() != n || rest_heads.len() != n || classes.len() != n {
        return Err(Error::Config(format!(
            "{n} classes but {} marginals, {} rest heads and {} class roles",
            marginals.len(),
            rest_heads.len(),
            classes.len()
        )));
    }
    if let Some((i, &rh)) = rest_heads.iter().enumerate().find(|(_, &rh)| rh >= n) {
        return Err(Error::Config(format!("row {i}: rest head {rh} out of range")));
    }
    for (&(i, j), spec) in specs {
        if i >= n || j >= n {
            return Err(Error::Config(format!("spec for entry ({i}, {j}) is out of range")));
        }
        if spec.kind == ModelKind::Rest && rest_heads[i] != j {
            return Err(Error::Config(format!(
                "spec marks ({i}, {j}) as rest but the row's rest head is {}",
                rest_heads[i]
            )));
        }
    }
    let roles = classes.roles();
    let interpolate = |i: usize, j: usize| match method {
        JointMethod::Linear => true,
        JointMethod::Mathematical => false,
        JointMethod::Mixed => roles[i] != ClassRole::Minor && roles[j] != ClassRole::Minor,
    };

    let mut entries = Vec::with_capacity(n * n);
    let mut unreliable = Vec::new();
    let mut unspecified = Vec::new();
    let mut problems = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if j == rest_heads[i] {
                entries.push(ModelDescriptor::Rest);
                continue;
            }
            let descr = if interpolate(i, j) {
                experimental_curve(exp, i, j).map_err(|_| unreliable.push((i, j))).ok()
            } else {
                match specs.get(&(i, j)) {
                    None => {
                        unspecified.push((i, j));
                        None
                    }
                    Some(spec) if spec.kind == ModelKind::Interpolated && spec.knots.is_none() => {
                        experimental_curve(exp, i, j).map_err(|_| unreliable.push((i, j))).ok()
                    }
                    Some(spec) => spec
                        .resolve(Some(marginals.get(j)))
                        .map_err(|e| problems.push(format!("entry ({i}, {j}): {e}")))
                        .ok(),
                }
            };
            entries.push(descr.unwrap_or(ModelDescriptor::Rest));
        }
    }
    if !unreliable.is_empty() {
        return Err(Error::UnreliableEntries { pairs: unreliable });
    }
    if !unspecified.is_empty() {
        return Err(Error::Config(format!("no model descriptor for mathematically modeled entries {unspecified:?}")));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    TransiogramModelSet::new(entries, rest_heads.to_vec(), marginals.clone(), Some(classes.clone()))
        .map_err(|e| Error::Config(e.to_string()))
}

fn experimental_curve(exp: &ExperimentalTransiogramMatrix, i: ClassId, j: ClassId) -> Result<ModelDescriptor> {
    let knots = exp.knots(i, j);
    Ok(ModelDescriptor::Interpolated(InterpolatedCurve::from_measured(&knots, i == j)?))
}

/// Default rest head per row: the most frequent class.
pub fn default_rest_heads(marginals: &ProportionVector) -> Vec<ClassId> {
    let p = marginals.as_slice();
    let major = (0..p.len()).fold(0, |best, k| if p[k] > p[best] { k } else { best });
    vec![major; p.len()]
}

/// Worst violation seen in one row during a validation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub tail: ClassId,
    /// Largest `|Σ_j p_ij(h) − 1|` over the sweep.
    pub max_sum_deviation: f64,
    pub max_sum_deviation_lag: f64,
    /// Smallest entry value in the row over the sweep.
    pub min_value: f64,
    pub min_head: ClassId,
    pub min_lag: f64,
    /// Largest entry value in the row over the sweep.
    pub max_value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub lag_max: f64,
    pub step: f64,
    pub valid: bool,
    /// Smallest entry value over all rows and lags.
    pub min_value: f64,
    pub rows: Vec<RowReport>,
}

impl ValidationReport {
    pub fn failing_rows(&self) -> impl Iterator<Item = &RowReport> {
        self.rows.iter().filter(|r| !r.valid)
    }

    pub fn max_sum_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.max_sum_deviation).fold(0.0, f64::max)
    }

    /// Human-readable summary, one line per row.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "model set {} over lags [0, {}] (step {}): min entry {:.3e}, max |row sum - 1| {:.3e}\n",
            if self.valid { "valid" } else { "INVALID" },
            self.lag_max,
            self.step,
            self.min_value,
            self.max_sum_deviation()
        );
        for r in &self.rows {
            s.push_str(&format!(
                "  row {}: {} min {:.6} at head {} lag {}; max {:.6}; max |sum - 1| {:.3e} at lag {}\n",
                r.tail,
                if r.valid { "ok" } else { "FAIL" },
                r.min_value,
                r.min_head,
                r.min_lag,
                r.max_value,
                r.max_sum_deviation,
                r.max_sum_deviation_lag
            ));
        }
        s
    }
}

/// Sweeps `h ∈ [0, lag_max]` at [`VALIDATION_STEP`] and checks every row sums to one
/// and every entry lies in `[−tol, 1 + tol]`. A valid set records `lag_max`.
pub fn validate_model_set(set: &mut TransiogramModelSet, lag_max: f64) -> Result<ValidationReport> {
    let report = check_model_set(set, lag_max)?;
    set.validated_lag_max = report.valid.then_some(lag_max);
    Ok(report)
}

/// [`validate_model_set`] without recording the outcome in the set.
pub fn check_model_set(set: &TransiogramModelSet, lag_max: f64) -> Result<ValidationReport> {
    if !(lag_max > 0.0 && lag_max.is_finite()) {
        return Err(Error::Argument(format!("validation lag_max must be positive, got {lag_max}")));
    }
    let n = set.n_classes;
    let steps = (lag_max / VALIDATION_STEP).ceil() as usize;
    let lags: Vec<f64> = (0..=steps).map(|k| (k as f64 * VALIDATION_STEP).min(lag_max)).collect();
    let mut row = vec![0.0; n];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = RowReport {
            tail: i,
            max_sum_deviation: 0.0,
            max_sum_deviation_lag: 0.0,
            min_value: f64::INFINITY,
            min_head: 0,
            min_lag: 0.0,
            max_value: f64::NEG_INFINITY,
            valid: true,
        };
        for &h in &lags {
            set.row_values(i, h, &mut row);
            let sum: f64 = row.iter().sum();
            let dev = (sum - 1.0).abs();
            if !(dev <= r.max_sum_deviation) {
                r.max_sum_deviation = dev;
                r.max_sum_deviation_lag = h;
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= r.min_value) {
                    r.min_value = v;
                    r.min_head = j;
                    r.min_lag = h;
                }
                if !(v <= r.max_value) {
                    r.max_value = v;
                }
            }
        }
        r.valid = r.max_sum_deviation <= VALIDATION_TOLERANCE
            && r.min_value >= -VALIDATION_TOLERANCE
            && r.max_value <= 1.0 + VALIDATION_TOLERANCE;
        rows.push(r);
    }
    Ok(ValidationReport {
        lag_max,
        step: VALIDATION_STEP,
        valid: rows.iter().all(|r| r.valid),
        min_value: rows.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// Converts a set back into per-entry specs, e.g. to seed an editable draft.
pub fn specs_of(set: &TransiogramModelSet) -> EntrySpecs {
    let n = set.n_classes;
    let mut out = EntrySpecs::new();
    for i in 0..n {
        for j in 0..n {
            out.insert((i, j), ModelSpec::from(set.entry(i, j)));
        }
    }
    out
}

/// Builds a set from a complete grid of specs (every entry present, one rest per row).
pub fn set_from_specs(
    specs: &HashMap<(ClassId, ClassId), ModelSpec>,
    marginals: ProportionVector,
    classes: Option<ClassTable>,
) -> Result<TransiogramModelSet> {
    let n = marginals.len();
    let mut entries = Vec::with_capacity(n * n);
    let mut rest_heads = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..n {
            let spec = specs.get(&(i, j)).ok_or_else(|| Error::Schema(format!("entry ({i}, {j}) is missing")))?;
            if spec.kind == ModelKind::Rest {
                if rest_heads[i] != usize::MAX {
                    return Err(Error::Schema(format!("row {i} has more than one rest entry")));
                }
                rest_heads[i] = j;
            }
            entries.push(
                spec.resolve(Some(marginals.get(j))).map_err(|e| Error::Schema(format!("entry ({i}, {j}): {e}")))?,
            );
        }
        if rest_heads[i] == usize::MAX {
            return Err(Error::Schema(format!("row {i} has no rest entry")));
        }
    }
    TransiogramModelSet::new(entries, rest_heads, marginals, classes)
}
