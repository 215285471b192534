//! Local HTTP fit service: experimental transiograms, candidate curve
//! evaluation with live row feedback, model-set validation and persistence,
//! and small preview simulations.
//!
//! Field names of every payload are listed in `docs/fit-service.md`.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use mcrf_core::casestudy::{prepare_case, CaseStudyConfig};
use mcrf_core::io::{write_modelset, ModelSetDocument};
use mcrf_core::modelset::VALIDATION_TOLERANCE;
use mcrf_core::{
    accuracy, estimate_experimental, fit_rmse, simulate_realization, AccuracyReport, ClassId, ClassInfo, ClassTable,
    DenominatorPolicy, Error, ExperimentalTransiogramMatrix, GridGeometry, JointMethod, LagBinSpec, ModelKind,
    ModelSpec, ProportionVector, Raster, SamplePoint, SampleSet, SimulationTarget, TransiogramModelSet,
    ValidationReport,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

/// Largest preview grid side.
pub const PREVIEW_MAX_SIDE: usize = 64;
/// Smallest preview grid side a requested downscale may produce.
pub const PREVIEW_MIN_SIDE: usize = 8;
/// Upper bound on curve samples per evaluation.
pub const MAX_CURVE_POINTS: usize = 100_000;

/// Everything the workbench edits: data, estimates and the draft set.
#[derive(Debug, Clone)]
pub struct FitSession {
    pub dataset: String,
    pub samples: SampleSet,
    pub spec: LagBinSpec,
    pub experimental: ExperimentalTransiogramMatrix,
    pub marginals: ProportionVector,
    pub classes: ClassTable,
    pub draft: TransiogramModelSet,
    /// Row-major `n × n`; true where the draft differs from the last persisted set.
    pub dirty: Vec<bool>,
    pub radius: f64,
    pub low_lag_cutoff: f64,
    pub geometry: GridGeometry,
    pub reference: Option<Raster>,
    pub persist_path: Option<PathBuf>,
    pub persisted: Option<TransiogramModelSet>,
}

impl FitSession {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: impl Into<String>,
        samples: SampleSet,
        spec: LagBinSpec,
        draft: TransiogramModelSet,
        radius: f64,
        low_lag_cutoff: f64,
        geometry: GridGeometry,
        reference: Option<Raster>,
        persist_path: Option<PathBuf>,
    ) -> mcrf_core::Result<Self> {
        if draft.n_classes() != samples.n_classes() {
            return Err(Error::Data(format!(
                "model set has {} classes, samples have {}",
                draft.n_classes(),
                samples.n_classes()
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::Argument(format!("radius must be positive, got {radius}")));
        }
        if let Some(r) = &reference {
            if r.geometry() != &geometry {
                return Err(Error::Data("reference raster does not match the session geometry".into()));
            }
        }
        let experimental = estimate_experimental(&samples, &spec)?;
        let marginals = mcrf_core::class_proportions(&samples)?;
        let classes = draft.classes().clone();
        let n = draft.n_classes();
        Ok(Self {
            dataset: dataset.into(),
            samples,
            spec,
            experimental,
            marginals,
            classes,
            draft,
            dirty: vec![false; n * n],
            radius,
            low_lag_cutoff,
            geometry,
            reference,
            persist_path,
            persisted: None,
        })
    }

    /// Dense design of the bundled synthetic case, with its mixed set as draft.
    pub fn demo(cfg: &CaseStudyConfig, persist_path: Option<PathBuf>) -> mcrf_core::Result<Self> {
        let case = prepare_case(cfg)?;
        let d = &case.dense;
        Self::new(
            format!("demo-seed-{}", cfg.seed),
            d.samples.clone(),
            *d.experimental.spec(),
            d.set(JointMethod::Mixed).clone(),
            d.design.radius,
            d.design.low_lag_cutoff,
            *case.reference.geometry(),
            Some(case.reference.clone()),
            persist_path,
        )
    }

    fn n(&self) -> usize {
        self.draft.n_classes()
    }

    fn lag_max(&self) -> f64 {
        2.0 * self.radius
    }

    fn refresh_dirty(&mut self) {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                self.dirty[i * n + j] = self.persisted.as_ref().is_none_or(|p| p.entry(i, j) != self.draft.entry(i, j));
            }
        }
    }
}

pub type SharedSession = Arc<RwLock<Option<FitSession>>>;

pub fn shared(session: Option<FitSession>) -> SharedSession {
    Arc::new(RwLock::new(session))
}

/// JSON error body `{error, fields}` with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: String,
    fields: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self { status, error: error.into(), fields: Vec::new() }
    }

    fn unprocessable(error: impl Into<String>, fields: Vec<String>) -> Self {
        Self { status: StatusCode::UNPROCESSABLE_ENTITY, error: error.into(), fields }
    }

    fn no_session() -> Self {
        Self::new(StatusCode::NOT_FOUND, "no session loaded")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use mcrf_core::ErrorCategory::*;
        let status = match e.category() {
            Argument | Data | Parse | Model => StatusCode::UNPROCESSABLE_ENTITY,
            Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "fields": self.fields }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Malformed bodies and queries answer with the JSON error shape too.
fn payload<T>(r: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    r.map(|Json(v)| v).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

fn query<T>(r: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    r.map(|Query(v)| v).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

fn read_session<T>(state: &SharedSession, f: impl FnOnce(&FitSession) -> ApiResult<T>) -> ApiResult<T> {
    let guard = state.read().map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session lock poisoned"))?;
    f(guard.as_ref().ok_or_else(ApiError::no_session)?)
}

fn write_session<T>(state: &SharedSession, f: impl FnOnce(&mut FitSession) -> ApiResult<T>) -> ApiResult<T> {
    let mut guard =
        state.write().map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session lock poisoned"))?;
    f(guard.as_mut().ok_or_else(ApiError::no_session)?)
}

fn class_index(s: &FitSession, value: ClassId, field: &str) -> ApiResult<ClassId> {
    if value < s.n() {
        Ok(value)
    } else {
        Err(ApiError::unprocessable(
            format!("{field} {value} is out of range for {} classes", s.n()),
            vec![field.into()],
        ))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BinSpecBody {
    pub bin_width: f64,
    pub max_lag: f64,
    pub cell_size: f64,
    pub lags: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryBody {
    pub dataset: String,
    pub n_classes: usize,
    pub classes: Vec<ClassInfo>,
    pub proportions: Vec<f64>,
    pub rest_heads: Vec<ClassId>,
    pub n_samples: usize,
    pub bin_spec: BinSpecBody,
    pub radius: f64,
    pub low_lag_cutoff: f64,
    pub validation_lag_max: f64,
    pub grid: GridBody,
    pub has_reference: bool,
    pub persisted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GridBody {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl From<&GridGeometry> for GridBody {
    fn from(g: &GridGeometry) -> Self {
        Self { nrows: g.nrows, ncols: g.ncols, cell_size: g.cell_size, origin_x: g.origin_x, origin_y: g.origin_y }
    }
}

async fn summary(State(state): State<SharedSession>) -> ApiResult<Json<SummaryBody>> {
    read_session(&state, |s| {
        Ok(Json(SummaryBody {
            dataset: s.dataset.clone(),
            n_classes: s.n(),
            classes: s.classes.classes.clone(),
            proportions: s.marginals.as_slice().to_vec(),
            rest_heads: s.draft.rest_heads().to_vec(),
            n_samples: s.samples.len(),
            bin_spec: BinSpecBody {
                bin_width: s.spec.bin_width,
                max_lag: s.spec.max_lag,
                cell_size: s.spec.cell_size,
                lags: s.experimental.lags().to_vec(),
            },
            radius: s.radius,
            low_lag_cutoff: s.low_lag_cutoff,
            validation_lag_max: s.lag_max(),
            grid: GridBody::from(&s.geometry),
            has_reference: s.reference.is_some(),
            persisted: s.persisted.is_some(),
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct EntryQuery {
    pub tail: ClassId,
    pub head: ClassId,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TransiogramPoint {
    pub lag: f64,
    pub probability: Option<f64>,
    pub count: u64,
    pub tail_total: u64,
    pub missing: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransiogramBody {
    pub tail: ClassId,
    pub head: ClassId,
    pub points: Vec<TransiogramPoint>,
}

async fn transiogram(
    State(state): State<SharedSession>,
    q: Result<Query<EntryQuery>, QueryRejection>,
) -> ApiResult<Json<TransiogramBody>> {
    let q = query(q)?;
    read_session(&state, |s| {
        let tail = class_index(s, q.tail, "tail")?;
        let head = class_index(s, q.head, "head")?;
        let m = &s.experimental;
        let points = (0..m.n_bins())
            .map(|b| {
                let p = m.probability(tail, head, b);
                TransiogramPoint {
                    lag: m.lags()[b],
                    probability: p,
                    count: m.count(tail, head, b),
                    tail_total: m.tail_total(tail, b),
                    missing: p.is_none(),
                }
            })
            .collect();
        Ok(Json(TransiogramBody { tail, head, points }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub tail: ClassId,
    pub head: ClassId,
    pub descriptor: ModelSpec,
    pub lag_max: f64,
    pub step: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvePoint {
    pub lag: f64,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Violation {
    pub lag: f64,
    pub head: ClassId,
    pub value: f64,
    pub kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateBody {
    pub tail: ClassId,
    pub head: ClassId,
    pub kind: ModelKind,
    pub points: Vec<CurvePoint>,
    pub rmse_all: Option<f64>,
    pub rmse_low: Option<f64>,
    pub low_lag_cutoff: f64,
    /// Sum of the row's non-rest entries with the candidate substituted.
    pub row_sum: Vec<CurvePoint>,
    /// The row's rest entry, one minus `row_sum`.
    pub rest: Vec<CurvePoint>,
    pub rest_head: ClassId,
    pub violations: Vec<Violation>,
    pub valid: bool,
}

/// Field names of a spec whose values fall outside their domains.
fn spec_field_errors(spec: &ModelSpec) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |v: Option<f64>, ok: fn(f64) -> bool, name: &str| {
        if let Some(x) = v {
            if !(x.is_finite() && ok(x)) {
                out.push(format!("descriptor.{name}"));
            }
        }
    };
    check(spec.sill, |x| x > 0.0 && x < 1.0, "sill");
    check(spec.range, |x| x > 0.0, "range");
    check(spec.alpha, |x| x > 1.0, "alpha");
    check(spec.theta, |x| x > 0.0, "theta");
    check(spec.weight, |x| x >= 0.0, "weight");
    out
}

/// Field named in backquotes by a resolve error, if any.
fn named_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(format!("descriptor.{}", &msg[start..start + len]))
}

fn lag_grid(lag_max: f64, step: f64) -> ApiResult<Vec<f64>> {
    let mut fields = Vec::new();
    if !(step.is_finite() && step > 0.0) {
        fields.push("step".to_string());
    }
    if !(lag_max.is_finite() && lag_max >= 0.0) {
        fields.push("lag_max".to_string());
    }
    if !fields.is_empty() {
        return Err(ApiError::unprocessable("step must be positive and lag_max nonnegative", fields));
    }
    let n = (lag_max / step).floor() as usize;
    if n >= MAX_CURVE_POINTS {
        return Err(ApiError::unprocessable(
            format!("at most {MAX_CURVE_POINTS} curve points per request"),
            vec!["step".into()],
        ));
    }
    let mut lags: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if lags.last().is_some_and(|&h| h < lag_max) {
        lags.push(lag_max);
    }
    Ok(lags)
}

async fn evaluate(
    State(state): State<SharedSession>,
    req: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<Json<EvaluateBody>> {
    let req = payload(req)?;
    read_session(&state, |s| {
        let tail = class_index(s, req.tail, "tail")?;
        let head = class_index(s, req.head, "head")?;
        if req.descriptor.kind == ModelKind::Rest {
            return Err(ApiError::unprocessable(
                "the rest entry is computed from its row and cannot be evaluated as a candidate",
                vec!["descriptor.kind".into()],
            ));
        }
        let rest_head = s.draft.rest_head(tail);
        if head == rest_head {
            return Err(ApiError::unprocessable(
                format!("entry ({tail}, {head}) is the row's rest entry"),
                vec!["head".into()],
            ));
        }
        let fields = spec_field_errors(&req.descriptor);
        if !fields.is_empty() {
            return Err(ApiError::unprocessable("descriptor parameters out of domain", fields));
        }
        let lags = lag_grid(req.lag_max, req.step)?;
        let descr = req.descriptor.resolve(Some(s.marginals.get(head))).map_err(|e| {
            let msg = e.to_string();
            let field = named_field(&msg).unwrap_or_else(|| "descriptor".into());
            ApiError::unprocessable(msg, vec![field])
        })?;
        let mut row_set = s.draft.clone();
        row_set
            .set_entry(tail, head, descr.clone())
            .map_err(|e| ApiError::unprocessable(e.to_string(), vec!["descriptor".into()]))?;

        let knots = s.experimental.knots(tail, head);
        let score = if knots.is_empty() { None } else { Some(fit_rmse(&descr, &knots, s.low_lag_cutoff)?) };
        let n = s.n();
        let mut row = vec![0.0; n];
        let mut points = Vec::with_capacity(lags.len());
        let mut row_sum = Vec::with_capacity(lags.len());
        let mut rest = Vec::with_capacity(lags.len());
        let mut violations = Vec::new();
        for &h in &lags {
            points.push(CurvePoint { lag: h, value: descr.eval(h)? });
            row_set.row_values(tail, h, &mut row);
            let others: f64 = (0..n).filter(|&j| j != rest_head).map(|j| row[j]).sum();
            row_sum.push(CurvePoint { lag: h, value: others });
            rest.push(CurvePoint { lag: h, value: row[rest_head] });
            for (j, &v) in row.iter().enumerate() {
                if v < -VALIDATION_TOLERANCE || v > 1.0 + VALIDATION_TOLERANCE {
                    violations.push(Violation {
                        lag: h,
                        head: j,
                        value: v,
                        kind: if v < 0.0 { "negative" } else { "above_one" }.into(),
                    });
                }
            }
        }
        Ok(Json(EvaluateBody {
            tail,
            head,
            kind: descr.kind(),
            points,
            rmse_all: score.map(|s| s.rmse_all),
            rmse_low: score.and_then(|s| s.rmse_low),
            low_lag_cutoff: s.low_lag_cutoff,
            row_sum,
            rest,
            rest_head,
            valid: violations.is_empty(),
            violations,
        }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DraftBody {
    pub document: ModelSetDocument,
    /// Row-major `n × n` flags.
    pub dirty: Vec<bool>,
}

async fn get_draft(State(state): State<SharedSession>) -> ApiResult<Json<DraftBody>> {
    read_session(&state, |s| {
        Ok(Json(DraftBody { document: ModelSetDocument::from_set(&s.draft), dirty: s.dirty.clone() }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntryUpdate {
    pub tail: ClassId,
    pub head: ClassId,
    pub descriptor: ModelSpec,
}

async fn put_draft_entry(
    State(state): State<SharedSession>,
    req: Result<Json<EntryUpdate>, JsonRejection>,
) -> ApiResult<Json<DraftBody>> {
    let req = payload(req)?;
    write_session(&state, |s| {
        let tail = class_index(s, req.tail, "tail")?;
        let head = class_index(s, req.head, "head")?;
        let fields = spec_field_errors(&req.descriptor);
        if !fields.is_empty() {
            return Err(ApiError::unprocessable("descriptor parameters out of domain", fields));
        }
        let descr = req.descriptor.resolve(Some(s.marginals.get(head))).map_err(|e| {
            let msg = e.to_string();
            let field = named_field(&msg).unwrap_or_else(|| "descriptor".into());
            ApiError::unprocessable(msg, vec![field])
        })?;
        s.draft
            .set_entry(tail, head, descr)
            .map_err(|e| ApiError::unprocessable(e.to_string(), vec!["head".into()]))?;
        s.refresh_dirty();
        Ok(Json(DraftBody { document: ModelSetDocument::from_set(&s.draft), dirty: s.dirty.clone() }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSetBody {
    pub valid: bool,
    pub persisted: bool,
    pub path: Option<String>,
    pub report: ValidationReport,
}

async fn put_modelset(
    State(state): State<SharedSession>,
    doc: Result<Json<ModelSetDocument>, JsonRejection>,
) -> ApiResult<Response> {
    let doc = payload(doc)?;
    write_session(&state, |s| {
        if doc.n_classes != s.n() {
            return Err(ApiError::unprocessable(
                format!("document has {} classes, session has {}", doc.n_classes, s.n()),
                vec!["n_classes".into()],
            ));
        }
        let mut set = doc.to_set()?;
        let lag_max = doc.lag_max.unwrap_or(0.0).max(s.lag_max());
        let report = mcrf_core::validate_model_set(&mut set, lag_max)?;
        if !report.valid {
            let body = ModelSetBody { valid: false, persisted: false, path: None, report };
            return Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response());
        }
        if let Some(p) = &s.persist_path {
            write_modelset(p, &set)?;
        }
        s.draft = set.clone();
        s.persisted = Some(set);
        s.refresh_dirty();
        let body = ModelSetBody {
            valid: true,
            persisted: true,
            path: s.persist_path.as_ref().map(|p| p.display().to_string()),
            report,
        };
        Ok((StatusCode::OK, Json(body)).into_response())
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewRequest {
    #[serde(default)]
    pub radius: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub downscale: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewBody {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub downscale: usize,
    pub radius: f64,
    pub seed: u64,
    /// Class labels from the top row down; `null` marks NODATA.
    pub rows: Vec<Vec<Option<ClassId>>>,
    /// Reference labels at the preview cell centers, same layout.
    pub reference: Option<Vec<Vec<Option<ClassId>>>>,
    pub accuracy: Option<AccuracyReport>,
    pub conditioning_points: usize,
    pub model_set: String,
    pub notices: Vec<String>,
}

fn rows_top_down(r: &Raster) -> Vec<Vec<Option<ClassId>>> {
    (0..r.nrows()).rev().map(|row| (0..r.ncols()).map(|col| r.get(row, col)).collect()).collect()
}

/// Chooses the downscale factor, with notices for every adjustment.
pub fn preview_downscale(nrows: usize, ncols: usize, requested: Option<usize>, notices: &mut Vec<String>) -> usize {
    let side = nrows.max(ncols);
    let min = side.div_ceil(PREVIEW_MAX_SIDE).max(1);
    let max = (nrows.min(ncols) / PREVIEW_MIN_SIDE).max(min);
    match requested {
        None => min,
        Some(f) if f < min => {
            notices.push(format!(
                "downscale {f} raised to {min} to keep the preview within {PREVIEW_MAX_SIDE}x{PREVIEW_MAX_SIDE}"
            ));
            min
        }
        Some(f) if f > max => {
            notices.push(format!("downscale {f} capped at {max} to keep at least {PREVIEW_MIN_SIDE} cells per side"));
            max
        }
        Some(f) => f,
    }
}

/// One realization on a coarsened copy of the session grid.
pub fn run_preview(s: &FitSession, req: &PreviewRequest) -> ApiResult<PreviewBody> {
    let radius = req.radius.unwrap_or(s.radius);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ApiError::unprocessable("radius must be positive", vec!["radius".into()]));
    }
    let (set, which) = match &s.persisted {
        Some(p) if s.dirty.iter().all(|d| !d) => (p.clone(), "persisted"),
        _ => (s.draft.clone(), "draft"),
    };
    let mut set = set;
    let report = mcrf_core::validate_model_set(&mut set, 2.0 * radius)?;
    if !report.valid {
        return Err(ApiError::unprocessable(
            format!("the {which} model set is invalid:\n{}", report.summary()),
            vec!["modelset".into()],
        ));
    }
    let mut notices = Vec::new();
    let g = s.geometry;
    let f = preview_downscale(g.nrows, g.ncols, req.downscale, &mut notices);
    let coarse =
        GridGeometry::new(g.nrows.div_ceil(f), g.ncols.div_ceil(f), g.cell_size * f as f64, g.origin_x, g.origin_y)?;
    let coarse_set = set.with_lag_unit(f as f64)?;
    let coarse_radius = radius / f as f64;

    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for p in s.samples.points() {
        let Some((r, c)) = coarse.cell_of(p.x, p.y) else { continue };
        if seen.insert((r, c)) {
            let (x, y) = coarse.cell_center(r, c)?;
            points.push(SamplePoint { x, y, class: p.class });
        }
    }
    let dropped = s.samples.len() - points.len();
    if dropped > 0 {
        notices.push(format!("{dropped} samples share a preview cell with an earlier sample and were skipped"));
    }
    let samples = SampleSet::new(points, s.n())?;

    let coarse_reference = match &s.reference {
        Some(reference) => {
            let mut labels = Vec::with_capacity(coarse.n_cells());
            for i in 0..coarse.n_cells() {
                let (r, c) = coarse.row_col(i);
                let (x, y) = coarse.cell_center(r, c)?;
                labels.push(g.cell_of(x, y).and_then(|(rr, cc)| reference.get(rr, cc)));
            }
            Some(Raster::from_labels(coarse, s.n(), &labels)?)
        }
        None => None,
    };
    let target = match &coarse_reference {
        Some(r) => SimulationTarget::masked_by(r),
        None => SimulationTarget::full(coarse),
    };
    let (real, _) = simulate_realization(&target, &samples, &coarse_set, coarse_radius, req.seed)?;
    let acc = match &coarse_reference {
        Some(r) => Some(accuracy(&real, r, &samples, DenominatorPolicy::ExcludeSamples)?),
        None => None,
    };
    Ok(PreviewBody {
        nrows: coarse.nrows,
        ncols: coarse.ncols,
        cell_size: coarse.cell_size,
        downscale: f,
        radius,
        seed: req.seed,
        rows: rows_top_down(&real),
        reference: coarse_reference.as_ref().map(rows_top_down),
        accuracy: acc,
        conditioning_points: samples.len(),
        model_set: which.into(),
        notices,
    })
}

async fn preview(
    State(state): State<SharedSession>,
    req: Result<Json<PreviewRequest>, JsonRejection>,
) -> ApiResult<Json<PreviewBody>> {
    let req = payload(req)?;
    let session = read_session(&state, |s| Ok(s.clone()))?;
    let body = tokio::task::spawn_blocking(move || run_preview(&session, &req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(body))
}

fn local_origin(origin: &HeaderValue) -> bool {
    let Ok(s) = origin.to_str() else { return false };
    let rest = s.strip_prefix("http://").or_else(|| s.strip_prefix("https://")).unwrap_or("");
    let host = match rest.strip_prefix('[') {
        Some(v6) => v6.split(']').next().map(|h| format!("[{h}]")).unwrap_or_default(),
        None => rest.split(':').next().unwrap_or("").to_string(),
    };
    matches!(host.as_str(), "localhost" | "127.0.0.1" | "[::1]")
}

pub fn router(state: SharedSession) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|o, _| local_origin(o)))
        .allow_methods([Method::GET, Method::POST, Method::PUT])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/session/summary", get(summary))
        .route("/transiogram", get(transiogram))
        .route("/model/evaluate", post(evaluate))
        .route("/draft", get(get_draft))
        .route("/draft/entry", put(put_draft_entry))
        .route("/modelset", put(put_modelset))
        .route("/preview", post(preview))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: SharedSession) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("fit service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
