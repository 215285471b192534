//! Bundled synthetic case study: a blob reference map, dense and sparse
//! random samples, the three joint modeling methods and ensemble summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autofit::{fit_all, mixed_until_valid, AutoFit, AutoFitOptions, FittedEntry, RowFallback};
use crate::error::{Error, Result};
use crate::estimate::{estimate_experimental, ExperimentalTransiogramMatrix, LagBinSpec};
use crate::grid::{
    class_proportions, generate_blob_reference, random_sample, ClassId, ClassInfo, ClassRole, ClassTable,
    ProportionVector, Raster, SampleSet,
};
use crate::mcrf::{realization_seed, simulate_ensemble, EnsembleOptions, RealizationLog, SimulationTarget};
use crate::modelset::{
    build_model_set, validate_model_set, EntrySpecs, JointMethod, TransiogramModelSet, ValidationReport,
};
use crate::postprocess::{
    accuracy, mean_accuracy, mean_realization_percentages, occurrence_probability, optimal_map, patch_count,
    raster_percentages, AccuracyReport, DenominatorPolicy, ProbabilityCube,
};

/// Sampling and estimation settings of one sample dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDesign {
    pub name: String,
    /// Share of grid cells sampled.
    pub fraction: f64,
    pub bin_width: f64,
    pub max_lag: f64,
    /// Simulation search radius in pixel lengths.
    pub radius: f64,
    /// Low-lag window of the scripted model fit.
    pub low_lag_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyConfig {
    pub nrows: usize,
    pub ncols: usize,
    pub class_names: Vec<String>,
    pub class_weights: Vec<f64>,
    pub blob_seeds: usize,
    pub minor_classes: Vec<ClassId>,
    /// Class thinned out in the sparse dataset.
    pub reduced_class: ClassId,
    pub reduced_max_points: usize,
    /// Upper bound on the reference share of the reduced class.
    pub reduced_max_share: f64,
    pub dense: SampleDesign,
    pub sparse: SampleDesign,
    pub validation_lag_max: f64,
    pub n_real: usize,
    pub seed: u64,
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
    pub policy: DenominatorPolicy,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            nrows: 150,
            ncols: 150,
            class_names: ["corn", "soybean", "grass", "forest", "wetland", "urban", "other crops"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            class_weights: vec![0.1284, 0.1875, 0.0978, 0.0631, 0.0194, 0.0980, 0.4058],
            blob_seeds: 200,
            minor_classes: vec![3, 4],
            reduced_class: 4,
            reduced_max_points: 2,
            reduced_max_share: 0.02,
            dense: SampleDesign {
                name: "dense".into(),
                fraction: 0.03,
                bin_width: 3.0,
                max_lag: 60.0,
                radius: 30.0,
                low_lag_cutoff: 15.0,
            },
            sparse: SampleDesign {
                name: "sparse".into(),
                fraction: 0.008,
                bin_width: 7.0,
                max_lag: 98.0,
                radius: 50.0,
                low_lag_cutoff: 28.0,
            },
            validation_lag_max: 100.0,
            n_real: 100,
            seed: 7,
            threads: None,
            policy: DenominatorPolicy::ExcludeSamples,
        }
    }
}

impl CaseStudyConfig {
    pub fn n_classes(&self) -> usize {
        self.class_weights.len()
    }

    /// Most frequent class by weight; every row's rest head.
    pub fn rest_head(&self) -> ClassId {
        let w = &self.class_weights;
        (0..w.len()).fold(0, |b, k| if w[k] > w[b] { k } else { b })
    }

    pub fn classes(&self) -> Result<ClassTable> {
        ClassTable::new(
            self.class_names
                .iter()
                .enumerate()
                .map(|(id, name)| ClassInfo {
                    id,
                    name: name.clone(),
                    role: if self.minor_classes.contains(&id) { ClassRole::Minor } else { ClassRole::Major },
                })
                .collect(),
        )
    }

    fn check(&self) -> Result<()> {
        let n = self.n_classes();
        if self.class_names.len() != n {
            return Err(Error::Config(format!("{} class names for {n} classes", self.class_names.len())));
        }
        if self.reduced_class >= n || self.minor_classes.iter().any(|&c| c >= n) {
            return Err(Error::Config("minor or reduced class out of range".into()));
        }
        if self.n_real == 0 {
            return Err(Error::Config("n_real must be at least 1".into()));
        }
        for d in [&self.dense, &self.sparse] {
            if self.validation_lag_max < 2.0 * d.radius {
                return Err(Error::Config(format!(
                    "validation lag {} is below twice the {} radius {}",
                    self.validation_lag_max, d.name, d.radius
                )));
            }
        }
        Ok(())
    }
}

/// Independent seed streams derived from the case-study seed.
fn stream(seed: u64, stream: u64, index: usize) -> u64 {
    realization_seed(seed.wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)), index)
}

const REFERENCE_STREAM: u64 = 1;
const DENSE_STREAM: u64 = 2;
const SPARSE_STREAM: u64 = 3;
const SIMULATION_STREAM: u64 = 4;
const MAX_ATTEMPTS: usize = 1000;

/// Reference map: the first blob mosaic (over derived seeds) in which every
/// class occurs and the reduced class stays below its share cap.
pub fn make_reference(cfg: &CaseStudyConfig) -> Result<(Raster, usize)> {
    cfg.check()?;
    let weights = ProportionVector::normalized(&cfg.class_weights)?;
    for attempt in 0..MAX_ATTEMPTS {
        let r = generate_blob_reference(
            cfg.nrows,
            cfg.ncols,
            cfg.n_classes(),
            &weights,
            cfg.blob_seeds,
            stream(cfg.seed, REFERENCE_STREAM, attempt),
        )?;
        let p = r.proportions()?;
        let share = p.get(cfg.reduced_class);
        if p.as_slice().iter().all(|&x| x > 0.0) && share > 0.0 && share < cfg.reduced_max_share {
            return Ok((r, attempt));
        }
    }
    Err(Error::Config(format!("no admissible reference map in {MAX_ATTEMPTS} attempts")))
}

/// Random sample containing every class; the sparse design keeps at most
/// `reduced_max_points` points of the reduced class.
pub fn make_samples(cfg: &CaseStudyConfig, reference: &Raster, sparse: bool) -> Result<SampleSet> {
    let design = if sparse { &cfg.sparse } else { &cfg.dense };
    let n = (design.fraction * reference.labeled_cells() as f64).round() as usize;
    let tag = if sparse { SPARSE_STREAM } else { DENSE_STREAM };
    for attempt in 0..MAX_ATTEMPTS {
        let mut s = random_sample(reference, n, stream(cfg.seed, tag, attempt))?;
        if sparse {
            s = s.limit_class(cfg.reduced_class, cfg.reduced_max_points);
        }
        if s.absent_classes().is_empty() {
            return Ok(s);
        }
    }
    Err(Error::Config(format!("no {} sample containing every class in {MAX_ATTEMPTS} attempts", design.name)))
}

/// Model sets and fits for one sample dataset.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    pub design: SampleDesign,
    pub samples: SampleSet,
    pub marginals: ProportionVector,
    pub experimental: ExperimentalTransiogramMatrix,
    pub fit: AutoFit,
    pub specs: EntrySpecs,
    pub mixed_rounds: usize,
    pub sets: Vec<(JointMethod, TransiogramModelSet, ValidationReport)>,
}

impl PreparedDesign {
    pub fn set(&self, method: JointMethod) -> &TransiogramModelSet {
        &self.sets.iter().find(|(m, _, _)| *m == method).expect("all methods prepared").1
    }
}

#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub config: CaseStudyConfig,
    pub reference: Raster,
    pub reference_attempt: usize,
    pub classes: ClassTable,
    pub dense: PreparedDesign,
    pub sparse: PreparedDesign,
}

impl PreparedCase {
    pub fn designs(&self) -> [&PreparedDesign; 2] {
        [&self.dense, &self.sparse]
    }
}

fn prepare_design(
    cfg: &CaseStudyConfig,
    design: &SampleDesign,
    samples: SampleSet,
    classes: &ClassTable,
    sills: &BTreeMap<ClassId, f64>,
    borrowed: &BTreeMap<(ClassId, ClassId), FittedEntry>,
) -> Result<PreparedDesign> {
    let n = cfg.n_classes();
    let marginals = class_proportions(&samples)?;
    let spec = LagBinSpec::new(design.bin_width, design.max_lag, 1.0)?;
    let experimental = estimate_experimental(&samples, &spec)?;
    let rest_heads = vec![cfg.rest_head(); n];
    let opts = AutoFitOptions {
        low_lag_cutoff: design.low_lag_cutoff,
        lag_max: cfg.validation_lag_max,
        ..AutoFitOptions::default()
    };
    let fit = fit_all(&experimental, &marginals, &rest_heads, sills, borrowed, &opts)?;
    let specs = fit.specs();
    let mut sets = Vec::new();
    let mut mixed_rounds = 0;
    for method in JointMethod::ALL {
        let mut set = match method {
            JointMethod::Mixed => {
                let (set, rounds) =
                    mixed_until_valid(&experimental, &specs, &marginals, &rest_heads, classes, cfg.validation_lag_max)?;
                mixed_rounds = rounds;
                set
            }
            m => build_model_set(&experimental, m, &specs, &marginals, &rest_heads, classes)?,
        };
        let report = validate_model_set(&mut set, cfg.validation_lag_max)?;
        if !report.valid {
            return Err(Error::Config(format!(
                "{} {} model set is invalid:\n{}",
                design.name,
                method.name(),
                report.summary()
            )));
        }
        sets.push((method, set, report));
    }
    Ok(PreparedDesign { design: design.clone(), samples, marginals, experimental, fit, specs, mixed_rounds, sets })
}

/// Reference, samples, experimental transiograms and validated model sets
/// for both designs. The sparse fit borrows the dense descriptors of every
/// entry touching the reduced class, with its dense proportion as sill.
pub fn prepare_case(cfg: &CaseStudyConfig) -> Result<PreparedCase> {
    let (reference, reference_attempt) = make_reference(cfg)?;
    let classes = cfg.classes()?;
    let dense_samples = make_samples(cfg, &reference, false)?;
    let sparse_samples = make_samples(cfg, &reference, true)?;
    let dense = prepare_design(cfg, &cfg.dense, dense_samples, &classes, &BTreeMap::new(), &BTreeMap::new())?;
    let rc = cfg.reduced_class;
    let borrowed: BTreeMap<_, _> =
        dense.fit.entries.iter().filter(|((i, j), _)| *i == rc || *j == rc).map(|(k, e)| (*k, e.clone())).collect();
    let sills = BTreeMap::from([(rc, dense.marginals.get(rc))]);
    let sparse = prepare_design(cfg, &cfg.sparse, sparse_samples, &classes, &sills, &borrowed)?;
    Ok(PreparedCase { config: cfg.clone(), reference, reference_attempt, classes, dense, sparse })
}

/// Ensemble summaries of one (design, method) pair.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub design: String,
    pub method: JointMethod,
    pub first_realization: Raster,
    pub cube: ProbabilityCube,
    pub optimal: Raster,
    pub realization_accuracy: AccuracyReport,
    pub realization_accuracy_all_cells: AccuracyReport,
    pub optimal_accuracy: AccuracyReport,
    pub optimal_accuracy_all_cells: AccuracyReport,
    pub realization_percentages: Vec<f64>,
    pub optimal_percentages: Vec<f64>,
    pub optimal_patches: usize,
    pub median_realization_patches: usize,
    pub logs: Vec<RealizationLog>,
    pub config_digest: String,
}

#[derive(Debug, Clone)]
pub struct CaseResults {
    pub prepared: PreparedCase,
    pub reference_percentages: Vec<f64>,
    pub methods: Vec<MethodResult>,
}

impl CaseResults {
    pub fn get(&self, design: &str, method: JointMethod) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.design == design && m.method == method)
    }
}

/// Base seed shared by all methods of a design, so methods differ only in
/// their model sets.
pub fn design_base_seed(cfg: &CaseStudyConfig, design_index: usize) -> u64 {
    stream(cfg.seed, SIMULATION_STREAM, design_index)
}

/// Simulates `n_real` realizations per design and method and summarizes them.
pub fn run_case(prepared: PreparedCase) -> Result<CaseResults> {
    let cfg = prepared.config.clone();
    let reference = &prepared.reference;
    let target = SimulationTarget::masked_by(reference);
    let mut methods = Vec::new();
    for (di, d) in prepared.designs().into_iter().enumerate() {
        let opts = EnsembleOptions {
            radius: d.design.radius,
            n_real: cfg.n_real,
            base_seed: design_base_seed(&cfg, di),
            threads: cfg.threads,
        };
        for (method, set, _) in &d.sets {
            log::info!("simulating {} realizations, {} samples, {} method", cfg.n_real, d.design.name, method.name());
            let ens = simulate_ensemble(&target, &d.samples, set, &opts)?;
            let cube = occurrence_probability(&ens)?;
            let optimal = optimal_map(&cube);
            let mut patches: Vec<usize> = ens.realizations.iter().map(patch_count).collect();
            patches.sort_unstable();
            methods.push(MethodResult {
                design: d.design.name.clone(),
                method: *method,
                first_realization: ens.realizations[0].clone(),
                realization_accuracy: mean_accuracy(&ens, reference, &d.samples, cfg.policy)?,
                realization_accuracy_all_cells: mean_accuracy(
                    &ens,
                    reference,
                    &d.samples,
                    DenominatorPolicy::AllCells,
                )?,
                optimal_accuracy: accuracy(&optimal, reference, &d.samples, cfg.policy)?,
                optimal_accuracy_all_cells: accuracy(&optimal, reference, &d.samples, DenominatorPolicy::AllCells)?,
                realization_percentages: mean_realization_percentages(&ens)?,
                optimal_percentages: raster_percentages(&optimal)?,
                optimal_patches: patch_count(&optimal),
                median_realization_patches: patches[patches.len() / 2],
                cube,
                optimal,
                logs: ens.logs,
                config_digest: ens.config_digest,
            });
        }
    }
    Ok(CaseResults { reference_percentages: raster_percentages(reference)?, prepared, methods })
}

/// Row fallbacks of the scripted fit, for reporting.
pub fn fallback_summary(fit: &AutoFit) -> Vec<(ClassId, RowFallback)> {
    fit.rows.iter().copied().enumerate().collect()
}
