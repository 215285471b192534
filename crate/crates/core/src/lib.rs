//! Markov chain random field (MCRF) simulation of categorical rasters.
//!
//! The pipeline runs from point samples to experimental transiograms, joint
//! transiogram model sets (linear interpolation, mathematical models or a
//! mix of both), random-path sequential simulation and ensemble summaries.

pub mod autofit;
pub mod casestudy;
pub mod error;
pub mod estimate;
pub mod gamma;
pub mod grid;
pub mod io;
pub mod mcrf;
pub mod model;
pub mod modelset;
pub mod postprocess;

pub use error::{Error, ErrorCategory, Result};
pub use estimate::{
    estimate_experimental, reversibility_residual, reversibility_residual_per_bin, ExperimentalPoint,
    ExperimentalTransiogramMatrix, LagBinSpec,
};
pub use gamma::{gamma, gamma_pdf, ln_gamma};
pub use grid::{
    class_proportions, generate_blob_reference, random_sample, ClassId, ClassInfo, ClassRole, ClassTable, GridGeometry,
    ProportionVector, Raster, SamplePoint, SampleSet,
};
pub use mcrf::{
    cpd_forms, draw_class, find_neighbors, local_cpd, realization_seed, simulate_ensemble, simulate_realization,
    ConditionalDistribution, Ensemble, EnsembleOptions, Neighbor, Neighborhood, RealizationLog, SimulationTarget,
};
pub use model::{
    eval_basic, eval_gamma_composite, fit_rmse, interpolate_empirical, BasicParams, FitScore, GammaParams,
    InterpolatedCurve, Knot, ModelDescriptor, ModelKind, ModelSpec,
};
pub use modelset::{
    build_model_set, check_model_set, default_rest_heads, eval_rest, validate_model_set, EntrySpecs, JointMethod,
    RowReport, TransiogramModelSet, ValidationReport,
};
pub use postprocess::{
    accuracy, mean_accuracy, occurrence_probability, optimal_map, patch_count, proportion_report, AccuracyReport,
    DenominatorPolicy, ProbabilityCube, ProportionRow,
};
