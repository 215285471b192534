//! End-to-end synthetic case study written as a deterministic output tree.

use std::fmt::Write as _;
use std::path::Path;

use mcrf_core::casestudy::{fallback_summary, prepare_case, run_case, CaseResults, CaseStudyConfig, MethodResult};
use mcrf_core::io::{
    write_ascii_grid, write_ascii_real_grid, write_file, write_modelset, write_samples_csv, write_toml,
};
use mcrf_core::postprocess::write_percent_table;
use mcrf_core::{AccuracyReport, RealizationLog, Result};
use serde::Serialize;

/// Headline numbers of one (design, method) run.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub design: String,
    pub method: String,
    pub realization_overall: f64,
    pub optimal_overall: f64,
    pub optimal_minus_realization: f64,
    pub realization_overall_all_cells: f64,
    pub optimal_overall_all_cells: f64,
    pub max_proportion_deviation: f64,
    pub optimal_patches: usize,
    pub median_realization_patches: usize,
    pub no_neighbor_cells: usize,
    pub zero_numerator_fallbacks: usize,
    pub config_digest: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub seed: u64,
    pub n_real: usize,
    pub reference_attempt: usize,
    pub reference_percent: Vec<f64>,
    pub methods: Vec<MethodSummary>,
}

fn sample_percent(results: &CaseResults, design: &str) -> Vec<f64> {
    let d = results.prepared.designs().into_iter().find(|d| d.design.name == design).expect("known design");
    d.marginals.as_slice().iter().map(|p| 100.0 * p).collect()
}

pub fn summarize(results: &CaseResults) -> DemoSummary {
    let cfg = &results.prepared.config;
    let methods = results
        .methods
        .iter()
        .map(|m| {
            let sp = sample_percent(results, &m.design);
            let dev = m.realization_percentages.iter().zip(&sp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            MethodSummary {
                design: m.design.clone(),
                method: m.method.name().into(),
                realization_overall: m.realization_accuracy.overall,
                optimal_overall: m.optimal_accuracy.overall,
                optimal_minus_realization: m.optimal_accuracy.overall - m.realization_accuracy.overall,
                realization_overall_all_cells: m.realization_accuracy_all_cells.overall,
                optimal_overall_all_cells: m.optimal_accuracy_all_cells.overall,
                max_proportion_deviation: dev,
                optimal_patches: m.optimal_patches,
                median_realization_patches: m.median_realization_patches,
                no_neighbor_cells: m.logs.iter().map(|l| l.no_neighbor_cells).sum(),
                zero_numerator_fallbacks: m.logs.iter().map(|l| l.zero_numerator_fallbacks).sum(),
                config_digest: m.config_digest.clone(),
            }
        })
        .collect();
    DemoSummary {
        seed: cfg.seed,
        n_real: cfg.n_real,
        reference_attempt: results.prepared.reference_attempt,
        reference_percent: results.reference_percentages.clone(),
        methods,
    }
}

/// Realization log line without timing, so files stay reproducible.
pub fn log_line(l: &RealizationLog) -> String {
    format!(
        "realization {} seed {} conditioning {} simulated {} no-neighbor {} zero-numerator {}",
        l.index, l.seed, l.conditioning_cells, l.simulated_cells, l.no_neighbor_cells, l.zero_numerator_fallbacks
    )
}

fn accuracy_row(label: String, a: &AccuracyReport) -> (String, Vec<Option<f64>>, Option<f64>) {
    (label, a.per_class.clone(), Some(a.overall))
}

fn write_method(dir: &Path, m: &MethodResult) -> Result<()> {
    write_ascii_grid(&dir.join("optimal.asc"), &m.optimal)?;
    write_ascii_grid(&dir.join("realization_000.asc"), &m.first_realization)?;
    let g = *m.cube.geometry();
    for k in 0..m.cube.n_classes() {
        write_ascii_real_grid(&dir.join(format!("probability_{k}.asc")), &g, &m.cube.class_grid(k))?;
    }
    write_ascii_real_grid(&dir.join("probability_max.asc"), &g, &m.cube.max_probability_grid())?;
    let mut log = format!("config digest {}\n", m.config_digest);
    for l in &m.logs {
        log.push_str(&log_line(l));
        log.push('\n');
    }
    write_file(&dir.join("realizations.log"), |b| {
        b.extend_from_slice(log.as_bytes());
        Ok(())
    })
}

/// Writes every artifact of a finished case study under `out`.
pub fn write_tree(out: &Path, results: &CaseResults) -> Result<DemoSummary> {
    let p = &results.prepared;
    let names: Vec<String> = p.classes.classes.iter().map(|c| c.name.clone()).collect();
    write_toml(&out.join("config.toml"), &p.config)?;
    write_ascii_grid(&out.join("reference.asc"), &p.reference)?;
    for d in p.designs() {
        let dir = out.join(&d.design.name);
        write_samples_csv(&dir.join("samples.csv"), &d.samples)?;
        write_file(&dir.join("experimental.csv"), |b| d.experimental.write_csv(b))?;
        let mut fit = String::new();
        for (row, fb) in fallback_summary(&d.fit) {
            let _ = writeln!(fit, "row {row} fallback {fb:?}");
        }
        let _ = writeln!(fit, "mixed stretching rounds {}", d.mixed_rounds);
        for (method, set, report) in &d.sets {
            write_modelset(&dir.join(format!("modelset_{}.toml", method.name())), set)?;
            let _ = write!(fit, "{} {}", method.name(), report.summary());
        }
        write_file(&dir.join("fit.log"), |b| {
            b.extend_from_slice(fit.as_bytes());
            Ok(())
        })?;
    }
    for m in &results.methods {
        write_method(&out.join(&m.design).join(m.method.name()), m)?;
    }

    let mut acc_rows = Vec::new();
    for m in &results.methods {
        let tag = format!("{}/{}", m.design, m.method.name());
        acc_rows.push(accuracy_row(format!("{tag}/realizations"), &m.realization_accuracy));
        acc_rows.push(accuracy_row(format!("{tag}/optimal"), &m.optimal_accuracy));
    }
    write_file(&out.join("tables/accuracy.csv"), |b| write_percent_table(b, &names, &acc_rows))?;
    let mut all_rows = Vec::new();
    for m in &results.methods {
        let tag = format!("{}/{}", m.design, m.method.name());
        all_rows.push(accuracy_row(format!("{tag}/realizations"), &m.realization_accuracy_all_cells));
        all_rows.push(accuracy_row(format!("{tag}/optimal"), &m.optimal_accuracy_all_cells));
    }
    write_file(&out.join("tables/accuracy_all_cells.csv"), |b| write_percent_table(b, &names, &all_rows))?;

    let some = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
    let mut prop_rows = vec![("reference".to_string(), some(&results.reference_percentages), None)];
    for d in p.designs() {
        prop_rows.push((format!("{}/samples", d.design.name), some(&sample_percent(results, &d.design.name)), None));
        for m in results.methods.iter().filter(|m| m.design == d.design.name) {
            let tag = format!("{}/{}", m.design, m.method.name());
            prop_rows.push((format!("{tag}/realizations"), some(&m.realization_percentages), None));
            prop_rows.push((format!("{tag}/optimal"), some(&m.optimal_percentages), None));
        }
    }
    write_file(&out.join("tables/proportions.csv"), |b| write_percent_table(b, &names, &prop_rows))?;

    let summary = summarize(results);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| mcrf_core::Error::Data(e.to_string()))?;
    write_file(&out.join("summary.json"), |b| {
        b.extend_from_slice(json.as_bytes());
        b.push(b'\n');
        Ok(())
    })?;
    Ok(summary)
}

/// Runs the case study and writes its tree. Timing goes to the log only.
pub fn run_demo(cfg: &CaseStudyConfig, out: &Path) -> Result<CaseResults> {
    let start = std::time::Instant::now();
    let prepared = prepare_case(cfg)?;
    log::info!("prepared case in {:.2}s", start.elapsed().as_secs_f64());
    let results = run_case(prepared)?;
    log::info!("simulated {} ensembles in {:.2}s", results.methods.len(), start.elapsed().as_secs_f64());
    write_tree(out, &results)?;
    log::info!("wrote {} in {:.2}s", out.display(), start.elapsed().as_secs_f64());
    Ok(results)
}
