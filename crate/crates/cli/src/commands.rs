//! Subcommands of the `mcrf` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mcrf_core::autofit::{fit_all, mixed_until_valid, AutoFitOptions};
use mcrf_core::casestudy::CaseStudyConfig;
use mcrf_core::io::{
    read_ascii_grid, read_modelset, read_samples_csv, write_ascii_grid, write_ascii_real_grid, write_file,
    write_modelset, write_samples_csv,
};
use mcrf_core::postprocess::write_percent_table;
use mcrf_core::{
    accuracy, build_model_set, class_proportions, default_rest_heads, estimate_experimental, fit_rmse, mean_accuracy,
    occurrence_probability, optimal_map, proportion_report, random_sample, reversibility_residual_per_bin,
    simulate_ensemble, validate_model_set, ClassId, ClassRole, ClassTable, DenominatorPolicy, Ensemble,
    EnsembleOptions, ErrorCategory, GridGeometry, JointMethod, LagBinSpec, Raster, SampleSet, SimulationTarget,
    TransiogramModelSet, ValidationReport,
};

use crate::demo::{log_line, run_demo};
use crate::service::{self, FitSession};

#[derive(Debug, Parser)]
#[command(name = "mcrf", version, about = "Markov chain random field simulation of categorical rasters")]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "MCRF_OUTPUT_DIR", default_value = "mcrf-out")]
    pub out_dir: PathBuf,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw random point samples from a reference raster.
    Sample(SampleArgs),
    /// Estimate experimental transiograms from samples.
    Estimate(EstimateArgs),
    /// Scripted model fit, or the interactive fit service with `--serve`.
    Fit(FitArgs),
    /// Build or validate transiogram model sets.
    #[command(subcommand)]
    Modelset(ModelsetCommand),
    /// Conditional MCRF simulation of an ensemble of realizations.
    Simulate(SimulateArgs),
    /// Occurrence probabilities and the optimal (maximum probability) map.
    Optimal(OptimalArgs),
    /// Accuracy of one map against a reference.
    Accuracy(AccuracyArgs),
    /// Accuracy and class proportion tables of an ensemble.
    Report(ReportArgs),
    /// Run the bundled synthetic case study end to end.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Number of points.
    #[arg(long, conflicts_with = "fraction", required_unless_present = "fraction")]
    pub n: Option<usize>,
    /// Share of labeled cells to sample.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BinArgs {
    /// Lag tolerance width in pixel lengths.
    #[arg(long)]
    pub bin_width: f64,
    #[arg(long)]
    pub max_lag: f64,
    /// Ground units per pixel edge.
    #[arg(long, default_value_t = 1.0)]
    pub cell_size: f64,
}

impl BinArgs {
    fn spec(&self) -> mcrf_core::Result<LagBinSpec> {
        LagBinSpec::new(self.bin_width, self.max_lag, self.cell_size)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub bins: BinArgs,
    #[arg(long)]
    pub n_classes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitOptionsArgs {
    /// Low-lag window that drives model choice.
    #[arg(long, default_value_t = 15.0)]
    pub low_lag_cutoff: f64,
    /// Lag up to which rows are validated.
    #[arg(long, default_value_t = 100.0)]
    pub lag_max: f64,
    /// Minor classes (fitted with models in the mixed method); default: proportion below 5%.
    #[arg(long, value_delimiter = ',')]
    pub minor: Option<Vec<ClassId>>,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Start the local fit service instead of writing a fit report.
    #[arg(long)]
    pub serve: bool,
    /// Serve the bundled synthetic dense dataset.
    #[arg(long, requires = "serve")]
    pub demo: bool,
    #[arg(long, default_value = "127.0.0.1:8737")]
    pub addr: SocketAddr,
    /// Where saved model sets go (default: <out-dir>/modelset.toml).
    #[arg(long)]
    pub persist: Option<PathBuf>,
    #[arg(long, required_unless_present = "demo")]
    pub samples: Option<PathBuf>,
    /// Reference raster: grid geometry and preview accuracy.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Any raster giving the grid geometry when no reference is known.
    #[arg(long, conflicts_with = "reference")]
    pub geometry: Option<PathBuf>,
    /// Initial draft set (default: scripted mixed fit).
    #[arg(long)]
    pub modelset: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 60.0)]
    pub max_lag: f64,
    #[arg(long, default_value_t = 30.0)]
    pub radius: f64,
    #[command(flatten)]
    pub fit: FitOptionsArgs,
    /// Seed of the demo dataset.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum ModelsetCommand {
    /// Fit and assemble a joint model set from samples.
    Build(BuildArgs),
    /// Check nonnegativity and row closure of a model set document.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub bins: BinArgs,
    #[arg(long, default_value = "mixed")]
    pub method: JointMethod,
    #[command(flatten)]
    pub fit: FitOptionsArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub modelset: PathBuf,
    /// Validation lag (default: the document's, else 100).
    #[arg(long)]
    pub lag_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub modelset: PathBuf,
    /// Reference or mask raster; its labeled cells are simulated.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub radius: f64,
    #[arg(long = "n-real", default_value_t = 100)]
    pub n_real: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    /// Directory of realization grids (default: <out-dir>/realizations).
    #[arg(long)]
    pub realizations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Conditioning samples, left out under `exclude_samples`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value = "exclude_samples")]
    pub policy: DenominatorPolicy,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub realizations: Option<PathBuf>,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value = "exclude_samples")]
    pub policy: DenominatorPolicy,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "n-real", default_value_t = 100)]
    pub n_real: usize,
    /// Side of the square synthetic grid.
    #[arg(long, default_value_t = 150)]
    pub size: usize,
}

/// A model set that failed validation; exits with the model error code.
#[derive(Debug)]
pub struct InvalidModelSet(pub String);

impl std::fmt::Display for InvalidModelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "model set is invalid\n{}", self.0)
    }
}

impl std::error::Error for InvalidModelSet {}

pub fn exit_code_of(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Argument => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Parse => 4,
        ErrorCategory::Model => 5,
        ErrorCategory::Io => 6,
    }
}

/// Process exit code for a failed run.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<mcrf_core::Error>() {
            return exit_code_of(err.category());
        }
        if cause.downcast_ref::<InvalidModelSet>().is_some() {
            return exit_code_of(ErrorCategory::Model);
        }
    }
    1
}

/// Plain-text run log written next to the outputs; no timings.
struct RunLog {
    path: PathBuf,
    text: String,
}

impl RunLog {
    fn new(out: &Path, name: &str) -> Self {
        Self { path: out.join(format!("{name}.log")), text: String::new() }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn finish(self) -> anyhow::Result<()> {
        write_text(&self.path, &self.text)
    }
}

fn write_text(path: &Path, s: &str) -> anyhow::Result<()> {
    write_file(path, |b| {
        b.extend_from_slice(s.as_bytes());
        Ok(())
    })?;
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let out = cli.out_dir.clone();
    match cli.command {
        Command::Sample(a) => sample(&out, a),
        Command::Estimate(a) => estimate(&out, a),
        Command::Fit(a) => fit(&out, a),
        Command::Modelset(ModelsetCommand::Build(a)) => build(&out, a),
        Command::Modelset(ModelsetCommand::Validate(a)) => validate(&out, a),
        Command::Simulate(a) => simulate(&out, cli.threads, a),
        Command::Optimal(a) => optimal(&out, a),
        Command::Accuracy(a) => accuracy_cmd(&out, a),
        Command::Report(a) => report(&out, a),
        Command::Demo(a) => demo(&out, cli.threads, a),
    }
}

fn sample(out: &Path, a: SampleArgs) -> anyhow::Result<()> {
    let reference = read_ascii_grid(&a.reference, None)?;
    let n = match (a.n, a.fraction) {
        (Some(n), _) => n,
        (None, Some(f)) if f > 0.0 && f <= 1.0 => (f * reference.labeled_cells() as f64).round() as usize,
        (None, f) => bail!(mcrf_core::Error::Argument(format!("fraction must lie in (0, 1], got {f:?}"))),
    };
    let s = random_sample(&reference, n, a.seed)?;
    write_samples_csv(&out.join("samples.csv"), &s)?;
    let mut log = RunLog::new(out, "sample");
    log.line(format!("reference {}", a.reference.display()));
    log.line(format!("seed {} points {} of {} labeled cells", a.seed, s.len(), reference.labeled_cells()));
    log.line(format!("class counts {:?}", s.class_counts()));
    log.finish()?;
    println!("{}", out.join("samples.csv").display());
    Ok(())
}

fn estimate(out: &Path, a: EstimateArgs) -> anyhow::Result<()> {
    let samples = read_samples_csv(&a.samples, a.n_classes)?;
    let m = estimate_experimental(&samples, &a.bins.spec()?)?;
    let path = out.join("experimental.csv");
    write_file(&path, |b| m.write_csv(b))?;
    let mut log = RunLog::new(out, "estimate");
    log.line(format!("samples {} points {}", a.samples.display(), samples.len()));
    log.line(format!("bins {} width {} max lag {}", m.n_bins(), a.bins.bin_width, a.bins.max_lag));
    log.line(format!("reversibility residual {:.3e}", reversibility_residual_per_bin(&m)));
    log.finish()?;
    println!("{}", path.display());
    Ok(())
}

fn class_table(samples: &SampleSet, opts: &FitOptionsArgs) -> anyhow::Result<ClassTable> {
    let marg = class_proportions(samples)?;
    let mut table = ClassTable::suggested(&marg);
    if let Some(minor) = &opts.minor {
        for c in &mut table.classes {
            c.role = if minor.contains(&c.id) { ClassRole::Minor } else { ClassRole::Major };
        }
    }
    if let Some(names) = &opts.names {
        if names.len() != table.len() {
            bail!(mcrf_core::Error::Argument(format!("{} names for {} classes", names.len(), table.len())));
        }
        for (c, n) in table.classes.iter_mut().zip(names) {
            c.name = n.clone();
        }
    }
    Ok(table)
}

/// Scripted fit and joint model set for one method, validated to `lag_max`.
pub fn build_set(
    samples: &SampleSet,
    spec: &LagBinSpec,
    method: JointMethod,
    opts: &FitOptionsArgs,
) -> anyhow::Result<(TransiogramModelSet, ValidationReport)> {
    let exp = estimate_experimental(samples, spec)?;
    let marg = class_proportions(samples)?;
    let heads = default_rest_heads(&marg);
    let classes = class_table(samples, opts)?;
    let fit_opts =
        AutoFitOptions { low_lag_cutoff: opts.low_lag_cutoff, lag_max: opts.lag_max, ..AutoFitOptions::default() };
    let fit = fit_all(&exp, &marg, &heads, &BTreeMap::new(), &BTreeMap::new(), &fit_opts)?;
    let mut set = match method {
        JointMethod::Mixed => mixed_until_valid(&exp, &fit.specs(), &marg, &heads, &classes, opts.lag_max)?.0,
        m => build_model_set(&exp, m, &fit.specs(), &marg, &heads, &classes)?,
    };
    let report = validate_model_set(&mut set, opts.lag_max)?;
    Ok((set, report))
}

fn fit(out: &Path, a: FitArgs) -> anyhow::Result<()> {
    if a.serve {
        let persist = a.persist.clone().unwrap_or_else(|| out.join("modelset.toml"));
        let session = if a.demo {
            FitSession::demo(&CaseStudyConfig { seed: a.seed, ..CaseStudyConfig::default() }, Some(persist))?
        } else {
            session_from_files(&a, persist)?
        };
        let rt = tokio::runtime::Runtime::new()?;
        return rt.block_on(service::serve(a.addr, service::shared(Some(session))));
    }
    let samples_path = a.samples.as_ref().context("--samples is required")?;
    let samples = read_samples_csv(samples_path, None)?;
    let spec = LagBinSpec::new(a.bin_width, a.max_lag, 1.0)?;
    let exp = estimate_experimental(&samples, &spec)?;
    let marg = class_proportions(&samples)?;
    let heads = default_rest_heads(&marg);
    let fit_opts =
        AutoFitOptions { low_lag_cutoff: a.fit.low_lag_cutoff, lag_max: a.fit.lag_max, ..AutoFitOptions::default() };
    let fit = fit_all(&exp, &marg, &heads, &BTreeMap::new(), &BTreeMap::new(), &fit_opts)?;
    let mut csv = String::from("tail,head,kind,sill,range,alpha,theta,weight,rmse_all,rmse_low\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for ((i, j), spec) in fit.specs() {
        let descr = spec.resolve(None)?;
        let knots = exp.knots(i, j);
        let score = (!knots.is_empty()).then(|| fit_rmse(&descr, &knots, a.fit.low_lag_cutoff)).transpose()?;
        let _ = writeln!(
            csv,
            "{i},{j},{},{},{},{},{},{},{},{}",
            spec.kind,
            opt(spec.sill),
            opt(spec.range),
            opt(spec.alpha),
            opt(spec.theta),
            opt(spec.weight),
            opt(score.map(|s| s.rmse_all)),
            opt(score.and_then(|s| s.rmse_low))
        );
    }
    let path = out.join("fit.csv");
    write_text(&path, &csv)?;
    let mut log = RunLog::new(out, "fit");
    for (row, fb) in fit.rows.iter().enumerate() {
        log.line(format!("row {row} fallback {fb:?}"));
    }
    log.finish()?;
    println!("{}", path.display());
    Ok(())
}

fn session_from_files(a: &FitArgs, persist: PathBuf) -> anyhow::Result<FitSession> {
    let samples_path = a.samples.as_ref().context("--samples is required without --demo")?;
    let (geometry, reference) = match (&a.reference, &a.geometry) {
        (Some(r), _) => {
            let r = read_ascii_grid(r, None)?;
            (*r.geometry(), Some(r))
        }
        (None, Some(g)) => (*read_ascii_grid(g, None)?.geometry(), None),
        (None, None) => bail!(mcrf_core::Error::Argument("--reference or --geometry is required".into())),
    };
    let samples = read_samples_csv(samples_path, reference.as_ref().map(|r| r.n_classes()))?;
    let spec = LagBinSpec::new(a.bin_width, a.max_lag, geometry.cell_size)?;
    let lag_max = a.fit.lag_max.max(2.0 * a.radius);
    let draft = match &a.modelset {
        Some(p) => read_modelset(p, lag_max)?.0,
        None => {
            let opts = FitOptionsArgs { lag_max, ..a.fit.clone() };
            build_set(&samples, &spec, JointMethod::Mixed, &opts)?.0
        }
    };
    Ok(FitSession::new(
        samples_path.display().to_string(),
        samples,
        spec,
        draft,
        a.radius,
        a.fit.low_lag_cutoff,
        geometry,
        reference,
        Some(persist),
    )?)
}

fn build(out: &Path, a: BuildArgs) -> anyhow::Result<()> {
    let samples = read_samples_csv(&a.samples, None)?;
    let (set, report) = build_set(&samples, &a.bins.spec()?, a.method, &a.fit)?;
    let mut log = RunLog::new(out, "modelset-build");
    log.line(format!("samples {} method {}", a.samples.display(), a.method.name()));
    log.line(report.summary());
    log.finish()?;
    if !report.valid {
        return Err(InvalidModelSet(report.summary()).into());
    }
    let path = out.join(format!("modelset_{}.toml", a.method.name()));
    write_modelset(&path, &set)?;
    println!("{}", path.display());
    Ok(())
}

fn validate(out: &Path, a: ValidateArgs) -> anyhow::Result<()> {
    let src = std::fs::read_to_string(&a.modelset).with_context(|| a.modelset.display().to_string())?;
    let (mut set, mut report) = mcrf_core::io::parse_modelset(&src, Some(&a.modelset), a.lag_max.unwrap_or(100.0))?;
    if let Some(l) = a.lag_max {
        report = validate_model_set(&mut set, l)?;
    }
    let json = serde_json::to_string_pretty(&report)?;
    write_text(&out.join("validation.json"), &(json + "\n"))?;
    print!("{}", report.summary());
    if !report.valid {
        return Err(InvalidModelSet(report.summary()).into());
    }
    Ok(())
}

fn simulate(out: &Path, threads: Option<usize>, a: SimulateArgs) -> anyhow::Result<()> {
    let lag = 2.0 * a.radius;
    let (set, report) = read_modelset(&a.modelset, lag)?;
    if !report.valid {
        return Err(InvalidModelSet(report.summary()).into());
    }
    let mut set = set;
    if set.validated_lag_max().is_some_and(|l| l < lag) {
        let r = validate_model_set(&mut set, lag)?;
        if !r.valid {
            return Err(InvalidModelSet(r.summary()).into());
        }
    }
    let samples = read_samples_csv(&a.samples, Some(set.n_classes()))?;
    let grid = read_ascii_grid(&a.grid, Some(set.n_classes()))?;
    let target = SimulationTarget::masked_by(&grid);
    let opts = EnsembleOptions { radius: a.radius, n_real: a.n_real, base_seed: a.seed, threads };
    let start = std::time::Instant::now();
    let ens = simulate_ensemble(&target, &samples, &set, &opts)?;
    log::info!("simulated {} realizations in {:.2}s", a.n_real, start.elapsed().as_secs_f64());
    let dir = out.join("realizations");
    let width = digits(a.n_real);
    for (i, r) in ens.realizations.iter().enumerate() {
        write_ascii_grid(&dir.join(format!("realization_{i:0width$}.asc")), r)?;
    }
    let mut log = RunLog::new(out, "simulate");
    log.line(format!("config digest {}", ens.config_digest));
    log.line(format!("radius {} realizations {} base seed {}", a.radius, a.n_real, a.seed));
    for l in &ens.logs {
        log.line(log_line(l));
    }
    log.finish()?;
    println!("{}", dir.display());
    Ok(())
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len().max(3)
}

fn read_ensemble(dir: &Path) -> anyhow::Result<Ensemble> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "asc"))
        .collect();
    paths.sort();
    let mut rasters: Vec<Raster> = paths.iter().map(|p| read_ascii_grid(p, None)).collect::<mcrf_core::Result<_>>()?;
    let n = rasters.iter().map(|r| r.n_classes()).max().unwrap_or(0);
    for r in &mut rasters {
        if r.n_classes() < n {
            let labels: Vec<_> = r.labels().collect();
            *r = Raster::from_labels(*r.geometry(), n, &labels)?;
        }
    }
    Ok(Ensemble::from_realizations(rasters)?)
}

fn optimal(out: &Path, a: OptimalArgs) -> anyhow::Result<()> {
    let dir = a.realizations.unwrap_or_else(|| out.join("realizations"));
    let ens = read_ensemble(&dir)?;
    let cube = occurrence_probability(&ens)?;
    let g: GridGeometry = *cube.geometry();
    for k in 0..cube.n_classes() {
        write_ascii_real_grid(&out.join(format!("probability_{k}.asc")), &g, &cube.class_grid(k))?;
    }
    let map = optimal_map(&cube);
    write_ascii_grid(&out.join("optimal.asc"), &map)?;
    let mut log = RunLog::new(out, "optimal");
    log.line(format!("realizations {} from {}", ens.n_real(), dir.display()));
    log.finish()?;
    println!("{}", out.join("optimal.asc").display());
    Ok(())
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("class {k}")).collect()
}

fn empty_samples(n: usize) -> SampleSet {
    SampleSet::new(Vec::new(), n).expect("empty sample set")
}

fn accuracy_cmd(out: &Path, a: AccuracyArgs) -> anyhow::Result<()> {
    let reference = read_ascii_grid(&a.reference, None)?;
    let n = reference.n_classes();
    let map = read_ascii_grid(&a.map, Some(n))?;
    let map = Raster::from_labels(*map.geometry(), n, &map.labels().collect::<Vec<_>>())?;
    let samples = match &a.samples {
        Some(p) => read_samples_csv(p, Some(n))?,
        None => empty_samples(n),
    };
    let rep = accuracy(&map, &reference, &samples, a.policy)?;
    write_file(&out.join("accuracy.csv"), |b| {
        write_percent_table(b, &class_names(n), &[("map".into(), rep.per_class.clone(), Some(rep.overall))])
    })?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(())
}

fn report(out: &Path, a: ReportArgs) -> anyhow::Result<()> {
    let reference = read_ascii_grid(&a.reference, None)?;
    let n = reference.n_classes();
    let samples = read_samples_csv(&a.samples, Some(n))?;
    let dir = a.realizations.unwrap_or_else(|| out.join("realizations"));
    let ens = read_ensemble(&dir)?;
    let reals: Vec<Raster> = ens
        .realizations
        .iter()
        .map(|r| Raster::from_labels(*r.geometry(), n, &r.labels().collect::<Vec<_>>()))
        .collect::<mcrf_core::Result<_>>()?;
    let ens = Ensemble::from_realizations(reals)?;
    let cube = occurrence_probability(&ens)?;
    let opt = optimal_map(&cube);
    let mean = mean_accuracy(&ens, &reference, &samples, a.policy)?;
    let best = accuracy(&opt, &reference, &samples, a.policy)?;
    let names = class_names(n);
    write_file(&out.join("tables/accuracy.csv"), |b| {
        write_percent_table(
            b,
            &names,
            &[
                ("realizations".into(), mean.per_class.clone(), Some(mean.overall)),
                ("optimal".into(), best.per_class.clone(), Some(best.overall)),
            ],
        )
    })?;
    let rows = proportion_report(&[("realizations", &ens)], Some(&reference), &samples)?;
    let rows: Vec<_> = rows.into_iter().map(|r| (r.label, r.percent.into_iter().map(Some).collect(), None)).collect();
    write_file(&out.join("tables/proportions.csv"), |b| write_percent_table(b, &names, &rows))?;
    let mut log = RunLog::new(out, "report");
    log.line(format!("realizations {} policy {}", ens.n_real(), a.policy.name()));
    log.line(format!("mean realization accuracy {:.2}", mean.overall));
    log.line(format!("optimal map accuracy {:.2}", best.overall));
    log.finish()?;
    println!("{}", out.join("tables").display());
    Ok(())
}

fn demo(out: &Path, threads: Option<usize>, a: DemoArgs) -> anyhow::Result<()> {
    let base = CaseStudyConfig::default();
    let cfg = CaseStudyConfig {
        seed: a.seed,
        n_real: a.n_real,
        nrows: a.size,
        ncols: a.size,
        blob_seeds: (base.blob_seeds * a.size * a.size / (base.nrows * base.ncols)).max(base.class_weights.len()),
        threads,
        ..base
    };
    let start = std::time::Instant::now();
    let results = run_demo(&cfg, out)?;
    eprintln!("demo finished in {:.2}s", start.elapsed().as_secs_f64());
    for m in crate::demo::summarize(&results).methods {
        println!(
            "{:6} {:5} realizations {:6.2}% optimal {:6.2}% patches {} vs median {}",
            m.design,
            m.method,
            m.realization_overall,
            m.optimal_overall,
            m.optimal_patches,
            m.median_realization_patches
        );
    }
    Ok(())
}
