//! Random-path sequential simulation and realization ensembles.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{ClassId, GridGeometry, Raster, SampleSet, NODATA};
use crate::mcrf::cpd::{class_for_uniform, local_cpd_into, TransitionSource};
use crate::mcrf::neighborhood::{find_neighbors, radius_d2, KnownGrid, Neighbor};
use crate::modelset::TransiogramModelSet;

/// Row probabilities of a model set tabulated at every integer squared cell
/// distance up to the search radius. Grid lags are always `sqrt(d2)`, so the
/// lookup is exact.
#[derive(Debug, Clone)]
pub struct TransitionTable<'a> {
    set: &'a TransiogramModelSet,
    n: usize,
    max_d2: u64,
    values: Vec<f64>,
}

impl<'a> TransitionTable<'a> {
    pub fn new(set: &'a TransiogramModelSet, radius: f64) -> Self {
        let n = set.n_classes();
        let max_d2 = radius_d2(radius);
        let mut values = vec![0.0; (max_d2 as usize + 1) * n * n];
        for d2 in 0..=max_d2 as usize {
            let h = (d2 as f64).sqrt();
            for tail in 0..n {
                let at = (d2 * n + tail) * n;
                set.row_probabilities(tail, h, &mut values[at..at + n]);
            }
        }
        Self { set, n, max_d2, values }
    }
}

impl TransitionSource for TransitionTable<'_> {
    fn n_classes(&self) -> usize {
        self.n
    }

    fn marginal(&self, class: ClassId) -> f64 {
        self.set.marginals().get(class)
    }

    #[inline]
    fn transition(&self, tail: ClassId, head: ClassId, at: &Neighbor) -> f64 {
        match at.d2 {
            Some(d2) if d2 <= self.max_d2 => self.values[(d2 as usize * self.n + tail) * self.n + head],
            _ => self.set.probability(tail, head, at.lag),
        }
    }
}

/// Cells to simulate: the whole grid, or the labeled cells of a mask raster.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTarget {
    geometry: GridGeometry,
    active: Option<Vec<bool>>,
}

impl SimulationTarget {
    pub fn full(geometry: GridGeometry) -> Self {
        Self { geometry, active: None }
    }

    /// Simulates exactly the cells that carry a label in `mask`.
    pub fn masked_by(mask: &Raster) -> Self {
        Self { geometry: *mask.geometry(), active: Some(mask.labels().map(|l| l.is_some()).collect()) }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    fn is_active(&self, index: usize) -> bool {
        self.active.as_ref().is_none_or(|a| a[index])
    }
}

/// Per-realization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationLog {
    pub index: usize,
    pub seed: u64,
    /// Conditioning cells written before the path starts.
    pub conditioning_cells: usize,
    pub simulated_cells: usize,
    /// Cells with no datum inside the radius, drawn from the marginals.
    pub no_neighbor_cells: usize,
    /// Cells whose CPD numerators all vanished, drawn from the marginals.
    pub zero_numerator_fallbacks: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RealizationLog {
    pub fn line(&self) -> String {
        format!(
            "realization {} seed {} conditioning {} simulated {} no-neighbor {} zero-numerator {} wall {:.3}s",
            self.index,
            self.seed,
            self.conditioning_cells,
            self.simulated_cells,
            self.no_neighbor_cells,
            self.zero_numerator_fallbacks,
            self.wall_time.as_secs_f64()
        )
    }
}

/// Writes sample classes into their cells. Returns labels and the number of
/// distinct conditioning cells.
pub fn conditioning_labels(
    geometry: &GridGeometry,
    n_classes: usize,
    samples: &SampleSet,
) -> Result<(Vec<u16>, usize)> {
    if samples.n_classes() != n_classes {
        return Err(Error::Data(format!("samples have {} classes, model set has {n_classes}", samples.n_classes())));
    }
    let mut labels = vec![NODATA; geometry.n_cells()];
    let mut cells = 0;
    for p in samples.points() {
        let (row, col) = geometry
            .cell_of(p.x, p.y)
            .ok_or_else(|| Error::Data(format!("sample at ({}, {}) lies outside the grid", p.x, p.y)))?;
        let i = geometry.index(row, col);
        match labels[i] {
            NODATA => {
                labels[i] = p.class as u16;
                cells += 1;
            }
            l if l as usize == p.class => {}
            l => {
                return Err(Error::Data(format!(
                    "samples of classes {l} and {} collide in cell ({row}, {col})",
                    p.class
                )))
            }
        }
    }
    Ok((labels, cells))
}

/// One MCRF realization. Samples are written first, the remaining target
/// cells are visited along a seeded uniform random permutation, and each
/// simulated cell joins the conditioning data.
///
/// The model set must be validated to at least twice the search radius.
pub fn simulate_realization(
    target: &SimulationTarget,
    samples: &SampleSet,
    models: &TransiogramModelSet,
    radius: f64,
    seed: u64,
) -> Result<(Raster, RealizationLog)> {
    check_inputs(models, radius)?;
    let table = TransitionTable::new(models, radius);
    run(target, samples, &table, models.n_classes(), radius, seed, 0)
}

fn check_inputs(models: &TransiogramModelSet, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Argument(format!("search radius must be positive, got {radius}")));
    }
    crate::mcrf::cpd::check_validated(models, 2.0 * radius)
}

fn run(
    target: &SimulationTarget,
    samples: &SampleSet,
    table: &TransitionTable<'_>,
    n_classes: usize,
    radius: f64,
    seed: u64,
    index: usize,
) -> Result<(Raster, RealizationLog)> {
    let start = Instant::now();
    let geom = target.geometry;
    let (mut labels, conditioning_cells) = conditioning_labels(&geom, n_classes, samples)?;
    let mut path: Vec<usize> = (0..geom.n_cells()).filter(|&i| labels[i] == NODATA && target.is_active(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    path.shuffle(&mut rng);
    let mut probs = vec![0.0; n_classes];
    let mut log = RealizationLog {
        index,
        seed,
        conditioning_cells,
        simulated_cells: path.len(),
        no_neighbor_cells: 0,
        zero_numerator_fallbacks: 0,
        wall_time: Duration::ZERO,
    };
    for &cell in &path {
        let (row, col) = geom.row_col(cell);
        let neigh = find_neighbors(&KnownGrid::new(&labels, geom.nrows, geom.ncols), row, col, radius);
        if neigh.is_empty() {
            log.no_neighbor_cells += 1;
        }
        if !local_cpd_into(&neigh, table, &mut probs) {
            log.zero_numerator_fallbacks += 1;
        }
        let u: f64 = rng.random();
        labels[cell] = class_for_uniform(&probs, u) as u16;
    }
    log.wall_time = start.elapsed();
    Ok((Raster::from_raw(geom, n_classes, labels), log))
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `r`: `splitmix64(base_seed + (r + 1) · 0x9E3779B97F4A7C15)`
/// with wrapping arithmetic.
pub fn realization_seed(base_seed: u64, r: usize) -> u64 {
    splitmix64(base_seed.wrapping_add((r as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Realizations in index order, plus their logs and a digest of the run configuration.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub realizations: Vec<Raster>,
    pub logs: Vec<RealizationLog>,
    pub base_seed: u64,
    pub config_digest: String,
}

impl Ensemble {
    /// Wraps existing realizations; they must share geometry and class count.
    pub fn from_realizations(realizations: Vec<Raster>) -> Result<Self> {
        let first = realizations.first().ok_or_else(|| Error::EmptyInput("ensemble has no realizations".into()))?;
        if let Some(r) = realizations.iter().position(|r| !r.same_geometry(first) || r.n_classes() != first.n_classes())
        {
            return Err(Error::Data(format!("realization {r} differs in geometry or class count")));
        }
        Ok(Self { realizations, logs: Vec::new(), base_seed: 0, config_digest: String::new() })
    }

    pub fn n_real(&self) -> usize {
        self.realizations.len()
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.realizations[0].geometry()
    }

    pub fn n_classes(&self) -> usize {
        self.realizations[0].n_classes()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.logs.iter().map(|l| l.seed).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub radius: f64,
    pub n_real: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs serially.
    pub threads: Option<usize>,
}

/// Independent realizations seeded by [`realization_seed`]. Results do not
/// depend on the number of threads.
pub fn simulate_ensemble(
    target: &SimulationTarget,
    samples: &SampleSet,
    models: &TransiogramModelSet,
    opts: &EnsembleOptions,
) -> Result<Ensemble> {
    if opts.n_real == 0 {
        return Err(Error::Argument("n_real must be at least 1".into()));
    }
    check_inputs(models, opts.radius)?;
    // surface sample problems once instead of per realization
    conditioning_labels(&target.geometry, models.n_classes(), samples)?;
    let table = TransitionTable::new(models, opts.radius);
    let one = |r: usize| {
        run(target, samples, &table, models.n_classes(), opts.radius, realization_seed(opts.base_seed, r), r)
    };
    let results: Vec<Result<(Raster, RealizationLog)>> = match opts.threads {
        Some(1) => (0..opts.n_real).map(one).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Argument(format!("cannot build thread pool: {e}")))?
            .install(|| (0..opts.n_real).into_par_iter().map(one).collect()),
        None => (0..opts.n_real).into_par_iter().map(one).collect(),
    };
    let mut realizations = Vec::with_capacity(opts.n_real);
    let mut logs = Vec::with_capacity(opts.n_real);
    for (r, res) in results.into_iter().enumerate() {
        let (raster, log) = res.map_err(|e| Error::Realization { index: r, source: Box::new(e) })?;
        realizations.push(raster);
        logs.push(log);
    }
    Ok(Ensemble {
        realizations,
        logs,
        base_seed: opts.base_seed,
        config_digest: config_digest(target, samples, models, opts),
    })
}

/// SHA-256 over the inputs that determine an ensemble.
pub fn config_digest(
    target: &SimulationTarget,
    samples: &SampleSet,
    models: &TransiogramModelSet,
    opts: &EnsembleOptions,
) -> String {
    let mut h = Sha256::new();
    h.update(format!("{:?}", target).as_bytes());
    h.update(format!("{:?}", samples).as_bytes());
    h.update(format!("{:?}", models).as_bytes());
    h.update(format!("{} {} {}", opts.radius, opts.n_real, opts.base_seed).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
