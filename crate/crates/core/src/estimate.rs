//! Omnidirectional experimental transiograms from point samples.
//!
//! Every ordered pair of distinct points `(a, b)` whose separation falls in a
//! lag bin adds one transition `class(a) -> class(b)` to that bin, so the count
//! matrix of each bin is symmetric. Probabilities are the counts normalized
//! per tail class and bin.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassId, ProportionVector, SampleSet};

/// Lag bins `[k·w − w/2, k·w + w/2)` centered on `k·w` for `k = 1..=floor(max_lag / w)`.
/// All lags are in pixel lengths; `cell_size` converts ground distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBinSpec {
    pub bin_width: f64,
    pub max_lag: f64,
    pub cell_size: f64,
}

impl LagBinSpec {
    pub fn new(bin_width: f64, max_lag: f64, cell_size: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
        }
        if !(max_lag >= bin_width && max_lag.is_finite()) {
            return Err(Error::Argument(format!("max lag ({max_lag}) must be at least the bin width ({bin_width})")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Argument(format!("cell size must be positive, got {cell_size}")));
        }
        Ok(Self { bin_width, max_lag, cell_size })
    }

    pub fn n_bins(&self) -> usize {
        (self.max_lag / self.bin_width + 1e-9).floor() as usize
    }

    pub fn center(&self, bin: usize) -> f64 {
        (bin + 1) as f64 * self.bin_width
    }

    pub fn lower_edge(&self, bin: usize) -> f64 {
        ((bin + 1) as f64 - 0.5) * self.bin_width
    }

    pub fn upper_edge(&self, bin: usize) -> f64 {
        ((bin + 1) as f64 + 0.5) * self.bin_width
    }

    /// Bin holding lag `d` (pixel lengths), if any.
    #[inline]
    pub fn bin_of(&self, d: f64) -> Option<usize> {
        let mut k = (d / self.bin_width + 0.5).floor();
        if !(k >= 1.0) {
            k = 1.0;
        }
        let mut bin = k as usize - 1;
        // snap onto the exact half-open edges
        if d < self.lower_edge(bin) {
            if bin == 0 {
                return None;
            }
            bin -= 1;
        } else if d >= self.upper_edge(bin) {
            bin += 1;
        }
        (bin < self.n_bins() && d >= self.lower_edge(bin)).then_some(bin)
    }

    /// Separation of two ground points in pixel lengths.
    #[inline]
    pub fn lag(&self, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        let dx = bx - ax;
        let dy = by - ay;
        (dx * dx + dy * dy).sqrt() / self.cell_size
    }
}

/// Binned transition counts and probabilities for all class pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalTransiogramMatrix {
    n_classes: usize,
    spec: LagBinSpec,
    lags: Vec<f64>,
    /// `[(tail * n + head) * n_bins + bin]`
    counts: Vec<u64>,
    /// `[tail * n_bins + bin]`
    tail_totals: Vec<u64>,
}

/// One bin of an experimental transiogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalPoint {
    pub lag: f64,
    pub count: u64,
    /// `None` where the tail class has no transitions in this bin.
    pub probability: Option<f64>,
}

impl ExperimentalTransiogramMatrix {
    /// Builds the matrix from raw counts laid out as `[(tail * n + head) * n_bins + bin]`.
    pub fn from_counts(n_classes: usize, spec: LagBinSpec, counts: Vec<u64>) -> Result<Self> {
        let n_bins = spec.n_bins();
        if counts.len() != n_classes * n_classes * n_bins {
            return Err(Error::Argument(format!(
                "count array has {} entries, expected {}",
                counts.len(),
                n_classes * n_classes * n_bins
            )));
        }
        let mut tail_totals = vec![0u64; n_classes * n_bins];
        for i in 0..n_classes {
            for j in 0..n_classes {
                for b in 0..n_bins {
                    tail_totals[i * n_bins + b] += counts[(i * n_classes + j) * n_bins + b];
                }
            }
        }
        Ok(Self { n_classes, lags: (0..n_bins).map(|b| spec.center(b)).collect(), spec, counts, tail_totals })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn spec(&self) -> &LagBinSpec {
        &self.spec
    }

    pub fn n_bins(&self) -> usize {
        self.lags.len()
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    #[inline]
    pub fn count(&self, tail: ClassId, head: ClassId, bin: usize) -> u64 {
        self.counts[(tail * self.n_classes + head) * self.n_bins() + bin]
    }

    pub fn tail_total(&self, tail: ClassId, bin: usize) -> u64 {
        self.tail_totals[tail * self.n_bins() + bin]
    }

    /// Transition probability, or `None` (missing) when the tail class has no pairs in `bin`.
    pub fn probability(&self, tail: ClassId, head: ClassId, bin: usize) -> Option<f64> {
        let total = self.tail_total(tail, bin);
        (total > 0).then(|| self.count(tail, head, bin) as f64 / total as f64)
    }

    pub fn series(&self, tail: ClassId, head: ClassId) -> Vec<ExperimentalPoint> {
        (0..self.n_bins())
            .map(|b| ExperimentalPoint {
                lag: self.lags[b],
                count: self.count(tail, head, b),
                probability: self.probability(tail, head, b),
            })
            .collect()
    }

    /// Measured `(lag, probability)` knots, missing bins skipped.
    pub fn knots(&self, tail: ClassId, head: ClassId) -> Vec<(f64, f64)> {
        (0..self.n_bins()).filter_map(|b| self.probability(tail, head, b).map(|p| (self.lags[b], p))).collect()
    }

    /// True when the tail class has no measured bin at all.
    pub fn row_missing(&self, tail: ClassId) -> bool {
        (0..self.n_bins()).all(|b| self.tail_total(tail, b) == 0)
    }

    /// Share of tail class `i` among all pairs of `bin`, `F_i· / F··`.
    pub fn tail_shares(&self, bin: usize) -> Option<Vec<f64>> {
        let totals: Vec<u64> = (0..self.n_classes).map(|i| self.tail_total(i, bin)).collect();
        let all: u64 = totals.iter().sum();
        (all > 0).then(|| totals.iter().map(|&t| t as f64 / all as f64).collect())
    }

    /// CSV with columns `tail,head,lag,count,probability`; probability is empty when missing.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Data(format!("writing transiogram CSV: {e}"));
        w.write_record(["tail", "head", "lag", "count", "probability"]).map_err(to_err)?;
        for i in 0..self.n_classes {
            for j in 0..self.n_classes {
                for b in 0..self.n_bins() {
                    let p = self.probability(i, j, b).map(|p| p.to_string()).unwrap_or_default();
                    w.write_record([
                        i.to_string(),
                        j.to_string(),
                        self.lags[b].to_string(),
                        self.count(i, j, b).to_string(),
                        p,
                    ])
                    .map_err(to_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Data(format!("writing transiogram CSV: {e}")))?;
        Ok(())
    }
}

/// Counts ordered transitions between all sample pairs per lag bin.
pub fn estimate_experimental(samples: &SampleSet, spec: &LagBinSpec) -> Result<ExperimentalTransiogramMatrix> {
    if samples.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "transiogram estimation needs at least 2 points, got {}",
            samples.len()
        )));
    }
    let n = samples.n_classes();
    let n_bins = spec.n_bins();
    let pts = samples.points();
    let counts = (0..pts.len())
        .into_par_iter()
        .fold(
            || vec![0u64; n * n * n_bins],
            |mut acc, a| {
                let pa = pts[a];
                for pb in &pts[a + 1..] {
                    let d = spec.lag(pa.x, pa.y, pb.x, pb.y);
                    if let Some(bin) = spec.bin_of(d) {
                        acc[(pa.class * n + pb.class) * n_bins + bin] += 1;
                        acc[(pb.class * n + pa.class) * n_bins + bin] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n * n * n_bins],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );
    ExperimentalTransiogramMatrix::from_counts(n, *spec, counts)
}

/// Largest violation of `p_ij(h)·p_i = p_ji(h)·p_j` over all defined entries.
pub fn reversibility_residual(m: &ExperimentalTransiogramMatrix, p: &ProportionVector) -> f64 {
    residual_with(m, |_, i| p.get(i))
}

/// Same as [`reversibility_residual`] but weighting each bin by its own tail-pair
/// shares `F_i· / F··`, for which the identity holds exactly.
pub fn reversibility_residual_per_bin(m: &ExperimentalTransiogramMatrix) -> f64 {
    let shares: Vec<Option<Vec<f64>>> = (0..m.n_bins()).map(|b| m.tail_shares(b)).collect();
    residual_with(m, |b, i| shares[b].as_ref().map_or(0.0, |s| s[i]))
}

fn residual_with(m: &ExperimentalTransiogramMatrix, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for b in 0..m.n_bins() {
        for i in 0..m.n_classes() {
            for j in 0..m.n_classes() {
                if let (Some(pij), Some(pji)) = (m.probability(i, j, b), m.probability(j, i, b)) {
                    worst = worst.max((pij * weight(b, i) - pji * weight(b, j)).abs());
                }
            }
        }
    }
    worst
}
