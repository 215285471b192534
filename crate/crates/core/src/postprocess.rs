//! Ensemble summaries: occurrence probabilities, optimal maps, accuracy and
//! class-proportion tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassId, Raster, SampleSet, NODATA};
use crate::mcrf::Ensemble;

/// Per-class occurrence frequencies across an ensemble. Cells that are
/// NODATA in every realization have all-zero frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCube {
    geometry: crate::grid::GridGeometry,
    n_classes: usize,
    n_real: usize,
    /// counts[cell * n_classes + k]
    counts: Vec<u32>,
}

impl ProbabilityCube {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn geometry(&self) -> &crate::grid::GridGeometry {
        &self.geometry
    }

    pub fn count(&self, row: usize, col: usize, class: ClassId) -> u32 {
        self.counts[self.geometry.index(row, col) * self.n_classes + class]
    }

    /// `q_k(cell)`.
    pub fn probability(&self, row: usize, col: usize, class: ClassId) -> f64 {
        self.count(row, col, class) as f64 / self.n_real as f64
    }

    /// Occurrence probabilities of one class over the grid, bottom-up row-major.
    pub fn class_grid(&self, class: ClassId) -> Vec<f64> {
        self.counts.chunks(self.n_classes).map(|c| c[class] as f64 / self.n_real as f64).collect()
    }

    /// Largest occurrence probability per cell.
    pub fn max_probability_grid(&self) -> Vec<f64> {
        self.counts.chunks(self.n_classes).map(|c| *c.iter().max().unwrap_or(&0) as f64 / self.n_real as f64).collect()
    }
}

/// `q_k(cell) = #{realizations with class k at cell} / n_real`.
pub fn occurrence_probability(ens: &Ensemble) -> Result<ProbabilityCube> {
    occurrence_probability_of(&ens.realizations)
}

pub fn occurrence_probability_of(realizations: &[Raster]) -> Result<ProbabilityCube> {
    let first = realizations.first().ok_or_else(|| Error::EmptyInput("no realizations".into()))?;
    let n = first.n_classes();
    let geometry = *first.geometry();
    let mut counts = vec![0u32; geometry.n_cells() * n];
    for (r, real) in realizations.iter().enumerate() {
        if !real.same_geometry(first) || real.n_classes() != n {
            return Err(Error::Data(format!("realization {r} differs in geometry or class count")));
        }
        for (cell, &l) in real.raw_labels().iter().enumerate() {
            if l != NODATA {
                counts[cell * n + l as usize] += 1;
            }
        }
    }
    Ok(ProbabilityCube { geometry, n_classes: n, n_real: realizations.len(), counts })
}

/// Per-cell argmax of the cube; ties go to the smallest class id.
pub fn optimal_map(cube: &ProbabilityCube) -> Raster {
    let labels = cube
        .counts
        .chunks(cube.n_classes)
        .map(|c| {
            let mut best = 0;
            for k in 1..c.len() {
                if c[k] > c[best] {
                    best = k;
                }
            }
            if c[best] == 0 {
                NODATA
            } else {
                best as u16
            }
        })
        .collect();
    Raster::from_raw(cube.geometry, cube.n_classes, labels)
}

/// Which cells enter accuracy denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorPolicy {
    AllCells,
    /// Conditioning sample cells are left out.
    #[default]
    ExcludeSamples,
}

impl DenominatorPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DenominatorPolicy::AllCells => "all_cells",
            DenominatorPolicy::ExcludeSamples => "exclude_samples",
        }
    }
}

impl std::str::FromStr for DenominatorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_cells" | "all-cells" => Ok(DenominatorPolicy::AllCells),
            "exclude_samples" | "exclude-samples" => Ok(DenominatorPolicy::ExcludeSamples),
            other => Err(Error::Argument(format!("unknown denominator policy `{other}`"))),
        }
    }
}

/// Percent correct. Per-class values are producer's accuracies (correct cells
/// among reference cells of the class); classes absent from the evaluated
/// reference cells get `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: f64,
    pub per_class: Vec<Option<f64>>,
    pub policy: DenominatorPolicy,
    pub evaluated_cells: usize,
    pub reference_counts: Vec<usize>,
}

pub fn accuracy(
    map: &Raster,
    reference: &Raster,
    samples: &SampleSet,
    policy: DenominatorPolicy,
) -> Result<AccuracyReport> {
    if !map.same_geometry(reference) {
        return Err(Error::Data("map and reference differ in geometry".into()));
    }
    let n = reference.n_classes();
    if map.n_classes() != n {
        return Err(Error::Data(format!("map has {} classes, reference has {n}", map.n_classes())));
    }
    let geom = reference.geometry();
    let mut excluded = vec![false; geom.n_cells()];
    if policy == DenominatorPolicy::ExcludeSamples {
        for p in samples.points() {
            if let Some((r, c)) = geom.cell_of(p.x, p.y) {
                excluded[geom.index(r, c)] = true;
            }
        }
    }
    let mut total = vec![0usize; n];
    let mut correct = vec![0usize; n];
    for (i, (&m, &r)) in map.raw_labels().iter().zip(reference.raw_labels()).enumerate() {
        if r == NODATA || excluded[i] {
            continue;
        }
        total[r as usize] += 1;
        if m == r {
            correct[r as usize] += 1;
        }
    }
    let evaluated: usize = total.iter().sum();
    if evaluated == 0 {
        return Err(Error::EmptyInput("no reference cells to evaluate".into()));
    }
    Ok(AccuracyReport {
        overall: 100.0 * correct.iter().sum::<usize>() as f64 / evaluated as f64,
        per_class: (0..n).map(|k| (total[k] > 0).then(|| 100.0 * correct[k] as f64 / total[k] as f64)).collect(),
        policy,
        evaluated_cells: evaluated,
        reference_counts: total,
    })
}

/// Mean of per-realization accuracies, overall and per class.
pub fn mean_accuracy(
    ens: &Ensemble,
    reference: &Raster,
    samples: &SampleSet,
    policy: DenominatorPolicy,
) -> Result<AccuracyReport> {
    let reports =
        ens.realizations.iter().map(|r| accuracy(r, reference, samples, policy)).collect::<Result<Vec<_>>>()?;
    let k = reports.len() as f64;
    let first = &reports[0];
    Ok(AccuracyReport {
        overall: reports.iter().map(|r| r.overall).sum::<f64>() / k,
        per_class: (0..first.per_class.len())
            .map(|c| first.per_class[c].map(|_| reports.iter().map(|r| r.per_class[c].unwrap_or(0.0)).sum::<f64>() / k))
            .collect(),
        policy,
        evaluated_cells: first.evaluated_cells,
        reference_counts: first.reference_counts.clone(),
    })
}

/// Class proportions of a raster's labeled cells, in percent.
pub fn raster_percentages(r: &Raster) -> Result<Vec<f64>> {
    Ok(r.proportions()?.as_slice().iter().map(|p| 100.0 * p).collect())
}

/// One row of a class-proportion table, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionRow {
    pub label: String,
    pub percent: Vec<f64>,
}

/// Rows for the reference (when given), the sample data, and each labeled
/// ensemble (mean over realizations).
pub fn proportion_report(
    ensembles: &[(&str, &Ensemble)],
    reference: Option<&Raster>,
    samples: &SampleSet,
) -> Result<Vec<ProportionRow>> {
    let mut rows = Vec::new();
    if let Some(r) = reference {
        rows.push(ProportionRow { label: "reference".into(), percent: raster_percentages(r)? });
    }
    rows.push(ProportionRow {
        label: "samples".into(),
        percent: crate::grid::class_proportions(samples)?.as_slice().iter().map(|p| 100.0 * p).collect(),
    });
    for (label, ens) in ensembles {
        rows.push(ProportionRow { label: label.to_string(), percent: mean_realization_percentages(ens)? });
    }
    Ok(rows)
}

pub fn mean_realization_percentages(ens: &Ensemble) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; ens.n_classes()];
    for r in &ens.realizations {
        for (a, p) in acc.iter_mut().zip(raster_percentages(r)?) {
            *a += p;
        }
    }
    acc.iter_mut().for_each(|a| *a /= ens.n_real() as f64);
    Ok(acc)
}

/// Number of 4-connected same-class patches among labeled cells.
pub fn patch_count(r: &Raster) -> usize {
    let (nr, nc) = (r.nrows(), r.ncols());
    let labels = r.raw_labels();
    let mut seen = vec![false; labels.len()];
    let mut stack = Vec::new();
    let mut patches = 0;
    for start in 0..labels.len() {
        if seen[start] || labels[start] == NODATA {
            continue;
        }
        patches += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (row, col) = (i / nc, i % nc);
            let mut try_push = |j: usize| {
                if !seen[j] && labels[j] == labels[i] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if row > 0 {
                try_push(i - nc);
            }
            if row + 1 < nr {
                try_push(i + nc);
            }
            if col > 0 {
                try_push(i - 1);
            }
            if col + 1 < nc {
                try_push(i + 1);
            }
        }
    }
    patches
}

/// Method × class table of percents, first column the row label.
pub fn write_percent_table<W: Write>(
    out: W,
    class_names: &[String],
    rows: &[(String, Vec<Option<f64>>, Option<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend(class_names.iter().cloned());
    header.push("overall".into());
    w.write_record(&header).map_err(csv_err)?;
    for (label, values, overall) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(values.iter().map(|v| v.map(fmt_pct).unwrap_or_default()));
        rec.push(overall.map(fmt_pct).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("cannot write table: {e}")))?;
    Ok(())
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.2}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("cannot write table: {e}"))
}
