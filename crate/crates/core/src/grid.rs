//! Rasters of class labels, point samples and class bookkeeping.
//!
//! Rows are counted from the bottom: row 0 is the southernmost row and the
//! lower-left corner of cell (0, 0) sits at `(origin_x, origin_y)`.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense class index in `0..n_classes`.
pub type ClassId = usize;

/// Stored label of a cell without data.
pub(crate) const NODATA: u16 = u16::MAX;
/// Largest number of classes a raster can hold.
pub const MAX_CLASSES: usize = (u16::MAX - 2) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridGeometry {
    pub fn new(nrows: usize, ncols: usize, cell_size: f64, origin_x: f64, origin_y: f64) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(Error::Argument(format!("raster dimensions must be positive, got {nrows}x{ncols}")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Argument(format!("cell size must be positive, got {cell_size}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Argument("raster origin must be finite".into()));
        }
        Ok(Self { nrows, ncols, cell_size, origin_x, origin_y })
    }

    pub fn n_cells(&self) -> usize {
        self.nrows * self.ncols
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.ncols, index % self.ncols)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Result<(f64, f64)> {
        if row >= self.nrows || col >= self.ncols {
            return Err(Error::Index { row, col, nrows: self.nrows, ncols: self.ncols });
        }
        Ok((self.origin_x + (col as f64 + 0.5) * self.cell_size, self.origin_y + (row as f64 + 0.5) * self.cell_size))
    }

    /// Cell containing ground point `(x, y)`; cells are closed on their lower-left edges.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_x) / self.cell_size).floor();
        let r = ((y - self.origin_y) / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || c >= self.ncols as f64 || r >= self.nrows as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }
}

/// Rectangular grid of class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    geometry: GridGeometry,
    n_classes: usize,
    labels: Vec<u16>,
}

impl Raster {
    /// Builds a raster from bottom-up row-major labels; `None` marks NODATA.
    pub fn from_labels(geometry: GridGeometry, n_classes: usize, labels: &[Option<ClassId>]) -> Result<Self> {
        if labels.len() != geometry.n_cells() {
            return Err(Error::Argument(format!(
                "expected {} labels for a {}x{} raster, got {}",
                geometry.n_cells(),
                geometry.nrows,
                geometry.ncols,
                labels.len()
            )));
        }
        check_class_count(n_classes)?;
        let mut stored = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            match *l {
                None => stored.push(NODATA),
                Some(c) if c < n_classes => stored.push(c as u16),
                Some(c) => {
                    let (row, col) = geometry.row_col(i);
                    return Err(Error::Data(format!(
                        "label {c} at cell ({row}, {col}) is not below n_classes = {n_classes}"
                    )));
                }
            }
        }
        Ok(Self { geometry, n_classes, labels: stored })
    }

    /// All cells NODATA.
    pub fn empty(geometry: GridGeometry, n_classes: usize) -> Result<Self> {
        check_class_count(n_classes)?;
        Ok(Self { geometry, n_classes, labels: vec![NODATA; geometry.n_cells()] })
    }

    pub fn filled(geometry: GridGeometry, n_classes: usize, class: ClassId) -> Result<Self> {
        check_class_count(n_classes)?;
        if class >= n_classes {
            return Err(Error::Argument(format!("class {class} out of range for {n_classes} classes")));
        }
        Ok(Self { geometry, n_classes, labels: vec![class as u16; geometry.n_cells()] })
    }

    pub(crate) fn from_raw(geometry: GridGeometry, n_classes: usize, labels: Vec<u16>) -> Self {
        debug_assert_eq!(labels.len(), geometry.n_cells());
        Self { geometry, n_classes, labels }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn nrows(&self) -> usize {
        self.geometry.nrows
    }

    pub fn ncols(&self) -> usize {
        self.geometry.ncols
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Result<(f64, f64)> {
        self.geometry.cell_center(row, col)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<ClassId> {
        self.get_index(self.geometry.index(row, col))
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> Option<ClassId> {
        match self.labels[index] {
            NODATA => None,
            l => Some(l as ClassId),
        }
    }

    pub fn set(&mut self, row: usize, col: usize, label: Option<ClassId>) -> Result<()> {
        if row >= self.nrows() || col >= self.ncols() {
            return Err(Error::Index { row, col, nrows: self.nrows(), ncols: self.ncols() });
        }
        let stored = match label {
            None => NODATA,
            Some(c) if c < self.n_classes => c as u16,
            Some(c) => return Err(Error::Argument(format!("class {c} out of range for {} classes", self.n_classes))),
        };
        let i = self.geometry.index(row, col);
        self.labels[i] = stored;
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = Option<ClassId>> + '_ {
        self.labels.iter().map(|&l| if l == NODATA { None } else { Some(l as ClassId) })
    }

    pub(crate) fn raw_labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn same_geometry(&self, other: &Raster) -> bool {
        self.geometry == other.geometry
    }

    pub fn labeled_cells(&self) -> usize {
        self.labels.iter().filter(|&&l| l != NODATA).count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            if l != NODATA {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    /// Class shares over labeled cells.
    pub fn proportions(&self) -> Result<ProportionVector> {
        ProportionVector::from_counts(&self.class_counts())
    }
}

fn check_class_count(n_classes: usize) -> Result<()> {
    if n_classes == 0 || n_classes > MAX_CLASSES {
        return Err(Error::Argument(format!("n_classes must be in 1..={MAX_CLASSES}, got {n_classes}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClassRole {
    #[default]
    Major,
    Moderate,
    Minor,
}

impl ClassRole {
    /// Proportion below which a class is suggested as minor.
    pub const MINOR_THRESHOLD: f64 = 0.05;

    /// Default role from a class proportion. Roles are normally user-declared;
    /// this is only a starting suggestion.
    pub fn suggest(proportion: f64) -> Self {
        if proportion < Self::MINOR_THRESHOLD {
            ClassRole::Minor
        } else {
            ClassRole::Major
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: ClassId,
    pub name: String,
    #[serde(default)]
    pub role: ClassRole,
}

/// Named classes with roles; ids are dense `0..n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassTable {
    pub classes: Vec<ClassInfo>,
}

impl ClassTable {
    pub fn new(classes: Vec<ClassInfo>) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if c.id != i {
                return Err(Error::Argument(format!("class ids must be dense: position {i} holds id {}", c.id)));
            }
        }
        Ok(Self { classes })
    }

    /// Generic names `class 1..n` with roles suggested from proportions.
    pub fn suggested(proportions: &ProportionVector) -> Self {
        let classes = proportions
            .as_slice()
            .iter()
            .enumerate()
            .map(|(id, &p)| ClassInfo { id, name: format!("class {}", id + 1), role: ClassRole::suggest(p) })
            .collect();
        Self { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn roles(&self) -> Vec<ClassRole> {
        self.classes.iter().map(|c| c.role).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub class: ClassId,
}

/// Point observations of class labels in ground coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<SamplePoint>,
    n_classes: usize,
}

impl SampleSet {
    pub fn new(points: Vec<SamplePoint>, n_classes: usize) -> Result<Self> {
        check_class_count(n_classes)?;
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::Data(format!("point {i} has non-finite coordinates")));
            }
            if p.class >= n_classes {
                return Err(Error::Data(format!(
                    "point {i} at ({}, {}) has class {} but n_classes = {n_classes}",
                    p.x, p.y, p.class
                )));
            }
            if !seen.insert((p.x.to_bits(), p.y.to_bits())) {
                return Err(Error::Data(format!("duplicate sample coordinates ({}, {}) at point {i}", p.x, p.y)));
            }
        }
        Ok(Self { points, n_classes })
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for p in &self.points {
            counts[p.class] += 1;
        }
        counts
    }

    /// Classes without any sample point.
    pub fn absent_classes(&self) -> Vec<ClassId> {
        self.class_counts().iter().enumerate().filter(|(_, &c)| c == 0).map(|(k, _)| k).collect()
    }

    /// Keeps only the first `max` points of `class`, in point order.
    pub fn limit_class(&self, class: ClassId, max: usize) -> SampleSet {
        let mut kept = 0;
        let points = self
            .points
            .iter()
            .filter(|p| {
                if p.class != class {
                    return true;
                }
                kept += 1;
                kept <= max
            })
            .copied()
            .collect();
        SampleSet { points, n_classes: self.n_classes }
    }
}

/// Class proportions `p_k`, nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProportionVector(Vec<f64>);

impl ProportionVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("proportion vector has no entries".into()));
        }
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Argument(format!("proportion {k} is {v}; must be a finite value >= 0")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Argument(format!("proportions sum to {sum}, not 1")));
        }
        Ok(Self(p))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !(sum > 0.0) {
            return Err(Error::Argument("weights must be nonnegative with a positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("no labeled observations".into()));
        }
        Ok(Self(counts.iter().map(|&c| c as f64 / total as f64).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: ClassId) -> f64 {
        self.0[k]
    }
}

impl TryFrom<Vec<f64>> for ProportionVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProportionVector> for Vec<f64> {
    fn from(p: ProportionVector) -> Self {
        p.0
    }
}

pub fn class_proportions(samples: &SampleSet) -> Result<ProportionVector> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("sample set has no points".into()));
    }
    ProportionVector::from_counts(&samples.class_counts())
}

/// Draws `n` distinct labeled cells uniformly without replacement; points sit
/// at cell centers. The draw is a prefix of a seeded shuffle of all labeled
/// cells, so smaller `n` with the same seed yields a subset.
pub fn random_sample(reference: &Raster, n: usize, seed: u64) -> Result<SampleSet> {
    let mut cells: Vec<usize> = (0..reference.geometry.n_cells()).filter(|&i| reference.labels[i] != NODATA).collect();
    if n > cells.len() {
        return Err(Error::Capacity { requested: n, available: cells.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);
    let chosen = &cells[..n];
    let geom = reference.geometry;
    let points = chosen
        .iter()
        .map(|&i| {
            let (row, col) = geom.row_col(i);
            let (x, y) = geom.cell_center(row, col).expect("index from raster");
            SamplePoint { x, y, class: reference.labels[i] as ClassId }
        })
        .collect();
    SampleSet::new(points, reference.n_classes)
}

/// Synthetic categorical mosaic: `n_seeds` random seed points get class labels
/// drawn from `class_weights`, and each cell takes the label of its nearest
/// seed. The result is a patchwork of convex polygons.
pub fn generate_blob_reference(
    nrows: usize,
    ncols: usize,
    n_classes: usize,
    class_weights: &ProportionVector,
    n_seeds: usize,
    seed: u64,
) -> Result<Raster> {
    let geometry = GridGeometry::new(nrows, ncols, 1.0, 0.0, 0.0)?;
    check_class_count(n_classes)?;
    if class_weights.len() != n_classes {
        return Err(Error::Argument(format!("{} class weights given for {n_classes} classes", class_weights.len())));
    }
    if n_seeds == 0 {
        return Err(Error::Argument("n_seeds must be positive".into()));
    }
    if n_seeds < n_classes && n_seeds != 1 {
        return Err(Error::Argument(format!("n_seeds ({n_seeds}) must be at least n_classes ({n_classes})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chooser = WeightedIndex::new(class_weights.as_slice())
        .map_err(|e| Error::Argument(format!("invalid class weights: {e}")))?;
    let seeds: Vec<(f64, f64, u16)> = (0..n_seeds)
        .map(|_| {
            let x = rng.random::<f64>() * ncols as f64;
            let y = rng.random::<f64>() * nrows as f64;
            (x, y, chooser.sample(&mut rng) as u16)
        })
        .collect();
    let mut labels = Vec::with_capacity(geometry.n_cells());
    for row in 0..nrows {
        let cy = row as f64 + 0.5;
        for col in 0..ncols {
            let cx = col as f64 + 0.5;
            let mut best = (f64::INFINITY, 0u16);
            for &(sx, sy, class) in &seeds {
                let d2 = (sx - cx) * (sx - cx) + (sy - cy) * (sy - cy);
                if d2 < best.0 {
                    best = (d2, class);
                }
            }
            labels.push(best.1);
        }
    }
    Ok(Raster::from_raw(geometry, n_classes, labels))
}
