//! Quadrantal nearest-neighbor search on a partially known grid.

use arrayvec::ArrayVec;

use crate::grid::{ClassId, NODATA};

/// Quadrant of a datum seen from the target, by angle measured
/// counterclockwise from east: `[0°, 90°)` NE, `[90°, 180°)` NW,
/// `[180°, 270°)` SW, `[270°, 360°)` SE. `dx` is the column offset and `dy`
/// the row offset (rows grow northward). `(0, 0)` has no quadrant.
#[inline]
pub fn quadrant(dx: i64, dy: i64) -> Option<u8> {
    if dx > 0 && dy >= 0 {
        Some(0)
    } else if dx <= 0 && dy > 0 {
        Some(1)
    } else if dx < 0 && dy <= 0 {
        Some(2)
    } else if dx >= 0 && dy < 0 {
        Some(3)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub class: ClassId,
    /// Euclidean center-to-center distance in pixel lengths.
    pub lag: f64,
    pub quadrant: u8,
    /// Squared lag in cells when the neighbor comes from a grid search.
    pub d2: Option<u64>,
}

impl Neighbor {
    pub fn new(class: ClassId, lag: f64, quadrant: u8) -> Self {
        Self { class, lag, quadrant, d2: None }
    }
}

/// At most one neighbor per quadrant, in quadrant order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Neighborhood {
    neighbors: ArrayVec<Neighbor, 4>,
    designated_from: usize,
}

impl Neighborhood {
    /// The nearest neighbor becomes the designated "from" datum; ties go to
    /// the lowest quadrant index.
    ///
    /// # Panics
    /// If two neighbors share a quadrant or there are more than four.
    pub fn new(mut neighbors: Vec<Neighbor>) -> Self {
        assert!(neighbors.len() <= 4, "a quadrantal neighborhood holds at most 4 neighbors");
        neighbors.sort_by_key(|n| n.quadrant);
        assert!(neighbors.windows(2).all(|w| w[0].quadrant != w[1].quadrant), "one neighbor per quadrant");
        let mut out = Self::default();
        for n in neighbors {
            out.push(n);
        }
        out
    }

    fn push(&mut self, n: Neighbor) {
        if !self.neighbors.is_empty() && n.lag < self.neighbors[self.designated_from].lag {
            self.designated_from = self.neighbors.len();
        }
        self.neighbors.push(n);
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn designated_from(&self) -> usize {
        self.designated_from
    }

    pub fn max_lag(&self) -> f64 {
        self.neighbors.iter().map(|n| n.lag).fold(0.0, f64::max)
    }
}

/// Read-only view of known cells: labels bottom-up row-major, NODATA unknown.
#[derive(Debug, Clone, Copy)]
pub struct KnownGrid<'a> {
    labels: &'a [u16],
    nrows: usize,
    ncols: usize,
}

impl<'a> KnownGrid<'a> {
    pub(crate) fn new(labels: &'a [u16], nrows: usize, ncols: usize) -> Self {
        debug_assert_eq!(labels.len(), nrows * ncols);
        Self { labels, nrows, ncols }
    }

    /// Labeled cells of `raster` are known.
    pub fn from_raster(raster: &'a crate::grid::Raster) -> Self {
        Self::new(raster.raw_labels(), raster.nrows(), raster.ncols())
    }

    #[inline]
    fn get(&self, row: i64, col: i64) -> Option<ClassId> {
        if row < 0 || col < 0 || row >= self.nrows as i64 || col >= self.ncols as i64 {
            return None;
        }
        match self.labels[row as usize * self.ncols + col as usize] {
            NODATA => None,
            l => Some(l as ClassId),
        }
    }
}

/// Ordering key among candidates of one quadrant: nearest first, then lowest
/// row offset, then lowest column offset.
#[inline]
fn key(d2: u64, dy: i64, dx: i64) -> (u64, i64, i64) {
    (d2, dy, dx)
}

#[derive(Clone, Copy)]
struct Best {
    key: (u64, i64, i64),
    class: ClassId,
}

/// Squared search radius in whole cells: a datum qualifies iff `d2 ≤ r2`.
#[inline]
pub fn radius_d2(radius: f64) -> u64 {
    (radius * radius).floor() as u64
}

/// Spiral search: scans Chebyshev rings outward from the target. A quadrant
/// is settled once the ring's inner distance exceeds its best candidate, and
/// the scan stops when all quadrants are settled or the ring leaves the radius.
/// Returns the Euclidean-nearest known cell per quadrant within `radius`.
pub fn find_neighbors(grid: &KnownGrid<'_>, row: usize, col: usize, radius: f64) -> Neighborhood {
    let r2max = radius_d2(radius);
    let ring_max = (r2max as f64).sqrt().floor() as i64;
    let (tr, tc) = (row as i64, col as i64);
    let mut best: [Option<Best>; 4] = [None; 4];
    let mut settled = [false; 4];
    // rings beyond the grid extent hold no cells
    let extent = [tr, tc, grid.nrows as i64 - 1 - tr, grid.ncols as i64 - 1 - tc].into_iter().max().unwrap_or(0);
    let last_ring = ring_max.min(extent);

    let visit = |dx: i64, dy: i64, best: &mut [Option<Best>; 4], settled: &[bool; 4]| {
        let Some(q) = quadrant(dx, dy) else { return };
        let q = q as usize;
        if settled[q] {
            return;
        }
        let Some(class) = grid.get(tr + dy, tc + dx) else { return };
        let d2 = (dx * dx + dy * dy) as u64;
        if d2 > r2max {
            return;
        }
        let k = key(d2, dy, dx);
        if best[q].is_none_or(|b| k < b.key) {
            best[q] = Some(Best { key: k, class });
        }
    };

    for r in 1..=last_ring {
        let rows = (-r).max(-tr)..=r.min(grid.nrows as i64 - 1 - tr);
        let cols = (-r).max(-tc)..=r.min(grid.ncols as i64 - 1 - tc);
        // bottom and top edges
        for dy in [-r, r] {
            if rows.contains(&dy) {
                for dx in cols.clone() {
                    visit(dx, dy, &mut best, &settled);
                }
            }
        }
        // left and right edges without corners
        for dx in [-r, r] {
            if cols.contains(&dx) {
                for dy in (-r + 1).max(*rows.start())..=(r - 1).min(*rows.end()) {
                    visit(dx, dy, &mut best, &settled);
                }
            }
        }
        let next = ((r + 1) * (r + 1)) as u64;
        for q in 0..4 {
            if let Some(b) = best[q] {
                settled[q] = settled[q] || b.key.0 < next;
            }
        }
        if settled.iter().all(|&s| s) {
            break;
        }
    }

    let mut out = Neighborhood::default();
    for (q, b) in best.iter().enumerate() {
        if let Some(b) = b {
            out.push(Neighbor { class: b.class, lag: (b.key.0 as f64).sqrt(), quadrant: q as u8, d2: Some(b.key.0) });
        }
    }
    out
}

/// Exhaustive reference search over every known cell, same tie rules as
/// [`find_neighbors`].
pub fn find_neighbors_exhaustive(grid: &KnownGrid<'_>, row: usize, col: usize, radius: f64) -> Neighborhood {
    let r2max = radius_d2(radius);
    let mut best: [Option<Best>; 4] = [None; 4];
    for r in 0..grid.nrows as i64 {
        for c in 0..grid.ncols as i64 {
            let Some(class) = grid.get(r, c) else { continue };
            let (dx, dy) = (c - col as i64, r - row as i64);
            let Some(q) = quadrant(dx, dy) else { continue };
            let d2 = (dx * dx + dy * dy) as u64;
            if d2 > r2max {
                continue;
            }
            let k = key(d2, dy, dx);
            let q = q as usize;
            if best[q].is_none_or(|b| k < b.key) {
                best[q] = Some(Best { key: k, class });
            }
        }
    }
    let mut out = Neighborhood::default();
    for (q, b) in best.iter().enumerate() {
        if let Some(b) = b {
            out.push(Neighbor { class: b.class, lag: (b.key.0 as f64).sqrt(), quadrant: q as u8, d2: Some(b.key.0) });
        }
    }
    out
}
