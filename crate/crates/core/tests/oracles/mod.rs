//! Independent reference computations shared by the core tests and the
//! acceptance suite. Each check returns a one-line detail on success and a
//! description of the first mismatch on failure.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use mcrf_core::mcrf::{find_neighbors, KnownGrid};
use mcrf_core::{
    estimate_experimental, eval_basic, eval_gamma_composite, gamma_pdf, local_cpd, validate_model_set, ClassId,
    GridGeometry, LagBinSpec, ModelDescriptor, ModelKind, Neighbor, Neighborhood, ProportionVector, Raster,
    SamplePoint, SampleSet, TransiogramModelSet,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Gamma};

pub type CheckResult = Result<String, String>;

// ---------------------------------------------------------------- estimation

fn oracle_n_bins(w: f64, max_lag: f64) -> usize {
    let mut k = 0;
    while ((k + 1) as f64) * w <= max_lag {
        k += 1;
    }
    k
}

fn oracle_bin(d: f64, w: f64, n_bins: usize) -> Option<usize> {
    (1..=n_bins)
        .find(|&k| {
            let c = k as f64 * w;
            d >= c - 0.5 * w && d < c + 0.5 * w
        })
        .map(|k| k - 1)
}

/// Random datasets of at most 30 points on cell centers, so that many pair
/// distances fall exactly on bin edges.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> (SampleSet, LagBinSpec) {
    let n_classes = rng.random_range(1..=5);
    let n_pts = rng.random_range(2..=30);
    let cell = [1.0, 2.5, 0.5][rng.random_range(0..3)];
    let side = rng.random_range(6..=20);
    let mut cells: Vec<(usize, usize)> = (0..side).flat_map(|r| (0..side).map(move |c| (r, c))).collect();
    cells.shuffle(rng);
    let pts = cells[..n_pts.min(cells.len())]
        .iter()
        .map(|&(r, c)| SamplePoint {
            x: (c as f64 + 0.5) * cell,
            y: (r as f64 + 0.5) * cell,
            class: rng.random_range(0..n_classes),
        })
        .collect();
    let w = [1.0, 1.5, 2.0, 3.0, 5.0][rng.random_range(0..5)];
    let k = rng.random_range(1..=10) as f64;
    let max_lag = w * k + rng.random_range(0.0..0.5) * w;
    let samples = SampleSet::new(pts, n_classes).expect("valid dataset");
    let spec = LagBinSpec::new(w, max_lag, cell).expect("valid spec");
    (samples, spec)
}

/// O(N²) ordered-pair counting over all `i != j`.
pub fn brute_force_counts(samples: &SampleSet, w: f64, max_lag: f64, cell: f64) -> (usize, Vec<u64>) {
    let n = samples.n_classes();
    let nb = oracle_n_bins(w, max_lag);
    let mut counts = vec![0u64; n * n * nb];
    let pts = samples.points();
    for (i, a) in pts.iter().enumerate() {
        for (j, b) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let dx = b.x - a.x;
            let dy = b.y - a.y;
            let d = (dx * dx + dy * dy).sqrt() / cell;
            if let Some(bin) = oracle_bin(d, w, nb) {
                counts[(a.class * n + b.class) * nb + bin] += 1;
            }
        }
    }
    (nb, counts)
}

pub fn estimation_oracle(n_datasets: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = 0u64;
    for ds in 0..n_datasets {
        let (samples, spec) = random_dataset(&mut rng);
        let (nb, counts) = brute_force_counts(&samples, spec.bin_width, spec.max_lag, spec.cell_size);
        let m = estimate_experimental(&samples, &spec).map_err(|e| format!("dataset {ds}: {e}"))?;
        if m.n_bins() != nb {
            return Err(format!("dataset {ds}: {} bins, oracle {nb}", m.n_bins()));
        }
        let n = samples.n_classes();
        for t in 0..n {
            for b in 0..nb {
                let total: u64 = (0..n).map(|h| counts[(t * n + h) * nb + b]).sum();
                for h in 0..n {
                    let c = counts[(t * n + h) * nb + b];
                    pairs += c;
                    if m.count(t, h, b) != c {
                        return Err(format!(
                            "dataset {ds}: count ({t},{h}) bin {b} = {}, oracle {c}",
                            m.count(t, h, b)
                        ));
                    }
                    let want = (total > 0).then(|| c as f64 / total as f64);
                    let got = m.probability(t, h, b);
                    if got.map(f64::to_bits) != want.map(f64::to_bits) {
                        return Err(format!("dataset {ds}: probability ({t},{h}) bin {b} = {got:?}, oracle {want:?}"));
                    }
                }
            }
        }
    }
    Ok(format!("{n_datasets} datasets, {pairs} ordered pairs binned identically"))
}

// ---------------------------------------------------------------- neighbors

fn angle_quadrant(dx: i64, dy: i64) -> Option<u8> {
    if dx == 0 && dy == 0 {
        return None;
    }
    let mut a = (dy as f64).atan2(dx as f64);
    if a < 0.0 {
        a += TAU;
    }
    Some(if a < FRAC_PI_2 {
        0
    } else if a < PI {
        1
    } else if a < 3.0 * FRAC_PI_2 {
        2
    } else {
        3
    })
}

/// Nearest known cell per quadrant by scanning every cell; ties broken by
/// `(d², dy, dx)`.
pub fn exhaustive_neighbors(raster: &Raster, row: usize, col: usize, radius: f64) -> Vec<(u8, ClassId, u64)> {
    let r2 = (radius * radius).floor() as u64;
    let mut best: [Option<((u64, i64, i64), ClassId)>; 4] = [None; 4];
    for r in 0..raster.nrows() {
        for c in 0..raster.ncols() {
            let Some(class) = raster.get(r, c) else { continue };
            let dx = c as i64 - col as i64;
            let dy = r as i64 - row as i64;
            let Some(q) = angle_quadrant(dx, dy) else { continue };
            let d2 = (dx * dx + dy * dy) as u64;
            if d2 > r2 {
                continue;
            }
            let key = (d2, dy, dx);
            let slot = &mut best[q as usize];
            if slot.is_none_or(|(k, _)| key < k) {
                *slot = Some((key, class));
            }
        }
    }
    best.iter().enumerate().filter_map(|(q, b)| b.map(|(k, class)| (q as u8, class, k.0))).collect()
}

pub fn spiral_equivalence(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = GridGeometry::new(20, 20, 1.0, 0.0, 0.0).unwrap();
    let mut found = 0usize;
    for t in 0..trials {
        let density = [0.005, 0.02, 0.1, 0.4, 0.9][rng.random_range(0..5)];
        let labels: Vec<Option<ClassId>> =
            (0..400).map(|_| (rng.random::<f64>() < density).then(|| rng.random_range(0..4))).collect();
        let mut raster = Raster::from_labels(geom, 4, &labels).unwrap();
        let (row, col) = (rng.random_range(0..20), rng.random_range(0..20));
        raster.set(row, col, None).unwrap();
        let radius = if rng.random_bool(0.2) { rng.random_range(1..=30) as f64 } else { rng.random_range(0.5..30.0) };
        let grid = KnownGrid::from_raster(&raster);
        let got: Vec<(u8, ClassId, u64)> = find_neighbors(&grid, row, col, radius)
            .neighbors()
            .iter()
            .map(|n| (n.quadrant, n.class, n.d2.expect("grid neighbors carry d2")))
            .collect();
        let want = exhaustive_neighbors(&raster, row, col, radius);
        if got != want {
            return Err(format!(
                "trial {t}: target ({row}, {col}) radius {radius}: spiral {got:?}, exhaustive {want:?}"
            ));
        }
        found += want.len();
    }
    Ok(format!("{trials} configurations, {found} neighbors identical"))
}

// ---------------------------------------------------------------- CPD

/// Exponential model set: row `i` has range `ranges[i]`, auto sill `p_i`,
/// cross sills `p_j`, and its rest entry on the largest class.
pub struct ExpSet {
    pub p: Vec<f64>,
    pub ranges: Vec<f64>,
    pub rest_head: ClassId,
}

impl ExpSet {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, common_range: bool) -> Self {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / s).collect();
        let r0 = rng.random_range(3.0..40.0);
        let ranges = (0..n).map(|_| if common_range { r0 } else { rng.random_range(3.0..40.0) }).collect();
        let rest_head = (0..n).fold(0, |b, k| if p[k] > p[b] { k } else { b });
        Self { p, ranges, rest_head }
    }

    /// Closed-form `p_ij(h)`.
    pub fn value(&self, i: ClassId, j: ClassId, h: f64) -> f64 {
        let e = (-3.0 * h / self.ranges[i]).exp();
        if i == j {
            1.0 - (1.0 - self.p[i]) * (1.0 - e)
        } else {
            self.p[j] * (1.0 - e)
        }
    }

    pub fn model_set(&self, lag_max: f64) -> TransiogramModelSet {
        let n = self.p.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if j == self.rest_head {
                    ModelDescriptor::Rest
                } else if i == j {
                    ModelDescriptor::basic(ModelKind::ExponentialAuto, self.p[i], self.ranges[i]).unwrap()
                } else {
                    ModelDescriptor::basic(ModelKind::ExponentialCross, self.p[j], self.ranges[i]).unwrap()
                });
            }
        }
        let marg = ProportionVector::new(self.p.clone()).unwrap();
        let mut set = TransiogramModelSet::new(entries, vec![self.rest_head; n], marg, None).unwrap();
        let report = validate_model_set(&mut set, lag_max).unwrap();
        assert!(report.valid, "exponential set must validate");
        set
    }
}

pub fn random_neighborhood(rng: &mut ChaCha8Rng, n_classes: usize, max_lag: f64) -> Neighborhood {
    let m = rng.random_range(1..=4);
    let mut quads = vec![0u8, 1, 2, 3];
    quads.shuffle(rng);
    let tie = rng.random_bool(0.25);
    let shared = rng.random_range(1.0..max_lag);
    let neighbors = quads[..m]
        .iter()
        .map(|&q| {
            let lag = if tie { shared } else { rng.random_range(1.0..max_lag) };
            Neighbor::new(rng.random_range(0..n_classes), lag, q)
        })
        .collect();
    Neighborhood::new(neighbors)
}

/// Normalized `p_{l1,k}(h1) · Π_{i≠1} p_{k,l_i}(h_i)` with `l1` the nearest
/// neighbor, ties to the lowest quadrant.
pub fn direct_cpd(set: &ExpSet, neighbors: &[Neighbor]) -> Vec<f64> {
    let d = neighbors
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.lag.total_cmp(&b.1.lag).then(a.1.quadrant.cmp(&b.1.quadrant)))
        .map(|(i, _)| i)
        .unwrap();
    let n = set.p.len();
    let num: Vec<f64> = (0..n)
        .map(|k| {
            let first = set.value(neighbors[d].class, k, neighbors[d].lag);
            neighbors
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != d)
                .fold(first, |acc, (_, x)| acc * set.value(k, x.class, x.lag))
        })
        .collect();
    let s: f64 = num.iter().sum();
    num.iter().map(|v| v / s).collect()
}

pub fn cpd_oracle(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut sets = 0;
    let mut t = 0;
    while t < trials {
        let n = rng.random_range(2..=7);
        let es = ExpSet::random(&mut rng, n, false);
        let set = es.model_set(50.0);
        sets += 1;
        for _ in 0..50 {
            if t == trials {
                break;
            }
            let neigh = random_neighborhood(&mut rng, n, 50.0);
            let got = local_cpd(&neigh, &set).map_err(|e| format!("trial {t}: {e}"))?;
            let want = direct_cpd(&es, neigh.neighbors());
            for (k, (&g, &w)) in got.probs().iter().zip(&want).enumerate() {
                let err = (g - w).abs();
                worst = worst.max(err);
                if err > 1e-12 {
                    return Err(format!("trial {t}: class {k}: local_cpd {g}, direct {w}"));
                }
            }
            t += 1;
        }
    }
    Ok(format!("{trials} neighborhoods over {sets} sets, max |diff| {worst:.2e}"))
}

/// All three CPD forms on reversible sets (one common range for every row).
pub fn cpd_forms_agree(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let n = rng.random_range(2..=7);
        let es = ExpSet::random(&mut rng, n, true);
        let set = es.model_set(50.0);
        let neigh = random_neighborhood(&mut rng, n, 50.0);
        let [a, b, c] = mcrf_core::cpd_forms(&neigh, &set);
        for k in 0..n {
            let e = (a[k] - b[k]).abs().max((a[k] - c[k]).abs());
            worst = worst.max(e);
            if e > 1e-9 {
                return Err(format!("trial {t}: class {k}: forms {} {} {}", a[k], b[k], c[k]));
            }
        }
    }
    Ok(format!("{trials} reversible neighborhoods, max form spread {worst:.2e}"))
}

// ---------------------------------------------------------------- formulas

fn closed_form(kind: ModelKind, c: f64, d: f64, alpha: f64, theta: f64, w: f64, h: f64) -> f64 {
    let exp_base = 1.0 - (-3.0 * h / d).exp();
    let gau_base = 1.0 - (-(3.0 * h / d).powi(2)).exp();
    let sph_base = if h < d { 1.5 * h / d - 0.5 * (h / d).powi(3) } else { 1.0 };
    let g = || {
        if w == 0.0 {
            0.0
        } else {
            w * Gamma::new(alpha, 1.0 / theta).unwrap().pdf(h / d)
        }
    };
    match kind {
        ModelKind::ExponentialAuto => 1.0 - (1.0 - c) * exp_base,
        ModelKind::ExponentialCross => c * exp_base,
        ModelKind::GaussianCross => c * gau_base,
        ModelKind::SphericalCross => c * sph_base,
        ModelKind::GammaExponential => c * (exp_base + g()),
        ModelKind::GammaGaussian => c * (gau_base + g()),
        ModelKind::GammaSpherical => c * (sph_base + g()),
        _ => unreachable!(),
    }
}

pub fn formula_oracle(points: usize, seed: u64) -> CheckResult {
    const KINDS: [ModelKind; 7] = [
        ModelKind::ExponentialAuto,
        ModelKind::ExponentialCross,
        ModelKind::GaussianCross,
        ModelKind::SphericalCross,
        ModelKind::GammaExponential,
        ModelKind::GammaGaussian,
        ModelKind::GammaSpherical,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..points {
        let kind = KINDS[rng.random_range(0..KINDS.len())];
        let c = rng.random_range(0.001..0.999);
        let d = rng.random_range(0.5..120.0);
        let h = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..5.0 * d) };
        let (got, want) = if kind.is_gamma() {
            let alpha = rng.random_range(1.05..8.0);
            let theta = rng.random_range(0.1..2.0);
            let w = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..8.0) };
            let m = ModelDescriptor::gamma(kind, c, d, alpha, theta, w).unwrap();
            (eval_gamma_composite(&m, h).unwrap(), closed_form(kind, c, d, alpha, theta, w, h))
        } else {
            let m = ModelDescriptor::basic(kind, c, d).unwrap();
            (eval_basic(&m, h).unwrap(), closed_form(kind, c, d, 0.0, 0.0, 0.0, h))
        };
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("point {i}: {kind} c={c} d={d} h={h}: {got} vs closed form {want}"));
        }
    }
    Ok(format!("{points} points, max |diff| {worst:.2e}"))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), eps, depth)
}

/// `∫ f = 1` and `∫ x f = αθ` for the gamma shapes of the fixture rows
/// plus a few extremes.
pub fn gamma_integral() -> CheckResult {
    let params = [
        (4.0, 0.3),
        (2.5, 0.75),
        (1.8, 1.0),
        (2.0, 0.4),
        (2.5, 0.5),
        (2.0, 1.5),
        (5.0, 0.5),
        (6.0, 0.6),
        (3.0, 0.5),
        (1.1, 2.0),
        (20.0, 0.2),
    ];
    let mut worst = 0.0f64;
    for (alpha, theta) in params {
        let (alpha, theta): (f64, f64) = (alpha, theta);
        let upper = theta * (alpha + 40.0 * alpha.sqrt() + 60.0);
        let f = |x: f64| gamma_pdf(x, alpha, theta).unwrap();
        let mass = adaptive_simpson(&f, 0.0, upper, 1e-12, 60);
        let mean = adaptive_simpson(&|x: f64| x * f(x), 0.0, upper, 1e-12, 60);
        let e = (mass - 1.0).abs().max((mean - alpha * theta).abs() / (alpha * theta));
        worst = worst.max(e);
        if (mass - 1.0).abs() > 1e-6 || (mean - alpha * theta).abs() > 1e-6 {
            return Err(format!("alpha={alpha} theta={theta}: mass {mass}, mean {mean}"));
        }
    }
    Ok(format!("{} shapes, max error {worst:.2e}", params.len()))
}

// ---------------------------------------------------------------- fixture rows

/// `(label, tail, head, kind, sill, range, alpha, theta, weight)`; rest rows
/// carry their sill only.
pub type FixtureRow = (&'static str, usize, usize, ModelKind, f64, f64, f64, f64, f64);

pub const CORN_ROW: [FixtureRow; 7] = [
    ("p11", 0, 0, ModelKind::ExponentialAuto, 0.1115, 40.0, 0.0, 0.0, 0.0),
    ("p12", 0, 1, ModelKind::GammaExponential, 0.1765, 80.0, 4.0, 0.3, 1.4),
    ("p13", 0, 2, ModelKind::GammaSpherical, 0.1269, 40.0, 2.5, 0.75, 0.6),
    ("p14", 0, 3, ModelKind::GammaGaussian, 0.0604, 25.0, 1.8, 1.0, 1.5),
    ("p15", 0, 4, ModelKind::GammaExponential, 0.0139, 22.0, 2.0, 0.4, 3.0),
    ("p16", 0, 5, ModelKind::ExponentialCross, 0.1022, 40.0, 0.0, 0.0, 0.0),
    ("p17", 0, 6, ModelKind::Rest, 0.4086, 0.0, 0.0, 0.0, 0.0),
];

pub const FOREST_ROW: [FixtureRow; 7] = [
    ("p41", 3, 0, ModelKind::GammaExponential, 0.1006, 50.0, 2.5, 0.5, 1.5),
    ("p42", 3, 1, ModelKind::GammaExponential, 0.1620, 30.0, 2.0, 1.5, 2.0),
    ("p43", 3, 2, ModelKind::GammaExponential, 0.1341, 20.0, 2.5, 0.75, 1.0),
    ("p44", 3, 3, ModelKind::ExponentialAuto, 0.0838, 36.0, 0.0, 0.0, 0.0),
    ("p45", 3, 4, ModelKind::GammaExponential, 0.0139, 10.0, 2.0, 0.5, 4.0),
    ("p46", 3, 5, ModelKind::ExponentialCross, 0.1061, 36.0, 0.0, 0.0, 0.0),
    ("p47", 3, 6, ModelKind::Rest, 0.3995, 0.0, 0.0, 0.0, 0.0),
];

pub const WETLAND_ROW: [FixtureRow; 7] = [
    ("p51", 4, 0, ModelKind::GammaGaussian, 0.1006, 40.0, 2.5, 0.5, 2.0),
    ("p52", 4, 1, ModelKind::GammaGaussian, 0.162, 40.0, 5.0, 0.5, 3.0),
    ("p53", 4, 2, ModelKind::GammaExponential, 0.1341, 4.0, 6.0, 0.6, 8.0),
    ("p54", 4, 3, ModelKind::ExponentialCross, 0.0838, 10.0, 0.0, 0.0, 0.0),
    ("p55", 4, 4, ModelKind::ExponentialAuto, 0.0139, 18.0, 0.0, 0.0, 0.0),
    ("p56", 4, 5, ModelKind::GammaGaussian, 0.1061, 25.0, 3.0, 0.5, 2.0),
    ("p57", 4, 6, ModelKind::Rest, 0.3995, 0.0, 0.0, 0.0, 0.0),
];

pub const SOYBEAN_ROW: [FixtureRow; 6] = [
    ("p21", 1, 0, ModelKind::ExponentialCross, 0.2931, 15.0, 0.0, 0.0, 0.0),
    ("p22", 1, 1, ModelKind::ExponentialAuto, 0.4704, 20.0, 0.0, 0.0, 0.0),
    ("p23", 1, 2, ModelKind::ExponentialCross, 0.0044, 3.0, 0.0, 0.0, 0.0),
    ("p24", 1, 3, ModelKind::ExponentialCross, 0.0277, 10.0, 0.0, 0.0, 0.0),
    ("p25", 1, 4, ModelKind::SphericalCross, 0.0144, 6.0, 0.0, 0.0, 0.0),
    ("p26", 1, 5, ModelKind::Rest, 0.1899, 0.0, 0.0, 0.0, 0.0),
];

pub fn descriptor(row: &FixtureRow) -> ModelDescriptor {
    let &(_, _, _, kind, c, d, a, t, w) = row;
    match kind {
        ModelKind::Rest => ModelDescriptor::Rest,
        k if k.is_gamma() => ModelDescriptor::gamma(k, c, d, a, t, w).unwrap(),
        k => ModelDescriptor::basic(k, c, d).unwrap(),
    }
}

/// Row values of a table at lag `h`, rest entry filled as one minus the others.
pub fn fixture_row_values(rows: &[FixtureRow], h: f64) -> Vec<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .map(|r| match r.3 {
            ModelKind::Rest => f64::NAN,
            _ => descriptor(r).eval(h).unwrap(),
        })
        .collect();
    let others: f64 = v.iter().filter(|x| !x.is_nan()).sum();
    v.iter_mut().filter(|x| x.is_nan()).for_each(|x| *x = 1.0 - others);
    v
}

/// Origins and long-lag limits of every fixture descriptor. Basic kinds must
/// sit within 1e-3 of their sill at `10d` (spherical: exactly at `h ≥ d`);
/// rest entries must approach their sill by `h = 500`.
pub fn fixture_descriptors() -> CheckResult {
    let tables: [(&str, &[FixtureRow]); 4] =
        [("corn", &CORN_ROW), ("forest", &FOREST_ROW), ("wetland", &WETLAND_ROW), ("soybean", &SOYBEAN_ROW)];
    let mut checked = 0;
    for (name, rows) in tables {
        let origin = fixture_row_values(rows, 0.0);
        for (r, &v) in rows.iter().zip(&origin) {
            let want = if r.1 == r.2 { 1.0 } else { 0.0 };
            if (v - want).abs() > 1e-15 {
                return Err(format!("{name} row {}: value {v} at h=0, expected {want}", r.0));
            }
        }
        let far = fixture_row_values(rows, 500.0);
        for (r, &v) in rows.iter().zip(&far) {
            let descr = (r.3 != ModelKind::Rest).then(|| descriptor(r));
            match r.3 {
                ModelKind::Rest => {
                    if (v - r.4).abs() > 1e-3 {
                        return Err(format!("{name} row {}: rest {v} at h=500, sill {}", r.0, r.4));
                    }
                }
                ModelKind::SphericalCross => {
                    let m = descr.unwrap();
                    for h in [r.5, r.5 * 1.5, r.5 * 10.0] {
                        if m.eval(h).unwrap() != r.4 {
                            return Err(format!("{name} row {}: {} at h={h}, sill {}", r.0, m.eval(h).unwrap(), r.4));
                        }
                    }
                }
                k if k.is_basic() => {
                    let v = descr.unwrap().eval(10.0 * r.5).unwrap();
                    if (v - r.4).abs() > 1e-3 {
                        return Err(format!("{name} row {}: {v} at h=10d, sill {}", r.0, r.4));
                    }
                }
                _ => {
                    let v = descr.unwrap().eval(100.0 * r.5).unwrap();
                    if (v - r.4).abs() > 1e-3 {
                        return Err(format!("{name} row {}: {v} at h=100d, sill {}", r.0, r.4));
                    }
                }
            }
            checked += 1;
        }
    }
    let (peak_h, peak) = p12_peak();
    let at59 = descriptor(&CORN_ROW[1]).eval(59.0).unwrap();
    if !(peak > 0.1765 && (at59 - 0.3322).abs() < 1e-3) {
        return Err(format!("p12: {at59} at h=59 (expected 0.3322), maximum {peak} at h={peak_h}"));
    }
    Ok(format!("{checked} descriptors; p12 {at59:.4} at h=59, maximum {peak:.4} at h={peak_h:.2}"))
}

/// Maximum of the corn p12 curve by a 0.01 grid scan over `(0, 3d)`.
pub fn p12_peak() -> (f64, f64) {
    let m = descriptor(&CORN_ROW[1]);
    (1..24_000)
        .map(|i| {
            let h = i as f64 * 0.01;
            (h, m.eval(h).unwrap())
        })
        .fold((0.0, f64::MIN), |b, x| if x.1 > b.1 { x } else { b })
}

// ---------------------------------------------------------------- constraints

/// Independent sweep of raw entry values (no clamping) over `[0, lag_max]`.
pub fn constraint_sweep(label: &str, set: &TransiogramModelSet, lag_max: f64) -> CheckResult {
    let n = set.n_classes();
    let mut row = vec![0.0; n];
    let (mut worst_sum, mut min_entry) = (0.0f64, f64::INFINITY);
    let steps = (lag_max / 0.25).round() as usize;
    for i in 0..n {
        for s in 0..=steps {
            let h = s as f64 * 0.25;
            set.row_values(i, h, &mut row);
            let sum: f64 = row.iter().sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
            for (j, &v) in row.iter().enumerate() {
                min_entry = min_entry.min(v);
                if v < -1e-9 || v > 1.0 + 1e-9 {
                    return Err(format!("{label}: entry ({i}, {j}) = {v} at h={h}"));
                }
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("{label}: row {i} sums to {sum} at h={h}"));
            }
        }
    }
    Ok(format!("{label}: max |row sum - 1| {worst_sum:.1e}, min entry {min_entry:.4}"))
}

/// Seven-class set whose first row is the corn row; the other rows are plain
/// exponential rows (range 20) with sills at the corn row proportions, every
/// rest entry on class 7.
pub fn corn_row_set() -> TransiogramModelSet {
    let p: Vec<f64> = CORN_ROW.iter().map(|r| r.4).collect();
    let mut entries: Vec<ModelDescriptor> = CORN_ROW.iter().map(descriptor).collect();
    for i in 1..7 {
        for j in 0..7 {
            entries.push(if j == 6 {
                ModelDescriptor::Rest
            } else if i == j {
                ModelDescriptor::basic(ModelKind::ExponentialAuto, p[i], 20.0).unwrap()
            } else {
                ModelDescriptor::basic(ModelKind::ExponentialCross, p[j], 20.0).unwrap()
            });
        }
    }
    let marg = ProportionVector::new(p).unwrap();
    let names = ["corn", "soybean", "grass", "forest", "wetland", "urban", "other crops"];
    let classes = mcrf_core::ClassTable::new(
        names
            .iter()
            .enumerate()
            .map(|(id, name)| mcrf_core::ClassInfo {
                id,
                name: name.to_string(),
                role: if id == 3 || id == 4 { mcrf_core::ClassRole::Minor } else { mcrf_core::ClassRole::Major },
            })
            .collect(),
    )
    .unwrap();
    TransiogramModelSet::new(entries, vec![6; 7], marg, Some(classes)).unwrap()
}
