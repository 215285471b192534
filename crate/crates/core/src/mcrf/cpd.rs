//! Local conditional probability distributions of the MCRF model.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::ClassId;
use crate::mcrf::neighborhood::{Neighbor, Neighborhood};
use crate::modelset::TransiogramModelSet;

/// Transition probabilities as seen by the CPD.
pub trait TransitionSource {
    fn n_classes(&self) -> usize;
    fn marginal(&self, class: ClassId) -> f64;
    /// `p_{tail,head}` at the neighbor's lag.
    fn transition(&self, tail: ClassId, head: ClassId, at: &Neighbor) -> f64;
}

impl TransitionSource for TransiogramModelSet {
    fn n_classes(&self) -> usize {
        TransiogramModelSet::n_classes(self)
    }

    fn marginal(&self, class: ClassId) -> f64 {
        self.marginals().get(class)
    }

    fn transition(&self, tail: ClassId, head: ClassId, at: &Neighbor) -> f64 {
        self.probability(tail, head, at.lag)
    }
}

/// Lag-independent transition matrix, for tests and hand calculations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTransitions {
    n: usize,
    p: Vec<f64>,
    marginals: Vec<f64>,
}

impl ConstantTransitions {
    /// `p` is row-major `n × n`.
    pub fn new(p: Vec<f64>, marginals: Vec<f64>) -> Result<Self> {
        let n = marginals.len();
        if p.len() != n * n {
            return Err(Error::Argument(format!("{} transition entries for {n} classes", p.len())));
        }
        Ok(Self { n, p, marginals })
    }
}

impl TransitionSource for ConstantTransitions {
    fn n_classes(&self) -> usize {
        self.n
    }

    fn marginal(&self, class: ClassId) -> f64 {
        self.marginals[class]
    }

    fn transition(&self, tail: ClassId, head: ClassId, _at: &Neighbor) -> f64 {
        self.p[tail * self.n + head]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    probs: Vec<f64>,
}

impl ConditionalDistribution {
    /// Checks entries are nonnegative and sum to one within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Argument("empty distribution".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Argument(format!("negative or NaN probability in {probs:?}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("probabilities sum to {s}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Writes the normalized CPD into `out`. Returns `false` when every numerator
/// vanished and the marginals were used instead. An empty neighborhood also
/// yields the marginals (returning `true`).
pub fn local_cpd_into<S: TransitionSource + ?Sized>(neigh: &Neighborhood, models: &S, out: &mut [f64]) -> bool {
    let n = models.n_classes();
    let nb = neigh.neighbors();
    if nb.is_empty() {
        marginals_into(models, out);
        return true;
    }
    let d = neigh.designated_from();
    let from = &nb[d];
    let mut sum = 0.0;
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let mut v = models.transition(from.class, k, from);
        for (i, other) in nb.iter().enumerate() {
            if i != d {
                v *= models.transition(k, other.class, other);
            }
        }
        *o = v;
        sum += v;
    }
    if sum > 0.0 && sum.is_finite() {
        out[..n].iter_mut().for_each(|v| *v /= sum);
        true
    } else {
        marginals_into(models, out);
        false
    }
}

fn marginals_into<S: TransitionSource + ?Sized>(models: &S, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate().take(models.n_classes()) {
        *o = models.marginal(k);
    }
}

/// `probs[k] ∝ p_{l1,k}(h1) · Π_{i≥2} p_{k,l_i}(h_i)`, with `l1` the
/// designated neighbor. Falls back to the marginals when all numerators are 0.
pub fn local_cpd(neigh: &Neighborhood, models: &TransiogramModelSet) -> Result<ConditionalDistribution> {
    if neigh.is_empty() {
        return Err(Error::Argument("local CPD needs at least one neighbor".into()));
    }
    check_validated(models, neigh.max_lag())?;
    let mut out = vec![0.0; models.n_classes()];
    local_cpd_into(neigh, models, &mut out);
    Ok(ConditionalDistribution { probs: out })
}

pub(crate) fn check_validated(models: &TransiogramModelSet, lag: f64) -> Result<()> {
    match models.validated_lag_max() {
        Some(l) if l >= lag => Ok(()),
        Some(l) => Err(Error::Config(format!("model set is validated to lag {l}, needed {lag}"))),
        None => Err(Error::Config("model set has not been validated".into())),
    }
}

/// The three algebraically equivalent forms of the MCRF CPD, each normalized:
/// the designated-neighbor form, `p_k · Π p_{k,l_i}`, and
/// `p_k^{1−m} · Π p_{l_i,k}`. They agree when the transitions are reversible.
pub fn cpd_forms<S: TransitionSource + ?Sized>(neigh: &Neighborhood, models: &S) -> [Vec<f64>; 3] {
    let n = models.n_classes();
    let nb = neigh.neighbors();
    let m = nb.len() as i32;
    let mut a = vec![0.0; n];
    local_cpd_into(neigh, models, &mut a);
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for k in 0..n {
        let pk = models.marginal(k);
        b[k] = pk * nb.iter().map(|x| models.transition(k, x.class, x)).product::<f64>();
        c[k] = if pk > 0.0 {
            pk.powi(1 - m) * nb.iter().map(|x| models.transition(x.class, k, x)).product::<f64>()
        } else {
            0.0
        };
    }
    for v in [&mut b, &mut c] {
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    }
    [a, b, c]
}

/// Inverse-CDF lookup: the first class whose cumulative probability exceeds `u`.
pub fn class_for_uniform(probs: &[f64], u: f64) -> ClassId {
    let mut cum = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = k;
            if u < cum {
                return k;
            }
        }
    }
    last
}

/// Draws a class with one uniform variate.
pub fn draw_class<R: Rng + ?Sized>(dist: &ConditionalDistribution, rng: &mut R) -> ClassId {
    class_for_uniform(&dist.probs, rng.random::<f64>())
}
