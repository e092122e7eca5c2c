//! Exact computations on tiny models by full enumeration.
//!
//! States are indexed by the integer whose bit `v` is set iff `sigma_v = +1`
//! (see [`SpinConfig::from_index`]).

use rand::Rng;
use thiserror::Error;

use crate::diagnostics::majority_counts;
use crate::graph::DisjointSets;
use crate::model::{IsingModel, ModelError, Moments, SpinConfig};
use crate::samplers::{gibbs_prob_plus, logistic};
use crate::simplified_sw::PhasePoint;

/// Largest vertex count accepted by the distribution routines.
pub const MAX_ENUM_VERTICES: usize = 20;
/// Largest vertex count accepted by the Swendsen-Wang kernel enumeration.
pub const MAX_KERNEL_VERTICES: usize = 10;
/// Largest number of monochromatic edges the kernel enumeration will expand.
pub const MAX_KERNEL_MONOCHROMATIC: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{what} needs at most {max} vertices (model has {n})")]
    TooManyVertices { what: &'static str, n: usize, max: usize },
    #[error("configuration has {m} monochromatic edges; enumeration is limited to {max}")]
    TooManyMonochromatic { m: usize, max: usize },
    #[error("phase distribution needs exactly 2 partitions (graph has {0})")]
    NotBipartition(usize),
    #[error("distributions have different support sizes ({0} vs {1})")]
    SupportMismatch(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_size(what: &'static str, n: usize, max: usize) -> Result<(), OracleError> {
    if n > max {
        Err(OracleError::TooManyVertices { what, n, max })
    } else {
        Ok(())
    }
}

/// The normalized distribution over all `2^n` configurations.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub probabilities: Vec<f64>,
    pub log_partition: f64,
    cumulative: Vec<f64>,
}

impl ExactDistribution {
    pub fn num_vertices(&self) -> usize {
        self.probabilities.len().trailing_zeros() as usize
    }

    pub fn prob(&self, sigma: &SpinConfig) -> f64 {
        self.probabilities[sigma.to_index()]
    }

    /// Draws an exact sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpinConfig {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.probabilities.len() - 1);
        SpinConfig::from_index(self.num_vertices(), idx)
    }

    /// `E[f(sigma)]`.
    pub fn expectation(&self, mut f: impl FnMut(&SpinConfig) -> f64) -> f64 {
        let n = self.num_vertices();
        self.probabilities.iter().enumerate().map(|(i, &p)| p * f(&SpinConfig::from_index(n, i))).sum()
    }
}

/// Unnormalized log weight of every state, using bit arithmetic.
fn log_weights(model: &IsingModel) -> Vec<f64> {
    let n = model.num_vertices();
    let edges = model.graph().edges();
    let beta = model.beta();
    let gamma = model.gamma();
    let spin = |idx: usize, v: u32| if idx >> v & 1 == 1 { 1.0 } else { -1.0 };
    (0..1usize << n)
        .map(|idx| {
            let pair: f64 = edges.iter().zip(beta).map(|(&(u, v), &b)| b * spin(idx, u) * spin(idx, v)).sum();
            let field: f64 = gamma.iter().enumerate().map(|(v, &g)| g * spin(idx, v as u32)).sum();
            pair + field
        })
        .collect()
}

/// Exact distribution of the model, normalized with log-sum-exp.
pub fn brute_force_distribution(model: &IsingModel) -> Result<ExactDistribution, OracleError> {
    check_size("exact enumeration", model.num_vertices(), MAX_ENUM_VERTICES)?;
    let lw = log_weights(model);
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = lw.iter().map(|&w| (w - max).exp()).sum();
    let log_partition = max + sum.ln();
    let probabilities: Vec<f64> = lw.iter().map(|&w| (w - log_partition).exp()).collect();
    let cumulative = probabilities
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    Ok(ExactDistribution { probabilities, log_partition, cumulative })
}

/// Exact `E[sigma_v]` and `E[sigma_u sigma_v]`.
pub fn exact_marginals(model: &IsingModel) -> Result<Moments, OracleError> {
    let dist = brute_force_distribution(model)?;
    let graph = model.graph();
    let mut m = Moments::zeros(graph);
    let n = model.num_vertices();
    for (idx, &p) in dist.probabilities.iter().enumerate() {
        m.accumulate(graph, &SpinConfig::from_index(n, idx), p);
    }
    Ok(m)
}

/// Exact row `P(sigma, .)` of the Swendsen-Wang kernel.
///
/// Sums over every retained subset of the monochromatic edges and, for each,
/// over the independent component spins.
pub fn sw_transition_row(model: &IsingModel, sigma: &SpinConfig) -> Result<Vec<f64>, OracleError> {
    let n = model.num_vertices();
    check_size("the Swendsen-Wang kernel", n, MAX_KERNEL_VERTICES)?;
    model.check_config(sigma)?;
    let edges = model.graph().edges();
    let mono: Vec<(u32, u32, f64)> = edges
        .iter()
        .zip(model.beta())
        .filter(|(&(u, v), _)| sigma.get(u) == sigma.get(v))
        .map(|(&(u, v), &b)| (u, v, (-(-2.0 * b).exp_m1()).max(0.0)))
        .collect();
    if mono.len() > MAX_KERNEL_MONOCHROMATIC {
        return Err(OracleError::TooManyMonochromatic { m: mono.len(), max: MAX_KERNEL_MONOCHROMATIC });
    }

    let gamma = model.gamma();
    let mut row = vec![0.0; 1 << n];
    let mut sets = DisjointSets::new(n);
    let mut labels = Vec::new();
    let mut partial: Vec<(usize, f64)> = Vec::with_capacity(1 << n);
    let mut next: Vec<(usize, f64)> = Vec::with_capacity(1 << n);
    for subset in 0u32..1 << mono.len() {
        let mut weight = 1.0;
        sets.reset(n);
        for (i, &(u, v, p)) in mono.iter().enumerate() {
            if subset >> i & 1 == 1 {
                weight *= p;
                sets.union(u, v);
            } else {
                weight *= 1.0 - p;
            }
        }
        if weight == 0.0 {
            continue;
        }
        sets.canonical_labels(&mut labels);
        partial.clear();
        partial.push((0, weight));
        for c in 0..n {
            if labels[c] as usize != c {
                continue;
            }
            let mut mask = 0usize;
            let mut field = 0.0;
            for (v, &l) in labels.iter().enumerate() {
                if l as usize == c {
                    mask |= 1 << v;
                    field += gamma[v];
                }
            }
            let q = logistic(2.0 * field);
            next.clear();
            for &(state, w) in &partial {
                next.push((state | mask, w * q));
                next.push((state, w * (1.0 - q)));
            }
            std::mem::swap(&mut partial, &mut next);
        }
        for &(state, w) in &partial {
            row[state] += w;
        }
    }
    Ok(row)
}

/// Full Swendsen-Wang transition matrix, row `i` for state index `i`.
pub fn sw_transition_matrix(model: &IsingModel) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = model.num_vertices();
    check_size("the Swendsen-Wang kernel", n, MAX_KERNEL_VERTICES)?;
    (0..1usize << n).map(|i| sw_transition_row(model, &SpinConfig::from_index(n, i))).collect()
}

/// Exact single-site Gibbs kernel at `v`: the two reachable states and
/// their probabilities, as `[(index with sigma_v = +1, p), (index with -1, 1 - p)]`.
pub fn gibbs_site_row(model: &IsingModel, sigma: &SpinConfig, v: u32) -> Result<[(usize, f64); 2], OracleError> {
    check_size("the Gibbs kernel", model.num_vertices(), MAX_ENUM_VERTICES)?;
    model.check_config(sigma)?;
    let p = gibbs_prob_plus(model, sigma, v);
    let idx = sigma.to_index();
    Ok([(idx | 1 << v, p), (idx & !(1 << v), 1.0 - p)])
}

/// Exact row of one random-scan Gibbs update (site chosen uniformly).
pub fn gibbs_transition_row(model: &IsingModel, sigma: &SpinConfig) -> Result<Vec<f64>, OracleError> {
    let n = model.num_vertices();
    check_size("the Gibbs kernel", n, MAX_KERNEL_VERTICES)?;
    let mut row = vec![0.0; 1 << n];
    for v in 0..n as u32 {
        for (state, p) in gibbs_site_row(model, sigma, v)? {
            row[state] += p / n as f64;
        }
    }
    Ok(row)
}

/// Probability mass of one phase value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMass {
    /// Majority-spin vertex counts in the two partitions.
    pub counts: (usize, usize),
    pub point: PhasePoint,
    pub probability: f64,
}

/// Distribution of the phase under the model, sorted by counts.
pub fn phase_distribution(model: &IsingModel) -> Result<Vec<PhaseMass>, OracleError> {
    let graph = model.graph();
    if graph.num_partitions() != 2 {
        return Err(OracleError::NotBipartition(graph.num_partitions()));
    }
    let dist = brute_force_distribution(model)?;
    let sizes = graph.partition_sizes();
    let (l, r) = (sizes[0], sizes[1]);
    let mut table = vec![0.0; (l + 1) * (r + 1)];
    let n = model.num_vertices();
    let mut counts = Vec::with_capacity(2);
    for (idx, &p) in dist.probabilities.iter().enumerate() {
        majority_counts(&SpinConfig::from_index(n, idx), graph, &mut counts);
        table[counts[0] * (r + 1) + counts[1]] += p;
    }
    Ok(table
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| {
            let (a, b) = (i / (r + 1), i % (r + 1));
            PhaseMass {
                counts: (a, b),
                point: PhasePoint { alpha_l: a as f64 / l as f64, alpha_r: b as f64 / r as f64 },
                probability: p,
            }
        })
        .collect())
}

/// Total variation distance `1/2 sum |p - q|`.
pub fn tv_between(p: &[f64], q: &[f64]) -> Result<f64, OracleError> {
    if p.len() != q.len() {
        return Err(OracleError::SupportMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
