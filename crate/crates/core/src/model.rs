//! Ferromagnetic Ising models on partitioned graphs.
//!
//! The model assigns a configuration `sigma` the unnormalized log-probability
//! `sum_{(u,v) in E} beta_uv sigma_u sigma_v + sum_v gamma_v sigma_v`.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::graph::{PartitionedGraph, Vertex};

pub type Spin = i8;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} couplings (one per edge), got {got}")]
    CouplingCount { expected: usize, got: usize },
    #[error("expected {expected} fields (one per vertex), got {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("coupling on edge {edge} is {value}; ferromagnetic models need beta >= 0")]
    NegativeCoupling { edge: usize, value: f64 },
    #[error("{what} {index} is not finite")]
    NonFinite { what: &'static str, index: usize },
    #[error("spin configuration has {got} entries, model has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spin {value} at vertex {index} is not +1 or -1")]
    InvalidSpin { index: usize, value: Spin },
    #[error("coupling {0} must be finite and non-negative")]
    InvalidCoupling(f64),
    #[error("B/(n sqrt k) = {0} must lie in [0, 1)")]
    ScaleOutOfRange(f64),
}

/// One spin in {-1, +1} per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<Spin>);

impl SpinConfig {
    pub fn new(spins: Vec<Spin>) -> Result<Self, ModelError> {
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(ModelError::InvalidSpin { index, value });
        }
        Ok(SpinConfig(spins))
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfig(vec![1; n])
    }

    pub fn all_down(n: usize) -> Self {
        SpinConfig(vec![-1; n])
    }

    /// Independent fair coin per vertex.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        SpinConfig((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    /// Decodes a state index: bit `v` set means `sigma_v = +1`.
    pub fn from_index(n: usize, index: usize) -> Self {
        debug_assert!(n < usize::BITS as usize);
        SpinConfig((0..n).map(|v| if index >> v & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Inverse of [`SpinConfig::from_index`].
    pub fn to_index(&self) -> usize {
        assert!(self.0.len() < usize::BITS as usize, "too many spins to index");
        self.0.iter().enumerate().filter(|(_, &s)| s == 1).fold(0, |acc, (v, _)| acc | 1 << v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.0
    }

    #[inline]
    pub fn get(&self, v: Vertex) -> Spin {
        self.0[v as usize]
    }

    #[inline]
    pub fn set(&mut self, v: Vertex, spin: Spin) {
        assert!(spin == 1 || spin == -1, "spin must be +1 or -1");
        self.0[v as usize] = spin;
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Spin] {
        &mut self.0
    }

    pub fn negated(&self) -> Self {
        SpinConfig(self.0.iter().map(|s| -s).collect())
    }

    /// Mean spin.
    pub fn magnetization(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().map(|&s| s as i64).sum::<i64>() as f64 / self.0.len() as f64
    }
}

/// Graph plus per-edge couplings and per-vertex fields.
#[derive(Debug, Clone)]
pub struct IsingModel {
    graph: Arc<PartitionedGraph>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl IsingModel {
    /// Ferromagnetic model; rejects any negative coupling. Fields may have
    /// mixed signs.
    pub fn new(graph: Arc<PartitionedGraph>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self, ModelError> {
        let model = Self::new_signed(graph, beta, gamma)?;
        if let Some((edge, &value)) = model.beta.iter().enumerate().find(|(_, &b)| b < 0.0) {
            return Err(ModelError::NegativeCoupling { edge, value });
        }
        Ok(model)
    }

    /// Like [`IsingModel::new`] but accepts negative couplings. The Gibbs
    /// kernel is valid for such models; the Swendsen-Wang kernel is not, and
    /// treats negative couplings as never percolating.
    pub fn new_signed(graph: Arc<PartitionedGraph>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self, ModelError> {
        if beta.len() != graph.num_edges() {
            return Err(ModelError::CouplingCount { expected: graph.num_edges(), got: beta.len() });
        }
        if gamma.len() != graph.num_vertices() {
            return Err(ModelError::FieldCount { expected: graph.num_vertices(), got: gamma.len() });
        }
        if let Some(index) = beta.iter().position(|b| !b.is_finite()) {
            return Err(ModelError::NonFinite { what: "coupling", index });
        }
        if let Some(index) = gamma.iter().position(|g| !g.is_finite()) {
            return Err(ModelError::NonFinite { what: "field", index });
        }
        Ok(IsingModel { graph, beta, gamma })
    }

    /// Same coupling on every edge and same field on every vertex.
    pub fn uniform(graph: Arc<PartitionedGraph>, beta: f64, gamma: f64) -> Result<Self, ModelError> {
        let (m, n) = (graph.num_edges(), graph.num_vertices());
        Self::new(graph, vec![beta; m], vec![gamma; n])
    }

    pub fn graph(&self) -> &PartitionedGraph {
        &self.graph
    }

    pub fn shared_graph(&self) -> &Arc<PartitionedGraph> {
        &self.graph
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn has_zero_field(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }

    pub fn check_config(&self, sigma: &SpinConfig) -> Result<(), ModelError> {
        if sigma.len() != self.num_vertices() {
            return Err(ModelError::LengthMismatch { expected: self.num_vertices(), got: sigma.len() });
        }
        Ok(())
    }

    /// Unnormalized log-probability of `sigma`.
    pub fn log_weight(&self, sigma: &SpinConfig) -> Result<f64, ModelError> {
        self.check_config(sigma)?;
        let s = sigma.spins();
        let pair: f64 = self
            .graph
            .edges()
            .iter()
            .zip(&self.beta)
            .map(|(&(u, v), &b)| b * (s[u as usize] * s[v as usize]) as f64)
            .sum();
        let field: f64 = self.gamma.iter().zip(s).map(|(&g, &x)| g * x as f64).sum();
        Ok(pair + field)
    }
}

/// First and second moments `E[sigma_v]` and `E[sigma_u sigma_v]` (per edge).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mu_v: Vec<f64>,
    pub mu_uv: Vec<f64>,
}

impl Moments {
    pub fn zeros(graph: &PartitionedGraph) -> Self {
        Moments { mu_v: vec![0.0; graph.num_vertices()], mu_uv: vec![0.0; graph.num_edges()] }
    }

    /// Adds `weight * sigma` statistics into the running sums.
    pub fn accumulate(&mut self, graph: &PartitionedGraph, sigma: &SpinConfig, weight: f64) {
        let s = sigma.spins();
        for (m, &x) in self.mu_v.iter_mut().zip(s) {
            *m += weight * x as f64;
        }
        for (m, &(u, v)) in self.mu_uv.iter_mut().zip(graph.edges()) {
            *m += weight * (s[u as usize] * s[v as usize]) as f64;
        }
    }

    /// Sample means over a collection of configurations.
    pub fn of_samples<'a>(graph: &PartitionedGraph, samples: impl IntoIterator<Item = &'a SpinConfig>) -> Self {
        let mut sums = Moments::zeros(graph);
        let mut count = 0usize;
        for s in samples {
            sums.accumulate(graph, s, 1.0);
            count += 1;
        }
        if count > 0 {
            sums.scale(1.0 / count as f64);
        }
        sums
    }

    pub fn scale(&mut self, factor: f64) {
        self.mu_v.iter_mut().chain(self.mu_uv.iter_mut()).for_each(|m| *m *= factor);
    }
}

/// Retention probability `1 - exp(-2 beta)` of a monochromatic edge.
pub fn percolation_prob(beta: f64) -> Result<f64, ModelError> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(ModelError::InvalidCoupling(beta));
    }
    Ok(-(-2.0 * beta).exp_m1())
}

/// Coupling `-1/2 log(1 - B/(n sqrt k))`, whose percolation probability is
/// exactly `B/(n sqrt k)`.
pub fn scaled_beta(b: f64, n: usize, k: f64) -> Result<f64, ModelError> {
    let x = b / (n as f64 * k.sqrt());
    if !(x.is_finite() && (0.0..1.0).contains(&x)) || k.is_nan() || k <= 0.0 {
        return Err(ModelError::ScaleOutOfRange(x));
    }
    Ok(-0.5 * (-x).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_bipartite;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn single_edge() -> Arc<PartitionedGraph> {
        Arc::new(PartitionedGraph::unpartitioned(2, vec![(0, 1)]).unwrap())
    }

    #[test]
    fn log_weight_single_edge() {
        let m = IsingModel::new(single_edge(), vec![1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.log_weight(&SpinConfig::all_up(2)).unwrap(), 1.0);
        let m = IsingModel::new(single_edge(), vec![1.0], vec![0.5, -0.5]).unwrap();
        let sigma = SpinConfig::new(vec![1, -1]).unwrap();
        assert_eq!(m.log_weight(&sigma).unwrap(), 0.0);
        assert_eq!(m.log_weight(&SpinConfig::all_up(3)), Err(ModelError::LengthMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn construction_checks() {
        let g = single_edge();
        assert!(matches!(
            IsingModel::new(g.clone(), vec![-0.1], vec![0.0; 2]),
            Err(ModelError::NegativeCoupling { edge: 0, .. })
        ));
        assert!(IsingModel::new_signed(g.clone(), vec![-0.1], vec![0.0; 2]).is_ok());
        assert!(IsingModel::new(g.clone(), vec![0.1], vec![0.3, -0.3]).is_ok());
        assert!(matches!(IsingModel::new(g.clone(), vec![], vec![0.0; 2]), Err(ModelError::CouplingCount { .. })));
        assert!(matches!(IsingModel::new(g, vec![0.1], vec![f64::NAN, 0.0]), Err(ModelError::NonFinite { .. })));
        assert!(SpinConfig::new(vec![1, 0]).is_err());
    }

    #[test]
    fn percolation_prob_values() {
        assert_eq!(percolation_prob(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(percolation_prob(0.5).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(percolation_prob(0.5).unwrap(), 0.6321205588, epsilon = 1e-10);
        let beta = -0.5 * (1.0 - 2.0 / 100.0f64).ln();
        assert_abs_diff_eq!(percolation_prob(beta).unwrap(), 0.02, epsilon = 1e-15);
        assert!(percolation_prob(-1e-9).is_err());
        assert!(percolation_prob(f64::INFINITY).is_err());
    }

    #[test]
    fn scaled_beta_values() {
        assert_eq!(scaled_beta(0.0, 10, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(scaled_beta(1.0, 2, 1.0).unwrap(), -0.5 * 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(scaled_beta(1.0, 2, 1.0).unwrap(), 0.34657, epsilon = 1e-5);
        assert!(scaled_beta(2.0, 2, 1.0).is_err());
        assert!(scaled_beta(3.0, 2, 1.0).is_err());
    }

    #[test]
    fn scaled_beta_composition_identity() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            let n: usize = rng.random_range(2..5000);
            let k: f64 = rng.random_range(0.1..10.0);
            let limit = n as f64 * k.sqrt();
            let b: f64 = rng.random_range(0.0..0.999) * limit;
            let p = percolation_prob(scaled_beta(b, n, k).unwrap()).unwrap();
            assert_abs_diff_eq!(p, b / limit, epsilon = 1e-14);
        }
    }

    #[test]
    fn state_index_round_trip() {
        let sigma = SpinConfig::new(vec![1, -1, -1, 1, 1]).unwrap();
        assert_eq!(sigma.to_index(), 0b11001);
        assert_eq!(SpinConfig::from_index(5, 0b11001), sigma);
    }

    proptest! {
        #[test]
        fn zero_field_flip_symmetry(seed in any::<u64>(), bits in 0usize..1 << 7) {
            let g = Arc::new(complete_bipartite(3, 4).unwrap());
            let mut rng = stream_rng(seed, 0);
            let beta: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..2.0)).collect();
            let m = IsingModel::new(g, beta, vec![0.0; 7]).unwrap();
            let sigma = SpinConfig::from_index(7, bits);
            prop_assert_eq!(m.log_weight(&sigma).unwrap(), m.log_weight(&sigma.negated()).unwrap());
        }

        #[test]
        fn percolation_prob_monotone(a in 0.0f64..15.0, b in 0.0f64..15.0) {
            let (pa, pb) = (percolation_prob(a).unwrap(), percolation_prob(b).unwrap());
            prop_assert!((0.0..1.0).contains(&pa));
            if a <= b { prop_assert!(pa <= pb); }
        }
    }
}
