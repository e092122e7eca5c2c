//! Phase observables, grand coupling, percolation statistics and cut audits.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::graph::{complete_bipartite, GraphError, PartitionedGraph};
use crate::model::{scaled_beta, IsingModel, ModelError, Spin, SpinConfig};
use crate::oracle::{tv_between, ExactDistribution, OracleError};
use crate::rng::{ChainRng, StreamSeed};
use crate::samplers::{gibbs_updates_in_place, sw_percolate, ChainKind, SwendsenWang};
use crate::simplified_sw::PhasePoint;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Global majority spin (+1 on a tie) and the number of vertices holding it
/// in each partition, written into `counts`.
pub fn majority_counts(sigma: &SpinConfig, graph: &PartitionedGraph, counts: &mut Vec<usize>) -> Spin {
    let plus = sigma.spins().iter().filter(|&&s| s == 1).count();
    let majority: Spin = if 2 * plus >= sigma.len() { 1 } else { -1 };
    counts.clear();
    counts.resize(graph.num_partitions(), 0);
    for (&s, &p) in sigma.spins().iter().zip(graph.partition_labels()) {
        if s == majority {
            counts[p as usize] += 1;
        }
    }
    majority
}

/// Fraction of each partition carrying the global majority spin.
pub fn phase(sigma: &SpinConfig, graph: &PartitionedGraph) -> Vec<f64> {
    let mut counts = Vec::new();
    majority_counts(sigma, graph, &mut counts);
    counts.iter().zip(graph.partition_sizes()).map(|(&c, &size)| c as f64 / size as f64).collect()
}

/// The phase as `(alpha_L, alpha_R)`; `None` unless the graph has exactly
/// two partitions.
pub fn phase_point(sigma: &SpinConfig, graph: &PartitionedGraph) -> Option<PhasePoint> {
    match phase(sigma, graph).as_slice() {
        &[l, r] => Some(PhasePoint { alpha_l: l, alpha_r: r }),
        _ => None,
    }
}

/// Two copies of a chain driven by the same random numbers.
///
/// Swendsen-Wang copies share the uniform of every edge and of every
/// component's smallest vertex; Gibbs copies share the site and the uniform
/// of every update. Each copy on its own is a faithful run of the chain.
#[derive(Debug, Clone)]
pub struct GrandCoupling<'m> {
    model: &'m IsingModel,
    kind: ChainKind,
    x: SpinConfig,
    y: SpinConfig,
    sw: SwendsenWang,
    rng: ChainRng,
    steps: usize,
    met_at: Option<usize>,
}

impl<'m> GrandCoupling<'m> {
    pub fn new(model: &'m IsingModel, kind: ChainKind, x: SpinConfig, y: SpinConfig, rng: ChainRng) -> Self {
        assert_eq!(x.len(), model.num_vertices());
        assert_eq!(y.len(), model.num_vertices());
        let met_at = (x == y).then_some(0);
        GrandCoupling { model, kind, x, y, sw: SwendsenWang::new(), rng, steps: 0, met_at }
    }

    fn advance(&mut self, which_y: bool, rng: &mut ChainRng) {
        let state = if which_y { &mut self.y } else { &mut self.x };
        match self.kind {
            ChainKind::SwendsenWang => self.sw.step_in_place(self.model, state, rng),
            ChainKind::Gibbs => {
                gibbs_updates_in_place(self.model, state, self.model.num_vertices(), rng);
            }
        }
    }

    /// One step of both copies (a full sweep for Gibbs). Returns true once
    /// the copies agree.
    pub fn step(&mut self) -> bool {
        let mut rng_y = self.rng.clone();
        let mut rng_x = std::mem::replace(&mut self.rng, rng_y.clone());
        self.advance(false, &mut rng_x);
        self.advance(true, &mut rng_y);
        debug_assert!(rng_x == rng_y, "coupled copies consumed different amounts of randomness");
        self.rng = rng_x;
        self.steps += 1;
        let equal = self.x == self.y;
        if let Some(t) = self.met_at {
            assert!(equal, "coupled chains separated at step {} after meeting at step {t}", self.steps);
        } else if equal {
            self.met_at = Some(self.steps);
        }
        equal
    }

    pub fn states(&self) -> (&SpinConfig, &SpinConfig) {
        (&self.x, &self.y)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn met_at(&self) -> Option<usize> {
        self.met_at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceReport {
    /// First step at which the copies agree; `None` if censored.
    pub steps_to_coalesce: Option<usize>,
    pub max_steps: usize,
    /// Max-norm phase distance after each step, when requested.
    pub trajectory: Option<Vec<f64>>,
}

impl CoalescenceReport {
    pub fn censored(&self) -> bool {
        self.steps_to_coalesce.is_none()
    }

    /// Coalescence step, or `max_steps` for a censored run.
    pub fn steps_or_cap(&self) -> usize {
        self.steps_to_coalesce.unwrap_or(self.max_steps)
    }
}

fn run_coalescence(
    model: &IsingModel,
    seed: StreamSeed,
    max_steps: usize,
    kind: ChainKind,
    trace: bool,
) -> CoalescenceReport {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    let n = model.num_vertices();
    let mut coupling = GrandCoupling::new(model, kind, SpinConfig::all_up(n), SpinConfig::all_down(n), seed.rng());
    let mut trajectory = trace.then(Vec::new);
    let mut steps_to_coalesce = None;
    let mut buf = (Vec::new(), Vec::new());
    while coupling.steps() < max_steps {
        let met = coupling.step();
        if let Some(t) = trajectory.as_mut() {
            let (x, y) = coupling.states();
            majority_counts(x, model.graph(), &mut buf.0);
            majority_counts(y, model.graph(), &mut buf.1);
            let d = buf
                .0
                .iter()
                .zip(&buf.1)
                .zip(model.graph().partition_sizes())
                .map(|((&a, &b), &s)| (a as f64 - b as f64).abs() / s as f64)
                .fold(0.0, f64::max);
            t.push(d);
        }
        if met {
            steps_to_coalesce = Some(coupling.steps());
            break;
        }
    }
    CoalescenceReport { steps_to_coalesce, max_steps, trajectory }
}

/// Steps until grand-coupled copies started from all +1 and all -1 agree.
pub fn coalescence_time(model: &IsingModel, seed: StreamSeed, max_steps: usize, kind: ChainKind) -> CoalescenceReport {
    run_coalescence(model, seed, max_steps, kind, false)
}

/// As [`coalescence_time`], also recording the phase distance per step.
pub fn coalescence_trace(model: &IsingModel, seed: StreamSeed, max_steps: usize, kind: ChainKind) -> CoalescenceReport {
    run_coalescence(model, seed, max_steps, kind, true)
}

/// Zero-field model on `K_{n, round(k n)}` with every coupling set so the
/// percolation probability is `B / (n sqrt k)`.
pub fn bipartite_scaled_model(n: usize, k: f64, b: f64) -> Result<IsingModel, DiagnosticsError> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(DiagnosticsError::InvalidArgument(format!("k must be >= 1 (got {k})")));
    }
    let m = (k * n as f64).round() as usize;
    let graph = Arc::new(complete_bipartite(n, m)?);
    let beta = scaled_beta(b, n, k)?;
    Ok(IsingModel::uniform(graph, beta, 0.0)?)
}

/// One row of a coalescence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceRow {
    pub n: usize,
    pub k: f64,
    pub b: f64,
    pub chain: ChainKind,
    pub seed: u64,
    pub steps: usize,
    pub censored: bool,
}

/// Percolation statistics of one Swendsen-Wang percolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    /// Vertices of the largest component in each partition.
    pub giant_size_per_partition: Vec<usize>,
    pub giant_size: usize,
    /// Sum of squared sizes of all components except the largest.
    pub sum_sq_small: u64,
    pub num_components: usize,
}

/// Percolates `sigma` once and summarizes the resulting components.
pub fn component_stats<R: Rng + ?Sized>(model: &IsingModel, sigma: &SpinConfig, rng: &mut R) -> ComponentStats {
    let perc = sw_percolate(model, sigma, rng);
    let graph = model.graph();
    let n = graph.num_vertices();
    let mut sizes = vec![0usize; n];
    for &c in &perc.component_of {
        sizes[c as usize] += 1;
    }
    let mut giant = 0;
    let mut num_components = 0;
    let mut sum_sq = 0u64;
    for (c, &s) in sizes.iter().enumerate() {
        if s > 0 {
            num_components += 1;
            sum_sq += (s * s) as u64;
            if s > sizes[giant] {
                giant = c;
            }
        }
    }
    let mut per_partition = vec![0usize; graph.num_partitions()];
    if n > 0 {
        for (v, &c) in perc.component_of.iter().enumerate() {
            if c as usize == giant {
                per_partition[graph.partition_of(v as u32) as usize] += 1;
            }
        }
    }
    let giant_size = if n > 0 { sizes[giant] } else { 0 };
    ComponentStats {
        giant_size_per_partition: per_partition,
        giant_size,
        sum_sq_small: sum_sq - (giant_size * giant_size) as u64,
        num_components,
    }
}

/// Result of a randomized cut audit.
#[derive(Debug, Clone, PartialEq)]
pub struct CutAudit {
    pub passed: bool,
    pub trials: usize,
    /// Smallest observed `cut_{G[U]}(S) / n`.
    pub min_cut_over_n: f64,
    pub worst_u_size: usize,
    pub worst_s_size: usize,
}

/// Samples random `U` with `|U| >= n / 10` and `S` within `U` with both
/// `|S|` and `|U \ S|` at least `M^2`, and checks `cut_{G[U]}(S) >= M n`.
///
/// This is an empirical audit, not a certificate.
pub fn cut_audit<R: Rng + ?Sized>(
    graph: &PartitionedGraph,
    num_trials: usize,
    rng: &mut R,
    m_threshold: f64,
) -> Result<CutAudit, DiagnosticsError> {
    let n = graph.num_vertices();
    if !(m_threshold.is_finite() && m_threshold > 0.0) {
        return Err(DiagnosticsError::InvalidArgument(format!("threshold must be positive (got {m_threshold})")));
    }
    let side = (m_threshold * m_threshold).ceil() as usize;
    let u_min = n.div_ceil(10).max(2 * side);
    if u_min > n || num_trials == 0 {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "need n >= {u_min} vertices for sides of {side} (n = {n}) and at least one trial"
        )));
    }
    let mut in_u = vec![false; n];
    let mut in_s = vec![false; n];
    let mut worst =
        CutAudit { passed: true, trials: num_trials, min_cut_over_n: f64::INFINITY, worst_u_size: 0, worst_s_size: 0 };
    for _ in 0..num_trials {
        let u_size = rng.random_range(u_min..=n);
        let s_size = rng.random_range(side..=u_size - side);
        let members = sample(rng, n, u_size).into_vec();
        in_u.iter_mut().for_each(|x| *x = false);
        in_s.iter_mut().for_each(|x| *x = false);
        for (i, &v) in members.iter().enumerate() {
            in_u[v] = true;
            in_s[v] = i < s_size;
        }
        let cut = graph
            .edges()
            .iter()
            .filter(|&&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                in_u[a] && in_u[b] && in_s[a] != in_s[b]
            })
            .count();
        let ratio = cut as f64 / n as f64;
        if ratio < worst.min_cut_over_n {
            worst.min_cut_over_n = ratio;
            worst.worst_u_size = u_size;
            worst.worst_s_size = s_size;
        }
    }
    worst.passed = worst.min_cut_over_n >= m_threshold;
    Ok(worst)
}

/// Visit counts over the `2^n` states of a small model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl StateHistogram {
    pub fn new(num_vertices: usize) -> Self {
        assert!(num_vertices <= crate::oracle::MAX_ENUM_VERTICES, "too many vertices for a state histogram");
        StateHistogram { counts: vec![0; 1 << num_vertices], total: 0 }
    }

    pub fn record(&mut self, sigma: &SpinConfig) {
        self.counts[sigma.to_index()] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// Total variation distance between an empirical histogram and an exact
/// distribution.
pub fn tv_distance(empirical: &StateHistogram, exact: &ExactDistribution) -> Result<f64, OracleError> {
    tv_between(&empirical.frequencies(), &exact.probabilities)
}
