//! Contrastive-divergence parameter learning with persistent particles.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::PartitionedGraph;
use crate::model::{IsingModel, ModelError, Moments, SpinConfig};
use crate::rng::{stream_rng, ChainRng};
use crate::samplers::{ChainKind, ChainSampler, MarkovKernel, SwendsenWang};

#[derive(Debug, Error, PartialEq)]
pub enum LearningError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index} has {got} spins, expected {expected}")]
    RaggedDataset { index: usize, expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch in {what}: {left} vs {right}")]
    DimensionMismatch { what: &'static str, left: usize, right: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Step size as a function of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `eta0 / (1 + i / tau)`.
    InverseDecay {
        eta0: f64,
        tau: f64,
    },
}

impl StepSize {
    pub fn at(&self, i: usize) -> f64 {
        match *self {
            StepSize::Constant(eta) => eta,
            StepSize::InverseDecay { eta0, tau } => eta0 / (1.0 + i as f64 / tau),
        }
    }
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Constant(0.05)
    }
}

/// Hyperparameters of contrastive divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct CDConfig {
    /// Number of gradient updates.
    pub n_iter: usize,
    pub step: StepSize,
    /// Chain steps per update: Swendsen-Wang steps, or single-site Gibbs
    /// updates.
    pub k: usize,
    /// Number of persistent particles.
    pub n_particles: usize,
    /// Project couplings onto `beta >= 0` after each update.
    pub clamp_beta: bool,
    /// Record errors every this many iterations (when a reference is given).
    pub trace_every: usize,
}

impl Default for CDConfig {
    fn default() -> Self {
        CDConfig { n_iter: 1000, step: StepSize::default(), k: 1, n_particles: 100, clamp_beta: true, trace_every: 1 }
    }
}

impl CDConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |msg: String| Err(LearningError::InvalidConfig(msg));
        if self.n_iter == 0 || self.k == 0 || self.n_particles == 0 || self.trace_every == 0 {
            return bad("n_iter, k, n_particles and trace_every must all be at least 1".into());
        }
        match self.step {
            StepSize::Constant(eta) if !(eta.is_finite() && eta >= 0.0) => bad(format!("step size {eta}")),
            StepSize::InverseDecay { eta0, tau } if !(eta0.is_finite() && eta0 >= 0.0 && tau > 0.0) => {
                bad(format!("decay schedule eta0={eta0} tau={tau}"))
            }
            _ => Ok(()),
        }
    }
}

/// Samples over one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<SpinConfig>,
}

impl Dataset {
    pub fn new(samples: Vec<SpinConfig>) -> Result<Self, LearningError> {
        let first = samples.first().ok_or(LearningError::EmptyDataset)?.len();
        if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != first) {
            return Err(LearningError::RaggedDataset { index, expected: first, got: s.len() });
        }
        Ok(Dataset { samples })
    }

    pub fn samples(&self) -> &[SpinConfig] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.samples[0].len()
    }
}

/// Estimated couplings and fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ParamEstimate {
    pub fn zeros(graph: &PartitionedGraph) -> Self {
        ParamEstimate { beta: vec![0.0; graph.num_edges()], gamma: vec![0.0; graph.num_vertices()] }
    }

    pub fn of_model(model: &IsingModel) -> Self {
        ParamEstimate { beta: model.beta().to_vec(), gamma: model.gamma().to_vec() }
    }
}

/// Sample means of `sigma_v` and `sigma_u sigma_v`.
pub fn empirical_moments(dataset: &Dataset, graph: &PartitionedGraph) -> Result<Moments, LearningError> {
    if dataset.num_vertices() != graph.num_vertices() {
        return Err(LearningError::DimensionMismatch {
            what: "dataset vs graph",
            left: dataset.num_vertices(),
            right: graph.num_vertices(),
        });
    }
    Ok(Moments::of_samples(graph, dataset.samples()))
}

/// Swendsen-Wang samples: `burn_in` steps from a uniform random start, then
/// a sample, then `thin` steps between consecutive samples.
pub fn generate_dataset<R: Rng + ?Sized>(
    model: &IsingModel,
    n_samples: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<Dataset, LearningError> {
    if n_samples == 0 || thin == 0 {
        return Err(LearningError::InvalidConfig("n_samples and thin must be at least 1".into()));
    }
    let mut sw = SwendsenWang::new();
    let mut sigma = SpinConfig::random(model.num_vertices(), rng);
    for _ in 0..burn_in {
        sw.step_in_place(model, &mut sigma, rng);
    }
    let mut samples = Vec::with_capacity(n_samples);
    samples.push(sigma.clone());
    while samples.len() < n_samples {
        for _ in 0..thin {
            sw.step_in_place(model, &mut sigma, rng);
        }
        samples.push(sigma.clone());
    }
    Dataset::new(samples)
}

fn check_dims(truth: &[f64], estimate: &[f64], what: &'static str) -> Result<(), LearningError> {
    if truth.len() != estimate.len() {
        return Err(LearningError::DimensionMismatch { what, left: truth.len(), right: estimate.len() });
    }
    Ok(())
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `sum_v |gamma_v - gamma_hat_v| / |V|`.
pub fn field_error(truth: &ParamEstimate, estimate: &ParamEstimate) -> Result<f64, LearningError> {
    check_dims(&truth.gamma, &estimate.gamma, "fields")?;
    Ok(mean_abs_diff(&truth.gamma, &estimate.gamma))
}

/// `sum_{(u,v)} |beta_uv - beta_hat_uv| / |E|`.
pub fn coupling_error(truth: &ParamEstimate, estimate: &ParamEstimate) -> Result<f64, LearningError> {
    check_dims(&truth.beta, &estimate.beta, "couplings")?;
    Ok(mean_abs_diff(&truth.beta, &estimate.beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// 1-based iteration after which the errors were measured.
    pub iteration: usize,
    pub field_error: f64,
    pub coupling_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CDOutcome {
    pub estimate: ParamEstimate,
    /// Errors against the reference, when one was supplied.
    pub trace: Vec<TracePoint>,
    /// Work units spent in the inner chain (see [`ChainSampler`]).
    pub chain_work: u64,
}

/// Contrastive divergence on `dataset` with the given chain.
///
/// The generator only supplies a root seed; particle `i` then draws from its
/// own stream, so results do not depend on the thread count.
pub fn cd_learn<R: Rng + ?Sized>(
    dataset: &Dataset,
    graph: Arc<PartitionedGraph>,
    config: &CDConfig,
    kind: ChainKind,
    rng: &mut R,
    reference: Option<&ParamEstimate>,
) -> Result<CDOutcome, LearningError> {
    let target = empirical_moments(dataset, &graph)?;
    cd_learn_from(&target, graph, config, ChainSampler::new(kind), rng.random(), None, reference)
}

/// Contrastive divergence towards fixed target moments with any kernel.
///
/// Starts from `start` (zeros if `None`). Particles start uniformly at
/// random.
pub fn cd_learn_from<K>(
    target: &Moments,
    graph: Arc<PartitionedGraph>,
    config: &CDConfig,
    kernel: K,
    root_seed: u64,
    start: Option<ParamEstimate>,
    reference: Option<&ParamEstimate>,
) -> Result<CDOutcome, LearningError>
where
    K: MarkovKernel + Clone + Send,
{
    config.validate()?;
    check_dims(&target.mu_v, &vec![0.0; graph.num_vertices()], "target fields")?;
    check_dims(&target.mu_uv, &vec![0.0; graph.num_edges()], "target couplings")?;
    let mut est = start.unwrap_or_else(|| ParamEstimate::zeros(&graph));
    check_dims(&est.gamma, &target.mu_v, "start fields")?;
    check_dims(&est.beta, &target.mu_uv, "start couplings")?;
    if let Some(r) = reference {
        check_dims(&r.gamma, &est.gamma, "reference fields")?;
        check_dims(&r.beta, &est.beta, "reference couplings")?;
    }

    let n = graph.num_vertices();
    let mut particles: Vec<(SpinConfig, ChainRng, K)> = (0..config.n_particles)
        .map(|i| {
            let mut rng = stream_rng(root_seed, i as u64);
            (SpinConfig::random(n, &mut rng), rng, kernel.clone())
        })
        .collect();

    let mut trace = Vec::new();
    let mut chain_work = 0u64;
    let inv = 1.0 / config.n_particles as f64;
    for i in 0..config.n_iter {
        let model = IsingModel::new_signed(graph.clone(), est.beta.clone(), est.gamma.clone())?;
        chain_work += particles
            .par_iter_mut()
            .map(|(sigma, rng, kernel)| kernel.advance(&model, sigma, config.k, rng))
            .sum::<u64>();
        let mut model_moments = Moments::zeros(&graph);
        for (sigma, _, _) in &particles {
            model_moments.accumulate(&graph, sigma, inv);
        }
        let eta = config.step.at(i);
        for ((b, &m), &mh) in est.beta.iter_mut().zip(&target.mu_uv).zip(&model_moments.mu_uv) {
            *b += eta * (m - mh);
            if config.clamp_beta && *b < 0.0 {
                *b = 0.0;
            }
        }
        for ((g, &m), &mh) in est.gamma.iter_mut().zip(&target.mu_v).zip(&model_moments.mu_v) {
            *g += eta * (m - mh);
        }
        if let Some(r) = reference {
            if (i + 1) % config.trace_every == 0 || i + 1 == config.n_iter {
                trace.push(TracePoint {
                    iteration: i + 1,
                    field_error: mean_abs_diff(&r.gamma, &est.gamma),
                    coupling_error: mean_abs_diff(&r.beta, &est.beta),
                });
            }
        }
    }
    Ok(CDOutcome { estimate: est, trace, chain_work })
}
