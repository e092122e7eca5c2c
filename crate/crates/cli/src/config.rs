//! Experiment configuration.
//!
//! A run is fully determined by an [`ExperimentConfig`] (which carries the root
//! seed). Every section has defaults, so `{}` is a valid config.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use swmix_core::io::{load_edge_list, load_model};
use swmix_core::learning::StepSize;
use swmix_core::{complete_bipartite, gen_partitioned, stream_rng, ChainKind, GraphSpec, IsingModel, PartitionedGraph};

/// Stream ids derived from the root seed. Sweeps use [`point_stream`] instead.
pub const GRAPH_STREAM: u64 = 0;
pub const MODEL_STREAM: u64 = 1;
pub const CHAIN_STREAM: u64 = 2;
pub const DATA_STREAM: u64 = 3;
pub const LEARN_STREAM: u64 = 4;

/// Stream id for item `(a, b)` of a sweep, with `role` telling apart the
/// random draws made for that item.
pub fn point_stream(a: u64, b: u64, role: u64) -> u64 {
    1 << 63 | (a & 0xFF_FFFF) << 32 | (b & 0xFF_FFFF) << 8 | (role & 0xFF)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub sample: SampleConfig,
    pub mix: MixConfig,
    pub fixedpoint: FixedPointConfig,
    pub learn: LearnConfig,
    pub reproduce: ReproduceConfig,
}

impl ExperimentConfig {
    /// Reads a JSON config, or the header block of a file this tool wrote.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('#') {
            let line = text
                .lines()
                .take_while(|l| l.starts_with('#'))
                .find_map(|l| l.strip_prefix(crate::output::CONFIG_PREFIX))
                .context("comment block has no config line")?;
            Ok(serde_json::from_str(line)?)
        } else {
            Ok(serde_json::from_str(text)?)
        }
    }

    /// Graph and model as described by the `graph` and `model` sections.
    pub fn build_model(&self, root: u64) -> Result<IsingModel> {
        if let Some(path) = &self.model.file {
            let loaded = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
            for w in &loaded.warnings {
                log::warn!("{}: {w}", path.display());
            }
            return Ok(loaded.model);
        }
        let graph = self.graph.build(&mut stream_rng(root, GRAPH_STREAM))?;
        self.model.sample_on(graph, &mut stream_rng(root, MODEL_STREAM))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    /// Stochastic partitioned graph on `n` vertices.
    Partitioned {
        n: usize,
        alphas: Vec<f64>,
        probs: Vec<Vec<f64>>,
    },
    CompleteBipartite {
        n: usize,
        m: usize,
    },
    File {
        path: PathBuf,
    },
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig::Partitioned { n: 200, alphas: vec![0.5, 0.5], probs: sbm_probs(0.007, 0.003) }
    }
}

pub fn sbm_probs(p_in: f64, p_out: f64) -> Vec<Vec<f64>> {
    vec![vec![p_in, p_out], vec![p_out, p_in]]
}

impl GraphConfig {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PartitionedGraph> {
        Ok(match self {
            GraphConfig::Partitioned { n, alphas, probs } => {
                gen_partitioned(&GraphSpec::new(*n, alphas.clone(), probs.clone())?, rng)
            }
            GraphConfig::CompleteBipartite { n, m } => complete_bipartite(*n, *m)?,
            GraphConfig::File { path } => {
                let loaded = load_edge_list(path).with_context(|| format!("loading graph {}", path.display()))?;
                for w in &loaded.warnings {
                    log::warn!("{}: {w}", path.display());
                }
                loaded.graph
            }
        })
    }
}

/// A randomness declaration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<()> {
        let Dist::Uniform { lo, hi } = *self;
        ensure!(lo.is_finite() && hi.is_finite() && lo <= hi, "uniform bounds must satisfy lo <= hi (got {lo}, {hi})");
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Dist::Uniform { lo, hi } = *self;
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    }
}

/// Per-edge or per-vertex parameter: one value, an explicit list, or a
/// distribution sampled independently per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Constant(f64),
    List(Vec<f64>),
    Random(Dist),
}

impl Param {
    pub fn values<R: Rng + ?Sized>(&self, len: usize, what: &str, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Param::Constant(c) => Ok(vec![*c; len]),
            Param::List(v) => {
                ensure!(v.len() == len, "{what}: expected {len} values, got {}", v.len());
                Ok(v.clone())
            }
            Param::Random(d) => {
                d.validate()?;
                Ok((0..len).map(|_| d.draw(rng)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub beta: Param,
    pub gamma: Param,
    /// Model file with couplings and fields; overrides everything else.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            beta: Param::Random(Dist::Uniform { lo: 0.0, hi: 1.0 }),
            gamma: Param::Random(Dist::Uniform { lo: 0.0, hi: 0.1 }),
            file: None,
        }
    }
}

impl ModelConfig {
    /// Couplings are drawn before fields, from the same generator.
    pub fn sample_on<R: Rng + ?Sized>(&self, graph: PartitionedGraph, rng: &mut R) -> Result<IsingModel> {
        let beta = self.beta.values(graph.num_edges(), "beta", rng)?;
        let gamma = self.gamma.values(graph.num_vertices(), "gamma", rng)?;
        Ok(IsingModel::new(graph.into(), beta, gamma)?)
    }
}

pub fn parse_chain(name: &str) -> Result<ChainKind> {
    name.parse::<ChainKind>().map_err(|e| anyhow::anyhow!("{e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Random,
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub chain: String,
    /// Chain steps; a Gibbs step is one sweep.
    pub steps: usize,
    pub record_every: usize,
    pub start: Start,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { chain: "sw".into(), steps: 1000, record_every: 1, start: Start::Random }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    pub n: Vec<usize>,
    pub k: f64,
    pub b: f64,
    pub chains: Vec<String>,
    pub seeds: usize,
    pub max_steps: usize,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            n: vec![50, 100, 200, 400],
            k: 1.0,
            b: 4.0,
            chains: vec!["sw".into()],
            seeds: 20,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub b: Vec<f64>,
    pub k: Vec<f64>,
    pub tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { b: vec![0.5, 1.0, 1.5, 2.5, 3.0, 4.0, 8.0], k: vec![1.0, 2.0, 5.0], tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaConfig {
    Constant(f64),
    InverseDecay { eta0: f64, tau: f64 },
}

impl EtaConfig {
    pub fn step_size(self) -> StepSize {
        match self {
            EtaConfig::Constant(eta) => StepSize::Constant(eta),
            EtaConfig::InverseDecay { eta0, tau } => StepSize::InverseDecay { eta0, tau },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub chains: Vec<String>,
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_iter: usize,
    pub eta: EtaConfig,
    pub n_particles: usize,
    pub k_sw: usize,
    /// Gibbs site updates per iteration; `null` means `|V|`.
    pub k_gibbs: Option<usize>,
    pub clamp_beta: bool,
    pub trace_every: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            chains: vec!["sw".into(), "gibbs".into()],
            n_samples: 1000,
            burn_in: 100,
            thin: 10,
            n_iter: 1000,
            eta: EtaConfig::Constant(0.05),
            n_particles: 100,
            k_sw: 1,
            k_gibbs: None,
            clamp_beta: true,
            trace_every: 10,
        }
    }
}

impl LearnConfig {
    pub fn k_for(&self, kind: ChainKind, num_vertices: usize) -> usize {
        match kind {
            ChainKind::SwendsenWang => self.k_sw,
            ChainKind::Gibbs => self.k_gibbs.unwrap_or(num_vertices),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// `x` is the upper end of the coupling range, `beta ~ U(0, x)`.
    BetaRange,
    /// `x` is the number of vertices.
    GraphSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceConfig {
    pub sweep: Sweep,
    pub x: Vec<f64>,
    /// Graph size for the coupling-range sweep.
    pub n: usize,
    /// Coupling range for the graph-size sweep.
    pub beta_hi: f64,
    pub gamma: Dist,
    pub p_in: f64,
    pub p_out: f64,
    pub models_per_point: usize,
    pub max_n: usize,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        ReproduceConfig {
            sweep: Sweep::BetaRange,
            x: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            n: 200,
            beta_hi: 1.0,
            gamma: Dist::Uniform { lo: 0.0, hi: 0.1 },
            p_in: 0.007,
            p_out: 0.003,
            models_per_point: 10,
            max_n: 400,
        }
    }
}

impl ReproduceConfig {
    /// Graph size and coupling range at sweep value `x`.
    pub fn point(&self, x: f64) -> Result<(usize, f64)> {
        let (n, hi) = match self.sweep {
            Sweep::BetaRange => (self.n, x),
            Sweep::GraphSize => {
                if !(x >= 2.0 && x.fract() == 0.0) {
                    bail!("graph size {x} must be an integer >= 2");
                }
                (x as usize, self.beta_hi)
            }
        };
        ensure!(n <= self.max_n, "n = {n} exceeds max_n = {} (raise it with --max-n)", self.max_n);
        ensure!(hi.is_finite() && hi >= 0.0, "coupling range {hi} must be finite and nonnegative");
        Ok((n, hi))
    }
}
