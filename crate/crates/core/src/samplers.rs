//! Swendsen-Wang and Gibbs transition kernels.
//!
//! Both chains are step functions over [`SpinConfig`] driven by an explicit
//! generator. The order in which randomness is consumed is part of the
//! contract, because the grand coupling in [`crate::diagnostics`] runs two
//! chains off identical streams:
//!
//! * a Swendsen-Wang step draws one uniform per edge, in canonical edge order,
//!   whether or not the edge is monochromatic; then one uniform per vertex in
//!   ascending order. The component whose smallest vertex is `c` takes its
//!   spin from the uniform drawn at `c`.
//! * a Gibbs site update draws one uniform; a sweep draws a site index and
//!   then that uniform, `|V|` times.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::graph::{DisjointSets, Vertex};
use crate::model::{IsingModel, SpinConfig};
use crate::rng::ChainRng;

/// Which Markov chain to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainKind {
    SwendsenWang,
    Gibbs,
}

impl ChainKind {
    pub fn name(self) -> &'static str {
        match self {
            ChainKind::SwendsenWang => "sw",
            ChainKind::Gibbs => "gibbs",
        }
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sw" | "swendsen-wang" | "swendsen_wang" | "swendsenwang" => Ok(ChainKind::SwendsenWang),
            "gibbs" | "glauber" => Ok(ChainKind::Gibbs),
            other => Err(format!("unknown chain `{other}` (expected `sw` or `gibbs`)")),
        }
    }
}

/// Outcome of the percolation half of a Swendsen-Wang step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationResult {
    /// Indices of the kept monochromatic edges, ascending.
    pub retained_edges: Vec<usize>,
    /// Component label per vertex (smallest vertex of the component).
    pub component_of: Vec<u32>,
}

/// `1 / (1 + exp(-x))` without overflow for large `|x|`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Swendsen-Wang kernel with reusable scratch buffers.
#[derive(Debug, Clone, Default)]
pub struct SwendsenWang {
    sets: DisjointSets,
    labels: Vec<u32>,
    field: Vec<f64>,
    spin_of: Vec<i8>,
}

impl SwendsenWang {
    pub fn new() -> Self {
        Self::default()
    }

    /// Percolates the monochromatic edges of `sigma` into `self.sets`.
    fn percolate<R: Rng + ?Sized>(
        &mut self,
        model: &IsingModel,
        sigma: &SpinConfig,
        rng: &mut R,
        mut retained: Option<&mut Vec<usize>>,
    ) {
        let s = sigma.spins();
        self.sets.reset(s.len());
        let mut last_beta = f64::NAN;
        let mut p = 0.0;
        for (e, (&(u, v), &b)) in model.graph().edges().iter().zip(model.beta()).enumerate() {
            let x: f64 = rng.random();
            if s[u as usize] != s[v as usize] {
                continue;
            }
            if b != last_beta {
                last_beta = b;
                p = -(-2.0 * b).exp_m1();
            }
            if x < p {
                self.sets.union(u, v);
                if let Some(kept) = retained.as_deref_mut() {
                    kept.push(e);
                }
            }
        }
    }

    /// Draws one spin per component of `labels` and writes it to every member.
    fn assign<R: Rng + ?Sized>(&mut self, gamma: &[f64], labels: &[u32], out: &mut [i8], rng: &mut R) {
        let n = labels.len();
        self.field.clear();
        self.field.resize(n, 0.0);
        for (&c, &g) in labels.iter().zip(gamma) {
            self.field[c as usize] += g;
        }
        self.spin_of.clear();
        self.spin_of.resize(n, 0);
        for v in 0..n {
            let x: f64 = rng.random();
            let c = labels[v] as usize;
            if c == v {
                self.spin_of[v] = if x < logistic(2.0 * self.field[v]) { 1 } else { -1 };
            }
            out[v] = self.spin_of[c];
        }
    }

    /// One full step, overwriting `sigma`.
    pub fn step_in_place<R: Rng + ?Sized>(&mut self, model: &IsingModel, sigma: &mut SpinConfig, rng: &mut R) {
        debug_assert_eq!(sigma.len(), model.num_vertices());
        self.percolate(model, sigma, rng, None);
        let mut labels = std::mem::take(&mut self.labels);
        self.sets.canonical_labels(&mut labels);
        self.assign(model.gamma(), &labels, sigma.as_mut_slice(), rng);
        self.labels = labels;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, model: &IsingModel, sigma: &SpinConfig, rng: &mut R) -> SpinConfig {
        let mut next = sigma.clone();
        self.step_in_place(model, &mut next, rng);
        next
    }
}

/// Keeps each monochromatic edge independently with probability
/// `1 - exp(-2 beta_uv)` and labels the components of the kept subgraph.
pub fn sw_percolate<R: Rng + ?Sized>(model: &IsingModel, sigma: &SpinConfig, rng: &mut R) -> PercolationResult {
    let mut sw = SwendsenWang::new();
    let mut retained_edges = Vec::new();
    sw.percolate(model, sigma, rng, Some(&mut retained_edges));
    let mut component_of = Vec::new();
    sw.sets.canonical_labels(&mut component_of);
    PercolationResult { retained_edges, component_of }
}

/// Gives every component spin +1 with probability
/// `logistic(2 * sum of fields in the component)`, else -1.
pub fn sw_assign_spins<R: Rng + ?Sized>(model: &IsingModel, perc: &PercolationResult, rng: &mut R) -> SpinConfig {
    let mut sw = SwendsenWang::new();
    let mut out = SpinConfig::all_up(perc.component_of.len());
    sw.assign(model.gamma(), &perc.component_of, out.as_mut_slice(), rng);
    out
}

/// One Swendsen-Wang step; `sigma` is left untouched.
pub fn sw_step<R: Rng + ?Sized>(model: &IsingModel, sigma: &SpinConfig, rng: &mut R) -> SpinConfig {
    SwendsenWang::new().step(model, sigma, rng)
}

/// Conditional probability that `sigma_v = +1` given all other spins.
#[inline]
pub fn gibbs_prob_plus(model: &IsingModel, sigma: &SpinConfig, v: Vertex) -> f64 {
    let s = sigma.spins();
    let beta = model.beta();
    let local: f64 =
        model.graph().adjacency().neighbors(v).iter().map(|&(u, e)| beta[e as usize] * s[u as usize] as f64).sum();
    logistic(2.0 * (local + model.gamma()[v as usize]))
}

/// Resamples `sigma_v` from its conditional in place; returns the work done
/// (neighbors visited plus one).
#[inline]
pub fn gibbs_update_in_place<R: Rng + ?Sized>(
    model: &IsingModel,
    sigma: &mut SpinConfig,
    v: Vertex,
    rng: &mut R,
) -> u64 {
    let x: f64 = rng.random();
    let spin = if x < gibbs_prob_plus(model, sigma, v) { 1 } else { -1 };
    sigma.as_mut_slice()[v as usize] = spin;
    model.graph().degree(v) as u64 + 1
}

pub fn gibbs_site_update<R: Rng + ?Sized>(
    model: &IsingModel,
    sigma: &SpinConfig,
    v: Vertex,
    rng: &mut R,
) -> SpinConfig {
    assert!((v as usize) < model.num_vertices(), "vertex {v} out of range");
    let mut next = sigma.clone();
    gibbs_update_in_place(model, &mut next, v, rng);
    next
}

/// `updates` random-scan site updates in place; returns the work done.
pub fn gibbs_updates_in_place<R: Rng + ?Sized>(
    model: &IsingModel,
    sigma: &mut SpinConfig,
    updates: usize,
    rng: &mut R,
) -> u64 {
    let n = model.num_vertices() as Vertex;
    if n == 0 {
        return 0;
    }
    let mut work = 0;
    for _ in 0..updates {
        let v = rng.random_range(0..n);
        work += gibbs_update_in_place(model, sigma, v, rng);
    }
    work
}

/// `|V|` random-scan site updates.
pub fn gibbs_sweep<R: Rng + ?Sized>(model: &IsingModel, sigma: &SpinConfig, rng: &mut R) -> SpinConfig {
    let mut next = sigma.clone();
    gibbs_updates_in_place(model, &mut next, model.num_vertices(), rng);
    next
}

/// Something that can advance a configuration a number of steps.
///
/// Used by contrastive divergence so that tests can swap the chain for an
/// exact sampler.
pub trait MarkovKernel {
    /// Advances `sigma` by `steps` transitions and returns a work count.
    fn advance(&mut self, model: &IsingModel, sigma: &mut SpinConfig, steps: usize, rng: &mut ChainRng) -> u64;
}

/// [`MarkovKernel`] for the two built-in chains.
///
/// One Swendsen-Wang step costs `|E| + |V|` work units. For Gibbs, one step is
/// a single random-scan site update costing `deg(v) + 1`, so `|V|` steps make
/// a sweep.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    kind: ChainKind,
    sw: SwendsenWang,
}

impl ChainSampler {
    pub fn new(kind: ChainKind) -> Self {
        ChainSampler { kind, sw: SwendsenWang::new() }
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }
}

impl MarkovKernel for ChainSampler {
    fn advance(&mut self, model: &IsingModel, sigma: &mut SpinConfig, steps: usize, rng: &mut ChainRng) -> u64 {
        match self.kind {
            ChainKind::SwendsenWang => {
                for _ in 0..steps {
                    self.sw.step_in_place(model, sigma, rng);
                }
                steps as u64 * (model.num_edges() + model.num_vertices()) as u64
            }
            ChainKind::Gibbs => gibbs_updates_in_place(model, sigma, steps, rng),
        }
    }
}

/// Callback receiving the 1-based step number and the state after it.
pub type StepObserver<'a> = &'a mut dyn FnMut(usize, &SpinConfig);

/// Runs `steps` transitions of the chosen chain from `sigma0`.
///
/// A Gibbs step here is a full sweep. The observer is called after every
/// step with the 1-based step number.
pub fn run_chain<R: Rng + ?Sized>(
    model: &IsingModel,
    sigma0: &SpinConfig,
    steps: usize,
    kind: ChainKind,
    rng: &mut R,
    mut observer: Option<StepObserver<'_>>,
) -> SpinConfig {
    let mut sigma = sigma0.clone();
    let mut sw = SwendsenWang::new();
    for t in 1..=steps {
        match kind {
            ChainKind::SwendsenWang => sw.step_in_place(model, &mut sigma, rng),
            ChainKind::Gibbs => {
                gibbs_updates_in_place(model, &mut sigma, model.num_vertices(), rng);
            }
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(t, &sigma);
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_bipartite, PartitionedGraph};
    use crate::rng::stream_rng;
    use std::sync::Arc;

    fn three_sigma(p: f64, trials: usize) -> f64 {
        3.0 * (p * (1.0 - p) / trials as f64).sqrt()
    }

    fn edge_model(beta: f64, gamma: [f64; 2]) -> IsingModel {
        let g = Arc::new(PartitionedGraph::unpartitioned(2, vec![(0, 1)]).unwrap());
        IsingModel::new(g, vec![beta], gamma.to_vec()).unwrap()
    }

    fn isolated(gamma: Vec<f64>) -> IsingModel {
        let n = gamma.len();
        let g = Arc::new(PartitionedGraph::unpartitioned(n, vec![]).unwrap());
        IsingModel::new(g, vec![], gamma).unwrap()
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert_eq!(logistic(1000.0), 1.0);
        assert_eq!(logistic(-1000.0), 0.0);
        assert!((logistic(3.0) + logistic(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_percolates_nothing() {
        let g = Arc::new(complete_bipartite(3, 3).unwrap());
        let m = IsingModel::uniform(g, 0.0, 0.0).unwrap();
        let perc = sw_percolate(&m, &SpinConfig::all_up(6), &mut stream_rng(0, 0));
        assert!(perc.retained_edges.is_empty());
        assert_eq!(perc.component_of, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn bichromatic_edge_never_kept() {
        let m = edge_model(50.0, [0.0, 0.0]);
        let sigma = SpinConfig::new(vec![1, -1]).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert!(sw_percolate(&m, &sigma, &mut rng).retained_edges.is_empty());
        }
    }

    #[test]
    fn retention_frequency_matches_formula() {
        let m = edge_model(0.5, [0.0, 0.0]);
        let sigma = SpinConfig::all_up(2);
        let mut rng = stream_rng(2, 0);
        let trials = 100_000;
        let kept = (0..trials).filter(|_| !sw_percolate(&m, &sigma, &mut rng).retained_edges.is_empty()).count();
        let p = 1.0 - (-1.0f64).exp();
        let freq = kept as f64 / trials as f64;
        assert!((freq - p).abs() < three_sigma(p, trials), "{freq} vs {p}");
    }

    fn plus_frequency(model: &IsingModel, labels: Vec<u32>, trials: usize, seed: u64) -> f64 {
        let perc = PercolationResult { retained_edges: vec![], component_of: labels };
        let mut rng = stream_rng(seed, 0);
        let plus = (0..trials)
            .filter(|_| {
                let s = sw_assign_spins(model, &perc, &mut rng);
                assert!(s.spins().iter().all(|&x| x == s.get(0)));
                s.get(0) == 1
            })
            .count();
        plus as f64 / trials as f64
    }

    #[test]
    fn zero_field_component_is_a_fair_coin() {
        let m = isolated(vec![0.0; 3]);
        let freq = plus_frequency(&m, vec![0, 0, 0], 100_000, 3);
        assert!((freq - 0.5).abs() < three_sigma(0.5, 100_000));
    }

    #[test]
    fn saturated_field_always_plus() {
        let m = isolated(vec![50.0]);
        assert_eq!(plus_frequency(&m, vec![0], 10_000, 4), 1.0);
    }

    #[test]
    fn component_field_sum_sets_bias() {
        let m = isolated(vec![0.1, -0.2, 0.3]);
        let p = 0.4f64.exp() / (1.0 + 0.4f64.exp());
        assert!((p - 0.59869).abs() < 1e-5);
        let freq = plus_frequency(&m, vec![0, 0, 0], 100_000, 5);
        assert!((freq - p).abs() < three_sigma(p, 100_000), "{freq} vs {p}");
    }

    #[test]
    fn separate_components_draw_separately() {
        let m = isolated(vec![0.0; 4]);
        let perc = PercolationResult { retained_edges: vec![], component_of: vec![0, 0, 2, 2] };
        let mut rng = stream_rng(6, 0);
        let mut differ = 0;
        for _ in 0..1000 {
            let s = sw_assign_spins(&m, &perc, &mut rng);
            assert_eq!(s.get(0), s.get(1));
            assert_eq!(s.get(2), s.get(3));
            differ += (s.get(0) != s.get(2)) as usize;
        }
        assert!((400..600).contains(&differ));
    }

    #[test]
    fn free_model_gives_uniform_marginals() {
        let g = Arc::new(complete_bipartite(2, 3).unwrap());
        let m = IsingModel::uniform(g, 0.0, 0.0).unwrap();
        let trials = 100_000;
        for kind in [ChainKind::SwendsenWang, ChainKind::Gibbs] {
            let mut counts = [0usize; 5];
            let mut rng = stream_rng(7, 0);
            run_chain(
                &m,
                &SpinConfig::all_up(5),
                trials,
                kind,
                &mut rng,
                Some(&mut |_, s: &SpinConfig| {
                    for (c, &x) in counts.iter_mut().zip(s.spins()) {
                        *c += (x == 1) as usize;
                    }
                }),
            );
            for c in counts {
                let f = c as f64 / trials as f64;
                assert!((f - 0.5).abs() < three_sigma(0.5, trials), "{kind}: {f}");
            }
        }
    }

    #[test]
    fn strong_edge_stays_monochromatic() {
        let m = edge_model(10.0, [0.0, 0.0]);
        let mut rng = stream_rng(8, 0);
        let mut sw = SwendsenWang::new();
        let trials = 100_000;
        let mono = (0..trials)
            .filter(|_| {
                let s = sw.step(&m, &SpinConfig::all_down(2), &mut rng);
                s.get(0) == s.get(1)
            })
            .count();
        let bound = 1.0 - (-20.0f64).exp() * 1.01;
        assert!(mono as f64 / trials as f64 >= bound);
    }

    #[test]
    fn gibbs_isolated_vertex_conditionals() {
        let m = isolated(vec![0.0]);
        assert_eq!(gibbs_prob_plus(&m, &SpinConfig::all_up(1), 0), 0.5);
        let m = isolated(vec![0.5]);
        let p = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((gibbs_prob_plus(&m, &SpinConfig::all_down(1), 0) - p).abs() < 1e-15);
        let mut rng = stream_rng(9, 0);
        let trials = 100_000;
        let plus =
            (0..trials).filter(|_| gibbs_site_update(&m, &SpinConfig::all_down(1), 0, &mut rng).get(0) == 1).count();
        let f = plus as f64 / trials as f64;
        assert!((f - p).abs() < three_sigma(p, trials), "{f} vs {p}");
    }

    #[test]
    fn gibbs_conditional_uses_neighbors() {
        let m = edge_model(0.7, [0.2, -0.1]);
        let sigma = SpinConfig::new(vec![1, -1]).unwrap();
        assert!((gibbs_prob_plus(&m, &sigma, 0) - logistic(2.0 * (-0.7 + 0.2))).abs() < 1e-15);
        assert!((gibbs_prob_plus(&m, &sigma, 1) - logistic(2.0 * (0.7 - 0.1))).abs() < 1e-15);
    }

    #[test]
    fn gibbs_site_update_touches_one_site() {
        let g = Arc::new(complete_bipartite(3, 3).unwrap());
        let m = IsingModel::uniform(g, 0.3, 0.0).unwrap();
        let mut rng = stream_rng(10, 0);
        let sigma = SpinConfig::random(6, &mut rng);
        for _ in 0..100 {
            let next = gibbs_site_update(&m, &sigma, 4, &mut rng);
            for v in [0, 1, 2, 3, 5] {
                assert_eq!(next.get(v), sigma.get(v));
            }
        }
    }

    #[test]
    fn single_vertex_sweep_is_one_draw() {
        let m = isolated(vec![0.5]);
        let mut a = stream_rng(11, 0);
        let mut b = stream_rng(11, 0);
        let swept = gibbs_sweep(&m, &SpinConfig::all_up(1), &mut a);
        let _site: u32 = b.random_range(0..1);
        let direct = gibbs_site_update(&m, &SpinConfig::all_up(1), 0, &mut b);
        assert_eq!(swept, direct);
    }

    #[test]
    fn run_chain_zero_steps_and_determinism() {
        let g = Arc::new(complete_bipartite(4, 4).unwrap());
        let m = IsingModel::uniform(g, 0.2, 0.05).unwrap();
        let s0 = SpinConfig::random(8, &mut stream_rng(12, 1));
        for kind in [ChainKind::SwendsenWang, ChainKind::Gibbs] {
            assert_eq!(run_chain(&m, &s0, 0, kind, &mut stream_rng(12, 0), None), s0);
            let mut traj_a = Vec::new();
            let mut traj_b = Vec::new();
            run_chain(&m, &s0, 50, kind, &mut stream_rng(12, 0), Some(&mut |_, s: &SpinConfig| traj_a.push(s.clone())));
            run_chain(&m, &s0, 50, kind, &mut stream_rng(12, 0), Some(&mut |_, s: &SpinConfig| traj_b.push(s.clone())));
            assert_eq!(traj_a, traj_b);
        }
    }

    #[test]
    fn step_equals_percolate_then_assign() {
        let g = Arc::new(complete_bipartite(3, 4).unwrap());
        let mut rng = stream_rng(13, 0);
        let beta: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let gamma: Vec<f64> = (0..7).map(|_| rng.random_range(-0.5..0.5)).collect();
        let m = IsingModel::new(g, beta, gamma).unwrap();
        let sigma = SpinConfig::random(7, &mut rng);
        let mut a = stream_rng(14, 0);
        let mut b = stream_rng(14, 0);
        let direct = sw_step(&m, &sigma, &mut a);
        let perc = sw_percolate(&m, &sigma, &mut b);
        assert!(perc.retained_edges.iter().all(|&e| {
            let (u, v) = m.graph().edges()[e];
            sigma.get(u) == sigma.get(v)
        }));
        assert_eq!(sw_assign_spins(&m, &perc, &mut b), direct);
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_work_counts() {
        let g = Arc::new(complete_bipartite(2, 3).unwrap());
        let m = IsingModel::uniform(g, 0.2, 0.0).unwrap();
        let mut sigma = SpinConfig::all_up(5);
        let mut rng = stream_rng(15, 0);
        assert_eq!(ChainSampler::new(ChainKind::SwendsenWang).advance(&m, &mut sigma, 3, &mut rng), 3 * 11);
        let w = ChainSampler::new(ChainKind::Gibbs).advance(&m, &mut sigma, 5, &mut rng);
        assert!((5 * 3..=5 * 4).contains(&w));
    }

    #[test]
    fn chain_kind_parses() {
        assert_eq!("SW".parse::<ChainKind>().unwrap(), ChainKind::SwendsenWang);
        assert_eq!("gibbs".parse::<ChainKind>().unwrap(), ChainKind::Gibbs);
        assert!("metropolis".parse::<ChainKind>().is_err());
    }
}
