//! Swendsen-Wang and Gibbs sampling for ferromagnetic Ising models on
//! stochastic partitioned graphs.
//!
//! The crate covers graph generation ([`graph`]), the model itself
//! ([`model`]), the two Markov chains ([`samplers`]), the deterministic
//! two-dimensional map that idealizes Swendsen-Wang on complete bipartite
//! graphs ([`simplified_sw`]), exact enumeration for tiny models ([`oracle`]),
//! coupling and percolation diagnostics ([`diagnostics`]) and contrastive
//! divergence ([`learning`]).

pub mod diagnostics;
pub mod graph;
pub mod io;
pub mod learning;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod simplified_sw;

pub use graph::{complete_bipartite, gen_partitioned, Edge, GraphError, GraphSpec, PartitionedGraph, Vertex};
pub use model::{percolation_prob, scaled_beta, IsingModel, ModelError, Moments, Spin, SpinConfig};
pub use rng::{stream_rng, ChainRng, StreamSeed};
pub use samplers::{run_chain, ChainKind, MarkovKernel};
pub use simplified_sw::{ModelScale, PhasePoint};
