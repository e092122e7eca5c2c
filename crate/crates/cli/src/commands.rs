//! The subcommands. Each returns `Ok(true)` when every requested point
//! completed and `Ok(false)` when some failed but the rest were written.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{ensure, Result};
use rayon::prelude::*;
use swmix_core::diagnostics::{bipartite_scaled_model, coalescence_time, phase};
use swmix_core::io::write_edge_list;
use swmix_core::learning::{cd_learn, generate_dataset, CDConfig, CDOutcome, Dataset, ParamEstimate};
use swmix_core::simplified_sw::{phase_diagram_row, PhaseDiagramRow};
use swmix_core::{
    gen_partitioned, run_chain, stream_rng, ChainKind, GraphSpec, IsingModel, ModelScale, PartitionedGraph, SpinConfig,
    StreamSeed,
};

use crate::config::{
    parse_chain, point_stream, sbm_probs, Dist, ExperimentConfig, Param, Start, CHAIN_STREAM, DATA_STREAM,
    GRAPH_STREAM, LEARN_STREAM,
};
use crate::output::{num, OutputFile};

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

fn spins_text(sigma: &SpinConfig) -> String {
    sigma.spins().iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

pub fn generate(ctx: &Context) -> Result<bool> {
    let graph = ctx.config.graph.build(&mut stream_rng(ctx.config.seed, GRAPH_STREAM))?;
    let mut f = OutputFile::create(&ctx.out, "graph.txt", "generate", &ctx.config)?;
    write_edge_list(&graph, f.writer())?;
    let path = f.finish()?;
    println!("vertices {} edges {} -> {}", graph.num_vertices(), graph.num_edges(), path.display());
    Ok(true)
}

/// Columns of `sample_summary.csv`: step, magnetization, then the phase
/// `alpha_1, ..., alpha_r` (majority-spin fraction per partition).
pub fn sample(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.config.sample;
    ensure!(cfg.record_every >= 1, "sample.record_every must be at least 1");
    let kind = parse_chain(&cfg.chain)?;
    let model = ctx.config.build_model(ctx.config.seed)?;
    let graph = model.graph();
    let n = model.num_vertices();
    let mut rng = stream_rng(ctx.config.seed, CHAIN_STREAM);
    let start = match cfg.start {
        Start::Random => SpinConfig::random(n, &mut rng),
        Start::Up => SpinConfig::all_up(n),
        Start::Down => SpinConfig::all_down(n),
    };

    let mut samples = OutputFile::create(&ctx.out, "samples.txt", "sample", &ctx.config)?;
    let mut summary = OutputFile::create(&ctx.out, "sample_summary.csv", "sample", &ctx.config)?;
    let mut head = String::from("step,magnetization");
    for p in 1..=graph.num_partitions() {
        write!(head, ",alpha_{p}")?;
    }
    summary.line(head)?;

    let mut failure = None;
    let mut total_m = 0.0;
    let mut recorded = 0usize;
    let mut record = |t: usize, sigma: &SpinConfig| {
        if failure.is_some() || t % cfg.record_every != 0 {
            return;
        }
        let m = sigma.magnetization();
        total_m += m;
        recorded += 1;
        let mut row = format!("{t},{}", num(m));
        for a in phase(sigma, graph) {
            let _ = write!(row, ",{}", num(a));
        }
        if let Err(e) = samples.line(format!("{t} {}", spins_text(sigma))).and_then(|_| summary.line(row)) {
            failure = Some(e);
        }
    };
    record(0, &start);
    run_chain(&model, &start, cfg.steps, kind, &mut rng, Some(&mut record));
    if let Some(e) = failure {
        return Err(e);
    }
    samples.finish()?;
    let path = summary.finish()?;
    println!(
        "{kind}: {recorded} states recorded, mean magnetization {:.6} -> {}",
        total_m / recorded as f64,
        path.display()
    );
    Ok(true)
}

/// Columns of `mix.csv`: n, k, B, chain, seed, steps, censored. `steps` is
/// the cap when the run was censored.
pub fn mix(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.config.mix;
    ensure!(cfg.seeds >= 1 && cfg.max_steps >= 1, "mix.seeds and mix.max_steps must be at least 1");
    let chains = cfg.chains.iter().map(|c| parse_chain(c)).collect::<Result<Vec<_>>>()?;
    let mut complete = true;
    let mut models = Vec::new();
    for &n in &cfg.n {
        match bipartite_scaled_model(n, cfg.k, cfg.b) {
            Ok(m) => models.push((n, Some(m))),
            Err(e) => {
                eprintln!("n = {n}: {e}");
                complete = false;
                models.push((n, None));
            }
        }
    }
    let points: Vec<(usize, ChainKind, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(ci, &kind)| (0..models.len()).flat_map(move |mi| (0..cfg.seeds).map(move |s| (ci, kind, mi, s))))
        .filter(|&(_, _, mi, _)| models[mi].1.is_some())
        .collect();
    let root = ctx.config.seed;
    let results: Vec<_> = points
        .par_iter()
        .map(|&(ci, kind, mi, s)| {
            let (n, model) = (&models[mi].0, models[mi].1.as_ref().expect("filtered"));
            let seed = StreamSeed::new(root, point_stream(*n as u64, s as u64, ci as u64));
            coalescence_time(model, seed, cfg.max_steps, kind)
        })
        .collect();

    let mut f = OutputFile::create(&ctx.out, "mix.csv", "mix", &ctx.config)?;
    f.line("n,k,B,chain,seed,steps,censored")?;
    for (&(_, kind, mi, s), r) in points.iter().zip(&results) {
        f.line(format!(
            "{},{},{},{},{},{},{}",
            models[mi].0,
            num(cfg.k),
            num(cfg.b),
            kind,
            s,
            r.steps_or_cap(),
            r.censored()
        ))?;
    }
    let path = f.finish()?;
    for &kind in &chains {
        for (n, _) in models.iter().filter(|m| m.1.is_some()) {
            let mut steps: Vec<usize> = points
                .iter()
                .zip(&results)
                .filter(|((_, k, mi, _), _)| *k == kind && models[*mi].0 == *n)
                .map(|(_, r)| r.steps_or_cap())
                .collect();
            steps.sort_unstable();
            println!("{kind} n={n}: median coalescence {} steps", steps[steps.len() / 2]);
        }
    }
    println!("-> {}", path.display());
    Ok(complete)
}

/// Columns of `fixedpoint.csv`: B, k, alpha_L_star, alpha_R_star, theta_L,
/// theta_R, spectral_radius, residual.
pub fn fixedpoint(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.config.fixedpoint;
    let points: Vec<(f64, f64)> = cfg.b.iter().flat_map(|&b| cfg.k.iter().map(move |&k| (b, k))).collect();
    let rows: Vec<Result<PhaseDiagramRow, String>> = points
        .par_iter()
        .map(|&(b, k)| {
            let scale = ModelScale::new(b, k).map_err(|e| e.to_string())?;
            phase_diagram_row(&scale, cfg.tol).map_err(|e| e.to_string())
        })
        .collect();
    let mut f = OutputFile::create(&ctx.out, "fixedpoint.csv", "fixedpoint", &ctx.config)?;
    f.line("B,k,alpha_L_star,alpha_R_star,theta_L,theta_R,spectral_radius,residual")?;
    let mut complete = true;
    for (&(b, k), row) in points.iter().zip(rows) {
        match row {
            Ok(r) => f.line(format!(
                "{},{},{},{},{},{},{},{}",
                num(r.b),
                num(r.k),
                num(r.fixed_point.alpha_l),
                num(r.fixed_point.alpha_r),
                num(r.theta.theta_l),
                num(r.theta.theta_r),
                num(r.spectral_radius),
                num(r.residual)
            ))?,
            Err(e) => {
                eprintln!("B = {b}, k = {k}: {e}");
                complete = false;
            }
        }
    }
    println!("-> {}", f.finish()?.display());
    Ok(complete)
}

fn cd_config(ctx: &Context, kind: ChainKind, num_vertices: usize) -> CDConfig {
    let l = &ctx.config.learn;
    CDConfig {
        n_iter: l.n_iter,
        step: l.eta.step_size(),
        k: l.k_for(kind, num_vertices),
        n_particles: l.n_particles,
        clamp_beta: l.clamp_beta,
        trace_every: l.trace_every,
    }
}

fn learn_one(
    ctx: &Context,
    data: &Dataset,
    graph: &Arc<PartitionedGraph>,
    kind: ChainKind,
    truth: &ParamEstimate,
    stream: u64,
) -> Result<CDOutcome> {
    let config = cd_config(ctx, kind, graph.num_vertices());
    let mut rng = stream_rng(ctx.config.seed, stream);
    Ok(cd_learn(data, graph.clone(), &config, kind, &mut rng, Some(truth))?)
}

/// Columns of `learn.csv`: iteration, field_error, coupling_error, chain,
/// seed. Rows are grouped by chain in config order.
pub fn learn(ctx: &Context) -> Result<bool> {
    let l = &ctx.config.learn;
    let chains = l.chains.iter().map(|c| parse_chain(c)).collect::<Result<Vec<_>>>()?;
    let model = ctx.config.build_model(ctx.config.seed)?;
    let truth = ParamEstimate::of_model(&model);
    let data = generate_dataset(&model, l.n_samples, l.burn_in, l.thin, &mut stream_rng(ctx.config.seed, DATA_STREAM))?;
    let graph = model.shared_graph().clone();
    let outcomes: Vec<Result<CDOutcome>> =
        chains.par_iter().map(|&kind| learn_one(ctx, &data, &graph, kind, &truth, LEARN_STREAM)).collect();

    let mut f = OutputFile::create(&ctx.out, "learn.csv", "learn", &ctx.config)?;
    f.line("iteration,field_error,coupling_error,chain,seed")?;
    let mut complete = true;
    for (&kind, outcome) in chains.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                for t in &o.trace {
                    f.line(format!(
                        "{},{},{},{kind},{}",
                        t.iteration,
                        num(t.field_error),
                        num(t.coupling_error),
                        ctx.config.seed
                    ))?;
                }
                if let Some(t) = o.trace.last() {
                    println!(
                        "{kind}: field_error {:.5} coupling_error {:.5} chain work {}",
                        t.field_error, t.coupling_error, o.chain_work
                    );
                }
            }
            Err(e) => {
                eprintln!("{kind}: {e:#}");
                complete = false;
            }
        }
    }
    println!("-> {}", f.finish()?.display());
    Ok(complete)
}

struct ModelResult {
    chain: ChainKind,
    field_error: f64,
    coupling_error: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Writes `reproduce_models.csv` (x, model, chain, field_error,
/// coupling_error, status) with one row per model and chain, and
/// `reproduce.csv` (x, chain, models, failed, field_error_mean,
/// field_error_std, coupling_error_mean, coupling_error_std).
pub fn reproduce(ctx: &Context) -> Result<bool> {
    let r = &ctx.config.reproduce;
    let l = &ctx.config.learn;
    ensure!(r.models_per_point >= 1, "reproduce.models_per_point must be at least 1");
    r.gamma.validate()?;
    let chains = l.chains.iter().map(|c| parse_chain(c)).collect::<Result<Vec<_>>>()?;
    let sizes = r.x.iter().map(|&x| r.point(x)).collect::<Result<Vec<_>>>()?;

    let points: Vec<(usize, usize)> =
        (0..r.x.len()).flat_map(|xi| (0..r.models_per_point).map(move |m| (xi, m))).collect();
    let root = ctx.config.seed;
    let results: Vec<Result<Vec<ModelResult>>> = points
        .par_iter()
        .map(|&(xi, m)| {
            let started = Instant::now();
            let (n, hi) = sizes[xi];
            let (a, b) = (xi as u64, m as u64);
            let spec = GraphSpec::new(n, vec![0.5, 0.5], sbm_probs(r.p_in, r.p_out))?;
            let graph = gen_partitioned(&spec, &mut stream_rng(root, point_stream(a, b, 0)));
            let mut rng = stream_rng(root, point_stream(a, b, 1));
            let beta = Param::Random(Dist::Uniform { lo: 0.0, hi }).values(graph.num_edges(), "beta", &mut rng)?;
            let gamma = Param::Random(r.gamma).values(graph.num_vertices(), "gamma", &mut rng)?;
            let model = IsingModel::new(Arc::new(graph), beta, gamma)?;
            let truth = ParamEstimate::of_model(&model);
            let data =
                generate_dataset(&model, l.n_samples, l.burn_in, l.thin, &mut stream_rng(root, point_stream(a, b, 2)))?;
            let graph = model.shared_graph().clone();
            let out = chains
                .iter()
                .map(|&kind| {
                    let o = learn_one(ctx, &data, &graph, kind, &truth, point_stream(a, b, 3))?;
                    let last = o.trace.last().copied();
                    Ok(ModelResult {
                        chain: kind,
                        field_error: last.map_or(f64::NAN, |t| t.field_error),
                        coupling_error: last.map_or(f64::NAN, |t| t.coupling_error),
                    })
                })
                .collect::<Result<Vec<_>>>();
            log::info!("x = {} model {m}: {:.2}s", r.x[xi], started.elapsed().as_secs_f64());
            out
        })
        .collect();

    let mut per_model = OutputFile::create(&ctx.out, "reproduce_models.csv", "reproduce", &ctx.config)?;
    per_model.line("x,model,chain,field_error,coupling_error,status")?;
    let mut complete = true;
    for (&(xi, m), res) in points.iter().zip(&results) {
        match res {
            Ok(rows) => {
                for row in rows {
                    per_model.line(format!(
                        "{},{m},{},{},{},ok",
                        num(r.x[xi]),
                        row.chain,
                        num(row.field_error),
                        num(row.coupling_error)
                    ))?;
                }
            }
            Err(e) => {
                eprintln!("x = {} model {m}: {e:#}", r.x[xi]);
                complete = false;
                for &kind in &chains {
                    per_model.line(format!("{},{m},{kind},NaN,NaN,failed", num(r.x[xi])))?;
                }
            }
        }
    }
    per_model.finish()?;

    let mut f = OutputFile::create(&ctx.out, "reproduce.csv", "reproduce", &ctx.config)?;
    f.line("x,chain,models,failed,field_error_mean,field_error_std,coupling_error_mean,coupling_error_std")?;
    for (xi, &x) in r.x.iter().enumerate() {
        for &kind in &chains {
            let ok: Vec<&ModelResult> = points
                .iter()
                .zip(&results)
                .filter(|((pxi, _), _)| *pxi == xi)
                .filter_map(|(_, res)| res.as_ref().ok())
                .flat_map(|rows| rows.iter().filter(|row| row.chain == kind))
                .collect();
            let failed = r.models_per_point - ok.len();
            let (fm, fs) = mean_std(&ok.iter().map(|row| row.field_error).collect::<Vec<_>>());
            let (cm, cs) = mean_std(&ok.iter().map(|row| row.coupling_error).collect::<Vec<_>>());
            f.line(format!("{},{kind},{},{failed},{},{},{},{}", num(x), ok.len(), num(fm), num(fs), num(cm), num(cs)))?;
            println!("x={x} {kind}: field {fm:.5} ± {fs:.5}, coupling {cm:.5} ± {cs:.5} ({} models)", ok.len());
        }
    }
    println!("-> {}", f.finish()?.display());
    Ok(complete)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn spins_render_as_signs() {
        assert_eq!(spins_text(&SpinConfig::new(vec![1, -1, 1]).unwrap()), "+-+");
    }
}
