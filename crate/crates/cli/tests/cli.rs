use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use swmix_core::diagnostics::{tv_distance, StateHistogram};
use swmix_core::graph::complete_bipartite;
use swmix_core::oracle::brute_force_distribution;
use swmix_core::{IsingModel, SpinConfig};

fn swmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swmix")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = swmix(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

/// Rows after the comment block and the header line.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn body_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_edge_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(
        dir.path(),
        r#"{"graph": {"kind": "partitioned", "n": 30, "alphas": [0.5, 0.5], "probs": [[0, 0], [0, 0]]}}"#,
    );
    let out = dir.path().join("a");
    run_ok(&["--config", s(&empty), "--out", s(&out), "generate"]);
    let edges = body_lines(&out.join("graph.txt"));
    assert!(edges.is_empty(), "{edges:?}");

    let k55 = write_config(dir.path(), r#"{"graph": {"kind": "complete_bipartite", "n": 5, "m": 5}}"#);
    let stdout = run_ok(&["--config", s(&k55), "--out", s(&out), "generate"]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("edges 25"));
    assert_eq!(body_lines(&out.join("graph.txt")).len(), 25);

    let (x, y, z) = (dir.path().join("x"), dir.path().join("y"), dir.path().join("z"));
    run_ok(&["--seed", "7", "--out", s(&x), "generate"]);
    run_ok(&["--seed", "7", "--out", s(&y), "generate"]);
    run_ok(&["--seed", "8", "--out", s(&z), "generate"]);
    let read = |d: &Path| std::fs::read(d.join("graph.txt")).unwrap();
    assert_eq!(read(&x), read(&y));
    assert_ne!(body_lines(&x.join("graph.txt")), body_lines(&z.join("graph.txt")));
}

#[test]
fn generated_graph_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--seed", "3", "--out", s(dir.path()), "generate"]);
    let loaded = swmix_core::io::load_edge_list(dir.path().join("graph.txt")).unwrap();
    assert_eq!(loaded.graph.num_vertices(), 200);
    assert_eq!(loaded.graph.num_partitions(), 2);
    assert!(loaded.warnings.is_empty());
}

#[test]
fn zero_steps_echo_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"graph": {"kind": "complete_bipartite", "n": 2, "m": 3}, "model": {"beta": 0.2, "gamma": 0},
            "sample": {"steps": 0, "start": "up"}}"#,
    );
    run_ok(&["--config", s(&cfg), "--out", s(dir.path()), "sample"]);
    assert_eq!(body_lines(&dir.path().join("samples.txt")), vec!["0 +++++".to_string()]);
    assert_eq!(csv_rows(&dir.path().join("sample_summary.csv")), vec![vec!["0", "1", "1", "1"]]);
}

#[test]
fn zero_coupling_magnetization_is_centered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"graph": {"kind": "complete_bipartite", "n": 10, "m": 10}, "model": {"beta": 0, "gamma": 0},
            "sample": {"steps": 4000, "chain": "sw"}}"#,
    );
    run_ok(&["--config", s(&cfg), "--out", s(dir.path()), "sample"]);
    let rows = csv_rows(&dir.path().join("sample_summary.csv"));
    assert_eq!(rows.len(), 4001);
    let mean = rows.iter().skip(1).map(|r| r[1].parse::<f64>().unwrap()).sum::<f64>() / 4000.0;
    // With no couplings every step redraws 20 independent fair spins.
    let sd = (1.0 / (20.0 * 4000.0f64)).sqrt();
    assert!(mean.abs() < 3.0 * sd, "mean {mean}, sd {sd}");
}

#[test]
fn tiny_model_long_run_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"graph": {"kind": "complete_bipartite", "n": 2, "m": 2},
            "model": {"beta": [0.3, 0.1, 0.5, 0.2], "gamma": [0.1, 0, -0.2, 0.05]},
            "sample": {"steps": 50000, "chain": "sw"}}"#,
    );
    for chain in ["sw", "gibbs"] {
        let text = std::fs::read_to_string(&cfg).unwrap().replace("\"sw\"", &format!("\"{chain}\""));
        std::fs::write(&cfg, text).unwrap();
        let out = dir.path().join(chain);
        run_ok(&["--config", s(&cfg), "--out", s(&out), "sample"]);
        let mut hist = StateHistogram::new(4);
        for line in body_lines(&out.join("samples.txt")).iter().skip(1) {
            let spins =
                line.split_whitespace().nth(1).unwrap().chars().map(|c| if c == '+' { 1 } else { -1 }).collect();
            hist.record(&SpinConfig::new(spins).unwrap());
        }
        let graph = Arc::new(complete_bipartite(2, 2).unwrap());
        let model = IsingModel::new(graph, vec![0.3, 0.1, 0.5, 0.2], vec![0.1, 0.0, -0.2, 0.05]).unwrap();
        let tv = tv_distance(&hist, &brute_force_distribution(&model).unwrap()).unwrap();
        assert!(tv < 0.02, "{chain}: tv {tv}");
    }
}

#[test]
fn mix_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mix": {"n": [50, 100, 400], "seeds": 5, "b": 4}}"#);
    run_ok(&["--config", s(&cfg), "--out", s(dir.path()), "mix"]);
    let rows = csv_rows(&dir.path().join("mix.csv"));
    assert_eq!(rows.len(), 15);
    let expected_order: Vec<(String, String)> =
        ["50", "100", "400"].iter().flat_map(|n| (0..5).map(move |s| (n.to_string(), s.to_string()))).collect();
    let got: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[4].clone())).collect();
    assert_eq!(got, expected_order);
    let median = |n: &str| {
        let mut v: Vec<usize> = rows.iter().filter(|r| r[0] == n).map(|r| r[5].parse().unwrap()).collect();
        v.sort_unstable();
        v[v.len() / 2] as f64
    };
    assert!(median("400") / median("50") <= 3.0);
    assert!(rows.iter().all(|r| r[3] == "sw" && r[6] == "false"));
}

#[test]
fn fixedpoint_columns_follow_contract() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--out", s(dir.path()), "fixedpoint"]);
    let path = dir.path().join("fixedpoint.csv");
    let header = body_lines(&path)[0].clone();
    assert_eq!(header, "B,k,alpha_L_star,alpha_R_star,theta_L,theta_R,spectral_radius,residual");
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 21);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        if v[0] < 2.0 {
            assert_eq!((v[2], v[3]), (0.5, 0.5));
        }
        assert!(v[6] < 1.0, "spectral radius {r:?}");
        assert!(v[7] < 1e-10, "residual {r:?}");
    }
}

#[test]
fn fixedpoint_at_critical_b_reports_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"fixedpoint": {"b": [1.0, 2.0, 3.0], "k": [1.0]}}"#);
    let out = swmix(&["--config", s(&cfg), "--out", s(dir.path()), "fixedpoint"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = csv_rows(&dir.path().join("fixedpoint.csv"));
    let bs: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(bs, ["1", "3"]);
}

const TRIVIAL_LEARN: &str = r#"{
    "graph": {"kind": "complete_bipartite", "n": 3, "m": 3},
    "model": {"beta": 0, "gamma": 0},
    "learn": {"n_samples": 5000, "burn_in": 10, "thin": 1, "n_iter": 600, "n_particles": 100, "trace_every": 100}
}"#;

#[test]
fn learn_trivial_model_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TRIVIAL_LEARN);
    run_ok(&["--config", s(&cfg), "--seed", "4", "--out", s(dir.path()), "learn"]);
    let path = dir.path().join("learn.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# swmix learn\n# seed: 4\n# config: {\"seed\":4,"));
    assert_eq!(body_lines(&path)[0], "iteration,field_error,coupling_error,chain,seed");
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 12);
    for chain in ["sw", "gibbs"] {
        let last = rows.iter().rfind(|r| r[3] == chain).unwrap();
        assert_eq!(last[0], "600");
        assert_eq!(last[4], "4");
        let fe: f64 = last[1].parse().unwrap();
        assert!(fe < 0.05, "{chain}: field error {fe}");
    }
}

#[test]
fn rerun_from_header_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TRIVIAL_LEARN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["--config", s(&cfg), "--seed", "11", "--out", s(&a), "learn"]);
    run_ok(&["--config", s(&a.join("learn.csv")), "--out", s(&b), "learn"]);
    assert_eq!(std::fs::read(a.join("learn.csv")).unwrap(), std::fs::read(b.join("learn.csv")).unwrap());

    let mix =
        write_config(dir.path(), r#"{"mix": {"n": [20, 40], "seeds": 3, "chains": ["sw", "gibbs"], "max_steps": 50}}"#);
    run_ok(&["--config", s(&mix), "--seed", "2", "--out", s(&a), "mix"]);
    run_ok(&["--config", s(&a.join("mix.csv")), "--out", s(&b), "mix"]);
    assert_eq!(std::fs::read(a.join("mix.csv")).unwrap(), std::fs::read(b.join("mix.csv")).unwrap());
}

#[test]
fn output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mix": {"n": [20, 40], "seeds": 4, "chains": ["sw", "gibbs"], "max_steps": 100}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["--config", s(&cfg), "--jobs", "1", "--out", s(&a), "mix"]);
    run_ok(&["--config", s(&cfg), "--jobs", "3", "--out", s(&b), "mix"]);
    assert_eq!(std::fs::read(a.join("mix.csv")).unwrap(), std::fs::read(b.join("mix.csv")).unwrap());
}

#[test]
fn reproduce_has_models_per_point_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"learn": {"n_samples": 100, "n_iter": 30, "n_particles": 10, "trace_every": 30},
            "reproduce": {"sweep": "graph_size", "x": [20, 30], "models_per_point": 10}}"#,
    );
    run_ok(&["--config", s(&cfg), "--out", s(dir.path()), "reproduce"]);
    let models = csv_rows(&dir.path().join("reproduce_models.csv"));
    assert_eq!(models.len(), 2 * 10 * 2);
    for x in ["20", "30"] {
        for chain in ["sw", "gibbs"] {
            assert_eq!(models.iter().filter(|r| r[0] == x && r[2] == chain && r[5] == "ok").count(), 10);
        }
    }
    let summary = csv_rows(&dir.path().join("reproduce.csv"));
    assert_eq!(summary.len(), 4);
    for r in &summary {
        assert_eq!((r[2].as_str(), r[3].as_str()), ("10", "0"));
        assert!(r[5].parse::<f64>().unwrap() >= 0.0 && r[7].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn reproduce_enforces_size_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"reproduce": {"sweep": "graph_size", "x": [500]}}"#);
    let out = swmix(&["--config", s(&cfg), "--out", s(dir.path()), "reproduce"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_n"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sample": {"chain": "metropolis"}}"#);
    let out = swmix(&["--config", s(&cfg), "--out", s(dir.path()), "sample"]);
    assert_eq!(out.status.code(), Some(2));
    let out = swmix(&["--config", s(&dir.path().join("missing.json")), "generate"]);
    assert_eq!(out.status.code(), Some(2));
}
