//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Real-world datasets are read from `$MVGE_DATA_DIR/<name>` (default
//! `data/<name>` at the workspace root) in the dataset directory format.
//! Criteria that need a missing dataset fail and say which directory is
//! absent.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use mvge::augment::build_views;
use mvge::eval::{micro_f1, node_classification_eval, roc_auc, SplitSpec, Task};
use mvge::homophily::{global_homophily, local_homophily};
use mvge::model::{embedding_dim_std, mean, train, AdjacencyMode, MvgeConfig, MvgeModel, Objective, TaskMask};
use mvge::numerics::GradCheck;
use mvge::synth::{generate_synthetic, SynthSpec};
use mvge::{rng, Graph, Labels, Matrix};

type Outcome = Result<String, String>;

fn data_dir(name: &str) -> PathBuf {
    let root = std::env::var_os("MVGE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    root.join(name)
}

fn dataset(name: &str) -> Result<PathBuf, String> {
    let dir = data_dir(name);
    if dir.join("edges.tsv").exists() {
        Ok(dir)
    } else {
        Err(format!("dataset {name} not found at {}", dir.display()))
    }
}

fn mvge(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mvge"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("mvge {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn json_field(text: &str, key: &str) -> Result<f64, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    v[key].as_f64().ok_or_else(|| format!("no numeric '{key}' in output"))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn within_time(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed > limit {
        Err(format!("{what} took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn criterion_1() -> Outcome {
    let targets = [("cora", 0.81), ("citeseer", 0.74), ("texas", 0.11), ("wisconsin", 0.21), ("cornell", 0.3)];
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (name, target) in targets {
        let dir = match dataset(name) {
            Ok(d) => d,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        let start = Instant::now();
        let h = mvge(&["stats", p(&dir)]).and_then(|t| json_field(&t, "global"))?;
        let elapsed = start.elapsed();
        parts.push(format!("{name} {h:.3}"));
        if (h - target).abs() > 0.01 {
            failures.push(format!("{name}: h={h:.4}, expected {target} ± 0.01"));
        }
        if let Err(e) = within_time(elapsed, Duration::from_secs(5), name) {
            failures.push(e);
        }
    }
    if failures.is_empty() {
        Ok(parts.join(", "))
    } else {
        Err(failures.join("; "))
    }
}

/// embed with defaults, then eval-node with 10 repeats at 30% train.
fn node_pipeline(name: &str) -> Result<(f64, Duration), String> {
    let dir = dataset(name)?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let emb = tmp.path().join("emb");
    let start = Instant::now();
    mvge(&["--out", p(&emb), "embed", p(&dir)])?;
    let report = mvge(&[
        "--out",
        p(&tmp.path().join("eval")),
        "eval-node",
        "--embeddings",
        p(&emb.join("embeddings.bin")),
        "--dataset",
        p(&dir),
    ])?;
    Ok((json_field(&report, "mean")?, start.elapsed()))
}

fn node_floor(cases: &[(&str, f64)], limit: Duration) -> Outcome {
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for &(name, floor) in cases {
        match node_pipeline(name) {
            Ok((f1, elapsed)) => {
                parts.push(format!("{name} {f1:.4} in {:.0}s", elapsed.as_secs_f64()));
                if f1 < floor {
                    failures.push(format!("{name}: micro-F1 {f1:.4} < {floor}"));
                }
                if let Err(e) = within_time(elapsed, limit, name) {
                    failures.push(e);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        Ok(parts.join(", "))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_2() -> Outcome {
    node_floor(&[("wisconsin", 0.70), ("cornell", 0.69)], Duration::from_secs(120))
}

fn criterion_3() -> Outcome {
    node_floor(&[("cora", 0.80)], Duration::from_secs(600))
}

struct SynthRuns {
    /// (h, ego-only F1, agg-only F1, full F1, mean sigma ego, mean sigma agg)
    rows: Vec<(f64, f64, f64, f64, f64, f64)>,
}

fn synth_runs() -> Result<SynthRuns, String> {
    let mut rows = Vec::new();
    for h in [0.1, 0.9] {
        let ds = generate_synthetic(&SynthSpec {
            num_nodes: 1490,
            num_classes: 5,
            avg_degree: 4.0,
            target_homophily: h,
            ..SynthSpec::default()
        })
        .map_err(|e| e.to_string())?;
        let labels = ds.labels().map_err(|e| e.to_string())?;
        let mut f1 = Vec::new();
        let mut sigma = (0.0, 0.0);
        for mask in ["ego", "agg", "ego,agg,adj"] {
            let cfg = MvgeConfig {
                task_mask: mask.parse::<TaskMask>().map_err(|e| e.to_string())?,
                ..MvgeConfig::default()
            };
            let out = train(&ds, &cfg).map_err(|e| e.to_string())?;
            let report = node_classification_eval(&out.embeddings.h, labels, &SplitSpec::new(Task::Node, 0))
                .map_err(|e| e.to_string())?
                .report;
            f1.push(report.mean);
            if mask == "ego,agg,adj" {
                let s_ego = embedding_dim_std(&out.embeddings.h_ego).map_err(|e| e.to_string())?;
                let s_agg = embedding_dim_std(&out.embeddings.h_agg).map_err(|e| e.to_string())?;
                sigma = (mean(&s_ego), mean(&s_agg));
            }
        }
        rows.push((h, f1[0], f1[1], f1[2], sigma.0, sigma.1));
    }
    Ok(SynthRuns { rows })
}

fn criterion_4(runs: &Result<SynthRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for &(h, ego, agg, full, _, _) in &runs.rows {
        parts.push(format!("h={h}: ego {:.1} agg {:.1} full {:.1}", 100.0 * ego, 100.0 * agg, 100.0 * full));
        let gap = if h < 0.5 { ego - agg } else { agg - ego };
        if gap < 0.05 {
            let (hi, lo) = if h < 0.5 { ("ego", "agg") } else { ("agg", "ego") };
            failures.push(format!("h={h}: {hi} - {lo} = {:.1} points < 5", 100.0 * gap));
        }
        if full < ego.max(agg) - 0.03 {
            failures.push(format!("h={h}: full {:.1} more than 3 points below best single task", 100.0 * full));
        }
    }
    let detail = parts.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; [{detail}]", failures.join("; ")))
    }
}

fn criterion_5(runs: &Result<SynthRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let (_, _, _, _, e_lo, a_lo) = runs.rows[0];
    let (_, _, _, _, e_hi, a_hi) = runs.rows[1];
    let detail = format!("h=0.1: σ_ego {e_lo:.3} σ_agg {a_lo:.3}; h=0.9: σ_ego {e_hi:.3} σ_agg {a_hi:.3}");
    if e_lo > a_lo && (e_hi - a_hi) < (e_lo - a_lo) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (2, 6)];
    let (g, _) = Graph::from_edges(8, &edges).map_err(|e| e.to_string())?;
    let mut r = rng::stream(1, "toy", 0);
    let x = Matrix::from_fn(8, 2, |_, _| r.random_range(-1.0..1.0));
    let cfg = MvgeConfig {
        dim_ego: 3,
        dim_agg: 3,
        hidden_dim: 4,
        seed: 1,
        ..MvgeConfig::default()
    };
    let views = build_views(&g, &x, &cfg.walk_config()).map_err(|e| e.to_string())?;
    let model = MvgeModel::new(&cfg, views.x_ego.cols(), views.x_agg.cols()).map_err(|e| e.to_string())?;
    let obj = Objective::new(&g, &views, &cfg).map_err(|e| e.to_string())?;
    let values = model.param_values();
    let ev = obj.evaluate(&model, &values, AdjacencyMode::Full, true).map_err(|e| e.to_string())?;
    let grads = ev.grads.ok_or("no gradients returned")?;
    let report = GradCheck::new(1e-5, 1e-4)
        .check(&values, &grads, |prm| {
            obj.evaluate(&model, prm, AdjacencyMode::Full, false)
                .map(|e| e.losses.l_total)
                .unwrap_or(f64::NAN)
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "{} params, {} entries, max rel err {:.2e}, {:.2}s",
        values.len(),
        report.checked,
        report.max_rel_error,
        elapsed.as_secs_f64()
    );
    within_time(elapsed, Duration::from_secs(10), "gradcheck")?;
    if report.passed() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng::stream(7, "acceptance-oracles", 0);
    for case in 0..100 {
        let n = r.random_range(2..=200);
        let levels = r.random_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let (mut wins, mut total) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    total += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        if got != wins / total {
            return Err(format!("roc_auc case {case}: {got} vs {}", wins / total));
        }
    }
    for case in 0..1000 {
        let n = r.random_range(1..=100);
        let c = r.random_range(2..10);
        let t: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let q: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let acc = t.iter().zip(&q).filter(|(a, b)| a == b).count() as f64 / n as f64;
        let got = micro_f1(&q, &t).map_err(|e| e.to_string())?;
        if (got - acc).abs() > 1e-12 {
            return Err(format!("micro_f1 case {case}: {got} vs {acc}"));
        }
    }
    for case in 0..50 {
        let n = r.random_range(2..=200);
        let c = r.random_range(1..6);
        let mut edges = vec![(0, 1)];
        for _ in 0..r.random_range(0..3 * n) {
            edges.push((r.random_range(0..n), r.random_range(0..n)));
        }
        let (g, _) = Graph::from_edges(n, &edges).map_err(|e| e.to_string())?;
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let labels = Labels::new(y.clone(), c).map_err(|e| e.to_string())?;
        // enumerate the unique undirected non-loop edges independently of the CSR
        let mut uniq: Vec<(usize, usize)> =
            edges.iter().filter(|(u, v)| u != v).map(|&(u, v)| (u.min(v), u.max(v))).collect();
        uniq.sort_unstable();
        uniq.dedup();
        let same = uniq.iter().filter(|(u, v)| y[*u] == y[*v]).count();
        let expect = same as f64 / uniq.len() as f64;
        let got = global_homophily(&g, &labels).map_err(|e| e.to_string())?;
        if got != expect {
            return Err(format!("global homophily case {case}: {got} vs {expect}"));
        }
        let local = local_homophily(&g, &labels).map_err(|e| e.to_string())?;
        for v in 0..n {
            let nb: Vec<usize> = uniq
                .iter()
                .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
                .collect();
            let expect = (!nb.is_empty())
                .then(|| nb.iter().filter(|&&u| y[u] == y[v]).count() as f64 / nb.len() as f64);
            if local[v] != expect {
                return Err(format!("local homophily case {case} node {v}: {:?} vs {expect:?}", local[v]));
            }
        }
    }
    Ok("100 auc, 1000 micro-F1, 50 homophily instances".into())
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = tmp.path();
    for d in ["s1", "s2"] {
        mvge(&["--seed", "5", "--out", p(&t.join(d)), "synth", "--h", "0.3", "--n", "400"])?;
    }
    for f in ["edges.tsv", "features.csv", "labels.txt", "meta.json"] {
        let a = fs::read(t.join("s1").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(t.join("s2").join(f)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("synth file {f} differs between runs"));
        }
    }
    let ds = t.join("s1");
    mvge(&["--seed", "9", "--out", p(&t.join("e0")), "embed", p(&ds), "--epochs", "30"])?;
    let manifest = t.join("e0").join("manifest.json");
    for d in ["e1", "e2"] {
        mvge(&["--config", p(&manifest), "--out", p(&t.join(d)), "embed", p(&ds)])?;
    }
    for f in ["embeddings.bin", "ego.bin", "agg.bin"] {
        let runs: Vec<Vec<u8>> = ["e0", "e1", "e2"]
            .iter()
            .map(|d| fs::read(t.join(d).join(f)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        if runs[0] != runs[1] || runs[1] != runs[2] {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok("synth dirs and embedding binaries byte-identical".into())
}

fn criterion_9() -> Outcome {
    let dir = dataset("wisconsin")?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = mvge(&["--out", p(tmp.path()), "eval-link", p(&dir)])?;
    let auc = json_field(&report, "mean")?;
    let detail = format!("wisconsin link ROC-AUC {auc:.4}");
    if auc >= 0.80 {
        Ok(detail)
    } else {
        Err(format!("{detail} < 0.80"))
    }
}

fn main() {
    let names = [
        "homophily reproduction",
        "heterophilic node classification",
        "homophilic sanity",
        "ego/agg crossover",
        "embedding sigma",
        "gradient correctness",
        "metric oracles",
        "determinism",
        "link prediction",
    ];
    let mut results: Vec<Outcome> = vec![criterion_1(), criterion_2(), criterion_3()];
    let runs = synth_runs();
    results.push(criterion_4(&runs));
    results.push(criterion_5(&runs));
    results.push(criterion_6());
    results.push(criterion_7());
    results.push(criterion_8());
    results.push(criterion_9());

    let mut failed = 0;
    for (i, (name, res)) in names.iter().zip(&results).enumerate() {
        match res {
            Ok(detail) => println!("criterion {} ({name}): PASS  {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
