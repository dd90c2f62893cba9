use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mvge::eval::one_hot;
use mvge::graph::{load_dataset, read_embedding_bin, read_embedding_csv, write_embedding_bin};

fn mvge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvge")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mvge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, h: &str, n: &str) {
    ok(&["--seed", "3", "--out", s(dir), "synth", "--h", h, "--n", n]);
}

#[test]
fn synth_h1_stats_is_exact() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "1.0", "200");
    let v: serde_json::Value = serde_json::from_str(&ok(&["stats", s(&d)])).unwrap();
    assert_eq!(v["global"], 1.0);
}

#[test]
fn synth_low_h_is_loadable_and_measured() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.1", "1490");
    let (ds, _) = load_dataset(&d).unwrap();
    assert_eq!(ds.num_nodes(), 1490);
    let h = mvge::homophily::global_homophily(&ds.graph, ds.labels().unwrap()).unwrap();
    assert!((0.07..=0.13).contains(&h), "{h}");
}

#[test]
fn bad_homophily_is_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let out = mvge(&["--out", s(t.path()), "synth", "--h", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_labels_names_the_file() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.5", "50");
    fs::remove_file(d.join("labels.txt")).unwrap();
    let out = mvge(&["stats", s(&d)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels.txt"));
}

#[test]
fn embed_defaults_give_width_128() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    let e = t.path().join("emb");
    synth(&d, "0.5", "500");
    ok(&["--out", s(&e), "embed", s(&d), "--epochs", "5"]);
    let bin = read_embedding_bin(e.join("embeddings.bin")).unwrap();
    let csv = read_embedding_csv(e.join("embeddings.csv")).unwrap();
    assert_eq!(bin.shape(), (500, 128));
    assert_eq!(csv.shape(), (500, 128));
    let trace = fs::read_to_string(e.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
}

#[test]
fn masked_task_has_zero_trace_column() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    let e = t.path().join("emb");
    synth(&d, "0.5", "100");
    ok(&["--out", s(&e), "embed", s(&d), "--epochs", "4", "--task-mask", "ego"]);
    let trace = fs::read_to_string(e.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("epoch,l_ego,l_agg,l_s,l_total"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 0.0);
        assert!(f[1] > 0.0);
    }
}

#[test]
fn zero_epochs_gives_empty_trace() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    let e = t.path().join("emb");
    synth(&d, "0.5", "60");
    ok(&["--out", s(&e), "embed", s(&d), "--epochs", "0"]);
    assert_eq!(fs::read_to_string(e.join("trace.csv")).unwrap(), "epoch,l_ego,l_agg,l_s,l_total\n");
    assert_eq!(read_embedding_bin(e.join("embeddings.bin")).unwrap().shape(), (60, 128));
}

#[test]
fn manifest_reproduces_embeddings() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.3", "120");
    let a = t.path().join("a");
    let b = t.path().join("b");
    ok(&["--seed", "11", "--out", s(&a), "embed", s(&d), "--epochs", "6", "--alpha", "0.3"]);
    let manifest = a.join("manifest.json");
    ok(&["--config", s(&manifest), "--out", s(&b), "embed", s(&d)]);
    for f in ["embeddings.bin", "ego.bin", "agg.bin", "embeddings.csv", "trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["alpha"], 0.3);
    assert_eq!(m["dataset_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn bad_config_is_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.3", "40");
    let cfg = t.path().join("c.json");
    fs::write(&cfg, r#"{"epochs": 2, "walk_lengths": []}"#).unwrap();
    let out = mvge(&["--config", s(&cfg), "--out", s(t.path()), "embed", s(&d)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_is_exit_3() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.3", "40");
    let out = mvge(&["--out", s(t.path()), "embed", s(&d), "--epochs", "20", "--lr", "1e200"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_node_on_one_hot_is_perfect() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.5", "200");
    let (ds, _) = load_dataset(&d).unwrap();
    let emb = t.path().join("onehot.bin");
    write_embedding_bin(&emb, &one_hot(ds.labels().unwrap())).unwrap();
    let out = t.path().join("eval");
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["--out", s(&out), "eval-node", "--embeddings", s(&emb), "--dataset", s(&d)])).unwrap();
    assert_eq!(v["mean"], 1.0);
    let csv = fs::read_to_string(out.join("eval-node.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);

    let v: serde_json::Value =
        serde_json::from_str(&ok(&["--out", s(&out), "eval-pair", "--embeddings", s(&emb), "--dataset", s(&d)])).unwrap();
    assert!(v["mean"].as_f64().unwrap() > 0.99);
}

#[test]
fn eval_link_writes_split_manifest() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.5", "150");
    let out = t.path().join("eval");
    ok(&[
        "--out", s(&out), "eval-link", s(&d), "--epochs", "10", "--repeats", "2", "--dim-ego", "8", "--dim-agg", "8",
        "--hidden-dim", "16",
    ]);
    let splits: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval-link-splits.json")).unwrap()).unwrap();
    assert_eq!(splits.as_array().unwrap().len(), 2);
    assert!(!splits[0]["test_pos"].as_array().unwrap().is_empty());
    assert!(out.join("eval-link.json").exists());
}

#[test]
fn gridsearch_emits_121_rows() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    synth(&d, "0.5", "60");
    let out = t.path().join("grid");
    ok(&[
        "--out", s(&out), "gridsearch", s(&d), "--epochs", "2", "--dim-ego", "4", "--dim-agg", "4", "--hidden-dim",
        "8", "--walk-lengths", "3",
    ]);
    let csv = fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("alpha,beta,val_micro_f1"));
    assert_eq!(csv.lines().count(), 122);
    assert!(out.join("best.json").exists());
}

#[test]
fn diag_splits_views() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("ds");
    let e = t.path().join("emb");
    synth(&d, "0.5", "80");
    ok(&["--out", s(&e), "embed", s(&d), "--epochs", "3", "--dim-ego", "6", "--dim-agg", "4"]);
    ok(&["diag", s(&e)]);
    let csv = fs::read_to_string(e.join("sigma.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "view,dim,sigma");
    assert_eq!(rows.len(), 11);
    assert_eq!(rows.iter().filter(|r| r.starts_with("ego,")).count(), 6);
    assert_eq!(rows.iter().filter(|r| r.starts_with("agg,")).count(), 4);
}

#[test]
fn synth_is_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    synth(&a, "0.2", "300");
    synth(&b, "0.2", "300");
    for f in ["edges.tsv", "features.csv", "labels.txt", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
