use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mvge::eval::{
    link_prediction_eval, node_classification_eval, pairwise_eval, EvalOutcome, SplitSpec, Task,
};
use mvge::graph::{
    load_dataset, read_embedding_bin, read_embedding_csv, save_dataset, write_atomic, write_embedding_bin,
    write_embedding_csv, EDGES_FILE, FEATURES_FILE, LABELS_FILE,
};
use mvge::homophily::homophily_report;
use mvge::model::{embedding_dim_std, grid_search_alpha_beta, mean, train, MvgeConfig};
use mvge::synth::{generate_synthetic, spec_meta, SynthSpec};
use mvge::Matrix;

use crate::config::resolve;
use crate::{Cli, Command, SplitArgs, SynthArgs};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub dataset: PathBuf,
    /// sha256 over the dataset's edge, feature and label files.
    pub dataset_sha256: String,
    pub config: MvgeConfig,
    pub duration_secs: f64,
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Stats { dataset, bins } => stats(dataset, *bins, cli.out.as_deref()),
        Command::Synth(args) => synth(args, cli.seed.unwrap_or(0), cli.out.as_deref()),
        Command::Embed { dataset, model } => embed(dataset, &resolve(config, model, cli.seed)?, &out),
        Command::EvalNode {
            embeddings,
            dataset,
            split,
        } => {
            let h = read_embeddings(embeddings)?;
            let (ds, _) = load_dataset(dataset)?;
            let spec = split_spec(Task::Node, split, cli.seed)?;
            emit_eval(&node_classification_eval(&h, ds.labels()?, &spec)?, &out, "node", false)
        }
        Command::EvalLink {
            dataset,
            model,
            split,
            view,
        } => {
            let cfg = resolve(config, model, cli.seed)?;
            let (ds, _) = load_dataset(dataset)?;
            let spec = split_spec(Task::Link, split, cli.seed)?;
            emit_eval(&link_prediction_eval(&ds, &cfg, &spec, *view)?, &out, "link", true)
        }
        Command::EvalPair {
            embeddings,
            dataset,
            pairs,
            split,
        } => {
            let h = read_embeddings(embeddings)?;
            let (ds, _) = load_dataset(dataset)?;
            let spec = split_spec(Task::Pair, split, cli.seed)?;
            let count = pairs.unwrap_or(ds.graph.num_edges());
            emit_eval(&pairwise_eval(&h, ds.labels()?, count, &spec)?, &out, "pair", false)
        }
        Command::Gridsearch {
            dataset,
            model,
            grid_step,
            val_fraction,
            view,
        } => {
            let cfg = resolve(config, model, cli.seed)?;
            let (ds, _) = load_dataset(dataset)?;
            let res = grid_search_alpha_beta(&ds, &cfg, *grid_step, *val_fraction, *view)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_atomic(out.join("grid.csv"), res.to_csv().as_bytes())?;
            let best = serde_json::json!({
                "alpha": res.alpha,
                "beta": res.beta,
                "val_micro_f1": res.best_score,
            });
            let text = json_text(&best)?;
            write_atomic(out.join("best.json"), text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Diag { embed_dir } => diag(embed_dir, cli.out.as_deref()),
    }
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn split_spec(task: Task, args: &SplitArgs, seed: Option<u64>) -> Result<SplitSpec> {
    let mut spec = SplitSpec::new(task, seed.unwrap_or(0));
    spec.repeats = args.repeats;
    if let Some(f) = args.train_fraction {
        spec.train_fraction = f;
    }
    spec.validate()?;
    Ok(spec)
}

fn read_embeddings(path: &Path) -> Result<Matrix> {
    let m = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_embedding_csv(path)?,
        _ => read_embedding_bin(path)?,
    };
    Ok(m)
}

fn stats(dir: &Path, bins: usize, out: Option<&Path>) -> Result<()> {
    let (ds, ingest) = load_dataset(dir)?;
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| mvge::Error::MissingFile(dir.join(LABELS_FILE)))?;
    let report = homophily_report(&ds.graph, labels, bins)?;
    let json = serde_json::json!({
        "dataset": ds.name,
        "num_nodes": ds.num_nodes(),
        "num_edges": ds.graph.num_edges(),
        "num_features": ds.num_features(),
        "num_classes": labels.num_classes(),
        "global": report.global,
        "histogram": report.histogram,
        "isolated_nodes": report.num_undefined_local(),
        "ingest": ingest,
    });
    let text = json_text(&json)?;
    if let Some(out) = out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_atomic(out.join("stats.json"), text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn synth(args: &SynthArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let Some(out) = out else {
        bail!(mvge::Error::Config("synth needs --out <dir>".into()));
    };
    let d = SynthSpec::default();
    let spec = SynthSpec {
        num_nodes: args.nodes,
        num_classes: args.classes,
        target_homophily: args.homophily,
        avg_degree: args.avg_degree,
        feature_dim: args.feature_dim.unwrap_or(d.feature_dim),
        class_separation: args.separation.unwrap_or(d.class_separation),
        noise_sigma: args.noise.unwrap_or(d.noise_sigma),
        seed,
    };
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, out, spec_meta(&spec))?;
    let h = mvge::homophily::global_homophily(&ds.graph, ds.labels()?)?;
    println!("{}: {} nodes, {} edges, measured h = {h:.4}", out.display(), ds.num_nodes(), ds.graph.num_edges());
    Ok(())
}

/// sha256 over each dataset file, prefixed by its name so that moving bytes
/// between files changes the digest.
pub fn dataset_checksum(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in [EDGES_FILE, FEATURES_FILE, LABELS_FILE] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        hasher.update(name.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    let mut hex = String::with_capacity(64);
    for b in hasher.finalize() {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

fn embed(dir: &Path, cfg: &MvgeConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let (ds, _) = load_dataset(dir)?;
    let checksum = dataset_checksum(dir)?;
    let run = train(&ds, cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let e = &run.embeddings;
    write_embedding_bin(out.join("embeddings.bin"), &e.h)?;
    write_embedding_csv(out.join("embeddings.csv"), &e.h)?;
    write_embedding_bin(out.join("ego.bin"), &e.h_ego)?;
    write_embedding_bin(out.join("agg.bin"), &e.h_agg)?;
    write_atomic(out.join("trace.csv"), run.trace.to_csv().as_bytes())?;
    let manifest = RunManifest {
        tool: "mvge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        dataset: dir.to_path_buf(),
        dataset_sha256: checksum,
        config: cfg.clone(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_atomic(out.join(MANIFEST_FILE), json_text(&manifest)?.as_bytes())?;
    println!(
        "{}: {} x {} embeddings, {} epochs, {:.1}s",
        out.display(),
        e.h.rows(),
        e.h.cols(),
        run.trace.len(),
        manifest.duration_secs
    );
    Ok(())
}

fn emit_eval(outcome: &EvalOutcome, out: &Path, name: &str, with_splits: bool) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let text = json_text(&outcome.report)?;
    write_atomic(out.join(format!("eval-{name}.json")), text.as_bytes())?;
    write_atomic(out.join(format!("eval-{name}.csv")), outcome.report.to_csv().as_bytes())?;
    if with_splits {
        write_atomic(out.join(format!("eval-{name}-splits.json")), json_text(&outcome.splits)?.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn diag(dir: &Path, out: Option<&Path>) -> Result<()> {
    let out = out.unwrap_or(dir);
    let mut csv = String::from("view,dim,sigma\n");
    let mut summary = BTreeMap::new();
    for view in ["ego", "agg"] {
        let h = read_embedding_bin(dir.join(format!("{view}.bin")))?;
        let sigma = embedding_dim_std(&h)?;
        for (d, s) in sigma.iter().enumerate() {
            let _ = writeln!(csv, "{view},{d},{s}");
        }
        summary.insert(format!("mean_sigma_{view}"), mean(&sigma));
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(out.join("sigma.csv"), csv.as_bytes())?;
    let text = json_text(&summary)?;
    write_atomic(out.join("diag.json"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}
