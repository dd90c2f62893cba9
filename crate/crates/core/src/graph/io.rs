//! On-disk formats: dataset directories and embedding files.
//!
//! A dataset directory holds `edges.tsv`, `features.csv`, an optional
//! `labels.txt` and `meta.json`. Embeddings are stored either as a binary
//! blob (16-byte header `MVGE | version | N | dim`, little-endian, followed
//! by `N * dim` f32 values) or as CSV with a `node,e0,..` header.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, EdgeRepairs, Graph, Labels};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"MVGE";
pub const EMBEDDING_VERSION: u32 = 1;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub num_nodes: usize,
    pub num_features: usize,
    #[serde(default)]
    pub num_classes: Option<usize>,
    /// Any further keys (e.g. the generator settings of a synthetic graph).
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Counts of the repairs applied while ingesting `edges.tsv`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub edge_lines: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join(META_FILE);
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

/// Load and validate a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Dataset, IngestReport)> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let n = meta.num_nodes;

    let edge_path = dir.join(EDGES_FILE);
    let text = read_text(&edge_path)?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut id = |what: &str| -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| parse_err(&edge_path, i + 1, format!("missing {what} node id")))?;
            let id: usize = tok
                .parse()
                .map_err(|_| parse_err(&edge_path, i + 1, format!("non-integer node id '{tok}'")))?;
            if id >= n {
                return Err(parse_err(
                    &edge_path,
                    i + 1,
                    format!("node id {id} outside 0..{n} (ids must be contiguous)"),
                ));
            }
            Ok(id)
        };
        let u = id("source")?;
        let v = id("target")?;
        if parts.next().is_some() {
            return Err(parse_err(&edge_path, i + 1, "expected exactly two node ids"));
        }
        edges.push((u, v));
    }
    let (graph, EdgeRepairs { self_loops_dropped, duplicates_dropped }) =
        Graph::from_edges(n, &edges)?;
    let report = IngestReport {
        edge_lines: edges.len(),
        self_loops_dropped,
        duplicates_dropped,
    };

    let feat_path = dir.join(FEATURES_FILE);
    let text = read_text(&feat_path)?;
    let mut values = Vec::with_capacity(n * meta.num_features);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(&feat_path, i + 1, format!("bad number '{}'", tok.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(&feat_path, i + 1, "non-finite feature value"));
            }
            values.push(v);
        }
        if values.len() - before != meta.num_features {
            return Err(parse_err(
                &feat_path,
                i + 1,
                format!(
                    "expected {} features, found {}",
                    meta.num_features,
                    values.len() - before
                ),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Validation(format!(
            "{} has {rows} rows but meta.json declares {n} nodes",
            feat_path.display()
        )));
    }
    let features = Matrix::from_vec(n, meta.num_features, values)?;

    let label_path = dir.join(LABELS_FILE);
    let labels = if label_path.exists() {
        let text = read_text(&label_path)?;
        let mut ys = Vec::with_capacity(n);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let y: usize = line
                .parse()
                .map_err(|_| parse_err(&label_path, i + 1, format!("non-integer label '{line}'")))?;
            ys.push(y);
        }
        if ys.len() != n {
            return Err(Error::Validation(format!(
                "{} has {} labels for {n} nodes",
                label_path.display(),
                ys.len()
            )));
        }
        Some(match meta.num_classes {
            Some(c) => Labels::new(ys, c)?,
            None => Labels::from_values(ys),
        })
    } else {
        None
    };

    let ds = Dataset::new(meta.name.clone(), graph, features, labels)?;
    Ok((ds, report))
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp: PathBuf = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Write a dataset directory. `extra` keys are merged into `meta.json`.
pub fn save_dataset(
    ds: &Dataset,
    dir: impl AsRef<Path>,
    extra: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for (u, v) in ds.graph.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write_atomic(dir.join(EDGES_FILE), edges.as_bytes())?;

    let mut feats = String::new();
    for r in 0..ds.features.rows() {
        let row: Vec<String> = ds.features.row(r).iter().map(|v| format!("{v}")).collect();
        feats.push_str(&row.join(","));
        feats.push('\n');
    }
    write_atomic(dir.join(FEATURES_FILE), feats.as_bytes())?;

    if let Some(labels) = &ds.labels {
        let mut text = String::new();
        for y in labels.values() {
            text.push_str(&format!("{y}\n"));
        }
        write_atomic(dir.join(LABELS_FILE), text.as_bytes())?;
    }

    let meta = DatasetMeta {
        name: ds.name.clone(),
        num_nodes: ds.num_nodes(),
        num_features: ds.num_features(),
        num_classes: ds.labels.as_ref().map(Labels::num_classes),
        extra,
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serialises");
    json.push('\n');
    write_atomic(dir.join(META_FILE), json.as_bytes())
}

/// Serialise a matrix in the binary embedding format (values narrowed to f32).
pub fn embedding_bin_bytes(m: &Matrix) -> Result<Vec<u8>> {
    let n = u32::try_from(m.rows())
        .map_err(|_| Error::Validation("too many rows for the binary format".into()))?;
    let dim = u32::try_from(m.cols())
        .map_err(|_| Error::Validation("too many columns for the binary format".into()))?;
    let mut out = Vec::with_capacity(16 + 4 * m.as_slice().len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_embedding_bin(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_atomic(path, &embedding_bin_bytes(m)?)
}

pub fn parse_embedding_bin(bytes: &[u8], origin: &Path) -> Result<Matrix> {
    let bad = |msg: String| parse_err(origin, 0, msg);
    if bytes.len() < 16 {
        return Err(bad(format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != EMBEDDING_MAGIC {
        return Err(bad("bad magic, expected \"MVGE\"".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != EMBEDDING_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (n, dim) = (word(8) as usize, word(12) as usize);
    let expected = 16 + 4 * n * dim;
    if bytes.len() != expected {
        return Err(bad(format!(
            "header says {n}x{dim} ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Matrix::from_vec(n, dim, values)
}

pub fn read_embedding_bin(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_bin(&bytes, path)
}

pub fn embedding_csv_string(m: &Matrix) -> String {
    let mut out = String::from("node");
    for j in 0..m.cols() {
        out.push_str(&format!(",e{j}"));
    }
    out.push('\n');
    for i in 0..m.rows() {
        out.push_str(&i.to_string());
        for &v in m.row(i) {
            out.push_str(&format!(",{:.8e}", v as f32));
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_atomic(path, embedding_csv_string(m).as_bytes())
}

pub fn read_embedding_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"node")
        || cols[1..].iter().enumerate().any(|(j, c)| *c != format!("e{j}"))
    {
        return Err(parse_err(path, 1, "malformed header, expected node,e0,...,e{dim-1}"));
    }
    let dim = cols.len() - 1;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split(',');
        let node: usize = toks
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| parse_err(path, i + 2, "bad node index"))?;
        if node != rows {
            return Err(parse_err(path, i + 2, format!("expected node {rows}, found {node}")));
        }
        let before = values.len();
        for t in toks {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| parse_err(path, i + 2, format!("bad number '{t}'")))?;
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(parse_err(
                path,
                i + 2,
                format!("expected {dim} values, found {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    Matrix::from_vec(rows, dim, values)
}
