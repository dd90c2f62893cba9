//! Config resolution: defaults < `--config` JSON < flags.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

use mvge::model::MvgeConfig;

use crate::ModelArgs;

/// Read a bare config object or the `config` key of a run manifest.
pub fn read_config_file(path: &Path) -> Result<MvgeConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = match value.get("config") {
        Some(c) if value.get("tool").is_some() || value.get("version").is_some() => c.clone(),
        _ => value,
    };
    let cfg: MvgeConfig = serde_json::from_value(inner)
        .map_err(|e| mvge::Error::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn resolve(file: Option<&Path>, flags: &ModelArgs, seed: Option<u64>) -> Result<MvgeConfig> {
    let mut cfg = match file {
        Some(p) => read_config_file(p)?,
        None => MvgeConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = flags.$field.clone() { cfg.$field = v; })*
        };
    }
    apply!(
        epochs, alpha, beta, lr, dim_ego, dim_agg, hidden_dim, walk_lengths, aggr, merge, task_mask,
        ego_encoder, gcn_bias, adj_loss_mode, sample_ratio
    );
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"alpha": 0.2, "beta": 0.4, "epochs": 7}"#).unwrap();
        let flags = ModelArgs {
            beta: Some(0.9),
            ..ModelArgs::default()
        };
        let cfg = resolve(Some(&path), &flags, Some(42)).unwrap();
        assert_eq!((cfg.alpha, cfg.beta, cfg.epochs, cfg.seed), (0.2, 0.9, 7, 42));
        assert_eq!(cfg.hidden_dim, 128);
    }

    #[test]
    fn manifest_config_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"tool":"mvge","version":"0.1.0","config":{"epochs":3,"seed":9}}"#).unwrap();
        let cfg = resolve(Some(&path), &ModelArgs::default(), None).unwrap();
        assert_eq!((cfg.epochs, cfg.seed), (3, 9));
        fs::write(&path, r#"{"epochs": 3, "bogus": 1}"#).unwrap();
        assert!(resolve(Some(&path), &ModelArgs::default(), None).is_err());
    }
}
