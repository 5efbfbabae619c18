use std::path::{Path, PathBuf};

use remix_core::data::GeneratorConfig;
use remix_core::train::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Per (identity, camera), the lowest sample id is the query.
    #[default]
    FirstPerCamera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: SplitRule,
    pub report: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { split: SplitRule::FirstPerCamera, report: "report.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub train_data: PathBuf,
    pub single_data: PathBuf,
    pub target_data: PathBuf,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    /// Threads used for embedding extraction during evaluation.
    pub workers: usize,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            train_data: "data/train.jsonl".into(),
            single_data: "data/single.jsonl".into(),
            target_data: "data/target.jsonl".into(),
            checkpoint: "checkpoint.json".into(),
            metrics: "metrics.jsonl".into(),
            workers: 1,
        }
    }
}

impl IoConfig {
    /// Re-anchor every relative path under `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        for p in [&mut self.train_data, &mut self.single_data, &mut self.target_data, &mut self.checkpoint, &mut self.metrics] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub io: IoConfig,
}

/// `--set a.b.c=value`: the value is read as JSON when it parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for part in &path[..path.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Config(format!("override {key:?} descends into a non-object")));
        }
        node = node.as_object_mut().unwrap().entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(path[path.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!("override {key:?} descends into a non-object"))),
    }
}

impl RunConfig {
    /// Parse `text` (or defaults when `None`), then apply overrides in order.
    /// Unknown keys anywhere are rejected.
    pub fn from_parts(text: Option<&str>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc: Value = match text {
            Some(t) => serde_json::from_str(t).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?,
            None => Value::Object(Map::new()),
        };
        if !doc.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
            ),
            None => None,
        };
        Self::from_parts(text.as_deref(), overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = |e: remix_core::Error| CliError::Config(e.to_string());
        self.generator.validate().map_err(c)?;
        self.model.validate().map_err(c)?;
        self.train.validate().map_err(c)?;
        if self.io.workers == 0 {
            return Err(CliError::Config("io.workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every leaf key of the default configuration with its default value.
pub fn documented_keys() -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            leaf => out.push((prefix.to_string(), leaf.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", &serde_json::to_value(RunConfig::default()).expect("config serializes"), &mut out);
    out
}

pub fn config_help() -> String {
    let keys = documented_keys();
    let width = keys.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from(
        "Configuration keys (JSON file via --config, or --set key=value) and their defaults.\n\
         train.pseudo_label_budget null means single_p * single_k * iterations;\n\
         generator.identity_dim null means the full generator.dim.\n\n",
    );
    for (k, v) in keys {
        s.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reference_values() {
        let c = RunConfig::default();
        assert_eq!((c.train.lambda, c.train.gamma), (0.999, 0.5));
        assert_eq!(
            [c.train.tau_ins_m, c.train.tau_ins_s, c.train.tau_aug, c.train.tau_cen_m, c.train.tau_cen_s],
            [0.1, 0.2, 0.1, 0.5, 0.6]
        );
        assert_eq!(c.train.pseudo.eps, 0.8);
        let b = c.train.batch;
        assert_eq!((b.multi_p, b.multi_k, b.single_p, b.single_k), (8, 4, 8, 4));
        assert_eq!(c.train.optimizer.lr, 0.00035);
    }

    #[test]
    fn overrides_apply_after_file() {
        let text = r#"{"seed": 3, "train": {"gamma": 0.25, "epochs": 4}}"#;
        let c = RunConfig::from_parts(
            Some(text),
            &["train.gamma=0".into(), "train.use_single_cam=false".into(), "io.metrics=out/m.jsonl".into()],
        )
        .unwrap();
        assert_eq!((c.seed, c.train.gamma, c.train.epochs, c.train.use_single_cam), (3, 0.0, 4, false));
        assert_eq!(c.io.metrics, PathBuf::from("out/m.jsonl"));
        let c = RunConfig::from_parts(None, &["train.pseudo_label_budget=100".into(), "train.pseudo.min_pts=3".into()]).unwrap();
        assert_eq!((c.train.pseudo_label_budget, c.train.pseudo.min_pts, c.train.pseudo.eps), (Some(100), 3, 0.8));
    }

    #[test]
    fn strict_parsing() {
        for (text, set) in [
            (Some(r#"{"trian": {}}"#), vec![]),
            (Some(r#"{"train": {"lamda": 0.9}}"#), vec![]),
            (None, vec!["train.batch.multi_q=3".to_string()]),
            (None, vec!["train.lambda".to_string()]),
            (None, vec!["seed.x=1".to_string()]),
            (None, vec!["train.lambda=2".to_string()]),
            (None, vec!["generator.train_identities=0".to_string()]),
            (Some("[1]"), vec![]),
        ] {
            assert!(matches!(RunConfig::from_parts(text, &set), Err(CliError::Config(_))), "{text:?} {set:?}");
        }
    }

    #[test]
    fn help_lists_every_key() {
        let help = config_help();
        let keys = documented_keys();
        assert!(keys.len() > 40);
        for (k, v) in &keys {
            assert!(help.contains(k) && help.contains(v.as_str()), "{k}");
        }
        assert!(keys.iter().any(|(k, v)| k == "train.lambda" && v == "0.999"));
        // the listing round-trips: setting each key to its listed default changes nothing
        let sets: Vec<String> = keys.iter().map(|(k, v)| format!("{k}={v}")).collect();
        assert_eq!(RunConfig::from_parts(None, &sets).unwrap(), RunConfig::default());
    }

    #[test]
    fn rebase_only_touches_relative_paths() {
        let mut io = IoConfig { metrics: "/abs/m.jsonl".into(), ..IoConfig::default() };
        io.rebase(Path::new("run"));
        assert_eq!(io.metrics, PathBuf::from("/abs/m.jsonl"));
        assert_eq!(io.checkpoint, PathBuf::from("run/checkpoint.json"));
    }
}
