use std::path::{Path, PathBuf};

use scgrec::data::DatasetPaths;
use scgrec::graph::GraphConfig;
use scgrec::model::{FusionWeights, Normalization};
use scgrec::synthetic::SynthConfig;
use scgrec::train::Hyperparams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A configuration problem. The CLI exits with status 2 on these.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_games: usize,
    pub min_total_minutes: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_games: 5,
            min_total_minutes: 60.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Clamped to the number of users whose engagements can be split.
    pub num_eval_users: usize,
    pub holdout_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            num_eval_users: 50_000,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub top_games: usize,
    pub top_genres: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            top_games: 20,
            top_genres: 5,
        }
    }
}

/// Grid for the fusion-weight sweep. Each axis varies one weight while the
/// other stays at its `training` value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub w_social: Vec<f64>,
    pub w_context: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let grid = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        SweepConfig {
            w_social: grid.clone(),
            w_context: grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `engagements.tsv`, `social.tsv` and `catalog.tsv`.
    pub data_dir: PathBuf,
    pub engagements: Option<PathBuf>,
    pub social: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Seeds user sampling and the holdout split.
    pub seed: u64,
    pub filter: FilterConfig,
    pub sample_fraction: f64,
    pub split: SplitConfig,
    pub graph: GraphConfig,
    pub normalization: Normalization,
    pub training: Hyperparams,
    pub synthetic: SynthConfig,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            engagements: None,
            social: None,
            catalog: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            filter: FilterConfig::default(),
            sample_fraction: 0.3,
            split: SplitConfig::default(),
            graph: GraphConfig::default(),
            normalization: Normalization::default(),
            training: Hyperparams::default(),
            synthetic: SynthConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn dataset_paths(&self) -> DatasetPaths {
        let defaults = DatasetPaths::in_dir(&self.data_dir);
        DatasetPaths {
            engagements: self.engagements.clone().unwrap_or(defaults.engagements),
            social: self.social.clone().unwrap_or(defaults.social),
            catalog: self.catalog.clone().unwrap_or(defaults.catalog),
        }
    }

    /// Every violated constraint as `field: message`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push(format!("{field}: {msg}"));
            }
        };
        let t = &self.training;
        check(self.filter.min_games >= 1, "filter.min_games", "must be >= 1");
        check(
            self.filter.min_total_minutes >= 0.0 && self.filter.min_total_minutes.is_finite(),
            "filter.min_total_minutes",
            "must be a finite number >= 0",
        );
        check(
            self.sample_fraction > 0.0 && self.sample_fraction <= 1.0,
            "sample_fraction",
            "must lie in (0, 1]",
        );
        check(
            self.split.holdout_fraction > 0.0 && self.split.holdout_fraction < 0.5,
            "split.holdout_fraction",
            "must lie in (0, 0.5)",
        );
        check(self.graph.tau_p >= 0.0, "graph.tau_p", "must be >= 0");
        check(
            (0.0..1.0).contains(&self.graph.tau_t),
            "graph.tau_t",
            "must lie in [0, 1)",
        );
        check(
            self.graph.time_scale.is_none_or(|s| s > 0.0 && s.is_finite()),
            "graph.time_scale",
            "must be a finite number > 0",
        );
        check(t.dim >= 1, "training.dim", "must be >= 1");
        check(
            t.lr >= 0.0 && t.lr.is_finite(),
            "training.lr",
            "must be a finite number >= 0",
        );
        check(t.batch_size >= 1, "training.batch_size", "must be >= 1");
        check(
            t.lambda >= 0.0 && t.lambda.is_finite(),
            "training.lambda",
            "must be a finite number >= 0",
        );
        check(t.patience >= 1, "training.patience", "must be >= 1");
        check(t.max_epochs >= 1, "training.max_epochs", "must be >= 1");
        check(t.negatives >= 1, "training.negatives", "must be >= 1");
        check(
            t.validation_users != Some(0),
            "training.validation_users",
            "must be >= 1 when set",
        );
        check(
            FusionWeights::new(t.w_context, t.w_social).is_ok(),
            "training.w_context/w_social",
            "must lie in [0, 1] with w_context + w_social <= 1",
        );
        check(self.analysis.top_games >= 2, "analysis.top_games", "must be >= 2");
        check(self.analysis.top_genres >= 1, "analysis.top_genres", "must be >= 1");
        let unit = |v: &[f64]| v.iter().all(|w| (0.0..=1.0).contains(w));
        check(
            unit(&self.sweep.w_social),
            "sweep.w_social",
            "values must lie in [0, 1]",
        );
        check(
            unit(&self.sweep.w_context),
            "sweep.w_context",
            "values must lie in [0, 1]",
        );
        if let Err(e) = self.synthetic.validate() {
            out.push(format!("synthetic: {e}"));
        }
        out
    }
}

/// Sets `path` (dot separated) in a JSON object, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, key) in parts.iter().enumerate() {
        if key.is_empty() {
            return Err(ConfigError(format!("override key `{path}` has an empty component")));
        }
        let obj = node.as_object_mut().ok_or_else(|| {
            ConfigError(format!(
                "override `{path}`: `{}` is not an object",
                parts[..depth].join(".")
            ))
        })?;
        if depth + 1 == parts.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// Reads the optional config file, applies `key=value` overrides (values
/// parsed as JSON, else taken as strings) and validates the result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !value.is_object() {
        return Err(ConfigError("config must be a JSON object".into()));
    }
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{o}` is not of the form key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key.trim(), parsed)?;
    }
    let config: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(ConfigError(format!("invalid config: {}", problems.join("; "))));
    }
    Ok(config)
}
