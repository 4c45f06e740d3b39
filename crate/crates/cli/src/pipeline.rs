use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use scgrec::data::{self, Dataset, Split};
use scgrec::graph::{build_context_graph, save_graph, ContextGraph, GraphManifest};
use scgrec::model::checkpoint::{load_checkpoint, CheckpointHeader};
use scgrec::model::{ModelInputs, ModelState};
use scgrec::rng::derive_seed;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

const SAMPLE_STREAM: u64 = 10;
const SPLIT_STREAM: u64 = 11;

pub fn out(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

pub fn input_files(config: &RunConfig) -> Vec<PathBuf> {
    let p = config.dataset_paths();
    vec![p.engagements, p.social, p.catalog]
}

/// Loads the tables, then filters and samples users.
pub fn load(config: &RunConfig) -> Result<Dataset> {
    let paths = config.dataset_paths();
    let (raw, report) =
        data::load_dataset(&paths).with_context(|| format!("loading data from {}", config.data_dir.display()))?;
    if report.total_dropped() > 0 {
        warn!("integrity: {report:?}");
    }
    info!(
        "loaded {} engagements, {} users, {} games, {} social edges",
        raw.engagements().len(),
        raw.users().len(),
        raw.games().len(),
        raw.social().len()
    );
    let filtered = data::filter_users(&raw, config.filter.min_games, config.filter.min_total_minutes)?;
    let sampled = data::sample_users(
        &filtered,
        config.sample_fraction,
        derive_seed(config.seed, SAMPLE_STREAM),
    )?;
    info!(
        "after filtering and sampling: {} users, {} engagements",
        sampled.users().len(),
        sampled.engagements().len()
    );
    if sampled.engagements().is_empty() {
        bail!("no engagements left after filtering and sampling");
    }
    Ok(sampled)
}

pub struct Prepared {
    pub split: Split,
    pub graph: ContextGraph,
    pub graph_manifest: GraphManifest,
    pub inputs: ModelInputs,
}

/// Load, split, build the graph on the training table and index the inputs.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let dataset = load(config)?;
    let available = data::splittable_users(&dataset, config.split.holdout_fraction);
    let mut eval_users = config.split.num_eval_users;
    if eval_users > available {
        warn!("split.num_eval_users = {eval_users} exceeds the {available} users with enough engagements; using {available}");
        eval_users = available;
    }
    let split = data::split_holdout(
        &dataset,
        eval_users,
        config.split.holdout_fraction,
        derive_seed(config.seed, SPLIT_STREAM),
    )?;
    info!(
        "split: {} training engagements, {} evaluation users",
        split.train.engagements().len(),
        split.eval_users.len()
    );
    let (graph, graph_manifest) = build_context_graph(&split.train, &config.graph)?;
    info!("context graph: {:?}", graph_manifest.edge_counts);
    let inputs = ModelInputs::new(&split.train, &graph, config.normalization)?;
    Ok(Prepared {
        split,
        graph,
        graph_manifest,
        inputs,
    })
}

pub fn write_graph(config: &RunConfig, p: &Prepared) -> Result<()> {
    save_graph(&out(config, "graph"), &p.graph, &p.graph_manifest)?;
    Ok(())
}

pub fn write_split(dir: &Path, split: &Split) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    data::write_engagements(&dir.join("train.tsv"), split.train.engagements())?;
    data::write_engagements(&dir.join("validation.tsv"), split.validation.values().flatten())?;
    data::write_engagements(&dir.join("test.tsv"), split.test.values().flatten())?;
    Ok(())
}

/// SHA-256 over the training engagements, identifying the split a model was trained on.
pub fn train_fingerprint(split: &Split) -> String {
    let mut h = Sha256::new();
    for e in split.train.engagements() {
        h.update(e.user_id.to_le_bytes());
        h.update(e.game_id.to_le_bytes());
        h.update(e.dwelling_minutes.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Loads the checkpoint and checks that it was trained on the same training
/// table and normalization as `p`.
pub fn load_model(config: &RunConfig, p: &Prepared) -> Result<(ModelState, CheckpointHeader)> {
    let path = out(config, "model.ckpt");
    let (state, header) =
        load_checkpoint(&path).with_context(|| format!("loading {} (run `train` first)", path.display()))?;
    if header.user_ids != p.inputs.users() || header.game_ids != p.inputs.games() {
        bail!(
            "checkpoint {} was trained on different users or games than the current configuration selects",
            path.display()
        );
    }
    if header.hyperparams.get("train_fingerprint").and_then(|v| v.as_str())
        != Some(train_fingerprint(&p.split).as_str())
    {
        bail!(
            "checkpoint {} was trained on a different training split than the current configuration selects",
            path.display()
        );
    }
    if header.normalization != config.normalization {
        bail!(
            "checkpoint uses {:?} normalization, config selects {:?}",
            header.normalization,
            config.normalization
        );
    }
    Ok((state, header))
}
