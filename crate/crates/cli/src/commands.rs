use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use log::info;
use scgrec::analysis::{write_reports, AnalysisOptions};
use scgrec::data::UserId;
use scgrec::eval::{
    ablation_variant, evaluate, popularity_baseline, recommend, Ablation, MethodMetrics, MetricsReport, Phase,
    PopularityKind, ScgrecRecommender,
};
use scgrec::model::checkpoint::{save_checkpoint, CheckpointHeader};
use scgrec::model::{FusionWeights, ModelConfig};
use scgrec::synthetic::{generate, write_synthetic};
use scgrec::train::gradcheck::run_reference_check;
use scgrec::train::{train_with, Hyperparams, TrainOutcome};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::pipeline::{self, out, Prepared};

pub fn gen_synthetic(config: &RunConfig) -> Result<()> {
    let data = generate(&config.synthetic)?;
    write_synthetic(&data, &config.data_dir)?;
    info!(
        "wrote {} engagements for {} users and {} games to {}",
        data.dataset.engagements().len(),
        data.dataset.users().len(),
        data.dataset.games().len(),
        config.data_dir.display()
    );
    Ok(())
}

pub fn analyze(config: &RunConfig) -> Result<()> {
    let d = pipeline::load(config)?;
    let options = AnalysisOptions {
        top_games: config.analysis.top_games,
        top_genres: config.analysis.top_genres,
        time_scale: config.graph.time_scale,
        seed: config.seed,
    };
    let dir = out(config, "analysis");
    let summary = write_reports(&d, &options, &dir)?;
    info!("analysis written to {}: {:?}", dir.display(), summary.stats);
    Ok(())
}

pub fn build_graph(config: &RunConfig) -> Result<()> {
    let p = pipeline::prepare(config)?;
    pipeline::write_graph(config, &p)?;
    info!("graph written to {}", out(config, "graph").display());
    Ok(())
}

/// Trains with the log streamed to `log_path`, one JSON object per epoch.
fn train_logged(
    p: &Prepared,
    model: &ModelConfig,
    hp: &Hyperparams,
    log_path: Option<&std::path::Path>,
) -> Result<TrainOutcome> {
    let mut writer = match log_path {
        Some(path) => Some(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => None,
    };
    let mut write_error = None;
    let outcome = train_with(&p.split, &p.inputs, model, hp, &mut |e| {
        if let Some(w) = writer.as_mut() {
            let line = serde_json::to_string(e).expect("epoch log serializes");
            if let Err(err) = writeln!(w, "{line}") {
                write_error.get_or_insert(err);
            }
        }
    })?;
    if let Some(err) = write_error {
        return Err(err).context("writing the training log");
    }
    if let Some(mut w) = writer {
        w.flush().context("writing the training log")?;
    }
    info!(
        "best epoch {} (val ndcg@10 {:?})",
        outcome.best_epoch, outcome.best_val_ndcg10
    );
    Ok(outcome)
}

pub fn train(config: &RunConfig) -> Result<()> {
    let p = pipeline::prepare(config)?;
    pipeline::write_graph(config, &p)?;
    pipeline::write_split(&out(config, "split"), &p.split)?;
    let model = ModelConfig::full(config.training.fusion()?);
    let outcome = train_logged(&p, &model, &config.training, Some(&out(config, "train_log.jsonl")))?;
    let header = CheckpointHeader::describe(
        &outcome.state,
        model,
        config.normalization,
        json!({
            "training": config.training,
            "train_fingerprint": pipeline::train_fingerprint(&p.split),
        }),
        p.inputs.users().to_vec(),
        p.inputs.games().to_vec(),
    );
    let path = out(config, "model.ckpt");
    save_checkpoint(&path, &outcome.state, &header)?;
    let summary = json!({
        "best_epoch": outcome.best_epoch,
        "best_val_ndcg10": outcome.best_val_ndcg10,
        "epochs_run": outcome.log.len(),
    });
    std::fs::write(
        out(config, "train_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    info!("checkpoint written to {}", path.display());
    Ok(())
}

fn report_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Test => "metrics",
        Phase::Validation => "metrics_validation",
    }
}

pub fn evaluate_cmd(config: &RunConfig, phase: Phase, ablations: bool) -> Result<()> {
    let p = pipeline::prepare(config)?;
    let (state, header) = pipeline::load_model(config, &p)?;
    let mut rows = Vec::new();
    let full = ScgrecRecommender::new("scgrec", &state, &p.inputs, header.config);
    rows.push(evaluate(&full, &p.split, phase)?);
    for kind in [PopularityKind::Count, PopularityKind::Time] {
        rows.push(evaluate(&popularity_baseline(&p.split.train, kind), &p.split, phase)?);
    }
    if ablations {
        for variant in Ablation::ALL {
            info!("training {}", variant.name());
            let model = ablation_variant(&header.config, variant);
            let outcome = train_logged(&p, &model, &config.training, None)?;
            let rec = ScgrecRecommender::new(variant.name(), &outcome.state, &p.inputs, model);
            rows.push(evaluate(&rec, &p.split, phase)?);
        }
    }
    let report = MetricsReport { phase, rows };
    let name = report_name(phase);
    report.write(
        &out(config, &format!("{name}.json")),
        &out(config, &format!("{name}.csv")),
    )?;
    print!("{}", report.to_csv());
    Ok(())
}

pub fn recommend_cmd(config: &RunConfig, user: UserId, k: usize) -> Result<()> {
    let p = pipeline::prepare(config)?;
    let (state, header) = pipeline::load_model(config, &p)?;
    if p.inputs.user_index(user).is_none() {
        bail!("user {user} has no training engagements under this configuration");
    }
    let rec = ScgrecRecommender::new("scgrec", &state, &p.inputs, header.config);
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (game, score) in recommend(&rec, &p.split.train, user, k)? {
        writeln!(w, "{game}\t{score}")?;
    }
    Ok(())
}

pub fn grad_check(config: &RunConfig) -> Result<()> {
    let reports = run_reference_check(config.training.seed)?;
    let mut failed = Vec::new();
    for (name, r) in &reports {
        let worst = r.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max);
        info!(
            "{name}: {} entries, max relative error {worst:.2e}, {}",
            r.checked_entries(),
            if r.passed() { "ok" } else { "FAILED" }
        );
        if !r.passed() {
            failed.push(name.clone());
        }
    }
    let path = out(config, "grad_check.json");
    std::fs::write(&path, serde_json::to_string_pretty(&reports)? + "\n")?;
    if !failed.is_empty() {
        bail!("gradient check failed for {}", failed.join(", "));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    axis: &'static str,
    w_context: f64,
    w_social: f64,
    best_epoch: usize,
    val_ndcg10: Option<f64>,
    test: MethodMetrics,
}

pub fn sweep(config: &RunConfig) -> Result<()> {
    let p = pipeline::prepare(config)?;
    let base = &config.training;
    let mut grid = Vec::new();
    grid.extend(config.sweep.w_social.iter().map(|&ws| ("w_social", base.w_context, ws)));
    grid.extend(
        config
            .sweep
            .w_context
            .iter()
            .map(|&wc| ("w_context", wc, base.w_social)),
    );
    let mut rows = Vec::new();
    for (axis, wc, ws) in grid {
        let Ok(fusion) = FusionWeights::new(wc, ws) else {
            info!("skipping w_context {wc}, w_social {ws}: weights exceed 1");
            continue;
        };
        info!("sweep {axis}: w_context {wc}, w_social {ws}");
        let model = ModelConfig::full(fusion);
        let outcome = train_logged(&p, &model, base, None)?;
        let rec = ScgrecRecommender::new("scgrec", &outcome.state, &p.inputs, model);
        rows.push(SweepRow {
            axis,
            w_context: wc,
            w_social: ws,
            best_epoch: outcome.best_epoch,
            val_ndcg10: outcome.best_val_ndcg10,
            test: evaluate(&rec, &p.split, Phase::Test)?,
        });
    }
    let mut csv = String::from("axis,w_context,w_social,best_epoch,val_ndcg@10,test_ndcg@10,test_recall@10\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6}\n",
            r.axis,
            r.w_context,
            r.w_social,
            r.best_epoch,
            r.val_ndcg10.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.test.get("ndcg", 10).unwrap_or(f64::NAN),
            r.test.get("recall", 10).unwrap_or(f64::NAN),
        ));
    }
    std::fs::write(out(config, "sweep.csv"), &csv)?;
    std::fs::write(out(config, "sweep.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    print!("{csv}");
    Ok(())
}
