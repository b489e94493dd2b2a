//! Train/evaluate orchestration shared by the subcommands.
//!
//! A run directory holds `manifest.jsonl` (append-only), `epochs.jsonl`,
//! `metrics.json`, `checkpoint.bin` and, for file-backed data, `ids.json`
//! mapping dense ids back to raw ids.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use shgcn::eval::{
    evaluate, leave_one_out_split, sparsity_buckets, BucketReport, EvalSplit, Fold, DEFAULT_KS, EVAL_NEGATIVES,
};
use shgcn::graph::build_hypergraph;
use shgcn::io::{
    append_manifest, dataset_hash, json_hash, load_checkpoint, load_dataset, read_manifests, save_checkpoint, IdMap,
    RunManifest,
};
use shgcn::model::{AnyModel, Recommender};
use shgcn::rng::{seeded, Stream};
use shgcn::synth::generate;
use shgcn::train::{fit, EpochRecord};
use shgcn::{Dataset, Error, Hypergraph, MetricReport, Result};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.jsonl";
pub const EPOCHS: &str = "epochs.jsonl";
pub const METRICS: &str = "metrics.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const IDS: &str = "ids.json";

pub struct LoadedData {
    pub dataset: Dataset,
    /// Manifest description of the source.
    pub source: serde_json::Value,
    pub ids: Option<IdMap>,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    match cfg.data.files()? {
        Some((inter, trip)) => {
            let loaded = load_dataset(inter, trip, &cfg.data.load_options())?;
            Ok(LoadedData {
                dataset: loaded.dataset,
                source: json!({ "source": "files", "interactions": inter, "triplets": trip }),
                ids: Some(loaded.ids),
            })
        }
        None => {
            let (dataset, _) = generate(&cfg.synth)?;
            Ok(LoadedData { dataset, source: json!({ "source": "synth", "synth": cfg.synth }), ids: None })
        }
    }
}

/// The seeded split and the hypergraph built from its training part.
pub struct Prepared {
    pub split: EvalSplit,
    pub graph: Hypergraph,
}

pub fn prepare(cfg: &RunConfig, dataset: &Dataset) -> Result<Prepared> {
    let split = leave_one_out_split(dataset, EVAL_NEGATIVES, &mut seeded(cfg.train.seed, Stream::Split))?;
    let graph = build_hypergraph(&split.train_dataset(dataset)?)?;
    Ok(Prepared { split, graph })
}

/// Final report of a training run. Holds no wall-clock values, so repeated
/// runs with one seed produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub validation: Option<MetricReport>,
    pub test: MetricReport,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn absolutize(path: &mut Option<PathBuf>) -> Result<()> {
    if let Some(p) = path {
        *p = fs::canonicalize(&*p).map_err(|e| Error::NotFound(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Trains one model and writes every run artifact under `out`.
pub fn train(cfg: &RunConfig, out: &Path, mut progress: impl FnMut(&EpochRecord)) -> Result<MetricsFile> {
    let started = unix_now();
    let mut cfg = cfg.clone();
    absolutize(&mut cfg.data.interactions)?;
    absolutize(&mut cfg.data.triplets)?;
    cfg.validate()?;

    let data = load_data(&cfg)?;
    let prepared = prepare(&cfg, &data.dataset)?;
    let ds = &data.dataset;
    let model =
        AnyModel::init(cfg.kind, ds.num_users, ds.num_items, cfg.model, &mut seeded(cfg.train.seed, Stream::Init))?;

    fs::create_dir_all(out)?;
    let mut epochs = BufWriter::new(File::create(out.join(EPOCHS))?);
    let mut log_error = None;
    let outcome = fit(model, &prepared.graph, &prepared.split, &cfg.train, |rec| {
        let line = serde_json::to_string(rec).map_err(Error::from);
        if let Err(e) = line.and_then(|l| writeln!(epochs, "{l}").map_err(Error::from)) {
            log_error.get_or_insert(e);
        }
        progress(rec);
    })?;
    epochs.flush()?;
    if let Some(e) = log_error {
        return Err(e);
    }

    let reps = outcome.best.representations(&prepared.graph)?;
    let test = evaluate(&reps, &prepared.split, Fold::Test, &DEFAULT_KS)?;
    let config_value = serde_json::to_value(&cfg)?;
    let metrics = MetricsFile {
        model: cfg.kind.as_str().into(),
        seed: cfg.train.seed,
        config_hash: json_hash(&config_value)?,
        dataset_hash: dataset_hash(ds),
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        validation: outcome.best_validation.clone(),
        test,
    };

    let mut outputs = BTreeMap::new();
    save_checkpoint(&out.join(CHECKPOINT), &outcome.best, &cfg.model)?;
    outputs.insert("checkpoint".into(), out.join(CHECKPOINT).display().to_string());
    write_json(&out.join(METRICS), &metrics)?;
    outputs.insert("metrics".into(), out.join(METRICS).display().to_string());
    outputs.insert("epochs".into(), out.join(EPOCHS).display().to_string());
    if let Some(ids) = &data.ids {
        write_json(&out.join(IDS), ids)?;
        outputs.insert("ids".into(), out.join(IDS).display().to_string());
    }
    append_manifest(
        &out.join(MANIFEST),
        &RunManifest {
            command: "train".into(),
            model: cfg.kind.as_str().into(),
            seed: cfg.train.seed,
            config_hash: metrics.config_hash.clone(),
            config: config_value,
            dataset_hash: metrics.dataset_hash.clone(),
            dataset: data.source,
            started_at_unix: started,
            finished_at_unix: unix_now(),
            outputs,
        },
    )?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub validation: Option<MetricReport>,
    pub test: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<BucketReport>>,
}

/// Re-scores a trained run: rebuilds the dataset and split recorded in the
/// run's latest `train` manifest, loads the checkpoint and evaluates it.
pub fn evaluate_run(run_dir: &Path, checkpoint: Option<&Path>, bucket_edges: Option<&[usize]>) -> Result<EvalOutput> {
    let manifest_path = run_dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(Error::NotFound(format!("{} (is this a run directory?)", manifest_path.display())));
    }
    let manifest = read_manifests(&manifest_path)?
        .into_iter()
        .rev()
        .find(|m| m.command == "train")
        .ok_or_else(|| Error::NotFound(format!("no train manifest in {}", run_dir.display())))?;
    let cfg: RunConfig = serde_json::from_value(manifest.config.clone())?;
    let data = load_data(&cfg)?;
    let hash = dataset_hash(&data.dataset);
    if hash != manifest.dataset_hash {
        return Err(Error::InvalidInput(format!(
            "dataset hash {hash} differs from the one recorded at training time ({})",
            manifest.dataset_hash
        )));
    }
    let prepared = prepare(&cfg, &data.dataset)?;
    let default_ckpt = run_dir.join(CHECKPOINT);
    let (model, _) = load_checkpoint(checkpoint.unwrap_or(&default_ckpt))?;
    if model.num_users() != data.dataset.num_users || model.num_items() != data.dataset.num_items {
        return Err(Error::InvalidInput(format!(
            "checkpoint is for {} users / {} items, dataset has {} / {}",
            model.num_users(),
            model.num_items(),
            data.dataset.num_users,
            data.dataset.num_items
        )));
    }
    let reps = model.representations(&prepared.graph)?;
    let split = &prepared.split;
    let validation = if split.evaluated_users(Fold::Validation).is_empty() {
        None
    } else {
        Some(evaluate(&reps, split, Fold::Validation, &DEFAULT_KS)?)
    };
    let buckets =
        bucket_edges.map(|edges| sparsity_buckets(&reps, split, Fold::Test, edges, &DEFAULT_KS)).transpose()?;
    Ok(EvalOutput {
        model: model.kind().as_str().into(),
        seed: cfg.train.seed,
        config_hash: manifest.config_hash,
        dataset_hash: hash,
        validation,
        test: evaluate(&reps, split, Fold::Test, &DEFAULT_KS)?,
        buckets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub run: String,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub best_epoch: usize,
    pub validation_ndcg10: Option<f64>,
    pub test_ndcg10: f64,
    pub test_recall10: f64,
}

/// Trains every `(lr, λ, batch)` combination in order, one run directory
/// each, and writes `summary.tsv`. Returns rows in run order.
pub fn grid(
    base: &RunConfig,
    out: &Path,
    learning_rates: &[f64],
    l2s: &[f64],
    batch_sizes: &[usize],
    mut on_run: impl FnMut(&GridRow),
) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for &lr in learning_rates {
        for &l2 in l2s {
            for &bs in batch_sizes {
                let name = format!("run-{:03}", rows.len());
                let mut cfg = base.clone();
                cfg.train.learning_rate = lr;
                cfg.train.l2_lambda = l2;
                cfg.train.batch_size = bs;
                let m = train(&cfg, &out.join(&name), |_| {})?;
                let row = GridRow {
                    run: name,
                    learning_rate: lr,
                    l2_lambda: l2,
                    batch_size: bs,
                    best_epoch: m.best_epoch,
                    validation_ndcg10: m.validation.as_ref().and_then(|v| v.ndcg(10)),
                    test_ndcg10: m.test.ndcg(10).unwrap_or(0.0),
                    test_recall10: m.test.recall(10).unwrap_or(0.0),
                };
                on_run(&row);
                rows.push(row);
            }
        }
    }
    let mut w = BufWriter::new(File::create(out.join("summary.tsv"))?);
    writeln!(w, "run\tlearning_rate\tl2_lambda\tbatch_size\tbest_epoch\tval_ndcg10\ttest_ndcg10\ttest_recall10")?;
    for r in &rows {
        let val = r.validation_ndcg10.map_or("-".into(), |v| format!("{v:.6}"));
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            r.run, r.learning_rate, r.l2_lambda, r.batch_size, r.best_epoch, val, r.test_ndcg10, r.test_recall10
        )?;
    }
    w.flush()?;
    Ok(rows)
}

/// Row with the highest validation NDCG@10; earlier rows win ties.
pub fn best_row(rows: &[GridRow]) -> Option<&GridRow> {
    rows.iter().fold(None, |best: Option<&GridRow>, r| match (best, r.validation_ndcg10) {
        (None, _) => Some(r),
        (Some(b), Some(v)) if v > b.validation_ndcg10.unwrap_or(f64::NEG_INFINITY) => Some(r),
        (b, _) => b,
    })
}
