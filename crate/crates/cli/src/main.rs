use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shgcn::io::{write_dataset, ColumnOrder};
use shgcn::model::{param_count, ModelKind};
use shgcn::synth::{generate, SynthConfig};
use shgcn::train::gradcheck::{run_suite, GRADCHECK_NOISE_FLOOR, GRADCHECK_TOLERANCE};
use shgcn::train::{BATCH_SIZE_GRID, L2_GRID, LEARNING_RATE_GRID};
use shgcn::{Error, Result};
use shgcn_cli::run::{self, best_row};
use shgcn_cli::{exit_code, RunConfig, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "shgcn", version, about = "Social hypergraph recommender: training, evaluation and tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write manifest, epoch log, metrics and checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-evaluate a trained run from its manifest and checkpoint.
    Evaluate {
        /// Run directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        /// Checkpoint to score instead of the run's own.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated training-count bucket edges, e.g. `4,8,16`.
        #[arg(long, value_delimiter = ',')]
        buckets: Option<Vec<usize>>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with planted shared interests.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Print parameter counts for a model size.
    ParamCount {
        #[arg(long)]
        users: u64,
        #[arg(long)]
        items: u64,
        #[arg(long, default_value_t = 32)]
        dim: u64,
        #[arg(long, default_value_t = 3)]
        layers: u64,
        #[arg(long)]
        json: bool,
    },
    /// Sweep learning rate, L2 weight and batch size; one run per setting.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        /// Learning rates (default: 3e-4,1e-3,3e-3).
        #[arg(long, value_delimiter = ',')]
        lrs: Option<Vec<f64>>,
        /// L2 weights (default: 1e-8 through 1e-3 by decades).
        #[arg(long, value_delimiter = ',')]
        l2s: Option<Vec<f64>>,
        /// Batch sizes (default: the configured one).
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        /// Sweep the full batch-size grid 256..4096.
        #[arg(long, conflicts_with = "batch_sizes")]
        batch_grid: bool,
    },
    /// Finite-difference check of end-to-end gradients on random toy graphs.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Entries failing the relative test still pass when their absolute
        /// error is at most this; 0 demands the relative test everywhere.
        #[arg(long, default_value_t = GRADCHECK_NOISE_FLOOR)]
        noise_floor: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long, requires = "triplets")]
    interactions: Option<PathBuf>,
    #[arg(long, requires = "interactions")]
    triplets: Option<PathBuf>,
    #[arg(long)]
    derive_interactions_from_triplets: bool,
    #[arg(long)]
    dedup: bool,
    #[arg(long, value_parser = parse_column_order)]
    column_order: Option<ColumnOrder>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with a `[synth]` section; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    topics_per_user: Option<usize>,
    #[arg(long)]
    friends_per_user: Option<usize>,
    #[arg(long)]
    triplets_per_pair: Option<usize>,
    #[arg(long)]
    interactions_per_user: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_column_order(s: &str) -> std::result::Result<ColumnOrder, String> {
    match s {
        "user-first" => Ok(ColumnOrder::UserFirst),
        "item-first" => Ok(ColumnOrder::ItemFirst),
        other => Err(format!("expected user-first or item-first, got '{other}'")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.kind, self.model);
        if self.interactions.is_some() {
            cfg.data.interactions = self.interactions;
            cfg.data.triplets = self.triplets;
        }
        cfg.data.derive_interactions_from_triplets |= self.derive_interactions_from_triplets;
        cfg.data.dedup |= self.dedup;
        set(&mut cfg.data.column_order, self.column_order);
        set(&mut cfg.model.dim, self.dim);
        set(&mut cfg.model.layers, self.layers);
        if self.no_normalize {
            cfg.model.normalize = false;
        }
        let t = &mut cfg.train;
        set(&mut t.learning_rate, self.lr);
        set(&mut t.l2_lambda, self.l2);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.negatives, self.negatives);
        set(&mut t.epochs, self.epochs);
        set(&mut t.patience, self.patience);
        set(&mut t.seed, self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SynthArgs {
    fn resolve(self) -> Result<SynthConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?.synth,
            None => SynthConfig::default(),
        };
        set(&mut cfg.num_users, self.users);
        set(&mut cfg.num_items, self.items);
        set(&mut cfg.num_topics, self.topics);
        set(&mut cfg.topics_per_user, self.topics_per_user);
        set(&mut cfg.friends_per_user, self.friends_per_user);
        set(&mut cfg.triplets_per_pair, self.triplets_per_pair);
        set(&mut cfg.interactions_per_user, self.interactions_per_user);
        set(&mut cfg.noise, self.noise);
        set(&mut cfg.seed, self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_metrics(m: &shgcn::MetricReport) -> String {
    m.at.iter().map(|a| format!("R@{} {:.4} N@{} {:.4}", a.k, a.recall, a.k, a.ndcg)).collect::<Vec<_>>().join("  ")
}

/// `5755104` as `5,755,104`.
fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_train(run: RunArgs, out: &Path, quiet: bool) -> Result<u8> {
    let cfg = run.resolve()?;
    let metrics = run::train(&cfg, out, |rec| {
        if !quiet {
            let val = rec.validation.as_ref().and_then(|v| v.ndcg(10)).map_or("-".into(), |v| format!("{v:.4}"));
            eprintln!("epoch {:>4}  loss {:.5}  val N@10 {val}  {:.2}s", rec.epoch, rec.loss, rec.seconds);
        }
    })?;
    println!("best epoch {} of {}", metrics.best_epoch, metrics.epochs_run);
    if let Some(v) = &metrics.validation {
        println!("validation  {}", fmt_metrics(v));
    }
    println!("test        {}", fmt_metrics(&metrics.test));
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

fn cmd_evaluate(
    run_dir: &Path,
    checkpoint: Option<&Path>,
    buckets: Option<&[usize]>,
    out: Option<&Path>,
) -> Result<u8> {
    let report = run::evaluate_run(run_dir, checkpoint, buckets)?;
    print_json(&report)?;
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(EXIT_OK)
}

fn cmd_gen_synth(out: &Path, args: SynthArgs) -> Result<u8> {
    let cfg = args.resolve()?;
    let (ds, truth) = generate(&cfg)?;
    let (inter, trip) = write_dataset(out, &ds)?;
    std::fs::write(out.join("truth.json"), serde_json::to_string(&truth)?)?;
    std::fs::write(out.join("synth.toml"), toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?)?;
    println!(
        "{} users, {} items, {} interactions, {} triplets",
        ds.num_users,
        ds.num_items,
        ds.interactions.len(),
        ds.triplets.len()
    );
    println!("wrote {} and {}", inter.display(), trip.display());
    Ok(EXIT_OK)
}

fn cmd_param_count(users: u64, items: u64, dim: u64, layers: u64, json: bool) -> Result<u8> {
    let p = param_count(users, items, dim, layers);
    if json {
        print_json(&p)?;
        return Ok(EXIT_OK);
    }
    println!("embeddings      {:>14}", grouped(p.embeddings));
    println!("transforms      {:>14}", grouped(p.transforms));
    println!("attention mlp   {:>14}", grouped(p.mlp));
    println!("total           {:>14}", grouped(p.total));
    println!("reported extra  {:>14}   (2L·d² + 4L·d(d+1))", grouped(p.reported_extra));
    Ok(EXIT_OK)
}

fn cmd_grid(
    run: RunArgs,
    out: &Path,
    lrs: Option<Vec<f64>>,
    l2s: Option<Vec<f64>>,
    bss: Option<Vec<usize>>,
    batch_grid: bool,
) -> Result<u8> {
    let cfg = run.resolve()?;
    let lrs = lrs.unwrap_or_else(|| LEARNING_RATE_GRID.to_vec());
    let l2s = l2s.unwrap_or_else(|| L2_GRID.to_vec());
    let bss = if batch_grid { BATCH_SIZE_GRID.to_vec() } else { bss.unwrap_or_else(|| vec![cfg.train.batch_size]) };
    println!("run      lr        l2        batch  best  val N@10  test N@10");
    let rows = run::grid(&cfg, out, &lrs, &l2s, &bss, |r| {
        let val = r.validation_ndcg10.map_or("-".into(), |v| format!("{v:.4}"));
        println!(
            "{}  {:<8}  {:<8}  {:>5}  {:>4}  {:>8}  {:>9.4}",
            r.run, r.learning_rate, r.l2_lambda, r.batch_size, r.best_epoch, val, r.test_ndcg10
        );
    })?;
    if let Some(b) = best_row(&rows) {
        println!("best by validation: {} (lr {}, l2 {}, batch {})", b.run, b.learning_rate, b.l2_lambda, b.batch_size);
    }
    println!("wrote {}", out.join("summary.tsv").display());
    Ok(EXIT_OK)
}

fn cmd_gradcheck(instances: usize, seed: u64, noise_floor: f64) -> Result<u8> {
    let cases = run_suite(instances, seed)?;
    let mut failed = 0;
    for c in &cases {
        let ok = c.passed || c.max_failing_abs_error <= noise_floor;
        failed += usize::from(!ok);
        println!(
            "#{:<3} M={} N={} |E|={} d={} L={}  max rel {:.2e}  worst abs outside tol {:.2e}  {}",
            c.instance,
            c.users,
            c.items,
            c.hyperedges,
            c.dim,
            c.layers,
            c.max_relative_error,
            c.max_failing_abs_error,
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{}/{} instances pass (relative tol {GRADCHECK_TOLERANCE:e}, noise floor {noise_floor:e})",
        cases.len() - failed,
        cases.len()
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERIC })
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Train { run, out, quiet } => cmd_train(run, &out, quiet),
        Command::Evaluate { run, checkpoint, buckets, out } => {
            cmd_evaluate(&run, checkpoint.as_deref(), buckets.as_deref(), out.as_deref())
        }
        Command::GenSynth { out, synth } => cmd_gen_synth(&out, synth),
        Command::ParamCount { users, items, dim, layers, json } => cmd_param_count(users, items, dim, layers, json),
        Command::Grid { run, out, lrs, l2s, batch_sizes, batch_grid } => {
            cmd_grid(run, &out, lrs, l2s, batch_sizes, batch_grid)
        }
        Command::Gradcheck { instances, seed, noise_floor } => cmd_gradcheck(instances, seed, noise_floor),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
