use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalSplit, Fold, MetricReport, DEFAULT_KS};
use crate::graph::Hypergraph;
use crate::model::Recommender;
use crate::numeric::{Matrix, Tape};
use crate::rng::{seeded, Stream};

use super::adam::{Adam, AdamConfig};
use super::loss::{record_bpr_loss, Batch};
use super::sampler::NegativeSampler;

pub const LEARNING_RATE_GRID: [f64; 3] = [3e-4, 1e-3, 3e-3];
pub const L2_GRID: [f64; 6] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
pub const BATCH_SIZE_GRID: [usize; 5] = [256, 512, 1024, 2048, 4096];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    /// Negatives drawn per positive; each yields one BPR pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Epochs without a validation NDCG@10 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            l2_lambda: 1e-4,
            batch_size: 4096,
            negatives: 8,
            epochs: 200,
            patience: 20,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.l2_lambda >= 0.0
            && self.l2_lambda.is_finite()
            && self.batch_size > 0
            && self.negatives > 0
            && self.epochs > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0;
        if !positive {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Mean BPR term per pair, excluding regularization.
    pub mean_loss: f64,
    /// Sum over batches of the full objective that was minimized.
    pub objective: f64,
    pub pairs: usize,
    pub batches: usize,
    pub seconds: f64,
}

/// One BPR pass: forward over the full graph, loss, backward. Returns
/// `(objective, pairwise, gradients in parameter order)`.
pub fn loss_and_gradients<M: Recommender + ?Sized>(
    model: &M,
    graph: &Hypergraph,
    batch: &Batch,
    lambda: f64,
) -> Result<(f64, f64, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let params = model.parameters().into_iter().map(|p| tape.leaf(p.clone())).collect::<Result<Vec<_>>>()?;
    let reps = model.record_forward(&mut tape, &params, graph)?;
    let (total, pairwise) = record_bpr_loss(&mut tape, reps, params[0], model.num_users(), batch, lambda)?;
    let objective = tape.value(total).item()?;
    let pair_sum = tape.value(pairwise).item()?;
    let grads = tape.backward(total)?.take(&params);
    Ok((objective, pair_sum, grads))
}

/// The BPR objective for `batch` without gradient bookkeeping.
pub fn batch_loss<M: Recommender + ?Sized>(model: &M, graph: &Hypergraph, batch: &Batch, lambda: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let params = model.parameters().into_iter().map(|p| tape.constant(p.clone())).collect::<Result<Vec<_>>>()?;
    let reps = model.record_forward(&mut tape, &params, graph)?;
    let (total, _) = record_bpr_loss(&mut tape, reps, params[0], model.num_users(), batch, lambda)?;
    tape.value(total).item()
}

/// Stateful BPR trainer: owns the sampler, the optimizer and the training
/// random stream, so consecutive epochs continue one seeded sequence.
pub struct Trainer<'g> {
    graph: &'g Hypergraph,
    sampler: NegativeSampler,
    positives: Vec<(usize, usize)>,
    config: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
}

impl<'g> Trainer<'g> {
    pub fn new(graph: &'g Hypergraph, train: &[(usize, usize)], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::InvalidInput("no training interactions".into()));
        }
        let mut positives = train.to_vec();
        positives.sort_unstable();
        Ok(Trainer {
            graph,
            sampler: NegativeSampler::new(graph.num_users(), graph.num_items(), train),
            positives,
            adam: Adam::new(config.adam()),
            rng: seeded(config.seed, Stream::Train),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    /// Expands each positive into `negatives` BPR pairs.
    pub fn sample_batch(&mut self, positives: &[(usize, usize)]) -> Result<Batch> {
        let mut batch = Batch::default();
        for &(u, i) in positives {
            for j in self.sampler.sample(&mut self.rng, u, self.config.negatives)? {
                batch.push(u, i, j);
            }
        }
        Ok(batch)
    }

    pub fn train_epoch<M: Recommender + ?Sized>(&mut self, model: &mut M) -> Result<EpochStats> {
        let start = Instant::now();
        self.positives.shuffle(&mut self.rng);
        let order = std::mem::take(&mut self.positives);
        let mut stats = EpochStats { mean_loss: 0.0, objective: 0.0, pairs: 0, batches: 0, seconds: 0.0 };
        let mut pair_sum = 0.0;
        let result = (|| {
            for chunk in order.chunks(self.config.batch_size) {
                let batch = self.sample_batch(chunk)?;
                let (objective, pairwise, grads) =
                    loss_and_gradients(&*model, self.graph, &batch, self.config.l2_lambda)?;
                self.adam.step(model.parameters_mut(), &grads)?;
                stats.objective += objective;
                pair_sum += pairwise;
                stats.pairs += batch.len();
                stats.batches += 1;
            }
            Ok::<_, Error>(())
        })();
        self.positives = order;
        result?;
        stats.mean_loss = pair_sum / stats.pairs as f64;
        stats.seconds = start.elapsed().as_secs_f64();
        Ok(stats)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub objective: f64,
    /// `None` when no user has a validation item.
    pub validation: Option<MetricReport>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<M> {
    pub best: M,
    pub best_epoch: usize,
    pub best_validation: Option<MetricReport>,
    pub history: Vec<EpochRecord>,
}

/// Trains for up to `config.epochs`, scoring validation NDCG@10 after every
/// epoch and keeping the best model. Stops once `patience` epochs pass
/// without improvement. `graph` must be built from the split's training data.
pub fn fit<M, F>(
    mut model: M,
    graph: &Hypergraph,
    split: &EvalSplit,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<FitOutcome<M>>
where
    M: Recommender + Clone,
    F: FnMut(&EpochRecord),
{
    let mut trainer = Trainer::new(graph, &split.train, config.clone())?;
    let has_validation = !split.evaluated_users(Fold::Validation).is_empty();
    let mut best: Option<(M, usize, Option<MetricReport>, f64)> = None;
    let mut history = Vec::new();

    for epoch in 1..=config.epochs {
        let stats = trainer.train_epoch(&mut model)?;
        let validation = if has_validation {
            let reps = model.representations(graph)?;
            Some(evaluate(&reps, split, Fold::Validation, &DEFAULT_KS)?)
        } else {
            None
        };
        let score = validation.as_ref().and_then(|v| v.ndcg(10)).unwrap_or(f64::NEG_INFINITY);
        let record = EpochRecord {
            epoch,
            loss: stats.mean_loss,
            objective: stats.objective,
            validation: validation.clone(),
            seconds: stats.seconds,
        };
        on_epoch(&record);
        history.push(record);

        let improved = match &best {
            None => true,
            Some((.., best_score)) => !has_validation || score > *best_score,
        };
        if improved {
            best = Some((model.clone(), epoch, validation, score));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch > config.patience {
            break;
        }
    }

    let (best, best_epoch, best_validation, _) = best.expect("at least one epoch runs");
    Ok(FitOutcome { best, best_epoch, best_validation, history })
}
