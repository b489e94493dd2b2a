//! End-to-end gradient verification of the BPR objective on random toy
//! instances.

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::graph::{build_hypergraph, Dataset};
use crate::model::{ModelConfig, Recommender, ShgcnState};
use crate::numeric::{finite_difference_check, GradCheckReport, Matrix};
use crate::rng::{seeded, Stream};

use super::loss::Batch;
use super::trainer::{batch_loss, loss_and_gradients};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Absolute agreement accepted for entries too small for central differences
/// to resolve: with `h = 1e-5` and losses of order one, rounding alone moves
/// the difference quotient by about `1e-11`.
pub const GRADCHECK_NOISE_FLOOR: f64 = 1e-9;

/// A small SHGCN instance with one BPR batch.
#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub dataset: Dataset,
    pub config: ModelConfig,
    pub batch: Batch,
    pub lambda: f64,
}

/// Draws an instance with at most 5 users, 4 items, 4 hyperedges, `d <= 4`
/// and `L <= 2`.
pub fn random_toy<R: Rng + ?Sized>(rng: &mut R) -> Result<ToyInstance> {
    let m = rng.random_range(2..=5);
    let n = rng.random_range(2..=4);
    let mut triplets: Vec<(usize, usize, usize)> = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let pair = index::sample(rng, m, 2).into_vec();
        let t = (pair[0], pair[1], rng.random_range(0..n));
        let canon = |(a, b, i): (usize, usize, usize)| (a.min(b), a.max(b), i);
        if !triplets.iter().any(|&x| canon(x) == canon(t)) {
            triplets.push(t);
        }
    }
    let mut interactions = Vec::new();
    let mut batch = Batch::default();
    for u in 0..m {
        let k = rng.random_range(1..n);
        let mut items = index::sample(rng, n, k).into_vec();
        items.sort_unstable();
        let free: Vec<usize> = (0..n).filter(|j| !items.contains(j)).collect();
        for &i in &items {
            interactions.push((u, i));
            if rng.random_bool(0.7) {
                batch.push(u, i, free[rng.random_range(0..free.len())]);
            }
        }
    }
    if batch.is_empty() {
        let (u, i) = interactions[0];
        let free = (0..n).find(|&j| !interactions.contains(&(u, j))).expect("every user misses an item");
        batch.push(u, i, free);
    }
    let config = ModelConfig {
        dim: rng.random_range(1..=4),
        layers: rng.random_range(1..=2),
        init_std: 0.5,
        ..Default::default()
    };
    let lambda = [0.0, 1e-2][rng.random_range(0..2)];
    Ok(ToyInstance { dataset: Dataset::new(m, n, interactions, triplets)?, config, batch, lambda })
}

/// Random SHGCN parameters for `toy`, biases included, so that no
/// activation sits exactly on a LeakyReLU kink.
pub fn toy_model<R: Rng + ?Sized>(toy: &ToyInstance, rng: &mut R) -> Result<ShgcnState> {
    let mut model = ShgcnState::init(toy.dataset.num_users, toy.dataset.num_items, toy.config, rng)?;
    let std = toy.config.init_std;
    for layer in &mut model.layers {
        for b in [&mut layer.hyperedge_b, &mut layer.relation_b, &mut layer.user_b, &mut layer.item_b] {
            *b = Matrix::random_normal(1, b.cols(), std, rng);
        }
    }
    model.attention.hidden_b = Matrix::random_normal(1, toy.config.dim, std, rng);
    model.attention.out_b = Matrix::random_normal(1, 1, std, rng);
    Ok(model)
}

/// Tape gradients vs central differences for one instance.
pub fn check_instance(toy: &ToyInstance, model: &ShgcnState, step: f64, tol: f64) -> Result<GradCheckReport> {
    let graph = build_hypergraph(&toy.dataset)?;
    let (_, _, analytic) = loss_and_gradients(model, &graph, &toy.batch, toy.lambda)?;
    let params: Vec<Matrix> = model.parameters().into_iter().cloned().collect();
    let mut probe = model.clone();
    let f = |p: &[Matrix]| {
        for (dst, src) in probe.parameters_mut().into_iter().zip(p) {
            dst.data_mut().copy_from_slice(src.data());
        }
        batch_loss(&probe, &graph, &toy.batch, toy.lambda).expect("toy forward succeeds")
    };
    Ok(finite_difference_check(f, &params, &analytic, step, tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCase {
    pub instance: usize,
    pub users: usize,
    pub items: usize,
    pub hyperedges: usize,
    pub dim: usize,
    pub layers: usize,
    pub max_relative_error: f64,
    pub max_failing_abs_error: f64,
    /// Every entry within the relative tolerance.
    pub passed: bool,
    /// Every entry within the relative tolerance or the noise floor.
    pub passed_within_noise: bool,
}

/// Runs `instances` random toy checks from one seed.
pub fn run_suite(instances: usize, seed: u64) -> Result<Vec<SuiteCase>> {
    let mut rng = seeded(seed, Stream::GradCheck);
    let mut out = Vec::with_capacity(instances);
    for instance in 0..instances {
        let toy = random_toy(&mut rng)?;
        let model = toy_model(&toy, &mut rng)?;
        let report = check_instance(&toy, &model, GRADCHECK_STEP, GRADCHECK_TOLERANCE)?;
        out.push(SuiteCase {
            instance,
            users: toy.dataset.num_users,
            items: toy.dataset.num_items,
            hyperedges: toy.dataset.triplets.len(),
            dim: toy.config.dim,
            layers: toy.config.layers,
            max_relative_error: report.max_relative_error(),
            max_failing_abs_error: report.max_failing_abs_error(),
            passed: report.passed(),
            passed_within_noise: report.passed_within(GRADCHECK_NOISE_FLOOR),
        });
    }
    Ok(out)
}
