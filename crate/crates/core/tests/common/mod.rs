#![allow(dead_code)]

use rand::seq::index;
use rand::Rng;
use shgcn::graph::{Dataset, Hypergraph};
use shgcn::{Matrix, ShgcnState};
use shgcn_oracle as oracle;

pub fn to_rows(m: &Matrix) -> oracle::Mat {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn oracle_instance(graph: &Hypergraph) -> oracle::Instance {
    oracle::Instance {
        num_users: graph.num_users(),
        num_items: graph.num_items(),
        hyperedges: (0..graph.num_hyperedges()).map(|e| graph.nodes_of(e).to_vec()).collect(),
    }
}

pub fn oracle_params(state: &ShgcnState) -> oracle::Params {
    let layers = state
        .layers
        .iter()
        .map(|l| oracle::Layer {
            w1: to_rows(&l.hyperedge_w),
            b1: l.hyperedge_b.data().to_vec(),
            w2: to_rows(&l.relation_w),
            b2: l.relation_b.data().to_vec(),
            w3: to_rows(&l.user_w),
            b3: l.user_b.data().to_vec(),
            w4: to_rows(&l.item_w),
            b4: l.item_b.data().to_vec(),
        })
        .collect();
    let a = &state.attention;
    oracle::Params {
        e0: to_rows(&state.embeddings),
        layers,
        mlp: oracle::Mlp {
            hidden_w: to_rows(&a.hidden_w),
            hidden_b: a.hidden_b.data().to_vec(),
            out_w: a.out_w.data().to_vec(),
            out_b: a.out_b.data()[0],
        },
        slope: state.config.leaky_slope,
        normalize: state.config.normalize,
        eps: state.config.norm_eps,
    }
}

/// Random valid dataset with `m` users, `n` items and up to `max_triplets`
/// distinct triplets.
pub fn random_dataset<R: Rng>(rng: &mut R, m: usize, n: usize, max_triplets: usize, max_per_user: usize) -> Dataset {
    let mut triplets: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..max_triplets {
        let pair = index::sample(rng, m, 2).into_vec();
        let j = rng.random_range(0..n);
        if seen.insert((pair[0].min(pair[1]), pair[0].max(pair[1]), j)) {
            triplets.push((pair[0], pair[1], j));
        }
    }
    let mut interactions = Vec::new();
    for u in 0..m {
        let k = rng.random_range(0..=max_per_user.min(n));
        for j in index::sample(rng, n, k) {
            interactions.push((u, j));
        }
    }
    Dataset::new(m, n, interactions, triplets).expect("generated dataset is valid")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deterministic pseudo-random scores, independent of the candidate order.
pub struct HashScorer {
    pub num_users: usize,
    pub num_items: usize,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl shgcn::Scorer for HashScorer {
    fn num_users(&self) -> usize {
        self.num_users
    }

    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        items
            .iter()
            .map(|&j| {
                let h = splitmix(self.seed ^ splitmix((user * self.num_items + j) as u64));
                (h >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }
}

/// Pearson χ² statistic of `counts` against a uniform expectation.
pub fn chi_squared(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Upper 0.1% point of χ² with `df` degrees of freedom (Wilson–Hilferty).
pub fn chi_squared_critical(df: usize) -> f64 {
    let k = df as f64;
    let z = 3.090_232;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}
