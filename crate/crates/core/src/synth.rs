//! Synthetic datasets with planted per-pair shared interests.
//!
//! Items are split into `T` topics (`topic(j) = j mod T`). Every user holds a
//! few topics with random affinities. Friend pairs are formed around one topic
//! both users hold, and each pair's triplets draw their item from that shared
//! topic (or uniformly, with probability `noise`). Interactions come from each
//! user's own affinity mix, so the triplets a user takes part in reveal which
//! topics their held-out items are likely to come from. A model that only
//! sees interactions cannot use that signal.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::graph::Dataset;
use crate::rng::{seeded, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_topics: usize,
    pub topics_per_user: usize,
    /// Friend pairs initiated per user; the mean social degree is about
    /// twice this.
    pub friends_per_user: usize,
    pub triplets_per_pair: usize,
    pub interactions_per_user: usize,
    /// Probability that a triplet or interaction item is drawn uniformly
    /// instead of from the planted topic.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 500,
            num_items: 200,
            num_topics: 8,
            topics_per_user: 2,
            friends_per_user: 2,
            triplets_per_pair: 3,
            interactions_per_user: 6,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_users < 2 || self.num_items == 0 || self.num_topics == 0 {
            return fail(format!(
                "need at least 2 users, 1 item and 1 topic (got M={}, N={}, T={})",
                self.num_users, self.num_items, self.num_topics
            ));
        }
        if self.num_topics > self.num_items {
            return fail(format!("{} topics cannot partition {} items", self.num_topics, self.num_items));
        }
        if self.topics_per_user == 0 || self.topics_per_user > self.num_topics {
            return fail(format!("topics_per_user must be in 1..={} (got {})", self.num_topics, self.topics_per_user));
        }
        if self.interactions_per_user > self.num_items {
            return fail(format!(
                "{} interactions per user exceed {} items",
                self.interactions_per_user, self.num_items
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise must lie in [0, 1] (got {})", self.noise));
        }
        Ok(())
    }
}

/// What was planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub item_topic: Vec<usize>,
    /// `(topic, affinity)` per user; affinities sum to 1.
    pub user_topics: Vec<Vec<(usize, f64)>>,
    /// Canonical `(min, max)` friend pair and its shared topic.
    pub pair_topics: Vec<((usize, usize), usize)>,
}

impl GroundTruth {
    pub fn affinity(&self, user: usize, topic: usize) -> f64 {
        self.user_topics[user].iter().find(|&&(t, _)| t == topic).map_or(0.0, |&(_, a)| a)
    }
}

/// Scores an item by the user's planted affinity for its topic.
pub struct TopicOracle<'a>(pub &'a GroundTruth);

impl Scorer for TopicOracle<'_> {
    fn num_users(&self) -> usize {
        self.0.user_topics.len()
    }

    fn num_items(&self) -> usize {
        self.0.item_topic.len()
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        items.iter().map(|&j| self.0.affinity(user, self.0.item_topic[j])).collect()
    }
}

fn pick_weighted<R: Rng + ?Sized>(rng: &mut R, weights: &[(usize, f64)]) -> usize {
    let mut x = rng.random::<f64>();
    for &(t, w) in weights {
        if x < w {
            return t;
        }
        x -= w;
    }
    weights.last().expect("non-empty weights").0
}

pub fn generate(config: &SynthConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let mut rng = seeded(config.seed, Stream::Synth);
    let (m, n, t) = (config.num_users, config.num_items, config.num_topics);

    let item_topic: Vec<usize> = (0..n).map(|j| j % t).collect();
    let topic_items: Vec<Vec<usize>> = (0..t).map(|k| (k..n).step_by(t).collect()).collect();

    let user_topics: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|_| {
            let topics = index::sample(&mut rng, t, config.topics_per_user).into_vec();
            let raw: Vec<f64> = topics.iter().map(|_| 0.5 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            topics.into_iter().zip(raw.into_iter().map(|w| w / total)).collect()
        })
        .collect();
    let mut topic_users: Vec<Vec<usize>> = vec![Vec::new(); t];
    for (u, topics) in user_topics.iter().enumerate() {
        for &(k, _) in topics {
            topic_users[k].push(u);
        }
    }

    let draw_item = |rng: &mut dyn rand::RngCore, topic: usize| -> usize {
        if rng.random::<f64>() < config.noise {
            rng.random_range(0..n)
        } else {
            let pool = &topic_items[topic];
            pool[rng.random_range(0..pool.len())]
        }
    };

    let mut pairs_seen = HashSet::new();
    let mut pair_topics = Vec::new();
    for u in 0..m {
        for _ in 0..config.friends_per_user {
            // A few attempts to find a fresh partner; sparse topics may have none.
            for _ in 0..8 {
                let k = pick_weighted(&mut rng, &user_topics[u]);
                let pool = &topic_users[k];
                if pool.len() < 2 {
                    continue;
                }
                let v = pool[rng.random_range(0..pool.len())];
                let key = (u.min(v), u.max(v));
                if v != u && pairs_seen.insert(key) {
                    pair_topics.push((key, k));
                    break;
                }
            }
        }
    }

    let mut triplets = Vec::with_capacity(pair_topics.len() * config.triplets_per_pair);
    for &((a, b), k) in &pair_topics {
        let mut items = HashSet::new();
        for _ in 0..config.triplets_per_pair {
            for _ in 0..8 {
                let j = draw_item(&mut rng, k);
                if items.insert(j) {
                    let (u1, u2) = if rng.random::<bool>() { (a, b) } else { (b, a) };
                    triplets.push((u1, u2, j));
                    break;
                }
            }
        }
    }

    let mut interactions = Vec::with_capacity(m * config.interactions_per_user);
    for (u, topics) in user_topics.iter().enumerate() {
        let mut items = HashSet::new();
        let mut attempts = 0;
        while items.len() < config.interactions_per_user && attempts < 64 * config.interactions_per_user {
            attempts += 1;
            let k = pick_weighted(&mut rng, topics);
            let j = draw_item(&mut rng, k);
            if items.insert(j) {
                interactions.push((u, j));
            }
        }
    }

    let dataset = Dataset::new(m, n, interactions, triplets)?;
    Ok((dataset, GroundTruth { item_topic, user_topics, pair_topics }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_triplets_stay_in_shared_topic() {
        let cfg = SynthConfig { num_users: 60, num_items: 40, num_topics: 2, noise: 0.0, ..Default::default() };
        let (ds, truth) = generate(&cfg).unwrap();
        assert!(!ds.triplets.is_empty());
        let topic_of: std::collections::HashMap<_, _> = truth.pair_topics.iter().copied().collect();
        for &(u1, u2, j) in &ds.triplets {
            let k = topic_of[&(u1.min(u2), u1.max(u2))];
            assert_eq!(truth.item_topic[j], k);
            assert!(truth.affinity(u1, k) > 0.0 && truth.affinity(u2, k) > 0.0);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SynthConfig { num_users: 50, num_items: 30, ..Default::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let base = SynthConfig::default();
        for bad in [
            SynthConfig { num_topics: 300, ..base.clone() },
            SynthConfig { topics_per_user: 9, ..base.clone() },
            SynthConfig { noise: 1.5, ..base.clone() },
            SynthConfig { num_users: 1, ..base.clone() },
            SynthConfig { interactions_per_user: 201, ..base.clone() },
        ] {
            assert!(matches!(generate(&bad), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn affinities_sum_to_one() {
        let (_, truth) = generate(&SynthConfig::default()).unwrap();
        for topics in &truth.user_topics {
            let s: f64 = topics.iter().map(|&(_, a)| a).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
