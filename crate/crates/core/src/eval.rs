//! Leave-one-out splits, sampled-candidate ranking and top-K metrics.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::MfState;
use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::numeric::matrix::dot;

/// Number of sampled negatives ranked against each held-out item.
pub const EVAL_NEGATIVES: usize = 100;

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

/// Anything that can score items for a user. Evaluation only sees this.
pub trait Scorer: Sync {
    fn num_users(&self) -> usize;
    fn num_items(&self) -> usize;
    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64>;
}

impl Scorer for MfState {
    fn num_users(&self) -> usize {
        self.num_users
    }

    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        let u = self.user(user);
        items.iter().map(|&j| dot(u, self.item(j))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Validation,
    Test,
}

/// Per-user held-out items and frozen candidate lists.
///
/// `*_candidates[u]` is empty when the user has no item in that fold;
/// otherwise it holds the held-out item followed by the sampled negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit {
    pub num_users: usize,
    pub num_items: usize,
    /// Training interactions, sorted by (user, item).
    pub train: Vec<(usize, usize)>,
    pub validation: Vec<Option<usize>>,
    pub test: Vec<Option<usize>>,
    pub validation_candidates: Vec<Vec<usize>>,
    pub test_candidates: Vec<Vec<usize>>,
}

impl EvalSplit {
    pub fn target(&self, fold: Fold, user: usize) -> Option<usize> {
        match fold {
            Fold::Validation => self.validation[user],
            Fold::Test => self.test[user],
        }
    }

    pub fn candidates(&self, fold: Fold, user: usize) -> &[usize] {
        match fold {
            Fold::Validation => &self.validation_candidates[user],
            Fold::Test => &self.test_candidates[user],
        }
    }

    pub fn evaluated_users(&self, fold: Fold) -> Vec<usize> {
        (0..self.num_users).filter(|&u| self.target(fold, u).is_some()).collect()
    }

    pub fn train_by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_users];
        for &(u, i) in &self.train {
            out[u].push(i);
        }
        out
    }

    /// The dataset the model trains on: training interactions plus every
    /// triplet (triplets are context, never prediction targets).
    pub fn train_dataset(&self, full: &Dataset) -> Result<Dataset> {
        Dataset::new(self.num_users, self.num_items, self.train.clone(), full.triplets.clone())
    }
}

/// Holds out one random interaction per user for test and, for users with at
/// least three interactions, one more for validation. Candidate negatives are
/// distinct items outside the user's full interaction set.
pub fn leave_one_out_split<R: Rng + ?Sized>(dataset: &Dataset, negatives: usize, rng: &mut R) -> Result<EvalSplit> {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let by_user = dataset.items_by_user();
    let mut split = EvalSplit {
        num_users: m,
        num_items: n,
        train: Vec::with_capacity(dataset.interactions.len()),
        validation: vec![None; m],
        test: vec![None; m],
        validation_candidates: vec![Vec::new(); m],
        test_candidates: vec![Vec::new(); m],
    };

    for (u, items) in by_user.iter().enumerate() {
        let mut items = items.clone();
        items.sort_unstable();
        if items.len() >= 2 {
            let t = items.remove(rng.random_range(0..items.len()));
            split.test[u] = Some(t);
            if items.len() >= 2 {
                let v = items.remove(rng.random_range(0..items.len()));
                split.validation[u] = Some(v);
            }
        }
        split.train.extend(items.iter().map(|&i| (u, i)));

        let held_out = split.test[u].is_some() as usize + split.validation[u].is_some() as usize;
        if held_out == 0 {
            continue;
        }
        let seen: HashSet<usize> = by_user[u].iter().copied().collect();
        if n - seen.len() < negatives {
            return Err(Error::InvalidInput(format!(
                "user {u} has {} unseen items, fewer than the {negatives} candidate negatives required",
                n - seen.len()
            )));
        }
        if let Some(v) = split.validation[u] {
            let mut c = vec![v];
            c.extend(sample_unseen(n, &seen, negatives, rng));
            split.validation_candidates[u] = c;
        }
        if let Some(t) = split.test[u] {
            let mut c = vec![t];
            c.extend(sample_unseen(n, &seen, negatives, rng));
            split.test_candidates[u] = c;
        }
    }
    Ok(split)
}

/// `k` distinct items in `0..n` outside `seen`. Caller guarantees feasibility.
fn sample_unseen<R: Rng + ?Sized>(n: usize, seen: &HashSet<usize>, k: usize, rng: &mut R) -> Vec<usize> {
    let free = n - seen.len();
    if free >= 2 * k {
        let mut chosen = HashSet::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let j = rng.random_range(0..n);
            if !seen.contains(&j) && chosen.insert(j) {
                out.push(j);
            }
        }
        out
    } else {
        let pool: Vec<usize> = (0..n).filter(|j| !seen.contains(j)).collect();
        index::sample(rng, pool.len(), k).into_iter().map(|p| pool[p]).collect()
    }
}

/// 1-based rank of `target` among `candidates` by descending score; ties go
/// to the smaller item id.
pub fn rank_from_scores(candidates: &[usize], scores: &[f64], target: usize) -> Result<usize> {
    let mut at = None;
    for (p, &c) in candidates.iter().enumerate() {
        if c == target {
            if at.is_some() {
                return Err(Error::contract(format!("target item {target} appears twice among candidates")));
            }
            at = Some(p);
        }
    }
    let at = at.ok_or_else(|| Error::contract(format!("target item {target} missing from candidates")))?;
    let s = scores[at];
    let ahead = candidates.iter().zip(scores).filter(|&(&c, &x)| x > s || (x == s && c < target)).count();
    Ok(1 + ahead)
}

pub fn rank_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    candidates: &[usize],
    target: usize,
) -> Result<usize> {
    let scores = scorer.score_items(user, candidates);
    rank_from_scores(candidates, &scores, target)
}

pub fn recall_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub users: usize,
    pub at: Vec<AtK>,
}

impl MetricReport {
    fn from_ranks(ranks: &[usize], ks: &[usize]) -> Self {
        let denom = ranks.len() as f64;
        let at = ks
            .iter()
            .map(|&k| AtK {
                k,
                recall: ranks.iter().map(|&r| recall_at_k(r, k)).sum::<f64>() / denom,
                ndcg: ranks.iter().map(|&r| ndcg_at_k(r, k)).sum::<f64>() / denom,
            })
            .collect();
        MetricReport { users: ranks.len(), at }
    }

    pub fn get(&self, k: usize) -> Option<&AtK> {
        self.at.iter().find(|a| a.k == k)
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        self.get(k).map(|a| a.recall)
    }

    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.get(k).map(|a| a.ndcg)
    }
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config(format!("cutoffs must be non-empty and positive, got {ks:?}")));
    }
    Ok(())
}

/// Ranks of the held-out item for `users`, computed in parallel and returned
/// in the order of `users`.
fn ranks_for<S: Scorer + ?Sized>(scorer: &S, split: &EvalSplit, fold: Fold, users: &[usize]) -> Result<Vec<usize>> {
    if scorer.num_users() != split.num_users || scorer.num_items() != split.num_items {
        return Err(Error::contract("scorer and split disagree on user/item counts"));
    }
    users
        .par_iter()
        .map(|&u| {
            let target = split.target(fold, u).expect("evaluated users have a target");
            rank_candidates(scorer, u, split.candidates(fold, u), target)
        })
        .collect()
}

/// Mean Recall@K and NDCG@K over every user with a held-out item in `fold`.
pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, split: &EvalSplit, fold: Fold, ks: &[usize]) -> Result<MetricReport> {
    check_ks(ks)?;
    let users = split.evaluated_users(fold);
    if users.is_empty() {
        return Err(Error::InvalidInput(format!("no users have a {fold:?} item to evaluate")));
    }
    let ranks = ranks_for(scorer, split, fold, &users)?;
    Ok(MetricReport::from_ranks(&ranks, ks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    /// Inclusive lower bound on training-interaction count.
    pub lower: usize,
    /// Exclusive upper bound; `None` for the open last bucket.
    pub upper: Option<usize>,
    pub users: usize,
    /// `None` when the bucket is empty.
    pub metrics: Option<MetricReport>,
}

/// Groups evaluated users by training-interaction count into
/// `[0, e0), [e0, e1), …, [e_last, ∞)` and reports metrics per group.
pub fn sparsity_buckets<S: Scorer + ?Sized>(
    scorer: &S,
    split: &EvalSplit,
    fold: Fold,
    edges: &[usize],
    ks: &[usize],
) -> Result<Vec<BucketReport>> {
    check_ks(ks)?;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("bucket edges must be strictly increasing, got {edges:?}")));
    }
    let train_counts: Vec<usize> = split.train_by_user().iter().map(Vec::len).collect();
    let users = split.evaluated_users(fold);
    let ranks = ranks_for(scorer, split, fold, &users)?;

    let mut bounds = vec![0];
    bounds.extend(edges.iter().copied().filter(|&e| e > 0));
    let mut out = Vec::with_capacity(bounds.len());
    for (b, &lower) in bounds.iter().enumerate() {
        let upper = bounds.get(b + 1).copied();
        let in_bucket: Vec<usize> = users
            .iter()
            .zip(&ranks)
            .filter(|&(&u, _)| train_counts[u] >= lower && upper.is_none_or(|hi| train_counts[u] < hi))
            .map(|(_, &r)| r)
            .collect();
        out.push(BucketReport {
            lower,
            upper,
            users: in_bucket.len(),
            metrics: (!in_bucket.is_empty()).then(|| MetricReport::from_ranks(&in_bucket, ks)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, Stream};

    struct Fixed(Vec<Vec<f64>>);

    impl Scorer for Fixed {
        fn num_users(&self) -> usize {
            self.0.len()
        }
        fn num_items(&self) -> usize {
            self.0[0].len()
        }
        fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
            items.iter().map(|&j| self.0[user][j]).collect()
        }
    }

    #[test]
    fn strict_max_ranks_first() {
        assert_eq!(rank_from_scores(&[4, 1, 2], &[0.9, 0.1, 0.5], 4).unwrap(), 1);
    }

    #[test]
    fn ties_break_by_item_id() {
        let cands: Vec<usize> = (0..101).rev().collect();
        let scores = vec![0.0; 101];
        assert_eq!(rank_from_scores(&cands, &scores, 37).unwrap(), 38);
        assert_eq!(rank_from_scores(&cands, &scores, 0).unwrap(), 1);
    }

    #[test]
    fn missing_or_repeated_target_is_contract_error() {
        assert!(matches!(rank_from_scores(&[1, 2], &[0.0, 0.0], 3), Err(Error::Contract(_))));
        assert!(matches!(rank_from_scores(&[1, 1], &[0.0, 0.0], 1), Err(Error::Contract(_))));
    }

    #[test]
    fn metric_closed_forms() {
        assert_eq!(recall_at_k(1, 1), 1.0);
        assert_eq!(ndcg_at_k(1, 5), 1.0);
        assert_eq!(ndcg_at_k(3, 10), 0.5);
        assert_eq!(ndcg_at_k(11, 10), 0.0);
        for r in 1..20 {
            assert_eq!(ndcg_at_k(r, 1), recall_at_k(r, 1));
        }
    }

    fn toy_dataset() -> Dataset {
        let mut inter = Vec::new();
        for u in 0..6 {
            for i in 0..=u {
                inter.push((u, i * 3));
            }
        }
        Dataset::new(6, 120, inter, vec![]).unwrap()
    }

    #[test]
    fn split_respects_interaction_counts() {
        let ds = toy_dataset();
        let split = leave_one_out_split(&ds, 100, &mut seeded(3, Stream::Split)).unwrap();
        let by_train = split.train_by_user();
        assert_eq!(split.test[0], None);
        assert_eq!(by_train[0], vec![0]);
        assert!(split.test[1].is_some() && split.validation[1].is_none());
        for u in 2..6 {
            assert!(split.test[u].is_some() && split.validation[u].is_some());
        }
        for u in 0..6 {
            let held = split.test[u].is_some() as usize + split.validation[u].is_some() as usize;
            assert_eq!(by_train[u].len() + held, u + 1);
        }
    }

    #[test]
    fn candidates_avoid_all_interactions() {
        let ds = toy_dataset();
        let split = leave_one_out_split(&ds, 100, &mut seeded(5, Stream::Split)).unwrap();
        let by_user = ds.items_by_user();
        for u in split.evaluated_users(Fold::Test) {
            let c = &split.test_candidates[u];
            assert_eq!(c.len(), 101);
            assert_eq!(c[0], split.test[u].unwrap());
            let distinct: HashSet<_> = c.iter().collect();
            assert_eq!(distinct.len(), 101);
            for j in &c[1..] {
                assert!(!by_user[u].contains(j));
            }
        }
    }

    #[test]
    fn too_few_unseen_items_is_an_error() {
        let ds = Dataset::new(1, 50, vec![(0, 0), (0, 1)], vec![]).unwrap();
        assert!(leave_one_out_split(&ds, 100, &mut seeded(0, Stream::Split)).is_err());
    }

    #[test]
    fn perfect_scorer_scores_one() {
        let ds = toy_dataset();
        let split = leave_one_out_split(&ds, 100, &mut seeded(1, Stream::Split)).unwrap();
        let mut scores = vec![vec![0.0; 120]; 6];
        for u in 0..6 {
            if let Some(t) = split.test[u] {
                scores[u][t] = 1.0;
            }
        }
        let report = evaluate(&Fixed(scores), &split, Fold::Test, &DEFAULT_KS).unwrap();
        assert_eq!(report.users, 5);
        for a in &report.at {
            assert_eq!((a.recall, a.ndcg), (1.0, 1.0));
        }
    }

    #[test]
    fn empty_fold_is_an_error() {
        let ds = Dataset::new(2, 120, vec![(0, 0), (1, 1)], vec![]).unwrap();
        let split = leave_one_out_split(&ds, 100, &mut seeded(1, Stream::Split)).unwrap();
        let scores = vec![vec![0.0; 120]; 2];
        assert!(evaluate(&Fixed(scores), &split, Fold::Test, &DEFAULT_KS).is_err());
    }

    #[test]
    fn single_bucket_matches_evaluate_and_populations_sum() {
        let ds = toy_dataset();
        let split = leave_one_out_split(&ds, 100, &mut seeded(2, Stream::Split)).unwrap();
        let mut rng = seeded(9, Stream::Synth);
        let scores: Vec<Vec<f64>> = (0..6).map(|_| (0..120).map(|_| rng.random()).collect()).collect();
        let scorer = Fixed(scores);
        let whole = evaluate(&scorer, &split, Fold::Test, &DEFAULT_KS).unwrap();
        let one = sparsity_buckets(&scorer, &split, Fold::Test, &[], &DEFAULT_KS).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].metrics.as_ref(), Some(&whole));

        let many = sparsity_buckets(&scorer, &split, Fold::Test, &[1, 2, 3, 50], &DEFAULT_KS).unwrap();
        assert_eq!(many.len(), 5);
        assert_eq!(many.iter().map(|b| b.users).sum::<usize>(), whole.users);
        assert_eq!(many.last().unwrap().users, 0);
        assert!(many.last().unwrap().metrics.is_none());
    }

    #[test]
    fn non_increasing_edges_rejected() {
        let ds = toy_dataset();
        let split = leave_one_out_split(&ds, 100, &mut seeded(2, Stream::Split)).unwrap();
        let scorer = Fixed(vec![vec![0.0; 120]; 6]);
        assert!(sparsity_buckets(&scorer, &split, Fold::Test, &[3, 3], &DEFAULT_KS).is_err());
    }
}
