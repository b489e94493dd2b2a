use crate::error::{Error, Result};
use crate::numeric::{neg_log_sigmoid, Tape, Var};

/// BPR pairs `(user, positive, negative)` stored column-wise.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Batch {
    pub users: Vec<usize>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn push(&mut self, user: usize, positive: usize, negative: usize) {
        self.users.push(user);
        self.positives.push(positive);
        self.negatives.push(negative);
    }

    /// Sorted distinct layer-0 rows (global node ids) touched by the batch.
    pub fn touched_rows(&self, num_users: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .users
            .iter()
            .copied()
            .chain(self.positives.iter().chain(&self.negatives).map(|&j| num_users + j))
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

/// `Σ −ln σ(pos − neg) + λ · reg_sq_norm` on plain scores.
pub fn bpr_loss(pos: &[f64], neg: &[f64], reg_sq_norm: f64, lambda: f64) -> f64 {
    assert_eq!(pos.len(), neg.len());
    let pairs: f64 = pos.iter().zip(neg).map(|(p, n)| neg_log_sigmoid(p - n)).sum();
    pairs + lambda * reg_sq_norm
}

/// Records the BPR loss for `batch` given final representations `reps`
/// (`(M+N) x w`) and layer-0 embeddings `e0`. Returns `(total, pairwise)`.
pub fn record_bpr_loss<'g>(
    tape: &mut Tape<'g>,
    reps: Var,
    e0: Var,
    num_users: usize,
    batch: &Batch,
    lambda: f64,
) -> Result<(Var, Var)> {
    if batch.is_empty() {
        return Err(Error::contract("empty BPR batch"));
    }
    let pos_idx: Vec<usize> = batch.positives.iter().map(|&j| num_users + j).collect();
    let neg_idx: Vec<usize> = batch.negatives.iter().map(|&j| num_users + j).collect();
    let pos = tape.pair_dot(reps, batch.users.clone(), pos_idx)?;
    let neg = tape.pair_dot(reps, batch.users.clone(), neg_idx)?;
    let margin = tape.sub(pos, neg)?;
    let terms = tape.neg_log_sigmoid(margin)?;
    let pairwise = tape.sum(terms)?;
    if lambda == 0.0 {
        return Ok((pairwise, pairwise));
    }
    let touched = tape.gather_rows(e0, batch.touched_rows(num_users))?;
    let reg = tape.sum_squares(touched)?;
    let reg = tape.scale(reg, lambda)?;
    Ok((tape.add(pairwise, reg)?, pairwise))
}
