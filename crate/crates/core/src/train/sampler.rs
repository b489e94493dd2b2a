use rand::Rng;

use crate::error::{Error, Result};

/// Uniform negative sampler over items a user has not interacted with in the
/// training set. Draws are independent (with replacement across draws);
/// each draw rejects collisions with the user's training items.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    num_items: usize,
    seen: Vec<Vec<usize>>,
}

impl NegativeSampler {
    pub fn new(num_users: usize, num_items: usize, train: &[(usize, usize)]) -> Self {
        let mut seen = vec![Vec::new(); num_users];
        for &(u, i) in train {
            seen[u].push(i);
        }
        for s in &mut seen {
            s.sort_unstable();
            s.dedup();
        }
        NegativeSampler { num_items, seen }
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn is_positive(&self, user: usize, item: usize) -> bool {
        self.seen[user].binary_search(&item).is_ok()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, user: usize, k: usize) -> Result<Vec<usize>> {
        if self.seen[user].len() >= self.num_items {
            return Err(Error::InvalidInput(format!(
                "user {user} interacted with all {} items; no negatives to sample",
                self.num_items
            )));
        }
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let j = rng.random_range(0..self.num_items);
            if !self.is_positive(user, j) {
                out.push(j);
            }
        }
        Ok(out)
    }
}
