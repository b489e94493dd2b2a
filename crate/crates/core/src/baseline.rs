//! Matrix factorization scored by `r_ij = ⟨P_i, Q_j⟩`, trained through the
//! same BPR loop as SHGCN.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Hypergraph;
use crate::model::{ModelKind, Recommender};
use crate::numeric::matrix::dot;
use crate::numeric::{Matrix, Tape, Var};

/// Free user and item embeddings stacked as `[P; Q]`, `(M+N) x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfState {
    pub num_users: usize,
    pub num_items: usize,
    pub embeddings: Matrix,
}

impl MfState {
    pub fn init<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        dim: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(MfState { num_users, num_items, embeddings: Matrix::random_normal(num_users + num_items, dim, std, rng) })
    }

    pub fn from_embeddings(num_users: usize, num_items: usize, embeddings: Matrix) -> Result<Self> {
        if embeddings.rows() != num_users + num_items {
            return Err(Error::contract(format!(
                "MF embeddings have {} rows, expected {}",
                embeddings.rows(),
                num_users + num_items
            )));
        }
        Ok(MfState { num_users, num_items, embeddings })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn user(&self, i: usize) -> &[f64] {
        self.embeddings.row(i)
    }

    pub fn item(&self, j: usize) -> &[f64] {
        self.embeddings.row(self.num_users + j)
    }
}

pub fn mf_score(state: &MfState, user: usize, item: usize) -> Result<f64> {
    if user >= state.num_users || item >= state.num_items {
        return Err(Error::contract(format!(
            "mf_score({user}, {item}) out of range for {} users / {} items",
            state.num_users, state.num_items
        )));
    }
    Ok(dot(state.user(user), state.item(item)))
}

impl Recommender for MfState {
    fn kind(&self) -> ModelKind {
        ModelKind::Mf
    }

    fn num_users(&self) -> usize {
        self.num_users
    }

    fn num_items(&self) -> usize {
        self.num_items
    }

    fn parameters(&self) -> Vec<&Matrix> {
        vec![&self.embeddings]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.embeddings]
    }

    fn record_forward<'g>(&self, _tape: &mut Tape<'g>, params: &[Var], graph: &'g Hypergraph) -> Result<Var> {
        if graph.num_users() != self.num_users || graph.num_items() != self.num_items {
            return Err(Error::contract("MF model and graph disagree on user/item counts"));
        }
        match params {
            [e] => Ok(*e),
            _ => Err(Error::contract(format!("MF takes 1 parameter variable, got {}", params.len()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(p: [f64; 2], q: [f64; 2]) -> MfState {
        MfState::from_embeddings(1, 1, Matrix::from_rows(&[p, q])).unwrap()
    }

    #[test]
    fn orthogonal_scores_zero() {
        assert_eq!(mf_score(&state([1.0, 0.0], [0.0, 1.0]), 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn halves_score_half() {
        assert_eq!(mf_score(&state([0.5, 0.5], [0.5, 0.5]), 0, 0).unwrap(), 0.5);
    }

    #[test]
    fn out_of_range_is_contract_error() {
        let s = state([1.0, 0.0], [0.0, 1.0]);
        assert!(matches!(mf_score(&s, 1, 0), Err(Error::Contract(_))));
        assert!(matches!(mf_score(&s, 0, 1), Err(Error::Contract(_))));
    }
}
