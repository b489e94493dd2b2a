//! Straight-line dense reference computations for cross-checking the sparse
//! implementation. Nothing here shares code with the main crate: inputs are
//! plain vectors and every adjacency is recovered by brute-force scans of an
//! explicit incidence matrix.

use std::collections::BTreeMap;

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    let mut out = zeros(a.len(), cols);
    for (r, row) in a.iter().enumerate() {
        assert_eq!(row.len(), inner);
        for c in 0..cols {
            let mut s = 0.0;
            for k in 0..inner {
                s += row[k] * b[k][c];
            }
            out[r][c] = s;
        }
    }
    out
}

pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `exp(x - max) / Σ exp(x - max)`.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// Hypergraph given only by its member lists over global node ids
/// (users `0..M`, items `M..M+N`).
#[derive(Debug, Clone)]
pub struct Instance {
    pub num_users: usize,
    pub num_items: usize,
    pub hyperedges: Vec<Vec<usize>>,
}

impl Instance {
    pub fn nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    /// `|E| x (M+N)` 0/1 incidence matrix.
    pub fn incidence(&self) -> Mat {
        let mut h = zeros(self.hyperedges.len(), self.nodes());
        for (e, members) in self.hyperedges.iter().enumerate() {
            for &w in members {
                h[e][w] = 1.0;
            }
        }
        h
    }

    /// Hyperedges containing both users, by scanning every hyperedge.
    pub fn shared_edges(&self, a: usize, b: usize) -> Vec<usize> {
        let h = self.incidence();
        (0..self.hyperedges.len()).filter(|&e| h[e][a] == 1.0 && h[e][b] == 1.0).collect()
    }

    /// Users sharing at least one hyperedge with `u`, ascending.
    pub fn friends(&self, u: usize) -> Vec<usize> {
        (0..self.num_users).filter(|&v| v != u && !self.shared_edges(u, v).is_empty()).collect()
    }

    /// Every socially connected pair `(a, b)` with `a < b`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.num_users {
            for b in a + 1..self.num_users {
                if !self.shared_edges(a, b).is_empty() {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
    pub w3: Mat,
    pub b3: Vec<f64>,
    pub w4: Mat,
    pub b4: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden_w: Mat,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

#[derive(Debug, Clone)]
pub struct Params {
    pub e0: Mat,
    pub layers: Vec<Layer>,
    pub mlp: Mlp,
    pub slope: f64,
    pub normalize: bool,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub hyperedges: Mat,
    pub relations: BTreeMap<(usize, usize), Vec<f64>>,
    /// α keyed by `(user i, friend w)`.
    pub attention: BTreeMap<(usize, usize), f64>,
    pub users: Mat,
    pub items: Mat,
}

fn affine(x: &Mat, w: &Mat, b: &[f64], slope: f64) -> Mat {
    let mut y = matmul(x, w);
    for row in &mut y {
        for (v, bias) in row.iter_mut().zip(b) {
            *v = leaky(*v + bias, slope);
        }
    }
    y
}

fn row_normalize(h: &Mat) -> Mat {
    h.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|v| if s > 0.0 { v / s } else { 0.0 }).collect()
        })
        .collect()
}

fn transpose(a: &Mat, cols: usize) -> Mat {
    (0..cols).map(|c| a.iter().map(|r| r[c]).collect()).collect()
}

fn normalize_row(v: &mut [f64], eps: f64) {
    let n = dot(v, v).sqrt().max(eps);
    for x in v {
        *x /= n;
    }
}

fn mlp(p: &Mlp, r: &[f64], slope: f64) -> f64 {
    let d = p.hidden_b.len();
    let mut s = p.out_b;
    for c in 0..d {
        let mut h = p.hidden_b[c];
        for k in 0..r.len() {
            h += r[k] * p.hidden_w[k][c];
        }
        s += leaky(h, slope) * p.out_w[c];
    }
    s
}

/// Full forward pass. Returns per-layer traces and the concatenated
/// `(M+N) x d(L+1)` representation.
pub fn forward(inst: &Instance, p: &Params) -> (Vec<LayerTrace>, Mat) {
    let m = inst.num_users;
    let n_nodes = inst.nodes();
    let h = inst.incidence();
    let h_edge_mean = row_normalize(&h);
    let h_node_mean = row_normalize(&transpose(&h, n_nodes));
    let pairs = inst.pairs();

    let mut e = p.e0.clone();
    let mut out: Mat = p.e0.clone();
    let mut traces = Vec::new();
    let d = p.e0[0].len();
    for layer in &p.layers {
        let c = affine(&matmul(&h_edge_mean, &e), &layer.w1, &layer.b1, p.slope);

        let mut relations = BTreeMap::new();
        for &(a, b) in &pairs {
            let shared = inst.shared_edges(a, b);
            let mut mean = vec![0.0; d];
            for &s in &shared {
                for (acc, v) in mean.iter_mut().zip(&c[s]) {
                    *acc += v / shared.len() as f64;
                }
            }
            relations.insert((a, b), affine(&vec![mean], &layer.w2, &layer.b2, p.slope).remove(0));
        }

        let mut attention = BTreeMap::new();
        for i in 0..m {
            let friends = inst.friends(i);
            let raw: Vec<f64> =
                friends.iter().map(|&w| mlp(&p.mlp, &relations[&(i.min(w), i.max(w))], p.slope)).collect();
            for (&w, a) in friends.iter().zip(softmax(&raw)) {
                attention.insert((i, w), a);
            }
        }

        // Without hyperedges the product has no inner dimension to infer widths from.
        let node_mean = if c.is_empty() { zeros(n_nodes, d) } else { matmul(&h_node_mean, &c) };
        let node_msg_users = affine(&node_mean, &layer.w3, &layer.b3, p.slope);
        let node_msg_items = affine(&node_mean, &layer.w4, &layer.b4, p.slope);
        let mut next = zeros(n_nodes, e[0].len());
        for w in 0..n_nodes {
            let has_edges = h.iter().any(|row| row[w] == 1.0);
            let msg = if w < m { &node_msg_users[w] } else { &node_msg_items[w] };
            for k in 0..next[w].len() {
                next[w][k] = e[w][k] + if has_edges { msg[k] } else { 0.0 };
            }
            if w < m {
                let mut social = vec![0.0; e[0].len()];
                for f in inst.friends(w) {
                    let a = attention[&(w, f)];
                    for k in 0..social.len() {
                        social[k] += a * e[f][k];
                    }
                }
                for k in 0..social.len() {
                    next[w][k] += leaky(social[k], p.slope);
                }
            }
            if p.normalize {
                normalize_row(&mut next[w], p.eps);
            }
        }

        for (row, add) in out.iter_mut().zip(&next) {
            row.extend_from_slice(add);
        }
        traces.push(LayerTrace {
            hyperedges: c,
            relations,
            attention,
            users: next[..m].to_vec(),
            items: next[m..].to_vec(),
        });
        e = next;
    }
    (traces, out)
}

/// 1-based rank of `target` after fully sorting by (score descending,
/// item id ascending).
pub fn rank_by_sort(candidates: &[usize], scores: &[f64], target: usize) -> usize {
    let mut order: Vec<(f64, usize)> = scores.iter().copied().zip(candidates.iter().copied()).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    1 + order.iter().position(|&(_, c)| c == target).expect("target among candidates")
}

/// `Σ −ln σ(pos − neg)` computed as `−ln(1 / (1 + e^{−x}))`; only valid for
/// moderate margins.
pub fn bpr_pairs_naive(pos: &[f64], neg: &[f64]) -> f64 {
    pos.iter().zip(neg).map(|(p, n)| -(1.0 / (1.0 + (-(p - n)).exp())).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let s = softmax(&[1.0, 2.0, 1000.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sort_rank_with_ties() {
        assert_eq!(rank_by_sort(&[5, 2, 9], &[1.0, 1.0, 1.0], 5), 2);
        assert_eq!(rank_by_sort(&[5, 2, 9], &[0.0, 1.0, 3.0], 5), 3);
    }

    #[test]
    fn pairs_found_by_scan() {
        let inst = Instance { num_users: 3, num_items: 1, hyperedges: vec![vec![0, 1, 3], vec![0, 2, 3]] };
        assert_eq!(inst.pairs(), vec![(0, 1), (0, 2)]);
        assert_eq!(inst.friends(0), vec![1, 2]);
        assert_eq!(inst.shared_edges(0, 2), vec![1]);
    }
}
