mod common;

use common::{max_abs_diff, oracle_instance, oracle_params, random_dataset};
use rand::Rng;
use shgcn::graph::{build_hypergraph, HyperedgeSpec, Hypergraph};
use shgcn::model::{ForwardTrace, ModelConfig, Recommender, ShgcnState};
use shgcn::rng::{seeded, Stream};
use shgcn_oracle as oracle;

const TOL: f64 = 1e-12;

fn compare(graph: &Hypergraph, state: &ShgcnState) -> f64 {
    let trace: ForwardTrace = state.forward_trace(graph).unwrap();
    let (layers, reps) = oracle::forward(&oracle_instance(graph), &oracle_params(state));
    let mut worst = 0.0f64;
    for (mine, theirs) in trace.layers.iter().zip(&layers) {
        for e in 0..graph.num_hyperedges() {
            worst = worst.max(max_abs_diff(mine.hyperedges.row(e), &theirs.hyperedges[e]));
        }
        assert_eq!(theirs.relations.len(), graph.num_relations());
        for (&(a, b), r) in &theirs.relations {
            let t = graph.relation_of(a, b).unwrap();
            worst = worst.max(max_abs_diff(mine.relations.row(t), r));
        }
        for i in 0..graph.num_users() {
            let span = graph.social().span(i);
            for (p, &w) in span.clone().zip(graph.neighbors(i)) {
                worst = worst.max((mine.attention.data()[p] - theirs.attention[&(i, w)]).abs());
            }
            worst = worst.max(max_abs_diff(mine.users.row(i), &theirs.users[i]));
        }
        for j in 0..graph.num_items() {
            worst = worst.max(max_abs_diff(mine.items.row(j), &theirs.items[j]));
        }
    }
    let mine = trace.representations.matrix();
    for (r, row) in reps.iter().enumerate() {
        worst = worst.max(max_abs_diff(mine.row(r), row));
    }
    worst
}

#[test]
fn sparse_forward_matches_dense_incidence_on_random_small_graphs() {
    let mut rng = seeded(2024, Stream::GradCheck);
    for case in 0..100 {
        let m = rng.random_range(2..=12);
        let n = rng.random_range(1..=20 - m);
        let triplets = rng.random_range(0..=12);
        let ds = random_dataset(&mut rng, m, n, triplets, 3);
        let graph = build_hypergraph(&ds).unwrap();
        let config = ModelConfig {
            dim: rng.random_range(1..=4),
            layers: rng.random_range(0..=3),
            normalize: rng.random_bool(0.8),
            init_std: 0.7,
            ..Default::default()
        };
        let state = ShgcnState::init(m, n, config, &mut rng).unwrap();
        let worst = compare(&graph, &state);
        assert!(worst <= TOL, "case {case}: max deviation {worst:e}");
    }
}

#[test]
fn higher_degree_hyperedges_match_dense_incidence() {
    let mut rng = seeded(5, Stream::GradCheck);
    let specs = vec![
        HyperedgeSpec { users: vec![0, 1, 2], items: vec![0] },
        HyperedgeSpec { users: vec![1, 3], items: vec![1, 2] },
        HyperedgeSpec { users: vec![0, 2], items: vec![2] },
    ];
    let graph = Hypergraph::from_hyperedges(5, 3, &specs, vec![]).unwrap();
    let config = ModelConfig { dim: 3, layers: 2, init_std: 0.6, ..Default::default() };
    let state = ShgcnState::init(5, 3, config, &mut rng).unwrap();
    assert!(compare(&graph, &state) <= TOL);
}

#[test]
fn scores_match_direct_dot_loop() {
    let mut rng = seeded(8, Stream::GradCheck);
    let ds = random_dataset(&mut rng, 6, 5, 8, 3);
    let graph = build_hypergraph(&ds).unwrap();
    let state = ShgcnState::init(6, 5, ModelConfig { dim: 4, layers: 2, ..Default::default() }, &mut rng).unwrap();
    let reps = state.representations(&graph).unwrap();
    let m = reps.matrix();
    for i in 0..6 {
        for j in 0..5 {
            let mut s = 0.0;
            for c in 0..m.cols() {
                s += m.get(i, c) * m.get(6 + j, c);
            }
            assert!((reps.score(i, j).unwrap() - s).abs() < 1e-12);
        }
    }
}
