mod common;

use shgcn::rng::{seeded, Stream};
use shgcn::synth::{generate, SynthConfig};
use shgcn::train::NegativeSampler;

#[test]
fn negatives_are_uniform_over_unseen_items() {
    let sampler = NegativeSampler::new(1, 100, &[(0, 17), (0, 64)]);
    let mut rng = seeded(9, Stream::Train);
    let draws = sampler.sample(&mut rng, 0, 100_000).unwrap();
    let mut counts = vec![0usize; 100];
    for j in draws {
        counts[j] += 1;
    }
    assert_eq!(counts[17] + counts[64], 0);
    let unseen: Vec<usize> = (0..100).filter(|&j| j != 17 && j != 64).map(|j| counts[j]).collect();
    let stat = common::chi_squared(&unseen);
    assert!(stat < common::chi_squared_critical(97), "χ² = {stat}");
}

#[test]
fn fully_noisy_triplets_are_uniform() {
    let cfg = SynthConfig { num_users: 2000, num_items: 50, num_topics: 5, noise: 1.0, ..Default::default() };
    let (ds, _) = generate(&cfg).unwrap();
    assert!(ds.triplets.len() > 5000);
    let mut counts = vec![0usize; 50];
    for &(_, _, j) in &ds.triplets {
        counts[j] += 1;
    }
    let stat = common::chi_squared(&counts);
    assert!(stat < common::chi_squared_critical(49), "χ² = {stat}");
}

#[test]
fn critical_values_are_sane() {
    // Tabulated upper 0.1% points.
    assert!((common::chi_squared_critical(50) - 86.66).abs() < 0.5);
    assert!((common::chi_squared_critical(100) - 149.45).abs() < 0.5);
}
