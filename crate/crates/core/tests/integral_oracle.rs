mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toastkit::flows::FlowGraph;

#[test]
fn graph_counts_match_known_sequence() {
    // connected graphs by edge count: 1, 1, 3, 5, 12, 30, 79, 227
    let gs = common::connected_graphs(8);
    let mut by = [0usize; 9];
    for (_, e) in &gs {
        by[e.len()] += 1;
    }
    assert_eq!(&by[1..], &[1, 1, 3, 5, 12, 30, 79, 227]);
    assert_eq!(gs.len(), 358);
}

#[test]
fn brute_force_finds_the_obvious_flows() {
    let g = FlowGraph { n: 3, edges: vec![(0, 1), (1, 2), (0, 2)] };
    let sols = common::brute_force(&g, &[1, 1, 1], 1, &[1, 0, -1]);
    assert_eq!(sols.len(), 2);
    assert!(sols.contains(&vec![1, 1, 0]) && sols.contains(&vec![0, 0, 1]));
}

#[test]
fn exhaustive_small_graphs() {
    let (graphs, instances, failures) = common::exhaustive_oracle(8, 2);
    assert_eq!(graphs, 358);
    assert!(instances > 1000, "{instances}");
    assert!(failures.is_empty(), "{:?}", &failures[..failures.len().min(5)]);
}

#[test]
fn random_instances_have_integral_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (g, phi, exp, f) = common::random_instance(&mut rng);
        let out = g.out_sums(&phi).unwrap();
        assert!(out.iter().zip(&f).all(|(o, v)| *o == v << exp));
    }
}

#[test]
fn randomized_deviation() {
    let failures = common::randomized_oracle(20_000, 11);
    assert!(failures.is_empty(), "{:?}", &failures[..failures.len().min(5)]);
}
