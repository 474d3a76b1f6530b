mod common;

use common::*;
use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smmfit::markov::{count_transitions, EncodedSequence};
use smmfit::metrics::{adjusted_rand_index, rand_index};
use smmfit::solver::{ama_solve, SolverConfig};
use smmfit::weights::WeightGraph;

#[test]
fn closed_form_three_points_match_subgradient() {
    let points = array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]];
    let graph = WeightGraph::complete(3);
    let res = ama_solve(points.view(), &graph, 0.05, &SolverConfig::default()).unwrap();
    let (_, oracle) = subgradient_oracle(points.view(), &graph, 0.05, 200_000);
    let exact = 0.1 * 2f64.sqrt() - 0.01;
    assert!((res.primal_obj - exact).abs() < 1e-6 * exact);
    assert!((oracle - exact).abs() < 1e-4 * exact);
    let (_, admm) = admm_oracle(points.view(), &graph, 0.05, 1e-13, 1_000_000);
    assert!((admm - exact).abs() < 1e-10 * exact);
}

#[test]
fn ama_matches_admm_to_gap_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SolverConfig {
        dual_gap_tol: 1e-10,
        max_iter: 500_000,
        ..SolverConfig::default()
    };
    for _ in 0..100 {
        let p = rng.random_range(2..=8);
        let d = rng.random_range(2..=4);
        let points = random_points(p, d, &mut rng);
        let graph = random_graph(p, 0.6, &mut rng);
        let lambda = log_uniform(1e-3, 2.0, &mut rng);
        let res = ama_solve(points.view(), &graph, lambda, &cfg).unwrap();
        assert!(res.converged);
        let (u, admm) = admm_oracle(points.view(), &graph, lambda, 1e-13, 1_000_000);
        let ama = objective(points.view(), res.centroids.view(), &graph, lambda);
        assert!((ama - admm).abs() <= 1e-8 * admm.abs().max(1e-12), "ama {ama} admm {admm}");
        let dist = (&u - &res.centroids).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(dist < 1e-4, "centroid distance {dist}");
    }
}

#[test]
fn ama_matches_subgradient_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SolverConfig {
        dual_gap_tol: 1e-9,
        max_iter: 200_000,
        ..SolverConfig::default()
    };
    for _ in 0..25 {
        let p = rng.random_range(2..=5);
        let d = rng.random_range(2..=3);
        let points = random_points(p, d, &mut rng);
        let graph = random_graph(p, 0.7, &mut rng);
        let lambda = log_uniform(1e-2, 1.0, &mut rng);
        let res = ama_solve(points.view(), &graph, lambda, &cfg).unwrap();
        assert!(res.converged);
        let (_, oracle) = subgradient_oracle(points.view(), &graph, lambda, 1_000_000);
        let ama = objective(points.view(), res.centroids.view(), &graph, lambda);
        assert!(
            (ama - oracle).abs() <= 1e-4 * oracle.abs().max(1e-12),
            "ama {ama} oracle {oracle}"
        );
    }
}

#[test]
fn metrics_match_pair_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.random_range(2..=60);
        let ka = rng.random_range(1..=6);
        let kb = rng.random_range(1..=6);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let (ri, ari) = brute_force_ri_ari(&a, &b);
        assert!((rand_index(&a, &b).unwrap() - ri).abs() < 1e-12);
        assert!((adjusted_rand_index(&a, &b).unwrap() - ari).abs() < 1e-12);
    }
}

#[test]
fn counts_match_naive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let d = rng.random_range(2..=4);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(m + 1..=200);
        let codes: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
        let counts = count_transitions(&EncodedSequence::from_codes(codes.clone(), d).unwrap(), m).unwrap();
        let naive = naive_counts(&codes, d, m);
        for (ctx, row) in naive.iter().enumerate() {
            assert_eq!(counts.row(ctx).to_vec(), *row);
        }
    }
}
