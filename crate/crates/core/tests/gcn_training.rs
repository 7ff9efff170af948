mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wmdgcn::gcn::{accuracy, forward, init_model, train, ForwardOptions, TrainConfig};
use wmdgcn::graph::{add_self_loops_and_normalize, SimilarityGraph};
use wmdgcn::linalg::Matrix;

use common::*;

/// Two 4-cliques joined by one edge; features point at the cluster.
fn two_cluster_graph() -> (SimilarityGraph, Matrix, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    for base in [0, 4] {
        for u in base..base + 4 {
            for v in u + 1..base + 4 {
                edges.push((u, v));
            }
        }
    }
    edges.push((3, 4));
    let g = SimilarityGraph::new(8, 3, edges).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let sign = if i < 4 { -1.0 } else { 1.0 };
            (0..4).map(|d| if d == 0 { sign } else { rng.gen_range(-0.3..0.3) }).collect()
        })
        .collect();
    let targets = (0..8).map(|i| (i, usize::from(i >= 4))).collect();
    (g, Matrix::from_rows(&rows).unwrap(), targets)
}

#[test]
fn fully_labelled_toy_graph_is_fit() {
    let (g, x, targets) = two_cluster_graph();
    let adj = add_self_loops_and_normalize(&g);
    let (model, history) = train(&adj, &x, &targets, &[], &TrainConfig::default()).unwrap();
    assert_eq!(history.records.len(), 120);
    assert_eq!(history.best_epoch, 120);
    let probs = forward(&model, &adj, &x, ForwardOptions::eval(0.01)).unwrap().probs;
    assert_eq!(accuracy(&probs, &targets), 1.0);
    let (first, last) = (&history.records[0], &history.records[119]);
    assert!(last.train_loss < first.train_loss);
}

#[test]
fn best_epoch_snapshot_is_returned() {
    let (g, x, targets) = two_cluster_graph();
    let adj = add_self_loops_and_normalize(&g);
    let (train_nodes, val) = (vec![targets[0], targets[7]], targets[1..7].to_vec());
    let (model, history) = train(&adj, &x, &train_nodes, &val, &TrainConfig::default()).unwrap();
    let best = &history.records[history.best_epoch - 1];
    let max = history.records.iter().map(|r| r.val_acc).fold(0.0, f64::max);
    assert_eq!(best.val_acc, max);
    assert!(history.records[..history.best_epoch - 1].iter().all(|r| r.val_acc < max));
    let probs = forward(&model, &adj, &x, ForwardOptions::eval(0.01)).unwrap().probs;
    assert_eq!(accuracy(&probs, &val), best.val_acc);
}

#[test]
fn training_is_reproducible() {
    let (g, x, targets) = two_cluster_graph();
    let adj = add_self_loops_and_normalize(&g);
    let cfg = TrainConfig { seed: 17, ..TrainConfig::default() };
    let a = train(&adj, &x, &targets[..4], &targets[4..], &cfg).unwrap();
    let b = train(&adj, &x, &targets[..4], &targets[4..], &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(&mut rng, n, 0.4);
        let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let model = init_model(&[3, 16, 16, 16, 2], seed).unwrap();
        let adj = add_self_loops_and_normalize(&SimilarityGraph::new(n, 1, edges).unwrap());
        let px = Matrix::from_rows(&perm.iter().map(|&p| x.row(p).to_vec()).collect::<Vec<_>>()).unwrap();
        let opts = ForwardOptions::eval(0.01);
        let base = forward(&model, &adj, &x, opts).unwrap().probs;
        let moved = forward(&model, &adj.permuted(&perm), &px, opts).unwrap().probs;
        for i in 0..n {
            for c in 0..2 {
                prop_assert!((moved[(i, c)] - base[(perm[i], c)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric_with_unit_spectral_bound(seed in any::<u64>(), n in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(&mut rng, n, 0.3);
        let adj = add_self_loops_and_normalize(&SimilarityGraph::new(n, 1, edges.iter().copied()).unwrap());
        let dense = dense_normalized(n, &edges);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(adj.get(i, j), adj.get(j, i));
                prop_assert!((adj.get(i, j) - dense[i][j]).abs() <= 1e-12);
            }
        }
        // Ã has eigenvalue 1 with eigenvector D̂^{1/2}·1.
        let deg: Vec<f64> = (0..n).map(|i| 1.0 + edges.iter().filter(|e| e.0 == i || e.1 == i).count() as f64).collect();
        let v = Matrix::from_vec(n, 1, deg.iter().map(|d| d.sqrt()).collect()).unwrap();
        let av = adj.apply(&v).unwrap();
        prop_assert!(av.max_abs_diff(&v) <= 1e-12);
    }
}
