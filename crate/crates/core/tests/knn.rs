mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wmdgcn::embedding::EmbeddingTable;
use wmdgcn::graph::{knn_graph, KnnOptions, KnnRule};
use wmdgcn::transport::{wmd, NbowSignature};

use common::*;

fn corpus(seed: u64, n: usize) -> (Vec<NbowSignature>, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = random_table(&mut rng, 40, 8);
    let sigs = (0..n).map(|_| random_signature(&mut rng, 40, 6)).collect();
    (sigs, table)
}

fn distances(sigs: &[NbowSignature], table: &EmbeddingTable) -> Vec<Vec<f64>> {
    let n = sigs.len();
    let mut d = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in p + 1..n {
            d[p][q] = wmd(&sigs[p], &sigs[q], table).unwrap().0;
        }
    }
    d
}

#[test]
fn hundred_docs_match_brute_force_and_grow_with_k() {
    let (sigs, table) = corpus(9, 100);
    let d = distances(&sigs, &table);
    let k3 = knn_graph(&sigs, &table, KnnOptions::new(3)).unwrap();
    let k5 = knn_graph(&sigs, &table, KnnOptions::new(5)).unwrap();
    assert_eq!(k3.graph.edges(), &brute_force_knn(100, 3, false, |p, q| d[p][q]));
    assert_eq!(k5.graph.edges(), &brute_force_knn(100, 5, false, |p, q| d[p][q]));
    assert!(k3.graph.edges().is_subset(k5.graph.edges()));
    assert!(k3.graph.degrees().iter().all(|&deg| deg >= 3));
}

#[test]
fn mutual_rule_matches_brute_force() {
    let (sigs, table) = corpus(10, 60);
    let d = distances(&sigs, &table);
    let opts = KnnOptions {
        rule: KnnRule::Mutual,
        ..KnnOptions::new(4)
    };
    let build = knn_graph(&sigs, &table, opts).unwrap();
    assert_eq!(build.graph.edges(), &brute_force_knn(60, 4, true, |p, q| d[p][q]));
}

#[test]
fn worker_count_does_not_change_the_result() {
    let (sigs, table) = corpus(11, 80);
    let one = knn_graph(&sigs, &table, KnnOptions::new(3)).unwrap();
    let many = knn_graph(
        &sigs,
        &table,
        KnnOptions {
            workers: 4,
            ..KnnOptions::new(3)
        },
    )
    .unwrap();
    assert_eq!(one.graph, many.graph);
    assert_eq!(one.neighbors, many.neighbors);
}

#[test]
fn pruning_skips_most_exact_solves() {
    let (sigs, table) = corpus(12, 150);
    let build = knn_graph(&sigs, &table, KnnOptions::new(3)).unwrap();
    let s = build.stats;
    assert_eq!(s.candidate_pairs, 150 * 149);
    assert_eq!(s.exact + s.pruned_by_wcd + s.pruned_by_rwmd, s.candidate_pairs);
    assert!(s.exact < s.candidate_pairs / 2, "{s:?}");
}

#[test]
fn too_few_documents_is_an_error() {
    let (sigs, table) = corpus(13, 3);
    assert!(knn_graph(&sigs, &table, KnnOptions::new(3)).is_err());
    assert!(knn_graph(&sigs, &table, KnnOptions::new(2)).is_ok());
}
