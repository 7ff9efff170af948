//! k-nearest-neighbour document graph under WMD and its symmetrically
//! normalized adjacency `D̂^{-1/2} (A + I) D̂^{-1/2}`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::transport::cache::DistanceCache;
use crate::transport::{
    euclidean, rwmd_with_costs, wmd_with_costs, CostMatrix, NbowSignature,
};

/// How per-node neighbour lists are symmetrized into undirected edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnRule {
    /// `{p,q}` if either is among the other's k nearest.
    #[default]
    Union,
    /// `{p,q}` only if each is among the other's k nearest.
    Mutual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityGraph {
    n: usize,
    k: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SimilarityGraph {
    /// Edges are normalized to `(min, max)`; self-loops are rejected.
    pub fn new(
        n: usize,
        k: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::data(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::data(format!("edge ({u}, {v}) outside {n} nodes")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(SimilarityGraph { n, k, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Text layout: `n k`, then one `u v` per line with `u < v`, sorted.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.k)?;
        for (u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_pair = |lineno: usize, line: &str| -> Result<(usize, usize)> {
            let mut it = line.split_ascii_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(Error::parse(lineno, format!("expected two integers, got `{line}`"))),
            }
        };
        let (n, k) = match lines.next() {
            Some((_, line)) => parse_pair(1, &line?)?,
            None => return Err(Error::parse(1, "empty graph file")),
        };
        let mut edges = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            edges.push(parse_pair(i + 1, &line)?);
        }
        SimilarityGraph::new(n, k, edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnOptions {
    pub k: usize,
    pub rule: KnnRule,
    /// Worker threads for the per-node queries; 0 or 1 runs inline.
    pub workers: usize,
}

impl KnnOptions {
    pub fn new(k: usize) -> Self {
        KnnOptions {
            k,
            rule: KnnRule::Union,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KnnStats {
    pub candidate_pairs: usize,
    pub pruned_by_wcd: usize,
    pub pruned_by_rwmd: usize,
    pub exact: usize,
}

#[derive(Debug, Clone)]
pub struct KnnBuild {
    pub graph: SimilarityGraph,
    /// Ascending `(distance, node)` neighbour list per node.
    pub neighbors: Vec<Vec<(f64, usize)>>,
    pub distances: DistanceCache,
    pub stats: KnnStats,
}

/// A lower bound only rules a candidate out when it clears the current k-th
/// distance by this relative margin, absorbing rounding in the bound.
const PRUNE_SLACK: f64 = 1e-9;

struct NodeResult {
    neighbors: Vec<(f64, usize)>,
    exact: Vec<(usize, f64)>,
    stats: KnnStats,
}

fn exceeds(bound: f64, kth: f64) -> bool {
    bound > kth + PRUNE_SLACK * kth.max(1.0)
}

fn query_node(
    p: usize,
    k: usize,
    signatures: &[NbowSignature],
    centroids: &[Vec<f64>],
    table: &EmbeddingTable,
) -> Result<NodeResult> {
    let n = signatures.len();
    let mut order: Vec<(f64, usize)> = (0..n)
        .filter(|&q| q != p)
        .map(|q| (euclidean(&centroids[p], &centroids[q]), q))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    let mut exact = Vec::new();
    let mut stats = KnnStats {
        candidate_pairs: order.len(),
        ..KnnStats::default()
    };
    for (idx, &(wcd, q)) in order.iter().enumerate() {
        let kth = (best.len() == k).then(|| best[k - 1].0);
        if let Some(kth) = kth {
            if exceeds(wcd, kth) {
                stats.pruned_by_wcd += order.len() - idx;
                break;
            }
        }
        // Canonical orientation so both endpoints see the same float.
        let (lo, hi) = (p.min(q), p.max(q));
        let cost = CostMatrix::between(&signatures[lo], &signatures[hi], table);
        if let Some(kth) = kth {
            if exceeds(rwmd_with_costs(&signatures[lo], &signatures[hi], &cost), kth) {
                stats.pruned_by_rwmd += 1;
                continue;
            }
        }
        let (d, _) = wmd_with_costs(&signatures[lo], &signatures[hi], &cost)?;
        stats.exact += 1;
        exact.push((q, d));
        let cand = (d, q);
        let pos = best
            .binary_search_by(|b| b.0.total_cmp(&cand.0).then(b.1.cmp(&cand.1)))
            .unwrap_or_else(|e| e);
        if pos < k {
            best.insert(pos, cand);
            best.truncate(k);
        }
    }
    Ok(NodeResult {
        neighbors: best,
        exact,
        stats,
    })
}

/// Exact k-NN graph under WMD. Candidates are visited in centroid-distance
/// order and skipped only when a lower bound (WCD, then RWMD) exceeds the
/// current k-th exact distance, so the result equals an all-pairs build.
/// Distance ties go to the smaller node index.
pub fn knn_graph(
    signatures: &[NbowSignature],
    table: &EmbeddingTable,
    options: KnnOptions,
) -> Result<KnnBuild> {
    let n = signatures.len();
    let k = options.k;
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if n <= k {
        return Err(Error::data(format!(
            "k-NN graph needs more than k = {k} documents, got {n}"
        )));
    }
    for (i, s) in signatures.iter().enumerate() {
        NbowSignature::new(s.entries().to_vec())
            .map_err(|e| Error::data(format!("signature of document {i}: {e}")))?;
        if let Some(&(idx, _)) = s.entries().iter().find(|e| e.0 >= table.len()) {
            return Err(Error::data(format!(
                "signature of document {i} references word {idx} beyond the table"
            )));
        }
    }
    let centroids: Vec<Vec<f64>> = signatures.iter().map(|s| s.centroid(table)).collect();
    let query = |p: usize| query_node(p, k, signatures, &centroids, table);

    let results: Vec<NodeResult> = run_queries(n, options.workers, query)?;

    let mut distances = DistanceCache::new(n);
    let mut stats = KnnStats::default();
    let mut neighbors = Vec::with_capacity(n);
    for (p, r) in results.into_iter().enumerate() {
        for (q, d) in r.exact {
            distances.set(p, q, d);
        }
        stats.candidate_pairs += r.stats.candidate_pairs;
        stats.pruned_by_wcd += r.stats.pruned_by_wcd;
        stats.pruned_by_rwmd += r.stats.pruned_by_rwmd;
        stats.exact += r.stats.exact;
        neighbors.push(r.neighbors);
    }
    let graph = graph_from_neighbors(n, k, &neighbors, options.rule)?;
    Ok(KnnBuild {
        graph,
        neighbors,
        distances,
        stats,
    })
}

#[cfg(feature = "parallel")]
fn run_queries<F>(n: usize, workers: usize, query: F) -> Result<Vec<NodeResult>>
where
    F: Fn(usize) -> Result<NodeResult> + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return (0..n).map(query).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(query).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_queries<F>(n: usize, _workers: usize, query: F) -> Result<Vec<NodeResult>>
where
    F: Fn(usize) -> Result<NodeResult>,
{
    (0..n).map(query).collect()
}

/// Symmetrizes per-node neighbour lists.
pub fn graph_from_neighbors(
    n: usize,
    k: usize,
    neighbors: &[Vec<(f64, usize)>],
    rule: KnnRule,
) -> Result<SimilarityGraph> {
    let lists: Vec<BTreeSet<usize>> = neighbors
        .iter()
        .map(|l| l.iter().map(|&(_, q)| q).collect())
        .collect();
    let edges = lists.iter().enumerate().flat_map(|(p, l)| {
        let lists = &lists;
        l.iter()
            .filter(move |&&q| rule == KnnRule::Union || lists[q].contains(&p))
            .map(move |&q| (p, q))
    });
    SimilarityGraph::new(n, k, edges)
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency {
            matrix: CsrMatrix::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn to_dense(&self) -> Matrix {
        self.matrix.to_dense()
    }

    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        self.matrix.mul_dense(h)
    }

    /// Relabels nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let rows = (0..n)
            .map(|i| {
                self.matrix
                    .row(perm[i])
                    .map(|(j, v)| (inv[j], v))
                    .collect()
            })
            .collect();
        NormalizedAdjacency {
            matrix: CsrMatrix::from_rows(rows),
        }
    }
}

pub fn add_self_loops_and_normalize(g: &SimilarityGraph) -> NormalizedAdjacency {
    let deg_hat: Vec<f64> = g.degrees().iter().map(|&d| (d + 1) as f64).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..g.n())
        .map(|i| vec![(i, 1.0 / deg_hat[i])])
        .collect();
    for &(u, v) in g.edges() {
        let w = 1.0 / (deg_hat[u] * deg_hat[v]).sqrt();
        rows[u].push((v, w));
        rows[v].push((u, w));
    }
    NormalizedAdjacency {
        matrix: CsrMatrix::from_rows(rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::load_glove;

    fn line_corpus(points: &[f64]) -> (Vec<NbowSignature>, EmbeddingTable) {
        let text: String = points
            .iter()
            .enumerate()
            .map(|(i, x)| format!("w{i} {x}\n"))
            .collect();
        let table = load_glove(text.as_bytes(), 1).unwrap();
        let sigs = (0..points.len())
            .map(|i| NbowSignature::new(vec![(i, 1.0)]).unwrap())
            .collect();
        (sigs, table)
    }

    #[test]
    fn three_points_on_a_line() {
        let (sigs, table) = line_corpus(&[0.0, 1.0, 3.0]);
        let b = knn_graph(&sigs, &table, KnnOptions::new(1)).unwrap();
        let nn: Vec<usize> = b.neighbors.iter().map(|l| l[0].1).collect();
        assert_eq!(nn, [1, 0, 1]);
        assert_eq!(b.graph.edges().iter().copied().collect::<Vec<_>>(), [(0, 1), (1, 2)]);
    }

    #[test]
    fn mutual_rule_is_subset() {
        let (sigs, table) = line_corpus(&[0.0, 1.0, 3.0]);
        let mut opts = KnnOptions::new(1);
        opts.rule = KnnRule::Mutual;
        let b = knn_graph(&sigs, &table, opts).unwrap();
        assert_eq!(b.graph.edges().iter().copied().collect::<Vec<_>>(), [(0, 1)]);
    }

    #[test]
    fn large_k_gives_complete_graph() {
        let (sigs, table) = line_corpus(&[0.0, 1.0, 3.0, 7.0, 2.5]);
        let b = knn_graph(&sigs, &table, KnnOptions::new(4)).unwrap();
        assert_eq!(b.graph.edges().len(), 10);
    }

    #[test]
    fn ties_go_to_smaller_index() {
        let (sigs, table) = line_corpus(&[0.0, -1.0, 1.0]);
        let b = knn_graph(&sigs, &table, KnnOptions::new(1)).unwrap();
        assert_eq!(b.neighbors[0], vec![(1.0, 1)]);
    }

    #[test]
    fn knn_errors() {
        let (sigs, table) = line_corpus(&[0.0, 1.0, 3.0]);
        assert!(knn_graph(&sigs, &table, KnnOptions::new(3)).is_err());
        assert!(knn_graph(&sigs, &table, KnnOptions::new(0)).is_err());
        let mut bad = sigs.clone();
        bad[1] = NbowSignature::new_unchecked(vec![(1, 0.4)]);
        let err = knn_graph(&bad, &table, KnnOptions::new(1)).unwrap_err();
        assert!(err.to_string().contains("document 1"), "{err}");
    }

    #[test]
    fn graph_file_round_trip() {
        let g = SimilarityGraph::new(4, 1, [(2, 1), (0, 3), (1, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "4 1\n0 3\n1 2\n");
        assert_eq!(SimilarityGraph::read(buf.as_slice()).unwrap(), g);
        assert!(SimilarityGraph::read("3 1\n0 x\n".as_bytes()).is_err());
        assert!(SimilarityGraph::new(3, 1, [(1, 1)]).is_err());
    }

    #[test]
    fn normalization_fixtures() {
        let id = add_self_loops_and_normalize(&SimilarityGraph::new(3, 1, []).unwrap());
        assert_eq!(id.to_dense(), Matrix::identity(3));

        let two = add_self_loops_and_normalize(&SimilarityGraph::new(2, 1, [(0, 1)]).unwrap());
        assert_eq!(two.to_dense().as_slice(), &[0.5; 4]);

        let path =
            add_self_loops_and_normalize(&SimilarityGraph::new(3, 1, [(0, 1), (1, 2)]).unwrap());
        let d = path.to_dense();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((d[(1, 1)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((d[(2, 2)] - 0.5).abs() < 1e-12);
        assert!((d[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(d[(0, 2)], 0.0);
        assert_eq!(d[(0, 1)].to_bits(), d[(1, 0)].to_bits());
    }

    #[test]
    fn regular_graph_preserves_ones() {
        // 6-cycle: every node has degree 2, 3 after self-loops.
        let g = SimilarityGraph::new(6, 1, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        let a = add_self_loops_and_normalize(&g);
        let ones = Matrix::from_vec(6, 1, vec![1.0; 6]).unwrap();
        let out = a.apply(&ones).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
