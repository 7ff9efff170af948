//! Word Mover's Distance: the transportation problem between two
//! normalized bag-of-words signatures, plus the centroid (WCD) and relaxed
//! (RWMD) lower bounds used to prune k-NN search.

pub mod cache;
mod simplex;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

pub use simplex::SolveStats;

/// Distinct words kept per signature unless configured otherwise.
pub const DEFAULT_SIGNATURE_CAP: usize = 400;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Normalized bag of words over embedding-table indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbowSignature {
    entries: Vec<(usize, f64)>,
}

impl NbowSignature {
    /// Validates distinct indices, strictly positive weights and unit total.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::data("signature has no words"));
        }
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        for &(idx, w) in &entries {
            if !seen.insert(idx) {
                return Err(Error::data(format!("signature repeats word index {idx}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::data(format!("signature weight {w} outside (0, 1]")));
            }
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Infeasible(format!(
                "signature weights sum to {total}, not 1"
            )));
        }
        Ok(NbowSignature { entries })
    }

    /// Skips validation. Used by the solver-level tests to probe the
    /// infeasibility check.
    #[doc(hidden)]
    pub fn new_unchecked(entries: Vec<(usize, f64)>) -> Self {
        NbowSignature { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn total(&self) -> f64 {
        self.weights().sum()
    }

    fn check(&self) -> Result<()> {
        let total = self.total();
        if self.entries.is_empty() || (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Infeasible(format!(
                "signature weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    /// Weighted mean of the signature's word vectors.
    pub fn centroid(&self, table: &EmbeddingTable) -> Vec<f64> {
        let mut c = vec![0.0; table.dim()];
        for &(idx, w) in &self.entries {
            for (ci, x) in c.iter_mut().zip(table.vector(idx)) {
                *ci += w * x;
            }
        }
        c
    }
}

/// Term-frequency signature of the document's in-vocabulary tokens.
pub fn nbow(doc: &Document, table: &EmbeddingTable) -> Result<NbowSignature> {
    nbow_capped(doc, table, usize::MAX)
}

/// Like [`nbow`] but keeps only the `cap` most frequent distinct words (ties
/// by first occurrence) and renormalizes over what is kept.
pub fn nbow_capped(doc: &Document, table: &EmbeddingTable, cap: usize) -> Result<NbowSignature> {
    if cap == 0 {
        return Err(Error::config("signature cap must be at least 1"));
    }
    let mut order: Vec<usize> = Vec::new();
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for tok in &doc.tokens {
        if let Some(idx) = table.index_of(tok) {
            let c = counts.entry(idx).or_insert(0);
            if *c == 0 {
                order.push(idx);
            }
            *c += 1;
        }
    }
    if order.is_empty() {
        return Err(Error::data(format!(
            "document `{}` has no in-vocabulary tokens",
            doc.id
        )));
    }
    if order.len() > cap {
        let mut ranked: Vec<(usize, usize)> = order.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| counts[&b.1].cmp(&counts[&a.1]).then(a.0.cmp(&b.0)));
        let mut keep: Vec<(usize, usize)> = ranked.into_iter().take(cap).collect();
        keep.sort_by_key(|&(pos, _)| pos);
        order = keep.into_iter().map(|(_, idx)| idx).collect();
    }
    let total: usize = order.iter().map(|i| counts[i]).sum();
    let entries = order
        .into_iter()
        .map(|idx| (idx, counts[&idx] as f64 / total as f64))
        .collect();
    NbowSignature::new(entries)
}

/// Euclidean travel cost between two word vectors.
pub fn word_cost(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim(format!(
            "word vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(euclidean(u, v))
}

#[inline]
pub(crate) fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise word costs between two signatures, row-major `|a| × |b|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn between(a: &NbowSignature, b: &NbowSignature, table: &EmbeddingTable) -> Self {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &(i, _) in a.entries() {
            let x = table.vector(i);
            for &(j, _) in b.entries() {
                data.push(if i == j { 0.0 } else { euclidean(x, table.vector(j)) });
            }
        }
        CostMatrix {
            rows: a.len(),
            cols: b.len(),
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("cost matrix shape"));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::data("costs must be finite and nonnegative"));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Optimal flow of a transportation problem. Only basic cells are stored;
/// zero-flow basic cells are kept so `cells().len() == rows + cols - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    cells: Vec<(usize, usize, f64)>,
    objective: f64,
    stats: SolveStats,
}

impl TransportPlan {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn cells(&self) -> &[(usize, usize, f64)] {
        &self.cells
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn positive_entries(&self) -> usize {
        self.cells.iter().filter(|c| c.2 > 0.0).count()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, f) in &self.cells {
            t[i][j] += f;
        }
        t
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, f) in &self.cells {
            s[i] += f;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, f) in &self.cells {
            s[j] += f;
        }
        s
    }
}

/// Solves the transportation problem for explicit marginals and costs.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    if cost.shape() != (supply.len(), demand.len()) {
        return Err(Error::dim(format!(
            "cost matrix is {:?}, marginals are {}x{}",
            cost.shape(),
            supply.len(),
            demand.len()
        )));
    }
    let sol = simplex::solve(supply, demand, cost.as_slice())?;
    let objective = sol
        .basis
        .iter()
        .map(|&(i, j, f)| f * cost.get(i, j))
        .sum();
    Ok(TransportPlan {
        rows: supply.len(),
        cols: demand.len(),
        cells: sol.basis,
        objective,
        stats: sol.stats,
    })
}

/// Word Mover's Distance and its optimal plan.
pub fn wmd(
    a: &NbowSignature,
    b: &NbowSignature,
    table: &EmbeddingTable,
) -> Result<(f64, TransportPlan)> {
    let cost = CostMatrix::between(a, b, table);
    wmd_with_costs(a, b, &cost)
}

pub fn wmd_with_costs(
    a: &NbowSignature,
    b: &NbowSignature,
    cost: &CostMatrix,
) -> Result<(f64, TransportPlan)> {
    a.check()?;
    b.check()?;
    let supply: Vec<f64> = a.weights().collect();
    let demand: Vec<f64> = b.weights().collect();
    let plan = solve_transport(&supply, &demand, cost)?;
    Ok((plan.objective(), plan))
}

/// Distance between the weighted centroids; never exceeds the WMD.
pub fn wcd_lower_bound(a: &NbowSignature, b: &NbowSignature, table: &EmbeddingTable) -> f64 {
    euclidean(&a.centroid(table), &b.centroid(table))
}

/// Relaxed WMD: each word ships wholly to its nearest counterpart, taking
/// the larger of the two directions. Never exceeds the WMD.
///
/// WCD and RWMD are both lower bounds on the WMD but are not ordered with
/// respect to each other in general: with shared words RWMD can be zero
/// while the centroids differ.
pub fn rwmd_lower_bound(a: &NbowSignature, b: &NbowSignature, table: &EmbeddingTable) -> f64 {
    rwmd_with_costs(a, b, &CostMatrix::between(a, b, table))
}

pub fn rwmd_with_costs(a: &NbowSignature, b: &NbowSignature, cost: &CostMatrix) -> f64 {
    let (m, n) = cost.shape();
    let mut col_min = vec![f64::INFINITY; n];
    let mut forward = 0.0;
    for (i, &(_, wa)) in a.entries().iter().enumerate().take(m) {
        let mut row_min = f64::INFINITY;
        for (j, cm) in col_min.iter_mut().enumerate() {
            let c = cost.get(i, j);
            row_min = row_min.min(c);
            *cm = cm.min(c);
        }
        forward += wa * row_min;
    }
    let backward: f64 = b.weights().zip(&col_min).map(|(w, c)| w * c).sum();
    forward.max(backward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::embedding::load_glove;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(tokens: &[&str]) -> Document {
        Document {
            id: "d".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label: Some(Label::Fake),
        }
    }

    fn line_table() -> EmbeddingTable {
        load_glove("cat 0 0\nsat 1 0\nmat 3 4\ndog 0 1\n".as_bytes(), 2).unwrap()
    }

    #[test]
    fn nbow_frequencies() {
        let t = line_table();
        let s = nbow(&doc(&["cat", "sat", "cat"]), &t).unwrap();
        assert_eq!(s.entries(), &[(0, 2.0 / 3.0), (1, 1.0 / 3.0)]);
        let s = nbow(&doc(&["cat", "sat", "mat"]), &t).unwrap();
        assert!(s.weights().all(|w| w == 1.0 / 3.0));
        let s = nbow(&doc(&["cat", "zzqq", "cat"]), &t).unwrap();
        assert_eq!(s.entries(), &[(0, 1.0)]);
        assert!(nbow(&doc(&["zzqq"]), &t).is_err());
    }

    #[test]
    fn nbow_cap_keeps_heaviest_then_earliest() {
        let t = line_table();
        let d = doc(&["cat", "sat", "mat", "mat", "dog", "dog"]);
        let s = nbow_capped(&d, &t, 3).unwrap();
        // mat and dog (2 each) then cat beats sat by position.
        assert_eq!(s.entries(), &[(0, 0.2), (2, 0.4), (3, 0.4)]);
        assert!(nbow_capped(&d, &t, 0).is_err());
    }

    #[test]
    fn signature_validation() {
        assert!(NbowSignature::new(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(NbowSignature::new(vec![(0, 0.5), (1, 0.0), (2, 0.5)]).is_err());
        assert!(matches!(
            NbowSignature::new(vec![(0, 0.5), (1, 0.4)]),
            Err(Error::Infeasible(_))
        ));
        assert!(NbowSignature::new(vec![]).is_err());
    }

    #[test]
    fn word_cost_cases() {
        assert_eq!(word_cost(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(word_cost(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt());
        assert_eq!(word_cost(&[1.0, 2.0], &[4.0, 6.0]).unwrap(), 5.0);
        assert!(word_cost(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wmd_identity_gives_diagonal_plan() {
        let t = line_table();
        let a = NbowSignature::new(vec![(0, 0.25), (1, 0.25), (2, 0.5)]).unwrap();
        let (d, plan) = wmd(&a, &a, &t).unwrap();
        assert_eq!(d, 0.0);
        let dense = plan.to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                let expect = if i == j { a.entries()[i].1 } else { 0.0 };
                assert_eq!(f, expect);
            }
        }
    }

    #[test]
    fn wmd_single_words() {
        let t = line_table();
        let a = NbowSignature::new(vec![(0, 1.0)]).unwrap();
        let b = NbowSignature::new(vec![(2, 1.0)]).unwrap();
        let (d, plan) = wmd(&a, &b, &t).unwrap();
        assert_eq!(d, 5.0);
        assert_eq!(plan.to_dense(), vec![vec![1.0]]);
        assert_eq!(wcd_lower_bound(&a, &b, &t), 5.0);
        assert_eq!(rwmd_lower_bound(&a, &b, &t), 5.0);
    }

    #[test]
    fn wmd_two_by_two_matches_vertex_enumeration() {
        // With all marginals 1/2, the two vertices are the identity and the
        // anti-diagonal matchings, each carrying 1/2 per cell.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..10.0)).collect();
            let cost = CostMatrix::from_vec(2, 2, c.clone()).unwrap();
            let plan = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
            let oracle = (0.5 * (c[0] + c[3])).min(0.5 * (c[1] + c[2]));
            assert!((plan.objective() - oracle).abs() <= 1e-12 * oracle.max(1.0));
        }
    }

    #[test]
    fn wmd_rejects_unnormalized() {
        let t = line_table();
        let a = NbowSignature::new_unchecked(vec![(0, 0.5), (1, 0.3)]);
        let b = NbowSignature::new(vec![(2, 1.0)]).unwrap();
        assert!(matches!(wmd(&a, &b, &t), Err(Error::Infeasible(_))));
    }

    #[test]
    fn shared_words_can_order_bounds_either_way() {
        // Same words, different weights: RWMD is zero, centroids differ.
        let t = load_glove("x 0\ny 10\n".as_bytes(), 1).unwrap();
        let a = NbowSignature::new(vec![(0, 0.5), (1, 0.5)]).unwrap();
        let b = NbowSignature::new(vec![(0, 0.9), (1, 0.1)]).unwrap();
        let (w, _) = wmd(&a, &b, &t).unwrap();
        assert_eq!(rwmd_lower_bound(&a, &b, &t), 0.0);
        assert!((wcd_lower_bound(&a, &b, &t) - 4.0).abs() < 1e-12);
        assert!((w - 4.0).abs() < 1e-12);
    }
}
