//! Reference implementations used as test oracles. None of this calls into
//! the solver, graph search or layer code it checks.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use wmdgcn::embedding::EmbeddingTable;
use wmdgcn::transport::NbowSignature;

const LP_EPS: f64 = 1e-11;

/// Dense-tableau simplex for `min c·x  s.t.  A x = b, x ≥ 0` with `b ≥ 0`.
/// Two phases with artificial variables, Bland's rule throughout. Returns
/// the optimal objective and primal solution, or `None` when infeasible.
pub fn lp_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = a.len();
    let nv = c.len();
    let width = nv + m + 1;
    let rhs = width - 1;
    // Rows 0..m constraints, row m the objective being minimized.
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..nv].copy_from_slice(&a[i]);
        t[i][nv + i] = 1.0;
        t[i][rhs] = b[i];
    }
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    // Phase 1: minimize the sum of artificials, priced out of the basis.
    for j in 0..width {
        t[m][j] = if (nv..nv + m).contains(&j) { 0.0 } else { -(0..m).map(|i| t[i][j]).sum::<f64>() };
    }
    run_simplex(&mut t, &mut basis, 0..nv + m);
    if -t[m][rhs] > 1e-9 {
        return None;
    }
    // Drive zero-level artificials out; drop rows that are redundant.
    let mut i = 0;
    while i < basis.len() {
        if basis[i] >= nv {
            match (0..nv).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => pivot(&mut t, &mut basis, i, j),
                None => {
                    t.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let m = basis.len();

    // Phase 2 objective row: reduced costs c_j − c_B·B⁻¹A_j.
    let mut obj = vec![0.0; width];
    obj[..nv].copy_from_slice(c);
    for (r, &bj) in basis.iter().enumerate() {
        let cb = c[bj];
        for j in 0..width {
            obj[j] -= cb * t[r][j];
        }
    }
    t[m] = obj;
    run_simplex(&mut t, &mut basis, 0..nv);

    let mut x = vec![0.0; nv];
    for (r, &bj) in basis.iter().enumerate() {
        x[bj] = t[r][rhs];
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Some((value, x))
}

fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], allowed: std::ops::Range<usize>) {
    let m = basis.len();
    let rhs = t[0].len() - 1;
    loop {
        let Some(enter) = allowed.clone().find(|&j| t[m][j] < -LP_EPS) else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][enter] > LP_EPS {
                let ratio = t[i][rhs] / t[i][enter];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - LP_EPS || (ratio <= best + LP_EPS && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let (row, _) = leave.expect("transportation LPs are bounded");
        pivot(t, basis, row, enter);
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                r.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    basis[row] = col;
}

/// Minimum-cost transport from `supply` to `demand` with Euclidean ground
/// cost between the given points, written out as the equality LP.
pub fn transport_lp(supply: &[f64], xs: &[&[f64]], demand: &[f64], ys: &[&[f64]]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let mut a = vec![vec![0.0; m * n]; m + n];
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            a[i][i * n + j] = 1.0;
            a[m + j][i * n + j] = 1.0;
            c[i * n + j] = xs[i]
                .iter()
                .zip(ys[j])
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
        }
    }
    let b: Vec<f64> = supply.iter().chain(demand).copied().collect();
    lp_min(&a, &b, &c).expect("balanced transport is feasible").0
}

/// WMD between two signatures via the dense LP.
pub fn wmd_oracle(a: &NbowSignature, b: &NbowSignature, table: &EmbeddingTable) -> f64 {
    let sa: Vec<f64> = a.entries().iter().map(|e| e.1).collect();
    let sb: Vec<f64> = b.entries().iter().map(|e| e.1).collect();
    let xa: Vec<&[f64]> = a.entries().iter().map(|e| table.vector(e.0)).collect();
    let xb: Vec<&[f64]> = b.entries().iter().map(|e| table.vector(e.0)).collect();
    transport_lp(&sa, &xa, &sb, &xb)
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_table(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(dim);
    for w in 0..vocab {
        table.insert(&format!("w{w}"), &gaussian(rng, dim)).unwrap();
    }
    table
}

/// 1..=max_words distinct words with random integer counts, normalized.
pub fn random_signature(rng: &mut ChaCha8Rng, vocab: usize, max_words: usize) -> NbowSignature {
    let len = rng.gen_range(1..=max_words.min(vocab));
    let mut words: Vec<usize> = (0..vocab).collect();
    words.shuffle(rng);
    let counts: Vec<u32> = (0..len).map(|_| rng.gen_range(1..=6)).collect();
    let total: u32 = counts.iter().sum();
    NbowSignature::new(
        words[..len]
            .iter()
            .zip(&counts)
            .map(|(&w, &c)| (w, c as f64 / total as f64))
            .collect(),
    )
    .unwrap()
}

/// All-pairs k-NN graph under a supplied distance. Each node keeps its k
/// smallest `(distance, index)` pairs; `mutual` keeps an edge only when both
/// endpoints chose it.
pub fn brute_force_knn(
    n: usize,
    k: usize,
    mutual: bool,
    dist: impl Fn(usize, usize) -> f64,
) -> BTreeSet<(usize, usize)> {
    let mut d = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in p + 1..n {
            d[p][q] = dist(p, q);
            d[q][p] = d[p][q];
        }
    }
    let chosen: Vec<BTreeSet<usize>> = (0..n)
        .map(|p| {
            let mut cand: Vec<(f64, usize)> = (0..n).filter(|&q| q != p).map(|q| (d[p][q], q)).collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|c| c.1).collect()
        })
        .collect();
    let mut edges = BTreeSet::new();
    for p in 0..n {
        for &q in &chosen[p] {
            let both = chosen[q].contains(&p);
            if !mutual || both {
                edges.insert((p.min(q), p.max(q)));
            }
        }
    }
    edges
}

/// Random simple undirected graph on `n` nodes with edge probability `p`.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Dense `D̂^{-1/2}(A + I)D̂^{-1/2}` from an edge list.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for &(u, v) in edges {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

/// Plain multilayer perceptron: `X W₀ → leaky → ... → W_L → softmax`.
pub fn mlp_probs(x: &[Vec<f64>], weights: &[Vec<Vec<f64>>], slope: f64) -> Vec<Vec<f64>> {
    let mut h: Vec<Vec<f64>> = x.to_vec();
    for (l, w) in weights.iter().enumerate() {
        let out = w[0].len();
        h = h
            .iter()
            .map(|row| {
                (0..out)
                    .map(|c| {
                        let z: f64 = row.iter().zip(w).map(|(v, wr)| v * wr[c]).sum();
                        if l + 1 < weights.len() && z <= 0.0 {
                            slope * z
                        } else {
                            z
                        }
                    })
                    .collect()
            })
            .collect();
    }
    h.iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// AUC as the Mann–Whitney statistic: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half.
pub fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for &p in pos {
        for &q in neg {
            s += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}
