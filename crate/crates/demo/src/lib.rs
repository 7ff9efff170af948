//! Three browser-facing operations over 2-D toy data. Each takes and
//! returns JSON so the page needs no bindings beyond strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use wmdgcn::embedding::EmbeddingTable;
use wmdgcn::gcn::{self, TrainConfig};
use wmdgcn::graph::{add_self_loops_and_normalize, knn_graph, KnnOptions, KnnRule};
use wmdgcn::linalg::Matrix;
use wmdgcn::transport::{rwmd_lower_bound, wcd_lower_bound, wmd, NbowSignature};
use wmdgcn::{synthetic, Error};

type DemoResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A weighted 2-D point; weights are normalized per side.
#[derive(Deserialize)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

#[derive(Deserialize)]
pub struct TransportInput {
    pub a: Vec<WeightedPoint>,
    pub b: Vec<WeightedPoint>,
}

#[derive(Serialize)]
pub struct TransportOutput {
    pub distance: f64,
    pub wcd: f64,
    pub rwmd: f64,
    /// `(i, j, mass)` for every cell carrying mass.
    pub flows: Vec<(usize, usize, f64)>,
}

fn signature(offset: usize, pts: &[WeightedPoint]) -> DemoResult<NbowSignature> {
    let total: f64 = pts.iter().map(|p| p.w).sum();
    if pts.is_empty() || total.is_nan() || total <= 0.0 {
        return Err("each side needs at least one point with positive weight".into());
    }
    NbowSignature::new(
        pts.iter()
            .enumerate()
            .map(|(i, p)| (offset + i, p.w / total))
            .collect(),
    )
    .map_err(err)
}

pub fn transport(input: &str) -> DemoResult<String> {
    let input: TransportInput = serde_json::from_str(input).map_err(err)?;
    let mut table = EmbeddingTable::new(2);
    for (i, p) in input.a.iter().chain(&input.b).enumerate() {
        table.insert(&format!("p{i}"), &[p.x, p.y]).map_err(err)?;
    }
    let a = signature(0, &input.a)?;
    let b = signature(input.a.len(), &input.b)?;
    let (distance, plan) = wmd(&a, &b, &table).map_err(err)?;
    let out = TransportOutput {
        distance,
        wcd: wcd_lower_bound(&a, &b, &table),
        rwmd: rwmd_lower_bound(&a, &b, &table),
        flows: plan.cells().iter().copied().filter(|c| c.2 > 0.0).collect(),
    };
    serde_json::to_string(&out).map_err(err)
}

#[derive(Deserialize)]
pub struct GraphInput {
    pub points: Vec<(f64, f64)>,
    pub k: usize,
    #[serde(default)]
    pub mutual: bool,
}

#[derive(Serialize)]
pub struct GraphOutput {
    pub edges: Vec<(usize, usize)>,
    /// Dense rows of `D̂^{-1/2}(A + I)D̂^{-1/2}`.
    pub normalized: Vec<Vec<f64>>,
}

/// Single-word documents, one per point, so WMD reduces to Euclidean
/// distance between the points.
fn point_corpus(points: &[Vec<f64>]) -> Result<(Vec<NbowSignature>, EmbeddingTable), Error> {
    let dim = points.first().map_or(2, Vec::len);
    let mut table = EmbeddingTable::new(dim);
    let mut sigs = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        table.insert(&format!("p{i}"), p)?;
        sigs.push(NbowSignature::new(vec![(i, 1.0)])?);
    }
    Ok((sigs, table))
}

pub fn graph(input: &str) -> DemoResult<String> {
    let input: GraphInput = serde_json::from_str(input).map_err(err)?;
    let points: Vec<Vec<f64>> = input.points.iter().map(|&(x, y)| vec![x, y]).collect();
    let (sigs, table) = point_corpus(&points).map_err(err)?;
    let opts = KnnOptions {
        rule: if input.mutual { KnnRule::Mutual } else { KnnRule::Union },
        ..KnnOptions::new(input.k)
    };
    let build = knn_graph(&sigs, &table, opts).map_err(err)?;
    let adj = add_self_loops_and_normalize(&build.graph);
    let dense = adj.to_dense();
    let out = GraphOutput {
        edges: build.graph.edges().iter().copied().collect(),
        normalized: (0..dense.rows()).map(|i| dense.row(i).to_vec()).collect(),
    };
    serde_json::to_string(&out).map_err(err)
}

#[derive(Deserialize)]
#[serde(default)]
pub struct TrainInput {
    pub n: usize,
    pub separation: f64,
    pub k: usize,
    pub label_fraction: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainInput {
    fn default() -> Self {
        TrainInput {
            n: 120,
            separation: 4.0,
            k: 3,
            label_fraction: 0.1,
            epochs: 120,
            seed: 0,
        }
    }
}

#[derive(Serialize)]
pub struct TrainOutput {
    pub points: Vec<(f64, f64)>,
    /// 0 = real, 1 = fake.
    pub labels: Vec<usize>,
    pub labelled: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// Probability of the fake class per node after training.
    pub scores: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub accuracy_unlabelled: f64,
}

/// Trains on two 2-D Gaussian clusters, revealing labels for an evenly
/// spaced subset of nodes drawn from both classes.
pub fn train(input: &str) -> DemoResult<String> {
    let input: TrainInput = serde_json::from_str(input).map_err(err)?;
    if input.n < 4 || input.n > 1000 {
        return Err("n must be between 4 and 1000".into());
    }
    let fx = synthetic::generate(input.n, 2, input.separation, input.seed);
    let (sigs, table) = point_corpus(&fx.points).map_err(err)?;
    let build = knn_graph(&sigs, &table, KnnOptions::new(input.k)).map_err(err)?;
    let adj = add_self_loops_and_normalize(&build.graph);
    let x = Matrix::from_rows(&fx.points).map_err(err)?;

    let labels: Vec<usize> = fx.labels.iter().map(|l| l.index()).collect();
    let count = ((input.label_fraction * input.n as f64).round() as usize).clamp(2, input.n);
    // Labels alternate by index, so alternating parity reveals both classes.
    let labelled: Vec<usize> = (0..count)
        .map(|j| ((j * input.n / count) & !1 | (j % 2)).min(input.n - 1))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let targets: Vec<(usize, usize)> = labelled.iter().map(|&i| (i, labels[i])).collect();
    let config = TrainConfig {
        epochs: input.epochs,
        seed: input.seed,
        ..TrainConfig::default()
    };
    let (model, history) = gcn::train(&adj, &x, &targets, &[], &config).map_err(err)?;
    let all: Vec<usize> = (0..input.n).collect();
    let preds = gcn::predict(&model, &adj, &x, &all, config.leaky_slope).map_err(err)?;

    let unlabelled: Vec<usize> = all.iter().copied().filter(|i| !labelled.contains(i)).collect();
    let hits = unlabelled
        .iter()
        .filter(|&&i| preds[i].label.index() == labels[i])
        .count();
    let out = TrainOutput {
        points: fx.points.iter().map(|p| (p[0], p[1])).collect(),
        labels,
        labelled,
        edges: build.graph.edges().iter().copied().collect(),
        scores: preds.iter().map(|p| p.score).collect(),
        train_loss: history.records.iter().map(|r| r.train_loss).collect(),
        train_acc: history.records.iter().map(|r| r.train_acc).collect(),
        accuracy_unlabelled: hits as f64 / unlabelled.len().max(1) as f64,
    };
    serde_json::to_string(&out).map_err(err)
}

#[wasm_bindgen(js_name = transport)]
pub fn transport_js(input: &str) -> Result<String, JsError> {
    transport(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = graph)]
pub fn graph_js(input: &str) -> Result<String, JsError> {
    graph(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = train)]
pub fn train_js(input: &str) -> Result<String, JsError> {
    train(input).map_err(|e| JsError::new(&e))
}
