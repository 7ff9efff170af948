//! Multi-layer graph convolutional network with hand-written reverse mode.
//!
//! Layer `l` computes `Ã · Dropout(H_l) · W_l`, followed by leaky ReLU on
//! every layer but the last; the last layer's output goes through a row-wise
//! softmax. There are no bias terms.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::linalg::Matrix;

pub const NUM_CLASSES: usize = 2;
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 120,
            learning_rate: 0.01,
            dropout: 0.5,
            weight_decay: 5e-4,
            hidden_units: 16,
            num_layers: 4,
            leaky_slope: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.num_layers == 0 || self.hidden_units == 0 {
            return Err(Error::config("need at least one layer and one hidden unit"));
        }
        Ok(())
    }

    /// `[input, hidden, ..., hidden, classes]` with `num_layers` weight matrices.
    pub fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_units, self.num_layers - 1));
        dims.push(NUM_CLASSES);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    layers: Vec<Matrix>,
}

impl GcnModel {
    pub fn from_layers(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("model needs at least one layer"));
        }
        for (l, w) in layers.windows(2).enumerate() {
            if w[0].cols() != w[1].rows() {
                return Err(Error::dim(format!(
                    "layer {l} outputs {} features but layer {} expects {}",
                    w[0].cols(),
                    l + 1,
                    w[1].rows()
                )));
            }
        }
        if layers.iter().any(|w| !w.is_finite()) {
            return Err(Error::data("model weights must be finite"));
        }
        Ok(GcnModel { layers })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].rows()];
        d.extend(self.layers.iter().map(Matrix::cols));
        d
    }
}

/// Glorot-uniform weights, drawn layer by layer in row-major order.
pub fn init_model(dims: &[usize], seed: u64) -> Result<GcnModel> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::config(format!(
            "layer dimensions must be at least two positive sizes, got {dims:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let data = (0..w[0] * w[1])
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Matrix::from_vec(w[0], w[1], data)
        })
        .collect::<Result<_>>()?;
    GcnModel::from_layers(layers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Matrix,
    pub probs: Matrix,
    /// `Dropout(H_l)` per layer (the matrix actually multiplied by `W_l`).
    inputs: Vec<Matrix>,
    /// Inverted-dropout multipliers per layer (`0` or `1/(1-p)`), absent
    /// when dropout was inactive.
    masks: Vec<Option<Vec<f64>>>,
    /// `Ã · Dropout(H_l) · W_l` before the activation.
    pre_activations: Vec<Matrix>,
    leaky_slope: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    pub mode: Mode,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub dropout_seed: u64,
    pub dropout_stream: u64,
}

impl ForwardOptions {
    pub fn eval(leaky_slope: f64) -> Self {
        ForwardOptions {
            mode: Mode::Eval,
            dropout: 0.0,
            leaky_slope,
            dropout_seed: 0,
            dropout_stream: 0,
        }
    }
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn softmax_rows(z: &Matrix) -> Matrix {
    let mut p = z.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    p
}

pub fn forward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Matrix,
    opts: ForwardOptions,
) -> Result<ForwardPass> {
    if x.rows() != adj.n() {
        return Err(Error::dim(format!(
            "feature matrix has {} rows, graph has {} nodes",
            x.rows(),
            adj.n()
        )));
    }
    if x.cols() != model.layers[0].rows() {
        return Err(Error::dim(format!(
            "feature matrix has {} columns, model expects {}",
            x.cols(),
            model.layers[0].rows()
        )));
    }
    let use_dropout = opts.mode == Mode::Train && opts.dropout > 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.dropout_seed);
    rng.set_stream(opts.dropout_stream);
    let keep = 1.0 - opts.dropout;
    let scale = 1.0 / keep;

    let last = model.layers.len() - 1;
    let mut inputs = Vec::with_capacity(model.layers.len());
    let mut masks = Vec::with_capacity(model.layers.len());
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    let mut h = x.clone();
    for (l, w) in model.layers.iter().enumerate() {
        if use_dropout {
            let mask: Vec<f64> = (0..h.as_slice().len())
                .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                .collect();
            h.as_mut_slice()
                .iter_mut()
                .zip(&mask)
                .for_each(|(v, m)| *v *= m);
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
        let q = adj.apply(&h.matmul(w)?)?;
        if !q.is_finite() {
            return Err(Error::NonFinite { layer: l });
        }
        inputs.push(h);
        h = if l == last {
            q.clone()
        } else {
            q.map(|v| leaky(v, opts.leaky_slope))
        };
        pre_activations.push(q);
    }
    let logits = h;
    let probs = softmax_rows(&logits);
    Ok(ForwardPass {
        logits,
        probs,
        inputs,
        masks,
        pre_activations,
        leaky_slope: opts.leaky_slope,
    })
}

/// `(node index, class index)` pairs whose labels the loss may see.
pub type Targets = [(usize, usize)];

/// Mean negative log-likelihood over the targets, probabilities floored at
/// `1e-12`.
pub fn masked_cross_entropy(probs: &Matrix, targets: &Targets) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::data("label mask is empty"));
    }
    let mut total = 0.0;
    for &(node, class) in targets {
        let p = probs[(node, class)].clamp(PROB_FLOOR, 1.0);
        total -= p.ln();
    }
    Ok(total / targets.len() as f64)
}

/// Fraction of targets whose argmax class (ties to class 0) is correct.
pub fn accuracy(probs: &Matrix, targets: &Targets) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let hits = targets
        .iter()
        .filter(|&&(node, class)| argmax(probs.row(node)) == class)
        .count();
    hits as f64 / targets.len() as f64
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Gradients of the masked cross-entropy with respect to every weight
/// matrix, through the dropout masks drawn in `pass`. The probability floor
/// is treated as inactive.
pub fn gradients(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    pass: &ForwardPass,
    targets: &Targets,
) -> Result<Vec<Matrix>> {
    if pass.inputs.len() != model.layers.len() {
        return Err(Error::config("forward caches do not match the model"));
    }
    if targets.is_empty() {
        return Err(Error::data("label mask is empty"));
    }
    let n = pass.probs.rows();
    let inv = 1.0 / targets.len() as f64;
    let mut upstream = Matrix::zeros(n, pass.probs.cols());
    for &(node, class) in targets {
        for c in 0..pass.probs.cols() {
            let onehot = if c == class { 1.0 } else { 0.0 };
            upstream[(node, c)] += (pass.probs[(node, c)] - onehot) * inv;
        }
    }

    let last = model.layers.len() - 1;
    let mut grads = vec![Matrix::zeros(0, 0); model.layers.len()];
    // `upstream` holds dLoss/dOutput of layer l on entry to each iteration.
    for l in (0..=last).rev() {
        let mut d_pre = upstream;
        if l != last {
            let q = &pass.pre_activations[l];
            for (g, &z) in d_pre.as_mut_slice().iter_mut().zip(q.as_slice()) {
                if z <= 0.0 {
                    *g *= pass.leaky_slope;
                }
            }
        }
        // Ã is symmetric, so Ãᵀ · d_pre = Ã · d_pre.
        let d_hw = adj.apply(&d_pre)?;
        grads[l] = pass.inputs[l].t_matmul(&d_hw)?;
        if l == 0 {
            break;
        }
        let mut d_in = d_hw.matmul_t(&model.layers[l])?;
        if let Some(mask) = &pass.masks[l] {
            d_in.as_mut_slice()
                .iter_mut()
                .zip(mask)
                .for_each(|(g, m)| *g *= m);
        }
        upstream = d_in;
    }
    Ok(grads)
}

/// Adam state. Weight decay enters as `weight_decay · W` added to each
/// gradient before the moment updates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &GcnModel) -> Self {
        let zeros: Vec<Vec<f64>> = model
            .layers
            .iter()
            .map(|w| vec![0.0; w.as_slice().len()])
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(
        &mut self,
        model: &mut GcnModel,
        grads: &[Matrix],
        learning_rate: f64,
        weight_decay: f64,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (l, w) in model.layers.iter_mut().enumerate() {
            let g = grads[l].as_slice();
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            for (k, wk) in w.as_mut_slice().iter_mut().enumerate() {
                let gk = g[k] + weight_decay * *wk;
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *wk -= learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// One optimization step from a Train-mode forward pass.
pub fn backward_and_step(
    model: &mut GcnModel,
    adj: &NormalizedAdjacency,
    pass: &ForwardPass,
    targets: &Targets,
    config: &TrainConfig,
    adam: &mut Adam,
) -> Result<()> {
    let grads = gradients(model, adj, pass, targets)?;
    adam.step(model, &grads, config.learning_rate, config.weight_decay);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full-batch training for `config.epochs` epochs. Returns the weights with
/// the highest validation accuracy (earliest on ties); with no validation
/// nodes the final weights are returned.
pub fn train(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    targets: &Targets,
    validation: &Targets,
    config: &TrainConfig,
) -> Result<(GcnModel, TrainHistory)> {
    config.validate()?;
    if targets.is_empty() {
        return Err(Error::data("label mask is empty"));
    }
    let mut model = init_model(&config.dims(x.cols()), config.seed)?;
    let mut adam = Adam::new(&model);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, GcnModel)> = None;

    for epoch in 1..=config.epochs {
        let opts = ForwardOptions {
            mode: Mode::Train,
            dropout: config.dropout,
            leaky_slope: config.leaky_slope,
            dropout_seed: config.seed,
            dropout_stream: epoch as u64,
        };
        let pass = forward(&model, adj, x, opts)?;
        let train_loss = masked_cross_entropy(&pass.probs, targets)?;
        let train_acc = accuracy(&pass.probs, targets);
        backward_and_step(&mut model, adj, &pass, targets, config, &mut adam)?;

        let eval = forward(&model, adj, x, ForwardOptions::eval(config.leaky_slope))?;
        let (val_loss, val_acc) = if validation.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                masked_cross_entropy(&eval.probs, validation)?,
                accuracy(&eval.probs, validation),
            )
        };
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
        let improved = match &best {
            _ if validation.is_empty() => true,
            None => true,
            Some((acc, _)) => val_acc > *acc,
        };
        if improved {
            best = Some((val_acc, model.clone()));
            history.best_epoch = epoch;
        }
    }
    let (_, model) = best.expect("at least one epoch");
    Ok((model, history))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability of [`Label::Fake`].
    pub score: f64,
}

/// Eval-mode predictions for the given node indices.
pub fn predict(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Matrix,
    nodes: &[usize],
    leaky_slope: f64,
) -> Result<Vec<Prediction>> {
    let pass = forward(model, adj, x, ForwardOptions::eval(leaky_slope))?;
    nodes
        .iter()
        .map(|&node| {
            if node >= pass.probs.rows() {
                return Err(Error::data(format!("unknown node {node}")));
            }
            Ok(prediction_from_probs(pass.probs.row(node)))
        })
        .collect()
}

pub fn prediction_from_probs(row: &[f64]) -> Prediction {
    Prediction {
        label: Label::from_index(argmax(row)).expect("binary output"),
        score: row[Label::Fake.index()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dims: Vec<usize>,
    pub config: TrainConfig,
    pub seed: u64,
    pub best_epoch: usize,
}

/// One JSON header line, then every weight as little-endian `f64`, layer
/// order, row-major.
pub fn write_model<W: Write>(mut w: W, model: &GcnModel, header: &ModelHeader) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for layer in &model.layers {
        for v in layer.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: BufRead>(mut r: R) -> Result<(GcnModel, ModelHeader)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: ModelHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::parse(1, e.to_string()))?;
    let mut layers = Vec::new();
    let mut word = [0u8; 8];
    for w in header.dims.windows(2) {
        let mut data = Vec::with_capacity(w[0] * w[1]);
        for _ in 0..w[0] * w[1] {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        layers.push(Matrix::from_vec(w[0], w[1], data)?);
    }
    if r.read(&mut word)? != 0 {
        return Err(Error::parse(0, "trailing bytes after model weights"));
    }
    Ok((GcnModel::from_layers(layers)?, header))
}
