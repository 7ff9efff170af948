//! Staged end-to-end driver: `prep → embed → graph → train → eval`.
//!
//! Each stage writes its outputs into the run directory together with a
//! `<stage>.manifest.json` sidecar recording the stage parameters, the
//! SHA-256 of every input and output file, and a key derived from both. A
//! stage is skipped when its manifest key matches and every recorded output
//! still hashes to the recorded value; anything else reruns it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_entries, make_label_mask, parse_dataset, preprocess, read_corpus, split, write_corpus,
    CorpusEntry, DatasetSchema, Label, Role, TextPipeline, DEFAULT_RATIOS,
};
use crate::embedding::{doc_vectors, load_glove_filtered, read_matrix, write_matrix, EmbeddingTable};
use crate::error::{Error, Result};
use crate::gcn::{self, ModelHeader, TrainConfig};
use crate::graph::{add_self_loops_and_normalize, knn_graph, KnnOptions, KnnRule, SimilarityGraph};
use crate::linalg::Matrix;
use crate::metrics::{confusion, prf1, roc_auc};
use crate::synthetic;
use crate::transport::{nbow_capped, NbowSignature, DEFAULT_SIGNATURE_CAP};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const DOCVEC_FILE: &str = "docvec.bin";
pub const DOCVEC_IDS_FILE: &str = "docvec.ids.json";
pub const SIGNATURES_FILE: &str = "signatures.jsonl";
pub const GRAPH_FILE: &str = "graph.txt";
pub const GRAPH_SIDECAR: &str = "graph.json";
pub const DISTANCES_FILE: &str = "distances.bin";
pub const DISTANCES_SIDECAR: &str = "distances.json";
pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ROC_FILE: &str = "roc.tsv";

/// Every knob of a run. Flat keys; the JSON config file and the CLI flags
/// share these names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Dataset schema JSON (`id_column`, `title_column`, ..., `label_map`).
    pub schema: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub dim: usize,
    pub k: usize,
    pub knn_rule: KnnRule,
    pub label_fraction: f64,
    pub split_seed: u64,
    pub mask_seed: u64,
    pub model_seed: u64,
    pub signature_cap: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub leaky_slope: f64,
    pub out: PathBuf,
    pub workers: usize,
    /// Generate the two-cluster fixture instead of reading a dataset.
    pub synthetic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            dataset: None,
            schema: None,
            glove: None,
            dim: 300,
            k: 3,
            knn_rule: KnnRule::Union,
            label_fraction: 0.5,
            split_seed: 0,
            mask_seed: 0,
            model_seed: 0,
            signature_cap: DEFAULT_SIGNATURE_CAP,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            dropout: t.dropout,
            weight_decay: t.weight_decay,
            hidden_units: t.hidden_units,
            num_layers: t.num_layers,
            leaky_slope: t.leaky_slope,
            out: PathBuf::from("out"),
            workers: 1,
            synthetic: false,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.split_seed = seed;
        self.mask_seed = seed;
        self.model_seed = seed;
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            dropout: self.dropout,
            weight_decay: self.weight_decay,
            hidden_units: self.hidden_units,
            num_layers: self.num_layers,
            leaky_slope: self.leaky_slope,
            seed: self.model_seed,
        }
    }

    fn effective_dim(&self) -> usize {
        if self.synthetic {
            synthetic::SYNTHETIC_DIM
        } else {
            self.dim
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Opens a text input, transparently gunzipping `*.gz` files.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let file = File::open(path)?;
    #[cfg(feature = "gzip")]
    if path.extension().is_some_and(|e| e == "gz") {
        return Ok(Box::new(BufReader::new(flate2::read::GzDecoder::new(file))));
    }
    Ok(Box::new(BufReader::new(file)))
}

fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Writes via a temporary file and a rename so readers never see a partial
/// output.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub key: String,
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub workers: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Prep,
    Embed,
    Graph,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Prep, Stage::Embed, Stage::Graph, Stage::Train, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prep => "prep",
            Stage::Embed => "embed",
            Stage::Graph => "graph",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Cached,
}

struct ResolvedInputs {
    dataset: PathBuf,
    schema: PathBuf,
    glove: PathBuf,
}

/// Stage runner bound to one run directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: RunConfig,
    force: bool,
}

struct StagePlan {
    stage: Stage,
    params: serde_json::Value,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<&'static str>,
}

impl Pipeline {
    pub fn new(config: RunConfig, force: bool) -> Self {
        Pipeline { config, force }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.out(&format!("{}.manifest.json", stage.name()))
    }

    fn resolve_inputs(&self) -> Result<ResolvedInputs> {
        if self.config.synthetic {
            let dir = self.out("synthetic");
            fs::create_dir_all(&dir)?;
            let fx = synthetic::default_fixture(self.config.split_seed);
            let files = [
                ("dataset.csv", fx.csv),
                ("glove.txt", fx.glove),
                ("schema.json", serde_json::to_string_pretty(&fx.schema)?),
            ];
            for (name, content) in &files {
                let path = dir.join(name);
                if fs::read_to_string(&path).ok().as_deref() != Some(content.as_str()) {
                    fs::write(&path, content)?;
                }
            }
            return Ok(ResolvedInputs {
                dataset: dir.join("dataset.csv"),
                schema: dir.join("schema.json"),
                glove: dir.join("glove.txt"),
            });
        }
        let need = |p: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
            let p = p
                .clone()
                .ok_or_else(|| Error::config(format!("`{key}` is required (or use --synthetic)")))?;
            if !p.exists() {
                return Err(Error::MissingInput(p));
            }
            Ok(p)
        };
        Ok(ResolvedInputs {
            dataset: need(&self.config.dataset, "dataset")?,
            schema: need(&self.config.schema, "schema")?,
            glove: need(&self.config.glove, "glove")?,
        })
    }

    fn stage_key(&self, plan: &StagePlan) -> Result<(String, BTreeMap<String, String>)> {
        let mut inputs = BTreeMap::new();
        for (name, path) in &plan.inputs {
            inputs.insert(name.clone(), hash_file(path)?);
        }
        let material = json!({
            "stage": plan.stage.name(),
            "params": plan.params,
            "inputs": inputs,
        });
        Ok((hash_bytes(material.to_string().as_bytes()), inputs))
    }

    fn is_cached(&self, plan: &StagePlan, key: &str) -> bool {
        if self.force {
            return false;
        }
        let Ok(text) = fs::read_to_string(self.manifest_path(plan.stage)) else {
            return false;
        };
        let Ok(manifest) = serde_json::from_str::<Manifest>(&text) else {
            return false;
        };
        manifest.key == key
            && plan.outputs.iter().all(|name| {
                manifest
                    .outputs
                    .get(*name)
                    .is_some_and(|h| hash_file(&self.out(name)).ok().as_deref() == Some(h))
            })
    }

    /// Runs `body` unless the stage's cached outputs are still valid.
    fn run_stage(
        &self,
        plan: StagePlan,
        body: impl FnOnce() -> Result<()>,
    ) -> Result<StageOutcome> {
        fs::create_dir_all(&self.config.out)?;
        let (key, inputs) = self.stage_key(&plan)?;
        if self.is_cached(&plan, &key) {
            log::info!("{}: outputs up to date, skipped", plan.stage.name());
            return Ok(StageOutcome::Cached);
        }
        let _ = fs::remove_file(self.manifest_path(plan.stage));
        let start = Instant::now();
        body()?;
        let elapsed_ms = start.elapsed().as_millis();
        let mut outputs = BTreeMap::new();
        for name in &plan.outputs {
            outputs.insert(name.to_string(), hash_file(&self.out(name))?);
        }
        let manifest = Manifest {
            stage: plan.stage.name().into(),
            key,
            params: plan.params,
            inputs,
            outputs,
            workers: self.config.workers,
            elapsed_ms,
        };
        write_atomic(&self.manifest_path(plan.stage), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        log::info!("{}: done in {elapsed_ms} ms", plan.stage.name());
        Ok(StageOutcome::Ran)
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        match stage {
            Stage::Prep => self.prep(),
            Stage::Embed => self.embed(),
            Stage::Graph => self.graph(),
            Stage::Train => self.train(),
            Stage::Eval => self.eval(),
        }
    }

    /// All stages in order.
    pub fn run_all(&self) -> Result<Vec<(Stage, StageOutcome)>> {
        Stage::ALL
            .iter()
            .map(|&s| {
                self.run(s)
                    .map(|o| (s, o))
                    .map_err(|e| stage_error(s, e))
            })
            .collect()
    }

    pub fn prep(&self) -> Result<StageOutcome> {
        let inputs = self.resolve_inputs()?;
        let c = &self.config;
        let plan = StagePlan {
            stage: Stage::Prep,
            params: json!({
                "split_seed": c.split_seed,
                "mask_seed": c.mask_seed,
                "label_fraction": c.label_fraction,
                "ratios": [DEFAULT_RATIOS.0, DEFAULT_RATIOS.1, DEFAULT_RATIOS.2],
            }),
            inputs: vec![
                ("dataset".into(), inputs.dataset.clone()),
                ("schema".into(), inputs.schema.clone()),
            ],
            outputs: vec![CORPUS_FILE],
        };
        self.run_stage(plan, || {
            let schema: DatasetSchema = serde_json::from_str(&read_to_string(&inputs.schema)?)
                .map_err(|e| Error::config(format!("{}: {e}", inputs.schema.display())))?;
            let parsed = parse_dataset(open_text(&inputs.dataset)?, &schema)?;
            let pipe = TextPipeline::default();
            let mut empty = 0usize;
            let docs: Vec<_> = parsed
                .records
                .iter()
                .filter_map(|r| {
                    let d = preprocess(r, &pipe, &schema);
                    if d.is_none() {
                        empty += 1;
                    }
                    d
                })
                .collect();
            let assignment = split(&docs, DEFAULT_RATIOS, c.split_seed)?;
            let labels: HashMap<String, Label> = docs
                .iter()
                .filter_map(|d| d.label.map(|l| (d.id.clone(), l)))
                .collect();
            let mask = make_label_mask(&assignment, &labels, c.label_fraction, c.mask_seed)?;
            let entries = build_entries(&docs, &assignment, &mask);
            write_atomic(&self.out(CORPUS_FILE), |w| write_corpus(w, &entries))?;

            let per_class = |l: Label| docs.iter().filter(|d| d.label == Some(l)).count();
            log::info!(
                "prep: kept {} documents; dropped {} rows (missing title {}, missing body {}, \
                 unmapped label {}, duplicate id {}) and {} empty after cleaning",
                docs.len(),
                parsed.dropped.total(),
                parsed.dropped.missing_title,
                parsed.dropped.missing_body,
                parsed.dropped.bad_label,
                parsed.dropped.duplicate_id,
                empty
            );
            log::info!(
                "prep: real {} fake {}; train {} val {} test {}; visible labels {}",
                per_class(Label::Real),
                per_class(Label::Fake),
                assignment.count(Role::Train),
                assignment.count(Role::Validation),
                assignment.count(Role::Test),
                mask.len()
            );
            Ok(())
        })
    }

    pub fn embed(&self) -> Result<StageOutcome> {
        let inputs = self.resolve_inputs()?;
        let c = &self.config;
        let dim = c.effective_dim();
        let plan = StagePlan {
            stage: Stage::Embed,
            params: json!({ "dim": dim, "signature_cap": c.signature_cap }),
            inputs: vec![
                ("corpus".into(), self.out(CORPUS_FILE)),
                ("glove".into(), inputs.glove.clone()),
            ],
            outputs: vec![DOCVEC_FILE, DOCVEC_IDS_FILE, SIGNATURES_FILE, NODES_FILE],
        };
        self.run_stage(plan, || {
            let corpus = read_corpus(open_text(&self.out(CORPUS_FILE))?)?;
            let vocab: HashSet<String> =
                corpus.iter().flat_map(|e| e.tokens.iter().cloned()).collect();
            let table = load_glove_filtered(open_text(&inputs.glove)?, dim, Some(&vocab))?;
            let docs: Vec<_> = corpus.iter().map(CorpusEntry::document).collect();
            let vectors = doc_vectors(&docs, &table);
            if vectors.ids.is_empty() {
                return Err(Error::data("every document is out of vocabulary"));
            }
            for id in &vectors.dropped {
                log::warn!("embed: dropped `{id}` (no in-vocabulary tokens)");
            }
            let kept: HashSet<&str> = vectors.ids.iter().map(String::as_str).collect();
            let nodes: Vec<&CorpusEntry> =
                corpus.iter().filter(|e| kept.contains(e.id.as_str())).collect();

            write_atomic(&self.out(DOCVEC_FILE), |w| write_matrix(w, &vectors.features))?;
            write_atomic(&self.out(DOCVEC_IDS_FILE), |w| {
                serde_json::to_writer(&mut *w, &vectors.ids)?;
                Ok(())
            })?;
            write_atomic(&self.out(NODES_FILE), |w| {
                for e in &nodes {
                    serde_json::to_writer(&mut *w, e)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
            write_atomic(&self.out(SIGNATURES_FILE), |w| {
                for e in &nodes {
                    let sig = nbow_capped(&e.document(), &table, c.signature_cap)?;
                    let words: Vec<(&str, f64)> = sig
                        .entries()
                        .iter()
                        .map(|&(idx, wt)| (table.word(idx), wt))
                        .collect();
                    serde_json::to_writer(&mut *w, &SignatureLine { id: &e.id, words })?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
            log::info!(
                "embed: {} x {} document vectors, {} dropped as out-of-vocabulary",
                vectors.features.rows(),
                vectors.features.cols(),
                vectors.dropped.len()
            );
            Ok(())
        })
    }

    pub fn graph(&self) -> Result<StageOutcome> {
        let inputs = self.resolve_inputs()?;
        let c = &self.config;
        let dim = c.effective_dim();
        let plan = StagePlan {
            stage: Stage::Graph,
            params: json!({ "k": c.k, "knn_rule": c.knn_rule, "dim": dim }),
            inputs: vec![
                ("signatures".into(), self.out(SIGNATURES_FILE)),
                ("glove".into(), inputs.glove.clone()),
            ],
            outputs: vec![GRAPH_FILE, GRAPH_SIDECAR, DISTANCES_FILE, DISTANCES_SIDECAR],
        };
        self.run_stage(plan, || {
            let (signatures, table) = read_signatures(&self.out(SIGNATURES_FILE), &inputs.glove, dim)?;
            let options = KnnOptions {
                k: c.k,
                rule: c.knn_rule,
                workers: c.workers,
            };
            let build = knn_graph(&signatures, &table, options)?;
            let corpus_hash = hash_file(&self.out(SIGNATURES_FILE))?;
            write_atomic(&self.out(GRAPH_FILE), |w| build.graph.write(w))?;
            write_atomic(&self.out(DISTANCES_FILE), |w| build.distances.write(w))?;

            let degrees = build.graph.degrees();
            let (dmin, dmax) = (
                degrees.iter().copied().min().unwrap_or(0),
                degrees.iter().copied().max().unwrap_or(0),
            );
            let dmean = degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64;
            let sidecar = json!({
                "n": build.graph.n(),
                "k": c.k,
                "knn_rule": c.knn_rule,
                "signature_cap": c.signature_cap,
                "corpus_hash": corpus_hash,
                "edges": build.graph.edges().len(),
                "degree": { "min": dmin, "max": dmax, "mean": dmean },
                "search": build.stats,
            });
            write_atomic(&self.out(GRAPH_SIDECAR), |w| {
                serde_json::to_writer_pretty(&mut *w, &sidecar)?;
                Ok(())
            })?;
            write_atomic(&self.out(DISTANCES_SIDECAR), |w| {
                let meta = json!({
                    "n": build.graph.n(),
                    "k": c.k,
                    "signature_cap": c.signature_cap,
                    "corpus_hash": corpus_hash,
                    "computed_pairs": build.distances.computed(),
                });
                serde_json::to_writer_pretty(&mut *w, &meta)?;
                Ok(())
            })?;
            log::info!(
                "graph: {} nodes, {} edges, degree min {dmin} mean {dmean:.2} max {dmax}; \
                 exact WMD on {} of {} candidate pairs",
                build.graph.n(),
                build.graph.edges().len(),
                build.stats.exact,
                build.stats.candidate_pairs
            );
            Ok(())
        })
    }

    fn load_graph_inputs(&self) -> Result<(Vec<CorpusEntry>, Matrix, SimilarityGraph)> {
        let nodes = read_corpus(open_text(&self.out(NODES_FILE))?)?;
        let x = read_matrix(BufReader::new(File::open(self.out(DOCVEC_FILE))?))?;
        let graph = SimilarityGraph::read(open_text(&self.out(GRAPH_FILE))?)?;
        if nodes.len() != x.rows() || nodes.len() != graph.n() {
            return Err(Error::data(format!(
                "run directory is inconsistent: {} nodes, {} feature rows, graph over {}",
                nodes.len(),
                x.rows(),
                graph.n()
            )));
        }
        Ok((nodes, x, graph))
    }

    pub fn train(&self) -> Result<StageOutcome> {
        let c = &self.config;
        let tc = c.train_config();
        tc.validate()?;
        let plan = StagePlan {
            stage: Stage::Train,
            params: serde_json::to_value(&tc)?,
            inputs: vec![
                ("nodes".into(), self.out(NODES_FILE)),
                ("docvec".into(), self.out(DOCVEC_FILE)),
                ("graph".into(), self.out(GRAPH_FILE)),
            ],
            outputs: vec![MODEL_FILE, HISTORY_FILE],
        };
        self.run_stage(plan, || {
            let (nodes, x, graph) = self.load_graph_inputs()?;
            let targets: Vec<(usize, usize)> = nodes
                .iter()
                .enumerate()
                .filter(|(_, e)| e.masked_visible)
                .filter_map(|(i, e)| e.label.map(|l| (i, l.index())))
                .collect();
            if targets.is_empty() {
                return Err(Error::data(
                    "no visible training labels (label_fraction is 0 or the mask is empty)",
                ));
            }
            let validation = role_targets(&nodes, Role::Validation);
            let adj = add_self_loops_and_normalize(&graph);
            let (model, history) = gcn::train(&adj, &x, &targets, &validation, &tc)?;
            let header = ModelHeader {
                dims: model.dims(),
                config: tc.clone(),
                seed: tc.seed,
                best_epoch: history.best_epoch,
            };
            write_atomic(&self.out(MODEL_FILE), |w| gcn::write_model(w, &model, &header))?;
            write_atomic(&self.out(HISTORY_FILE), |w| history.write_csv(w))?;
            let last = history.records.last().expect("epochs >= 1");
            log::info!(
                "train: {} labelled, {} validation nodes; best epoch {}, final train loss {:.4}",
                targets.len(),
                validation.len(),
                history.best_epoch,
                last.train_loss
            );
            Ok(())
        })
    }

    pub fn eval(&self) -> Result<StageOutcome> {
        let c = &self.config;
        let plan = StagePlan {
            stage: Stage::Eval,
            params: json!({
                "k": c.k,
                "label_fraction": c.label_fraction,
                "split_seed": c.split_seed,
                "mask_seed": c.mask_seed,
                "model_seed": c.model_seed,
            }),
            inputs: vec![
                ("model".into(), self.out(MODEL_FILE)),
                ("nodes".into(), self.out(NODES_FILE)),
                ("docvec".into(), self.out(DOCVEC_FILE)),
                ("graph".into(), self.out(GRAPH_FILE)),
            ],
            outputs: vec![METRICS_FILE, ROC_FILE],
        };
        self.run_stage(plan, || {
            let (nodes, x, graph) = self.load_graph_inputs()?;
            let (model, header) =
                gcn::read_model(BufReader::new(File::open(self.out(MODEL_FILE))?))?;
            let adj = add_self_loops_and_normalize(&graph);
            let test: Vec<usize> = nodes
                .iter()
                .enumerate()
                .filter(|(_, e)| e.role == Role::Test && e.label.is_some())
                .map(|(i, _)| i)
                .collect();
            let preds = gcn::predict(&model, &adj, &x, &test, header.config.leaky_slope)?;
            let ids: Vec<String> = test.iter().map(|&i| nodes[i].id.clone()).collect();
            let truth: HashMap<String, Label> = test
                .iter()
                .map(|&i| (nodes[i].id.clone(), nodes[i].label.expect("filtered")))
                .collect();
            let labels: HashMap<String, Label> =
                ids.iter().cloned().zip(preds.iter().map(|p| p.label)).collect();
            let scores: HashMap<String, f64> =
                ids.iter().cloned().zip(preds.iter().map(|p| p.score)).collect();

            let counts = confusion(&labels, &truth, &ids)?;
            let s = prf1(&counts);
            let roc = roc_auc(&scores, &truth, &ids)?;
            let metrics = json!({
                "accuracy": s.accuracy,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "auc": roc.auc,
                "positive_class": "fake",
                "split": "test",
                "k": c.k,
                "label_fraction": c.label_fraction,
                "seed": c.model_seed,
                "split_seed": c.split_seed,
                "mask_seed": c.mask_seed,
                "model_seed": c.model_seed,
                "zero_division": s.zero_division,
                "confusion": counts,
                "n_test": ids.len(),
            });
            write_atomic(&self.out(METRICS_FILE), |w| {
                serde_json::to_writer_pretty(&mut *w, &metrics)?;
                w.write_all(b"\n")?;
                Ok(())
            })?;
            write_atomic(&self.out(ROC_FILE), |w| roc.write_tsv(w))?;
            log::info!(
                "eval: {} test nodes, accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} auc {:.4}",
                ids.len(),
                s.accuracy,
                s.precision,
                s.recall,
                s.f1,
                roc.auc
            );
            Ok(())
        })
    }
}

fn stage_error(stage: Stage, e: Error) -> Error {
    log::error!("{} stage failed: {e}", stage.name());
    e
}

fn role_targets(nodes: &[CorpusEntry], role: Role) -> Vec<(usize, usize)> {
    nodes
        .iter()
        .enumerate()
        .filter(|(_, e)| e.role == role)
        .filter_map(|(i, e)| e.label.map(|l| (i, l.index())))
        .collect()
}

#[derive(Serialize)]
struct SignatureLine<'a> {
    id: &'a str,
    words: Vec<(&'a str, f64)>,
}

#[derive(Deserialize)]
struct SignatureRecord {
    #[allow(dead_code)]
    id: String,
    words: Vec<(String, f64)>,
}

/// Loads the signature file and the word vectors it references.
pub fn read_signatures(
    path: &Path,
    glove: &Path,
    dim: usize,
) -> Result<(Vec<NbowSignature>, EmbeddingTable)> {
    let mut records = Vec::new();
    for (i, line) in open_text(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SignatureRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        records.push(rec);
    }
    let vocab: HashSet<String> = records
        .iter()
        .flat_map(|r| r.words.iter().map(|w| w.0.clone()))
        .collect();
    let table = load_glove_filtered(open_text(glove)?, dim, Some(&vocab))?;
    let signatures = records
        .into_iter()
        .map(|r| {
            let entries = r
                .words
                .into_iter()
                .map(|(w, wt)| {
                    table
                        .index_of(&w)
                        .map(|idx| (idx, wt))
                        .ok_or_else(|| Error::data(format!("word `{w}` missing from vectors")))
                })
                .collect::<Result<Vec<_>>>()?;
            NbowSignature::new(entries)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((signatures, table))
}
