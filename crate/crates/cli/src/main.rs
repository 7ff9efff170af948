use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wmdgcn::graph::KnnRule;
use wmdgcn::pipeline::{Pipeline, RunConfig, Stage, StageOutcome};

#[derive(Parser)]
#[command(name = "wmdgcn", version, about = "Fake-news classification over a WMD k-NN graph with a GCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the dataset, clean text, split and draw the label mask.
    Prep(Opts),
    /// Mean word vectors and nBOW signatures.
    Embed(Opts),
    /// k-NN graph under Word Mover's Distance.
    Graph(Opts),
    /// Train the GCN.
    Train(Opts),
    /// Score the test split.
    Eval(Opts),
    /// Every stage in order, reusing valid cached outputs.
    Pipeline(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Union,
    Mutual,
}

#[derive(Args, Clone)]
struct Opts {
    /// JSON file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun stages even when their cached outputs are valid.
    #[arg(long)]
    force: bool,
    /// Use the built-in two-cluster fixture instead of dataset files.
    #[arg(long)]
    synthetic: bool,
    /// Run directory for every stage's outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threads for the graph stage.
    #[arg(long)]
    workers: Option<usize>,
    /// Sets split, mask and model seeds unless given individually.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    mask_seed: Option<u64>,
    #[arg(long)]
    model_seed: Option<u64>,
    /// News CSV (may be gzipped).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSON naming the id, title, body and label columns plus the label map.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// GloVe text vectors (may be gzipped).
    #[arg(long)]
    glove: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Neighbours per document in the similarity graph.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    knn_rule: Option<Rule>,
    /// Share of all documents whose labels the loss may see (at most 0.8).
    #[arg(long)]
    label_fraction: Option<f64>,
    /// Most frequent words kept per document for WMD.
    #[arg(long)]
    signature_cap: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    leaky_slope: Option<f64>,
}

impl Opts {
    fn resolve(&self) -> wmdgcn::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        if let Some(seed) = self.seed {
            c.set_seed(seed);
        }
        set!(
            out, workers, split_seed, mask_seed, model_seed, dim, k, label_fraction,
            signature_cap, epochs, learning_rate, dropout, weight_decay, hidden_units,
            num_layers, leaky_slope
        );
        for (slot, flag) in [
            (&mut c.dataset, &self.dataset),
            (&mut c.schema, &self.schema),
            (&mut c.glove, &self.glove),
        ] {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        if let Some(rule) = self.knn_rule {
            c.knn_rule = match rule {
                Rule::Union => KnnRule::Union,
                Rule::Mutual => KnnRule::Mutual,
            };
        }
        c.synthetic |= self.synthetic;
        Ok(c)
    }
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(
                buf,
                "{} {:5} {}",
                buf.timestamp_millis(),
                record.level(),
                record.args()
            )
        })
        .init();
}

fn run(cli: Cli) -> wmdgcn::Result<()> {
    let (stage, opts) = match &cli.command {
        Command::Prep(o) => (Some(Stage::Prep), o),
        Command::Embed(o) => (Some(Stage::Embed), o),
        Command::Graph(o) => (Some(Stage::Graph), o),
        Command::Train(o) => (Some(Stage::Train), o),
        Command::Eval(o) => (Some(Stage::Eval), o),
        Command::Pipeline(o) => (None, o),
    };
    let config = opts.resolve()?;
    log::info!("output directory {}", config.out.display());
    let pipeline = Pipeline::new(config, opts.force);
    let start = Instant::now();
    match stage {
        Some(s) => {
            pipeline.run(s)?;
        }
        None => {
            let outcomes = pipeline.run_all()?;
            let ran = outcomes.iter().filter(|o| o.1 == StageOutcome::Ran).count();
            log::info!(
                "pipeline: {ran} of {} stages ran in {} ms",
                outcomes.len(),
                start.elapsed().as_millis()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
