//! Batch driver: build motif tensors, train, evaluate, gradient-check, and
//! generate synthetic datasets. One command per process; every command is
//! deterministic given its inputs and seed (wall-clock columns aside).

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use motifconv::features::build_joint_features;
use motifconv::graph::HeteroGraph;
use motifconv::io::{parse_dataset, save_dataset, Dataset};
use motifconv::labels::{stratified_split, LabelSet, TaskKind};
use motifconv::linalg::DenseMatrix;
use motifconv::metrics::evaluate_f1;
use motifconv::motif::{Motif, MotifNodeType};
use motifconv::nn::checkpoint::{load_checkpoint, motif_set_hash, save_checkpoint};
use motifconv::nn::gradcheck::{grad_check, GradCheckReport};
use motifconv::nn::model::{model_forward, Mode, Model};
use motifconv::synth::{planted_hetero, sbm_homo, PlantedConfig, SbmConfig};
use motifconv::tensor::{tensor_cache_key, MotifTensor, DEFAULT_INSTANCE_CAP};
use motifconv::train::{train, TrainConfig, TrainData};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "motifconv", version, about = "Motif-based graph convolution")]
struct Cli {
    /// Thread pool size for kernels and enumeration (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphMotifs {
    /// Graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Motif spec (JSON); repeat for several motifs.
    #[arg(long = "motif", required = true)]
    motifs: Vec<PathBuf>,
    /// Tensor cache directory; dumps are reused when graph, motif, and cap
    /// all match, and built (then cached) otherwise.
    #[arg(long)]
    tensors: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate motif instances and write per-role tensor dumps.
    BuildTensor {
        #[command(flatten)]
        inputs: GraphMotifs,
        /// Output directory (also serves as the cache).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes model.ckpt and report.csv under --out.
    Train {
        #[command(flatten)]
        inputs: GraphMotifs,
        /// key=value training settings file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed from --config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint over every labeled node of a graph.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        inputs: GraphMotifs,
    },
    /// Compare analytic gradients against central differences on a built-in
    /// two-motif problem, both loss heads.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic dataset file.
    Synth {
        #[command(flatten)]
        args: SynthArgs,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// planted-hetero or sbm-homo.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    // planted-hetero sizes
    #[arg(long)]
    authors: Option<usize>,
    #[arg(long)]
    papers_per_author: Option<usize>,
    #[arg(long)]
    venues: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    citations_per_paper: Option<usize>,
    #[arg(long)]
    venue_noise: Option<f64>,
    // sbm-homo sizes
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    // shared
    #[arg(long)]
    feature_noise: Option<f64>,
}

/// TrainConfig plus the split fractions, as read from a key=value file.
struct Settings {
    train: TrainConfig,
    train_frac: f64,
    val_frac: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            train: TrainConfig::default(),
            train_frac: 0.1,
            val_frac: 0.1,
        }
    }
}

fn parse_settings(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut s = Settings::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), idx + 1);
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}: expected key=value, got {raw:?}", at()))?;
        let (key, value) = (key.trim(), value.trim());
        let parse = |what: &str| -> Result<f64> {
            value
                .parse::<f64>()
                .with_context(|| format!("{}: {what} must be a number, got {value:?}", at()))
        };
        match key {
            "max_epochs" => s.train.max_epochs = parse("max_epochs")? as usize,
            "window" => s.train.window = parse("window")? as usize,
            "learning_rate" => s.train.learning_rate = parse("learning_rate")?,
            "dropout" => s.train.dropout = parse("dropout")?,
            "filters" => s.train.filters = parse("filters")? as usize,
            "layers" => s.train.layers = parse("layers")? as usize,
            "seed" => s.train.seed = parse("seed")? as u64,
            "train_frac" => s.train_frac = parse("train_frac")?,
            "val_frac" => s.val_frac = parse("val_frac")?,
            other => bail!("{}: unknown setting {other:?}", at()),
        }
    }
    Ok(s)
}

fn load_graph(path: &Path) -> Result<(Dataset, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph {}", path.display()))?;
    let ds = parse_dataset(&text, &path.display().to_string())?;
    Ok((ds, text))
}

fn load_motifs(paths: &[PathBuf]) -> Result<Vec<(String, Motif)>> {
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            let motif =
                Motif::load(p).with_context(|| format!("loading motif {}", p.display()))?;
            Ok((name, motif))
        })
        .collect()
}

/// Load the tensor from the cache when the key matches, build and cache it
/// otherwise. Returns whether the cache was hit.
fn obtain_tensor(
    graph: &HeteroGraph,
    graph_text: &str,
    motif: &Motif,
    cache_dir: &Path,
) -> Result<(MotifTensor, bool)> {
    let key = tensor_cache_key(graph_text, motif, DEFAULT_INSTANCE_CAP);
    let dir = cache_dir.join(&key);
    if dir.is_dir() {
        let (tensor, stored) = MotifTensor::load(&dir)
            .with_context(|| format!("reading cached tensor {}", dir.display()))?;
        ensure!(
            stored == key && tensor.node_count() == graph.node_count(),
            "cache entry {} does not match its key",
            dir.display()
        );
        return Ok((tensor, true));
    }
    let tensor = MotifTensor::build(graph, motif)?;
    tensor
        .dump(&dir, &key)
        .with_context(|| format!("writing tensor cache {}", dir.display()))?;
    Ok((tensor, false))
}

/// Nodes a motif's target position can bind to.
fn eligible_targets(graph: &HeteroGraph, motif: &Motif) -> usize {
    match motif.node_type(motif.target()) {
        MotifNodeType::Any => graph.node_count(),
        MotifNodeType::Named(name) => graph
            .types()
            .id(name)
            .map_or(0, |t| graph.nodes_of_type(t).len()),
    }
}

fn cmd_build_tensor(inputs: &GraphMotifs, out: &Path) -> Result<()> {
    let (ds, text) = load_graph(&inputs.graph)?;
    let cache = inputs.tensors.clone().unwrap_or_else(|| out.to_path_buf());
    for (name, motif) in load_motifs(&inputs.motifs)? {
        let started = Instant::now();
        let (tensor, cached) = obtain_tensor(&ds.graph, &text, &motif, &cache)?;
        let elapsed = started.elapsed().as_secs_f64();
        let total: f64 = tensor.instance_counts().iter().sum();
        let targets = eligible_targets(&ds.graph, &motif);
        let per_target = if targets > 0 { total / targets as f64 } else { 0.0 };
        let per_target = if per_target.fract() == 0.0 {
            format!("{per_target}")
        } else {
            format!("{per_target:.2}")
        };
        let key = tensor_cache_key(&text, &motif, DEFAULT_INSTANCE_CAP);
        println!(
            "{name}: roles={} instances: {} ({per_target} per target) elapsed={elapsed:.2}s{} -> {}",
            tensor.role_count(),
            total as u64,
            if cached { " (cached)" } else { "" },
            cache.join(key).display(),
        );
    }
    Ok(())
}

struct LoadedProblem {
    dataset: Dataset,
    features: DenseMatrix,
    tensors: Vec<MotifTensor>,
    motifs: Vec<(String, Motif)>,
}

fn load_problem(inputs: &GraphMotifs, default_cache: &Path) -> Result<LoadedProblem> {
    let (dataset, text) = load_graph(&inputs.graph)?;
    let motifs = load_motifs(&inputs.motifs)?;
    let features = build_joint_features(&dataset.graph, &dataset.features)?;
    let cache = inputs.tensors.clone().unwrap_or_else(|| default_cache.to_path_buf());
    let mut tensors = Vec::with_capacity(motifs.len());
    for (name, motif) in &motifs {
        let started = Instant::now();
        let (tensor, cached) = obtain_tensor(&dataset.graph, &text, motif, &cache)?;
        println!(
            "tensor {name}: roles={} {} in {:.2}s",
            tensor.role_count(),
            if cached { "cached" } else { "built" },
            started.elapsed().as_secs_f64()
        );
        tensors.push(tensor);
    }
    Ok(LoadedProblem {
        dataset,
        features,
        tensors,
        motifs,
    })
}

fn require_labels<'a>(ds: &'a Dataset, graph: &Path) -> Result<&'a LabelSet> {
    ds.labels
        .as_ref()
        .with_context(|| format!("{} declares no TASK/labels", graph.display()))
}

fn cmd_train(
    inputs: &GraphMotifs,
    config: Option<&Path>,
    seed_flag: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut settings = match config {
        Some(p) => parse_settings(p)?,
        None => Settings::default(),
    };
    if let Some(seed) = seed_flag {
        settings.train.seed = seed;
    }
    let seed = settings.train.seed;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let problem = load_problem(inputs, &out.join("tensors"))?;
    let labels = require_labels(&problem.dataset, &inputs.graph)?;
    let split = stratified_split(labels, settings.train_frac, settings.val_frac, seed)?;
    println!(
        "split: train={} val={} test={}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );

    let role_counts: Vec<usize> = problem.tensors.iter().map(|t| t.role_count()).collect();
    // Distinct streams for initialization and dropout.
    let model = Model::init(
        problem.features.cols(),
        settings.train.filters,
        labels.task().class_count(),
        settings.train.layers,
        &role_counts,
        seed.wrapping_add(1),
    )?;
    let data = TrainData {
        features: &problem.features,
        tensors: &problem.tensors,
        labels,
        split: &split,
    };
    let (trained, report) = train(model, &data, &settings.train)?;

    let hash = motif_set_hash(
        &problem.motifs.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>(),
    );
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&ckpt, &trained, &hash)?;
    let csv = out.join("report.csv");
    std::fs::write(&csv, report.to_csv())
        .with_context(|| format!("writing {}", csv.display()))?;

    println!(
        "trained {} epochs, kept epoch {} (val loss {})",
        report.epochs.len(),
        report.chosen_epoch,
        report
            .epochs
            .iter()
            .find(|r| r.epoch == report.chosen_epoch)
            .map_or(f64::NAN, |r| r.val_loss)
    );
    if let Some(m) = report.test_metrics {
        println!(
            "test: accuracy={:.4} micro_f1={:.4} macro_f1={:.4}",
            m.accuracy, m.micro_f1, m.macro_f1
        );
    }
    println!("wrote {} and {}", ckpt.display(), csv.display());
    Ok(())
}

fn cmd_eval(checkpoint: &Path, inputs: &GraphMotifs) -> Result<()> {
    let cache = std::env::temp_dir().join("motifconv-tensors");
    let problem = load_problem(inputs, &cache)?;
    let labels = require_labels(&problem.dataset, &inputs.graph)?;
    let hash = motif_set_hash(
        &problem.motifs.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>(),
    );
    let model = load_checkpoint(checkpoint, &hash)?;
    let (logits, _) = model_forward(&model, &problem.features, &problem.tensors, Mode::Eval)?;
    let mask: Vec<u32> = labels.entries().iter().map(|&(v, _)| v).collect();
    let m = evaluate_f1(&logits, labels, &mask)?;
    println!(
        "accuracy={:.4} micro_f1={:.4} macro_f1={:.4} over {} labeled nodes",
        m.accuracy,
        m.micro_f1,
        m.macro_f1,
        mask.len()
    );
    Ok(())
}

fn print_gradcheck(head: &str, report: &GradCheckReport, tol: f64) {
    println!("head: {head}");
    println!(
        "  {:<24} {:>8} {:>14} {:>14} {:>14}",
        "group", "checked", "max rel err", "analytic", "numeric"
    );
    for g in &report.groups {
        println!(
            "  {:<24} {:>8} {:>14.3e} {:>14.6e} {:>14.6e}",
            g.name, g.checked, g.max_rel_err, g.worst_pair.0, g.worst_pair.1
        );
    }
    println!(
        "  overall {:.3e} -> {}",
        report.max_rel_err,
        if report.passes(tol) { "PASS" } else { "FAIL" }
    );
}

/// Fixed 15-node problem: dense two-block graph, edge + wedge motifs,
/// checked under both loss heads.
fn cmd_gradcheck(config: Option<&Path>, seed_flag: Option<u64>) -> Result<()> {
    let mut settings = match config {
        Some(p) => parse_settings(p)?,
        None => {
            let mut s = Settings::default();
            s.train.filters = 6;
            s.train.layers = 3;
            s
        }
    };
    if let Some(seed) = seed_flag {
        settings.train.seed = seed;
    }
    let seed = settings.train.seed;
    let ds = sbm_homo(&SbmConfig {
        nodes: 15,
        p_in: 0.6,
        p_out: 0.25,
        feature_noise: 0.3,
        seed,
    })?;
    let x = build_joint_features(&ds.graph, &ds.features)?;
    let motifs = [Motif::edge_any(), Motif::wedge_any()];
    let tensors: Vec<MotifTensor> = motifs
        .iter()
        .map(|m| MotifTensor::build(&ds.graph, m))
        .collect::<motifconv::Result<_>>()?;
    let role_counts: Vec<usize> = tensors.iter().map(|t| t.role_count()).collect();
    let mask: Vec<u32> = (0..15).collect();
    let tol = 1e-5;

    let multiclass = ds.labels.as_ref().expect("block model labels");
    let model = Model::init(
        x.cols(),
        settings.train.filters,
        multiclass.task().class_count(),
        settings.train.layers,
        &role_counts,
        seed.wrapping_add(1),
    )?;
    let report = grad_check(&model, &x, &tensors, multiclass, &mask, 1e-6, 1)?;
    print_gradcheck("softmax cross-entropy", &report, tol);
    let ce_ok = report.passes(tol);

    let multilabel = LabelSet::new(
        TaskKind::MultiLabel { classes: 3 },
        (0..15u32)
            .map(|v| {
                let mut cs = vec![v % 2];
                if v % 3 == 0 {
                    cs.push(2);
                }
                (v, cs)
            })
            .collect(),
    )?;
    let model = Model::init(
        x.cols(),
        settings.train.filters,
        3,
        settings.train.layers,
        &role_counts,
        seed.wrapping_add(2),
    )?;
    let report = grad_check(&model, &x, &tensors, &multilabel, &mask, 1e-6, 1)?;
    print_gradcheck("binary cross-entropy", &report, tol);

    ensure!(
        ce_ok && report.passes(tol),
        "gradient check exceeded tolerance {tol}"
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let ds = match args.kind.as_str() {
        "planted-hetero" => {
            let mut cfg = PlantedConfig {
                seed: args.seed,
                ..PlantedConfig::default()
            };
            if let Some(v) = args.authors {
                cfg.authors = v;
            }
            if let Some(v) = args.papers_per_author {
                cfg.papers_per_author = v;
            }
            if let Some(v) = args.venues {
                cfg.venues = v;
            }
            if let Some(v) = args.classes {
                cfg.classes = v;
            }
            if let Some(v) = args.citations_per_paper {
                cfg.citations_per_paper = v;
            }
            if let Some(v) = args.venue_noise {
                cfg.venue_noise = v;
            }
            if let Some(v) = args.feature_noise {
                cfg.feature_noise = v;
            }
            planted_hetero(&cfg)?
        }
        "sbm-homo" => {
            let mut cfg = SbmConfig {
                seed: args.seed,
                ..SbmConfig::default()
            };
            if let Some(v) = args.nodes {
                cfg.nodes = v;
            }
            if let Some(v) = args.p_in {
                cfg.p_in = v;
            }
            if let Some(v) = args.p_out {
                cfg.p_out = v;
            }
            if let Some(v) = args.feature_noise {
                cfg.feature_noise = v;
            }
            sbm_homo(&cfg)?
        }
        other => bail!("unknown dataset kind {other:?} (planted-hetero or sbm-homo)"),
    };
    save_dataset(&args.out, &ds)?;
    println!(
        "wrote {}: {} nodes, {} edges, {} labeled",
        args.out.display(),
        ds.graph.node_count(),
        ds.graph.edge_count(),
        ds.labels.as_ref().map_or(0, |l| l.len())
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        ensure!(threads > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing thread pool")?;
    }
    match &cli.command {
        Command::BuildTensor { inputs, out } => cmd_build_tensor(inputs, out),
        Command::Train {
            inputs,
            config,
            seed,
            out,
        } => cmd_train(inputs, config.as_deref(), *seed, out),
        Command::Eval { checkpoint, inputs } => cmd_eval(checkpoint, inputs),
        Command::Gradcheck { config, seed } => cmd_gradcheck(config.as_deref(), *seed),
        Command::Synth { args } => cmd_synth(args),
    }
}
