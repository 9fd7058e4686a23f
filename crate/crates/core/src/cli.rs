//! Command-line entry point: `train`, `grid`, and `bench` subcommands, all
//! driven by a flat key=value config file with optional seed/output
//! overrides. Exit codes: 0 success, 1 usage/config, 2 data, 3 runtime.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{EmbeddingKind, ExperimentConfig};
use crate::dataset::LabeledDataset;
use crate::embeddings::{Embedder, PrecomputedEmbedder, TableEmbedder, TfIdfEmbedder, Vocabulary};
use crate::error::{Error, Result};
use crate::evalbench::{bench_latency, evaluate, render_table, BenchReport};
use crate::heads::{save_head, Head, HeadFamily};
use crate::rng::Rng;
use crate::training::{train, RunRecord};

#[derive(Debug, Parser)]
#[command(
    name = "kanhead",
    version,
    about = "KAN classification-head experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one head on one embedding and write reports + checkpoint.
    Train(RunArgs),
    /// Run a head x embedding grid and emit a combined table.
    Grid(RunArgs),
    /// Measure parameters and forward/backward latency without training.
    Bench(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the key=value experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse argv and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => load_config(&args).and_then(|c| cmd_train(&c)),
        Command::Grid(args) => load_config(&args).and_then(|c| cmd_grid(&c)),
        Command::Bench(args) => load_config(&args).and_then(|c| cmd_bench(&c)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn load_dataset(config: &ExperimentConfig) -> Result<LabeledDataset> {
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("config is missing 'dataset'".into()))?;
    if !path.exists() {
        return Err(Error::Data(format!(
            "dataset file not found: {}",
            path.display()
        )));
    }
    LabeledDataset::load_tsv(path)
}

fn build_embedder(
    kind: &EmbeddingKind,
    train_split: &LabeledDataset,
    config: &ExperimentConfig,
    root: &Rng,
) -> Result<Embedder> {
    match kind {
        EmbeddingKind::TfIdf => {
            let vocab = Vocabulary::from_dataset(train_split, config.vocab_size)?;
            Ok(Embedder::TfIdf(TfIdfEmbedder::fit(vocab)))
        }
        EmbeddingKind::Random => {
            let vocab = Vocabulary::from_dataset(train_split, config.vocab_size)?;
            let mut rng = root.stream("embed_init");
            Ok(Embedder::Table(TableEmbedder::random(
                vocab,
                config.embed_dim,
                &mut rng,
            )))
        }
        EmbeddingKind::Vectors(path) => {
            let vocab = Vocabulary::from_dataset(train_split, config.vocab_size)?;
            let mut rng = root.stream("embed_init");
            Ok(Embedder::Table(TableEmbedder::from_word_vectors(
                path, vocab, &mut rng,
            )?))
        }
        EmbeddingKind::Precomputed(path) => {
            Ok(Embedder::Precomputed(PrecomputedEmbedder::load(path)?))
        }
    }
}

struct CellOutcome {
    report: BenchReport,
    record: RunRecord,
    head: Head,
}

/// Train one (embedding, head) cell end to end.
fn run_cell(
    config: &ExperimentConfig,
    kind: &EmbeddingKind,
    family: HeadFamily,
    seed: u64,
    train_split: &LabeledDataset,
    test_split: &LabeledDataset,
) -> Result<CellOutcome> {
    let root = Rng::new(seed);
    let mut embedder = build_embedder(kind, train_split, config, &root)?;
    let mut head_config = config.head_config();
    head_config.family = family;
    let mut head = Head::new(
        &head_config,
        embedder.dim(),
        train_split.num_classes(),
        &mut root.stream("head_init"),
    )?;
    let mut train_config = config.train_config(kind);
    train_config.seed = root.stream("train").seed();

    let record = train(
        &mut head,
        &mut embedder,
        train_split,
        test_split,
        &train_config,
    )?;
    let (_, f1, accuracy) = evaluate(&head, &embedder, test_split)?;

    let (head_total, head_trainable) = head.count_params();
    let (emb_total, emb_trainable) = embedder.count_params();
    let report = BenchReport {
        model: format!("{kind}+{family}"),
        total_params: head_total + emb_total,
        trainable_params: head_trainable + emb_trainable,
        train_seconds: record.train_seconds,
        fwd_ms_mean: record.fwd_ms_mean,
        bwd_ms_mean: record.bwd_ms_mean,
        f1_weighted: f1,
        accuracy,
    };
    Ok(CellOutcome {
        report,
        record,
        head,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json)?;
    Ok(())
}

fn cmd_train(config: &ExperimentConfig) -> Result<i32> {
    let dataset = load_dataset(config)?;
    let root = Rng::new(config.seed);
    let (train_split, test_split) =
        dataset.stratified_split(config.test_fraction, &mut root.stream("split"))?;
    let outcome = run_cell(
        config,
        &config.embedding,
        config.head,
        config.seed,
        &train_split,
        &test_split,
    )?;

    fs::create_dir_all(&config.out_dir)?;
    write_json(&config.out_dir.join("run_record.json"), &outcome.record)?;
    write_json(&config.out_dir.join("bench_report.json"), &outcome.report)?;
    save_head(&outcome.head, &config.out_dir.join("head.ckpt.json"))?;

    println!(
        "f1_weighted={:.4} accuracy={:.4} model={}",
        outcome.report.f1_weighted, outcome.report.accuracy, outcome.report.model
    );
    Ok(0)
}

#[derive(Debug, Serialize)]
struct GridCell {
    model: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<BenchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_grid(config: &ExperimentConfig) -> Result<i32> {
    let dataset = load_dataset(config)?;
    let root = Rng::new(config.seed);
    let (train_split, test_split) =
        dataset.stratified_split(config.test_fraction, &mut root.stream("split"))?;
    let (heads, embeddings) = config.grid_axes();

    fs::create_dir_all(&config.out_dir)?;
    let mut cells = Vec::new();
    let mut reports = Vec::new();
    let mut first_failure: Option<i32> = None;
    for kind in &embeddings {
        for &family in &heads {
            let name = format!("{kind}+{family}");
            let cell_seed = root.stream(&format!("cell/{name}")).seed();
            match run_cell(config, kind, family, cell_seed, &train_split, &test_split) {
                Ok(outcome) => {
                    let cell_dir = config
                        .out_dir
                        .join("cells")
                        .join(name.replace(['/', ':'], "_"));
                    fs::create_dir_all(&cell_dir)?;
                    write_json(&cell_dir.join("run_record.json"), &outcome.record)?;
                    save_head(&outcome.head, &cell_dir.join("head.ckpt.json"))?;
                    reports.push(outcome.report.clone());
                    cells.push(GridCell {
                        model: name,
                        status: "ok".into(),
                        report: Some(outcome.report),
                        error: None,
                    });
                }
                Err(e) => {
                    eprintln!("cell {name} failed: {e}");
                    first_failure.get_or_insert(e.exit_code());
                    cells.push(GridCell {
                        model: name,
                        status: "failed".into(),
                        report: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    let table = render_table(&reports);
    write_json(&config.out_dir.join("grid_report.json"), &cells)?;
    fs::write(config.out_dir.join("grid_report.txt"), &table)?;
    print!("{table}");
    for cell in &cells {
        if cell.status == "failed" {
            println!(
                "failed: {} ({})",
                cell.model,
                cell.error.as_deref().unwrap_or("unknown")
            );
        }
    }
    Ok(first_failure.unwrap_or(0))
}

fn cmd_bench(config: &ExperimentConfig) -> Result<i32> {
    let root = Rng::new(config.seed);
    let mut head = Head::new(
        &config.head_config(),
        config.bench_input_dim,
        config.bench_output_dim,
        &mut root.stream("head_init"),
    )?;
    let (total, trainable) = head.count_params();
    let (fwd_ms, bwd_ms) = bench_latency(
        &mut head,
        config.bench_batch,
        config.bench_warmup,
        config.bench_iters,
        &mut root.stream("bench"),
    )?;
    let report = BenchReport {
        model: format!("{}", config.head),
        total_params: total,
        trainable_params: trainable,
        train_seconds: 0.0,
        fwd_ms_mean: fwd_ms,
        bwd_ms_mean: bwd_ms,
        f1_weighted: 0.0,
        accuracy: 0.0,
    };
    fs::create_dir_all(&config.out_dir)?;
    write_json(&config.out_dir.join("bench_report.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}
