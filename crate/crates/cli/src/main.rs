use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stgraph::config::RunConfig;
use stgraph::data::{
    format_series, load_series, make_windows, make_windows_scaled, synth_generate, synth_network,
    write_series, SeriesTable,
};
use stgraph::eval::{comparison_csv, comparison_table, evaluate, ha_report, VariantResult};
use stgraph::graphs::{
    build_edge_graph, build_node_graph, dump, format_distances, read_distances, read_ids,
    EdgeVariant, GraphOperators, NodeGraph,
};
use stgraph::model::{predict, Checkpoint, ModelConfig, RangeMixing};
use stgraph::training::{train, EpochLog};
use stgraph::{gradcheck, Matrix};

#[derive(Parser)]
#[command(name = "stgraph", version, about = "Traffic forecasting on sensor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the node and edge graphs from a distance table and dump them.
    BuildGraph(Common),
    /// Generate a synthetic network and readings table.
    Synth(Common),
    /// Train a model; writes the best checkpoint and the epoch log.
    Train(Common),
    /// Score a checkpoint on the test split next to the historical average.
    Evaluate(WithCheckpoint),
    /// Predict the steps following the last input window of a readings table.
    Forecast(WithCheckpoint),
    /// Check every layer's gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train and evaluate the five model variants and compare them.
    Ablation(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<EdgeVariant>,
    #[arg(long, value_parser = parse_mixing)]
    mixing: Option<RangeMixing>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Readings table `timestamp,<id>,...`; synthetic data is used when absent.
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Sensor ids, one per line.
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Distance table `from,to,distance`.
    #[arg(long)]
    distances: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct WithCheckpoint {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn parse_variant(s: &str) -> std::result::Result<EdgeVariant, String> {
    s.parse().map_err(|e: stgraph::Error| e.to_string())
}

fn parse_mixing(s: &str) -> std::result::Result<RangeMixing, String> {
    s.parse().map_err(|e: stgraph::Error| e.to_string())
}

impl Common {
    /// The file configuration with every given flag applied.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
            cfg.synth.seed = seed;
        }
        if let Some(v) = self.variant {
            cfg.model.edge_variant = v;
        }
        if let Some(m) = self.mixing {
            cfg.model.mixing = m;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        for (flag, slot) in [
            (&self.readings, &mut cfg.paths.readings),
            (&self.ids, &mut cfg.paths.ids),
            (&self.distances, &mut cfg.paths.distances),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Creates the output directory and echoes the resolved configuration into it.
fn prepare_out(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join("config.toml"), &cfg.to_toml())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn synthetic_network(cfg: &RunConfig) -> Result<(Vec<String>, Matrix)> {
    Ok(synth_network(cfg.synth.nodes, cfg.synth.edges, cfg.synth.seed)?)
}

/// Ids and distances from the configured files, or the synthetic network.
fn network(cfg: &RunConfig) -> Result<(Vec<String>, Matrix)> {
    match (&cfg.paths.ids, &cfg.paths.distances) {
        (Some(ids), Some(distances)) => {
            let ids = read_ids(ids)?;
            let d = read_distances(distances, &ids)?;
            Ok((ids, d))
        }
        (None, None) => synthetic_network(cfg),
        _ => bail!("--ids and --distances must be given together"),
    }
}

/// The node graph and readings the run works on.
fn dataset(cfg: &RunConfig) -> Result<(NodeGraph, SeriesTable)> {
    let (ids, d) = network(cfg)?;
    let g = build_node_graph(&d, cfg.data.kappa)?;
    let table = match &cfg.paths.readings {
        Some(readings) => {
            let ids_path = cfg.paths.ids.as_ref().context("--readings needs --ids and --distances")?;
            load_series(readings, ids_path)?
        }
        None => synth_generate(&g, cfg.synth.steps, cfg.synth.seed, cfg.synth.noise)?,
    };
    if table.ids() != ids.as_slice() {
        bail!("readings columns do not match the sensor ids");
    }
    Ok((g, table))
}

fn build_graph(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    prepare_out(&args.out, &cfg)?;
    let (_, d) = network(&cfg)?;
    let g = build_node_graph(&d, cfg.data.kappa)?;
    let e = build_edge_graph(&g, cfg.model.edge_variant)?;
    let path = args.out.join("graph.txt");
    write(&path, &dump(&g, &e))?;
    println!(
        "{} nodes, {} edges, {} edge-graph links -> {}",
        g.node_count(),
        g.edge_count(),
        e.adjacency.as_slice().iter().filter(|&&w| w != 0.0).count(),
        path.display()
    );
    Ok(())
}

fn synth(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    prepare_out(&args.out, &cfg)?;
    let (ids, d) = synthetic_network(&cfg)?;
    let g = build_node_graph(&d, cfg.data.kappa)?;
    let table = synth_generate(&g, cfg.synth.steps, cfg.synth.seed, cfg.synth.noise)?;
    write(&args.out.join("ids.txt"), &(ids.join("\n") + "\n"))?;
    write(&args.out.join("distances.csv"), &format_distances(&d, &ids))?;
    write_series(&table, &args.out.join("readings.csv"))?;
    println!(
        "{} sensors, {} links, {} steps -> {}",
        ids.len(),
        g.edge_count(),
        table.steps(),
        args.out.display()
    );
    Ok(())
}

fn run_training(cfg: &RunConfig, out: &Path) -> Result<Checkpoint> {
    let (g, table) = dataset(cfg)?;
    let m = &cfg.model;
    let windows = make_windows(&table, m.history, m.horizon, cfg.data.splits())?;
    let ops = GraphOperators::build(&g, m.edge_variant)?;
    let mut log = format!("{}\n", EpochLog::HEADER);
    let outcome = train(m, &cfg.train, &windows, &ops, |e| {
        println!("{}", e.line());
        log.push_str(&e.line());
        log.push('\n');
    })?;
    write(&out.join("train_log.csv"), &log)?;
    outcome.best.save(&out.join("checkpoint.bin"))?;
    Ok(outcome.best)
}

fn run_train(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    prepare_out(&args.out, &cfg)?;
    let best = run_training(&cfg, &args.out)?;
    println!(
        "best epoch {} (val MAE {:.4}) -> {}",
        best.epoch,
        best.val_mae,
        args.out.join("checkpoint.bin").display()
    );
    Ok(())
}

/// The checkpoint's model settings replace the configured ones.
fn with_checkpoint(args: &WithCheckpoint) -> Result<(RunConfig, Checkpoint)> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut cfg = args.common.resolve()?;
    cfg.model = ck.config.clone();
    Ok((cfg, ck))
}

fn run_evaluate(args: &WithCheckpoint) -> Result<()> {
    let (cfg, ck) = with_checkpoint(args)?;
    let out = &args.common.out;
    prepare_out(out, &cfg)?;
    let (g, table) = dataset(&cfg)?;
    let m = &ck.config;
    let windows = make_windows_scaled(&table, m.history, m.horizon, cfg.data.splits(), ck.scaler)?;
    let ops = GraphOperators::build(&g, m.edge_variant)?;
    let report = evaluate(&ck, &windows.test, &ops, cfg.train.batch_size)?;
    let train_steps = cfg.data.splits().sizes(table.steps()).0;
    let (ha, fallbacks) = ha_report(&windows.test, train_steps, cfg.data.ha_period)?;
    write(&out.join("report.csv"), &report.to_csv())?;
    write(&out.join("report.txt"), &report.to_text())?;
    write(&out.join("ha_report.csv"), &ha.to_csv())?;
    let results = [
        VariantResult {
            label: "HA".into(),
            report: ha,
        },
        VariantResult {
            label: m.variant_label(),
            report,
        },
    ];
    let table = comparison_table(&results);
    write(&out.join("comparison.txt"), &table)?;
    print!("{table}");
    if fallbacks > 0 {
        println!("HA used node means for {fallbacks} entries");
    }
    Ok(())
}

fn run_forecast(args: &WithCheckpoint) -> Result<()> {
    let (cfg, ck) = with_checkpoint(args)?;
    let out = &args.common.out;
    prepare_out(out, &cfg)?;
    let (g, table) = dataset(&cfg)?;
    let m = &ck.config;
    if table.steps() < m.history {
        bail!("{} steps cannot fill a {}-step input window", table.steps(), m.history);
    }
    let ops = GraphOperators::build(&g, m.edge_variant)?;
    let first = table.steps() - m.history;
    let inputs: Vec<Matrix> = (first..table.steps())
        .map(|t| Matrix::column(table.readings().row(t)).map(|v| ck.scaler.apply(v)))
        .collect();
    let preds = predict(&ck.params, m, &ops, &inputs)?;
    let n = table.node_count();
    let readings = Matrix::from_fn(preds.len(), n, |h, v| ck.scaler.inverse(preds[h][(v, 0)]));
    let stamps = (1..=preds.len()).map(|h| format!("+{h}")).collect();
    let forecast = SeriesTable::new(table.ids().to_vec(), stamps, readings)?;
    let path = out.join("forecast.csv");
    write(&path, &format_series(&forecast))?;
    println!("{} steps for {n} sensors -> {}", preds.len(), path.display());
    Ok(())
}

fn run_gradcheck(seed: u64) -> Result<()> {
    let results = gradcheck::run_suite(seed)?;
    let mut worst: f64 = 0.0;
    for r in &results {
        println!("{:<14} {:>6} entries  max rel error {:.3e}", r.name, r.entries, r.max_rel_error);
        worst = worst.max(r.max_rel_error);
    }
    println!("max relative error {worst:.3e}");
    if results.iter().any(|r| !r.passed()) {
        bail!("gradient check failed: {worst:.3e} >= {:e}", gradcheck::TOLERANCE);
    }
    Ok(())
}

/// The five ablation settings: edge-graph variants under attention, then the
/// range-mixing variants on the interaction-pattern graph.
fn ablation_variants(base: &ModelConfig) -> Vec<ModelConfig> {
    let with = |edge_variant, mixing| ModelConfig {
        edge_variant,
        mixing,
        ..base.clone()
    };
    vec![
        with(EdgeVariant::InteractionPatterns, RangeMixing::Attention),
        with(EdgeVariant::LineGraph, RangeMixing::Attention),
        with(EdgeVariant::Identity, RangeMixing::Attention),
        with(EdgeVariant::InteractionPatterns, RangeMixing::Concat),
        with(EdgeVariant::InteractionPatterns, RangeMixing::LastHop),
    ]
}

fn run_ablation(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    prepare_out(&args.out, &cfg)?;
    let (g, table) = dataset(&cfg)?;
    let splits = cfg.data.splits();
    let mut results = Vec::new();
    for model in ablation_variants(&cfg.model) {
        let label = model.variant_label();
        let dir = args.out.join(label.replace('/', "_"));
        let run = RunConfig {
            model,
            ..cfg.clone()
        };
        prepare_out(&dir, &run)?;
        println!("== {label}");
        let ck = run_training(&run, &dir)?;
        let m = &ck.config;
        let windows = make_windows_scaled(&table, m.history, m.horizon, splits, ck.scaler)?;
        let ops = GraphOperators::build(&g, m.edge_variant)?;
        let report = evaluate(&ck, &windows.test, &ops, run.train.batch_size)?;
        write(&dir.join("report.csv"), &report.to_csv())?;
        results.push(VariantResult { label, report });
    }
    let m = &cfg.model;
    let windows = make_windows(&table, m.history, m.horizon, splits)?;
    let (ha, _) = ha_report(&windows.test, splits.sizes(table.steps()).0, cfg.data.ha_period)?;
    results.insert(
        0,
        VariantResult {
            label: "HA".into(),
            report: ha,
        },
    );
    let text = comparison_table(&results);
    write(&args.out.join("comparison.txt"), &text)?;
    write(&args.out.join("comparison.csv"), &comparison_csv(&results))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Forecast(a) => run_forecast(a),
        Command::Gradcheck { seed } => run_gradcheck(*seed),
        Command::Ablation(a) => run_ablation(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
