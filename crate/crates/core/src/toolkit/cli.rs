use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::experiment::{run_experiment, ExperimentSpec};
use super::export::{
    export_blockmodel, write_metrics, write_predictions, write_sweep, write_trace, ModelFile,
};
use crate::classify::{score, wvrn, Classifier};
use crate::error::{Error, Result};
use crate::inference::{fit, FitMode, InitMode, ModelConfig};
use crate::network::{
    load_edge_list, load_labels, load_labels_for_names, InteractionNetwork, LabelSet, Membership,
};
use crate::synth::{generate, planted_partition, write_fixture};

#[derive(Debug, Parser)]
#[command(name = "sbsn", version, about = "Supervised blockmodel for sparse networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model on a seeded split and write predictions, metrics and matrices.
    Fit(FitArgs),
    /// Predict from a saved model.
    Predict(PredictArgs),
    /// Repeated runs over K values and train fractions.
    Sweep(SweepArgs),
    /// Sample a planted-partition fixture.
    Generate(GenerateArgs),
    /// Re-export the blockmodel matrices of a saved model.
    Export(ExportArgs),
    /// Relational-neighbour baseline on a seeded split.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Insert every edge in both directions.
    #[arg(long)]
    undirected: bool,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Defaults to 1/C.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitMode::Flat)]
    init: InitMode,
    #[arg(long, value_enum, default_value_t = FitMode::Supervised)]
    mode: FitMode,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    /// Relative free-energy change that stops the fit.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "cg-steps", default_value_t = 50)]
    cg_steps: usize,
    /// Dirichlet concentration of the random initial λ; defaults to 100
    /// when supervised and 1 when unsupervised.
    #[arg(long = "init-lambda-conc")]
    init_lambda_conc: Option<f64>,
    /// Initial η is drawn uniformly from ±this.
    #[arg(long = "init-eta-scale", default_value_t = 5.0)]
    init_eta_scale: f64,
}

impl ModelArgs {
    fn config(&self, k: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            positions: k,
            alpha: self.alpha,
            beta: self.beta,
            init_mode: self.init,
            init_lambda_concentration: self.init_lambda_conc,
            init_eta_scale: self.init_eta_scale,
            mode: self.mode,
            max_iterations: self.max_iter,
            free_energy_rel_tol: self.tol,
            cg_max_steps: self.cg_steps,
            seed,
            ..ModelConfig::new(k)
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    k: usize,
    #[arg(long = "train-frac", default_value_t = 2.0 / 3.0)]
    train_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// model.json written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Score the predictions against these labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long = "train-frac", value_delimiter = ',', default_value = "0.6666666666666666")]
    train_frac: Vec<f64>,
    #[arg(long, default_value_t = 25)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exclude runs whose train macro-F1 is below this value.
    #[arg(long = "reject-below")]
    reject_below: Option<f64>,
    /// Refit a rejected run with a fresh seed up to this many times.
    #[arg(long, default_value_t = 0)]
    retries: usize,
    /// Also score the relational-neighbour baseline on each split.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    i: usize,
    #[arg(long = "p-in")]
    p_in: f64,
    /// Defaults to K.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long = "eta-scale", default_value_t = 4.0)]
    eta_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    stem: String,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labels used to order the class-sorted membership matrix.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "train-frac", default_value_t = 2.0 / 3.0)]
    train_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-sweeps", default_value_t = 100)]
    max_sweeps: usize,
    #[arg(long)]
    out: PathBuf,
}

fn load(data: &DataArgs) -> Result<(InteractionNetwork, LabelSet)> {
    let network = load_edge_list(&data.edges, !data.undirected)?;
    let labels = load_labels(&data.labels, &network)?;
    Ok((network, labels))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Test nodes followed by unlabelled nodes, in id order.
fn held_out(labels: &LabelSet) -> Vec<usize> {
    (0..labels.node_count())
        .filter(|&v| labels.membership(v) != Membership::Train)
        .collect()
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (network, labels) = load(&args.data)?;
    let split = labels.split(args.train_frac, args.seed)?;
    let config = args.model.config(args.k, args.seed);
    let (state, report) = fit(&network, &split, &config)?;
    let classifier = Classifier::from_state(&state, &network, &split);

    ensure_dir(&args.out)?;
    let targets = held_out(&split);
    let predictions = classifier.predict(&targets)?;
    let test = classifier.predict(&split.test_nodes())?;
    let metrics = if test.is_empty() { None } else { Some(score(&test, &split)?) };
    write_predictions(&args.out.join("predictions.csv"), &predictions, network.names(), split.class_count())?;
    write_metrics(&args.out.join("metrics.json"), metrics.as_ref(), &report)?;
    write_trace(&args.out.join("trace.csv"), &report.free_energy_trace)?;
    split.write_split_manifest(&network, &args.out.join("split.csv"))?;
    export_blockmodel(&report, network.names(), &split, &args.out)?;
    ModelFile {
        config,
        node_names: network.names().to_vec(),
        class_names: split.class_names().to_vec(),
        train_nodes: split.train_nodes(),
        classifier,
        report,
    }
    .save(&args.out.join("model.json"))?;
    if let Some(m) = &metrics {
        println!("test macro-F1 {:.4}  accuracy {:.4}", m.macro_f1, m.accuracy);
    }
    Ok(())
}

fn labels_for_model(model: &ModelFile, path: &Path) -> Result<LabelSet> {
    let labels = load_labels_for_names(path, &model.node_names)?;
    if labels.class_names() != model.class_names.as_slice() {
        return Err(Error::invalid(format!(
            "{} has classes {:?}, the model was fitted with {:?}",
            path.display(),
            labels.class_names(),
            model.class_names
        )));
    }
    Ok(labels)
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let train: std::collections::HashSet<usize> = model.train_nodes.iter().copied().collect();
    let targets: Vec<usize> = (0..model.node_names.len()).filter(|v| !train.contains(v)).collect();
    let predictions = model.classifier.predict(&targets)?;
    ensure_dir(&args.out)?;
    write_predictions(
        &args.out.join("predictions.csv"),
        &predictions,
        &model.node_names,
        model.class_names.len(),
    )?;
    if let Some(path) = &args.labels {
        let labels = labels_for_model(&model, path)?;
        let scored: Vec<_> = predictions
            .into_iter()
            .filter(|p| labels.label(p.node).is_some())
            .collect();
        let metrics = score(&scored, &labels)?;
        write_metrics(&args.out.join("metrics.json"), Some(&metrics), &model.report)?;
        println!("macro-F1 {:.4}  accuracy {:.4}", metrics.macro_f1, metrics.accuracy);
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = ExperimentSpec {
        edges: args.data.edges.clone(),
        labels: args.data.labels.clone(),
        undirected: args.data.undirected,
        mode: args.model.mode,
        k_values: args.k.clone(),
        train_fractions: args.train_frac.clone(),
        runs: args.runs,
        init_mode: args.model.init,
        fit_rejection_threshold: args.reject_below,
        rejection_retries: args.retries,
        base_seed: args.seed,
        with_baseline: args.baseline,
        model: args.model.config(args.k[0], args.seed),
    };
    let result = run_experiment(&spec)?;
    ensure_dir(&args.out)?;
    write_sweep(&args.out, &result)?;
    for c in &result.cells {
        println!(
            "K={:<3} frac={:.3} accepted={:<3} macro-F1 {}  accuracy {}",
            c.k,
            c.train_fraction,
            c.accepted,
            c.mean_macro_f1.map_or("-".into(), |m| format!("{m:.4}")),
            c.mean_accuracy.map_or("-".into(), |m| format!("{m:.4}")),
        );
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let params = planted_partition(
        args.k,
        args.n,
        args.i,
        args.p_in,
        args.classes.unwrap_or(args.k),
        args.eta_scale,
        args.seed,
    )?;
    let sample = generate(&params)?;
    write_fixture(&sample, &args.out, &args.stem)
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let labels = match &args.labels {
        Some(path) => labels_for_model(&model, path)?,
        None => LabelSet::new(model.class_names.clone(), vec![None; model.node_names.len()])?,
    };
    ensure_dir(&args.out)?;
    export_blockmodel(&model.report, &model.node_names, &labels, &args.out)
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let (network, labels) = load(&args.data)?;
    let split = labels.split(args.train_frac, args.seed)?;
    let all = wvrn(&network, &split, args.max_sweeps);
    let predictions: Vec<_> = held_out(&split).into_iter().map(|v| all[v].clone()).collect();
    let test: Vec<_> = split.test_nodes().into_iter().map(|v| all[v].clone()).collect();
    let metrics = score(&test, &split)?;
    ensure_dir(&args.out)?;
    write_predictions(&args.out.join("predictions.csv"), &predictions, network.names(), split.class_count())?;
    let file = std::fs::File::create(args.out.join("metrics.json")).map_err(|e| Error::io(&args.out, e))?;
    serde_json::to_writer_pretty(file, &metrics)?;
    println!("macro-F1 {:.4}  accuracy {:.4}", metrics.macro_f1, metrics.accuracy);
    Ok(())
}

/// Parses `argv` and runs the command. Exit codes: 0 success, 1 usage or
/// other error, 2 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Export(a) => cmd_export(a),
        Command::Baseline(a) => cmd_baseline(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
