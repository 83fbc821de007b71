use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{score, wvrn, Classifier};
use crate::error::{Error, Result};
use crate::inference::{fit, FitMode, InitMode, ModelConfig};
use crate::network::{load_edge_list, load_labels, InteractionNetwork, LabelSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub edges: PathBuf,
    pub labels: PathBuf,
    /// Insert every edge in both directions.
    pub undirected: bool,
    pub mode: FitMode,
    pub k_values: Vec<usize>,
    pub train_fractions: Vec<f64>,
    pub runs: usize,
    pub init_mode: InitMode,
    /// Runs whose train macro-F1 falls below this are left out of the means.
    pub fit_rejection_threshold: Option<f64>,
    /// Extra fits with fresh seeds for a rejected run; 0 means count and exclude.
    pub rejection_retries: usize,
    pub base_seed: u64,
    /// Also score the relational-neighbour baseline on every split.
    pub with_baseline: bool,
    /// Hyperparameters and convergence controls; `positions`, `mode`,
    /// `init_mode` and `seed` are overridden per run.
    pub model: ModelConfig,
}

impl ExperimentSpec {
    pub fn new(edges: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        Self {
            edges: edges.into(),
            labels: labels.into(),
            undirected: false,
            mode: FitMode::Supervised,
            k_values: vec![7],
            train_fractions: vec![2.0 / 3.0],
            runs: 25,
            init_mode: InitMode::Flat,
            fit_rejection_threshold: None,
            rejection_retries: 0,
            base_seed: 0,
            with_baseline: false,
            model: ModelConfig::new(7),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::invalid("K values must be positive"));
        }
        if self.train_fractions.is_empty() || self.train_fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::invalid("train fractions must lie in (0, 1)"));
        }
        if let Some(t) = self.fit_rejection_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("rejection threshold must lie in [0, 1]"));
            }
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: usize,
    pub train_fraction: f64,
    pub run: usize,
    pub split_seed: u64,
    pub fit_seed: u64,
    pub mode: FitMode,
    pub init_mode: InitMode,
    pub attempts: usize,
    pub train_macro_f1: f64,
    pub test_macro_f1: f64,
    pub test_accuracy: f64,
    pub accepted: bool,
    pub iterations: usize,
    pub converged: bool,
    pub final_free_energy: f64,
    pub pi_diagonal_mass: f64,
    pub baseline_macro_f1: Option<f64>,
    pub baseline_accuracy: Option<f64>,
    /// Excluded from the result files, which are meant to be reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub train_fraction: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub mean_macro_f1: Option<f64>,
    pub std_macro_f1: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_free_energy: Option<f64>,
    pub mean_baseline_macro_f1: Option<f64>,
    pub mean_baseline_accuracy: Option<f64>,
    #[serde(skip)]
    pub mean_wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl SweepResult {
    pub fn cell(&self, k: usize, train_fraction: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.k == k && (c.train_fraction - train_fraction).abs() < 1e-12)
    }

    /// Cell with the highest mean macro-F1 at the given fraction.
    pub fn best_for_fraction(&self, train_fraction: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .filter(|c| (c.train_fraction - train_fraction).abs() < 1e-12 && c.mean_macro_f1.is_some())
            .max_by(|a, b| a.mean_macro_f1.partial_cmp(&b.mean_macro_f1).expect("finite means"))
    }
}

/// Initialisation seed for a run, decorrelated from the split seed.
pub fn fit_seed(split_seed: u64, attempt: usize) -> u64 {
    let mut z = split_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((attempt as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(mean), Some(var.sqrt()))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn run_once(
    network: &InteractionNetwork,
    labels: &LabelSet,
    spec: &ExperimentSpec,
    k: usize,
    fraction: f64,
    run: usize,
) -> Result<RunRecord> {
    let started = Instant::now();
    let split_seed = spec.base_seed + run as u64;
    let split = labels.split(fraction, split_seed)?;
    let test = split.test_nodes();

    let mut attempt = 0;
    let (seed, report, metrics) = loop {
        let seed = fit_seed(split_seed, attempt);
        let config = ModelConfig {
            positions: k,
            mode: spec.mode,
            init_mode: spec.init_mode,
            seed,
            ..spec.model.clone()
        };
        let (state, report) = fit(network, &split, &config)?;
        let predictions = Classifier::from_state(&state, network, &split).predict(&test)?;
        let metrics = score(&predictions, &split)?;
        let rejected = spec
            .fit_rejection_threshold
            .is_some_and(|t| report.train_macro_f1 < t);
        if !rejected || attempt >= spec.rejection_retries {
            break (seed, report, metrics);
        }
        attempt += 1;
    };
    let accepted = spec
        .fit_rejection_threshold
        .is_none_or(|t| report.train_macro_f1 >= t);

    let (baseline_macro_f1, baseline_accuracy) = if spec.with_baseline {
        let all = wvrn(network, &split, 100);
        let on_test: Vec<_> = test.iter().map(|&v| all[v].clone()).collect();
        let m = score(&on_test, &split)?;
        (Some(m.macro_f1), Some(m.accuracy))
    } else {
        (None, None)
    };

    let pi_diagonal_mass = (0..k).map(|a| report.pi_hat[a][a]).sum();
    Ok(RunRecord {
        k,
        train_fraction: fraction,
        run,
        split_seed,
        fit_seed: seed,
        mode: spec.mode,
        init_mode: spec.init_mode,
        attempts: attempt + 1,
        train_macro_f1: report.train_macro_f1,
        test_macro_f1: metrics.macro_f1,
        test_accuracy: metrics.accuracy,
        accepted,
        iterations: report.iterations_used,
        converged: report.converged,
        final_free_energy: report.final_free_energy(),
        pi_diagonal_mass,
        baseline_macro_f1,
        baseline_accuracy,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs every (K, fraction, run) cell on an already loaded dataset.
///
/// Runs may execute in parallel; records and summaries come out in
/// (fraction, K, run) order regardless.
pub fn run_experiment_on(
    network: &InteractionNetwork,
    labels: &LabelSet,
    spec: &ExperimentSpec,
) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(f64, usize, usize)> = spec
        .train_fractions
        .iter()
        .flat_map(|&f| {
            spec.k_values
                .iter()
                .flat_map(move |&k| (0..spec.runs).map(move |r| (f, k, r)))
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(f, k, r)| run_once(network, labels, spec, k, f, r))
        .collect::<Result<Vec<_>>>()?;

    let cells = runs
        .chunks(spec.runs)
        .map(|chunk| {
            let kept: Vec<&RunRecord> = chunk.iter().filter(|r| r.accepted).collect();
            let f1: Vec<f64> = kept.iter().map(|r| r.test_macro_f1).collect();
            let acc: Vec<f64> = kept.iter().map(|r| r.test_accuracy).collect();
            let (mean_macro_f1, std_macro_f1) = mean_std(&f1);
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            CellSummary {
                k: chunk[0].k,
                train_fraction: chunk[0].train_fraction,
                accepted: kept.len(),
                rejected: chunk.len() - kept.len(),
                mean_macro_f1,
                std_macro_f1,
                mean_accuracy,
                std_accuracy,
                mean_free_energy: mean(kept.iter().map(|r| r.final_free_energy)),
                mean_baseline_macro_f1: mean(chunk.iter().filter_map(|r| r.baseline_macro_f1)),
                mean_baseline_accuracy: mean(chunk.iter().filter_map(|r| r.baseline_accuracy)),
                mean_wall_seconds: mean(chunk.iter().map(|r| r.wall_seconds)).unwrap_or(0.0),
            }
        })
        .collect();
    Ok(SweepResult { cells, runs })
}

/// Loads the dataset named in the spec and runs the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    let network = load_edge_list(&spec.edges, !spec.undirected)?;
    let labels = load_labels(&spec.labels, &network)?;
    run_experiment_on(&network, &labels, spec)
}
