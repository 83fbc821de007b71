use serde::{Deserialize, Serialize};

use super::config::{FitMode, InitMode, ModelConfig};
use super::estep::e_step;
use super::eta::optimize_eta;
use super::free_energy::free_energy;
use super::mstep::m_step_counts;
use super::state::{init_state, VariationalState};
use crate::classify::{score, Classifier};
use crate::error::Result;
use crate::network::{InteractionNetwork, LabelSet};
use crate::optim::ConjugateGradient;

/// Steps allowed for the one-off classifier fit after an unsupervised run,
/// as a multiple of the per-iteration CG budget.
const UNSUPERVISED_CG_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub free_energy_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub train_macro_f1: f64,
    pub train_accuracy: f64,
    pub eta_final: Vec<Vec<f64>>,
    /// ω normalised to sum to 1 (K × K).
    pub pi_hat: Vec<Vec<f64>>,
    /// ζ rows normalised over nodes (K × N).
    pub phi_hat: Vec<Vec<f64>>,
    pub line_search_failures: usize,
    pub cg_steps: usize,
    pub mode: FitMode,
    pub init_mode: InitMode,
    pub seed: u64,
}

impl FitReport {
    pub fn final_free_energy(&self) -> f64 {
        self.free_energy_trace.last().copied().unwrap_or(f64::NAN)
    }
}

fn cg_for(config: &ModelConfig, steps: usize) -> ConjugateGradient {
    ConjugateGradient {
        max_steps: steps,
        grad_tol: config.cg_grad_tol,
        ..Default::default()
    }
}

/// Fits from a fresh random initialisation.
pub fn fit(
    network: &InteractionNetwork,
    labels: &LabelSet,
    config: &ModelConfig,
) -> Result<(VariationalState, FitReport)> {
    let state = init_state(network, labels, config)?;
    fit_from_state(state, network, labels, config)
}

/// Iterates E-step, M-step and (supervised) η update until the relative
/// change of the free energy drops below the tolerance.
pub fn fit_from_state(
    mut state: VariationalState,
    network: &InteractionNetwork,
    labels: &LabelSet,
    config: &ModelConfig,
) -> Result<(VariationalState, FitReport)> {
    config.validate()?;
    let cg = cg_for(config, config.cg_max_steps);
    let supervised = config.mode == FitMode::Supervised;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut line_search_failures = 0;
    let mut cg_steps = 0;

    for iteration in 1..=config.max_iterations {
        e_step(&mut state, network, labels, iteration)?;
        m_step_counts(&mut state, network);
        if supervised {
            let update = optimize_eta(&mut state, network, labels, &cg);
            cg_steps += update.steps;
            line_search_failures += usize::from(update.line_search_failed);
        }
        let value = free_energy(&state, network, labels, iteration)?;
        let previous = trace.last().copied();
        trace.push(value);
        if let Some(prev) = previous {
            if (value - prev).abs() <= config.free_energy_rel_tol * value.abs() {
                converged = true;
                break;
            }
        }
    }

    if !supervised {
        let update = optimize_eta(
            &mut state,
            network,
            labels,
            &cg_for(config, config.cg_max_steps * UNSUPERVISED_CG_FACTOR),
        );
        cg_steps += update.steps;
        line_search_failures += usize::from(update.line_search_failed);
    }

    let classifier = Classifier::from_state(&state, network, labels);
    let train = labels.train_nodes();
    let (train_macro_f1, train_accuracy) = if train.is_empty() {
        (0.0, 0.0)
    } else {
        let metrics = score(&classifier.predict(&train)?, labels)?;
        (metrics.macro_f1, metrics.accuracy)
    };

    let report = FitReport {
        iterations_used: trace.len(),
        free_energy_trace: trace,
        converged,
        train_macro_f1,
        train_accuracy,
        eta_final: state.eta_matrix(),
        pi_hat: state.pi_hat(),
        phi_hat: state.phi_hat(),
        line_search_failures,
        cg_steps,
        mode: config.mode,
        init_mode: config.init_mode,
        seed: config.seed,
    };
    Ok((state, report))
}
