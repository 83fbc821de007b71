use super::state::{marginal_into, VariationalState};
use crate::network::{InteractionNetwork, LabelSet};
use crate::optim::{CgOutcome, ConjugateGradient};

/// The η terms of the free energy over train nodes, with λ held fixed:
/// Σ_v η_{y_v}ᵀλ̄_v − log Σ_c Π_{slots of v} Σ_k λ_{v,k} exp(η_{c,k}/n_v).
#[derive(Debug, Clone)]
pub struct EtaObjective {
    k: usize,
    classes: usize,
    nodes: Vec<TrainNode>,
    /// Distinct values of 1/n_v; nodes index into this.
    scales: Vec<f64>,
}

#[derive(Debug, Clone)]
struct TrainNode {
    label: usize,
    inv_n: f64,
    scale: usize,
    lambda_bar: Vec<f64>,
    /// Slot marginals, deg × K.
    marginals: Vec<f64>,
}

impl EtaObjective {
    /// Collects the train nodes with at least one interaction.
    pub fn new(state: &VariationalState, network: &InteractionNetwork, labels: &LabelSet) -> Self {
        let k = state.k;
        let mut m = vec![0.0; k];
        let mut scales: Vec<f64> = Vec::new();
        let nodes = (0..network.node_count())
            .filter_map(|v| {
                let label = labels.train_label(v)?;
                let slots = network.slots(v);
                if slots.is_empty() {
                    return None;
                }
                let mut marginals = Vec::with_capacity(slots.len() * k);
                let mut lambda_bar = vec![0.0; k];
                for s in slots {
                    marginal_into(state.lambda(s.interaction), k, s.role, &mut m);
                    marginals.extend_from_slice(&m);
                    lambda_bar.iter_mut().zip(&m).for_each(|(a, b)| *a += b);
                }
                let inv_n = 1.0 / slots.len() as f64;
                lambda_bar.iter_mut().for_each(|a| *a *= inv_n);
                let scale = match scales.iter().position(|&x| x == inv_n) {
                    Some(i) => i,
                    None => {
                        scales.push(inv_n);
                        scales.len() - 1
                    }
                };
                Some(TrainNode {
                    label,
                    inv_n,
                    scale,
                    lambda_bar,
                    marginals,
                })
            })
            .collect();
        Self {
            k,
            classes: state.classes,
            nodes,
            scales,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, eta: &[f64]) -> f64 {
        let mut grad = vec![0.0; eta.len()];
        self.value_and_gradient(eta, &mut grad)
    }

    /// Objective at `eta` (C × K row-major); writes ∂F/∂η into `grad`.
    pub fn value_and_gradient(&self, eta: &[f64], grad: &mut [f64]) -> f64 {
        let (k, classes) = (self.k, self.classes);
        grad.iter_mut().for_each(|g| *g = 0.0);
        // exp(η_{c,k}/n − max_k η_{c,k}/n) and its offset, once per distinct degree.
        let stride = classes * k;
        let mut weights = vec![0.0; self.scales.len() * stride];
        let mut offsets = vec![0.0; self.scales.len() * classes];
        for (g, &inv_n) in self.scales.iter().enumerate() {
            for c in 0..classes {
                let row = &eta[c * k..(c + 1) * k];
                let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * inv_n));
                offsets[g * classes + c] = m;
                let out = &mut weights[g * stride + c * k..g * stride + (c + 1) * k];
                for (w, &e) in out.iter_mut().zip(row) {
                    *w = (e * inv_n - m).exp();
                }
            }
        }
        let mut log_prod = vec![0.0; classes];
        let mut acc = vec![0.0; classes * k];
        let mut prod = vec![0.0; k];
        let mut total = 0.0;

        for node in &self.nodes {
            let weights = &weights[node.scale * stride..(node.scale + 1) * stride];
            let offsets = &offsets[node.scale * classes..(node.scale + 1) * classes];
            log_prod.iter_mut().for_each(|x| *x = 0.0);
            acc.iter_mut().for_each(|x| *x = 0.0);
            for marginal in node.marginals.chunks_exact(k) {
                for c in 0..classes {
                    let w = &weights[c * k..(c + 1) * k];
                    prod.iter_mut().zip(w).zip(marginal).for_each(|((p, a), b)| *p = a * b);
                    let t: f64 = prod.iter().sum();
                    log_prod[c] += t.ln() + offsets[c];
                    let inv_t = 1.0 / t;
                    acc[c * k..(c + 1) * k].iter_mut().zip(&prod).for_each(|(a, p)| *a += p * inv_t);
                }
            }
            let top = log_prod.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let z: f64 = log_prod.iter().map(|l| (l - top).exp()).sum();
            let log_norm = top + z.ln();

            let y = node.label;
            let fit: f64 = eta[y * k..(y + 1) * k]
                .iter()
                .zip(&node.lambda_bar)
                .map(|(a, b)| a * b)
                .sum();
            total += fit - log_norm;

            for (g, lb) in grad[y * k..(y + 1) * k].iter_mut().zip(&node.lambda_bar) {
                *g += lb;
            }
            for c in 0..classes {
                let p = (log_prod[c] - log_norm).exp() * node.inv_n;
                for (g, a) in grad[c * k..(c + 1) * k].iter_mut().zip(&acc[c * k..(c + 1) * k]) {
                    *g -= p * a;
                }
            }
        }
        total
    }

    /// Maximises the objective from `eta0` by conjugate gradient on its negation.
    pub fn maximize(&self, eta0: &[f64], cg: &ConjugateGradient) -> CgOutcome {
        let mut outcome = cg.minimize(eta0, |x, g| {
            let v = self.value_and_gradient(x, g);
            g.iter_mut().for_each(|gi| *gi = -*gi);
            -v
        });
        outcome.value = -outcome.value;
        outcome.trace.iter_mut().for_each(|t| *t = -*t);
        outcome
    }
}

/// Summary of one η optimisation.
#[derive(Debug, Clone, Copy, Default)]
pub struct EtaUpdate {
    pub steps: usize,
    pub line_search_failed: bool,
}

/// Warm-started CG update of η; λ, ζ and ω are untouched. The cache is
/// rebuilt for the new η.
pub fn optimize_eta(
    state: &mut VariationalState,
    network: &InteractionNetwork,
    labels: &LabelSet,
    cg: &ConjugateGradient,
) -> EtaUpdate {
    let objective = EtaObjective::new(state, network, labels);
    if objective.is_empty() {
        return EtaUpdate::default();
    }
    let outcome = objective.maximize(&state.eta, cg);
    // A failed line search leaves the last accepted point, which never lowers F_η.
    state.eta = outcome.x;
    state.rebuild_cache(network);
    EtaUpdate {
        steps: outcome.steps,
        line_search_failed: outcome.line_search_failed,
    }
}
