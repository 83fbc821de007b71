use super::estep::Expectations;
use super::eta::EtaObjective;
use super::state::VariationalState;
use crate::error::{Error, Result};
use crate::network::{InteractionNetwork, LabelSet};
use crate::special::ln_gamma;

/// E_q[log p(Dir prior)] − E_q[log q] for one Dirichlet factor.
fn dirichlet_term(prior: f64, posterior: &[f64], expected_log: &[f64]) -> f64 {
    let dim = posterior.len() as f64;
    let total: f64 = posterior.iter().sum();
    let mut value = ln_gamma(dim * prior) - dim * ln_gamma(prior) - ln_gamma(total);
    for (&p, &e) in posterior.iter().zip(expected_log) {
        value += ln_gamma(p) + (prior - p) * e;
    }
    value
}

/// The variational free energy of the current state.
///
/// The η terms enter only when some train node is active in the E-step.
pub fn free_energy(
    state: &VariationalState,
    network: &InteractionNetwork,
    labels: &LabelSet,
    iteration: usize,
) -> Result<f64> {
    let (k, n) = (state.k, state.nodes);
    let kk = k * k;
    let expect = Expectations::new(state);

    let mut value = dirichlet_term(state.alpha, &state.omega, &expect.log_pi);
    let mut column = vec![0.0; n];
    let mut column_log = vec![0.0; n];
    for pos in 0..k {
        for v in 0..n {
            column[v] = state.zeta[v * k + pos];
            column_log[v] = expect.log_phi[v * k + pos];
        }
        value += dirichlet_term(state.beta, &column, &column_log);
    }

    let mut likelihood = 0.0;
    for (i, edge) in network.interactions().iter().enumerate() {
        let cell = &state.lambda[i * kk..(i + 1) * kk];
        let ls = &expect.log_phi[edge.sender * k..(edge.sender + 1) * k];
        let lr = &expect.log_phi[edge.receiver * k..(edge.receiver + 1) * k];
        for k1 in 0..k {
            for k2 in 0..k {
                let x = cell[k1 * k + k2];
                if x > 0.0 {
                    likelihood += x * (expect.log_pi[k1 * k + k2] + ls[k1] + lr[k2]);
                }
            }
        }
    }
    value += likelihood + state.entropy.iter().sum::<f64>();

    if state.cache.has_active() {
        value += EtaObjective::new(state, network, labels).value(&state.eta);
    }
    if !value.is_finite() {
        return Err(Error::Numerical {
            iteration,
            interaction: None,
            message: format!("free energy evaluated to {value}"),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{init_state, FitMode, ModelConfig};
    use approx::assert_relative_eq;

    #[test]
    fn single_edge_single_position_closed_form() {
        let net = InteractionNetwork::from_ids(2, &[(0, 1)]).unwrap();
        let labels = LabelSet::new(vec!["x".into()], vec![None; 2]).unwrap();
        for beta in [0.5, 0.2, 3.0] {
            let mut cfg = ModelConfig::new(1).with_mode(FitMode::Unsupervised);
            cfg.beta = Some(beta);
            let st = init_state(&net, &labels, &cfg).unwrap();
            // π terms cancel; the φ Dirichlet leaves Γ(2β)β² / Γ(2β+2).
            let expected = (beta / (2.0 * (2.0 * beta + 1.0))).ln();
            assert_relative_eq!(free_energy(&st, &net, &labels, 0).unwrap(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn dirichlet_term_vanishes_at_prior() {
        let e = [-1.2, -0.4, -2.0];
        assert_relative_eq!(dirichlet_term(0.7, &[0.7; 3], &e), 0.0, epsilon = 1e-12);
    }
}
