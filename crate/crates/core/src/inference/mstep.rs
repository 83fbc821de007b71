use super::state::VariationalState;
use crate::network::InteractionNetwork;

/// Recomputes ζ and ω exactly from λ.
pub fn m_step_counts(state: &mut VariationalState, network: &InteractionNetwork) {
    let k = state.k;
    let kk = k * k;
    state.zeta.iter_mut().for_each(|z| *z = state.beta);
    state.omega.iter_mut().for_each(|w| *w = state.alpha);
    for (i, edge) in network.interactions().iter().enumerate() {
        let cell = &state.lambda[i * kk..(i + 1) * kk];
        let (s, r) = (edge.sender * k, edge.receiver * k);
        for k1 in 0..k {
            let row = &cell[k1 * k..(k1 + 1) * k];
            let mut row_sum = 0.0;
            for (k2, &x) in row.iter().enumerate() {
                row_sum += x;
                state.zeta[r + k2] += x;
                state.omega[k1 * k + k2] += x;
            }
            state.zeta[s + k1] += row_sum;
        }
    }
}
