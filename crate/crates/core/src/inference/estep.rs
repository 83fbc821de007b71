use super::state::{marginal_into, ScaledEta, VariationalState};
use crate::error::{Error, Result};
use crate::network::{InteractionNetwork, LabelSet, NodeId, Role, Slot};
use crate::special::{digamma, log_sum_exp};

/// Below this normaliser the factorised exponentials are redone in the log domain.
const UNDERFLOW_GUARD: f64 = 1e-250;

/// E[log φ_{k,v}] laid out node-major, and E[log π] for every position pair.
pub(crate) struct Expectations {
    pub log_phi: Vec<f64>,
    pub log_pi: Vec<f64>,
}

impl Expectations {
    pub fn new(state: &VariationalState) -> Self {
        let k = state.k;
        let mut totals = vec![0.0; k];
        for row in state.zeta.chunks(k) {
            totals.iter_mut().zip(row).for_each(|(t, z)| *t += z);
        }
        let norms: Vec<f64> = totals.iter().map(|&t| digamma(t)).collect();
        let log_phi = state
            .zeta
            .chunks(k)
            .flat_map(|row| row.iter().zip(&norms).map(|(&z, n)| digamma(z) - n))
            .collect();
        let pi_norm = digamma(state.omega.iter().sum());
        let log_pi = state.omega.iter().map(|&w| digamma(w) - pi_norm).collect();
        Self { log_phi, log_pi }
    }
}

/// h_{i,v}: Σ_c exp(η_{c,k}/n_v + S_{v,c} − s_{v,c,slot}). The cache must be current.
pub fn compute_h(
    state: &VariationalState,
    network: &InteractionNetwork,
    slot: Slot,
    v: NodeId,
) -> Result<Vec<f64>> {
    if !state.cache.is_active(v) {
        return Err(Error::Internal(format!("no cached log factors for node {v}")));
    }
    let edge = network.interaction(slot.interaction);
    let endpoint = match slot.role {
        Role::Sender => edge.sender,
        Role::Receiver => edge.receiver,
    };
    if endpoint != v {
        return Err(Error::invalid(format!(
            "node {v} is not the {:?} of interaction {}",
            slot.role, slot.interaction
        )));
    }
    let n_v = network.incidence(v) as f64;
    let sums = state.cache.node_sum(v);
    let own = state.cache.slot_log(slot.index());
    let h = (0..state.k)
        .map(|k| {
            (0..state.classes)
                .map(|c| (state.eta(c, k) / n_v + sums[c] - own[c]).exp())
                .sum()
        })
        .collect();
    Ok(h)
}

/// Adds η_{y,k}/n_v − h_k / (hᵀλ_v^old) to `logits`, working in the log domain.
fn add_label_term(
    state: &VariationalState,
    scaled: &ScaledEta,
    v: NodeId,
    y: usize,
    slot: usize,
    n_v: f64,
    weights: &mut [f64],
    logits: &mut [f64],
) {
    let (k, classes) = (state.k, state.classes);
    let sums = state.cache.node_sum(v);
    let own = state.cache.slot_log(slot);
    let top = sums.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut denom = 0.0;
    for c in 0..classes {
        denom += (sums[c] - top).exp();
        weights[c] = (scaled.offsets[c] - own[c] + sums[c] - top).exp();
    }
    let inv_denom = 1.0 / denom;
    let eta_y = &state.eta[y * k..(y + 1) * k];
    for kk in 0..k {
        let ratio: f64 = (0..classes)
            .map(|c| weights[c] * scaled.weights[c * k + kk])
            .sum::<f64>()
            * inv_denom;
        logits[kk] += eta_y[kk] / n_v - ratio;
    }
}

/// One Gauss–Seidel sweep over the interactions in stored order.
///
/// ζ and ω are held fixed; the label terms of train endpoints read the
/// log-factor cache, which is refreshed after each λ_i update.
pub fn e_step(
    state: &mut VariationalState,
    network: &InteractionNetwork,
    labels: &LabelSet,
    iteration: usize,
) -> Result<()> {
    let (k, classes) = (state.k, state.classes);
    let kk = k * k;
    if kk == 1 {
        return Ok(());
    }
    let supervised = state.cache.has_active();
    if supervised {
        state.rebuild_cache(network);
    }
    let expect = Expectations::new(state);
    let p_max = expect.log_pi.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp_pi: Vec<f64> = expect.log_pi.iter().map(|p| (p - p_max).exp()).collect();
    let scaled: Vec<Option<ScaledEta>> = (0..state.nodes)
        .map(|v| {
            state
                .cache
                .is_active(v)
                .then(|| ScaledEta::new(&state.eta, classes, k, network.incidence(v)))
        })
        .collect();

    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k];
    let mut ea = vec![0.0; k];
    let mut eb = vec![0.0; k];
    let mut ms = vec![0.0; k];
    let mut mr = vec![0.0; k];
    let mut weights = vec![0.0; classes];
    let mut logs = vec![0.0; classes];
    let mut cell = vec![0.0; kk];

    for (i, edge) in network.interactions().iter().enumerate() {
        let (s, r) = (edge.sender, edge.receiver);
        a.copy_from_slice(&expect.log_phi[s * k..(s + 1) * k]);
        b.copy_from_slice(&expect.log_phi[r * k..(r + 1) * k]);
        if let Some(sc) = &scaled[s] {
            let y = labels.train_label(s).expect("active node has a train label");
            add_label_term(state, sc, s, y, 2 * i, network.incidence(s) as f64, &mut weights, &mut a);
        }
        if let Some(sc) = &scaled[r] {
            let y = labels.train_label(r).expect("active node has a train label");
            add_label_term(state, sc, r, y, 2 * i + 1, network.incidence(r) as f64, &mut weights, &mut b);
        }

        let a_max = a.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let b_max = b.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        ea.iter_mut().zip(&a).for_each(|(e, x)| *e = (x - a_max).exp());
        eb.iter_mut().zip(&b).for_each(|(e, x)| *e = (x - b_max).exp());
        let mut z = 0.0;
        for k1 in 0..k {
            let row = &mut cell[k1 * k..(k1 + 1) * k];
            let pr = &exp_pi[k1 * k..(k1 + 1) * k];
            for k2 in 0..k {
                let x = ea[k1] * eb[k2] * pr[k2];
                row[k2] = x;
                z += x;
            }
        }
        let log_z = if z > UNDERFLOW_GUARD && z.is_finite() {
            let inv = 1.0 / z;
            cell.iter_mut().for_each(|x| *x *= inv);
            z.ln() + a_max + b_max + p_max
        } else {
            for k1 in 0..k {
                for k2 in 0..k {
                    cell[k1 * k + k2] = a[k1] + b[k2] + expect.log_pi[k1 * k + k2];
                }
            }
            let lz = log_sum_exp(&cell);
            cell.iter_mut().for_each(|x| *x = (*x - lz).exp());
            lz
        };

        marginal_into(&cell, k, Role::Sender, &mut ms);
        marginal_into(&cell, k, Role::Receiver, &mut mr);
        let expected: f64 = ms.iter().zip(&a).map(|(m, x)| m * x).sum::<f64>()
            + mr.iter().zip(&b).map(|(m, x)| m * x).sum::<f64>()
            + cell.iter().zip(&expect.log_pi).map(|(l, p)| l * p).sum::<f64>();
        let entropy = (log_z - expected).max(0.0);
        if !log_z.is_finite() || !expected.is_finite() {
            return Err(Error::Numerical {
                iteration,
                interaction: Some(i),
                message: "non-finite position-pair posterior".into(),
            });
        }
        state.lambda[i * kk..(i + 1) * kk].copy_from_slice(&cell);
        state.entropy[i] = entropy;

        if let Some(sc) = &scaled[s] {
            sc.log_factors(&ms, &mut logs);
            state.cache.replace_slot(s, 2 * i, &logs);
        }
        if let Some(sc) = &scaled[r] {
            sc.log_factors(&mr, &mut logs);
            state.cache.replace_slot(r, 2 * i + 1, &logs);
        }
    }
    Ok(())
}
