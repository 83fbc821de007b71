use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use super::config::{FitMode, InitMode, ModelConfig};
use super::mstep::m_step_counts;
use crate::error::{Error, Result};
use crate::network::{InteractionNetwork, LabelSet, NodeId, Role, Slot};

/// Variational parameters of the factored posterior plus the softmax weights.
///
/// Layouts: `lambda` is I × K² with cell `k1 * K + k2` for (sender position,
/// receiver position); `zeta` is stored node-major (N × K); `omega` is K × K;
/// `eta` is C × K.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub(crate) k: usize,
    pub(crate) classes: usize,
    pub(crate) nodes: usize,
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
    pub(crate) lambda: Vec<f64>,
    /// −Σ λ log λ per interaction, refreshed whenever λ_i changes.
    pub(crate) entropy: Vec<f64>,
    pub(crate) zeta: Vec<f64>,
    pub(crate) omega: Vec<f64>,
    pub(crate) eta: Vec<f64>,
    pub(crate) cache: LogFactorCache,
}

/// Per-class log factors log Σ_k λ_{v,k} exp(η_{c,k} / n_v) for every slot of
/// a supervised node, and their per-node sums S_{v,c}.
#[derive(Debug, Clone, PartialEq)]
pub struct LogFactorCache {
    classes: usize,
    active: Vec<bool>,
    slot_log: Vec<f64>,
    node_sum: Vec<f64>,
}

impl LogFactorCache {
    fn new(network: &InteractionNetwork, labels: &LabelSet, config: &ModelConfig) -> Self {
        let classes = labels.class_count();
        let active = (0..network.node_count())
            .map(|v| {
                config.mode == FitMode::Supervised
                    && labels.train_label(v).is_some()
                    && network.incidence(v) > 0
            })
            .collect();
        Self {
            classes,
            active,
            slot_log: vec![0.0; 2 * network.interaction_count() * classes],
            node_sum: vec![0.0; network.node_count() * classes],
        }
    }

    /// Whether `v`'s label enters the E-step.
    #[inline]
    pub fn is_active(&self, v: NodeId) -> bool {
        self.active[v]
    }

    pub fn has_active(&self) -> bool {
        self.active.iter().any(|&a| a)
    }

    #[inline]
    pub fn node_sum(&self, v: NodeId) -> &[f64] {
        &self.node_sum[v * self.classes..(v + 1) * self.classes]
    }

    #[inline]
    pub fn slot_log(&self, slot: usize) -> &[f64] {
        &self.slot_log[slot * self.classes..(slot + 1) * self.classes]
    }

    /// Replaces one slot's factors and adjusts the node sums additively.
    pub(crate) fn replace_slot(&mut self, v: NodeId, slot: usize, fresh: &[f64]) {
        let c = self.classes;
        for class in 0..c {
            let old = self.slot_log[slot * c + class];
            self.node_sum[v * c + class] += fresh[class] - old;
            self.slot_log[slot * c + class] = fresh[class];
        }
    }

    fn set_node(&mut self, v: NodeId, sums: &[f64]) {
        let c = self.classes;
        self.node_sum[v * c..(v + 1) * c].copy_from_slice(sums);
    }

    fn set_slot(&mut self, slot: usize, logs: &[f64]) {
        let c = self.classes;
        self.slot_log[slot * c..(slot + 1) * c].copy_from_slice(logs);
    }
}

/// exp(η_{c,k}/n_v − m_c) with per-class offsets m_c = max_k η_{c,k}/n_v.
pub(crate) struct ScaledEta {
    pub k: usize,
    pub classes: usize,
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl ScaledEta {
    pub fn new(eta: &[f64], classes: usize, k: usize, incidence: usize) -> Self {
        let inv = 1.0 / incidence as f64;
        let mut weights = vec![0.0; classes * k];
        let mut offsets = vec![0.0; classes];
        for c in 0..classes {
            let row = &eta[c * k..(c + 1) * k];
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * inv));
            offsets[c] = m;
            for (w, &e) in weights[c * k..(c + 1) * k].iter_mut().zip(row) {
                *w = (e * inv - m).exp();
            }
        }
        Self {
            k,
            classes,
            weights,
            offsets,
        }
    }

    /// Per-class log Σ_k marginal_k · exp(η_{c,k}/n_v).
    pub fn log_factors(&self, marginal: &[f64], out: &mut [f64]) {
        for c in 0..self.classes {
            let w = &self.weights[c * self.k..(c + 1) * self.k];
            let t: f64 = w.iter().zip(marginal).map(|(a, b)| a * b).sum();
            out[c] = t.ln() + self.offsets[c];
        }
    }
}

impl VariationalState {
    pub fn positions(&self) -> usize {
        self.k
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn interaction_count(&self) -> usize {
        self.entropy.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// λ_i as a K² vector, cell `k1 * K + k2`.
    pub fn lambda(&self, i: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.lambda[i * kk..(i + 1) * kk]
    }

    pub fn zeta(&self, k: usize, v: NodeId) -> f64 {
        self.zeta[v * self.k + k]
    }

    pub fn omega(&self, k1: usize, k2: usize) -> f64 {
        self.omega[k1 * self.k + k2]
    }

    pub fn eta(&self, c: usize, k: usize) -> f64 {
        self.eta[c * self.k + k]
    }

    /// η as a flat C × K row-major slice.
    pub fn eta_flat(&self) -> &[f64] {
        &self.eta
    }

    pub fn set_eta(&mut self, network: &InteractionNetwork, eta: Vec<f64>) -> Result<()> {
        if eta.len() != self.classes * self.k {
            return Err(Error::invalid(format!(
                "eta needs {} entries, got {}",
                self.classes * self.k,
                eta.len()
            )));
        }
        self.eta = eta;
        self.rebuild_cache(network);
        Ok(())
    }

    pub fn cache(&self) -> &LogFactorCache {
        &self.cache
    }

    pub fn omega_matrix(&self) -> Vec<Vec<f64>> {
        self.omega.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn eta_matrix(&self) -> Vec<Vec<f64>> {
        self.eta.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Marginal over the position of the given endpoint of interaction `i`.
    pub fn marginal(&self, i: usize, role: Role) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        marginal_into(self.lambda(i), self.k, role, &mut out);
        out
    }

    /// λ̄_v: the average endpoint marginal over all slots of v (zeros when n_v = 0).
    pub fn lambda_bar(&self, network: &InteractionNetwork) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; self.nodes * k];
        let mut m = vec![0.0; k];
        for v in 0..self.nodes {
            let slots = network.slots(v);
            if slots.is_empty() {
                continue;
            }
            let row = &mut out[v * k..(v + 1) * k];
            for s in slots {
                marginal_into(self.lambda(s.interaction), k, s.role, &mut m);
                row.iter_mut().zip(&m).for_each(|(a, b)| *a += b);
            }
            let inv = 1.0 / slots.len() as f64;
            row.iter_mut().for_each(|a| *a *= inv);
        }
        out
    }

    /// Expected position-pair distribution: ω / Σω.
    pub fn pi_hat(&self) -> Vec<Vec<f64>> {
        let total: f64 = self.omega.iter().sum();
        self.omega
            .chunks(self.k)
            .map(|row| row.iter().map(|w| w / total).collect())
            .collect()
    }

    /// Expected node distribution of every position (K rows of length N).
    pub fn phi_hat(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|k| {
                let total: f64 = (0..self.nodes).map(|v| self.zeta(k, v)).sum();
                (0..self.nodes).map(|v| self.zeta(k, v) / total).collect()
            })
            .collect()
    }

    /// Recomputes every cached log factor from λ and η.
    pub fn rebuild_cache(&mut self, network: &InteractionNetwork) {
        let (k, c) = (self.k, self.classes);
        let mut marginal = vec![0.0; k];
        let mut logs = vec![0.0; c];
        let mut sums = vec![0.0; c];
        for v in 0..self.nodes {
            if !self.cache.is_active(v) {
                continue;
            }
            let scaled = ScaledEta::new(&self.eta, c, k, network.incidence(v));
            sums.iter_mut().for_each(|s| *s = 0.0);
            for slot in network.slots(v) {
                marginal_into(self.lambda(slot.interaction), k, slot.role, &mut marginal);
                scaled.log_factors(&marginal, &mut logs);
                self.cache.set_slot(slot.index(), &logs);
                sums.iter_mut().zip(&logs).for_each(|(s, l)| *s += l);
            }
            self.cache.set_node(v, &sums);
        }
    }

    /// Relabels positions: position `k` of `self` becomes `perm[k]` of the result.
    pub fn permute_positions(&self, network: &InteractionNetwork, perm: &[usize]) -> Result<Self> {
        let k = self.k;
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the positions"));
        }
        let mut out = self.clone();
        let kk = k * k;
        for i in 0..self.interaction_count() {
            let (src, dst) = (&self.lambda[i * kk..(i + 1) * kk], &mut out.lambda[i * kk..(i + 1) * kk]);
            for a in 0..k {
                for b in 0..k {
                    dst[perm[a] * k + perm[b]] = src[a * k + b];
                }
            }
        }
        for v in 0..self.nodes {
            for a in 0..k {
                out.zeta[v * k + perm[a]] = self.zeta[v * k + a];
            }
        }
        for a in 0..k {
            for b in 0..k {
                out.omega[perm[a] * k + perm[b]] = self.omega[a * k + b];
            }
        }
        for c in 0..self.classes {
            for a in 0..k {
                out.eta[c * k + perm[a]] = self.eta[c * k + a];
            }
        }
        out.rebuild_cache(network);
        Ok(out)
    }

    /// Checks the structural invariants: normalised λ_i and posterior counts at
    /// or above their priors.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let kk = self.k * self.k;
        for (i, cell) in self.lambda.chunks(kk).enumerate() {
            let s: f64 = cell.iter().sum();
            if (s - 1.0).abs() > tol || cell.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::Internal(format!("lambda_{i} sums to {s}")));
            }
        }
        if self.zeta.iter().any(|&z| !(z >= self.beta)) {
            return Err(Error::Internal("zeta below beta".into()));
        }
        if self.omega.iter().any(|&w| !(w >= self.alpha)) {
            return Err(Error::Internal("omega below alpha".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn marginal_into(cell: &[f64], k: usize, role: Role, out: &mut [f64]) {
    match role {
        Role::Sender => {
            for (k1, o) in out.iter_mut().enumerate() {
                *o = cell[k1 * k..(k1 + 1) * k].iter().sum();
            }
        }
        Role::Receiver => {
            out.iter_mut().for_each(|o| *o = 0.0);
            for row in cell.chunks(k) {
                out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
            }
        }
    }
}

pub(crate) fn entropy_of(cell: &[f64]) -> f64 {
    -cell
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Random λ (symmetric Dirichlet per interaction) and η (uniform), then ζ
/// and ω from one M-step. In comm mode ω is replaced by the assortative seed.
pub fn init_state(
    network: &InteractionNetwork,
    labels: &LabelSet,
    config: &ModelConfig,
) -> Result<VariationalState> {
    config.validate()?;
    if labels.node_count() != network.node_count() {
        return Err(Error::invalid(format!(
            "label set covers {} nodes, network has {}",
            labels.node_count(),
            network.node_count()
        )));
    }
    let k = config.positions;
    let kk = k * k;
    let classes = labels.class_count();
    let interactions = network.interaction_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let gamma = Gamma::new(config.lambda_concentration(), 1.0)
        .map_err(|e| Error::invalid(format!("initial λ concentration: {e}")))?;
    let mut lambda = vec![0.0; interactions * kk];
    for cell in lambda.chunks_mut(kk) {
        if kk == 1 {
            cell[0] = 1.0;
            continue;
        }
        let mut total = 0.0;
        for x in cell.iter_mut() {
            let draw: f64 = rng.sample(gamma);
            *x = draw.max(f64::MIN_POSITIVE);
            total += *x;
        }
        cell.iter_mut().for_each(|x| *x /= total);
    }
    let scale = config.init_eta_scale;
    let eta = (0..classes * k).map(|_| rng.random_range(-scale..scale)).collect();
    let entropy = lambda.chunks(kk).map(entropy_of).collect();

    let mut state = VariationalState {
        k,
        classes,
        nodes: network.node_count(),
        alpha: config.alpha,
        beta: config.beta_for(classes),
        lambda,
        entropy,
        zeta: vec![0.0; network.node_count() * k],
        omega: vec![0.0; kk],
        eta,
        cache: LogFactorCache::new(network, labels, config),
    };
    m_step_counts(&mut state, network);
    if config.init_mode == InitMode::Comm {
        let diag = interactions as f64 / k as f64 + config.alpha;
        for k1 in 0..k {
            for k2 in 0..k {
                state.omega[k1 * k + k2] = if k1 == k2 { diag } else { config.alpha };
            }
        }
    }
    state.rebuild_cache(network);
    Ok(state)
}

/// Brute-force h_{i,v}: the product over v's other slots, without the cache.
/// Test oracle for the cached computation.
pub fn h_direct(
    state: &VariationalState,
    network: &InteractionNetwork,
    slot: Slot,
    v: NodeId,
) -> Vec<f64> {
    let (k, classes) = (state.k, state.classes);
    let n_v = network.incidence(v) as f64;
    let mut h = vec![0.0; k];
    for c in 0..classes {
        let mut product = 1.0;
        for other in network.slots(v) {
            if *other == slot {
                continue;
            }
            let m = state.marginal(other.interaction, other.role);
            product *= (0..k)
                .map(|kk| m[kk] * (state.eta(c, kk) / n_v).exp())
                .sum::<f64>();
        }
        for (kk, hk) in h.iter_mut().enumerate() {
            *hk += (state.eta(c, kk) / n_v).exp() * product;
        }
    }
    h
}
