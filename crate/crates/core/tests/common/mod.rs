#![allow(dead_code)]

use std::path::PathBuf;

use sbsn::inference::{FitMode, ModelConfig, VariationalState};
use sbsn::network::{InteractionNetwork, LabelSet};
use sbsn::synth::{generate, planted_partition, Sample};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn class_names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("c{i}")).collect()
}

/// Small labelled network from explicit pairs; `labels[v]` of `None` leaves v unlabelled.
pub fn toy(n: usize, pairs: &[(usize, usize)], classes: usize, labels: &[Option<usize>]) -> (InteractionNetwork, LabelSet) {
    let net = InteractionNetwork::from_ids(n, pairs).expect("valid toy network");
    let labels = LabelSet::new(class_names(classes), labels.to_vec()).expect("valid toy labels");
    (net, labels)
}

/// Two equal assortative blocks, labels tied to the block.
pub fn planted(nodes: usize, interactions: usize, seed: u64) -> Sample {
    let params = planted_partition(2, nodes, interactions, 0.9, 2, 4.0, seed).expect("valid parameters");
    generate(&params).expect("sample")
}

/// Fraction of nodes whose argmax position matches their planted block, under
/// the better of the two position labellings.
pub fn two_block_agreement(state: &VariationalState, nodes: usize) -> f64 {
    let phi = state.phi_hat();
    let block = nodes / 2;
    let same = (0..nodes)
        .filter(|&v| usize::from(phi[1][v] > phi[0][v]) == v / block)
        .count();
    same.max(nodes - same) as f64 / nodes as f64
}

pub fn config(k: usize, mode: FitMode, seed: u64) -> ModelConfig {
    ModelConfig::new(k).with_mode(mode).with_seed(seed)
}

/// Σ_k ζ_{k,v} over all nodes and Σ ω.
pub fn posterior_totals(state: &VariationalState) -> (f64, f64) {
    let k = state.positions();
    let zeta: f64 = (0..state.node_count())
        .flat_map(|v| (0..k).map(move |a| (a, v)))
        .map(|(a, v)| state.zeta(a, v))
        .sum();
    let omega: f64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| state.omega(a, b)).sum();
    (zeta, omega)
}
