//! Sampling networks and labels from the generative model.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Interaction, InteractionNetwork, LabelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub positions: usize,
    pub nodes: usize,
    pub interactions: usize,
    pub classes: usize,
    /// K × K, sums to 1.
    pub pi: Vec<Vec<f64>>,
    /// K rows, each a distribution over the N nodes.
    pub phi: Vec<Vec<f64>>,
    /// C × K softmax weights.
    pub eta: Vec<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub network: InteractionNetwork,
    pub labels: LabelSet,
    /// Drawn (sender position, receiver position) per interaction.
    pub positions: Vec<(usize, usize)>,
}

impl GenerativeParams {
    pub fn validate(&self) -> Result<()> {
        let (k, n, c) = (self.positions, self.nodes, self.classes);
        if k == 0 || n == 0 || c == 0 || self.interactions == 0 {
            return Err(Error::invalid("K, N, I and C must all be positive"));
        }
        if self.pi.len() != k || self.pi.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("pi must be K × K"));
        }
        let pi_total: f64 = self.pi.iter().flatten().sum();
        if (pi_total - 1.0).abs() > 1e-9 || self.pi.iter().flatten().any(|&p| p < 0.0) {
            return Err(Error::invalid(format!("pi must be a distribution, sums to {pi_total}")));
        }
        if self.phi.len() != k || self.phi.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("phi must be K × N"));
        }
        for (row, p) in self.phi.iter().enumerate() {
            let total: f64 = p.iter().sum();
            if p.iter().any(|&x| x < 0.0) || !(total > 0.0) {
                return Err(Error::invalid(format!("phi row {row} is not a distribution")));
            }
        }
        if self.eta.len() != c || self.eta.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("eta must be C × K"));
        }
        Ok(())
    }
}

fn weighted(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::invalid(format!("{what}: {e}")))
}

/// Class names that sort in index order.
pub fn class_names(classes: usize) -> Vec<String> {
    let width = (classes.max(2) - 1).to_string().len();
    (0..classes).map(|c| format!("c{c:0width$}")).collect()
}

/// Draws I interactions, then one label per touched node from the softmax over
/// its realised position frequencies.
pub fn generate(params: &GenerativeParams) -> Result<Sample> {
    params.validate()?;
    let (k, n, c) = (params.positions, params.nodes, params.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let flat_pi: Vec<f64> = params.pi.iter().flatten().copied().collect();
    let pair = weighted(&flat_pi, "pi")?;
    let members = params
        .phi
        .iter()
        .enumerate()
        .map(|(row, p)| weighted(p, &format!("phi row {row}")))
        .collect::<Result<Vec<_>>>()?;

    let mut interactions = Vec::with_capacity(params.interactions);
    let mut positions = Vec::with_capacity(params.interactions);
    let mut counts = vec![0usize; n * k];
    for _ in 0..params.interactions {
        let cell = pair.sample(&mut rng);
        let (zs, zr) = (cell / k, cell % k);
        let sender = members[zs].sample(&mut rng);
        let receiver = members[zr].sample(&mut rng);
        counts[sender * k + zs] += 1;
        counts[receiver * k + zr] += 1;
        interactions.push(Interaction { sender, receiver });
        positions.push((zs, zr));
    }

    let mut labels = vec![None; n];
    let mut scores = vec![0.0; c];
    for (v, label) in labels.iter_mut().enumerate() {
        let row = &counts[v * k..(v + 1) * k];
        let n_v: usize = row.iter().sum();
        if n_v == 0 {
            continue;
        }
        for (s, eta) in scores.iter_mut().zip(&params.eta) {
            *s = eta.iter().zip(row).map(|(e, &m)| e * m as f64).sum::<f64>() / n_v as f64;
        }
        let top = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let probs: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        *label = Some(weighted(&probs, "softmax")?.sample(&mut rng));
    }

    let names = (0..n).map(|v| format!("v{v}")).collect();
    Ok(Sample {
        network: InteractionNetwork::new(names, interactions)?,
        labels: LabelSet::new(class_names(c), labels)?,
        positions,
    })
}

/// K equal node blocks; `p_in` of the pair mass on the diagonal, the rest
/// spread evenly off it; η_{c,k} = `eta_scale` when k mod C = c.
pub fn planted_partition(
    positions: usize,
    nodes: usize,
    interactions: usize,
    p_in: f64,
    classes: usize,
    eta_scale: f64,
    seed: u64,
) -> Result<GenerativeParams> {
    if !(p_in > 0.0 && p_in <= 1.0) {
        return Err(Error::invalid(format!("p_in must lie in (0, 1], got {p_in}")));
    }
    let k = positions;
    if k == 0 || nodes % k != 0 {
        return Err(Error::invalid(format!("{nodes} nodes do not split into {k} blocks")));
    }
    let (on, off) = if k == 1 {
        (1.0, 0.0)
    } else {
        (p_in / k as f64, (1.0 - p_in) / (k * k - k) as f64)
    };
    let pi = (0..k)
        .map(|a| (0..k).map(|b| if a == b { on } else { off }).collect())
        .collect();
    let block = nodes / k;
    let phi = (0..k)
        .map(|a| {
            (0..nodes)
                .map(|v| if v / block == a { 1.0 / block as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let eta = (0..classes)
        .map(|cl| (0..k).map(|a| if a % classes == cl { eta_scale } else { 0.0 }).collect())
        .collect();
    Ok(GenerativeParams {
        positions: k,
        nodes,
        interactions,
        classes,
        pi,
        phi,
        eta,
        seed,
    })
}

/// Writes `<stem>.edges`, `<stem>.labels` and `<stem>.truth.csv` into `dir`.
pub fn write_fixture(sample: &Sample, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    sample.network.write_edge_list(&dir.join(format!("{stem}.edges")))?;
    sample.labels.write_labels(&sample.network, &dir.join(format!("{stem}.labels")))?;
    let path = dir.join(format!("{stem}.truth.csv"));
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "interaction,z_s,z_r").map_err(|e| Error::io(&path, e))?;
    for (i, (zs, zr)) in sample.positions.iter().enumerate() {
        writeln!(out, "{i},{zs},{zr}").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}
