//! Label prediction from a fitted state, scoring, and the relational-neighbour baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::VariationalState;
use crate::network::{ClassId, InteractionNetwork, LabelSet, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub node: NodeId,
    pub predicted_class: ClassId,
    pub score_vector: Vec<f64>,
    /// Set when the node had no interactions and got the majority train class.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scores ηλ̄_v for every node, detached from the state that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub positions: usize,
    pub classes: usize,
    /// C × K row-major.
    pub eta: Vec<f64>,
    /// N × K row-major.
    pub lambda_bar: Vec<f64>,
    pub incidence: Vec<usize>,
    pub fallback_class: ClassId,
}

impl Classifier {
    pub fn from_state(state: &VariationalState, network: &InteractionNetwork, labels: &LabelSet) -> Self {
        Self {
            positions: state.positions(),
            classes: state.class_count(),
            eta: state.eta_flat().to_vec(),
            lambda_bar: state.lambda_bar(network),
            incidence: network.incidences(),
            fallback_class: labels.majority_train_class(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.incidence.len()
    }

    pub fn scores(&self, v: NodeId) -> Vec<f64> {
        let k = self.positions;
        let lb = &self.lambda_bar[v * k..(v + 1) * k];
        self.eta
            .chunks(k)
            .map(|row| row.iter().zip(lb).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn predict(&self, nodes: &[NodeId]) -> Result<Vec<Prediction>> {
        nodes
            .iter()
            .map(|&v| {
                if v >= self.node_count() {
                    return Err(Error::UnknownNodeId(v));
                }
                let score_vector = self.scores(v);
                let fallback = self.incidence[v] == 0;
                let predicted_class = if fallback {
                    self.fallback_class
                } else {
                    argmax(&score_vector)
                };
                Ok(Prediction {
                    node: v,
                    predicted_class,
                    score_vector,
                    fallback,
                })
            })
            .collect()
    }
}

/// Per-class one-vs-rest F1 averaged over all classes, plus accuracy.
///
/// A class that is neither present nor predicted scores 0.
pub fn score(predictions: &[Prediction], labels: &LabelSet) -> Result<MetricReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let c = labels.class_count();
    let mut confusion = vec![vec![0usize; c]; c];
    for p in predictions {
        let truth = labels
            .label(p.node)
            .ok_or_else(|| Error::invalid(format!("node {} has no true label", p.node)))?;
        if p.predicted_class >= c {
            return Err(Error::invalid(format!("class {} out of range", p.predicted_class)));
        }
        confusion[truth][p.predicted_class] += 1;
    }
    let per_class_f1: Vec<f64> = (0..c)
        .map(|k| {
            let tp = confusion[k][k];
            let fn_: usize = confusion[k].iter().sum::<usize>() - tp;
            let fp: usize = (0..c).map(|t| confusion[t][k]).sum::<usize>() - tp;
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .collect();
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    Ok(MetricReport {
        macro_f1: per_class_f1.iter().sum::<f64>() / c as f64,
        accuracy: correct as f64 / predictions.len() as f64,
        per_class_f1,
        confusion,
    })
}

/// Weighted-vote relational neighbour classifier with relaxation labelling.
///
/// Edges are undirected and weighted by multiplicity; self-loops carry no
/// vote. Train nodes are clamped, every other node starts at the train class
/// prior and is updated by Jacobi sweeps until the largest change is below
/// 1e-6 or `max_sweeps` is reached. Returns one prediction per node in id
/// order; nodes without neighbours get the majority train class.
pub fn wvrn(network: &InteractionNetwork, labels: &LabelSet, max_sweeps: usize) -> Vec<Prediction> {
    let n = network.node_count();
    let c = labels.class_count();
    let mut neighbours: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in network.interactions() {
        if e.sender != e.receiver {
            neighbours[e.sender].push(e.receiver);
            neighbours[e.receiver].push(e.sender);
        }
    }

    let train = labels.train_nodes();
    let mut prior = vec![0.0; c];
    for &v in &train {
        prior[labels.label(v).expect("train nodes are labelled")] += 1.0;
    }
    let total: f64 = prior.iter().sum();
    if total > 0.0 {
        prior.iter_mut().for_each(|p| *p /= total);
    } else {
        prior.iter_mut().for_each(|p| *p = 1.0 / c as f64);
    }

    let clamped: Vec<Option<ClassId>> = (0..n).map(|v| labels.train_label(v)).collect();
    let mut dist: Vec<f64> = Vec::with_capacity(n * c);
    for label in &clamped {
        match label {
            Some(y) => dist.extend((0..c).map(|k| if k == *y { 1.0 } else { 0.0 })),
            None => dist.extend_from_slice(&prior),
        }
    }

    let mut next = dist.clone();
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for v in 0..n {
            if clamped[v].is_some() || neighbours[v].is_empty() {
                continue;
            }
            let row = &mut next[v * c..(v + 1) * c];
            row.iter_mut().for_each(|x| *x = 0.0);
            for &u in &neighbours[v] {
                row.iter_mut().zip(&dist[u * c..(u + 1) * c]).for_each(|(x, y)| *x += y);
            }
            let inv = 1.0 / neighbours[v].len() as f64;
            for (x, old) in row.iter_mut().zip(&dist[v * c..(v + 1) * c]) {
                *x *= inv;
                change = change.max((*x - old).abs());
            }
        }
        std::mem::swap(&mut dist, &mut next);
        next.copy_from_slice(&dist);
        if change < 1e-6 {
            break;
        }
    }

    let majority = labels.majority_train_class();
    (0..n)
        .map(|v| {
            let score_vector = dist[v * c..(v + 1) * c].to_vec();
            let fallback = clamped[v].is_none() && neighbours[v].is_empty();
            let predicted_class = if fallback { majority } else { argmax(&score_vector) };
            Prediction {
                node: v,
                predicted_class,
                score_vector,
                fallback,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prediction(node: NodeId, class: ClassId) -> Prediction {
        Prediction {
            node,
            predicted_class: class,
            score_vector: vec![],
            fallback: false,
        }
    }

    fn classes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn three_class_hand_count() {
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 2, 2, 2];
        let labels = LabelSet::new(classes(3), truth.iter().map(|&t| Some(t)).collect()).unwrap();
        let preds: Vec<_> = pred.iter().enumerate().map(|(v, &p)| prediction(v, p)).collect();
        let m = score(&preds, &labels).unwrap();
        // class 0: tp 1, fn 1 → 2/3; class 1: tp 1, fp 1, fn 1 → 1/2; class 2: tp 2, fp 1 → 4/5
        assert_relative_eq!(m.per_class_f1[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(m.per_class_f1[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.per_class_f1[2], 0.8, epsilon = 1e-12);
        assert_eq!((m.macro_f1 * 1e4).round() / 1e4, 0.6556);
        assert_relative_eq!(m.accuracy, 4.0 / 6.0);
        assert_eq!(m.confusion.iter().flatten().sum::<usize>(), 6);
    }

    #[test]
    fn perfect_and_flipped() {
        let labels = LabelSet::new(classes(2), vec![Some(0), Some(1), Some(1)]).unwrap();
        let good: Vec<_> = [0, 1, 1].iter().enumerate().map(|(v, &p)| prediction(v, p)).collect();
        let m = score(&good, &labels).unwrap();
        assert_eq!((m.macro_f1, m.accuracy), (1.0, 1.0));
        let bad: Vec<_> = [1, 0, 0].iter().enumerate().map(|(v, &p)| prediction(v, p)).collect();
        assert_eq!(score(&bad, &labels).unwrap().macro_f1, 0.0);
        assert!(matches!(score(&[], &labels), Err(Error::EmptyPredictions)));
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let labels = LabelSet::new(classes(3), vec![Some(0), Some(1)]).unwrap();
        let preds = vec![prediction(0, 0), prediction(1, 1)];
        let m = score(&preds, &labels).unwrap();
        assert_relative_eq!(m.macro_f1, 2.0 / 3.0);
    }

    #[test]
    fn classifier_tie_break_and_fallback() {
        let clf = Classifier {
            positions: 2,
            classes: 3,
            eta: vec![0.0; 6],
            lambda_bar: vec![0.3, 0.7, 0.0, 0.0],
            incidence: vec![2, 0],
            fallback_class: 2,
        };
        let p = clf.predict(&[0, 1]).unwrap();
        assert_eq!(p[0].predicted_class, 0);
        assert!(!p[0].fallback);
        assert_eq!(p[1].predicted_class, 2);
        assert!(p[1].fallback);
        assert!(matches!(clf.predict(&[5]), Err(Error::UnknownNodeId(5))));
    }

    #[test]
    fn classifier_one_hot_argmax() {
        let clf = Classifier {
            positions: 3,
            classes: 2,
            eta: vec![0.1, 2.0, -1.0, 0.5, 1.0, 3.0],
            lambda_bar: vec![0.0, 0.0, 1.0],
            incidence: vec![4],
            fallback_class: 0,
        };
        let p = &clf.predict(&[0]).unwrap()[0];
        assert_eq!(p.score_vector, vec![-1.0, 3.0]);
        assert_eq!(p.predicted_class, 1);
    }

    #[test]
    fn wvrn_path_ties_to_lowest_class() {
        let net = InteractionNetwork::from_ids(3, &[(0, 1), (1, 2)]).unwrap();
        let labels = LabelSet::new(classes(2), vec![Some(0), Some(0), Some(1)])
            .unwrap()
            .with_masks(&[0, 2], &[1])
            .unwrap();
        let p = wvrn(&net, &labels, 100);
        assert_relative_eq!(p[1].score_vector[0], 0.5, epsilon = 1e-9);
        assert_eq!(p[1].predicted_class, 0);
    }

    #[test]
    fn wvrn_unanimous_and_isolated() {
        let net = InteractionNetwork::from_ids(5, &[(0, 2), (1, 2), (3, 3), (4, 0)]).unwrap();
        let labels = LabelSet::new(classes(2), vec![Some(1), Some(1), Some(0), Some(0), Some(0)])
            .unwrap()
            .with_masks(&[0, 1], &[2, 3])
            .unwrap();
        let p = wvrn(&net, &labels, 100);
        assert_eq!(p[2].predicted_class, 1);
        assert_eq!(p[4].predicted_class, 1);
        assert!(p[3].fallback);
        assert_eq!(p[3].predicted_class, 1);
    }
}
