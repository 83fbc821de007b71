//! Directed interaction networks and partial node labels.
//!
//! A network is an ordered list of sender/receiver interactions over densely
//! numbered nodes. Duplicate interactions and self-loops are kept: the model
//! treats every line of an edge list as one observed interaction.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ClassId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub sender: NodeId,
    pub receiver: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sender,
    Receiver,
}

/// One endpoint of one interaction. A node with `n_v` incidences owns
/// exactly `n_v` slots; a self-loop gives its node two slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub interaction: usize,
    pub role: Role,
}

impl Slot {
    /// Dense index in `0..2I`: sender slots are even, receiver slots odd.
    #[inline]
    pub fn index(&self) -> usize {
        2 * self.interaction + matches!(self.role, Role::Receiver) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionNetwork {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    interactions: Vec<Interaction>,
    slot_offsets: Vec<usize>,
    slots: Vec<Slot>,
}

/// Accumulates interactions by node name, assigning ids in first-appearance order.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    interactions: Vec<Interaction>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node without an interaction (it will have `n_v = 0`).
    pub fn add_node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn add_interaction(&mut self, sender: &str, receiver: &str) {
        let sender = self.add_node(sender);
        let receiver = self.add_node(receiver);
        self.interactions.push(Interaction { sender, receiver });
    }

    pub fn build(self) -> Result<InteractionNetwork> {
        InteractionNetwork::new(self.names, self.interactions)
    }
}

impl InteractionNetwork {
    pub fn new(names: Vec<String>, interactions: Vec<Interaction>) -> Result<Self> {
        if names.is_empty() || interactions.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let n = names.len();
        let mut index = HashMap::with_capacity(n);
        for (id, name) in names.iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(Error::invalid(format!("duplicate node name `{name}`")));
            }
        }
        let mut counts = vec![0usize; n];
        for (i, e) in interactions.iter().enumerate() {
            if e.sender >= n || e.receiver >= n {
                return Err(Error::invalid(format!(
                    "interaction {i} references node outside 0..{n}"
                )));
            }
            counts[e.sender] += 1;
            counts[e.receiver] += 1;
        }
        let mut slot_offsets = Vec::with_capacity(n + 1);
        slot_offsets.push(0);
        for c in &counts {
            slot_offsets.push(slot_offsets.last().unwrap() + c);
        }
        let mut fill = slot_offsets[..n].to_vec();
        let mut slots = vec![
            Slot {
                interaction: 0,
                role: Role::Sender
            };
            2 * interactions.len()
        ];
        for (i, e) in interactions.iter().enumerate() {
            slots[fill[e.sender]] = Slot {
                interaction: i,
                role: Role::Sender,
            };
            fill[e.sender] += 1;
            slots[fill[e.receiver]] = Slot {
                interaction: i,
                role: Role::Receiver,
            };
            fill[e.receiver] += 1;
        }
        Ok(Self {
            names,
            index,
            interactions,
            slot_offsets,
            slots,
        })
    }

    /// Nodes named by their decimal id, for generated fixtures.
    pub fn from_ids(node_count: usize, pairs: &[(NodeId, NodeId)]) -> Result<Self> {
        let names = (0..node_count).map(|v| v.to_string()).collect();
        let interactions = pairs
            .iter()
            .map(|&(sender, receiver)| Interaction { sender, receiver })
            .collect();
        Self::new(names, interactions)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn interaction_count(&self) -> usize {
        self.interactions.len()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn interaction(&self, i: usize) -> Interaction {
        self.interactions[i]
    }

    /// `n_v`: the number of interaction endpoints at `v`.
    #[inline]
    pub fn incidence(&self, v: NodeId) -> usize {
        self.slot_offsets[v + 1] - self.slot_offsets[v]
    }

    pub fn incidences(&self) -> Vec<usize> {
        (0..self.node_count()).map(|v| self.incidence(v)).collect()
    }

    /// Endpoint slots of `v`, in interaction order.
    #[inline]
    pub fn slots(&self, v: NodeId) -> &[Slot] {
        &self.slots[self.slot_offsets[v]..self.slot_offsets[v + 1]]
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    /// Inserts every interaction a second time, reversed, after the originals.
    pub fn symmetrized(&self) -> Self {
        let mut interactions = self.interactions.clone();
        interactions.extend(self.interactions.iter().map(|e| Interaction {
            sender: e.receiver,
            receiver: e.sender,
        }));
        Self::new(self.names.clone(), interactions).expect("valid by construction")
    }

    /// Writes `src<TAB>dst` lines in interaction order.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.interactions {
            writeln!(out, "{}\t{}", self.names[e.sender], self.names[e.receiver])
                .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn data_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter_map(move |(no, line)| match line {
            Err(e) => Some(Err(Error::io(path, e))),
            Ok(line) => {
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((no + 1, trimmed.to_string())))
                }
            }
        }))
}

fn two_fields(path: &Path, line_no: usize, line: &str) -> Result<(String, String)> {
    let mut fields = line.split_whitespace();
    match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) => Ok((a.to_string(), b.to_string())),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("expected two fields, got `{line}`"),
        }),
    }
}

/// Reads a whitespace-separated edge list. With `directed == false` every
/// edge is also inserted reversed; reversed copies follow the originals.
pub fn load_edge_list(path: &Path, directed: bool) -> Result<InteractionNetwork> {
    let mut builder = NetworkBuilder::new();
    for item in data_lines(path)? {
        let (no, line) = item?;
        let (src, dst) = two_fields(path, no, &line)?;
        builder.add_interaction(&src, &dst);
    }
    if builder.interactions.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let network = builder.build()?;
    Ok(if directed {
        network
    } else {
        network.symmetrized()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Unassigned,
    Train,
    Test,
}

/// Partial node labels plus the train/test assignment of labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    class_names: Vec<String>,
    labels: Vec<Option<ClassId>>,
    membership: Vec<Membership>,
}

impl LabelSet {
    pub fn new(class_names: Vec<String>, labels: Vec<Option<ClassId>>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::invalid("label set needs at least one class"));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= class_names.len()) {
            return Err(Error::invalid(format!(
                "class index {bad} outside 0..{}",
                class_names.len()
            )));
        }
        let membership = vec![Membership::Unassigned; labels.len()];
        Ok(Self {
            class_names,
            labels,
            membership,
        })
    }

    /// Assigns masks explicitly; both sets must be labelled and disjoint.
    pub fn with_masks(mut self, train: &[NodeId], test: &[NodeId]) -> Result<Self> {
        self.membership.iter_mut().for_each(|m| *m = Membership::Unassigned);
        for (nodes, role) in [(train, Membership::Train), (test, Membership::Test)] {
            for &v in nodes {
                match self.labels.get(v) {
                    None => return Err(Error::UnknownNodeId(v)),
                    Some(None) => {
                        return Err(Error::invalid(format!("node {v} has no label")));
                    }
                    Some(Some(_)) => {}
                }
                if self.membership[v] != Membership::Unassigned {
                    return Err(Error::invalid(format!("node {v} assigned twice")));
                }
                self.membership[v] = role;
            }
        }
        Ok(self)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, v: NodeId) -> Option<ClassId> {
        self.labels.get(v).copied().flatten()
    }

    pub fn membership(&self, v: NodeId) -> Membership {
        self.membership[v]
    }

    /// The label of `v` if it is a training node.
    #[inline]
    pub fn train_label(&self, v: NodeId) -> Option<ClassId> {
        match self.membership[v] {
            Membership::Train => self.labels[v],
            _ => None,
        }
    }

    pub fn labelled(&self) -> Vec<NodeId> {
        (0..self.labels.len())
            .filter(|&v| self.labels[v].is_some())
            .collect()
    }

    pub fn train_nodes(&self) -> Vec<NodeId> {
        self.nodes_with(Membership::Train)
    }

    pub fn test_nodes(&self) -> Vec<NodeId> {
        self.nodes_with(Membership::Test)
    }

    fn nodes_with(&self, m: Membership) -> Vec<NodeId> {
        (0..self.membership.len())
            .filter(|&v| self.membership[v] == m)
            .collect()
    }

    /// Most frequent class among training nodes; lowest index wins ties.
    pub fn majority_train_class(&self) -> ClassId {
        let mut counts = vec![0usize; self.class_count()];
        for v in self.train_nodes() {
            counts[self.labels[v].unwrap()] += 1;
        }
        argmax_usize(&counts)
    }

    /// A copy with every labelled node moved to the training mask.
    pub fn all_train(&self) -> Self {
        let mut out = self.clone();
        for v in 0..out.labels.len() {
            out.membership[v] = if out.labels[v].is_some() {
                Membership::Train
            } else {
                Membership::Unassigned
            };
        }
        out
    }

    /// Seeded random train/test split of the labelled nodes.
    ///
    /// `floor(train_fraction * |labelled|)` nodes go to training. Any class
    /// with at least two labelled nodes is guaranteed one training node
    /// whenever the training budget allows, by swapping out a node of a
    /// class that already has two or more training nodes.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<LabelSet> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let mut order = self.labelled();
        if order.is_empty() {
            return Err(Error::invalid("no labelled nodes to split"));
        }
        let budget = (train_fraction * order.len() as f64).floor() as usize;
        if budget == 0 {
            return Err(Error::invalid(format!(
                "train fraction {train_fraction} selects no node out of {}",
                order.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let (mut train, mut test) = {
            let (a, b) = order.split_at(budget);
            (a.to_vec(), b.to_vec())
        };

        let c = self.class_count();
        let class_of = |v: NodeId| self.labels[v].unwrap();
        let mut train_count = vec![0usize; c];
        let mut total = vec![0usize; c];
        for &v in &train {
            train_count[class_of(v)] += 1;
        }
        for &v in train.iter().chain(&test) {
            total[class_of(v)] += 1;
        }
        for class in 0..c {
            if total[class] < 2 || train_count[class] > 0 {
                continue;
            }
            let Some(donor) = train.iter().rposition(|&v| train_count[class_of(v)] >= 2) else {
                break;
            };
            let Some(recruit) = test.iter().position(|&v| class_of(v) == class) else {
                continue;
            };
            train_count[class_of(train[donor])] -= 1;
            train_count[class] += 1;
            std::mem::swap(&mut train[donor], &mut test[recruit]);
        }
        train.sort_unstable();
        test.sort_unstable();
        self.clone().with_masks(&train, &test)
    }

    /// Writes the `node,role` manifest for every labelled node.
    pub fn write_split_manifest(&self, network: &InteractionNetwork, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "node,role").map_err(|e| Error::io(path, e))?;
        for v in 0..self.membership.len() {
            let role = match self.membership[v] {
                Membership::Train => "train",
                Membership::Test => "test",
                Membership::Unassigned => continue,
            };
            writeln!(out, "{},{role}", network.name(v)).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `node<TAB>class` for every labelled node.
    pub fn write_labels(&self, network: &InteractionNetwork, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for v in 0..self.labels.len() {
            if let Some(c) = self.labels[v] {
                writeln!(out, "{}\t{}", network.name(v), self.class_names[c])
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn argmax_usize(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate() {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Reads `node<TAB>class` lines. The class universe is the sorted set of
/// class names; masks start empty.
pub fn load_labels(path: &Path, network: &InteractionNetwork) -> Result<LabelSet> {
    read_labels(path, network.node_count(), |name| network.id(name))
}

/// As [`load_labels`], resolving node names against a bare name list.
pub fn load_labels_for_names(path: &Path, names: &[String]) -> Result<LabelSet> {
    let index: HashMap<&str, NodeId> = names.iter().enumerate().map(|(v, n)| (n.as_str(), v)).collect();
    read_labels(path, names.len(), |name| index.get(name).copied())
}

fn read_labels(
    path: &Path,
    node_count: usize,
    resolve: impl Fn(&str) -> Option<NodeId>,
) -> Result<LabelSet> {
    let mut raw: Vec<Option<String>> = vec![None; node_count];
    for item in data_lines(path)? {
        let (no, line) = item?;
        let (node, class) = two_fields(path, no, &line)?;
        let v = resolve(&node).ok_or_else(|| Error::UnknownNode(node.clone()))?;
        match &raw[v] {
            Some(prev) if *prev != class => {
                return Err(Error::ConflictingLabel {
                    node,
                    first: prev.clone(),
                    second: class,
                });
            }
            _ => raw[v] = Some(class),
        }
    }
    let classes: Vec<String> = raw
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.is_empty() {
        return Err(Error::invalid(format!("{}: no labels", path.display())));
    }
    let labels = raw
        .iter()
        .map(|r| {
            r.as_ref()
                .map(|name| classes.binary_search(name).expect("present"))
        })
        .collect();
    LabelSet::new(classes, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn duplicates_are_kept() {
        let f = file_with("a b\na b\n");
        let net = load_edge_list(f.path(), true).unwrap();
        assert_eq!(net.interaction_count(), 2);
        assert_eq!(net.incidence(net.id("a").unwrap()), 2);
        assert_eq!(net.incidence(net.id("b").unwrap()), 2);
    }

    #[test]
    fn undirected_inserts_reverse() {
        let f = file_with("a\tb\n");
        let net = load_edge_list(f.path(), false).unwrap();
        let (a, b) = (net.id("a").unwrap(), net.id("b").unwrap());
        assert_eq!(
            net.interactions(),
            &[
                Interaction { sender: a, receiver: b },
                Interaction { sender: b, receiver: a }
            ]
        );
    }

    #[test]
    fn self_loop_counts_twice() {
        let f = file_with("a a\na b\n");
        let net = load_edge_list(f.path(), true).unwrap();
        let a = net.id("a").unwrap();
        assert_eq!(net.incidence(a), 3);
        assert_eq!(net.slots(a).len(), 3);
        assert_eq!(net.incidences().iter().sum::<usize>(), 4);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let f = file_with("# header\n\na b\n  # indented comment\nb c\n");
        let net = load_edge_list(f.path(), true).unwrap();
        assert_eq!(net.interaction_count(), 2);
        assert_eq!(net.names(), &["a", "b", "c"]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = file_with("# nothing here\n");
        assert!(matches!(
            load_edge_list(f.path(), true),
            Err(Error::EmptyNetwork)
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = file_with("a b\nb\n");
        match load_edge_list(f.path(), true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let f = file_with("a b c\n");
        assert!(matches!(
            load_edge_list(f.path(), true),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn labels_sorted_and_validated() {
        let net = load_edge_list(file_with("a b\nb c\n").path(), true).unwrap();
        let labels = load_labels(file_with("c\tz\na\ty\na\ty\n").path(), &net).unwrap();
        assert_eq!(labels.class_names(), &["y", "z"]);
        assert_eq!(labels.label(net.id("a").unwrap()), Some(0));
        assert_eq!(labels.label(net.id("b").unwrap()), None);
        assert_eq!(labels.labelled().len(), 2);

        assert!(matches!(
            load_labels(file_with("q x\n").path(), &net),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            load_labels(file_with("a x\na y\n").path(), &net),
            Err(Error::ConflictingLabel { .. })
        ));
    }

    fn labelled(n: usize, classes: usize) -> LabelSet {
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        LabelSet::new(names, (0..n).map(|v| Some(v % classes)).collect()).unwrap()
    }

    #[test]
    fn split_sizes_follow_floor() {
        let labels = labelled(112, 2);
        let s = labels.split(2.0 / 3.0, 3).unwrap();
        assert_eq!(s.train_nodes().len(), 74);
        assert_eq!(s.test_nodes().len(), 38);
    }

    #[test]
    fn split_is_deterministic_and_a_partition() {
        let labels = labelled(50, 3);
        let a = labels.split(0.4, 11).unwrap();
        let b = labels.split(0.4, 11).unwrap();
        assert_eq!(a, b);
        let c = labels.split(0.4, 12).unwrap();
        assert_ne!(a.train_nodes(), c.train_nodes());
        let mut all: Vec<_> = a.train_nodes().into_iter().chain(a.test_nodes()).collect();
        all.sort_unstable();
        assert_eq!(all, labels.labelled());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let labels = labelled(10, 2);
        assert!(labels.split(0.0, 1).is_err());
        assert!(labels.split(1.0, 1).is_err());
        assert!(labels.split(f64::NAN, 1).is_err());
        assert!(labels.split(0.05, 1).is_err());
    }

    #[test]
    fn stratified_floor_covers_rare_classes() {
        // 200 nodes of class 0, three of class 1, two of class 2: a 5% split
        // draws 10 nodes and would usually miss the rare classes.
        let mut raw = vec![Some(0); 200];
        raw.extend([Some(1), Some(1), Some(1), Some(2), Some(2)]);
        let labels =
            LabelSet::new(vec!["a".into(), "b".into(), "c".into()], raw).unwrap();
        for seed in 0..25 {
            let s = labels.split(0.05, seed).unwrap();
            assert_eq!(s.train_nodes().len(), 10);
            for class in 0..3 {
                assert!(s.train_nodes().iter().any(|&v| s.label(v) == Some(class)));
            }
        }
    }

    #[test]
    fn masks_must_be_disjoint_and_labelled() {
        let labels = LabelSet::new(vec!["x".into()], vec![Some(0), None, Some(0)]).unwrap();
        assert!(labels.clone().with_masks(&[0], &[0]).is_err());
        assert!(labels.clone().with_masks(&[1], &[]).is_err());
        assert!(labels.clone().with_masks(&[9], &[]).is_err());
        let ok = labels.with_masks(&[0], &[2]).unwrap();
        assert_eq!(ok.train_label(0), Some(0));
        assert_eq!(ok.train_label(2), None);
    }

    #[test]
    fn edge_list_round_trip() {
        let net = load_edge_list(file_with("x y\ny z\nz z\nx y\n").path(), true).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        net.write_edge_list(out.path()).unwrap();
        let again = load_edge_list(out.path(), true).unwrap();
        assert_eq!(net, again);
    }
}
