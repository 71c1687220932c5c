//! Spiking CNN inference graphs: neurons, quantized synapses, file I/O and
//! structural validation.

mod generate;
mod stats;
mod random;

pub use generate::{generate_network, generate_network_with, GenerateOptions, LayerSpec};
pub use stats::{neighbor_stats, NeighborStats, NeuronNeighbors, Summary};
pub use random::{random_dag, RandomDagOptions, Topology};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default firing threshold for non-relay neurons.
pub const DEFAULT_THRESHOLD: u32 = 64;
/// Relay neurons fire on every unit-weight input spike.
pub const RELAY_THRESHOLD: u32 = 1;
/// Weight carried by the pass-through hop of a relay.
pub const UNIT_WEIGHT: i32 = 1;
pub const DEFAULT_WEIGHT_BITS: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeuronId(pub u32);

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    Input,
    Hidden,
    Output,
    Relay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    #[default]
    ToZero,
}

impl ResetMode {
    fn is_default(&self) -> bool {
        *self == ResetMode::ToZero
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neuron {
    pub id: NeuronId,
    pub kind: NeuronKind,
    pub threshold: u32,
    #[serde(default, skip_serializing_if = "ResetMode::is_default")]
    pub reset_mode: ResetMode,
}

impl Neuron {
    pub fn new(id: u32, kind: NeuronKind, threshold: u32) -> Self {
        Neuron {
            id: NeuronId(id),
            kind,
            threshold,
            reset_mode: ResetMode::ToZero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synapse {
    pub src: NeuronId,
    pub dst: NeuronId,
    pub weight: i32,
}

impl Synapse {
    pub fn new(src: u32, dst: u32, weight: i32) -> Self {
        Synapse {
            src: NeuronId(src),
            dst: NeuronId(dst),
            weight,
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("graph has no neurons")]
    Empty,
    #[error("weight_bits must be in 2..=16, got {0}")]
    WeightBits(u8),
    #[error("duplicate neuron id {0}")]
    DuplicateNeuron(NeuronId),
    #[error("neuron {id}: threshold must be >= 1, got {threshold}")]
    Threshold { id: NeuronId, threshold: u32 },
    #[error("neuron {0}: relay neurons cannot appear in an input graph")]
    RelayNeuron(NeuronId),
    #[error("synapse {0} -> {0}: self-loop")]
    SelfLoop(NeuronId),
    #[error("synapse {src} -> {dst}: duplicate synapse")]
    DuplicateSynapse { src: NeuronId, dst: NeuronId },
    #[error("synapse {src} -> {dst}: unknown neuron {missing}")]
    DanglingSynapse {
        src: NeuronId,
        dst: NeuronId,
        missing: NeuronId,
    },
    #[error("synapse {src} -> {dst}: weight {weight} not representable in {bits} bits")]
    WeightRange {
        src: NeuronId,
        dst: NeuronId,
        weight: i32,
        bits: u8,
    },
    #[error("neuron {0}: input neuron has incoming synapses")]
    InputFanIn(NeuronId),
    #[error("graph contains a cycle through neuron {0}")]
    Cycle(NeuronId),
    #[error("generator: {0}")]
    Generator(String),
}

/// Signed range of a `bits`-wide two's complement weight.
pub fn weight_range(bits: u8) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    (-half, half - 1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphData {
    name: String,
    weight_bits: u8,
    neurons: Vec<Neuron>,
    synapses: Vec<Synapse>,
}

/// A validated feed-forward spiking neuron graph.
///
/// Synapse ids are positions in [`SdcnnGraph::synapses`]; neuron indices are
/// positions in [`SdcnnGraph::neurons`]. Both orders are preserved from the
/// source so that save/load is structurally lossless.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GraphData", into = "GraphData")]
pub struct SdcnnGraph {
    name: String,
    weight_bits: u8,
    neurons: Vec<Neuron>,
    synapses: Vec<Synapse>,
    index: HashMap<NeuronId, usize>,
    out_syn: Vec<Vec<usize>>,
    in_syn: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for SdcnnGraph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.weight_bits == other.weight_bits
            && self.neurons == other.neurons
            && self.synapses == other.synapses
    }
}

impl Eq for SdcnnGraph {}

impl TryFrom<GraphData> for SdcnnGraph {
    type Error = GraphError;

    fn try_from(d: GraphData) -> Result<Self, GraphError> {
        SdcnnGraph::new(d.name, d.weight_bits, d.neurons, d.synapses)
    }
}

impl From<SdcnnGraph> for GraphData {
    fn from(g: SdcnnGraph) -> Self {
        GraphData {
            name: g.name,
            weight_bits: g.weight_bits,
            neurons: g.neurons,
            synapses: g.synapses,
        }
    }
}

impl SdcnnGraph {
    pub fn new(
        name: impl Into<String>,
        weight_bits: u8,
        neurons: Vec<Neuron>,
        synapses: Vec<Synapse>,
    ) -> Result<Self, GraphError> {
        if neurons.is_empty() {
            return Err(GraphError::Empty);
        }
        if !(2..=16).contains(&weight_bits) {
            return Err(GraphError::WeightBits(weight_bits));
        }
        let mut index = HashMap::with_capacity(neurons.len());
        for (i, n) in neurons.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(GraphError::DuplicateNeuron(n.id));
            }
            if n.threshold < 1 {
                return Err(GraphError::Threshold {
                    id: n.id,
                    threshold: n.threshold,
                });
            }
            if n.kind == NeuronKind::Relay {
                return Err(GraphError::RelayNeuron(n.id));
            }
        }

        let (lo, hi) = weight_range(weight_bits);
        let mut seen = HashSet::with_capacity(synapses.len());
        let mut out_syn = vec![Vec::new(); neurons.len()];
        let mut in_syn = vec![Vec::new(); neurons.len()];
        for (k, s) in synapses.iter().enumerate() {
            if s.src == s.dst {
                return Err(GraphError::SelfLoop(s.src));
            }
            let src = *index.get(&s.src).ok_or(GraphError::DanglingSynapse {
                src: s.src,
                dst: s.dst,
                missing: s.src,
            })?;
            let dst = *index.get(&s.dst).ok_or(GraphError::DanglingSynapse {
                src: s.src,
                dst: s.dst,
                missing: s.dst,
            })?;
            if !seen.insert((s.src, s.dst)) {
                return Err(GraphError::DuplicateSynapse {
                    src: s.src,
                    dst: s.dst,
                });
            }
            if s.weight < lo || s.weight > hi {
                return Err(GraphError::WeightRange {
                    src: s.src,
                    dst: s.dst,
                    weight: s.weight,
                    bits: weight_bits,
                });
            }
            if neurons[dst].kind == NeuronKind::Input {
                return Err(GraphError::InputFanIn(s.dst));
            }
            out_syn[src].push(k);
            in_syn[dst].push(k);
        }

        let topo = topological_order(&neurons, &synapses, &index, &out_syn, &in_syn)?;
        Ok(SdcnnGraph {
            name: name.into(),
            weight_bits,
            neurons,
            synapses,
            index,
            out_syn,
            in_syn,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weight_bits(&self) -> u8 {
        self.weight_bits
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn index_of(&self, id: NeuronId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn neuron(&self, id: NeuronId) -> Option<&Neuron> {
        self.index_of(id).map(|i| &self.neurons[i])
    }

    /// Synapse ids leaving neuron index `i`.
    pub fn out_synapses(&self, i: usize) -> &[usize] {
        &self.out_syn[i]
    }

    /// Synapse ids entering neuron index `i`.
    pub fn in_synapses(&self, i: usize) -> &[usize] {
        &self.in_syn[i]
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_syn[i]
            .iter()
            .map(move |&k| self.index[&self.synapses[k].dst])
    }

    pub fn predecessors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_syn[i]
            .iter()
            .map(move |&k| self.index[&self.synapses[k].src])
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_syn[i].len()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_syn[i].len()
    }

    /// Neuron indices in a topological order (sources first). Ties resolve
    /// by ascending neuron id.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Ids of neurons with out-degree zero, ascending.
    pub fn sinks(&self) -> Vec<NeuronId> {
        let mut v: Vec<NeuronId> = (0..self.len())
            .filter(|&i| self.out_degree(i) == 0)
            .map(|i| self.neurons[i].id)
            .collect();
        v.sort();
        v
    }

    /// Ids of `kind == input` neurons, ascending.
    pub fn inputs(&self) -> Vec<NeuronId> {
        let mut v: Vec<NeuronId> = self
            .neurons
            .iter()
            .filter(|n| n.kind == NeuronKind::Input)
            .map(|n| n.id)
            .collect();
        v.sort();
        v
    }

    pub fn max_id(&self) -> NeuronId {
        self.neurons.iter().map(|n| n.id).max().expect("non-empty graph")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn topological_order(
    neurons: &[Neuron],
    synapses: &[Synapse],
    index: &HashMap<NeuronId, usize>,
    out_syn: &[Vec<usize>],
    in_syn: &[Vec<usize>],
) -> Result<Vec<usize>, GraphError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut pending: Vec<usize> = in_syn.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<(NeuronId, usize)>> = pending
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == 0)
        .map(|(i, _)| Reverse((neurons[i].id, i)))
        .collect();
    let mut order = Vec::with_capacity(neurons.len());
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(i);
        for &k in &out_syn[i] {
            let d = index[&synapses[k].dst];
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.push(Reverse((neurons[d].id, d)));
            }
        }
    }
    if order.len() != neurons.len() {
        let stuck = (0..neurons.len())
            .filter(|&i| pending[i] > 0)
            .map(|i| neurons[i].id)
            .min()
            .expect("cycle leaves a blocked neuron");
        return Err(GraphError::Cycle(stuck));
    }
    Ok(order)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SdcnnGraph, GraphError> {
    let text = fs::read_to_string(path)?;
    SdcnnGraph::from_json(&text)
}

pub fn save_graph(g: &SdcnnGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    fs::write(path, g.to_json() + "\n")?;
    Ok(())
}
