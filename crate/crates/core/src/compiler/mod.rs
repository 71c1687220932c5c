//! Partitioning of an SDCNN graph into core-sized three-layer sub-networks.

mod check;
mod distance;
mod merge;
mod profile;
mod subnet;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NeuronId, SdcnnGraph, Synapse};
use crate::hardware::{
    fit_config, Backend, CoreConfig, CostModel, Footprint, HardwareError, RelayPolicy,
};

pub use check::check_dfg;
pub use distance::{index_neurons, longest_path_distances, Distances, Residual, LARGE};
pub use merge::{merge_cost, MergeCost};
pub use profile::{profile_channels, ExecTimeModel};
pub use subnet::{create_subnet, insert_relays};

use subnet::{build_part, Part};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("sink {0} is not in the residual graph")]
    SinkNotLive(NeuronId),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error("graph has no neurons")]
    EmptyGraph,
    #[error("invalid dataflow graph: {0}")]
    Invariant(String),
    #[error("stimulus references {0}, which is not an input neuron")]
    UnknownInput(NeuronId),
    #[error("cannot read dataflow graph: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataflow graph: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubNetwork {
    pub id: usize,
    pub l2: BTreeSet<NeuronId>,
    pub l1: BTreeSet<NeuronId>,
    pub l0: BTreeSet<NeuronId>,
    pub internal_synapses: Vec<Synapse>,
    pub relay_neurons: BTreeSet<NeuronId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_config: Option<CoreConfig>,
}

impl SubNetwork {
    pub fn empty(id: usize) -> Self {
        SubNetwork {
            id,
            l2: BTreeSet::new(),
            l1: BTreeSet::new(),
            l0: BTreeSet::new(),
            internal_synapses: Vec::new(),
            relay_neurons: BTreeSet::new(),
            assigned_config: None,
        }
    }

    pub fn layer(&self, l: u8) -> &BTreeSet<NeuronId> {
        match l {
            0 => &self.l0,
            1 => &self.l1,
            2 => &self.l2,
            _ => panic!("layer {l} out of range"),
        }
    }

    pub fn layer_mut(&mut self, l: u8) -> &mut BTreeSet<NeuronId> {
        match l {
            0 => &mut self.l0,
            1 => &mut self.l1,
            2 => &mut self.l2,
            _ => panic!("layer {l} out of range"),
        }
    }

    pub fn layer_of(&self, id: NeuronId) -> Option<u8> {
        (0..3u8).find(|&l| self.layer(l).contains(&id))
    }

    pub fn neuron_count(&self) -> usize {
        self.l0.len() + self.l1.len() + self.l2.len()
    }

    pub fn neurons(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.l2.iter().chain(&self.l1).chain(&self.l0).copied()
    }

    /// Neurons of the input graph, relays excluded.
    pub fn original_neurons(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.neurons().filter(|n| !self.relay_neurons.contains(n))
    }

    pub fn footprint(&self) -> Footprint {
        Footprint {
            l2: self.l2.len() as u64,
            l1: self.l1.len() as u64,
            l0: self.l0.len() as u64,
            synapses: self.internal_synapses.len() as u64,
        }
    }
}

/// Spikes from one sub-network to another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub src_subnet: usize,
    pub dst_subnet: usize,
    pub synapses: Vec<Synapse>,
    #[serde(default)]
    pub profiled_spike_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataflowGraph {
    pub name: String,
    pub backend: Backend,
    pub relay_policy: RelayPolicy,
    /// Content hash of the graph this was compiled from.
    pub source_hash: String,
    pub subnets: Vec<SubNetwork>,
    pub channels: Vec<Channel>,
    /// Per-subnet execution time per image, in picoseconds.
    pub exec_times: Vec<u64>,
    /// Batch size of the profiling run, 0 before profiling.
    #[serde(default)]
    pub profiled_images: u64,
}

impl DataflowGraph {
    pub fn len(&self) -> usize {
        self.subnets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subnets.is_empty()
    }

    /// Distinct predecessor subnets, sorted.
    pub fn predecessors(&self, i: usize) -> Vec<usize> {
        let v: BTreeSet<usize> = self
            .channels
            .iter()
            .filter(|c| c.dst_subnet == i)
            .map(|c| c.src_subnet)
            .collect();
        v.into_iter().collect()
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        let v: BTreeSet<usize> = self
            .channels
            .iter()
            .filter(|c| c.src_subnet == i)
            .map(|c| c.dst_subnet)
            .collect();
        v.into_iter().collect()
    }

    /// Kahn order with lowest-id tie-break; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.subnets.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![BTreeSet::new(); n];
        for c in &self.channels {
            if c.src_subnet < n && c.dst_subnet < n && succ[c.src_subnet].insert(c.dst_subnet) {
                indeg[c.dst_subnet] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Which subnet hosts each neuron, relays included.
    pub fn subnet_of(&self) -> BTreeMap<NeuronId, usize> {
        let mut m = BTreeMap::new();
        for s in &self.subnets {
            for n in s.neurons() {
                m.insert(n, s.id);
            }
        }
        m
    }

    pub fn relay_count(&self) -> usize {
        self.subnets.iter().map(|s| s.relay_neurons.len()).sum()
    }

    pub fn total_static_power(&self, m: &CostModel) -> f64 {
        self.subnets
            .iter()
            .filter_map(|s| s.assigned_config.as_ref())
            .map(|c| m.static_power(c))
            .sum()
    }

    pub fn content_hash(&self) -> String {
        crate::artifact::content_hash(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataflow graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CompileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Compiler knobs beyond the palette.
#[derive(Clone, Debug)]
pub struct CompileOptions {
    pub backend: Backend,
    pub relay_policy: RelayPolicy,
    /// Try merging each new sub-network into an existing one.
    pub merge: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            backend: Backend::Mubrain,
            relay_policy: RelayPolicy::Always,
            merge: true,
        }
    }
}

pub fn compile(
    g: &SdcnnGraph,
    palette: &[CoreConfig],
    cost_model: &CostModel,
    backend: Backend,
) -> Result<DataflowGraph, CompileError> {
    compile_with(
        g,
        palette,
        cost_model,
        &CompileOptions {
            backend,
            ..CompileOptions::default()
        },
    )
}

pub fn compile_with(
    g: &SdcnnGraph,
    palette: &[CoreConfig],
    cost_model: &CostModel,
    opts: &CompileOptions,
) -> Result<DataflowGraph, CompileError> {
    if g.is_empty() {
        return Err(CompileError::EmptyGraph);
    }
    if palette.is_empty() {
        return Err(HardwareError::EmptyPalette.into());
    }
    let two_layer = palette.iter().all(|c| c.is_two_layer());
    let top: u8 = if two_layer { 1 } else { 2 };
    let max_d = opts.backend.max_distance().min(top as u32);
    let policy = opts.relay_policy;

    let mut residual = Residual::full(g);
    let mut frontier: BTreeSet<usize> = residual.sinks(g).into_iter().collect();
    let mut parts: Vec<Part> = Vec::new();
    // DFG successor sets between parts, kept for merge legality.
    let mut part_succ: Vec<BTreeSet<usize>> = Vec::new();
    let mut part_of: Vec<Option<usize>> = vec![None; g.len()];
    let mut next_id = g.max_id().0 + 1;

    while !residual.is_empty() {
        let Some(n) = frontier.pop_first() else {
            frontier.extend(residual.sinks(g));
            continue;
        };
        if !residual.is_sink(g, n) {
            continue;
        }
        let dist = longest_path_distances(g, g.neurons()[n].id, &residual)?;
        let members = closed_candidates(g, &dist, &residual, max_d);

        let mut scratch = next_id;
        let fits = |k: usize, scratch: &mut u32| {
            let p = build_part(g, &members[..k], top, policy, scratch);
            fit_config(&p.footprint, palette, cost_model).is_ok()
        };
        let k = if fits(members.len(), &mut scratch) {
            members.len()
        } else {
            if !fits(1, &mut scratch) {
                let p = build_part(g, &members[..1], top, policy, &mut scratch);
                fit_config(&p.footprint, palette, cost_model)?;
            }
            let (mut lo, mut hi) = (1, members.len());
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if fits(mid, &mut scratch) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let chosen = &members[..k];
        let part = build_part(g, chosen, top, policy, &mut next_id);

        // Out-edges of the new part go to already placed parts.
        let mut succ = BTreeSet::new();
        for &(y, _) in chosen {
            for s in g.successors(y) {
                if let Some(p) = part_of[s] {
                    succ.insert(p);
                }
            }
        }

        let target = if opts.merge {
            best_merge(&part, &succ, &parts, &part_succ, palette, cost_model)
        } else {
            None
        };
        let idx = match target {
            Some(j) => {
                parts[j].absorb(part);
                part_succ[j].extend(succ);
                j
            }
            None => {
                parts.push(part);
                part_succ.push(succ);
                parts.len() - 1
            }
        };
        for &(y, _) in chosen {
            part_of[y] = Some(idx);
            residual.remove(y);
        }
        for (id, d) in dist.finite() {
            let i = g.index_of(id).expect("known neuron");
            if d <= max_d + 1 && residual.is_live(i) {
                frontier.insert(i);
            }
        }
    }

    finish(g, parts, &part_of, palette, cost_model, opts)
}

/// Neurons within `max_d` of the sink whose live successors all lie inside
/// the set, as (index, layer) in (distance, id) order.
fn closed_candidates(
    g: &SdcnnGraph,
    dist: &Distances,
    residual: &Residual,
    max_d: u32,
) -> Vec<(usize, u8)> {
    let mut cand: BTreeMap<usize, u32> = dist
        .finite()
        .filter(|&(_, d)| d <= max_d)
        .map(|(id, d)| (g.index_of(id).expect("known neuron"), d))
        .collect();
    loop {
        let drop: Vec<usize> = cand
            .keys()
            .copied()
            .filter(|&i| {
                g.successors(i)
                    .any(|s| residual.is_live(s) && !cand.contains_key(&s))
            })
            .collect();
        if drop.is_empty() {
            break;
        }
        for i in drop {
            cand.remove(&i);
        }
    }
    let mut v: Vec<(u32, NeuronId, usize)> = cand
        .into_iter()
        .map(|(i, d)| (d, g.neurons()[i].id, i))
        .collect();
    v.sort();
    v.into_iter().map(|(d, _, i)| (i, d as u8)).collect()
}

fn reaches(part_succ: &[BTreeSet<usize>], from: &BTreeSet<usize>, target: usize) -> bool {
    let mut seen = vec![false; part_succ.len()];
    let mut stack: Vec<usize> = from.iter().copied().collect();
    while let Some(p) = stack.pop() {
        if p == target {
            return true;
        }
        if !std::mem::replace(&mut seen[p], true) {
            stack.extend(part_succ[p].iter().copied());
        }
    }
    false
}

/// Lowest-cost legal merge target; ties go to the lowest id.
fn best_merge(
    part: &Part,
    succ: &BTreeSet<usize>,
    parts: &[Part],
    part_succ: &[BTreeSet<usize>],
    palette: &[CoreConfig],
    m: &CostModel,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, other) in parts.iter().enumerate() {
        if reaches(part_succ, succ, j) {
            continue;
        }
        let c = merge_cost(&other.footprint, &part.footprint, palette, m);
        if !c.feasible {
            continue;
        }
        if best.is_none_or(|(_, b)| c.cost < b) {
            best = Some((j, c.cost));
        }
    }
    best.map(|(j, _)| j)
}

fn finish(
    g: &SdcnnGraph,
    parts: Vec<Part>,
    part_of: &[Option<usize>],
    palette: &[CoreConfig],
    m: &CostModel,
    opts: &CompileOptions,
) -> Result<DataflowGraph, CompileError> {
    let mut carrier: BTreeMap<usize, NeuronId> = BTreeMap::new();
    let mut entry: BTreeMap<usize, NeuronId> = BTreeMap::new();
    let mut relays: BTreeSet<NeuronId> = BTreeSet::new();
    let mut subnets = Vec::with_capacity(parts.len());
    for (id, p) in parts.into_iter().enumerate() {
        carrier.extend(p.carriers.iter().copied());
        entry.extend(p.entries.iter().copied());
        relays.extend(p.sub.relay_neurons.iter().copied());
        let cfg = fit_config(&p.footprint, palette, m)?.clone();
        let mut s = p.sub;
        s.id = id;
        s.assigned_config = Some(cfg);
        subnets.push(s);
    }

    let mut channels: BTreeMap<(usize, usize), Vec<Synapse>> = BTreeMap::new();
    for (k, syn) in g.synapses().iter().enumerate() {
        let x = g.index_of(syn.src).expect("known neuron");
        let y = g.index_of(syn.dst).expect("known neuron");
        let (px, py) = (part_of[x].expect("placed"), part_of[y].expect("placed"));
        if px == py {
            continue;
        }
        let e = entry[&k];
        let weight = if relays.contains(&e) {
            crate::graph::UNIT_WEIGHT
        } else {
            syn.weight
        };
        channels.entry((px, py)).or_default().push(Synapse {
            src: carrier[&x],
            dst: e,
            weight,
        });
    }
    let channels: Vec<Channel> = channels
        .into_iter()
        .map(|((a, b), mut synapses)| {
            synapses.sort_by_key(|s| (s.src, s.dst));
            synapses.dedup();
            Channel {
                src_subnet: a,
                dst_subnet: b,
                synapses,
                profiled_spike_count: 0,
            }
        })
        .collect();

    let n = subnets.len();
    Ok(DataflowGraph {
        name: g.name().to_string(),
        backend: opts.backend,
        relay_policy: opts.relay_policy,
        source_hash: crate::artifact::content_hash(g),
        subnets,
        channels,
        exec_times: vec![0; n],
        profiled_images: 0,
    })
}

#[cfg(test)]
mod tests;

/// Bare DFG with the given execution times and channels, for scheduler and
/// bus tests.
#[cfg(test)]
pub(crate) fn synthetic_dfg(exec_times: &[u64], edges: &[(usize, usize)]) -> DataflowGraph {
    DataflowGraph {
        name: "synthetic".into(),
        backend: Backend::Mubrain,
        relay_policy: RelayPolicy::Always,
        source_hash: String::new(),
        subnets: (0..exec_times.len()).map(SubNetwork::empty).collect(),
        channels: edges
            .iter()
            .map(|&(a, b)| Channel {
                src_subnet: a,
                dst_subnet: b,
                synapses: Vec::new(),
                profiled_spike_count: 0,
            })
            .collect(),
        exec_times: exec_times.to_vec(),
        profiled_images: 0,
    }
}
