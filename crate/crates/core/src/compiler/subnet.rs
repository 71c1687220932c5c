use std::collections::{BTreeSet, HashMap};

use crate::graph::{NeuronId, SdcnnGraph, Synapse, UNIT_WEIGHT};
use crate::hardware::{Footprint, RelayPolicy};

use super::distance::Distances;
use super::SubNetwork;

/// Raw sub-network of every neuron within `max_distance` of the sink, layered
/// by distance. No relays are inserted.
pub fn create_subnet(g: &SdcnnGraph, distances: &Distances, max_distance: u32) -> SubNetwork {
    let mut s = SubNetwork::empty(0);
    let mut layer_of = HashMap::new();
    for (id, d) in distances.finite() {
        if d <= max_distance {
            s.layer_mut(d as u8).insert(id);
            layer_of.insert(id, d);
        }
    }
    for syn in g.synapses() {
        if layer_of.contains_key(&syn.src) && layer_of.contains_key(&syn.dst) {
            s.internal_synapses.push(*syn);
        }
    }
    s.internal_synapses.sort_by_key(|x| (x.src, x.dst));
    s
}

/// Replaces each internal l2 -> l0 synapse by `src -> r` (unit weight) and
/// `r -> dst` (original weight) through a fresh relay `r` in l1. One relay
/// per synapse. With [`RelayPolicy::Direct`] the skip is kept.
pub fn insert_relays(s: &SubNetwork, policy: RelayPolicy, next_id: &mut u32) -> SubNetwork {
    let mut out = s.clone();
    if policy == RelayPolicy::Direct {
        return out;
    }
    out.internal_synapses.clear();
    for syn in &s.internal_synapses {
        let (Some(a), Some(b)) = (s.layer_of(syn.src), s.layer_of(syn.dst)) else {
            out.internal_synapses.push(*syn);
            continue;
        };
        if a == b + 2 {
            let r = fresh(next_id);
            out.layer_mut(b + 1).insert(r);
            out.relay_neurons.insert(r);
            out.internal_synapses.push(Synapse {
                src: syn.src,
                dst: r,
                weight: UNIT_WEIGHT,
            });
            out.internal_synapses.push(Synapse {
                src: r,
                dst: syn.dst,
                weight: syn.weight,
            });
        } else {
            out.internal_synapses.push(*syn);
        }
    }
    out.internal_synapses.sort_by_key(|x| (x.src, x.dst));
    out
}

fn fresh(next_id: &mut u32) -> NeuronId {
    let id = NeuronId(*next_id);
    *next_id += 1;
    id
}

/// A sub-network under construction together with the boundary wiring the
/// compiler needs to emit channels later.
#[derive(Clone, Debug)]
pub(crate) struct Part {
    pub sub: SubNetwork,
    /// Original neuron index -> the l0 neuron that carries its spikes off-core.
    pub carriers: Vec<(usize, NeuronId)>,
    /// Incoming cross-core synapse id -> the top-layer neuron receiving it.
    pub entries: Vec<(usize, NeuronId)>,
    pub footprint: Footprint,
}

/// Lays `members` (neuron index, layer) into a core with `top + 1` layers.
///
/// Internal skips get a relay per synapse (policy permitting). On a
/// three-layer core, incoming synapses from outside land on the top layer and
/// descend through unit relays shared per source and layer, and neurons with
/// outgoing cross-core synapses get a relay chain down to l0. Every relay hop
/// except the last carries unit weight. Two-layer crossbars route spikes to
/// and from any neuron directly.
pub(crate) fn build_part(
    g: &SdcnnGraph,
    members: &[(usize, u8)],
    top: u8,
    policy: RelayPolicy,
    next_id: &mut u32,
) -> Part {
    let layer: HashMap<usize, u8> = members.iter().copied().collect();
    let mut sub = SubNetwork::empty(0);
    let mut entries = Vec::new();
    let mut carriers = Vec::new();
    let direct = policy == RelayPolicy::Direct && top == 2;
    let mut chains: HashMap<(usize, u8), (NeuronId, NeuronId)> = HashMap::new();

    let relay = |sub: &mut SubNetwork, at: u8, next_id: &mut u32| {
        let r = fresh(next_id);
        sub.layer_mut(at).insert(r);
        sub.relay_neurons.insert(r);
        r
    };

    for &(y, ly) in members {
        sub.layer_mut(ly).insert(g.neurons()[y].id);
    }
    for &(y, ly) in members {
        let yid = g.neurons()[y].id;
        for &k in g.in_synapses(y) {
            let syn = g.synapses()[k];
            let x = g.index_of(syn.src).expect("validated graph");
            match layer.get(&x) {
                Some(&lx) if lx == ly + 2 && !direct => {
                    let r = relay(&mut sub, ly + 1, next_id);
                    sub.internal_synapses.push(Synapse {
                        src: syn.src,
                        dst: r,
                        weight: UNIT_WEIGHT,
                    });
                    sub.internal_synapses.push(Synapse {
                        src: r,
                        dst: yid,
                        weight: syn.weight,
                    });
                }
                Some(_) => sub.internal_synapses.push(syn),
                None if ly == top || top < 2 => entries.push((k, yid)),
                None => {
                    // One chain from the top layer down to just above `ly`
                    // per outside source, fanning out at its last relay.
                    let (head, last) = *chains.entry((x, ly)).or_insert_with(|| {
                        let levels: Vec<u8> = if direct {
                            vec![top]
                        } else {
                            (ly + 1..=top).rev().collect()
                        };
                        let chain: Vec<NeuronId> =
                            levels.iter().map(|&at| relay(&mut sub, at, next_id)).collect();
                        for w in chain.windows(2) {
                            sub.internal_synapses.push(Synapse {
                                src: w[0],
                                dst: w[1],
                                weight: UNIT_WEIGHT,
                            });
                        }
                        (chain[0], *chain.last().expect("non-empty chain"))
                    });
                    sub.internal_synapses.push(Synapse {
                        src: last,
                        dst: yid,
                        weight: syn.weight,
                    });
                    entries.push((k, head));
                }
            }
        }
    }
    for &(y, ly) in members {
        if g.successors(y).all(|s| layer.contains_key(&s)) {
            continue;
        }
        let yid = g.neurons()[y].id;
        if ly == 0 || top < 2 {
            carriers.push((y, yid));
            continue;
        }
        let levels: Vec<u8> = if direct && ly == 2 {
            vec![0]
        } else {
            (0..ly).rev().collect()
        };
        let mut prev = yid;
        for at in levels {
            let r = relay(&mut sub, at, next_id);
            sub.internal_synapses.push(Synapse {
                src: prev,
                dst: r,
                weight: UNIT_WEIGHT,
            });
            prev = r;
        }
        carriers.push((y, prev));
    }
    sub.internal_synapses.sort_by_key(|x| (x.src, x.dst));
    let footprint = sub.footprint();
    Part {
        sub,
        carriers,
        entries,
        footprint,
    }
}

impl Part {
    pub fn absorb(&mut self, other: Part) {
        for l in 0..3u8 {
            let moved: BTreeSet<NeuronId> = other.sub.layer(l).clone();
            self.sub.layer_mut(l).extend(moved);
        }
        self.sub.relay_neurons.extend(other.sub.relay_neurons);
        self.sub.internal_synapses.extend(other.sub.internal_synapses);
        self.sub.internal_synapses.sort_by_key(|x| (x.src, x.dst));
        self.carriers.extend(other.carriers);
        self.entries.extend(other.entries);
        self.footprint = self.footprint + other.footprint;
    }
}
