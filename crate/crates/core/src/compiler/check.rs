use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::graph::{NeuronId, SdcnnGraph, UNIT_WEIGHT};
use crate::hardware::RelayPolicy;

use super::{CompileError, DataflowGraph};

/// Verifies every structural property a compiled graph must have against
/// the graph it came from.
pub fn check_dfg(g: &SdcnnGraph, dfg: &DataflowGraph) -> Result<(), CompileError> {
    let bad = |msg: String| Err(CompileError::Invariant(msg));

    let mut home: HashMap<NeuronId, (usize, u8)> = HashMap::new();
    let mut relays: BTreeSet<NeuronId> = BTreeSet::new();
    for (i, s) in dfg.subnets.iter().enumerate() {
        if s.id != i {
            return bad(format!("subnet at position {i} has id {}", s.id));
        }
        for l in 0..3u8 {
            for &n in s.layer(l) {
                if let Some((j, _)) = home.insert(n, (i, l)) {
                    return bad(format!("{n} placed twice (subnets {j} and {i})"));
                }
            }
        }
        for &r in &s.relay_neurons {
            if home.get(&r).map(|h| h.0) != Some(i) {
                return bad(format!("relay {r} of subnet {i} is not in its layers"));
            }
            if g.index_of(r).is_some() {
                return bad(format!("relay {r} collides with an input-graph neuron"));
            }
            relays.insert(r);
        }
        let Some(cfg) = &s.assigned_config else {
            return bad(format!("subnet {i} has no assigned config"));
        };
        if !cfg.fits(&s.footprint()) {
            return bad(format!("subnet {i} does not fit {}", cfg.name));
        }
        if cfg.is_two_layer() && !s.l2.is_empty() {
            return bad(format!("subnet {i} uses l2 on a two-layer core"));
        }
        for syn in &s.internal_synapses {
            let (Some(&(a, la)), Some(&(b, lb))) = (home.get(&syn.src), home.get(&syn.dst)) else {
                return bad(format!("internal synapse {}->{} leaves the subnet", syn.src, syn.dst));
            };
            if a != i || b != i {
                return bad(format!("internal synapse {}->{} leaves subnet {i}", syn.src, syn.dst));
            }
            let skip_ok = dfg.relay_policy == RelayPolicy::Direct && la == 2 && lb == 0;
            if la != lb + 1 && !skip_ok {
                return bad(format!(
                    "synapse {}->{} in subnet {i} connects l{la} to l{lb}",
                    syn.src, syn.dst
                ));
            }
        }
    }
    for n in g.neurons() {
        if !home.contains_key(&n.id) {
            return bad(format!("{} is not placed", n.id));
        }
    }
    let originals = home.len() - relays.len();
    if originals != g.len() {
        return bad(format!("{originals} placed neurons, graph has {}", g.len()));
    }

    for c in &dfg.channels {
        if c.src_subnet == c.dst_subnet {
            return bad(format!("channel loops on subnet {}", c.src_subnet));
        }
        let (Some(src), Some(dst)) = (dfg.subnets.get(c.src_subnet), dfg.subnets.get(c.dst_subnet)) else {
            return bad("channel names a missing subnet".into());
        };
        let crossbar = |s: &super::SubNetwork| s.assigned_config.as_ref().is_some_and(|c| c.is_two_layer());
        if crossbar(src) && crossbar(dst) {
            continue;
        }
        for syn in &c.synapses {
            if !src.l0.contains(&syn.src) {
                return bad(format!("channel source {} is not in l0 of subnet {}", syn.src, src.id));
            }
            if !dst.l2.contains(&syn.dst) {
                return bad(format!("channel target {} is not in l2 of subnet {}", syn.dst, dst.id));
            }
        }
    }
    if dfg.topological_order().is_none() {
        return bad("subnet graph has a cycle".into());
    }
    if dfg.exec_times.len() != dfg.subnets.len() {
        return bad("exec_times length differs from subnet count".into());
    }

    // Each original synapse must survive as exactly one path through relays
    // whose weights multiply back to the original.
    let mut out: BTreeMap<NeuronId, Vec<(NeuronId, i32)>> = BTreeMap::new();
    let mut relay_in: BTreeMap<NeuronId, usize> = BTreeMap::new();
    let all = dfg
        .subnets
        .iter()
        .flat_map(|s| s.internal_synapses.iter())
        .chain(dfg.channels.iter().flat_map(|c| c.synapses.iter()));
    for syn in all {
        out.entry(syn.src).or_default().push((syn.dst, syn.weight));
        if relays.contains(&syn.dst) {
            if syn.weight != UNIT_WEIGHT {
                return bad(format!("relay {} is driven with weight {}", syn.dst, syn.weight));
            }
            *relay_in.entry(syn.dst).or_default() += 1;
        }
    }
    for &r in &relays {
        if relay_in.get(&r) != Some(&1) {
            return bad(format!("relay {r} must have exactly one input"));
        }
    }
    let mut found: HashMap<(NeuronId, NeuronId), Vec<i32>> = HashMap::new();
    for n in g.neurons() {
        let mut stack = vec![(n.id, 1i32)];
        while let Some((v, w)) = stack.pop() {
            for &(t, tw) in out.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if relays.contains(&t) {
                    stack.push((t, w * tw));
                } else {
                    found.entry((n.id, t)).or_default().push(w * tw);
                }
            }
        }
    }
    let total: usize = found.values().map(Vec::len).sum();
    if total != g.synapses().len() {
        return bad(format!(
            "{total} end-to-end connections, graph has {} synapses",
            g.synapses().len()
        ));
    }
    for syn in g.synapses() {
        match found.get(&(syn.src, syn.dst)).map(Vec::as_slice) {
            Some([w]) if *w == syn.weight => {}
            other => {
                return bad(format!(
                    "synapse {}->{} ({}) maps to {:?}",
                    syn.src, syn.dst, syn.weight, other
                ))
            }
        }
    }
    Ok(())
}
