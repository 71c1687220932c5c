use std::collections::{BTreeSet, HashMap};

use crate::graph::{NeuronId, SdcnnGraph};
use crate::hardware::TimingParams;
use crate::sim::{simulate_direct, Dynamics, SimError, Stimulus};

use super::{CompileError, DataflowGraph};

/// `t_i = per_event_ps * ceil(events per image) + overhead_ps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecTimeModel {
    pub per_event_ps: u64,
    pub overhead_ps: u64,
}

impl From<&TimingParams> for ExecTimeModel {
    fn from(t: &TimingParams) -> Self {
        ExecTimeModel {
            per_event_ps: t.exec_per_event_ps,
            overhead_ps: t.exec_overhead_ps,
        }
    }
}

/// Graph neuron whose spikes each relay repeats.
pub(crate) fn relay_origins(dfg: &DataflowGraph) -> HashMap<NeuronId, NeuronId> {
    let relays: BTreeSet<NeuronId> = dfg.subnets.iter().flat_map(|s| s.relay_neurons.iter().copied()).collect();
    let mut parent: HashMap<NeuronId, NeuronId> = HashMap::new();
    let all = dfg
        .subnets
        .iter()
        .flat_map(|s| s.internal_synapses.iter())
        .chain(dfg.channels.iter().flat_map(|c| c.synapses.iter()));
    for syn in all {
        if relays.contains(&syn.dst) {
            parent.insert(syn.dst, syn.src);
        }
    }
    relays
        .iter()
        .map(|&r| {
            let mut v = r;
            while relays.contains(&v) {
                v = parent[&v];
            }
            (r, v)
        })
        .collect()
}

/// Runs the uncompiled graph on `stimulus` and records, per channel, how
/// many spikes cross it and, per subnet, its execution time per image.
/// Relays repeat every spike they receive, so each synaptic hop carries as
/// many events as its originating neuron fires.
pub fn profile_channels(
    dfg: &DataflowGraph,
    g: &SdcnnGraph,
    stimulus: &Stimulus,
    dynamics: &Dynamics,
    model: ExecTimeModel,
) -> Result<DataflowGraph, CompileError> {
    let run = simulate_direct(g, stimulus, dynamics).map_err(|e| match e {
        SimError::UnknownInput(n) => CompileError::UnknownInput(n),
        other => CompileError::Invariant(other.to_string()),
    })?;
    let origin = relay_origins(dfg);
    let fires_of = |n: NeuronId| -> u64 {
        let o = origin.get(&n).copied().unwrap_or(n);
        g.index_of(o).map_or(0, |i| run.fires[i])
    };
    let home = dfg.subnet_of();

    let mut out = dfg.clone();
    let mut events = vec![0u64; dfg.len()];
    for s in &dfg.subnets {
        for syn in &s.internal_synapses {
            events[s.id] += fires_of(syn.src);
        }
    }
    for c in &mut out.channels {
        let carriers: BTreeSet<NeuronId> = c.synapses.iter().map(|s| s.src).collect();
        c.profiled_spike_count = carriers.iter().map(|&n| fires_of(n)).sum();
        for syn in &c.synapses {
            events[home[&syn.dst]] += fires_of(syn.src);
        }
    }
    let images = stimulus.images.len().max(1) as u64;
    out.exec_times = events
        .iter()
        .map(|&e| model.per_event_ps * e.div_ceil(images) + model.overhead_ps)
        .collect();
    out.profiled_images = stimulus.images.len() as u64;
    Ok(out)
}
