//! Event-driven spike simulation, on the bare graph and on mapped cores.

pub mod experiments;
mod stimulus;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::DataflowGraph;
use crate::graph::{NeuronId, SdcnnGraph, RELAY_THRESHOLD};
use crate::hardware::{HardwareConfig, HardwarePlatform, NeuronParams};
use crate::runtime::Schedule;
use crate::segbus::interconnect_cost;

pub use stimulus::{Image, InputSpike, Stimulus, StimulusOptions};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("stimulus references {0}, which is not an input neuron")]
    UnknownInput(NeuronId),
    #[error("inconsistent artifact versions: {0}")]
    Inconsistent(String),
    #[error("cannot read stimulus: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed stimulus: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Neuron dynamics plus the logical delay of one synapse.
#[derive(Clone, Debug, PartialEq)]
pub struct Dynamics {
    pub floor_at_zero: bool,
    pub reset_to_zero: bool,
    pub synapse_delay_ps: u64,
}

impl Dynamics {
    pub fn new(n: &NeuronParams, synapse_delay_ps: u64) -> Self {
        Dynamics {
            floor_at_zero: n.floor_at_zero,
            reset_to_zero: n.reset_to_zero,
            synapse_delay_ps,
        }
    }

    pub fn from_config(cfg: &HardwareConfig) -> Self {
        Self::new(&cfg.neuron, cfg.timing.neuron_delay_ps)
    }
}

impl Default for Dynamics {
    fn default() -> Self {
        Self::new(&NeuronParams::default(), 1_000)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NeuronState {
    pub accumulator: i64,
    pub threshold: i64,
    pub last_update: u64,
}

impl NeuronState {
    pub fn new(threshold: u32) -> Self {
        NeuronState {
            threshold: threshold as i64,
            ..Self::default()
        }
    }

    /// Integrates one weighted spike; true if the neuron fires.
    pub fn integrate(&mut self, weight: i32, now: u64, d: &Dynamics) -> bool {
        self.last_update = now;
        self.accumulator += weight as i64;
        if d.floor_at_zero && self.accumulator < 0 {
            self.accumulator = 0;
        }
        if self.accumulator >= self.threshold {
            if d.reset_to_zero {
                self.accumulator = 0;
            } else {
                self.accumulator -= self.threshold;
            }
            true
        } else {
            false
        }
    }
}

/// A spike arriving at `dst`. Ordered by time, destination, source, then
/// creation; stimulus spikes (`src == 0`) come first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    dst: NeuronId,
    src: u64,
    seq: u64,
    weight: i32,
    phys: u64,
}

struct Queue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl Queue {
    fn new() -> Self {
        Queue {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, time: u64, dst: NeuronId, src: Option<NeuronId>, weight: i32, phys: u64) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            dst,
            src: src.map_or(0, |s| s.0 as u64 + 1),
            seq: self.seq,
            weight,
            phys,
        }));
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }
}

/// Runs one image: stimulus spikes force their input neuron to fire; every
/// other spike integrates at its destination. `fanout` expands a firing of
/// graph neuron `i` at physical time `phys` into deliveries
/// `(dst index, weight, physical arrival)`.
fn run_image(
    g: &SdcnnGraph,
    d: &Dynamics,
    image: &Image,
    fires: &mut [u64],
    mut fanout: impl FnMut(usize, u64, &mut Vec<(usize, i32, u64)>),
) -> (u64, u64) {
    let mut state: Vec<NeuronState> = g.neurons().iter().map(|n| NeuronState::new(n.threshold)).collect();
    let mut q = Queue::new();
    for s in &image.spikes {
        q.push(s.time_ps, s.neuron, None, 0, s.time_ps);
    }
    let mut out = Vec::new();
    let (mut deliveries, mut last_phys) = (0u64, 0u64);
    while let Some(e) = q.pop() {
        let i = g.index_of(e.dst).expect("validated stimulus");
        let fired = if e.src == 0 {
            true
        } else {
            deliveries += 1;
            state[i].integrate(e.weight, e.time, d)
        };
        if !fired {
            continue;
        }
        fires[i] += 1;
        last_phys = last_phys.max(e.phys);
        out.clear();
        fanout(i, e.phys, &mut out);
        for &(j, w, phys) in &out {
            q.push(e.time + d.synapse_delay_ps, g.neurons()[j].id, Some(e.dst), w, phys);
        }
    }
    (deliveries, last_phys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectRun {
    /// Firings of each neuron (graph order) summed over the batch.
    pub fires: Vec<u64>,
    /// Spike count of each sink neuron, per image.
    pub outputs: Vec<BTreeMap<NeuronId, u64>>,
    pub total_spikes: u64,
    pub deliveries: u64,
}

impl DirectRun {
    pub fn output_totals(&self) -> BTreeMap<NeuronId, u64> {
        sum_outputs(&self.outputs)
    }
}

fn sum_outputs(per_image: &[BTreeMap<NeuronId, u64>]) -> BTreeMap<NeuronId, u64> {
    let mut m = BTreeMap::new();
    for img in per_image {
        for (&k, &v) in img {
            *m.entry(k).or_insert(0) += v;
        }
    }
    m
}

fn outputs_of(g: &SdcnnGraph, fires: &[u64]) -> BTreeMap<NeuronId, u64> {
    g.sinks()
        .into_iter()
        .map(|id| (id, fires[g.index_of(id).expect("sink exists")]))
        .collect()
}

/// Reference simulation of the uncompiled graph.
pub fn simulate_direct(g: &SdcnnGraph, stimulus: &Stimulus, d: &Dynamics) -> Result<DirectRun, SimError> {
    stimulus.validate(g)?;
    let mut fires = vec![0u64; g.len()];
    let mut outputs = Vec::with_capacity(stimulus.images.len());
    let mut deliveries = 0;
    for image in &stimulus.images {
        let mut f = vec![0u64; g.len()];
        let (n, _) = run_image(g, d, image, &mut f, |i, phys, out| {
            for &k in g.out_synapses(i) {
                let s = g.synapses()[k];
                out.push((g.index_of(s.dst).expect("known"), s.weight, phys + d.synapse_delay_ps));
            }
        });
        deliveries += n;
        outputs.push(outputs_of(g, &f));
        for (a, b) in fires.iter_mut().zip(f) {
            *a += b;
        }
    }
    Ok(DirectRun {
        total_spikes: fires.iter().sum(),
        fires,
        outputs,
        deliveries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub subnet: usize,
    pub config: String,
    pub spikes: u64,
    pub static_power_uw: f64,
    pub static_fj: u64,
    pub dynamic_fj: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub dfg_hash: String,
    pub schedule_hash: String,
    pub interconnect: String,
    pub images: usize,
    pub outputs: Vec<BTreeMap<NeuronId, u64>>,
    pub output_spike_counts: BTreeMap<NeuronId, u64>,
    /// Every firing, relays included.
    pub total_spikes: u64,
    pub relay_spikes: u64,
    /// Synaptic events consumed, relay hops included.
    pub deliveries: u64,
    pub channel_spikes: Vec<u64>,
    pub cores: Vec<CoreReport>,
    pub static_fj: u64,
    pub dynamic_fj: u64,
    pub interconnect_fj: u64,
    pub total_fj: u64,
    pub interconnect_latency_ps: u64,
    pub makespan_ps: u64,
    pub average_latency_ps: f64,
    pub throughput_ips: f64,
    pub interval_ps: f64,
    /// Latest physical spike time within any image.
    pub max_spike_time_ps: u64,
}

impl SimReport {
    pub fn total_pj(&self) -> f64 {
        self.total_fj as f64 / 1000.0
    }

    /// Totals equal the sum of their parts.
    pub fn check_closure(&self) -> bool {
        self.static_fj == self.cores.iter().map(|c| c.static_fj).sum::<u64>()
            && self.dynamic_fj == self.cores.iter().map(|c| c.dynamic_fj).sum::<u64>()
            && self.total_fj == self.static_fj + self.dynamic_fj + self.interconnect_fj
            && self.total_spikes == self.cores.iter().map(|c| c.spikes).sum::<u64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("subnet,config,spikes,static_fj,dynamic_fj\n");
        for c in &self.cores {
            s.push_str(&format!("{},{},{},{},{}\n", c.subnet, c.config, c.spikes, c.static_fj, c.dynamic_fj));
        }
        s
    }
}

/// Energy in fJ of `uw` microwatts held for `ps` picoseconds.
pub fn static_energy_fj(uw: f64, ps: u64) -> u64 {
    (uw * ps as f64 / 1000.0).round() as u64
}

#[derive(Clone, Copy)]
struct Hop {
    dst: NeuronId,
    weight: i32,
    channel: Option<usize>,
}

/// Simulates the compiled graph on its cores. Relay neurons are real IF
/// neurons with their own state; spikes cross cores over `platform`'s
/// interconnect.
pub fn simulate_mapped(
    g: &SdcnnGraph,
    dfg: &DataflowGraph,
    platform: &HardwarePlatform,
    schedule: &Schedule,
    stimulus: &Stimulus,
    cfg: &HardwareConfig,
) -> Result<SimReport, SimError> {
    let hash = dfg.content_hash();
    let mismatch = |what: &str| Err(SimError::Inconsistent(what.to_string()));
    if dfg.source_hash != crate::artifact::content_hash(g) {
        return mismatch("dataflow graph was compiled from a different graph");
    }
    if schedule.dfg_hash != hash {
        return mismatch("schedule was built for a different dataflow graph");
    }
    if platform.interconnect.dfg_hash() != hash {
        return mismatch("interconnect was planned for a different dataflow graph");
    }
    if platform.cores.len() != dfg.len() {
        return mismatch("platform core count differs from subnet count");
    }
    if schedule.batch != stimulus.images.len() {
        return mismatch("schedule batch size differs from stimulus image count");
    }
    stimulus.validate(g)?;
    let d = Dynamics::from_config(cfg);
    let ic = &platform.interconnect;
    let params = &cfg.interconnect;
    let latency: Vec<u64> = (0..dfg.channels.len()).map(|c| ic.per_spike(dfg, c, params).1).collect();

    let home = dfg.subnet_of();
    let relays: BTreeSet<NeuronId> = dfg.subnets.iter().flat_map(|s| s.relay_neurons.iter().copied()).collect();
    let mut out: HashMap<NeuronId, Vec<Hop>> = HashMap::new();
    for s in &dfg.subnets {
        for syn in &s.internal_synapses {
            out.entry(syn.src).or_default().push(Hop {
                dst: syn.dst,
                weight: syn.weight,
                channel: None,
            });
        }
    }
    for (c, ch) in dfg.channels.iter().enumerate() {
        for syn in &ch.synapses {
            out.entry(syn.src).or_default().push(Hop {
                dst: syn.dst,
                weight: syn.weight,
                channel: Some(c),
            });
        }
    }
    for v in out.values_mut() {
        v.sort_by_key(|h| (h.dst, h.channel));
    }

    let mut core_spikes = vec![0u64; dfg.len()];
    let mut channel_spikes = vec![0u64; dfg.channels.len()];
    let mut relay_spikes = 0u64;
    let mut relay_hops = 0u64;
    let mut outputs = Vec::with_capacity(stimulus.images.len());
    let mut deliveries = 0u64;
    let mut max_phys = 0u64;

    struct Walk<'a> {
        out: &'a HashMap<NeuronId, Vec<Hop>>,
        relays: &'a BTreeSet<NeuronId>,
        home: &'a BTreeMap<NeuronId, usize>,
        latency: &'a [u64],
        d: &'a Dynamics,
        g: &'a SdcnnGraph,
    }

    impl Walk<'_> {
        #[allow(clippy::too_many_arguments)]
        fn fire(
            &self,
            v: NeuronId,
            phys: u64,
            relay_state: &mut HashMap<NeuronId, NeuronState>,
            core_spikes: &mut [u64],
            channel_spikes: &mut [u64],
            relay_spikes: &mut u64,
            relay_hops: &mut u64,
            emit: &mut Vec<(usize, i32, u64)>,
        ) {
            core_spikes[self.home[&v]] += 1;
            let Some(hops) = self.out.get(&v) else {
                return;
            };
            let mut crossed = BTreeSet::new();
            for h in hops {
                let arrive = phys + self.d.synapse_delay_ps + h.channel.map_or(0, |c| self.latency[c]);
                if let Some(c) = h.channel {
                    if crossed.insert(c) {
                        channel_spikes[c] += 1;
                    }
                }
                if self.relays.contains(&h.dst) {
                    *relay_hops += 1;
                    let st = relay_state.get_mut(&h.dst).expect("relay state");
                    if st.integrate(h.weight, 0, self.d) {
                        *relay_spikes += 1;
                        self.fire(h.dst, arrive, relay_state, core_spikes, channel_spikes, relay_spikes, relay_hops, emit);
                    }
                } else {
                    emit.push((self.g.index_of(h.dst).expect("graph neuron"), h.weight, arrive));
                }
            }
        }
    }

    let walk = Walk {
        out: &out,
        relays: &relays,
        home: &home,
        latency: &latency,
        d: &d,
        g,
    };
    for image in &stimulus.images {
        let mut relay_state: HashMap<NeuronId, NeuronState> =
            relays.iter().map(|&r| (r, NeuronState::new(RELAY_THRESHOLD))).collect();
        let mut f = vec![0u64; g.len()];
        let (n, last) = run_image(g, &d, image, &mut f, |i, phys, emit| {
            walk.fire(
                g.neurons()[i].id,
                phys,
                &mut relay_state,
                &mut core_spikes,
                &mut channel_spikes,
                &mut relay_spikes,
                &mut relay_hops,
                emit,
            );
        });
        deliveries += n;
        max_phys = max_phys.max(last);
        outputs.push(outputs_of(g, &f));
    }
    deliveries += relay_hops;

    let traffic = interconnect_cost(ic, dfg, &channel_spikes, params);
    let m = &cfg.cost_model;
    let makespan = schedule.makespan;
    let cores: Vec<CoreReport> = dfg
        .subnets
        .iter()
        .zip(&platform.cores)
        .map(|(s, (_, c))| {
            let p = m.static_power(c);
            CoreReport {
                subnet: s.id,
                config: c.name.clone(),
                spikes: core_spikes[s.id],
                static_power_uw: p,
                static_fj: static_energy_fj(p, makespan),
                dynamic_fj: core_spikes[s.id] * m.spike_energy_fj(c.memory_model),
            }
        })
        .collect();
    let static_fj = cores.iter().map(|c| c.static_fj).sum();
    let dynamic_fj = cores.iter().map(|c| c.dynamic_fj).sum();
    Ok(SimReport {
        dfg_hash: hash,
        schedule_hash: schedule.content_hash(),
        interconnect: ic.label().to_string(),
        images: stimulus.images.len(),
        output_spike_counts: sum_outputs(&outputs),
        outputs,
        total_spikes: core_spikes.iter().sum(),
        relay_spikes,
        deliveries,
        channel_spikes,
        static_fj,
        dynamic_fj,
        interconnect_fj: traffic.energy_fj,
        total_fj: static_fj + dynamic_fj + traffic.energy_fj,
        interconnect_latency_ps: traffic.latency_ps,
        makespan_ps: makespan,
        average_latency_ps: schedule.average_latency(),
        throughput_ips: schedule.throughput(),
        interval_ps: schedule.interval,
        max_spike_time_ps: max_phys,
        cores,
    })
}
