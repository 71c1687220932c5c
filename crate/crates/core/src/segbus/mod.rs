//! Parallel segmented-bus interconnect: placement, lane minimization and
//! switch programming, plus a mesh NoC to compare against.

mod lanes;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::DataflowGraph;
use crate::hardware::InterconnectParams;
use crate::runtime::Schedule;

pub use lanes::{brute_force_chromatic, color_exact, color_greedy, conflict_graph, max_clique, point_clique};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("channel {a} and channel {b} conflict on lane {lane}")]
    Conflict { a: usize, b: usize, lane: usize },
    #[error("{lanes} lanes cannot carry the profiled traffic")]
    Infeasible { lanes: usize },
    #[error("sub-network graph has a cycle")]
    Cyclic,
    #[error("{got} activity windows for {want} channels")]
    WindowCount { got: usize, want: usize },
    #[error("mesh {cols}x{rows} cannot hold {cores} cores")]
    MeshTooSmall { cols: usize, rows: usize, cores: usize },
    #[error("cannot read bus program: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed bus program: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Bus slot of each subnet's core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub position: Vec<usize>,
}

impl Placement {
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Closed position interval a channel occupies.
    pub fn span(&self, src: usize, dst: usize) -> (usize, usize) {
        let (a, b) = (self.position[src], self.position[dst]);
        (a.min(b), a.max(b))
    }
}

/// Cores in topological order of their subnets, ties by id.
pub fn place_cores(dfg: &DataflowGraph) -> Result<Placement, BusError> {
    let order = dfg.topological_order().ok_or(BusError::Cyclic)?;
    let mut position = vec![0; dfg.len()];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    Ok(Placement { position })
}

/// Half-open time windows during which a channel carries spikes.
pub type Windows = Vec<(u64, u64)>;

/// A channel is busy while its producer runs, once per image.
pub fn activity_windows(dfg: &DataflowGraph, schedule: &Schedule) -> Vec<Windows> {
    dfg.channels
        .iter()
        .map(|c| {
            let s = c.src_subnet;
            (0..schedule.batch)
                .map(|k| (schedule.start[s][k], schedule.end[s][k]))
                .filter(|(a, b)| a < b)
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub span: (usize, usize),
    pub windows: Windows,
}

pub fn windows_overlap(a: &[(u64, u64)], b: &[(u64, u64)]) -> bool {
    if !(a.is_sorted() && b.is_sorted()) {
        let (mut x, mut y) = (a.to_vec(), b.to_vec());
        x.sort_unstable();
        y.sort_unstable();
        return windows_overlap(&x, &y);
    }
    let (x, y) = (a, b);
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        if x[i].0 < y[j].1 && y[j].0 < x[i].1 {
            return true;
        }
        if x[i].1 <= y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    false
}

/// Two channels conflict when they are active at the same time on
/// intersecting stretches of bus.
pub fn conflicts(a: &Demand, b: &Demand) -> bool {
    a.span.0 <= b.span.1 && b.span.0 <= a.span.1 && windows_overlap(&a.windows, &b.windows)
}

pub fn demands(dfg: &DataflowGraph, placement: &Placement, windows: &[Windows]) -> Result<Vec<Demand>, BusError> {
    if windows.len() != dfg.channels.len() {
        return Err(BusError::WindowCount {
            got: windows.len(),
            want: dfg.channels.len(),
        });
    }
    Ok(dfg
        .channels
        .iter()
        .zip(windows)
        .map(|(c, w)| Demand {
            span: placement.span(c.src_subnet, c.dst_subnet),
            windows: w.clone(),
        })
        .collect())
}

/// Instances up to this many channels are colored exactly.
pub const EXACT_COLORING_LIMIT: usize = 16;
/// Instances up to this many channels get an exact clique bound; larger ones
/// use the instant-and-position sweep.
pub const EXACT_CLIQUE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneReport {
    pub lanes: usize,
    /// Lanes the greedy interval coloring used.
    pub greedy_lanes: usize,
    /// Size of a set of pairwise-conflicting channels: the largest one on
    /// small instances, the largest one sharing an instant and a position
    /// otherwise.
    pub clique_bound: usize,
    /// Lane of each channel.
    pub assignment: Vec<usize>,
}

/// Greedy coloring of the conflict graph with channels taken by span start;
/// small instances are then colored exactly.
pub fn min_lanes(demands: &[Demand]) -> LaneReport {
    let adj = conflict_graph(demands);
    let order = lanes::interval_order(demands);
    let greedy = color_greedy(&adj, &order);
    let greedy_lanes = lane_count(&greedy);
    let clique_bound = if demands.len() <= EXACT_CLIQUE_LIMIT {
        max_clique(&adj)
    } else {
        point_clique(demands)
    };
    let assignment = if demands.len() <= EXACT_COLORING_LIMIT && greedy_lanes > clique_bound {
        color_exact(&adj, clique_bound, greedy_lanes).unwrap_or(greedy)
    } else {
        greedy
    };
    LaneReport {
        lanes: lane_count(&assignment),
        greedy_lanes,
        clique_bound,
        assignment,
    }
}

fn lane_count(a: &[usize]) -> usize {
    a.iter().map(|&l| l + 1).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAssignment {
    pub channel: usize,
    pub lane: usize,
    /// Closed interval of bus positions.
    pub interval: (usize, usize),
}

/// A closed switch on `lane` between positions `boundary` and `boundary + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSetting {
    pub lane: usize,
    pub boundary: usize,
    pub channel: usize,
    pub windows: Windows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusProgram {
    pub dfg_hash: String,
    pub placement: Placement,
    pub num_lanes: usize,
    pub num_positions: usize,
    pub segment_length_um: f64,
    pub assignments: Vec<ChannelAssignment>,
    pub switches: Vec<SwitchSetting>,
}

impl BusProgram {
    /// Pairwise scan for two channels sharing a lane while in conflict.
    pub fn check(&self, demands: &[Demand]) -> Result<(), BusError> {
        for (x, a) in self.assignments.iter().enumerate() {
            if a.interval != demands[a.channel].span {
                return Err(BusError::Infeasible { lanes: self.num_lanes });
            }
            for b in &self.assignments[x + 1..] {
                if a.lane == b.lane && conflicts(&demands[a.channel], &demands[b.channel]) {
                    return Err(BusError::Conflict {
                        a: a.channel,
                        b: b.channel,
                        lane: a.lane,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn closed_switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bus program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BusError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Assigns each channel a lane from `report` and closes the boundaries
/// interior to its span.
pub fn program_switches(
    dfg: &DataflowGraph,
    placement: &Placement,
    demands: &[Demand],
    report: &LaneReport,
    segment_length_um: f64,
) -> Result<BusProgram, BusError> {
    let mut assignments = Vec::with_capacity(demands.len());
    let mut switches = Vec::new();
    for (c, d) in demands.iter().enumerate() {
        let lane = report.assignment[c];
        if lane >= report.lanes {
            return Err(BusError::Infeasible { lanes: report.lanes });
        }
        assignments.push(ChannelAssignment {
            channel: c,
            lane,
            interval: d.span,
        });
        for boundary in d.span.0..d.span.1 {
            switches.push(SwitchSetting {
                lane,
                boundary,
                channel: c,
                windows: d.windows.clone(),
            });
        }
    }
    switches.sort_by_key(|s| (s.lane, s.boundary, s.channel));
    let program = BusProgram {
        dfg_hash: dfg.content_hash(),
        placement: placement.clone(),
        num_lanes: report.lanes,
        num_positions: placement.len(),
        segment_length_um,
        assignments,
        switches,
    };
    program.check(demands)?;
    Ok(program)
}

/// XY-routed 2-D mesh with cores in row-major order of their bus position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NocDescriptor {
    pub dfg_hash: String,
    pub cols: usize,
    pub rows: usize,
    /// Mesh coordinate (x, y) of each subnet's core.
    pub coords: Vec<(usize, usize)>,
}

impl NocDescriptor {
    pub fn new(
        dfg: &DataflowGraph,
        placement: &Placement,
        mesh: Option<(usize, usize)>,
    ) -> Result<Self, BusError> {
        let n = placement.len();
        let (cols, rows) = mesh.unwrap_or_else(|| {
            let cols = (1..).find(|c| c * c >= n).unwrap_or(1).max(1);
            (cols, n.div_ceil(cols).max(1))
        });
        if cols * rows < n {
            return Err(BusError::MeshTooSmall { cols, rows, cores: n });
        }
        Ok(NocDescriptor {
            dfg_hash: dfg.content_hash(),
            cols,
            rows,
            coords: placement.position.iter().map(|&p| (p % cols, p / cols)).collect(),
        })
    }

    pub fn hops(&self, src: usize, dst: usize) -> usize {
        let (a, b) = (self.coords[src], self.coords[dst]);
        a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interconnect {
    SegmentedBus(BusProgram),
    Noc(NocDescriptor),
}

impl Interconnect {
    pub fn dfg_hash(&self) -> &str {
        match self {
            Interconnect::SegmentedBus(p) => &p.dfg_hash,
            Interconnect::Noc(n) => &n.dfg_hash,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Interconnect::SegmentedBus(_) => "sb",
            Interconnect::Noc(_) => "noc",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("interconnect serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BusError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Energy (fJ) and latency (ps) of one spike on a channel.
    pub fn per_spike(&self, dfg: &DataflowGraph, channel: usize, p: &InterconnectParams) -> (u64, u64) {
        let c = &dfg.channels[channel];
        match self {
            Interconnect::SegmentedBus(prog) => {
                let (a, b) = prog.placement.span(c.src_subnet, c.dst_subnet);
                let segs = (b - a) as u64;
                (
                    segs * pj_to_fj(p.segmented_bus.segment_energy_pj),
                    segs * p.segmented_bus.segment_delay_ps,
                )
            }
            Interconnect::Noc(noc) => {
                let hops = noc.hops(c.src_subnet, c.dst_subnet) as u64;
                let routers = hops + 1;
                (
                    hops * pj_to_fj(p.noc.link_energy_pj) + routers * pj_to_fj(p.noc.router_energy_pj),
                    hops * p.noc.hop_latency_ps + routers * p.noc.router_latency_ps,
                )
            }
        }
    }

    pub fn channel_delays(&self, dfg: &DataflowGraph, p: &InterconnectParams) -> Vec<u64> {
        (0..dfg.channels.len()).map(|c| self.per_spike(dfg, c, p).1).collect()
    }
}

pub fn pj_to_fj(pj: f64) -> u64 {
    (pj * 1000.0).round() as u64
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterconnectCost {
    pub energy_fj: u64,
    /// Sum of per-spike latencies over all spikes.
    pub latency_ps: u64,
    pub spikes: u64,
    pub per_channel_energy_fj: Vec<u64>,
    pub per_channel_latency_ps: Vec<u64>,
}

impl InterconnectCost {
    pub fn energy_pj(&self) -> f64 {
        self.energy_fj as f64 / 1000.0
    }

    /// Mean latency per spike in ps; 0 without traffic.
    pub fn mean_latency_ps(&self) -> f64 {
        if self.spikes == 0 {
            0.0
        } else {
            self.latency_ps as f64 / self.spikes as f64
        }
    }
}

/// Energy and latency of carrying `traffic[c]` spikes over each channel.
pub fn interconnect_cost(
    ic: &Interconnect,
    dfg: &DataflowGraph,
    traffic: &[u64],
    p: &InterconnectParams,
) -> InterconnectCost {
    let mut cost = InterconnectCost::default();
    for (c, &n) in traffic.iter().enumerate() {
        let (e, l) = ic.per_spike(dfg, c, p);
        cost.per_channel_energy_fj.push(e);
        cost.per_channel_latency_ps.push(l);
        cost.energy_fj += n * e;
        cost.latency_ps += n * l;
        cost.spikes += n;
    }
    cost
}

/// Bus plan for a scheduled DFG: placement, lanes from the schedule's
/// activity windows, and the resulting switch program.
pub fn plan_bus(dfg: &DataflowGraph, schedule: &Schedule, p: &InterconnectParams) -> Result<(BusProgram, LaneReport), BusError> {
    let placement = place_cores(dfg)?;
    let d = demands(dfg, &placement, &activity_windows(dfg, schedule))?;
    let report = min_lanes(&d);
    let program = program_switches(dfg, &placement, &d, &report, p.segmented_bus.segment_length_um)?;
    Ok((program, report))
}

/// Bus with placement only, for channel latencies before a schedule exists.
pub fn provisional_bus(dfg: &DataflowGraph) -> Result<Interconnect, BusError> {
    let placement = place_cores(dfg)?;
    Ok(Interconnect::SegmentedBus(BusProgram {
        dfg_hash: dfg.content_hash(),
        num_positions: placement.len(),
        placement,
        num_lanes: 0,
        segment_length_um: 0.0,
        assignments: Vec::new(),
        switches: Vec::new(),
    }))
}

#[cfg(test)]
mod tests;
