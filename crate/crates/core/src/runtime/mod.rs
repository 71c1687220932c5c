//! Pipeline allocation and self-timed batch scheduling of a compiled graph.

pub mod maxplus;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::DataflowGraph;

pub use maxplus::{
    maxplus_evolve, steady_state_interval, IntervalError, MaxPlusMatrix, TimingGraph, EPS,
};

/// Power-iteration cap for the steady-state interval.
pub const INTERVAL_ITERATION_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("{need} sub-networks need {need} cores, only {have} available")]
    InsufficientCores { need: usize, have: usize },
    #[error("sub-network graph has a cycle")]
    Cyclic,
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("{got} channel delays for {want} channels")]
    DelayCount { got: usize, want: usize },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("cannot read schedule: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed schedule: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipelines {
    pub pipeline_of: Vec<usize>,
    /// Member subnets of each pipeline, upstream first.
    pub pipelines: Vec<Vec<usize>>,
}

/// Contracts single-successor/single-predecessor chains into pipelines. Each
/// subnet takes one core.
pub fn allocate_pipelines(dfg: &DataflowGraph, num_cores: usize) -> Result<Pipelines, RuntimeError> {
    let n = dfg.len();
    if num_cores < n {
        return Err(RuntimeError::InsufficientCores { need: n, have: num_cores });
    }
    let order = dfg.topological_order().ok_or(RuntimeError::Cyclic)?;
    let mut pipeline_of = vec![usize::MAX; n];
    let mut pipelines: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let preds = dfg.predecessors(i);
        let joins = match preds.as_slice() {
            [p] if dfg.successors(*p).len() == 1 => Some(pipeline_of[*p]),
            _ => None,
        };
        let p = joins.unwrap_or_else(|| {
            pipelines.push(Vec::new());
            pipelines.len() - 1
        });
        pipeline_of[i] = p;
        pipelines[p].push(i);
    }
    Ok(Pipelines {
        pipeline_of,
        pipelines,
    })
}

/// Timing structure of a DFG given one delay per channel.
pub fn timing_graph(dfg: &DataflowGraph, channel_delays: &[u64]) -> Result<TimingGraph, RuntimeError> {
    if channel_delays.len() != dfg.channels.len() {
        return Err(RuntimeError::DelayCount {
            got: channel_delays.len(),
            want: dfg.channels.len(),
        });
    }
    Ok(TimingGraph {
        exec: dfg.exec_times.clone(),
        edges: dfg
            .channels
            .iter()
            .zip(channel_delays)
            .map(|(c, &d)| (c.src_subnet, c.dst_subnet, d))
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Images overlap across pipelines.
    Pipelined,
    /// Each image finishes before the next starts.
    Sequential,
}

impl std::str::FromStr for ScheduleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pipelined" => Ok(ScheduleMode::Pipelined),
            "sequential" => Ok(ScheduleMode::Sequential),
            other => Err(format!("unknown schedule mode {other:?} (expected pipelined or sequential)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub dfg_hash: String,
    pub mode: ScheduleMode,
    pub batch: usize,
    pub pipelines: Pipelines,
    pub exec_times: Vec<u64>,
    pub channel_delays: Vec<u64>,
    /// `start[i][k]` and `end[i][k]` for subnet `i`, image `k`, in ps.
    pub start: Vec<Vec<u64>>,
    pub end: Vec<Vec<u64>>,
    pub makespan: u64,
    /// Completion time of each image; all images are queued at time 0.
    pub image_latency: Vec<u64>,
    /// Steady-state iteration interval in ps.
    pub interval: f64,
}

impl Schedule {
    pub fn average_latency(&self) -> f64 {
        self.image_latency.iter().sum::<u64>() as f64 / self.batch as f64
    }

    /// Images per second.
    pub fn throughput(&self) -> f64 {
        if self.makespan == 0 {
            return 0.0;
        }
        self.batch as f64 * 1e12 / self.makespan as f64
    }

    pub fn content_hash(&self) -> String {
        crate::artifact::content_hash(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RuntimeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuntimeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn gantt(&self) -> Vec<GanttEntry> {
        let mut v = Vec::new();
        for k in 0..self.batch {
            for i in 0..self.start.len() {
                v.push(GanttEntry {
                    subnet: i,
                    image: k,
                    core: i,
                    pipeline: self.pipelines.pipeline_of[i],
                    start: self.start[i][k],
                    end: self.end[i][k],
                });
            }
        }
        v.sort_by_key(|e| (e.start, e.subnet, e.image));
        v
    }

    pub fn gantt_csv(&self) -> String {
        let mut s = String::from("subnet,image,core,pipeline,start_ps,end_ps\n");
        for e in self.gantt() {
            let _ = writeln!(s, "{},{},{},{},{},{}", e.subnet, e.image, e.core, e.pipeline, e.start, e.end);
        }
        s
    }

    /// Checks the start/end relations every schedule must satisfy.
    pub fn check(&self, dfg: &DataflowGraph) -> Result<(), String> {
        for i in 0..self.start.len() {
            for k in 0..self.batch {
                if self.end[i][k] - self.start[i][k] != self.exec_times[i] {
                    return Err(format!("subnet {i} image {k}: wrong duration"));
                }
                if k > 0 && self.start[i][k] < self.end[i][k - 1] {
                    return Err(format!("subnet {i} overlaps images {} and {k}", k - 1));
                }
            }
        }
        for (c, &d) in dfg.channels.iter().zip(&self.channel_delays) {
            for k in 0..self.batch {
                if self.start[c.dst_subnet][k] < self.end[c.src_subnet][k] + d {
                    return Err(format!("subnet {} starts image {k} before its input", c.dst_subnet));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttEntry {
    pub subnet: usize,
    pub image: usize,
    pub core: usize,
    pub pipeline: usize,
    pub start: u64,
    pub end: u64,
}

/// Self-timed execution by discrete events: subnet `i` starts image `k` once
/// every producer has delivered image `k` and its core has finished `k - 1`.
pub fn self_timed(tg: &TimingGraph, batch: usize) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let n = tg.exec.len();
    let mut preds: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    let mut succs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(j, i, d) in &tg.edges {
        preds[i].push((j, d));
        succs[j].insert(i);
    }
    let mut start = vec![vec![0u64; batch]; n];
    let mut end: Vec<Vec<Option<u64>>> = vec![vec![None; batch]; n];
    let mut next = vec![0usize; n];
    let mut busy = vec![false; n];
    let mut queue: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();

    let try_start = |i: usize,
                     now: u64,
                     next: &mut Vec<usize>,
                     busy: &mut Vec<bool>,
                     end: &Vec<Vec<Option<u64>>>,
                     start: &mut Vec<Vec<u64>>,
                     queue: &mut BinaryHeap<Reverse<(u64, usize, usize)>>| {
        let k = next[i];
        if busy[i] || k >= batch {
            return;
        }
        let mut ready = now;
        for &(j, d) in &preds[i] {
            match end[j][k] {
                Some(e) => ready = ready.max(e + d),
                None => return,
            }
        }
        busy[i] = true;
        start[i][k] = ready;
        queue.push(Reverse((ready + tg.exec[i], i, k)));
    };

    for i in 0..n {
        try_start(i, 0, &mut next, &mut busy, &end, &mut start, &mut queue);
    }
    while let Some(Reverse((t, i, k))) = queue.pop() {
        end[i][k] = Some(t);
        busy[i] = false;
        next[i] += 1;
        try_start(i, t, &mut next, &mut busy, &end, &mut start, &mut queue);
        for &s in &succs[i] {
            try_start(s, t, &mut next, &mut busy, &end, &mut start, &mut queue);
        }
    }
    let end = end
        .into_iter()
        .map(|r| r.into_iter().map(|e| e.expect("every image completes")).collect())
        .collect();
    (start, end)
}

pub fn schedule_batch(
    dfg: &DataflowGraph,
    pipelines: &Pipelines,
    batch: usize,
    channel_delays: &[u64],
) -> Result<Schedule, RuntimeError> {
    schedule(dfg, pipelines, batch, channel_delays, ScheduleMode::Pipelined)
}

pub fn schedule(
    dfg: &DataflowGraph,
    pipelines: &Pipelines,
    batch: usize,
    channel_delays: &[u64],
    mode: ScheduleMode,
) -> Result<Schedule, RuntimeError> {
    if batch == 0 {
        return Err(RuntimeError::EmptyBatch);
    }
    let tg = timing_graph(dfg, channel_delays)?;
    let (start, end, interval) = match mode {
        ScheduleMode::Pipelined => {
            let (s, e) = self_timed(&tg, batch);
            let interval = if dfg.is_empty() {
                0.0
            } else {
                steady_state_interval(&tg.matrix(), INTERVAL_ITERATION_CAP)?
            };
            (s, e, interval)
        }
        ScheduleMode::Sequential => {
            let (s1, e1) = self_timed(&tg, 1);
            let latency = e1.iter().map(|r| r[0]).max().unwrap_or(0);
            let shift = |v: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
                v.iter()
                    .map(|r| (0..batch as u64).map(|k| r[0] + k * latency).collect())
                    .collect()
            };
            (shift(&s1), shift(&e1), latency as f64)
        }
    };
    let image_latency: Vec<u64> = (0..batch)
        .map(|k| end.iter().map(|r| r[k]).max().unwrap_or(0))
        .collect();
    Ok(Schedule {
        dfg_hash: dfg.content_hash(),
        mode,
        batch,
        pipelines: pipelines.clone(),
        exec_times: dfg.exec_times.clone(),
        channel_delays: channel_delays.to_vec(),
        start,
        end,
        makespan: image_latency.iter().copied().max().unwrap_or(0),
        image_latency,
        interval,
    })
}
