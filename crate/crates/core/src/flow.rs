//! The full compile, profile, schedule, plan and simulate chain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{compile_with, profile_channels, CompileError, CompileOptions, DataflowGraph};
use crate::graph::SdcnnGraph;
use crate::hardware::{Backend, CoreId, HardwareConfig, HardwareError, HardwarePlatform};
use crate::runtime::{allocate_pipelines, schedule, Pipelines, RuntimeError, Schedule, ScheduleMode};
use crate::segbus::{place_cores, plan_bus, provisional_bus, BusError, Interconnect, LaneReport, NocDescriptor};
use crate::sim::{simulate_mapped, Dynamics, SimError, SimReport, Stimulus};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("schedule: {0}")]
    Runtime(#[from] RuntimeError),
    #[error("interconnect: {0}")]
    Bus(#[from] BusError),
    #[error("platform: {0}")]
    Hardware(#[from] HardwareError),
    #[error("simulate: {0}")]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterconnectKind {
    Sb,
    Noc,
}

impl std::str::FromStr for InterconnectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sb" | "segmented-bus" => Ok(InterconnectKind::Sb),
            "noc" => Ok(InterconnectKind::Noc),
            other => Err(format!("unknown interconnect {other:?} (expected sb or noc)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub backend: Backend,
    pub interconnect: InterconnectKind,
    pub mode: ScheduleMode,
    pub merge: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            backend: Backend::Mubrain,
            interconnect: InterconnectKind::Sb,
            mode: ScheduleMode::Pipelined,
            merge: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Flow {
    pub dfg: DataflowGraph,
    pub pipelines: Pipelines,
    pub schedule: Schedule,
    pub platform: HardwarePlatform,
    pub lanes: Option<LaneReport>,
    pub report: SimReport,
}

pub fn compile_and_profile(
    g: &SdcnnGraph,
    cfg: &HardwareConfig,
    profile: &Stimulus,
    opts: &FlowOptions,
) -> Result<DataflowGraph, FlowError> {
    let palette = cfg.palette_for(opts.backend);
    let dfg = compile_with(
        g,
        &palette,
        &cfg.cost_model,
        &CompileOptions {
            backend: opts.backend,
            relay_policy: cfg.compiler.relay_policy,
            merge: opts.merge,
        },
    )?;
    Ok(profile_channels(&dfg, g, profile, &Dynamics::from_config(cfg), (&cfg.timing).into())?)
}

/// Interconnect used to derive channel latencies before lanes are planned.
pub fn latency_model(dfg: &DataflowGraph, cfg: &HardwareConfig, kind: InterconnectKind) -> Result<Interconnect, BusError> {
    Ok(match kind {
        InterconnectKind::Sb => provisional_bus(dfg)?,
        InterconnectKind::Noc => Interconnect::Noc(NocDescriptor::new(dfg, &place_cores(dfg)?, cfg.interconnect.noc.mesh)?),
    })
}

pub fn schedule_for(
    dfg: &DataflowGraph,
    cfg: &HardwareConfig,
    kind: InterconnectKind,
    batch: usize,
    mode: ScheduleMode,
) -> Result<Schedule, FlowError> {
    let pipelines = allocate_pipelines(dfg, dfg.len())?;
    let delays = latency_model(dfg, cfg, kind)?.channel_delays(dfg, &cfg.interconnect);
    Ok(schedule(dfg, &pipelines, batch, &delays, mode)?)
}

/// Final interconnect for a scheduled DFG; bus lanes come from the
/// schedule's activity windows.
pub fn plan_interconnect(
    dfg: &DataflowGraph,
    sched: &Schedule,
    cfg: &HardwareConfig,
    kind: InterconnectKind,
) -> Result<(Interconnect, Option<LaneReport>), FlowError> {
    Ok(match kind {
        InterconnectKind::Sb => {
            let (program, lanes) = plan_bus(dfg, sched, &cfg.interconnect)?;
            (Interconnect::SegmentedBus(program), Some(lanes))
        }
        InterconnectKind::Noc => (latency_model(dfg, cfg, kind)?, None),
    })
}

pub fn platform_for(dfg: &DataflowGraph, cfg: &HardwareConfig, ic: Interconnect) -> Result<HardwarePlatform, FlowError> {
    let palette = cfg.palette_for(dfg.backend);
    let cores = dfg
        .subnets
        .iter()
        .map(|s| {
            let c = s.assigned_config.clone().ok_or_else(|| {
                CompileError::Invariant(format!("subnet {} has no assigned config", s.id))
            })?;
            Ok((CoreId(s.id), c))
        })
        .collect::<Result<Vec<_>, CompileError>>()?;
    Ok(HardwarePlatform::new(cores, ic, palette)?)
}

/// Compiles `g`, profiles it on `profile`, schedules `eval` as one batch,
/// plans the interconnect and simulates.
pub fn run_flow(
    g: &SdcnnGraph,
    cfg: &HardwareConfig,
    profile: &Stimulus,
    eval: &Stimulus,
    opts: &FlowOptions,
) -> Result<Flow, FlowError> {
    let dfg = compile_and_profile(g, cfg, profile, opts)?;
    let sched = schedule_for(&dfg, cfg, opts.interconnect, eval.images.len(), opts.mode)?;
    let (ic, lanes) = plan_interconnect(&dfg, &sched, cfg, opts.interconnect)?;
    let platform = platform_for(&dfg, cfg, ic)?;
    let report = simulate_mapped(g, &dfg, &platform, &sched, eval, cfg)?;
    Ok(Flow {
        pipelines: sched.pipelines.clone(),
        dfg,
        schedule: sched,
        platform,
        lanes,
        report,
    })
}
