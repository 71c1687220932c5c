//! Synthetic workload corpus and the comparison sweeps run over it.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{run_flow, FlowError, FlowOptions, InterconnectKind};
use crate::graph::{generate_network_with, GenerateOptions, GraphError, LayerSpec, Neuron, SdcnnGraph};
use crate::hardware::{palette_of_size, Backend, HardwareConfig};
use crate::runtime::ScheduleMode;

use super::{Stimulus, StimulusOptions};

/// Corpus neurons fire after about `fan_in / CORPUS_FAN_IN_PER_THRESHOLD`
/// net excitatory spikes, which keeps activity roughly level across layers.
pub const CORPUS_FAN_IN_PER_THRESHOLD: usize = 2;
pub const CORPUS_PRUNE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub prune: f64,
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub name: String,
    pub graph: SdcnnGraph,
}

fn input(c: usize, hw: usize) -> LayerSpec {
    LayerSpec::Input {
        channels: c,
        height: hw,
        width: hw,
    }
}

fn conv(out: usize, kernel: usize, padding: usize, from: Option<usize>) -> LayerSpec {
    LayerSpec::Conv {
        out_channels: out,
        kernel,
        stride: 1,
        padding,
        from,
    }
}

fn pool(from: Option<usize>) -> LayerSpec {
    LayerSpec::Pool {
        kernel: 2,
        stride: None,
        from,
    }
}

fn dense(units: usize) -> LayerSpec {
    LayerSpec::Dense { units, from: None }
}

/// Five small networks shaped after LeNet, AlexNet, VGG, ResNet and DenseNet.
pub fn corpus_specs() -> Vec<WorkloadSpec> {
    let spec = |name: &str, layers: Vec<LayerSpec>| WorkloadSpec {
        name: name.into(),
        layers,
        prune: CORPUS_PRUNE,
    };
    vec![
        spec(
            "lenet",
            vec![
                input(1, 12),
                conv(4, 5, 0, None),
                pool(None),
                conv(8, 3, 1, None),
                pool(None),
                dense(10),
            ],
        ),
        spec(
            "alexnet",
            vec![
                input(2, 12),
                conv(6, 3, 1, None),
                pool(None),
                conv(8, 3, 1, None),
                conv(8, 3, 1, None),
                pool(None),
                dense(16),
                dense(10),
            ],
        ),
        spec(
            "vgg",
            vec![
                input(1, 8),
                conv(4, 3, 1, None),
                conv(4, 3, 1, None),
                pool(None),
                conv(8, 3, 1, None),
                conv(8, 3, 1, None),
                pool(None),
                dense(10),
            ],
        ),
        spec(
            "resnet",
            vec![
                input(1, 8),
                conv(4, 3, 1, None),
                conv(4, 3, 1, None),
                conv(4, 3, 1, None),
                LayerSpec::Add { from: vec![1, 3] },
                pool(None),
                dense(10),
            ],
        ),
        spec(
            "densenet",
            vec![
                input(1, 8),
                conv(4, 3, 1, None),
                conv(4, 3, 1, Some(1)),
                LayerSpec::Concat { from: vec![1, 2] },
                conv(4, 3, 1, Some(3)),
                LayerSpec::Concat { from: vec![1, 2, 4] },
                pool(None),
                dense(10),
            ],
        ),
    ]
}

pub fn build_workload(spec: &WorkloadSpec, seed: u64) -> Result<Workload, GraphError> {
    let opts = GenerateOptions {
        name: spec.name.clone(),
        ..Default::default()
    };
    let g = generate_network_with(&spec.layers, spec.prune, seed, &opts)?;
    let neurons = g
        .neurons()
        .iter()
        .enumerate()
        .map(|(i, n)| Neuron {
            threshold: (g.in_degree(i) / CORPUS_FAN_IN_PER_THRESHOLD).max(1) as u32,
            ..n.clone()
        })
        .collect();
    Ok(Workload {
        name: spec.name.clone(),
        graph: SdcnnGraph::new(g.name(), g.weight_bits(), neurons, g.synapses().to_vec())?,
    })
}

pub fn corpus(seed: u64) -> Vec<Workload> {
    corpus_specs()
        .iter()
        .map(|s| build_workload(s, seed).expect("corpus specs are well formed"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Palettes of 1, 2, 4 and 8 core geometries.
    Heterogeneity,
    /// Segmented bus against a mesh NoC.
    Interconnect,
    /// Pipelined batches against one image at a time.
    Pipelining,
    /// The same graph compiled for each backend.
    Backends,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heterogeneity" | "fig9" => Ok(Suite::Heterogeneity),
            "interconnect" | "fig8" => Ok(Suite::Interconnect),
            "pipelining" => Ok(Suite::Pipelining),
            "backends" => Ok(Suite::Backends),
            other => Err(format!(
                "unknown suite {other:?} (expected heterogeneity, interconnect, pipelining or backends)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub palette_size: usize,
    pub interconnect: InterconnectKind,
    pub mode: ScheduleMode,
    pub backend: Backend,
}

impl Default for Variant {
    fn default() -> Self {
        Variant {
            label: "default".into(),
            palette_size: 4,
            interconnect: InterconnectKind::Sb,
            mode: ScheduleMode::Pipelined,
            backend: Backend::Mubrain,
        }
    }
}

/// Variants of a suite; the first is the normalization reference.
pub fn suite_variants(suite: Suite) -> Vec<Variant> {
    let v = Variant::default();
    match suite {
        Suite::Heterogeneity => [1, 2, 4, 8]
            .into_iter()
            .map(|n| Variant {
                label: format!("{n}-config"),
                palette_size: n,
                ..v.clone()
            })
            .collect(),
        Suite::Interconnect => vec![
            Variant {
                label: "noc".into(),
                interconnect: InterconnectKind::Noc,
                ..v.clone()
            },
            Variant {
                label: "sb".into(),
                ..v
            },
        ],
        Suite::Pipelining => vec![
            Variant {
                label: "sequential".into(),
                mode: ScheduleMode::Sequential,
                ..v.clone()
            },
            Variant {
                label: "pipelined".into(),
                ..v
            },
        ],
        Suite::Backends => [Backend::Dynaps, Backend::Loihi, Backend::Mubrain]
            .into_iter()
            .map(|b| Variant {
                label: format!("{b:?}").to_lowercase(),
                backend: b,
                ..v.clone()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub workload: String,
    pub variant: String,
    pub neurons: usize,
    pub subnets: usize,
    pub relays: usize,
    pub pipelines: usize,
    pub lanes: usize,
    pub spikes: u64,
    pub static_fj: u64,
    pub dynamic_fj: u64,
    pub interconnect_fj: u64,
    pub total_fj: u64,
    pub interconnect_latency_ps: u64,
    pub makespan_ps: u64,
    pub average_latency_ps: f64,
    pub throughput_ips: f64,
    pub interval_ps: f64,
    /// `total_fj` over the reference variant's.
    pub norm_energy: f64,
    /// `interconnect_fj` over the reference variant's.
    pub norm_interconnect_energy: f64,
    /// `throughput_ips` over the reference variant's.
    pub norm_throughput: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOptions {
    pub images: usize,
    pub stimulus: StimulusOptions,
    pub seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            images: 8,
            stimulus: StimulusOptions::default(),
            seed: 1,
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Runs every variant on every workload, in parallel, and returns rows in
/// workload-major order with ratios against each workload's first variant.
pub fn compare_experiments(
    workloads: &[Workload],
    variants: &[Variant],
    cfg: &HardwareConfig,
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRow>, FlowError> {
    let jobs: Vec<(usize, usize)> = (0..workloads.len())
        .flat_map(|w| (0..variants.len()).map(move |v| (w, v)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(w, v)| run_one(&workloads[w], &variants[v], cfg, opts))
        .collect::<Result<Vec<_>, _>>()?;
    for chunk in rows.chunks_mut(variants.len().max(1)) {
        let (e, i, t) = (
            chunk[0].total_fj as f64,
            chunk[0].interconnect_fj as f64,
            chunk[0].throughput_ips,
        );
        for r in chunk {
            r.norm_energy = ratio(r.total_fj as f64, e);
            r.norm_interconnect_energy = ratio(r.interconnect_fj as f64, i);
            r.norm_throughput = ratio(r.throughput_ips, t);
        }
    }
    Ok(rows)
}

fn run_one(w: &Workload, v: &Variant, cfg: &HardwareConfig, opts: &ExperimentOptions) -> Result<ExperimentRow, FlowError> {
    let cfg = if v.backend == Backend::Mubrain {
        cfg.with_palette(palette_of_size(v.palette_size, cfg.cost_model.synapse_multiplicity)?)
    } else {
        cfg.clone()
    };
    let stim = Stimulus::random(
        &w.graph,
        &StimulusOptions {
            images: opts.images,
            ..opts.stimulus.clone()
        },
        opts.seed,
    );
    let f = run_flow(
        &w.graph,
        &cfg,
        &stim,
        &stim,
        &FlowOptions {
            backend: v.backend,
            interconnect: v.interconnect,
            mode: v.mode,
            merge: true,
        },
    )?;
    let r = &f.report;
    Ok(ExperimentRow {
        workload: w.name.clone(),
        variant: v.label.clone(),
        neurons: w.graph.len(),
        subnets: f.dfg.len(),
        relays: f.dfg.relay_count(),
        pipelines: f.pipelines.pipelines.len(),
        lanes: f.lanes.as_ref().map_or(0, |l| l.lanes),
        spikes: r.total_spikes,
        static_fj: r.static_fj,
        dynamic_fj: r.dynamic_fj,
        interconnect_fj: r.interconnect_fj,
        total_fj: r.total_fj,
        interconnect_latency_ps: r.interconnect_latency_ps,
        makespan_ps: r.makespan_ps,
        average_latency_ps: r.average_latency_ps,
        throughput_ips: r.throughput_ips,
        interval_ps: r.interval_ps,
        norm_energy: 1.0,
        norm_interconnect_energy: 1.0,
        norm_throughput: 1.0,
    })
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from(
        "workload,variant,neurons,subnets,relays,pipelines,lanes,spikes,static_fj,dynamic_fj,\
         interconnect_fj,total_fj,interconnect_latency_ps,makespan_ps,average_latency_ps,\
         throughput_ips,interval_ps,norm_energy,norm_interconnect_energy,norm_throughput\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6}",
            r.workload,
            r.variant,
            r.neurons,
            r.subnets,
            r.relays,
            r.pipelines,
            r.lanes,
            r.spikes,
            r.static_fj,
            r.dynamic_fj,
            r.interconnect_fj,
            r.total_fj,
            r.interconnect_latency_ps,
            r.makespan_ps,
            r.average_latency_ps,
            r.throughput_ips,
            r.interval_ps,
            r.norm_energy,
            r.norm_interconnect_energy,
            r.norm_throughput
        );
    }
    s
}
