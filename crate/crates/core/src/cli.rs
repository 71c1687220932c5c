//! Command-line front end. Every subcommand reads and writes plain files;
//! nothing is carried between invocations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::compiler::{check_dfg, CompileError, DataflowGraph};
use crate::flow::{
    compile_and_profile, plan_interconnect, platform_for, schedule_for, FlowError, FlowOptions, InterconnectKind,
};
use crate::graph::{
    generate_network, load_graph, neighbor_stats, random_dag, save_graph, GraphError, LayerSpec, RandomDagOptions,
    SdcnnGraph, Topology,
};
use crate::hardware::{palette_of_size, Backend, HardwareConfig, HardwareError};
use crate::runtime::{RuntimeError, Schedule, ScheduleMode};
use crate::segbus::{BusError, Interconnect};
use crate::sim::experiments::{
    build_workload, compare_experiments, corpus, corpus_specs, rows_to_csv, suite_variants, ExperimentOptions, Suite,
    Workload,
};
use crate::sim::{simulate_mapped, SimError, Stimulus, StimulusOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("hardware: {0}")]
    Hardware(#[from] HardwareError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("schedule: {0}")]
    Runtime(#[from] RuntimeError),
    #[error("interconnect: {0}")]
    Bus(#[from] BusError),
    #[error("simulate: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("loading {what} {}: {msg}", path.display())]
    Load {
        what: &'static str,
        path: PathBuf,
        msg: String,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "sentryos", version, about = "Compile, schedule and simulate spiking CNNs on many-core neuromorphic hardware")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Hardware configuration JSON; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub hw: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the default hardware configuration.
    InitHw {
        /// Palette of 1, 2, 4 or 8 core geometries.
        #[arg(long, default_value_t = 4)]
        palette_size: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a graph from a layer spec or at random.
    Generate {
        /// JSON list of layer specs.
        #[arg(long, conflicts_with = "random")]
        spec: Option<PathBuf>,
        /// Random layered DAG: chain, residual or dense.
        #[arg(long)]
        random: Option<Topology>,
        #[arg(long, default_value_t = 6)]
        layers: usize,
        #[arg(long, default_value_t = 6)]
        width: usize,
        #[arg(long, default_value_t = 0.0)]
        prune: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Write the five-network synthetic corpus into a directory.
    GenerateCorpus {
        #[command(flatten)]
        common: Common,
    },
    /// Neighbor statistics of a graph.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Random input spike trains for a graph.
    Stimulus {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 4)]
        images: usize,
        #[arg(long, default_value_t = 8)]
        steps: u64,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Compile and profile a graph into a dataflow graph.
    Compile {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "mubrain")]
        backend: Backend,
        /// Profiling stimulus; random when omitted.
        #[arg(long)]
        stimulus: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        profile_images: usize,
        #[arg(long)]
        no_merge: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Schedule a batch of images on a compiled graph.
    Schedule {
        #[arg(long)]
        dfg: PathBuf,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value = "pipelined")]
        mode: ScheduleMode,
        /// Interconnect whose latencies the schedule assumes: sb or noc.
        #[arg(long, default_value = "sb")]
        interconnect: InterconnectKind,
        /// Also write the Gantt chart as CSV.
        #[arg(long)]
        gantt: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Plan the segmented bus (or mesh NoC) for a scheduled graph.
    PlanBus {
        #[arg(long)]
        dfg: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value = "sb")]
        interconnect: InterconnectKind,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the mapped graph.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        dfg: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        interconnect: PathBuf,
        #[arg(long)]
        stimulus: PathBuf,
        /// Also write per-core energy as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a comparison suite over a corpus and write CSV.
    Compare {
        /// heterogeneity (fig9), interconnect (fig8), pipelining or backends.
        #[arg(long)]
        suite: Suite,
        /// Directory of graph JSON files; the built-in corpus when omitted.
        #[arg(long)]
        workloads: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        images: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(io(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io(path))
}

fn load<'a, T, E: std::fmt::Display>(what: &'static str, path: &'a Path, f: impl FnOnce(&'a Path) -> Result<T, E>) -> Result<T, CliError> {
    f(path).map_err(|e| CliError::Load {
        what,
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn hardware(common: &Common) -> Result<HardwareConfig, CliError> {
    Ok(match &common.hw {
        Some(p) => load("hardware config", p, HardwareConfig::load)?,
        None => HardwareConfig::default(),
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_workloads(dir: &Path) -> Result<Vec<Workload>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io(dir)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("{}: no graph files", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let graph = load("graph", p, load_graph)?;
            Ok(Workload {
                name: graph.name().to_string(),
                graph,
            })
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::InitHw { palette_size, common } => {
            let cfg = HardwareConfig::default();
            let cfg = cfg.with_palette(palette_of_size(palette_size, cfg.cost_model.synapse_multiplicity)?);
            cfg.validate()?;
            emit(common.out.as_deref(), &(cfg.to_json() + "\n"))
        }
        Command::Generate {
            spec,
            random,
            layers,
            width,
            prune,
            common,
        } => {
            let g = match (spec, random) {
                (Some(p), _) => {
                    let layers: Vec<LayerSpec> =
                        serde_json::from_str(&read(&p)?).map_err(|e| GraphError::Generator(e.to_string()))?;
                    generate_network(&layers, prune, common.seed)?
                }
                (None, Some(topology)) => random_dag(
                    &RandomDagOptions {
                        topology,
                        layers,
                        max_width: width,
                        prune,
                        ..Default::default()
                    },
                    common.seed,
                ),
                (None, None) => return Err(CliError::Usage("generate needs --spec or --random".into())),
            };
            emit(common.out.as_deref(), &(g.to_json() + "\n"))
        }
        Command::GenerateCorpus { common } => {
            let dir = common
                .out
                .ok_or_else(|| CliError::Usage("generate-corpus needs --out <dir>".into()))?;
            std::fs::create_dir_all(&dir).map_err(io(&dir))?;
            for spec in corpus_specs() {
                let w = build_workload(&spec, common.seed)?;
                save_graph(&w.graph, dir.join(format!("{}.json", w.name)))?;
            }
            Ok(())
        }
        Command::Stats { graph, common } => {
            let g = load("graph", &graph, load_graph)?;
            emit(common.out.as_deref(), &json(&neighbor_stats(&g)))
        }
        Command::Stimulus {
            graph,
            images,
            steps,
            rate,
            common,
        } => {
            let g = load("graph", &graph, load_graph)?;
            let opts = StimulusOptions {
                images,
                steps,
                rate,
                ..Default::default()
            };
            emit(common.out.as_deref(), &(Stimulus::random(&g, &opts, common.seed).to_json() + "\n"))
        }
        Command::Compile {
            graph,
            backend,
            stimulus,
            profile_images,
            no_merge,
            common,
        } => {
            let g = load("graph", &graph, load_graph)?;
            let cfg = hardware(&common)?;
            let profile = profile_stimulus(&g, stimulus.as_deref(), profile_images, common.seed)?;
            let opts = FlowOptions {
                backend,
                merge: !no_merge,
                ..Default::default()
            };
            let dfg = compile_and_profile(&g, &cfg, &profile, &opts)?;
            check_dfg(&g, &dfg)?;
            emit(common.out.as_deref(), &(dfg.to_json() + "\n"))
        }
        Command::Schedule {
            dfg,
            batch,
            mode,
            interconnect,
            gantt,
            common,
        } => {
            let d = load("dataflow graph", &dfg, DataflowGraph::load)?;
            let cfg = hardware(&common)?;
            let s = schedule_for(&d, &cfg, interconnect, batch, mode)?;
            if let Some(p) = gantt {
                emit(Some(&p), &s.gantt_csv())?;
            }
            emit(common.out.as_deref(), &(s.to_json() + "\n"))
        }
        Command::PlanBus {
            dfg,
            schedule,
            interconnect,
            common,
        } => {
            let d = load("dataflow graph", &dfg, DataflowGraph::load)?;
            let s = load("schedule", &schedule, Schedule::load)?;
            if s.dfg_hash != d.content_hash() {
                return Err(SimError::Inconsistent("schedule was built for a different dataflow graph".into()).into());
            }
            let cfg = hardware(&common)?;
            let (ic, _) = plan_interconnect(&d, &s, &cfg, interconnect)?;
            emit(common.out.as_deref(), &(ic.to_json() + "\n"))
        }
        Command::Simulate {
            graph,
            dfg,
            schedule,
            interconnect,
            stimulus,
            csv,
            common,
        } => {
            let g = load("graph", &graph, load_graph)?;
            let d = load("dataflow graph", &dfg, DataflowGraph::load)?;
            let s = load("schedule", &schedule, Schedule::load)?;
            let ic = load("interconnect", &interconnect, Interconnect::load)?;
            let stim = load("stimulus", &stimulus, Stimulus::load)?;
            let cfg = hardware(&common)?;
            if ic.dfg_hash() != d.content_hash() {
                return Err(SimError::Inconsistent("interconnect was planned for a different dataflow graph".into()).into());
            }
            let platform = platform_for(&d, &cfg, ic)?;
            let report = simulate_mapped(&g, &d, &platform, &s, &stim, &cfg)?;
            if let Some(p) = csv {
                emit(Some(&p), &report.to_csv())?;
            }
            emit(common.out.as_deref(), &(report.to_json() + "\n"))
        }
        Command::Compare {
            suite,
            workloads,
            images,
            common,
        } => {
            let w = match workloads {
                Some(dir) => load_workloads(&dir)?,
                None => corpus(common.seed),
            };
            let cfg = hardware(&common)?;
            let opts = ExperimentOptions {
                images,
                seed: common.seed,
                ..Default::default()
            };
            let rows = compare_experiments(&w, &suite_variants(suite), &cfg, &opts)?;
            emit(common.out.as_deref(), &rows_to_csv(&rows))
        }
    }
}

fn profile_stimulus(g: &SdcnnGraph, path: Option<&Path>, images: usize, seed: u64) -> Result<Stimulus, CliError> {
    Ok(match path {
        Some(p) => load("stimulus", p, Stimulus::load)?,
        None => Stimulus::random(
            g,
            &StimulusOptions {
                images,
                ..Default::default()
            },
            seed,
        ),
    })
}
