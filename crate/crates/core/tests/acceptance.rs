//! Acceptance suite. Each test prints one PASS/FAIL line for its criterion,
//! written straight to stdout so it shows without `--nocapture`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentryos::cli::{run, Cli};
use sentryos::compiler::{check_dfg, compile, Channel, DataflowGraph, SubNetwork};
use sentryos::flow::{compile_and_profile, plan_interconnect, platform_for, schedule_for, FlowOptions, InterconnectKind};
use sentryos::graph::{random_dag, Neuron, NeuronKind, RandomDagOptions, SdcnnGraph, Synapse, Topology};
use sentryos::hardware::{preset_palette, Backend, CoreConfig, CostModel, HardwareConfig, MemoryModel, RelayPolicy};
use sentryos::runtime::{
    allocate_pipelines, maxplus_evolve, schedule_batch, steady_state_interval, timing_graph, MaxPlusMatrix, ScheduleMode,
    EPS, INTERVAL_ITERATION_CAP,
};
use sentryos::segbus::{min_lanes, Demand};
use sentryos::sim::experiments::{compare_experiments, corpus, suite_variants, ExperimentOptions, ExperimentRow, Suite};
use sentryos::sim::{simulate_direct, simulate_mapped, Dynamics, Stimulus, StimulusOptions};

/// Relative tolerance on the calibrated baseline static power.
const STATIC_POWER_REL_TOL: f64 = 1e-9;
/// Relative tolerance between the steady-state interval and the simulated slope.
const INTERVAL_REL_TOL: f64 = 1e-3;
/// Minimum 4-config saving against the conservative design.
const MIN_HETERO_SAVING: f64 = 0.15;
/// Largest admitted 8-config improvement over 4-config.
const MAX_EIGHT_VS_FOUR_GAP: f64 = 0.05;
/// Minimum pipelined throughput gain over the sequential baseline.
const MIN_PIPELINE_GAIN: f64 = 1.10;
/// Relative tolerance on large-batch throughput against the bottleneck.
const BOTTLENECK_REL_TOL: f64 = 0.02;
const PROPTEST_CASES: u32 = 1000;

fn report(criterion: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion}: {verdict}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {criterion} failed: {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_calibration() {
    let m = CostModel::default();
    let base = CoreConfig::baseline(m.synapse_multiplicity);
    let p = m.static_power(&base);
    let rel = (p - 40.3).abs() / 40.3;
    let e = m.spike_energy_fj(MemoryModel::Integrated);
    let neurons = base.neuron_capacity;
    let ok = base.synapse_capacity == 38_000 && neurons == 336 && rel <= STATIC_POWER_REL_TOL && e == 26_000;
    report(
        1,
        ok,
        &format!(
            "baseline {neurons} neurons / {} synapses, static {p} uW (rel err {rel:.1e}), {} pJ/spike",
            base.synapse_capacity,
            e as f64 / 1000.0
        ),
    );
}

// ---------------------------------------------------------------- 2

fn single_image(g: &SdcnnGraph, seed: u64) -> Stimulus {
    Stimulus::random(
        g,
        &StimulusOptions {
            images: 1,
            ..Default::default()
        },
        seed,
    )
}

#[test]
fn criterion_2_mapped_equals_direct() {
    const GRAPHS: u64 = 60;
    const STIMULI: u64 = 20;
    let cfg = HardwareConfig::default();
    let backends = [Backend::Mubrain, Backend::Dynaps, Backend::Loihi];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut compared, mut mismatches, mut largest) = (0, Vec::new(), 0);
    for k in 0..GRAPHS {
        let layers = rng.gen_range(3..=10);
        let opts = RandomDagOptions {
            topology: Topology::ALL[k as usize % 3],
            layers,
            max_width: rng.gen_range(3..=(200 / layers).min(20)),
            fan_in: rng.gen_range(1..=5),
            prune: rng.gen_range(0.0..=0.5),
            max_threshold: rng.gen_range(1..=4),
        };
        let g = random_dag(&opts, 1000 + k);
        assert!(g.len() <= 200);
        largest = largest.max(g.len());
        let flow = FlowOptions {
            backend: backends[k as usize % 3],
            ..Default::default()
        };
        let dfg = compile_and_profile(&g, &cfg, &single_image(&g, k), &flow).unwrap();
        let sched = schedule_for(&dfg, &cfg, InterconnectKind::Sb, 1, ScheduleMode::Pipelined).unwrap();
        let (ic, _) = plan_interconnect(&dfg, &sched, &cfg, InterconnectKind::Sb).unwrap();
        let platform = platform_for(&dfg, &cfg, ic).unwrap();
        for s in 0..STIMULI {
            let stim = single_image(&g, 50_000 + k * STIMULI + s);
            let mapped = simulate_mapped(&g, &dfg, &platform, &sched, &stim, &cfg).unwrap();
            let direct = simulate_direct(&g, &stim, &Dynamics::from_config(&cfg)).unwrap();
            compared += 1;
            if mapped.outputs != direct.outputs {
                mismatches.push((k, s));
            }
        }
    }
    report(
        2,
        mismatches.is_empty(),
        &format!(
            "{GRAPHS} graphs (up to {largest} neurons) x {STIMULI} stimuli, {compared} runs, {} mismatches {:?}",
            mismatches.len(),
            &mismatches[..mismatches.len().min(5)]
        ),
    );
}

// ---------------------------------------------------------------- 3

fn fixture_graph(n: u32, edges: &[(u32, u32, i32)]) -> SdcnnGraph {
    let mut has_in = vec![false; n as usize];
    for &(_, d, _) in edges {
        has_in[d as usize] = true;
    }
    let neurons = (0..n)
        .map(|i| Neuron::new(i, if has_in[i as usize] { NeuronKind::Hidden } else { NeuronKind::Input }, 1))
        .collect();
    SdcnnGraph::new("two-output", 2, neurons, edges.iter().map(|&(s, d, w)| Synapse::new(s, d, w)).collect()).unwrap()
}

/// Trunk 0..=8 with side inputs 15 and 16, branching into outputs 11 and 14.
fn two_output_example() -> SdcnnGraph {
    fixture_graph(
        17,
        &[
            (0, 1, 1),
            (0, 2, 1),
            (1, 2, 1),
            (2, 3, 1),
            (3, 4, 1),
            (4, 5, 1),
            (5, 6, 1),
            (5, 7, 1),
            (6, 7, 1),
            (7, 8, 1),
            (8, 9, 1),
            (8, 12, 1),
            (9, 10, 1),
            (9, 11, -1),
            (10, 11, 1),
            (12, 13, 1),
            (13, 14, 1),
            (15, 4, 1),
            (16, 7, -1),
        ],
    )
}

#[test]
fn criterion_3_structural_checks() {
    let cfg = HardwareConfig::default();
    let mut failures = Vec::new();
    let mut checked = 0;
    for w in corpus(1) {
        for backend in [Backend::Mubrain, Backend::Dynaps, Backend::Loihi] {
            let flow = FlowOptions {
                backend,
                ..Default::default()
            };
            let dfg = compile_and_profile(&w.graph, &cfg, &single_image(&w.graph, 3), &flow).unwrap();
            checked += 1;
            if let Err(e) = check_dfg(&w.graph, &dfg) {
                failures.push(format!("{} {backend:?}: {e}", w.name));
            }
        }
    }
    let g = two_output_example();
    let m = CostModel::default();
    let dfg = compile(&g, &preset_palette(m.synapse_multiplicity), &m, Backend::Mubrain).unwrap();
    if let Err(e) = check_dfg(&g, &dfg) {
        failures.push(format!("two-output example: {e}"));
    }
    let ok = failures.is_empty() && dfg.len() == 4;
    report(
        3,
        ok,
        &format!(
            "{checked} corpus compilations checked, {} failures {:?}; two-output example gives {} sub-networks",
            failures.len(),
            failures,
            dfg.len()
        ),
    );
}

// ---------------------------------------------------------------- 4

fn dfg_of(exec: &[u64], edges: &[(usize, usize)]) -> DataflowGraph {
    DataflowGraph {
        name: "random".into(),
        backend: Backend::Mubrain,
        relay_policy: RelayPolicy::Always,
        source_hash: String::new(),
        subnets: (0..exec.len()).map(SubNetwork::empty).collect(),
        channels: edges
            .iter()
            .map(|&(a, b)| Channel {
                src_subnet: a,
                dst_subnet: b,
                synapses: Vec::new(),
                profiled_spike_count: 0,
            })
            .collect(),
        exec_times: exec.to_vec(),
        profiled_images: 0,
    }
}

/// Self-timed execution by event queue: a sub-network starts image `k` once
/// it has finished image `k - 1` and every input channel has delivered the
/// image `k` token. Returns `end[i][k]`.
fn event_oracle(exec: &[u64], edges: &[(usize, usize)], delays: &[u64], images: usize) -> Vec<Vec<u64>> {
    let n = exec.len();
    let mut inputs = vec![0usize; n];
    for &(_, b) in edges {
        inputs[b] += 1;
    }
    let mut arrived = vec![vec![0usize; images]; n];
    let mut next = vec![0usize; n];
    let mut busy = vec![false; n];
    let mut end = vec![vec![0u64; images]; n];
    // (time, kind, subnet, image): kind 0 is a finish, 1 a token arrival.
    let mut queue: BinaryHeap<Reverse<(u64, u8, usize, usize)>> = BinaryHeap::new();
    let try_start = |i: usize,
                     now: u64,
                     next: &mut Vec<usize>,
                     busy: &mut Vec<bool>,
                     arrived: &Vec<Vec<usize>>,
                     queue: &mut BinaryHeap<Reverse<(u64, u8, usize, usize)>>| {
        let k = next[i];
        if !busy[i] && k < images && arrived[i][k] == inputs[i] {
            busy[i] = true;
            next[i] += 1;
            queue.push(Reverse((now + exec[i], 0, i, k)));
        }
    };
    for i in 0..n {
        try_start(i, 0, &mut next, &mut busy, &arrived, &mut queue);
    }
    while let Some(Reverse((t, kind, i, k))) = queue.pop() {
        if kind == 0 {
            end[i][k] = t;
            busy[i] = false;
            for (c, &(a, b)) in edges.iter().enumerate() {
                if a == i {
                    queue.push(Reverse((t + delays[c], 1, b, k)));
                }
            }
        } else {
            arrived[i][k] += 1;
        }
        try_start(i, t, &mut next, &mut busy, &arrived, &mut queue);
    }
    end
}

struct RandomDfg {
    exec: Vec<u64>,
    edges: Vec<(usize, usize)>,
    delays: Vec<u64>,
}

fn random_dfg(rng: &mut ChaCha8Rng) -> RandomDfg {
    let n = rng.gen_range(1..=12);
    let exec = (0..n).map(|_| rng.gen_range(1..1000)).collect();
    let p = rng.gen_range(0.0..0.6);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let delays = edges.iter().map(|_| rng.gen_range(0..300)).collect();
    RandomDfg { exec, edges, delays }
}

#[test]
fn criterion_4_maxplus_exactness() {
    const DFGS: usize = 150;
    const ITERATIONS: usize = 50;
    const LONG_RUN: usize = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut end_mismatch, mut worst_rel, mut compared) = (0, 0.0f64, 0);
    for _ in 0..DFGS {
        let r = random_dfg(&mut rng);
        let dfg = dfg_of(&r.exec, &r.edges);
        let t = timing_graph(&dfg, &r.delays).unwrap().matrix();
        let x = maxplus_evolve(&t, &vec![0.0; dfg.len()], ITERATIONS);
        let oracle = event_oracle(&r.exec, &r.edges, &r.delays, ITERATIONS);
        let pipelines = allocate_pipelines(&dfg, dfg.len()).unwrap();
        let sched = schedule_batch(&dfg, &pipelines, ITERATIONS, &r.delays).unwrap();
        for k in 0..ITERATIONS {
            for i in 0..dfg.len() {
                compared += 1;
                if x[k][i] != oracle[i][k] as f64 || sched.end[i][k] != oracle[i][k] {
                    end_mismatch += 1;
                }
            }
        }
        let lambda = steady_state_interval(&t, INTERVAL_ITERATION_CAP).unwrap();
        let long = event_oracle(&r.exec, &r.edges, &r.delays, LONG_RUN);
        let done = |k: usize| long.iter().map(|e| e[k]).max().unwrap();
        let half = LONG_RUN / 2;
        let slope = (done(LONG_RUN - 1) - done(half - 1)) as f64 / half as f64;
        worst_rel = worst_rel.max((lambda - slope).abs() / slope);
    }
    let ok = end_mismatch == 0 && worst_rel <= INTERVAL_REL_TOL;
    report(
        4,
        ok,
        &format!(
            "{DFGS} DFGs x {ITERATIONS} iterations, {compared} end times, {end_mismatch} mismatches; worst interval vs slope rel err {worst_rel:.2e}"
        ),
    );
}

// ---------------------------------------------------------------- 5

fn demand(a: usize, b: usize, windows: &[(u64, u64)]) -> Demand {
    Demand {
        span: (a.min(b), a.max(b)),
        windows: windows.to_vec(),
    }
}

/// Two channels clash when they share a bus position while both are active.
fn clash(a: &Demand, b: &Demand) -> bool {
    let share = a.span.0.max(b.span.0) <= a.span.1.min(b.span.1);
    share
        && a.windows
            .iter()
            .any(|x| b.windows.iter().any(|y| x.0.max(y.0) < x.1.min(y.1)))
}

fn clash_graph(d: &[Demand]) -> Vec<Vec<bool>> {
    (0..d.len()).map(|i| (0..d.len()).map(|j| i != j && clash(&d[i], &d[j])).collect()).collect()
}

fn colorable(adj: &[Vec<bool>], k: usize, colors: &mut Vec<usize>, v: usize) -> bool {
    if v == adj.len() {
        return true;
    }
    for c in 0..k {
        if (0..v).all(|u| !adj[v][u] || colors[u] != c) {
            colors[v] = c;
            if colorable(adj, k, colors, v + 1) {
                return true;
            }
        }
    }
    false
}

fn chromatic(adj: &[Vec<bool>]) -> usize {
    let mut colors = vec![0; adj.len()];
    (1..=adj.len()).find(|&k| colorable(adj, k, &mut colors, 0)).unwrap_or(0)
}

fn clique(adj: &[Vec<bool>], chosen: &mut Vec<usize>, from: usize, best: &mut usize) {
    *best = (*best).max(chosen.len());
    for v in from..adj.len() {
        if chosen.len() + (adj.len() - v) <= *best {
            return;
        }
        if chosen.iter().all(|&u| adj[u][v]) {
            chosen.push(v);
            clique(adj, chosen, v + 1, best);
            chosen.pop();
        }
    }
}

fn max_clique_oracle(adj: &[Vec<bool>]) -> usize {
    let mut best = 0;
    clique(adj, &mut Vec::new(), 0, &mut best);
    best
}

fn valid_assignment(d: &[Demand], assignment: &[usize], lanes: usize) -> bool {
    let adj = clash_graph(d);
    assignment.iter().all(|&l| l < lanes)
        && (0..d.len()).all(|i| (0..d.len()).all(|j| !adj[i][j] || assignment[i] != assignment[j]))
}

fn random_demands(rng: &mut ChaCha8Rng, n: usize, positions: usize, horizon: u64) -> Vec<Demand> {
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0..positions);
            let b = rng.gen_range(0..positions);
            let windows: Vec<(u64, u64)> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let s = rng.gen_range(0..horizon);
                    (s, s + rng.gen_range(1..horizon / 4 + 2))
                })
                .collect();
            demand(a, b, &windows)
        })
        .collect()
}

#[test]
fn criterion_5_lane_minimization() {
    let mut problems = Vec::new();

    // Every assignment of three channels to spans over four positions and
    // windows on a three-slot grid.
    let spans: Vec<(usize, usize)> = (0..4).flat_map(|a| (a..4).map(move |b| (a, b))).collect();
    let windows = [(0u64, 2u64), (1, 3), (2, 4)];
    let choices: Vec<Demand> = spans.iter().flat_map(|&(a, b)| windows.iter().map(move |w| demand(a, b, &[*w]))).collect();
    let mut exhaustive = 0;
    for x in &choices {
        for y in &choices {
            for z in &choices {
                let d = [x.clone(), y.clone(), z.clone()];
                let r = min_lanes(&d);
                exhaustive += 1;
                if r.lanes != chromatic(&clash_graph(&d)) || !valid_assignment(&d, &r.assignment, r.lanes) {
                    problems.push(format!("exhaustive {d:?}"));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut small = 0;
    for _ in 0..3000 {
        let n = rng.gen_range(1..=12);
        let d = random_demands(&mut rng, n, 8, 60);
        let r = min_lanes(&d);
        small += 1;
        let want = chromatic(&clash_graph(&d));
        if r.lanes != want || !valid_assignment(&d, &r.assignment, r.lanes) {
            problems.push(format!("{n} channels: {} lanes, chromatic {want}", r.lanes));
        }
    }

    let mut large = 0;
    for _ in 0..300 {
        let n = rng.gen_range(13..=80);
        let d = random_demands(&mut rng, n, 24, 400);
        let r = min_lanes(&d);
        large += 1;
        let omega = max_clique_oracle(&clash_graph(&d));
        if r.lanes < omega || !valid_assignment(&d, &r.assignment, r.lanes) {
            problems.push(format!("{n} channels: {} lanes below clique {omega}", r.lanes));
        }
    }

    // A transfer between positions 2 and 6 is active while 3 wants to reach 5.
    let blocking = [demand(2, 6, &[(0, 100)]), demand(3, 5, &[(50, 80)])];
    let blocked = min_lanes(&blocking).lanes;
    let ok = problems.is_empty() && blocked == 2;
    report(
        5,
        ok,
        &format!(
            "{exhaustive} exhaustive + {small} random instances <= 12 channels equal the chromatic number, {large} larger instances >= clique, blocking scenario {blocked} lanes; problems {:?}",
            &problems[..problems.len().min(5)]
        ),
    );
}

// ---------------------------------------------------------------- 6-8

fn suite_rows(suite: Suite) -> Vec<ExperimentRow> {
    compare_experiments(&corpus(1), &suite_variants(suite), &HardwareConfig::default(), &ExperimentOptions::default())
        .unwrap()
}

fn by_workload(rows: &[ExperimentRow]) -> BTreeMap<String, BTreeMap<String, ExperimentRow>> {
    let mut m: BTreeMap<String, BTreeMap<String, ExperimentRow>> = BTreeMap::new();
    for r in rows {
        m.entry(r.workload.clone()).or_default().insert(r.variant.clone(), r.clone());
    }
    m
}

#[test]
fn criterion_6_heterogeneity() {
    let rows = by_workload(&suite_rows(Suite::Heterogeneity));
    let mut ok = rows.len() == 5;
    let mut parts = Vec::new();
    for (w, v) in &rows {
        let e = |k: &str| v[k].total_fj as f64;
        let (e1, e2, e4, e8) = (e("1-config"), e("2-config"), e("4-config"), e("8-config"));
        let saving = 1.0 - e4 / e1;
        let gap = (e4 - e8) / e4;
        let order = e1 > e2 && e2 > e4 && e4 >= e8;
        let good = order && saving >= MIN_HETERO_SAVING && gap <= MAX_EIGHT_VS_FOUR_GAP;
        ok &= good;
        parts.push(format!(
            "{w} {} saving {:.1}% gap {:.2}%",
            if order { "ordered" } else { "UNORDERED" },
            saving * 100.0,
            gap * 100.0
        ));
    }
    report(6, ok, &parts.join("; "));
}

#[test]
fn criterion_7_interconnect() {
    let rows = by_workload(&suite_rows(Suite::Interconnect));
    let mut ok = rows.len() == 5;
    let mut parts = Vec::new();
    for (w, v) in &rows {
        let (sb, noc) = (&v["sb"], &v["noc"]);
        let good = sb.interconnect_fj < noc.interconnect_fj && sb.interconnect_latency_ps < noc.interconnect_latency_ps;
        ok &= good;
        parts.push(format!(
            "{w} energy {:.1}% latency {:.1}% of noc",
            100.0 * sb.interconnect_fj as f64 / noc.interconnect_fj as f64,
            100.0 * sb.interconnect_latency_ps as f64 / noc.interconnect_latency_ps as f64
        ));
    }
    report(7, ok, &parts.join("; "));
}

#[test]
fn criterion_8_pipelining() {
    const LARGE_BATCH: usize = 2000;
    let rows = by_workload(&suite_rows(Suite::Pipelining));
    let mut ok = rows.len() == 5;
    let mut parts = Vec::new();
    for (w, v) in &rows {
        let (seq, pip) = (&v["sequential"], &v["pipelined"]);
        let gain = pip.throughput_ips / seq.throughput_ips;
        if pip.pipelines > 1 {
            ok &= gain >= MIN_PIPELINE_GAIN;
        }
        parts.push(format!("{w} {} pipelines gain {gain:.2}x", pip.pipelines));
    }
    let cfg = HardwareConfig::default();
    for w in corpus(1) {
        let dfg = compile_and_profile(&w.graph, &cfg, &single_image(&w.graph, 8), &FlowOptions::default()).unwrap();
        let s = schedule_for(&dfg, &cfg, InterconnectKind::Sb, LARGE_BATCH, ScheduleMode::Pipelined).unwrap();
        let bottleneck = *dfg.exec_times.iter().max().unwrap() as f64;
        let per_image = s.makespan as f64 / LARGE_BATCH as f64;
        let rel = (per_image - bottleneck).abs() / bottleneck;
        ok &= rel <= BOTTLENECK_REL_TOL;
        parts.push(format!("{} B={LARGE_BATCH} off bottleneck by {:.2}%", w.name, rel * 100.0));
    }
    report(8, ok, &parts.join("; "));
}

// ---------------------------------------------------------------- 9

fn mp_matrix(n: usize) -> impl Strategy<Value = MaxPlusMatrix> {
    prop::collection::vec(prop_oneof![1 => Just(EPS), 4 => (-50i32..50).prop_map(f64::from)], n * n)
        .prop_map(move |v| MaxPlusMatrix::from_rows(v.chunks(n).map(<[f64]>::to_vec).collect()))
}

fn cli(args: &[&str]) {
    let mut full = vec!["sentryos"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).unwrap()).unwrap();
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

/// The full compile-to-simulate chain through the CLI, writing into `dir`.
fn cli_chain(dir: &Path, topology: &str, seed: u64, mode: &str, interconnect: &str) {
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let seed = seed.to_string();
    cli(&["init-hw", "--palette-size", "4", "--out", &p("hw.json")]);
    cli(&["generate", "--random", topology, "--layers", "5", "--width", "5", "--prune", "0.2", "--seed", &seed, "--out", &p("g.json")]);
    cli(&["stats", "--graph", &p("g.json"), "--out", &p("stats.json")]);
    cli(&["stimulus", "--graph", &p("g.json"), "--images", "3", "--steps", "4", "--seed", &seed, "--out", &p("s.json")]);
    cli(&["compile", "--graph", &p("g.json"), "--hw", &p("hw.json"), "--seed", &seed, "--out", &p("d.json")]);
    cli(&[
        "schedule", "--dfg", &p("d.json"), "--hw", &p("hw.json"), "--batch", "3", "--mode", mode, "--interconnect",
        interconnect, "--gantt", &p("gantt.csv"), "--out", &p("sched.json"),
    ]);
    cli(&[
        "plan-bus", "--dfg", &p("d.json"), "--schedule", &p("sched.json"), "--hw", &p("hw.json"), "--interconnect",
        interconnect, "--out", &p("ic.json"),
    ]);
    cli(&[
        "simulate", "--graph", &p("g.json"), "--dfg", &p("d.json"), "--schedule", &p("sched.json"), "--interconnect",
        &p("ic.json"), "--stimulus", &p("s.json"), "--hw", &p("hw.json"), "--csv", &p("r.csv"), "--out", &p("r.json"),
    ]);
}

fn binary_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let exe = env!("CARGO_BIN_EXE_sentryos");
    let sh = |args: &[&str]| {
        let out = Process::new(exe).args(args).current_dir(dir).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let mut m = BTreeMap::new();
    sh(&["generate-corpus", "--seed", "3", "--out", "corpus"]);
    m.extend(read_dir_bytes(&dir.join("corpus")).into_iter().map(|(k, v)| (format!("corpus/{k}"), v)));
    std::fs::create_dir_all(dir.join("small")).unwrap();
    for (i, t) in ["chain", "dense"].iter().enumerate() {
        let seed = (i + 7).to_string();
        let out = sh(&["generate", "--random", t, "--seed", &seed]);
        std::fs::write(dir.join(format!("small/{t}.json")), &out).unwrap();
        m.insert(format!("generate {t}"), out);
    }
    for suite in ["heterogeneity", "interconnect", "pipelining", "backends"] {
        m.insert(
            format!("compare {suite}"),
            sh(&["compare", "--suite", suite, "--workloads", "small", "--images", "2"]),
        );
    }
    m.insert("init-hw".into(), sh(&["init-hw"]));
    m.insert("stats".into(), sh(&["stats", "--graph", "small/chain.json"]));
    m.insert("stimulus".into(), sh(&["stimulus", "--graph", "small/chain.json"]));
    m.insert("compile".into(), sh(&["compile", "--graph", "small/chain.json"]));
    std::fs::write(dir.join("d.json"), &m["compile"]).unwrap();
    m.insert("schedule".into(), sh(&["schedule", "--dfg", "d.json", "--batch", "4"]));
    std::fs::write(dir.join("sched.json"), &m["schedule"]).unwrap();
    m.insert("plan-bus".into(), sh(&["plan-bus", "--dfg", "d.json", "--schedule", "sched.json"]));
    std::fs::write(dir.join("ic.json"), &m["plan-bus"]).unwrap();
    std::fs::write(dir.join("s.json"), sh(&["stimulus", "--graph", "small/chain.json", "--images", "4"])).unwrap();
    m.insert(
        "simulate".into(),
        sh(&[
            "simulate", "--graph", "small/chain.json", "--dfg", "d.json", "--schedule", "sched.json", "--interconnect",
            "ic.json", "--stimulus", "s.json",
        ]),
    );
    m
}

#[test]
fn criterion_9_semiring_and_determinism() {
    let config = Config {
        cases: PROPTEST_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();

    let mut runner = TestRunner::new(config.clone());
    let semiring = runner.run(&(1usize..6).prop_flat_map(|n| (mp_matrix(n), mp_matrix(n), mp_matrix(n))), |(a, b, c)| {
        let n = a.dim();
        let id = MaxPlusMatrix::identity(n);
        prop_assert_eq!(a.otimes(&b).otimes(&c), a.otimes(&b.otimes(&c)));
        prop_assert_eq!(a.otimes(&b.oplus(&c)), a.otimes(&b).oplus(&a.otimes(&c)));
        prop_assert_eq!(a.oplus(&b), b.oplus(&a));
        prop_assert_eq!(a.oplus(&a), a.clone());
        prop_assert_eq!(a.otimes(&id), a.clone());
        prop_assert_eq!(id.otimes(&a), a.clone());
        prop_assert_eq!(a.oplus(&MaxPlusMatrix::new(n)), a.clone());
        Ok(())
    });
    if let Err(e) = semiring {
        failures.push(format!("semiring: {e}"));
    }

    let mut runner = TestRunner::new(config.clone());
    let monotone = runner.run(&(prop::collection::vec(1u64..500, 1..8), prop::collection::vec(any::<bool>(), 28), 1usize..10), |(exec, bits, batch)| {
        let n = exec.len();
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).enumerate().filter(|(k, _)| bits[*k]).map(|(_, e)| e).collect();
        let dfg = dfg_of(&exec, &edges);
        let delays = vec![1; edges.len()];
        let p = allocate_pipelines(&dfg, n).unwrap();
        let s = schedule_batch(&dfg, &p, batch, &delays).unwrap();
        let bottleneck = *exec.iter().max().unwrap();
        for i in 0..n {
            for k in 1..batch {
                prop_assert!(s.end[i][k] >= s.end[i][k - 1] + exec[i]);
            }
        }
        prop_assert_eq!(s.interval, bottleneck as f64);
        prop_assert_eq!(s.clone(), schedule_batch(&dfg, &p, batch, &delays).unwrap());
        Ok(())
    });
    if let Err(e) = monotone {
        failures.push(format!("self-timed schedule: {e}"));
    }

    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let topologies = ["chain", "residual", "dense"];
    let mut runner = TestRunner::new(config);
    let reruns = runner.run(&(0u64..1_000_000, 0usize..3, any::<bool>(), any::<bool>()), |(seed, t, seq, noc)| {
        let mode = if seq { "sequential" } else { "pipelined" };
        let ic = if noc { "noc" } else { "sb" };
        cli_chain(&a, topologies[t], seed, mode, ic);
        cli_chain(&b, topologies[t], seed, mode, ic);
        prop_assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
        Ok(())
    });
    if let Err(e) = reruns {
        failures.push(format!("cli reruns: {e}"));
    }

    let (x, y) = (tmp.path().join("x"), tmp.path().join("y"));
    std::fs::create_dir_all(&x).unwrap();
    std::fs::create_dir_all(&y).unwrap();
    let (bx, by) = (binary_outputs(&x), binary_outputs(&y));
    let differing: Vec<&String> = bx.keys().filter(|k| bx.get(*k) != by.get(*k)).collect();
    if !differing.is_empty() {
        failures.push(format!("binary reruns differ: {differing:?}"));
    }

    report(
        9,
        failures.is_empty(),
        &format!(
            "semiring laws and self-timed schedule invariants over {PROPTEST_CASES} cases each; {PROPTEST_CASES} in-process CLI chains and {} binary subcommand outputs rerun bit-identically; failures {failures:?}",
            bx.len()
        ),
    );
}

