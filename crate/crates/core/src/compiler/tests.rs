use super::*;
use crate::flow::{run_flow, FlowOptions};
use crate::graph::{random_dag, Neuron, NeuronKind, RandomDagOptions, Topology};
use crate::hardware::{make_core_profile, preset_palette, HardwareConfig};
use crate::sim::{simulate_direct, Dynamics, Stimulus, StimulusOptions};

fn graph(n: u32, edges: &[(u32, u32, i32)], thr: u32) -> SdcnnGraph {
    let mut has_in = vec![false; n as usize];
    for &(_, d, _) in edges {
        has_in[d as usize] = true;
    }
    let neurons = (0..n)
        .map(|i| {
            let k = if has_in[i as usize] {
                NeuronKind::Hidden
            } else {
                NeuronKind::Input
            };
            Neuron::new(i, k, thr)
        })
        .collect();
    SdcnnGraph::new(
        "t",
        2,
        neurons,
        edges.iter().map(|&(s, d, w)| Synapse::new(s, d, w)).collect(),
    )
    .unwrap()
}

fn chain(n: u32) -> SdcnnGraph {
    let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
    graph(n, &e, 1)
}

fn originals(s: &SubNetwork) -> Vec<u32> {
    s.original_neurons().map(|n| n.0).collect::<BTreeSet<_>>().into_iter().collect()
}

fn mubrain(g: &SdcnnGraph) -> DataflowGraph {
    let m = CostModel::default();
    let dfg = compile(g, &preset_palette(m.synapse_multiplicity), &m, Backend::Mubrain).unwrap();
    check_dfg(g, &dfg).unwrap();
    dfg
}

#[test]
fn chain_of_seven_needs_three_subnets() {
    // Relays take the l1/l0 slots a chain neuron would need, so each core
    // holds three chain neurons at most and the middle cores cannot merge.
    let dfg = mubrain(&chain(7));
    let members: Vec<Vec<u32>> = dfg.subnets.iter().map(originals).collect();
    assert_eq!(members, vec![vec![4, 5, 6], vec![1, 2, 3], vec![0]]);
    assert_eq!(dfg.channels.len(), 2);
    assert_eq!(dfg.topological_order(), Some(vec![2, 1, 0]));
}

#[test]
fn short_chain_fits_one_core() {
    let dfg = mubrain(&chain(3));
    assert_eq!(dfg.len(), 1);
    assert_eq!(dfg.relay_count(), 0);
    assert!(dfg.channels.is_empty());
}

#[test]
fn skip_synapse_relayed_inside_core() {
    let g = graph(3, &[(0, 1, 1), (1, 2, 1), (0, 2, -2)], 1);
    let dfg = mubrain(&g);
    assert_eq!(dfg.len(), 1);
    assert_eq!(dfg.relay_count(), 1);
    let direct = compile_with(
        &g,
        &preset_palette(crate::hardware::default_multiplicity()),
        &CostModel::default(),
        &CompileOptions {
            relay_policy: RelayPolicy::Direct,
            ..Default::default()
        },
    )
    .unwrap();
    check_dfg(&g, &direct).unwrap();
    assert_eq!(direct.relay_count(), 0);
}

#[test]
fn disconnected_components_are_all_covered() {
    let g = graph(6, &[(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1)], 1);
    let dfg = mubrain(&g);
    let all: BTreeSet<u32> = dfg.subnets.iter().flat_map(originals).collect();
    assert_eq!(all.len(), 6);
}

/// Two outputs over an irregular body; compiles into four sub-networks.
pub(crate) fn two_output_example() -> SdcnnGraph {
    // trunk 0..=8 with side inputs 15 and 16, then two branches
    // 9 -> 10 -> 11 and 12 -> 13 -> 14 ending in outputs 11 and 14
    let e = [
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
    ];
    graph(17, &e, 1)
}

#[test]
fn two_output_example_has_four_subnets() {
    let g = two_output_example();
    let dfg = mubrain(&g);
    let m: Vec<_> = dfg.subnets.iter().map(|s| (originals(s), s.relay_neurons.len())).collect();
    assert_eq!(dfg.len(), 4, "{m:?}");
    assert_eq!(m.iter().filter(|x| x.1 > 0).count(), 3, "{m:?}");
    check_dfg(&g, &dfg).unwrap();
}

#[test]
fn dynaps_splits_wide_layer_into_crossbar_chunks() {
    // 10 inputs into one output; a core of 4 neurons holds 3 inputs + output.
    let e: Vec<_> = (0..10).map(|i| (i, 10, 1)).collect();
    let g = graph(11, &e, 1);
    let m = CostModel::default();
    let mut core = make_core_profile(Backend::Dynaps, m.synapse_multiplicity);
    core.neuron_capacity = 4;
    core.l1_capacity = 4;
    core.l0_capacity = 4;
    let dfg = compile(&g, &[core], &m, Backend::Dynaps).unwrap();
    check_dfg(&g, &dfg).unwrap();
    assert_eq!(dfg.len(), 11usize.div_ceil(4));
    for s in &dfg.subnets {
        assert!(s.l2.is_empty());
        assert!(s.neuron_count() <= 4);
    }
}

#[test]
fn no_fit_is_reported() {
    // A lone sink with 300 external inputs needs 300 l2 entry relays.
    let e: Vec<_> = (0..300).map(|i| (i, 300, 1)).collect();
    let g = graph(301, &e, 1);
    let m = CostModel::default();
    let little = preset_palette(m.synapse_multiplicity)[0].clone();
    let err = compile(&g, &[little], &m, Backend::Mubrain).unwrap_err();
    assert!(matches!(err, CompileError::Hardware(HardwareError::NoFit { .. })), "{err}");
}

#[test]
fn merging_never_raises_static_power() {
    let m = CostModel::default();
    let pal = preset_palette(m.synapse_multiplicity);
    for seed in 0..20 {
        let g = random_dag(&RandomDagOptions { topology: Topology::ALL[seed as usize % 3], ..Default::default() }, seed);
        let merged = compile(&g, &pal, &m, Backend::Mubrain).unwrap();
        let plain = compile_with(&g, &pal, &m, &CompileOptions { merge: false, ..Default::default() }).unwrap();
        check_dfg(&g, &merged).unwrap();
        check_dfg(&g, &plain).unwrap();
        assert!(merged.total_static_power(&m) <= plain.total_static_power(&m));
    }
}

#[test]
fn compile_is_deterministic_and_round_trips() {
    let g = random_dag(&RandomDagOptions { topology: Topology::Dense, ..Default::default() }, 9);
    let a = mubrain(&g);
    let b = mubrain(&g);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(DataflowGraph::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn profile_counts() {
    let g = chain(7);
    let dfg = mubrain(&g);
    let d = Dynamics::default();
    let model = ExecTimeModel { per_event_ps: 10, overhead_ps: 5 };
    let zero = profile_channels(&dfg, &g, &Stimulus::empty(2), &d, model).unwrap();
    assert!(zero.channels.iter().all(|c| c.profiled_spike_count == 0));
    assert_eq!(zero.exec_times, vec![5; dfg.len()]);

    let one = crate::sim::Image {
        spikes: vec![crate::sim::InputSpike { neuron: NeuronId(0), time_ps: 0 }],
    };
    let p1 = profile_channels(&dfg, &g, &Stimulus::repeat(&one, 1), &d, model).unwrap();
    assert!(p1.channels.iter().all(|c| c.profiled_spike_count == 1));
    let p3 = profile_channels(&dfg, &g, &Stimulus::repeat(&one, 3), &d, model).unwrap();
    for (a, b) in p1.channels.iter().zip(&p3.channels) {
        assert_eq!(3 * a.profiled_spike_count, b.profiled_spike_count);
    }
    assert_eq!(p1.exec_times, p3.exec_times);

    let bad = crate::sim::Image {
        spikes: vec![crate::sim::InputSpike { neuron: NeuronId(3), time_ps: 0 }],
    };
    assert!(matches!(
        profile_channels(&dfg, &g, &Stimulus::repeat(&bad, 1), &d, model),
        Err(CompileError::UnknownInput(_))
    ));
}

#[test]
fn mapped_simulation_matches_direct() {
    let cfg = HardwareConfig::default();
    let d = Dynamics::from_config(&cfg);
    for seed in 0..12u64 {
        let opts = RandomDagOptions {
            topology: Topology::ALL[seed as usize % 3],
            layers: 4 + seed as usize % 5,
            prune: (seed % 3) as f64 * 0.25,
            ..Default::default()
        };
        let g = random_dag(&opts, seed);
        let stim = Stimulus::random(&g, &StimulusOptions { images: 3, ..Default::default() }, seed);
        let flow = run_flow(&g, &cfg, &stim, &stim, &FlowOptions::default()).unwrap();
        check_dfg(&g, &flow.dfg).unwrap();
        let direct = simulate_direct(&g, &stim, &d).unwrap();
        assert_eq!(flow.report.outputs, direct.outputs, "seed {seed}");
    }
}
