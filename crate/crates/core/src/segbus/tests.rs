use super::*;
use crate::compiler::synthetic_dfg;
use crate::hardware::InterconnectParams;
use crate::runtime::{allocate_pipelines, schedule_batch};
use proptest::prelude::*;

fn demand(a: usize, b: usize, w: &[(u64, u64)]) -> Demand {
    Demand {
        span: (a.min(b), a.max(b)),
        windows: w.to_vec(),
    }
}

fn lanes_of(d: &[Demand]) -> usize {
    min_lanes(d).lanes
}

#[test]
fn disjoint_windows_share_one_lane() {
    let d = [demand(0, 4, &[(0, 10)]), demand(1, 3, &[(10, 20)])];
    assert_eq!(lanes_of(&d), 1);
}

#[test]
fn blocked_transfer_inside_an_active_one_needs_a_second_lane() {
    // C2 -> C6 is active while C3 -> C5 wants the same stretch.
    let d = [demand(2, 6, &[(0, 100)]), demand(3, 5, &[(50, 80)])];
    assert_eq!(lanes_of(&d), 2);
    let apart = [demand(2, 6, &[(0, 100)]), demand(3, 5, &[(100, 180)])];
    assert_eq!(lanes_of(&apart), 1);
    let side_by_side = [demand(2, 3, &[(0, 100)]), demand(4, 5, &[(0, 100)])];
    assert_eq!(lanes_of(&side_by_side), 1);
}

#[test]
fn five_mutually_overlapping_channels_need_five_lanes() {
    let d: Vec<Demand> = (0..5).map(|i| demand(i, 5 + i, &[(i as u64, 100)])).collect();
    let r = min_lanes(&d);
    assert_eq!(r.lanes, 5);
    assert_eq!(r.clique_bound, 5);
    assert_eq!(brute_force_chromatic(&conflict_graph(&d)), 5);
}

#[test]
fn full_connectivity_needs_g_times_h_lanes() {
    // G senders at positions 0..G, H receivers after them, all talking at once.
    let (g, h) = (3, 4);
    let mut d = Vec::new();
    for s in 0..g {
        for r in 0..h {
            d.push(demand(s, g + r, &[(0, 1000)]));
        }
    }
    assert_eq!(lanes_of(&d), g * h);
}

#[test]
fn idle_cores_do_not_add_lanes() {
    let base = vec![demand(0, 2, &[(0, 10)]), demand(1, 3, &[(5, 15)])];
    let mut wider = base.clone();
    wider.push(demand(10, 12, &[(100, 110)]));
    wider.push(demand(20, 30, &[(200, 210)]));
    assert_eq!(lanes_of(&base), lanes_of(&wider));
}

#[test]
fn switches_close_the_interior_boundaries() {
    let dfg = synthetic_dfg(&[1, 1, 1, 1], &[(1, 3)]);
    let placement = Placement {
        position: vec![0, 1, 2, 3],
    };
    let d = demands(&dfg, &placement, &[vec![(0, 5)]]).unwrap();
    let r = min_lanes(&d);
    let p = program_switches(&dfg, &placement, &d, &r, 100.0).unwrap();
    let closed: Vec<(usize, usize)> = p.switches.iter().map(|s| (s.lane, s.boundary)).collect();
    assert_eq!(closed, vec![(0, 1), (0, 2)]);
}

#[test]
fn closed_switches_add_up_over_channels() {
    let dfg = synthetic_dfg(&[1; 6], &[(0, 2), (3, 5)]);
    let placement = place_cores(&dfg).unwrap();
    let w = vec![vec![(0, 5)], vec![(0, 5)]];
    let d = demands(&dfg, &placement, &w).unwrap();
    let r = min_lanes(&d);
    assert_eq!(r.lanes, 1);
    let p = program_switches(&dfg, &placement, &d, &r, 100.0).unwrap();
    let interior: usize = d.iter().map(|x| x.span.1 - x.span.0).sum();
    assert_eq!(p.closed_switch_count(), interior);
}

#[test]
fn program_rejects_a_conflicting_assignment() {
    let dfg = synthetic_dfg(&[1, 1, 1], &[(0, 2), (1, 2)]);
    let placement = place_cores(&dfg).unwrap();
    let d = demands(&dfg, &placement, &[vec![(0, 5)], vec![(0, 5)]]).unwrap();
    let bad = LaneReport {
        lanes: 1,
        greedy_lanes: 1,
        clique_bound: 1,
        assignment: vec![0, 0],
    };
    assert!(matches!(
        program_switches(&dfg, &placement, &d, &bad, 1.0),
        Err(BusError::Conflict { .. })
    ));
}

#[test]
fn placement_follows_topological_order() {
    let dfg = synthetic_dfg(&[1, 1, 1], &[(2, 0), (0, 1)]);
    assert_eq!(place_cores(&dfg).unwrap().position, vec![1, 2, 0]);
}

#[test]
fn bus_beats_mesh_per_spike_on_neighbours() {
    let dfg = synthetic_dfg(&[1; 9], &(0..8).map(|i| (i, i + 1)).collect::<Vec<_>>());
    let p = InterconnectParams::default();
    let placement = place_cores(&dfg).unwrap();
    let bus = provisional_bus(&dfg).unwrap();
    let noc = Interconnect::Noc(NocDescriptor::new(&dfg, &placement, None).unwrap());
    for c in 0..dfg.channels.len() {
        let (eb, lb) = bus.per_spike(&dfg, c, &p);
        let (en, ln) = noc.per_spike(&dfg, c, &p);
        assert!(eb < en && lb < ln, "channel {c}: bus ({eb}, {lb}) noc ({en}, {ln})");
    }
}

#[test]
fn noc_cost_counts_links_and_routers() {
    let dfg = synthetic_dfg(&[1; 4], &[(0, 3)]);
    let placement = place_cores(&dfg).unwrap();
    let noc = Interconnect::Noc(NocDescriptor::new(&dfg, &placement, Some((2, 2))).unwrap());
    let p = InterconnectParams::default();
    let hops = 2u64;
    let (e, l) = noc.per_spike(&dfg, 0, &p);
    assert_eq!(
        e,
        hops * pj_to_fj(p.noc.link_energy_pj) + (hops + 1) * pj_to_fj(p.noc.router_energy_pj)
    );
    assert_eq!(l, hops * p.noc.hop_latency_ps + (hops + 1) * p.noc.router_latency_ps);
    assert!(matches!(
        NocDescriptor::new(&dfg, &placement, Some((1, 3))),
        Err(BusError::MeshTooSmall { .. })
    ));
}

#[test]
fn zero_traffic_costs_nothing() {
    let dfg = synthetic_dfg(&[1, 1], &[(0, 1)]);
    let bus = provisional_bus(&dfg).unwrap();
    let c = interconnect_cost(&bus, &dfg, &[0], &InterconnectParams::default());
    assert_eq!(c.energy_fj, 0);
    assert_eq!(c.latency_ps, 0);
    assert_eq!(c.mean_latency_ps(), 0.0);
}

#[test]
fn plan_bus_on_a_scheduled_graph() {
    let dfg = synthetic_dfg(&[5, 5, 5, 5], &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    let pl = allocate_pipelines(&dfg, 4).unwrap();
    let s = schedule_batch(&dfg, &pl, 3, &[1; 4]).unwrap();
    let (prog, lanes) = plan_bus(&dfg, &s, &InterconnectParams::default()).unwrap();
    assert!(lanes.lanes >= lanes.clique_bound);
    assert_eq!(prog.num_lanes, lanes.lanes);
    assert_eq!(prog.num_positions, 4);
    assert_eq!(BusProgram::from_json(&prog.to_json()).unwrap(), prog);
    let ic = Interconnect::SegmentedBus(prog);
    assert_eq!(Interconnect::from_json(&ic.to_json()).unwrap(), ic);
}

fn arb_demands(max: usize) -> impl Strategy<Value = Vec<Demand>> {
    prop::collection::vec((0usize..8, 0usize..8, 0u64..40, 1u64..20), 1..=max).prop_map(|v| {
        v.into_iter()
            .map(|(a, b, t, len)| demand(a, b, &[(t, t + len)]))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn small_instances_are_colored_optimally(d in arb_demands(12)) {
        let r = min_lanes(&d);
        let adj = conflict_graph(&d);
        prop_assert_eq!(r.lanes, brute_force_chromatic(&adj));
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                prop_assert!(!(adj[i][j] && r.assignment[i] == r.assignment[j]));
            }
        }
    }

    #[test]
    fn sweep_bound_is_a_clique(d in arb_demands(24)) {
        let adj = conflict_graph(&d);
        let exact = max_clique(&adj);
        let sweep = point_clique(&d);
        prop_assert!(sweep <= exact);
        prop_assert!(sweep >= 1);
    }

    #[test]
    fn large_instances_respect_the_clique_bound(d in arb_demands(40)) {
        let r = min_lanes(&d);
        prop_assert!(r.lanes >= r.clique_bound);
        prop_assert!(r.lanes <= r.greedy_lanes);
    }
}
