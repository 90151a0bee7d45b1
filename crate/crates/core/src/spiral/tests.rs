use std::collections::BTreeSet;

use super::*;
use crate::bfs;
use crate::engine::build_geode;
use crate::mesh::seed_icosahedron;

fn ring_sizes(r: &WalkReport) -> Vec<usize> {
    let mut sizes = vec![0; r.max_ring() as usize + 1];
    for v in &r.visits {
        sizes[v.ring as usize] += 1;
    }
    sizes
}

fn assert_matches_bfs(t: &Topology, source: NodeId, radius: u32) -> WalkReport {
    let report = scan(t, source, radius).unwrap();
    assert!(report.is_complete(), "{:?}", report.stop);
    let mut walked: Vec<(NodeId, u32)> = report.distances().collect();
    walked.sort();
    let mut oracle = bfs::ball(t, source, radius);
    oracle.sort();
    assert_eq!(walked, oracle, "source {source} radius {radius}");
    let rings: Vec<u32> = report.visits.iter().map(|v| v.ring).collect();
    assert!(rings.windows(2).all(|w| w[0] <= w[1]), "not breadth-first");
    assert!(report.messages <= 3 * report.visits.len() as u64);
    report
}

#[test]
fn icosahedron_radius_two() {
    let t = seed_icosahedron();
    let report = assert_matches_bfs(&t, NodeId(0), 2);
    assert_eq!(ring_sizes(&report), vec![1, 5, 5]);
    assert_eq!(report.return_path.len(), 2);
}

#[test]
fn first_ring_claims_second_shell() {
    let t = seed_icosahedron();
    let mut walk = SpiralWalk::new(&t, NodeId(0), UNLIMITED).unwrap();
    let mut none = |_| None;
    walk.start(&mut none);
    assert_eq!(walk.walkers()[0].ring_next.len(), 5);
    assert!(walk.advance(&mut none));
    let next = &walk.walkers()[0].ring_next;
    assert_eq!(next.len(), 5);
    for &n in next {
        assert_eq!(bfs::distance(&t, NodeId(0), n), Some(2));
    }
}

#[test]
fn radius_zero_is_free() {
    let t = seed_icosahedron();
    let report = scan(&t, NodeId(3), 0).unwrap();
    assert_eq!(report.visit_order(), vec![NodeId(3)]);
    assert_eq!(report.messages, 0);
    assert!(report.return_path.is_empty());
}

#[test]
fn geode_balls_match_oracle() {
    let t = build_geode(4).unwrap();
    for source in [0, 7, 11, 500, 1234, 2561] {
        let report = assert_matches_bfs(&t, NodeId(source), 8);
        assert_eq!(report.spawns, 0);
        assert_eq!(report.return_path.len(), 8);
    }
}

#[test]
fn flat_region_rings_grow_by_six() {
    // pentagon vertices of a level-4 geode are too close for a flat 10-ball
    let t = build_geode(5).unwrap();
    // a source whose 10-ball holds no degree-5 node
    let source = t
        .nodes()
        .find(|&s| bfs::ball(&t, s, 10).iter().all(|&(n, _)| t.degree(n) == 6))
        .expect("flat region");
    let report = assert_matches_bfs(&t, source, 10);
    let sizes = ring_sizes(&report);
    for (i, &s) in sizes.iter().enumerate().skip(1) {
        assert_eq!(s, 6 * i, "ring {i}");
    }
    assert_eq!(report.eyes, 0);
    assert_eq!(report.spawns, 0);
}

#[test]
fn whole_geode_is_covered() {
    let t = build_geode(2).unwrap();
    let report = assert_matches_bfs(&t, NodeId(5), 100);
    assert_eq!(report.visits.len(), t.node_count());
}

#[test]
fn departed_node_breaks_the_ring() {
    let mut t = build_geode(3).unwrap();
    let source = NodeId(100);
    let victim = bfs::ball(&t, source, 3).iter().find(|&&(_, d)| d == 3).unwrap().0;
    t.mark_dead(victim).unwrap();
    let report = scan(&t, source, 6).unwrap();
    assert_eq!(report.stop, WalkStop::RingBroken(victim));
    assert!(!report.is_complete());
    // partial: the first rings are there, the broken one is not finished
    assert!(report.max_ring() <= 3);
    assert!(report.visits.iter().filter(|v| v.ring == 2).count() > 0);
}

#[test]
fn ttl_bounds_the_walk() {
    let t = build_geode(3).unwrap();
    let report = spiral_walk(&t, NodeId(40), 10, 50, |_| None).unwrap();
    assert_eq!(report.stop, WalkStop::TtlExhausted);
    assert!(report.messages <= 50, "{}", report.messages);
    assert!(report.visits.len() > 10);
}

#[test]
fn hits_stream_back_along_the_gradient() {
    let t = build_geode(4).unwrap();
    let hosts: BTreeSet<NodeId> = [NodeId(30), NodeId(31), NodeId(900), NodeId(901), NodeId(77)].into();
    let report = spiral_walk(&t, NodeId(30), 10, UNLIMITED, |n| hosts.contains(&n).then_some(DataId(1))).unwrap();
    let k = report.hits.len() as f64;
    let n = report.visits.len() as f64;
    for &(h, _) in &report.hits {
        assert!(hosts.contains(&h));
    }
    assert!(report.backprop_messages as f64 <= 2.0 * k * n.sqrt());
}

#[test]
fn return_path_descends_one_ring_per_hop() {
    let t = build_geode(3).unwrap();
    let mut walk = SpiralWalk::new(&t, NodeId(9), UNLIMITED).unwrap();
    let mut none = |_| None;
    while walk.ring() < 6 && walk.advance(&mut none) {}
    let far = walk.walkers()[0].visited.last().copied().unwrap();
    let path = walk.return_path(far).unwrap();
    assert_eq!(path.len(), 6);
    let mut d = walk.distance(far).unwrap();
    for n in path {
        assert_eq!(walk.distance(n).unwrap(), d - 1);
        d -= 1;
    }
    assert!(walk.return_path(NodeId(9)).unwrap().is_empty());
}

#[test]
fn trace_has_header_and_one_row_per_visit() {
    let t = seed_icosahedron();
    let report = scan(&t, NodeId(0), 3).unwrap();
    let csv = report.trace_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,node,ring,messages"));
    assert_eq!(lines.count(), 12);
}
