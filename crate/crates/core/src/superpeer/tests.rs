use super::*;
use crate::bfs;
use crate::engine::build_geode;
use crate::rng_from_seed;

fn open_all(t: &Topology) -> ReplicaStores {
    let mut stores = ReplicaStores::new();
    for n in t.alive_nodes() {
        stores.open(n, 8);
    }
    stores
}

/// A layer built by hand: each group is (super-peer, capability, sub-peers).
/// Nodes in no group get capability 1 and stay orphans.
fn manual(t: &Topology, stores: &ReplicaStores, groups: &[(u32, u32, Vec<u32>)]) -> SuperLayer {
    let mut layer = SuperLayer::new();
    for n in t.alive_nodes() {
        layer.caps.insert(n, Capability(1));
        layer.roles.insert(n, PeerRole::Orphan);
    }
    for (s, cap, _) in groups {
        layer.caps.insert(NodeId(*s), Capability(*cap));
        layer.make_super(NodeId(*s));
    }
    for (s, _, subs) in groups {
        for &m in subs {
            layer.attach(NodeId(m), NodeId(*s), stores);
        }
    }
    layer
}

fn random_caps(t: &Topology, seed: u64) -> BTreeMap<NodeId, Capability> {
    let dist = CapabilityDistribution::default();
    let mut rng = rng_from_seed(seed);
    t.alive_nodes().map(|n| (n, dist.sample(&mut rng))).collect()
}

#[test]
fn top_down_merges_when_room_remains() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    // 5 + 3 < 10
    let mut layer = manual(&t, &stores, &[(0, 10, vec![1, 2, 3, 4]), (5, 100, vec![6, 7])]);
    layer.link(NodeId(0), NodeId(5));
    let merged = layer.regulate_top_down(NodeId(0), &stores, &mut rng_from_seed(0));
    assert_eq!(merged, Some(NodeId(5)));
    assert_eq!(layer.load(NodeId(0)), 8);
    assert_eq!(layer.role(NodeId(5)), Some(&PeerRole::Sub { super_peer: NodeId(0) }));
    assert_eq!(layer.super_count(), 1);

    // 5 + 5 is not below 10
    let mut layer = manual(&t, &stores, &[(0, 10, vec![1, 2, 3, 4]), (5, 100, vec![6, 7, 8, 9])]);
    layer.link(NodeId(0), NodeId(5));
    assert_eq!(layer.regulate_top_down(NodeId(0), &stores, &mut rng_from_seed(0)), None);
}

#[test]
fn merge_hands_over_links() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    let mut layer = manual(&t, &stores, &[(0, 100, vec![]), (5, 10, vec![]), (9, 10, vec![]), (12, 10, vec![])]);
    layer.link(NodeId(0), NodeId(5));
    layer.link(NodeId(5), NodeId(9));
    layer.link(NodeId(9), NodeId(12));
    assert_eq!(layer.regulate_top_down(NodeId(0), &stores, &mut rng_from_seed(0)), Some(NodeId(5)));
    assert!(layer.info(NodeId(0)).unwrap().super_neighbors.contains(&NodeId(9)));
    assert!(layer.is_connected());
}

#[test]
fn bottom_up_moves_toward_the_lighter_super() {
    let t = build_geode(2).unwrap();
    let stores = open_all(&t);
    let n = NodeId(0);
    let nbrs: Vec<u32> = t.neighbors(n).iter().map(|m| m.0).collect();
    let s2 = nbrs[0];
    let others: Vec<u32> = nbrs[1..].to_vec();
    // sn1 manages n plus 8 remote peers and itself: 10 peers, capability 10
    let far: Vec<u32> = (100..108).collect();
    let mut subs1 = vec![0];
    subs1.extend(&far);
    // sn2 manages itself and one more: 2 peers, capability 10; the rest of
    // n's neighbors belong to sn2 too, so any pick lands there
    let mut layer = manual(&t, &stores, &[(150, 10, subs1), (s2, 10, vec![])]);
    for m in &others {
        layer.attach(NodeId(*m), NodeId(s2), &stores);
    }
    let before = layer.load(NodeId(s2));
    // (10 - 1) * 10 > (before + 1) * 10 for any small sn2
    assert!(9 > before + 1);
    assert!(layer.rebalance_bottom_up(&t, n, &stores, &mut rng_from_seed(1)));
    assert_eq!(layer.super_of(n), Some(NodeId(s2)));
    assert_eq!(layer.load(NodeId(150)), 9);
}

#[test]
fn bottom_up_stays_when_balanced() {
    let t = build_geode(2).unwrap();
    let stores = open_all(&t);
    let n = NodeId(0);
    let s2 = t.neighbors(n)[0].0;
    let others: Vec<u32> = t.neighbors(n)[1..].iter().map(|m| m.0).collect();
    let mut layer = manual(&t, &stores, &[(150, 10, vec![0]), (s2, 10, others)]);
    // (2 - 1) * 10 > (s2 load + 1) * 10 is false
    assert!(!layer.rebalance_bottom_up(&t, n, &stores, &mut rng_from_seed(1)));
}

#[test]
fn promotion_picks_the_best_sub_and_claims_neighbors() {
    let t = build_geode(3).unwrap();
    let stores = open_all(&t);
    let all: Vec<u32> = (1..t.node_count() as u32).collect();
    let mut layer = manual(&t, &stores, &[(0, 1000, all)]);
    layer.caps.insert(NodeId(200), Capability(100));
    layer.caps.insert(NodeId(300), Capability(10));
    let n2 = layer.promote(&t, NodeId(0), &stores, &mut rng_from_seed(0)).unwrap();
    assert_eq!(n2, NodeId(200));
    let info = layer.info(n2).unwrap();
    assert_eq!(info.sub_peers.len(), 10);
    // the claimed peers are the nearest ones
    let far = info.sub_peers.iter().map(|&m| bfs::distance(&t, n2, m).unwrap()).max().unwrap();
    assert!(far <= 2, "{far}");
    assert!(info.super_neighbors.contains(&NodeId(0)));
    assert!(layer.check_invariants(&t, false).is_empty());
}

#[test]
fn promotion_without_eligible_sub_is_impossible() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    let all: Vec<u32> = (1..t.node_count() as u32).collect();
    let mut layer = manual(&t, &stores, &[(0, 100, all)]);
    // capability 10 manages only itself: not eligible
    layer.caps.insert(NodeId(3), Capability(10));
    assert!(matches!(
        layer.promote(&t, NodeId(0), &stores, &mut rng_from_seed(0)),
        Err(Error::PromotionImpossible(NodeId(0)))
    ));
}

#[test]
fn bootstrap_meets_quotas() {
    let t = build_geode(4).unwrap();
    let stores = open_all(&t);
    let caps = random_caps(&t, 5);
    let layer = SuperLayer::bootstrap(&t, &caps, &stores, &mut rng_from_seed(5));
    assert_eq!(layer.check_invariants(&t, true), Vec::<String>::new());
    assert!(layer.is_connected());
    let frac = layer.super_count() as f64 / t.alive_count() as f64;
    assert!(frac > 0.005 && frac < 0.05, "{frac}");
}

#[test]
fn regulation_keeps_roles_and_quotas() {
    let t = build_geode(4).unwrap();
    let stores = open_all(&t);
    let caps = random_caps(&t, 8);
    let mut rng = rng_from_seed(8);
    let mut layer = SuperLayer::bootstrap(&t, &caps, &stores, &mut rng);
    for tick in 0..30 {
        let report = layer.regulation_tick(&t, &stores, &mut rng);
        assert_eq!(report.impossible, 0);
        assert_eq!(layer.check_invariants(&t, true), Vec::<String>::new(), "tick {tick}");
        assert!(layer.is_connected(), "tick {tick}");
    }
}

#[test]
fn failed_super_orphans_rehome_through_the_border() {
    let t0 = build_geode(3).unwrap();
    let stores = open_all(&t0);
    // two super-peers splitting the mesh by node id
    let n = t0.node_count() as u32;
    let half: Vec<u32> = (1..n / 2).collect();
    let rest: Vec<u32> = (n / 2 + 1..n).collect();
    let mut layer = manual(&t0, &stores, &[(0, 10_000, half), (n / 2, 10_000, rest)]);
    layer.link(NodeId(0), NodeId(n / 2));
    let mut t = t0.clone();
    t.mark_dead(NodeId(0)).unwrap();
    let mut rng = rng_from_seed(2);
    layer.handle_super_failure(&t, NodeId(0), &stores, &mut rng);
    let diameter = t.alive_nodes().map(|v| bfs::eccentricity(&t, v)).max().unwrap() as usize;
    let mut rounds = 1;
    while layer.orphans().next().is_some() {
        assert!(layer.rehome_orphans(&t, &stores) > 0);
        rounds += 1;
    }
    assert!(rounds <= diameter, "{rounds} > {diameter}");
    assert_eq!(layer.super_count(), 1);
    assert_eq!(layer.load(NodeId(n / 2)), t.alive_count());
}

#[test]
fn lone_orphan_pocket_promotes_from_within() {
    let t0 = build_geode(2).unwrap();
    let stores = open_all(&t0);
    let all: Vec<u32> = (1..t0.node_count() as u32).collect();
    let mut layer = manual(&t0, &stores, &[(0, 10_000, all)]);
    layer.caps.insert(NodeId(40), Capability(1000));
    let mut t = t0.clone();
    t.mark_dead(NodeId(0)).unwrap();
    let mut rng = rng_from_seed(1);
    layer.handle_super_failure(&t, NodeId(0), &stores, &mut rng);
    assert_eq!(layer.super_count(), 0);
    let report = layer.regulation_tick(&t, &stores, &mut rng);
    assert_eq!(report.orphan_promotions, 1);
    assert!(layer.is_super(NodeId(40)));
    // the rest re-home across the new border, one hop per tick
    for _ in 0..10 {
        layer.regulation_tick(&t, &stores, &mut rng);
    }
    assert_eq!(layer.orphans().count(), 0);
    assert_eq!(layer.check_invariants(&t, false), Vec::<String>::new());
}

#[test]
fn chained_neighbors_keep_the_layer_whole() {
    let t0 = build_geode(2).unwrap();
    let stores = open_all(&t0);
    // a star: 0 in the middle
    let mut layer = manual(&t0, &stores, &[(0, 100, vec![]), (10, 100, vec![]), (20, 100, vec![]), (30, 100, vec![])]);
    for s in [10, 20, 30] {
        layer.link(NodeId(0), NodeId(s));
    }
    let mut t = t0.clone();
    t.mark_dead(NodeId(0)).unwrap();
    layer.handle_super_failure(&t, NodeId(0), &stores, &mut rng_from_seed(0));
    assert!(layer.is_connected());
    assert_eq!(layer.super_count(), 3);
}

#[test]
fn query_answered_by_own_super_uses_no_hops() {
    let t = build_geode(1).unwrap();
    let mut stores = open_all(&t);
    stores.insert(NodeId(3), DataId(9));
    let layer = manual(&t, &stores, &[(0, 1000, (1..42).collect())]);
    let q = Query { id: 1, origin: NodeId(17), target: DataId(9), ttl: 5 };
    let out = layer.route_query(&t, q, &mut rng_from_seed(0));
    assert!(out.answered());
    assert_eq!(out.super_hops, 0);
    assert_eq!(out.hosts, BTreeSet::from([NodeId(3)]));
    assert_eq!(out.csv_row(), "1,9,1,0,0");
}

#[test]
fn zero_ttl_miss_is_not_found() {
    let t = build_geode(1).unwrap();
    let mut stores = open_all(&t);
    stores.insert(NodeId(30), DataId(9));
    let mut layer = manual(&t, &stores, &[(0, 1000, (1..20).collect()), (20, 1000, (21..42).collect())]);
    layer.link(NodeId(0), NodeId(20));
    let q = Query { id: 2, origin: NodeId(5), target: DataId(9), ttl: 0 };
    assert!(!layer.route_query(&t, q, &mut rng_from_seed(0)).answered());
    let out = layer.route_query(&t, Query { ttl: 1, ..q }, &mut rng_from_seed(0));
    assert!(out.answered());
    assert_eq!(out.super_hops, 1);
}

#[test]
fn orphan_walks_the_mesh_first() {
    let t = build_geode(1).unwrap();
    let mut stores = open_all(&t);
    stores.insert(NodeId(1), DataId(4));
    let layer = manual(&t, &stores, &[(0, 1000, vec![1])]);
    let hops = |v| bfs::distance(&t, NodeId(0), v).unwrap().min(bfs::distance(&t, NodeId(1), v).unwrap());
    let origin = t.alive_nodes().find(|&v| hops(v) == 3).unwrap();
    let out = layer.route_query(&t, Query { id: 0, origin, target: DataId(4), ttl: 0 }, &mut rng_from_seed(7));
    assert!(out.answered());
    assert!(out.mesh_hops >= 3);
}

#[test]
fn answers_are_sound_on_a_static_network() {
    let t = build_geode(4).unwrap();
    let mut stores = open_all(&t);
    let mut rng = rng_from_seed(11);
    for i in 0..200u64 {
        stores.insert(NodeId(rng.random_range(0..t.node_count() as u32)), DataId(i % 40));
    }
    let caps = random_caps(&t, 11);
    let mut layer = SuperLayer::bootstrap(&t, &caps, &stores, &mut rng);
    layer.regulation_tick(&t, &stores, &mut rng);
    for id in 0..500 {
        let q = Query {
            id,
            origin: NodeId(rng.random_range(0..t.node_count() as u32)),
            target: DataId(rng.random_range(0..50)),
            ttl: 10,
        };
        let out = layer.route_query(&t, q, &mut rng);
        for h in &out.hosts {
            assert!(stores.contains(*h, q.target));
        }
        if q.target.0 >= 40 {
            assert!(!out.answered());
        }
    }
}

#[test]
fn complete_layer_finds_everything_with_enough_ttl() {
    // every super-peer neighbors every other: a random forward can only miss
    // by revisiting, so a generous ttl finds any indexed item
    let t = build_geode(2).unwrap();
    let mut stores = open_all(&t);
    let groups: Vec<(u32, u32, Vec<u32>)> = (0..8).map(|g| (g * 20, 1000, (g * 20 + 1..(g * 20 + 20).min(162)).collect())).collect();
    let mut layer = manual(&t, &stores, &groups);
    for a in 0..8 {
        for b in a + 1..8 {
            layer.link(NodeId(a * 20), NodeId(b * 20));
        }
    }
    stores.insert(NodeId(145), DataId(1));
    layer.refresh_indexes(&stores);
    let mut rng = rng_from_seed(0);
    for id in 0..200 {
        let q = Query { id, origin: NodeId(rng.random_range(0..140u32)), target: DataId(1), ttl: 200 };
        assert!(layer.route_query(&t, q, &mut rng).answered());
    }
}

#[test]
fn index_update_replaces_entries() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    let mut layer = manual(&t, &stores, &[(0, 100, vec![1, 2])]);
    layer.index_update(NodeId(0), NodeId(1), &BTreeSet::from([DataId(1), DataId(2)]));
    layer.index_update(NodeId(0), NodeId(2), &BTreeSet::from([DataId(2)]));
    layer.index_update(NodeId(0), NodeId(1), &BTreeSet::from([DataId(3)]));
    let idx = &layer.info(NodeId(0)).unwrap().index;
    assert_eq!(idx.keys().copied().collect::<Vec<_>>(), vec![DataId(2), DataId(3)]);
    assert_eq!(idx[&DataId(2)], BTreeSet::from([NodeId(2)]));
    // not a sub-peer of 0: ignored
    layer.index_update(NodeId(0), NodeId(9), &BTreeSet::from([DataId(5)]));
    assert!(!layer.info(NodeId(0)).unwrap().index.contains_key(&DataId(5)));
}

#[test]
fn joins_attach_to_the_entry_super() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    let mut layer = manual(&t, &stores, &[(0, 1000, (1..41).collect())]);
    layer.add_peer(&t, NodeId(41), Capability(1), NodeId(7), &stores, &mut rng_from_seed(0));
    assert_eq!(layer.super_of(NodeId(41)), Some(NodeId(0)));
    layer.remove_peer(&t, NodeId(41), &stores, &mut rng_from_seed(0));
    assert!(layer.role(NodeId(41)).is_none());
    assert_eq!(layer.load(NodeId(0)), 41);
}

#[test]
fn snapshot_lists_supers() {
    let t = build_geode(1).unwrap();
    let stores = open_all(&t);
    let mut layer = manual(&t, &stores, &[(0, 100, vec![1, 2]), (5, 10, vec![])]);
    layer.link(NodeId(0), NodeId(5));
    assert_eq!(layer.snapshot_csv(), "superId,capability,numSubs,superDegree\n0,100,3,1\n5,10,1,1\n");
}
