use std::collections::BTreeSet;

use adapnet::bfs;
use adapnet::engine::MIN_NODES;
use adapnet::mesh::{connect_node, repair_failure};
use adapnet::{build_geode, check_invariant, rng_from_seed, NodeId, Topology};
use proptest::prelude::*;
use rand::Rng;

/// Triangles counted by brute force over adjacent pairs.
fn face_count(t: &Topology) -> usize {
    let mut faces = BTreeSet::new();
    for a in t.alive_nodes() {
        for &b in t.neighbors(a) {
            for &c in t.neighbors(b) {
                if c != a && t.has_edge(a, c) {
                    let mut f = [a, b, c];
                    f.sort();
                    faces.insert(f);
                }
            }
        }
    }
    faces.len()
}

#[test]
fn geode_counts_follow_subdivision() {
    for k in 0..=4u32 {
        let t = build_geode(k).unwrap();
        let p = 4usize.pow(k);
        assert_eq!(t.alive_count(), 10 * p + 2, "level {k} nodes");
        assert_eq!(t.edge_count(), 30 * p, "level {k} edges");
        assert_eq!(face_count(&t), 20 * p, "level {k} faces");
        assert!(check_invariant(&t).is_valid());
    }
}

#[test]
fn geode_degrees_are_five_and_six() {
    let t = build_geode(3).unwrap();
    let fives = t.alive_nodes().filter(|&n| t.degree(n) == 5).count();
    assert_eq!(fives, 12);
    assert!(t.alive_nodes().all(|n| matches!(t.degree(n), 5 | 6)));
}

#[test]
fn geode_diameter_doubles_per_level() {
    // distance between antipodal icosahedron vertices is 3 hops, times 2^k
    for k in 0..=3u32 {
        let t = build_geode(k).unwrap();
        let ecc = bfs::eccentricity(&t, NodeId(0));
        assert_eq!(ecc, 3 << k, "level {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_joins_and_failures_keep_the_invariant(seed in any::<u64>(), ops in prop::collection::vec(any::<bool>(), 1..120)) {
        let mut rng = rng_from_seed(seed);
        let mut t = build_geode(1).unwrap();
        for join in ops {
            let alive: Vec<NodeId> = t.alive_nodes().collect();
            let pick = alive[rng.random_range(0..alive.len())];
            if join || alive.len() <= MIN_NODES {
                let id = t.next_id();
                connect_node(&mut t, id, pick, &mut rng).unwrap();
            } else {
                t.mark_dead(pick).unwrap();
                repair_failure(&mut t, pick, &mut rng).unwrap();
            }
            let report = check_invariant(&t);
            prop_assert!(report.violations.is_empty(), "{:?}", &report.violations[..report.violations.len().min(3)]);
            prop_assert_eq!(report.components.len(), 1);
        }
    }

    #[test]
    fn joins_add_three_edges(seed in any::<u64>(), joins in 1usize..80) {
        let mut rng = rng_from_seed(seed);
        let mut t = build_geode(0).unwrap();
        for _ in 0..joins {
            let alive: Vec<NodeId> = t.alive_nodes().collect();
            let pick = alive[rng.random_range(0..alive.len())];
            let id = t.next_id();
            connect_node(&mut t, id, pick, &mut rng).unwrap();
        }
        // closed triangulation: E = 3V - 6, so mean degree stays 6 - 12/V
        prop_assert_eq!(t.edge_count(), 3 * t.alive_count() - 6);
    }
}
