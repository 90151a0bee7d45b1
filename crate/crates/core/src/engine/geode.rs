use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{icosahedron_faces, topology_from_faces, Topology};

/// Highest subdivision level accepted: level 8 already has 655362 nodes.
pub const MAX_GEODE_LEVEL: u32 = 8;

/// Node count of a level-`k` geode.
pub fn geode_nodes(k: u32) -> usize {
    10 * 4usize.pow(k) + 2
}

/// A geode: the icosahedron with every triangle split into four, `k` times.
///
/// Level `k` has `10·4^k + 2` nodes, `30·4^k` edges and `20·4^k` faces; the
/// twelve original vertices keep degree five and all others have degree six.
pub fn build_geode(k: u32) -> Result<Topology> {
    if k > MAX_GEODE_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "geode level {k} has {} nodes; the limit is level {MAX_GEODE_LEVEL}",
            10u128 * 4u128.pow(k) + 2
        )));
    }
    Ok(topology_from_faces(&geode_faces(k)))
}

pub(crate) fn geode_faces(k: u32) -> Vec<[u32; 3]> {
    let mut faces = icosahedron_faces();
    let mut next = 12u32;
    for _ in 0..k {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
        let mut split = |a: u32, b: u32| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                next += 1;
                next - 1
            })
        };
        let mut refined = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let (ab, bc, ca) = (split(a, b), split(b, c), split(c, a));
            refined.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = refined;
    }
    faces
}
