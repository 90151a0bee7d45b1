use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::mesh::Topology;

/// Walks from `from` back to the source by following recorded hop distances.
///
/// Each hop goes to the alive neighbor with the smallest recorded distance
/// below the current one (lowest id on ties), so departed nodes off the path
/// are simply stepped around. The returned path excludes `from` and ends at
/// the source; on an intact mesh its length equals `from`'s distance.
pub fn return_path<D>(t: &Topology, dist: D, from: NodeId) -> Result<Vec<NodeId>>
where
    D: Fn(NodeId) -> Option<u32>,
{
    let Some(mut d) = dist(from) else {
        return Err(Error::InvalidArgument(format!("{from} was not visited")));
    };
    let mut path = Vec::with_capacity(d as usize);
    let mut cur = from;
    while d > 0 {
        let step = t
            .neighbors(cur)
            .iter()
            .filter(|&&n| t.is_alive(n))
            .filter_map(|&n| dist(n).filter(|&dn| dn < d).map(|dn| (dn, n)))
            .min();
        let Some((dn, n)) = step else {
            return Err(Error::ReturnStranded { at: cur });
        };
        path.push(n);
        cur = n;
        d = dn;
    }
    Ok(path)
}
