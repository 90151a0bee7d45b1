use adapnet::{NodeId, Topology};

/// A capped tube: `len` rings of `circ` nodes joined by triangle strips, each
/// end closed by an apex. Walks from the side wrap around the tube and split
/// into two arcs heading opposite ways.
pub fn tube(circ: u32, len: u32) -> Topology {
    let id = |k: u32, j: u32| NodeId(k * circ + j % circ);
    let top = NodeId(circ * len);
    let bottom = NodeId(circ * len + 1);
    let mut edges = Vec::new();
    for k in 0..len {
        for j in 0..circ {
            edges.push((id(k, j), id(k, j + 1)));
            if k + 1 < len {
                edges.push((id(k, j), id(k + 1, j)));
                edges.push((id(k, j), id(k + 1, j + 1)));
            }
        }
    }
    for j in 0..circ {
        edges.push((top, id(0, j)));
        edges.push((bottom, id(len - 1, j)));
    }
    Topology::from_edges(edges)
}
