//! Shortest paths on implicit graphs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Offsets of the 16-neighbour stencil: axis steps, diagonals and knight
/// moves. Knight moves bring the worst-case direction error to about 2.7%.
pub const STENCIL16: [(i64, i64); 16] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (1, 2),
    (1, -2),
    (-1, 2),
    (-1, -2),
    (2, 1),
    (2, -1),
    (-2, 1),
    (-2, -1),
];

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra. `neighbours(v, out)` pushes `(w, cost)` pairs
/// with nonnegative cost. Unreached nodes get `+inf`.
pub fn dijkstra(
    n_nodes: usize,
    sources: impl IntoIterator<Item = (usize, f64)>,
    mut neighbours: impl FnMut(usize, &mut Vec<(usize, f64)>),
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n_nodes];
    let mut heap = BinaryHeap::new();
    for (node, d) in sources {
        if d < dist[node] {
            dist[node] = d;
            heap.push(Entry { dist: d, node });
        }
    }
    let mut buf = Vec::with_capacity(16);
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        buf.clear();
        neighbours(node, &mut buf);
        for &(w, c) in &buf {
            debug_assert!(c >= 0.0);
            let nd = d + c;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry { dist: nd, node: w });
            }
        }
    }
    dist
}

/// Dijkstra on an `nx x ny` grid (x-major) with the 16-neighbour stencil.
/// `edge(a, b)` prices the edge between flat indices, or `None` to drop it.
pub fn grid_dijkstra(
    nx: usize,
    ny: usize,
    sources: impl IntoIterator<Item = (usize, f64)>,
    edge: impl Fn(usize, usize) -> Option<f64>,
) -> Vec<f64> {
    dijkstra(nx * ny, sources, |v, out| {
        let (i, j) = ((v / ny) as i64, (v % ny) as i64);
        for (di, dj) in STENCIL16 {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let w = a as usize * ny + b as usize;
            if let Some(c) = edge(v, w) {
                out.push((w, c));
            }
        }
    })
}
