//! Structural statistics consumed by the MMD metrics.

use super::linalg::symmetric_eigen;
use super::Graph;

/// Number of node orbits in connected 4-node graphlets.
pub const NUM_ORBITS: usize = 11;

/// Per-graph structural summary.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphStatistics {
    /// `degree_histogram[d]` = number of nodes with degree `d`.
    pub degree_histogram: Vec<usize>,
    pub clustering_coefficients: Vec<f64>,
    /// Per-node counts of the 11 positions in connected 4-node graphlets.
    pub orbit_counts: Vec<[u64; NUM_ORBITS]>,
    /// Ascending eigenvalues of `I - D^{-1/2} A D^{-1/2}`.
    pub laplacian_spectrum: Vec<f64>,
}

pub fn compute_statistics(g: &Graph) -> GraphStatistics {
    let degrees = g.degrees();
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let mut degree_histogram = vec![0usize; max_deg + 1];
    for &d in &degrees {
        degree_histogram[d] += 1;
    }
    if g.num_nodes() == 0 {
        degree_histogram.clear();
    }
    GraphStatistics {
        degree_histogram,
        clustering_coefficients: clustering_coefficients(g),
        orbit_counts: orbit_counts(g),
        laplacian_spectrum: normalized_laplacian_spectrum(g),
    }
}

/// `2·triangles(v) / (deg(v)(deg(v)−1))`, zero below degree 2.
pub fn clustering_coefficients(g: &Graph) -> Vec<f64> {
    let adj = g.adjacency_lists();
    (0..g.num_nodes())
        .map(|v| {
            let nb = &adj[v];
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut tri = 0usize;
            for (a, &x) in nb.iter().enumerate() {
                for &y in &nb[a + 1..] {
                    if g.has_edge(x, y) {
                        tri += 1;
                    }
                }
            }
            2.0 * tri as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

// Orbit indices, following the usual 4-node graphlet orbit numbering shifted to start at 0:
//  0/1: path end/middle, 2/3: star leaf/centre, 4: 4-cycle,
//  5/6/7: paw tail/triangle side/hub, 8/9: diamond degree-2/degree-3, 10: K4.
fn classify(local_deg: [usize; 4], edges: usize) -> Option<[usize; 4]> {
    let mut orbit = [0usize; 4];
    match edges {
        3 => {
            if local_deg.contains(&0) {
                return None; // triangle plus isolated node
            }
            let star = local_deg.contains(&3);
            for k in 0..4 {
                orbit[k] = match (star, local_deg[k]) {
                    (true, 3) => 3,
                    (true, _) => 2,
                    (false, 1) => 0,
                    (false, _) => 1,
                };
            }
        }
        4 => {
            let cycle = local_deg.iter().all(|&d| d == 2);
            for k in 0..4 {
                orbit[k] = if cycle {
                    4
                } else {
                    match local_deg[k] {
                        1 => 5,
                        2 => 6,
                        _ => 7,
                    }
                };
            }
        }
        5 => {
            for k in 0..4 {
                orbit[k] = if local_deg[k] == 3 { 9 } else { 8 };
            }
        }
        6 => orbit = [10; 4],
        _ => return None,
    }
    Some(orbit)
}

/// Exhaustive enumeration of induced connected 4-node subgraphs.
pub fn orbit_counts(g: &Graph) -> Vec<[u64; NUM_ORBITS]> {
    let n = g.num_nodes();
    let mut counts = vec![[0u64; NUM_ORBITS]; n];
    for a in 0..n {
        for b in a + 1..n {
            let ab = g.has_edge(a, b) as usize;
            for c in b + 1..n {
                let ac = g.has_edge(a, c) as usize;
                let bc = g.has_edge(b, c) as usize;
                let e3 = ab + ac + bc;
                for d in c + 1..n {
                    let ad = g.has_edge(a, d) as usize;
                    let bd = g.has_edge(b, d) as usize;
                    let cd = g.has_edge(c, d) as usize;
                    let edges = e3 + ad + bd + cd;
                    if edges < 3 {
                        continue;
                    }
                    let deg = [ab + ac + ad, ab + bc + bd, ac + bc + cd, ad + bd + cd];
                    if let Some(orb) = classify(deg, edges) {
                        for (node, o) in [a, b, c, d].into_iter().zip(orb) {
                            counts[node][o] += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

/// Spectrum of the symmetric normalised Laplacian; isolated nodes contribute 0.
pub fn normalized_laplacian_spectrum(g: &Graph) -> Vec<f64> {
    let n = g.num_nodes();
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        if deg[i] > 0 {
            l[i * n + i] = 1.0;
        }
        for j in 0..n {
            if g.has_edge(i, j) {
                l[i * n + j] = -inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    symmetric_eigen(&l, n).values
}
