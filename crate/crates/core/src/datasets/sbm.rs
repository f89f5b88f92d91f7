//! Statistical membership test for stochastic-block-model graphs.
//!
//! Communities are recovered by spectral clustering on the normalised
//! Laplacian (k picked by eigengap among counts compatible with the allowed
//! block sizes), then polished by greedy moves and swaps under the block
//! likelihood. The recovered intra/inter densities are z-tested against the
//! generator's probabilities.

use crate::graph::linalg::symmetric_eigen;
use crate::graph::Graph;
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided significance level of the density tests.
pub const SBM_SIGNIFICANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct SbmFit {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub intra_edges: usize,
    pub intra_pairs: usize,
    pub inter_edges: usize,
    pub inter_pairs: usize,
    pub z_intra: f64,
    pub z_inter: f64,
}

fn z_score(edges: usize, pairs: usize, p: f64) -> f64 {
    let mean = pairs as f64 * p;
    let var = pairs as f64 * p * (1.0 - p);
    if var == 0.0 {
        return if (edges as f64 - mean).abs() < 0.5 { 0.0 } else { f64::INFINITY };
    }
    (edges as f64 - mean) / var.sqrt()
}

fn kmeans(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in 0..n {
        // farthest-point seeding from `start`
        let mut centers = vec![points[start].clone()];
        while centers.len() < k {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = centers.iter().map(|c| dist(&points[a], c)).fold(f64::MAX, f64::min);
                    let db = centers.iter().map(|c| dist(&points[b], c)).fold(f64::MAX, f64::min);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap();
            centers.push(points[far].clone());
        }
        let mut assign = vec![0usize; n];
        for _ in 0..50 {
            let mut changed = false;
            for i in 0..n {
                let c = (0..k)
                    .min_by(|&a, &b| dist(&points[i], &centers[a]).total_cmp(&dist(&points[i], &centers[b])))
                    .unwrap();
                if c != assign[i] {
                    assign[i] = c;
                    changed = true;
                }
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> =
                    (0..n).filter(|&i| assign[i] == c).map(|i| &points[i]).collect();
                if members.is_empty() {
                    continue;
                }
                for d in 0..center.len() {
                    center[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = (0..n).map(|i| dist(&points[i], &centers[assign[i]])).sum();
        if best.as_ref().map_or(true, |(b, _)| inertia < *b - 1e-12) {
            best = Some((inertia, assign));
        }
    }
    best.map(|(_, a)| a).unwrap_or_default()
}

/// Greedy likelihood ascent over single-node moves and pairwise swaps.
fn refine(
    g: &Graph,
    assign: &mut [usize],
    k: usize,
    size_range: (usize, usize),
    p_intra: f64,
    p_inter: f64,
) {
    let n = g.num_nodes();
    let clamp = |p: f64| p.clamp(1e-9, 1.0 - 1e-9);
    let (li, lni) = (clamp(p_intra).ln(), (1.0 - clamp(p_intra)).ln());
    let (lo, lno) = (clamp(p_inter).ln(), (1.0 - clamp(p_inter)).ln());
    // log-likelihood of v's incident pairs if v sat in block c
    let node_ll = |v: usize, assign: &[usize]| -> Vec<f64> {
        let mut edges_to = vec![0usize; k];
        let mut others = vec![0usize; k];
        for u in (0..n).filter(|&u| u != v) {
            others[assign[u]] += 1;
            if g.has_edge(u, v) {
                edges_to[assign[u]] += 1;
            }
        }
        let total_e: usize = edges_to.iter().sum();
        let total_ne = (n - 1 - total_e) as f64;
        (0..k)
            .map(|c| {
                let e = edges_to[c] as f64;
                let ne = (others[c] - edges_to[c]) as f64;
                e * li + ne * lni + (total_e as f64 - e) * lo + (total_ne - ne) * lno
            })
            .collect()
    };
    // intra-minus-inter contribution of the single pair (u, v)
    let pair_gain = |u: usize, v: usize| {
        if g.has_edge(u, v) {
            li - lo
        } else {
            lni - lno
        }
    };
    let mut sizes = vec![0usize; k];
    for &a in assign.iter() {
        sizes[a] += 1;
    }
    // first bring every block into the size range with the cheapest moves
    let (smin, smax) = size_range;
    while let Some(c) = (0..k).find(|&c| sizes[c] > smax || sizes[c] < smin) {
        let table: Vec<Vec<f64>> = (0..n).map(|v| node_ll(v, assign)).collect();
        let candidates: Vec<(usize, usize)> = if sizes[c] > smax {
            (0..n)
                .filter(|&v| assign[v] == c)
                .flat_map(|v| (0..k).filter(|&d| d != c && sizes[d] < smax).map(move |d| (v, d)))
                .collect()
        } else {
            (0..n)
                .filter(|&v| assign[v] != c && sizes[assign[v]] > smin)
                .map(|v| (v, c))
                .collect()
        };
        let Some(&(v, d)) = candidates.iter().max_by(|x, y| {
            let gx = table[x.0][x.1] - table[x.0][assign[x.0]];
            let gy = table[y.0][y.1] - table[y.0][assign[y.0]];
            gx.total_cmp(&gy).then(y.cmp(x))
        }) else {
            return;
        };
        sizes[assign[v]] -= 1;
        sizes[d] += 1;
        assign[v] = d;
    }
    for _ in 0..10 * n {
        let mut moved = false;
        for v in 0..n {
            let cur = assign[v];
            if sizes[cur] <= size_range.0.max(1) {
                continue;
            }
            let ll = node_ll(v, assign);
            let best = (0..k)
                .filter(|&c| c == cur || sizes[c] < size_range.1)
                .max_by(|&a, &b| ll[a].total_cmp(&ll[b]).then(b.cmp(&a)))
                .unwrap();
            if best != cur && ll[best] > ll[cur] + 1e-9 {
                sizes[cur] -= 1;
                sizes[best] += 1;
                assign[v] = best;
                moved = true;
            }
        }
        let table: Vec<Vec<f64>> = (0..n).map(|v| node_ll(v, assign)).collect();
        let mut best_swap = None;
        let mut best_gain = 1e-9;
        for v in 0..n {
            for u in v + 1..n {
                let (a, b) = (assign[v], assign[u]);
                if a == b {
                    continue;
                }
                let gain = table[v][b] - table[v][a] + table[u][a] - table[u][b]
                    - 2.0 * pair_gain(u, v);
                if gain > best_gain {
                    best_gain = gain;
                    best_swap = Some((v, u));
                }
            }
        }
        if let Some((v, u)) = best_swap {
            assign.swap(v, u);
            moved = true;
        }
        if !moved {
            break;
        }
    }
}

/// Recovers a block partition with `k` in `k_range` and the resulting densities.
///
/// Only `k` compatible with `size_range` are considered, and the likelihood
/// polish first repairs any block whose size falls outside that range.
pub fn fit_sbm(
    g: &Graph,
    k_range: (usize, usize),
    size_range: (usize, usize),
    p_intra: f64,
    p_inter: f64,
) -> Option<SbmFit> {
    let n = g.num_nodes();
    if n < 2 {
        return None;
    }
    let feasible: Vec<usize> = (k_range.0.max(1)..=k_range.1.min(n - 1).max(1))
        .filter(|&k| k * size_range.0 <= n && n <= k * size_range.1)
        .collect();
    if feasible.is_empty() {
        return None;
    }
    let deg = g.degrees();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        if deg[i] > 0 {
            l[i * n + i] = 1.0;
        }
        for j in 0..n {
            if g.has_edge(i, j) {
                l[i * n + j] = -1.0 / ((deg[i] * deg[j]) as f64).sqrt();
            }
        }
    }
    let eig = symmetric_eigen(&l, n);
    let k = feasible
        .into_iter()
        .max_by(|&a, &b| {
            let ga = eig.values[a] - eig.values[a - 1];
            let gb = eig.values[b] - eig.values[b - 1];
            ga.total_cmp(&gb).then(b.cmp(&a))
        })
        .unwrap();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|c| eig.vectors[c][i]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut assign = if k == 1 { vec![0; n] } else { kmeans(&points, k) };
    if k > 1 {
        refine(g, &mut assign, k, size_range, p_intra, p_inter);
    }
    let (mut ie, mut ip, mut oe, mut op) = (0, 0, 0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let e = g.has_edge(i, j) as usize;
            if assign[i] == assign[j] {
                ie += e;
                ip += 1;
            } else {
                oe += e;
                op += 1;
            }
        }
    }
    Some(SbmFit {
        k,
        assignment: assign,
        intra_edges: ie,
        intra_pairs: ip,
        inter_edges: oe,
        inter_pairs: op,
        z_intra: z_score(ie, ip, p_intra),
        z_inter: z_score(oe, op, p_inter),
    })
}

/// True when the recovered blocks all have sizes in `size_range` and both
/// density z-tests pass.
pub fn is_sbm(
    g: &Graph,
    k_range: (usize, usize),
    size_range: (usize, usize),
    p_intra: f64,
    p_inter: f64,
) -> bool {
    let critical = Normal::standard().inverse_cdf(1.0 - SBM_SIGNIFICANCE / 2.0);
    match fit_sbm(g, k_range, size_range, p_intra, p_inter) {
        Some(fit) if fit.k >= 2 && fit.intra_pairs > 0 && fit.inter_pairs > 0 => {
            let mut sizes = vec![0usize; fit.k];
            for &a in &fit.assignment {
                sizes[a] += 1;
            }
            sizes.iter().all(|s| (size_range.0..=size_range.1).contains(s))
                && fit.z_intra.abs() < critical
                && fit.z_inter.abs() < critical
        }
        _ => false,
    }
}
