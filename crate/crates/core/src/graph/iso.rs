//! Weisfeiler–Leman colour refinement and exact isomorphism search.

use super::Graph;

/// Refinement rounds used by [`canonical_hash`].
pub const WL_ITERATIONS: usize = 3;

#[inline]
fn mix(h: u64, x: u64) -> u64 {
    // splitmix64 finaliser over a running state
    let mut z = h ^ x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn refine_once(g: &Graph, colors: &[u64]) -> Vec<u64> {
    let n = g.num_nodes();
    let mut sig: Vec<(u64, u64)> = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            sig.clear();
            for j in 0..n {
                let e = g.edge(i, j);
                if e != 0 {
                    sig.push((e as u64, colors[j]));
                }
            }
            sig.sort_unstable();
            let mut h = mix(0x5157_4C52_4546_494E, colors[i]);
            h = mix(h, sig.len() as u64);
            for &(e, c) in &sig {
                h = mix(mix(h, e), c);
            }
            h
        })
        .collect()
}

fn initial_colors(g: &Graph) -> Vec<u64> {
    (0..g.num_nodes())
        .map(|i| mix(0x4E4F_4445, g.node(i) as u64))
        .collect()
}

/// Node colours after `iterations` rounds of 1-WL refinement.
///
/// Colours are deterministic functions of the rooted neighbourhood, so they
/// are comparable across graphs refined for the same number of rounds.
pub fn wl_colors(g: &Graph, iterations: usize) -> Vec<u64> {
    let mut colors = initial_colors(g);
    for _ in 0..iterations {
        colors = refine_once(g, &colors);
    }
    colors
}

fn class_count(colors: &[u64]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Permutation-invariant hash. Equal for isomorphic graphs; equality does not
/// imply isomorphism.
pub fn canonical_hash(g: &Graph) -> u64 {
    let mut colors = wl_colors(g, WL_ITERATIONS);
    colors.sort_unstable();
    let mut h = mix(0x4341_4E4F_4E, g.num_nodes() as u64);
    h = mix(h, g.node_classes() as u64);
    h = mix(h, g.edge_classes() as u64);
    for c in colors {
        h = mix(h, c);
    }
    h
}

/// Exact isomorphism test respecting node and edge labels.
pub fn is_isomorphic(a: &Graph, b: &Graph) -> bool {
    let n = a.num_nodes();
    if n != b.num_nodes()
        || a.node_classes() != b.node_classes()
        || a.edge_classes() != b.edge_classes()
    {
        return false;
    }
    if n == 0 {
        return true;
    }
    // Refine both graphs in lockstep until neither partition splits further.
    let mut ca = initial_colors(a);
    let mut cb = initial_colors(b);
    let mut classes = (class_count(&ca), class_count(&cb));
    loop {
        let mut sa = ca.clone();
        let mut sb = cb.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        if sa != sb {
            return false;
        }
        let na = refine_once(a, &ca);
        let nb = refine_once(b, &cb);
        let next = (class_count(&na), class_count(&nb));
        ca = na;
        cb = nb;
        if next == classes {
            let mut sa = ca.clone();
            let mut sb = cb.clone();
            sa.sort_unstable();
            sb.sort_unstable();
            if sa != sb {
                return false;
            }
            break;
        }
        classes = next;
    }

    let order = match_order(a, &ca);
    let mut map_ab = vec![usize::MAX; n];
    let mut used_b = vec![false; n];
    backtrack(a, b, &ca, &cb, &order, 0, &mut map_ab, &mut used_b)
}

/// Node order for the search: rarest colour first, then greedily the node with
/// the most already-ordered neighbours.
fn match_order(g: &Graph, colors: &[u64]) -> Vec<usize> {
    let n = g.num_nodes();
    let mut freq = std::collections::HashMap::new();
    for &c in colors {
        *freq.entry(c).or_insert(0usize) += 1;
    }
    let degrees = g.degrees();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by(|&u, &v| {
                links[u]
                    .cmp(&links[v])
                    .then(freq[&colors[v]].cmp(&freq[&colors[u]]))
                    .then(degrees[u].cmp(&degrees[v]))
                    .then(v.cmp(&u))
            })
            .expect("unplaced node exists");
        placed[next] = true;
        order.push(next);
        for w in g.neighbors(next) {
            links[w] += 1;
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    a: &Graph,
    b: &Graph,
    ca: &[u64],
    cb: &[u64],
    order: &[usize],
    depth: usize,
    map_ab: &mut [usize],
    used_b: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    for v in 0..b.num_nodes() {
        if used_b[v] || cb[v] != ca[u] || a.node(u) != b.node(v) {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&u2| a.edge(u, u2) == b.edge(v, map_ab[u2]));
        if !consistent {
            continue;
        }
        map_ab[u] = v;
        used_b[v] = true;
        if backtrack(a, b, ca, cb, order, depth + 1, map_ab, used_b) {
            return true;
        }
        used_b[v] = false;
        map_ab[u] = usize::MAX;
    }
    false
}
