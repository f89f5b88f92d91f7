//! Bowyer–Watson Delaunay triangulation of points in the unit square.

#[derive(Clone, Copy, Debug)]
struct Triangle {
    v: [usize; 3],
    cx: f64,
    cy: f64,
    r2: f64,
}

fn circumcircle(pts: &[(f64, f64)], v: [usize; 3]) -> Triangle {
    let (ax, ay) = pts[v[0]];
    let (bx, by) = pts[v[1]];
    let (cx, cy) = pts[v[2]];
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    Triangle {
        v,
        cx: ux,
        cy: uy,
        r2: (ax - ux).powi(2) + (ay - uy).powi(2),
    }
}

/// Undirected edges `(i, j)`, `i < j`, of the Delaunay triangulation of `points`.
///
/// Points are expected inside the unit square. Edges incident to the enclosing
/// super-triangle are discarded.
pub fn delaunay_edges(points: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    if n == 2 {
        return vec![(0, 1)];
    }
    let mut pts = points.to_vec();
    pts.extend([(-1.0e3, -1.0e3), (3.0e3, -1.0e3), (-1.0e3, 3.0e3)]);
    let mut tris = vec![circumcircle(&pts, [n, n + 1, n + 2])];
    for p in 0..n {
        let (px, py) = pts[p];
        let (bad, keep): (Vec<Triangle>, Vec<Triangle>) = tris
            .into_iter()
            .partition(|t| (px - t.cx).powi(2) + (py - t.cy).powi(2) < t.r2);
        tris = keep;
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t.v[k], t.v[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if let Some(pos) = boundary.iter().position(|&e| e == key) {
                    boundary.swap_remove(pos);
                } else {
                    boundary.push(key);
                }
            }
        }
        for (a, b) in boundary {
            tris.push(circumcircle(&pts, [a, b, p]));
        }
    }
    let mut edges: Vec<(usize, usize)> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t.v[k], t.v[(k + 1) % 3])))
        .filter(|&(a, b)| a < n && b < n)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}
