//! Left-right planarity test (Brandes' formulation of de Fraysseix–Rosenstiehl).

use crate::graph::Graph;

type Edge = (usize, usize);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Interval {
    low: Option<Edge>,
    high: Option<Edge>,
}

impl Interval {
    fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState<'g> {
    g: &'g Graph,
    n: usize,
    adj: Vec<Vec<usize>>,
    height: Vec<Option<usize>>,
    parent_edge: Vec<Option<Edge>>,
    oriented: Vec<bool>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<usize>,
    out_edges: Vec<Vec<usize>>,
    ordered_adjs: Vec<Vec<usize>>,
    reference: Vec<Option<Edge>>,
    lowpt_edge: Vec<Option<Edge>>,
    stack_bottom: Vec<Option<ConflictPair>>,
    stack: Vec<ConflictPair>,
}

impl<'g> LrState<'g> {
    fn new(g: &'g Graph) -> Self {
        let n = g.num_nodes();
        Self {
            g,
            n,
            adj: g.adjacency_lists(),
            height: vec![None; n],
            parent_edge: vec![None; n],
            oriented: vec![false; n * n],
            lowpt: vec![0; n * n],
            lowpt2: vec![0; n * n],
            nesting_depth: vec![0; n * n],
            out_edges: vec![Vec::new(); n],
            ordered_adjs: vec![Vec::new(); n],
            reference: vec![None; n * n],
            lowpt_edge: vec![None; n * n],
            stack_bottom: vec![None; n * n],
            stack: Vec::new(),
        }
    }

    #[inline]
    fn id(&self, e: Edge) -> usize {
        e.0 * self.n + e.1
    }

    fn lowpt_of(&self, e: Edge) -> usize {
        self.lowpt[self.id(e)]
    }

    fn conflicting(&self, iv: &Interval, b: Edge) -> bool {
        match iv.high {
            Some(h) if !iv.is_empty() => self.lowpt_of(h) > self.lowpt_of(b),
            _ => false,
        }
    }

    fn lowest(&self, p: &ConflictPair) -> usize {
        if p.left.is_empty() {
            return self.lowpt_of(p.right.low.expect("non-empty right"));
        }
        if p.right.is_empty() {
            return self.lowpt_of(p.left.low.expect("non-empty left"));
        }
        self.lowpt_of(p.left.low.unwrap())
            .min(self.lowpt_of(p.right.low.unwrap()))
    }

    fn orient(&mut self, v: usize) {
        let e = self.parent_edge[v];
        let hv = self.height[v].expect("visited");
        for idx in 0..self.adj[v].len() {
            let w = self.adj[v][idx];
            if self.oriented[v * self.n + w] || self.oriented[w * self.n + v] {
                continue;
            }
            let vw = (v, w);
            let id = self.id(vw);
            self.oriented[id] = true;
            self.out_edges[v].push(w);
            self.lowpt[id] = hv;
            self.lowpt2[id] = hv;
            match self.height[w] {
                None => {
                    self.parent_edge[w] = Some(vw);
                    self.height[w] = Some(hv + 1);
                    self.orient(w);
                }
                Some(hw) => self.lowpt[id] = hw,
            }
            self.nesting_depth[id] = 2 * self.lowpt[id];
            if self.lowpt2[id] < hv {
                self.nesting_depth[id] += 1;
            }
            if let Some(e) = e {
                let eid = self.id(e);
                let (lvw, l2vw) = (self.lowpt[id], self.lowpt2[id]);
                if lvw < self.lowpt[eid] {
                    self.lowpt2[eid] = self.lowpt[eid].min(l2vw);
                    self.lowpt[eid] = lvw;
                } else if lvw > self.lowpt[eid] {
                    self.lowpt2[eid] = self.lowpt2[eid].min(lvw);
                } else {
                    self.lowpt2[eid] = self.lowpt2[eid].min(l2vw);
                }
            }
        }
    }

    fn test(&mut self, v: usize) -> bool {
        let e = self.parent_edge[v];
        let hv = self.height[v].unwrap();
        let succ = self.ordered_adjs[v].clone();
        for (k, &w) in succ.iter().enumerate() {
            let ei = (v, w);
            let eid = self.id(ei);
            self.stack_bottom[eid] = self.stack.last().copied();
            if self.parent_edge[w] == Some(ei) {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[eid] = Some(ei);
                self.stack.push(ConflictPair {
                    left: Interval::default(),
                    right: Interval {
                        low: Some(ei),
                        high: Some(ei),
                    },
                });
            }
            if self.lowpt[eid] < hv {
                let e = e.expect("a return edge below v implies v is not a root");
                if k == 0 {
                    let eid_parent = self.id(e);
                    self.lowpt_edge[eid_parent] = self.lowpt_edge[eid];
                } else if !self.add_constraints(ei, e) {
                    return false;
                }
            }
        }
        if let Some(e) = e {
            self.remove_back_edges(e);
        }
        true
    }

    fn add_constraints(&mut self, ei: Edge, e: Edge) -> bool {
        let mut p = ConflictPair::default();
        let bottom = self.stack_bottom[self.id(ei)];
        loop {
            let mut q = self.stack.pop().expect("conflict stack underflow");
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            let q_low = q.right.low.expect("non-empty right");
            if self.lowpt_of(q_low) > self.lowpt_of(e) {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    let id = self.id(p.right.low.unwrap());
                    self.reference[id] = q.right.high;
                }
                p.right.low = q.right.low;
            } else {
                let id = self.id(q_low);
                self.reference[id] = self.lowpt_edge[self.id(e)];
            }
            if self.stack.last().copied() == bottom {
                break;
            }
        }
        while let Some(top) = self.stack.last().copied() {
            if !(self.conflicting(&top.left, ei) || self.conflicting(&top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().unwrap();
            if self.conflicting(&q.right, ei) {
                q.swap();
            }
            if self.conflicting(&q.right, ei) {
                return false;
            }
            if let Some(low) = p.right.low {
                let id = self.id(low);
                self.reference[id] = q.right.high;
            }
            if q.right.low.is_some() {
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else {
                let id = self.id(p.left.low.unwrap());
                self.reference[id] = q.left.high;
            }
            p.left.low = q.left.low;
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: Edge) {
        let u = e.0;
        let hu = self.height[u].unwrap();
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != hu {
                break;
            }
            self.stack.pop();
        }
        if let Some(mut p) = self.stack.pop() {
            while let Some(h) = p.left.high {
                if h.1 != u {
                    break;
                }
                p.left.high = self.reference[self.id(h)];
            }
            if p.left.high.is_none() {
                if let Some(low) = p.left.low {
                    let id = self.id(low);
                    self.reference[id] = p.right.low;
                    p.left.low = None;
                }
            }
            while let Some(h) = p.right.high {
                if h.1 != u {
                    break;
                }
                p.right.high = self.reference[self.id(h)];
            }
            if p.right.high.is_none() {
                if let Some(low) = p.right.low {
                    let id = self.id(low);
                    self.reference[id] = p.left.low;
                    p.right.low = None;
                }
            }
            self.stack.push(p);
        }
        let eid = self.id(e);
        if self.lowpt[eid] < hu {
            if let Some(top) = self.stack.last() {
                let hl = top.left.high;
                let hr = top.right.high;
                self.reference[eid] = match (hl, hr) {
                    (Some(l), None) => Some(l),
                    (Some(l), Some(r)) if self.lowpt_of(l) > self.lowpt_of(r) => Some(l),
                    _ => hr,
                };
            }
        }
    }

    fn run(mut self) -> bool {
        let n = self.n;
        if n > 2 && self.g.edge_count() > 3 * n - 6 {
            return false;
        }
        let mut roots = Vec::new();
        for v in 0..n {
            if self.height[v].is_none() {
                self.height[v] = Some(0);
                roots.push(v);
                self.orient(v);
            }
        }
        for v in 0..n {
            let mut succ = self.out_edges[v].clone();
            succ.sort_by_key(|&w| self.nesting_depth[v * n + w]);
            self.ordered_adjs[v] = succ;
        }
        roots.into_iter().all(|r| self.test(r))
    }
}

/// Exact planarity decision for the binary edge structure of `g`.
pub fn is_planar(g: &Graph) -> bool {
    LrState::new(g).run()
}
