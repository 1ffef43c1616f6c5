//! Exact reference solvers used for verification.

use crate::error::{Error, Result};
use crate::graph::{CutEnergy, Labeling};

/// Largest instance [`brute_force_mincut`] accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 24;

/// Exhaustive minimization over all `2^n` labelings.
///
/// Labelings are visited in lexicographic order of `(x_0, x_1, ...)` and only
/// a strictly lower energy replaces the incumbent, so ties resolve to the
/// lexicographically smallest labeling.
pub fn brute_force_mincut(cut: &CutEnergy) -> Result<(Labeling, f64)> {
    let n = cut.n();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooLarge { n, max: BRUTE_FORCE_MAX_NODES });
    }
    let w = cut.unary();
    let edges: Vec<(u32, u32, f64)> = cut
        .edges()
        .iter()
        .map(|e| ((n - 1 - e.i) as u32, (n - 1 - e.j) as u32, e.weight))
        .collect();
    let mut best_mask = 0u32;
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << n) {
        let mut tv = 0.0;
        for &(a, b, wt) in &edges {
            if (mask >> a ^ mask >> b) & 1 == 1 {
                tv += wt;
            }
        }
        let mut unary = 0.0;
        for (i, wi) in w.iter().enumerate() {
            if mask >> (n - 1 - i) & 1 == 1 {
                unary += wi;
            }
        }
        let e = tv - unary;
        if e < best {
            best = e;
            best_mask = mask;
        }
    }
    let labeling = Labeling((0..n).map(|i| best_mask >> (n - 1 - i) & 1 == 1).collect());
    let energy = cut.energy(&labeling)?;
    Ok((labeling, energy))
}

/// Details of a max-flow solve.
#[derive(Debug, Clone)]
pub struct MaxflowReport {
    pub labeling: Labeling,
    pub energy: f64,
    pub flow_value: f64,
    pub cut_capacity: f64,
}

struct FlowNetwork {
    head: Vec<usize>,
    to: Vec<usize>,
    next: Vec<usize>,
    res: Vec<f64>,
}

const NIL: usize = usize::MAX;

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork { head: vec![NIL; nodes], to: Vec::new(), next: Vec::new(), res: Vec::new() }
    }

    /// Adds arc `u -> v` with capacity `c` and reverse arc with capacity `back`.
    fn add_pair(&mut self, u: usize, v: usize, c: f64, back: f64) {
        for (a, b, cap) in [(u, v, c), (v, u, back)] {
            self.to.push(b);
            self.res.push(cap);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn bfs(&self, s: usize, eps: f64, level: &mut [i64]) {
        level.fill(-1);
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let mut e = self.head[u];
            while e != NIL {
                let v = self.to[e];
                if self.res[e] > eps && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
                e = self.next[e];
            }
        }
    }

    /// Dinic's algorithm: blocking flows along shortest augmenting paths.
    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let nodes = self.head.len();
        let mut level = vec![-1i64; nodes];
        let mut cursor = vec![NIL; nodes];
        let mut path: Vec<usize> = Vec::new();
        let mut flow = 0.0;
        loop {
            self.bfs(s, eps, &mut level);
            if level[t] < 0 {
                return flow;
            }
            cursor.copy_from_slice(&self.head);
            path.clear();
            let mut u = s;
            loop {
                if u == t {
                    let bottleneck = path.iter().map(|&e| self.res[e]).fold(f64::INFINITY, f64::min);
                    let mut cut_at = path.len();
                    for (k, &e) in path.iter().enumerate() {
                        self.res[e] -= bottleneck;
                        self.res[e ^ 1] += bottleneck;
                        if self.res[e] <= eps && cut_at == path.len() {
                            cut_at = k;
                        }
                    }
                    flow += bottleneck;
                    path.truncate(cut_at);
                    u = path.last().map_or(s, |&e| self.to[e]);
                    continue;
                }
                let mut e = cursor[u];
                while e != NIL {
                    let v = self.to[e];
                    if self.res[e] > eps && level[v] == level[u] + 1 {
                        break;
                    }
                    e = self.next[e];
                }
                cursor[u] = e;
                if e != NIL {
                    path.push(e);
                    u = self.to[e];
                } else {
                    level[u] = -1;
                    match path.pop() {
                        None => break,
                        Some(back) => {
                            u = self.to[back ^ 1];
                            cursor[u] = self.next[cursor[u]];
                        }
                    }
                }
            }
        }
    }
}

/// Min cut through the standard s-t network: node `i` gets a source arc of
/// capacity `w_i` when `w_i > 0` and a sink arc of capacity `-w_i` otherwise,
/// and each edge a pair of arcs of capacity `a_ij`. Source-side nodes are
/// labeled 1. The cut capacity equals the energy plus `sum_i max(w_i, 0)`.
pub fn maxflow_report(cut: &CutEnergy) -> MaxflowReport {
    let n = cut.n();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    let mut scale = 0.0f64;
    for (i, &w) in cut.unary().iter().enumerate() {
        if w > 0.0 {
            net.add_pair(s, i, w, 0.0);
        } else if w < 0.0 {
            net.add_pair(i, t, -w, 0.0);
        }
        scale = scale.max(w.abs());
    }
    for e in cut.edges() {
        net.add_pair(e.i, e.j, e.weight, e.weight);
        scale = scale.max(e.weight);
    }
    let eps = 1e-13 * scale.max(1.0);
    let flow_value = net.max_flow(s, t, eps);
    let mut level = vec![-1i64; n + 2];
    net.bfs(s, eps, &mut level);
    let labeling = Labeling((0..n).map(|i| level[i] >= 0).collect());
    let energy = cut.energy(&labeling).expect("labeling has length n");
    let positive: f64 = cut.unary().iter().map(|w| w.max(0.0)).sum();
    let cut_capacity = energy + positive;
    debug_assert!(
        (cut_capacity - flow_value).abs() <= 1e-7 * (1.0 + flow_value.abs()),
        "max-flow {flow_value} differs from min-cut {cut_capacity}"
    );
    MaxflowReport { labeling, energy, flow_value, cut_capacity }
}

pub fn maxflow_mincut(cut: &CutEnergy) -> (Labeling, f64) {
    let r = maxflow_report(cut);
    (r.labeling, r.energy)
}
