//! Splitting a grid's total variation into classes of vertex-disjoint chains.
//!
//! Each class stores its chains back to back in "slot" order, so a per-class
//! vector only holds entries for nodes the class actually touches. Nodes off a
//! class's support have the trivial polytope `{0}` there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Connectivity, CutEnergy, GridEnergy};
use crate::tv1d::Chain;

const NO_SLOT: u32 = u32::MAX;

/// A set of vertex-disjoint chains, i.e. one summand `f_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainClass {
    nodes: Vec<u32>,
    weights: Vec<f64>,
    starts: Vec<usize>,
    slot_of: Vec<u32>,
}

/// Borrowed view of one chain inside a class.
#[derive(Debug, Clone, Copy)]
pub struct ChainRef<'a> {
    pub nodes: &'a [u32],
    pub weights: &'a [f64],
    /// First slot of this chain within its class.
    pub first_slot: usize,
}

impl ChainClass {
    fn empty(n: usize) -> Self {
        ChainClass { nodes: Vec::new(), weights: Vec::new(), starts: vec![0], slot_of: vec![NO_SLOT; n] }
    }

    fn push_chain(&mut self, nodes: &[usize], weights: &[f64]) -> Result<()> {
        debug_assert_eq!(nodes.len(), weights.len() + 1);
        for &v in nodes {
            if v >= self.slot_of.len() {
                return Err(Error::InvalidDecomposition(format!("node {v} out of bounds")));
            }
            if self.slot_of[v] != NO_SLOT {
                return Err(Error::InvalidDecomposition(format!("node {v} appears twice within a class")));
            }
            self.slot_of[v] = self.nodes.len() as u32;
            self.nodes.push(v as u32);
        }
        self.weights.extend_from_slice(weights);
        self.starts.push(self.nodes.len());
        Ok(())
    }

    pub fn from_chains(n: usize, chains: &[Chain]) -> Result<Self> {
        let mut class = ChainClass::empty(n);
        for c in chains {
            class.push_chain(&c.nodes, &c.weights)?;
        }
        Ok(class)
    }

    pub fn num_chains(&self) -> usize {
        self.starts.len() - 1
    }

    /// Number of nodes covered, i.e. the length of this class's dual block.
    pub fn num_slots(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn chain(&self, k: usize) -> ChainRef<'_> {
        let (a, b) = (self.starts[k], self.starts[k + 1]);
        ChainRef { nodes: &self.nodes[a..b], weights: &self.weights[a - k..b - k - 1], first_slot: a }
    }

    pub fn chains(&self) -> impl Iterator<Item = ChainRef<'_>> + '_ {
        (0..self.num_chains()).map(move |k| self.chain(k))
    }

    /// Node index of each slot.
    pub fn slot_nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn slot_of(&self, node: usize) -> Option<usize> {
        match self.slot_of[node] {
            NO_SLOT => None,
            s => Some(s as usize),
        }
    }

    pub fn contains(&self, node: usize) -> bool {
        self.slot_of[node] != NO_SLOT
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.slot_of.iter().map(|&s| s != NO_SLOT).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.weights.len()
    }

    /// `f_j(x)` for a dense vector `x`.
    pub fn tv_value(&self, x: &[f64]) -> f64 {
        self.chains()
            .map(|c| {
                c.weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * (x[c.nodes[k + 1] as usize] - x[c.nodes[k] as usize]).abs())
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn to_chains(&self) -> Vec<Chain> {
        self.chains()
            .map(|c| Chain {
                nodes: c.nodes.iter().map(|&v| v as usize).collect(),
                weights: c.weights.to_vec(),
            })
            .collect()
    }
}

/// Partition of a graph's edges into `r` chain classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecomposition {
    n: usize,
    classes: Vec<ChainClass>,
    degree: Vec<u8>,
}

impl ChainDecomposition {
    /// Assembles a decomposition from explicit chains; rejects classes whose
    /// chains share a vertex.
    pub fn from_chains(n: usize, classes: Vec<Vec<Chain>>) -> Result<Self> {
        if classes.len() > u8::MAX as usize {
            return Err(Error::InvalidDecomposition("too many classes".into()));
        }
        let classes = classes
            .iter()
            .map(|c| ChainClass::from_chains(n, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_classes(n, classes))
    }

    fn from_classes(n: usize, classes: Vec<ChainClass>) -> Self {
        let mut degree = vec![0u8; n];
        for class in &classes {
            for &v in &class.nodes {
                degree[v as usize] += 1;
            }
        }
        ChainDecomposition { n, classes, degree }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of classes, including empty ones.
    pub fn r(&self) -> usize {
        self.classes.len()
    }

    /// Number of classes with at least one chain.
    pub fn active_classes(&self) -> usize {
        self.classes.iter().filter(|c| !c.is_empty()).count()
    }

    pub fn classes(&self) -> &[ChainClass] {
        &self.classes
    }

    pub fn class(&self, j: usize) -> &ChainClass {
        &self.classes[j]
    }

    /// Number of classes whose support contains each node.
    pub fn degrees(&self) -> &[u8] {
        &self.degree
    }

    pub fn max_degree(&self) -> usize {
        self.degree.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn to_chains(&self) -> Vec<Vec<Chain>> {
        self.classes.iter().map(|c| c.to_chains()).collect()
    }

    /// `sum_j f_j(x)`.
    pub fn tv_value(&self, x: &[f64]) -> f64 {
        self.classes.iter().map(|c| c.tv_value(x)).sum()
    }
}

/// Splits a maximal grid line into chains at missing (zero-weight) edges.
fn push_line(class: &mut ChainClass, cut: &CutEnergy, line: &[usize], nodes: &mut Vec<usize>, weights: &mut Vec<f64>) {
    nodes.clear();
    weights.clear();
    let flush = |class: &mut ChainClass, nodes: &mut Vec<usize>, weights: &mut Vec<f64>| {
        if nodes.len() >= 2 {
            class.push_chain(nodes, weights).expect("grid lines within a class are disjoint");
        }
        nodes.clear();
        weights.clear();
    };
    for (k, &v) in line.iter().enumerate() {
        if k > 0 {
            let w = cut.edge_weight(line[k - 1], v);
            if w > 0.0 {
                if nodes.is_empty() {
                    nodes.push(line[k - 1]);
                }
                nodes.push(v);
                weights.push(w);
                continue;
            }
            flush(class, nodes, weights);
        }
    }
    flush(class, nodes, weights);
}

/// Decomposes a grid energy into chain classes.
///
/// * 2D 4-connected: rows, then columns (`r = 2`).
/// * 2D 8-connected: rows, columns, then two classes of zig-zag paths
///   (`r = 4`). Rows `t` and `t + 1` form a strip carrying two interleaved
///   paths, `(t,0) (t+1,1) (t,2) ...` and `(t+1,0) (t,1) (t+1,2) ...`, which
///   together use every diagonal edge of the strip exactly once. Strips with
///   even `t` form one class and odd `t` the other.
/// * 3D 6-connected: lines along the last, middle and first axis (`r = 3`).
///
/// Lines are cut wherever an edge is absent, so every chain has length >= 2.
pub fn decompose_grid(g: &GridEnergy) -> Result<ChainDecomposition> {
    let grid = g.grid();
    let cut = g.cut();
    let n = g.n();
    let dims = grid.dims();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut line = Vec::new();

    let mut axis_class = |axis: usize, nodes: &mut Vec<usize>, weights: &mut Vec<f64>| {
        let mut class = ChainClass::empty(n);
        let nd = dims.len();
        let mut c = [0usize; 3];
        // iterate over all coordinates with c[axis] = 0, row-major
        loop {
            line.clear();
            for t in 0..dims[axis] {
                let mut p = c;
                p[axis] = t;
                line.push(grid.index(p));
            }
            push_line(&mut class, cut, &line, nodes, weights);
            let mut a = nd;
            let done = loop {
                if a == 0 {
                    break true;
                }
                a -= 1;
                if a == axis {
                    continue;
                }
                c[a] += 1;
                if c[a] < dims[a] {
                    break false;
                }
                c[a] = 0;
            };
            if done {
                break;
            }
        }
        class
    };

    let classes = match grid.connectivity() {
        Connectivity::Grid2D4 => vec![axis_class(1, &mut nodes, &mut weights), axis_class(0, &mut nodes, &mut weights)],
        Connectivity::Grid3D6 => vec![
            axis_class(2, &mut nodes, &mut weights),
            axis_class(1, &mut nodes, &mut weights),
            axis_class(0, &mut nodes, &mut weights),
        ],
        Connectivity::Grid2D8 => {
            let rows = axis_class(1, &mut nodes, &mut weights);
            let cols = axis_class(0, &mut nodes, &mut weights);
            let (h, w) = (dims[0], dims[1]);
            let mut zig = [ChainClass::empty(n), ChainClass::empty(n)];
            let mut line = Vec::with_capacity(w);
            for t in 0..h.saturating_sub(1) {
                for start in 0..2 {
                    line.clear();
                    line.extend((0..w).map(|col| {
                        let row = t + ((col + start) & 1);
                        grid.index([row, col, 0])
                    }));
                    push_line(&mut zig[t & 1], cut, &line, &mut nodes, &mut weights);
                }
            }
            let [even, odd] = zig;
            vec![rows, cols, even, odd]
        }
    };
    Ok(ChainDecomposition::from_classes(n, classes))
}

/// Outcome of [`validate`]; empty diagnostics means the decomposition is sound.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub diagnostics: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Number of random points used by the additivity check.
pub const ADDITIVITY_SAMPLES: usize = 100;

/// Checks that `dec` partitions the edges of `cut` into vertex-disjoint chains
/// with matching weights, and that `sum_j f_j(x) = f(x)` on random `x`.
pub fn validate(dec: &ChainDecomposition, cut: &CutEnergy) -> ValidationReport {
    let mut diag = Vec::new();
    if dec.n() != cut.n() {
        diag.push(format!("decomposition has {} nodes, energy has {}", dec.n(), cut.n()));
        return ValidationReport { diagnostics: diag };
    }
    let edges = cut.edges();
    let mut hits = vec![0u32; edges.len()];
    for (j, class) in dec.classes().iter().enumerate() {
        let mut seen = vec![false; dec.n()];
        for (k, chain) in class.chains().enumerate() {
            for &v in chain.nodes {
                let v = v as usize;
                if seen[v] {
                    diag.push(format!("class {j}: node {v} is shared by two chains"));
                }
                seen[v] = true;
            }
            for (e, &w) in chain.weights.iter().enumerate() {
                let (a, b) = (chain.nodes[e] as usize, chain.nodes[e + 1] as usize);
                let key = if a < b { (a, b) } else { (b, a) };
                match edges.binary_search_by(|x| (x.i, x.j).cmp(&key)) {
                    Ok(idx) => {
                        hits[idx] += 1;
                        if edges[idx].weight.to_bits() != w.to_bits() {
                            diag.push(format!(
                                "class {j} chain {k}: edge {key:?} has weight {w}, graph has {}",
                                edges[idx].weight
                            ));
                        }
                    }
                    Err(_) if w == 0.0 => {}
                    Err(_) => diag.push(format!("class {j} chain {k}: edge {key:?} is not in the graph")),
                }
            }
        }
    }
    for (e, &h) in edges.iter().zip(&hits) {
        if h != 1 {
            diag.push(format!("edge ({}, {}) is covered {h} times", e.i, e.j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7c0_ffee);
    let mut x = vec![0.0; dec.n()];
    for sample in 0..ADDITIVITY_SAMPLES {
        for v in &mut x {
            *v = rng.gen_range(-1.0..1.0);
        }
        let total = cut.tv_value(&x).expect("length checked");
        let parts = dec.tv_value(&x);
        if (total - parts).abs() > 1e-10 * total.abs().max(1.0) {
            diag.push(format!("sample {sample}: sum of parts {parts} differs from f(x) = {total}"));
            break;
        }
    }
    ValidationReport { diagnostics: diag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Grid};

    fn uniform(dims: &[usize], conn: Connectivity) -> GridEnergy {
        let grid = Grid::new(dims, conn).unwrap();
        let ws: Vec<Vec<f64>> = (0..grid.num_directions()).map(|d| vec![1.0; grid.direction_len(d)]).collect();
        GridEnergy::from_directional(grid.clone(), vec![0.0; grid.n()], &ws).unwrap()
    }

    #[test]
    fn four_connected_3x3() {
        let g = uniform(&[3, 3], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(dec.r(), 2);
        for class in dec.classes() {
            assert_eq!(class.num_chains(), 3);
            assert_eq!(class.num_edges(), 6);
        }
        assert_eq!(dec.class(0).chain(0).nodes, &[0, 1, 2]);
        assert_eq!(dec.class(1).chain(0).nodes, &[0, 3, 6]);
        assert!(validate(&dec, g.cut()).is_valid());
    }

    #[test]
    fn single_row_grid() {
        let g = uniform(&[1, 6], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(dec.active_classes(), 1);
        assert_eq!(dec.class(0).num_chains(), 1);
        assert_eq!(dec.class(0).chain(0).nodes.len(), 6);
        assert!(dec.class(1).is_empty());
    }

    #[test]
    fn cube_counts() {
        let g = uniform(&[4, 4, 4], Connectivity::Grid3D6);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(dec.r(), 3);
        for class in dec.classes() {
            assert_eq!(class.num_chains(), 16);
            assert!(class.chains().all(|c| c.nodes.len() == 4));
            assert_eq!(class.num_edges(), 3 * 4 * 4);
        }
        // first class runs along memory order
        assert_eq!(dec.class(0).chain(0).nodes, &[0, 1, 2, 3]);
        assert!(validate(&dec, g.cut()).is_valid());
    }

    #[test]
    fn eight_connected_zigzags() {
        let g = uniform(&[3, 4], Connectivity::Grid2D8);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(dec.r(), 4);
        assert_eq!(dec.class(2).num_chains(), 2);
        assert_eq!(dec.class(2).chain(0).nodes, &[0, 5, 2, 7]);
        assert_eq!(dec.class(2).chain(1).nodes, &[4, 1, 6, 3]);
        assert_eq!(dec.class(3).chain(0).nodes, &[4, 9, 6, 11]);
        assert!(validate(&dec, g.cut()).is_valid());
        assert_eq!(dec.degrees()[0], 3);
        assert_eq!(dec.degrees()[5], 4);
    }

    #[test]
    fn missing_edges_split_lines() {
        let grid = Grid::new(&[1, 5], Connectivity::Grid2D4).unwrap();
        let g = GridEnergy::new(grid, vec![0.0; 5], vec![Edge::new(0, 1, 1.0), Edge::new(2, 3, 1.0), Edge::new(3, 4, 2.0)]).unwrap();
        let dec = decompose_grid(&g).unwrap();
        let chains = dec.class(0).to_chains();
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].nodes, vec![0, 1]);
        assert_eq!(chains[1].nodes, vec![2, 3, 4]);
        assert_eq!(chains[1].weights, vec![1.0, 2.0]);
        assert!(validate(&dec, g.cut()).is_valid());
    }

    #[test]
    fn duplicated_edge_is_reported() {
        let g = uniform(&[3, 3], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        let mut chains = dec.to_chains();
        chains.push(vec![Chain::new(vec![0, 1], vec![1.0]).unwrap()]);
        let bad = ChainDecomposition::from_chains(9, chains).unwrap();
        let report = validate(&bad, g.cut());
        assert!(!report.is_valid());
        assert!(report.diagnostics.iter().any(|d| d.contains("covered 2 times")));
    }

    #[test]
    fn overlapping_chains_in_one_class_are_rejected() {
        let chains = vec![vec![
            Chain::new(vec![0, 1], vec![1.0]).unwrap(),
            Chain::new(vec![1, 2], vec![1.0]).unwrap(),
        ]];
        assert!(ChainDecomposition::from_chains(3, chains).is_err());
    }

    #[test]
    fn single_node_grid_has_no_chains() {
        let g = uniform(&[1, 1], Connectivity::Grid2D8);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(dec.active_classes(), 0);
        assert_eq!(dec.degrees(), &[0]);
    }
}
