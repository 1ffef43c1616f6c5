//! Energy model: unary weights plus nonnegative pairwise cut weights.
//!
//! The energy of a binary labeling `x` is `sum a_ij |x_i - x_j| - sum w_i x_i`.
//! Reductions from general submodular pairwise potentials shift energies by a
//! constant, which only [`reduce_pairwise`] reports.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Neighborhood structure of a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Grid2D4,
    Grid2D8,
    Grid3D6,
}

impl Connectivity {
    pub fn ndim(self) -> usize {
        match self {
            Connectivity::Grid2D4 | Connectivity::Grid2D8 => 2,
            Connectivity::Grid3D6 => 3,
        }
    }

    /// Neighbor offsets in axis order; the first nonzero component is positive.
    pub fn offsets(self) -> &'static [[isize; 3]] {
        match self {
            Connectivity::Grid2D4 => &[[1, 0, 0], [0, 1, 0]],
            Connectivity::Grid2D8 => &[[1, 0, 0], [0, 1, 0], [1, 1, 0], [1, -1, 0]],
            Connectivity::Grid3D6 => &[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Connectivity::Grid2D4 => 4,
            Connectivity::Grid2D8 => 8,
            Connectivity::Grid3D6 => 6,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            4 => Some(Connectivity::Grid2D4),
            8 => Some(Connectivity::Grid2D8),
            6 => Some(Connectivity::Grid3D6),
            _ => None,
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Grid2D4 => "2d4",
            Connectivity::Grid2D8 => "2d8",
            Connectivity::Grid3D6 => "3d6",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2d4" | "4" | "2d-4" => Ok(Connectivity::Grid2D4),
            "2d8" | "8" | "2d-8" => Ok(Connectivity::Grid2D8),
            "3d6" | "6" | "3d-6" => Ok(Connectivity::Grid3D6),
            other => Err(Error::InvalidGrid(format!("unknown connectivity '{other}'"))),
        }
    }
}

/// Grid shape, row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    dims: Vec<usize>,
    connectivity: Connectivity,
}

impl Grid {
    pub fn new(dims: &[usize], connectivity: Connectivity) -> Result<Self> {
        if dims.len() != connectivity.ndim() {
            return Err(Error::InvalidGrid(format!(
                "connectivity {connectivity} needs {} dims, got {}",
                connectivity.ndim(),
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid("dimensions must be positive".into()));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n < u32::MAX as usize)
            .ok_or_else(|| Error::InvalidGrid("grid is too large".into()))?;
        debug_assert!(n >= 1);
        Ok(Grid { dims: dims.to_vec(), connectivity })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self, mut i: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for axis in (0..self.dims.len()).rev() {
            c[axis] = i % self.dims[axis];
            i /= self.dims[axis];
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        self.dims
            .iter()
            .enumerate()
            .fold(0, |acc, (axis, &d)| acc * d + c[axis])
    }

    pub fn num_directions(&self) -> usize {
        self.connectivity.offsets().len()
    }

    /// Start-node box `[lo, hi)` per axis for direction `dir`.
    fn direction_box(&self, dir: usize) -> ([usize; 3], [usize; 3]) {
        let off = self.connectivity.offsets()[dir];
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for (axis, &d) in self.dims.iter().enumerate() {
            lo[axis] = (-off[axis]).max(0) as usize;
            hi[axis] = d.saturating_sub(off[axis].max(0) as usize);
        }
        (lo, hi)
    }

    /// Number of grid edges along direction `dir`.
    pub fn direction_len(&self, dir: usize) -> usize {
        let (lo, hi) = self.direction_box(dir);
        (0..self.dims.len())
            .map(|a| hi[a].saturating_sub(lo[a]))
            .product()
    }

    /// Visits the edges of direction `dir` in row-major order of their lower endpoint.
    pub fn for_each_edge(&self, dir: usize, mut f: impl FnMut(usize, usize)) {
        let off = self.connectivity.offsets()[dir];
        let (lo, hi) = self.direction_box(dir);
        let nd = self.dims.len();
        if (0..nd).any(|a| lo[a] >= hi[a]) {
            return;
        }
        let mut c = lo;
        loop {
            let i = self.index(c);
            let mut t = [0usize; 3];
            for a in 0..nd {
                t[a] = (c[a] as isize + off[a]) as usize;
            }
            f(i, self.index(t));
            let mut axis = nd;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                c[axis] += 1;
                if c[axis] < hi[axis] {
                    break;
                }
                c[axis] = lo[axis];
            }
        }
    }

    /// Direction index of the grid edge `(i, j)`, if the two nodes are adjacent.
    pub fn direction_of(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n();
        if i >= n || j >= n {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let ca = self.coords(a);
        let cb = self.coords(b);
        let delta = [
            cb[0] as isize - ca[0] as isize,
            cb[1] as isize - ca[1] as isize,
            cb[2] as isize - ca[2] as isize,
        ];
        self.connectivity.offsets().iter().position(|o| *o == delta)
    }
}

/// A weighted undirected edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, weight: f64) -> Self {
        Edge { i, j, weight }
    }
}

/// Binary labeling; `true` marks nodes on the selected (source) side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Labeling(pub Vec<bool>);

impl Labeling {
    pub fn zeros(n: usize) -> Self {
        Labeling(vec![false; n])
    }

    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        Labeling(bits.into_iter().map(|b| b != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// General cut-form energy on an arbitrary graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CutEnergy {
    unary: Vec<f64>,
    edges: Vec<Edge>,
}

impl CutEnergy {
    /// Validates and normalizes the edge list: endpoints are ordered, zero
    /// weights are dropped and the list is sorted by `(i, j)`.
    pub fn new(unary: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let n = unary.len();
        if n == 0 {
            return Err(Error::InvalidGrid("energy needs at least one node".into()));
        }
        if let Some(i) = unary.iter().position(|w| !w.is_finite()) {
            return Err(Error::Format(format!("unary weight of node {i} is not finite")));
        }
        let mut out = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = if e.i <= e.j { (e.i, e.j) } else { (e.j, e.i) };
            if i == j {
                return Err(Error::InvalidEdge { i, j, reason: "self-loop".into() });
            }
            if j >= n {
                return Err(Error::InvalidEdge { i, j, reason: format!("endpoint out of bounds (n = {n})") });
            }
            if e.weight.is_nan() || e.weight < 0.0 || e.weight.is_infinite() {
                return Err(Error::NegativeWeight { i, j, weight: e.weight });
            }
            if e.weight == 0.0 {
                continue;
            }
            out.push(Edge { i, j, weight: e.weight });
        }
        out.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        if let Some(w) = out.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::DuplicateEdge { i: w[0].i, j: w[0].j });
        }
        Ok(CutEnergy { unary, edges: out })
    }

    pub fn n(&self) -> usize {
        self.unary.len()
    }

    pub fn unary(&self) -> &[f64] {
        &self.unary
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weight of edge `(i, j)`, or zero when absent.
    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by(|e| (e.i, e.j).cmp(&key))
            .map(|k| self.edges[k].weight)
            .unwrap_or(0.0)
    }

    /// Total variation `f(x) = sum a_ij |x_i - x_j|`.
    pub fn tv_value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.n(), x.len())?;
        Ok(self.edges.iter().map(|e| e.weight * (x[e.i] - x[e.j]).abs()).sum())
    }

    pub fn cut_value(&self, x: &Labeling) -> Result<f64> {
        check_len(self.n(), x.len())?;
        let x = x.as_slice();
        Ok(self.edges.iter().filter(|e| x[e.i] != x[e.j]).map(|e| e.weight).sum())
    }

    /// `f(x) - w^T x` for a binary labeling (constant omitted).
    pub fn energy(&self, x: &Labeling) -> Result<f64> {
        let cut = self.cut_value(x)?;
        let unary: f64 = self
            .unary
            .iter()
            .zip(x.as_slice())
            .filter(|(_, &b)| b)
            .map(|(w, _)| *w)
            .sum();
        Ok(cut - unary)
    }

    pub fn with_unary(&self, unary: Vec<f64>) -> Result<Self> {
        check_len(self.n(), unary.len())?;
        CutEnergy::new(unary, self.edges.clone())
    }

    /// Multiplies all pairwise weights by `factor >= 0`.
    pub fn scale_pairwise(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::Config(format!("invalid pairwise scale {factor}")));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { weight: e.weight * factor, ..*e })
            .collect();
        CutEnergy::new(self.unary.clone(), edges)
    }

    /// Compressed adjacency: `(offsets, neighbors, weights)`.
    pub(crate) fn adjacency(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.n();
        let mut deg = vec![0usize; n + 1];
        for e in &self.edges {
            deg[e.i + 1] += 1;
            deg[e.j + 1] += 1;
        }
        for k in 0..n {
            deg[k + 1] += deg[k];
        }
        let mut fill = deg.clone();
        let mut nbr = vec![0usize; 2 * self.edges.len()];
        let mut wt = vec![0.0; 2 * self.edges.len()];
        for e in &self.edges {
            nbr[fill[e.i]] = e.j;
            wt[fill[e.i]] = e.weight;
            fill[e.i] += 1;
            nbr[fill[e.j]] = e.i;
            wt[fill[e.j]] = e.weight;
            fill[e.j] += 1;
        }
        (deg, nbr, wt)
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Cut energy whose edges all join grid neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnergy {
    grid: Grid,
    cut: CutEnergy,
}

impl GridEnergy {
    pub fn new(grid: Grid, unary: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        check_len(grid.n(), unary.len())?;
        let cut = CutEnergy::new(unary, edges)?;
        Self::from_cut(grid, cut)
    }

    /// Reinterprets a general instance as a grid instance.
    pub fn from_cut(grid: Grid, cut: CutEnergy) -> Result<Self> {
        check_len(grid.n(), cut.n())?;
        if let Some(e) = cut.edges.iter().find(|e| grid.direction_of(e.i, e.j).is_none()) {
            return Err(Error::InvalidEdge {
                i: e.i,
                j: e.j,
                reason: format!("not adjacent under {}", grid.connectivity()),
            });
        }
        Ok(GridEnergy { grid, cut })
    }

    /// Builds from one weight array per direction, each in the order of
    /// [`Grid::for_each_edge`].
    pub fn from_directional(grid: Grid, unary: Vec<f64>, weights: &[Vec<f64>]) -> Result<Self> {
        check_len(grid.n(), unary.len())?;
        if weights.len() != grid.num_directions() {
            return Err(Error::InvalidGrid(format!(
                "expected {} direction arrays, got {}",
                grid.num_directions(),
                weights.len()
            )));
        }
        let mut edges = Vec::new();
        for (dir, ws) in weights.iter().enumerate() {
            check_len(grid.direction_len(dir), ws.len())?;
            let mut k = 0;
            grid.for_each_edge(dir, |i, j| {
                edges.push(Edge::new(i, j, ws[k]));
                k += 1;
            });
        }
        let cut = CutEnergy::new(unary, edges)?;
        Ok(GridEnergy { grid, cut })
    }

    /// Per-direction weight arrays, absent edges reported as zero.
    pub fn directional_weights(&self) -> Vec<Vec<f64>> {
        (0..self.grid.num_directions())
            .map(|dir| {
                let mut ws = Vec::with_capacity(self.grid.direction_len(dir));
                self.grid.for_each_edge(dir, |i, j| ws.push(self.cut.edge_weight(i, j)));
                ws
            })
            .collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cut(&self) -> &CutEnergy {
        &self.cut
    }

    pub fn into_cut(self) -> CutEnergy {
        self.cut
    }

    pub fn n(&self) -> usize {
        self.cut.n()
    }

    pub fn unary(&self) -> &[f64] {
        self.cut.unary()
    }

    pub fn edges(&self) -> &[Edge] {
        self.cut.edges()
    }

    pub fn energy(&self, x: &Labeling) -> Result<f64> {
        self.cut.energy(x)
    }

    pub fn tv_value(&self, x: &[f64]) -> Result<f64> {
        self.cut.tv_value(x)
    }

    pub fn with_unary(&self, unary: Vec<f64>) -> Result<Self> {
        Ok(GridEnergy { grid: self.grid.clone(), cut: self.cut.with_unary(unary)? })
    }

    pub fn scale_pairwise(&self, factor: f64) -> Result<Self> {
        Ok(GridEnergy { grid: self.grid.clone(), cut: self.cut.scale_pairwise(factor)? })
    }
}

/// Pairwise potential table `theta[x_i][x_j]` on the node pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwisePotential {
    pub i: usize,
    pub j: usize,
    pub theta00: f64,
    pub theta01: f64,
    pub theta10: f64,
    pub theta11: f64,
}

impl PairwisePotential {
    pub fn new(i: usize, j: usize, theta: [f64; 4]) -> Self {
        PairwisePotential { i, j, theta00: theta[0], theta01: theta[1], theta10: theta[2], theta11: theta[3] }
    }

    /// `theta01 + theta10 - theta00 - theta11`; nonnegative iff submodular.
    pub fn submodularity_margin(&self) -> f64 {
        self.theta01 + self.theta10 - self.theta00 - self.theta11
    }

    pub fn value(&self, xi: bool, xj: bool) -> f64 {
        match (xi, xj) {
            (false, false) => self.theta00,
            (false, true) => self.theta01,
            (true, false) => self.theta10,
            (true, true) => self.theta11,
        }
    }
}

/// Result of [`reduce_pairwise`]: `E(x) = cut.energy(x) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEnergy {
    pub cut: CutEnergy,
    pub constant: f64,
}

/// Energy `E(x) = -sum w_i x_i + sum psi_ij(x_i, x_j)` evaluated directly.
pub fn pairwise_energy(unary: &[f64], potentials: &[PairwisePotential], x: &Labeling) -> Result<f64> {
    check_len(unary.len(), x.len())?;
    let x = x.as_slice();
    let u: f64 = unary.iter().zip(x).filter(|(_, &b)| b).map(|(w, _)| *w).sum();
    let p: f64 = potentials.iter().map(|p| p.value(x[p.i], x[p.j])).sum();
    Ok(p - u)
}

/// Rewrites submodular pairwise potentials in cut form.
///
/// Each table contributes `a_ij = margin / 2`, where `margin` is its
/// submodularity margin, and a linear remainder folded into the unaries.
pub fn reduce_pairwise(n: usize, unary: &[f64], potentials: &[PairwisePotential]) -> Result<ReducedEnergy> {
    check_len(n, unary.len())?;
    let mut w = unary.to_vec();
    let mut constant = 0.0;
    let mut pair_weights: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for p in potentials {
        if p.i == p.j || p.i >= n || p.j >= n {
            return Err(Error::InvalidEdge { i: p.i, j: p.j, reason: "bad potential endpoints".into() });
        }
        let margin = p.submodularity_margin();
        if margin < 0.0 {
            return Err(Error::NotSubmodular { i: p.i, j: p.j, excess: -margin });
        }
        let half = 0.5 * margin;
        // psi = t00 + (t10 - t00 - half) x_i + (t01 - t00 - half) x_j + half |x_i - x_j|
        constant += p.theta00;
        w[p.i] -= p.theta10 - p.theta00 - half;
        w[p.j] -= p.theta01 - p.theta00 - half;
        let key = if p.i < p.j { (p.i, p.j) } else { (p.j, p.i) };
        *pair_weights.entry(key).or_insert(0.0) += half;
    }
    let edges = pair_weights.into_iter().map(|((i, j), a)| Edge::new(i, j, a)).collect();
    Ok(ReducedEnergy { cut: CutEnergy::new(w, edges)?, constant })
}
