//! Projections and reflections in the product space `K_1 x ... x K_r`.
//!
//! `K_j` is the base polytope of the chain class `f_j`, restricted to that
//! class's support (it is `{0}` elsewhere). `L` is the affine set of
//! `(lambda_1, ..., lambda_r)` with `sum_j lambda_j = w`, each `lambda_j`
//! pinned to zero off its class's support.
//!
//! Distances are unscaled Euclidean distances; scaling the product-space
//! objective by `r` changes neither projections nor fixed points.

use rayon::prelude::*;

use crate::decompose::{ChainClass, ChainDecomposition};
use crate::error::{Error, Result};
use crate::graph::check_len;
use crate::tv1d::TautString;

/// Chunk length for reductions; fixed so sums do not depend on thread count.
const REDUCE_CHUNK: usize = 1 << 14;

/// Sum of `f` over `0..len` in fixed chunks, independent of worker count.
pub(crate) fn det_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = (0..len.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// A point of the product space, one block per class in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    blocks: Vec<Vec<f64>>,
}

impl ProductVector {
    pub fn zeros(dec: &ChainDecomposition) -> Self {
        ProductVector { blocks: dec.classes().iter().map(|c| vec![0.0; c.num_slots()]).collect() }
    }

    /// Gathers dense `r x n` vectors; entries off each class's support are dropped.
    pub fn from_dense(dec: &ChainDecomposition, dense: &[Vec<f64>]) -> Result<Self> {
        check_len(dec.r(), dense.len())?;
        let blocks = dec
            .classes()
            .iter()
            .zip(dense)
            .map(|(class, d)| {
                check_len(dec.n(), d.len())?;
                Ok(class.slot_nodes().iter().map(|&v| d[v as usize]).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductVector { blocks })
    }

    /// Scatters to dense `r x n` vectors with zeros off support.
    pub fn to_dense(&self, dec: &ChainDecomposition) -> Vec<Vec<f64>> {
        dec.classes()
            .iter()
            .zip(&self.blocks)
            .map(|(class, b)| {
                let mut d = vec![0.0; dec.n()];
                for (&v, &x) in class.slot_nodes().iter().zip(b) {
                    d[v as usize] = x;
                }
                d
            })
            .collect()
    }

    pub fn r(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.blocks[j]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.blocks[j]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    fn fits(&self, dec: &ChainDecomposition) -> bool {
        self.blocks.len() == dec.r()
            && self.blocks.iter().zip(dec.classes()).all(|(b, c)| b.len() == c.num_slots())
    }

    pub fn dist_sq(&self, other: &ProductVector) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| det_sum(a.len(), |i| (a[i] - b[i]) * (a[i] - b[i])))
            .sum()
    }

    pub fn dist(&self, other: &ProductVector) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|a| det_sum(a.len(), |i| a[i] * a[i]))
            .sum::<f64>()
            .sqrt()
    }

    /// `self <- alpha * a + beta * b`, elementwise.
    pub(crate) fn assign_combination(&mut self, alpha: f64, a: &ProductVector, beta: f64, b: &ProductVector) {
        for ((o, x), y) in self.blocks.iter_mut().zip(&a.blocks).zip(&b.blocks) {
            o.par_iter_mut()
                .zip(x.par_iter())
                .zip(y.par_iter())
                .for_each(|((o, x), y)| *o = alpha * x + beta * y);
        }
    }

    pub(crate) fn copy_from(&mut self, other: &ProductVector) {
        for (o, x) in self.blocks.iter_mut().zip(&other.blocks) {
            o.copy_from_slice(x);
        }
    }
}

fn check_fit(dec: &ChainDecomposition, v: &ProductVector) -> Result<()> {
    if v.fits(dec) {
        Ok(())
    } else {
        Err(Error::InvalidDecomposition("product vector does not match the decomposition".into()))
    }
}

/// `out <- Pi_K(v)`, computed chain by chain as `v - prox(v)`.
pub(crate) fn project_k_into(dec: &ChainDecomposition, v: &ProductVector, out: &mut ProductVector) {
    let mut tasks: Vec<(&[f64], &[f64], &mut [f64])> = Vec::new();
    for ((class, vin), vout) in dec.classes().iter().zip(&v.blocks).zip(out.blocks.iter_mut()) {
        let mut rest: &mut [f64] = vout.as_mut_slice();
        for chain in class.chains() {
            let len = chain.nodes.len();
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            tasks.push((chain.weights, &vin[chain.first_slot..chain.first_slot + len], head));
        }
    }
    tasks.into_par_iter().for_each_init(TautString::new, |ts, (weights, input, output)| {
        ts.solve_unchecked(input, weights, output);
        for (o, x) in output.iter_mut().zip(input) {
            *o = x - *o;
        }
    });
}

/// `out <- Pi_{K_j}(v)` for a single class, chains in parallel.
pub(crate) fn project_class_into(class: &ChainClass, vin: &[f64], vout: &mut [f64]) {
    let mut tasks: Vec<(&[f64], &[f64], &mut [f64])> = Vec::with_capacity(class.num_chains());
    let mut rest: &mut [f64] = vout;
    for chain in class.chains() {
        let len = chain.nodes.len();
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
        rest = tail;
        tasks.push((chain.weights, &vin[chain.first_slot..chain.first_slot + len], head));
    }
    tasks.into_par_iter().for_each_init(TautString::new, |ts, (weights, input, output)| {
        ts.solve_unchecked(input, weights, output);
        for (o, x) in output.iter_mut().zip(input) {
            *o = x - *o;
        }
    });
}

/// `out <- Pi_L(v)` where `w` is already zero on uncovered nodes.
pub(crate) fn project_l_into(
    w: &[f64],
    dec: &ChainDecomposition,
    v: &ProductVector,
    correction: &mut [f64],
    out: &mut ProductVector,
) {
    let deg = dec.degrees();
    let classes = dec.classes();
    correction.par_iter_mut().enumerate().for_each(|(i, c)| {
        let d = deg[i];
        if d == 0 {
            *c = 0.0;
            return;
        }
        let mut sum = 0.0;
        for (class, b) in classes.iter().zip(&v.blocks) {
            if let Some(s) = class.slot_of(i) {
                sum += b[s];
            }
        }
        *c = (w[i] - sum) / d as f64;
    });
    let correction = &*correction;
    for ((class, vin), vout) in classes.iter().zip(&v.blocks).zip(out.blocks.iter_mut()) {
        vout.par_iter_mut()
            .zip(vin.par_iter())
            .zip(class.slot_nodes().par_iter())
            .for_each(|((o, x), &node)| *o = x + correction[node as usize]);
    }
}

pub(crate) fn aggregate_into(dec: &ChainDecomposition, y: &ProductVector, s: &mut [f64]) {
    let classes = dec.classes();
    s.par_iter_mut().enumerate().for_each(|(i, si)| {
        let mut sum = 0.0;
        for (class, b) in classes.iter().zip(&y.blocks) {
            if let Some(k) = class.slot_of(i) {
                sum += b[k];
            }
        }
        *si = sum;
    });
}

/// `w` with entries on nodes no class covers set to zero. Those coordinates
/// cannot be carried by any `lambda_j`; their dual aggregate is always zero.
pub fn representable_unary(w: &[f64], dec: &ChainDecomposition) -> Vec<f64> {
    w.iter()
        .zip(dec.degrees())
        .map(|(&wi, &d)| if d == 0 { 0.0 } else { wi })
        .collect()
}

/// Orthogonal projection onto `K = K_1 x ... x K_r`.
pub fn project_k(dec: &ChainDecomposition, v: &ProductVector) -> Result<ProductVector> {
    check_fit(dec, v)?;
    let mut out = ProductVector::zeros(dec);
    project_k_into(dec, v, &mut out);
    Ok(out)
}

/// Orthogonal projection onto `L`: each covered coordinate `i` with degree
/// `d_i` is shifted by `(w_i - sum_k v_k,i) / d_i` in every class covering it.
pub fn project_l(w: &[f64], dec: &ChainDecomposition, v: &ProductVector) -> Result<ProductVector> {
    check_len(dec.n(), w.len())?;
    check_fit(dec, v)?;
    if let Some(node) = (0..dec.n()).find(|&i| dec.degrees()[i] == 0 && w[i] != 0.0) {
        return Err(Error::Unrepresentable { node, weight: w[node] });
    }
    let mut out = ProductVector::zeros(dec);
    let mut corr = vec![0.0; dec.n()];
    project_l_into(w, dec, v, &mut corr, &mut out);
    Ok(out)
}

/// `2 Pi_K(v) - v`.
pub fn reflect_k(dec: &ChainDecomposition, v: &ProductVector) -> Result<ProductVector> {
    let mut p = project_k(dec, v)?;
    let pc = p.clone();
    p.assign_combination(2.0, &pc, -1.0, v);
    Ok(p)
}

/// `2 Pi_L(v) - v`.
pub fn reflect_l(w: &[f64], dec: &ChainDecomposition, v: &ProductVector) -> Result<ProductVector> {
    let mut p = project_l(w, dec, v)?;
    let pc = p.clone();
    p.assign_combination(2.0, &pc, -1.0, v);
    Ok(p)
}

/// `s = sum_j y_j` as a dense vector, summed in class order.
pub fn aggregate(dec: &ChainDecomposition, y: &ProductVector) -> Result<Vec<f64>> {
    check_fit(dec, y)?;
    let mut s = vec![0.0; dec.n()];
    aggregate_into(dec, y, &mut s);
    Ok(s)
}

/// Dual variables of an iterative solve, dense `r x n` per populated field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualState {
    /// Per-class polytope points `y_j`.
    pub y: Option<Vec<Vec<f64>>>,
    /// Per-class copies `lambda_j` with `sum_j lambda_j = w`.
    pub lambda: Option<Vec<Vec<f64>>>,
    /// Reflection iterate (unconstrained, may grow without bound).
    pub z: Option<Vec<Vec<f64>>>,
}

impl DualState {
    /// All-zero `y` for a decomposition.
    pub fn zeros(r: usize, n: usize) -> Self {
        DualState { y: Some(vec![vec![0.0; n]; r]), lambda: None, z: None }
    }

    /// `(r, n)` of the first populated field.
    pub fn shape(&self) -> Option<(usize, usize)> {
        [&self.y, &self.lambda, &self.z]
            .into_iter()
            .flatten()
            .next()
            .map(|v| (v.len(), v.first().map_or(0, |b| b.len())))
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_none() && self.lambda.is_none() && self.z.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_grid;
    use crate::graph::{Connectivity, Grid, GridEnergy};
    use crate::tv1d::{chain_dual_feasible, tv1d_prox, Chain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, dims: &[usize], conn: Connectivity) -> GridEnergy {
        let grid = Grid::new(dims, conn).unwrap();
        let ws: Vec<Vec<f64>> = (0..grid.num_directions())
            .map(|d| (0..grid.direction_len(d)).map(|_| rng.gen_range(0.0..2.0)).collect())
            .collect();
        let w = (0..grid.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        GridEnergy::from_directional(grid, w, &ws).unwrap()
    }

    fn random_pv(rng: &mut ChaCha8Rng, dec: &ChainDecomposition, scale: f64) -> ProductVector {
        let mut v = ProductVector::zeros(dec);
        for j in 0..dec.r() {
            for x in v.block_mut(j) {
                *x = rng.gen_range(-scale..scale);
            }
        }
        v
    }

    fn assert_in_k(dec: &ChainDecomposition, y: &ProductVector) {
        for (j, class) in dec.classes().iter().enumerate() {
            for c in class.chains() {
                let seg = &y.block(j)[c.first_slot..c.first_slot + c.nodes.len()];
                assert!(chain_dual_feasible(seg, c.weights));
            }
        }
    }

    #[test]
    fn zero_projects_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(&mut rng, &[4, 5], Connectivity::Grid2D8);
        let dec = decompose_grid(&g).unwrap();
        let z = ProductVector::zeros(&dec);
        assert_eq!(project_k(&dec, &z).unwrap(), z);
    }

    #[test]
    fn projection_k_is_idempotent_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for conn in [Connectivity::Grid2D4, Connectivity::Grid2D8] {
            let g = random_grid(&mut rng, &[5, 6], conn);
            let dec = decompose_grid(&g).unwrap();
            let v = random_pv(&mut rng, &dec, 4.0);
            let p = project_k(&dec, &v).unwrap();
            assert_in_k(&dec, &p);
            let pp = project_k(&dec, &p).unwrap();
            assert!(p.dist(&pp) <= 1e-9);
        }
    }

    #[test]
    fn moreau_identity_on_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, &[4, 7], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        let v = random_pv(&mut rng, &dec, 3.0);
        let p = project_k(&dec, &v).unwrap();
        for (j, class) in dec.classes().iter().enumerate() {
            for c in class.chains() {
                let r = c.first_slot..c.first_slot + c.nodes.len();
                let x = tv1d_prox(&v.block(j)[r.clone()], c.weights).unwrap();
                for ((xi, pi), vi) in x.iter().zip(&p.block(j)[r.clone()]).zip(&v.block(j)[r.clone()]) {
                    assert_eq!(xi + pi, *vi);
                }
            }
        }
    }

    #[test]
    fn projection_k_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weights: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..2.0)).collect();
        let dec = ChainDecomposition::from_chains(10, vec![vec![Chain::new((0..10).collect(), weights.clone()).unwrap()]]).unwrap();
        let v = random_pv(&mut rng, &dec, 4.0);
        let p = project_k(&dec, &v).unwrap();
        let best = v.dist(&p);
        for _ in 0..1000 {
            // y = D^T t with |t_k| <= w_k
            let t: Vec<f64> = weights.iter().map(|w| rng.gen_range(-1.0..=1.0) * w).collect();
            let mut y = ProductVector::zeros(&dec);
            let b = y.block_mut(0);
            for k in 0..10 {
                let hi = if k < 9 { t[k] } else { 0.0 };
                let lo = if k > 0 { t[k - 1] } else { 0.0 };
                b[k] = hi - lo;
            }
            assert!(chain_dual_feasible(y.block(0), &weights));
            assert!(best <= v.dist(&y) + 1e-12);
        }
    }

    #[test]
    fn project_l_by_hand() {
        let dec = ChainDecomposition::from_chains(2, vec![
            vec![Chain::new(vec![0, 1], vec![1.0]).unwrap()],
            vec![Chain::new(vec![1, 0], vec![1.0]).unwrap()],
        ])
        .unwrap();
        let v = ProductVector::from_dense(&dec, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = project_l(&[2.0, 0.0], &dec, &v).unwrap();
        let d = p.to_dense(&dec);
        assert_eq!(d[0][0], 1.5);
        assert_eq!(d[1][0], 0.5);
        assert_eq!(d[0][1] + d[1][1], 0.0);
        assert_eq!(d[0][0] + d[1][0], 2.0);
    }

    #[test]
    fn project_l_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_grid(&mut rng, &[4, 4], Connectivity::Grid2D8);
        let dec = decompose_grid(&g).unwrap();
        let w = representable_unary(g.unary(), &dec);
        let v = random_pv(&mut rng, &dec, 3.0);
        let p = project_l(&w, &dec, &v).unwrap();
        let s = aggregate(&dec, &p).unwrap();
        for (a, b) in s.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-12);
        }
        let pp = project_l(&w, &dec, &p).unwrap();
        assert!(p.dist(&pp) <= 1e-12);
        // feasible points of L: p plus any per-node zero-sum perturbation
        let best = v.dist(&p);
        for _ in 0..1000 {
            let mut q = p.clone();
            let i = rng.gen_range(0..16);
            let holders: Vec<usize> = (0..dec.r()).filter(|&j| dec.class(j).contains(i)).collect();
            if holders.len() < 2 {
                continue;
            }
            let delta = rng.gen_range(-1.0..1.0);
            let (a, b) = (holders[0], holders[1 + rng.gen_range(0..holders.len() - 1)]);
            q.block_mut(a)[dec.class(a).slot_of(i).unwrap()] += delta;
            q.block_mut(b)[dec.class(b).slot_of(i).unwrap()] -= delta;
            assert!(best <= v.dist(&q) + 1e-12);
        }
    }

    #[test]
    fn project_l_rejects_uncovered_unary() {
        let dec = ChainDecomposition::from_chains(3, vec![vec![Chain::new(vec![0, 1], vec![1.0]).unwrap()]]).unwrap();
        let v = ProductVector::zeros(&dec);
        assert!(matches!(project_l(&[0.0, 0.0, 1.0], &dec, &v), Err(Error::Unrepresentable { node: 2, .. })));
        assert!(project_l(&[1.0, 0.0, 0.0], &dec, &v).is_ok());
    }

    #[test]
    fn reflections() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_grid(&mut rng, &[3, 5], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        let w = representable_unary(g.unary(), &dec);
        let v = random_pv(&mut rng, &dec, 3.0);
        let rr = reflect_l(&w, &dec, &reflect_l(&w, &dec, &v).unwrap()).unwrap();
        assert!(rr.dist(&v) <= 1e-12);
        let inside = project_k(&dec, &v).unwrap();
        assert!(reflect_k(&dec, &inside).unwrap().dist(&inside) <= 1e-9);
        for _ in 0..50 {
            let a = random_pv(&mut rng, &dec, 5.0);
            let b = random_pv(&mut rng, &dec, 5.0);
            let ra = reflect_k(&dec, &a).unwrap();
            let rb = reflect_k(&dec, &b).unwrap();
            assert!(ra.dist(&rb) <= a.dist(&b) + 1e-9);
        }
    }

    #[test]
    fn aggregate_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_grid(&mut rng, &[3, 3], Connectivity::Grid2D4);
        let dec = decompose_grid(&g).unwrap();
        assert_eq!(aggregate(&dec, &ProductVector::zeros(&dec)).unwrap(), vec![0.0; 9]);
        let single = ChainDecomposition::from_chains(3, vec![vec![Chain::new(vec![2, 0, 1], vec![1.0, 1.0]).unwrap()]]).unwrap();
        let y = ProductVector::from_dense(&single, &[vec![0.5, -1.0, 0.5]]).unwrap();
        assert_eq!(aggregate(&single, &y).unwrap(), vec![0.5, -1.0, 0.5]);
    }

    #[test]
    fn dense_round_trip_pins_off_support() {
        let dec = ChainDecomposition::from_chains(3, vec![vec![Chain::new(vec![0, 1], vec![1.0]).unwrap()]]).unwrap();
        let v = ProductVector::from_dense(&dec, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(v.to_dense(&dec), vec![vec![1.0, 2.0, 0.0]]);
    }
}
