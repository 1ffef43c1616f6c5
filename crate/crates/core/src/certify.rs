//! Duality-gap certificates for binary labelings.
//!
//! For any `s` in the base polytope `K` of the total variation and any binary
//! `x`, weak duality gives
//! `gap = f(x) - w^T x - sum_i min(s_i - w_i, 0) >= 0`, with equality exactly
//! when `x` is a minimum cut and `s` is dual optimal.

use crate::decompose::ChainDecomposition;
use crate::error::{Error, Result};
use crate::graph::{check_len, CutEnergy, Labeling};
use crate::projections::{aggregate, det_sum, ProductVector};
use crate::tv1d::{chain_dual_feasible_tol, DUAL_FEASIBILITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Aggregate dual vector, claimed to lie in `K`.
    pub s: Vec<f64>,
    pub gap: f64,
    /// `sum_i min(s_i - w_i, 0)`, a lower bound on the minimum energy.
    pub dual_objective: f64,
    pub primal_energy: f64,
}

/// Lower bound `sum_i min(s_i - w_i, 0)` on the minimum energy.
pub fn dual_objective(w: &[f64], s: &[f64]) -> f64 {
    det_sum(w.len(), |i| (s[i] - w[i]).min(0.0))
}

/// Energy of a labeling with a summation order fixed independently of threads.
pub(crate) fn energy_det(cut: &CutEnergy, x: &[bool]) -> f64 {
    let edges = cut.edges();
    let w = cut.unary();
    let tv = det_sum(edges.len(), |k| {
        let e = edges[k];
        if x[e.i] != x[e.j] {
            e.weight
        } else {
            0.0
        }
    });
    let unary = det_sum(w.len(), |i| if x[i] { w[i] } else { 0.0 });
    tv - unary
}

pub fn discrete_gap(cut: &CutEnergy, x: &Labeling, s: &[f64]) -> Result<Certificate> {
    check_len(cut.n(), x.len())?;
    check_len(cut.n(), s.len())?;
    let primal_energy = energy_det(cut, x.as_slice());
    let dual = dual_objective(cut.unary(), s);
    Ok(Certificate { s: s.to_vec(), gap: primal_energy - dual, dual_objective: dual, primal_energy })
}

/// Checks every chain block of `y` against its polytope, with a tolerance
/// scaled by block magnitude and chain length.
pub fn check_dual_feasible(dec: &ChainDecomposition, y: &ProductVector) -> Result<()> {
    for (j, class) in dec.classes().iter().enumerate() {
        for c in class.chains() {
            let block = &y.block(j)[c.first_slot..c.first_slot + c.nodes.len()];
            let scale = block.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if !chain_dual_feasible_tol(block, c.weights, DUAL_FEASIBILITY_TOL * scale * c.nodes.len() as f64) {
                return Err(Error::InvalidDecomposition(format!(
                    "dual block of class {j} at slot {} is outside its polytope",
                    c.first_slot
                )));
            }
        }
    }
    Ok(())
}

/// Certificate from per-class duals. Debug builds first check that every
/// chain block lies in its polytope; release builds rely on construction.
pub fn certify_product(cut: &CutEnergy, dec: &ChainDecomposition, y: &ProductVector, x: &Labeling) -> Result<Certificate> {
    if cfg!(debug_assertions) {
        check_dual_feasible(dec, y)?;
    }
    let s = aggregate(dec, y)?;
    discrete_gap(cut, x, &s)
}

/// Minimum-gap labeling over all level sets `{x >= v}` of `x` (plus the empty
/// set). The dual term does not depend on the labeling, so this is also the
/// minimum-energy level set. Runs in `O(n log n + |E|)`.
pub fn best_level_set_gap(cut: &CutEnergy, x: &[f64], s: &[f64]) -> Result<(Labeling, Certificate)> {
    let n = cut.n();
    check_len(n, x.len())?;
    check_len(n, s.len())?;
    let w = cut.unary();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let (offsets, nbrs, wts) = cut.adjacency();
    let mut inside = vec![false; n];
    let mut energy = 0.0;
    let mut best = (0.0, 0usize); // (energy, prefix length)
    let mut k = 0;
    while k < n {
        let level = x[order[k]];
        while k < n && x[order[k]] == level {
            let v = order[k];
            for e in offsets[v]..offsets[v + 1] {
                energy += if inside[nbrs[e]] { -wts[e] } else { wts[e] };
            }
            energy -= w[v];
            inside[v] = true;
            k += 1;
        }
        if energy < best.0 {
            best = (energy, k);
        }
    }
    let mut labels = vec![false; n];
    for &v in &order[..best.1] {
        labels[v] = true;
    }
    let labeling = Labeling(labels);
    // recompute exactly to avoid carrying incremental rounding
    let cert = discrete_gap(cut, &labeling, s)?;
    Ok((labeling, cert))
}

/// `1 - |A ∩ B| / |A ∪ B|` over the 1-labeled nodes; zero when both are empty.
pub fn jaccard_distance(a: &Labeling, b: &Labeling) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.as_slice().iter().zip(b.as_slice()) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 0.0 } else { 1.0 - inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    #[test]
    fn unary_only_gap_is_zero() {
        let cut = CutEnergy::new(vec![1.0, -2.0, 0.5, 0.0], vec![]).unwrap();
        let x = Labeling(cut.unary().iter().map(|&w| w > 0.0).collect());
        let c = discrete_gap(&cut, &x, &[0.0; 4]).unwrap();
        assert_eq!(c.gap, 0.0);
        assert_eq!(c.primal_energy, -1.5);
    }

    #[test]
    fn gap_nonnegative_for_feasible_pairs() {
        // single edge: K = {(t, -t) : |t| <= a}
        let cut = CutEnergy::new(vec![1.0, -0.5], vec![Edge::new(0, 1, 0.75)]).unwrap();
        for t in [-0.75, -0.3, 0.0, 0.5, 0.75] {
            for bits in 0..4u8 {
                let x = Labeling(vec![bits & 1 == 1, bits & 2 == 2]);
                assert!(discrete_gap(&cut, &x, &[t, -t]).unwrap().gap >= -1e-12);
            }
        }
    }

    #[test]
    fn best_level_set_unary_only() {
        let cut = CutEnergy::new(vec![1.0, -2.0, 0.5], vec![]).unwrap();
        let (x, c) = best_level_set_gap(&cut, cut.unary(), &[0.0; 3]).unwrap();
        assert_eq!(x, Labeling(vec![true, false, true]));
        assert_eq!(c.gap, 0.0);
    }

    #[test]
    fn jaccard_examples() {
        let a = Labeling(vec![true, true, false]);
        let b = Labeling(vec![true, false, true]);
        assert_eq!(jaccard_distance(&a, &a).unwrap(), 0.0);
        assert!((jaccard_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let c = Labeling(vec![false, false, true]);
        let d = Labeling(vec![true, false, false]);
        assert_eq!(jaccard_distance(&c, &d).unwrap(), 1.0);
        assert_eq!(jaccard_distance(&Labeling::zeros(3), &Labeling::zeros(3)).unwrap(), 0.0);
        assert!(jaccard_distance(&a, &Labeling::zeros(2)).is_err());
    }
}
