//! Seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Connectivity, Grid, GridEnergy};

/// Ranges for random instances; pairwise weights `U[lo, hi)`, unaries likewise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceRanges {
    pub weight: (f64, f64),
    pub unary: (f64, f64),
}

impl Default for InstanceRanges {
    fn default() -> Self {
        InstanceRanges { weight: (0.0, 2.0), unary: (-2.0, 2.0) }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unaries first in node order, then edge weights direction by direction.
pub fn random_grid_with<R: Rng>(rng: &mut R, dims: &[usize], conn: Connectivity, ranges: InstanceRanges) -> Result<GridEnergy> {
    let grid = Grid::new(dims, conn)?;
    let (ulo, uhi) = ranges.unary;
    let (wlo, whi) = ranges.weight;
    let unary: Vec<f64> = (0..grid.n()).map(|_| rng.gen_range(ulo..uhi)).collect();
    let weights: Vec<Vec<f64>> = (0..grid.num_directions())
        .map(|d| (0..grid.direction_len(d)).map(|_| rng.gen_range(wlo..whi)).collect())
        .collect();
    GridEnergy::from_directional(grid, unary, &weights)
}

pub fn random_grid(dims: &[usize], conn: Connectivity, seed: u64) -> Result<GridEnergy> {
    random_grid_with(&mut rng_from_seed(seed), dims, conn, InstanceRanges::default())
}

/// Multiplies each unary by `1 + U[-fraction, fraction)`.
pub fn perturb_unary<R: Rng>(rng: &mut R, g: &GridEnergy, fraction: f64) -> Result<GridEnergy> {
    let unary = g.unary().iter().map(|&w| w * (1.0 + rng.gen_range(-fraction..fraction))).collect();
    g.with_unary(unary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_instances_repeat() {
        let a = random_grid(&[5, 6], Connectivity::Grid2D8, 9).unwrap();
        let b = random_grid(&[5, 6], Connectivity::Grid2D8, 9).unwrap();
        let c = random_grid(&[5, 6], Connectivity::Grid2D8, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.unary().iter().all(|w| (-2.0..2.0).contains(w)));
        assert!(a.edges().iter().all(|e| (0.0..2.0).contains(&e.weight)));
    }

    #[test]
    fn perturbation_stays_close() {
        let g = random_grid(&[4, 4], Connectivity::Grid2D4, 1).unwrap();
        let p = perturb_unary(&mut rng_from_seed(2), &g, 0.05).unwrap();
        for (a, b) in g.unary().iter().zip(p.unary()) {
            assert!((a - b).abs() <= 0.05 * a.abs() + 1e-15);
        }
        assert_eq!(g.edges(), p.edges());
    }
}
