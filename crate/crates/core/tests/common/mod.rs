//! Reference implementations shared by the integration tests. Nothing here
//! calls into the solver path of the library.
#![allow(dead_code)]

use paracut_core::graph::{Connectivity, GridEnergy};
use paracut_core::generate::{random_grid_with, InstanceRanges};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exact minimizer of `1/2 ||x - s||^2 + sum w_k |x_{k+1} - x_k|` by dual
/// coordinate descent followed by an active-set polish. Panics unless the
/// polished point passes a KKT check at `1e-11` relative tolerance.
pub fn tv1d_qp(s: &[f64], w: &[f64]) -> Vec<f64> {
    let m = s.len();
    assert_eq!(w.len() + 1, m);
    if m == 1 {
        return s.to_vec();
    }
    let scale = s.iter().chain(w).fold(1.0f64, |a, b| a.max(b.abs()));
    let mut v = vec![0.0; m - 1];
    let mut sweeps = 0;
    let mut budget = 256;
    loop {
        while sweeps < budget {
            cd_sweep(s, w, &mut v);
            sweeps += 1;
        }
        for eps in [1e-6, 1e-9, 1e-4, 1e-12, 1e-3] {
            if let Some(x) = polish(s, w, &v, eps * scale) {
                if kkt_holds(s, w, &x, 1e-11 * scale * m as f64) {
                    return x;
                }
            }
        }
        assert!(budget < 1 << 22, "QP oracle failed to converge");
        budget *= 2;
    }
}

fn primal(s: &[f64], v: &[f64], i: usize) -> f64 {
    let before = if i > 0 { v[i - 1] } else { 0.0 };
    let after = if i < v.len() { v[i] } else { 0.0 };
    s[i] - before + after
}

/// One cyclic pass of exact coordinate minimization on
/// `min_{|v_k| <= w_k} 1/2 ||s - D^T v||^2`.
fn cd_sweep(s: &[f64], w: &[f64], v: &mut [f64]) {
    for k in 0..v.len() {
        let xk = primal(s, v, k);
        let xk1 = primal(s, v, k + 1);
        v[k] = (v[k] + (xk1 - xk) / 2.0).clamp(-w[k], w[k]);
    }
}

/// Fixes the duals at their bounds, splits into constant segments there and
/// solves each segment exactly.
fn polish(s: &[f64], w: &[f64], v: &[f64], eps: f64) -> Option<Vec<f64>> {
    let m = s.len();
    let mut bound: Vec<Option<f64>> = vec![None; m - 1];
    for k in 0..m - 1 {
        if v[k] >= w[k] - eps {
            bound[k] = Some(w[k]);
        } else if v[k] <= -w[k] + eps {
            bound[k] = Some(-w[k]);
        }
    }
    let mut x = vec![0.0; m];
    let mut a = 0;
    while a < m {
        let mut b = a;
        while b < m - 1 && bound[b].is_none() {
            b += 1;
        }
        let left = if a > 0 { bound[a - 1]? } else { 0.0 };
        let right = if b < m - 1 { bound[b]? } else { 0.0 };
        let total: f64 = s[a..=b].iter().sum();
        let value = (total - left + right) / (b - a + 1) as f64;
        x[a..=b].iter_mut().for_each(|xi| *xi = value);
        a = b + 1;
    }
    Some(x)
}

/// Running sums `t_k = sum_{i<=k} (s_i - x_i)` stay within `w_k`, end at
/// zero, and sit on the wall `-w_k sign(jump)` at every jump.
pub fn kkt_holds(s: &[f64], w: &[f64], x: &[f64], tol: f64) -> bool {
    let m = s.len();
    let mut t = 0.0;
    for k in 0..m {
        t += s[k] - x[k];
        if k + 1 == m {
            return t.abs() <= tol;
        }
        if t.abs() > w[k] + tol {
            return false;
        }
        let jump = x[k + 1] - x[k];
        if jump.abs() > tol && (t + w[k] * jump.signum()).abs() > tol {
            return false;
        }
    }
    true
}

/// Exhaustive minimum of `sum a_ij |x_i - x_j| - w^T x` over raw arrays;
/// ties go to the first labeling in lexicographic order.
pub fn enumerate_min(w: &[f64], edges: &[(usize, usize, f64)]) -> (Vec<bool>, f64) {
    let n = w.len();
    assert!(n <= 20);
    let mut best = (vec![false; n], f64::INFINITY);
    for code in 0u32..(1 << n) {
        let x: Vec<bool> = (0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect();
        let e = raw_energy(w, edges, &x);
        if e < best.1 {
            best = (x, e);
        }
    }
    best
}

pub fn raw_energy(w: &[f64], edges: &[(usize, usize, f64)], x: &[bool]) -> f64 {
    let pair: f64 = edges.iter().filter(|(i, j, _)| x[*i] != x[*j]).map(|e| e.2).sum();
    let unary: f64 = w.iter().zip(x).filter(|(_, &b)| b).map(|(wi, _)| wi).sum();
    pair - unary
}

pub fn raw_edges(g: &GridEnergy) -> Vec<(usize, usize, f64)> {
    g.edges().iter().map(|e| (e.i, e.j, e.weight)).collect()
}

/// Rounds to a multiple of `1e-9` so energies summed in different orders compare equal.
pub fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// A small random grid: 2D up to 4x4 (4- or 8-connected) or 3D up to 2x2x3.
pub fn small_instance(rng: &mut ChaCha8Rng) -> GridEnergy {
    let (dims, conn) = match rng.gen_range(0..3) {
        0 => (vec![rng.gen_range(1..=4), rng.gen_range(1..=4)], Connectivity::Grid2D4),
        1 => (vec![rng.gen_range(1..=4), rng.gen_range(1..=4)], Connectivity::Grid2D8),
        _ => (vec![rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(1..=3)], Connectivity::Grid3D6),
    };
    random_grid_with(rng, &dims, conn, InstanceRanges::default()).unwrap()
}
