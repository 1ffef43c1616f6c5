//! Weighted 1D total-variation proximal operator on a chain.
//!
//! Solves `min_x 1/2 sum (x_i - s_i)^2 + sum w_k |x_{k+1} - x_k|` exactly with
//! the taut-string method: with `r_k` the running sum of the signal, the
//! running sum of the solution is the shortest path from `(0, 0)` to
//! `(m, r_m)` that stays inside the tube `[r_k - w_k, r_k + w_k]`. The path
//! is found with a funnel sweep over the tube, amortized linear time.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Absolute tolerance used by [`chain_dual_feasible`].
pub const DUAL_FEASIBILITY_TOL: f64 = 1e-9;

/// One connected path of a chain class.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub nodes: Vec<usize>,
    /// `weights[k]` joins `nodes[k]` and `nodes[k + 1]`.
    pub weights: Vec<f64>,
}

impl Chain {
    pub fn new(nodes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyChain);
        }
        if weights.len() + 1 != nodes.len() {
            return Err(Error::LengthMismatch { expected: nodes.len() - 1, got: weights.len() });
        }
        check_weights(&weights)?;
        Ok(Chain { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Chain total variation of `x` indexed by global node ids.
    pub fn tv_value(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (x[self.nodes[k + 1]] - x[self.nodes[k]]).abs())
            .sum()
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        Some(index) => Err(Error::InvalidChainWeight { index, weight: weights[index] }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    k: usize,
    v: f64,
}

#[inline]
fn slope(a: Point, b: Point) -> f64 {
    (b.v - a.v) / (b.k - a.k) as f64
}

/// Reusable scratch space for the taut-string sweep.
///
/// Holding one per worker keeps the inner loop allocation-free after warm-up.
#[derive(Debug, Default)]
pub struct TautString {
    upper: VecDeque<Point>,
    lower: VecDeque<Point>,
}

impl TautString {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the prox of `signal` into `out`; inputs are assumed valid.
    pub(crate) fn solve_unchecked(&mut self, signal: &[f64], weights: &[f64], out: &mut [f64]) {
        let m = signal.len();
        debug_assert_eq!(out.len(), m);
        debug_assert_eq!(weights.len() + 1, m);
        if m == 1 {
            out[0] = signal[0];
            return;
        }
        self.upper.clear();
        self.lower.clear();
        let origin = Point { k: 0, v: 0.0 };
        self.upper.push_back(origin);
        self.lower.push_back(origin);
        let mut cum = 0.0;
        for k in 1..=m {
            cum += signal[k - 1];
            let (hi, lo) = if k < m {
                (cum + weights[k - 1], cum - weights[k - 1])
            } else {
                (cum, cum)
            };
            self.push_upper(Point { k, v: hi }, out);
            self.push_lower(Point { k, v: lo }, out);
        }
        debug_assert_eq!(self.upper.front().map(|p| p.k), Some(m));
    }

    /// Adds a ceiling vertex. If it falls at or below the floor chain seen from
    /// the apex, the path is fixed along the floor chain up to the new apex.
    fn push_upper(&mut self, u: Point, out: &mut [f64]) {
        let lower = &mut self.lower;
        if lower.len() >= 2 && slope(lower[0], u) <= slope(lower[0], lower[1]) {
            while lower.len() >= 2 && slope(lower[0], u) <= slope(lower[0], lower[1]) {
                emit(lower[0], lower[1], out);
                lower.pop_front();
            }
            self.upper.clear();
            self.upper.push_back(lower[0]);
            self.upper.push_back(u);
        } else {
            let upper = &mut self.upper;
            // ceiling chain stays convex
            while upper.len() >= 2 {
                let q = upper[upper.len() - 2];
                let p = upper[upper.len() - 1];
                if slope(q, p) >= slope(q, u) {
                    upper.pop_back();
                } else {
                    break;
                }
            }
            upper.push_back(u);
        }
    }

    fn push_lower(&mut self, l: Point, out: &mut [f64]) {
        let upper = &mut self.upper;
        if upper.len() >= 2 && slope(upper[0], l) >= slope(upper[0], upper[1]) {
            while upper.len() >= 2 && slope(upper[0], l) >= slope(upper[0], upper[1]) {
                emit(upper[0], upper[1], out);
                upper.pop_front();
            }
            self.lower.clear();
            self.lower.push_back(upper[0]);
            // a pinched tube (zero weight) can move the apex onto `l` itself
            if upper[0].k != l.k {
                self.lower.push_back(l);
            }
        } else {
            let lower = &mut self.lower;
            // floor chain stays concave
            while lower.len() >= 2 {
                let q = lower[lower.len() - 2];
                let p = lower[lower.len() - 1];
                if slope(q, p) <= slope(q, l) {
                    lower.pop_back();
                } else {
                    break;
                }
            }
            lower.push_back(l);
        }
    }

    pub fn solve(&mut self, signal: &[f64], weights: &[f64], out: &mut [f64]) -> Result<()> {
        if signal.is_empty() {
            return Err(Error::EmptyChain);
        }
        if weights.len() + 1 != signal.len() {
            return Err(Error::LengthMismatch { expected: signal.len() - 1, got: weights.len() });
        }
        if out.len() != signal.len() {
            return Err(Error::LengthMismatch { expected: signal.len(), got: out.len() });
        }
        check_weights(weights)?;
        self.solve_unchecked(signal, weights, out);
        Ok(())
    }
}

#[inline]
fn emit(a: Point, b: Point, out: &mut [f64]) {
    let value = slope(a, b);
    for o in &mut out[a.k..b.k] {
        *o = value;
    }
}

/// Exact minimizer of `1/2 ||x - signal||^2 + sum weights_k |x_{k+1} - x_k|`.
pub fn tv1d_prox(signal: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; signal.len()];
    TautString::new().solve(signal, weights, &mut out)?;
    Ok(out)
}

/// Membership of `y` in the chain's base polytope: every running sum
/// `s_k = y_1 + ... + y_k` obeys `|s_k| <= weights_k` and the total is zero.
pub fn chain_dual_feasible(y: &[f64], weights: &[f64]) -> bool {
    chain_dual_feasible_tol(y, weights, DUAL_FEASIBILITY_TOL)
}

pub fn chain_dual_feasible_tol(y: &[f64], weights: &[f64], tol: f64) -> bool {
    if y.is_empty() || weights.len() + 1 != y.len() {
        return false;
    }
    let mut s = 0.0;
    for (k, v) in y.iter().enumerate() {
        s += v;
        let bound = if k + 1 < y.len() { weights[k] } else { 0.0 };
        if s.abs() > bound + tol {
            return false;
        }
    }
    true
}
