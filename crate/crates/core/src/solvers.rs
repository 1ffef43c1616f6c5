//! Iterative dual solvers over a chain decomposition.
//!
//! All four schemes work on per-class dual blocks `y_j` in `K_j` and read the
//! primal candidate off the aggregate: `x = w - sum_j y_j`, labeling `x > 0`.
//! Stopping is on the discrete duality gap of that labeling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::certify::{check_dual_feasible, discrete_gap, jaccard_distance, Certificate};
use crate::decompose::{decompose_grid, ChainDecomposition};
use crate::error::{Error, Result};
use crate::graph::{check_len, CutEnergy, GridEnergy, Labeling};
use crate::projections::{
    aggregate_into, det_sum, project_class_into, project_k_into, project_l_into, representable_unary, DualState,
    ProductVector,
};

/// Absolute slack added to `gap_tol` when testing the discrete gap.
pub const GAP_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Bcd,
    Ap,
    Aar,
    Fista,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Bcd, Algorithm::Ap, Algorithm::Aar, Algorithm::Fista];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bcd => "bcd",
            Algorithm::Ap => "ap",
            Algorithm::Aar => "aar",
            Algorithm::Fista => "fista",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    /// Stop once the discrete gap is at most `gap_tol + GAP_SLACK`.
    pub gap_tol: f64,
    /// Stop once the shadow iterate moves less than this; 0 disables.
    pub dual_tol: f64,
    pub threads: usize,
    /// Gap evaluation period. The first and last iterations are always checked.
    pub check_every: usize,
    pub warm_start: Option<DualState>,
    /// Evaluate and record every iteration instead of every `check_every`.
    pub trace_all: bool,
    /// Labeling to report Jaccard distances against in the trace.
    pub reference: Option<Labeling>,
    /// Fill `jaccard_to_final` in the trace (keeps every traced labeling).
    pub jaccard_to_final: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Aar,
            max_iters: 10_000,
            gap_tol: 0.0,
            dual_tol: 0.0,
            threads: 1,
            check_every: 10,
            warm_start: None,
            trace_all: false,
            reference: None,
            jaccard_to_final: false,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig { algorithm, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.check_every == 0 {
            return Err(Error::Config("check_every must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if !(self.gap_tol >= 0.0) || !(self.dual_tol >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub gap: f64,
    pub energy: f64,
    /// Certificate lower bound `sum_i min(s_i - w_i, 0)`.
    pub dual_objective: f64,
    /// `1/2 ||w||^2 - 1/2 ||s - w||^2`.
    pub smooth_dual: f64,
    pub jaccard_to_reference: Option<f64>,
    pub jaccard_to_final: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub labeling: Labeling,
    pub tv_solution: Vec<f64>,
    pub energy: f64,
    pub gap: f64,
    pub dual_objective: f64,
    pub certified: bool,
    pub iterations: usize,
    /// Iteration the returned labeling comes from.
    pub best_iteration: usize,
    pub dual_state: DualState,
    pub trace: Vec<TraceEntry>,
}

/// `x_i > 0`, with ties at zero labeled 0.
pub fn threshold(x: &[f64]) -> Labeling {
    Labeling(x.iter().map(|&v| v > 0.0).collect())
}

/// Nested labelings `{x >= v}` for each distinct value `v` in ascending order,
/// followed by the empty set; each is a superset of the next.
pub fn level_sets(x: &[f64]) -> Vec<Labeling> {
    let mut values: Vec<f64> = x.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out: Vec<Labeling> = values
        .iter()
        .map(|&v| Labeling(x.iter().map(|&xi| xi >= v).collect()))
        .collect();
    out.push(Labeling::zeros(x.len()));
    out
}

/// Per-iteration diagnostics from [`Stepper::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Smooth dual after each block update (BCD with monitoring on).
    pub block_duals: Vec<f64>,
    /// `||y^{k+1} - lambda^k||` for AP.
    pub set_distance: Option<f64>,
    /// `||z^{k+1} - z^k||` for AAR.
    pub step_norm: Option<f64>,
}

enum Scheme {
    Bcd { y: ProductVector, target: ProductVector },
    Ap { y: ProductVector, lambda: ProductVector },
    Aar { z: ProductVector, y: ProductVector, refl: ProductVector, lambda: ProductVector },
    Fista { y: ProductVector, y_old: ProductVector, u: ProductVector, v: ProductVector, t: f64 },
}

/// Single-iteration driver for one scheme.
///
/// Work runs on the current rayon pool; [`solve`] wraps it in a pool sized by
/// `threads`.
pub struct Stepper<'a> {
    dec: &'a ChainDecomposition,
    w: Vec<f64>,
    scheme: Scheme,
    correction: Vec<f64>,
    scratch: Vec<f64>,
    monitor: bool,
    iterations: usize,
}

fn warm_vector(dec: &ChainDecomposition, dense: &[Vec<f64>]) -> Result<ProductVector> {
    if dense.len() != dec.r() || dense.iter().any(|b| b.len() != dec.n()) {
        return Err(Error::Config(format!(
            "warm start shape does not match decomposition ({} classes, {} nodes)",
            dec.r(),
            dec.n()
        )));
    }
    ProductVector::from_dense(dec, dense)
}

fn project_k(dec: &ChainDecomposition, v: &ProductVector) -> ProductVector {
    let mut out = ProductVector::zeros(dec);
    project_k_into(dec, v, &mut out);
    out
}

/// `z <- z + a - b`, elementwise.
fn add_difference(z: &mut ProductVector, a: &ProductVector, b: &ProductVector) {
    for j in 0..z.r() {
        let (a, b) = (a.block(j), b.block(j));
        z.block_mut(j)
            .par_iter_mut()
            .zip(a.par_iter())
            .zip(b.par_iter())
            .for_each(|((z, a), b)| *z += a - b);
    }
}

impl<'a> Stepper<'a> {
    pub fn new(cut: &CutEnergy, dec: &'a ChainDecomposition, algorithm: Algorithm, warm: Option<&DualState>) -> Result<Self> {
        check_len(dec.n(), cut.n())?;
        let w = representable_unary(cut.unary(), dec);
        let n = dec.n();
        let mut correction = vec![0.0; n];
        let zeros = || ProductVector::zeros(dec);
        // a start point in K, from y if given, else from z
        let warm_y = |warm: &DualState| -> Result<Option<ProductVector>> {
            if let Some(y) = &warm.y {
                Ok(Some(project_k(dec, &warm_vector(dec, y)?)))
            } else if let Some(z) = &warm.z {
                Ok(Some(project_k(dec, &warm_vector(dec, z)?)))
            } else {
                Ok(None)
            }
        };
        let start_y = match warm {
            Some(state) => match warm_y(state)? {
                Some(y) => Some(y),
                None => return Err(Error::Config("warm start holds no dual vectors".into())),
            },
            None => None,
        };
        let scheme = match algorithm {
            Algorithm::Bcd => Scheme::Bcd { y: start_y.unwrap_or_else(zeros), target: zeros() },
            Algorithm::Ap => Scheme::Ap { y: start_y.unwrap_or_else(zeros), lambda: zeros() },
            Algorithm::Aar => {
                // restart from the shadow; a stored z is used only without y
                let z = match warm {
                    Some(DualState { y: None, z: Some(z), .. }) => warm_vector(dec, z)?,
                    Some(_) => start_y.expect("checked above"),
                    None => {
                        let mut z = zeros();
                        project_l_into(&w, dec, &zeros(), &mut correction, &mut z);
                        z
                    }
                };
                let y = project_k(dec, &z);
                Scheme::Aar { z, y, refl: zeros(), lambda: zeros() }
            }
            Algorithm::Fista => {
                let y = start_y.unwrap_or_else(zeros);
                Scheme::Fista { y_old: y.clone(), u: y.clone(), y, v: zeros(), t: 1.0 }
            }
        };
        Ok(Stepper { dec, w, scheme, correction, scratch: vec![0.0; n], monitor: false, iterations: 0 })
    }

    /// Record the smooth dual after every BCD block update.
    pub fn set_monitor(&mut self, on: bool) {
        self.monitor = on;
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Current point of `K` the primal candidate is read from.
    pub fn shadow(&self) -> &ProductVector {
        match &self.scheme {
            Scheme::Bcd { y, .. } | Scheme::Ap { y, .. } | Scheme::Aar { y, .. } | Scheme::Fista { y, .. } => y,
        }
    }

    /// The AAR iterate `z`, if this is an AAR stepper.
    pub fn reflection_iterate(&self) -> Option<&ProductVector> {
        match &self.scheme {
            Scheme::Aar { z, .. } => Some(z),
            _ => None,
        }
    }

    pub fn aggregate(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dec.n()];
        aggregate_into(self.dec, self.shadow(), &mut s);
        s
    }

    /// `1/2 ||w||^2 - 1/2 ||s - w||^2` at the shadow point.
    pub fn smooth_dual(&self) -> f64 {
        smooth_dual_of(&self.w, &self.aggregate())
    }

    pub fn dual_state(&self) -> DualState {
        let dec = self.dec;
        match &self.scheme {
            Scheme::Bcd { y, .. } | Scheme::Fista { y, .. } => {
                DualState { y: Some(y.to_dense(dec)), lambda: None, z: None }
            }
            Scheme::Ap { y, lambda } => DualState {
                y: Some(y.to_dense(dec)),
                lambda: (self.iterations > 0).then(|| lambda.to_dense(dec)),
                z: None,
            },
            Scheme::Aar { z, y, lambda, .. } => DualState {
                y: Some(y.to_dense(dec)),
                lambda: (self.iterations > 0).then(|| lambda.to_dense(dec)),
                z: Some(z.to_dense(dec)),
            },
        }
    }

    pub fn step(&mut self) -> StepReport {
        let dec = self.dec;
        let w = &self.w;
        let mut report = StepReport::default();
        match &mut self.scheme {
            Scheme::Bcd { y, target } => {
                let classes = dec.classes();
                for (j, class) in classes.iter().enumerate() {
                    if class.is_empty() {
                        continue;
                    }
                    {
                        let yr = &*y;
                        target
                            .block_mut(j)
                            .par_iter_mut()
                            .zip(class.slot_nodes().par_iter())
                            .for_each(|(t, &node)| {
                                let node = node as usize;
                                let mut others = 0.0;
                                for (k, c) in classes.iter().enumerate() {
                                    if k != j {
                                        if let Some(s) = c.slot_of(node) {
                                            others += yr.block(k)[s];
                                        }
                                    }
                                }
                                *t = w[node] - others;
                            });
                    }
                    project_class_into(class, target.block(j), y.block_mut(j));
                    if self.monitor {
                        aggregate_into(dec, y, &mut self.scratch);
                        report.block_duals.push(smooth_dual_of(w, &self.scratch));
                    }
                }
            }
            Scheme::Ap { y, lambda } => {
                project_l_into(w, dec, y, &mut self.correction, lambda);
                project_k_into(dec, lambda, y);
                report.set_distance = Some(y.dist(lambda));
            }
            Scheme::Aar { z, y, refl, lambda } => {
                refl.assign_combination(2.0, y, -1.0, z);
                project_l_into(w, dec, refl, &mut self.correction, lambda);
                report.step_norm = Some(lambda.dist(y));
                add_difference(z, lambda, y);
                project_k_into(dec, z, y);
            }
            Scheme::Fista { y, y_old, u, v, t } => {
                let step = 1.0 / lipschitz_constant(dec);
                gradient_step(dec, w, u, step, &mut self.scratch, v);
                std::mem::swap(y, y_old);
                project_k_into(dec, v, y);
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * *t * *t).sqrt());
                let beta = (*t - 1.0) / t_next;
                u.assign_combination(1.0 + beta, y, -beta, y_old);
                *t = t_next;
            }
        }
        self.iterations += 1;
        report
    }
}

fn smooth_dual_of(w: &[f64], s: &[f64]) -> f64 {
    det_sum(w.len(), |i| 0.5 * w[i] * w[i] - 0.5 * (s[i] - w[i]) * (s[i] - w[i]))
}

/// Gradient step size denominator: the number of non-empty classes.
fn lipschitz_constant(dec: &ChainDecomposition) -> f64 {
    dec.active_classes().max(1) as f64
}

/// `out <- u - step * grad`, gradient of `1/2 ||sum_j u_j - w||^2`.
fn gradient_step(dec: &ChainDecomposition, w: &[f64], u: &ProductVector, step: f64, s: &mut [f64], out: &mut ProductVector) {
    aggregate_into(dec, u, s);
    let s = &*s;
    for (j, class) in dec.classes().iter().enumerate() {
        let ub = u.block(j);
        out.block_mut(j)
            .par_iter_mut()
            .zip(ub.par_iter())
            .zip(class.slot_nodes().par_iter())
            .for_each(|((o, &x), &node)| {
                let node = node as usize;
                *o = x - step * (s[node] - w[node]);
            });
    }
}

/// Gradient of `g(y) = 1/2 ||sum_j y_j - w||^2`: block `j` is `sum_k y_k - w`
/// restricted to the support of class `j`. Lipschitz with constant `r`.
pub fn smooth_dual_gradient(cut: &CutEnergy, dec: &ChainDecomposition, y: &ProductVector) -> Result<ProductVector> {
    check_len(dec.n(), cut.n())?;
    let w = representable_unary(cut.unary(), dec);
    let mut s = vec![0.0; dec.n()];
    aggregate_into(dec, y, &mut s);
    let mut g = ProductVector::zeros(dec);
    for (j, class) in dec.classes().iter().enumerate() {
        for (o, &node) in g.block_mut(j).iter_mut().zip(class.slot_nodes()) {
            *o = s[node as usize] - w[node as usize];
        }
    }
    Ok(g)
}

struct Candidate {
    labeling: Labeling,
    x: Vec<f64>,
    cert: Certificate,
    iter: usize,
}

pub fn solve(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_len(dec.n(), cut.n())?;
    if let Some(r) = &cfg.reference {
        check_len(cut.n(), r.len())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(cut, dec, cfg))
}

fn run(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let n = cut.n();
    let mut stepper = Stepper::new(cut, dec, cfg.algorithm, cfg.warm_start.as_ref())?;
    let mut prev = (cfg.dual_tol > 0.0).then(|| stepper.shadow().clone());
    let mut s = vec![0.0; n];
    let mut trace = Vec::new();
    let mut traced_labels = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut certified = false;

    while stepper.iterations() < cfg.max_iters {
        stepper.step();
        let k = stepper.iterations();
        let mut stalled = false;
        if let Some(p) = prev.as_mut() {
            stalled = stepper.shadow().dist(p) <= cfg.dual_tol;
            p.copy_from(stepper.shadow());
        }
        let check = cfg.trace_all || k == 1 || k % cfg.check_every == 0 || k == cfg.max_iters || stalled;
        if !check {
            continue;
        }
        if cfg!(debug_assertions) {
            check_dual_feasible(dec, stepper.shadow())?;
        }
        aggregate_into(dec, stepper.shadow(), &mut s);
        let w = cut.unary();
        let x: Vec<f64> = x_from(w, &s);
        let labeling = threshold(&x);
        let cert = discrete_gap(cut, &labeling, &s)?;
        trace.push(TraceEntry {
            iter: k,
            gap: cert.gap,
            energy: cert.primal_energy,
            dual_objective: cert.dual_objective,
            smooth_dual: smooth_dual_of(&stepper.w, &s),
            jaccard_to_reference: cfg.reference.as_ref().map(|r| jaccard_distance(&labeling, r)).transpose()?,
            jaccard_to_final: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if cfg.jaccard_to_final {
            traced_labels.push(labeling.clone());
        }
        let done = cert.gap <= cfg.gap_tol + GAP_SLACK;
        if done || best.as_ref().map_or(true, |b| cert.gap < b.cert.gap) {
            best = Some(Candidate { labeling, x, cert, iter: k });
        }
        if done {
            certified = true;
            break;
        }
        if stalled {
            break;
        }
    }

    let best = best.expect("at least one iteration is evaluated");
    if cfg.jaccard_to_final {
        for (entry, l) in trace.iter_mut().zip(&traced_labels) {
            entry.jaccard_to_final = Some(jaccard_distance(l, &best.labeling)?);
        }
    }
    Ok(SolveResult {
        labeling: best.labeling,
        tv_solution: best.x,
        energy: best.cert.primal_energy,
        gap: best.cert.gap,
        dual_objective: best.cert.dual_objective,
        certified,
        iterations: stepper.iterations(),
        best_iteration: best.iter,
        dual_state: stepper.dual_state(),
        trace,
    })
}

fn x_from(w: &[f64], s: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; w.len()];
    x.par_iter_mut().enumerate().for_each(|(i, xi)| *xi = w[i] - s[i]);
    x
}

pub fn solve_bcd(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    solve(cut, dec, &SolverConfig { algorithm: Algorithm::Bcd, ..cfg.clone() })
}

pub fn solve_ap(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    solve(cut, dec, &SolverConfig { algorithm: Algorithm::Ap, ..cfg.clone() })
}

pub fn solve_aar(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    solve(cut, dec, &SolverConfig { algorithm: Algorithm::Aar, ..cfg.clone() })
}

pub fn solve_fista(cut: &CutEnergy, dec: &ChainDecomposition, cfg: &SolverConfig) -> Result<SolveResult> {
    solve(cut, dec, &SolverConfig { algorithm: Algorithm::Fista, ..cfg.clone() })
}

/// Decomposes a grid instance and solves it.
pub fn solve_grid(g: &GridEnergy, cfg: &SolverConfig) -> Result<SolveResult> {
    let dec = decompose_grid(g)?;
    solve(g.cut(), &dec, cfg)
}
