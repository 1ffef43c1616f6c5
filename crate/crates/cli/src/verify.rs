use std::process::ExitCode;

use clap::Args;
use rand::Rng;
use paracut_core::decompose::{decompose_grid, validate, ChainDecomposition};
use paracut_core::generate::{random_grid, rng_from_seed};
use paracut_core::graph::{Connectivity, GridEnergy};
use paracut_core::oracle::{brute_force_mincut, maxflow_mincut};
use paracut_core::solvers::{solve, Algorithm, SolverConfig};
use paracut_core::tv1d::{chain_dual_feasible, tv1d_prox, Chain};
use paracut_core::Result;

use crate::fail;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Perturb one chain weight of every decomposition before checking.
    #[arg(long)]
    pub corrupt_decomposition: bool,
}

const SHAPES: [(&[usize], Connectivity); 8] = [
    (&[2, 2], Connectivity::Grid2D4),
    (&[3, 3], Connectivity::Grid2D4),
    (&[4, 4], Connectivity::Grid2D4),
    (&[1, 4], Connectivity::Grid2D4),
    (&[3, 4], Connectivity::Grid2D8),
    (&[4, 4], Connectivity::Grid2D8),
    (&[2, 2, 3], Connectivity::Grid3D6),
    (&[2, 2, 2], Connectivity::Grid3D6),
];

pub fn run(args: VerifyArgs) -> ExitCode {
    match execute(&args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => fail(e),
    }
}

fn corrupt(dec: &ChainDecomposition) -> Result<ChainDecomposition> {
    let mut classes = dec.to_chains();
    if let Some(c) = classes.iter_mut().flat_map(|c| c.iter_mut()).next() {
        let mut weights = c.weights.clone();
        weights[0] += 0.5;
        *c = Chain::new(c.nodes.clone(), weights)?;
    }
    ChainDecomposition::from_chains(dec.n(), classes)
}

/// Violations found on one instance, in a fixed order.
fn check_instance(g: &GridEnergy, corrupt_dec: bool) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut dec = decompose_grid(g)?;
    if corrupt_dec {
        dec = corrupt(&dec)?;
    }
    let report = validate(&dec, g.cut());
    if !report.is_valid() {
        out.extend(report.diagnostics.into_iter().map(|d| format!("decomposition: {d}")));
        return Ok(out);
    }
    let (_, brute) = brute_force_mincut(g.cut())?;
    let (_, flow) = maxflow_mincut(g.cut());
    if (brute - flow).abs() > 1e-9 {
        out.push(format!("maxflow energy {flow} differs from enumeration {brute}"));
    }
    for algo in Algorithm::ALL {
        let cfg = SolverConfig { max_iters: 100_000, trace_all: true, ..SolverConfig::new(algo) };
        let r = solve(g.cut(), &dec, &cfg)?;
        if !r.certified {
            out.push(format!("{algo}: not certified after {} iterations", r.iterations));
        }
        if (r.energy - brute).abs() > 1e-9 {
            out.push(format!("{algo}: energy {} differs from enumeration {brute}", r.energy));
        }
        if let Some(t) = r.trace.iter().find(|t| t.gap < -1e-9) {
            out.push(format!("{algo}: negative gap {} at iteration {}", t.gap, t.iter));
        }
    }
    Ok(out)
}

/// The chain prox must return a point whose residual is dual feasible.
fn check_chain(k: usize, seed: u64) -> Result<Option<String>> {
    let m = 2 + k % 30;
    let mut rng = rng_from_seed(seed ^ (k as u64).rotate_left(32));
    let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let w: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.0..2.0)).collect();
    let x = tv1d_prox(&s, &w)?;
    let y: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
    Ok((!chain_dual_feasible(&y, &w)).then(|| format!("chain {k}: prox residual is not dual feasible")))
}

fn execute(args: &VerifyArgs) -> Result<usize> {
    let mut violations = 0;
    for k in 0..args.instances {
        let (dims, conn) = SHAPES[k % SHAPES.len()];
        let seed = args.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let g = random_grid(dims, conn, seed)?;
        let found = check_instance(&g, args.corrupt_decomposition)?;
        let shape = dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
        if found.is_empty() {
            println!("instance {k} {shape} {conn}: ok");
        } else {
            for v in &found {
                println!("instance {k} {shape} {conn}: VIOLATION {v}");
            }
        }
        violations += found.len();
        if let Some(v) = check_chain(k, args.seed)? {
            println!("VIOLATION {v}");
            violations += 1;
        }
    }
    println!("checked {} instances, {violations} violations", args.instances);
    Ok(violations)
}
