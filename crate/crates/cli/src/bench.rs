use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use paracut_core::decompose::decompose_grid;
use paracut_core::generate::random_grid;
use paracut_core::graph::{Connectivity, GridEnergy};
use paracut_core::oracle::maxflow_mincut;
use paracut_core::solvers::{solve, Algorithm, SolverConfig};
use paracut_core::{Error, Result};
use serde::Serialize;

use crate::fail;
use crate::input::{load, parse_dims, Format, InputArgs, Instance};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instance file; omit to generate a random grid.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Shape of the generated grid.
    #[arg(long, default_value = "64x64")]
    pub generate: String,
    #[arg(long, default_value = "2d4")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "aar,ap,bcd,fista")]
    pub algos: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub scales: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub algo: String,
    pub threads: usize,
    pub scale: f64,
    pub iterations: usize,
    pub certified: bool,
    pub energy: f64,
    pub optimal_energy: f64,
    pub gap: f64,
    pub wall_ms: f64,
    pub iters_err_lt_10pct: Option<usize>,
    pub iters_err_lt_2pct: Option<usize>,
    pub iters_jd_lt_1pct: Option<usize>,
    pub iters_jd_lt_0_1pct: Option<usize>,
}

pub fn run(args: BenchArgs) -> ExitCode {
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn base_instance(args: &BenchArgs) -> Result<GridEnergy> {
    match &args.input {
        Some(path) => {
            let input = InputArgs {
                input: path.clone(),
                format: Format::Auto,
                grid_dims: None,
                connectivity: None,
                scale_pairwise: 1.0,
            };
            match load(&input)? {
                Instance::Grid(g) => Ok(g),
                Instance::General(_) => Err(Error::Config("bench needs a PCUT1 grid instance".into())),
            }
        }
        None => random_grid(&parse_dims(&args.generate)?, args.connectivity, args.seed),
    }
}

/// First traced iteration satisfying `pred`.
fn first_iter<T>(trace: &[T], iter: impl Fn(&T) -> usize, pred: impl Fn(&T) -> bool) -> Option<usize> {
    trace.iter().find(|t| pred(t)).map(iter)
}

pub fn bench_rows(base: &GridEnergy, args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &scale in &args.scales {
        let g = if scale == 1.0 { base.clone() } else { base.scale_pairwise(scale)? };
        let dec = decompose_grid(&g)?;
        let (opt_x, opt) = maxflow_mincut(g.cut());
        for &algorithm in &args.algos {
            for &threads in &args.threads {
                let cfg = SolverConfig {
                    algorithm,
                    threads,
                    gap_tol: args.gap_tol,
                    max_iters: args.max_iters,
                    trace_all: true,
                    reference: Some(opt_x.clone()),
                    ..SolverConfig::default()
                };
                let r = solve(g.cut(), &dec, &cfg)?;
                let initial = r.trace.first().map_or(opt, |t| t.energy);
                let span = (initial - opt).max(0.0);
                let err_below = |p: f64| {
                    first_iter(&r.trace, |t| t.iter, |t| t.energy - opt <= p * span)
                };
                let jd_below = |p: f64| {
                    first_iter(&r.trace, |t| t.iter, |t| t.jaccard_to_reference.is_some_and(|j| j < p))
                };
                rows.push(BenchRow {
                    algo: algorithm.to_string(),
                    threads,
                    scale,
                    iterations: r.iterations,
                    certified: r.certified,
                    energy: r.energy,
                    optimal_energy: opt,
                    gap: r.gap,
                    wall_ms: r.trace.last().map_or(0.0, |t| t.wall_ms),
                    iters_err_lt_10pct: err_below(0.10),
                    iters_err_lt_2pct: err_below(0.02),
                    iters_jd_lt_1pct: jd_below(0.01),
                    iters_jd_lt_0_1pct: jd_below(0.001),
                });
            }
        }
    }
    Ok(rows)
}

fn execute(args: &BenchArgs) -> Result<()> {
    let base = base_instance(args)?;
    let rows = bench_rows(&base, args)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
