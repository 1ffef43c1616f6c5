use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, ValueEnum};
use paracut_core::io::{load_dual, save_dual, write_labeling, write_trace, Fingerprint};
use paracut_core::oracle::maxflow_mincut;
use paracut_core::solvers::{solve_grid, Algorithm, SolverConfig};
use paracut_core::{Error, Result};

use crate::input::{load, InputArgs, Instance};
use crate::{fail, EXIT_NOT_CERTIFIED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Aar,
    Ap,
    Bcd,
    Fista,
    Maxflow,
}

impl Algo {
    fn iterative(self) -> Option<Algorithm> {
        match self {
            Algo::Aar => Some(Algorithm::Aar),
            Algo::Ap => Some(Algorithm::Ap),
            Algo::Bcd => Some(Algorithm::Bcd),
            Algo::Fista => Some(Algorithm::Fista),
            Algo::Maxflow => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "aar")]
    pub algo: Algo,
    #[arg(long, default_value_t = 0.0)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub check_every: usize,
    #[arg(long, env = "PARACUT_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Dual snapshot to start from.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Accept a warm start whose fingerprint does not match the instance.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub save_dual: Option<PathBuf>,
    /// Labeling output, one 0/1 per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV trace output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn run(args: SolveArgs) -> ExitCode {
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NOT_CERTIFIED),
        Err(e) => fail(e),
    }
}

fn execute(args: &SolveArgs) -> Result<bool> {
    let inst = load(&args.input)?;
    let Some(algorithm) = args.algo.iterative() else {
        if args.warm_start.is_some() || args.save_dual.is_some() || args.trace.is_some() {
            eprintln!("note: --warm-start, --save-dual and --trace are ignored with --algo maxflow");
        }
        let start = Instant::now();
        let (x, energy) = maxflow_mincut(inst.cut());
        let wall = start.elapsed().as_secs_f64() * 1e3;
        if let Some(out) = &args.out {
            write_labeling(&x, out)?;
        }
        println!("energy {energy}\ngap 0\niterations 0\ncertified true\nwall_ms {wall:.3}");
        return Ok(true);
    };
    let Instance::Grid(g) = &inst else {
        return Err(Error::Config(
            "instance is not a grid; pass --grid-dims (and --connectivity) or use --algo maxflow".into(),
        ));
    };
    let fp = Fingerprint::of_grid(g);
    let warm_start = match &args.warm_start {
        Some(p) => Some(load_dual(p, &fp, args.force)?),
        None => None,
    };
    let cfg = SolverConfig {
        algorithm,
        max_iters: args.max_iters,
        gap_tol: args.gap_tol,
        threads: args.threads,
        check_every: args.check_every,
        warm_start,
        jaccard_to_final: args.trace.is_some(),
        ..SolverConfig::default()
    };
    let r = solve_grid(g, &cfg)?;
    let wall = r.trace.last().map_or(0.0, |t| t.wall_ms);
    if let Some(out) = &args.out {
        write_labeling(&r.labeling, out)?;
    }
    if let Some(p) = &args.save_dual {
        save_dual(&r.dual_state, &fp, p)?;
    }
    if let Some(p) = &args.trace {
        write_trace(&r.trace, p)?;
    }
    println!(
        "energy {}\ngap {}\niterations {}\ncertified {}\nwall_ms {wall:.3}",
        r.energy, r.gap, r.iterations, r.certified
    );
    Ok(r.certified)
}
