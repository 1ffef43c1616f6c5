use std::path::Path;

use clap::{Args, ValueEnum};
use paracut_core::graph::{Connectivity, CutEnergy, Grid, GridEnergy};
use paracut_core::io::{read_dimacs, read_grid};
use paracut_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// PCUT1 for files starting with its magic, DIMACS otherwise.
    Auto,
    Dimacs,
    Grid,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: Format,
    /// Grid shape for DIMACS input, e.g. `64x64` or `32x32x16`.
    #[arg(long)]
    pub grid_dims: Option<String>,
    /// Connectivity for DIMACS input (`2d4`, `2d8`, `3d6`).
    #[arg(long)]
    pub connectivity: Option<Connectivity>,
    /// Multiply every pairwise weight by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub scale_pairwise: f64,
}

pub enum Instance {
    Grid(GridEnergy),
    General(CutEnergy),
}

impl Instance {
    pub fn cut(&self) -> &CutEnergy {
        match self {
            Instance::Grid(g) => g.cut(),
            Instance::General(c) => c,
        }
    }
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(['x', 'X', ','])
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Config(format!("invalid dimensions {s:?}"))))
        .collect()
}

fn sniff_grid(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut head = [0u8; 5];
    let mut f = std::fs::File::open(path)?;
    let got = f.read(&mut head)?;
    Ok(got == 5 && &head == b"PCUT1")
}

pub fn load(args: &InputArgs) -> Result<Instance> {
    if !(args.scale_pairwise >= 0.0) || !args.scale_pairwise.is_finite() {
        return Err(Error::Config(format!("invalid --scale-pairwise {}", args.scale_pairwise)));
    }
    let format = match args.format {
        Format::Auto if sniff_grid(&args.input)? => Format::Grid,
        Format::Auto => Format::Dimacs,
        f => f,
    };
    let inst = match format {
        Format::Grid => Instance::Grid(read_grid(&args.input)?),
        _ => {
            let cut = read_dimacs(&args.input)?.to_cut()?;
            match &args.grid_dims {
                Some(dims) => {
                    let dims = parse_dims(dims)?;
                    let conn = args.connectivity.unwrap_or(if dims.len() == 3 {
                        Connectivity::Grid3D6
                    } else {
                        Connectivity::Grid2D4
                    });
                    Instance::Grid(GridEnergy::from_cut(Grid::new(&dims, conn)?, cut)?)
                }
                None => Instance::General(cut),
            }
        }
    };
    if args.scale_pairwise == 1.0 {
        return Ok(inst);
    }
    Ok(match inst {
        Instance::Grid(g) => Instance::Grid(g.scale_pairwise(args.scale_pairwise)?),
        Instance::General(c) => Instance::General(c.scale_pairwise(args.scale_pairwise)?),
    })
}
