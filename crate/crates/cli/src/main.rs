//! `rosen`: simulate the transport approximation of the Rosenblatt process and run the verification suites.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ConfigError, FileConfig, MeshBlock, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "rosen", version, about = "Transport-process approximation of the Rosenblatt process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path of X^{H,n} and its components; writes a CSV and a JSON sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also build the Brownian reference path.
        #[arg(long)]
        with_reference: bool,
    },
    /// Run a verification suite; exit 0 if every check passes, 1 otherwise.
    Verify {
        suite: Suite,
        #[command(flatten)]
        common: Common,
        /// Comma-separated transport intensities for the rate suites.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<u64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Law,
    Coupling,
    Rate,
    Constants,
    Oracle,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Law => "law",
            Suite::Coupling => "coupling",
            Suite::Rate => "rate",
            Suite::Constants => "constants",
            Suite::Oracle => "oracle",
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hurst index in (1/2, 1).
    #[arg(long = "H")]
    hurst: Option<f64>,
    /// Exponent of the truncation level ε_n.
    #[arg(long)]
    beta: Option<f64>,
    /// Exponent of the error allowance; 0 < γ < β, β + γ < 1/2.
    #[arg(long)]
    gamma: Option<f64>,
    /// Left end of the near past, a < 0.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Time horizon.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Transport intensity.
    #[arg(long)]
    n: Option<u64>,
    /// Base seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points of the output time grid.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Quadrature nodes per output cell.
    #[arg(long)]
    quad_points: Option<usize>,
    /// Cells of each Brownian driver grid.
    #[arg(long)]
    bm_mesh: Option<usize>,
    /// Worker threads; affects wall time only.
    #[arg(long, env = "ROSEN_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn overrides(&self) -> FileConfig {
        let mesh = (self.grid_size.is_some() || self.quad_points.is_some() || self.bm_mesh.is_some()).then(|| MeshBlock {
            output_grid_size: self.grid_size,
            time_quad_points: self.quad_points,
            bm_mesh: self.bm_mesh,
        });
        FileConfig {
            hurst: self.hurst,
            beta: self.beta,
            gamma: self.gamma,
            a: self.a,
            horizon: self.horizon,
            n: self.n,
            reps: self.reps,
            seed: self.seed,
            out: self.out.clone(),
            mesh,
            ..Default::default()
        }
    }

    fn effective(&self, extra: FileConfig, suite: Option<&str>) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(file.merged(self.overrides()).merged(extra).resolve(suite))
    }
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate { common, with_reference } => {
            init_threads(common.threads)?;
            let extra = FileConfig { with_reference: with_reference.then_some(true), ..Default::default() };
            let cfg = common.effective(extra, None)?;
            output::simulate(&cfg)
        }
        Command::Verify { suite, common, ns } => {
            init_threads(common.threads)?;
            let cfg = common.effective(FileConfig { ns, ..Default::default() }, Some(suite.name()))?;
            output::verify(suite.name(), &cfg)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<rosenblatt_core::Error>() {
        return if e.is_config() { 2 } else { 1 };
    }
    if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        return 3;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
