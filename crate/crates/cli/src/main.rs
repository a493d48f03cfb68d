use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qprobe::harness::{self, Command, RunConfig};
use qprobe::{Error, NoiseModel};

/// Memory effects of a spin coupled to a bosonic mode, with projection noise.
///
/// Without --config the built-in reference parameters are used.
#[derive(Parser, Debug)]
#[command(name = "qprobe", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides the configured noise model.
    #[arg(long, global = true, value_enum)]
    noise: Option<Noise>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// D(t): noiseless, replica-averaged noisy, and δD.
    Simulate,
    /// N against the window end t_max.
    Measure,
    /// Bias over the (γ, r) grid of the [bias] section.
    Bias,
    /// One-parameter scan from the [sweep] section.
    Sweep,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Noise {
    Gaussian,
    Binomial,
    None,
}

impl From<Noise> for NoiseModel {
    fn from(n: Noise) -> Self {
        match n {
            Noise::Gaussian => NoiseModel::Gaussian,
            Noise::Binomial => NoiseModel::Binomial,
            Noise::None => NoiseModel::None,
        }
    }
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Measure => Command::Measure,
            Sub::Bias => Command::Bias,
            Sub::Sweep => Command::Sweep,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(noise) = cli.noise {
        config.qpn.noise = noise.into();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<PathBuf, Error> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let config = load_config(cli)?;
    harness::run(cli.command.into(), &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("qprobe {}: {err}", Command::from(cli.command));
            ExitCode::from(harness::exit_code(&err) as u8)
        }
    }
}
