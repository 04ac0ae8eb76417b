use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mapgate::runner::{run, Experiment, ExperimentConfig};
use mapgate::Error;

#[derive(Parser, Debug)]
#[command(name = "mapgate", version, about = "Simulate and analyse the microwave-activated conditional-phase gate")]
struct Cli {
    #[command(subcommand)]
    experiment: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (overrides numerics.workers).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Readout sampling seed (overrides numerics.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Shots per expectation value, or `inf` for exact readout.
    #[arg(long, global = true, value_parser = parse_shots)]
    shots: Option<Shots>,
}

#[derive(Clone, Copy, Debug)]
enum Shots {
    Finite(u64),
    Infinite,
}

fn parse_shots(s: &str) -> Result<Shots, String> {
    if s == "inf" {
        return Ok(Shots::Infinite);
    }
    match s.parse::<u64>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or `inf`, got {s:?}")),
        Ok(n) => Ok(Shots::Finite(n)),
    }
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Two-tone Rabi spectroscopy map and transition lines.
    Spectroscopy,
    /// Ramsey fringes without refocusing.
    RamseyDirect,
    /// Ramsey fringes with a mid-sequence X_π on both qubits.
    RamseyRefocused,
    /// Gate time over drive frequency and amplitude.
    Sweep,
    /// Perturbative against numerical conditional-phase rate.
    PertCompare,
    /// Process tomography of the calibrated or ideal gate.
    Qpt,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Spectroscopy => Experiment::Spectroscopy,
            Command::RamseyDirect => Experiment::RamseyDirect,
            Command::RamseyRefocused => Experiment::RamseyRefocused,
            Command::Sweep => Experiment::Sweep,
            Command::PertCompare => Experiment::PertCompare,
            Command::Qpt => Experiment::Qpt,
        }
    }
}

fn load(cli: &Cli) -> mapgate::Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config(vec!["--config <path> is required".into()]))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)?;
    let wanted = cli.experiment.experiment();
    if let Some(e) = cfg.experiment {
        if e != wanted {
            return Err(Error::Config(vec![format!("config names experiment {e} but the command is {wanted}")]));
        }
    }
    cfg.experiment = Some(wanted);
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.numerics.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.numerics.seed = s;
    }
    match cli.shots {
        Some(Shots::Finite(n)) => cfg.numerics.shots = Some(n),
        Some(Shots::Infinite) => cfg.numerics.shots = None,
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| run(&cfg).map(|m| (cfg, m)));
    match result {
        Ok((cfg, manifest)) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} finished; {} files in {}", manifest.experiment, manifest.files.len(), cfg.output.dir.display());
            for f in &manifest.files {
                println!("  {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
