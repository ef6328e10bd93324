//! Command-line front end for the kerrgate simulator: configuration, runs,
//! sweeps, oracle validation and CSV/JSON output.

pub mod config;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{build_config, read_config_file, RawConfig};

#[derive(Debug, Parser)]
#[command(name = "kerrgate", version, about = "Simulate weak cross-Kerr parity gates, entanglers and CNOTs")]
pub struct Cli {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// parity | entangler | entangler45 | cnot | sweep | validate-oracle
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub shots: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Two amplitude pairs `c0,c1;c0,c1` (normalized on read).
    #[arg(long, allow_hyphen_values = true)]
    pub input: Option<String>,
    /// `start:end:count` or a comma list.
    #[arg(long)]
    pub grid_alpha: Option<String>,
    #[arg(long)]
    pub grid_theta: Option<String>,
    /// Experiment run at each sweep point (default cnot).
    #[arg(long)]
    pub sweep_of: Option<String>,
    #[arg(long)]
    pub output: Option<String>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
}

impl Cli {
    fn overrides(&self) -> RawConfig {
        let flags = [
            ("experiment", &self.experiment),
            ("alpha", &self.alpha),
            ("theta", &self.theta),
            ("shots", &self.shots),
            ("seed", &self.seed),
            ("input", &self.input),
            ("grid_alpha", &self.grid_alpha),
            ("grid_theta", &self.grid_theta),
            ("sweep_of", &self.sweep_of),
            ("output", &self.output),
            ("format", &self.format),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

pub fn execute(cli: &Cli) -> ExitCode {
    let mut raw = match &cli.config {
        Some(path) => match read_config_file(path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => RawConfig::new(),
    };
    raw.extend(cli.overrides());
    let config = match build_config(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };

    let start = Instant::now();
    match run::run(&config) {
        Ok(rows) => {
            println!("{}", run::summary(&config, &rows, start.elapsed().as_secs_f64()));
            eprintln!("wrote {}", config.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
