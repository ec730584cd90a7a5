use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use semshield::experiments::{parse_snr_list, run_scenario, ExperimentConfig, Scenario};
use semshield::Error;

/// Semantic-key encryption and subcarrier obfuscation experiments.
#[derive(Debug, Parser)]
#[command(name = "semshield", version)]
struct Cli {
    /// ber_sweep, bleu_compare, constellation, keygen_demo, search_space or dispersion
    scenario: String,
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output file (CSV or JSON depending on the scenario)
    #[arg(long)]
    out: PathBuf,
    /// Overrides master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated SNR list in dB; `inf` disables noise
    #[arg(long)]
    snr: Option<String>,
    /// Use a static (constant) channel for PLK generation
    #[arg(long)]
    static_channel: bool,
    /// Frames per SKey refresh
    #[arg(long)]
    refresh_period: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(cli: &Cli) -> Result<(Scenario, ExperimentConfig), Error> {
    let scenario: Scenario = cli.scenario.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::InvalidParameters(format!("{}: {e}", cli.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(snr) = &cli.snr {
        cfg.snr_list = parse_snr_list(snr)?;
    }
    if cli.static_channel {
        cfg.static_channel = true;
    }
    if let Some(r) = cli.refresh_period {
        cfg.refresh_period = r;
    }
    cfg.scenario = Some(scenario);
    cfg.output_path = Some(cli.out.clone());
    cfg.validate(scenario)?;
    Ok((scenario, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, cfg) = match load(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("semshield: config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = run_scenario(scenario, &cfg).and_then(|text| {
        std::fs::write(&cli.out, text).map_err(|e| Error::Internal(format!("writing {}: {e}", cli.out.display())))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semshield: {scenario} failed: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
