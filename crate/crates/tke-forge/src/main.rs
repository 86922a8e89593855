//! Thin command-line front end over the library pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tke_forge::model::ModelKind;
use tke_forge::pipeline::{self, PipelineConfig, SplitMode};
use tke_forge::preprocess::SplitRatios;
use tke_forge::synth::{generate, write_truth_csv, SynthConfig};
use tke_forge::{ingest, Error};

#[derive(Parser)]
#[command(name = "tke-forge", version, about = "Turbulence-regression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigOverrides {
    /// Pipeline configuration file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the TKE moving-average window
    #[arg(long)]
    ma_window: Option<usize>,
    /// Override the split ratios as train,test,val (e.g. 0.64,0.16,0.20)
    #[arg(long)]
    split: Option<String>,
    /// Row assignment mode: shuffled or chronological
    #[arg(long)]
    split_mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full workflow: ingest, turbulence, correlations, train, report
    Run(ConfigOverrides),
    /// Generate a synthetic burn-like dataset plus its latent-driver sidecar
    Synth {
        /// Output directory for synthetic.csv and truth.csv
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of 10 Hz samples
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 3.0)]
        plume_gain: f64,
        #[arg(long, default_value_t = 0.05)]
        noise_sd: f64,
        /// Fire-front onset, seconds
        #[arg(long, default_value_t = 60.0)]
        fire_front_time: f64,
    },
    /// Evaluate the configured hyperparameter grid with cross-validation
    Sweep(ConfigOverrides),
}

fn load_config(overrides: &ConfigOverrides) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::from_file(&overrides.config)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(w) = overrides.ma_window {
        cfg.ma_window = w;
    }
    if let Some(raw) = &overrides.split {
        let parts: Vec<f64> = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::Parameter(format!("cannot parse split ratios `{raw}`")))?;
        if parts.len() != 3 {
            return Err(Error::Parameter(format!(
                "--split takes three fractions, got `{raw}`"
            )));
        }
        cfg.split = SplitRatios {
            train: parts[0],
            test: parts[1],
            val: parts[2],
        };
    }
    if let Some(mode) = &overrides.split_mode {
        cfg.split_mode = mode.parse::<SplitMode>()?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(overrides) => {
            let cfg = load_config(&overrides)?;
            let report = pipeline::run(&cfg)?;
            let kinds: Vec<ModelKind> = ModelKind::ALL
                .iter()
                .copied()
                .filter(|k| cfg.models.contains_key(k.as_str()))
                .collect();
            let datasets: Vec<String> = cfg.datasets.keys().cloned().collect();
            print!("{}", pipeline::report_table(&report, &kinds, &datasets)?);
            println!("outputs written to {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            n,
            plume_gain,
            noise_sd,
            fire_front_time,
        } => {
            let cfg = SynthConfig {
                n_samples: n,
                seed,
                fire_front_time_s: fire_front_time,
                plume_gain,
                noise_sd,
                ..SynthConfig::default()
            };
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            let (ds, truth) = generate(&cfg)?;
            let data_path = out.join("synthetic.csv");
            ingest::write_csv(&ds, &data_path)?;
            write_truth_csv(&truth, &out.join("truth.csv"))?;
            println!("wrote {} samples to {}", ds.len(), data_path.display());
            Ok(())
        }
        Command::Sweep(overrides) => {
            let cfg = load_config(&overrides)?;
            let rows = pipeline::grid_sweep(&cfg)?;
            println!(
                "{:<10} {:<5} {:<40} {:>10} {:>12}",
                "dataset", "model", "assignment", "cv_r2", "cv_mse"
            );
            for r in &rows {
                println!(
                    "{:<10} {:<5} {:<40} {:>10.4} {:>12.6}",
                    r.dataset, r.kind, r.assignment, r.cv_mean_r2, r.cv_mean_mse
                );
            }
            println!(
                "ranked {} points; full table in {}",
                rows.len(),
                cfg.out_dir.join("sweep_results.csv").display()
            );
            Ok(())
        }
    }
}
