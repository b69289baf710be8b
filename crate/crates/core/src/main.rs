use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twinbeam::commands::{self, CommandOutcome, JointOptions, SpatialOptions};
use twinbeam::io::{read_config, RunConfig};
use twinbeam::stats::PhotodetectionModel;
use twinbeam::Result;

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Twin-beam photocount simulator and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory
    #[arg(long, env = "TWINBEAM_OUT_DIR", default_value = "twinbeam-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frames into a frame-event file
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output frame file (`.gz` for compression)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<u64>,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        /// Also render raster frames into this directory
        #[arg(long)]
        rasters: Option<PathBuf>,
    },
    /// Joint photon-number statistics and classicality test
    Joint {
        frames: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Correlation-area measurement from position histograms
    Spatial {
        frames: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Histogram bin width in mrad (default: one macropixel)
        #[arg(long)]
        bin_width: Option<f64>,
        /// Half width of the fitted window around the diagonal (mrad)
        #[arg(long)]
        fit_range: Option<f64>,
    },
    /// Exact photodetection-model distribution
    Oracle {
        /// Take mu, efficiencies and dark rates from a config file
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        eta_s: Option<f64>,
        #[arg(long)]
        eta_i: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        dark_s: f64,
        #[arg(long, default_value_t = 0.0)]
        dark_i: f64,
        #[arg(long)]
        cutoff: Option<usize>,
        /// Report expected significances for this many frames
        #[arg(long)]
        frames: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Process raster frames into a frame-event file
    Process {
        raster_dir: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf, seed: Option<u64>, frames: Option<u64>) -> Result<RunConfig> {
    let mut cfg = read_config(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(n) = frames {
        cfg.run.n_frames = n;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<CommandOutcome> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            frames,
            parallelism,
            rasters,
        } => commands::simulate(
            &load(&config, seed, frames)?,
            &out,
            parallelism,
            rasters.as_deref(),
        ),
        Command::Joint {
            frames,
            out,
            resamples,
            seed,
            cutoff,
        } => {
            let d = JointOptions::default();
            let opts = JointOptions {
                cutoff: cutoff.unwrap_or(d.cutoff),
                resamples: resamples.unwrap_or(d.resamples),
                seed: seed.unwrap_or(d.seed),
            };
            commands::joint(&frames, &out.out, &opts)
        }
        Command::Spatial {
            frames,
            out,
            bin_width,
            fit_range,
        } => {
            let opts = SpatialOptions {
                bin_width,
                fit_half_range: fit_range.unwrap_or(SpatialOptions::default().fit_half_range),
            };
            commands::spatial(&frames, &out.out, &opts)
        }
        Command::Oracle {
            config,
            mu,
            eta_s,
            eta_i,
            dark_s,
            dark_i,
            cutoff,
            frames,
            out,
        } => {
            let base = match &config {
                Some(path) => {
                    let c = read_config(path)?;
                    PhotodetectionModel {
                        mu: c.source.mu_pairs,
                        eta_s: c.detector.eta_s,
                        eta_i: c.detector.eta_i,
                        dark_s: c.detector.dark_mean_s,
                        dark_i: c.detector.dark_mean_i,
                    }
                }
                None => PhotodetectionModel {
                    mu: 0.0,
                    eta_s: 1.0,
                    eta_i: 1.0,
                    dark_s,
                    dark_i,
                },
            };
            let model = PhotodetectionModel {
                mu: mu.unwrap_or(base.mu),
                eta_s: eta_s.unwrap_or(base.eta_s),
                eta_i: eta_i.unwrap_or(base.eta_i),
                dark_s: if config.is_some() && dark_s == 0.0 {
                    base.dark_s
                } else {
                    dark_s
                },
                dark_i: if config.is_some() && dark_i == 0.0 {
                    base.dark_i
                } else {
                    dark_i
                },
            };
            commands::oracle(&model, cutoff, frames, &out.out)
        }
        Command::Process {
            raster_dir,
            config,
            out,
        } => commands::process(&raster_dir, &read_config(&config)?, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("summary serialises")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
