use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use levlab::config::RunConfig;
use levlab::plot::{render_svg, series_from_csv, Labels, PlotKind};
use levlab::{ingest, run, CliError, Result};
use levlab_core::response::CampaignMode;

#[derive(Parser)]
#[command(name = "levlab", version, about = "Left and right eigenvectors of non-Hermitian resonator networks from response spectra")]
struct Cli {
    /// Output directory (overrides the config's output.directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// RNG seed for measurement noise (overrides campaign.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// Retrieve eigenvectors from a campaign on disk.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        retrieve: Retrieve,
        /// Only the mode nearest this frequency; all fitted modes otherwise.
        #[arg(long)]
        target_rad_s: Option<f64>,
    },
    /// Render a CSV file as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output file; defaults to `<out-dir>/<csv stem>.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Retrieve {
    Lev,
    Rev,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(dir) = cli.out_dir {
                cfg.output.directory = dir;
            }
            if let Some(seed) = cli.seed {
                cfg.campaign.seed = seed;
            }
            let bundle = run::run(&cfg)?;
            for a in &bundle.artifacts {
                println!("{}", cfg.output.directory.join(&a.path).display());
            }
            Ok(())
        }
        Command::Ingest {
            manifest,
            retrieve,
            target_rad_s,
        } => {
            let mode = match retrieve {
                Retrieve::Lev => CampaignMode::Lev,
                Retrieve::Rev => CampaignMode::Rev,
            };
            let out = cli.out_dir.unwrap_or_else(|| PathBuf::from("levlab-out"));
            for m in ingest::ingest(&manifest, mode, target_rad_s, &out)? {
                println!("{}", out.join(format!("{}_mode_{}.json", mode, m.mode_idx)).display());
            }
            Ok(())
        }
        Command::Plot { csv, kind, out, title } => {
            let name = csv.display().to_string();
            let file = std::fs::File::open(&csv).map_err(|e| CliError::io(&csv, e))?;
            let series = series_from_csv(file, kind, &name)?;
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
            let labels = Labels {
                title: title.unwrap_or_else(|| stem.clone()),
                ..Labels::default()
            };
            let svg = render_svg(&series, kind, &labels)?;
            let path = out.unwrap_or_else(|| {
                cli.out_dir
                    .as_deref()
                    .unwrap_or(Path::new("."))
                    .join(format!("{stem}.svg"))
            });
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
            println!("{}", path.display());
            Ok(())
        }
    }
}
