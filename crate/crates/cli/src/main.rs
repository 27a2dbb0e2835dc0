use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyedge::BasisKind;
use polyedge_cli::{cmd_run, cmd_sweep, CliError, Emit, GridSpec, Preset, RawConfig, Result};

#[derive(Parser)]
#[command(
    name = "polyedge",
    version,
    about = "Edge detection with an overcomplete piecewise-polynomial image model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noise, solve, detect at fixed thresholds, score and write artifacts.
    Run(Flags),
    /// Same pipeline, scored over a threshold grid for every detector.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter preset of a reference experiment (coins-s20, coins-s30, coins-s30-ortho, cameraman, rice).
    #[arg(long)]
    preset: Option<Preset>,
    /// Clean grayscale input image (PGM or PNG).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Polynomial degree K.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, value_parser = parse_basis)]
    basis: Option<BasisKind>,
    /// Noise standard deviation in intensity units.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Allowed model error `||y - P x||_2`.
    #[arg(long)]
    delta: Option<f64>,
    /// Weight of the horizontal penalty.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    thresh_gt: Option<f64>,
    #[arg(long)]
    thresh_sobel: Option<f64>,
    #[arg(long)]
    thresh_synth: Option<f64>,
    #[arg(long)]
    thresh_parmap: Option<f64>,
    /// Comma-separated subset of denoised,mosaic,gradmaps,edges,csv.
    #[arg(long)]
    emit: Option<Emit>,
    /// Threshold grid as start:step:end.
    #[arg(long)]
    sweep_grid: Option<GridSpec>,
    /// Chebyshev matching tolerance for scoring, in pixels.
    #[arg(long)]
    tolerance_px: Option<usize>,
}

fn parse_basis(s: &str) -> std::result::Result<BasisKind, String> {
    s.parse().map_err(|e: polyedge::Error| e.to_string())
}

impl Flags {
    fn resolve(self) -> Result<polyedge_cli::RunConfig> {
        let file = self
            .config
            .as_deref()
            .map(RawConfig::from_file)
            .transpose()?;
        let raw = RawConfig {
            input: self.input,
            out_dir: self.out_dir,
            degree: self.degree,
            basis: self.basis,
            sigma: self.sigma,
            seed: self.seed,
            delta: self.delta,
            lambda: self.lambda,
            iters: self.iters,
            thresh_gt: self.thresh_gt,
            thresh_sobel: self.thresh_sobel,
            thresh_synth: self.thresh_synth,
            thresh_parmap: self.thresh_parmap,
            emit: self.emit,
            sweep_grid: self.sweep_grid,
            tolerance_px: self.tolerance_px,
            preset: self.preset,
        };
        RawConfig::resolve(raw, file)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(flags) => {
            let report = cmd_run(&flags.resolve()?)?;
            print!("{}", report.summary());
        }
        Command::Sweep(flags) => {
            let report = cmd_sweep(&flags.resolve()?)?;
            print!("{}", report.summary());
            println!("wrote {}", report.csv_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
