//! Command-line driver for the polyscat library: runs experiment configs,
//! validates them, and documents the on-disk formats.
//!
//! Exit codes: 0 success, 2 solver failure, 3 audit/analysis failure,
//! 4 invalid input (config or geometry files).

mod config;
mod runner;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polyscat", version, about = "Polyhedral impedance scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config
    Run {
        /// path to the experiment config (JSON)
        config: PathBuf,
        /// output directory; overrides the config's output_dir
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config (and any referenced geometry files) without solving
    Validate {
        /// path to the experiment config (JSON)
        config: PathBuf,
    },
    /// Describe the supported file formats
    Formats,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(4);
                }
            };
            let base = base_dir(&config);
            let out_dir = cfg.resolved_output_dir(&base, out.as_deref());
            match runner::run(&cfg, &base, &out_dir) {
                Ok(()) => {
                    println!("wrote {}", out_dir.join("manifest.json").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => match cfg.validate(&base_dir(&config)) {
                Ok(()) => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(4)
                }
            },
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(4)
            }
        },
        Command::Formats => {
            print!("{}", FORMATS);
            ExitCode::SUCCESS
        }
    }
}

const FORMATS: &str = r#"Supported file formats
======================

Experiment config (JSON)
  { "schema_version": 1, "seed": 0, "output_dir": "out",
    "scenario": { "kind": ..., ... } }
  Scenario kinds: solve-obstacle, solve-grating, verify-corner,
  estimate-vanishing, uniqueness-gap, recover-impedance, audit.
  Run `polyscat validate <config>` to check a file.

OFFI (obstacle geometry, text)
  Line-oriented, '#' comments. Header line `OFFI`, then
  `<nv> <nf>`, then nv vertex lines `x y z`, then nf face lines
  `m i_1 ... i_m re_eta im_eta` with 0-based, counterclockwise
  (outward normal) vertex indices and the face impedance eta.

GRID (grating profile, text)
  Header line `GRID`, then `<nf>`, then nf facet blocks: a line
  `m re_eta im_eta` followed by m vertex lines `x y z` with
  0 <= x, y < 2 pi (one period cell) and z >= 0.

far_field.csv
  Columns `theta,phi,re,im`: spherical angles of the observation
  direction (theta from +z, phi in [0, 2 pi)) and the complex
  far-field pattern. Rows follow the quadrature grid order and are
  bit-identical across runs of the same config.

rayleigh.csv
  Columns `n1,n2,re_u,im_u,re_beta,im_beta`: Rayleigh order, complex
  coefficient referred to x3 = 0, and vertical wavenumber beta_n.
  Rows are sorted lexicographically by (n1, n2).

manifest.json
  Written for every run: schema_version, scenario kind, seed, the
  full config echo, SHA-256 of every artifact, diagnostics
  (residuals etc.), and wall time.
"#;
