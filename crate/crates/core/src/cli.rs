//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compression::compress_dataset;
use crate::error::{Error, Result};
use crate::manifest::{
    load_compressed, load_dataset, read_json, save_compressed, save_dataset, write_atomic, write_json, Compressed,
};
use crate::pipeline::{check_dataset, run_pipeline, select_stage};
use crate::preprocess::{denoise_dataset, preprocess_dataset};
use crate::report::{eq_curves_table, PipelineReport};
use crate::synth::{generate, PlantSpec};
use crate::types::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const REPORT_FILE: &str = "report.json";
pub const AUDIT_FILE: &str = "preprocess_audit.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Parser)]
#[command(
    name = "wavecart",
    version,
    about = "Wavelet compression and CART-based variable selection for functional data",
    long_about = "Wavelet compression and CART-based variable selection for functional data.\n\n\
        Pipeline settings come from built-in defaults, then the --config file (flat TOML whose keys \
        are the PipelineConfig fields, e.g. `m = 512`, `wavelet = \"sym4\"`, `extension = \"periodic\"`, \
        `elbow_threshold = 3.0`, `importance_keep_fraction = 0.2`, `cv_folds = 10`, `cv_repeats = 5`, \
        `bootstrap_count = 25`, `forward_margin = 0.0`), then command-line flags."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat TOML file overriding pipeline defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "wavecart-out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark dataset with planted discriminant variables.
    Synth {
        #[arg(long, default_value_t = 114)]
        n: usize,
        /// Strength of the planted class effects.
        #[arg(long)]
        effect_size: Option<f64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Truncate, denoise, resample and normalise every trial.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Wavelet-denoise every signal on its own grid.
    Denoise {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Choose levels and write coefficient packets of a preprocessed dataset.
    Compress {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the five-phase selection on compressed packets.
    Select {
        /// The compression.json written by `compress`.
        #[arg(long)]
        compressed: PathBuf,
    },
    /// Preprocess, compress and select in one go.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Re-render the tables of a report.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
        }
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_tables(report: &PipelineReport, out: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in report.tables() {
        let (path, bytes) = match format {
            Format::Csv => (out.join(format!("{}.csv", t.name)), t.to_csv().into_bytes()),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&t.to_json()).map_err(|e| Error::Internal(e.to_string()))?;
                s.push('\n');
                (out.join(format!("{}.json", t.name)), s.into_bytes())
            }
        };
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

fn write_report(report: &PipelineReport, out: &Path, format: Format) -> Result<()> {
    write_json(&out.join(REPORT_FILE), report)?;
    write_tables(report, out, format)?;
    let sel = &report.selection;
    match &sel.degenerate {
        Some(why) => println!("degenerate run: {why}; no criteria selected"),
        None => println!(
            "chosen variables: {:?}; criteria: {}",
            sel.chosen_variables,
            sel.final_criteria.join(" ")
        ),
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = &g.out;
    match &cli.command {
        Command::Synth { n, effect_size, noise_sigma } => {
            let mut spec = PlantSpec {
                n: *n,
                ..PlantSpec::default()
            };
            if let Some(e) = effect_size {
                spec.effect_size = *e;
            }
            if let Some(s) = noise_sigma {
                spec.noise_sigma = *s;
            }
            let (d, truth) = generate(&spec, cfg.seed)?;
            let path = save_dataset(&d, out)?;
            write_json(&out.join(GROUND_TRUTH_FILE), &truth)?;
            println!("wrote {} ({} trials)", path.display(), d.n());
        }
        Command::Preprocess { manifest } => {
            let d = load_dataset(manifest)?;
            check_dataset(&d)?;
            let (pre, audit) = preprocess_dataset(&d, &cfg)?;
            let path = save_dataset(&pre, out)?;
            write_json(&out.join(AUDIT_FILE), &audit)?;
            println!("wrote {}", path.display());
        }
        Command::Denoise { manifest } => {
            let d = load_dataset(manifest)?;
            check_dataset(&d)?;
            let path = save_dataset(&denoise_dataset(&d, &cfg)?, out)?;
            println!("wrote {}", path.display());
        }
        Command::Compress { manifest } => {
            let d = load_dataset(manifest)?;
            check_dataset(&d)?;
            let (packets, report) = compress_dataset(&d, &cfg)?;
            let c = Compressed {
                labels: d.labels(),
                class_count: d.class_count,
                variable_names: d.variable_names.clone(),
                report,
                packets,
            };
            let path = save_compressed(&c, out)?;
            let t = eq_curves_table(&c.report);
            match g.format {
                Format::Csv => write_atomic(&out.join("eq_curves.csv"), t.to_csv().as_bytes())?,
                Format::Json => write_json(&out.join("eq_curves.json"), &t.to_json())?,
            }
            println!("wrote {} ({} coefficients)", path.display(), c.report.total_coefficients);
        }
        Command::Select { compressed } => {
            let c = load_compressed(compressed)?;
            let report = select_stage(&c.packets, c.report, &c.variable_names, &c.labels, c.class_count, &cfg)?;
            write_report(&report, out, g.format)?;
        }
        Command::Run { manifest } => {
            let d = load_dataset(manifest)?;
            let run = run_pipeline(&d, &cfg)?;
            write_json(&out.join(AUDIT_FILE), &run.audit)?;
            write_report(&run.report, out, g.format)?;
        }
        Command::Report { report } => {
            let r: PipelineReport = read_json(report)?;
            for p in write_tables(&r, out, g.format)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Internal(_) => EXIT_INTERNAL,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}
