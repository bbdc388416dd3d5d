use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slicewise_bench::report::render_markdown;
use slicewise_bench::tables::{growth_report, render_growth_markdown};
use slicewise_bench::{
    emit_report, load_manifest, phantoms, run_experiment, BaselineData, BenchError,
    ExperimentConfig, Report, ReportFormat,
};
use slicewise_core::metrics::{
    dice, hd95, masked_metrics, nsd, salient_slices, Tolerance, DEFAULT_SALIENT_THRESHOLD,
};
use slicewise_core::nifti::load_mask;
use slicewise_core::VoxelGrid;

const EXIT_PARTIAL: u8 = 2;
const EXIT_FAILED: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "bench", about = "Slice-propagation segmentation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over a manifest and write a report.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// json (default), csv or md.
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write seeded ellipsoid phantoms and their manifest.
    Phantoms {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Score one prediction against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// NSD tolerance in mm.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        axis: usize,
    },
    /// Render comparison and growth tables for a report.
    Tables {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to the bundled baseline data.
        #[arg(long)]
        baselines: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bench: {e}");
            // every error other than a fully failed run stems from the inputs
            ExitCode::from(match e {
                BenchError::AllFailed(_) => EXIT_FAILED,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, BenchError> {
    match command {
        Command::Run {
            manifest,
            config,
            out,
            format,
            workers,
        } => {
            let manifest = load_manifest(&manifest)?;
            let config = ExperimentConfig::load(&config)?;
            let report = match run_experiment(&manifest, &config, workers) {
                Ok(r) => r,
                Err(BenchError::AllFailed(r)) => {
                    emit_report(&r, format, &out)?;
                    for c in &r.cases {
                        eprintln!("{}: {}", c.case_id, c.error.as_deref().unwrap_or("failed"));
                    }
                    return Err(BenchError::AllFailed(r));
                }
                Err(e) => return Err(e),
            };
            emit_report(&report, format, &out)?;
            let bad = report.failed_count();
            for c in report.cases.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "{} ({}): {}",
                    c.case_id,
                    c.status.as_str(),
                    c.error.as_deref().unwrap_or("")
                );
            }
            println!(
                "{} cases, {} not ok, report at {}",
                report.cases.len(),
                bad,
                out.display()
            );
            Ok(if bad > 0 {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Phantoms { out, count, seed } => {
            if count == 0 {
                return Err(BenchError::Config("--count must be at least 1".into()));
            }
            let entries = phantoms::write_phantoms(&out, count, seed)?;
            println!(
                "wrote {} phantoms and manifest.json to {}",
                entries.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            pred,
            gt,
            delta,
            axis,
        } => {
            let tol = Tolerance::new(delta).map_err(|e| BenchError::Config(e.to_string()))?;
            if axis > 2 {
                return Err(BenchError::Config(format!("axis {axis} is not 0, 1 or 2")));
            }
            let load = |p: &PathBuf| {
                load_mask(p).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))
            };
            let (_, p) = load(&pred)?;
            let (gvol, g) = load(&gt)?;
            if p.dims() != g.dims() {
                return Err(BenchError::Config(format!(
                    "dims {:?} vs {:?}",
                    p.dims(),
                    g.dims()
                )));
            }
            let sp = gvol.spacing();
            let metric =
                |e: slicewise_core::metrics::MetricError| BenchError::Report(e.to_string());
            let salient = salient_slices(&g, axis, DEFAULT_SALIENT_THRESHOLD).map_err(metric)?;
            let sal = if salient.is_empty() {
                None
            } else {
                Some(masked_metrics(&p, &g, axis, &salient, sp, tol).map_err(metric)?)
            };
            let out = serde_json::json!({
                "dice": dice(&p, &g).map_err(metric)?,
                "nsd": nsd(&p, &g, sp, tol).map_err(metric)?,
                "hd95": hd95(&p, &g, sp).ok(),
                "nsd_delta_mm": delta,
                "salient_slices": salient.len(),
                "salient_dice": sal.map(|s| s.dice),
                "salient_nsd": sal.map(|s| s.nsd),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Tables { report, baselines } => {
            let text = std::fs::read_to_string(&report).map_err(|source| BenchError::Io {
                path: report.clone(),
                source,
            })?;
            let report = Report::from_json(&text)?;
            let data = match baselines {
                Some(p) => BaselineData::load(p)?,
                None => BaselineData::embedded(),
            };
            print!("{}", render_markdown(&report, &data));
            if let Ok(rows) = growth_report(&report, &data) {
                println!("\n## Dice growth per added point (percentage points)\n");
                print!("{}", render_growth_markdown(&rows));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
