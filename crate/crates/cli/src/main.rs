use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ecg_synth::eval::evaluate_dir;
use ecg_synth::pipeline::{generate_batch, load_config, read_manifest, report_timings, DistortionConfig};

#[derive(Parser)]
#[command(name = "ecg-synth", version, about = "Synthetic paper ECG images with ground-truth sidecars")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render every record in a directory into images and sidecars.
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML config; defaults for anything left out.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the per-stage timing table of a batch.
    Timings {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Digitize generated images and score them against their sidecars.
    Eval {
        #[arg(long)]
        images: PathBuf,
        /// JSON report; the SNR histogram goes next to it as `<stem>.hist.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        bin_width_db: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Generate {
            input,
            out,
            config,
            workers,
            seed,
        } => {
            let mut cfg = match &config {
                Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
                None => DistortionConfig::default(),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let m = generate_batch(&input, &out, &cfg, workers)?;
            log::info!("{} generated, {} failed -> {}", m.succeeded, m.failed, out.display());
            if m.succeeded > 0 {
                print!("{}", report_timings(&m)?);
            }
            if m.failed > 0 {
                for r in m.records.iter().filter(|r| r.error.is_some()) {
                    eprintln!("{}: {}", r.input.display(), r.error.as_deref().unwrap_or_default());
                }
                bail!("{} of {} records failed", m.failed, m.records.len());
            }
        }
        Cmd::Timings { manifest } => {
            let m = read_manifest(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            print!("{}", report_timings(&m)?);
        }
        Cmd::Eval {
            images,
            out,
            bin_width_db,
        } => {
            let report = evaluate_dir(&images, bin_width_db)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            serde_json::to_writer_pretty(BufWriter::new(f), &report)?;
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
            let csv = out.with_file_name(format!("{stem}.hist.csv"));
            let f = File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
            report.write_histogram_csv(BufWriter::new(f))?;
            print!("{}", report.summary());
            for f in &report.failures {
                eprintln!("unscored: {f}");
            }
        }
    }
    Ok(())
}
