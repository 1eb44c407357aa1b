//! Command-line front end: simulate runs, analyze tag files, produce reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 I/O error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use antibunch::experiment::{load_config, preset, run_analysis, run_simulation, ExperimentConfig, RunReport};
use antibunch::timetag::{export_text, read_tags};
use antibunch::Result;

#[derive(Parser)]
#[command(name = "antibunch", version, about = "Heralded single-photon antibunching simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write its time tags to a PTAG file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the simulated duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Analyze a PTAG file and write the results table as CSV.
    Analyze {
        #[arg(long)]
        tags: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        hist_dir: PathBuf,
    },
    /// Simulate and analyze a preset, writing everything to one directory.
    Report {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a preset as a config file.
    ShowPreset { name: String },
    /// Print a PTAG file as `t,ch` text lines.
    Dump { tags: PathBuf },
}

fn apply_overrides(cfg: &mut ExperimentConfig, duration: Option<f64>, seed: Option<u64>) -> Result<()> {
    if let Some(d) = duration {
        cfg.set_duration(d);
    }
    if let Some(s) = seed {
        cfg.set_master_seed(s);
    }
    cfg.validate()
}

fn write_table_csv(report: &RunReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    report.table.write_csv(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, duration, seed } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, duration, seed)?;
            let stats = run_simulation(&cfg, &out)?;
            println!(
                "wrote {} tags ({} pairs) to {}",
                stats.total_tags(),
                stats.pairs,
                out.display()
            );
            println!("config_digest {}", cfg.digest());
        }
        Command::Analyze { tags, config, report, hist_dir } => {
            let cfg = load_config(&config)?;
            let r = run_analysis(&tags, &cfg, Some(&hist_dir))?;
            write_table_csv(&r, &report)?;
            print!("{}", r.render());
        }
        Command::Report { preset: name, out, duration, seed } => {
            let mut cfg = preset(&name)?;
            apply_overrides(&mut cfg, duration, seed)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("config.txt"), cfg.to_text())?;
            let tag_path = out.join("tags.ptag");
            run_simulation(&cfg, &tag_path)?;
            let r = run_analysis(&tag_path, &cfg, Some(&out))?;
            write_table_csv(&r, &out.join("table.csv"))?;
            let text = r.render();
            std::fs::write(out.join("report.txt"), &text)?;
            print!("{text}");
        }
        Command::ShowPreset { name } => print!("{}", preset(&name)?.to_text()),
        Command::Dump { tags } => {
            let (_, reader) = read_tags(&tags)?;
            export_text(reader, BufWriter::new(std::io::stdout().lock()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
