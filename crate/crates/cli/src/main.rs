use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinmagic_cli::oracle::{compare, with_exact_checks};
use spinmagic_cli::plot::{plot, PlotSpec};
use spinmagic_cli::runner::{run, Manifest, RunOptions};
use spinmagic_cli::{CliError, SimulationConfig};

#[derive(Parser)]
#[command(name = "spinmagic", version, about = "Participation and stabilizer entropy dynamics of XXZ chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a TOML config or a previous manifest.json.
    Run {
        config: PathBuf,
        /// Output directory (overrides SPINMAGIC_OUTPUT_DIR and the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (overrides SPINMAGIC_THREADS).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render SVG panels from a records file.
    Plot { records: PathBuf, spec: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Run with exact cross-checks for every entropy plan.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Manifest::read(path)?.config)
    } else {
        SimulationConfig::from_file(path)
    }
}

fn options(output: Option<PathBuf>, threads: Option<usize>) -> Result<RunOptions, CliError> {
    let mut opts = RunOptions::from_env()?;
    if output.is_some() {
        opts.output_dir = output;
    }
    if threads.is_some() {
        opts.threads = threads;
    }
    Ok(opts)
}

fn execute(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Run {
            config,
            output,
            threads,
        } => {
            let cfg = load_config(&config)?;
            let out = run(&cfg, &options(output, threads)?)?;
            println!("{} records written to {}", out.records.len(), out.dir.display());
            for f in &out.fits {
                match (&f.fit, &f.error) {
                    (Some(fit), _) => println!(
                        "{:<14} {:>4} exponent {:.4} +- {:.4} on [{}, {}]",
                        f.observable,
                        f.index.map(|i| i.to_string()).unwrap_or_default(),
                        fit.exponent,
                        fit.exponent_error,
                        fit.window.0,
                        fit.window.1
                    ),
                    (None, Some(e)) => println!("{:<14} no fit: {e}", f.observable),
                    _ => {}
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { records, spec } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| CliError::Io {
                path: spec.clone(),
                source: e,
            })?;
            let spec = PlotSpec::from_toml_str(&text)?;
            for p in plot(&records, &spec)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok (L = {}, {} realization(s), {} steps)",
                config.display(),
                cfg.model.len,
                cfg.model.disorder.realizations,
                cfg.trotter_schedule().steps()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            config,
            output,
            threads,
        } => {
            let cfg = with_exact_checks(&load_config(&config)?)?;
            let out = run(&cfg, &options(output, threads)?)?;
            let checks = compare(&out.records);
            let path = out.dir.join("oracle.json");
            let mut text = serde_json::to_string_pretty(&checks)?;
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| CliError::Io { path, source: e })?;
            let mut ok = true;
            for c in &checks {
                ok &= c.passed;
                println!(
                    "{} {:<14} index {:?} realization {:?}: max |diff| {:.3e} over {} points",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.observable,
                    c.index,
                    c.realization,
                    c.max_abs_diff,
                    c.points
                );
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) | CliError::PlotSpec(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
