use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uscqed::sweep::{self, FileStatus, RunOptions, Tolerances};
use uscqed::Error;

#[derive(Parser)]
#[command(name = "uscqed", version, about = "Cavity-QED sweeps in the ultrastrong-coupling regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a configuration file or bundled recipe.
    Run {
        /// Path to a TOML configuration.
        #[arg(required_unless_present = "recipe", conflicts_with = "recipe")]
        config: Option<PathBuf>,
        /// Name of a bundled recipe (see `list-recipes`).
        #[arg(long)]
        recipe: Option<String>,
        /// Directory in which `run-<hash>` is created.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, env = "USCQED_WORKERS")]
        workers: Option<usize>,
        /// Scale spectra to unit maximum.
        #[arg(long)]
        normalize: bool,
    },
    /// Compare the CSV outputs of a run directory against a golden directory.
    Compare {
        run: PathBuf,
        golden: PathBuf,
        /// Relative tolerance override, `output=value` (e.g. `spectrum_qrt=1e-5`).
        #[arg(long = "tol")]
        tolerances: Vec<String>,
    },
    /// List the bundled recipes.
    ListRecipes {
        /// Print the configuration of one recipe instead.
        #[arg(long)]
        show: Option<String>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } | Error::Parse { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_FAIL),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            recipe,
            out,
            workers,
            normalize,
        } => {
            let cfg = match (config, recipe) {
                (Some(path), _) => sweep::RunConfig::load(&path),
                (None, Some(name)) => sweep::recipe(&name).and_then(|r| r.config()),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let cfg = match cfg {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let options = RunOptions {
                out_root: out,
                workers,
                normalize: normalize.then_some(true),
            };
            match sweep::run_config(&cfg, &options) {
                Ok(m) => {
                    println!("{}", m.run_dir.display());
                    for j in m.jobs.iter().filter(|j| j.error.is_some()) {
                        eprintln!("failed: {} ({})", j.id, j.error.as_deref().unwrap_or(""));
                    }
                    if m.failed() > 0 {
                        eprintln!("{} of {} jobs failed", m.failed(), m.jobs.len());
                        ExitCode::from(EXIT_FAIL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Compare { run, golden, tolerances } => {
            let mut tol = Tolerances::default();
            for t in &tolerances {
                if let Err(e) = tol.set_from_str(t) {
                    return exit_for(&e);
                }
            }
            let report = match sweep::compare_goldens(&run, &golden, &tol) {
                Ok(r) => r,
                Err(e) => return exit_for(&e),
            };
            for f in &report.files {
                match &f.status {
                    FileStatus::Pass { max_relative_error } => {
                        println!("PASS {} ({max_relative_error:.2e} <= {:.1e})", f.path.display(), f.tolerance)
                    }
                    FileStatus::Fail { reason } => println!("FAIL {}: {reason}", f.path.display()),
                    FileStatus::Missing => println!("MISSING {}", f.path.display()),
                }
            }
            if report.files.is_empty() {
                println!("no CSV files under {}", golden.display());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Command::ListRecipes { show } => {
            if let Some(name) = show {
                return match sweep::recipe(&name) {
                    Ok(r) => {
                        print!("{}", r.text);
                        ExitCode::SUCCESS
                    }
                    Err(e) => exit_for(&e),
                };
            }
            for r in sweep::recipes() {
                println!("{:<6}  {}", r.name, r.description());
            }
            ExitCode::SUCCESS
        }
    }
}
