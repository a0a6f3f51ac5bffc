use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reflex::config::{ExperimentConfig, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use reflex::io::{write_json, write_outputs};
use reflex::replay::replay_text;
use reflex::validate::validate;
use reflex::{run, RayonExecutor, RunError};

#[derive(Parser)]
#[command(
    name = "reflex",
    version,
    about = "Reflected small-noise diffusions: simulation, rate functions and LDP probes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an experiment and write result.json and results.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config and REFLEX_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        workers: Workers,
    },
    /// Re-run a result document and compare it bit for bit.
    Replay {
        /// A result.json written by `run`.
        document: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
}

#[derive(Args)]
struct Workers {
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl Workers {
    fn executor(&self) -> Result<RayonExecutor, RunError> {
        RayonExecutor::new(self.workers)
            .map_err(|e| RunError::io("starting worker pool", std::io::Error::other(e.to_string())))
    }
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::io(path.display().to_string(), e))
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    ExperimentConfig::from_toml(&read(path)?)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize to JSON"));
}

fn fail(err: &RunError, dir: Option<&Path>) -> ExitCode {
    eprintln!("error: {err}");
    if let Some(dir) = dir {
        if fs::create_dir_all(dir).is_ok() {
            let _ = write_json(&dir.join("error.json"), &err.document());
        }
    } else {
        print_json(&err.document());
    }
    ExitCode::from(err.exit_code() as u8)
}

fn fallback_dir(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                let report = validate(&cfg);
                print_json(&report);
                if report.ok {
                    ExitCode::SUCCESS
                } else {
                    let err = RunError::Invalid(Box::new(report));
                    eprintln!("error: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
            }
            Err(e) => fail(&e, None),
        },
        Command::Run { config, out, seed, workers } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e, Some(&fallback_dir(out.as_deref()))),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = cfg.output_dir(out.as_deref());
            let result = workers.executor().and_then(|exec| run(&cfg, &exec)).and_then(|doc| write_outputs(&dir, &doc));
            match result {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, Some(&dir)),
            }
        }
        Command::Replay { document, workers } => {
            let report = read(&document).and_then(|text| workers.executor().and_then(|exec| replay_text(&text, &exec)));
            match report {
                Ok(r) if r.identical => {
                    print_json(&r);
                    ExitCode::SUCCESS
                }
                Ok(r) => fail(&RunError::Diverged(r.divergences), None),
                Err(e) => fail(&e, None),
            }
        }
    }
}
