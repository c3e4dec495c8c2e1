use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemlab::config::{self, RunConfig};
use chemlab::verify::Check;
use chemlab::{runner, sweep, Error};

#[derive(Parser)]
#[command(name = "chemlab", version, about = "Radial chemotaxis laboratory")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one configuration and write its artifacts to output.dir.
    Simulate {
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a sweep specification not already in sweep.csv.
    Sweep {
        spec: PathBuf,
        /// Overrides both sweep.workers and CHEMLAB_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the initial energy and its parts as JSON.
    Energy { config: PathBuf },
    /// Write u0/v0/w0 profiles and a manifest.
    Initdata {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for a radial stationary state of mass init.m.
    Stationary {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity and condition batteries; one JSON record per line.
    Verify {
        /// hardy, pohozaev, weighted or conditions (default: all).
        #[arg(long)]
        check: Option<String>,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> chemlab::Result<RunConfig> {
    let mut cfg = config::load_config(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    Ok(cfg)
}

fn json_line<T: serde::Serialize>(x: &T) -> chemlab::Result<()> {
    println!("{}", serde_json::to_string(x)?);
    Ok(())
}

fn exec(cmd: Cmd) -> chemlab::Result<bool> {
    match cmd {
        Cmd::Simulate { config, out } => {
            let cfg = load(&config, out)?;
            match runner::run(&cfg) {
                Ok(res) => {
                    runner::write_run(&cfg.output.dir, &cfg, &res)?;
                    println!("run_id={} {}", cfg.run_id(), runner::describe(&res));
                    Ok(true)
                }
                Err(Error::Diverged { detail, last_state }) => {
                    runner::write_dump(&cfg.output.dir, &cfg, &last_state)?;
                    Err(Error::Runtime(format!(
                        "diverged: {detail}; last valid state written to {}",
                        cfg.output.dir.join("last_valid_state.csv").display()
                    )))
                }
                Err(e) => Err(e),
            }
        }
        Cmd::Sweep { spec, workers } => {
            let mut spec = config::load_sweep(&spec)?;
            if let Some(w) = workers {
                if w == 0 {
                    return Err(Error::Config {
                        key: "workers".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                spec.workers = w;
            }
            eprintln!("sweep: {} runs on {} workers", spec.size(), spec.workers);
            let rep = sweep::sweep(&spec)?;
            json_line(&rep)?;
            Ok(rep.failed == 0)
        }
        Cmd::Energy { config } => {
            let cfg = load(&config, None)?;
            let (_, rec) = runner::initial_energy(&cfg)?;
            json_line(&rec)?;
            Ok(true)
        }
        Cmd::Initdata { config, out } => {
            let cfg = load(&config, out)?;
            let rec = runner::write_initdata(&cfg.output.dir, &cfg)?;
            json_line(&rec)?;
            Ok(true)
        }
        Cmd::Stationary { config, out } => {
            let cfg = load(&config, out)?;
            let rec = runner::write_stationary(&cfg.output.dir, &cfg)?;
            json_line(&rec)?;
            Ok(rec.converged)
        }
        Cmd::Verify { check } => {
            let checks = match check {
                Some(c) => vec![Check::parse(&c)?],
                None => Check::ALL.to_vec(),
            };
            let mut all = true;
            for c in checks {
                for rec in c.run()? {
                    all &= rec.pass;
                    json_line(&rec)?;
                }
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match exec(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        // a check or run finished but did not meet its target
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
