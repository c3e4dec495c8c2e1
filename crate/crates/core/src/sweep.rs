//! Parallel parameter sweeps with a resumable `sweep.csv`.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SweepSpec};
use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};
use crate::runner;

pub const SWEEP_HEADER: &str = "run_id,n,alpha,beta,eta,m,outcome,t_final,sup_u_final,F0,F_final,min_dt";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub planned: usize,
    pub skipped: usize,
    pub executed: usize,
    pub failed: usize,
}

/// Run ids already present in a sweep file.
pub fn existing_ids(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .filter(|id| !id.is_empty())
        .map(str::to_string)
        .collect())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn row(cfg: &RunConfig, id: &str, outcome: &str, nums: [f64; 5]) -> String {
    let mut r = format!(
        "{id},{},{},{},{},{},{outcome}",
        cfg.model.n,
        opt(cfg.model.alpha),
        opt(cfg.model.beta),
        fmt_f64(cfg.eta()),
        fmt_f64(cfg.init.m)
    );
    for x in nums {
        r.push(',');
        r.push_str(&fmt_f64(x));
    }
    r.push('\n');
    r
}

/// Executes every run of the product not yet recorded in
/// `<output.dir>/sweep.csv`. Each run writes its artifacts to
/// `<output.dir>/<run_id>/`.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let root = spec.base.output.dir.clone();
    std::fs::create_dir_all(&root)?;
    let csv = root.join("sweep.csv");
    let done = existing_ids(&csv)?;
    let fresh = !csv.exists() || std::fs::metadata(&csv)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(&csv)?;
    if fresh {
        writeln!(file, "{SWEEP_HEADER}")?;
    }

    let configs = spec.expand()?;
    let mut report = SweepReport {
        planned: configs.len(),
        ..SweepReport::default()
    };
    log::info!("sweep: {} runs planned", configs.len());
    let mut seen = HashSet::new();
    let todo: Vec<(String, RunConfig)> = configs
        .into_iter()
        .filter_map(|mut cfg| {
            let id = cfg.run_id();
            if done.contains(&id) || !seen.insert(id.clone()) {
                return None;
            }
            cfg.output.dir = root.join(&id);
            Some((id, cfg))
        })
        .collect();
    report.skipped = report.planned - todo.len();

    let writer = Mutex::new(file);
    let failures = Mutex::new(0usize);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    let io_error: Mutex<Option<Error>> = Mutex::new(None);
    pool.install(|| {
        todo.par_iter().for_each(|(id, cfg)| {
            let line = match runner::run(cfg).and_then(|res| {
                runner::write_run(&cfg.output.dir, cfg, &res)?;
                Ok(res)
            }) {
                Ok(res) => {
                    let s = &res.summary;
                    row(
                        cfg,
                        id,
                        s.outcome.as_str(),
                        [s.t_final, s.sup_u_final, s.energy_initial, s.energy_final, s.min_dt],
                    )
                }
                Err(e) => {
                    *failures.lock().unwrap() += 1;
                    let _ = std::fs::create_dir_all(&cfg.output.dir);
                    if let Error::Diverged { last_state, .. } = &e {
                        let _ = runner::write_dump(&cfg.output.dir, cfg, last_state);
                    }
                    let _ = std::fs::write(cfg.output.dir.join("error.txt"), format!("{e}\n"));
                    row(cfg, id, "error", [f64::NAN; 5])
                }
            };
            let mut w = writer.lock().unwrap();
            if let Err(e) = w.write_all(line.as_bytes()).and_then(|_| w.flush()) {
                io_error.lock().unwrap().get_or_insert(Error::Io(e));
            }
        });
    });
    if let Some(e) = io_error.into_inner().unwrap() {
        return Err(e);
    }
    report.failed = failures.into_inner().unwrap();
    report.executed = todo.len();
    Ok(report)
}
