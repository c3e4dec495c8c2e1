//! Runs a configuration end to end and persists its artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{self, fmt_f64};
use crate::error::Result;
use crate::grid::RadialGrid;
use crate::initdata::Triple;
use crate::plots;
use crate::simulator::{self, RunResult, State};
use crate::stationary::{self, StationaryEnergy, StationarySolution};

/// Builds grid, kinetics and initial data, then integrates.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let kin = cfg.kinetics()?;
    let init = cfg.initial(&g)?;
    let state = State::new(init.u, init.v, init.w)?;
    simulator::integrate(&g, &kin, state, &cfg.time)
}

pub fn profiles_csv(g: &RadialGrid, cols: &[(&str, &[f64])]) -> String {
    let mut out = String::from("r");
    for (name, _) in cols {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, r) in g.centers().iter().enumerate() {
        out.push_str(&fmt_f64(*r));
        for (_, x) in cols {
            out.push(',');
            out.push_str(&fmt_f64(x[i]));
        }
        out.push('\n');
    }
    out
}

/// Writes `timeseries.csv`, `summary.json`, `config.json`, `final_state.csv`
/// and the plot files into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, res: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("timeseries.csv"), diagnostics::timeseries_csv(&res.series))?;
    let summary = serde_json::json!({
        "run_id": cfg.run_id(),
        "summary": res.summary,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&cfg.resolved_json())? + "\n",
    )?;
    let g = cfg.grid()?;
    let st = &res.final_state;
    std::fs::write(
        dir.join("final_state.csv"),
        profiles_csv(&g, &[("u", &st.u), ("v", &st.v), ("w", &st.w)]),
    )?;
    plots::emit_plots(dir, cfg.output.emit_svg)?;
    Ok(())
}

/// Dumps the last valid state of a diverged run.
pub fn write_dump(dir: &Path, cfg: &RunConfig, state: &State) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let g = cfg.grid()?;
    let mut body = format!("# t = {}\n", fmt_f64(state.t));
    body.push_str(&profiles_csv(&g, &[("u", &state.u), ("v", &state.v), ("w", &state.w)]));
    std::fs::write(dir.join("last_valid_state.csv"), body)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyRecord {
    pub run_id: String,
    pub n: usize,
    #[serde(rename = "F0")]
    pub energy: f64,
    pub parts: diagnostics::EnergyParts,
    pub mass: f64,
    pub sup_u: f64,
}

pub fn initial_energy(cfg: &RunConfig) -> Result<(Triple, EnergyRecord)> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let kin = cfg.kinetics()?;
    let t = cfg.initial(&g)?;
    let parts = diagnostics::energy_parts(&g, &kin, &t.u, &t.v, &t.w)?;
    let rec = EnergyRecord {
        run_id: cfg.run_id(),
        n: cfg.model.n,
        energy: diagnostics::energy_initial(&g, &kin, &t.u, &t.v, &t.w)?,
        parts,
        mass: g.integrate(&t.u),
        sup_u: diagnostics::sup_norm(&t.u),
    };
    Ok((t, rec))
}

/// Writes `u0.csv`, `v0.csv`, `w0.csv` and `manifest.json`.
pub fn write_initdata(dir: &Path, cfg: &RunConfig) -> Result<EnergyRecord> {
    let (t, rec) = initial_energy(cfg)?;
    let g = cfg.grid()?;
    std::fs::create_dir_all(dir)?;
    for (name, x) in [("u0", &t.u), ("v0", &t.v), ("w0", &t.w)] {
        std::fs::write(dir.join(format!("{name}.csv")), profiles_csv(&g, &[("value", x)]))?;
    }
    let manifest = serde_json::json!({
        "config": cfg.resolved_json(),
        "energy": rec,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(rec)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryRecord {
    pub m: f64,
    #[serde(rename = "L")]
    pub lagrange: f64,
    #[serde(rename = "F")]
    pub energy: f64,
    pub energy_check: StationaryEnergy,
    pub residuals: stationary::Residuals,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_stationary(cfg: &RunConfig) -> Result<(StationarySolution, StationaryRecord)> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let kin = cfg.kinetics()?;
    let m = cfg.init.m;
    let guess = stationary::bump_guess(&g, m, cfg.stationary.guess);
    let sol = stationary::solve_stationary(&g, &kin, m, &guess, &cfg.stationary.options)?;
    let e = stationary::stationary_energy(&g, &kin, &sol)?;
    let rec = StationaryRecord {
        m: sol.mass,
        lagrange: sol.lagrange,
        energy: e.full,
        energy_check: e,
        residuals: sol.residuals,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    Ok((sol, rec))
}

pub fn write_stationary(dir: &Path, cfg: &RunConfig) -> Result<StationaryRecord> {
    let (sol, rec) = solve_stationary(cfg)?;
    let g = cfg.grid()?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("stationary.csv"),
        profiles_csv(&g, &[("u", &sol.u), ("v", &sol.v), ("w", &sol.w)]),
    )?;
    std::fs::write(dir.join("stationary.json"), serde_json::to_string_pretty(&rec)? + "\n")?;
    Ok(rec)
}

/// `key=value` summary used by the CLI.
pub fn describe(res: &RunResult) -> String {
    let s = &res.summary;
    let mut out = String::new();
    let _ = write!(
        out,
        "outcome={} t_final={} steps={} rejected={} sup_u={:e} F0={} F_final={} max_budget_residual={:e}",
        s.outcome.as_str(),
        s.t_final,
        s.steps,
        s.rejected,
        s.sup_u_final,
        s.energy_initial,
        s.energy_final,
        s.max_budget_residual
    );
    out
}
