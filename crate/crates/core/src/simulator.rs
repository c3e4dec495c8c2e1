//! Semi-implicit time stepping of the three-field system.
//!
//! Each step solves `w` then `v` by backward Euler and then updates `u` with
//! implicit diffusion (coefficients frozen at the old state) and an explicit
//! chemotactic flux built on the new `v`.

use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{self, face_mobility, EnergyReport, FaceMobility};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kinetics::Kinetics;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl State {
    pub fn new(u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.len() != w.len() {
            return Err(Error::invalid("state", "u, v and w differ in length"));
        }
        let st = State { t: 0.0, u, v, w };
        st.validate(0.0)?;
        Ok(st)
    }

    pub fn validate(&self, nonneg_tol: f64) -> Result<()> {
        for (name, x) in [("u", &self.u), ("v", &self.v), ("w", &self.w)] {
            if x.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite(format!("initial {name}")));
            }
            if x.iter().any(|&a| a < -nonneg_tol) {
                return Err(Error::invalid(name, "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn sup_u(&self) -> f64 {
        diagnostics::sup_norm(&self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeControls {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub u_max: f64,
    pub growth_cap: f64,
    pub nonneg_tol: f64,
    /// Record every `stride` accepted steps.
    pub stride: u64,
    pub max_steps: u64,
    /// Exponent of the `lp_u` column.
    pub lp_p: f64,
}

impl Default for TimeControls {
    fn default() -> Self {
        TimeControls {
            t_end: 5.0,
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            cfl: 0.4,
            u_max: 1e8,
            growth_cap: 0.2,
            nonneg_tol: 1e-13,
            stride: 10,
            max_steps: 50_000_000,
            lp_p: 4.0,
        }
    }
}

impl TimeControls {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite"))
            }
        };
        pos("time.t_end", self.t_end)?;
        pos("time.dt_init", self.dt_init)?;
        pos("time.dt_min", self.dt_min)?;
        pos("time.dt_max", self.dt_max)?;
        pos("limits.u_max", self.u_max)?;
        pos("limits.growth_cap", self.growth_cap)?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::invalid("time.dt_init", "need dt_min <= dt_init <= dt_max"));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::invalid("time.cfl", "must lie in (0, 1)"));
        }
        if !(self.nonneg_tol >= 0.0) {
            return Err(Error::invalid("limits.nonneg_tol", "must be nonnegative"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("time.stride", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("limits.max_steps", "must be at least 1"));
        }
        if !(self.lp_p >= 1.0) {
            return Err(Error::invalid("output.lp_p", "must be at least 1"));
        }
        Ok(())
    }
}

/// Result of a trial step.
#[derive(Debug, Clone)]
pub enum Stepped {
    Ok(State),
    /// The new `u` dipped below `-nonneg_tol`.
    Negative { min: f64 },
}

/// One step from `state` using the mobility of `state` (see
/// [`face_mobility`]).
pub fn step_with(
    g: &RadialGrid,
    mob: &FaceMobility,
    state: &State,
    dt: f64,
    nonneg_tol: f64,
) -> Result<Stepped> {
    let n = g.cells();
    let bw: Vec<f64> = (0..n).map(|i| state.w[i] + dt * state.u[i]).collect();
    let w = g.shifted_helmholtz_solve(&bw, 1.0 + dt, dt)?;
    let bv: Vec<f64> = (0..n).map(|i| state.v[i] + dt * w[i]).collect();
    let v = g.shifted_helmholtz_solve(&bv, 1.0 + dt, dt)?;

    let gv = g.gradient_faces(&v);
    let flux: Vec<f64> = gv.iter().zip(&mob.s).map(|(a, s)| a * s).collect();
    let drift = g.divergence(&flux);
    let bu: Vec<f64> = (0..n).map(|i| state.u[i] - dt * drift[i]).collect();
    let u = g.diffusion_solve(&bu, &mob.d, 1.0, dt)?;

    if u.iter().chain(&v).chain(&w).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("step at t = {} with dt = {dt:e}", state.t)));
    }
    let min = u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if min < -nonneg_tol {
        return Ok(Stepped::Negative { min });
    }
    Ok(Stepped::Ok(State {
        t: state.t + dt,
        u,
        v,
        w,
    }))
}

pub fn step(g: &RadialGrid, kin: &Kinetics, state: &State, dt: f64, nonneg_tol: f64) -> Result<Stepped> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mob = face_mobility(kin, &state.u)?;
    step_with(g, &mob, state, dt, nonneg_tol)
}

/// Largest step allowed by the chemotactic transport out of each donor cell.
pub fn cfl_limit(g: &RadialGrid, mob: &FaceMobility, state: &State, cfl: f64) -> f64 {
    let gv = g.gradient_faces(&state.v);
    let mut rate = 0.0f64;
    for k in 1..g.cells() {
        let f = mob.s[k] * gv[k];
        if f == 0.0 {
            continue;
        }
        let donor = if f > 0.0 { k - 1 } else { k };
        let r = f.abs() * g.areas()[k] / (g.volumes()[donor] * state.u[donor].max(1e-12));
        rate = rate.max(r);
    }
    if rate > 0.0 {
        cfl / rate
    } else {
        f64::INFINITY
    }
}

/// `min(dt_max, dt_growth, CFL limit)`.
pub fn choose_dt(
    g: &RadialGrid,
    kin: &Kinetics,
    state: &State,
    controls: &TimeControls,
    dt_growth: f64,
) -> Result<f64> {
    let mob = face_mobility(kin, &state.u)?;
    Ok(controls.dt_max.min(dt_growth).min(cfl_limit(g, &mob, state, controls.cfl)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowupSuspected,
    DtFloor,
    Growing,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowupSuspected => "blowup_suspected",
            Outcome::DtFloor => "dt_floor",
            Outcome::Growing => "growing",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub t_final: f64,
    pub steps: u64,
    pub rejected: u64,
    pub min_dt: f64,
    pub sup_u_initial: f64,
    pub sup_u_final: f64,
    pub mass_initial: f64,
    pub max_mass_drift: f64,
    #[serde(rename = "F0")]
    pub energy_initial: f64,
    #[serde(rename = "F_final")]
    pub energy_final: f64,
    pub max_budget_residual: f64,
    pub skipped_faces: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub series: Vec<EnergyReport>,
    pub final_state: State,
}

impl RunResult {
    pub fn outcome(&self) -> Outcome {
        self.summary.outcome
    }
}

const GROW_AFTER: u32 = 5;
const GROW_FACTOR: f64 = 1.25;

/// Integrates from `initial` until `t_end`, a breach of `u_max` or of `dt_min`.
pub fn integrate(g: &RadialGrid, kin: &Kinetics, initial: State, controls: &TimeControls) -> Result<RunResult> {
    controls.validate()?;
    if initial.u.len() != g.cells() {
        return Err(Error::invalid("state", "length does not match the grid"));
    }
    initial.validate(controls.nonneg_tol)?;
    let clock = Instant::now();

    let mut state = initial;
    let mut mob = face_mobility(kin, &state.u)?;
    let d0 = diagnostics::dissipation(g, kin, &state)?;
    let first = EnergyReport::measure(g, kin, &state, 0, 0.0, controls.lp_p, d0.total, 0.0)?;
    let (f0, mass0, sup0) = (first.energy, first.mass, first.sup_u);
    let mut series = vec![first];

    let mut diss = d0.total;
    let mut skipped = d0.skipped;
    let mut budget = 0.0;
    let mut dt_try = controls.dt_init;
    let mut streak = 0u32;
    let (mut steps, mut rejected) = (0u64, 0u64);
    let mut min_dt = f64::INFINITY;
    let mut last_dt = 0.0;
    let mut recorded_at = 0u64;
    let mut outcome = None;

    while state.t < controls.t_end {
        if steps >= controls.max_steps {
            return Err(Error::Runtime(format!(
                "step budget of {} exhausted at t = {}",
                controls.max_steps, state.t
            )));
        }
        let limit = dt_try
            .min(controls.dt_max)
            .min(cfl_limit(g, &mob, &state, controls.cfl));
        if limit < controls.dt_min {
            outcome = Some(Outcome::DtFloor);
            break;
        }
        let remaining = controls.t_end - state.t;
        // avoid a sliver step at the end
        let dt = if remaining <= limit * (1.0 + 1e-9) { remaining } else { limit };

        let next = match step_with(g, &mob, &state, dt, controls.nonneg_tol) {
            Ok(Stepped::Ok(next)) => next,
            Ok(Stepped::Negative { min }) => {
                log::debug!("t = {}: rejected dt = {dt:e}, min u = {min:e}", state.t);
                rejected += 1;
                dt_try = dt * 0.5;
                streak = 0;
                continue;
            }
            Err(Error::NonFinite(what)) => {
                return Err(Error::Diverged {
                    detail: what,
                    last_state: Box::new(state),
                });
            }
            Err(e) => return Err(e),
        };
        let sup_prev = state.sup_u();
        let sup_next = next.sup_u();
        if sup_next > (1.0 + controls.growth_cap) * sup_prev && sup_next < controls.u_max {
            rejected += 1;
            dt_try = dt * 0.5;
            streak = 0;
            continue;
        }

        let new_mob = face_mobility(kin, &next.u)?;
        let d = diagnostics::dissipation(g, kin, &next)?;
        if !d.total.is_finite() {
            return Err(Error::Diverged {
                detail: "dissipation".into(),
                last_state: Box::new(state),
            });
        }
        budget += 0.5 * dt * (diss + d.total);
        diss = d.total;
        skipped = skipped.max(d.skipped);
        state = next;
        mob = new_mob;
        steps += 1;
        min_dt = min_dt.min(dt);
        last_dt = dt;

        let blown = sup_next >= controls.u_max;
        let done = state.t >= controls.t_end;
        if steps % controls.stride == 0 || blown || done {
            let mut r = EnergyReport::measure(g, kin, &state, steps, dt, controls.lp_p, diss, 0.0)?;
            r.budget_residual = (r.energy - f0 + budget).abs();
            series.push(r);
            recorded_at = steps;
        }
        if blown {
            outcome = Some(Outcome::BlowupSuspected);
            break;
        }
        streak += 1;
        if streak >= GROW_AFTER {
            dt_try = (dt_try * GROW_FACTOR).min(controls.dt_max);
            streak = 0;
        }
    }

    if recorded_at != steps || series.len() == 1 && steps > 0 {
        let mut r = EnergyReport::measure(g, kin, &state, steps, last_dt, controls.lp_p, diss, 0.0)?;
        r.budget_residual = (r.energy - f0 + budget).abs();
        series.push(r);
    }
    let sup_final = state.sup_u();
    let outcome = outcome.unwrap_or(if sup_final >= 10.0 * sup0 {
        Outcome::Growing
    } else {
        Outcome::Completed
    });
    let last = series.last().expect("series holds the initial record");
    let summary = RunSummary {
        outcome,
        t_final: state.t,
        steps,
        rejected,
        min_dt: if min_dt.is_finite() { min_dt } else { 0.0 },
        sup_u_initial: sup0,
        sup_u_final: sup_final,
        mass_initial: mass0,
        max_mass_drift: series
            .iter()
            .map(|r| (r.mass - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max),
        energy_initial: f0,
        energy_final: last.energy,
        max_budget_residual: series.iter().map(|r| r.budget_residual).fold(0.0, f64::max),
        skipped_faces: skipped,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        summary,
        series,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(3, 1.0, 64).unwrap()
    }

    fn bump(g: &RadialGrid) -> State {
        let u = g.sample(|r| 1.0 + 2.0 * (-20.0 * r * r).exp());
        let v = g.helmholtz_solve(&u).unwrap();
        let w = v.clone();
        State::new(u, v, w).unwrap()
    }

    fn unwrap(s: Stepped) -> State {
        match s {
            Stepped::Ok(s) => s,
            Stepped::Negative { min } => panic!("negative step {min}"),
        }
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = grid();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let c = 1.7;
        let st = State::new(vec![c; 64], vec![c; 64], vec![c; 64]).unwrap();
        let next = unwrap(step(&g, &kin, &st, 0.05, 1e-13).unwrap());
        for x in next.u.iter().chain(&next.v).chain(&next.w) {
            assert!((x - c).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_diffusion_relaxes_and_conserves() {
        // negligible sensitivity leaves the heat equation for u
        let kin = Kinetics::prototype(0.0, 1.0, 1.0, 1e-30).unwrap();
        let g = grid();
        let mut st = bump(&g);
        let m0 = g.integrate(&st.u);
        let osc0 = st.sup_u() - st.u.iter().cloned().fold(f64::INFINITY, f64::min);
        for _ in 0..20 {
            st = unwrap(step(&g, &kin, &st, 0.01, 1e-13).unwrap());
        }
        let osc = st.sup_u() - st.u.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(osc < 0.5 * osc0);
        assert!((g.integrate(&st.u) - m0).abs() <= 1e-13 * m0);
    }

    #[test]
    fn step_doubling_error_is_quadratic_per_step() {
        let g = grid();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let st = bump(&g);
        let diff = |dt: f64| {
            let one = unwrap(step(&g, &kin, &st, dt, 1e-13).unwrap());
            let half = unwrap(step(&g, &kin, &st, dt / 2.0, 1e-13).unwrap());
            let two = unwrap(step(&g, &kin, &half, dt / 2.0, 1e-13).unwrap());
            one.u.iter().zip(&two.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (diff(2e-3), diff(1e-3));
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "local order {order}");
    }

    #[test]
    fn dt_limit_scales_with_gradient() {
        let g = grid();
        let kin = Kinetics::prototype(0.0, 1.0, 1.0, 1.0).unwrap();
        let u = vec![1.0; 64];
        let flat = State::new(u.clone(), vec![1.0; 64], vec![1.0; 64]).unwrap();
        let ctl = TimeControls::default();
        assert_eq!(choose_dt(&g, &kin, &flat, &ctl, 1.0).unwrap(), ctl.dt_max);
        let v1 = g.sample(|r| 1.0 + 5.0 * r * r);
        let v2 = g.sample(|r| 1.0 + 10.0 * r * r);
        let s1 = State::new(u.clone(), v1, vec![1.0; 64]).unwrap();
        let s2 = State::new(u, v2, vec![1.0; 64]).unwrap();
        let mob = face_mobility(&kin, &s1.u).unwrap();
        let (a, b) = (cfl_limit(&g, &mob, &s1, 0.4), cfl_limit(&g, &mob, &s2, 0.4));
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_run_completes_with_identical_records() {
        let g = grid();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let st = State::new(vec![0.8; 64], vec![0.8; 64], vec![0.8; 64]).unwrap();
        let ctl = TimeControls {
            t_end: 0.5,
            ..TimeControls::default()
        };
        let res = integrate(&g, &kin, st, &ctl).unwrap();
        assert_eq!(res.outcome(), Outcome::Completed);
        let f0 = res.series[0].energy;
        for r in &res.series {
            assert!((r.energy - f0).abs() <= 1e-12 * f0.abs());
            assert!(r.dissipation <= 1e-12);
            assert!(r.budget_residual <= 1e-12);
        }
        assert!((res.final_state.t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bump_run_conserves_mass_and_dissipates() {
        let g = grid();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let ctl = TimeControls {
            t_end: 0.2,
            stride: 5,
            ..TimeControls::default()
        };
        let res = integrate(&g, &kin, bump(&g), &ctl).unwrap();
        assert!(res.summary.max_mass_drift < 1e-12);
        for pair in res.series.windows(2) {
            assert!(pair[1].energy <= pair[0].energy + 1e-12);
        }
        assert!(res.series.last().unwrap().step == res.summary.steps);
    }

    #[test]
    fn invalid_controls_are_rejected() {
        let ctl = TimeControls {
            dt_init: 1.0,
            ..TimeControls::default()
        };
        assert!(ctl.validate().is_err());
        let ctl = TimeControls {
            cfl: 1.5,
            ..TimeControls::default()
        };
        assert!(ctl.validate().is_err());
    }
}
