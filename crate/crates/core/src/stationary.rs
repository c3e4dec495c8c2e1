//! Radial stationary states with prescribed mass.
//!
//! The first equation reduces to `f(u) = v + L`, so the problem becomes a
//! fixed point in `v`: `u = f^{-1}(v + L)`, `(-Δ+1)w = u`, `(-Δ+1)v = w`,
//! with `L` fixed by the mass.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kinetics::Kinetics;
use crate::simulator::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `λ` in `v <- (1-λ) v + λ v_new`.
    pub damping: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            tol: 1e-10,
            max_iter: 20_000,
            damping: 0.5,
        }
    }
}

impl StationaryOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("stationary.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("stationary.max_iter", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("stationary.damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Sup-norm residuals of the three stationary equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `f(u) - v - L` over cells with `u > 0`.
    pub first: f64,
    /// `(-Δ+1)v - w`, divided by `max(1, sup|w|)`.
    pub second: f64,
    /// `(-Δ+1)w - u`, divided by `max(1, sup|u|)`.
    pub third: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.first.max(self.second).max(self.third)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    #[serde(rename = "L")]
    pub lagrange: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
}

impl StationarySolution {
    pub fn to_state(&self) -> State {
        State {
            t: 0.0,
            u: self.u.clone(),
            v: self.v.clone(),
            w: self.w.clone(),
        }
    }

    pub fn is_constant(&self, rel: f64) -> bool {
        let (lo, hi) = self
            .u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo <= rel * hi.abs().max(1e-300)
    }
}

fn u_of(kin: &Kinetics, v: &[f64], l: f64) -> Result<Vec<f64>> {
    v.iter().map(|&x| kin.f_inverse(x + l)).collect()
}

/// `L` with `∫ f^{-1}(v + L) = m`, by safeguarded Newton.
pub fn solve_lagrange(g: &RadialGrid, kin: &Kinetics, v: &[f64], m: f64) -> Result<f64> {
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmean = g.integrate(v) / g.domain_volume();
    let cap = kin.f_max()? - vmax;
    let mass_at = |l: f64| -> Result<(f64, f64)> {
        let mut mass = 0.0;
        let mut slope = 0.0;
        for (i, &x) in v.iter().enumerate() {
            let s = kin.f_inverse(x + l)?;
            let vol = g.volumes()[i];
            mass += vol * s;
            if s > 0.0 {
                // du/dL = 1/f'(u) = u / q(u)
                slope += vol * s / kin.q(s)?;
            }
        }
        Ok((mass, slope))
    };

    let c = m / g.domain_volume();
    let mut l = (kin.eval_f(c)? - vmean).min(cap);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut width = 1.0;
    // bracket
    loop {
        let (mass, _) = mass_at(l)?;
        if mass < m {
            lo = l;
            if hi.is_finite() {
                break;
            }
            if l >= cap {
                return Err(Error::Runtime(format!(
                    "mass {m} is not reachable below the top of the kinetics table"
                )));
            }
            l = (l + width).min(cap);
        } else {
            hi = l;
            if lo.is_finite() {
                break;
            }
            l -= width;
        }
        width *= 2.0;
        if width > 1e300 {
            return Err(Error::Runtime("could not bracket the mass constraint".into()));
        }
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (mass, slope) = mass_at(l)?;
        let r = mass - m;
        if r.abs() <= 1e-15 * m {
            return Ok(l);
        }
        if r < 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        let mut next = if slope > 0.0 { l - r / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == l || hi - lo <= 4.0 * f64::EPSILON * l.abs().max(1.0) {
            return Ok(next);
        }
        l = next;
    }
    Ok(l)
}

/// Residuals of a candidate triple; `L` is re-centred so the first entry is
/// the half-spread of `f(u) - v`.
pub fn residuals(g: &RadialGrid, kin: &Kinetics, u: &[f64], v: &[f64], w: &[f64]) -> Result<(Residuals, f64)> {
    let helm = |x: &[f64]| -> Vec<f64> {
        let lap = g.laplacian(x);
        x.iter().zip(&lap).map(|(a, l)| a - l).collect()
    };
    let hv = helm(v);
    let hw = helm(w);
    let scaled = |lhs: &[f64], rhs: &[f64]| {
        let scale = rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        lhs.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    };
    let second = scaled(&hv, w);
    let third = scaled(&hw, u);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&s, &x) in u.iter().zip(v) {
        if s > 0.0 {
            let d = kin.eval_f(s)? - x;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    let (first, l) = if lo.is_finite() {
        (0.5 * (hi - lo), 0.5 * (hi + lo))
    } else {
        (0.0, f64::NAN)
    };
    Ok((Residuals { first, second, third }, l))
}

/// Damped fixed-point iteration from the guess `v`.
pub fn solve_stationary(
    g: &RadialGrid,
    kin: &Kinetics,
    m: f64,
    guess: &[f64],
    opts: &StationaryOptions,
) -> Result<StationarySolution> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("init.m", "mass must be positive"));
    }
    opts.validate()?;
    if guess.len() != g.cells() {
        return Err(Error::invalid("guess", "length does not match the grid"));
    }
    let mut v = guess.to_vec();
    let mut lambda = opts.damping;
    let mut prev = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = None;

    for it in 1..=opts.max_iter {
        iterations = it;
        let l = solve_lagrange(g, kin, &v, m)?;
        let u = u_of(kin, &v, l)?;
        let w = g.helmholtz_solve(&u)?;
        let v_new = g.helmholtz_solve(&w)?;
        let diff = v_new
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(Error::NonFinite("stationary iterate".into()));
        }
        if best.as_ref().map_or(true, |(d, _)| diff < *d) {
            best = Some((diff, v.clone()));
        }
        if diff <= opts.tol {
            converged = true;
            last = Some((u, w, v_new));
            break;
        }
        if diff > prev {
            lambda = (lambda * 0.5).max(opts.damping / 64.0);
        }
        prev = diff;
        for (a, b) in v.iter_mut().zip(&v_new) {
            *a += lambda * (b - *a);
        }
    }

    let (u, w, v) = match last {
        Some(t) => t,
        None => {
            let (_, v) = best.expect("at least one iteration ran");
            let l = solve_lagrange(g, kin, &v, m)?;
            let u = u_of(kin, &v, l)?;
            let w = g.helmholtz_solve(&u)?;
            let v = g.helmholtz_solve(&w)?;
            (u, w, v)
        }
    };
    let (res, lagrange) = residuals(g, kin, &u, &v, &w)?;
    Ok(StationarySolution {
        mass: g.integrate(&u),
        u,
        v,
        w,
        lagrange,
        residuals: res,
        iterations,
        converged,
    })
}

/// Constant profile plus a centred bump of relative amplitude `amp`.
pub fn bump_guess(g: &RadialGrid, m: f64, amp: f64) -> Vec<f64> {
    let c = m / g.domain_volume();
    let width = 0.25 * g.radius();
    g.sample(|r| c * (1.0 + amp * (-(r / width).powi(2)).exp()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StationaryEnergy {
    /// `∫G(u) - ½∫uv`.
    pub reduced: f64,
    /// The full energy of the triple.
    pub full: f64,
    pub agree: bool,
}

pub const ENERGY_AGREEMENT: f64 = 1e-8;

pub fn stationary_energy(g: &RadialGrid, kin: &Kinetics, sol: &StationarySolution) -> Result<StationaryEnergy> {
    let gu = sol
        .u
        .iter()
        .map(|&s| kin.eval_g(s.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let uv: Vec<f64> = sol.u.iter().zip(&sol.v).map(|(a, b)| a * b).collect();
    let reduced = g.integrate(&gu) - 0.5 * g.integrate(&uv);
    let full = diagnostics::energy(g, kin, &sol.to_state())?;
    let agree = (reduced - full).abs() <= ENERGY_AGREEMENT * full.abs().max(1.0);
    Ok(StationaryEnergy { reduced, full, agree })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub m: f64,
    pub min_energy: f64,
    pub attempts: usize,
    pub converged: usize,
    pub nonconstant_found: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundScan {
    pub rows: Vec<ScanRow>,
    /// Least-squares fit `min F ≈ c2 m² + c0`.
    pub c2: f64,
    pub c0: f64,
    pub fit_rms: f64,
    /// Envelope constant `C` with 10% inflation.
    pub envelope: f64,
    pub above_envelope: bool,
}

/// Minimum stationary energy per mass over bump guesses of the given
/// amplitudes.
pub fn lower_bound_scan(
    g: &RadialGrid,
    kin: &Kinetics,
    masses: &[f64],
    amplitudes: &[f64],
    opts: &StationaryOptions,
) -> Result<LowerBoundScan> {
    if masses.is_empty() || amplitudes.is_empty() {
        return Err(Error::invalid("masses", "need at least one mass and one guess"));
    }
    let jobs: Vec<(usize, f64)> = masses
        .iter()
        .enumerate()
        .flat_map(|(i, _)| amplitudes.iter().map(move |&a| (i, a)))
        .collect();
    let solved: Vec<(usize, Result<(StationarySolution, f64)>)> = jobs
        .par_iter()
        .map(|&(i, a)| {
            let m = masses[i];
            let r = solve_stationary(g, kin, m, &bump_guess(g, m, a), opts)
                .and_then(|s| stationary_energy(g, kin, &s).map(|e| (s, e.full)));
            (i, r)
        })
        .collect();

    let mut rows = Vec::with_capacity(masses.len());
    for (i, &m) in masses.iter().enumerate() {
        let mut row = ScanRow {
            m,
            min_energy: f64::INFINITY,
            attempts: 0,
            converged: 0,
            nonconstant_found: false,
        };
        for (_, r) in solved.iter().filter(|(j, _)| *j == i) {
            row.attempts += 1;
            match r {
                Ok((sol, e)) if sol.converged => {
                    row.converged += 1;
                    row.min_energy = row.min_energy.min(*e);
                    row.nonconstant_found |= !sol.is_constant(1e-6);
                }
                Ok(_) => {}
                Err(e) => log::debug!("scan m = {m}: {e}"),
            }
        }
        rows.push(row);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.min_energy.is_finite())
        .map(|r| (r.m * r.m, r.min_energy))
        .collect();
    if pts.is_empty() {
        return Err(Error::Runtime("no stationary solve converged".into()));
    }
    let (c2, c0) = if pts.len() == 1 {
        (0.0, pts[0].1)
    } else {
        let k = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = k * sxx - sx * sx;
        if det.abs() < 1e-300 {
            (0.0, sy / k)
        } else {
            ((k * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
        }
    };
    let fit_rms = (pts.iter().map(|(x, y)| (y - c2 * x - c0).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    let envelope = 1.1 * c2.abs().max(c0.abs());
    let above_envelope = pts.iter().all(|(x, y)| *y >= -envelope * x - envelope);
    Ok(LowerBoundScan {
        rows,
        c2,
        c0,
        fit_rms,
        envelope,
        above_envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_guess_is_a_fixed_point() {
        let g = RadialGrid::new(3, 1.0, 64).unwrap();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let m = 2.0;
        let c = m / g.domain_volume();
        let sol = solve_stationary(&g, &kin, m, &vec![c; 64], &StationaryOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 2);
        assert!(sol.residuals.max() <= 1e-12);
        for x in &sol.u {
            assert_relative_eq!(*x, c, max_relative = 1e-12);
        }
        let e = stationary_energy(&g, &kin, &sol).unwrap();
        let expect = g.domain_volume() * (kin.eval_g(c).unwrap() - 0.5 * c * c);
        assert_relative_eq!(e.reduced, expect, max_relative = 1e-10);
        assert_relative_eq!(e.full, expect, max_relative = 1e-10);
    }

    #[test]
    fn small_perturbation_decays_in_subcritical_regime() {
        let g = RadialGrid::new(2, 1.0, 64).unwrap();
        let kin = Kinetics::prototype(0.5, 0.5, 1.0, 1.0).unwrap();
        let m = 1.0;
        let guess = bump_guess(&g, m, 0.01);
        let sol = solve_stationary(&g, &kin, m, &guess, &StationaryOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.is_constant(1e-8));
        assert_relative_eq!(sol.mass, m, max_relative = 1e-12);
    }

    #[test]
    fn lagrange_hits_the_mass() {
        let g = RadialGrid::new(4, 1.0, 40).unwrap();
        let kin = Kinetics::prototype(1.2, 0.3, 1.0, 1.0).unwrap();
        let v = g.sample(|r| 3.0 * (1.0 - r * r).powi(2));
        for m in [0.01, 1.0, 100.0] {
            let l = solve_lagrange(&g, &kin, &v, m).unwrap();
            let u = u_of(&kin, &v, l).unwrap();
            assert_relative_eq!(g.integrate(&u), m, max_relative = 1e-12);
        }
    }

    #[test]
    fn supercritical_mass_has_a_concentrated_state() {
        // f(u) = ln(u/s0): the classical exponential nonlinearity
        let g = RadialGrid::new(2, 4.0, 128).unwrap();
        let kin = Kinetics::prototype(0.5, 0.5, 1.0, 1.0).unwrap();
        let m = 5.0 * g.domain_volume();
        let opts = StationaryOptions {
            tol: 1e-12,
            ..StationaryOptions::default()
        };
        let sol = solve_stationary(&g, &kin, m, &bump_guess(&g, m, 2.0), &opts).unwrap();
        assert!(sol.converged);
        assert!(!sol.is_constant(1e-3));
        assert!(sol.residuals.max() < 1e-10);
        let e = stationary_energy(&g, &kin, &sol).unwrap();
        assert!(e.agree, "{e:?}");
    }

    #[test]
    fn scan_of_constant_branch() {
        let g = RadialGrid::new(3, 1.0, 32).unwrap();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let masses = [0.5, 1.0, 2.0, 4.0];
        let scan = lower_bound_scan(&g, &kin, &masses, &[0.0], &StationaryOptions::default()).unwrap();
        let vol = g.domain_volume();
        for row in &scan.rows {
            let c = row.m / vol;
            let expect = vol * (kin.eval_g(c).unwrap() - 0.5 * c * c);
            assert_relative_eq!(row.min_energy, expect, max_relative = 1e-9);
        }
        assert!(scan.above_envelope);
    }
}
