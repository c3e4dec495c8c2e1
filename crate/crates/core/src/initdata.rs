//! Initial triples: constants, Gaussian bumps, and the two concentrating
//! families whose energy is unbounded below as `η -> 0`.

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::grid::{sphere_area, RadialGrid};
use crate::kinetics::Kinetics;
use crate::quad::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Constant,
    Gaussian,
    Highdim,
    Critical4,
}

impl Family {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(Family::Constant),
            "gaussian" => Some(Family::Gaussian),
            "highdim" => Some(Family::Highdim),
            "critical4" => Some(Family::Critical4),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Gaussian => "gaussian",
            Family::Highdim => "highdim",
            Family::Critical4 => "critical4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitFamilyParams {
    pub family: Family,
    pub m: f64,
    /// Mass carried by the bump; `None` picks a default inside the admissible interval.
    pub eps_mass: Option<f64>,
    /// Concentration scale; `None` means `R/16`.
    pub eta: Option<f64>,
    /// `None` picks the midpoint of the admissible interval.
    pub rho: Option<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub n_psi: u32,
    pub theta_log: f64,
    /// Gaussian width; `None` means `0.2 R`.
    pub width: Option<f64>,
}

impl InitFamilyParams {
    pub fn new(family: Family, m: f64) -> Self {
        InitFamilyParams {
            family,
            m,
            eps_mass: None,
            eta: None,
            rho: None,
            gamma: 1.0,
            kappa: 0.25,
            n_psi: 3,
            theta_log: 0.5,
            width: None,
        }
    }

    pub fn eta_or_default(&self, radius: f64) -> f64 {
        self.eta.unwrap_or(radius / 16.0)
    }

    /// Checks every constraint that does not need a mesh.
    pub fn validate(&self, n: usize, radius: f64) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::invalid("init.m", "must be positive"));
        }
        let omega = crate::grid::ball_volume(n, radius);
        if self.family == Family::Highdim || self.family == Family::Critical4 {
            resolve_eps(self.m, omega, self.eps_mass)?;
        }
        match self.family {
            Family::Constant => {}
            Family::Gaussian => {
                if let Some(wd) = self.width {
                    if !(wd > 0.0 && wd.is_finite()) {
                        return Err(Error::invalid("init.width", "must be positive"));
                    }
                }
            }
            Family::Highdim => {
                let eta = self.eta_or_default(radius);
                if !(eta > 0.0 && eta < radius) {
                    return Err(Error::invalid("init.eta", "must lie in (0, R)"));
                }
                match self.rho {
                    None => {
                        choose_varrho(n, self.gamma)?;
                    }
                    Some(rho) => check_varrho(n, self.gamma, rho)?,
                }
            }
            Family::Critical4 => {
                if n != 4 {
                    return Err(Error::invalid("model.n", "the critical4 family needs n = 4"));
                }
                let eta = self.eta_or_default(radius);
                if !(eta > 0.0 && eta < 0.5 * radius) {
                    return Err(Error::invalid("init.eta", "must lie in (0, R/2)"));
                }
                if !(self.theta_log > 0.0 && self.theta_log < 1.0) {
                    return Err(Error::invalid("init.theta_log", "must lie in (0, 1)"));
                }
                if !(self.kappa > 0.0 && self.kappa < 1.0) {
                    return Err(Error::invalid("init.kappa", "must lie in (0, 1)"));
                }
                if self.kappa >= 1.0 - self.theta_log {
                    return Err(Error::invalid("init.kappa", "must be below 1 - theta_log"));
                }
                if self.n_psi <= 2 {
                    return Err(Error::invalid("init.N_psi", "must exceed 2"));
                }
            }
        }
        Ok(())
    }
}

/// Bump mass: the given value checked against `(max(0, m-|Ω|), m)`, or the
/// default `m/2` moved to the middle of that interval when outside.
pub fn resolve_eps(m: f64, omega: f64, eps: Option<f64>) -> Result<f64> {
    let lo = (m - omega).max(0.0);
    match eps {
        Some(e) if e > lo && e < m => Ok(e),
        Some(_) => Err(Error::invalid(
            "init.eps_mass",
            format!("must lie in ({lo}, {m})"),
        )),
        None if 0.5 * m > lo => Ok(0.5 * m),
        None => Ok(0.5 * (lo + m)),
    }
}

/// `c_n exp(-1/(1-|y|²))` on the unit ball, normalized to unit mass in `ℝⁿ`.
#[derive(Debug, Clone, Copy)]
pub struct BumpPhi {
    n: usize,
    c_n: f64,
}

impl BumpPhi {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        let tol = Tolerance {
            rel: 1e-13,
            abs: 1e-300,
            max_depth: 60,
        };
        let radial = quad::integrate(|y| raw(y) * y.powi(n as i32 - 1), 0.0, 1.0, tol)?;
        Ok(BumpPhi {
            n,
            c_n: 1.0 / (sphere_area(n) * radial),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.c_n * raw(y)
    }
}

fn raw(y: f64) -> f64 {
    let y2 = y * y;
    if y2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y2)).exp()
    }
}

/// Midpoint of `(max(0, n - nγ), n - 4)`.
pub fn choose_varrho(n: usize, gamma: f64) -> Result<f64> {
    let nf = n as f64;
    if n <= 4 || !(gamma > 4.0 / nf) {
        return Err(Error::invalid(
            "init.gamma",
            format!("the interval for rho is empty (need n > 4 and gamma > 4/n, got n = {n}, gamma = {gamma})"),
        ));
    }
    let rho = 0.5 * ((nf - nf * gamma).max(0.0) + nf - 4.0);
    check_varrho(n, gamma, rho)?;
    Ok(rho)
}

/// The four inequalities `ρ < n`, `ρ < n-2`, `ρ < n-4`, `ρ > (1-γ)n`, plus `ρ > 0`.
pub fn check_varrho(n: usize, gamma: f64, rho: f64) -> Result<()> {
    let nf = n as f64;
    if n <= 4 {
        return Err(Error::invalid("model.n", "the highdim family needs n > 4"));
    }
    let ok = rho < nf && rho < nf - 2.0 && rho < nf - 4.0 && rho > (1.0 - gamma) * nf && rho > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(
            "init.rho",
            format!("rho = {rho} is outside (max(0, n - n*gamma), n - 4)"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn make_constant(g: &RadialGrid, m: f64) -> Triple {
    let c = m / g.domain_volume();
    let x = vec![c; g.cells()];
    Triple {
        u: x.clone(),
        v: x.clone(),
        w: x,
    }
}

/// Mass-normalized `exp(-r²/width²)`, with `v = w = (-Δ_h+1)^{-1} u`.
pub fn make_gaussian(g: &RadialGrid, m: f64, width: f64) -> Result<Triple> {
    if !(width > 0.0) {
        return Err(Error::invalid("init.width", "must be positive"));
    }
    let shape = g.sample(|r| (-(r / width).powi(2)).exp());
    let total = g.integrate(&shape);
    let u: Vec<f64> = shape.iter().map(|x| m * x / total).collect();
    let v = g.helmholtz_solve(&u)?;
    Ok(Triple {
        u,
        w: v.clone(),
        v,
    })
}

/// Background `(m-ε)/|Ω|` plus `ε`-mass of `φ(r/η)` normalized on the mesh.
fn concentrated_u(g: &RadialGrid, phi: &BumpPhi, m: f64, eps: f64, eta: f64) -> Result<Vec<f64>> {
    let bump = g.sample(|r| phi.eval(r / eta));
    let total = g.integrate(&bump);
    if !(total > 0.0) {
        return Err(Error::invalid("init.eta", "bump is not resolved by the mesh"));
    }
    let base = (m - eps) / g.domain_volume();
    let coef = eps / total;
    Ok(bump.iter().map(|b| base + coef * b).collect())
}

pub fn make_highdim(g: &RadialGrid, p: &InitFamilyParams) -> Result<Triple> {
    let n = g.dim();
    if n <= 4 {
        return Err(Error::invalid("model.n", "the highdim family needs n > 4"));
    }
    p.validate(n, g.radius())?;
    let eta = p.eta_or_default(g.radius());
    let rho = match p.rho {
        Some(r) => r,
        None => choose_varrho(n, p.gamma)?,
    };
    let eps = resolve_eps(p.m, g.domain_volume(), p.eps_mass)?;
    let phi = BumpPhi::new(n)?;
    let u = concentrated_u(g, &phi, p.m, eps, eta)?;
    let scale = eta.powf(-rho);
    let v = g.sample(|r| phi.eval(r / eta) * scale);
    Ok(Triple {
        u,
        w: v.clone(),
        v,
    })
}

/// `v = (R²-r²)^N ln(R/η)^{-κ} ln((R²+η²)/(r²+η²))`.
pub fn critical4_profile(radius: f64, eta: f64, kappa: f64, n_psi: u32, r: f64) -> f64 {
    let r2 = radius * radius;
    let e2 = eta * eta;
    (r2 - r * r).max(0.0).powi(n_psi as i32) * (radius / eta).ln().powf(-kappa) * ((r2 + e2) / (r * r + e2)).ln()
}

pub fn make_critical4(g: &RadialGrid, p: &InitFamilyParams) -> Result<Triple> {
    if g.dim() != 4 {
        return Err(Error::invalid("model.n", "the critical4 family needs n = 4"));
    }
    p.validate(4, g.radius())?;
    let eta = p.eta_or_default(g.radius());
    let eps = resolve_eps(p.m, g.domain_volume(), p.eps_mass)?;
    let phi = BumpPhi::new(4)?;
    let u = concentrated_u(g, &phi, p.m, eps, eta)?;
    let v = g.sample(|r| critical4_profile(g.radius(), eta, p.kappa, p.n_psi, r));
    Ok(Triple {
        u,
        w: v.clone(),
        v,
    })
}

pub fn make(g: &RadialGrid, p: &InitFamilyParams) -> Result<Triple> {
    p.validate(g.dim(), g.radius())?;
    match p.family {
        Family::Constant => Ok(make_constant(g, p.m)),
        Family::Gaussian => make_gaussian(g, p.m, p.width.unwrap_or(0.2 * g.radius())),
        Family::Highdim => make_highdim(g, p),
        Family::Critical4 => make_critical4(g, p),
    }
}

/// Energy of a triple with `w = v`, written as
/// `∫G(u) - ∫uv + ∫|Δv|² + ∫|∇v|² + ½∫v²`.
pub fn energy_expansion(g: &RadialGrid, kin: &Kinetics, t: &Triple) -> Result<f64> {
    let gu = t
        .u
        .iter()
        .map(|&s| kin.eval_g(s.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let uv: Vec<f64> = t.u.iter().zip(&t.v).map(|(a, b)| a * b).collect();
    let lap2: Vec<f64> = g.laplacian(&t.v).iter().map(|x| x * x).collect();
    let grad2: Vec<f64> = g.gradient_faces(&t.v).iter().map(|x| x * x).collect();
    let v2: Vec<f64> = t.v.iter().map(|x| x * x).collect();
    Ok(g.integrate(&gu) - g.integrate(&uv)
        + g.integrate(&lap2)
        + g.integrate_faces(&grad2)
        + 0.5 * g.integrate(&v2))
}

/// Norms tracked by the scaling laws: `∫v²`, `∫|∇v|²`, `∫|Δv|²`.
pub fn v_norms(g: &RadialGrid, v: &[f64]) -> [f64; 3] {
    let v2: Vec<f64> = v.iter().map(|x| x * x).collect();
    let grad2: Vec<f64> = g.gradient_faces(v).iter().map(|x| x * x).collect();
    let lap2: Vec<f64> = g.laplacian(v).iter().map(|x| x * x).collect();
    [g.integrate(&v2), g.integrate_faces(&grad2), g.integrate(&lap2)]
}

pub fn initial_energy(g: &RadialGrid, kin: &Kinetics, t: &Triple) -> Result<f64> {
    diagnostics::energy_initial(g, kin, &t.u, &t.v, &t.w)
}
