//! Discrete checks of the radial integral identities and inequalities:
//! Hardy–Rellich in dimension four, the Pohozaev balance for `Δ²v`, and the
//! cutoff-weighted inequality satisfied by stationary solutions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, RadialGrid};
use crate::kinetics::Kinetics;
use crate::stationary::StationarySolution;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub check: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub cells: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(check: &str, g: &RadialGrid, lhs: f64, rhs: f64, pass: bool) -> Self {
        let abs_residual = (lhs - rhs).abs();
        IdentityReport {
            check: check.to_string(),
            n: g.dim(),
            cells: g.cells(),
            lhs,
            rhs,
            abs_residual,
            rel_residual: abs_residual / lhs.abs().max(rhs.abs()).max(1.0),
            pass,
        }
    }
}

/// Absolute slack allowed below the Hardy–Rellich bound.
pub const HARDY_TOL: f64 = 1e-6;
/// Relative residual accepted for the Pohozaev balance.
pub const POHOZAEV_TOL: f64 = 1e-6;
/// Residual a stationary solution must reach before the weighted check.
pub const STATIONARY_RESIDUAL_MAX: f64 = 1e-8;

/// `lhs = ∫|Δ_h u|²`, `rhs = 4 ∫|∇u|²/|x|²` with the gradient term on faces.
pub fn hardy_rellich_check(g: &RadialGrid, u: &[f64]) -> Result<IdentityReport> {
    if g.dim() != 4 {
        return Err(Error::invalid("n", "the radial Hardy–Rellich check needs n = 4"));
    }
    let lap = g.laplacian(u);
    let lhs = g.integrate(&lap.iter().map(|l| l * l).collect::<Vec<_>>());
    let grad = g.gradient_faces(u);
    let mut weighted = vec![0.0; grad.len()];
    for k in 1..grad.len() - 1 {
        let r = g.faces()[k];
        weighted[k] = grad[k] * grad[k] / (r * r);
    }
    let rhs = 4.0 * g.integrate_faces(&weighted);
    Ok(IdentityReport::new("hardy", g, lhs, rhs, lhs >= rhs - HARDY_TOL))
}

/// Radial test profiles on the unit ball with `u_r(1) = 0`.
pub fn hardy_rellich_suite() -> Vec<(&'static str, fn(f64) -> f64)> {
    use std::f64::consts::PI;
    vec![
        ("(1-r^2)^2", |r| (1.0 - r * r).powi(2)),
        ("(1-r^2)^3", |r| (1.0 - r * r).powi(3)),
        ("cos(pi r)", |r| (PI * r).cos()),
        ("cos(2 pi r)", |r| (2.0 * PI * r).cos()),
        ("r^2 (1-r)^2", |r| r * r * (1.0 - r).powi(2)),
        ("exp(-r^2)(1-r^2)^2", |r| (-r * r).exp() * (1.0 - r * r).powi(2)),
        ("r^6/6 - r^2/2", |r| r.powi(6) / 6.0 - r * r / 2.0),
        ("cos(pi r^2)", |r| (PI * r * r).cos()),
        ("r^8/8 - r^2/2", |r| r.powi(8) / 8.0 - r * r / 2.0),
        ("(1-r^2)^2 (1+3r^2)", |r| (1.0 - r * r).powi(2) * (1.0 + 3.0 * r * r)),
    ]
}

/// Second derivative at `r = R` from the last three cells, second order,
/// using `v_r(R) = 0`.
pub fn boundary_second_derivative(g: &RadialGrid, v: &[f64]) -> f64 {
    let n = v.len();
    let h = g.dr();
    (-49.0 * v[n - 1] + 62.0 * v[n - 2] - 13.0 * v[n - 3]) / (23.0 * h * h)
}

/// Discrete bilaplacian. The inner Laplacian uses the Neumann condition of
/// `v`; the two outermost face gradients of `Δ_h v` are extrapolated from the
/// interior because `(Δv)_r` does not vanish on the boundary.
pub fn bilaplacian(g: &RadialGrid, v: &[f64]) -> Vec<f64> {
    let lap = g.laplacian(v);
    let mut grad = g.gradient_faces(&lap);
    let n = lap.len();
    grad[n - 1] = 2.0 * grad[n - 2] - grad[n - 3];
    grad[n] = 2.0 * grad[n - 1] - grad[n - 2];
    g.divergence(&grad)
}

/// `r v_r` at cell centres from the average of the adjacent face gradients.
fn radial_derivative_term(g: &RadialGrid, v: &[f64]) -> Vec<f64> {
    let grad = g.gradient_faces(v);
    g.centers()
        .iter()
        .enumerate()
        .map(|(i, r)| r * 0.5 * (grad[i] + grad[i + 1]))
        .collect()
}

/// `-∫Δ²v (x·∇v) = ((n-4)/2)∫|Δv|² + (ω_n Rⁿ/2) v_rr(R)²`.
pub fn pohozaev_check(g: &RadialGrid, v: &[f64]) -> Result<IdentityReport> {
    if v.len() < 4 {
        return Err(Error::invalid("cells", "need at least four cells"));
    }
    let bi = bilaplacian(g, v);
    let phi = radial_derivative_term(g, v);
    let lhs = -compensated_sum(
        bi.iter()
            .zip(&phi)
            .zip(g.volumes())
            .map(|((b, p), vol)| b * p * vol),
    );
    let lap = g.laplacian(v);
    let n = g.dim() as f64;
    let vrr = boundary_second_derivative(g, v);
    let rhs = 0.5 * (n - 4.0) * g.integrate(&lap.iter().map(|l| l * l).collect::<Vec<_>>())
        + 0.5 * g.omega() * g.radius().powi(g.dim() as i32) * vrr * vrr;
    let abs = (lhs - rhs).abs();
    let pass = abs <= POHOZAEV_TOL * lhs.abs().max(rhs.abs()).max(1.0);
    Ok(IdentityReport::new("pohozaev", g, lhs, rhs, pass))
}

/// `ξ(r) = ln((R²+η)/(r²+η))` and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffXi {
    pub eta: f64,
    pub radius: f64,
}

impl CutoffXi {
    pub fn new(eta: f64, radius: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::invalid("eta", "cutoff scale must lie in (0, 1)"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("R", "must be positive"));
        }
        Ok(CutoffXi { eta, radius })
    }

    pub fn xi(&self, r: f64) -> f64 {
        ((self.radius * self.radius + self.eta) / (r * r + self.eta)).ln()
    }

    pub fn d1(&self, r: f64) -> f64 {
        -2.0 * r / (r * r + self.eta)
    }

    pub fn d2(&self, r: f64) -> f64 {
        let q = r * r + self.eta;
        (2.0 * r * r - 2.0 * self.eta) / (q * q)
    }

    pub fn d3(&self, r: f64) -> f64 {
        let q = r * r + self.eta;
        (12.0 * self.eta * r - 4.0 * r * r * r) / (q * q * q)
    }

    /// `J = -ξ''' r + 3ξ'' - 3ξ'/r`, which reduces to `16 r⁴/(r²+η)³`.
    pub fn j(&self, r: f64) -> f64 {
        let q = r * r + self.eta;
        16.0 * r.powi(4) / (q * q * q)
    }

    /// `J` assembled from the derivative formulas (for `r > 0`).
    pub fn j_from_derivatives(&self, r: f64) -> f64 {
        -self.d3(r) * r + 3.0 * self.d2(r) - 3.0 * self.d1(r) / r
    }

    pub fn on_cells(&self, g: &RadialGrid) -> Vec<f64> {
        g.sample(|r| self.xi(r))
    }
}

/// Both sides of the cutoff-weighted inequality for a stationary solution
/// in dimension four. `pass` means `lhs <= rhs + tol` with
/// `tol = 1e-6 max(|lhs|, |rhs|, 1)`; the margin is `rhs - lhs`.
pub fn weighted_identity_check(
    g: &RadialGrid,
    kin: &Kinetics,
    sol: &StationarySolution,
    eta: f64,
) -> Result<IdentityReport> {
    if g.dim() != 4 {
        return Err(Error::invalid("n", "the weighted inequality is stated for n = 4"));
    }
    if !sol.converged || sol.residuals.max() > STATIONARY_RESIDUAL_MAX {
        return Err(Error::invalid(
            "solution",
            format!(
                "stationary solution not converged (residual {:e})",
                sol.residuals.max()
            ),
        ));
    }
    let xi = CutoffXi::new(eta, g.radius())?;
    let s0 = kin.s0();
    let (u, v) = (&sol.u, &sol.v);
    let lap = g.laplacian(v);
    let grad = g.gradient_faces(v);
    let faces = g.faces();
    let nf = grad.len();

    // cell integrands
    let mut c_lhs = Vec::with_capacity(u.len());
    let mut c_rhs = Vec::with_capacity(u.len());
    for (i, &r) in g.centers().iter().enumerate() {
        c_lhs.push(-1.5 * xi.d1(r) * r * lap[i] * lap[i]);
        let h = if u[i] > s0 { kin.eval_h(u[i])? } else { 0.0 };
        c_rhs.push(4.0 * xi.xi(r) * h);
    }
    // face integrands
    let mut f_lhs = vec![0.0; nf];
    let mut f_rhs = vec![0.0; nf];
    for k in 1..nf - 1 {
        let r = faces[k];
        let gv = grad[k];
        let v_face = 0.5 * (v[k - 1] + v[k]);
        f_lhs[k] = 2.0 * xi.xi(r) * gv * gv - xi.d1(r) * r * gv * gv;
        f_rhs[k] = (v_face + s0) * xi.xi(r) * r * gv.abs() + 0.5 * xi.j(r) * gv * gv;
    }
    let lhs = g.integrate(&c_lhs) + g.integrate_faces(&f_lhs);
    let rhs = g.integrate(&c_rhs) + g.integrate_faces(&f_rhs);
    let tol = 1e-6 * lhs.abs().max(rhs.abs()).max(1.0);
    Ok(IdentityReport::new("weighted", g, lhs, rhs, lhs <= rhs + tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn hardy_constant_is_zero_zero() {
        let g = RadialGrid::new(4, 1.0, 64).unwrap();
        let r = hardy_rellich_check(&g, &vec![2.0; 64]).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn hardy_rejects_other_dimensions() {
        let g = RadialGrid::new(5, 1.0, 64).unwrap();
        assert!(hardy_rellich_check(&g, &vec![1.0; 64]).is_err());
    }

    #[test]
    fn hardy_suite_ratios() {
        let g = RadialGrid::new(4, 1.0, 2048).unwrap();
        for (name, f) in hardy_rellich_suite() {
            let r = hardy_rellich_check(&g, &g.sample(f)).unwrap();
            assert!(r.pass, "{name}");
            // rhs already carries the factor 4
            let ratio = 4.0 * r.lhs / r.rhs;
            assert!(ratio >= 4.0 - 1e-6, "{name}: ratio {ratio}");
        }
    }

    #[test]
    fn pohozaev_constant_is_zero() {
        let g = RadialGrid::new(5, 1.0, 64).unwrap();
        let r = pohozaev_check(&g, &vec![1.5; 64]).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn pohozaev_n4_boundary_term_only() {
        // v = (1 - r^2)^2: v_rr(1) = 8, so the boundary term is ω₄/2 · 64 = 64 π²
        let g = RadialGrid::new(4, 1.0, 1024).unwrap();
        let r = pohozaev_check(&g, &g.sample(|r| (1.0 - r * r).powi(2))).unwrap();
        assert_relative_eq!(r.rhs, 64.0 * PI * PI, max_relative = 1e-5);
        assert_relative_eq!(r.lhs, 64.0 * PI * PI, max_relative = 1e-5);
    }

    #[test]
    fn boundary_second_derivative_is_second_order() {
        let err = |cells| {
            let g = RadialGrid::new(3, 1.0, cells).unwrap();
            (boundary_second_derivative(&g, &g.sample(|r| (PI * r).cos())) - PI * PI).abs()
        };
        let ratio = err(100) / err(200);
        assert!(ratio > 3.5, "ratio {ratio}");
    }

    #[test]
    fn cutoff_closed_forms() {
        let xi = CutoffXi::new(0.1, 1.0).unwrap();
        assert_eq!(xi.xi(1.0), 0.0);
        assert_eq!(xi.d1(0.0), 0.0);
        let h = 1e-5;
        for r in [0.05, 0.2, 0.5, 0.9] {
            assert!(xi.xi(r) > 0.0 && xi.d1(r) < 0.0);
            assert_relative_eq!(xi.d1(r), (xi.xi(r + h) - xi.xi(r - h)) / (2.0 * h), max_relative = 1e-7);
            assert_relative_eq!(xi.d2(r), (xi.d1(r + h) - xi.d1(r - h)) / (2.0 * h), max_relative = 1e-6);
            assert_relative_eq!(xi.d3(r), (xi.d2(r + h) - xi.d2(r - h)) / (2.0 * h), max_relative = 1e-5);
            assert_relative_eq!(xi.j(r), xi.j_from_derivatives(r), max_relative = 1e-12);
            assert!(xi.j(r) * r * r <= 16.0);
        }
        assert!(CutoffXi::new(1.0, 1.0).is_err());
    }
}
