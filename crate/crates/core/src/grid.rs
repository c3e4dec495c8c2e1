//! Cell-centred radial mesh on a ball in R^n and the conservative
//! finite-volume operators built on it.
//!
//! Cell `i` spans `[r_i, r_{i+1}]` with faces `r_k = k dr`. Face-located
//! quantities have length `cells + 1`; cell quantities have length `cells`.

use crate::error::{Error, Result};
use crate::tridiag;

/// Surface measure of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Volume of the ball of radius `r` in R^n.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    sphere_area(n) / n as f64 * r.powi(n as i32)
}

/// Compensated (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    radius: f64,
    dr: f64,
    omega: f64,
    faces: Vec<f64>,
    centers: Vec<f64>,
    areas: Vec<f64>,
    volumes: Vec<f64>,
}

impl RadialGrid {
    /// Builds the mesh for `B_R` in R^n with `cells` cells (`n >= 2`, `cells >= 8`).
    pub fn new(n: usize, radius: f64, cells: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", "space dimension must be at least 2"));
        }
        Self::build(n, radius, cells)
    }

    /// One-dimensional interval `[-R, R]` treated as an even profile on
    /// `[0, R]`. Only meant for operator diagnostics.
    pub fn interval(radius: f64, cells: usize) -> Result<Self> {
        Self::build(1, radius, cells)
    }

    fn build(n: usize, radius: f64, cells: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("R", "radius must be positive and finite"));
        }
        if cells < 8 {
            return Err(Error::invalid("cells", "need at least 8 cells"));
        }
        let dr = radius / cells as f64;
        let omega = sphere_area(n);
        let faces: Vec<f64> = (0..=cells)
            .map(|k| if k == cells { radius } else { k as f64 * dr })
            .collect();
        let centers = (0..cells).map(|i| (i as f64 + 0.5) * dr).collect();
        let areas = faces.iter().map(|&r| omega * r.powi(n as i32 - 1)).collect();
        let scale = omega / n as f64;
        let volumes = faces
            .windows(2)
            .map(|w| scale * (w[1].powi(n as i32) - w[0].powi(n as i32)))
            .collect();
        Ok(RadialGrid {
            n,
            radius,
            dr,
            omega,
            faces,
            centers,
            areas,
            volumes,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn cells(&self) -> usize {
        self.volumes.len()
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// |B_R| in closed form.
    pub fn domain_volume(&self) -> f64 {
        ball_volume(self.n, self.radius)
    }

    /// Samples `f(r)` at cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers.iter().map(|&r| f(r)).collect()
    }

    /// Sum of `x_i V_i`.
    pub fn integrate(&self, x: &[f64]) -> f64 {
        self.check_cells(x);
        compensated_sum(x.iter().zip(&self.volumes).map(|(a, v)| a * v))
    }

    /// Sum of `g_k A_k dr` over faces. This is the quadrature that makes
    /// summation by parts against [`RadialGrid::divergence`] exact.
    pub fn integrate_faces(&self, g: &[f64]) -> f64 {
        self.check_faces(g);
        let dr = self.dr;
        compensated_sum(g.iter().zip(&self.areas).map(|(a, area)| a * area * dr))
    }

    /// Central differences at interior faces; zero on both boundary faces.
    pub fn gradient_faces(&self, x: &[f64]) -> Vec<f64> {
        self.check_cells(x);
        let n = x.len();
        let mut g = vec![0.0; n + 1];
        for k in 1..n {
            g[k] = (x[k] - x[k - 1]) / self.dr;
        }
        g
    }

    /// Conservative divergence of face fluxes.
    pub fn divergence(&self, flux: &[f64]) -> Vec<f64> {
        self.check_faces(flux);
        (0..self.cells())
            .map(|i| {
                (self.areas[i + 1] * flux[i + 1] - self.areas[i] * flux[i]) / self.volumes[i]
            })
            .collect()
    }

    /// Radial Laplacian with Neumann conditions.
    pub fn laplacian(&self, x: &[f64]) -> Vec<f64> {
        self.divergence(&self.gradient_faces(x))
    }

    /// Solves `(-Δ_h + 1) x = b`.
    pub fn helmholtz_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.shifted_helmholtz_solve(b, 1.0, 1.0)
    }

    /// Solves `(c0 - c1 Δ_h) x = b`; backward Euler for `x_t = Δx - x + s`
    /// uses `c0 = 1 + dt`, `c1 = dt`.
    pub fn shifted_helmholtz_solve(&self, b: &[f64], c0: f64, c1: f64) -> Result<Vec<f64>> {
        let ones = vec![1.0; self.cells() + 1];
        self.diffusion_solve(b, &ones, c0, c1)
    }

    /// Solves `(c0 - c1 div(k grad)) x = b` with face coefficients `k >= 0`.
    pub fn diffusion_solve(&self, b: &[f64], k: &[f64], c0: f64, c1: f64) -> Result<Vec<f64>> {
        self.check_cells(b);
        self.check_faces(k);
        if !(c0 > 0.0 && c1 >= 0.0 && c0.is_finite() && c1.is_finite()) {
            return Err(Error::Solver(format!("bad shift coefficients ({c0}, {c1})")));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side of a linear solve".into()));
        }
        let n = self.cells();
        let mut lower = vec![0.0; n];
        let mut diag = vec![c0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let scale = c1 / (self.volumes[i] * self.dr);
            if i > 0 {
                let t = scale * self.areas[i] * k[i];
                lower[i] = -t;
                diag[i] += t;
            }
            if i + 1 < n {
                let t = scale * self.areas[i + 1] * k[i + 1];
                upper[i] = -t;
                diag[i] += t;
            }
        }
        tridiag::solve(&lower, &diag, &upper, b)
    }

    fn check_cells(&self, x: &[f64]) {
        assert_eq!(x.len(), self.cells(), "cell field length does not match grid");
    }

    fn check_faces(&self, x: &[f64]) {
        assert_eq!(x.len(), self.cells() + 1, "face field length does not match grid");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        let g = RadialGrid::new(2, 1.0, 37).unwrap();
        assert_relative_eq!(g.volumes().iter().sum::<f64>(), PI, max_relative = 1e-14);
        let g = RadialGrid::new(4, 1.0, 100).unwrap();
        assert_relative_eq!(g.integrate(&vec![1.0; 100]), PI * PI / 2.0, max_relative = 1e-14);
        let g = RadialGrid::new(5, 2.0, 64).unwrap();
        assert_relative_eq!(
            g.integrate(&vec![1.0; 64]),
            8.0 * PI * PI / 15.0 * 32.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RadialGrid::new(1, 1.0, 16).is_err());
        assert!(RadialGrid::new(3, 0.0, 16).is_err());
        assert!(RadialGrid::new(3, 1.0, 7).is_err());
    }

    #[test]
    fn boundary_areas() {
        let g = RadialGrid::new(3, 2.0, 16).unwrap();
        assert_eq!(g.areas()[0], 0.0);
        assert_relative_eq!(g.areas()[16], 4.0 * PI * 4.0, max_relative = 1e-15);
    }

    #[test]
    fn second_moment_converges() {
        let n = 3;
        let exact = sphere_area(n) / (n + 2) as f64;
        let err = |cells| {
            let g = RadialGrid::new(n, 1.0, cells).unwrap();
            (g.integrate(&g.sample(|r| r * r)) - exact).abs()
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn gradient_of_quadratic_is_exact() {
        let g = RadialGrid::new(4, 1.0, 32).unwrap();
        let grad = g.gradient_faces(&g.sample(|r| r * r));
        assert_eq!(grad[0], 0.0);
        assert_eq!(grad[32], 0.0);
        for k in 1..32 {
            assert_relative_eq!(grad[k], 2.0 * g.faces()[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_2n_inside() {
        for n in 2..7 {
            let g = RadialGrid::new(n, 1.5, 40).unwrap();
            let lap = g.laplacian(&g.sample(|r| r * r));
            for &l in &lap[..39] {
                assert_relative_eq!(l, 2.0 * n as f64, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = RadialGrid::new(3, 1.0, 20).unwrap();
        assert!(g.laplacian(&vec![2.5; 20]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_r_over_n_is_one() {
        let g = RadialGrid::new(4, 1.0, 64).unwrap();
        let flux: Vec<f64> = g.faces().iter().map(|r| r / 4.0).collect();
        for d in g.divergence(&flux) {
            assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn helmholtz_constant_is_fixed() {
        let g = RadialGrid::new(4, 1.0, 50).unwrap();
        let x = g.helmholtz_solve(&vec![3.0; 50]).unwrap();
        for v in x {
            assert_relative_eq!(v, 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn helmholtz_manufactured_solution() {
        // x* = cos(pi r), x*' (1) = 0; (-Δ + 1) x* = pi^2 cos + pi (n-1) sin / r + cos
        let n = 3;
        let exact = |r: f64| (PI * r).cos();
        let rhs = |r: f64| {
            (PI * PI + 1.0) * (PI * r).cos() + PI * (n - 1) as f64 * (PI * r).sin() / r
        };
        let err = |cells| {
            let g = RadialGrid::new(n, 1.0, cells).unwrap();
            let x = g.helmholtz_solve(&g.sample(rhs)).unwrap();
            x.iter()
                .zip(g.centers())
                .map(|(a, &r)| (a - exact(r)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e1 < 1e-3);
        assert!(e1 / e2 > 3.5, "order ratio {}", e1 / e2);
    }

    #[test]
    fn interval_mode_is_one_dimensional() {
        let g = RadialGrid::interval(1.0, 32).unwrap();
        assert_eq!(g.dim(), 1);
        assert_relative_eq!(g.integrate(&vec![1.0; 32]), 2.0, max_relative = 1e-15);
        let lap = g.laplacian(&g.sample(|r| r * r));
        for &l in &lap[..31] {
            assert_relative_eq!(l, 2.0, max_relative = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn divergence_is_conservative(inner in proptest::collection::vec(-10.0f64..10.0, 15), n in 2usize..7) {
            let g = RadialGrid::new(n, 1.3, 16).unwrap();
            let mut flux = vec![0.0];
            flux.extend(inner);
            flux.push(0.0);
            let d = g.divergence(&flux);
            let scale: f64 = flux.iter().map(|f| f.abs()).sum::<f64>() * g.areas()[16];
            prop_assert!(g.integrate(&d).abs() <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn helmholtz_maximum_principle(b in proptest::collection::vec(0.0f64..5.0, 20), dt in 1e-4f64..10.0) {
            let g = RadialGrid::new(4, 1.0, 20).unwrap();
            let x = g.shifted_helmholtz_solve(&b, 1.0 + dt, dt).unwrap();
            prop_assert!(x.iter().all(|&v| v >= 0.0));
            let res: Vec<f64> = g.laplacian(&x).iter().zip(&x).zip(&b)
                .map(|((l, xi), bi)| ((1.0 + dt) * xi - dt * l - bi).abs()).collect();
            let bmax = b.iter().cloned().fold(0.0, f64::max);
            prop_assert!(res.iter().cloned().fold(0.0, f64::max) <= 1e-12 * bmax.max(1.0));
        }
    }
}
