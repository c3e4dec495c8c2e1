//! Adaptive Simpson quadrature, scalar and vector-valued.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-10,
            abs: 1e-14,
            max_depth: 48,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const K: usize> {
    pub value: [f64; K],
    /// Sum of the Richardson error estimates over accepted panels.
    pub error: f64,
    pub converged: bool,
}

/// Integrates a `K`-component integrand over `[a, b]`, sharing evaluations
/// between components. Each component carries its own tolerance
/// `max(abs, rel * |estimate_k|)`; a panel is accepted once every component
/// passes `|S2 - S1| <= 15 * eps_k`.
pub fn simpson_vec<const K: usize, F>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult<K>
where
    F: Fn(f64) -> [f64; K],
{
    if a == b {
        return QuadResult {
            value: [0.0; K],
            error: 0.0,
            converged: true,
        };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = panel(a, b, &fa, &fm, &fb);
    let mut eps = [0.0; K];
    for k in 0..K {
        eps[k] = tol.abs.max(tol.rel * whole[k].abs());
    }

    let mut out = QuadResult {
        value: [0.0; K],
        error: 0.0,
        converged: true,
    };
    recurse(&f, a, b, fa, fm, fb, whole, eps, tol.max_depth, &mut out);
    out
}

/// Scalar convenience wrapper.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult<1> {
    simpson_vec(|x| [f(x)], a, b, tol)
}

/// Scalar integral that reports non-convergence as an error.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    let r = simpson(f, a, b, tol);
    if r.converged && r.value[0].is_finite() {
        Ok(r.value[0])
    } else {
        Err(Error::Quadrature { estimate: r.error })
    }
}

fn panel<const K: usize>(a: f64, b: f64, fa: &[f64; K], fm: &[f64; K], fb: &[f64; K]) -> [f64; K] {
    let h6 = (b - a) / 6.0;
    let mut s = [0.0; K];
    for k in 0..K {
        s[k] = h6 * (fa[k] + 4.0 * fm[k] + fb[k]);
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn recurse<const K: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    fa: [f64; K],
    fm: [f64; K],
    fb: [f64; K],
    whole: [f64; K],
    eps: [f64; K],
    depth: u32,
    out: &mut QuadResult<K>,
) where
    F: Fn(f64) -> [f64; K],
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = panel(a, m, &fa, &flm, &fm);
    let right = panel(m, b, &fm, &frm, &fb);

    let mut worst = 0.0_f64;
    let mut ok = true;
    for k in 0..K {
        let d = (left[k] + right[k] - whole[k]).abs();
        worst = worst.max(d);
        ok &= d <= 15.0 * eps[k];
    }
    if ok || depth == 0 || !(m > a && m < b) {
        if !ok {
            out.converged = false;
        }
        for k in 0..K {
            let delta = left[k] + right[k] - whole[k];
            out.value[k] += left[k] + right[k] + delta / 15.0;
        }
        out.error += worst / 15.0;
        return;
    }
    let half = eps.map(|e| 0.5 * e);
    recurse(f, a, m, fa, flm, fm, left, half, depth - 1, out);
    recurse(f, m, b, fm, frm, fb, right, half, depth - 1, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_up_to_cubic_is_exact() {
        let r = simpson(|x| 3.0 * x * x * x - x + 2.0, -1.0, 2.0, Tolerance::default());
        assert!(r.converged);
        // 3/4 (16 - 1) - 1/2 (4 - 1) + 2 * 3
        assert!((r.value[0] - (11.25 - 1.5 + 6.0)).abs() < 1e-13);
    }

    #[test]
    fn smooth_transcendental() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn vector_components_share_nodes() {
        let r = simpson_vec(|x: f64| [x.sin(), x.cos()], 0.0, std::f64::consts::PI, Tolerance::default());
        assert!((r.value[0] - 2.0).abs() < 1e-10);
        assert!(r.value[1].abs() < 1e-10);
    }

    #[test]
    fn depth_exhaustion_is_reported() {
        let tol = Tolerance {
            rel: 1e-15,
            abs: 0.0,
            max_depth: 2,
        };
        let r = simpson(|x: f64| x.sqrt(), 0.0, 1.0, tol);
        assert!(!r.converged);
        assert!(integrate(|x: f64| x.sqrt(), 0.0, 1.0, tol).is_err());
    }
}
