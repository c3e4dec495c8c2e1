//! Monotone cubic Hermite interpolation on uniformly spaced abscissae.

/// Cubic Hermite value on `[x0, x0 + h]` at local coordinate `t in [0, 1]`.
#[inline]
pub fn hermite(t: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to the global abscissa.
#[inline]
pub fn hermite_slope(t: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

/// Fritsch–Carlson limiter: rescales node slopes so every interval is
/// monotone. Slopes that already satisfy the constraint are left untouched.
pub fn limit_monotone(h: f64, y: &[f64], d: &mut [f64]) {
    for k in 0..y.len().saturating_sub(1) {
        let secant = (y[k + 1] - y[k]) / h;
        if secant == 0.0 {
            d[k] = 0.0;
            d[k + 1] = 0.0;
            continue;
        }
        let a = d[k] / secant;
        let b = d[k + 1] / secant;
        if a < 0.0 {
            d[k] = 0.0;
        }
        if b < 0.0 {
            d[k + 1] = 0.0;
        }
        let a = d[k] / secant;
        let b = d[k + 1] / secant;
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            d[k] = tau * a * secant;
            d[k + 1] = tau * b * secant;
        }
    }
}

/// PCHIP interpolant of samples on the uniform grid `x0 + k h`.
#[derive(Debug, Clone)]
pub struct UniformPchip {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl UniformPchip {
    /// Builds the interpolant using Fritsch–Butland slopes. Needs at least
    /// two samples.
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        assert!(y.len() >= 2, "PCHIP needs at least two samples");
        let n = y.len();
        let secants: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            let (s0, s1) = (secants[k - 1], secants[k]);
            d[k] = if s0 * s1 > 0.0 {
                2.0 * s0 * s1 / (s0 + s1)
            } else {
                0.0
            };
        }
        d[0] = end_slope(secants[0], secants.get(1).copied().unwrap_or(secants[0]));
        d[n - 1] = end_slope(
            secants[n - 2],
            if n > 2 { secants[n - 3] } else { secants[n - 2] },
        );
        limit_monotone(h, &y, &mut d);
        UniformPchip { x0, h, y, d }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    /// Returns `None` outside the sampled range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let u = (x - self.x0) / self.h;
        let last = (self.y.len() - 1) as f64;
        if !(u >= -1e-12 && u <= last + 1e-12) {
            return None;
        }
        let k = (u.floor().max(0.0) as usize).min(self.y.len() - 2);
        let t = (u - k as f64).clamp(0.0, 1.0);
        Some(hermite(t, self.h, self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]))
    }
}

fn end_slope(s0: f64, s1: f64) -> f64 {
    // three-point one-sided estimate, clipped to preserve shape
    let d = 1.5 * s0 - 0.5 * s1;
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 2.0 * x * x * x - x * x + 0.5;
        let dp = |x: f64| 6.0 * x * x - 2.0 * x;
        let (a, h) = (0.3, 0.7);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let v = hermite(t, h, p(a), p(a + h), dp(a), dp(a + h));
            assert!((v - p(a + t * h)).abs() < 1e-14);
            let s = hermite_slope(t, h, p(a), p(a + h), dp(a), dp(a + h));
            assert!((s - dp(a + t * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn pchip_out_of_range_is_none() {
        let p = UniformPchip::new(0.0, 1.0, vec![0.0, 1.0, 4.0]);
        assert!(p.eval(-0.5).is_none());
        assert!(p.eval(2.5).is_none());
        assert_eq!(p.eval(1.0), Some(1.0));
    }

    proptest! {
        #[test]
        fn pchip_preserves_monotone_data(steps in proptest::collection::vec(0.0f64..5.0, 3..30), q in 0.0f64..1.0) {
            let mut y = vec![0.0];
            for s in &steps { let last = *y.last().unwrap(); y.push(last + s); }
            let n = y.len();
            let p = UniformPchip::new(0.0, 0.5, y.clone());
            let mut prev = f64::NEG_INFINITY;
            for i in 0..200 {
                let x = (n - 1) as f64 * 0.5 * (i as f64 + q) / 200.0;
                let v = p.eval(x).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
