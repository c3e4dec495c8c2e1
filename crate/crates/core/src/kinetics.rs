//! Diffusivity `D` and sensitivity `S`, the derived functionals
//!
//! ```text
//! f(s) = ∫_{s0}^s D/S,   G(s) = ∫_{s0}^s f,   H(s) = ∫_{s0}^s σ D(σ)/S(σ) dσ  (s >= s0, else 0)
//! ```
//!
//! and the sampled growth-condition checker.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::{hermite, hermite_slope, limit_monotone, UniformPchip};
use crate::quad::{simpson_vec, Tolerance};

pub const DEFAULT_S0: f64 = 2.0;

/// Layout of the cumulative tables on the `x = ln s` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSpec {
    pub s_lo: f64,
    pub s_hi: f64,
    pub per_decade: usize,
    pub tol: Tolerance,
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            s_lo: 1e-12,
            s_hi: 1e16,
            per_decade: 4096,
            tol: Tolerance::default(),
        }
    }
}

/// Cumulative integrals of `D/S` anchored at `s0`, tabulated on a geometric
/// grid in `s` and interpolated by monotone cubic Hermite polynomials with
/// exact node derivatives.
///
/// The table is built from `q(s) = s D(s)/S(s)`, the integrand on the log axis.
/// Below the first node `q` is taken as constant, which is exact for
/// tabulated laws and accurate to `O(s_lo)` for the prototype.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    s0: f64,
    x0: f64,
    h: f64,
    s: Vec<f64>,
    q: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    // signed ∫_{s0}^s σ D/S; the cutoff below s0 is applied on evaluation
    h_raw: Vec<f64>,
    df: Vec<f64>,
    dg: Vec<f64>,
    dh: Vec<f64>,
    error_bound: f64,
}

impl CumulativeTable {
    pub fn build<Q: Fn(f64) -> f64>(q: Q, s0: f64, spec: TableSpec) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", "must be positive"));
        }
        if !(spec.s_lo > 0.0 && spec.s_lo < s0 && spec.s_hi > s0 && spec.per_decade >= 4) {
            return Err(Error::invalid(
                "table",
                format!(
                    "need 0 < s_lo < s0 < s_hi, got [{}, {}] around {s0}",
                    spec.s_lo, spec.s_hi
                ),
            ));
        }
        let (h, below, above) = layout(s0, &spec);
        let ls0 = s0.ln();
        let len = below + above + 1;
        let x0 = ls0 - below as f64 * h;

        let s: Vec<f64> = (0..len)
            .map(|j| {
                if j == below {
                    s0
                } else {
                    (x0 + j as f64 * h).exp()
                }
            })
            .collect();
        let qn: Vec<f64> = s.iter().map(|&v| q(v)).collect();
        if let Some(bad) = qn.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(
                "kinetics",
                format!("D/S not positive and finite at s = {:e}", s[bad]),
            ));
        }

        let mut f = vec![0.0; len];
        let mut g = vec![0.0; len];
        let mut hr = vec![0.0; len];
        let increments = |j: usize| -> Result<[f64; 4]> {
            let (a, b) = (s[j], s[j + 1]);
            let r = simpson_vec(
                |y: f64| {
                    let t = y.exp();
                    let qy = q(t);
                    [qy, qy * (b - t), qy * (t - a), qy * t]
                },
                a.ln(),
                b.ln(),
                spec.tol,
            );
            if !r.converged || r.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::Quadrature { estimate: r.error });
            }
            Ok(r.value)
        };
        for j in below..len - 1 {
            let [df, gb, _, dh] = increments(j)?;
            f[j + 1] = f[j] + df;
            g[j + 1] = g[j] + f[j] * (s[j + 1] - s[j]) + gb;
            hr[j + 1] = hr[j] + dh;
        }
        for j in (0..below).rev() {
            let [df, _, ga, dh] = increments(j)?;
            f[j] = f[j + 1] - df;
            // ∫_a^b f = f(b)(b - a) - ∫_a^b (τ - a) f'(τ) dτ
            g[j] = g[j + 1] - (f[j + 1] * (s[j + 1] - s[j]) - ga);
            hr[j] = hr[j + 1] - dh;
        }

        let mut df: Vec<f64> = qn.clone();
        let mut dg: Vec<f64> = s.iter().zip(&f).map(|(a, b)| a * b).collect();
        let mut dh: Vec<f64> = s.iter().zip(&qn).map(|(a, b)| a * b).collect();
        limit_monotone(h, &f, &mut df);
        limit_monotone(h, &g, &mut dg);
        limit_monotone(h, &hr, &mut dh);

        let mut table = CumulativeTable {
            s0,
            x0,
            h,
            s,
            q: qn,
            f,
            g,
            h_raw: hr,
            df,
            dg,
            dh,
            error_bound: 0.0,
        };

        // interpolation error audit on a subset of interval midpoints
        let stride = (len / 512).max(1);
        for j in (0..len - 1).step_by(stride) {
            let a = table.s[j];
            let xm = table.x0 + (j as f64 + 0.5) * h;
            let sm = xm.exp();
            let r = simpson_vec(
                |y: f64| {
                    let t = y.exp();
                    let qy = q(t);
                    [qy, qy * (sm - t), qy * t]
                },
                a.ln(),
                xm,
                spec.tol,
            );
            let exact = [
                table.f[j] + r.value[0],
                table.g[j] + table.f[j] * (sm - a) + r.value[1],
                table.h_raw[j] + r.value[2],
            ];
            let interp = [
                table.interp(&table.f, &table.df, j, 0.5),
                table.interp(&table.g, &table.dg, j, 0.5),
                table.interp(&table.h_raw, &table.dh, j, 0.5),
            ];
            for c in 0..3 {
                let scale = exact[c].abs().max(1e-300);
                table.error_bound = table.error_bound.max((interp[c] - exact[c]).abs() / scale);
            }
        }
        Ok(table)
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Tabulated range `[s_lo, s_hi]`.
    pub fn range(&self) -> (f64, f64) {
        (self.s[0], *self.s.last().unwrap())
    }

    /// Sample points in `s`.
    pub fn nodes(&self) -> &[f64] {
        &self.s
    }

    /// Node values of `f`.
    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    /// Node values of `G`.
    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    /// Largest relative deviation between the interpolant and a direct
    /// quadrature found at audited interval midpoints.
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    fn interp(&self, y: &[f64], d: &[f64], k: usize, t: f64) -> f64 {
        hermite(t, self.h, y[k], y[k + 1], d[k], d[k + 1])
    }

    /// `Ok(None)` below the table, `Err` above it.
    fn locate(&self, s: f64) -> Result<Option<(usize, f64)>> {
        let (lo, hi) = self.range();
        if s > hi * (1.0 + 1e-14) || s.is_nan() {
            return Err(Error::OutOfDomain { value: s, lo: 0.0, hi });
        }
        if s < lo {
            return Ok(None);
        }
        let u = (s.ln() - self.x0) / self.h;
        let k = (u.floor().max(0.0) as usize).min(self.s.len() - 2);
        Ok(Some((k, (u - k as f64).clamp(0.0, 1.0))))
    }

    fn c_lo(&self) -> f64 {
        self.q[0]
    }

    pub fn f(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        match self.locate(s)? {
            Some((k, t)) => Ok(self.interp(&self.f, &self.df, k, t)),
            None => Ok(self.f[0] + self.c_lo() * (s / self.s[0]).ln()),
        }
    }

    pub fn g(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::OutOfDomain { value: s, lo: 0.0, hi: self.range().1 });
        }
        match self.locate(s)? {
            Some((k, t)) => Ok(self.interp(&self.g, &self.dg, k, t).max(0.0)),
            None => {
                let (sl, fl, c) = (self.s[0], self.f[0], self.c_lo());
                let log_term = if s > 0.0 { s * (s / sl).ln() } else { 0.0 };
                Ok(self.g[0] + (s - sl) * fl + c * (log_term - s + sl))
            }
        }
    }

    pub fn h(&self, s: f64) -> Result<f64> {
        if s <= self.s0 {
            return Ok(0.0);
        }
        match self.locate(s)? {
            Some((k, t)) => Ok(self.interp(&self.h_raw, &self.dh, k, t).max(0.0)),
            None => Ok(0.0),
        }
    }

    /// `d f / d s = D/S` from the interpolant, for consistency checks.
    pub fn f_slope(&self, s: f64) -> Result<f64> {
        match self.locate(s)? {
            Some((k, t)) => {
                Ok(hermite_slope(t, self.h, self.f[k], self.f[k + 1], self.df[k], self.df[k + 1]) / s)
            }
            None => Ok(self.c_lo() / s),
        }
    }

    /// Largest finite value of `f` covered by the table.
    pub fn f_max(&self) -> f64 {
        *self.f.last().unwrap()
    }

    /// Solves `f(s) = y`. Returns 0 when `y` is `-inf`, and the asymptotic
    /// inverse below the table.
    pub fn f_inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() {
            return Err(Error::NonFinite("argument of f^-1".into()));
        }
        if y > self.f_max() {
            return Err(Error::OutOfDomain {
                value: y,
                lo: f64::NEG_INFINITY,
                hi: self.f_max(),
            });
        }
        if y < self.f[0] {
            return Ok(self.s[0] * ((y - self.f[0]) / self.c_lo()).exp());
        }
        // last node with f <= y
        let k = self.f.partition_point(|&v| v <= y).saturating_sub(1).min(self.f.len() - 2);
        let (y0, y1, d0, d1) = (self.f[k], self.f[k + 1], self.df[k], self.df[k + 1]);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = if y1 > y0 { ((y - y0) / (y1 - y0)).clamp(0.0, 1.0) } else { 0.0 };
        for _ in 0..60 {
            let r = hermite(t, self.h, y0, y1, d0, d1) - y;
            if r == 0.0 {
                break;
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = hermite_slope(t, self.h, y0, y1, d0, d1) * self.h;
            let mut next = if slope > 0.0 { t - r / slope } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        Ok((self.x0 + (k as f64 + t) * self.h).exp())
    }
}

/// Node spacing on the log axis and node counts below/above `s0`.
fn layout(s0: f64, spec: &TableSpec) -> (f64, usize, usize) {
    let h = std::f64::consts::LN_10 / spec.per_decade as f64;
    let ls0 = s0.ln();
    let below = ((ls0 - spec.s_lo.ln()) / h).ceil() as usize;
    let above = ((spec.s_hi.ln() - ls0) / h).floor() as usize;
    (h, below, above)
}

/// `D` and `S` sampled on a geometric grid, interpolated by PCHIP in
/// log-log coordinates.
///
/// Below `s_min` the law is continued with constant `D` and linear `S`, so
/// `S(0) = 0`. Queries above `s_max` are out of domain.
#[derive(Debug, Clone)]
pub struct TabulatedLaw {
    s_min: f64,
    s_max: f64,
    points: Vec<f64>,
    d_samples: Vec<f64>,
    log_d: UniformPchip,
    log_s: UniformPchip,
}

impl TabulatedLaw {
    /// `d[i]` and `s[i]` are the values at `s_min (s_max/s_min)^(i/(len-1))`.
    pub fn new(s_min: f64, s_max: f64, d: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
            return Err(Error::invalid("table", "need 0 < s_min < s_max"));
        }
        if d.len() != s.len() || d.len() < 2 {
            return Err(Error::invalid("table", "D and S sample counts must match and be >= 2"));
        }
        if d.iter().chain(&s).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("table", "D and S samples must be positive and finite"));
        }
        let x0 = s_min.ln();
        let h = (s_max.ln() - x0) / (d.len() - 1) as f64;
        let points = (0..d.len())
            .map(|i| if i + 1 == d.len() { s_max } else { (x0 + i as f64 * h).exp() })
            .collect();
        Ok(TabulatedLaw {
            s_min,
            s_max,
            points,
            d_samples: d.clone(),
            log_d: UniformPchip::new(x0, h, d.iter().map(|v| v.ln()).collect()),
            log_s: UniformPchip::new(x0, h, s.iter().map(|v| v.ln()).collect()),
        })
    }

    /// Samples two functions on `count` geometric points.
    pub fn from_fn(
        s_min: f64,
        s_max: f64,
        count: usize,
        d: impl Fn(f64) -> f64,
        s: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid("table", "need at least two samples"));
        }
        let pts: Vec<f64> = (0..count)
            .map(|i| s_min * (s_max / s_min).powf(i as f64 / (count - 1) as f64))
            .collect();
        Self::new(
            s_min,
            s_max,
            pts.iter().map(|&p| d(p)).collect(),
            pts.iter().map(|&p| s(p)).collect(),
        )
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s_min, self.s_max)
    }

    /// Sample abscissae and the sampled `D`.
    pub fn d_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.d_samples.iter().copied())
    }

    fn out_of_domain(&self, s: f64) -> Error {
        Error::OutOfDomain {
            value: s,
            lo: 0.0,
            hi: self.s_max,
        }
    }

    pub fn d(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || s > self.s_max {
            return Err(self.out_of_domain(s));
        }
        let x = s.max(self.s_min).ln();
        Ok(self.log_d.eval(x).ok_or_else(|| self.out_of_domain(s))?.exp())
    }

    pub fn s(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || s > self.s_max {
            return Err(self.out_of_domain(s));
        }
        if s < self.s_min {
            let at_min = self.log_s.eval(self.s_min.ln()).unwrap().exp();
            return Ok(at_min * s / self.s_min);
        }
        Ok(self.log_s.eval(s.ln()).ok_or_else(|| self.out_of_domain(s))?.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KineticsMode {
    Prototype,
    Tabulated,
}

#[derive(Debug, Clone)]
enum Law {
    Prototype {
        alpha: f64,
        beta: f64,
        k_diff: f64,
        k_sens: f64,
    },
    Tabulated(TabulatedLaw),
}

/// The pair `(D, S)` with the decay floor `D >= k_D (1+s)^(-M)`.
///
/// Tables for `f`, `G`, `H` are built on first use and shared afterwards.
#[derive(Debug)]
pub struct Kinetics {
    law: Law,
    k_floor: f64,
    m_decay: f64,
    s0: f64,
    spec: TableSpec,
    table: OnceLock<std::result::Result<CumulativeTable, Error>>,
}

impl Clone for Kinetics {
    fn clone(&self) -> Self {
        let table = OnceLock::new();
        if let Some(Ok(t)) = self.table.get() {
            let _ = table.set(Ok(t.clone()));
        }
        Kinetics {
            law: self.law.clone(),
            k_floor: self.k_floor,
            m_decay: self.m_decay,
            s0: self.s0,
            spec: self.spec,
            table,
        }
    }
}

impl Kinetics {
    /// `D = K_D (s+1)^(-alpha)`, `S = k_S (s+1)^(beta-1) s`, with the floor
    /// defaulting to `k_D = K_D`, `M = alpha`.
    pub fn prototype(alpha: f64, beta: f64, k_diff: f64, k_sens: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("K_D", k_diff), ("k_S", k_sens)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Self::assemble(
            Law::Prototype {
                alpha,
                beta,
                k_diff,
                k_sens,
            },
            k_diff,
            alpha,
        )
    }

    /// Tabulated law; `(k_D, M)` is checked against every sample of `D`.
    pub fn tabulated(law: TabulatedLaw, k_floor: f64, m_decay: f64) -> Result<Self> {
        Self::assemble(Law::Tabulated(law), k_floor, m_decay)
    }

    fn assemble(law: Law, k_floor: f64, m_decay: f64) -> Result<Self> {
        let kin = Kinetics {
            law,
            k_floor,
            m_decay,
            s0: DEFAULT_S0,
            spec: TableSpec::default(),
            table: OnceLock::new(),
        };
        kin.check_floor()?;
        Ok(kin)
    }

    /// Replaces the decay floor `(k_D, M)`.
    pub fn with_floor(mut self, k_floor: f64, m_decay: f64) -> Result<Self> {
        self.k_floor = k_floor;
        self.m_decay = m_decay;
        self.check_floor()?;
        Ok(self)
    }

    /// Re-anchors `f`, `G`, `H` at a new base point.
    pub fn with_s0(mut self, s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", "must be positive"));
        }
        if s0 != self.s0 {
            self.s0 = s0;
            self.table = OnceLock::new();
        }
        Ok(self)
    }

    pub fn with_table_spec(mut self, spec: TableSpec) -> Self {
        self.spec = spec;
        self.table = OnceLock::new();
        self
    }

    fn check_floor(&self) -> Result<()> {
        if !(self.k_floor.is_finite() && self.k_floor > 0.0) {
            return Err(Error::invalid("k_D", "must be positive"));
        }
        if !self.m_decay.is_finite() {
            return Err(Error::invalid("M", "must be finite"));
        }
        match &self.law {
            Law::Prototype { alpha, k_diff, .. } => {
                // K_D (1+s)^-alpha >= k_D (1+s)^-M for all s >= 0
                if *k_diff < self.k_floor {
                    return Err(Error::invalid("k_D", "decay floor exceeds D(0) = K_D"));
                }
                if self.m_decay < *alpha {
                    return Err(Error::invalid("M", "D decays faster than (1+s)^-M"));
                }
            }
            Law::Tabulated(t) => {
                for (s, d) in t.d_samples() {
                    if d < self.k_floor * (1.0 + s).powf(-self.m_decay) * (1.0 - 1e-12) {
                        return Err(Error::invalid(
                            "k_D",
                            format!("D({s:e}) = {d:e} violates the algebraic decay floor"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> KineticsMode {
        match self.law {
            Law::Prototype { .. } => KineticsMode::Prototype,
            Law::Tabulated(_) => KineticsMode::Tabulated,
        }
    }

    /// `(alpha, beta)` in prototype mode.
    pub fn exponents(&self) -> Option<(f64, f64)> {
        match self.law {
            Law::Prototype { alpha, beta, .. } => Some((alpha, beta)),
            Law::Tabulated(_) => None,
        }
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn k_floor(&self) -> f64 {
        self.k_floor
    }

    pub fn m_decay(&self) -> f64 {
        self.m_decay
    }

    /// Largest argument accepted by every evaluator.
    pub fn s_max(&self) -> f64 {
        let requested = match &self.law {
            Law::Prototype { .. } => self.spec.s_hi,
            Law::Tabulated(t) => t.range().1.min(self.spec.s_hi),
        };
        let spec = TableSpec {
            s_hi: requested,
            ..self.spec
        };
        let (h, _, above) = layout(self.s0, &spec);
        self.s0 * (above as f64 * h).exp()
    }

    pub fn eval_d(&self, s: f64) -> Result<f64> {
        match &self.law {
            Law::Prototype { alpha, k_diff, .. } => {
                check_nonneg(s)?;
                Ok(k_diff * (s + 1.0).powf(-alpha))
            }
            Law::Tabulated(t) => t.d(s),
        }
    }

    pub fn eval_s(&self, s: f64) -> Result<f64> {
        match &self.law {
            Law::Prototype { beta, k_sens, .. } => {
                check_nonneg(s)?;
                Ok(k_sens * (s + 1.0).powf(beta - 1.0) * s)
            }
            Law::Tabulated(t) => t.s(s),
        }
    }

    /// `s D(s)/S(s)`, finite and positive at `s = 0` by continuity.
    pub fn q(&self, s: f64) -> Result<f64> {
        match &self.law {
            Law::Prototype {
                alpha,
                beta,
                k_diff,
                k_sens,
            } => {
                check_nonneg(s)?;
                Ok(k_diff / k_sens * (s + 1.0).powf(1.0 - alpha - beta))
            }
            Law::Tabulated(t) => {
                let (lo, _) = t.range();
                let s = s.max(lo);
                Ok(s * t.d(s)? / t.s(s)?)
            }
        }
    }

    /// `D(s)/S(s)` for `s > 0`.
    pub fn d_over_s(&self, s: f64) -> Result<f64> {
        Ok(self.q(s)? / s)
    }

    /// Closed forms exist for the prototype when `alpha + beta` is 0 or 1.
    fn closed_form(&self) -> Option<(f64, f64)> {
        match self.law {
            Law::Prototype {
                alpha,
                beta,
                k_diff,
                k_sens,
            } => {
                let p = alpha + beta;
                if p == 0.0 || p == 1.0 {
                    Some((p, k_diff / k_sens))
                } else {
                    None
                }
            }
            Law::Tabulated(_) => None,
        }
    }

    /// Cumulative table, built on first use.
    pub fn table(&self) -> Result<&CumulativeTable> {
        let built = self.table.get_or_init(|| {
            let spec = TableSpec {
                s_hi: self.s_max() * (1.0 + 1e-12),
                ..self.spec
            };
            CumulativeTable::build(|s| self.q(s).unwrap_or(f64::NAN), self.s0, spec)
        });
        built.as_ref().map_err(dup_error)
    }

    pub fn eval_f(&self, s: f64) -> Result<f64> {
        if let Some((p, c)) = self.closed_form() {
            check_range(s, self.s_max())?;
            if s <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let ln = (s / self.s0).ln();
            return Ok(if p == 1.0 { c * ln } else { c * ((s - self.s0) + ln) });
        }
        self.table()?.f(s)
    }

    pub fn eval_g(&self, s: f64) -> Result<f64> {
        if let Some((p, c)) = self.closed_form() {
            check_nonneg(s)?;
            check_range(s, self.s_max())?;
            let s0 = self.s0;
            let xlog = if s > 0.0 { s * (s / s0).ln() } else { 0.0 };
            let base = xlog - s + s0;
            return Ok(if p == 1.0 {
                c * base
            } else {
                c * (0.5 * (s - s0) * (s - s0) + base)
            });
        }
        self.table()?.g(s)
    }

    pub fn eval_h(&self, s: f64) -> Result<f64> {
        if let Some((p, c)) = self.closed_form() {
            check_range(s, self.s_max())?;
            let s0 = self.s0;
            if s <= s0 {
                return Ok(0.0);
            }
            return Ok(if p == 1.0 {
                c * (s - s0)
            } else {
                c * (0.5 * (s * s - s0 * s0) + s - s0)
            });
        }
        self.table()?.h(s)
    }

    /// Inverse of `f`; `-inf` maps to 0.
    pub fn f_inverse(&self, y: f64) -> Result<f64> {
        if y == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if let Some((p, c)) = self.closed_form() {
            let s_max = self.s_max();
            if y > self.eval_f(s_max)? {
                return Err(Error::OutOfDomain {
                    value: y,
                    lo: f64::NEG_INFINITY,
                    hi: self.eval_f(s_max)?,
                });
            }
            let s0 = self.s0;
            if p == 1.0 {
                return Ok(s0 * (y / c).exp());
            }
            // c((s - s0) + ln(s/s0)) = y; Newton on t = ln s is globally monotone
            let target = y / c + s0 + s0.ln();
            let mut t = if target > 1.0 { target.ln() } else { target - 1.0 };
            for _ in 0..100 {
                let e = t.exp();
                let step = (e + t - target) / (e + 1.0);
                t -= step;
                if step.abs() <= 1e-16 * t.abs().max(1.0) {
                    break;
                }
            }
            return Ok(t.exp());
        }
        self.table()?.f_inverse(y)
    }

    /// Supremum of `f` over the supported range.
    pub fn f_max(&self) -> Result<f64> {
        self.eval_f(self.s_max())
    }
}

fn check_nonneg(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            value: s,
            lo: 0.0,
            hi: f64::INFINITY,
        })
    }
}

fn check_range(s: f64, hi: f64) -> Result<()> {
    if s.is_nan() || s > hi * (1.0 + 1e-14) {
        Err(Error::OutOfDomain { value: s, lo: 0.0, hi })
    } else {
        Ok(())
    }
}

fn dup_error(e: &Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::invalid(name.clone(), reason.clone()),
        Error::OutOfDomain { value, lo, hi } => Error::OutOfDomain {
            value: *value,
            lo: *lo,
            hi: *hi,
        },
        Error::Quadrature { estimate } => Error::Quadrature { estimate: *estimate },
        other => Error::Runtime(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// growth conditions

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionParams {
    pub s0: f64,
    pub eps: f64,
    /// The constant `K` of the `H` condition.
    pub k_big: f64,
    /// The constant `k` of the `G` condition.
    pub k_small: f64,
    pub theta_log: f64,
    pub gamma: f64,
    pub n: usize,
    pub s_max: f64,
}

impl ConditionParams {
    pub fn new(n: usize, gamma: f64) -> Self {
        ConditionParams {
            s0: DEFAULT_S0,
            eps: 0.5,
            k_big: 1.0,
            k_small: 1.0,
            theta_log: 0.5,
            gamma,
            n,
            s_max: 1e8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::invalid("n", "growth conditions need n >= 4"));
        }
        if !(self.s0 > 1.0 && self.s0.is_finite()) {
            return Err(Error::invalid("s0", "must exceed 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("eps", "must lie in (0, 1)"));
        }
        if !(self.k_big > 0.0 && self.k_small > 0.0) {
            return Err(Error::invalid("K", "constants must be positive"));
        }
        if self.n == 4 && !(self.theta_log > 0.0 && self.theta_log < 1.0) {
            return Err(Error::invalid("theta_log", "must lie in (0, 1)"));
        }
        if self.n > 4 && !(self.gamma > 4.0 / self.n as f64) {
            return Err(Error::invalid("gamma", "must exceed 4/n"));
        }
        if !(self.s_max > self.s0) {
            return Err(Error::invalid("s_max", "must exceed s0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfiable,
    Violated,
    Inconclusive,
}

/// Sampled evaluation of one inequality `lhs(s) <= C w(s)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionCheck {
    pub satisfied_on_samples: bool,
    /// `min_s (C w - lhs) / (C w)` with the user's constant.
    pub worst_margin: f64,
    pub worst_s: f64,
    /// Smallest constant that works on all samples.
    pub required_constant: f64,
    /// Same over the lower half of the sampled log-range.
    pub required_constant_lower_half: f64,
    pub verdict: Verdict,
}

/// Exponent comparison for the prototype, `p = alpha + beta`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticVerdict {
    pub exponent_sum: f64,
    pub critical: f64,
    /// Some admissible `(eps, gamma, K, k)` exists.
    pub satisfiable: bool,
    /// The configured `eps`, `gamma`, `theta_log` work for large `s`.
    pub h_condition_with_params: bool,
    pub g_condition_with_params: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub samples: usize,
    pub h_condition: ConditionCheck,
    pub g_condition: ConditionCheck,
    pub asymptotic: Option<AsymptoticVerdict>,
    pub verdict: Verdict,
}

/// Relative growth of the required constant over the upper half of the
/// sampled range that is read as unbounded.
const GROWTH_VIOLATION: f64 = 1.25;

pub fn check_blowup_conditions(
    kin: &Kinetics,
    cp: &ConditionParams,
    samples: usize,
) -> Result<ConditionReport> {
    cp.validate()?;
    if samples < 4 {
        return Err(Error::invalid("samples", "need at least 4 sample points"));
    }
    if cp.s_max > kin.s_max() {
        return Err(Error::invalid("s_max", "exceeds the kinetics range"));
    }
    let rebased;
    let kin = if kin.s0() == cp.s0 {
        kin
    } else {
        rebased = kin.clone().with_s0(cp.s0)?;
        &rebased
    };
    let n = cp.n as f64;
    let a = (n - 4.0 - cp.eps) / n;

    let pts: Vec<f64> = (1..=samples)
        .map(|i| cp.s0 * (cp.s_max / cp.s0).powf(i as f64 / samples as f64))
        .collect();
    let mut h_rows = Vec::with_capacity(samples);
    let mut g_rows = Vec::with_capacity(samples);
    for &s in &pts {
        let (g, h) = (kin.eval_g(s)?, kin.eval_h(s)?);
        if cp.n == 4 {
            h_rows.push((s, h, s / s.ln()));
            g_rows.push((s, g, s * s.ln().powf(cp.theta_log)));
        } else {
            h_rows.push((s, h - a * g, s));
            g_rows.push((s, g, s.powf(2.0 - cp.gamma)));
        }
    }
    let h_condition = sampled_check(&h_rows, cp.k_big);
    let g_condition = sampled_check(&g_rows, cp.k_small);

    let asymptotic = kin.exponents().map(|(alpha, beta)| asymptotic_verdict(alpha + beta, cp));
    let verdict = match asymptotic {
        Some(v) if v.satisfiable => Verdict::Satisfiable,
        Some(_) => Verdict::Violated,
        None => match (h_condition.verdict, g_condition.verdict) {
            (Verdict::Violated, _) | (_, Verdict::Violated) => Verdict::Violated,
            (Verdict::Satisfiable, Verdict::Satisfiable) => Verdict::Satisfiable,
            _ => Verdict::Inconclusive,
        },
    };
    Ok(ConditionReport {
        n: cp.n,
        samples,
        h_condition,
        g_condition,
        asymptotic,
        verdict,
    })
}

fn sampled_check(rows: &[(f64, f64, f64)], constant: f64) -> ConditionCheck {
    let mut worst_margin = f64::INFINITY;
    let mut worst_s = rows[0].0;
    let mut req = 0.0f64;
    let mut req_half = 0.0f64;
    let half = rows.len() / 2;
    for (i, &(s, lhs, w)) in rows.iter().enumerate() {
        let margin = (constant * w - lhs) / (constant * w);
        if margin < worst_margin {
            worst_margin = margin;
            worst_s = s;
        }
        let c = lhs / w;
        req = req.max(c);
        if i < half {
            req_half = req_half.max(c);
        }
    }
    let verdict = if req <= req_half * (1.0 + 1e-9) {
        Verdict::Satisfiable
    } else if req > GROWTH_VIOLATION * req_half.max(0.0) && req > 0.0 {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    ConditionCheck {
        satisfied_on_samples: worst_margin >= 0.0,
        worst_margin,
        worst_s,
        required_constant: req,
        required_constant_lower_half: req_half,
        verdict,
    }
}

/// Large-`s` behaviour of the prototype: `H ~ s^(2-p)` for `p < 2`,
/// `G ~ s^(2-p)` for `p < 1`, `G ~ s ln s` at `p = 1` and `G ~ s` beyond.
pub fn asymptotic_verdict(p: f64, cp: &ConditionParams) -> AsymptoticVerdict {
    let n = cp.n as f64;
    let critical = 4.0 / n;
    let one = (p - 1.0).abs() < 1e-12;
    let (h_ok, g_ok) = if cp.n == 4 {
        (p > 1.0 && !one, p > 1.0 && !one)
    } else {
        let h_ok = if p < 1.0 && !one {
            // H/G -> 1 - p
            1.0 - p < (n - 4.0 - cp.eps) / n
        } else {
            true
        };
        let g_ok = if one {
            cp.gamma < 1.0
        } else if p < 1.0 {
            cp.gamma <= p
        } else {
            cp.gamma <= 1.0
        };
        (h_ok, g_ok)
    };
    AsymptoticVerdict {
        exponent_sum: p,
        critical,
        satisfiable: p > critical,
        h_condition_with_params: h_ok,
        g_condition_with_params: g_ok,
    }
}
