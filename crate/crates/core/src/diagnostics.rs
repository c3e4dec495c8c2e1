//! Mass, norms, the energy functional and its dissipation along trajectories.

use serde::Serialize;

use crate::error::Result;
use crate::grid::RadialGrid;
use crate::kinetics::Kinetics;
use crate::simulator::State;

/// Relative jump below which a face is treated as having equal states.
const FLAT_FACE: f64 = 1e-8;
/// Faces whose mobility falls below this are skipped in the dissipation.
pub const DEGENERATE_MOBILITY: f64 = 1e-14;

/// Face diffusivity and chemotactic mobility.
///
/// `d` is the arithmetic mean of `D(u)`; `s` is chosen so that
/// `s (f(u_R) - f(u_L)) = d (u_R - u_L)`, which makes the discrete flux
/// `-s (∇f(u) - ∇v)` vanish exactly on discrete equilibria `f(u) - v = const`.
/// Both vanish on the boundary faces.
#[derive(Debug, Clone)]
pub struct FaceMobility {
    pub d: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn face_mobility(kin: &Kinetics, u: &[f64]) -> Result<FaceMobility> {
    let n = u.len();
    let mut dc = Vec::with_capacity(n);
    let mut fc = Vec::with_capacity(n);
    for &x in u {
        let x = x.max(0.0);
        dc.push(kin.eval_d(x)?);
        fc.push(kin.eval_f(x)?);
    }
    let mut d = vec![0.0; n + 1];
    let mut s = vec![0.0; n + 1];
    for k in 1..n {
        let (a, b) = (u[k - 1].max(0.0), u[k].max(0.0));
        let dbar = 0.5 * (dc[k - 1] + dc[k]);
        d[k] = dbar;
        s[k] = if a <= 0.0 || b <= 0.0 {
            0.0
        } else if (b - a).abs() <= FLAT_FACE * a.max(b) {
            let mid = 0.5 * (a + b);
            dbar * kin.eval_s(mid)? / kin.eval_d(mid)?
        } else {
            dbar * (b - a) / (fc[k] - fc[k - 1])
        };
    }
    Ok(FaceMobility { d, s })
}

pub fn mass(g: &RadialGrid, u: &[f64]) -> f64 {
    g.integrate(u)
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn lp_norm(g: &RadialGrid, x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return sup_norm(x);
    }
    let powered: Vec<f64> = x.iter().map(|v| v.abs().powf(p)).collect();
    g.integrate(&powered).powf(1.0 / p)
}

/// `v_t` through the equation: `Δ_h v - v + w`.
pub fn v_rate(g: &RadialGrid, v: &[f64], w: &[f64]) -> Vec<f64> {
    g.laplacian(v)
        .iter()
        .zip(v)
        .zip(w)
        .map(|((l, a), b)| l - a + b)
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyParts {
    pub g_term: f64,
    pub uv_term: f64,
    pub vt_term: f64,
    pub elliptic_term: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.g_term - self.uv_term + self.vt_term + self.elliptic_term
    }
}

/// Terms of `∫G(u) - ∫uv + ½∫v_t² + ½∫(-Δv+v)²` on the discrete operators.
pub fn energy_parts(g: &RadialGrid, kin: &Kinetics, u: &[f64], v: &[f64], w: &[f64]) -> Result<EnergyParts> {
    let gu = u
        .iter()
        .map(|&x| kin.eval_g(x.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    let lap = g.laplacian(v);
    let vt: Vec<f64> = lap.iter().zip(v).zip(w).map(|((l, a), b)| (l - a + b).powi(2)).collect();
    let ell: Vec<f64> = lap.iter().zip(v).map(|(l, a)| (a - l).powi(2)).collect();
    Ok(EnergyParts {
        g_term: g.integrate(&gu),
        uv_term: g.integrate(&uv),
        vt_term: 0.5 * g.integrate(&vt),
        elliptic_term: 0.5 * g.integrate(&ell),
    })
}

pub fn energy(g: &RadialGrid, kin: &Kinetics, state: &State) -> Result<f64> {
    energy_initial(g, kin, &state.u, &state.v, &state.w)
}

/// Energy of an initial triple; identical code path to [`energy`].
pub fn energy_initial(g: &RadialGrid, kin: &Kinetics, u0: &[f64], v0: &[f64], w0: &[f64]) -> Result<f64> {
    Ok(energy_parts(g, kin, u0, v0, w0)?.total())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Dissipation {
    pub total: f64,
    pub chemotaxis: f64,
    pub grad_vt: f64,
    pub vt: f64,
    /// Faces skipped in the first term because the mobility degenerates.
    pub skipped: usize,
}

/// `∫S|(D/S)∇u - ∇v|² + 2∫|∇v_t|² + 2∫v_t²`, the first two on faces.
pub fn dissipation(g: &RadialGrid, kin: &Kinetics, state: &State) -> Result<Dissipation> {
    let mob = face_mobility(kin, &state.u)?;
    let gu = g.gradient_faces(&state.u);
    let gv = g.gradient_faces(&state.v);
    let mut skipped = 0;
    let mut chemo = vec![0.0; gu.len()];
    for k in 1..gu.len() - 1 {
        let s = mob.s[k];
        if s < DEGENERATE_MOBILITY {
            skipped += 1;
            continue;
        }
        // s |∇f(u) - ∇v|² written through s ∇f(u) = d ∇u
        let j = mob.d[k] * gu[k] - s * gv[k];
        chemo[k] = j * j / s.max(1e-300);
    }
    let vt = v_rate(g, &state.v, &state.w);
    let gvt: Vec<f64> = g.gradient_faces(&vt).iter().map(|x| x * x).collect();
    let vt2: Vec<f64> = vt.iter().map(|x| x * x).collect();
    let chemotaxis = g.integrate_faces(&chemo);
    let grad_vt = 2.0 * g.integrate_faces(&gvt);
    let vt_term = 2.0 * g.integrate(&vt2);
    if skipped > 0 {
        log::debug!("dissipation: skipped {skipped} degenerate faces");
    }
    Ok(Dissipation {
        total: chemotaxis + grad_vt + vt_term,
        chemotaxis,
        grad_vt,
        vt: vt_term,
        skipped,
    })
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub sup_u: f64,
    pub l2_u: f64,
    pub lp_u: f64,
    #[serde(rename = "F")]
    pub energy: f64,
    #[serde(rename = "Diss")]
    pub dissipation: f64,
    pub budget_residual: f64,
    pub sup_v: f64,
    pub sup_w: f64,
}

pub const TIMESERIES_HEADER: &str =
    "step,t,dt,mass,sup_u,l2_u,lp_u,F,Diss,budget_residual,sup_v,sup_w";

/// Floats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl EnergyReport {
    #[allow(clippy::too_many_arguments)]
    pub fn measure(
        g: &RadialGrid,
        kin: &Kinetics,
        state: &State,
        step: u64,
        dt: f64,
        p: f64,
        diss: f64,
        budget_residual: f64,
    ) -> Result<Self> {
        Ok(EnergyReport {
            step,
            t: state.t,
            dt,
            mass: mass(g, &state.u),
            sup_u: sup_norm(&state.u),
            l2_u: lp_norm(g, &state.u, 2.0),
            lp_u: lp_norm(g, &state.u, p),
            energy: energy(g, kin, state)?,
            dissipation: diss,
            budget_residual,
            sup_v: sup_norm(&state.v),
            sup_w: sup_norm(&state.w),
        })
    }

    pub fn csv_row(&self) -> String {
        let vals = [
            self.t,
            self.dt,
            self.mass,
            self.sup_u,
            self.l2_u,
            self.lp_u,
            self.energy,
            self.dissipation,
            self.budget_residual,
            self.sup_v,
            self.sup_w,
        ];
        let mut row = self.step.to_string();
        for v in vals {
            row.push(',');
            row.push_str(&fmt_f64(v));
        }
        row
    }
}

pub fn timeseries_csv(series: &[EnergyReport]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in series {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Largest `|F(t_k) - F_0 + Q_k|`, `Q_k` the trapezoidal integral of the
/// recorded dissipation up to `t_k`.
pub fn budget_audit(series: &[EnergyReport]) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    let mut q = 0.0;
    let mut worst = 0.0f64;
    for pair in series.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        q += 0.5 * (b.t - a.t) * (a.dissipation + b.dissipation);
        worst = worst.max((b.energy - first.energy + q).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_state(g: &RadialGrid, c: f64) -> State {
        let n = g.cells();
        State {
            t: 0.0,
            u: vec![c; n],
            v: vec![c; n],
            w: vec![c; n],
        }
    }

    #[test]
    fn constant_state_energy_and_dissipation() {
        let g = RadialGrid::new(3, 1.0, 64).unwrap();
        let kin = Kinetics::prototype(0.5, 0.6, 1.0, 1.0).unwrap();
        let c = 3.0;
        let st = constant_state(&g, c);
        let e = energy(&g, &kin, &st).unwrap();
        let expect = g.domain_volume() * (kin.eval_g(c).unwrap() - 0.5 * c * c);
        assert_relative_eq!(e, expect, max_relative = 1e-12);
        let d = dissipation(&g, &kin, &st).unwrap();
        assert_eq!(d.total, 0.0);
        assert_eq!(d.skipped, 0);
    }

    #[test]
    fn norms_of_constants() {
        let g = RadialGrid::new(4, 1.0, 50).unwrap();
        let u = vec![2.0; 50];
        let vol = g.domain_volume();
        assert_relative_eq!(mass(&g, &u), 2.0 * vol, max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&g, &u, 3.0), 2.0 * vol.powf(1.0 / 3.0), max_relative = 1e-13);
        assert_eq!(sup_norm(&u), 2.0);
    }

    #[test]
    fn energy_initial_matches_energy_bitwise() {
        let g = RadialGrid::new(4, 1.0, 64).unwrap();
        let kin = Kinetics::prototype(1.2, 0.3, 1.0, 1.0).unwrap();
        let u = g.sample(|r| 1.0 + (-10.0 * r * r).exp());
        let v = g.sample(|r| 0.5 + (1.0 - r * r).powi(2));
        let w = g.sample(|r| 0.3 + r * r);
        let st = State {
            t: 0.0,
            u: u.clone(),
            v: v.clone(),
            w: w.clone(),
        };
        assert_eq!(
            energy(&g, &kin, &st).unwrap().to_bits(),
            energy_initial(&g, &kin, &u, &v, &w).unwrap().to_bits()
        );
    }

    #[test]
    fn third_term_vanishes_when_w_equals_v_minus_laplacian() {
        let g = RadialGrid::new(4, 1.0, 32).unwrap();
        let v = g.sample(|r| 2.0 + (1.0 - r * r).powi(2));
        let lap = g.laplacian(&v);
        let w: Vec<f64> = v.iter().zip(&lap).map(|(a, l)| a - l).collect();
        let kin = Kinetics::prototype(0.5, 0.5, 1.0, 1.0).unwrap();
        let p = energy_parts(&g, &kin, &v, &v, &w).unwrap();
        assert!(p.vt_term < 1e-24);
    }

    #[test]
    fn mobility_matches_sensitivity_on_smooth_profiles() {
        let kin = Kinetics::prototype(0.3, 0.8, 1.0, 1.0).unwrap();
        let g = RadialGrid::new(2, 1.0, 400).unwrap();
        let u = g.sample(|r| 2.0 + (3.0 * r).cos());
        let mob = face_mobility(&kin, &u).unwrap();
        for k in [1, 100, 250, 399] {
            let ubar = 0.5 * (u[k - 1] + u[k]);
            assert_relative_eq!(mob.s[k], kin.eval_s(ubar).unwrap(), max_relative = 1e-4);
        }
        assert_eq!(mob.s[0], 0.0);
        assert_eq!(mob.s[400], 0.0);
    }

    #[test]
    fn csv_row_has_fixed_layout() {
        let r = EnergyReport {
            step: 3,
            t: 0.5,
            dt: 1e-3,
            mass: 1.0,
            sup_u: 2.0,
            l2_u: 1.0,
            lp_u: 1.0,
            energy: -1.0,
            dissipation: 0.0,
            budget_residual: 0.0,
            sup_v: 1.0,
            sup_w: 1.0,
        };
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), TIMESERIES_HEADER.split(',').count());
        assert!(row.starts_with("3,5.0000000000000000e-1,"));
    }

    #[test]
    fn audit_of_flat_series_is_zero() {
        let r = EnergyReport {
            step: 0,
            t: 0.0,
            dt: 0.1,
            mass: 1.0,
            sup_u: 1.0,
            l2_u: 1.0,
            lp_u: 1.0,
            energy: 2.0,
            dissipation: 0.0,
            budget_residual: 0.0,
            sup_v: 1.0,
            sup_w: 1.0,
        };
        let series: Vec<_> = (0..5).map(|k| EnergyReport { step: k, t: k as f64 * 0.1, ..r }).collect();
        assert_eq!(budget_audit(&series), 0.0);
    }
}
