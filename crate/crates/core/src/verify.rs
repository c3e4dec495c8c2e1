//! Check batteries behind `chemlab verify`. Every battery returns flat
//! records `{check, case, n, N, lhs, rhs, rel_residual, pass}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::identities::{self, IdentityReport};
use crate::kinetics::{self, ConditionParams, Kinetics, TableSpec, Verdict};
use crate::stationary::{self, StationaryOptions};

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRecord {
    pub check: String,
    pub case: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub cells: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_residual: f64,
    pub pass: bool,
}

impl VerifyRecord {
    fn from_report(case: impl Into<String>, r: &IdentityReport) -> Self {
        VerifyRecord {
            check: r.check.clone(),
            case: case.into(),
            n: r.n,
            cells: r.cells,
            lhs: r.lhs,
            rhs: r.rhs,
            rel_residual: r.rel_residual,
            pass: r.pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Hardy,
    Pohozaev,
    Weighted,
    Conditions,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::Hardy, Check::Pohozaev, Check::Weighted, Check::Conditions];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hardy" => Ok(Check::Hardy),
            "pohozaev" => Ok(Check::Pohozaev),
            "weighted" => Ok(Check::Weighted),
            "conditions" => Ok(Check::Conditions),
            other => Err(Error::invalid(
                "check",
                format!("unknown check {other:?} (hardy, pohozaev, weighted, conditions)"),
            )),
        }
    }

    pub fn run(self) -> Result<Vec<VerifyRecord>> {
        match self {
            Check::Hardy => hardy(),
            Check::Pohozaev => pohozaev(),
            Check::Weighted => weighted(),
            Check::Conditions => conditions(),
        }
    }
}

/// Continuum values for `u = (1-r²)²` on the unit ball of R⁴:
/// `∫|Δu|² = 16π²` and `4∫|∇u|²/|x|² = 16π²/3`.
pub const HARDY_ORACLE: (f64, f64) = (157.91367041742973, 52.63789013914324);
/// Cells used when comparing against [`HARDY_ORACLE`].
pub const HARDY_ORACLE_CELLS: usize = 65536;
pub const HARDY_ORACLE_TOL: f64 = 1e-8;

pub fn hardy() -> Result<Vec<VerifyRecord>> {
    let g = RadialGrid::new(4, 1.0, 2048)?;
    let mut out = Vec::new();
    for (name, f) in identities::hardy_rellich_suite() {
        let r = identities::hardy_rellich_check(&g, &g.sample(f))?;
        out.push(VerifyRecord::from_report(name, &r));
    }
    let fine = RadialGrid::new(4, 1.0, HARDY_ORACLE_CELLS)?;
    let r = identities::hardy_rellich_check(&fine, &fine.sample(|r| (1.0 - r * r).powi(2)))?;
    for (side, got, want) in [("oracle_lhs", r.lhs, HARDY_ORACLE.0), ("oracle_rhs", r.rhs, HARDY_ORACLE.1)] {
        let rel = (got - want).abs() / want.abs();
        out.push(VerifyRecord {
            check: "hardy".into(),
            case: side.into(),
            n: 4,
            cells: HARDY_ORACLE_CELLS,
            lhs: got,
            rhs: want,
            rel_residual: rel,
            pass: rel <= HARDY_ORACLE_TOL,
        });
    }
    Ok(out)
}

pub const POHOZAEV_MIN_ORDER: f64 = 1.7;

/// `v = (1-r²)²` at n = 5 and N = 2048, the order observed from N = 1024, and
/// the same profile at n = 4 where only the boundary term survives.
pub fn pohozaev() -> Result<Vec<VerifyRecord>> {
    let bump = |r: f64| (1.0 - r * r).powi(2);
    let mut out = Vec::new();
    let mut abs = Vec::new();
    for cells in [1024, 2048] {
        let g = RadialGrid::new(5, 1.0, cells)?;
        let r = identities::pohozaev_check(&g, &g.sample(bump))?;
        abs.push(r.abs_residual);
        if cells == 2048 {
            out.push(VerifyRecord::from_report("(1-r^2)^2", &r));
        }
    }
    let slope = (abs[0] / abs[1]).log2();
    out.push(VerifyRecord {
        check: "pohozaev".into(),
        case: "order".into(),
        n: 5,
        cells: 2048,
        lhs: slope,
        rhs: POHOZAEV_MIN_ORDER,
        rel_residual: (slope - 2.0).abs() / 2.0,
        pass: slope >= POHOZAEV_MIN_ORDER,
    });
    let g = RadialGrid::new(4, 1.0, 1024)?;
    let r = identities::pohozaev_check(&g, &g.sample(bump))?;
    out.push(VerifyRecord::from_report("(1-r^2)^2", &r));
    Ok(out)
}

/// One stationary problem for the weighted check.
#[derive(Debug, Clone, Copy)]
pub struct WeightedCase {
    pub name: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub cells: usize,
    /// Mean density `m/|B_R|`.
    pub mean: f64,
    pub guess: f64,
    pub eta: f64,
}

/// Constants below and above `s0`, and a concentrated state that exists
/// above the linear bifurcation threshold for `alpha + beta = 1/2 < 4/n`.
pub const WEIGHTED_CASES: [WeightedCase; 3] = [
    WeightedCase { name: "constant_below_s0", alpha: 0.25, beta: 0.25, radius: 1.0, cells: 128, mean: 1.0, guess: 0.0, eta: 0.5 },
    WeightedCase { name: "constant_above_s0", alpha: 0.25, beta: 0.25, radius: 1.0, cells: 128, mean: 10.0, guess: 0.0, eta: 0.5 },
    WeightedCase { name: "concentrated", alpha: 0.25, beta: 0.25, radius: 4.0, cells: 256, mean: 40.0, guess: 2.0, eta: 0.5 },
];

pub fn weighted_case(c: &WeightedCase) -> Result<VerifyRecord> {
    let g = RadialGrid::new(4, c.radius, c.cells)?;
    let kin = Kinetics::prototype(c.alpha, c.beta, 1.0, 1.0)?;
    let m = c.mean * g.domain_volume();
    let opts = StationaryOptions { tol: 1e-11, ..StationaryOptions::default() };
    let guess = stationary::bump_guess(&g, m, c.guess);
    let sol = stationary::solve_stationary(&g, &kin, m, &guess, &opts)?;
    let r = identities::weighted_identity_check(&g, &kin, &sol, c.eta)?;
    Ok(VerifyRecord::from_report(c.name, &r))
}

pub fn weighted() -> Result<Vec<VerifyRecord>> {
    WEIGHTED_CASES.par_iter().map(weighted_case).collect()
}

/// Points closer than this to `4/n` are not scored.
pub const CONDITION_BAND: f64 = 0.05;

/// Prototype grid `alpha ∈ {0, 0.1, .., 2}`, `beta ∈ {0, 0.1, .., 1}` at
/// n = 4, 5, 6. `lhs = alpha + beta`, `rhs = 4/n`; `pass` means the verdict
/// is satisfiable exactly when `lhs > rhs`.
pub fn conditions() -> Result<Vec<VerifyRecord>> {
    let mut pts = Vec::new();
    for n in [4usize, 5, 6] {
        for i in 0..=20 {
            for j in 0..=10 {
                let (a, b) = (0.1 * i as f64, 0.1 * j as f64);
                if (a + b - 4.0 / n as f64).abs() >= CONDITION_BAND {
                    pts.push((n, a, b));
                }
            }
        }
    }
    // the verdict only needs G and H over [s0, 1e8]
    let spec = TableSpec {
        s_lo: 1e-3,
        s_hi: 1e9,
        per_decade: 64,
        ..TableSpec::default()
    };
    pts.par_iter()
        .map(|&(n, a, b)| {
            let kin = Kinetics::prototype(a, b, 1.0, 1.0)?.with_table_spec(spec);
            let rep = kinetics::check_blowup_conditions(&kin, &ConditionParams::new(n, 1.0), 64)?;
            let crit = 4.0 / n as f64;
            let expected = if a + b > crit { Verdict::Satisfiable } else { Verdict::Violated };
            let label = match rep.verdict {
                Verdict::Satisfiable => "satisfiable",
                Verdict::Violated => "violated",
                Verdict::Inconclusive => "inconclusive",
            };
            Ok(VerifyRecord {
                check: "conditions".into(),
                case: format!("alpha={a:.1} beta={b:.1} {label}"),
                n,
                cells: 0,
                lhs: a + b,
                rhs: crit,
                rel_residual: (a + b - crit).abs() / crit,
                pass: rep.verdict == expected,
            })
        })
        .collect()
}
