//! Run configuration: TOML parsing, defaults, validation and run ids.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::initdata::{self, Family, InitFamilyParams, Triple};
use crate::kinetics::{Kinetics, KineticsMode, TabulatedLaw, DEFAULT_S0};
use crate::simulator::TimeControls;
use crate::stationary::StationaryOptions;

/// Samples of a tabulated law as read from its CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableData {
    #[serde(skip)]
    pub path: PathBuf,
    pub s: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(rename = "S")]
    pub sens: Vec<f64>,
}

impl TableData {
    /// Reads `s,D,S` rows (header optional); `s` must be geometric.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("model.table", format!("{}: {e}", path.display())))?;
        let mut data = TableData {
            path: path.to_path_buf(),
            s: vec![],
            d: vec![],
            sens: vec![],
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    data.s.push(v[0]);
                    data.d.push(v[1]);
                    data.sens.push(v[2]);
                }
                _ if lineno == 0 => continue,
                _ => {
                    return Err(Error::config(
                        "model.table",
                        format!("line {}: expected three numbers s,D,S", lineno + 1),
                    ))
                }
            }
        }
        data.check()?;
        Ok(data)
    }

    fn check(&self) -> Result<()> {
        let k = self.s.len();
        if k < 2 {
            return Err(Error::config("model.table", "need at least two rows"));
        }
        if self.s[0] <= 0.0 {
            return Err(Error::config("model.table", "s must be positive"));
        }
        let ratio = (self.s[k - 1] / self.s[0]).ln() / (k - 1) as f64;
        for (i, &s) in self.s.iter().enumerate() {
            let expect = self.s[0] * (ratio * i as f64).exp();
            if (s - expect).abs() > 1e-9 * expect {
                return Err(Error::config("model.table", "s must be a geometric sequence"));
            }
        }
        Ok(())
    }

    pub fn law(&self) -> Result<TabulatedLaw> {
        TabulatedLaw::new(self.s[0], *self.s.last().unwrap(), self.d.clone(), self.sens.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub kinetics: KineticsMode,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "K_D")]
    pub k_diff: f64,
    #[serde(rename = "k_S")]
    pub k_sens: f64,
    #[serde(rename = "k_D")]
    pub k_floor: Option<f64>,
    #[serde(rename = "M")]
    pub m_decay: Option<f64>,
    pub s0: f64,
    pub table: Option<TableData>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryConfig {
    #[serde(flatten)]
    pub options: StationaryOptions,
    /// Relative bump amplitude of the initial guess for `v`.
    pub guess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub cells: usize,
    pub time: TimeControls,
    pub init: InitFamilyParams,
    pub output: OutputConfig,
    pub stationary: StationaryConfig,
}

impl RunConfig {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.model.n, self.model.radius, self.cells)
    }

    pub fn kinetics(&self) -> Result<Kinetics> {
        let m = &self.model;
        let kin = match m.kinetics {
            KineticsMode::Prototype => {
                let (alpha, beta) = (m.alpha.unwrap_or(0.0), m.beta.unwrap_or(0.0));
                let kin = Kinetics::prototype(alpha, beta, m.k_diff, m.k_sens)?;
                kin.with_floor(m.k_floor.unwrap_or(m.k_diff), m.m_decay.unwrap_or(alpha))?
            }
            KineticsMode::Tabulated => {
                let table = m
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::config("model.table", "required in tabulated mode"))?;
                Kinetics::tabulated(table.law()?, m.k_floor.unwrap_or(1.0), m.m_decay.unwrap_or(0.0))?
            }
        };
        kin.with_s0(m.s0)
    }

    pub fn initial(&self, g: &RadialGrid) -> Result<Triple> {
        initdata::make(g, &self.init)
    }

    pub fn eta(&self) -> f64 {
        self.init.eta_or_default(self.model.radius)
    }

    /// JSON of the resolved configuration.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved configuration,
    /// excluding the output directory.
    pub fn run_id(&self) -> String {
        let mut v = self.resolved_json();
        if let Some(out) = v.get_mut("output").and_then(|o| o.as_object_mut()) {
            out.remove("dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every downstream invariant before anything is computed.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.n < 2 {
            return Err(Error::config("model.n", "must be at least 2"));
        }
        if !(m.radius > 0.0 && m.radius.is_finite()) {
            return Err(Error::config("model.R", "must be positive"));
        }
        if self.cells < 8 {
            return Err(Error::config("grid.cells", "must be at least 8"));
        }
        if !(m.s0 > 1.0 && m.s0.is_finite()) {
            return Err(Error::config("model.s0", "must exceed 1"));
        }
        self.kinetics().map_err(|e| rekey("model", e))?;
        self.time.validate().map_err(|e| rekey("time", e))?;
        self.init
            .validate(m.n, m.radius)
            .map_err(|e| rekey("init", e))?;
        self.stationary.options.validate().map_err(|e| rekey("stationary", e))?;
        if !self.stationary.guess.is_finite() || self.stationary.guess <= -1.0 {
            return Err(Error::config("stationary.guess", "must be finite and above -1"));
        }
        Ok(())
    }
}

/// Turns an `InvalidParameter` into a `Config` error with a full key path.
fn rekey(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            let key = if name.contains('.') {
                name
            } else {
                format!("{section}.{name}")
            };
            Error::Config { key, reason }
        }
        other => other,
    }
}

/// A TOML section with key tracking, so leftovers can be reported.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(Error::config(name, "must be a table")),
        };
        Ok(Section {
            name,
            table,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&self, k: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn f64(&self, k: &str) -> Result<Option<f64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::config(self.key(k), "expected a number")),
        }
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64> {
        Ok(self.f64(k)?.unwrap_or(default))
    }

    fn required(&self, k: &str) -> Result<f64> {
        self.f64(k)?
            .ok_or_else(|| Error::config(self.key(k), "missing required key"))
    }

    fn uint(&self, k: &str) -> Result<Option<u64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Float(x)) if *x >= 0.0 && x.fract() == 0.0 && *x < 9e15 => Ok(Some(*x as u64)),
            Some(_) => Err(Error::config(self.key(k), "expected a nonnegative integer")),
        }
    }

    fn boolean(&self, k: &str, default: bool) -> Result<bool> {
        match self.raw(k) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(Error::config(self.key(k), "expected true or false")),
        }
    }

    fn string(&self, k: &str) -> Result<Option<&'a str>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(Error::config(self.key(k), "expected a string")),
        }
    }

    fn list(&self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(Error::config(self.key(k), "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(Value::Float(x)) => Ok(Some(vec![*x])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(_) => Err(Error::config(self.key(k), "expected a list of numbers")),
        }
    }

    fn finish(&self) -> Result<()> {
        if let Some(t) = self.table {
            let used = self.used.borrow();
            if let Some(k) = t.keys().find(|k| !used.contains(*k)) {
                return Err(Error::config(self.key(k), "unknown key"));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["model", "grid", "time", "limits", "init", "output", "stationary", "sweep"];

fn parse_root(text: &str) -> Result<Table> {
    let root: Table = toml::from_str(text).map_err(|e| Error::config("(document)", e.to_string()))?;
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(k.clone(), "unknown section"));
    }
    Ok(root)
}

/// Parses and validates a run configuration. `base` resolves relative table
/// paths.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let root = parse_root(text)?;
    if root.contains_key("sweep") {
        return Err(Error::config("sweep", "only allowed in sweep specifications"));
    }
    let cfg = from_root(&root, base)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent())
}

fn from_root(root: &Table, base: Option<&Path>) -> Result<RunConfig> {
    let model = Section::new(root, "model")?;
    let grid = Section::new(root, "grid")?;
    let time = Section::new(root, "time")?;
    let limits = Section::new(root, "limits")?;
    let init = Section::new(root, "init")?;
    let output = Section::new(root, "output")?;
    let stat = Section::new(root, "stationary")?;

    let n = model
        .uint("n")?
        .ok_or_else(|| Error::config("model.n", "missing required key"))? as usize;
    let radius = model.required("R")?;
    let mode = match model.string("kinetics")?.unwrap_or("prototype") {
        "prototype" => KineticsMode::Prototype,
        "tabulated" => KineticsMode::Tabulated,
        other => {
            return Err(Error::config(
                "model.kinetics",
                format!("unknown mode `{other}` (prototype or tabulated)"),
            ))
        }
    };
    let (alpha, beta) = match mode {
        KineticsMode::Prototype => (Some(model.required("alpha")?), Some(model.required("beta")?)),
        KineticsMode::Tabulated => (model.f64("alpha")?, model.f64("beta")?),
    };
    let table = match model.string("table")? {
        Some(p) => {
            let path = match base {
                Some(b) if Path::new(p).is_relative() => b.join(p),
                _ => PathBuf::from(p),
            };
            Some(TableData::load(&path)?)
        }
        None => None,
    };
    let model_cfg = ModelConfig {
        n,
        radius,
        kinetics: mode,
        alpha,
        beta,
        k_diff: model.f64_or("K_D", 1.0)?,
        k_sens: model.f64_or("k_S", 1.0)?,
        k_floor: model.f64("k_D")?,
        m_decay: model.f64("M")?,
        s0: model.f64_or("s0", DEFAULT_S0)?,
        table,
    };

    let cells = grid.uint("cells")?.unwrap_or(512) as usize;

    let d = TimeControls::default();
    let controls = TimeControls {
        t_end: time.f64_or("t_end", d.t_end)?,
        dt_init: time.f64_or("dt_init", d.dt_init)?,
        dt_min: time.f64_or("dt_min", d.dt_min)?,
        dt_max: time.f64_or("dt_max", d.dt_max)?,
        cfl: time.f64_or("cfl", d.cfl)?,
        stride: time.uint("stride")?.unwrap_or(d.stride),
        u_max: limits.f64_or("u_max", d.u_max)?,
        nonneg_tol: limits.f64_or("nonneg_tol", d.nonneg_tol)?,
        growth_cap: limits.f64_or("growth_cap", d.growth_cap)?,
        max_steps: limits.uint("max_steps")?.unwrap_or(d.max_steps),
        lp_p: output.f64_or("lp_p", d.lp_p)?,
    };

    let family = match init.string("family")? {
        None => Family::Gaussian,
        Some(s) => Family::parse(s).ok_or_else(|| {
            Error::config(
                "init.family",
                format!("unknown family `{s}` (constant, gaussian, highdim, critical4)"),
            )
        })?,
    };
    let mut params = InitFamilyParams::new(family, init.required("m")?);
    params.eps_mass = init.f64("eps_mass")?;
    params.eta = init.f64("eta")?;
    params.rho = init.f64("rho")?;
    params.gamma = init.f64_or("gamma", params.gamma)?;
    params.kappa = init.f64_or("kappa", params.kappa)?;
    params.theta_log = init.f64_or("theta_log", params.theta_log)?;
    params.width = init.f64("width")?;
    if let Some(np) = init.uint("N_psi")? {
        params.n_psi = u32::try_from(np).map_err(|_| Error::config("init.N_psi", "too large"))?;
    }

    let out = OutputConfig {
        dir: PathBuf::from(output.string("dir")?.unwrap_or("out")),
        emit_svg: output.boolean("emit_svg", true)?,
    };

    let sd = StationaryOptions::default();
    let stationary = StationaryConfig {
        options: StationaryOptions {
            tol: stat.f64_or("tol", sd.tol)?,
            max_iter: stat.uint("max_iter")?.unwrap_or(sd.max_iter as u64) as usize,
            damping: stat.f64_or("damping", sd.damping)?,
        },
        guess: stat.f64_or("guess", 0.0)?,
    };

    for s in [&model, &grid, &time, &limits, &init, &output, &stat] {
        s.finish()?;
    }
    Ok(RunConfig {
        model: model_cfg,
        cells,
        time: controls,
        init: params,
        output: out,
        stationary,
    })
}

/// A base configuration and the axes of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub workers: usize,
}

pub const WORKERS_ENV: &str = "CHEMLAB_WORKERS";

impl SweepSpec {
    /// One configuration per point of the cartesian product, in axis order
    /// alpha, beta, eta.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let axis = |v: &Vec<f64>, d: Option<f64>| if v.is_empty() { vec![d] } else { v.iter().map(|x| Some(*x)).collect() };
        let mut out = Vec::new();
        for a in axis(&self.alpha, self.base.model.alpha) {
            for b in axis(&self.beta, self.base.model.beta) {
                for e in axis(&self.eta, self.base.init.eta) {
                    let mut cfg = self.base.clone();
                    cfg.model.alpha = a;
                    cfg.model.beta = b;
                    cfg.init.eta = e;
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }

    pub fn size(&self) -> usize {
        self.alpha.len().max(1) * self.beta.len().max(1) * self.eta.len().max(1)
    }
}

pub fn parse_sweep(text: &str, base: Option<&Path>) -> Result<SweepSpec> {
    let mut root = parse_root(text)?;
    let sweep_table = match root.remove("sweep") {
        Some(Value::Table(t)) => t,
        Some(_) => return Err(Error::config("sweep", "must be a table")),
        None => Table::new(),
    };
    let mut holder = Table::new();
    holder.insert("sweep".into(), Value::Table(sweep_table));
    let sweep = Section::new(&holder, "sweep")?;
    let alpha = sweep.list("alpha")?.unwrap_or_default();
    let beta = sweep.list("beta")?.unwrap_or_default();
    let eta = sweep.list("eta")?.unwrap_or_default();
    let workers_key = sweep.uint("workers")?;
    sweep.finish()?;

    // swept axes may stand in for required base keys
    if let Some(Value::Table(model)) = root.get_mut("model") {
        for (k, axis) in [("alpha", &alpha), ("beta", &beta)] {
            if !model.contains_key(k) {
                if let Some(x) = axis.first() {
                    model.insert(k.into(), Value::Float(*x));
                }
            }
        }
    }
    let cfg = from_root(&root, base)?;
    cfg.validate()?;

    let workers = match std::env::var(WORKERS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| Error::config(WORKERS_ENV, "must be a positive integer"))?,
        Err(_) => workers_key.map(|w| w as usize).unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }),
    };
    if workers == 0 {
        return Err(Error::config("sweep.workers", "must be at least 1"));
    }
    let spec = SweepSpec {
        base: cfg,
        alpha,
        beta,
        eta,
        workers,
    };
    spec.expand()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_sweep(&text, path.parent())
}
