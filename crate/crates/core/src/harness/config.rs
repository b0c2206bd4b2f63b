//! TOML run configuration with dot-path overrides and defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::ConfigError;
use crate::grid::{Grid, MAX_NORM_ORDER, MIN_NODES};
use crate::pressure::DEFAULT_REL_TOL;

pub const DEFAULT_CFL: f64 = 0.4;
pub const DEFAULT_PSI_TOL: f64 = 1e-8;
pub const DEFAULT_N_MAX: usize = 12;
pub const DEFAULT_NORM_ORDER: usize = 4;
pub const DEFAULT_DELTA_MIN: f64 = 1e-6;

/// Initial data family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preset {
    Rest,
    ScrewPinch { c0: f64, c1: f64 },
    RigidRotation { omega: f64 },
    PerturbedPinch { c0: f64, c1: f64, amp: f64 },
    Mms { case_id: u32 },
}

impl Preset {
    fn from_parts(name: &str, args: &[f64]) -> Result<Self, String> {
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        match name {
            "rest" => want(0).map(|_| Preset::Rest),
            "screw_pinch" => want(2).map(|_| Preset::ScrewPinch { c0: args[0], c1: args[1] }),
            "rigid_rotation" => want(1).map(|_| Preset::RigidRotation { omega: args[0] }),
            "perturbed_pinch" => want(3).map(|_| Preset::PerturbedPinch {
                c0: args[0],
                c1: args[1],
                amp: args[2],
            }),
            "mms" => {
                want(1)?;
                let id = args[0];
                if id >= 0.0 && id.fract() == 0.0 && id <= u32::MAX as f64 {
                    Ok(Preset::Mms { case_id: id as u32 })
                } else {
                    Err(format!("mms case id must be a nonnegative integer, got {id}"))
                }
            }
            other => Err(format!(
                "unknown preset `{other}`; expected rest, screw_pinch, rigid_rotation, perturbed_pinch or mms"
            )),
        }
    }

    fn args(&self) -> Vec<f64> {
        match *self {
            Preset::Rest => vec![],
            Preset::ScrewPinch { c0, c1 } => vec![c0, c1],
            Preset::RigidRotation { omega } => vec![omega],
            Preset::PerturbedPinch { c0, c1, amp } => vec![c0, c1, amp],
            Preset::Mms { case_id } => vec![case_id as f64],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Rest => "rest",
            Preset::ScrewPinch { .. } => "screw_pinch",
            Preset::RigidRotation { .. } => "rigid_rotation",
            Preset::PerturbedPinch { .. } => "perturbed_pinch",
            Preset::Mms { .. } => "mms",
        }
    }
}

/// Accepts `name` or `name(a, b, ...)`.
impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            None => (s, Vec::new()),
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| format!("missing `)` in preset `{s}`"))?;
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad preset argument `{}`", a.trim())))
                        .collect::<Result<Vec<_>, _>>()?
                };
                (s[..open].trim(), args)
            }
        };
        Preset::from_parts(name, &args)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args = self.args();
        if args.is_empty() {
            return write!(f, "{}", self.name());
        }
        let joined: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        write!(f, "{}({})", self.name(), joined.join(", "))
    }
}

/// Either a fixed step or a safety factor on the stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Dt(f64),
    CflSafety(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_every: usize,
    pub emit_fields: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Turn raised flags into a failed run.
    pub abort: bool,
    pub energy_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: Grid,
    pub rs: f64,
    pub t_final: f64,
    pub step: TimeStep,
    pub c0: f64,
    pub eps: f64,
    pub delta_min: f64,
    pub preset: Preset,
    /// Downgrade seed validation failures to warnings.
    pub allow_inadmissible: bool,
    pub n_max: usize,
    pub psi_tol: f64,
    pub norm_order: usize,
    pub rel_tol: f64,
    pub output: OutputConfig,
    pub monitor: MonitorConfig,
}

impl SimConfig {
    /// Hex SHA-256 of the canonical JSON form, ignoring the output
    /// directory so that relocated runs stay byte-identical.
    pub fn provenance_hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(source: &str) -> Result<SimConfig, ConfigError> {
    parse_config_with(source, &[])
}

/// Parses `source`, applies `key=value` overrides, fills defaults and
/// validates.
pub fn parse_config_with(source: &str, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    let mut doc: Table = source
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("<document>", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let mut reader = Reader {
        doc: &doc,
        used: BTreeSet::new(),
    };
    let cfg = reader.read()?;
    reader.reject_unknown()?;
    Ok(cfg)
}

/// Sets a dot-path key. The value is read as a TOML literal, falling back to
/// a bare string.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty path segment"));
    }
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = match entry {
            Value::Table(t) => t,
            _ => return Err(ConfigError::new(key, format!("`{p}` is not a section"))),
        };
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

struct Reader<'a> {
    doc: &'a Table,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn lookup(&mut self, path: &str) -> Result<Option<&'a Value>, ConfigError> {
        let mut table = self.doc;
        let parts: Vec<&str> = path.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            match table.get(*p) {
                None => return Ok(None),
                Some(Value::Table(t)) => table = t,
                Some(_) => return Err(ConfigError::new(*p, "expected a section")),
            }
        }
        self.used.insert(path.to_string());
        Ok(table.get(parts[parts.len() - 1]))
    }

    fn f64_opt(&mut self, path: &str) -> Result<Option<f64>, ConfigError> {
        match self.lookup(path)? {
            None => Ok(None),
            Some(Value::Float(x)) if x.is_finite() => Ok(Some(*x)),
            Some(Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(v) => Err(ConfigError::new(path, format!("expected a finite number, got {v}"))),
        }
    }

    fn f64_req(&mut self, path: &str) -> Result<f64, ConfigError> {
        self.f64_opt(path)?
            .ok_or_else(|| ConfigError::new(path, "required key is missing"))
    }

    fn usize_opt(&mut self, path: &str) -> Result<Option<usize>, ConfigError> {
        match self.lookup(path)? {
            None => Ok(None),
            Some(Value::Integer(n)) if *n >= 0 => Ok(Some(*n as usize)),
            Some(v) => Err(ConfigError::new(path, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn usize_req(&mut self, path: &str) -> Result<usize, ConfigError> {
        self.usize_opt(path)?
            .ok_or_else(|| ConfigError::new(path, "required key is missing"))
    }

    fn bool_opt(&mut self, path: &str) -> Result<Option<bool>, ConfigError> {
        match self.lookup(path)? {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(ConfigError::new(path, format!("expected a boolean, got {v}"))),
        }
    }

    fn string_opt(&mut self, path: &str) -> Result<Option<String>, ConfigError> {
        match self.lookup(path)? {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(ConfigError::new(path, format!("expected a string, got {v}"))),
        }
    }

    fn preset(&mut self) -> Result<Preset, ConfigError> {
        const KEY: &str = "initial.preset";
        match self.lookup(KEY)? {
            None => Err(ConfigError::new(KEY, "required key is missing")),
            Some(Value::String(s)) => s.parse().map_err(|e| ConfigError::new(KEY, e)),
            Some(Value::Table(t)) => {
                let kind = match t.get("kind") {
                    Some(Value::String(s)) => s.as_str(),
                    _ => return Err(ConfigError::new("initial.preset.kind", "missing preset kind")),
                };
                let names: &[&str] = match kind {
                    "screw_pinch" => &["c0", "c1"],
                    "rigid_rotation" => &["omega"],
                    "perturbed_pinch" => &["c0", "c1", "amp"],
                    "mms" => &["case_id"],
                    _ => &[],
                };
                for k in t.keys() {
                    if k != "kind" && !names.contains(&k.as_str()) {
                        return Err(ConfigError::new(format!("{KEY}.{k}"), "unknown preset parameter"));
                    }
                }
                let mut args = Vec::with_capacity(names.len());
                for n in names {
                    let key = format!("{KEY}.{n}");
                    match t.get(*n) {
                        Some(Value::Float(x)) => args.push(*x),
                        Some(Value::Integer(i)) => args.push(*i as f64),
                        _ => return Err(ConfigError::new(key, "missing or non-numeric preset parameter")),
                    }
                }
                Preset::from_parts(kind, &args).map_err(|e| ConfigError::new(KEY, e))
            }
            Some(v) => Err(ConfigError::new(KEY, format!("expected a string or table, got {v}"))),
        }
    }

    fn read(&mut self) -> Result<SimConfig, ConfigError> {
        let nr = self.usize_req("grid.Nr")?;
        let nz = self.usize_req("grid.Nz")?;
        let r0 = self.f64_req("grid.R0")?;
        let lz = self.f64_req("grid.Lz")?;
        for (key, n) in [("grid.Nr", nr), ("grid.Nz", nz)] {
            if n < MIN_NODES {
                return Err(ConfigError::new(key, format!("needs at least {MIN_NODES} nodes, got {n}")));
            }
        }
        if !(r0 > 0.0) {
            return Err(ConfigError::new("grid.R0", format!("must be positive, got {r0}")));
        }
        if !(lz > 0.0) {
            return Err(ConfigError::new("grid.Lz", format!("must be positive, got {lz}")));
        }
        let grid = Grid::new(nr, nz, r0, lz).map_err(|e| ConfigError::new("grid", e.to_string()))?;

        let rs = self.f64_req("wall.RS")?;
        if !(rs > r0) {
            return Err(ConfigError::new("wall.RS", format!("wall radius {rs} must exceed R0 = {r0}")));
        }

        let t_final = self.f64_req("time.T")?;
        if !(t_final > 0.0) {
            return Err(ConfigError::new("time.T", format!("must be positive, got {t_final}")));
        }
        let step = match (self.f64_opt("time.dt")?, self.f64_opt("time.cfl_safety")?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new("time.dt", "give either dt or cfl_safety, not both"));
            }
            (Some(dt), None) if dt > 0.0 => TimeStep::Dt(dt),
            (Some(dt), None) => return Err(ConfigError::new("time.dt", format!("must be positive, got {dt}"))),
            (None, c) => {
                let c = c.unwrap_or(DEFAULT_CFL);
                if !(c > 0.0 && c < 1.0) {
                    return Err(ConfigError::new("time.cfl_safety", format!("must lie in (0, 1), got {c}")));
                }
                TimeStep::CflSafety(c)
            }
        };

        let c0 = self.f64_req("physics.C0")?;
        let eps = self.f64_opt("physics.eps")?.unwrap_or(0.0);
        if !(eps >= 0.0) {
            return Err(ConfigError::new("physics.eps", format!("must be nonnegative, got {eps}")));
        }
        let delta_min = self.f64_opt("physics.delta_min")?.unwrap_or(DEFAULT_DELTA_MIN);
        if !(delta_min >= 0.0) {
            return Err(ConfigError::new("physics.delta_min", format!("must be nonnegative, got {delta_min}")));
        }

        let preset = self.preset()?;
        let allow_inadmissible = self.bool_opt("initial.allow_inadmissible")?.unwrap_or(false);

        let n_max = self.usize_opt("iteration.n_max")?.unwrap_or(DEFAULT_N_MAX);
        if n_max < 2 {
            return Err(ConfigError::new("iteration.n_max", format!("must be at least 2, got {n_max}")));
        }
        let psi_tol = self.f64_opt("iteration.psi_tol")?.unwrap_or(DEFAULT_PSI_TOL);
        if !(psi_tol > 0.0) {
            return Err(ConfigError::new("iteration.psi_tol", format!("must be positive, got {psi_tol}")));
        }
        let norm_order = self.usize_opt("iteration.norm_order")?.unwrap_or(DEFAULT_NORM_ORDER);
        if !(2..=MAX_NORM_ORDER).contains(&norm_order) {
            return Err(ConfigError::new(
                "iteration.norm_order",
                format!("must be 2, 3 or 4, got {norm_order}"),
            ));
        }
        let rel_tol = self.f64_opt("iteration.rel_tol")?.unwrap_or(DEFAULT_REL_TOL);
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(ConfigError::new("iteration.rel_tol", format!("must lie in (0, 1), got {rel_tol}")));
        }

        let directory = self.string_opt("output.directory")?.unwrap_or_else(|| "out".into());
        let snapshot_every = self.usize_opt("output.snapshot_every")?.unwrap_or(1);
        if snapshot_every == 0 {
            return Err(ConfigError::new("output.snapshot_every", "must be at least 1"));
        }
        let emit_fields = self.bool_opt("output.emit_fields")?.unwrap_or(true);

        let abort = self.bool_opt("monitor.abort")?.unwrap_or(false);
        let energy_margin = self.f64_opt("monitor.energy_margin")?.unwrap_or(0.0);
        if !(energy_margin >= 0.0) {
            return Err(ConfigError::new("monitor.energy_margin", format!("must be nonnegative, got {energy_margin}")));
        }

        Ok(SimConfig {
            grid,
            rs,
            t_final,
            step,
            c0,
            eps,
            delta_min,
            preset,
            allow_inadmissible,
            n_max,
            psi_tol,
            norm_order,
            rel_tol,
            output: OutputConfig {
                directory: directory.into(),
                snapshot_every,
                emit_fields,
            },
            monitor: MonitorConfig { abort, energy_margin },
        })
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        for (section, value) in self.doc {
            let Value::Table(t) = value else {
                return Err(ConfigError::new(section.as_str(), "unknown top-level key"));
            };
            for key in t.keys() {
                let path = format!("{section}.{key}");
                if !self.used.contains(&path) {
                    return Err(ConfigError::new(path, "unknown key"));
                }
            }
        }
        Ok(())
    }
}
