//! Run configuration: TOML file plus `key=value` overrides.
//!
//! Parsing goes through a raw layer with optional fields, then defaults are
//! filled in per system and the whole thing is validated at once. Nothing
//! is used until validation passes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qgaudin_core::integrate::{IntegratorConfig, Method};
use qgaudin_core::sampling::{random_chain, regular_chains_on_surface, scale_to_energy, SiteRanges};
use qgaudin_core::{ChainState, DeformParams, SiteState, SystemKind};

use crate::error::{CliError, CliResult};

const DEFAULT_Z: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Cg,
    Qcg,
    Qpg,
    Qrs,
    Kappa,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Cg => "cg",
            System::Qcg => "qcg",
            System::Qpg => "qpg",
            System::Qrs => "qrs",
            System::Kappa => "kappa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Rk45,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    Kappa,
    Energy,
}

/// Initial data: explicit sites, or a seeded draw from per-coordinate ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub seed: u64,
    pub sites: Option<Vec<[f64; 3]>>,
    pub s3: (f64, f64),
    pub splus: (f64, f64),
    pub sminus: (f64, f64),
    /// Rescale `s-` so that the total Casimir takes this value.
    pub energy: Option<f64>,
    /// Skip seeds whose deformed Gaudin clusters reach a pole; needs `energy`.
    pub regular: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        let r = SiteRanges::default();
        Self { seed: 0, sites: None, s3: r.s3, splus: r.splus, sminus: r.sminus, energy: None, regular: false }
    }
}

impl InitConfig {
    pub fn ranges(&self) -> SiteRanges {
        SiteRanges { s3: self.s3, splus: self.splus, sminus: self.sminus }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub method: MethodName,
    pub rtol: f64,
    pub atol: f64,
    /// Step of the fixed-step method.
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    pub sample_every: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            method: MethodName::Rk45,
            rtol: 1e-10,
            atol: 1e-12,
            dt: 0.01,
            t0: 0.0,
            t1: 20.0,
            sample_every: 0.05,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

/// Pass thresholds used by the report flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub drift_tol: f64,
    pub compare_tol: f64,
    pub period_rtol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { drift_tol: 1e-7, compare_tol: 1e-6, period_rtol: 1e-4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub axis: Option<Axis>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub n_values: Vec<usize>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { n_values: vec![2, 4, 8, 16, 32, 64] }
    }
}

/// Config as written by the user; system-dependent fields may be absent.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: Option<System>,
    pub n_sites: Option<usize>,
    pub z: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub clusters: Option<Vec<usize>>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: CheckSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub bench: BenchSection,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: System,
    pub n_sites: usize,
    pub z: f64,
    pub kappa: f64,
    pub init: InitConfig,
    pub integrator: IntegratorSection,
    pub clusters: Vec<usize>,
    pub output: OutputSection,
    pub checks: CheckSection,
    pub scan: ScanSection,
    pub bench: BenchSection,
}

/// Reads the TOML file (if any) and applies `--set` overrides in order.
pub fn load_table(path: Option<&Path>, sets: &[String]) -> CliResult<toml::Table> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    Ok(table)
}

/// Applies one `key=value` override; dotted keys address sub-tables.
/// The value is read as a TOML value, falling back to a bare string.
pub fn apply_set(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config("--set", format!("expected KEY=VALUE, got `{assignment}`")))?;
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() {
        return Err(CliError::config("--set", format!("empty key in `{assignment}`")));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("`{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

impl RawConfig {
    pub fn from_table(table: toml::Table) -> CliResult<Self> {
        RawConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| CliError::config("config", e.to_string().trim().to_string()))
    }
}

fn fixed(field: &str, system: System, given: Option<f64>, want: f64) -> CliResult<f64> {
    match given {
        Some(v) if v != want => Err(CliError::config(
            field,
            format!("system {} requires {field} = {want}, got {v}", system.name()),
        )),
        _ => Ok(want),
    }
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> CliResult<Self> {
        Self::resolve(RawConfig::from_table(table)?)
    }

    pub fn load(path: Option<&Path>, sets: &[String]) -> CliResult<Self> {
        Self::from_table(load_table(path, sets)?)
    }

    /// Fills system defaults and validates. Conflicting values are errors.
    pub fn resolve(raw: RawConfig) -> CliResult<Self> {
        let system = raw.system.ok_or_else(|| {
            CliError::config("system", "missing; expected one of cg, qcg, qpg, qrs, kappa")
        })?;
        let n_sites = raw
            .n_sites
            .ok_or_else(|| CliError::config("n_sites", "missing; expected an integer >= 1"))?;
        let (z, kappa) = match system {
            System::Cg => (fixed("z", system, raw.z, 0.0)?, fixed("kappa", system, raw.kappa, 1.0)?),
            System::Qcg => (raw.z.unwrap_or(DEFAULT_Z), fixed("kappa", system, raw.kappa, 1.0)?),
            System::Qpg | System::Qrs => {
                (raw.z.unwrap_or(DEFAULT_Z), fixed("kappa", system, raw.kappa, 0.0)?)
            }
            System::Kappa => (raw.z.unwrap_or(DEFAULT_Z), raw.kappa.unwrap_or(1.0)),
        };
        let cfg = RunConfig {
            system,
            n_sites,
            z,
            kappa,
            clusters: raw.clusters.unwrap_or_else(|| (1..=n_sites).collect()),
            init: raw.init,
            integrator: raw.integrator,
            output: raw.output,
            checks: raw.checks,
            scan: raw.scan,
            bench: raw.bench,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let n = self.n_sites;
        if n == 0 {
            return Err(CliError::config("n_sites", "must be at least 1"));
        }
        if !self.z.is_finite() {
            return Err(CliError::config("z", format!("must be finite, got {}", self.z)));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(CliError::config("kappa", format!("must be finite and >= 0, got {}", self.kappa)));
        }
        match self.system {
            System::Cg => {
                fixed("z", self.system, Some(self.z), 0.0)?;
                fixed("kappa", self.system, Some(self.kappa), 1.0)?;
            }
            System::Qcg => {
                fixed("kappa", self.system, Some(self.kappa), 1.0)?;
            }
            System::Qpg | System::Qrs => {
                fixed("kappa", self.system, Some(self.kappa), 0.0)?;
            }
            System::Kappa => {}
        }
        if matches!(self.system, System::Qcg | System::Qpg | System::Qrs) && self.z == 0.0 {
            return Err(CliError::config(
                "z",
                format!("system {} needs z != 0; use system = \"cg\" for the undeformed case", self.system.name()),
            ));
        }
        if let Some(sites) = &self.init.sites {
            if sites.len() != n {
                return Err(CliError::config(
                    "init.sites",
                    format!("{} sites given but n_sites = {n}", sites.len()),
                ));
            }
            if let Some(i) = sites.iter().position(|s| s.iter().any(|x| !x.is_finite())) {
                return Err(CliError::config("init.sites", format!("site {i} is not finite")));
            }
        }
        for (field, (lo, hi)) in [
            ("init.s3", self.init.s3),
            ("init.splus", self.init.splus),
            ("init.sminus", self.init.sminus),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(CliError::config(field, format!("need finite lo <= hi, got [{lo}, {hi}]")));
            }
        }
        if let Some(e) = self.init.energy {
            if !e.is_finite() {
                return Err(CliError::config("init.energy", format!("must be finite, got {e}")));
            }
        }
        if self.init.regular {
            if self.init.energy.is_none() {
                return Err(CliError::config("init.regular", "needs init.energy"));
            }
            if self.init.sites.is_some() {
                return Err(CliError::config("init.regular", "conflicts with explicit init.sites"));
            }
            if self.system == System::Qrs || self.kappa == 0.0 || self.z == 0.0 {
                return Err(CliError::config(
                    "init.regular",
                    "only meaningful for the deformed Gaudin family with kappa > 0",
                ));
            }
        }
        self.integrator_config().validate().map_err(|e| match e {
            qgaudin_core::Error::Config { field, message } => {
                CliError::config(format!("integrator.{field}"), message)
            }
            e => CliError::config("integrator", e.to_string()),
        })?;
        if self.clusters.is_empty() {
            return Err(CliError::config("clusters", "list at least one cluster size"));
        }
        if let Some(&m) = self.clusters.iter().find(|&&m| m == 0 || m > n) {
            return Err(CliError::config("clusters", format!("cluster size {m} out of range 1..={n}")));
        }
        for (field, v) in [
            ("checks.drift_tol", self.checks.drift_tol),
            ("checks.compare_tol", self.checks.compare_tol),
            ("checks.period_rtol", self.checks.period_rtol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::config(field, format!("must be positive, got {v}")));
            }
        }
        if let Some(v) = self.scan.values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::config("scan.values", format!("non-finite value {v}")));
        }
        if self.bench.n_values.contains(&0) {
            return Err(CliError::config("bench.n_values", "sizes must be at least 1"));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::config("output.formats", "list at least one format"));
        }
        Ok(())
    }

    pub fn params(&self) -> DeformParams {
        DeformParams { z: self.z, kappa: self.kappa }
    }

    pub fn system_kind(&self) -> SystemKind {
        match self.system {
            System::Qrs => SystemKind::qrs(self.z),
            _ => SystemKind::gaudin(self.params()),
        }
    }

    /// Integrator settings, tracking the configured clusters.
    pub fn integrator_config(&self) -> IntegratorConfig {
        let s = &self.integrator;
        let method = match s.method {
            MethodName::Rk45 => Method::Rk45Adaptive { rtol: s.rtol, atol: s.atol },
            MethodName::Rk4 => Method::Rk4Fixed { dt: s.dt },
        };
        IntegratorConfig {
            method,
            t0: s.t0,
            t1: s.t1,
            sample_every: s.sample_every,
            track_clusters: self.clusters.clone(),
            max_steps: s.max_steps,
        }
    }

    pub fn initial_chain(&self) -> CliResult<ChainState> {
        let p = self.params();
        if let (true, Some(e)) = (self.init.regular, self.init.energy) {
            let found = regular_chains_on_surface(self.n_sites, p, &self.init.ranges(), e, 1, self.init.seed)
                .map_err(|err| CliError::config("init.regular", err.to_string()))?;
            return Ok(found.into_iter().next().expect("one chain requested").1);
        }
        let c = match &self.init.sites {
            Some(sites) => ChainState::new(sites.iter().map(|&a| SiteState::from_array(a)).collect(), p)?,
            None => random_chain(self.n_sites, p, &self.init.ranges(), self.init.seed)?,
        };
        match self.init.energy {
            Some(e) => scale_to_energy(&c, e)
                .map_err(|err| CliError::config("init.energy", err.to_string())),
            None => Ok(c),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
