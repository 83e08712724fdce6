use std::collections::BTreeMap;
use std::sync::Mutex;

use super::Scenario;
use crate::coefficients::FieldSpec;
use crate::error::{Error, Result};
use crate::geometry::{BoxKind, HalfSpaceGrid};
use crate::solver::{FaceAverage, SolverSettings};

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "seed",
    "grid.d",
    "grid.R",
    "grid.h",
    "field.variant",
    "field.matrix",
    "field.value",
    "field.mu0",
    "field.profile",
    "field.a_lo",
    "field.a_hi",
    "field.t0",
    "field.t1",
    "field.n",
    "field.c0",
    "field.base",
    "field.levels",
    "field.length",
    "field.width",
    "field.amplitude",
    "field.target_n2",
    "net.r_min",
    "net.delta0_radius",
    "solver.tol",
    "solver.max_iter",
    "solver.face_average",
    "regions.kind",
    "data.kind",
    "data.eps",
    "data.k",
    "theorem1.refine",
    "theorem1.tolerance",
    "theorem2.taus",
    "decay.taus",
    "decay.seeds",
    "decay.r_floor_cells",
    "decay.spread",
    "gamma.seeds",
    "gamma.targets",
    "gamma.spread",
    "counterexample.n",
    "counterexample.c0",
    "counterexample.R0",
    "counterexample.r_min",
    "counterexample.dkp_c0",
    "counterexample.min_r2",
    "corollary.tolerance",
    "convergence.cells",
    "convergence.min_order",
    "comparison.seeds",
    "comparison.slack",
];

/// Parsed `key = value` configuration for one scenario.
///
/// Numbers may be written as fractions (`1/256`). Every value read while
/// running, including defaults, is recorded and reported as the resolved
/// configuration.
#[derive(Debug)]
pub struct ScenarioConfig {
    scenario: Scenario,
    values: BTreeMap<String, String>,
    resolved: Mutex<BTreeMap<String, String>>,
}

impl Clone for ScenarioConfig {
    fn clone(&self) -> Self {
        Self {
            scenario: self.scenario,
            values: self.values.clone(),
            resolved: Mutex::new(self.resolved.lock().unwrap().clone()),
        }
    }
}

pub(crate) fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => text.parse().ok(),
    }
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, values: BTreeMap::new(), resolved: Mutex::new(BTreeMap::new()) }
    }

    /// Parses config text. A `scenario` key, when present, must agree with
    /// `scenario`.
    pub fn parse(scenario: Scenario, text: &str) -> Result<Self> {
        let mut cfg = Self::new(scenario);
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", no + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_pairs(scenario: Scenario, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut cfg = Self::new(scenario);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        if key == "scenario" && value != self.scenario.name() {
            return Err(Error::Config(format!(
                "config is for scenario '{value}', not '{}'",
                self.scenario.name()
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.values.insert("seed".into(), seed.to_string());
        self
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Every key read so far with its effective value.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.lock().unwrap().clone()
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.lock().unwrap().insert(key.to_string(), value);
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        v
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = match self.values.get(key) {
            Some(text) => parse_number(text)
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: cannot parse '{text}' as a number")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        let v = match self.values.get(key) {
            Some(text) => text
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: '{text}' is not a nonnegative integer")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        let v = match self.values.get(key).map(|s| s.trim()) {
            Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(Error::Config(format!("{key}: '{other}' is not true/false"))),
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.values.get(key) {
            Some(text) => text
                .split(',')
                .map(|s| parse_number(s).ok_or_else(|| Error::Config(format!("{key}: cannot parse '{s}'"))))
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        if v.is_empty() {
            return Err(Error::Config(format!("{key}: empty list")));
        }
        self.record(key, v.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        let v = match self.values.get(key) {
            Some(text) => text
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'"))))
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        if v.is_empty() {
            return Err(Error::Config(format!("{key}: empty list")));
        }
        self.record(key, v.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        match self.values.get("seed") {
            Some(text) => {
                let s = text.trim().parse().map_err(|_| Error::Config(format!("seed: '{text}' is not a u64")))?;
                self.record("seed", text.trim().to_string());
                Ok(Some(s))
            }
            None => Ok(None),
        }
    }

    pub fn d(&self) -> Result<usize> {
        let d = self.usize_or("grid.d", 1)?;
        if d != 1 && d != 2 {
            return Err(Error::Config(format!("grid.d = {d} must be 1 or 2")));
        }
        Ok(d)
    }

    pub fn half_width(&self) -> Result<f64> {
        let r = self.f64_or("grid.R", 1.0)?;
        if !(r > 0.0) {
            return Err(Error::Config(format!("grid.R = {r} must be positive")));
        }
        Ok(r)
    }

    /// Grid from `grid.d`, `grid.R`, `grid.h`, with `h` scaled by `refine`.
    pub fn grid(&self, default_cells: usize, refine: f64) -> Result<HalfSpaceGrid> {
        let d = self.d()?;
        let r = self.half_width()?;
        let h = self.f64_or("grid.h", r / default_cells as f64)?;
        HalfSpaceGrid::new(d, r, h * refine).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn solver(&self) -> Result<SolverSettings> {
        let defaults = SolverSettings::default();
        let face = self.str_or("solver.face_average", defaults.face_average.name());
        Ok(SolverSettings {
            tol: self.f64_or("solver.tol", defaults.tol)?,
            max_iter: self.usize_or("solver.max_iter", defaults.max_iter)?,
            face_average: FaceAverage::parse(&face)
                .ok_or_else(|| Error::Config(format!("solver.face_average: unknown '{face}'")))?,
        })
    }

    pub fn box_kind(&self) -> Result<BoxKind> {
        let s = self.str_or("regions.kind", BoxKind::default().name());
        BoxKind::parse(&s).ok_or_else(|| Error::Config(format!("regions.kind: unknown '{s}'")))
    }

    /// Field spec from the `field.*` keys, with `variant` as the default variant.
    pub fn field_spec(&self, default_variant: &str, seed: Option<u64>) -> Result<FieldSpec> {
        let d = self.d()?;
        let mut map: BTreeMap<String, String> =
            self.values.iter().filter(|(k, _)| k.starts_with("field.")).map(|(k, v)| (k.clone(), v.clone())).collect();
        map.entry("field.variant".into()).or_insert_with(|| default_variant.to_string());
        for (k, v) in &map {
            self.record(k, v.clone());
        }
        FieldSpec::from_map(&map, d, seed)
    }
}
