//! Flat JSON run configuration.
//!
//! Every key is optional except `amplitude`. Angles (`phi0`, `theta`) accept
//! numbers or strings such as `"pi/2"` or `"3pi/4"`, and either a single value
//! or a list; lists expand into one case per `(phi0, theta)` pair.

use std::f64::consts::PI;
use std::path::Path;

use catdecay::ensemble::Engine;
use catdecay::fock::CatParams;
use catdecay::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: Engine,
    pub kappa: f64,
    pub amplitude: f64,
    pub phi0: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Defaults to the amplitude-based truncation of the library.
    pub truncation: Option<usize>,
    pub tau_d: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub record_stride: usize,
    pub snapshot_times: Vec<f64>,
    pub snapshot_clicks: usize,
    pub stop_after_clicks: Option<usize>,
    /// Trajectories persisted with their full series.
    pub full_records: usize,
    /// Half-width of the click-triggered correlation window.
    pub window: f64,
    /// Bin count for charge histograms spanning the sample range.
    pub charge_bins: usize,
    /// When set, charge histograms use bins of this width with one centred on `Q = 0`.
    pub charge_bin: Option<f64>,
    pub wait_bin: f64,
    /// Full records whose stored states are rendered as Wigner grids.
    pub wigner_records: usize,
    pub wigner_points: usize,
}

/// One `(phi0, theta)` combination of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub label: String,
    pub sim: SimConfig,
}

const KEYS: [&str; 23] = [
    "engine",
    "kappa",
    "amplitude",
    "phi0",
    "theta",
    "r",
    "dt",
    "t_max",
    "truncation",
    "tau_d",
    "seed",
    "n_traj",
    "record_stride",
    "snapshot_times",
    "snapshot_clicks",
    "stop_after_clicks",
    "full_records",
    "window",
    "charge_bins",
    "charge_bin",
    "wait_bin",
    "wigner_records",
    "wigner_points",
];

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::config("<file>", format!("not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::config("<file>", "expected a JSON object"));
        };
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::config(key, "unknown key"));
        }
        let f = Fields(&map);
        let engine = match map.get("engine") {
            None => Engine::Fock,
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|_| CliError::config("engine", format!("expected fock, two_component or charge_sde, got {v}")))?,
        };
        Ok(Self {
            engine,
            kappa: f.number("kappa", 1.0)?,
            amplitude: f.required_number("amplitude")?,
            phi0: f.angles("phi0")?,
            theta: f.angles("theta")?,
            r: f.number("r", 0.0)?,
            dt: f.number("dt", 0.002)?,
            t_max: f.number("t_max", 6.0)?,
            truncation: f.optional_count("truncation")?,
            tau_d: f.number("tau_d", 0.04)?,
            seed: f.seed()?,
            n_traj: f.count("n_traj", 1000)?,
            record_stride: f.count("record_stride", 1)?,
            snapshot_times: f.numbers("snapshot_times")?,
            snapshot_clicks: f.count("snapshot_clicks", 0)?,
            stop_after_clicks: f.optional_count("stop_after_clicks")?,
            full_records: f.count("full_records", 32)?,
            window: f.number("window", 2.0)?,
            charge_bins: f.count("charge_bins", 80)?,
            charge_bin: f.optional_number("charge_bin")?,
            wait_bin: f.number("wait_bin", 0.0025)?,
            wigner_records: f.count("wigner_records", 0)?,
            wigner_points: f.count("wigner_points", 151)?,
        })
    }

    /// Validated simulation configs, `phi0` outermost.
    pub fn cases(&self) -> Result<Vec<Case>> {
        for (key, value) in [("window", self.window), ("wait_bin", self.wait_bin)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CliError::config(key, format!("must be positive, got {value}")));
            }
        }
        if let Some(w) = self.charge_bin {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::config("charge_bin", format!("must be positive, got {w}")));
            }
        }
        if self.charge_bins == 0 {
            return Err(CliError::config("charge_bins", "must be at least 1"));
        }
        if self.wigner_records > 0 && self.wigner_points < 2 {
            return Err(CliError::config("wigner_points", "must be at least 2"));
        }
        let mut out = Vec::new();
        for (i, &phi0) in self.phi0.iter().enumerate() {
            for (j, &theta) in self.theta.iter().enumerate() {
                let mut sim = SimConfig::new(CatParams::new(self.amplitude, phi0)?);
                sim.kappa = self.kappa;
                sim.r = self.r;
                sim.theta = theta;
                sim.dt = self.dt;
                sim.t_max = self.t_max;
                if let Some(n) = self.truncation {
                    sim.truncation = n;
                }
                sim.tau_d = self.tau_d;
                sim.seed = self.seed;
                sim.n_traj = self.n_traj;
                sim.record_stride = self.record_stride;
                sim.snapshot_times = self.snapshot_times.clone();
                sim.snapshot_clicks = self.snapshot_clicks;
                sim.stop_after_clicks = self.stop_after_clicks;
                sim.validate()?;
                out.push(Case { label: format!("case_p{i}_t{j}"), sim });
            }
        }
        Ok(out)
    }
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => as_number(key, v),
        }
    }

    fn required_number(&self, key: &str) -> Result<f64> {
        let v = self.0.get(key).ok_or_else(|| CliError::config(key, "missing"))?;
        as_number(key, v)
    }

    fn optional_number(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => as_number(key, v).map(Some),
        }
    }

    fn numbers(&self, key: &str) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items.iter().map(|v| as_number(key, v)).collect(),
            Some(v) => Ok(vec![as_number(key, v)?]),
        }
    }

    fn angles(&self, key: &str) -> Result<Vec<f64>> {
        let values = match self.0.get(key) {
            None => return Ok(vec![0.0]),
            Some(Value::Array(items)) => items.iter().map(|v| as_angle(key, v)).collect::<Result<Vec<_>>>()?,
            Some(v) => vec![as_angle(key, v)?],
        };
        if values.is_empty() {
            return Err(CliError::config(key, "empty list"));
        }
        Ok(values)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.optional_count(key)?.unwrap_or(default))
    }

    fn optional_count(&self, key: &str) -> Result<Option<usize>> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| CliError::config(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn seed(&self) -> Result<u64> {
        match self.0.get("seed") {
            None => Ok(0),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| CliError::config("seed", format!("expected an unsigned 64-bit integer, got {v}"))),
        }
    }
}

fn as_number(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| CliError::config(key, format!("expected a number, got {v}")))
}

fn as_angle(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => parse_angle(s).ok_or_else(|| CliError::config(key, format!("cannot read angle {s:?}"))),
        _ => as_number(key, v),
    }
}

/// Reads `x`, `pi`, `c pi`, `c*pi`, `pi/d`, `c pi/d` and `c*pi/d`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let Some(at) = s.find("pi") else {
        return s.parse().ok();
    };
    let coef = s[..at].trim_end_matches('*');
    let coef = match coef {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    let rest = &s[at + 2..];
    let den = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().ok()?,
        None if rest.is_empty() => 1.0,
        None => return None,
    };
    Some(coef * PI / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("pi/2"), Some(PI / 2.0));
        assert_eq!(parse_angle(" 3pi / 4 "), Some(3.0 * PI / 4.0));
        assert_eq!(parse_angle("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_angle("0.25"), Some(0.25));
        assert_eq!(parse_angle("pi2"), None);
        assert_eq!(parse_angle("x"), None);
    }

    #[test]
    fn defaults_and_lists() {
        let cfg = RunConfig::parse(r#"{"amplitude": 4, "phi0": ["0", "pi/2", "pi"], "theta": "pi/2"}"#).unwrap();
        assert_eq!(cfg.phi0, vec![0.0, PI / 2.0, PI]);
        assert_eq!(cfg.theta, vec![PI / 2.0]);
        assert_eq!(cfg.engine, Engine::Fock);
        let cases = cfg.cases().unwrap();
        assert_eq!(cases.len(), 3);
        assert_eq!(cases[2].label, "case_p2_t0");
        assert_eq!(cases[2].sim.truncation, 72);
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| match RunConfig::parse(text).and_then(|c| c.cases()) {
            Err(CliError::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key(r#"{"amplitude": 4, "colour": 1}"#), "colour");
        assert_eq!(key(r#"{"phi0": 0}"#), "amplitude");
        assert_eq!(key(r#"{"amplitude": -1}"#), "amplitude");
        assert_eq!(key(r#"{"amplitude": 4, "theta": "quarter"}"#), "theta");
        assert_eq!(key(r#"{"amplitude": 4, "engine": "gpu"}"#), "engine");
        assert_eq!(key(r#"{"amplitude": 4, "r": 1.5}"#), "r");
        assert_eq!(key(r#"{"amplitude": 4, "n_traj": 2.5}"#), "n_traj");
        // 2 kappa r nbar dt = 2 * 0.5 * 16 * 0.0125 = 0.2
        assert_eq!(key(r#"{"amplitude": 4, "r": 0.5, "dt": 0.0125}"#), "dt");
    }
}
