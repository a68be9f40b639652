//! Resolution of parameter flags, parameter files and command defaults.

use std::collections::BTreeSet;
use std::fs;

use nmpo::model::{ParamError, PARAM_KEYS, RECOMMENDED_PUMP_RATIO};
use nmpo::{Memory, RawParams, SystemParams};
use serde_json::{json, Value};

use crate::args::Common;
use crate::error::CliError;
use crate::grid::Grid;

/// Command-specific fallbacks used when neither a flag nor the file sets an axis.
pub struct Defaults {
    pub mu: &'static str,
    pub kappa: &'static str,
    pub nth: &'static str,
}

pub struct Setup {
    raw: RawParams,
    pub mu: Grid,
    /// Reservoir axis, always as kappa values.
    pub kappa: Grid,
    /// `None` keeps the per-mode occupancies of the parameter file.
    pub nth: Option<Grid>,
    pub nth_pump: Option<f64>,
    pub seed: u64,
}

fn file_keys(text: &str) -> BTreeSet<String> {
    text.lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .map(|(k, _)| k.trim().to_string())
        .filter(|k| PARAM_KEYS.contains(&k.as_str()))
        .collect()
}

fn kappa_of(memory: Memory) -> f64 {
    match memory {
        Memory::Kappa(k) => k,
        Memory::TauR(0.0) => f64::INFINITY,
        Memory::TauR(t) => 1.0 / t,
    }
}

impl Setup {
    pub fn resolve(c: &Common, d: &Defaults) -> Result<Setup, CliError> {
        let (mut raw, keys) = match &c.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let raw: RawParams = text.parse().map_err(|e: nmpo::model::ParamFileError| {
                    CliError::invalid(json!({ "params_file": e.to_string() }))
                })?;
                (raw, file_keys(&text))
            }
            None => (RawParams::default(), BTreeSet::new()),
        };
        let has = |k: &str| keys.contains(k);
        if let Some(v) = c.gamma0 {
            raw.gamma0 = v;
        }
        if let Some(v) = c.gamma_p {
            raw.gamma_p = v;
        }
        if let Some(v) = c.g {
            raw.g = v;
        }
        let mu = match &c.mu {
            Some(g) => g.clone(),
            None if has("mu") => Grid::scalar(raw.mu),
            None => d.mu.parse().expect("default grid"),
        };
        let kappa = match (&c.kappa, &c.tau_r) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => Grid::with_spec(
                t.values
                    .iter()
                    .map(|&t| kappa_of(Memory::TauR(t)))
                    .collect(),
                format!("1/tau_r, tau_r = {t}"),
            ),
            (None, None) if has("kappa") || has("tau_r") => Grid::scalar(kappa_of(raw.memory)),
            (None, None) => d.kappa.parse().expect("default grid"),
        };
        let nth = match &c.nth {
            Some(g) => Some(g.clone()),
            None if has("n_th_i") || has("n_th_s") => None,
            None => Some(d.nth.parse().expect("default grid")),
        };
        let nth_pump = c.nth_pump.or(if has("n_th_P") {
            Some(raw.n_th_p)
        } else {
            None
        });
        let setup = Setup {
            raw,
            mu,
            kappa,
            nth,
            nth_pump,
            seed: c.seed,
        };
        setup.validate_all()?;
        if setup.raw.gamma_p < RECOMMENDED_PUMP_RATIO * setup.raw.gamma0 {
            log::warn!(
                "gammaP = {} is below {RECOMMENDED_PUMP_RATIO} gamma0; the fast-pump closed forms lose accuracy",
                setup.raw.gamma_p
            );
        }
        Ok(setup)
    }

    /// Occupancy values to sweep; the file's mean when it fixes them per mode.
    pub fn nth_values(&self) -> Vec<f64> {
        match &self.nth {
            Some(g) => g.values.clone(),
            None => vec![0.5 * (self.raw.n_th_i + self.raw.n_th_s)],
        }
    }

    pub fn params(&self, mu: f64, kappa: f64, n: f64) -> Result<SystemParams, ParamError> {
        let mut raw = RawParams {
            mu,
            memory: Memory::Kappa(kappa),
            ..self.raw.clone()
        };
        if self.nth.is_some() {
            raw.n_th_i = n;
            raw.n_th_s = n;
        }
        raw.n_th_p = self
            .nth_pump
            .unwrap_or(if self.nth.is_some() { n } else { raw.n_th_p });
        raw.validate()
    }

    /// Parameters at the first grid point, used as the base of sweeps.
    pub fn base(&self) -> SystemParams {
        self.params(
            self.mu.values[0],
            self.kappa.values[0],
            self.nth_values()[0],
        )
        .expect("validated in resolve")
    }

    fn validate_all(&self) -> Result<(), CliError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &n in &self.nth_values() {
            for &k in &self.kappa.values {
                for &m in &self.mu.values {
                    if let Err(e) = self.params(m, k, n) {
                        for v in e.violations() {
                            if seen.insert(v.to_string()) {
                                out.push(json!({ "mu": m, "kappa": k, "n_th": n, "violation": v, "message": v.to_string() }));
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(CliError::invalid(json!({ "violations": out })))
        }
    }

    pub fn require_single(&self) -> Result<(f64, f64, f64), CliError> {
        let n = self.nth_values();
        match (self.mu.single(), self.kappa.single(), n.as_slice()) {
            (Some(m), Some(k), [n]) => Ok((m, k, *n)),
            _ => Err(CliError::invalid(
                json!({ "message": "this command takes a single mu, kappa and nth value" }),
            )),
        }
    }

    /// Resolved inputs for the metadata header.
    pub fn describe(&self) -> Value {
        let nth = match &self.nth {
            Some(g) => json!(g.to_string()),
            None => json!({ "n_th_i": self.raw.n_th_i, "n_th_s": self.raw.n_th_s }),
        };
        json!({
            "gamma0": self.raw.gamma0,
            "gammaP": self.raw.gamma_p,
            "g": self.raw.g,
            "mu": self.mu.to_string(),
            "kappa": self.kappa.to_string(),
            "nth": nth,
            "nth_pump": self.nth_pump.map_or(json!("same as nth"), |v| json!(v)),
            "seed": self.seed,
        })
    }
}
