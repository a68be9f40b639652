// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Parameter space, unit conventions and the exponential memory kernel.
//!
//! All rates are measured in units of the intrinsic signal/idler damping
//! `gamma0` and all times in units of `1/gamma0`. Downstream code never sees
//! `gamma0` itself: it works with the normalized pump rate, the reservoir
//! decay rate `kappa = 1/(gamma0 tau_r)` and the normalized drive `mu`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Pump damping below this multiple of `gamma0` is rejected.
pub const MIN_PUMP_RATIO: f64 = 10.0;
/// Pump damping below this multiple of `gamma0` is accepted with a warning.
pub const RECOMMENDED_PUMP_RATIO: f64 = 100.0;

/// How the reservoir memory was specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Memory {
    /// Coherence time `tau_r` in units of `1/gamma0`; zero is the Markovian limit.
    TauR(f64),
    /// Normalized reservoir decay rate `kappa`; `+inf` is the Markovian limit.
    Kappa(f64),
}

impl Memory {
    pub const MARKOVIAN: Memory = Memory::TauR(0.0);
}

/// Unvalidated parameters, as read from a file or the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub gamma0: f64,
    pub gamma_p: f64,
    pub memory: Memory,
    pub g: f64,
    pub mu: f64,
    pub n_th_i: f64,
    pub n_th_s: f64,
    pub n_th_p: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams {
            gamma0: 1.0,
            gamma_p: RECOMMENDED_PUMP_RATIO,
            memory: Memory::MARKOVIAN,
            g: 0.1,
            mu: 0.0,
            n_th_i: 0.0,
            n_th_s: 0.0,
            n_th_p: 0.0,
        }
    }
}

/// A single violated constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { field: &'static str },
    NonPositiveRate { field: &'static str, value: f64 },
    NegativeOccupancy { field: &'static str, value: f64 },
    NegativeDrive { value: f64 },
    PumpNotFast { gamma_p: f64, minimum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field} is not a finite number"),
            Violation::NonPositiveRate { field, value } => {
                write!(f, "{field} = {value} violates its sign constraint")
            }
            Violation::NegativeOccupancy { field, value } => {
                write!(f, "{field} = {value} is a negative occupancy")
            }
            Violation::NegativeDrive { value } => write!(f, "mu = {value} is negative"),
            Violation::PumpNotFast { gamma_p, minimum } => {
                write!(
                    f,
                    "gammaP = {gamma_p} is below the fast-pump bound {minimum}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameters: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ParamError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ParamError::Invalid(v) => v,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Validated, immutable system parameters with derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    gamma0: f64,
    gamma_p: f64,
    tau_r: f64,
    kappa: f64,
    g: f64,
    mu: f64,
    n_th_i: f64,
    n_th_s: f64,
    n_th_p: f64,
    f_cr: f64,
}

impl RawParams {
    pub fn validate(&self) -> Result<SystemParams, ParamError> {
        validate(self)
    }
}

/// Checks every constraint and returns all violations at once.
pub fn validate(raw: &RawParams) -> Result<SystemParams, ParamError> {
    let mut bad = Vec::new();

    let finite = |field: &'static str, v: f64, bad: &mut Vec<Violation>| {
        // +inf is a legal kappa, NaN never is.
        if v.is_nan() || (v.is_infinite() && field != "kappa") {
            bad.push(Violation::NonFinite { field });
            false
        } else {
            true
        }
    };

    if finite("gamma0", raw.gamma0, &mut bad) && raw.gamma0 <= 0.0 {
        bad.push(Violation::NonPositiveRate {
            field: "gamma0",
            value: raw.gamma0,
        });
    }
    if finite("gammaP", raw.gamma_p, &mut bad) {
        if raw.gamma_p <= 0.0 {
            bad.push(Violation::NonPositiveRate {
                field: "gammaP",
                value: raw.gamma_p,
            });
        } else if raw.gamma_p < MIN_PUMP_RATIO {
            bad.push(Violation::PumpNotFast {
                gamma_p: raw.gamma_p,
                minimum: MIN_PUMP_RATIO,
            });
        }
    }
    if finite("g", raw.g, &mut bad) && raw.g <= 0.0 {
        bad.push(Violation::NonPositiveRate {
            field: "g",
            value: raw.g,
        });
    }
    if finite("mu", raw.mu, &mut bad) && raw.mu < 0.0 {
        bad.push(Violation::NegativeDrive { value: raw.mu });
    }
    for (field, v) in [
        ("n_th_i", raw.n_th_i),
        ("n_th_s", raw.n_th_s),
        ("n_th_P", raw.n_th_p),
    ] {
        if finite(field, v, &mut bad) && v < 0.0 {
            bad.push(Violation::NegativeOccupancy { field, value: v });
        }
    }

    let (tau_r, kappa) = match raw.memory {
        Memory::TauR(t) => {
            if finite("tau_r", t, &mut bad) && t < 0.0 {
                bad.push(Violation::NonPositiveRate {
                    field: "tau_r",
                    value: t,
                });
            }
            (t, if t == 0.0 { f64::INFINITY } else { 1.0 / t })
        }
        Memory::Kappa(k) => {
            if finite("kappa", k, &mut bad) && k <= 0.0 {
                bad.push(Violation::NonPositiveRate {
                    field: "kappa",
                    value: k,
                });
            }
            (if k.is_infinite() { 0.0 } else { 1.0 / k }, k)
        }
    };

    if !bad.is_empty() {
        return Err(ParamError::Invalid(bad));
    }
    if raw.gamma_p < RECOMMENDED_PUMP_RATIO {
        log::warn!(
            "gammaP = {} is below {RECOMMENDED_PUMP_RATIO}; adiabatic-pump closed forms lose accuracy",
            raw.gamma_p
        );
    }

    Ok(SystemParams {
        gamma0: raw.gamma0,
        gamma_p: raw.gamma_p,
        tau_r,
        kappa,
        g: raw.g,
        mu: raw.mu,
        n_th_i: raw.n_th_i,
        n_th_s: raw.n_th_s,
        n_th_p: raw.n_th_p,
        f_cr: raw.gamma_p * raw.gamma0 / (4.0 * raw.g),
    })
}

impl SystemParams {
    /// The rate unit as supplied by the user (all other fields are relative to it).
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
    /// Pump damping rate in units of `gamma0`.
    pub fn gamma_p(&self) -> f64 {
        self.gamma_p
    }
    /// Reservoir coherence time in units of `1/gamma0`; `0` in the Markovian limit.
    pub fn tau_r(&self) -> f64 {
        self.tau_r
    }
    /// `1/(gamma0 tau_r)`; `+inf` in the Markovian limit.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn n_th_i(&self) -> f64 {
        self.n_th_i
    }
    pub fn n_th_s(&self) -> f64 {
        self.n_th_s
    }
    pub fn n_th_p(&self) -> f64 {
        self.n_th_p
    }
    /// Mean signal/idler occupancy used to normalize cross-quadrature variances.
    pub fn n_th(&self) -> f64 {
        0.5 * (self.n_th_i + self.n_th_s)
    }
    /// Critical drive force `gammaP gamma0 / (4 g)`.
    pub fn f_cr(&self) -> f64 {
        self.f_cr
    }
    pub fn is_markovian(&self) -> bool {
        self.tau_r == 0.0
    }
    pub fn kernel(&self) -> MemoryKernel {
        MemoryKernel::new(1.0, self.tau_r)
    }
    /// Ratio between scaled and physical signal/idler amplitudes, `2g/sqrt(gamma0 gammaP)`.
    pub fn signal_scale(&self) -> f64 {
        2.0 * self.g / self.gamma_p.sqrt()
    }
    /// Ratio between scaled and physical pump amplitudes, `2g/gamma0`.
    pub fn pump_scale(&self) -> f64 {
        2.0 * self.g
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            gamma0: self.gamma0,
            gamma_p: self.gamma_p,
            memory: Memory::Kappa(self.kappa),
            g: self.g,
            mu: self.mu,
            n_th_i: self.n_th_i,
            n_th_s: self.n_th_s,
            n_th_p: self.n_th_p,
        }
    }

    /// Same system at a different drive and reservoir decay rate.
    pub fn with_mu_kappa(&self, mu: f64, kappa: f64) -> Result<SystemParams, ParamError> {
        RawParams {
            mu,
            memory: Memory::Kappa(kappa),
            ..self.to_raw()
        }
        .validate()
    }

    pub fn with_mu(&self, mu: f64) -> Result<SystemParams, ParamError> {
        RawParams {
            mu,
            ..self.to_raw()
        }
        .validate()
    }

    pub fn with_occupancies(&self, n_th: f64, n_th_p: f64) -> Result<SystemParams, ParamError> {
        RawParams {
            n_th_i: n_th,
            n_th_s: n_th,
            n_th_p,
            ..self.to_raw()
        }
        .validate()
    }
}

/// Value of the time-domain kernel at a single instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSample {
    /// Finite rate density.
    Value(f64),
    /// Markovian limit: the kernel is `weight * delta(t)` and has no pointwise value.
    DeltaAtOrigin { weight: f64 },
}

impl KernelSample {
    pub fn value(self) -> Option<f64> {
        match self {
            KernelSample::Value(v) => Some(v),
            KernelSample::DeltaAtOrigin { .. } => None,
        }
    }
}

/// Causal exponential dissipation kernel `gamma0 exp(-t/tau_r)/tau_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryKernel {
    pub gamma0: f64,
    pub tau_r: f64,
}

impl MemoryKernel {
    pub fn new(gamma0: f64, tau_r: f64) -> Self {
        MemoryKernel { gamma0, tau_r }
    }

    pub fn time(&self, t: f64) -> KernelSample {
        kernel_time(self, t)
    }

    pub fn freq(&self, omega: f64) -> Complex64 {
        kernel_freq(self, omega)
    }

    /// `Re gamma~(omega) = gamma0 / (1 + (omega tau_r)^2)`.
    pub fn freq_re(&self, omega: f64) -> f64 {
        let x = omega * self.tau_r;
        self.gamma0 / (1.0 + x * x)
    }
}

pub fn kernel_time(k: &MemoryKernel, t: f64) -> KernelSample {
    if k.tau_r == 0.0 {
        return KernelSample::DeltaAtOrigin { weight: k.gamma0 };
    }
    if t < 0.0 {
        return KernelSample::Value(0.0);
    }
    KernelSample::Value(k.gamma0 * (-t / k.tau_r).exp() / k.tau_r)
}

/// `gamma0 / (1 - i omega tau_r)`, written so that `f(-omega) == conj(f(omega))` bit for bit.
pub fn kernel_freq(k: &MemoryKernel, omega: f64) -> Complex64 {
    let x = omega * k.tau_r;
    let d = 1.0 + x * x;
    Complex64::new(k.gamma0 / d, k.gamma0 * x / d)
}

/// Errors from the flat `key = value` parameter format.
#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{value}` is not a number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("`tau_r` and `kappa` are mutually exclusive")]
    TauAndKappa,
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

pub const PARAM_KEYS: [&str; 9] = [
    "gamma0", "gammaP", "tau_r", "kappa", "g", "mu", "n_th_i", "n_th_s", "n_th_P",
];

impl FromStr for RawParams {
    type Err = ParamFileError;

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// keys not present keep their defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut raw = RawParams::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, line) in s.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ParamFileError::Syntax { line: line_no })?;
            let key = PARAM_KEYS
                .iter()
                .copied()
                .find(|k| *k == key)
                .ok_or_else(|| ParamFileError::UnknownKey {
                    line: line_no,
                    key: key.to_string(),
                })?;
            if seen.contains(&key) {
                return Err(ParamFileError::Duplicate {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            let v: f64 = value.parse().map_err(|_| ParamFileError::BadNumber {
                line: line_no,
                value: value.to_string(),
            })?;
            match key {
                "gamma0" => raw.gamma0 = v,
                "gammaP" => raw.gamma_p = v,
                "tau_r" => raw.memory = Memory::TauR(v),
                "kappa" => raw.memory = Memory::Kappa(v),
                "g" => raw.g = v,
                "mu" => raw.mu = v,
                "n_th_i" => raw.n_th_i = v,
                "n_th_s" => raw.n_th_s = v,
                "n_th_P" => raw.n_th_p = v,
                _ => unreachable!(),
            }
        }
        if seen.contains(&"tau_r") && seen.contains(&"kappa") {
            return Err(ParamFileError::TauAndKappa);
        }
        Ok(raw)
    }
}

impl fmt::Display for RawParams {
    /// Writes the same flat format accepted by [`RawParams::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gamma0 = {}", self.gamma0)?;
        writeln!(f, "gammaP = {}", self.gamma_p)?;
        match self.memory {
            Memory::TauR(t) => writeln!(f, "tau_r = {t}")?,
            Memory::Kappa(k) => writeln!(f, "kappa = {k}")?,
        }
        writeln!(f, "g = {}", self.g)?;
        writeln!(f, "mu = {}", self.mu)?;
        writeln!(f, "n_th_i = {}", self.n_th_i)?;
        writeln!(f, "n_th_s = {}", self.n_th_s)?;
        write!(f, "n_th_P = {}", self.n_th_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(gamma_p: f64, memory: Memory) -> RawParams {
        RawParams {
            gamma_p,
            memory,
            g: 1.0,
            mu: 0.5,
            ..RawParams::default()
        }
    }

    #[test]
    fn kernel_time_values() {
        let k = MemoryKernel::new(1.0, 2.0);
        assert_eq!(k.time(0.0), KernelSample::Value(0.5));
        assert_relative_eq!(
            k.time(2.0).value().unwrap(),
            0.5 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            k.time(2.0).value().unwrap(),
            0.18393972058572117,
            max_relative = 1e-12
        );
        assert_eq!(k.time(-1.0), KernelSample::Value(0.0));
    }

    #[test]
    fn markovian_kernel_is_a_delta() {
        let k = MemoryKernel::new(1.0, 0.0);
        for t in [-1.0, 0.0, 3.0] {
            assert!(k.time(t).value().is_none());
        }
        assert_eq!(k.freq(7.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn kernel_freq_values() {
        let k = MemoryKernel::new(1.0, 1.0);
        assert_eq!(k.freq(0.0), Complex64::new(1.0, 0.0));
        let z = k.freq(1.0);
        assert_relative_eq!(z.re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(z.im, 0.5, max_relative = 1e-15);
        assert_eq!(k.freq_re(3.0), k.freq(3.0).re);
    }

    #[test]
    fn validate_accepts_and_derives() {
        let p = raw(100.0, Memory::TauR(2.0)).validate().unwrap();
        assert_eq!(p.kappa(), 0.5);
        assert_eq!(p.f_cr(), 25.0);
        assert!(!p.is_markovian());
        let m = raw(100.0, Memory::MARKOVIAN).validate().unwrap();
        assert!(m.kappa().is_infinite());
        let m = raw(100.0, Memory::Kappa(f64::INFINITY)).validate().unwrap();
        assert_eq!(m.tau_r(), 0.0);
    }

    #[test]
    fn validate_rejects_slow_pump() {
        let err = RawParams {
            gamma0: 1.0,
            ..raw(5.0, Memory::TauR(1.0))
        }
        .validate()
        .unwrap_err();
        assert!(matches!(err.violations(), [Violation::PumpNotFast { .. }]));
    }

    #[test]
    fn validate_rejects_negative_memory_time() {
        let err = raw(100.0, Memory::TauR(-1.0)).validate().unwrap_err();
        assert_eq!(
            err.violations(),
            &[Violation::NonPositiveRate {
                field: "tau_r",
                value: -1.0
            }]
        );
    }

    #[test]
    fn validate_collects_every_violation() {
        let r = RawParams {
            g: 0.0,
            mu: -1.0,
            n_th_s: -0.5,
            memory: Memory::Kappa(0.0),
            ..RawParams::default()
        };
        let err = r.validate().unwrap_err();
        assert_eq!(err.violations().len(), 4);
        let nan = RawParams {
            mu: f64::NAN,
            ..RawParams::default()
        }
        .validate()
        .unwrap_err();
        assert!(matches!(
            nan.violations(),
            [Violation::NonFinite { field: "mu" }]
        ));
    }

    #[test]
    fn param_file_round_trip() {
        let text = "# test\ngamma0 = 1\ngammaP = 250\nkappa = 0.2\ng = 0.5\nmu = 1.5\nn_th_i = 5\nn_th_s = 5\nn_th_P = 2 # pump\n";
        let raw: RawParams = text.parse().unwrap();
        assert_eq!(raw.memory, Memory::Kappa(0.2));
        assert_eq!(raw.n_th_p, 2.0);
        let again: RawParams = raw.to_string().parse().unwrap();
        assert_eq!(raw, again);
    }

    #[test]
    fn param_file_errors() {
        assert!(matches!(
            "foo = 1".parse::<RawParams>(),
            Err(ParamFileError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            "tau_r = 1\nkappa = 1".parse::<RawParams>(),
            Err(ParamFileError::TauAndKappa)
        ));
        assert!(matches!(
            "mu 1".parse::<RawParams>(),
            Err(ParamFileError::Syntax { line: 1 })
        ));
        assert!(matches!(
            "mu = x".parse::<RawParams>(),
            Err(ParamFileError::BadNumber { .. })
        ));
        assert!(matches!(
            "mu = 1\nmu = 2".parse::<RawParams>(),
            Err(ParamFileError::Duplicate { .. })
        ));
    }
}
