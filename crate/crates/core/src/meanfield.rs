// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Steady-state self-consistency, phase classification and the phase diagram.
//!
//! Amplitudes are in the scaled units where the pump reads `i mu` in the
//! disordered phase and the self-oscillation amplitude is `sqrt(mu - mu_cr)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{drift, Frame, ModeState};
use crate::exec::{self, Execution};
use crate::linres::{self, LinresError};
use crate::model::SystemParams;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reservoir decay rate separating the `U1` and `U1xZ2` regimes.
pub const KAPPA_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Disordered,
    U1,
    U1xZ2,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Disordered, Phase::U1, Phase::U1xZ2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Disordered => "disordered",
            Phase::U1 => "u1",
            Phase::U1xZ2 => "u1xz2",
        }
    }

    /// Phases with a spontaneously chosen signal-idler phase (and a Goldstone mode).
    pub fn is_broken(&self) -> bool {
        !matches!(self, Phase::Disordered)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown phase `{0}` (expected disordered, u1 or u1xz2)")]
pub struct ParsePhaseError(String);

impl FromStr for Phase {
    type Err = ParsePhaseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disordered" => Ok(Phase::Disordered),
            "u1" => Ok(Phase::U1),
            "u1xz2" => Ok(Phase::U1xZ2),
            _ => Err(ParsePhaseError(s.to_string())),
        }
    }
}

/// Sign of the frequency shift carried by the idler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(into = "i8")]
pub enum Z2Branch {
    #[default]
    Plus,
    Minus,
}

impl Z2Branch {
    pub fn sign(self) -> f64 {
        match self {
            Z2Branch::Plus => 1.0,
            Z2Branch::Minus => -1.0,
        }
    }
}

impl From<Z2Branch> for i8 {
    fn from(z: Z2Branch) -> i8 {
        match z {
            Z2Branch::Plus => 1,
            Z2Branch::Minus => -1,
        }
    }
}

/// Mean-field solution `A_i = i e^{i phi/2} r e^{-i z delta t}`,
/// `A_s = i e^{-i phi/2} r e^{+i z delta t}`, `A_P = pump_amp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub phase: Phase,
    pub amp_signal: f64,
    pub amp_idler: f64,
    #[serde(serialize_with = "ser_complex")]
    pub pump_amp: Complex64,
    /// Magnitude of the self-oscillation frequency shift.
    pub delta: f64,
    pub z2_branch: Z2Branch,
    pub phi: f64,
    pub mu_cr: f64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

impl SteadyState {
    /// Frequency shift of the idler, `z2 * delta`.
    pub fn idler_shift(&self) -> f64 {
        self.z2_branch.sign() * self.delta
    }

    pub fn signal_shift(&self) -> f64 {
        -self.idler_shift()
    }

    /// Frame in which this solution is time independent.
    pub fn frame(&self) -> Frame {
        Frame {
            idler: self.idler_shift(),
            signal: self.signal_shift(),
        }
    }

    pub fn idler_amplitude(&self) -> Complex64 {
        I * Complex64::from_polar(self.amp_idler, 0.5 * self.phi)
    }

    pub fn signal_amplitude(&self) -> Complex64 {
        I * Complex64::from_polar(self.amp_signal, -0.5 * self.phi)
    }

    /// Full embedded state in the co-rotating frame, memory variables included.
    pub fn rotating_state(&self, params: &SystemParams) -> ModeState {
        let k = params.kernel();
        let ai = self.idler_amplitude();
        let as_ = self.signal_amplitude();
        ModeState {
            idler: ai,
            signal: as_,
            pump: self.pump_amp,
            mem_idler: k.freq(self.idler_shift()) * ai,
            mem_signal: k.freq(self.signal_shift()) * as_,
        }
    }

    /// Lab-frame state at time `t`.
    pub fn lab_state(&self, params: &SystemParams, t: f64) -> ModeState {
        let r = self.rotating_state(params);
        let ri = Complex64::from_polar(1.0, -self.idler_shift() * t);
        let rs = Complex64::from_polar(1.0, -self.signal_shift() * t);
        ModeState {
            idler: r.idler * ri,
            signal: r.signal * rs,
            pump: r.pump,
            mem_idler: r.mem_idler * ri,
            mem_signal: r.mem_signal * rs,
        }
    }
}

/// Drive at which signal and idler start to self-oscillate.
pub fn critical_drive(kappa: f64) -> f64 {
    if kappa >= KAPPA_SPLIT {
        1.0
    } else {
        2.0 * kappa
    }
}

/// Self-oscillation frequency shift, nonzero only for `kappa < 1/2`.
pub fn frequency_shift(kappa: f64) -> f64 {
    if kappa >= KAPPA_SPLIT {
        0.0
    } else {
        kappa * (0.5 / kappa - 1.0).sqrt()
    }
}

/// Stable phase at `(mu, kappa)`; `mu == mu_cr` counts as disordered.
pub fn classify_phase(mu: f64, kappa: f64) -> Phase {
    if mu <= critical_drive(kappa) {
        Phase::Disordered
    } else if kappa >= KAPPA_SPLIT {
        Phase::U1
    } else {
        Phase::U1xZ2
    }
}

/// The stable mean-field solution for `params`.
pub fn steady_state(params: &SystemParams, z2_branch: Z2Branch, phi: f64) -> SteadyState {
    let phase = classify_phase(params.mu(), params.kappa());
    branch_state(params, phase, z2_branch, phi).expect("the stable branch always exists")
}

/// Any of the three solution families, stable or not, where it exists.
///
/// The disordered solution exists everywhere; `U1` needs `mu >= 1`;
/// `U1xZ2` needs `kappa < 1/2` and `mu >= 2 kappa`.
pub fn branch_state(
    params: &SystemParams,
    phase: Phase,
    z2_branch: Z2Branch,
    phi: f64,
) -> Option<SteadyState> {
    let mu = params.mu();
    let kappa = params.kappa();
    let mu_cr = critical_drive(kappa);
    let (threshold, delta) = match phase {
        Phase::Disordered => {
            return Some(SteadyState {
                phase,
                amp_signal: 0.0,
                amp_idler: 0.0,
                pump_amp: I * mu,
                delta: 0.0,
                z2_branch,
                phi,
                mu_cr,
            })
        }
        Phase::U1 => (1.0, 0.0),
        Phase::U1xZ2 if kappa < KAPPA_SPLIT => (2.0 * kappa, frequency_shift(kappa)),
        Phase::U1xZ2 => return None,
    };
    if mu < threshold {
        return None;
    }
    let r = (mu - threshold).sqrt();
    Some(SteadyState {
        phase,
        amp_signal: r,
        amp_idler: r,
        pump_amp: I * threshold,
        delta,
        z2_branch,
        phi,
        mu_cr,
    })
}

/// Largest deviation between the time derivative of the ansatz and the
/// noise-free equations of motion, evaluated in the lab frame at time `t`.
pub fn residual(params: &SystemParams, ss: &SteadyState, t: f64) -> f64 {
    let state = ss.lab_state(params, t);
    let rhs = drift(params, Frame::LAB, &state);
    let wi = -I * ss.idler_shift();
    let ws = -I * ss.signal_shift();
    let mut worst = [
        (wi * state.idler - rhs.idler).norm(),
        (ws * state.signal - rhs.signal).norm(),
        rhs.pump.norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if !params.is_markovian() {
        worst = worst
            .max((wi * state.mem_idler - rhs.mem_idler).norm())
            .max((ws * state.mem_signal - rhs.mem_signal).norm());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("{name} grid is empty")]
    Empty { name: &'static str },
    #[error("{name} grid is not strictly increasing at index {index}")]
    NotIncreasing { name: &'static str, index: usize },
}

pub fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), GridError> {
    if grid.is_empty() {
        return Err(GridError::Empty { name });
    }
    match grid.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(GridError::NotIncreasing { name, index: i + 1 }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagramRow {
    pub mu: f64,
    pub kappa: f64,
    pub phase: Phase,
    /// Least negative real part of the stable phase's spectrum, Goldstone mode excluded.
    pub max_re_lambda: Result<f64, LinresError>,
}

/// Stable phase and its slowest relaxation rate on a `mu x kappa` grid.
///
/// Rows are ordered kappa-major (all `mu` for the first `kappa`, then the next).
/// A failing point is reported in its row and does not stop the sweep.
pub fn phase_diagram(
    base: &SystemParams,
    mu_grid: &[f64],
    kappa_grid: &[f64],
    exec: Execution,
) -> Result<Vec<PhaseDiagramRow>, GridError> {
    check_grid("mu", mu_grid)?;
    check_grid("kappa", kappa_grid)?;
    let n_mu = mu_grid.len();
    Ok(exec::map_indexed(exec, n_mu * kappa_grid.len(), |idx| {
        let mu = mu_grid[idx % n_mu];
        let kappa = kappa_grid[idx / n_mu];
        let phase = classify_phase(mu, kappa);
        let max_re_lambda = base
            .with_mu_kappa(mu, kappa)
            .map_err(LinresError::from)
            .and_then(|p| {
                let ss = steady_state(&p, Z2Branch::Plus, 0.0);
                let m = linres::build_embedded_matrix(&p, &ss)?;
                let spec = linres::eigenspectrum(&m)?;
                Ok(spec.relaxation_bound(phase.is_broken()))
            });
        PhaseDiagramRow {
            mu,
            kappa,
            phase,
            max_re_lambda,
        }
    }))
}

pub const PHASE_DIAGRAM_HEADER: &str = "mu,kappa,phase,max_re_lambda";

pub fn write_phase_diagram_csv<W: std::io::Write>(
    rows: &[PhaseDiagramRow],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{PHASE_DIAGRAM_HEADER}")?;
    for r in rows {
        let v = r.max_re_lambda.as_ref().copied().unwrap_or(f64::NAN);
        writeln!(w, "{},{},{},{}", r.mu, r.kappa, r.phase, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Memory, RawParams};
    use approx::assert_relative_eq;

    fn params(mu: f64, kappa: f64) -> SystemParams {
        RawParams {
            mu,
            memory: Memory::Kappa(kappa),
            ..RawParams::default()
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn critical_drive_branches() {
        assert_eq!(critical_drive(2.0), 1.0);
        assert_eq!(critical_drive(0.25), 0.5);
        assert_eq!(critical_drive(0.5), 1.0);
        assert_eq!(critical_drive(f64::INFINITY), 1.0);
        assert_relative_eq!(critical_drive(0.5 - 1e-12), 1.0, epsilon = 1e-11);
    }

    #[test]
    fn frequency_shift_values() {
        assert_eq!(frequency_shift(1.0), 0.0);
        assert_relative_eq!(frequency_shift(0.25), 0.25, max_relative = 1e-15);
        assert_relative_eq!(
            frequency_shift(0.2),
            0.2 * 1.5f64.sqrt(),
            max_relative = 1e-15
        );
        // tau_r^{-1} sqrt(gamma0 tau_r / 2 - 1) written in terms of tau_r
        let tau = 7.0;
        assert_relative_eq!(
            frequency_shift(1.0 / tau),
            (tau / 2.0 - 1.0).sqrt() / tau,
            max_relative = 1e-14
        );
        assert!(frequency_shift(0.5 - 1e-10) < 1e-4);
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify_phase(1.5, 2.0), Phase::U1);
        assert_eq!(classify_phase(1.5, 0.3), Phase::U1xZ2);
        assert_eq!(classify_phase(0.3, 0.3), Phase::Disordered);
        assert_eq!(classify_phase(0.6, 0.3), Phase::Disordered);
        assert_eq!(classify_phase(1.0, 1.0), Phase::Disordered);
        assert_eq!(classify_phase(0.0, 1e-3), Phase::Disordered);
    }

    #[test]
    fn steady_state_examples() {
        let ss = steady_state(&params(0.5, 1.0), Z2Branch::Plus, 0.0);
        assert_eq!(ss.phase, Phase::Disordered);
        assert_eq!(ss.amp_idler, 0.0);
        assert_eq!(ss.pump_amp, Complex64::new(0.0, 0.5));

        let ss = steady_state(&params(2.0, 1.0), Z2Branch::Plus, 0.0);
        assert_eq!(ss.phase, Phase::U1);
        assert_eq!(ss.amp_signal, 1.0);
        assert_eq!(ss.pump_amp, I);
        assert_eq!(ss.delta, 0.0);

        let ss = steady_state(&params(1.0, 0.2), Z2Branch::Plus, 0.0);
        assert_eq!(ss.phase, Phase::U1xZ2);
        assert_relative_eq!(ss.mu_cr, 0.4);
        assert_relative_eq!(ss.amp_idler, 0.6f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(ss.delta, 0.24494897427831783, max_relative = 1e-14);
        assert_relative_eq!(ss.pump_amp.im, 0.4);
    }

    #[test]
    fn boundary_is_disordered_with_zero_amplitude() {
        let ss = steady_state(&params(0.4, 0.2), Z2Branch::Plus, 0.0);
        assert_eq!(ss.phase, Phase::Disordered);
        assert_eq!(ss.amp_signal, 0.0);
        let u = branch_state(&params(0.4, 0.2), Phase::U1xZ2, Z2Branch::Plus, 0.0).unwrap();
        assert_eq!(u.amp_signal, 0.0);
    }

    #[test]
    fn branches_outside_existence_domain() {
        assert!(branch_state(&params(0.9, 1.0), Phase::U1, Z2Branch::Plus, 0.0).is_none());
        assert!(branch_state(&params(2.0, 0.6), Phase::U1xZ2, Z2Branch::Plus, 0.0).is_none());
        assert!(branch_state(&params(2.0, 0.2), Phase::U1, Z2Branch::Plus, 0.0).is_some());
    }

    #[test]
    fn residual_vanishes_in_every_phase() {
        for (mu, kappa) in [
            (0.5, 1.0),
            (2.0, 1.0),
            (1.0, 0.2),
            (3.0, 0.05),
            (0.7, f64::INFINITY),
        ] {
            let p = params(mu, kappa);
            for z in [Z2Branch::Plus, Z2Branch::Minus] {
                let ss = steady_state(&p, z, 0.3);
                for t in [0.0, 1.7, 123.4] {
                    assert!(residual(&p, &ss, t) < 1e-12, "{mu} {kappa} {t}");
                }
            }
        }
    }

    #[test]
    fn wrong_amplitude_shows_up_in_residual() {
        let p = params(2.0, 1.0);
        let mut ss = steady_state(&p, Z2Branch::Plus, 0.0);
        ss.amp_idler *= 1.01;
        assert!(residual(&p, &ss, 0.0) > 1e-3);
    }

    #[test]
    fn z2_branches_mirror() {
        let p = params(1.0, 0.2);
        let a = steady_state(&p, Z2Branch::Plus, 0.0);
        let b = steady_state(&p, Z2Branch::Minus, 0.0);
        assert_eq!(a.amp_idler, b.amp_idler);
        assert_eq!(a.idler_shift(), -b.idler_shift());
    }

    #[test]
    fn grid_checks() {
        assert_eq!(check_grid("mu", &[]), Err(GridError::Empty { name: "mu" }));
        assert_eq!(
            check_grid("mu", &[0.0, 1.0, 1.0]),
            Err(GridError::NotIncreasing {
                name: "mu",
                index: 2
            })
        );
        assert!(check_grid("mu", &[0.0]).is_ok());
    }

    #[test]
    fn phase_parse_round_trip() {
        for p in Phase::ALL {
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), p);
        }
        assert!("ordered".parse::<Phase>().is_err());
    }
}
