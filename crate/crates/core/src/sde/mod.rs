// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Nonlinear stochastic simulation of the scaled three-mode equations.
//!
//! State: lab-frame amplitudes `A_i, A_s, A_P`, memory variables `c_i, c_s`
//! and the colored signal/idler forces `f_i, f_s`. The forces are
//! Ornstein–Uhlenbeck processes updated exactly; in the Markovian limit they
//! are replaced by white increments. Noise is symmetric ordered, strength
//! `n + 1/2`, and enters as `i s f` with `s = 2g/sqrt(gammaP)`.

pub mod estimate;

pub use estimate::{
    estimate_order_parameters, estimate_quadrature_variances, welch_psd, OrderParameters,
    WelchSpectrum, PHI_DOT_WINDOW,
};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{drift, Frame, ModeState};
use crate::exec::{self, Execution};
use crate::linres::{self, LinresError};
use crate::meanfield::{classify_phase, steady_state, Z2Branch};
use crate::model::SystemParams;
use crate::spectra::PumpNoise;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdeError {
    #[error("invalid simulation config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("trajectory {traj} left the finite range at t = {t}; reduce dt")]
    StepOverflow { traj: usize, t: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(
        "{label} variance drifts between the two halves of the window ({z:.1} standard errors)"
    )]
    NonStationary { label: &'static str, z: f64 },
    #[error(transparent)]
    Linres(#[from] LinresError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    StochasticHeun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Time between recorded samples; rounded to a whole number of steps.
    pub record_interval: f64,
    /// Signal/idler Langevin forces on or off.
    pub noise: bool,
    pub pump_noise: PumpNoise,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_burn: 100.0,
            t_sample: 100.0,
            n_traj: 1,
            seed: 0,
            scheme: Scheme::StochasticHeun,
            record_interval: 0.05,
            noise: true,
            pump_noise: PumpNoise::Auto,
        }
    }
}

impl SimConfig {
    /// Largest step allowed for `params`.
    pub fn max_dt(params: &SystemParams) -> f64 {
        let mut m = (2.0 / params.gamma_p()).min(1.0);
        if !params.is_markovian() {
            m = m.min(params.tau_r());
        }
        m / 20.0
    }

    /// Shortest burn-in allowed; uses the slowest relaxation rate of the stable phase.
    pub fn min_burn(params: &SystemParams) -> Result<f64, SdeError> {
        let ss = steady_state(params, Z2Branch::Plus, 0.0);
        let spec = linres::eigenspectrum(&linres::build_embedded_matrix(params, &ss)?)?;
        let rate = -spec.relaxation_bound(ss.phase.is_broken());
        let slow = if rate > 0.0 { 1.0 / rate } else { 0.0 };
        Ok(20.0 * 1f64.max(params.tau_r()).max(slow))
    }

    pub fn steps_per_record(&self) -> usize {
        ((self.record_interval / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), SdeError> {
        let mut bad = Vec::new();
        let max_dt = Self::max_dt(params);
        if !(self.dt > 0.0 && self.dt <= max_dt * (1.0 + 1e-12)) {
            bad.push(format!("dt = {} must lie in (0, {max_dt}]", self.dt));
        }
        let min_burn = Self::min_burn(params)?;
        if !(self.t_burn >= min_burn * (1.0 - 1e-12)) {
            bad.push(format!("t_burn = {} is below {min_burn}", self.t_burn));
        }
        if !(self.t_sample > 0.0 && self.t_sample.is_finite()) {
            bad.push(format!("t_sample = {} must be positive", self.t_sample));
        }
        if self.n_traj == 0 {
            bad.push("n_traj must be at least 1".into());
        }
        if !(self.record_interval > 0.0) {
            bad.push(format!(
                "record_interval = {} must be positive",
                self.record_interval
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SdeError::InvalidConfig(bad))
        }
    }
}

/// Full simulator state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub modes: ModeState,
    pub force_idler: Complex64,
    pub force_signal: Complex64,
}

impl SimState {
    /// Modes at `modes`, forces at zero; memory slots follow the modes.
    pub fn from_modes(modes: ModeState) -> Self {
        SimState {
            modes,
            ..Default::default()
        }
    }
}

/// Recorded samples after burn-in, at uniform cadence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub idler: Vec<Complex64>,
    pub signal: Vec<Complex64>,
    pub pump: Vec<Complex64>,
    pub mem_idler: Vec<Complex64>,
    pub mem_signal: Vec<Complex64>,
    pub force_idler: Vec<Complex64>,
    pub force_signal: Vec<Complex64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_interval(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    fn push(&mut self, t: f64, s: &SimState) {
        self.times.push(t);
        self.idler.push(s.modes.idler);
        self.signal.push(s.modes.signal);
        self.pump.push(s.modes.pump);
        self.mem_idler.push(s.modes.mem_idler);
        self.mem_signal.push(s.modes.mem_signal);
        self.force_idler.push(s.force_idler);
        self.force_signal.push(s.force_signal);
    }
}

pub const TRAJECTORY_HEADER: &str = "t,re_ai,im_ai,re_as,im_as,re_ap,im_ap";

/// Writes every `decimate`-th sample.
pub fn write_trajectory_csv<W: std::io::Write>(
    tr: &Trajectory,
    decimate: usize,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for k in (0..tr.len()).step_by(decimate.max(1)) {
        let (a, b, c) = (tr.idler[k], tr.signal[k], tr.pump[k]);
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            tr.times[k], a.re, a.im, b.re, b.im, c.re, c.im
        )?;
    }
    Ok(())
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Exact Ornstein–Uhlenbeck update of a complex force with correlation time
/// `tau_r`. `strength` is `n + 1/2`; the stationary variance is
/// `strength / (2 tau_r)`.
pub fn ou_noise_step<R: Rng + ?Sized>(
    f: Complex64,
    dt: f64,
    tau_r: f64,
    strength: f64,
    rng: &mut R,
) -> Complex64 {
    let decay = (-dt / tau_r).exp();
    let var = strength / (2.0 * tau_r) * (-(-2.0 * dt / tau_r).exp_m1());
    let sd = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    f * decay + Complex64::new(sd * re, sd * im)
}

/// Per-trajectory generator: the stream index keeps trajectories independent
/// of scheduling.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

struct Stepper<'a> {
    params: &'a SystemParams,
    dt: f64,
    scheme: Scheme,
    s: f64,
    strength_i: f64,
    strength_s: f64,
    pump_sd: f64,
    colored: bool,
}

impl Stepper<'_> {
    fn step(&self, st: &SimState, rng: &mut ChaCha8Rng) -> SimState {
        let dt = self.dt;
        let p = self.params;
        let (fi1, fs1, kick_i, kick_s);
        if self.colored {
            let tau = p.tau_r();
            fi1 = ou_noise_step(st.force_idler, dt, tau, self.strength_i, rng);
            fs1 = ou_noise_step(st.force_signal, dt, tau, self.strength_s, rng);
            let (wi, ws) = match self.scheme {
                Scheme::EulerMaruyama => (st.force_idler, st.force_signal),
                Scheme::StochasticHeun => {
                    (0.5 * (st.force_idler + fi1), 0.5 * (st.force_signal + fs1))
                }
            };
            kick_i = I * self.s * wi * dt;
            kick_s = I * self.s * ws * dt;
        } else {
            fi1 = Complex64::new(0.0, 0.0);
            fs1 = fi1;
            kick_i = I * self.s * complex_normal(rng, self.strength_i * dt);
            kick_s = I * self.s * complex_normal(rng, self.strength_s * dt);
        }
        let kick_p = if self.pump_sd > 0.0 {
            complex_normal(rng, self.pump_sd * self.pump_sd * dt)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let noise = ModeState {
            idler: kick_i,
            signal: kick_s,
            pump: kick_p,
            ..Default::default()
        };
        let d0 = drift(p, Frame::LAB, &st.modes);
        let modes = match self.scheme {
            Scheme::EulerMaruyama => st.modes + d0 * dt + noise,
            Scheme::StochasticHeun => {
                let pred = st.modes + d0 * dt + noise;
                let d1 = drift(p, Frame::LAB, &pred);
                st.modes + (d0 + d1) * (0.5 * dt) + noise
            }
        };
        SimState {
            modes,
            force_idler: fi1,
            force_signal: fs1,
        }
    }
}

/// Runs one trajectory: burn-in, then `t_sample` of recorded samples.
pub fn integrate_trajectory(
    params: &SystemParams,
    config: &SimConfig,
    initial: &SimState,
    index: usize,
) -> Result<Trajectory, SdeError> {
    let mut rng = trajectory_rng(config.seed, index);
    let phase = classify_phase(params.mu(), params.kappa());
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    let signal_on = on(config.noise);
    let pump_on = on(config.noise && config.pump_noise.resolve(phase));
    let stepper = Stepper {
        params,
        dt: config.dt,
        scheme: config.scheme,
        s: params.signal_scale(),
        strength_i: signal_on * (params.n_th_i() + 0.5),
        strength_s: signal_on * (params.n_th_s() + 0.5),
        pump_sd: pump_on
            * params.pump_scale()
            * (params.gamma_p() * (params.n_th_p() + 0.5)).sqrt(),
        colored: !params.is_markovian(),
    };
    let mut st = *initial;
    if params.is_markovian() {
        st.modes.mem_idler = st.modes.idler;
        st.modes.mem_signal = st.modes.signal;
    }
    let n_burn = (config.t_burn / config.dt).ceil() as usize;
    let per = config.steps_per_record();
    let n_rec = ((config.t_sample / config.dt).round() as usize / per).max(1);
    let mut tr = Trajectory::default();
    let mut t = 0.0;
    let check = |s: &SimState, t: f64| {
        if s.modes.is_finite() {
            Ok(())
        } else {
            Err(SdeError::StepOverflow { traj: index, t })
        }
    };
    for k in 0..n_burn {
        st = stepper.step(&st, &mut rng);
        if k % 1024 == 0 {
            check(&st, t)?;
        }
        t += config.dt;
    }
    check(&st, t)?;
    let t0 = n_burn as f64 * config.dt;
    for r in 0..n_rec {
        for _ in 0..per {
            st = stepper.step(&st, &mut rng);
        }
        check(&st, t)?;
        t = t0 + ((r + 1) * per) as f64 * config.dt;
        tr.push(t, &st);
    }
    Ok(tr)
}

/// `n_traj` independent trajectories from the same initial state, in index order.
pub fn simulate_ensemble(
    params: &SystemParams,
    config: &SimConfig,
    initial: &SimState,
    exec: Execution,
) -> Result<Vec<Trajectory>, SdeError> {
    exec::map_indexed(exec, config.n_traj, |k| {
        integrate_trajectory(params, config, initial, k)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Memory, RawParams};

    #[test]
    fn ou_step_limits() {
        let mut rng = trajectory_rng(1, 0);
        let f = Complex64::new(0.3, -0.2);
        let g = ou_noise_step(f, 1e-14, 1.0, 0.5, &mut rng);
        assert!((g - f).norm() < 1e-6);
        // long step: stationary variance strength / (2 tau)
        let n = 200_000;
        let v: f64 = (0..n)
            .map(|_| ou_noise_step(f, 50.0, 2.0, 1.5, &mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((v / (1.5 / 4.0) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn config_validation() {
        let p = RawParams {
            mu: 0.5,
            memory: Memory::Kappa(1.0),
            ..RawParams::default()
        }
        .validate()
        .unwrap();
        assert_eq!(SimConfig::max_dt(&p), 1e-3);
        let ok = SimConfig {
            dt: 1e-3,
            t_burn: 60.0,
            ..SimConfig::default()
        };
        assert!(ok.validate(&p).is_ok());
        let bad = SimConfig {
            dt: 1e-2,
            t_burn: 1.0,
            n_traj: 0,
            ..SimConfig::default()
        };
        match bad.validate(&p) {
            Err(SdeError::InvalidConfig(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_determinism() {
        let p = RawParams {
            mu: 0.5,
            gamma_p: 20.0,
            memory: Memory::Kappa(1.0),
            ..RawParams::default()
        }
        .validate()
        .unwrap();
        let cfg = SimConfig {
            dt: 0.005,
            t_burn: 1.0,
            t_sample: 2.0,
            n_traj: 3,
            seed: 9,
            ..SimConfig::default()
        };
        let init = SimState::default();
        let a = simulate_ensemble(&p, &cfg, &init, Execution::Parallel).unwrap();
        let b = simulate_ensemble(&p, &cfg, &init, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].idler, a[1].idler);
        let c = simulate_ensemble(
            &p,
            &SimConfig { seed: 10, ..cfg },
            &init,
            Execution::Sequential,
        )
        .unwrap();
        assert_ne!(a[0].idler, c[0].idler);
    }

    #[test]
    fn undriven_noiseless_decays() {
        let p = RawParams {
            mu: 0.0,
            gamma_p: 20.0,
            memory: Memory::Kappa(1.0),
            ..RawParams::default()
        }
        .validate()
        .unwrap();
        let cfg = SimConfig {
            dt: 0.005,
            t_burn: 60.0,
            t_sample: 1.0,
            noise: false,
            ..SimConfig::default()
        };
        let init = SimState::from_modes(ModeState {
            idler: Complex64::new(0.3, 0.1),
            signal: Complex64::new(-0.2, 0.0),
            pump: Complex64::new(0.5, 0.5),
            ..Default::default()
        });
        let tr = integrate_trajectory(&p, &cfg, &init, 0).unwrap();
        assert!(tr.idler.last().unwrap().norm() < 1e-6);
        assert!(tr.pump.last().unwrap().norm() < 1e-6);
    }

    #[test]
    fn overflow_is_reported() {
        let p = RawParams {
            mu: 0.5,
            gamma_p: 20.0,
            memory: Memory::Kappa(1.0),
            ..RawParams::default()
        }
        .validate()
        .unwrap();
        let cfg = SimConfig {
            dt: 0.5,
            t_burn: 1e4,
            t_sample: 1.0,
            noise: false,
            ..SimConfig::default()
        };
        let init = SimState::from_modes(ModeState {
            pump: Complex64::new(1.0, 0.0),
            ..Default::default()
        });
        assert!(matches!(
            integrate_trajectory(&p, &cfg, &init, 0),
            Err(SdeError::StepOverflow { .. })
        ));
    }
}
