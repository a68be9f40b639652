// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Noise-free drift of the scaled three-mode equations with the memory
//! convolution replaced by one auxiliary variable per signal/idler mode.
//!
//! For the exponential kernel the convolution `c(t) = (gamma * A)(t)` obeys
//! `dc/dt = (A - c)/tau_r` exactly, so the embedded system is local in time.
//! The drift can be evaluated in a frame rotating at `(delta_idler,
//! delta_signal)`; in that frame a self-oscillating steady state is static.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::Serialize;

use crate::model::SystemParams;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Frequencies of the frame in which the drift is evaluated.
/// A field `A(t)` is represented as `a(t) = A(t) exp(i delta t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Frame {
    pub idler: f64,
    pub signal: f64,
}

impl Frame {
    pub const LAB: Frame = Frame {
        idler: 0.0,
        signal: 0.0,
    };

    pub fn is_static(&self) -> bool {
        self.idler == 0.0 && self.signal == 0.0
    }
}

/// Complex amplitudes of the embedded system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeState {
    pub idler: Complex64,
    pub signal: Complex64,
    pub pump: Complex64,
    /// Memory variables `c = gamma * A`; unused in the Markovian limit.
    pub mem_idler: Complex64,
    pub mem_signal: Complex64,
}

impl ModeState {
    pub fn max_abs(&self) -> f64 {
        [
            self.idler,
            self.signal,
            self.pump,
            self.mem_idler,
            self.mem_signal,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.idler,
            self.signal,
            self.pump,
            self.mem_idler,
            self.mem_signal,
        ]
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for ModeState {
    type Output = ModeState;
    fn add(self, o: ModeState) -> ModeState {
        ModeState {
            idler: self.idler + o.idler,
            signal: self.signal + o.signal,
            pump: self.pump + o.pump,
            mem_idler: self.mem_idler + o.mem_idler,
            mem_signal: self.mem_signal + o.mem_signal,
        }
    }
}

impl Mul<f64> for ModeState {
    type Output = ModeState;
    fn mul(self, s: f64) -> ModeState {
        ModeState {
            idler: self.idler * s,
            signal: self.signal * s,
            pump: self.pump * s,
            mem_idler: self.mem_idler * s,
            mem_signal: self.mem_signal * s,
        }
    }
}

/// Time derivative of `state` without Langevin forces.
///
/// Markovian parameters ignore the memory slots (their derivative is zero)
/// and damp the modes directly at `gamma0/2`.
pub fn drift(params: &SystemParams, frame: Frame, state: &ModeState) -> ModeState {
    let gp = params.gamma_p();
    let (ci, cs) = if params.is_markovian() {
        (state.idler, state.signal)
    } else {
        (state.mem_idler, state.mem_signal)
    };
    let idler = I * frame.idler * state.idler + 0.5 * (-ci + I * state.signal.conj() * state.pump);
    let signal =
        I * frame.signal * state.signal + 0.5 * (-cs + I * state.idler.conj() * state.pump);
    let pump = 0.5 * gp * (-state.pump + I * state.idler * state.signal + I * params.mu());
    let (mem_idler, mem_signal) = if params.is_markovian() {
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        let k = params.kappa();
        (
            I * frame.idler * state.mem_idler + k * (state.idler - state.mem_idler),
            I * frame.signal * state.mem_signal + k * (state.signal - state.mem_signal),
        )
    };
    ModeState {
        idler,
        signal,
        pump,
        mem_idler,
        mem_signal,
    }
}
