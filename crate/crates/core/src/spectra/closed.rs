// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed-form normalized variances and the logarithmic negativity.
//!
//! All variances here are normalized to the thermal value `n_th + 1/2`.
//! The above-threshold forms assume an adiabatically fast pump.

use serde::Serialize;

use crate::meanfield::critical_drive;

use super::{Method, SpectraError, VarianceReport};

/// Zero-point variance of `x = (a + a^dag)/sqrt(2)`.
pub const SIGMA_ZPM: f64 = 0.5;

/// Squeezed cross-quadrature variance of the disordered phase,
/// `2 kappa / ((1 + mu)(2 kappa + mu))`, evaluated for any `mu`.
pub fn squeezed_formula(mu: f64, kappa: f64) -> f64 {
    if kappa.is_infinite() {
        1.0 / (1.0 + mu)
    } else {
        2.0 * kappa / ((1.0 + mu) * (2.0 * kappa + mu))
    }
}

/// Amplified counterpart, `2 kappa / ((1 - mu)(2 kappa - mu))`.
pub fn amplified_formula(mu: f64, kappa: f64) -> f64 {
    if kappa.is_infinite() {
        1.0 / (1.0 - mu)
    } else {
        2.0 * kappa / ((1.0 - mu) * (2.0 * kappa - mu))
    }
}

pub fn variances_below_threshold(
    mu: f64,
    kappa: f64,
    n_th: f64,
) -> Result<VarianceReport, SpectraError> {
    let mu_cr = critical_drive(kappa);
    if !(mu >= 0.0 && mu < mu_cr) {
        return Err(SpectraError::OutOfRegime {
            what: "below-threshold forms",
            mu,
            kappa,
        });
    }
    let sq = squeezed_formula(mu, kappa);
    let amp = amplified_formula(mu, kappa);
    Ok(VarianceReport::from_normalized(
        n_th,
        Method::ClosedForm,
        [Some(sq), Some(amp), Some(amp), Some(sq)],
    ))
}

/// `(x+, y+, y-)` in the U1 phase; `x-` is the Goldstone quadrature.
pub fn u1_formulas(mu: f64, kappa: f64, n_th: f64, n_th_p: f64) -> (f64, f64, f64) {
    let r = (n_th_p + 0.5) / (n_th + 0.5);
    if kappa.is_infinite() {
        let xp = r * (mu - 1.0) / mu + 0.5 / mu;
        let yp = r + 0.5 / (mu - 1.0);
        return (xp, yp, 0.5);
    }
    let d1 = 2.0 * kappa + 2.0 * mu - 1.0;
    let d3 = 2.0 * kappa + 2.0 * mu - 3.0;
    let xp = r * 2.0 * (mu - 1.0) * (mu + kappa) / (mu * d1) + kappa / (mu * d1);
    let yp = r * 2.0 * (mu - 1.0 + kappa) / d3 + kappa / ((mu - 1.0) * d3);
    let ym = kappa / (1.0 + 2.0 * kappa);
    (xp, yp, ym)
}

pub fn variances_above_threshold_u1(
    mu: f64,
    kappa: f64,
    n_th: f64,
    n_th_p: f64,
) -> Result<VarianceReport, SpectraError> {
    if !(kappa >= 0.5 && mu > 1.0) {
        return Err(SpectraError::OutOfRegime {
            what: "U1 forms",
            mu,
            kappa,
        });
    }
    let (xp, yp, ym) = u1_formulas(mu, kappa, n_th, n_th_p);
    let finite = |v: f64| {
        if v.is_finite() && v > 0.0 {
            Some(v)
        } else {
            None
        }
    };
    Ok(VarianceReport::from_normalized(
        n_th,
        Method::ClosedForm,
        [finite(xp), None, finite(yp), finite(ym)],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityResult {
    pub e_n: f64,
    pub sigma_sq_abs: f64,
    pub sigma_zpm: f64,
}

/// `E_N = -log2(min(sigma_sq / sigma_zpm, 1)) / 2`.
pub fn log_negativity(sigma_sq_abs: f64, sigma_zpm: f64) -> NegativityResult {
    let ratio = (sigma_sq_abs / sigma_zpm).min(1.0);
    let e_n = if ratio >= 1.0 {
        0.0
    } else {
        -0.5 * ratio.log2()
    };
    NegativityResult {
        e_n,
        sigma_sq_abs,
        sigma_zpm,
    }
}
