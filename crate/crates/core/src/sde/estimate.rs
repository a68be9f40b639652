// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Estimators over recorded trajectories.
//!
//! Standard errors come from the spread between independent units: whole
//! trajectories when there are several, otherwise eight consecutive blocks
//! of the single trajectory.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::meanfield::{steady_state, Phase, SteadyState, Z2Branch};
use crate::model::SystemParams;
use crate::spectra::{Method, VarianceReport};

use super::{SdeError, Trajectory};

/// Time window of the finite difference used for `Var(phi_dot)`.
pub const PHI_DOT_WINDOW: f64 = 5.0;
const SINGLE_RUN_BLOCKS: usize = 8;
const STATIONARITY_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderParameters {
    /// Mean `|A_i|` in scaled units.
    pub amp_mean: f64,
    pub amp_se: f64,
    /// Ensemble mean of the per-unit idler frequency shift (sign kept).
    pub delta_signed: f64,
    pub delta_signed_se: f64,
    /// Ensemble mean of `|delta|` per unit.
    pub delta_abs: f64,
    pub delta_abs_se: f64,
    pub var_phi_dot: f64,
    pub var_phi_dot_se: f64,
    /// Shift estimated from each whole trajectory.
    pub per_traj_delta: Vec<f64>,
    pub window: f64,
    pub n_units: usize,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn unwrap(phases: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    num / den
}

/// Index ranges of the independent units.
fn units(trajs: &[Trajectory]) -> Vec<(usize, std::ops::Range<usize>)> {
    if trajs.len() >= 2 {
        trajs
            .iter()
            .enumerate()
            .map(|(k, t)| (k, 0..t.len()))
            .collect()
    } else {
        let n = trajs[0].len();
        let b = n / SINGLE_RUN_BLOCKS;
        (0..SINGLE_RUN_BLOCKS)
            .map(|k| (0, k * b..(k + 1) * b))
            .collect()
    }
}

fn lag_steps(tr: &Trajectory, window: f64) -> usize {
    ((window / tr.sample_interval()).round() as usize).max(1)
}

fn check_samples(trajs: &[Trajectory], needed_per_unit: usize) -> Result<(), SdeError> {
    if trajs.is_empty() {
        return Err(SdeError::InsufficientSamples {
            needed: needed_per_unit,
            got: 0,
        });
    }
    let per_unit = if trajs.len() >= 2 {
        trajs.iter().map(|t| t.len()).min().unwrap_or(0)
    } else {
        trajs[0].len() / SINGLE_RUN_BLOCKS
    };
    if per_unit < needed_per_unit {
        return Err(SdeError::InsufficientSamples {
            needed: needed_per_unit,
            got: per_unit,
        });
    }
    Ok(())
}

/// Idler frequency shift `-d arg(A_i)/dt` by a least-squares fit.
fn delta_of(tr: &Trajectory, r: std::ops::Range<usize>) -> f64 {
    let ph = unwrap(tr.idler[r.clone()].iter().map(|z| z.arg()));
    -slope(&tr.times[r], &ph)
}

/// Amplitude, frequency shift and `Var(phi_dot)` of the difference phase
/// `phi = arg A_i - arg A_s`, with `phi_dot = (phi(t + w) - phi(t)) / w`
/// and `w` = [`PHI_DOT_WINDOW`]. Variances are taken about each unit's own mean.
pub fn estimate_order_parameters(trajs: &[Trajectory]) -> Result<OrderParameters, SdeError> {
    check_samples(trajs, 3)?;
    let window = PHI_DOT_WINDOW;
    let us = units(trajs);
    let mut amps = Vec::new();
    let mut deltas = Vec::new();
    let mut vpd = Vec::new();
    for (k, r) in &us {
        let tr = &trajs[*k];
        let r = r.clone();
        let n = r.len() as f64;
        amps.push(tr.idler[r.clone()].iter().map(|z| z.norm()).sum::<f64>() / n);
        deltas.push(delta_of(tr, r.clone()));
        let m = lag_steps(tr, window);
        if r.len() <= m + 2 {
            return Err(SdeError::InsufficientSamples {
                needed: m + 3,
                got: r.len(),
            });
        }
        let phi = unwrap(r.clone().map(|j| (tr.idler[j] * tr.signal[j].conj()).arg()));
        let w = tr.sample_interval() * m as f64;
        let rates: Vec<f64> = (0..phi.len() - m)
            .map(|j| (phi[j + m] - phi[j]) / w)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        vpd.push(rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64);
    }
    let abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let (amp_mean, amp_se) = mean_se(&amps);
    let (delta_signed, delta_signed_se) = mean_se(&deltas);
    let (delta_abs, delta_abs_se) = mean_se(&abs);
    let (var_phi_dot, var_phi_dot_se) = mean_se(&vpd);
    Ok(OrderParameters {
        amp_mean,
        amp_se,
        delta_signed,
        delta_signed_se,
        delta_abs,
        delta_abs_se,
        var_phi_dot,
        var_phi_dot_se,
        per_traj_delta: trajs.iter().map(|t| delta_of(t, 0..t.len())).collect(),
        window,
        n_units: us.len(),
    })
}

/// Cross-quadrature fluctuations `(x+, x-, y+, y-)` per sample in scaled
/// signal units, measured in the frame of `ss`. In the broken phases the
/// slow drift of the difference phase (smoothed over [`PHI_DOT_WINDOW`]) is
/// removed first, so `x-` carries no information there.
fn fluctuations(params: &SystemParams, ss: &SteadyState, tr: &Trajectory) -> Vec<[f64; 4]> {
    let s = params.signal_scale();
    let (di, ds) = (ss.idler_shift(), ss.signal_shift());
    let ai_bar = ss.idler_amplitude();
    let as_bar = ss.signal_amplitude();
    let n = tr.len();
    let rot: Vec<(Complex64, Complex64)> = (0..n)
        .map(|k| {
            let t = tr.times[k];
            (
                tr.idler[k] * Complex64::from_polar(1.0, di * t),
                tr.signal[k] * Complex64::from_polar(1.0, ds * t),
            )
        })
        .collect();
    let correction: Vec<f64> = if ss.phase.is_broken() {
        let phi = unwrap(
            rot.iter()
                .map(|(a, b)| (a * b.conj() * (ai_bar * as_bar.conj()).conj()).arg()),
        );
        let half = (lag_steps(tr, PHI_DOT_WINDOW) / 2).max(1);
        let mut prefix = vec![0.0; n + 1];
        for k in 0..n {
            prefix[k + 1] = prefix[k] + phi[k];
        }
        (0..n)
            .map(|k| {
                let lo = k.saturating_sub(half);
                let hi = (k + half + 1).min(n);
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            })
            .collect()
    } else {
        vec![0.0; n]
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    rot.iter()
        .zip(&correction)
        .map(|((a, b), c)| {
            let di = (a * Complex64::from_polar(1.0, -0.5 * c) - ai_bar) / s;
            let ds = (b * Complex64::from_polar(1.0, 0.5 * c) - as_bar) / s;
            [
                h * (di.re + ds.re),
                h * (di.re - ds.re),
                h * (di.im + ds.im),
                h * (di.im - ds.im),
            ]
        })
        .collect()
}

/// Steady state matching the branch a trajectory actually follows.
fn reference_state(params: &SystemParams, tr: &Trajectory) -> SteadyState {
    let ss = steady_state(params, Z2Branch::Plus, 0.0);
    if ss.phase == Phase::U1xZ2 && delta_of(tr, 0..tr.len()) < 0.0 {
        steady_state(params, Z2Branch::Minus, 0.0)
    } else {
        ss
    }
}

/// Sample variances of the cross-quadratures about the mean-field solution,
/// normalized to the thermal value. Fails with `NonStationary` when the
/// first and second halves of the window disagree by more than three
/// standard errors.
pub fn estimate_quadrature_variances(
    params: &SystemParams,
    trajs: &[Trajectory],
) -> Result<VarianceReport, SdeError> {
    check_samples(trajs, 16)?;
    let phase = steady_state(params, Z2Branch::Plus, 0.0).phase;
    let thermal = 0.5 * (params.n_th() + 0.5);
    let fl: Vec<Vec<[f64; 4]>> = trajs
        .iter()
        .map(|t| fluctuations(params, &reference_state(params, t), t))
        .collect();
    let us = units(trajs);
    let mut full = vec![Vec::new(); 4];
    let mut drift = vec![Vec::new(); 4];
    for (k, r) in &us {
        let seg = &fl[*k][r.clone()];
        let mid = seg.len() / 2;
        for q in 0..4 {
            let ms =
                |xs: &[[f64; 4]]| xs.iter().map(|x| x[q] * x[q]).sum::<f64>() / xs.len() as f64;
            full[q].push(ms(seg) / thermal);
            drift[q].push((ms(&seg[..mid]) - ms(&seg[mid..])) / thermal);
        }
    }
    const LABELS: [&str; 4] = ["x+", "x-", "y+", "y-"];
    let mut values = [None; 4];
    let mut errors = [None; 4];
    for q in 0..4 {
        if phase.is_broken() && q == 1 {
            continue;
        }
        let (m, se) = mean_se(&full[q]);
        let (d, dse) = mean_se(&drift[q]);
        let z = d.abs() / dse;
        if z > STATIONARITY_Z {
            return Err(SdeError::NonStationary {
                label: LABELS[q],
                z,
            });
        }
        values[q] = Some(m);
        errors[q] = Some(se);
    }
    let mut report = VarianceReport::from_normalized(params.n_th(), Method::MonteCarlo, values);
    for (q, e) in report.quadratures.iter_mut().zip(errors) {
        q.std_error = e;
    }
    Ok(report)
}

/// Two-sided spectral densities of the cross-quadratures, normalized so that
/// `sum S d omega` is the variance in scaled signal units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelchSpectrum {
    pub omegas: Vec<f64>,
    /// Densities of `x+, x-, y+, y-`, each on `omegas`.
    pub densities: [Vec<f64>; 4],
    pub segments: usize,
}

/// Welch estimate with Hann windows of `segment_len` samples and half overlap,
/// averaged over all segments of all trajectories.
pub fn welch_psd(
    params: &SystemParams,
    trajs: &[Trajectory],
    segment_len: usize,
) -> Result<WelchSpectrum, SdeError> {
    check_samples(trajs, segment_len)?;
    let n = segment_len;
    let h = trajs[0].sample_interval();
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for tr in trajs {
        let fl = fluctuations(params, &reference_state(params, tr), tr);
        let mut start = 0;
        while start + n <= fl.len() {
            for q in 0..4 {
                for k in 0..n {
                    buf[k] = Complex64::new(window[k] * fl[start + k][q], 0.0);
                }
                fft.process(&mut buf);
                for k in 0..n {
                    acc[q][k] += buf[k].norm_sqr();
                }
            }
            segments += 1;
            start += n / 2;
        }
    }
    let scale = h / (2.0 * PI * w2 * segments as f64);
    // reorder to ascending frequency
    let order: Vec<usize> = (n / 2 + 1..n).chain(0..=n / 2).collect();
    let omegas = order
        .iter()
        .map(|&k| {
            let kk = if k > n / 2 {
                k as f64 - n as f64
            } else {
                k as f64
            };
            2.0 * PI * kk / (n as f64 * h)
        })
        .collect();
    let densities = acc.map(|a| order.iter().map(|&k| a[k] * scale).collect());
    Ok(WelchSpectrum {
        omegas,
        densities,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_removes_jumps() {
        let raw = [3.0, -3.0, -2.5, 3.1, 2.9];
        let u = unwrap(raw.iter().copied());
        for w in u.windows(2) {
            assert!((w[1] - w[0]).abs() < PI);
        }
    }

    #[test]
    fn slope_of_line() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 2.0 - 0.3 * x).collect();
        assert!((slope(&t, &y) + 0.3).abs() < 1e-14);
    }

    #[test]
    fn rotating_phasor_gives_shift() {
        let times: Vec<f64> = (0..2000).map(|k| 0.01 * k as f64).collect();
        let tr = Trajectory {
            idler: times
                .iter()
                .map(|t| Complex64::from_polar(1.0, -0.7 * t))
                .collect(),
            signal: times
                .iter()
                .map(|t| Complex64::from_polar(1.0, 0.7 * t))
                .collect(),
            pump: vec![Complex64::new(0.0, 1.0); times.len()],
            times: times.clone(),
            ..Default::default()
        };
        let op = estimate_order_parameters(&[tr.clone(), tr]).unwrap();
        assert!((op.delta_signed - 0.7).abs() < 1e-10);
        assert!(op.var_phi_dot < 1e-20);
        assert!((op.amp_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_is_rejected() {
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            idler: vec![Complex64::new(1.0, 0.0); 2],
            ..Default::default()
        };
        assert!(matches!(
            estimate_order_parameters(&[tr]),
            Err(SdeError::InsufficientSamples { .. })
        ));
    }
}
