// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Fluctuation spectra and variances of the cross-quadratures.
//!
//! Fluctuations are measured in scaled signal units, so the signal/idler
//! Langevin forces have symmetric-ordered strength `(n + 1/2) Re gamma~(omega)`
//! and the pump force `gammaP^2 (n_P + 1/2)`. With `x = (a + a^dag)/sqrt(2)`
//! a thermal quadrature has variance `n + 1/2`; reported "normalized"
//! variances divide by that.

pub mod closed;
pub mod quad;

pub use closed::{
    log_negativity, variances_above_threshold_u1, variances_below_threshold, NegativityResult,
    SIGMA_ZPM,
};

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::{Matrix6, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::linres::{self, LinresError, ZERO_TOL};
use crate::meanfield::{
    self, classify_phase, steady_state, GridError, Phase, SteadyState, Z2Branch,
};
use crate::model::{ParamError, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row/column order of every 6x6 matrix in this module.
pub const LABELS: [&str; 6] = ["x+", "x-", "xP", "y+", "y-", "yP"];
/// Cross-quadratures reported in a [`VarianceReport`].
pub const REPORTED: [&str; 4] = ["x+", "x-", "y+", "y-"];
const REPORTED_INDEX: [usize; 4] = [0, 1, 3, 4];

/// Ratio `S(1e-5)/S(1e-4)` above which an entry is treated as a pole at zero.
const DIVERGENCE_RATIO: f64 = 50.0;
/// Largest tail share accepted in an integrated variance.
const TAIL_SHARE: f64 = 5e-4;
const SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error(transparent)]
    Linres(#[from] LinresError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("steady state is unstable (max Re lambda = {max_re:e})")]
    Unstable { max_re: f64 },
    #[error("susceptibility is singular at omega = {omega}")]
    SingularAtFrequency { omega: f64 },
    #[error(
        "spectral tail did not fall below {TAIL_SHARE} of the variance up to omega = {omega_max:e}"
    )]
    TailNotConverged { omega_max: f64 },
    #[error("adaptive quadrature did not reach its tolerance")]
    QuadratureNotConverged,
    #[error("{what} do not apply at mu = {mu}, kappa = {kappa}")]
    OutOfRegime {
        what: &'static str,
        mu: f64,
        kappa: f64,
    },
    #[error("expected the {expected} phase, got {found}")]
    WrongPhase { expected: Phase, found: Phase },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Spectral,
    AngleScan,
    MonteCarlo,
}

/// Whether the pump Langevin force enters the spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpNoise {
    /// Off in the disordered phase, on above threshold.
    #[default]
    Auto,
    On,
    Off,
}

impl PumpNoise {
    pub fn resolve(self, phase: Phase) -> bool {
        match self {
            PumpNoise::Auto => phase.is_broken(),
            PumpNoise::On => true,
            PumpNoise::Off => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureVariance {
    pub label: &'static str,
    pub normalized: Option<f64>,
    pub absolute: Option<f64>,
    pub divergent: bool,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub label: &'static str,
    pub normalized: Option<f64>,
    pub absolute: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub n_th: f64,
    pub method: Method,
    pub quadratures: Vec<QuadratureVariance>,
    pub squeezed: Extremum,
    /// A divergent quadrature, when present, is the amplified one.
    pub amplified: Extremum,
    /// Angle of `cos(theta) x+ + sin(theta) y-` minimizing the variance, for angle scans.
    pub mixing_angle: Option<f64>,
}

impl VarianceReport {
    /// Builds a report from normalized `(x+, x-, y+, y-)`; `None` marks divergence.
    pub fn from_normalized(n_th: f64, method: Method, values: [Option<f64>; 4]) -> Self {
        let scale = n_th + 0.5;
        let quadratures: Vec<QuadratureVariance> = REPORTED
            .iter()
            .zip(values)
            .map(|(&label, v)| QuadratureVariance {
                label,
                normalized: v,
                absolute: v.map(|x| x * scale),
                divergent: v.is_none(),
                std_error: None,
            })
            .collect();
        let extremum = |q: &QuadratureVariance| Extremum {
            label: q.label,
            normalized: q.normalized,
            absolute: q.absolute,
        };
        let finite = || quadratures.iter().filter(|q| q.normalized.is_some());
        let squeezed = finite()
            .min_by(|a, b| a.normalized.unwrap().total_cmp(&b.normalized.unwrap()))
            .map(extremum)
            .unwrap_or(Extremum {
                label: "none",
                normalized: None,
                absolute: None,
            });
        let amplified = quadratures
            .iter()
            .find(|q| q.divergent)
            .or_else(|| {
                finite().max_by(|a, b| a.normalized.unwrap().total_cmp(&b.normalized.unwrap()))
            })
            .map(extremum)
            .unwrap_or(Extremum {
                label: "none",
                normalized: None,
                absolute: None,
            });
        VarianceReport {
            n_th,
            method,
            quadratures,
            squeezed,
            amplified,
            mixing_angle: None,
        }
    }

    pub fn get(&self, label: &str) -> Option<&QuadratureVariance> {
        self.quadratures.iter().find(|q| q.label == label)
    }

    pub fn normalized(&self, label: &str) -> Option<f64> {
        self.get(label).and_then(|q| q.normalized)
    }
}

/// Noise correlation matrix in the cross-quadrature basis at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix {
    pub omega: f64,
    pub matrix: Matrix6<Complex64>,
}

impl DiffusionMatrix {
    pub fn diagonal(&self) -> [f64; 6] {
        std::array::from_fn(|k| self.matrix[(k, k)].re)
    }
}

/// Linear noisy dynamics about one steady state, ready for spectral evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    params: SystemParams,
    ss: SteadyState,
    pump_noise: bool,
    t: Matrix6<Complex64>,
    t_inv: Matrix6<Complex64>,
}

/// `w = T v` from `v = (a_i, a_s, a_P, a_i*, a_s*, a_P*)` to the cross-quadratures.
fn quadrature_transform() -> Matrix6<Complex64> {
    let h = Complex64::from(0.5);
    let mut re_part = Matrix6::<Complex64>::zeros(); // (alpha_i, alpha_s, alpha_P, beta_i, beta_s, beta_P)
    for k in 0..3 {
        re_part[(k, k)] = h;
        re_part[(k, k + 3)] = h;
        re_part[(k + 3, k)] = -0.5 * I;
        re_part[(k + 3, k + 3)] = 0.5 * I;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let rot = Matrix6::<f64>::from_row_slice(&[
        s,  s, 0.0, 0.0, 0.0, 0.0,
        s, -s, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, s,  s, 0.0,
        0.0, 0.0, 0.0, s, -s, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    ]);
    rot.map(Complex64::from) * re_part
}

impl SpectralModel {
    /// Fails if the state is inconsistent or has a growing mode. The
    /// Goldstone mode of the broken phases is allowed.
    pub fn new(
        params: &SystemParams,
        ss: &SteadyState,
        pump: PumpNoise,
    ) -> Result<Self, SpectraError> {
        let m = linres::build_embedded_matrix(params, ss)?;
        let spec = linres::eigenspectrum(&m)?;
        let max_re = spec.relaxation_bound(ss.phase.is_broken());
        if max_re > ZERO_TOL {
            return Err(SpectraError::Unstable { max_re });
        }
        let t = quadrature_transform();
        let t_inv = t
            .try_inverse()
            .expect("quadrature transform is unitary up to scale");
        Ok(SpectralModel {
            params: *params,
            ss: *ss,
            pump_noise: pump.resolve(ss.phase),
            t,
            t_inv,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn steady_state(&self) -> &SteadyState {
        &self.ss
    }

    pub fn pump_noise(&self) -> bool {
        self.pump_noise
    }

    /// `Sigma~(omega) + i omega I` in cross-quadratures.
    pub fn susceptibility(&self, omega: f64) -> Matrix6<Complex64> {
        let l = linres::response_matrix(&self.params, &self.ss, -I * omega);
        self.t * l * self.t_inv + Matrix6::identity() * (I * omega)
    }

    pub fn diffusion(&self, omega: f64) -> DiffusionMatrix {
        let k = self.params.kernel();
        let (di, ds) = (self.ss.idler_shift(), self.ss.signal_shift());
        let ni = self.params.n_th_i() + 0.5;
        let ns = self.params.n_th_s() + 0.5;
        let np = if self.pump_noise {
            self.params.gamma_p().powi(2) * (self.params.n_th_p() + 0.5)
        } else {
            0.0
        };
        let diag = [
            ni * k.freq_re(omega + di),
            ns * k.freq_re(omega + ds),
            np,
            ni * k.freq_re(omega - di),
            ns * k.freq_re(omega - ds),
            np,
        ];
        let n =
            Matrix6::from_diagonal(&nalgebra::Vector6::from_fn(|r, _| Complex64::from(diag[r])));
        DiffusionMatrix {
            omega,
            matrix: self.t * n * self.t.adjoint(),
        }
    }

    /// `S(omega) = K^-1 D K^-dag / (2 pi)` with `K` the susceptibility.
    pub fn psd_at(&self, omega: f64) -> Result<Matrix6<Complex64>, SpectraError> {
        let k = self.susceptibility(omega);
        let k_inv = k
            .try_inverse()
            .ok_or(SpectraError::SingularAtFrequency { omega })?;
        let rcond = 1.0 / (norm1(&k) * norm1(&k_inv));
        if !(rcond > 1e-14) {
            return Err(SpectraError::SingularAtFrequency { omega });
        }
        let d = self.diffusion(omega).matrix;
        Ok(k_inv * d * k_inv.adjoint() * Complex64::from(0.5 / PI))
    }

    /// Entries whose spectral density has a pole of order two at zero frequency.
    pub fn divergent_entries(&self) -> Result<[bool; 6], SpectraError> {
        let near = self.psd_at(1e-5)?;
        let far = self.psd_at(1e-4)?;
        Ok(std::array::from_fn(|j| {
            near[(j, j)].re > DIVERGENCE_RATIO * far[(j, j)].re
        }))
    }

    /// Integrated covariance `int S d omega` (real part), excluding divergent
    /// rows and columns, which are left as NaN.
    pub fn covariance(&self) -> Result<Covariance, SpectraError> {
        let divergent = self.divergent_entries()?;
        let keep = |j: usize, k: usize| !divergent[j] && !divergent[k];
        let watch: Vec<usize> = (0..6).filter(|&j| !divergent[j]).map(|j| 7 * j).collect();
        let failed = Cell::new(None);
        let integrand = |w: f64| -> Vec<f64> {
            match self.psd_at(w) {
                Ok(s) => (0..36)
                    .map(|idx| {
                        if keep(idx / 6, idx % 6) {
                            s[(idx / 6, idx % 6)].re
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                Err(e) => {
                    failed.set(Some(e));
                    vec![0.0; 36]
                }
            }
        };
        let scale = 1.0f64
            .max(0.5 * self.params.gamma_p())
            .max(self.params.kappa().min(1e6));
        let mut omega_max = 1e3 * scale;
        for _ in 0..8 {
            let breaks = log_breaks(1e-4, omega_max);
            let q = quad::integrate(integrand, &breaks, &watch, 1e-9, 1e-15, 20_000);
            if let Some(e) = failed.take() {
                return Err(e);
            }
            if !q.converged {
                return Err(SpectraError::QuadratureNotConverged);
            }
            let edge = integrand(omega_max);
            let tail: Vec<f64> = edge.iter().map(|s| s * omega_max).collect();
            let tail_ok = watch
                .iter()
                .all(|&m| tail[m].abs() <= TAIL_SHARE * (q.value[m] + tail[m]).abs());
            if tail_ok {
                let mut matrix = Matrix6::from_fn(|j, k| {
                    if keep(j, k) {
                        2.0 * (q.value[6 * j + k] + tail[6 * j + k])
                    } else {
                        f64::NAN
                    }
                });
                matrix = (matrix + matrix.transpose()) * 0.5;
                return Ok(Covariance {
                    matrix,
                    divergent,
                    omega_max,
                });
            }
            omega_max *= 4.0;
        }
        Err(SpectraError::TailNotConverged { omega_max })
    }
}

fn norm1(m: &Matrix6<Complex64>) -> f64 {
    (0..6)
        .map(|c| (0..6).map(|r| m[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `[0, lo, 4 lo, 16 lo, ..., hi]`: geometric panels resolve narrow peaks near zero.
fn log_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = lo;
    while x < hi {
        b.push(x);
        x *= 4.0;
    }
    b.push(hi);
    b
}

/// Real covariance of the six quadratures in scaled signal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance {
    pub matrix: Matrix6<f64>,
    pub divergent: [bool; 6],
    /// Upper frequency of the numerical integral before the tail correction.
    pub omega_max: f64,
}

impl Covariance {
    /// Variance of `sum c_k w_k` for real weights on the six quadratures.
    pub fn quadratic_form(&self, c: &[f64; 6]) -> f64 {
        // zero weights must not pick up the NaN of excluded entries
        let mut s = 0.0;
        for j in (0..6).filter(|&j| c[j] != 0.0) {
            for k in (0..6).filter(|&k| c[k] != 0.0) {
                s += c[j] * c[k] * self.matrix[(j, k)];
            }
        }
        s
    }
}

/// PSD matrices sampled on a frequency grid, with the model that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub model: SpectralModel,
    pub omegas: Vec<f64>,
    pub matrices: Vec<Matrix6<Complex64>>,
}

impl SpectralData {
    /// Smallest eigenvalue of any sampled PSD matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| SymmetricEigen::new(*m).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|S - S^dag|` entry over the grid.
    pub fn hermiticity_error(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| (m - m.adjoint()).camax())
            .fold(0.0, f64::max)
    }
}

/// `n` points evenly spaced on `[-omega_max, omega_max]`.
pub fn symmetric_grid(omega_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -omega_max + 2.0 * omega_max * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn susceptibility_at(
    params: &SystemParams,
    ss: &SteadyState,
    omega: f64,
) -> Result<Matrix6<Complex64>, SpectraError> {
    let model = SpectralModel::new(params, ss, PumpNoise::Auto)?;
    let k = model.susceptibility(omega);
    if k.try_inverse()
        .is_none_or(|inv| 1.0 / (norm1(&k) * norm1(&inv)) <= 1e-14)
    {
        return Err(SpectraError::SingularAtFrequency { omega });
    }
    Ok(k)
}

pub fn psd(
    params: &SystemParams,
    ss: &SteadyState,
    omega_grid: &[f64],
    pump: PumpNoise,
) -> Result<SpectralData, SpectraError> {
    let model = SpectralModel::new(params, ss, pump)?;
    let matrices = omega_grid
        .iter()
        .map(|&w| model.psd_at(w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectralData {
        model,
        omegas: omega_grid.to_vec(),
        matrices,
    })
}

fn report_from_covariance(
    params: &SystemParams,
    cov: &Covariance,
    method: Method,
) -> VarianceReport {
    let thermal = 0.5 * (params.n_th() + 0.5);
    let values = REPORTED_INDEX.map(|j| {
        if cov.divergent[j] {
            None
        } else {
            Some(cov.matrix[(j, j)] / thermal)
        }
    });
    VarianceReport::from_normalized(params.n_th(), method, values)
}

/// Variances by adaptive integration of the model behind `sd`.
pub fn integrate_variances(sd: &SpectralData) -> Result<VarianceReport, SpectraError> {
    let cov = sd.model.covariance()?;
    Ok(report_from_covariance(
        sd.model.params(),
        &cov,
        Method::Spectral,
    ))
}

/// Spectral variances of the stable phase at `params`.
pub fn variances_spectral(
    params: &SystemParams,
    z2: Z2Branch,
    pump: PumpNoise,
) -> Result<VarianceReport, SpectraError> {
    let ss = steady_state(params, z2, 0.0);
    if ss.phase == Phase::U1xZ2 {
        return variances_u1xz2(params, &ss, pump);
    }
    let model = SpectralModel::new(params, &ss, pump)?;
    Ok(report_from_covariance(
        params,
        &model.covariance()?,
        Method::Spectral,
    ))
}

/// Spectral variances in the co-rotating frame, with the squeezed value taken
/// as the minimum over `cos(theta) x+ + sin(theta) y-`, `theta in [0, pi)`.
pub fn variances_u1xz2(
    params: &SystemParams,
    ss: &SteadyState,
    pump: PumpNoise,
) -> Result<VarianceReport, SpectraError> {
    if ss.phase != Phase::U1xZ2 {
        return Err(SpectraError::WrongPhase {
            expected: Phase::U1xZ2,
            found: ss.phase,
        });
    }
    let model = SpectralModel::new(params, ss, pump)?;
    let cov = model.covariance()?;
    let mut report = report_from_covariance(params, &cov, Method::AngleScan);
    let (theta, var) = min_mixed_variance(&cov, 0, 4);
    let thermal = 0.5 * (params.n_th() + 0.5);
    let norm = var / thermal;
    report.squeezed = Extremum {
        label: "q(theta)",
        normalized: Some(norm),
        absolute: Some(norm * (params.n_th() + 0.5)),
    };
    report.mixing_angle = Some(theta);
    Ok(report)
}

/// Minimum of `Var(cos t w_a + sin t w_b)` by a grid scan and golden-section refinement.
pub fn min_mixed_variance(cov: &Covariance, a: usize, b: usize) -> (f64, f64) {
    let var = |t: f64| {
        let mut c = [0.0; 6];
        c[a] = t.cos();
        c[b] = t.sin();
        cov.quadratic_form(&c)
    };
    let step = PI / SCAN_POINTS as f64;
    let k = (0..SCAN_POINTS)
        .min_by(|&i, &j| var(i as f64 * step).total_cmp(&var(j as f64 * step)))
        .unwrap_or(0);
    let (mut lo, mut hi) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (var(x1), var(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = var(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = var(x2);
        }
    }
    let t = (0.5 * (lo + hi)).rem_euclid(PI);
    (t, var(t))
}

/// How the squeezed variance is obtained in a negativity calculation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SqueezingPath {
    /// Disordered-phase form (continued into the frequency-shifted phase) and
    /// the U1 forms above threshold for `kappa >= 1/2`.
    #[default]
    ClosedForm,
    /// Spectral integration of the linearized fluctuations in every phase.
    Linearized,
}

/// Normalized squeezed variance at `params` along `path`.
pub fn squeezed_normalized(
    params: &SystemParams,
    path: SqueezingPath,
) -> Result<f64, SpectraError> {
    let (mu, kappa) = (params.mu(), params.kappa());
    let phase = classify_phase(mu, kappa);
    match path {
        SqueezingPath::ClosedForm => Ok(match phase {
            Phase::Disordered | Phase::U1xZ2 => closed::squeezed_formula(mu, kappa),
            Phase::U1 => {
                let (xp, yp, ym) = closed::u1_formulas(mu, kappa, params.n_th(), params.n_th_p());
                xp.min(yp).min(ym)
            }
        }),
        SqueezingPath::Linearized => variances_spectral(params, Z2Branch::Plus, PumpNoise::Auto)?
            .squeezed
            .normalized
            .ok_or(SpectraError::QuadratureNotConverged),
    }
}

pub fn negativity_at(
    params: &SystemParams,
    path: SqueezingPath,
) -> Result<NegativityResult, SpectraError> {
    let sq = squeezed_normalized(params, path)?;
    Ok(log_negativity((params.n_th() + 0.5) * sq, SIGMA_ZPM))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativityRow {
    pub mu: f64,
    pub kappa: f64,
    pub n_th: f64,
    pub result: Result<NegativityResult, SpectraError>,
}

/// Options for [`negativity_map`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NegativityOptions {
    /// Pump occupancy; `None` ties it to each `n_th`.
    pub n_th_pump: Option<f64>,
    pub path: SqueezingPath,
    /// Append a Markovian (`kappa = inf`) block after the requested kappas.
    pub markovian_comparator: bool,
}

/// `E_N` over `n_th x kappa x mu`, rows ordered in that nesting (mu fastest).
pub fn negativity_map(
    base: &SystemParams,
    mu_grid: &[f64],
    kappa_grid: &[f64],
    n_grid: &[f64],
    opts: NegativityOptions,
    exec: Execution,
) -> Result<Vec<NegativityRow>, GridError> {
    meanfield::check_grid("mu", mu_grid)?;
    meanfield::check_grid("kappa", kappa_grid)?;
    meanfield::check_grid("n_th", n_grid)?;
    let mut kappas = kappa_grid.to_vec();
    if opts.markovian_comparator {
        kappas.push(f64::INFINITY);
    }
    let (nm, nk) = (mu_grid.len(), kappas.len());
    Ok(exec::map_indexed(exec, nm * nk * n_grid.len(), |idx| {
        let mu = mu_grid[idx % nm];
        let kappa = kappas[(idx / nm) % nk];
        let n_th = n_grid[idx / (nm * nk)];
        let result = base
            .with_occupancies(n_th, opts.n_th_pump.unwrap_or(n_th))
            .and_then(|p| p.with_mu_kappa(mu, kappa))
            .map_err(SpectraError::from)
            .and_then(|p| negativity_at(&p, opts.path));
        NegativityRow {
            mu,
            kappa,
            n_th,
            result,
        }
    }))
}

pub const NEGATIVITY_HEADER: &str = "mu,kappa,n_th,e_n,sigma_sq_abs";

pub fn write_negativity_csv<W: std::io::Write>(
    rows: &[NegativityRow],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{NEGATIVITY_HEADER}")?;
    for r in rows {
        let (e, s) = r
            .result
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |x| (x.e_n, x.sigma_sq_abs));
        writeln!(w, "{},{},{},{},{}", r.mu, r.kappa, r.n_th, e, s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Memory, RawParams};
    use approx::assert_relative_eq;

    fn params(mu: f64, kappa: f64, gamma_p: f64) -> SystemParams {
        RawParams {
            mu,
            gamma_p,
            memory: Memory::Kappa(kappa),
            ..RawParams::default()
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn transform_round_trip() {
        let t = quadrature_transform();
        let inv = t.try_inverse().unwrap();
        assert!((t * inv - Matrix6::identity()).camax() < 1e-15);
    }

    #[test]
    fn undriven_susceptibility_diagonal() {
        let p = params(0.0, 0.7, 100.0);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        let k = susceptibility_at(&p, &ss, 0.0).unwrap();
        for j in [0, 1, 3, 4] {
            assert_relative_eq!(k[(j, j)].re, -0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(k[(2, 2)].re, -50.0, epsilon = 1e-13);
    }

    #[test]
    fn goldstone_makes_zero_frequency_singular() {
        let p = params(2.0, 1.0, 100.0);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        assert!(matches!(
            susceptibility_at(&p, &ss, 0.0),
            Err(SpectraError::SingularAtFrequency { .. })
        ));
    }

    #[test]
    fn thermal_state_integrates_to_one() {
        let p = RawParams {
            n_th_i: 2.0,
            n_th_s: 2.0,
            ..RawParams::default()
        }
        .validate()
        .unwrap()
        .with_mu_kappa(0.0, 0.3)
        .unwrap();
        let r = variances_spectral(&p, Z2Branch::Plus, PumpNoise::Auto).unwrap();
        for q in &r.quadratures {
            assert_relative_eq!(q.normalized.unwrap(), 1.0, max_relative = 1e-6);
            assert_relative_eq!(q.absolute.unwrap(), 2.5, max_relative = 1e-6);
        }
    }

    #[test]
    fn below_threshold_matches_closed_form() {
        let p = params(0.5, 0.5, 100.0);
        let r = variances_spectral(&p, Z2Branch::Plus, PumpNoise::Auto).unwrap();
        assert_relative_eq!(r.normalized("x+").unwrap(), 4.0 / 9.0, max_relative = 1e-6);
        assert_relative_eq!(r.normalized("y-").unwrap(), 4.0 / 9.0, max_relative = 1e-6);
        assert_relative_eq!(r.normalized("x-").unwrap(), 4.0, max_relative = 1e-6);
        assert_eq!(r.squeezed.label, "x+");
    }

    #[test]
    fn u1_flags_goldstone_quadrature() {
        let p = params(2.0, 1.0, 1e4);
        let r = variances_spectral(&p, Z2Branch::Plus, PumpNoise::Auto).unwrap();
        let xm = r.get("x-").unwrap();
        assert!(xm.divergent && xm.normalized.is_none());
        assert_eq!(r.amplified.label, "x-");
        assert_relative_eq!(r.normalized("y-").unwrap(), 1.0 / 3.0, max_relative = 1e-3);
        assert_relative_eq!(r.normalized("y+").unwrap(), 5.0 / 3.0, max_relative = 1e-3);
        assert_relative_eq!(r.normalized("x+").unwrap(), 0.7, max_relative = 1e-3);
    }

    #[test]
    fn psd_is_hermitian_and_positive() {
        for (mu, kappa) in [(0.3, 1.0), (2.0, 1.0), (1.0, 0.2)] {
            let p = params(mu, kappa, 100.0);
            let ss = steady_state(&p, Z2Branch::Plus, 0.0);
            let sd = psd(&p, &ss, &symmetric_grid(20.0, 101), PumpNoise::Auto);
            // the symmetric grid contains omega = 0, singular in broken phases
            if ss.phase.is_broken() {
                assert!(sd.is_err());
                let sd = psd(&p, &ss, &symmetric_grid(20.0, 100), PumpNoise::Auto).unwrap();
                assert!(sd.min_eigenvalue() > -1e-12);
                assert!(sd.hermiticity_error() < 1e-12);
            } else {
                let sd = sd.unwrap();
                assert!(sd.min_eigenvalue() > -1e-12);
            }
        }
    }

    #[test]
    fn negative_frequency_is_conjugate() {
        let p = params(1.0, 0.2, 100.0);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        let m = SpectralModel::new(&p, &ss, PumpNoise::Auto).unwrap();
        for w in [0.1, 0.7, 3.0] {
            let a = m.psd_at(w).unwrap();
            let b = m.psd_at(-w).unwrap();
            assert!((a - b.conjugate()).camax() < 1e-12 * a.camax());
        }
    }

    #[test]
    fn diffusion_symmetry_and_decay() {
        let p = params(0.3, 0.4, 100.0);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        let m = SpectralModel::new(&p, &ss, PumpNoise::On).unwrap();
        assert_eq!(m.diffusion(2.0).diagonal(), m.diffusion(-2.0).diagonal());
        assert!(m.diffusion(1e6).diagonal()[0] < 1e-10);
        assert!(m.diffusion(3.0).diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn angle_scan_matches_eigenvalue() {
        let p = params(1.0, 0.2, 100.0);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        let m = SpectralModel::new(&p, &ss, PumpNoise::Auto).unwrap();
        let cov = m.covariance().unwrap();
        let (_, v) = min_mixed_variance(&cov, 0, 4);
        let (a, b, c) = (cov.matrix[(0, 0)], cov.matrix[(4, 4)], cov.matrix[(0, 4)]);
        let lam = 0.5 * (a + b) - (0.25 * (a - b).powi(2) + c * c).sqrt();
        assert_relative_eq!(v, lam, max_relative = 1e-9);
    }

    #[test]
    fn z2_branches_agree() {
        let p = params(1.0, 0.2, 100.0);
        let a =
            variances_u1xz2(&p, &steady_state(&p, Z2Branch::Plus, 0.0), PumpNoise::Auto).unwrap();
        let b =
            variances_u1xz2(&p, &steady_state(&p, Z2Branch::Minus, 0.0), PumpNoise::Auto).unwrap();
        assert_relative_eq!(
            a.squeezed.normalized.unwrap(),
            b.squeezed.normalized.unwrap(),
            max_relative = 1e-6
        );
        for l in ["x+", "y+", "y-"] {
            assert_relative_eq!(
                a.normalized(l).unwrap(),
                b.normalized(l).unwrap(),
                max_relative = 1e-6
            );
        }
    }
}
