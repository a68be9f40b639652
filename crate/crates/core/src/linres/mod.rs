// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Linear response about a steady state.
//!
//! Fluctuations `u = (a_i, a_s, a_P, b_i, b_s)` around the mean field obey
//! `du/dt = P u + Q u*` in the frame where the mean field is static, with
//! `b` the memory variables. Splitting into real quadratures and rotating
//! to cross-quadratures gives a real matrix whose eigenvalues are the poles
//! of the susceptibility.

pub mod eigen;
pub mod poles;

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::meanfield::{self, branch_state, critical_drive, Phase, SteadyState, Z2Branch};
use crate::model::{ParamError, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigenvalues with `|Re| <= ZERO_TOL` count as marginal.
pub const ZERO_TOL: f64 = 1e-8;
/// Largest mean-field residual accepted when building the matrix.
pub const RESIDUAL_TOL: f64 = 1e-8;

pub const LABELS_MARKOVIAN: [&str; 6] = ["x+", "x-", "xP", "y+", "y-", "yP"];
pub const LABELS_EMBEDDED: [&str; 10] = [
    "x+", "x-", "xP", "y+", "y-", "yP", "cx+", "cx-", "cy+", "cy-",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinresError {
    #[error("steady state violates the equations of motion (residual {residual:e})")]
    InconsistentSteadyState { residual: f64 },
    #[error("eigenvalue iteration did not converge")]
    EigensolverFailure,
    #[error("no sign change of max Re lambda on mu in [{lo}, {hi}] at kappa = {kappa}")]
    BracketFailure { kappa: f64, lo: f64, hi: f64 },
    #[error("critical-drive search is defined on the disordered branch only, not {0}")]
    UnsupportedPhase(Phase),
    #[error("the {phase} branch does not exist at mu = {mu}, kappa = {kappa}")]
    BranchMissing { phase: Phase, mu: f64, kappa: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Real generator of the linearized dynamics in cross-quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedMatrix {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<&'static str>,
    pub frame: crate::dynamics::Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSpectrum {
    #[serde(serialize_with = "ser_eigs")]
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    pub stable: bool,
}

fn ser_eigs<S: serde::Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl EigenSpectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let max_re = eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re);
        EigenSpectrum {
            eigenvalues,
            max_re,
            stable: max_re <= ZERO_TOL,
        }
    }

    /// Index of the eigenvalue closest to zero.
    pub fn goldstone_index(&self) -> Option<usize> {
        (0..self.eigenvalues.len()).min_by(|&a, &b| {
            self.eigenvalues[a]
                .norm()
                .total_cmp(&self.eigenvalues[b].norm())
        })
    }

    /// Eigenvalues with `|lambda| < ZERO_TOL`.
    pub fn zero_modes(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|z| z.norm() < ZERO_TOL)
            .count()
    }

    /// Least negative real part, leaving out the symmetry-protected zero mode
    /// when `broken` is set.
    pub fn relaxation_bound(&self, broken: bool) -> f64 {
        let skip = if broken { self.goldstone_index() } else { None };
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, z)| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `lambda_pm = (mu - 2 kappa)/4 +- sqrt((mu + 2 kappa)^2 - 8 kappa)/4`,
/// the amplified-branch pair of the disordered phase. `kappa = inf` gives
/// the Markovian pair `((mu - 1)/2, -inf)`.
pub fn disordered_eigenvalues_closed_form(mu: f64, kappa: f64) -> (Complex64, Complex64) {
    if kappa.is_infinite() {
        return (
            Complex64::new(0.5 * (mu - 1.0), 0.0),
            Complex64::new(f64::NEG_INFINITY, 0.0),
        );
    }
    let half_tr = 0.25 * (mu - 2.0 * kappa);
    let disc = (mu + 2.0 * kappa).powi(2) - 8.0 * kappa;
    if disc >= 0.0 {
        let s = 0.25 * disc.sqrt();
        // product of the roots is kappa (1 - mu) / 2
        let prod = 0.5 * kappa * (1.0 - mu);
        let (hi, lo) = if half_tr >= 0.0 {
            let big = half_tr + s;
            (big, if big != 0.0 { prod / big } else { half_tr - s })
        } else {
            let big = half_tr - s;
            (if big != 0.0 { prod / big } else { half_tr + s }, big)
        };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0))
    } else {
        let s = 0.25 * (-disc).sqrt();
        (Complex64::new(half_tr, s), Complex64::new(half_tr, -s))
    }
}

/// Drive at which the disordered pair coalesces; `None` for `kappa > 2`.
pub fn exceptional_point_drive(kappa: f64) -> Option<f64> {
    if kappa > 2.0 {
        None
    } else {
        Some((8.0 * kappa).sqrt() - 2.0 * kappa)
    }
}

struct Mean {
    ai: Complex64,
    as_: Complex64,
    ap: Complex64,
    di: f64,
    ds: f64,
}

fn mean(ss: &SteadyState) -> Mean {
    Mean {
        ai: ss.idler_amplitude(),
        as_: ss.signal_amplitude(),
        ap: ss.pump_amp,
        di: ss.idler_shift(),
        ds: ss.signal_shift(),
    }
}

/// Complex Jacobians with respect to `u` and `u*`.
fn jacobians(params: &SystemParams, ss: &SteadyState) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let m = mean(ss);
    let gp = params.gamma_p();
    let n = if params.is_markovian() { 3 } else { 5 };
    let mut p = DMatrix::<Complex64>::zeros(n, n);
    let mut q = DMatrix::<Complex64>::zeros(n, n);
    let (i, s, pm) = (0, 1, 2);
    p[(i, i)] = I * m.di;
    p[(s, s)] = I * m.ds;
    if params.is_markovian() {
        p[(i, i)] -= 0.5;
        p[(s, s)] -= 0.5;
    } else {
        let k = params.kappa();
        p[(i, 3)] = (-0.5).into();
        p[(s, 4)] = (-0.5).into();
        p[(3, 3)] = I * m.di - k;
        p[(4, 4)] = I * m.ds - k;
        p[(3, i)] = k.into();
        p[(4, s)] = k.into();
    }
    p[(i, pm)] = 0.5 * I * m.as_.conj();
    p[(s, pm)] = 0.5 * I * m.ai.conj();
    p[(pm, pm)] = (-0.5 * gp).into();
    p[(pm, i)] = 0.5 * I * gp * m.as_;
    p[(pm, s)] = 0.5 * I * gp * m.ai;
    q[(i, s)] = 0.5 * I * m.ap;
    q[(s, i)] = 0.5 * I * m.ap;
    (p, q)
}

/// Orthogonal map from `(Re u, Im u)` to the cross-quadrature ordering.
fn cross_rotation(n: usize) -> DMatrix<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dim = 2 * n;
    let mut t = DMatrix::zeros(dim, dim);
    // rows: x+, x-, xP, y+, y-, yP, then cx+, cx-, cy+, cy-
    let (ri, rs, rp) = (0, 1, 2);
    let (ii, is, ip) = (n, n + 1, n + 2);
    t[(0, ri)] = h;
    t[(0, rs)] = h;
    t[(1, ri)] = h;
    t[(1, rs)] = -h;
    t[(2, rp)] = 1.0;
    t[(3, ii)] = h;
    t[(3, is)] = h;
    t[(4, ii)] = h;
    t[(4, is)] = -h;
    t[(5, ip)] = 1.0;
    if n == 5 {
        let (rbi, rbs, ibi, ibs) = (3, 4, 8, 9);
        t[(6, rbi)] = h;
        t[(6, rbs)] = h;
        t[(7, rbi)] = h;
        t[(7, rbs)] = -h;
        t[(8, ibi)] = h;
        t[(8, ibs)] = h;
        t[(9, ibi)] = h;
        t[(9, ibs)] = -h;
    }
    t
}

/// Real generator in the cross-quadrature basis, checked against the
/// mean-field residual first.
pub fn build_embedded_matrix(
    params: &SystemParams,
    ss: &SteadyState,
) -> Result<EmbeddedMatrix, LinresError> {
    let residual = meanfield::residual(params, ss, 0.0);
    if !(residual <= RESIDUAL_TOL) {
        return Err(LinresError::InconsistentSteadyState { residual });
    }
    let (p, q) = jacobians(params, ss);
    let n = p.nrows();
    let sum = &p + &q;
    let diff = &p - &q;
    let mut real = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            real[(r, c)] = sum[(r, c)].re;
            real[(r, c + n)] = -diff[(r, c)].im;
            real[(r + n, c)] = sum[(r, c)].im;
            real[(r + n, c + n)] = diff[(r, c)].re;
        }
    }
    let t = cross_rotation(n);
    let mut matrix = &t * real * t.transpose();
    // The rotation leaves rounding dust where couplings cancel exactly;
    // clearing it keeps the block structure visible to the eigen solver.
    let scale = matrix.amax();
    matrix.apply(|x| {
        if x.abs() < 1e-15 * scale {
            *x = 0.0
        }
    });
    let labels = if n == 3 {
        LABELS_MARKOVIAN.to_vec()
    } else {
        LABELS_EMBEDDED.to_vec()
    };
    Ok(EmbeddedMatrix {
        matrix,
        labels,
        frame: ss.frame(),
    })
}

pub fn eigenspectrum(m: &EmbeddedMatrix) -> Result<EigenSpectrum, LinresError> {
    if m.matrix.iter().any(|x| !x.is_finite()) {
        return Err(LinresError::EigensolverFailure);
    }
    let ev = eigen::eigenvalues(&m.matrix).ok_or(LinresError::EigensolverFailure)?;
    Ok(EigenSpectrum::from_eigenvalues(ev))
}

/// Spectrum of the given solution family at `params`, which need not be stable.
pub fn branch_spectrum(
    params: &SystemParams,
    phase: Phase,
    z2: Z2Branch,
) -> Result<EigenSpectrum, LinresError> {
    let ss = branch_state(params, phase, z2, 0.0).ok_or(LinresError::BranchMissing {
        phase,
        mu: params.mu(),
        kappa: params.kappa(),
    })?;
    eigenspectrum(&build_embedded_matrix(params, &ss)?)
}

/// Frequency-domain generator `L(lambda)` acting on
/// `v = (a_i, a_s, a_P, a_i*, a_s*, a_P*)` with memory variables eliminated.
/// Its poles `det(L(lambda) - lambda) = 0` are the eigenvalues of the
/// embedded matrix; `lambda = -i omega` gives the susceptibility.
pub fn response_matrix(
    params: &SystemParams,
    ss: &SteadyState,
    lambda: Complex64,
) -> SMatrix<Complex64, 6, 6> {
    let m = mean(ss);
    let gp = params.gamma_p();
    let damp = |shift: f64| -> Complex64 {
        if params.is_markovian() {
            Complex64::new(1.0, 0.0)
        } else {
            let k = params.kappa();
            k / (Complex64::new(k, -shift) + lambda)
        }
    };
    let mut l = SMatrix::<Complex64, 6, 6>::zeros();
    let (i, s, p, ic, sc, pc) = (0, 1, 2, 3, 4, 5);
    l[(i, i)] = I * m.di - 0.5 * damp(m.di);
    l[(s, s)] = I * m.ds - 0.5 * damp(m.ds);
    l[(ic, ic)] = -I * m.di - 0.5 * damp(-m.di);
    l[(sc, sc)] = -I * m.ds - 0.5 * damp(-m.ds);
    l[(i, p)] = 0.5 * I * m.as_.conj();
    l[(s, p)] = 0.5 * I * m.ai.conj();
    l[(i, sc)] = 0.5 * I * m.ap;
    l[(s, ic)] = 0.5 * I * m.ap;
    l[(ic, pc)] = -0.5 * I * m.as_;
    l[(sc, pc)] = -0.5 * I * m.ai;
    l[(ic, s)] = -0.5 * I * m.ap.conj();
    l[(sc, i)] = -0.5 * I * m.ap.conj();
    l[(p, p)] = (-0.5 * gp).into();
    l[(pc, pc)] = (-0.5 * gp).into();
    l[(p, i)] = 0.5 * I * gp * m.as_;
    l[(p, s)] = 0.5 * I * gp * m.ai;
    l[(pc, ic)] = -0.5 * I * gp * m.as_.conj();
    l[(pc, sc)] = -0.5 * I * gp * m.ai.conj();
    l
}

const BRACKET: (f64, f64) = (0.0, 4.0);

/// Drive at which the disordered branch loses stability, by bisection on
/// the numerically computed `max Re lambda` over `mu in [0, 4]`.
pub fn locate_critical_drive(params: &SystemParams, phase: Phase) -> Result<f64, LinresError> {
    if phase != Phase::Disordered {
        return Err(LinresError::UnsupportedPhase(phase));
    }
    let kappa = params.kappa();
    let f = |mu: f64| -> Result<f64, LinresError> {
        let p = params.with_mu(mu)?;
        Ok(branch_spectrum(&p, Phase::Disordered, Z2Branch::Plus)?.max_re)
    };
    let (mut lo, mut hi) = BRACKET;
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(LinresError::BracketFailure { kappa, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.abs() < 1e-10 && hi - lo < 1e-12 {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenflowRow {
    pub mu: f64,
    pub phase: Phase,
    pub eigenvalues: Result<Vec<Complex64>, LinresError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenflowSweep {
    pub kappa: f64,
    pub mu_cr: f64,
    pub mu_ep: Option<f64>,
    pub rows: Vec<EigenflowRow>,
}

/// Sorted spectra of each requested branch along `mu_grid` at fixed kappa.
/// Rows are mu-major, phases in the order given.
pub fn eigenflow_sweep(
    base: &SystemParams,
    kappa: f64,
    mu_grid: &[f64],
    phases: &[Phase],
    exec: Execution,
) -> Result<EigenflowSweep, meanfield::GridError> {
    meanfield::check_grid("mu", mu_grid)?;
    let np = phases.len();
    let rows = exec::map_indexed(exec, mu_grid.len() * np, |idx| {
        let mu = mu_grid[idx / np];
        let phase = phases[idx % np];
        let eigenvalues = base
            .with_mu_kappa(mu, kappa)
            .map_err(LinresError::from)
            .and_then(|p| branch_spectrum(&p, phase, Z2Branch::Plus))
            .map(|s| s.eigenvalues);
        EigenflowRow {
            mu,
            phase,
            eigenvalues,
        }
    });
    Ok(EigenflowSweep {
        kappa,
        mu_cr: critical_drive(kappa),
        mu_ep: exceptional_point_drive(kappa),
        rows,
    })
}

pub const EIGENFLOW_HEADER: &str = "mu,kappa,phase,index,re_lambda,im_lambda";

/// Long-format CSV; a failed point becomes one row with `index = -1` and NaN values.
pub fn write_eigenflow_csv<W: std::io::Write>(
    sweep: &EigenflowSweep,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{EIGENFLOW_HEADER}")?;
    for r in &sweep.rows {
        match &r.eigenvalues {
            Ok(ev) => {
                for (k, z) in ev.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        r.mu, sweep.kappa, r.phase, k, z.re, z.im
                    )?;
                }
            }
            Err(_) => writeln!(w, "{},{},{},-1,NaN,NaN", r.mu, sweep.kappa, r.phase)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::steady_state;
    use crate::model::{Memory, RawParams};
    use approx::assert_relative_eq;

    fn params(mu: f64, memory: Memory) -> SystemParams {
        RawParams {
            mu,
            memory,
            ..RawParams::default()
        }
        .validate()
        .unwrap()
    }

    fn spectrum(mu: f64, memory: Memory) -> EigenSpectrum {
        let p = params(mu, memory);
        let ss = steady_state(&p, Z2Branch::Plus, 0.0);
        eigenspectrum(&build_embedded_matrix(&p, &ss).unwrap()).unwrap()
    }

    fn contains(ev: &[Complex64], z: Complex64, tol: f64) -> bool {
        ev.iter().any(|e| (e - z).norm() < tol)
    }

    #[test]
    fn closed_form_examples() {
        let (a, b) = disordered_eigenvalues_closed_form(1.0, 0.5);
        assert_eq!((a, b), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
        let (a, b) = disordered_eigenvalues_closed_form(0.0, 5.0);
        assert_relative_eq!(a.re, (-10.0 + 60f64.sqrt()) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(b.re, (-10.0 - 60f64.sqrt()) / 4.0, max_relative = 1e-14);
        let (a, b) = disordered_eigenvalues_closed_form(0.5, 0.15);
        assert_relative_eq!(a.re, 0.05, epsilon = 1e-15);
        assert_relative_eq!(a.im, 0.1870828693386971, max_relative = 1e-14);
        assert_eq!(b, a.conj());
    }

    #[test]
    fn ep_drive_examples() {
        assert_eq!(exceptional_point_drive(0.5), Some(1.0));
        assert_eq!(exceptional_point_drive(2.0), Some(0.0));
        assert_relative_eq!(exceptional_point_drive(0.15).unwrap(), 1.2f64.sqrt() - 0.3);
        assert_eq!(exceptional_point_drive(2.5), None);
    }

    #[test]
    fn markovian_disordered_spectrum() {
        let s = spectrum(0.4, Memory::MARKOVIAN);
        assert_eq!(s.eigenvalues.len(), 6);
        let ev = &s.eigenvalues;
        assert!(contains(ev, Complex64::new(0.5 * (0.4 - 1.0), 0.0), 1e-14));
        assert_eq!(ev.iter().filter(|z| (z.re + 0.7).abs() < 1e-14).count(), 2);
        assert_eq!(ev.iter().filter(|z| (z.re + 50.0).abs() < 1e-12).count(), 2);
    }

    #[test]
    fn embedded_disordered_contains_closed_form_and_pump() {
        let s = spectrum(0.0, Memory::Kappa(1.0));
        assert_eq!(s.eigenvalues.len(), 10);
        let (a, b) = disordered_eigenvalues_closed_form(0.0, 1.0);
        assert!(contains(&s.eigenvalues, a, 1e-12));
        assert!(contains(&s.eigenvalues, b, 1e-12));
        assert!(contains(&s.eigenvalues, Complex64::new(-50.0, 0.0), 1e-10));
    }

    #[test]
    fn u1_has_one_zero_mode() {
        let s = spectrum(2.0, Memory::Kappa(1.0));
        assert_eq!(s.zero_modes(), 1);
        assert!(s.relaxation_bound(true) < -1e-3);
    }

    #[test]
    fn u1xz2_is_stable_with_one_zero_mode() {
        let s = spectrum(1.0, Memory::Kappa(0.2));
        assert_eq!(s.zero_modes(), 1);
        assert!(s.relaxation_bound(true) < -1e-4);
    }

    #[test]
    fn rejects_inconsistent_state() {
        let p = params(2.0, Memory::Kappa(1.0));
        let mut ss = steady_state(&p, Z2Branch::Plus, 0.0);
        ss.amp_signal = 0.9;
        assert!(matches!(
            build_embedded_matrix(&p, &ss),
            Err(LinresError::InconsistentSteadyState { .. })
        ));
    }

    #[test]
    fn identity_matrix_spectrum() {
        let m = EmbeddedMatrix {
            matrix: -DMatrix::identity(4, 4),
            labels: vec!["a"; 4],
            frame: crate::dynamics::Frame::LAB,
        };
        let s = eigenspectrum(&m).unwrap();
        assert!(s.stable);
        assert!(s
            .eigenvalues
            .iter()
            .all(|z| *z == Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn pole_polynomial_roots_match_eigenvalues() {
        for (mu, mem) in [
            (0.3, Memory::Kappa(1.0)),
            (2.0, Memory::Kappa(1.0)),
            (1.0, Memory::Kappa(0.2)),
            (0.5, Memory::MARKOVIAN),
        ] {
            let p = params(mu, mem);
            let ss = steady_state(&p, Z2Branch::Plus, 0.0);
            let s = eigenspectrum(&build_embedded_matrix(&p, &ss).unwrap()).unwrap();
            let roots = poles::pole_roots(&p, &ss);
            assert_eq!(roots.len(), s.eigenvalues.len());
            for r in &roots {
                let nearest = s
                    .eigenvalues
                    .iter()
                    .map(|e| (e - r).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    nearest < 1e-5 * (1.0 + r.norm()),
                    "mu={mu}: root {r} off by {nearest}"
                );
            }
        }
    }

    #[test]
    fn critical_drive_by_bisection() {
        for kappa in [1.0, 0.2, 0.5, 3.0] {
            let p = params(0.0, Memory::Kappa(kappa));
            let mu = locate_critical_drive(&p, Phase::Disordered).unwrap();
            assert!((mu - critical_drive(kappa)).abs() < 1e-6, "{kappa}: {mu}");
        }
        let p = params(0.0, Memory::Kappa(1.0));
        assert!(matches!(
            locate_critical_drive(&p, Phase::U1),
            Err(LinresError::UnsupportedPhase(_))
        ));
    }
}
