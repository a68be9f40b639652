// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Poles of the frequency-domain response found without the embedding.
//!
//! `det(L(lambda) - lambda I)` times the memory denominators is a polynomial
//! in `lambda`; its roots are found by Aberth iteration on function values.
//! This is a cross-check on the eigen solve, not a production path.

use std::f64::consts::PI;

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::meanfield::SteadyState;
use crate::model::SystemParams;

use super::response_matrix;

/// Value of the pole polynomial at complex `lambda`.
pub fn pole_polynomial(params: &SystemParams, ss: &SteadyState, lambda: Complex64) -> Complex64 {
    let l = response_matrix(params, ss, lambda);
    let shifted: SMatrix<Complex64, 6, 6> = l - SMatrix::identity() * lambda;
    let mut det = shifted.determinant();
    if !params.is_markovian() {
        let k = params.kappa();
        let f = ss.frame();
        for d in [f.idler, -f.idler, f.signal, -f.signal] {
            det *= Complex64::new(k, -d) + lambda;
        }
    }
    det
}

/// Roots of the pole polynomial.
pub fn pole_roots(params: &SystemParams, ss: &SteadyState) -> Vec<Complex64> {
    let degree = if params.is_markovian() { 6 } else { 10 };
    let scale = params.gamma_p().max(params.kappa().min(1e6)).max(1.0);
    aberth_roots(|z| pole_polynomial(params, ss, z), degree, (0.05, scale))
}

/// Roots of an analytic function known to be a polynomial of `degree`,
/// by simultaneous Aberth–Ehrlich iteration. Starting points are spread
/// log-uniformly in modulus over `radii`. The derivative is a central
/// difference, so only function values are needed.
pub fn aberth_roots<F>(f: F, degree: usize, radii: (f64, f64)) -> Vec<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let eval = |z: Complex64| {
        let h = 1e-6 * (1.0 + z.norm());
        let dp = (f(z + h) - f(z - h)) / (2.0 * h);
        (f(z), dp)
    };
    let (r0, r1) = radii;
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let t = if degree > 1 {
                k as f64 / (degree - 1) as f64
            } else {
                0.0
            };
            let r = r0 * (r1 / r0).powf(t);
            Complex64::from_polar(r, 2.0 * PI * k as f64 / degree as f64 + 0.4)
        })
        .collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..degree {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            z[i] -= step;
            moved = moved.max(step.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-14 {
            break;
        }
    }
    z
}
