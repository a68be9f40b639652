// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Eigenvalues of a real matrix, split along its connected components.
//!
//! Most embedded matrices are block diagonal after a permutation. Solving
//! each block separately keeps 2x2 blocks in closed form, which matters at
//! exceptional points where an iterative solver would smear a Jordan block
//! over `sqrt(eps)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Index sets of the connected components of the sparsity graph of `m`.
pub fn components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Both eigenvalues of `[[a, b], [c, d]]`, computed without cancellation.
pub fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let det = a * d - b * c;
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let big = if half_tr >= 0.0 {
            half_tr + s
        } else {
            half_tr - s
        };
        let small = if big != 0.0 {
            det / big
        } else {
            half_tr - s.copysign(big)
        };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

/// All eigenvalues, or `None` if the Schur iteration does not converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    let mut out = Vec::with_capacity(m.nrows());
    for comp in components(m) {
        match comp.len() {
            1 => out.push(Complex64::new(m[(comp[0], comp[0])], 0.0)),
            2 => {
                let (i, j) = (comp[0], comp[1]);
                out.extend(eig2(m[(i, i)], m[(i, j)], m[(j, i)], m[(j, j)]));
            }
            k => {
                let sub = DMatrix::from_fn(k, k, |r, c| m[(comp[r], comp[c])]);
                let schur = sub.try_schur(1e-15, 10_000)?;
                out.extend(schur.complex_eigenvalues().iter().copied());
            }
        }
    }
    Some(out)
}

/// Right null vector of `m - lambda I`, taken as the right singular vector
/// of the smallest singular value. Normalized to unit length.
pub fn eigenvector(m: &DMatrix<f64>, lambda: Complex64) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let shifted = DMatrix::from_fn(n, n, |r, c| {
        let v = Complex64::new(m[(r, c)], 0.0);
        if r == c {
            v - lambda
        } else {
            v
        }
    });
    let svd = shifted.try_svd(false, true, 1e-15, 10_000)?;
    let v_t = svd.v_t?;
    let k = (0..n).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))?;
    let row = v_t.row(k);
    Some(DVector::from_iterator(n, row.iter().map(|z| z.conj())))
}

/// Angle between the complex lines spanned by `u` and `v`.
pub fn principal_angle(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    let overlap = u.dotc(v).norm() / (u.norm() * v.norm());
    overlap.min(1.0).acos()
}
