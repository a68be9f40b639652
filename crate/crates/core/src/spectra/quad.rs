// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Globally adaptive Gauss–Kronrod (7, 15) quadrature for vector integrands.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
}

fn gk15<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let n = fc.len();
    let mut k: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut g: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let lo = f(c - h * XGK[j]);
        let hi = f(c + h * XGK[j]);
        for m in 0..n {
            let s = lo[m] + hi[m];
            k[m] += WGK[j] * s;
            if j % 2 == 1 {
                g[m] += WG[j / 2] * s;
            }
        }
    }
    let value: Vec<f64> = k.iter().map(|v| v * h).collect();
    let error = k
        .iter()
        .zip(&g)
        .map(|(kv, gv)| ((kv - gv) * h).abs())
        .collect();
    Panel { a, b, value, error }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub converged: bool,
}

/// Integrates `f` over the union of consecutive intervals given by
/// `breaks`, bisecting the worst panel until every component listed in
/// `watch` satisfies `error <= rel_tol * |value| + abs_tol`.
pub fn integrate<F>(
    f: F,
    breaks: &[f64],
    watch: &[usize],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Quadrature
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut panels: Vec<Panel> = breaks.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let n = panels.first().map_or(0, |p| p.value.len());
    let totals = |panels: &[Panel]| {
        let mut v = vec![0.0; n];
        let mut e = vec![0.0; n];
        // fixed summation order: by position on the axis
        let mut idx: Vec<usize> = (0..panels.len()).collect();
        idx.sort_by(|&x, &y| panels[x].a.total_cmp(&panels[y].a));
        for i in idx {
            for m in 0..n {
                v[m] += panels[i].value[m];
                e[m] += panels[i].error[m];
            }
        }
        (v, e)
    };
    loop {
        let (value, error) = totals(&panels);
        let worst_ratio = |p: &Panel| {
            watch
                .iter()
                .map(|&m| p.error[m] / (rel_tol * value[m].abs() + abs_tol))
                .fold(0.0, f64::max)
        };
        let done = watch
            .iter()
            .all(|&m| error[m] <= rel_tol * value[m].abs() + abs_tol);
        if done || panels.len() >= max_panels {
            return Quadrature {
                value,
                error,
                converged: done,
            };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, worst_ratio(p)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // panel cannot be split further
            panels.push(p);
            let (value, error) = totals(&panels);
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let q = integrate(
            |x| vec![x.powi(7), 1.0],
            &[0.0, 2.0],
            &[0, 1],
            1e-12,
            0.0,
            10,
        );
        assert_relative_eq!(q.value[0], 2f64.powi(8) / 8.0, max_relative = 1e-13);
        assert_relative_eq!(q.value[1], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn narrow_lorentzian() {
        let w = 1e-3;
        let f = move |x: f64| vec![w / (x * x + w * w)];
        let q = integrate(f, &[0.0, 1e-2, 1.0, 100.0], &[0], 1e-10, 0.0, 2000);
        assert!(q.converged);
        assert_relative_eq!(q.value[0], (100.0 / w).atan(), max_relative = 1e-9);
    }
}
