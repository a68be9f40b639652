// Stochastic simulator against mean-field, closed-form and spectral oracles.

use nmpo::dynamics::ModeState;
use nmpo::sde::{
    estimate_order_parameters, estimate_quadrature_variances, integrate_trajectory, ou_noise_step,
    simulate_ensemble, trajectory_rng, welch_psd, Scheme, SdeError, SimConfig, SimState,
    Trajectory,
};
use nmpo::spectra::{self, PumpNoise};
use nmpo::{meanfield, Execution, Memory, RawParams, SystemParams, Z2Branch};
use num_complex::Complex64;

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

fn at_steady_state(p: &SystemParams) -> SimState {
    SimState::from_modes(meanfield::steady_state(p, Z2Branch::Plus, 0.0).lab_state(p, 0.0))
}

fn slice(tr: &Trajectory, r: std::ops::Range<usize>) -> Trajectory {
    Trajectory {
        times: tr.times[r.clone()].to_vec(),
        idler: tr.idler[r.clone()].to_vec(),
        signal: tr.signal[r.clone()].to_vec(),
        pump: tr.pump[r].to_vec(),
        ..Default::default()
    }
}

#[test]
fn ou_autocorrelation_matches_exponential() {
    let (tau, dt, strength) = (1.0, 0.05, 0.5);
    let n = 1_000_000;
    let mut rng = trajectory_rng(42, 0);
    let mut f = Complex64::new(0.0, 0.0);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        f = ou_noise_step(f, dt, tau, strength, &mut rng);
        xs.push(f);
    }
    let batches = 50;
    let len = n / batches;
    for lag in [0usize, 10, 20, 40] {
        let target = strength / (2.0 * tau) * (-(lag as f64) * dt / tau).exp();
        let est: Vec<f64> = (0..batches)
            .map(|b| {
                let xs = &xs[b * len..(b + 1) * len];
                (0..len - lag)
                    .map(|k| (xs[k + lag] * xs[k].conj()).re)
                    .sum::<f64>()
                    / (len - lag) as f64
            })
            .collect();
        let m = est.iter().sum::<f64>() / batches as f64;
        let se = (est.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            / (batches * (batches - 1)) as f64)
            .sqrt();
        assert!(
            (m - target).abs() < 3.0 * se,
            "lag {lag}: {m} vs {target} (se {se})"
        );
    }
}

#[test]
fn noiseless_runs_reach_mean_field_solutions() {
    let seed = SimState::from_modes(ModeState {
        idler: Complex64::new(0.003, 0.01),
        signal: Complex64::new(0.007, 0.002),
        ..Default::default()
    });
    let cfg = SimConfig {
        dt: 0.005,
        t_burn: 400.0,
        t_sample: 200.0,
        noise: false,
        ..SimConfig::default()
    };
    for (mu, kappa) in [(2.0, 1.0), (1.0, 0.2), (0.5, 1.0), (0.0, 1.0)] {
        let p = params(mu, kappa, 20.0);
        let ss = meanfield::steady_state(&p, Z2Branch::Plus, 0.0);
        let tr = integrate_trajectory(&p, &cfg, &seed, 0).unwrap();
        let amp = tr.idler.iter().map(|z| z.norm()).sum::<f64>() / tr.len() as f64;
        assert!((amp - ss.amp_idler).abs() < 1e-4, "({mu}, {kappa}): {amp}");
        if ss.phase.is_broken() {
            let op = estimate_order_parameters(&[tr.clone(), tr.clone()]).unwrap();
            assert!(
                (op.delta_abs - ss.delta).abs() < 1e-3,
                "({mu}, {kappa}): {}",
                op.delta_abs
            );
            let pump = tr.pump.last().unwrap();
            assert!((pump.arg() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        }
    }
}

#[test]
fn thermal_state_without_drive() {
    let p = params(0.0, 1.0, 20.0);
    let cfg = SimConfig {
        dt: 0.005,
        t_burn: 60.0,
        t_sample: 200.0,
        n_traj: 100,
        seed: 3,
        ..SimConfig::default()
    };
    let trs = simulate_ensemble(&p, &cfg, &SimState::default(), Execution::Parallel).unwrap();
    let r = estimate_quadrature_variances(&p, &trs).unwrap();
    for q in &r.quadratures {
        assert!((q.normalized.unwrap() - 1.0).abs() < 0.05, "{q:?}");
    }
}

#[test]
fn u1_variances_and_frequency() {
    let p = params(2.0, 1.0, 100.0);
    let cfg = SimConfig {
        dt: 1e-3,
        t_burn: 60.0,
        t_sample: 200.0,
        n_traj: 100,
        seed: 3,
        ..SimConfig::default()
    };
    let trs = simulate_ensemble(&p, &cfg, &at_steady_state(&p), Execution::Parallel).unwrap();
    let r = estimate_quadrature_variances(&p, &trs).unwrap();
    let ym = r.normalized("y-").unwrap();
    assert!((ym / (1.0 / 3.0) - 1.0).abs() < 0.05, "{ym}");
    assert!(r.get("x-").unwrap().divergent);
    let op = estimate_order_parameters(&trs).unwrap();
    assert!(
        op.delta_signed.abs() < 2.0 * op.delta_signed_se,
        "{} +- {}",
        op.delta_signed,
        op.delta_signed_se
    );
    assert!((op.amp_mean - 1.0).abs() < 0.01);
}

#[test]
fn schemes_agree_within_errors() {
    let p = params(0.5, 1.0, 20.0);
    let run = |scheme, dt| {
        let cfg = SimConfig {
            dt,
            scheme,
            t_burn: 60.0,
            t_sample: 100.0,
            n_traj: 100,
            seed: 11,
            ..SimConfig::default()
        };
        let trs = simulate_ensemble(&p, &cfg, &SimState::default(), Execution::Parallel).unwrap();
        let r = estimate_quadrature_variances(&p, &trs).unwrap();
        let q = r.get(r.squeezed.label).unwrap();
        (q.normalized.unwrap(), q.std_error.unwrap())
    };
    let runs: Vec<(f64, f64)> = [Scheme::EulerMaruyama, Scheme::StochasticHeun]
        .into_iter()
        .flat_map(|s| [(s, 0.005), (s, 0.0025)])
        .map(|(s, dt)| run(s, dt))
        .collect();
    for a in &runs {
        for b in &runs {
            let se = (a.1 * a.1 + b.1 * b.1).sqrt();
            assert!((a.0 - b.0).abs() < 3.0 * se, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn welch_spectrum_matches_linear_response() {
    let p = params(0.5, 1.0, 20.0);
    let cfg = SimConfig {
        dt: 0.005,
        t_burn: 60.0,
        t_sample: 400.0,
        n_traj: 200,
        seed: 3,
        ..SimConfig::default()
    };
    let trs = simulate_ensemble(&p, &cfg, &SimState::default(), Execution::Parallel).unwrap();
    let w = welch_psd(&p, &trs, 1024).unwrap();
    let ss = meanfield::steady_state(&p, Z2Branch::Plus, 0.0);
    let sd = spectra::psd(&p, &ss, &w.omegas, PumpNoise::Auto).unwrap();
    for (k, om) in w.omegas.iter().enumerate() {
        if om.abs() > 5.0 {
            continue;
        }
        // x+, x-, y+, y- sit at rows 0, 1, 3, 4 of the spectral matrix
        for (q, j) in [(0, 0), (1, 1), (2, 3), (3, 4)] {
            let exact = sd.matrices[k][(j, j)].re;
            let rel = w.densities[q][k] / exact - 1.0;
            assert!(rel.abs() < 0.1, "omega {om}, quadrature {q}: {rel}");
        }
    }
}

#[test]
fn z2_choice_persists_along_each_trajectory() {
    let p = params(1.0, 0.2, 20.0).with_occupancies(0.01, 0.01).unwrap();
    let cfg = SimConfig {
        dt: 0.005,
        t_burn: 200.0,
        t_sample: 1000.0,
        n_traj: 16,
        seed: 5,
        ..SimConfig::default()
    };
    let trs = simulate_ensemble(&p, &cfg, &SimState::default(), Execution::Parallel).unwrap();
    let delta = meanfield::frequency_shift(0.2);
    let mut signs = Vec::new();
    for tr in &trs {
        let blocks = 10;
        let len = tr.len() / blocks;
        let per_block: Vec<f64> = (0..blocks)
            .map(|b| {
                let s = slice(tr, b * len..(b + 1) * len);
                estimate_order_parameters(&[s.clone(), s])
                    .unwrap()
                    .delta_signed
            })
            .collect();
        let sign = per_block[0].signum();
        assert!(
            per_block
                .iter()
                .all(|d| d.signum() == sign && (d.abs() / delta - 1.0).abs() < 0.05),
            "{per_block:?}"
        );
        signs.push(sign);
    }
    assert!(signs.contains(&1.0) && signs.contains(&-1.0));
    let op = estimate_order_parameters(&trs).unwrap();
    assert!(op.delta_signed.abs() < 0.5 * delta, "{}", op.delta_signed);
}

#[test]
fn transient_is_reported_as_nonstationary() {
    let p = params(0.5, 1.0, 20.0);
    let cfg = SimConfig {
        dt: 0.005,
        t_burn: 0.0,
        t_sample: 20.0,
        n_traj: 50,
        seed: 2,
        ..SimConfig::default()
    };
    let kick = SimState::from_modes(ModeState {
        idler: Complex64::new(0.2, 0.0),
        signal: Complex64::new(0.2, 0.0),
        pump: Complex64::new(0.0, 0.5),
        ..Default::default()
    });
    let trs = simulate_ensemble(&p, &cfg, &kick, Execution::Parallel).unwrap();
    assert!(matches!(
        estimate_quadrature_variances(&p, &trs),
        Err(SdeError::NonStationary { .. })
    ));
}
