use std::fmt::Write as _;

use nmpo::linres::{self, LinresError};
use nmpo::meanfield::{self, classify_phase, steady_state};
use nmpo::sde::{self, SdeError, SimConfig, SimState};
use nmpo::spectra::{self, closed, NegativityOptions, PumpNoise, SqueezingPath, VarianceReport};
use nmpo::{exec, Execution, Phase, SystemParams, Z2Branch};
use serde_json::{json, Value};

use crate::args::{BranchArg, InitArg, MethodArg, PathArg, PumpNoiseArg, SchemeArg, SimArgs};
use crate::error::{failure, CliError};
use crate::setup::Setup;

/// Rendered output of one command.
pub struct Dataset {
    pub csv: String,
    pub json: Value,
    pub failures: Vec<Value>,
}

/// JSON number that keeps infinities readable; NaN becomes null.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::Null
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn grid_error(e: meanfield::GridError) -> CliError {
    CliError::invalid(json!({ "grid": e.to_string() }))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

pub fn phase_diagram(s: &Setup) -> Result<Dataset, CliError> {
    let rows = meanfield::phase_diagram(
        &s.base(),
        &s.mu.values,
        &s.kappa.values,
        Execution::Parallel,
    )
    .map_err(grid_error)?;
    let n = s.nth_values()[0];
    let failures = rows
        .iter()
        .filter_map(|r| {
            r.max_re_lambda
                .as_ref()
                .err()
                .map(|e| failure(r.mu, r.kappa, n, e))
        })
        .collect();
    let json = rows
        .iter()
        .map(|r| {
            json!({
                "mu": num(r.mu),
                "kappa": num(r.kappa),
                "phase": r.phase,
                "max_re_lambda": num(r.max_re_lambda.as_ref().copied().unwrap_or(f64::NAN)),
            })
        })
        .collect();
    Ok(Dataset {
        csv: csv_bytes(|w| meanfield::write_phase_diagram_csv(&rows, w)),
        json,
        failures,
    })
}

pub fn eigenflow(s: &Setup, branches: &[BranchArg]) -> Result<Dataset, CliError> {
    let phases: Vec<Phase> = branches
        .iter()
        .map(|b| match b {
            BranchArg::Disordered => Phase::Disordered,
            BranchArg::U1 => Phase::U1,
            BranchArg::U1xz2 => Phase::U1xZ2,
        })
        .collect();
    let n = s.nth_values()[0];
    let mut csv = String::new();
    let mut json = Vec::new();
    let mut failures = Vec::new();
    for &kappa in &s.kappa.values {
        let base = s.params(s.mu.values[0], kappa, n).expect("validated");
        let sweep =
            linres::eigenflow_sweep(&base, kappa, &s.mu.values, &phases, Execution::Parallel)
                .map_err(grid_error)?;
        let text = csv_bytes(|w| linres::write_eigenflow_csv(&sweep, w));
        // one header for all kappa blocks
        let body = if csv.is_empty() {
            &text[..]
        } else {
            text.split_once('\n').map_or("", |x| x.1)
        };
        csv.push_str(body);
        let mut rows = Vec::new();
        for r in &sweep.rows {
            let eig = match &r.eigenvalues {
                Ok(ev) => json!(ev.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()),
                Err(LinresError::BranchMissing { .. }) => Value::Null,
                Err(e) => {
                    failures.push(failure(r.mu, kappa, n, e));
                    Value::Null
                }
            };
            rows.push(json!({ "mu": num(r.mu), "phase": r.phase, "eigenvalues": eig }));
        }
        json.push(json!({
            "kappa": num(kappa),
            "mu_cr": num(sweep.mu_cr),
            "mu_ep": sweep.mu_ep.map(num),
            "rows": rows,
        }));
    }
    Ok(Dataset {
        csv,
        json: Value::Array(json),
        failures,
    })
}

fn pump_noise(p: PumpNoiseArg) -> PumpNoise {
    match p {
        PumpNoiseArg::Auto => PumpNoise::Auto,
        PumpNoiseArg::On => PumpNoise::On,
        PumpNoiseArg::Off => PumpNoise::Off,
    }
}

struct VarianceRow {
    mu: f64,
    kappa: f64,
    n_th: f64,
    phase: Phase,
    values: [f64; 4],
    squeezed: f64,
    label: &'static str,
    angle: f64,
}

fn variance_row(
    p: &SystemParams,
    method: MethodArg,
    pump: PumpNoise,
) -> Result<VarianceRow, String> {
    let (mu, kappa, n) = (p.mu(), p.kappa(), p.n_th());
    let phase = classify_phase(mu, kappa);
    let report: Option<VarianceReport> = match (method, phase) {
        (MethodArg::Spectral, _) => {
            Some(spectra::variances_spectral(p, Z2Branch::Plus, pump).map_err(|e| e.to_string())?)
        }
        (MethodArg::ClosedForm, Phase::Disordered) => {
            Some(closed::variances_below_threshold(mu, kappa, n).map_err(|e| e.to_string())?)
        }
        (MethodArg::ClosedForm, Phase::U1) => Some(
            closed::variances_above_threshold_u1(mu, kappa, n, p.n_th_p())
                .map_err(|e| e.to_string())?,
        ),
        (MethodArg::ClosedForm, Phase::U1xZ2) => None,
    };
    Ok(match report {
        Some(r) => VarianceRow {
            mu,
            kappa,
            n_th: n,
            phase,
            values: std::array::from_fn(|k| r.quadratures[k].normalized.unwrap_or(f64::NAN)),
            squeezed: r.squeezed.normalized.unwrap_or(f64::NAN),
            label: if r.mixing_angle.is_some() {
                "mix"
            } else {
                r.squeezed.label
            },
            angle: r.mixing_angle.unwrap_or(f64::NAN),
        },
        None => VarianceRow {
            mu,
            kappa,
            n_th: n,
            phase,
            values: [f64::NAN; 4],
            squeezed: closed::squeezed_formula(mu, kappa),
            label: "mix",
            angle: f64::NAN,
        },
    })
}

pub const VARIANCES_HEADER: &str =
    "mu,kappa,n_th,phase,var_xp,var_xm,var_yp,var_ym,squeezed,squeezed_label,mixing_angle";

pub fn variances(s: &Setup, method: MethodArg, pump: PumpNoiseArg) -> Result<Dataset, CliError> {
    let pump = pump_noise(pump);
    let (mus, kappas, ns) = (&s.mu.values, &s.kappa.values, s.nth_values());
    let (nm, nk) = (mus.len(), kappas.len());
    let results = exec::map_indexed(Execution::Parallel, nm * nk * ns.len(), |idx| {
        let (mu, kappa, n) = (mus[idx % nm], kappas[(idx / nm) % nk], ns[idx / (nm * nk)]);
        let p = s.params(mu, kappa, n).expect("validated");
        variance_row(&p, method, pump).map_err(|e| failure(mu, kappa, n, e))
    });
    let mut csv = format!("{VARIANCES_HEADER}\n");
    let mut json = Vec::new();
    let mut failures = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        let (mu, kappa, n) = (mus[idx % nm], kappas[(idx / nm) % nk], ns[idx / (nm * nk)]);
        let row = r.unwrap_or_else(|f| {
            failures.push(f);
            VarianceRow {
                mu,
                kappa,
                n_th: n,
                phase: classify_phase(mu, kappa),
                values: [f64::NAN; 4],
                squeezed: f64::NAN,
                label: "none",
                angle: f64::NAN,
            }
        });
        let [a, b, c, d] = row.values;
        writeln!(
            csv,
            "{},{},{},{},{a},{b},{c},{d},{},{},{}",
            row.mu, row.kappa, row.n_th, row.phase, row.squeezed, row.label, row.angle
        )
        .unwrap();
        json.push(json!({
            "mu": num(row.mu), "kappa": num(row.kappa), "n_th": num(row.n_th), "phase": row.phase,
            "var_xp": num(a), "var_xm": num(b), "var_yp": num(c), "var_ym": num(d),
            "squeezed": num(row.squeezed), "squeezed_label": row.label, "mixing_angle": num(row.angle),
        }));
    }
    Ok(Dataset {
        csv,
        json: Value::Array(json),
        failures,
    })
}

pub fn negativity(s: &Setup, comparator: bool, path: PathArg) -> Result<Dataset, CliError> {
    let opts = NegativityOptions {
        n_th_pump: s.nth_pump,
        path: match path {
            PathArg::ClosedForm => SqueezingPath::ClosedForm,
            PathArg::Linearized => SqueezingPath::Linearized,
        },
        markovian_comparator: comparator,
    };
    let rows = spectra::negativity_map(
        &s.base(),
        &s.mu.values,
        &s.kappa.values,
        &s.nth_values(),
        opts,
        Execution::Parallel,
    )
    .map_err(grid_error)?;
    let failures = rows
        .iter()
        .filter_map(|r| {
            r.result
                .as_ref()
                .err()
                .map(|e| failure(r.mu, r.kappa, r.n_th, e))
        })
        .collect();
    let json = rows
        .iter()
        .map(|r| {
            let (e, sq) = r.result.as_ref().map_or((f64::NAN, f64::NAN), |x| (x.e_n, x.sigma_sq_abs));
            json!({ "mu": num(r.mu), "kappa": num(r.kappa), "n_th": num(r.n_th), "e_n": num(e), "sigma_sq_abs": num(sq) })
        })
        .collect();
    Ok(Dataset {
        csv: csv_bytes(|w| spectra::write_negativity_csv(&rows, w)),
        json,
        failures,
    })
}

pub const SIMULATE_HEADER: &str = "mu,kappa,n_th,phase,amp,amp_se,amp_mf,delta_abs,delta_abs_se,\
delta_signed,delta_signed_se,delta_mf,var_phi_dot,var_phi_dot_se,\
var_xp,var_xp_se,var_xm,var_xm_se,var_yp,var_yp_se,var_ym,var_ym_se";

fn sim_config(p: &SystemParams, a: &SimArgs, seed: u64) -> Result<SimConfig, SdeError> {
    let cfg = SimConfig {
        dt: a.dt.unwrap_or_else(|| SimConfig::max_dt(p)),
        t_burn: match a.t_burn {
            Some(t) => t,
            None => SimConfig::min_burn(p)?,
        },
        t_sample: a.t_sample,
        n_traj: a.n_traj,
        seed,
        scheme: match a.scheme {
            SchemeArg::EulerMaruyama => sde::Scheme::EulerMaruyama,
            SchemeArg::StochasticHeun => sde::Scheme::StochasticHeun,
        },
        record_interval: a.record_interval,
        noise: !a.no_noise,
        pump_noise: pump_noise(a.pump_noise),
    };
    cfg.validate(p)?;
    Ok(cfg)
}

/// Trajectory dump of the first grid point, if requested.
pub struct SimulateOutput {
    pub data: Dataset,
    pub trajectory: Option<String>,
}

pub fn simulate(s: &Setup, a: &SimArgs) -> Result<SimulateOutput, CliError> {
    let mut csv = format!("{SIMULATE_HEADER}\n");
    let mut json = Vec::new();
    let mut failures = Vec::new();
    let mut trajectory = None;
    for &n in &s.nth_values() {
        for &kappa in &s.kappa.values {
            for &mu in &s.mu.values {
                let p = s.params(mu, kappa, n).expect("validated");
                let bad = |e: SdeError| {
                    CliError::invalid(
                        json!({ "mu": mu, "kappa": kappa, "n_th": n, "message": e.to_string() }),
                    )
                };
                let cfg = sim_config(&p, a, s.seed).map_err(bad)?;
                let ss = steady_state(&p, Z2Branch::Plus, 0.0);
                let init = match a.init {
                    InitArg::MeanField => SimState::from_modes(ss.lab_state(&p, 0.0)),
                    InitArg::Vacuum => SimState::default(),
                };
                let trs = match sde::simulate_ensemble(&p, &cfg, &init, Execution::Parallel) {
                    Ok(t) => t,
                    Err(e) => {
                        failures.push(failure(mu, kappa, n, &e));
                        writeln!(csv, "{mu},{kappa},{n},{}{}", ss.phase, ",NaN".repeat(18))
                            .unwrap();
                        json.push(json!({ "mu": num(mu), "kappa": num(kappa), "n_th": num(n), "error": e.to_string() }));
                        continue;
                    }
                };
                if a.trajectory_out.is_some() && trajectory.is_none() {
                    trajectory = Some(csv_bytes(|w| {
                        sde::write_trajectory_csv(&trs[0], a.decimate, w)
                    }));
                }
                let op = sde::estimate_order_parameters(&trs).map_err(bad)?;
                let vars = match sde::estimate_quadrature_variances(&p, &trs) {
                    Ok(r) => Some(r),
                    Err(e @ SdeError::NonStationary { .. }) => {
                        log::warn!("mu = {mu}, kappa = {kappa}: {e}; variances omitted");
                        None
                    }
                    Err(e) => return Err(bad(e)),
                };
                let mut v = String::new();
                for k in 0..4 {
                    let q = vars.as_ref().map(|r| &r.quadratures[k]);
                    let val = q.and_then(|q| q.normalized).unwrap_or(f64::NAN);
                    let se = q.and_then(|q| q.std_error).unwrap_or(f64::NAN);
                    write!(v, ",{val},{se}").unwrap();
                }
                writeln!(
                    csv,
                    "{mu},{kappa},{n},{},{},{},{},{},{},{},{},{},{},{}{v}",
                    ss.phase,
                    op.amp_mean,
                    op.amp_se,
                    ss.amp_idler,
                    op.delta_abs,
                    op.delta_abs_se,
                    op.delta_signed,
                    op.delta_signed_se,
                    ss.delta,
                    op.var_phi_dot,
                    op.var_phi_dot_se
                )
                .unwrap();
                json.push(json!({
                    "mu": num(mu), "kappa": num(kappa), "n_th": num(n), "phase": ss.phase,
                    "config": cfg,
                    "mean_field": { "amp": ss.amp_idler, "delta": ss.delta },
                    "order_parameters": op,
                    "variances": vars,
                }));
            }
        }
    }
    Ok(SimulateOutput {
        data: Dataset {
            csv,
            json: Value::Array(json),
            failures,
        },
        trajectory,
    })
}

pub const STEADY_STATE_HEADER: &str =
    "mu,kappa,phase,amp_idler,amp_signal,re_pump,im_pump,delta,mu_cr,max_re_lambda,zero_modes";

pub fn steady_state_point(s: &Setup) -> Result<Dataset, CliError> {
    let (mu, kappa, n) = s.require_single()?;
    let p = s.params(mu, kappa, n).expect("validated");
    let ss = steady_state(&p, Z2Branch::Plus, 0.0);
    let spec = linres::build_embedded_matrix(&p, &ss).and_then(|m| linres::eigenspectrum(&m));
    let mut failures = Vec::new();
    let (max_re, zeros) = match &spec {
        Ok(sp) => (
            sp.relaxation_bound(ss.phase.is_broken()),
            sp.zero_modes() as f64,
        ),
        Err(e) => {
            failures.push(failure(mu, kappa, n, e));
            (f64::NAN, f64::NAN)
        }
    };
    let csv = format!(
        "{STEADY_STATE_HEADER}\n{mu},{kappa},{},{},{},{},{},{},{},{max_re},{zeros}\n",
        ss.phase, ss.amp_idler, ss.amp_signal, ss.pump_amp.re, ss.pump_amp.im, ss.delta, ss.mu_cr
    );
    let json = json!({
        "params": p,
        "steady_state": ss,
        "spectrum": spec.as_ref().ok(),
        "max_re_lambda": num(max_re),
    });
    Ok(Dataset {
        csv,
        json,
        failures,
    })
}
