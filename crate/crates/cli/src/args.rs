use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::grid::Grid;

const ENV_HELP: &str = "\
Grid values accept `min:max:count`, a comma list, or a single number.
Parameter precedence: command-line flag, then --params file, then the
command's default. Rayon reads the worker count from RAYON_NUM_THREADS.

Exit codes: 0 success, 2 invalid input (JSON diagnostics on stderr),
3 numerical failure (failing grid points listed on stderr), 4 I/O error.";

#[derive(Parser, Debug)]
#[command(name = "nmpo", version, about = "Datasets for a parametric oscillator coupled to a reservoir with exponential memory", after_help = ENV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stable phase and slowest relaxation rate on a mu x kappa grid
    #[command(after_help = "\
Defaults: --mu 0:2:201 --kappa 0.05:2:201

CSV columns (one row per grid point, kappa-major):
  mu              normalized drive
  kappa           normalized reservoir decay rate 1/(gamma0 tau_r)
  phase           disordered | u1 | u1xz2
  max_re_lambda   least negative Re(lambda) of the stable phase, Goldstone mode excluded")]
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
    },
    /// Relaxation eigenvalues along mu at fixed kappa
    #[command(after_help = "\
Defaults: --kappa 1.25,0.5,0.15 --mu 0:2:401 --branch disordered

CSV columns (one row per eigenvalue):
  mu, kappa       grid point
  phase           solution branch the spectrum belongs to
  index           position in the spectrum sorted by decreasing Re(lambda);
                  -1 with NaN values when the branch does not exist at this mu
  re_lambda       real part of the eigenvalue
  im_lambda       imaginary part of the eigenvalue")]
    Eigenflow {
        #[command(flatten)]
        common: Common,
        /// Solution branches to follow
        #[arg(long, value_delimiter = ',', default_value = "disordered")]
        branch: Vec<BranchArg>,
    },
    /// Normalized cross-quadrature variances of the stable phase
    #[command(after_help = "\
Defaults: --mu 0:3:31 --kappa 0.1:2:20 --nth 0 --method spectral

CSV columns (one row per grid point; variances normalized to (n_th + 1/2)/2,
NaN where divergent or not available):
  mu, kappa, n_th   grid point
  phase             stable phase
  var_xp, var_xm    variances of x+ and x-
  var_yp, var_ym    variances of y+ and y-
  squeezed          smallest variance (over cos(t) x+ + sin(t) y- in u1xz2)
  squeezed_label    quadrature attaining it (`mix` for a mixed quadrature)
  mixing_angle      minimizing angle t in u1xz2, NaN elsewhere")]
    Variances {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = PumpNoiseArg::Auto)]
        pump_noise: PumpNoiseArg,
    },
    /// Logarithmic negativity from the squeezed variance
    #[command(after_help = "\
Defaults: --mu 0:3:301 --kappa 0.2 --nth 0,1,5,10 --path closed-form

CSV columns (rows ordered by n_th, then kappa, then mu):
  mu, kappa, n_th   grid point; kappa = inf rows are the Markovian comparator
  e_n               logarithmic negativity
  sigma_sq_abs      squeezed variance in absolute units (vacuum = 1/2)")]
    Negativity {
        #[command(flatten)]
        common: Common,
        /// Append Markovian (kappa = inf) rows at every mu and n_th
        #[arg(long)]
        markovian_comparator: bool,
        #[arg(long, value_enum, default_value_t = PathArg::ClosedForm)]
        path: PathArg,
    },
    /// Stochastic trajectories and their order-parameter estimates
    #[command(after_help = "\
Defaults: --mu 2 --kappa 0.2,0.3,0.4,0.6,0.8,1,1.5 --nth 0, dt at its stability
bound, burn-in at its minimum

CSV columns (one row per grid point; _se columns are standard errors):
  mu, kappa, n_th            grid point
  phase                      stable mean-field phase
  amp, amp_se                mean |A_i| in scaled units
  amp_mf                     mean-field |A_i|
  delta_abs, delta_abs_se    mean |frequency shift| of the idler
  delta_signed, ..._se       ensemble mean of the signed shift
  delta_mf                   mean-field shift magnitude
  var_phi_dot, ..._se        variance of the signal-idler phase rate (window 5/gamma0)
  var_xp .. var_ym, ..._se   normalized cross-quadrature variances (NaN if not
                             stationary; x- is NaN in the broken phases)")]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Mean-field solution and relaxation spectrum at one point
    #[command(after_help = "\
Defaults: --mu 2 --kappa 1

CSV columns:
  mu, kappa, phase          point and stable phase
  amp_idler, amp_signal     mean-field amplitudes
  re_pump, im_pump          pump amplitude A_P
  delta                     frequency-shift magnitude
  mu_cr                     critical drive at this kappa
  max_re_lambda             least negative Re(lambda), Goldstone mode excluded
  zero_modes                eigenvalues with |lambda| < 1e-8")]
    SteadyState {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` parameter file (keys gamma0, gammaP, tau_r | kappa, g, mu, n_th_i, n_th_s, n_th_P)
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Signal/idler damping rate; sets the unit of time
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Pump damping rate
    #[arg(long = "gammaP", value_name = "GAMMA_P")]
    pub gamma_p: Option<f64>,
    /// Reservoir coherence time grid (0 = Markovian)
    #[arg(
        long,
        value_name = "GRID",
        allow_hyphen_values = true,
        conflicts_with = "kappa"
    )]
    pub tau_r: Option<Grid>,
    /// Normalized reservoir decay rate grid (inf = Markovian)
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub kappa: Option<Grid>,
    /// Three-wave coupling
    #[arg(long)]
    pub g: Option<f64>,
    /// Normalized drive grid
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub mu: Option<Grid>,
    /// Signal/idler thermal occupancy grid
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub nth: Option<Grid>,
    /// Pump thermal occupancy (defaults to the signal/idler value)
    #[arg(long)]
    pub nth_pump: Option<f64>,
    /// Seed for stochastic commands; echoed in every header
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when absent)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Time step (default: largest stable step)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Discarded transient (default: minimum allowed)
    #[arg(long)]
    pub t_burn: Option<f64>,
    /// Recorded window per trajectory
    #[arg(long, default_value_t = 200.0)]
    pub t_sample: f64,
    #[arg(long, default_value_t = 20)]
    pub n_traj: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::StochasticHeun)]
    pub scheme: SchemeArg,
    /// Time between recorded samples
    #[arg(long, default_value_t = 0.05)]
    pub record_interval: f64,
    /// Turn the Langevin forces off
    #[arg(long)]
    pub no_noise: bool,
    #[arg(long, value_enum, default_value_t = PumpNoiseArg::Auto)]
    pub pump_noise: PumpNoiseArg,
    /// Initial state
    #[arg(long, value_enum, default_value_t = InitArg::MeanField)]
    pub init: InitArg,
    /// Also write trajectory 0 of the first grid point as CSV (t, re/im of A_i, A_s, A_P)
    #[arg(long, value_name = "PATH")]
    pub trajectory_out: Option<PathBuf>,
    /// Keep every n-th sample in the trajectory dump
    #[arg(long, default_value_t = 1)]
    pub decimate: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchArg {
    Disordered,
    U1,
    U1xz2,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    /// Closed forms of the fast-pump limit
    ClosedForm,
    /// Integration of the linearized fluctuation spectra
    Spectral,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathArg {
    ClosedForm,
    Linearized,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpNoiseArg {
    /// Off below threshold, on above
    Auto,
    On,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    EulerMaruyama,
    StochasticHeun,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitArg {
    /// Mean-field solution of the stable phase (Z2 branch +)
    MeanField,
    /// All amplitudes zero
    Vacuum,
}
