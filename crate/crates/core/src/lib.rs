// Copyright 2026 nmpo contributors
// SPDX-License-Identifier: Apache-2.0

//! Parametric oscillator with an exponential-memory reservoir.
//!
//! Units: `gamma0 = 1`. Rates and frequencies are in units of `gamma0`,
//! times in `1/gamma0`. The reservoir enters through `kappa = 1/(gamma0 tau_r)`,
//! with `kappa = inf` the Markovian limit.

pub mod dynamics;
pub mod exec;
pub mod linres;
pub mod meanfield;
pub mod model;
pub mod sde;
pub mod spectra;

pub use exec::Execution;
pub use meanfield::{Phase, SteadyState, Z2Branch};
pub use model::{Memory, RawParams, SystemParams};
