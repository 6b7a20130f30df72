//! Switching-time prediction for slow-fast bistable stochastic systems.
//!
//! The library computes the mean first passage time between metastable
//! states of systems of the form
//!
//! ```text
//!     dx/dt = y + eta(t),        <eta(t) eta(t')> = 2 D delta(t - t')
//!   e dy/dt = f(x) - y
//! ```
//!
//! in two independent ways and compares them:
//!
//! 1. **Prediction** — the escape rate is governed by the action of the most
//!    likely noise realization. The noisy system is lifted to a deterministic
//!    4-D Hamiltonian system in `(x, l1, y, l2)`; a center-manifold reduction
//!    of its fast layer collapses it to a planar system whose heteroclinic
//!    sink-to-saddle connection is the optimal escape path. The momentum line
//!    integral along that path gives the action `R(e)`, and the switching
//!    time scales as `exp(R / 2D)`.
//! 2. **Verification** — direct Monte Carlo simulation of the stiff
//!    stochastic system with a drift-implicit Euler-Maruyama scheme, run in
//!    reproducible parallel ensembles.
//!
//! Module map: [`series`] exact rational series algebra, [`manifold`] model
//! types and the order-by-order center-manifold solver, [`path`] optimal
//! paths and actions, [`sde`] stochastic integration and escape ensembles,
//! [`analysis`] scaling fits, [`cli`] the command-line front end, and
//! [`verify`] the acceptance checks.

pub mod analysis;
pub mod cli;
pub mod manifold;
mod ode;
pub mod path;
pub mod sde;
pub mod series;
pub mod verify;

use thiserror::Error;

/// Errors surfaced by the computational modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equilibria {from} and {to} are not adjacent")]
    NonAdjacentEquilibria { from: f64, to: f64 },

    #[error(
        "no heteroclinic connection found (closest approach {closest_approach:.3e}, last state {last_state:?})"
    )]
    NoConnection {
        closest_approach: f64,
        last_state: Vec<f64>,
    },

    #[error("quadrature did not converge: sample-halving changed the result by {change:.3e}")]
    QuadratureNotConverged { change: f64 },

    #[error(
        "Newton iteration diverged at step {step_index}: residual {residual:.3e} after {iterations} iterations"
    )]
    NewtonDiverged {
        step_index: u64,
        iterations: u32,
        residual: f64,
    },

    #[error("explicit scheme blew up at step {step_index} (non-finite or overflowing state)")]
    StiffnessBlowup { step_index: u64 },

    #[error("degenerate regression design: {0}")]
    DegenerateFit(String),

    #[error("internal solver failure: {0}")]
    SolveFailed(String),

    #[error("all {n} trials failed; first error: {first}")]
    AllTrialsFailed { n: usize, first: String },
}

pub type Result<T> = std::result::Result<T, Error>;
