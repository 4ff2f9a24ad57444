//! Hedging under shortfall constraints in complete markets.
//!
//! A claim `H` may be under-hedged by at most `L`; within that slack the
//! capital is spent to maximize a success criterion. Discrete problems go
//! through [`np::conditional_np`]; calls under Black–Scholes and the
//! exponential Poisson model have closed forms in [`hedge`].

// `!(x >= 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hedge;
pub mod measure;
pub mod models;
pub mod np;
pub mod numeric;
pub mod profile;
pub mod quad;
pub mod report;
pub mod verify;

pub use error::{HedgeError, Result};
pub use hedge::{
    payoff_eval, robust_scale, solve, AtomTerm, Criterion, HedgeProblem, HedgeSolution, PayoffKind,
    PiecewisePayoff, Segment,
};
pub use measure::{
    eval_constraint, rejection_threshold, success_ratio, Atom, ConditionalTest, DiscreteSpace, Measure,
    ShortfallSpec,
};
pub use models::{
    bs_call_price, bs_density, bs_terminal_grid, bs_terminal_grid_with_breaks, ep_atoms, ep_call_price,
    ep_lambda_q, EpAtoms, Model, ModelBs, ModelEp,
};
pub use np::{conditional_np, greedy_oracle, qh_fractional_oracle, NpSolution};
pub use profile::{export_profile, ProfileRow};
pub use verify::{crosscheck_discrete, mc_report, simulate_terminal, CrosscheckRecord, Samples, VerifyReport};
