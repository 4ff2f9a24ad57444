//! Generalized quantile hedging in the exponential Poisson model. The law of
//! `S_T` sits on the ladder `e^{n−γT}`, so the fitting map is a decreasing
//! step function and the optimal test randomizes at one atom.

use super::bs::yhat_root;
use super::{classify_capital, CapitalCase, Criterion, HedgeProblem, HedgeSolution, PayoffKind, PiecewisePayoff, Segment, AtomTerm};
use crate::error::{HedgeError, Result};
use crate::models::{ep_atoms, ep_call_price, ep_default_n_max, EpAtoms, Model, ModelEp};
use crate::numeric::CompensatedSum;

fn ep_model(problem: &HedgeProblem) -> Result<ModelEp> {
    match problem.model {
        Model::Ep(m) => Ok(m),
        Model::Bs(_) => Err(HedgeError::UnsupportedCriterion(
            "exponential Poisson solver called with a Black-Scholes model".into(),
        )),
    }
}

fn check_regime(model: &ModelEp) -> Result<()> {
    if model.regime() {
        Ok(())
    } else {
        Err(HedgeError::Regime(format!(
            "need 1 < lambda(e-1)/gamma < e, got {}",
            model.lambda_p * (std::f64::consts::E - 1.0) / model.gamma_drift
        )))
    }
}

/// Root `y > K` of `y − K = y^{a}/(C·u)` with `a = ln(λ(e−1)/γ)`.
pub fn ep_yhat(model: &ModelEp, u: f64, strike: f64) -> Result<f64> {
    check_regime(model)?;
    if !(u > 0.0) {
        return Err(HedgeError::Domain(format!("u = {u} must be > 0")));
    }
    if !(strike >= 0.0) {
        return Err(HedgeError::Domain(format!("strike {strike} must be >= 0")));
    }
    if u.is_infinite() {
        return Ok(strike);
    }
    yhat_root(strike, -model.density_exponent(), -model.ln_density_constant() - u.ln())
}

fn cap_at(strike: f64, cap: f64, s: f64) -> f64 {
    (s - strike).max(0.0).min(cap)
}

/// `f(u) = E^Q[H − L·1{S_T ≥ ŷ(u)}]`.
pub fn ep_f(model: &ModelEp, strike: f64, cap: f64, u: f64) -> Result<f64> {
    let y = ep_yhat(model, u, strike)?;
    let atoms = ep_atoms(model, ep_default_n_max(model))?;
    let removed: CompensatedSum = atoms
        .prices
        .iter()
        .zip(&atoms.q)
        .filter(|(&s, _)| s >= y)
        .map(|(&s, &q)| q * cap_at(strike, cap, s))
        .collect();
    Ok(ep_call_price(model, strike)? - removed.value())
}

/// `E^P[φ̃]` with `φ̃ = 1` below atom `j` (and on `{H = 0}`), `(H − L + γL)/H`
/// at `j` and `(H − L)/H` above.
fn success(atoms: &EpAtoms, strike: f64, cap: f64, j: Option<usize>, gamma: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for (n, (&s, &p)) in atoms.prices.iter().zip(&atoms.p).enumerate() {
        let h = (s - strike).max(0.0);
        let phi = if h == 0.0 {
            1.0
        } else {
            let l = h.min(cap);
            match j {
                Some(j) if n < j => 1.0,
                Some(j) if n == j => (h - l + gamma * l) / h,
                _ => (h - l) / h,
            }
        };
        acc.add(p * phi);
    }
    acc.value().min(1.0)
}

pub fn solve_gqh_ep(problem: &HedgeProblem) -> Result<HedgeSolution> {
    let model = ep_model(problem)?;
    if problem.criterion != Criterion::Gqh {
        return Err(HedgeError::UnsupportedCriterion(format!(
            "{} is not available for the exponential Poisson model",
            problem.criterion
        )));
    }
    check_regime(&model)?;
    let (strike, cap, x) = (problem.strike, problem.cap, problem.capital);
    let atoms = ep_atoms(&model, ep_default_n_max(&model))?;
    if let CapitalCase::Boundary = classify_capital(problem)? {
        let payoff = PiecewisePayoff::constant(PayoffKind::Call { strike: strike + cap });
        let mut sol = HedgeSolution::bare(problem, payoff);
        sol.fitted_price = ep_call_price(&model, strike + cap)?;
        sol.risk_value = if cap == 0.0 { 1.0 } else { success(&atoms, strike, cap, None, 0.0) };
        sol.boundary = true;
        return Ok(sol);
    }

    // f at atom j is C(K) − Σ_{n ≥ j} q_n L_n; scan from the top price down
    // and stop at the first (largest) atom with f_j ≤ x, i.e. the smallest u
    let call_k = ep_call_price(&model, strike)?;
    let mut removed = CompensatedSum::new();
    let mut found = None;
    let mut lowest = None;
    for j in (0..atoms.len()).rev() {
        let s = atoms.prices[j];
        if s <= strike {
            break;
        }
        let lq = cap_at(strike, cap, s) * atoms.q[j];
        removed.add(lq);
        lowest = Some((j, call_k - removed.value(), lq));
        let f_j = call_k - removed.value();
        if f_j <= x {
            found = Some((j, f_j, lq));
            break;
        }
    }
    // truncation can leave x a hair below the lowest step; take that atom
    let (j, f_j, lq) = found.or(lowest).ok_or(HedgeError::InfeasibleBudget { budget: x, minimum: call_k })?;
    let gamma = if lq > 0.0 { ((x - f_j) / lq).clamp(0.0, 1.0) } else { 0.0 };
    let y = atoms.prices[j];
    let a = -model.density_exponent();
    let k = (a * y.ln() - model.ln_density_constant() - (y - strike).ln()).exp();

    let l_y = cap_at(strike, cap, y);
    let payoff = PiecewisePayoff::new(
        vec![
            Segment { lower: 0.0, upper: y, kind: PayoffKind::Call { strike } },
            Segment { lower: y, upper: f64::INFINITY, kind: PayoffKind::Call { strike: strike + cap } },
        ],
        vec![AtomTerm { price: y, value: (y - strike - cap).max(0.0) + gamma * l_y }],
    )?;
    let mut sol = HedgeSolution::bare(problem, payoff);
    sol.k = Some(k);
    sol.gamma = Some(gamma);
    sol.yhat = Some(y);
    sol.atom_index = Some(j);
    sol.fitted_price = f_j + gamma * lq;
    sol.risk_value = success(&atoms, strike, cap, Some(j), gamma);
    Ok(sol)
}
