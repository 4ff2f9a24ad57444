//! Black–Scholes closed forms. With `a = α/σ²` the density is
//! `Z = C·S^{−a}`, so every optimal region is an interval in price.

use super::{classify_capital, CapitalCase, Criterion, HedgeProblem, HedgeSolution, PayoffKind, PiecewisePayoff, Segment};
use crate::error::{HedgeError, Result};
use crate::measure::Measure;
use crate::models::{LogNormal, Model, ModelBs};
use crate::numeric::{brent, norm_pdf, Tolerance};
use crate::quad::integrate_adaptive;

const LN8: f64 = 2.079_441_541_679_835_8;
const FIT_REL_TOL: f64 = 1e-10;
const PRICE_CHECK_REL_TOL: f64 = 1e-8;

/// Root `y > K` of `y − K = b·y^a` with `ln b` given, `0 < a < 1`.
pub(crate) fn yhat_root(strike: f64, a: f64, ln_b: f64) -> Result<f64> {
    if strike == 0.0 {
        return Ok((ln_b / (1.0 - a)).exp());
    }
    // δ = y − K solves δ = b(K+δ)^a; the root lies below
    // max(b(2K)^a, (b·2^a)^{1/(1−a)})
    let g = |d: f64| d - (ln_b + a * (strike + d).ln()).exp();
    let ln_hi = (ln_b + a * (2.0 * strike).ln()).max((ln_b + a * std::f64::consts::LN_2) / (1.0 - a));
    let hi = ln_hi.exp();
    if hi > 1e300 {
        return Ok(f64::INFINITY);
    }
    if hi == 0.0 {
        return Ok(strike);
    }
    let d = brent(g, 0.0, hi, Tolerance::default())?;
    Ok(strike + d)
}

/// `ŷ(k)`: the root `y > K` of `y − K = y^{α/σ²}/(C·k)`.
pub fn yhat(model: &ModelBs, k: f64, strike: f64) -> Result<f64> {
    if !model.regime() {
        return Err(regime_error(model));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(HedgeError::Domain(format!("k = {k} must be finite and > 0")));
    }
    if !(strike >= 0.0) {
        return Err(HedgeError::Domain(format!("strike {strike} must be >= 0")));
    }
    yhat_root(strike, model.density_exponent(), -model.ln_density_constant() - k.ln())
}

fn regime_error(model: &ModelBs) -> HedgeError {
    HedgeError::Regime(format!(
        "need 0 < alpha < sigma^2, got alpha = {}, sigma^2 = {}",
        model.alpha,
        model.sigma * model.sigma
    ))
}

fn bs_model(problem: &HedgeProblem) -> Result<ModelBs> {
    match problem.model {
        Model::Bs(m) => Ok(m),
        Model::Ep(_) => Err(HedgeError::UnsupportedCriterion(
            "Black-Scholes solver called with an exponential Poisson model".into(),
        )),
    }
}

/// `E[L·1{S > y}]` for `L = c ∧ (S − K)^+`.
fn cap_above(law: &LogNormal, strike: f64, cap: f64, y: f64) -> f64 {
    if y.is_infinite() {
        return 0.0;
    }
    (law.call_above(strike, y) - law.call_above(strike + cap, y)).max(0.0)
}

/// `E[c/(S − K); S > m]` for `m > K`.
fn cap_ratio_above(law: &LogNormal, strike: f64, cap: f64, m: f64) -> f64 {
    const Z_MAX: f64 = 12.0;
    if cap == 0.0 || m.is_infinite() {
        return 0.0;
    }
    let z_lo = ((m.ln() - law.mu) / law.sd).max(-40.0);
    if z_lo >= Z_MAX {
        return 0.0;
    }
    let f = |z: f64| norm_pdf(z) / ((law.mu + law.sd * z).exp() - strike);
    cap * integrate_adaptive(f, z_lo, Z_MAX, 1e-16, 1e-13)
}

/// Decreasing price map `u ↦ E^Q[H̃(u)]`: find `u` with price `x`,
/// growing the bracket by `ln 8` per step.
fn fit<F: Fn(f64) -> f64>(price: F, x: f64, u0: f64) -> Result<f64> {
    let g = |u: f64| price(u) - x;
    let (mut lo, mut hi) = (u0 - LN8, u0 + LN8);
    let (mut glo, mut ghi) = (g(lo), g(hi));
    for _ in 0..200 {
        if glo >= 0.0 && ghi <= 0.0 {
            break;
        }
        if glo < 0.0 {
            lo -= LN8;
            glo = g(lo);
        }
        if ghi > 0.0 {
            hi += LN8;
            ghi = g(hi);
        }
    }
    if !(glo >= 0.0 && ghi <= 0.0) {
        return Err(HedgeError::Bracketing(format!(
            "price map does not straddle x = {x} on [{lo}, {hi}]"
        )));
    }
    let tol = Tolerance { xtol: 0.0, ftol: FIT_REL_TOL * x.abs().max(1.0), max_iter: 200 };
    let u = brent(g, lo, hi, tol)?;
    let residual = (price(u) - x).abs();
    if residual > PRICE_CHECK_REL_TOL * x.abs().max(1.0) {
        return Err(HedgeError::NoConvergence(format!(
            "fitted price misses x = {x} by {residual:e}"
        )));
    }
    Ok(u)
}

fn boundary_solution(problem: &HedgeProblem, risk_value: f64) -> Result<HedgeSolution> {
    let payoff = PiecewisePayoff::constant(PayoffKind::Call { strike: problem.strike + problem.cap });
    let mut sol = HedgeSolution::bare(problem, payoff);
    sol.fitted_price = problem.model.call_price(problem.strike + problem.cap)?;
    sol.risk_value = risk_value;
    sol.boundary = true;
    Ok(sol)
}

/// QH pieces for `u = ln k`: `(ŷ, I, J, E^Q[H̃])`.
fn qh_state(model: &ModelBs, strike: f64, cap: f64, u: f64) -> Result<(f64, f64, f64, f64)> {
    let a = model.density_exponent();
    let ln_c = model.ln_density_constant();
    let lq = model.terminal_law(Measure::Q);
    let y = yhat_root(strike, a, -ln_c - u)?;
    let i = y.min(strike + cap);
    let j = ((ln_c + cap.ln() + u) / a).exp().max(strike + cap);
    let between = (cap_above(&lq, strike, cap, i) - cap_above(&lq, strike, cap, j)).max(0.0);
    Ok((y, i, j, lq.call(strike) - between))
}

fn qh_success(model: &ModelBs, i: f64, j: f64) -> f64 {
    let lp = model.terminal_law(Measure::P);
    (lp.cdf(i) + lp.sf(j)).min(1.0)
}

/// Quantile hedging: success set `{ZL < 1/k}` = `{S ≤ I(k)} ∪ {S ≥ J(k)}`.
pub fn solve_qh_bs(problem: &HedgeProblem) -> Result<HedgeSolution> {
    let model = bs_model(problem)?;
    if !model.regime() {
        return Err(regime_error(&model));
    }
    let (strike, cap, x) = (problem.strike, problem.cap, problem.capital);
    if let CapitalCase::Boundary = classify_capital(problem)? {
        let risk = if cap == 0.0 { 1.0 } else { model.terminal_law(Measure::P).cdf(strike) };
        return boundary_solution(problem, risk);
    }
    let a = model.density_exponent();
    let ln_c = model.ln_density_constant();
    let mid = strike + 0.5 * cap;
    let u0 = a * mid.ln() - ln_c - (mid - strike).ln();
    let price = |u: f64| qh_state(&model, strike, cap, u).map(|s| s.3).unwrap_or(f64::NAN);
    let u = fit(price, x, u0)?;
    let (y, i, j, fitted) = qh_state(&model, strike, cap, u)?;
    let payoff = PiecewisePayoff::new(
        vec![
            Segment { lower: 0.0, upper: i, kind: PayoffKind::Call { strike } },
            Segment { lower: i, upper: j, kind: PayoffKind::Call { strike: strike + cap } },
            Segment { lower: j, upper: f64::INFINITY, kind: PayoffKind::Call { strike } },
        ],
        Vec::new(),
    )?;
    let mut sol = HedgeSolution::bare(problem, payoff);
    sol.k = Some(u.exp());
    sol.yhat = Some(y);
    sol.lower_threshold = Some(i);
    sol.upper_threshold = Some(j);
    sol.fitted_price = fitted;
    sol.risk_value = qh_success(&model, i, j);
    Ok(sol)
}

fn gqh_price(model: &ModelBs, strike: f64, cap: f64, y: f64) -> f64 {
    let lq = model.terminal_law(Measure::Q);
    lq.call(strike) - cap_above(&lq, strike, cap, y)
}

/// `E^P[φ̃]` for `φ̃ = 1 − (L/H)·1{S > y}`, `φ̃ = 1` on `{H = 0}`.
fn gqh_success(model: &ModelBs, strike: f64, cap: f64, y: f64) -> f64 {
    if cap == 0.0 {
        return 1.0;
    }
    let lp = model.terminal_law(Measure::P);
    let y = y.max(strike);
    let m = y.max(strike + cap);
    let band = (lp.cdf(m) - lp.cdf(y)).max(0.0);
    (1.0 - band - cap_ratio_above(&lp, strike, cap, m)).clamp(0.0, 1.0)
}

/// Generalized quantile hedging: `call(K)` up to `ŷ(k)`, `call(K+c)` above.
pub fn solve_gqh_bs(problem: &HedgeProblem) -> Result<HedgeSolution> {
    let model = bs_model(problem)?;
    if !model.regime() {
        return Err(regime_error(&model));
    }
    let (strike, cap, x) = (problem.strike, problem.cap, problem.capital);
    if let CapitalCase::Boundary = classify_capital(problem)? {
        return boundary_solution(problem, gqh_success(&model, strike, cap, strike));
    }
    let a = model.density_exponent();
    let ln_c = model.ln_density_constant();
    let mid = strike + 0.5 * cap;
    let u0 = a * mid.ln() - ln_c - (mid - strike).ln();
    let price = |u: f64| match yhat_root(strike, a, -ln_c - u) {
        Ok(y) => gqh_price(&model, strike, cap, y),
        Err(_) => f64::NAN,
    };
    let u = fit(price, x, u0)?;
    let y = yhat_root(strike, a, -ln_c - u)?;
    let payoff = PiecewisePayoff::split(y, PayoffKind::Call { strike }, PayoffKind::Call { strike: strike + cap })?;
    let mut sol = HedgeSolution::bare(problem, payoff);
    sol.k = Some(u.exp());
    sol.yhat = Some(y);
    sol.fitted_price = gqh_price(&model, strike, cap, y);
    sol.risk_value = gqh_success(&model, strike, cap, y);
    Ok(sol)
}

fn wes_price(model: &ModelBs, strike: f64, cap: f64, t: f64) -> f64 {
    let lq = model.terminal_law(Measure::Q);
    lq.call(strike + cap) + cap_above(&lq, strike, cap, t)
}

/// `E^P[L·1{S ≤ t}]`.
fn wes_shortfall(model: &ModelBs, strike: f64, cap: f64, t: f64) -> f64 {
    let lp = model.terminal_law(Measure::P);
    let total = (lp.call(strike) - lp.call(strike + cap)).max(0.0);
    (total - cap_above(&lp, strike, cap, t)).max(0.0)
}

/// Expected shortfall with linear loss: `call(K+c)` up to the price
/// threshold `k`, `call(K)` above.
pub fn solve_wes_bs(problem: &HedgeProblem) -> Result<HedgeSolution> {
    let model = bs_model(problem)?;
    if !(model.alpha > 0.0) {
        return Err(HedgeError::Regime(format!("need alpha > 0, got {}", model.alpha)));
    }
    let (strike, cap, x) = (problem.strike, problem.cap, problem.capital);
    if let CapitalCase::Boundary = classify_capital(problem)? {
        return boundary_solution(problem, wes_shortfall(&model, strike, cap, f64::INFINITY));
    }
    let u0 = (strike + cap).ln();
    let price = |u: f64| wes_price(&model, strike, cap, u.exp());
    let u = fit(price, x, u0)?;
    let t = u.exp();
    let payoff = PiecewisePayoff::split(t, PayoffKind::Call { strike: strike + cap }, PayoffKind::Call { strike })?;
    let mut sol = HedgeSolution::bare(problem, payoff);
    sol.k = Some(t);
    sol.fitted_price = wes_price(&model, strike, cap, t);
    sol.risk_value = wes_shortfall(&model, strike, cap, t);
    Ok(sol)
}

/// Risk of an arbitrary payoff under the criterion's measure: success
/// probability, `E^P[φ]` or `E^P[(H − X)^+]`, by quadrature.
pub fn bs_risk_value(model: &ModelBs, criterion: Criterion, strike: f64, payoff: &PiecewisePayoff) -> Result<f64> {
    let lp = model.terminal_law(Measure::P);
    let z_of = |s: f64| (s.ln() - lp.mu) / lp.sd;
    let mut breaks: Vec<f64> = payoff.breakpoints().into_iter().map(z_of).collect();
    breaks.push(z_of(strike.max(f64::MIN_POSITIVE)));
    let mut err = None;
    let f = |z: f64| {
        let s = (lp.mu + lp.sd * z).exp();
        let h = (s - strike).max(0.0);
        let v = match payoff.eval(s) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        let r = match criterion {
            Criterion::Qh => f64::from(v >= h),
            Criterion::Gqh => if h > 0.0 { (v / h).min(1.0) } else { 1.0 },
            Criterion::Wes => (h - v).max(0.0),
        };
        r * norm_pdf(z)
    };
    let v = crate::quad::integrate_with_breaks(f, -12.0, 12.0, &breaks, 1e-15, 1e-13);
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::bs_call_price;
    use crate::numeric::norm_cdf;
    use crate::quad::integrate_with_breaks;

    fn model() -> ModelBs {
        ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap()
    }

    fn problem(c: f64, x: f64, criterion: Criterion) -> HedgeProblem {
        HedgeProblem::new(Model::Bs(model()), 100.0, c, x, criterion).unwrap()
    }

    fn mid_x(c: f64) -> f64 {
        let m = model();
        0.5 * (bs_call_price(&m, 100.0).unwrap() + bs_call_price(&m, 100.0 + c).unwrap())
    }

    /// `E^Q[X(S)]` by quadrature in log-price.
    fn q_price(m: &ModelBs, payoff: &PiecewisePayoff) -> f64 {
        let lq = m.terminal_law(Measure::Q);
        let breaks: Vec<f64> = payoff.breakpoints().iter().map(|s| (s.ln() - lq.mu) / lq.sd).collect();
        integrate_with_breaks(
            |z| payoff.eval((lq.mu + lq.sd * z).exp()).unwrap() * norm_pdf(z),
            -14.0,
            14.0,
            &breaks,
            1e-15,
            1e-14,
        )
    }

    #[test]
    fn yhat_limits_and_monotonicity() {
        let m = model();
        let k = 100.0;
        assert!(yhat(&m, 1e12, k).unwrap() - k < 1e-6 * k);
        let ks = [1e-3, 1e-2, 0.1, 1.0, 10.0, 1e3];
        let ys: Vec<f64> = ks.iter().map(|&kk| yhat(&m, kk, k).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] > w[1]), "{ys:?}");
    }

    #[test]
    fn yhat_residual_at_unit_k() {
        let m = model();
        let k = 100.0;
        let y = yhat(&m, 1.0, k).unwrap();
        let rhs = y.powf(m.density_exponent()) / m.density_constant();
        assert!((y - k - rhs).abs() < 1e-10, "y = {y}");
        assert!(y > k);
        assert!((y - YHAT_UNIT_K).abs() < 1e-9 * y, "y = {y:.17e}");
    }

    const YHAT_UNIT_K: f64 = 1.010_100_754_605_280_3e2;

    #[test]
    fn yhat_rejects_out_of_regime() {
        let m = ModelBs::new(100.0, 0.05, 0.2, 1.0).unwrap();
        assert!(matches!(yhat(&m, 1.0, 100.0), Err(HedgeError::Regime(_))));
    }

    #[test]
    fn zero_strike_root_is_closed_form() {
        let y = yhat_root(0.0, 0.5, 2.0_f64.ln()).unwrap();
        assert!((y - 4.0).abs() < 1e-14);
    }

    #[test]
    fn budget_exactness_by_quadrature() {
        let m = model();
        for &c in &[1.0, 5.0, 20.0] {
            let lo = bs_call_price(&m, 100.0 + c).unwrap();
            let hi = bs_call_price(&m, 100.0).unwrap();
            for &w in &[0.1, 0.5, 0.9] {
                let x = lo + w * (hi - lo);
                for crit in Criterion::ALL {
                    let sol = super::super::solve(&problem(c, x, crit)).unwrap();
                    assert!((sol.fitted_price - x).abs() <= 1e-8 * x, "{crit} c={c} w={w}");
                    let quad = q_price(&m, &sol.payoff);
                    assert!((quad - x).abs() <= 1e-8 * x, "{crit} c={c} w={w}: {quad} vs {x}");
                }
            }
        }
    }

    #[test]
    fn risk_values_match_quadrature() {
        let m = model();
        let x = mid_x(5.0);
        for crit in Criterion::ALL {
            let sol = super::super::solve(&problem(5.0, x, crit)).unwrap();
            let q = bs_risk_value(&m, crit, 100.0, &sol.payoff).unwrap();
            assert!((q - sol.risk_value).abs() < 1e-10, "{crit}: {q} vs {}", sol.risk_value);
        }
    }

    #[test]
    fn boundary_gives_call_at_shifted_strike() {
        let m = model();
        let x = bs_call_price(&m, 105.0).unwrap();
        let want = PiecewisePayoff::constant(PayoffKind::Call { strike: 105.0 });
        for crit in Criterion::ALL {
            let sol = super::super::solve(&problem(5.0, x, crit)).unwrap();
            assert!(sol.boundary);
            assert_eq!(sol.payoff, want);
            let q = bs_risk_value(&m, crit, 100.0, &sol.payoff).unwrap();
            assert!((q - sol.risk_value).abs() < 1e-10, "{crit}");
        }
        let wes = solve_wes_bs(&problem(5.0, x, Criterion::Wes)).unwrap();
        let lp = m.terminal_law(Measure::P);
        assert!((wes.risk_value - (lp.call(100.0) - lp.call(105.0))).abs() < 1e-12);
    }

    #[test]
    fn full_budget_limits() {
        let m = model();
        let x = bs_call_price(&m, 100.0).unwrap() - 1e-9;
        let qh = solve_qh_bs(&problem(5.0, x, Criterion::Qh)).unwrap();
        assert!(qh.risk_value > 0.999, "{}", qh.risk_value);
        let wes = solve_wes_bs(&problem(5.0, x, Criterion::Wes)).unwrap();
        assert!(wes.risk_value < 1e-6, "{}", wes.risk_value);
    }

    #[test]
    fn capital_range_errors() {
        let m = model();
        let hi = bs_call_price(&m, 100.0).unwrap();
        let lo = bs_call_price(&m, 105.0).unwrap();
        for crit in Criterion::ALL {
            assert!(matches!(super::super::solve(&problem(5.0, hi, crit)), Err(HedgeError::CapitalRange { .. })));
            assert!(matches!(super::super::solve(&problem(5.0, lo - 1e-3, crit)), Err(HedgeError::CapitalRange { .. })));
        }
    }

    #[test]
    fn zero_cap_short_circuits() {
        let m = model();
        let hi = bs_call_price(&m, 100.0).unwrap();
        for crit in Criterion::ALL {
            let sol = super::super::solve(&problem(0.0, hi, crit)).unwrap();
            assert_eq!(sol.payoff, PiecewisePayoff::constant(PayoffKind::Call { strike: 100.0 }));
            let want = if crit == Criterion::Wes { 0.0 } else { 1.0 };
            assert_eq!(sol.risk_value, want);
            assert!(super::super::solve(&problem(0.0, hi - 1e-3, crit)).is_err());
        }
    }

    fn tail(m: &ModelBs, y: f64) -> f64 {
        // 1 − Φ(e), e = (ln(y/s0) + σ²T/2)/(σ√T)
        let vol = m.sigma * m.horizon.sqrt();
        1.0 - norm_cdf(((y / m.s0).ln() + 0.5 * vol * vol) / vol)
    }

    #[test]
    fn qh_matches_printed_fitting_equation() {
        let m = model();
        let c = 5.0;
        let call = |s: f64| bs_call_price(&m, s).unwrap();
        for &w in &[0.2, 0.5, 0.8] {
            let x = call(105.0) + w * (call(100.0) - call(105.0));
            let sol = solve_qh_bs(&problem(c, x, Criterion::Qh)).unwrap();
            let (i, j) = (sol.lower_threshold.unwrap(), sol.upper_threshold.unwrap());
            let printed = call(100.0) + call(100.0 + c) - call(i) - (i - 100.0) * tail(&m, i) + c * tail(&m, j);
            assert!((printed - x).abs() < 1e-9 * x, "w={w}: {printed} vs {x}");
        }
    }

    #[test]
    fn gqh_matches_printed_fitting_equation() {
        let m = model();
        let call = |s: f64| bs_call_price(&m, s).unwrap();
        for &c in &[2.0, 5.0, 40.0] {
            for &w in &[0.2, 0.5, 0.8] {
                let x = call(100.0 + c) + w * (call(100.0) - call(100.0 + c));
                let sol = solve_gqh_bs(&problem(c, x, Criterion::Gqh)).unwrap();
                let y = sol.yhat.unwrap();
                let k = 100.0;
                let mut printed = call(k) - call(y) - (y - k) * tail(&m, y) + call(k + c);
                if k + c <= y {
                    printed -= call(k + c) - call(y) - (y - (k + c)) * tail(&m, y);
                }
                assert!((printed - x).abs() < 1e-9 * x, "c={c} w={w}: {printed} vs {x}");
            }
        }
    }

    #[test]
    fn wes_matches_printed_fitting_equation_above_shifted_strike() {
        let m = model();
        let call = |s: f64| bs_call_price(&m, s).unwrap();
        let c = 5.0;
        let k0 = 100.0;
        let mut checked = 0;
        for &w in &[0.05, 0.2, 0.5, 0.8] {
            let x = call(k0 + c) + w * (call(k0) - call(k0 + c));
            let sol = solve_wes_bs(&problem(c, x, Criterion::Wes)).unwrap();
            let k = sol.k.unwrap();
            if k <= k0 + c {
                continue;
            }
            let printed = call(k0) - (call(k0) - call(k) - (k - k0) * tail(&m, k))
                + (call(k0 + c) - call(k) - (k - (k0 + c)) * tail(&m, k));
            assert!((printed - x).abs() < 1e-9 * x, "w={w}: {printed} vs {x}");
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn gqh_with_slack_cap_is_single_knockout() {
        let m = model();
        let c = 60.0;
        let x = mid_x(c);
        let sol = solve_gqh_bs(&problem(c, x, Criterion::Gqh)).unwrap();
        let y = sol.yhat.unwrap();
        assert!(y < 100.0 + c);
        for i in 1..200 {
            let s = 50.0 + i as f64;
            if s >= 100.0 + c {
                break;
            }
            let knock = (s - 100.0).max(0.0) - (s - y).max(0.0) - if s > y { y - 100.0 } else { 0.0 };
            assert!((sol.payoff.eval(s).unwrap() - knock).abs() < 1e-12, "s={s}");
        }
        let _ = m;
    }

    #[test]
    fn qh_and_gqh_differ_mid_range() {
        let m = model();
        let x = mid_x(5.0);
        let qh = solve_qh_bs(&problem(5.0, x, Criterion::Qh)).unwrap();
        let gqh = solve_gqh_bs(&problem(5.0, x, Criterion::Gqh)).unwrap();
        let lp = m.terminal_law(Measure::P);
        let diff = integrate_with_breaks(
            |z| {
                let s = (lp.mu + lp.sd * z).exp();
                (qh.payoff.eval(s).unwrap() - gqh.payoff.eval(s).unwrap()).abs() * norm_pdf(z)
            },
            -12.0,
            12.0,
            &[],
            1e-14,
            1e-10,
        );
        assert!(diff > 1e-3, "{diff}");
    }

    #[test]
    fn feasibility_on_price_sweep() {
        let x = mid_x(5.0);
        for crit in Criterion::ALL {
            let sol = super::super::solve(&problem(5.0, x, crit)).unwrap();
            for i in 0..20_000 {
                let s = 1.0 + i as f64 * 0.02;
                let h = (s - 100.0).max(0.0);
                let l = h.min(5.0);
                let v = sol.payoff.eval(s).unwrap();
                assert!(v >= h - l - 1e-12 && v <= h + 1e-12, "{crit} s={s}");
            }
        }
    }
}
