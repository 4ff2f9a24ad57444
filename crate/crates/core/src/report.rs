//! Plain-text `key: value` reports with floats at 17 significant digits,
//! and JSON output for tooling.

use crate::error::{HedgeError, Result};
use crate::hedge::HedgeSolution;
use crate::models::Model;
use crate::numeric::fmt17;
use crate::verify::{CrosscheckRecord, Estimate, VerifyReport};
use serde::Serialize;
use std::fmt::Write;

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_else(|| "-".to_string())
}

fn line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}: {value}");
}

pub fn model_lines(out: &mut String, model: &Model) {
    line(out, "model", model.name());
    match model {
        Model::Bs(m) => {
            line(out, "s0", fmt17(m.s0));
            line(out, "alpha", fmt17(m.alpha));
            line(out, "sigma", fmt17(m.sigma));
            line(out, "horizon", fmt17(m.horizon));
        }
        Model::Ep(m) => {
            line(out, "lambda", fmt17(m.lambda_p));
            line(out, "gamma_drift", fmt17(m.gamma_drift));
            line(out, "horizon", fmt17(m.horizon));
        }
    }
}

pub fn solution_report(sol: &HedgeSolution) -> String {
    let mut out = String::new();
    line(&mut out, "criterion", sol.criterion);
    model_lines(&mut out, &sol.model);
    line(&mut out, "strike", fmt17(sol.strike));
    line(&mut out, "cap", fmt17(sol.cap));
    line(&mut out, "capital", fmt17(sol.capital));
    line(&mut out, "boundary", sol.boundary);
    line(&mut out, "k", opt(sol.k));
    line(&mut out, "gamma", opt(sol.gamma));
    line(&mut out, "yhat", opt(sol.yhat));
    line(&mut out, "lower_threshold", opt(sol.lower_threshold));
    line(&mut out, "upper_threshold", opt(sol.upper_threshold));
    line(&mut out, "fitted_price", fmt17(sol.fitted_price));
    line(&mut out, "risk_value", fmt17(sol.risk_value));
    let _ = writeln!(out, "segments:");
    for seg in sol.payoff.segments() {
        let _ = writeln!(out, "  ({}, {}] {}", fmt17(seg.lower), fmt17(seg.upper), seg.kind);
    }
    let _ = writeln!(out, "atoms:");
    for atom in sol.payoff.atoms() {
        let _ = writeln!(out, "  {} {}", fmt17(atom.price), fmt17(atom.value));
    }
    out
}

fn estimate(out: &mut String, key: &str, e: &Estimate) {
    line(out, key, format!("{} +- {}", fmt17(e.mean), fmt17(e.se)));
}

pub fn verify_report(report: &VerifyReport) -> String {
    let mut out = String::new();
    line(&mut out, "samples", report.samples);
    line(&mut out, "seed", report.seed);
    estimate(&mut out, "price_estimate", &report.price_estimate);
    estimate(&mut out, "success_probability", &report.success_probability);
    estimate(&mut out, "success_ratio", &report.success_ratio);
    estimate(&mut out, "expected_shortfall", &report.expected_shortfall);
    line(&mut out, "feasibility_violations", report.feasibility_violations);
    out
}

pub fn crosscheck_report(record: &CrosscheckRecord) -> String {
    let mut out = String::new();
    line(&mut out, "criterion", record.criterion);
    line(&mut out, "grid_n", record.grid_n);
    line(&mut out, "closed_form", fmt17(record.closed_form));
    line(&mut out, "discrete", fmt17(record.discrete));
    line(&mut out, "abs_gap", fmt17(record.abs_gap));
    line(&mut out, "rel_gap", fmt17(record.rel_gap));
    out
}

/// Pretty-printed JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| HedgeError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedge::{solve, Criterion, HedgeProblem};
    use crate::models::{bs_call_price, ModelBs};
    use crate::numeric::parse17;

    fn solution() -> HedgeSolution {
        let m = ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let x = 0.5 * (bs_call_price(&m, 100.0).unwrap() + bs_call_price(&m, 105.0).unwrap());
        solve(&HedgeProblem::new(Model::Bs(m), 100.0, 5.0, x, Criterion::Qh).unwrap()).unwrap()
    }

    #[test]
    fn report_round_trips_thresholds() {
        let sol = solution();
        let text = solution_report(&sol);
        let get = |key: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(&format!("{key}: ")))
                .unwrap()
                .to_string()
        };
        assert_eq!(parse17(&get("lower_threshold")).unwrap(), sol.lower_threshold.unwrap());
        assert_eq!(parse17(&get("fitted_price")).unwrap(), sol.fitted_price);
        assert_eq!(get("gamma"), "-");
        assert_eq!(text.lines().filter(|l| l.starts_with("  (")).count(), 3);
    }

    #[test]
    fn json_has_payoff() {
        let json = to_json(&solution()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["criterion"], "qh");
        assert_eq!(v["payoff"]["segments"].as_array().unwrap().len(), 3);
    }
}
