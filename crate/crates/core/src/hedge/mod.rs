//! Shortfall-constrained hedging of a call `H = (S_T − K)^+` under the cap
//! `L = c ∧ H`, in complete markets.
//!
//! Every optimal payoff is a knock-out combination of `call(K)` and
//! `call(K+c)` over regions of the terminal price, plus (exponential Poisson
//! only) a randomized term at one price atom.

mod bs;
mod ep;

pub use bs::{bs_risk_value, solve_gqh_bs, solve_qh_bs, solve_wes_bs, yhat};
pub use ep::{ep_f, ep_yhat, solve_gqh_ep};

use crate::error::{HedgeError, Result};
use crate::measure::ShortfallSpec;
use crate::models::Model;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Relative tolerance used to snap the capital onto `C(K+c)` or `C(K)`.
pub const CAPITAL_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Quantile hedging: maximize `P(X_T ≥ H)`.
    Qh,
    /// Generalized quantile hedging: maximize `E[φ]` of the success ratio.
    Gqh,
    /// Expected shortfall with linear loss: minimize `E[(H − X_T)^+]`.
    Wes,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Qh, Criterion::Gqh, Criterion::Wes];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Qh => "qh",
            Criterion::Gqh => "gqh",
            Criterion::Wes => "wes",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = HedgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qh" => Ok(Criterion::Qh),
            "gqh" => Ok(Criterion::Gqh),
            "wes" | "wes-linear" => Ok(Criterion::Wes),
            other => Err(HedgeError::Parse(format!(
                "unknown criterion {other:?} (expected qh, gqh or wes)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeProblem {
    pub model: Model,
    pub strike: f64,
    pub cap: f64,
    pub capital: f64,
    pub criterion: Criterion,
}

impl HedgeProblem {
    /// Validates parameters; the capital range `C(K+c) ≤ x < C(K)` is
    /// checked by the solvers, which own the pricing.
    pub fn new(model: Model, strike: f64, cap: f64, capital: f64, criterion: Criterion) -> Result<Self> {
        if !(strike.is_finite() && strike >= 0.0) {
            return Err(HedgeError::Domain(format!("strike K = {strike} must be finite and >= 0")));
        }
        if !(cap.is_finite() && cap >= 0.0) {
            return Err(HedgeError::Domain(format!("cap c = {cap} must be finite and >= 0")));
        }
        if !capital.is_finite() {
            return Err(HedgeError::Domain(format!("capital x = {capital} must be finite")));
        }
        Ok(Self { model, strike, cap, capital, criterion })
    }

    pub fn with_capital(&self, capital: f64) -> Self {
        Self { capital, ..*self }
    }

    pub fn with_criterion(&self, criterion: Criterion) -> Self {
        Self { criterion, ..*self }
    }

    pub fn claim(&self, s: f64) -> f64 {
        (s - self.strike).max(0.0)
    }

    pub fn cap_value(&self, s: f64) -> f64 {
        self.shortfall_spec().eval(s, self.claim(s))
    }

    pub fn shortfall_spec(&self) -> ShortfallSpec {
        ShortfallSpec::Cap { c: self.cap }
    }

    /// `(C(K+c), C(K))`.
    pub fn capital_range(&self) -> Result<(f64, f64)> {
        Ok((
            self.model.call_price(self.strike + self.cap)?,
            self.model.call_price(self.strike)?,
        ))
    }
}

/// Result of the capital-range check shared by all solvers.
pub(crate) enum CapitalCase {
    /// `x = C(K+c)` (or `c = 0` with `x = C(K)`): hedge `call(K+c)`.
    Boundary,
    Interior,
}

pub(crate) fn classify_capital(problem: &HedgeProblem) -> Result<CapitalCase> {
    let (lower, upper) = problem.capital_range()?;
    let x = problem.capital;
    let snap = CAPITAL_SNAP * x.abs().max(1.0);
    if problem.cap == 0.0 {
        if (x - upper).abs() <= snap {
            return Ok(CapitalCase::Boundary);
        }
        return Err(HedgeError::CapitalRange { capital: x, lower, upper });
    }
    if x < lower - snap || x >= upper {
        return Err(HedgeError::CapitalRange { capital: x, lower, upper });
    }
    if x <= lower + snap {
        return Ok(CapitalCase::Boundary);
    }
    Ok(CapitalCase::Interior)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffKind {
    Zero,
    Call { strike: f64 },
}

impl PayoffKind {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            PayoffKind::Zero => 0.0,
            PayoffKind::Call { strike } => (s - strike).max(0.0),
        }
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffKind::Zero => f.write_str("zero"),
            PayoffKind::Call { strike } => write!(f, "call({})", crate::numeric::fmt17(*strike)),
        }
    }
}

/// Payoff on the price interval `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub kind: PayoffKind,
}

/// Payoff value at one price point, overriding the segments there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomTerm {
    pub price: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePayoff {
    segments: Vec<Segment>,
    atoms: Vec<AtomTerm>,
}

impl PiecewisePayoff {
    /// Segments must tile `(0, ∞)` in order; empty segments are dropped and
    /// adjacent segments of the same kind merged.
    pub fn new(segments: Vec<Segment>, atoms: Vec<AtomTerm>) -> Result<Self> {
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments {
            if seg.upper <= seg.lower {
                continue;
            }
            match merged.last_mut() {
                Some(prev) if prev.kind == seg.kind && prev.upper == seg.lower => prev.upper = seg.upper,
                _ => merged.push(seg),
            }
        }
        let first = merged.first().ok_or(HedgeError::Coverage(0.0))?;
        if first.lower != 0.0 {
            return Err(HedgeError::Coverage(first.lower));
        }
        for w in merged.windows(2) {
            if w[0].upper != w[1].lower {
                return Err(HedgeError::Coverage(w[0].upper));
            }
        }
        let last = merged.last().expect("nonempty");
        if last.upper != f64::INFINITY {
            return Err(HedgeError::Coverage(last.upper));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.price.total_cmp(&b.price));
        Ok(Self { segments: merged, atoms })
    }

    pub fn constant(kind: PayoffKind) -> Self {
        Self {
            segments: vec![Segment { lower: 0.0, upper: f64::INFINITY, kind }],
            atoms: Vec::new(),
        }
    }

    /// Payoff switching from `below` to `above` at `threshold`.
    pub fn split(threshold: f64, below: PayoffKind, above: PayoffKind) -> Result<Self> {
        Self::new(
            vec![
                Segment { lower: 0.0, upper: threshold, kind: below },
                Segment { lower: threshold, upper: f64::INFINITY, kind: above },
            ],
            Vec::new(),
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn atoms(&self) -> &[AtomTerm] {
        &self.atoms
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(HedgeError::Domain(format!("terminal price {s} must be > 0")));
        }
        if let Some(a) = self.atoms.iter().find(|a| a.price == s) {
            return Ok(a.value);
        }
        let idx = self.segments.partition_point(|seg| seg.upper < s);
        let seg = self.segments.get(idx).ok_or(HedgeError::Coverage(s))?;
        if !(seg.lower < s && s <= seg.upper) {
            return Err(HedgeError::Coverage(s));
        }
        Ok(seg.kind.eval(s))
    }

    /// Region boundaries, for integration breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.lower, s.upper])
            .chain(self.segments.iter().filter_map(|s| match s.kind {
                PayoffKind::Call { strike } => Some(strike),
                PayoffKind::Zero => None,
            }))
            .filter(|x| x.is_finite() && *x > 0.0)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

pub fn payoff_eval(payoff: &PiecewisePayoff, terminal_price: f64) -> Result<f64> {
    payoff.eval(terminal_price)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeSolution {
    pub criterion: Criterion,
    pub model: Model,
    pub strike: f64,
    pub cap: f64,
    pub capital: f64,
    pub payoff: PiecewisePayoff,
    /// Fitted constant: level `1/k` of `ZL` (QH) or `ZH` (GQH, EP); price
    /// threshold (WES).
    pub k: Option<f64>,
    /// Randomization weight at the atom `ŷ(k)` (EP only).
    pub gamma: Option<f64>,
    pub yhat: Option<f64>,
    /// QH failure interval `(I(k), J(k))`.
    pub lower_threshold: Option<f64>,
    pub upper_threshold: Option<f64>,
    /// Index of the atom carrying the randomized term (EP only).
    pub atom_index: Option<usize>,
    /// `E^Q[H̃]`.
    pub fitted_price: f64,
    /// Success probability (QH), `E^P[φ̃]` (GQH) or `E^P[(H − H̃)^+]` (WES).
    pub risk_value: f64,
    /// Capital sits on `C(K+c)`: the payoff is `call(K+c)`.
    pub boundary: bool,
}

impl HedgeSolution {
    pub(crate) fn bare(problem: &HedgeProblem, payoff: PiecewisePayoff) -> Self {
        Self {
            criterion: problem.criterion,
            model: problem.model,
            strike: problem.strike,
            cap: problem.cap,
            capital: problem.capital,
            payoff,
            k: None,
            gamma: None,
            yhat: None,
            lower_threshold: None,
            upper_threshold: None,
            atom_index: None,
            fitted_price: f64::NAN,
            risk_value: f64::NAN,
            boundary: false,
        }
    }
}

/// Solve `problem` with the closed form for its model and criterion.
pub fn solve(problem: &HedgeProblem) -> Result<HedgeSolution> {
    match (problem.model, problem.criterion) {
        (Model::Bs(_), Criterion::Qh) => solve_qh_bs(problem),
        (Model::Bs(_), Criterion::Gqh) => solve_gqh_bs(problem),
        (Model::Bs(_), Criterion::Wes) => solve_wes_bs(problem),
        (Model::Ep(_), Criterion::Gqh) => solve_gqh_ep(problem),
        (Model::Ep(_), Criterion::Qh) => Err(HedgeError::UnsupportedCriterion(
            "quantile hedging has no solution in the exponential Poisson model (ZL has atoms)".into(),
        )),
        (Model::Ep(_), Criterion::Wes) => Err(HedgeError::UnsupportedCriterion(
            "only generalized quantile hedging is implemented for the exponential Poisson model".into(),
        )),
    }
}

/// Smallest `α̂ ∈ [0, 1]` with `E^Q[H − α̂L] = x`, i.e. `(E^Q[H] − x)/E^Q[L]`.
pub fn robust_scale(price_h: f64, price_l: f64, x: f64) -> Result<f64> {
    if !(price_l >= 0.0 && price_h >= price_l) {
        return Err(HedgeError::Domain(format!(
            "need 0 <= E[L] = {price_l} <= E[H] = {price_h}"
        )));
    }
    let snap = CAPITAL_SNAP * price_h.abs().max(1.0);
    if x > price_h + snap || x < price_h - price_l - snap {
        return Err(HedgeError::CapitalRange {
            capital: x,
            lower: price_h - price_l,
            upper: price_h,
        });
    }
    if price_l == 0.0 {
        if x >= price_h - snap {
            return Ok(0.0);
        }
        return Err(HedgeError::InfeasibleBudget { budget: x, minimum: price_h });
    }
    Ok(((price_h - x) / price_l).clamp(0.0, 1.0))
}
