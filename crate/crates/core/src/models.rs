//! Complete-market models with zero interest rate: Black–Scholes and the
//! exponential Poisson model `S_t = exp(N_t − γt)`.

use crate::error::{HedgeError, Result};
use crate::measure::{Atom, DiscreteSpace, Measure};
use crate::numeric::{compensated_sum, norm_cdf, norm_pdf, CompensatedSum};
use crate::quad::GaussLegendre;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashMap;
use std::f64::consts::E;

/// Law of `S = exp(Y)`, `Y ~ N(mu, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sd: f64,
}

impl LogNormal {
    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sd * self.sd).exp()
    }

    fn z(&self, s: f64) -> f64 {
        (s.ln() - self.mu) / self.sd
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s.is_infinite() {
            1.0
        } else {
            norm_cdf(self.z(s))
        }
    }

    /// `P(S > s)`.
    pub fn sf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            1.0
        } else if s.is_infinite() {
            0.0
        } else {
            norm_cdf(-self.z(s))
        }
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        norm_pdf(self.z(s)) / (s * self.sd)
    }

    /// `E[S·1{S > y}]`.
    pub fn partial_mean_above(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return self.mean();
        }
        if y.is_infinite() {
            return 0.0;
        }
        self.mean() * norm_cdf(self.sd - self.z(y))
    }

    /// `E[(S − m)^+]`.
    pub fn call(&self, strike: f64) -> f64 {
        if strike <= 0.0 {
            return self.mean() - strike;
        }
        (self.partial_mean_above(strike) - strike * self.sf(strike)).max(0.0)
    }

    /// `E[(S − m)^+ · 1{S > y}]`.
    pub fn call_above(&self, strike: f64, y: f64) -> f64 {
        let t = strike.max(y);
        self.call(t) + (t - strike) * self.sf(t)
    }

    pub fn quantile(&self, prob: f64) -> f64 {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (self.mu + self.sd * normal.inverse_cdf(prob)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBs {
    pub s0: f64,
    /// Drift per year.
    pub alpha: f64,
    /// Volatility per √year.
    pub sigma: f64,
    /// Horizon in years.
    pub horizon: f64,
}

impl ModelBs {
    pub fn new(s0: f64, alpha: f64, sigma: f64, horizon: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(HedgeError::Domain(format!("{name} = {v} must be finite and > 0")))
            }
        };
        positive("s0", s0)?;
        positive("sigma", sigma)?;
        positive("horizon", horizon)?;
        if !alpha.is_finite() {
            return Err(HedgeError::Domain(format!("alpha = {alpha} must be finite")));
        }
        Ok(Self { s0, alpha, sigma, horizon })
    }

    /// `0 < α < σ²`, the regime of the closed-form QH/GQH solutions.
    pub fn regime(&self) -> bool {
        0.0 < self.alpha && self.alpha < self.sigma * self.sigma
    }

    /// Market price of risk `θ = α/σ`.
    pub fn theta(&self) -> f64 {
        self.alpha / self.sigma
    }

    /// Exponent `α/σ²` in `Z = C·S_T^{−α/σ²}`.
    pub fn density_exponent(&self) -> f64 {
        self.alpha / (self.sigma * self.sigma)
    }

    /// `ln C` with `C = (s0·e^{(α−σ²)T/2})^{α/σ²}`.
    pub fn ln_density_constant(&self) -> f64 {
        self.density_exponent()
            * (self.s0.ln() + 0.5 * (self.alpha - self.sigma * self.sigma) * self.horizon)
    }

    pub fn density_constant(&self) -> f64 {
        self.ln_density_constant().exp()
    }

    pub fn terminal_law(&self, measure: Measure) -> LogNormal {
        let drift = match measure {
            Measure::P => self.alpha,
            Measure::Q => 0.0,
        };
        LogNormal {
            mu: self.s0.ln() + (drift - 0.5 * self.sigma * self.sigma) * self.horizon,
            sd: self.sigma * self.horizon.sqrt(),
        }
    }

    pub fn d1(&self, strike: f64) -> f64 {
        let vol = self.sigma * self.horizon.sqrt();
        ((self.s0 / strike).ln() + 0.5 * vol * vol) / vol
    }

    pub fn d2(&self, strike: f64) -> f64 {
        self.d1(strike) - self.sigma * self.horizon.sqrt()
    }
}

/// Zero-rate Black–Scholes call price `s0Φ(d₁) − KΦ(d₂)`.
pub fn bs_call_price(model: &ModelBs, strike: f64) -> Result<f64> {
    if !(strike >= 0.0) {
        return Err(HedgeError::Domain(format!("strike {strike} must be >= 0")));
    }
    if strike == 0.0 {
        return Ok(model.s0);
    }
    if strike.is_infinite() {
        return Ok(0.0);
    }
    let price = model.s0 * norm_cdf(model.d1(strike)) - strike * norm_cdf(model.d2(strike));
    Ok(price.max(0.0))
}

/// `dQ/dP` as a function of the terminal price.
pub fn bs_density(model: &ModelBs, terminal_price: f64) -> Result<f64> {
    if !(terminal_price > 0.0) {
        return Err(HedgeError::Domain(format!(
            "terminal price {terminal_price} must be > 0"
        )));
    }
    Ok((model.ln_density_constant() - model.density_exponent() * terminal_price.ln()).exp())
}

const GRID_PANEL_ORDER: usize = 16;
const GRID_HALF_WIDTH_SD: f64 = 10.0;

/// Discretize the `P`-law of `S_T` on Gauss–Legendre nodes in log-price
/// over ±10 standard deviations; `q = p·Z`, not renormalized.
pub fn bs_terminal_grid(model: &ModelBs, n_nodes: usize) -> Result<DiscreteSpace> {
    bs_terminal_grid_with_breaks(model, n_nodes, &[])
}

/// [`bs_terminal_grid`] with panel edges placed at the given prices, so
/// that payoff kinks there are integrated at full order.
pub fn bs_terminal_grid_with_breaks(
    model: &ModelBs,
    n_nodes: usize,
    breaks: &[f64],
) -> Result<DiscreteSpace> {
    if n_nodes < GRID_PANEL_ORDER {
        return Err(HedgeError::Domain(format!("grid needs at least 16 nodes, got {n_nodes}")));
    }
    let law = model.terminal_law(Measure::P);
    let lo = law.mu - GRID_HALF_WIDTH_SD * law.sd;
    let hi = law.mu + GRID_HALF_WIDTH_SD * law.sd;

    let mut cuts: Vec<f64> = breaks
        .iter()
        .filter(|&&b| b > 0.0)
        .map(|b| b.ln())
        .filter(|&u| u > lo && u < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges_outer = vec![lo];
    edges_outer.extend(cuts);
    edges_outer.push(hi);

    let n_panels = n_nodes.div_ceil(GRID_PANEL_ORDER).max(edges_outer.len() - 1);
    let width = hi - lo;
    let segs = edges_outer.len() - 1;
    // at least one panel per segment, the rest in proportion to length
    let mut per_seg: Vec<usize> = edges_outer
        .windows(2)
        .map(|w| (((w[1] - w[0]) / width) * n_panels as f64).floor().max(1.0) as usize)
        .collect();
    while per_seg.iter().sum::<usize>() < n_panels {
        let (i, _) = edges_outer
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, (w[1] - w[0]) / per_seg[i] as f64))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("segments");
        per_seg[i] += 1;
    }
    while per_seg.iter().sum::<usize>() > n_panels {
        let (i, _) = (0..segs)
            .filter(|&i| per_seg[i] > 1)
            .map(|i| (i, (edges_outer[i + 1] - edges_outer[i]) / per_seg[i] as f64))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("reducible segment");
        per_seg[i] -= 1;
    }
    let mut panel_edges = Vec::with_capacity(n_panels + 1);
    panel_edges.push(lo);
    for (s, w) in edges_outer.windows(2).enumerate() {
        let m = per_seg[s];
        for j in 1..=m {
            panel_edges.push(if j == m { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / m as f64 });
        }
    }
    let total_panels = panel_edges.len() - 1;
    let base = n_nodes / total_panels;
    let extra = n_nodes % total_panels;

    let mut rules: HashMap<usize, GaussLegendre> = HashMap::new();
    let ln_c = model.ln_density_constant();
    let a = model.density_exponent();
    let mut atoms = Vec::with_capacity(n_nodes);
    for (i, w) in panel_edges.windows(2).enumerate() {
        let order = base + usize::from(i < extra);
        let rule = rules.entry(order).or_insert_with(|| GaussLegendre::new(order));
        for (u, wt) in rule.mapped(w[0], w[1]) {
            let p = wt * norm_pdf((u - law.mu) / law.sd) / law.sd;
            // Z = C·S^{-a} with ln S = u
            let q = p * (ln_c - a * u).exp();
            atoms.push(Atom { state: u.exp(), p, q });
        }
    }
    // the ±10 sd truncation drops ~1.5e-23 of P-mass
    let total = compensated_sum(atoms.iter().map(|a| a.p));
    let scale = 1.0 / total;
    if (total - 1.0).abs() > 1e-12 {
        for atom in &mut atoms {
            atom.p *= scale;
            atom.q *= scale;
        }
    }
    DiscreteSpace::new(atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelEp {
    /// Intensity of `N` under `P`.
    pub lambda_p: f64,
    /// Drift `γ` in `S_t = exp(N_t − γt)`.
    pub gamma_drift: f64,
    pub horizon: f64,
}

impl ModelEp {
    pub fn new(lambda_p: f64, gamma_drift: f64, horizon: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda_p), ("gamma_drift", gamma_drift), ("horizon", horizon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HedgeError::Domain(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Ok(Self { lambda_p, gamma_drift, horizon })
    }

    pub fn s0(&self) -> f64 {
        1.0
    }

    /// `1 < λ(e−1)/γ < e`: the exponent of `ŷ` lies in `(0, 1)`.
    pub fn regime(&self) -> bool {
        let r = self.lambda_p * (E - 1.0) / self.gamma_drift;
        1.0 < r && r < E
    }

    pub fn lambda_q(&self) -> f64 {
        self.gamma_drift / (E - 1.0)
    }

    /// Exponent `ln(γ/(λ(e−1)))` in `Z = C·S_T^{exponent}`.
    pub fn density_exponent(&self) -> f64 {
        (self.gamma_drift / (self.lambda_p * (E - 1.0))).ln()
    }

    /// `ln C = T(λ − γ/(e−1) − γ·ln(λ(e−1)/γ))`.
    pub fn ln_density_constant(&self) -> f64 {
        self.horizon
            * (self.lambda_p - self.lambda_q() + self.gamma_drift * self.density_exponent())
    }

    /// `Z` on `{N_T = n}`.
    pub fn density_at(&self, n: usize) -> f64 {
        (self.density_exponent() * n as f64 - (self.lambda_q() - self.lambda_p) * self.horizon).exp()
    }

    pub fn price_at(&self, n: usize) -> f64 {
        (n as f64 - self.gamma_drift * self.horizon).exp()
    }

    pub fn mean_jumps(&self, measure: Measure) -> f64 {
        match measure {
            Measure::P => self.lambda_p * self.horizon,
            Measure::Q => self.lambda_q() * self.horizon,
        }
    }
}

pub fn ep_lambda_q(model: &ModelEp) -> f64 {
    model.lambda_q()
}

pub(crate) fn poisson_ln_pmf(mean: f64, n: usize) -> f64 {
    let nf = n as f64;
    if n == 0 {
        -mean
    } else {
        -mean + nf * mean.ln() - libm::lgamma(nf + 1.0)
    }
}

/// Chernoff bound on `P(N > n)` for `N ~ Poisson(mean)`.
pub(crate) fn poisson_chernoff_tail(mean: f64, n: usize) -> f64 {
    let m = (n + 1) as f64;
    if m <= mean {
        return 1.0;
    }
    (-mean + m * (E * mean / m).ln()).exp()
}

/// Zero-rate call on the exponential Poisson model: the `Q`-series
/// `Σ_{n ≥ ⌈ln K + γT⌉} (e^{n−γT} − K) Poisson(λ_Q T)(n)`, truncated once the
/// remainder is certified below `1e-16`.
pub fn ep_call_price(model: &ModelEp, strike: f64) -> Result<f64> {
    if !(strike >= 0.0) {
        return Err(HedgeError::Domain(format!("strike {strike} must be >= 0")));
    }
    if strike == 0.0 {
        return Ok(1.0);
    }
    let mu = model.mean_jumps(Measure::Q);
    let gt = model.gamma_drift * model.horizon;
    let start = (strike.ln() + gt).ceil().max(0.0);
    if !start.is_finite() || start > 1e7 {
        return Ok(0.0);
    }
    let mut n = (start as usize).saturating_sub(1);
    let mut acc = CompensatedSum::new();
    loop {
        let ln_q = poisson_ln_pmf(mu, n);
        let price = (n as f64 - gt).exp();
        let term = (price - strike).max(0.0) * ln_q.exp();
        acc.add(term);
        // successive terms of e^{n} q_n shrink by r = eμ/(n+1)
        let r = E * mu / (n + 2) as f64;
        if r < 0.5 {
            let bound = (n as f64 + 1.0 - gt + ln_q).exp() * r / (1.0 - r);
            if bound < 1e-16 * acc.value().max(1e-300) || bound < 1e-300 {
                break;
            }
        }
        n += 1;
    }
    Ok(acc.value())
}

/// Terminal law of the exponential Poisson model on `{N_T = 0, …, n_max}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpAtoms {
    pub prices: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl EpAtoms {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn to_space(&self) -> Result<DiscreteSpace> {
        DiscreteSpace::new(
            self.prices
                .iter()
                .zip(&self.p)
                .zip(&self.q)
                .filter(|((_, p), q)| **p >= crate::measure::MIN_ATOM_WEIGHT && **q >= crate::measure::MIN_ATOM_WEIGHT)
                .map(|((&state, &p), &q)| Atom { state, p, q })
                .collect(),
        )
    }

    /// `P`- or `Q`-expectation of `f(price)` over the atoms.
    pub fn expect<F: Fn(f64) -> f64>(&self, measure: Measure, f: F) -> f64 {
        let w = match measure {
            Measure::P => &self.p,
            Measure::Q => &self.q,
        };
        compensated_sum(self.prices.iter().zip(w).map(|(&s, &w)| w * f(s)))
    }
}

const EP_TAIL_MAX: f64 = 1e-14;

/// Atoms `n = 0..=n_max`; fails when either Poisson tail beyond `n_max` is
/// not below `1e-14`.
pub fn ep_atoms(model: &ModelEp, n_max: usize) -> Result<EpAtoms> {
    let mp = model.mean_jumps(Measure::P);
    let mq = model.mean_jumps(Measure::Q);
    let tail = poisson_chernoff_tail(mp, n_max).max(poisson_chernoff_tail(mq, n_max));
    if tail >= EP_TAIL_MAX {
        return Err(HedgeError::TailMass { n_max, tail });
    }
    let mut atoms = EpAtoms {
        prices: Vec::with_capacity(n_max + 1),
        p: Vec::with_capacity(n_max + 1),
        q: Vec::with_capacity(n_max + 1),
    };
    for n in 0..=n_max {
        atoms.prices.push(model.price_at(n));
        atoms.p.push(poisson_ln_pmf(mp, n).exp());
        atoms.q.push(poisson_ln_pmf(mq, n).exp());
    }
    Ok(atoms)
}

/// Smallest `n_max` with both pmfs below `1e-16` at `n_max` and Chernoff
/// certificates that the remaining mass and the remaining contribution to
/// `E[S_T]` are below `1e-14` under both measures.
pub fn ep_default_n_max(model: &ModelEp) -> usize {
    let mp = model.mean_jumps(Measure::P);
    let mq = model.mean_jumps(Measure::Q);
    let gt = model.gamma_drift * model.horizon;
    // E[S; N > n] = e^{μ(e−1) − γT} · P(Poisson(μe) > n)
    let price_tail = |mu: f64, n: usize| (mu * (E - 1.0) - gt).exp() * poisson_chernoff_tail(mu * E, n);
    let mut n = mp.max(mq).ceil() as usize;
    loop {
        let small = poisson_ln_pmf(mp, n).exp() < 1e-16 && poisson_ln_pmf(mq, n).exp() < 1e-16;
        let certified = poisson_chernoff_tail(mp, n) < EP_TAIL_MAX
            && poisson_chernoff_tail(mq, n) < EP_TAIL_MAX
            && price_tail(mp, n) < EP_TAIL_MAX
            && price_tail(mq, n) < EP_TAIL_MAX;
        if small && certified {
            return n;
        }
        n += 1;
    }
}

/// Either supported market model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Bs(ModelBs),
    Ep(ModelEp),
}

impl Model {
    pub fn call_price(&self, strike: f64) -> Result<f64> {
        match self {
            Model::Bs(m) => bs_call_price(m, strike),
            Model::Ep(m) => ep_call_price(m, strike),
        }
    }

    pub fn s0(&self) -> f64 {
        match self {
            Model::Bs(m) => m.s0,
            Model::Ep(m) => m.s0(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Bs(_) => "bs",
            Model::Ep(_) => "ep",
        }
    }

    /// `P`-quantile of the terminal price.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        match self {
            Model::Bs(m) => Ok(m.terminal_law(Measure::P).quantile(prob)),
            Model::Ep(m) => {
                let atoms = ep_atoms(m, ep_default_n_max(m))?;
                let mut cum = 0.0;
                for (s, p) in atoms.prices.iter().zip(&atoms.p) {
                    cum += p;
                    if cum >= prob {
                        return Ok(*s);
                    }
                }
                Ok(*atoms.prices.last().expect("atoms"))
            }
        }
    }
}
