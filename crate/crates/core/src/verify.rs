//! Monte-Carlo and discretization checks of solved hedges.
//!
//! Samples are drawn in chunks of `2^16`; chunk `i` uses a ChaCha20 stream
//! keyed by `(seed, i, measure)`, and chunk statistics are merged in index
//! order, so results do not depend on the number of worker threads.

use crate::error::{HedgeError, Result};
use crate::hedge::{solve, Criterion, HedgeProblem, HedgeSolution};
use crate::measure::{DiscreteSpace, Measure};
use crate::models::{bs_terminal_grid_with_breaks, Model};
use crate::np::{conditional_np, greedy_oracle, qh_fractional_oracle};
use crate::numeric::{compensated_sum, CompensatedSum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

pub const CHUNK: usize = 1 << 16;
/// Absolute slack `1e-12·(1 + H)` allowed in `(H − X)^+ ≤ L`.
pub const FEASIBILITY_TOL: f64 = 1e-12;

fn chunk_rng(seed: u64, chunk: usize, measure: Measure) -> ChaCha20Rng {
    let tag = match measure {
        Measure::P => 0,
        Measure::Q => 1,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((chunk as u64) << 1) | tag);
    rng
}

fn fill_chunk(model: &Model, measure: Measure, rng: &mut ChaCha20Rng, out: &mut [f64]) {
    match model {
        Model::Bs(m) => {
            let law = m.terminal_law(measure);
            for s in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *s = (law.mu + law.sd * z).exp();
            }
        }
        Model::Ep(m) => {
            let mean = m.mean_jumps(measure);
            let gt = m.gamma_drift * m.horizon;
            let poisson = Poisson::new(mean).expect("positive Poisson mean");
            for s in out.iter_mut() {
                let n: f64 = poisson.sample(rng);
                *s = (n - gt).exp();
            }
        }
    }
}

/// `n` terminal prices under `measure`, reproducible from `(seed, n)`.
pub fn simulate_terminal(model: &Model, measure: Measure, n: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(i, chunk)| {
        let mut rng = chunk_rng(seed, i, measure);
        fill_chunk(model, measure, &mut rng, chunk);
    });
    out
}

/// Terminal prices under both measures, for reuse across payoffs.
#[derive(Debug, Clone)]
pub struct Samples {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub seed: u64,
}

impl Samples {
    pub fn draw(model: &Model, n: usize, seed: u64) -> Self {
        Self {
            p: simulate_terminal(model, Measure::P, n, seed),
            q: simulate_terminal(model, Measure::Q, n, seed),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Running count, mean and centred second moment.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean: self.mean, se }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean − target| ≤ n_se · se`.
    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }
}

/// Order-independent reduction: per-chunk statistics merged by chunk index.
fn chunked_moments<const K: usize, F>(xs: &[f64], f: F) -> ([Moments; K], u64)
where
    F: Fn(f64) -> ([f64; K], bool) + Sync,
{
    let parts: Vec<([Moments; K], u64)> = xs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut m = [Moments::default(); K];
            let mut bad = 0u64;
            for &s in chunk {
                let (vals, violation) = f(s);
                for (acc, v) in m.iter_mut().zip(vals) {
                    acc.push(v);
                }
                bad += u64::from(violation);
            }
            (m, bad)
        })
        .collect();
    let mut total = [Moments::default(); K];
    let mut bad = 0;
    for (m, b) in parts {
        for (t, x) in total.iter_mut().zip(m.iter()) {
            *t = t.merge(x);
        }
        bad += b;
    }
    (total, bad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// `E^Q[X̃]`.
    pub price_estimate: Estimate,
    /// `P(X̃ ≥ H)`.
    pub success_probability: Estimate,
    /// `E^P[1 ∧ X̃/H]`, with ratio 1 on `{H = 0}`.
    pub success_ratio: Estimate,
    /// `E^P[(H − X̃)^+]`.
    pub expected_shortfall: Estimate,
    /// Samples (under either measure) with `(H − X̃)^+ > L + 1e-12·(1 + H)`.
    pub feasibility_violations: u64,
    pub samples: usize,
    pub seed: u64,
}

pub fn mc_report(solution: &HedgeSolution, problem: &HedgeProblem, n: usize, seed: u64) -> Result<VerifyReport> {
    mc_report_with(solution, problem, &Samples::draw(&problem.model, n, seed))
}

/// [`mc_report`] on pre-drawn samples.
pub fn mc_report_with(solution: &HedgeSolution, problem: &HedgeProblem, samples: &Samples) -> Result<VerifyReport> {
    if samples.is_empty() {
        return Err(HedgeError::Domain("need at least one sample".into()));
    }
    let payoff = &solution.payoff;
    // segments cover (0, ∞) and prices are positive, so eval cannot fail
    let eval = |s: f64| payoff.eval(s).unwrap_or(f64::NAN);
    let violates = |s: f64, x: f64| {
        let h = problem.claim(s);
        let l = problem.cap_value(s);
        !((h - x).max(0.0) <= l + FEASIBILITY_TOL * (1.0 + h))
    };
    let ([price], bad_q) = chunked_moments(&samples.q, |s| {
        let x = eval(s);
        ([x], violates(s, x))
    });
    let ([succ, ratio, short], bad_p) = chunked_moments(&samples.p, |s| {
        let x = eval(s);
        let h = problem.claim(s);
        let r = if h > 0.0 { (x / h).min(1.0) } else { 1.0 };
        ([f64::from(x >= h), r, (h - x).max(0.0)], violates(s, x))
    });
    Ok(VerifyReport {
        price_estimate: price.estimate(),
        success_probability: succ.estimate(),
        success_ratio: ratio.estimate(),
        expected_shortfall: short.estimate(),
        feasibility_violations: bad_p + bad_q,
        samples: samples.len(),
        seed: samples.seed,
    })
}

/// Pointwise feasibility over `n` equally spaced prices in `[lo, hi]`;
/// returns the number of violations.
pub fn sweep_violations(solution: &HedgeSolution, problem: &HedgeProblem, lo: f64, hi: f64, n: usize) -> Result<usize> {
    let mut bad = 0;
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
        let x = solution.payoff.eval(s)?;
        let h = problem.claim(s);
        let l = problem.cap_value(s);
        if !((h - x).max(0.0) <= l + FEASIBILITY_TOL * (1.0 + h) && x <= h + FEASIBILITY_TOL * (1.0 + h)) {
            bad += 1;
        }
    }
    Ok(bad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckRecord {
    pub criterion: Criterion,
    pub grid_n: usize,
    pub closed_form: f64,
    pub discrete: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

/// Compare the closed-form risk with the exact optimum of the problem on a
/// Gauss–Legendre grid of the terminal law (breaks at `K` and `K+c`).
///
/// The grid budget is `x − C(K+c) + Σ q(H − L)`, i.e. the capital above the
/// floor is kept, so that the boundary case maps to the grid floor.
pub fn crosscheck_discrete(problem: &HedgeProblem, grid_n: usize) -> Result<CrosscheckRecord> {
    let Model::Bs(model) = problem.model else {
        return Err(HedgeError::UnsupportedCriterion(
            "discrete cross-check is only available for Black-Scholes".into(),
        ));
    };
    if grid_n < 1000 {
        return Err(HedgeError::Domain(format!("grid_n = {grid_n} must be >= 1000")));
    }
    let closed = solve(problem)?;
    let (k, c) = (problem.strike, problem.cap);
    let grid = bs_terminal_grid_with_breaks(&model, grid_n, &[k, k + c])?;
    let atoms = grid.atoms();
    let h: Vec<f64> = atoms.iter().map(|a| problem.claim(a.state)).collect();
    let l: Vec<f64> = atoms.iter().zip(&h).map(|(a, &h)| problem.shortfall_spec().eval(a.state, h)).collect();
    let extra = problem.capital - problem.model.call_price(k + c)?;

    let discrete = match problem.criterion {
        Criterion::Qh => qh_fractional_oracle(&grid, &l, extra.max(0.0))?.1,
        Criterion::Gqh | Criterion::Wes => {
            let live: Vec<usize> = (0..atoms.len()).filter(|&i| h[i] > 0.0).collect();
            let mass_live = compensated_sum(live.iter().map(|&i| atoms[i].p));
            let floor: Vec<f64> = live.iter().map(|&i| (h[i] - l[i]) / h[i]).collect();
            let floor_cost = compensated_sum(live.iter().map(|&i| atoms[i].q * (h[i] - l[i])));
            let budget = extra + floor_cost;
            if problem.criterion == Criterion::Gqh {
                let p: Vec<f64> = live.iter().map(|&i| atoms[i].p / mass_live).collect();
                let q: Vec<f64> = live.iter().map(|&i| atoms[i].q * h[i]).collect();
                let reduced = DiscreteSpace::from_weights(&p, &q)?;
                let sol = conditional_np(&reduced, &floor, budget)?;
                (1.0 - mass_live) + mass_live * sol.objective
            } else {
                let p: Vec<f64> = live.iter().map(|&i| atoms[i].p / mass_live).collect();
                let q: Vec<f64> = live.iter().map(|&i| atoms[i].q).collect();
                let reduced = DiscreteSpace::from_weights(&p, &q)?;
                let obj: Vec<f64> = live.iter().map(|&i| atoms[i].p * h[i]).collect();
                let cost: Vec<f64> = live.iter().map(|&i| atoms[i].q * h[i]).collect();
                let test = greedy_oracle(&reduced, &floor, budget, &obj, &cost)?;
                let mut covered = CompensatedSum::new();
                for (o, phi) in obj.iter().zip(test.values()) {
                    covered.add(o * (1.0 - phi));
                }
                covered.value()
            }
        }
    };
    let abs_gap = (closed.risk_value - discrete).abs();
    Ok(CrosscheckRecord {
        criterion: problem.criterion,
        grid_n,
        closed_form: closed.risk_value,
        discrete,
        abs_gap,
        rel_gap: abs_gap / closed.risk_value.abs().max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bs_call_price, ModelBs, ModelEp};

    fn bs() -> Model {
        Model::Bs(ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap())
    }

    #[test]
    fn simulation_is_deterministic_and_chunked() {
        let a = simulate_terminal(&bs(), Measure::Q, CHUNK + 17, 7);
        let b = simulate_terminal(&bs(), Measure::Q, CHUNK + 17, 7);
        assert_eq!(a, b);
        // a prefix of a longer run is the shorter run
        let c = simulate_terminal(&bs(), Measure::Q, 100, 7);
        assert_eq!(&a[..100], &c[..]);
        let p = simulate_terminal(&bs(), Measure::P, 100, 7);
        assert_ne!(p, c);
        let other = simulate_terminal(&bs(), Measure::Q, 100, 8);
        assert_ne!(other, c);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| simulate_terminal(&bs(), Measure::P, 3 * CHUNK + 5, 11));
        let multi = simulate_terminal(&bs(), Measure::P, 3 * CHUNK + 5, 11);
        assert_eq!(single, multi);
        let m = |xs: &[f64]| chunked_moments(xs, |s| ([s], false)).0[0].estimate();
        assert_eq!(pool.install(|| m(&single)), m(&multi));
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5).collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let ab = a.merge(&b);
        assert!((ab.mean - one.mean).abs() < 1e-12);
        assert!((ab.m2 - one.m2).abs() < 1e-9 * one.m2);
    }

    #[test]
    fn martingale_means() {
        let n = 1_000_000;
        let model = bs();
        let q = chunked_moments(&simulate_terminal(&model, Measure::Q, n, 1), |s| ([s], false)).0[0].estimate();
        assert!(q.within(100.0, 4.0), "{q:?}");
        let p = chunked_moments(&simulate_terminal(&model, Measure::P, n, 1), |s| ([s], false)).0[0].estimate();
        assert!(p.within(100.0 * 0.02f64.exp(), 4.0), "{p:?}");
        let ep = Model::Ep(ModelEp::new(1.5, 2.5, 1.0).unwrap());
        let e = chunked_moments(&simulate_terminal(&ep, Measure::Q, n, 1), |s| ([s], false)).0[0].estimate();
        assert!(e.within(1.0, 4.0), "{e:?}");
    }

    #[test]
    fn exact_hedge_report() {
        let model = bs();
        let ck = bs_call_price(&ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap(), 100.0).unwrap();
        let problem = HedgeProblem::new(model, 100.0, 0.0, ck, Criterion::Gqh).unwrap();
        let sol = solve(&problem).unwrap();
        let r = mc_report(&sol, &problem, 200_000, 3).unwrap();
        assert!(r.price_estimate.within(ck, 4.0), "{r:?}");
        assert_eq!(r.success_probability.mean, 1.0);
        assert_eq!(r.expected_shortfall.mean, 0.0);
        assert_eq!(r.feasibility_violations, 0);
    }

    #[test]
    fn se_scales_with_root_n() {
        let model = bs();
        let m = ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let x = 0.5 * (bs_call_price(&m, 100.0).unwrap() + bs_call_price(&m, 105.0).unwrap());
        let problem = HedgeProblem::new(model, 100.0, 5.0, x, Criterion::Wes).unwrap();
        let sol = solve(&problem).unwrap();
        let a = mc_report(&sol, &problem, 200_000, 5).unwrap();
        let b = mc_report(&sol, &problem, 400_000, 5).unwrap();
        let ratio = a.expected_shortfall.se / b.expected_shortfall.se;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn crosscheck_rejects_ep_and_small_grids() {
        let ep = Model::Ep(ModelEp::new(1.5, 2.5, 1.0).unwrap());
        let p = HedgeProblem::new(ep, 1.0, 0.5, 0.3, Criterion::Gqh).unwrap();
        assert!(crosscheck_discrete(&p, 10_000).is_err());
        let m = ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let x = bs_call_price(&m, 103.0).unwrap();
        let p = HedgeProblem::new(bs(), 100.0, 5.0, x, Criterion::Gqh).unwrap();
        assert!(crosscheck_discrete(&p, 999).is_err());
    }

    #[test]
    fn crosscheck_boundary_is_exact() {
        let m = ModelBs::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let x = bs_call_price(&m, 105.0).unwrap();
        for crit in Criterion::ALL {
            let p = HedgeProblem::new(bs(), 100.0, 5.0, x, crit).unwrap();
            let r = crosscheck_discrete(&p, 10_000).unwrap();
            assert!(r.abs_gap < 1e-10, "{crit}: {r:?}");
        }
    }
}
