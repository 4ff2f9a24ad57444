//! Conditional Neyman–Pearson tests on finite spaces.
//!
//! [`conditional_np`] maximizes `E^P[φ]` over tests `φ* ≤ φ ≤ 1` with
//! `E^Q[φ] ≤ α`. The optimum has the three-zone form
//!
//! ```text
//! φ̃ = 1                    on {φ* = 1} ∪ {dP/dQ > k}
//! φ̃ = φ* + γ(1 − φ*)       on {dP/dQ = k}
//! φ̃ = φ*                   on {dP/dQ < k}
//! ```
//!
//! and is found by raising atoms from their floor in decreasing order of
//! likelihood ratio until the budget binds. [`greedy_oracle`] is the same
//! LP solved atom by atom with arbitrary objective and cost weights; it is
//! kept deliberately separate so the two can be checked against each other.

use crate::error::{HedgeError, Result};
use crate::measure::{check_len, ConditionalTest, DiscreteSpace, Measure};
use crate::numeric::{compensated_sum, CompensatedSum};
use serde::Serialize;
use std::cmp::Ordering;

/// Budgets this close to a feasibility boundary are snapped onto it.
pub const BUDGET_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct NpSolution {
    pub test: ConditionalTest,
    /// Likelihood-ratio cutoff.
    pub k: f64,
    /// Randomization weight on `{dP/dQ = k}`.
    pub gamma: f64,
    /// `E^P[φ̃]`.
    pub objective: f64,
    /// `E^Q[φ̃]`.
    pub cost: f64,
    /// Unused budget when `α` exceeds the total `Q`-mass.
    pub slack: f64,
}

fn check_floor(floor: &[f64]) -> Result<()> {
    for (i, &f) in floor.iter().enumerate() {
        if !(0.0..=1.0).contains(&f) {
            return Err(HedgeError::InvalidTest(format!("floor[{i}] = {f} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Snap `budget` into `[minimum, maximum]` when within [`BUDGET_SNAP`];
/// returns `None` when the budget exceeds the maximum.
fn snap_budget(budget: f64, minimum: f64, maximum: f64) -> Result<Option<f64>> {
    let scale = 1.0f64.max(maximum.abs());
    if !budget.is_finite() {
        return Err(HedgeError::Domain(format!("budget {budget} is not finite")));
    }
    if budget < minimum {
        if minimum - budget <= BUDGET_SNAP * scale {
            return Ok(Some(minimum));
        }
        return Err(HedgeError::InfeasibleBudget { budget, minimum });
    }
    if budget >= maximum - BUDGET_SNAP * scale {
        return Ok(None);
    }
    Ok(Some(budget))
}

pub fn conditional_np(space: &DiscreteSpace, floor: &[f64], alpha: f64) -> Result<NpSolution> {
    check_len(space.len(), floor.len())?;
    check_floor(floor)?;
    let atoms = space.atoms();
    let total_q = space.total_mass(Measure::Q);
    let floor_cost = compensated_sum(atoms.iter().zip(floor).map(|(a, f)| a.q * f));

    let ratios = space.likelihood_ratios();
    let mut values = floor.to_vec();
    let (k, gamma, slack);

    match snap_budget(alpha, floor_cost, total_q)? {
        None => {
            values.iter_mut().for_each(|v| *v = 1.0);
            k = 0.0;
            gamma = 0.0;
            slack = (alpha - total_q).max(0.0);
        }
        Some(budget) => {
            slack = 0.0;
            let mut order: Vec<usize> = (0..atoms.len()).filter(|&i| floor[i] < 1.0).collect();
            // descending ratio, index order within ties
            order.sort_by(|&i, &j| ratios[j].total_cmp(&ratios[i]).then(i.cmp(&j)));

            let mut spent = CompensatedSum::new();
            spent.add(floor_cost);
            let mut cutoff = None;
            let mut start = 0;
            while start < order.len() {
                let r = ratios[order[start]];
                let end = start + order[start..].iter().take_while(|&&i| ratios[i] == r).count();
                let group = &order[start..end];
                let group_cost = compensated_sum(group.iter().map(|&i| atoms[i].q * (1.0 - floor[i])));
                let remaining = budget - spent.value();
                if group_cost <= remaining {
                    for &i in group {
                        values[i] = 1.0;
                    }
                    spent.add(group_cost);
                    start = end;
                    continue;
                }
                let g = (remaining / group_cost).clamp(0.0, 1.0);
                for &i in group {
                    values[i] = floor[i] + g * (1.0 - floor[i]);
                }
                cutoff = Some((r, g));
                break;
            }
            (k, gamma) = cutoff.unwrap_or((0.0, 0.0));
        }
    }

    let objective = space.expect(Measure::P, &values)?;
    let cost = space.expect(Measure::Q, &values)?;
    Ok(NpSolution {
        test: ConditionalTest::new(values, floor.to_vec())?,
        k,
        gamma,
        objective,
        cost,
        slack,
    })
}

/// Which of the three zones of the optimal test an atom falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Full,
    Randomized,
    Floor,
}

impl NpSolution {
    /// Check every atom against the zone its likelihood ratio prescribes;
    /// returns the zone per atom or the first offending atom index.
    pub fn zones(&self, space: &DiscreteSpace, tol: f64) -> std::result::Result<Vec<Zone>, usize> {
        let values = self.test.values();
        let floor = self.test.floor();
        space
            .likelihood_ratios()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let (zone, expected) = if floor[i] == 1.0 || r > self.k {
                    (Zone::Full, 1.0)
                } else if r == self.k {
                    (Zone::Randomized, floor[i] + self.gamma * (1.0 - floor[i]))
                } else {
                    (Zone::Floor, floor[i])
                };
                if (values[i] - expected).abs() <= tol {
                    Ok(zone)
                } else {
                    Err(i)
                }
            })
            .collect()
    }
}

/// Exact LP optimum of `max Σ obj_i φ_i` subject to `floor ≤ φ ≤ 1` and
/// `Σ cost_i φ_i ≤ budget`, by raising atoms in decreasing order of
/// `obj_i / cost_i` (index order on ties); the last raised atom may be
/// fractional.
pub fn greedy_oracle(
    space: &DiscreteSpace,
    floor: &[f64],
    budget: f64,
    objective_weights: &[f64],
    cost_weights: &[f64],
) -> Result<ConditionalTest> {
    let n = space.len();
    check_len(n, floor.len())?;
    check_len(n, objective_weights.len())?;
    check_len(n, cost_weights.len())?;
    check_floor(floor)?;
    if let Some(w) = objective_weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(HedgeError::Domain(format!("objective weight {w} must be >= 0")));
    }
    if let Some(w) = cost_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(HedgeError::Domain(format!("cost weight {w} must be > 0")));
    }
    let floor_cost = compensated_sum(cost_weights.iter().zip(floor).map(|(c, f)| c * f));
    let max_cost = compensated_sum(cost_weights.iter().copied());
    let Some(budget) = snap_budget(budget, floor_cost, max_cost)? else {
        return ConditionalTest::new(vec![1.0; n], floor.to_vec());
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let ri = objective_weights[i] / cost_weights[i];
        let rj = objective_weights[j] / cost_weights[j];
        rj.partial_cmp(&ri).unwrap_or(Ordering::Equal).then(i.cmp(&j))
    });
    let mut values = floor.to_vec();
    let mut spent = CompensatedSum::new();
    spent.add(floor_cost);
    for i in order {
        let remaining = budget - spent.value();
        if remaining <= 0.0 {
            break;
        }
        let full = cost_weights[i] * (1.0 - floor[i]);
        if full <= remaining {
            values[i] = 1.0;
            spent.add(full);
        } else {
            values[i] = floor[i] + remaining / cost_weights[i];
            break;
        }
    }
    ConditionalTest::new(values.into_iter().zip(floor).map(|(v, &f)| v.clamp(f, 1.0)).collect(), floor.to_vec())
}

/// Fractional-knapsack relaxation of `max P(A)` subject to
/// `E^Q[L·1_A] ≤ budget`: atoms with `L = 0` are free and come first, the
/// rest in decreasing order of `p / (q·L)`. Returns the relaxed indicator
/// and `P`-objective.
pub fn qh_fractional_oracle(
    space: &DiscreteSpace,
    cap_values: &[f64],
    budget: f64,
) -> Result<(Vec<f64>, f64)> {
    check_len(space.len(), cap_values.len())?;
    if budget < 0.0 {
        return Err(HedgeError::Domain(format!("negative budget {budget}")));
    }
    if let Some(l) = cap_values.iter().find(|l| !(**l >= 0.0)) {
        return Err(HedgeError::Domain(format!("cap value {l} must be >= 0")));
    }
    let atoms = space.atoms();
    let cost: Vec<f64> = atoms.iter().zip(cap_values).map(|(a, l)| a.q * l).collect();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    let key = |i: usize| {
        if cost[i] == 0.0 {
            f64::INFINITY
        } else {
            atoms[i].p / cost[i]
        }
    };
    order.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));

    let total = compensated_sum(cost.iter().copied());
    let budget = if budget >= total - BUDGET_SNAP * total.max(1.0) {
        f64::INFINITY
    } else {
        budget
    };
    let mut indicator = vec![0.0; atoms.len()];
    let mut spent = CompensatedSum::new();
    for i in order {
        let remaining = budget - spent.value();
        if cost[i] <= remaining {
            indicator[i] = 1.0;
            spent.add(cost[i]);
        } else {
            indicator[i] = (remaining / cost[i]).clamp(0.0, 1.0);
            break;
        }
    }
    let objective = space.expect(Measure::P, &indicator)?;
    Ok((indicator, objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exact LP optimum by vertex enumeration: at an optimal vertex at most
    /// one coordinate sits strictly between its bounds.
    fn brute_force_lp(obj: &[f64], cost: &[f64], floor: &[f64], budget: f64) -> f64 {
        let n = obj.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if mask & (1 << i) != 0 { 1.0 } else { floor[i] })
                .collect();
            let c: f64 = x.iter().zip(cost).map(|(x, c)| x * c).sum();
            let v: f64 = x.iter().zip(obj).map(|(x, o)| x * o).sum();
            if c <= budget + 1e-13 {
                best = best.max(v);
            }
            // one fractional coordinate among those at the floor
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let room = (budget - c) / cost[j];
                if room > 0.0 {
                    let t = room.min(1.0 - floor[j]);
                    best = best.max(v + t * obj[j]);
                }
            }
        }
        best
    }

    #[test]
    fn three_atom_example_matches_brute_force() {
        let space = DiscreteSpace::from_weights(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]).unwrap();
        let floor = [0.0, 0.5, 0.0];
        let sol = conditional_np(&space, &floor, 0.6).unwrap();
        let bf = brute_force_lp(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2], &floor, 0.6);
        assert!((bf - 0.84).abs() < 1e-15, "brute force {bf}");
        assert!((sol.objective - 0.84).abs() < 1e-15);
        let v = sol.test.values();
        assert!((v[0] - 0.2).abs() < 1e-15 && v[1] == 1.0 && v[2] == 1.0, "{v:?}");
        assert!((sol.k - 0.4).abs() < 1e-15);
        assert!((sol.gamma - 0.2).abs() < 1e-14);
        assert!((sol.cost - 0.6).abs() < 1e-15);
        assert!(sol.zones(&space, 1e-15).is_ok());
    }

    #[test]
    fn full_budget_gives_all_ones() {
        let space = DiscreteSpace::from_weights(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]).unwrap();
        let sol = conditional_np(&space, &[0.0; 3], 1.0).unwrap();
        assert_eq!(sol.test.values(), &[1.0; 3]);
        assert_eq!(sol.objective, 1.0);
        let over = conditional_np(&space, &[0.0; 3], 1.5).unwrap();
        assert!((over.slack - 0.5).abs() < 1e-15);
    }

    #[test]
    fn budget_below_floor_is_infeasible() {
        let space = DiscreteSpace::from_weights(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let err = conditional_np(&space, &[0.5, 0.5], 0.4).unwrap_err();
        assert!(matches!(err, HedgeError::InfeasibleBudget { .. }));
        // within the snap tolerance it is accepted and returns the floor
        let sol = conditional_np(&space, &[0.5, 0.5], 0.5 - 1e-13).unwrap();
        assert_eq!(sol.test.values(), &[0.5, 0.5]);
    }

    #[test]
    fn greedy_at_floor_budget_returns_floor() {
        let space = DiscreteSpace::from_weights(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]).unwrap();
        let floor = [0.1, 0.5, 0.3];
        let budget: f64 = floor.iter().zip([0.5, 0.3, 0.2]).map(|(f, q)| f * q).sum();
        let t = greedy_oracle(&space, &floor, budget, &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(t.values(), &floor);
    }

    #[test]
    fn greedy_single_atom_interpolates() {
        let space = DiscreteSpace::from_weights(&[1.0], &[1.0]).unwrap();
        // budget allows raising half of the remaining 0.7
        let t = greedy_oracle(&space, &[0.3], 0.3 + 0.5 * 0.7, &[1.0], &[1.0]).unwrap();
        assert!((t.values()[0] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn ties_are_raised_as_one_group() {
        // atoms 0 and 1 share dP/dQ = 1
        let space = DiscreteSpace::from_weights(&[0.25, 0.25, 0.5], &[0.25, 0.25, 0.5]).unwrap();
        let sol = conditional_np(&space, &[0.0, 0.2, 0.0], 0.4).unwrap();
        assert!(sol.zones(&space, 1e-15).is_ok());
        let greedy = greedy_oracle(&space, &[0.0, 0.2, 0.0], 0.4, &[0.25, 0.25, 0.5], &[0.25, 0.25, 0.5]).unwrap();
        let g_obj = space.expect(Measure::P, greedy.values()).unwrap();
        assert!((g_obj - sol.objective).abs() < 1e-15);
        // greedy breaks the tie differently: the test differs, the objective does not
        assert_ne!(greedy.values(), sol.test.values());
    }

    #[test]
    fn qh_oracle_boundaries() {
        let space = DiscreteSpace::from_weights(&[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2]).unwrap();
        let caps = [1.0, 2.0, 3.0];
        let full: f64 = [0.5 * 1.0, 0.3 * 2.0, 0.2 * 3.0].iter().sum();
        let (ind, obj) = qh_fractional_oracle(&space, &caps, full).unwrap();
        assert_eq!(ind, vec![1.0; 3]);
        assert!((obj - 1.0).abs() < 1e-15);
        let (ind, obj) = qh_fractional_oracle(&space, &caps, 0.0).unwrap();
        assert_eq!(ind, vec![0.0; 3]);
        assert_eq!(obj, 0.0);
        assert!(qh_fractional_oracle(&space, &caps, -0.1).is_err());
        // a zero cap is included for free
        let (ind, _) = qh_fractional_oracle(&space, &[0.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(ind, vec![1.0, 0.0, 0.0]);
    }

    /// Subset enumeration with one fractional atom added on top.
    fn qh_enumeration(p: &[f64], cost: &[f64], budget: f64) -> f64 {
        let n = p.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let c: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| cost[i]).sum();
            if c > budget + 1e-13 {
                continue;
            }
            let v: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
            best = best.max(v);
            for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                let t = ((budget - c) / cost[j]).clamp(0.0, 1.0);
                best = best.max(v + t * p[j]);
            }
        }
        best
    }

    fn random_space(raw: &[(f64, f64)]) -> DiscreteSpace {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        let p: Vec<f64> = raw.iter().map(|r| r.0 / total).collect();
        let qt: f64 = raw.iter().map(|r| r.1).sum();
        let q: Vec<f64> = raw.iter().map(|r| r.1 / qt).collect();
        DiscreteSpace::from_weights(&p, &q).unwrap()
    }

    proptest! {
        #[test]
        fn qh_oracle_matches_subset_enumeration(
            raw in prop::collection::vec((0.05..1.0f64, 0.05..1.0f64, 0.1..5.0f64), 8),
            frac in 0.0..1.0f64,
        ) {
            let space = random_space(&raw.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
            let caps: Vec<f64> = raw.iter().map(|r| r.2).collect();
            let cost: Vec<f64> = space.atoms().iter().zip(&caps).map(|(a, l)| a.q * l).collect();
            let budget = frac * cost.iter().sum::<f64>();
            let (_, obj) = qh_fractional_oracle(&space, &caps, budget).unwrap();
            let p: Vec<f64> = space.atoms().iter().map(|a| a.p).collect();
            let want = qh_enumeration(&p, &cost, budget);
            prop_assert!((obj - want).abs() < 1e-12, "{} vs {}", obj, want);
        }

        #[test]
        fn conditional_np_matches_vertex_enumeration(
            raw in prop::collection::vec((0.05..1.0f64, 0.05..1.0f64, 0.0..1.0f64), 2..9),
            frac in 0.0..1.0f64,
        ) {
            let space = random_space(&raw.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
            let floor: Vec<f64> = raw.iter().map(|r| if r.2 < 0.3 { 0.0 } else { r.2 }).collect();
            let q: Vec<f64> = space.atoms().iter().map(|a| a.q).collect();
            let p: Vec<f64> = space.atoms().iter().map(|a| a.p).collect();
            let lo: f64 = q.iter().zip(&floor).map(|(q, f)| q * f).sum();
            let alpha = lo + frac * (1.0 - lo);
            let sol = conditional_np(&space, &floor, alpha).unwrap();
            let want = brute_force_lp(&p, &q, &floor, alpha);
            prop_assert!((sol.objective - want).abs() < 1e-12);
            prop_assert!((sol.cost - alpha).abs() < 1e-12);
            prop_assert!(sol.zones(&space, 1e-12).is_ok());
        }

        #[test]
        fn objective_monotone_and_concave_in_budget(
            raw in prop::collection::vec((0.05..1.0f64, 0.05..1.0f64, 0.0..1.0f64), 2..12),
        ) {
            let space = random_space(&raw.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
            let floor: Vec<f64> = raw.iter().map(|r| r.2 * 0.8).collect();
            let lo: f64 = space.atoms().iter().zip(&floor).map(|(a, f)| a.q * f).sum();
            let grid: Vec<f64> = (0..=40)
                .map(|i| conditional_np(&space, &floor, lo + (1.0 - lo) * i as f64 / 40.0).unwrap().objective)
                .collect();
            for w in grid.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for w in grid.windows(3) {
                prop_assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-12);
            }
        }
    }
}
