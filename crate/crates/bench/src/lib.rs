//! Fixtures shared by the benchmarks.

use qhedge_core::models::{bs_call_price, ep_call_price, ModelBs, ModelEp};
use qhedge_core::numeric::compensated_sum;
use qhedge_core::{Atom, Criterion, DiscreteSpace, HedgeProblem, Model};

pub fn bs_model() -> ModelBs {
    ModelBs::new(100.0, 0.02, 0.2, 1.0).expect("valid model")
}

/// Black–Scholes call with `K = 100`, `c = 5`, capital midway in range.
pub fn bs_mid_problem(criterion: Criterion) -> HedgeProblem {
    let m = bs_model();
    let x = 0.5 * (bs_call_price(&m, 100.0).unwrap() + bs_call_price(&m, 105.0).unwrap());
    HedgeProblem::new(Model::Bs(m), 100.0, 5.0, x, criterion).expect("valid problem")
}

pub fn ep_mid_problem() -> HedgeProblem {
    let m = ModelEp::new(1.5, 2.5, 1.0).expect("valid model");
    let x = 0.5 * (ep_call_price(&m, 1.0).unwrap() + ep_call_price(&m, 1.5).unwrap());
    HedgeProblem::new(Model::Ep(m), 1.0, 0.5, x, Criterion::Gqh).expect("valid problem")
}

/// Deterministic `n`-atom space with scattered likelihood ratios and floors.
pub fn scattered_space(n: usize) -> (DiscreteSpace, Vec<f64>) {
    let frac = |x: f64| x - x.floor();
    let p: Vec<f64> = (0..n).map(|i| 0.05 + frac(i as f64 * 0.618_033_988_75)).collect();
    let q: Vec<f64> = (0..n).map(|i| 0.05 + frac(i as f64 * 0.414_213_562_37)).collect();
    let (sp, sq) = (compensated_sum(p.iter().copied()), compensated_sum(q.iter().copied()));
    let atoms = p
        .iter()
        .zip(&q)
        .enumerate()
        .map(|(i, (p, q))| Atom { state: i as f64, p: p / sp, q: q / sq })
        .collect();
    let floor = (0..n).map(|i| frac(i as f64 * 0.732_050_807_57) * 0.5).collect();
    (DiscreteSpace::new(atoms).expect("valid space"), floor)
}
