use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion as Bench};
use qhedge_bench::{bs_mid_problem, bs_model, ep_mid_problem, scattered_space};
use qhedge_core::models::bs_terminal_grid;
use qhedge_core::verify::{crosscheck_discrete, mc_report};
use qhedge_core::{conditional_np, solve, Criterion, Measure};
use std::hint::black_box;

fn np(c: &mut Bench) {
    let mut group = c.benchmark_group("conditional_np");
    for n in [1_000, 100_000] {
        let (space, floor) = scattered_space(n);
        let floor_cost: f64 = space.atoms().iter().zip(&floor).map(|(a, f)| a.q * f).sum();
        let alpha = 0.5 * (floor_cost + space.total_mass(Measure::Q));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| conditional_np(black_box(&space), black_box(&floor), alpha).unwrap())
        });
    }
    group.finish();
}

fn closed_forms(c: &mut Bench) {
    let mut group = c.benchmark_group("solve");
    for crit in Criterion::ALL {
        let problem = bs_mid_problem(crit);
        group.bench_function(format!("bs_{crit}"), |b| b.iter(|| solve(black_box(&problem)).unwrap()));
    }
    let ep = ep_mid_problem();
    group.bench_function("ep_gqh", |b| b.iter(|| solve(black_box(&ep)).unwrap()));
    group.finish();
}

fn verification(c: &mut Bench) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    let problem = bs_mid_problem(Criterion::Gqh);
    let sol = solve(&problem).unwrap();
    group.bench_function("mc_report_1e5", |b| b.iter(|| mc_report(&sol, &problem, 100_000, 1).unwrap()));
    group.bench_function("terminal_grid_1e5", |b| b.iter(|| bs_terminal_grid(&bs_model(), 100_000).unwrap()));
    group.bench_function("crosscheck_gqh_1e5", |b| b.iter(|| crosscheck_discrete(&problem, 100_000).unwrap()));
    group.finish();
}

criterion_group!(benches, np, closed_forms, verification);
criterion_main!(benches);
