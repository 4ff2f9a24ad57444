//! Payoff profiles: a price sweep of claim, cap, hedge payoff, shortfall and
//! success ratio, written as CSV at 17 significant digits.

use crate::error::{HedgeError, Result};
use crate::hedge::{HedgeProblem, HedgeSolution};
use crate::models::Model;
use crate::numeric::{fmt17, parse17};
use std::io::{Read, Write};
use std::path::Path;

pub const PROFILE_HEADER: [&str; 6] = ["s", "H", "L", "payoff", "shortfall", "success_ratio"];
pub const DEFAULT_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub s: f64,
    pub h: f64,
    pub l: f64,
    pub payoff: f64,
    pub shortfall: f64,
    pub success_ratio: f64,
}

impl ProfileRow {
    pub fn at(solution: &HedgeSolution, problem: &HedgeProblem, s: f64) -> Result<Self> {
        let payoff = solution.payoff.eval(s)?;
        let h = problem.claim(s);
        Ok(Self {
            s,
            h,
            l: problem.cap_value(s),
            payoff,
            shortfall: (h - payoff).max(0.0),
            success_ratio: if h > 0.0 { (payoff / h).min(1.0) } else { 1.0 },
        })
    }
}

/// `[max(1e-6, q_0.001), q_0.999]` of the `P`-law of the terminal price.
pub fn default_range(model: &Model) -> Result<(f64, f64)> {
    Ok((model.quantile(0.001)?.max(1e-6), model.quantile(0.999)?))
}

/// `n_points` equally spaced prices over `range`, plus one row per atom
/// term, sorted by price.
pub fn profile_rows(
    solution: &HedgeSolution,
    problem: &HedgeProblem,
    range: (f64, f64),
    n_points: usize,
) -> Result<Vec<ProfileRow>> {
    let (lo, hi) = range;
    if n_points < 2 {
        return Err(HedgeError::Domain(format!("n_points = {n_points} must be >= 2")));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(HedgeError::Domain(format!("price range [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let mut rows = Vec::with_capacity(n_points + solution.payoff.atoms().len());
    for i in 0..n_points {
        let s = if i + 1 == n_points { hi } else { lo + (hi - lo) * i as f64 / (n_points - 1) as f64 };
        rows.push(ProfileRow::at(solution, problem, s)?);
    }
    for atom in solution.payoff.atoms() {
        rows.push(ProfileRow::at(solution, problem, atom.price)?);
    }
    rows.sort_by(|a, b| a.s.total_cmp(&b.s));
    Ok(rows)
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILE_HEADER)?;
    for r in rows {
        w.write_record([r.s, r.h, r.l, r.payoff, r.shortfall, r.success_ratio].map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PROFILE_HEADER {
        return Err(HedgeError::Parse(format!("unexpected profile header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec.iter().map(parse17).collect::<Result<_>>()?;
        if v.len() != 6 {
            return Err(HedgeError::Dimension { expected: 6, found: v.len() });
        }
        rows.push(ProfileRow { s: v[0], h: v[1], l: v[2], payoff: v[3], shortfall: v[4], success_ratio: v[5] });
    }
    Ok(rows)
}

/// Sweep over `range` (default: [`default_range`]) and write the CSV to
/// `path`.
pub fn export_profile(
    solution: &HedgeSolution,
    problem: &HedgeProblem,
    range: Option<(f64, f64)>,
    n_points: usize,
    path: &Path,
) -> Result<Vec<ProfileRow>> {
    let range = match range {
        Some(r) => r,
        None => default_range(&problem.model)?,
    };
    let rows = profile_rows(solution, problem, range, n_points)?;
    let file = std::fs::File::create(path)?;
    write_profile_csv(&rows, std::io::BufWriter::new(file))?;
    Ok(rows)
}
