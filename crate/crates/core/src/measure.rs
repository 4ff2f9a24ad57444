//! Finite probability spaces, tests, expectations and shortfall constraints.

use crate::error::{HedgeError, Result};
use crate::numeric::{compensated_sum, fmt17, parse17};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Weights below this are rejected: likelihood ratios of such atoms overflow.
pub const MIN_ATOM_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    P,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub state: f64,
    pub p: f64,
    pub q: f64,
}

/// A finite space carrying a probability `P` and a finite measure `Q`
/// (not necessarily normalized, so `dQ̂ = H dQ` fits too), both charging
/// every atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSpace {
    atoms: Vec<Atom>,
}

impl DiscreteSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(HedgeError::InvalidSpace("no atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !a.state.is_finite() {
                return Err(HedgeError::InvalidSpace(format!("atom {i}: non-finite state")));
            }
            if !(a.p.is_finite() && a.p >= MIN_ATOM_WEIGHT) {
                return Err(HedgeError::InvalidSpace(format!(
                    "atom {i}: p weight {} must be finite and >= {MIN_ATOM_WEIGHT:e}",
                    a.p
                )));
            }
            if !(a.q.is_finite() && a.q >= MIN_ATOM_WEIGHT) {
                return Err(HedgeError::InvalidSpace(format!(
                    "atom {i}: q weight {} must be finite and >= {MIN_ATOM_WEIGHT:e}",
                    a.q
                )));
            }
        }
        let total_p = compensated_sum(atoms.iter().map(|a| a.p));
        if (total_p - 1.0).abs() > 1e-12 {
            return Err(HedgeError::InvalidSpace(format!(
                "p weights sum to {total_p}, expected 1"
            )));
        }
        let total_q = compensated_sum(atoms.iter().map(|a| a.q));
        if !total_q.is_finite() {
            return Err(HedgeError::InvalidSpace("q weights sum is not finite".into()));
        }
        Ok(Self { atoms })
    }

    /// Convenience constructor from parallel weight vectors; states are the
    /// atom indices.
    pub fn from_weights(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(HedgeError::Dimension {
                expected: p.len(),
                found: q.len(),
            });
        }
        Self::new(
            p.iter()
                .zip(q)
                .enumerate()
                .map(|(i, (&p, &q))| Atom { state: i as f64, p, q })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self, measure: Measure) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(move |a| match measure {
            Measure::P => a.p,
            Measure::Q => a.q,
        })
    }

    pub fn total_mass(&self, measure: Measure) -> f64 {
        compensated_sum(self.weights(measure))
    }

    /// `dP/dQ` per atom.
    pub fn likelihood_ratios(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.p / a.q).collect()
    }

    pub fn expect(&self, measure: Measure, values: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        Ok(compensated_sum(
            self.weights(measure).zip(values).map(|(w, v)| w * v),
        ))
    }

    /// Write as CSV with header `state,p,q`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "state,p,q")?;
        for a in &self.atoms {
            writeln!(out, "{},{},{}", fmt17(a.state), fmt17(a.p), fmt17(a.q))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        Ok(read_space_columns(input)?.0)
    }
}

/// Read a space file, also returning the optional `floor` column.
pub fn read_space_columns<R: Read>(input: R) -> Result<(DiscreteSpace, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(is), Some(ip), Some(iq)) = (col("state"), col("p"), col("q")) else {
        return Err(HedgeError::Parse(
            "space file needs columns state, p, q".into(),
        ));
    };
    let ifloor = col("floor");
    let mut atoms = Vec::new();
    let mut floor = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            parse17(rec.get(i).ok_or_else(|| HedgeError::Parse("short record".into()))?)
        };
        atoms.push(Atom {
            state: field(is)?,
            p: field(ip)?,
            q: field(iq)?,
        });
        if let Some(i) = ifloor {
            floor.push(field(i)?);
        }
    }
    let space = DiscreteSpace::new(atoms)?;
    Ok((space, ifloor.map(|_| floor)))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(HedgeError::Dimension { expected, found });
    }
    Ok(())
}

/// Free-function form of [`DiscreteSpace::expect`].
pub fn expect(space: &DiscreteSpace, measure: Measure, values: &[f64]) -> Result<f64> {
    space.expect(measure, values)
}

/// A `[0, 1]`-valued test per atom together with its rejection-threshold
/// floor, `floor ≤ values ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTest {
    values: Vec<f64>,
    floor: Vec<f64>,
}

impl ConditionalTest {
    pub fn new(values: Vec<f64>, floor: Vec<f64>) -> Result<Self> {
        check_len(floor.len(), values.len())?;
        for (i, (&v, &f)) in values.iter().zip(&floor).enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(HedgeError::InvalidTest(format!("atom {i}: floor {f} outside [0, 1]")));
            }
            if !(f..=1.0).contains(&v) {
                return Err(HedgeError::InvalidTest(format!(
                    "atom {i}: value {v} outside [{f}, 1]"
                )));
            }
        }
        Ok(Self { values, floor })
    }

    /// The test equal to its floor.
    pub fn at_floor(floor: Vec<f64>) -> Result<Self> {
        Self::new(floor.clone(), floor)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> &[f64] {
        &self.floor
    }
}

/// `1 ∧ X/H`; a zero claim counts as fully hedged.
pub fn success_ratio(portfolio_value: f64, claim_value: f64) -> Result<f64> {
    if portfolio_value < 0.0 || claim_value < 0.0 {
        return Err(HedgeError::Domain(format!(
            "success ratio needs nonnegative inputs, got X = {portfolio_value}, H = {claim_value}"
        )));
    }
    if claim_value == 0.0 {
        return Ok(1.0);
    }
    Ok((portfolio_value / claim_value).min(1.0))
}

/// `(H − L)/H`, zero on `{H = 0}`.
pub fn rejection_threshold(claim_value: f64, cap_value: f64) -> Result<f64> {
    if cap_value < 0.0 {
        return Err(HedgeError::Domain(format!("negative cap {cap_value}")));
    }
    if cap_value > claim_value {
        return Err(HedgeError::ConstraintViolation(format!(
            "cap {cap_value} exceeds claim {claim_value}"
        )));
    }
    if claim_value == 0.0 {
        return Ok(0.0);
    }
    Ok(((claim_value - cap_value) / claim_value).clamp(0.0, 1.0))
}

/// Shortfall constraint `L` as a function of the terminal price and claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShortfallSpec {
    /// `L = H`: shortfall unconstrained.
    Full,
    /// `L = 0`: no shortfall allowed.
    Zero,
    /// `L = c ∧ H`.
    Cap { c: f64 },
    /// `L = (c ∧ H)` outside `[a, b]`, zero inside.
    BandCap { c: f64, a: f64, b: f64 },
    /// `L = c ∧ H` on `[a, b]`, `H` outside.
    OutsideBandFull { c: f64, a: f64, b: f64 },
    /// `L = (1 − α) H`: only `αH` must be hedged.
    Recovery { alpha: f64 },
}

impl ShortfallSpec {
    pub fn full() -> Self {
        Self::Full
    }

    pub fn zero() -> Self {
        Self::Zero
    }

    pub fn cap(c: f64) -> Result<Self> {
        check_cap(c)?;
        Ok(Self::Cap { c })
    }

    pub fn band_cap(c: f64, a: f64, b: f64) -> Result<Self> {
        check_cap(c)?;
        check_band(a, b)?;
        Ok(Self::BandCap { c, a, b })
    }

    pub fn outside_band_full(c: f64, a: f64, b: f64) -> Result<Self> {
        check_cap(c)?;
        check_band(a, b)?;
        Ok(Self::OutsideBandFull { c, a, b })
    }

    pub fn recovery(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(HedgeError::Domain(format!("recovery rate {alpha} outside [0, 1]")));
        }
        Ok(Self::Recovery { alpha })
    }

    /// Evaluate `L(ω)` from the terminal price and the claim value `H(ω)`.
    pub fn eval(&self, terminal_price: f64, claim_value: f64) -> f64 {
        let h = claim_value.max(0.0);
        let l = match *self {
            Self::Full => h,
            Self::Zero => 0.0,
            Self::Cap { c } => c.min(h),
            Self::BandCap { c, a, b } => {
                if terminal_price < a || terminal_price > b {
                    c.min(h)
                } else {
                    0.0
                }
            }
            Self::OutsideBandFull { c, a, b } => {
                if (a..=b).contains(&terminal_price) {
                    c.min(h)
                } else {
                    h
                }
            }
            Self::Recovery { alpha } => (1.0 - alpha) * h,
        };
        l.clamp(0.0, h)
    }
}

fn check_cap(c: f64) -> Result<()> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(HedgeError::Domain(format!("cap c = {c} must be finite and >= 0")));
    }
    Ok(())
}

fn check_band(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err(HedgeError::Domain(format!("band [{a}, {b}] needs 0 < a <= b < inf")));
    }
    Ok(())
}

pub fn eval_constraint(spec: &ShortfallSpec, terminal_price: f64, claim_value: f64) -> f64 {
    spec.eval(terminal_price, claim_value)
}
