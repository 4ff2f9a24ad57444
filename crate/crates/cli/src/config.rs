//! Run configuration: a TOML file with `[model]`, `[claim]`, `[run]` and
//! `[verify]` sections, overridden field by field from the command line.

use qhedge_core::{Criterion, HedgeError, HedgeProblem, Model, ModelBs, ModelEp};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub s0: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma_drift: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSection {
    pub strike: Option<f64>,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub capital: Option<f64>,
    pub criterion: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub claim: ClaimSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub verify: VerifySection,
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GRID_N: usize = 100_000;

fn missing(field: &str, flag: &str) -> HedgeError {
    HedgeError::Domain(format!("missing {field} (flag {flag})"))
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HedgeError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| HedgeError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self.model, other.model, kind, s0, alpha, sigma, lambda, gamma_drift, horizon);
        overlay!(self.claim, other.claim, strike, cap);
        overlay!(self.run, other.run, capital, criterion, out);
        overlay!(self.verify, other.verify, mc_samples, seed, grid_n);
    }

    pub fn model(&self) -> Result<Model, HedgeError> {
        let m = &self.model;
        let horizon = m.horizon.ok_or_else(|| missing("model.horizon", "-T"))?;
        match m.kind.as_deref().unwrap_or("bs") {
            "bs" => Ok(Model::Bs(ModelBs::new(
                m.s0.ok_or_else(|| missing("model.s0", "--s0"))?,
                m.alpha.ok_or_else(|| missing("model.alpha", "--alpha"))?,
                m.sigma.ok_or_else(|| missing("model.sigma", "--sigma"))?,
                horizon,
            )?)),
            "ep" => Ok(Model::Ep(ModelEp::new(
                m.lambda.ok_or_else(|| missing("model.lambda", "--lambda"))?,
                m.gamma_drift.ok_or_else(|| missing("model.gamma_drift", "--gamma-drift"))?,
                horizon,
            )?)),
            other => Err(HedgeError::Domain(format!("model.kind = {other:?} must be bs or ep"))),
        }
    }

    pub fn strike(&self) -> Result<f64, HedgeError> {
        self.claim.strike.ok_or_else(|| missing("claim.strike", "-K"))
    }

    pub fn criterion(&self) -> Result<Criterion, HedgeError> {
        self.run.criterion.as_deref().unwrap_or("gqh").parse()
    }

    pub fn problem(&self) -> Result<HedgeProblem, HedgeError> {
        HedgeProblem::new(
            self.model()?,
            self.strike()?,
            self.claim.cap.ok_or_else(|| missing("claim.cap", "-c"))?,
            self.run.capital.ok_or_else(|| missing("run.capital", "-x"))?,
            self.criterion()?,
        )
    }

    pub fn mc_samples(&self) -> usize {
        self.verify.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES)
    }

    pub fn seed(&self) -> u64 {
        self.verify.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn grid_n(&self) -> usize {
        self.verify.grid_n.unwrap_or(DEFAULT_GRID_N)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            model: ModelSection {
                kind: Some("bs".into()),
                s0: Some(100.0),
                alpha: Some(0.02),
                sigma: Some(0.2),
                horizon: Some(1.0),
                ..Default::default()
            },
            claim: ClaimSection { strike: Some(100.0), cap: Some(5.0) },
            run: RunSection { capital: Some(5.123456789012345), criterion: Some("qh".into()), out: None },
            verify: VerifySection { mc_samples: Some(1000), seed: Some(7), grid_n: None },
        }
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let cfg = sample();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.problem().unwrap(), cfg.problem().unwrap());
    }

    #[test]
    fn overlay_prefers_flags() {
        let mut cfg = sample();
        let flags = RunConfig {
            claim: ClaimSection { strike: None, cap: Some(2.0) },
            ..Default::default()
        };
        cfg.overlay(&flags);
        assert_eq!(cfg.claim.cap, Some(2.0));
        assert_eq!(cfg.claim.strike, Some(100.0));
    }

    #[test]
    fn missing_and_invalid_fields_are_named() {
        let mut cfg = sample();
        cfg.model.sigma = None;
        assert!(cfg.model().unwrap_err().to_string().contains("model.sigma"));
        cfg.model.sigma = Some(-1.0);
        assert!(cfg.model().unwrap_err().to_string().contains("sigma"));
        assert!(toml::from_str::<RunConfig>("[model]\nvol = 1.0\n").is_err());
    }
}
