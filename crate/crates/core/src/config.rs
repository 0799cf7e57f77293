//! TOML run configuration.
//!
//! ```toml
//! mode = "calibrate"
//! seed = 7
//!
//! [calibrate]
//! first_stage = "first.csv"
//! second_stage = "second.csv"
//! refs = [20.0, 60.0, 90.0, 100.0]
//! candidates = 1000
//! resample = 200
//!
//! [campaign]
//! schemes = [[20.0, 60.0, 90.0, 100.0]]
//! t_len = 200
//! replications = 20
//!
//! [example]
//! shock_layout = "long"
//! ```
//!
//! Every table is optional and unknown keys are rejected. A top-level `seed`
//! overrides the seeds inside the tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::CampaignConfig;
use crate::error::{Error, Result};
use crate::scenarios::ExampleOptions;
use crate::sir::DynCalConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Calibrate,
    Simulate,
    Compare,
    ExampleCd,
    ExampleRadiometer,
    VertexStress,
    ShockStress,
}

/// Settings of `calibrate` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub first_stage: Option<PathBuf>,
    pub second_stage: Option<PathBuf>,
    /// Reference values; read from a numeric first-stage header when absent.
    pub refs: Option<Vec<f64>>,
    pub candidates: usize,
    pub resample: usize,
    pub alpha_e: Option<f64>,
    pub m0: [f64; 3],
    pub c0_scale: f64,
    pub seed: u64,
    /// Level of the static intervals in `compare` is `1 − alpha`.
    pub alpha: f64,
    /// Known reference value, used by `compare` to score both methods.
    pub x0_true: Option<f64>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        let d = DynCalConfig::default();
        CalibrateSection {
            first_stage: None,
            second_stage: None,
            refs: None,
            candidates: d.candidates,
            resample: d.resample,
            alpha_e: d.alpha_e,
            m0: d.m0,
            c0_scale: d.c0_scale,
            seed: d.seed,
            alpha: 0.05,
            x0_true: None,
        }
    }
}

impl CalibrateSection {
    pub fn sampler(&self) -> DynCalConfig {
        DynCalConfig {
            alpha_e: self.alpha_e,
            candidates: self.candidates,
            resample: self.resample,
            m0: self.m0,
            c0_scale: self.c0_scale,
            seed: self.seed,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub campaign: CampaignConfig,
    #[serde(default)]
    pub example: ExampleOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Input paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.calibrate.first_stage, &mut cfg.calibrate.second_stage]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Pushes a seed into every table.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.calibrate.seed = seed;
        self.campaign.seed = seed;
        self.example.seed = seed;
    }

    /// Checks everything a mode needs before any computation starts.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(Error::Config(format!(
                    "config declares mode {m:?} but {mode:?} was requested"
                )));
            }
        }
        let cfg_err = |e: Error| Error::Config(e.to_string());
        match mode {
            Mode::Calibrate | Mode::Compare => {
                let c = &self.calibrate;
                if c.first_stage.is_none() || c.second_stage.is_none() {
                    return Err(Error::Config("calibrate.first_stage and calibrate.second_stage are required".into()));
                }
                if c.resample == 0 || c.candidates < c.resample {
                    return Err(Error::Config("need calibrate.candidates >= calibrate.resample >= 1".into()));
                }
                if let Some(r) = &c.refs {
                    crate::model::build_design(r).map_err(cfg_err)?;
                }
                if matches!(c.alpha_e, Some(a) if !(a > 0.0 && a.is_finite())) {
                    return Err(Error::Config("calibrate.alpha_e must be positive".into()));
                }
                if !(c.c0_scale > 0.0) {
                    return Err(Error::Config("calibrate.c0_scale must be positive".into()));
                }
                if !(c.alpha > 0.0 && c.alpha < 1.0) {
                    return Err(Error::Config("calibrate.alpha must lie in (0, 1)".into()));
                }
            }
            Mode::Simulate => self.campaign.validate().map_err(cfg_err)?,
            _ => {
                let e = &self.example;
                if e.resample == 0 || e.candidates < e.resample {
                    return Err(Error::Config("need example.candidates >= example.resample >= 1".into()));
                }
                if e.t_len == Some(0) {
                    return Err(Error::Config("example.t_len must be positive".into()));
                }
                if matches!(e.alpha_e, Some(a) if !(a > 0.0 && a.is_finite())) {
                    return Err(Error::Config("example.alpha_e must be positive".into()));
                }
            }
        }
        Ok(())
    }
}
