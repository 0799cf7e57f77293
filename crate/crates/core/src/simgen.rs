//! Synthetic data: drifting coefficient paths, first- and second-stage
//! observations, multiplicative shocks and vertex geometry.
//!
//! Time indices are 0-based in vectors; shock windows are given with 1-based
//! start times to match the CSV `t` column.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_design, DesignMatrix};
use crate::rng::{stream, Purpose};

/// Coefficient truths of the simulation study (original units).
pub const STUDY_BETA: [f64; 3] = [-0.0007, 0.01858, -0.000117];

/// Reference schemes of the simulation study.
pub const SCHEME_3: [f64; 3] = [20.0, 90.0, 100.0];
pub const SCHEME_4: [f64; 4] = [20.0, 60.0, 90.0, 100.0];
pub const SCHEME_5: [f64; 5] = [20.0, 40.0, 60.0, 90.0, 100.0];

/// Range of the random multiplicative disturbance when none is fixed.
pub const GAMMA_RANGE: (f64, f64) = (1.5, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `β_t ~ N(β̄, W)` independently over time.
    #[default]
    IidAroundMean,
    /// `β_t = β_{t−1} + ω_t`, `β_0 = β̄`.
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignProfile {
    #[default]
    Constant,
    /// First half of the window contracts the curve (factor `1/γ`), second half stretches it.
    HalfNegativeHalfPositive,
}

/// A run of consecutive time steps whose curve is scaled about its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockWindow {
    /// First shocked time step, 1-based.
    pub t_start: usize,
    pub t_len: usize,
    /// Fixed factor; `None` draws `γ ~ U(1.5, 3)` per step.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub sign_profile: SignProfile,
}

/// Unknown reference values over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Constant(f64),
    Series(Vec<f64>),
}

impl X0Spec {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            X0Spec::Constant(v) => *v,
            X0Spec::Series(v) => v[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub scheme: Vec<f64>,
    pub beta_mean: [f64; 3],
    pub sigma2_e: f64,
    pub sigma2_w: f64,
    pub t_len: usize,
    pub x0_true: X0Spec,
    pub beta_mode: BetaMode,
    pub shocks: Vec<ShockWindow>,
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if !(self.sigma2_e >= 0.0 && self.sigma2_w >= 0.0) {
            return Err(Error::InvalidArgument("variances must be non-negative".into()));
        }
        if let X0Spec::Series(v) = &self.x0_true {
            if v.len() != self.t_len {
                return Err(Error::Shape(format!("x0 series has {} values for T = {}", v.len(), self.t_len)));
            }
        }
        validate_windows(&self.shocks, self.t_len)
    }
}

/// Vertex form `y = k + a(x − h)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexPoint {
    pub h: f64,
    pub k: f64,
    pub a: f64,
}

pub fn vertex_of(beta: &[f64; 3]) -> Result<VertexPoint> {
    let [b0, b1, b2] = *beta;
    if b2 == 0.0 {
        return Err(Error::NoVertex);
    }
    let h = -b1 / (2.0 * b2);
    Ok(VertexPoint {
        h,
        k: b0 + b1 * h + b2 * h * h,
        a: b2,
    })
}

/// Lower Cholesky factor of `W = σ²_W (X'X)⁻¹` on the original design.
fn system_factor(design: &DesignMatrix, sigma2_w: f64) -> Result<Matrix3<f64>> {
    if sigma2_w == 0.0 {
        return Ok(Matrix3::zeros());
    }
    let g = design.gram_inverse()?;
    let w = Matrix3::from_fn(|i, j| g[(i, j)] * sigma2_w);
    w.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::DegenerateDesign("system covariance is not positive definite".into()))
}

fn normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Coefficient path of length `T`.
pub fn gen_beta_path<R: Rng + ?Sized>(scn: &SimScenario, rng: &mut R) -> Result<Vec<[f64; 3]>> {
    let design = build_design(&scn.scheme)?;
    let l = system_factor(&design, scn.sigma2_w)?;
    let mean = Vector3::from(scn.beta_mean);
    let mut prev = mean;
    Ok((0..scn.t_len)
        .map(|_| {
            let w = l * normal3(rng);
            let b = match scn.beta_mode {
                BetaMode::IidAroundMean => mean + w,
                BetaMode::RandomWalk => prev + w,
            };
            prev = b;
            [b[0], b[1], b[2]]
        })
        .collect())
}

fn eval(b: &[f64; 3], x: f64) -> f64 {
    b[0] + b[1] * x + b[2] * x * x
}

/// `Y_t = Xβ_t + ε_t`, `ε_t ~ N(0, σ²_E I)`.
pub fn gen_first_stage<R: Rng + ?Sized>(scn: &SimScenario, beta_path: &[[f64; 3]], rng: &mut R) -> Vec<Vec<f64>> {
    let sd = scn.sigma2_e.sqrt();
    beta_path
        .iter()
        .map(|b| {
            scn.scheme
                .iter()
                .map(|&x| eval(b, x) + sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// `y₀t = β₀t + β₁t x₀t + β₂t x₀t² + ε₀t`, `ε₀t ~ N(0, σ²_E)`.
pub fn gen_second_stage<R: Rng + ?Sized>(scn: &SimScenario, beta_path: &[[f64; 3]], rng: &mut R) -> Vec<f64> {
    let sd = scn.sigma2_e.sqrt();
    beta_path
        .iter()
        .enumerate()
        .map(|(t, b)| eval(b, scn.x0_true.at(t)) + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn validate_windows(windows: &[ShockWindow], t_len: usize) -> Result<()> {
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(windows.len());
    for w in windows {
        if w.t_len == 0 || w.t_start == 0 {
            return Err(Error::InvalidShockSpec(format!(
                "window at t = {} must have t_start >= 1 and length >= 1",
                w.t_start
            )));
        }
        let end = w.t_start + w.t_len - 1;
        if end > t_len {
            return Err(Error::InvalidShockSpec(format!(
                "window {}..={} exceeds T = {}",
                w.t_start, end, t_len
            )));
        }
        if let Some(g) = w.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidShockSpec(format!("gamma must be positive, got {g}")));
            }
        }
        spans.push((w.t_start, end));
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[1].0 <= pair[0].1 {
            return Err(Error::InvalidShockSpec(format!(
                "windows starting at {} and {} overlap",
                pair[0].0, pair[1].0
            )));
        }
    }
    Ok(())
}

/// Scales the curve about its vertex inside each window: `β₂ ← γβ₂` with
/// `(h, k)` unchanged, so `y − k` is multiplied by `γ`. Returns the shocked
/// path and the factor applied at each step (1 outside windows).
pub fn apply_shocks<R: Rng + ?Sized>(
    path: &[[f64; 3]],
    windows: &[ShockWindow],
    rng: &mut R,
) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    validate_windows(windows, path.len())?;
    let mut out = path.to_vec();
    let mut gammas = vec![1.0; path.len()];
    let mut sorted = windows.to_vec();
    sorted.sort_by_key(|w| w.t_start);
    for w in &sorted {
        let first = w.t_start - 1;
        for i in 0..w.t_len {
            let t = first + i;
            let mut g = match w.gamma {
                Some(g) => g,
                None => rng.random_range(GAMMA_RANGE.0..=GAMMA_RANGE.1),
            };
            if w.sign_profile == SignProfile::HalfNegativeHalfPositive && i < w.t_len / 2 {
                g = 1.0 / g;
            }
            if g == 1.0 {
                continue;
            }
            let b = path[t];
            let v = vertex_of(&b)?;
            out[t] = [v.k + g * (b[0] - v.k), g * b[1], g * b[2]];
            gammas[t] = g;
        }
    }
    Ok((out, gammas))
}

/// Everything generated for one scenario.
#[derive(Debug, Clone)]
pub struct SimData {
    pub design: DesignMatrix,
    /// Coefficient path actually used to generate observations.
    pub betas: Vec<[f64; 3]>,
    pub gammas: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub y0: Vec<f64>,
    pub x0: Vec<f64>,
}

/// Generates a scenario with one independent stream per purpose, so adding
/// shocks leaves every unshocked step bit-identical.
pub fn simulate(scn: &SimScenario) -> Result<SimData> {
    scn.validate()?;
    let design = build_design(&scn.scheme)?;
    let path = gen_beta_path(scn, &mut stream(scn.seed, Purpose::BetaPath, 0))?;
    let (betas, gammas) = apply_shocks(&path, &scn.shocks, &mut stream(scn.seed, Purpose::Shock, 0))?;
    let ys = gen_first_stage(scn, &betas, &mut stream(scn.seed, Purpose::FirstStageNoise, 0));
    let y0 = gen_second_stage(scn, &betas, &mut stream(scn.seed, Purpose::SecondStageNoise, 0));
    let x0 = (0..scn.t_len).map(|t| scn.x0_true.at(t)).collect();
    Ok(SimData {
        design,
        betas,
        gammas,
        ys,
        y0,
        x0,
    })
}
