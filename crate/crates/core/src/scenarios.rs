//! End-to-end worked scenarios: cadmium spectroscopy, radiometer three- vs
//! five-point models, calibration near the vertex, and shocked systems.

use serde::{Deserialize, Serialize};

use crate::campaign::static_series;
use crate::datasets::{
    cd_pairs, cd_replay, radiometer_series, select_channels, CD_TRUE_X0, CD_UNKNOWN, RADIOMETER_3PT, RADIOMETER_REFS,
    RADIOMETER_T, RADIOMETER_TRUE_X0, RADIOMETER_Y0,
};
use crate::error::Result;
use crate::metrics::{replication_metrics, ReplicationResult};
use crate::model::{build_design, DesignMatrix};
use crate::rng::derive_seed;
use crate::simgen::{simulate, BetaMode, ShockWindow, SignProfile, SimScenario, X0Spec, SCHEME_3, STUDY_BETA};
use crate::sir::{dynamic_calibrate, filtered_coefficients, CalibrationRun, DynCalConfig};
use crate::static_calib::{fit_ols_quadratic, lundberg_interval, static_estimate, OlsFit, StaticEstimate};
use crate::stats::{mean, variance};

/// Sampler settings shared by the scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExampleOptions {
    pub seed: u64,
    pub candidates: usize,
    pub resample: usize,
    /// Overrides the scenario's own horizon.
    pub t_len: Option<usize>,
    pub alpha_e: Option<f64>,
    /// Window layout of the shock scenario.
    pub shock_layout: ShockLayout,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            seed: 2024,
            candidates: 1000,
            resample: 200,
            t_len: None,
            alpha_e: None,
            shock_layout: ShockLayout::Short,
        }
    }
}

impl ExampleOptions {
    fn sampler(&self, salt: u64) -> DynCalConfig {
        DynCalConfig {
            alpha_e: self.alpha_e,
            candidates: self.candidates,
            resample: self.resample,
            seed: derive_seed(self.seed, salt, 1),
            ..Default::default()
        }
    }
}

/// Inputs and truth of a scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub design: DesignMatrix,
    pub ys: Vec<Vec<f64>>,
    pub y0: Vec<f64>,
    pub x0_true: Vec<f64>,
}

/// Summary statistics of a posterior median series against the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub mean_median: f64,
    pub sd_median: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub metrics: ReplicationResult,
}

fn summarize(run: &CalibrationRun, truth: &[f64]) -> Result<SeriesSummary> {
    let med = run.medians();
    let lo = run.lower();
    let hi = run.upper();
    Ok(SeriesSummary {
        mean_median: mean(&med),
        sd_median: variance(&med).sqrt() * (med.len() as f64 / (med.len().max(2) - 1) as f64).sqrt(),
        mean_lower: mean(&lo),
        mean_upper: mean(&hi),
        metrics: replication_metrics(&med, &lo, &hi, truth)?,
    })
}

pub struct CdReport {
    pub data: ScenarioData,
    /// Fit to the full standards table.
    pub fit: OlsFit,
    pub xi_star: f64,
    pub lundberg: StaticEstimate,
    pub run: CalibrationRun,
    pub summary: SeriesSummary,
}

/// Default horizon of the Cd replay.
pub const CD_T: usize = 500;

/// Static analysis of the standards table plus the dynamic method on a replay.
pub fn run_cd(opts: &ExampleOptions) -> Result<CdReport> {
    let (x, y) = cd_pairs();
    let fit = fit_ols_quadratic(&x, &y)?;
    let y0_bar = mean(&CD_UNKNOWN);
    let xi_star = static_estimate(&fit, y0_bar)?;
    let lundberg = lundberg_interval(&fit, xi_star, CD_UNKNOWN.len(), 0.05)?;

    let t_len = opts.t_len.unwrap_or(CD_T);
    let (design, ys, y0) = cd_replay(t_len, derive_seed(opts.seed, 10, 0))?;
    let run = dynamic_calibrate(&design, &ys, &y0, &opts.sampler(10))?;
    let x0_true = vec![CD_TRUE_X0; t_len];
    let summary = summarize(&run, &x0_true)?;
    Ok(CdReport {
        data: ScenarioData {
            design,
            ys,
            y0,
            x0_true,
        },
        fit,
        xi_star,
        lundberg,
        run,
        summary,
    })
}

pub struct RadiometerReport {
    pub points: usize,
    pub data: ScenarioData,
    pub run: CalibrationRun,
    pub summary: SeriesSummary,
}

/// Dynamic calibration of the unknown scene with the three- or five-point
/// reference set. Both sets share the same generated outputs.
pub fn run_radiometer(points: usize, opts: &ExampleOptions) -> Result<RadiometerReport> {
    let channels: Vec<usize> = match points {
        3 => RADIOMETER_3PT.to_vec(),
        5 => (0..5).collect(),
        other => {
            return Err(crate::Error::InvalidArgument(format!(
                "radiometer model has 3 or 5 points, got {other}"
            )))
        }
    };
    let t_len = opts.t_len.unwrap_or(RADIOMETER_T);
    let series = radiometer_series(t_len, derive_seed(opts.seed, 20, 0));
    let refs: Vec<f64> = channels.iter().map(|&k| RADIOMETER_REFS[k]).collect();
    let design = build_design(&refs)?;
    let ys = select_channels(&series, &channels);
    let y0 = vec![RADIOMETER_Y0; t_len];
    let run = dynamic_calibrate(&design, &ys, &y0, &opts.sampler(20 + points as u64))?;
    let x0_true = vec![RADIOMETER_TRUE_X0; t_len];
    let summary = summarize(&run, &x0_true)?;
    Ok(RadiometerReport {
        points,
        data: ScenarioData {
            design,
            ys,
            y0,
            x0_true,
        },
        run,
        summary,
    })
}

/// Reference temperature of the near-vertex target.
pub const VERTEX_X0: f64 = 508.0;

pub struct VertexReport {
    pub data: ScenarioData,
    pub run: CalibrationRun,
    pub summary: SeriesSummary,
    /// Fraction of steps whose upper limit is below the truth.
    pub upper_below_truth: f64,
    /// Fraction of steps flagged as censored.
    pub censored: f64,
    /// Mean vertex abscissa of the filtered curves.
    pub mean_vertex: f64,
}

/// Three-point radiometer data with the unknown's output taken from each
/// step's estimated curve at 508 K, close to the curve's maximum. The curve
/// uses the filtered slope coefficients and the step's mean response.
pub fn run_vertex(opts: &ExampleOptions) -> Result<VertexReport> {
    let t_len = opts.t_len.unwrap_or(RADIOMETER_T);
    let series = radiometer_series(t_len, derive_seed(opts.seed, 20, 0));
    let refs: Vec<f64> = RADIOMETER_3PT.iter().map(|&k| RADIOMETER_REFS[k]).collect();
    let design = build_design(&refs)?;
    let ys = select_channels(&series, &RADIOMETER_3PT);
    let sampler = opts.sampler(30);
    let betas = filtered_coefficients(&design, &ys, &sampler)?;
    // Intercept of each step's curve in the centred form: ȳ_t − β₁x̄ − β₂x̄².
    let x_bar = mean(&refs);
    let x2_bar = refs.iter().map(|x| x * x).sum::<f64>() / refs.len() as f64;
    let y0: Vec<f64> = betas
        .iter()
        .zip(&ys)
        .map(|(b, y)| mean(y) + b[1] * (VERTEX_X0 - x_bar) + b[2] * (VERTEX_X0 * VERTEX_X0 - x2_bar))
        .collect();
    let vertices: Vec<f64> = betas.iter().map(|b| -b[1] / (2.0 * b[2])).collect();
    let run = dynamic_calibrate(&design, &ys, &y0, &sampler)?;
    let x0_true = vec![VERTEX_X0; t_len];
    let summary = summarize(&run, &x0_true)?;
    let n = t_len as f64;
    let upper_below_truth = run.posteriors.iter().filter(|p| p.upper95 < VERTEX_X0).count() as f64 / n;
    let censored = run.posteriors.iter().filter(|p| p.flags.censored()).count() as f64 / n;
    Ok(VertexReport {
        data: ScenarioData {
            design,
            ys,
            y0,
            x0_true,
        },
        run,
        summary,
        upper_below_truth,
        censored,
        mean_vertex: mean(&vertices),
    })
}

/// Shock layouts: two 20-step windows, or two 100-step windows whose first
/// half contracts and second half stretches the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockLayout {
    #[default]
    Short,
    Long,
}

impl ShockLayout {
    pub fn windows(self) -> Vec<ShockWindow> {
        let (len, profile) = match self {
            ShockLayout::Short => (20, SignProfile::Constant),
            ShockLayout::Long => (100, SignProfile::HalfNegativeHalfPositive),
        };
        [250, 520]
            .into_iter()
            .map(|t_start| ShockWindow {
                t_start,
                t_len: len,
                gamma: None,
                sign_profile: profile,
            })
            .collect()
    }
}

/// Default horizon of the shock scenario.
pub const SHOCK_T: usize = 700;

pub struct ShockReport {
    pub data: ScenarioData,
    pub gammas: Vec<f64>,
    pub run: CalibrationRun,
    pub summary: SeriesSummary,
    /// Static per-step estimates (no intervals with three references).
    pub static_mse: f64,
    /// Interval width and coverage of the dynamic method inside and outside the windows.
    pub inside: (f64, f64),
    pub outside: (f64, f64),
}

pub fn run_shock(layout: ShockLayout, opts: &ExampleOptions) -> Result<ShockReport> {
    let t_len = opts.t_len.unwrap_or(SHOCK_T);
    let scn = SimScenario {
        scheme: SCHEME_3.to_vec(),
        beta_mean: STUDY_BETA,
        sigma2_e: 1e-5,
        sigma2_w: 5e-5,
        t_len,
        x0_true: X0Spec::Constant(25.0),
        beta_mode: BetaMode::IidAroundMean,
        shocks: layout.windows(),
        seed: derive_seed(opts.seed, 40, 0),
    };
    let sim = simulate(&scn)?;
    let run = dynamic_calibrate(&sim.design, &sim.ys, &sim.y0, &opts.sampler(40))?;
    let summary = summarize(&run, &sim.x0)?;
    let sc = static_series(&sim.design, &sim.ys, &sim.y0, 0.05)?;
    let static_mse = mean(
        &sc.est
            .iter()
            .zip(&sim.x0)
            .map(|(e, x)| (e - x).powi(2))
            .collect::<Vec<_>>(),
    );
    let split = |want_inside: bool| {
        let idx: Vec<usize> = (0..t_len).filter(|&t| (sim.gammas[t] != 1.0) == want_inside).collect();
        if idx.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let p = &run.posteriors;
        let w = idx.iter().map(|&t| p[t].upper95 - p[t].lower95).sum::<f64>() / idx.len() as f64;
        let c = idx
            .iter()
            .filter(|&&t| p[t].lower95 < sim.x0[t] && sim.x0[t] < p[t].upper95)
            .count() as f64
            / idx.len() as f64;
        (w, c)
    };
    let inside = split(true);
    let outside = split(false);
    Ok(ShockReport {
        data: ScenarioData {
            design: sim.design,
            ys: sim.ys,
            y0: sim.y0,
            x0_true: sim.x0,
        },
        gammas: sim.gammas,
        run,
        summary,
        static_mse,
        inside,
        outside,
    })
}
