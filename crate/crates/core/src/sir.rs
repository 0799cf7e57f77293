//! Sampling importance resampling over the variance pair and the full
//! dynamic calibration pipeline.
//!
//! Candidates `Γ = (σ²_E, σ²_W)` are drawn from the prior, so the importance
//! weight of a candidate is its first-stage predictive log-likelihood.
//! Evaluation runs in two passes: every candidate is filtered once to get its
//! likelihood, then only the resampled candidates are filtered again to
//! produce per-time inverse predictions and posterior draws.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dlrm::InfoDesign;
use crate::dlrm::InfoFilter;
use crate::error::{Error, Result};
use crate::inverse::{draw_x0, invert_quadratic, local_x_variance, posterior_from_variance, InversionContext};
use crate::model::{
    center_scale, CalibrationPosterior, DesignMatrix, PosteriorFlags, ResponseScale, ScalingTransform, VariancePair,
};
use crate::rng::{stream, Purpose};
use crate::stats::{mean, quantile_sorted, sort_floats, variance};

/// Smallest default `α_E`, in standardized response units.
pub const ALPHA_E_FLOOR: f64 = 1e-8;

/// Candidates with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub pairs: Vec<VariancePair>,
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `M` draws of `σ²_E ~ U(0, α_E)`, `σ²_W | σ²_E ~ U(0, σ²_E)`.
pub fn sample_prior<R: Rng + ?Sized>(alpha_e: f64, m: usize, rng: &mut R) -> Vec<VariancePair> {
    (0..m)
        .map(|_| {
            // random::<f64>() lies in [0, 1); flip to (0, 1] style open support
            // by rejecting exact zeros.
            let mut u = 0.0;
            while u == 0.0 {
                u = rng.random::<f64>();
            }
            let s2e = alpha_e * u;
            let mut v = 0.0;
            while v == 0.0 {
                v = rng.random::<f64>();
            }
            VariancePair {
                sigma2_e: s2e,
                sigma2_w: s2e * v,
            }
        })
        .collect()
}

/// Normalized probabilities from log-weights by log-sum-exp.
pub fn weight_candidates(log_liks: &[f64]) -> Result<Vec<f64>> {
    let max = log_liks
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let w: Vec<f64> = log_liks
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Multinomial resampling with replacement by inverse CDF; indices are 0-based.
pub fn resample<R: Rng + ?Sized>(probs: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u);
            // Guard against round-off at the top of the CDF and zero-mass ties.
            let i = i.min(last_positive);
            if probs[i] > 0.0 {
                i
            } else {
                (i..probs.len()).find(|&k| probs[k] > 0.0).unwrap_or(last_positive)
            }
        })
        .collect()
}

/// Settings for [`dynamic_calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynCalConfig {
    /// Upper bound of the `σ²_E` prior in original response units; `None`
    /// uses ten times the pooled residual variance of an OLS pre-fit.
    #[serde(default)]
    pub alpha_e: Option<f64>,
    /// Number of prior candidates `M`.
    pub candidates: usize,
    /// Number of resampled candidates `N`.
    pub resample: usize,
    /// Initial state mean, scaled units.
    #[serde(default = "default_m0")]
    pub m0: [f64; 3],
    /// Initial state covariance is `c0_scale · I`.
    #[serde(default = "default_c0_scale")]
    pub c0_scale: f64,
    pub seed: u64,
    /// Keep the `N` draws per time step in the output.
    #[serde(default)]
    pub keep_samples: bool,
}

fn default_m0() -> [f64; 3] {
    [1.0; 3]
}

fn default_c0_scale() -> f64 {
    100.0
}

impl Default for DynCalConfig {
    fn default() -> Self {
        DynCalConfig {
            alpha_e: None,
            candidates: 1000,
            resample: 200,
            m0: default_m0(),
            c0_scale: default_c0_scale(),
            seed: 0,
            keep_samples: false,
        }
    }
}

/// Output of [`dynamic_calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub config: DynCalConfig,
    pub scaling: ScalingTransform,
    pub response: ResponseScale,
    /// `α_E` actually used, in standardized response units.
    pub alpha_e: f64,
    pub candidates: CandidateSet,
    /// Resampled candidate indices (0-based), length `N`.
    pub resampled: Vec<usize>,
    pub posteriors: Vec<CalibrationPosterior>,
    /// Candidates whose filter failed and received zero weight.
    pub failed_candidates: usize,
}

impl CalibrationRun {
    pub fn medians(&self) -> Vec<f64> {
        self.posteriors.iter().map(|p| p.median).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.posteriors.iter().map(|p| p.lower95).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.posteriors.iter().map(|p| p.upper95).collect()
    }

    /// Mean `σ²_E` over the resampled candidates, original response units.
    pub fn resampled_sigma2_e(&self) -> f64 {
        let s: f64 = self
            .resampled
            .iter()
            .map(|&i| self.candidates.pairs[i].sigma2_e)
            .sum();
        self.response.variance_to_original(s / self.resampled.len() as f64)
    }
}

/// Per-candidate, per-time quantities needed to draw the unknown reference.
#[derive(Debug, Clone, Copy)]
struct StepTrack {
    mu: f64,
    sigma2: f64,
    lo: f64,
    hi: f64,
    no_root: bool,
    outside: bool,
}

/// Ten times the pooled OLS residual variance of the standardized responses.
fn default_alpha_e(refs_scaled: &DesignMatrix, ys: &[Vec<f64>]) -> f64 {
    let r = refs_scaled.r();
    let t_len = ys.len();
    let mut ybar = vec![0.0; r];
    for y in ys {
        for (acc, v) in ybar.iter_mut().zip(y) {
            *acc += v;
        }
    }
    ybar.iter_mut().for_each(|v| *v /= t_len as f64);
    let x = refs_scaled.matrix();
    let xty = x.transpose() * nalgebra::DVector::from_vec(ybar);
    let beta = match (x.transpose() * x).cholesky() {
        Some(ch) => ch.solve(&xty),
        None => return 1.0,
    };
    let fitted = x * beta;
    let rss: f64 = ys
        .iter()
        .map(|y| y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    let dof = (t_len * r) as f64 - 3.0;
    let s2 = if dof > 0.0 { rss / dof } else { 0.0 };
    10.0 * s2.max(ALPHA_E_FLOOR)
}

fn pass1_log_lik(design: &InfoDesign, gamma: VariancePair, m0: Vector3<f64>, c0: Matrix3<f64>, ys: &[Vec<f64>]) -> f64 {
    let mut filter = InfoFilter::new(design, gamma, m0, c0);
    let mut total = 0.0;
    for y in ys {
        match filter.step(y) {
            Ok(s) => total += s.log_pred,
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

#[allow(clippy::too_many_arguments)]
fn pass2_track(
    design: &InfoDesign,
    gamma: VariancePair,
    m0: Vector3<f64>,
    c0: Matrix3<f64>,
    ys: &[Vec<f64>],
    y0: &[f64],
    tr: &ScalingTransform,
    domain: (f64, f64),
) -> Result<Vec<StepTrack>> {
    let mut filter = InfoFilter::new(design, gamma, m0, c0);
    let mut out = Vec::with_capacity(ys.len());
    for (t, (y, &y0t)) in ys.iter().zip(y0).enumerate() {
        let step = filter.step(y).map_err(|e| e.at(t))?;
        let ctx = InversionContext {
            beta1: filter.m[1],
            beta2: filter.m[2],
            y0: y0t,
            y_bar: mean(y),
            x_bar: tr.x_bar,
            x2_bar: tr.x2_bar,
            domain,
        };
        let (x_hat, no_root, outside) = match invert_quadratic(&ctx) {
            Ok(inv) => (inv.x_hat, false, !inv.in_domain),
            Err(Error::NoRealRoot { vertex }) => (vertex, true, !(vertex >= domain.0 && vertex <= domain.1)),
            Err(Error::FlatCurve) => (0.0, true, false),
            Err(e) => return Err(e.at(t)),
        };
        let slope = if no_root { 0.0 } else { ctx.slope(x_hat) };
        let s = local_x_variance(slope, ctx.beta2, step.response_variance);
        let (mu, sigma2) = posterior_from_variance(x_hat, s).map_err(|e| e.at(t))?;
        let (lo, hi) = ctx.admissible_interval();
        out.push(StepTrack {
            mu,
            sigma2,
            lo,
            hi,
            no_root,
            outside,
        });
    }
    Ok(out)
}

/// First-stage data prepared in standardized units with candidate likelihoods.
struct Prepared {
    scaled: DesignMatrix,
    tr: ScalingTransform,
    response: ResponseScale,
    ys_s: Vec<Vec<f64>>,
    info: InfoDesign,
    alpha_e: f64,
    m0: Vector3<f64>,
    c0: Matrix3<f64>,
    pairs: Vec<VariancePair>,
    log_liks: Vec<f64>,
}

fn prepare(design: &DesignMatrix, ys: &[Vec<f64>], cfg: &DynCalConfig) -> Result<Prepared> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("empty time series".into()));
    }
    if cfg.resample == 0 || cfg.candidates < cfg.resample {
        return Err(Error::InvalidArgument(format!(
            "need M >= N >= 1, got M = {}, N = {}",
            cfg.candidates, cfg.resample
        )));
    }
    if design.d() != 3 {
        return Err(Error::Shape("dynamic calibration needs a quadratic design".into()));
    }
    for (t, y) in ys.iter().enumerate() {
        if y.len() != design.r() {
            return Err(Error::Shape(format!("Y_t has length {} but X has {} rows", y.len(), design.r())).at(t));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response".into()).at(t));
        }
    }
    if !(cfg.c0_scale > 0.0) || cfg.m0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("initial state must be finite with positive variance".into()));
    }

    let (scaled, tr) = center_scale(design)?;
    let response = ResponseScale::from_responses(ys.iter().flatten());
    let ys_s: Vec<Vec<f64>> = ys.iter().map(|y| y.iter().map(|&v| response.apply(v)).collect()).collect();
    let info = InfoDesign::new(&scaled)?;

    let alpha_e = match cfg.alpha_e {
        Some(a) if a > 0.0 && a.is_finite() => response.variance_from_original(a),
        Some(a) => return Err(Error::InvalidArgument(format!("alpha_E must be positive, got {a}"))),
        None => default_alpha_e(&scaled, &ys_s),
    };

    let m0 = Vector3::from(cfg.m0);
    let c0 = Matrix3::identity() * cfg.c0_scale;

    let pairs = sample_prior(alpha_e, cfg.candidates, &mut stream(cfg.seed, Purpose::Prior, 0));
    let log_liks: Vec<f64> = pairs
        .par_iter()
        .map(|&g| pass1_log_lik(&info, g, m0, c0, &ys_s))
        .collect();
    Ok(Prepared {
        scaled,
        tr,
        response,
        ys_s,
        info,
        alpha_e,
        m0,
        c0,
        pairs,
        log_liks,
    })
}

/// Filtered coefficient means `m_t` in original units under the candidate
/// with the highest first-stage likelihood.
pub fn filtered_coefficients(design: &DesignMatrix, ys: &[Vec<f64>], cfg: &DynCalConfig) -> Result<Vec<[f64; 3]>> {
    let p = prepare(design, ys, cfg)?;
    let best = p
        .log_liks
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .fold(None, |acc: Option<(usize, f64)>, (i, &l)| match acc {
            Some((_, b)) if b >= l => acc,
            _ => Some((i, l)),
        })
        .ok_or(Error::DegenerateWeights)?
        .0;
    let mut filter = InfoFilter::new(&p.info, p.pairs[best], p.m0, p.c0);
    let (c, s) = (p.tr.center, p.tr.scale);
    let (yc, ys_) = (p.response.center, p.response.scale);
    p.ys_s
        .iter()
        .enumerate()
        .map(|(t, y)| {
            filter.step(y).map_err(|e| e.at(t))?;
            let [b0, b1, b2] = [filter.m[0], filter.m[1], filter.m[2]];
            Ok([
                yc + ys_ * (b0 - b1 * c / s + b2 * c * c / (s * s)),
                ys_ * (b1 / s - 2.0 * b2 * c / (s * s)),
                ys_ * b2 / (s * s),
            ])
        })
        .collect()
}

/// Runs the dynamic calibration pipeline.
///
/// `ys[t]` holds the `r` first-stage responses at time `t` and `y0[t]` the
/// second-stage response, both in original units. Posterior summaries are
/// returned in original reference units.
pub fn dynamic_calibrate(
    design: &DesignMatrix,
    ys: &[Vec<f64>],
    y0: &[f64],
    cfg: &DynCalConfig,
) -> Result<CalibrationRun> {
    let t_len = ys.len();
    if y0.len() != t_len {
        return Err(Error::Shape(format!(
            "{} first-stage steps but {} second-stage values",
            t_len,
            y0.len()
        )));
    }
    if let Some(t) = y0.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite response".into()).at(t));
    }
    let Prepared {
        scaled,
        tr,
        response,
        ys_s,
        info,
        alpha_e,
        m0,
        c0,
        pairs,
        log_liks,
    } = prepare(design, ys, cfg)?;
    let y0_s: Vec<f64> = y0.iter().map(|&v| response.apply(v)).collect();
    let domain = (scaled.refs()[0], scaled.refs()[scaled.r() - 1]);
    let failed = log_liks.iter().filter(|v| !v.is_finite()).count();
    let probs = weight_candidates(&log_liks)?;
    let resampled = resample(&probs, cfg.resample, &mut stream(cfg.seed, Purpose::Resample, 0));

    let mut unique = resampled.clone();
    unique.sort_unstable();
    unique.dedup();
    let tracks: Vec<Vec<StepTrack>> = unique
        .par_iter()
        .map(|&i| pass2_track(&info, pairs[i], m0, c0, &ys_s, &y0_s, &tr, domain))
        .collect::<Result<_>>()?;
    let track_of = |cand: usize| &tracks[unique.binary_search(&cand).expect("resampled index is unique-listed")];

    // One fresh draw per slot per time, each slot on its own stream.
    let draws: Vec<(Vec<f64>, Vec<i8>)> = resampled
        .par_iter()
        .enumerate()
        .map(|(j, &cand)| {
            let mut rng = stream(cfg.seed, Purpose::PosteriorDraw, j as u64);
            let track = track_of(cand);
            let mut xs = Vec::with_capacity(t_len);
            let mut clamp = Vec::with_capacity(t_len);
            for s in track {
                let x = draw_x0(s.mu, s.sigma2, &mut rng);
                if x < s.lo {
                    xs.push(s.lo);
                    clamp.push(-1);
                } else if x > s.hi {
                    xs.push(s.hi);
                    clamp.push(1);
                } else {
                    xs.push(x);
                    clamp.push(0);
                }
            }
            (xs, clamp)
        })
        .collect();

    let n = resampled.len();
    let tail = 0.025 * n as f64;
    let posteriors: Vec<CalibrationPosterior> = (0..t_len)
        .map(|t| {
            let mut col: Vec<f64> = draws.iter().map(|(xs, _)| xs[t]).collect();
            let mu = mean(&col);
            let sigma2 = variance(&col);
            let below = draws.iter().filter(|(_, c)| c[t] < 0).count() as f64;
            let above = draws.iter().filter(|(_, c)| c[t] > 0).count() as f64;
            let no_root = resampled.iter().filter(|&&c| track_of(c)[t].no_root).count() as f64;
            let outside = resampled.iter().filter(|&&c| track_of(c)[t].outside).count() as f64;
            sort_floats(&mut col);
            let median = tr.rescale_value(quantile_sorted(&col, 0.5));
            let lower95 = tr.rescale_value(quantile_sorted(&col, 0.025));
            let upper95 = tr.rescale_value(quantile_sorted(&col, 0.975));
            let samples = cfg
                .keep_samples
                .then(|| draws.iter().map(|(xs, _)| tr.rescale_value(xs[t])).collect());
            CalibrationPosterior {
                t,
                mu,
                sigma2,
                samples,
                median,
                lower95,
                upper95,
                flags: PosteriorFlags {
                    no_real_root: no_root / n as f64,
                    outside_domain: outside / n as f64,
                    censored_lower: below > tail,
                    censored_upper: above > tail,
                },
            }
        })
        .collect();

    Ok(CalibrationRun {
        config: cfg.clone(),
        scaling: tr,
        response,
        alpha_e,
        candidates: CandidateSet {
            pairs,
            log_weights: log_liks,
            probs,
        },
        resampled,
        posteriors,
        failed_candidates: failed,
    })
}
