//! Monte Carlo comparison of the dynamic method against the per-step static
//! estimator over a grid of schemes and variance pairs.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{campaign_summary, replication_metrics, CampaignSummary, ReplicationResult};
use crate::model::DesignMatrix;
use crate::rng::derive_seed;
use crate::simgen::{simulate, BetaMode, SimScenario, X0Spec, SCHEME_3, SCHEME_4, SCHEME_5, STUDY_BETA};
use crate::sir::{dynamic_calibrate, DynCalConfig};
use crate::static_calib::{delta_interval, fit_ols_quadratic, static_estimate};

/// Grid and sampler settings of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub schemes: Vec<Vec<f64>>,
    pub sigma2_e: Vec<f64>,
    pub sigma2_w: Vec<f64>,
    pub t_len: usize,
    pub replications: usize,
    pub candidates: usize,
    pub resample: usize,
    pub alpha_e: Option<f64>,
    pub x0: f64,
    pub beta_mean: [f64; 3],
    pub beta_mode: BetaMode,
    /// Interval level is `1 − alpha`.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            schemes: vec![SCHEME_3.to_vec(), SCHEME_4.to_vec(), SCHEME_5.to_vec()],
            sigma2_e: vec![1e-5, 1e-4, 1e-3],
            sigma2_w: vec![5e-5, 1e-4, 1e-3],
            t_len: 1000,
            replications: 100,
            candidates: 500,
            resample: 200,
            alpha_e: None,
            x0: 25.0,
            beta_mean: STUDY_BETA,
            beta_mode: BetaMode::IidAroundMean,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::EmptyCampaign);
        }
        if self.schemes.is_empty() || self.sigma2_e.is_empty() || self.sigma2_w.is_empty() {
            return Err(Error::InvalidArgument("campaign grid is empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.resample == 0 || self.candidates < self.resample {
            return Err(Error::InvalidArgument("need candidates >= resample >= 1".into()));
        }
        for s in &self.schemes {
            crate::model::build_design(s)?;
            if s.len() < 3 {
                return Err(Error::InsufficientReferences { needed: 3, got: s.len() });
            }
        }
        Ok(())
    }
}

/// Static summary; width and coverage are absent without residual degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticSummary {
    pub ramse: f64,
    pub aviw: Option<f64>,
    pub avcp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub scheme: Vec<f64>,
    pub sigma2_e: f64,
    pub sigma2_w: f64,
    pub dynamic: CampaignSummary,
    #[serde(rename = "static")]
    pub static_: StaticSummary,
}

/// Per-step static estimates with delta-method intervals at level `1 − alpha`.
///
/// Each step refits the quadratic to that step's `r` responses and uses the
/// residual standard deviation as `σ_y₀`. A step without a real root takes
/// the vertex abscissa with a zero-width interval. Intervals are `None` when
/// `r = 3`.
pub struct StaticSeries {
    pub est: Vec<f64>,
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn static_series(design: &DesignMatrix, ys: &[Vec<f64>], y0: &[f64], alpha: f64) -> Result<StaticSeries> {
    let refs = design.refs();
    let with_intervals = refs.len() > 3;
    let mut est = Vec::with_capacity(ys.len());
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mid = 0.5 * (refs[0] + refs[refs.len() - 1]);
    for (t, (y, &y0t)) in ys.iter().zip(y0).enumerate() {
        let fit = fit_ols_quadratic(refs, y).map_err(|e| e.at(t))?;
        let xi = match static_estimate(&fit, y0t) {
            Ok(v) => Some(v),
            Err(Error::NoRealRoot { .. }) | Err(Error::FlatCurve) => None,
            Err(e) => return Err(e.at(t)),
        };
        let point = xi.unwrap_or_else(|| {
            let b = fit.beta_hat;
            if b[2] != 0.0 {
                -b[1] / (2.0 * b[2])
            } else {
                mid
            }
        });
        est.push(point);
        if with_intervals {
            let s = fit.s().map_err(|e| e.at(t))?;
            let (l, h) = match xi.map(|_| delta_interval(&fit, y0t, s, alpha)) {
                Some(Ok(iv)) => (iv.ci_lo, iv.ci_hi),
                _ => (point, point),
            };
            lo.push(l);
            hi.push(h);
        }
    }
    Ok(StaticSeries {
        est,
        bounds: with_intervals.then_some((lo, hi)),
    })
}

struct RepOutcome {
    dynamic: ReplicationResult,
    static_: ReplicationResult,
    static_has_intervals: bool,
}

fn run_replication(cfg: &CampaignConfig, scheme: &[f64], s2e: f64, s2w: f64, seed: u64) -> Result<RepOutcome> {
    let scn = SimScenario {
        scheme: scheme.to_vec(),
        beta_mean: cfg.beta_mean,
        sigma2_e: s2e,
        sigma2_w: s2w,
        t_len: cfg.t_len,
        x0_true: X0Spec::Constant(cfg.x0),
        beta_mode: cfg.beta_mode,
        shocks: vec![],
        seed,
    };
    let data = simulate(&scn)?;
    let dc_cfg = DynCalConfig {
        alpha_e: cfg.alpha_e,
        candidates: cfg.candidates,
        resample: cfg.resample,
        seed: derive_seed(seed, 1, 0),
        ..Default::default()
    };
    let run = dynamic_calibrate(&data.design, &data.ys, &data.y0, &dc_cfg)?;
    let dynamic = replication_metrics(&run.medians(), &run.lower(), &run.upper(), &data.x0)?;

    let sc = static_series(&data.design, &data.ys, &data.y0, cfg.alpha)?;
    let (static_, has) = match &sc.bounds {
        Some((lo, hi)) => (replication_metrics(&sc.est, lo, hi, &data.x0)?, true),
        None => (replication_metrics(&sc.est, &sc.est, &sc.est, &data.x0)?, false),
    };
    Ok(RepOutcome {
        dynamic,
        static_,
        static_has_intervals: has,
    })
}

/// Runs every grid cell; cells are ordered by scheme, then `σ²_W`, then `σ²_E`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (i, scheme) in cfg.schemes.iter().enumerate() {
        for (j, &s2w) in cfg.sigma2_w.iter().enumerate() {
            for (k, &s2e) in cfg.sigma2_e.iter().enumerate() {
                cells.push(((i * 1000 + j) * 1000 + k, scheme.clone(), s2e, s2w));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<RepOutcome> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (id, scheme, s2e, s2w) = &cells[c];
            run_replication(cfg, scheme, *s2e, *s2w, derive_seed(cfg.seed, *id as u64, r as u64))
        })
        .collect::<Result<_>>()?;

    cells
        .iter()
        .enumerate()
        .map(|(c, (_, scheme, s2e, s2w))| {
            let reps = &outcomes[c * cfg.replications..(c + 1) * cfg.replications];
            let dyn_reps: Vec<ReplicationResult> = reps.iter().map(|o| o.dynamic.clone()).collect();
            let st_reps: Vec<ReplicationResult> = reps.iter().map(|o| o.static_.clone()).collect();
            let st = campaign_summary(&st_reps)?;
            let has = reps.iter().all(|o| o.static_has_intervals);
            Ok(CellResult {
                scheme: scheme.clone(),
                sigma2_e: *s2e,
                sigma2_w: *s2w,
                dynamic: campaign_summary(&dyn_reps)?,
                static_: StaticSummary {
                    ramse: st.ramse,
                    aviw: has.then_some(st.aviw),
                    avcp: has.then_some(st.avcp),
                },
            })
        })
        .collect()
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:.4}"))
}

fn scheme_label(s: &[f64]) -> String {
    let parts: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", parts.join(", "))
}

/// One text table per (scheme, `σ²_W`), rows by `σ²_E`.
pub fn format_tables(cells: &[CellResult]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < cells.len() {
        let head = &cells[i];
        let group: Vec<&CellResult> = cells[i..]
            .iter()
            .take_while(|c| c.scheme == head.scheme && c.sigma2_w == head.sigma2_w)
            .collect();
        let _ = writeln!(out, "References {}, sigma2_W = {:e}", scheme_label(&head.scheme), head.sigma2_w);
        let _ = writeln!(
            out,
            "{:>10} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
            "sigma2_E", "DC RAMSE", "DC AIW", "DC ACP", "SC RAMSE", "SC AIW", "SC ACP"
        );
        for c in &group {
            let _ = writeln!(
                out,
                "{:>10} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
                format!("{:e}", c.sigma2_e),
                fmt4(Some(c.dynamic.ramse)),
                fmt4(Some(c.dynamic.aviw)),
                fmt4(Some(c.dynamic.avcp)),
                fmt4(Some(c.static_.ramse)),
                fmt4(c.static_.aviw),
                fmt4(c.static_.avcp),
            );
        }
        out.push('\n');
        i += group.len();
    }
    out
}

/// Flat CSV of all cells.
pub fn format_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("scheme,sigma2_e,sigma2_w,dc_ramse,dc_aviw,dc_avcp,sc_ramse,sc_aviw,sc_avcp\n");
    for c in cells {
        let scheme: Vec<String> = c.scheme.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:.4},{:.4},{:.4},{:.4},{},{}",
            scheme.join(" "),
            c.sigma2_e,
            c.sigma2_w,
            c.dynamic.ramse,
            c.dynamic.aviw,
            c.dynamic.avcp,
            c.static_.ramse,
            fmt4(c.static_.aviw),
            fmt4(c.static_.avcp),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_design;

    fn tiny() -> CampaignConfig {
        CampaignConfig {
            schemes: vec![SCHEME_3.to_vec(), SCHEME_4.to_vec()],
            sigma2_e: vec![1e-4],
            sigma2_w: vec![5e-5],
            t_len: 30,
            replications: 2,
            candidates: 40,
            resample: 20,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn three_reference_static_columns_are_na() {
        let cells = run_campaign(&tiny()).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].static_.aviw.is_none() && cells[0].static_.avcp.is_none());
        assert!(cells[1].static_.aviw.is_some());
        let table = format_tables(&cells);
        assert!(table.contains("N/A"));
        assert!(table.contains("References [20, 90, 100]"));
        let csv = format_csv(&cells);
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn campaign_is_deterministic() {
        let a = run_campaign(&tiny()).unwrap();
        let b = run_campaign(&tiny()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn static_series_exact_data() {
        let d = build_design(&SCHEME_4).unwrap();
        let f = |x: f64| STUDY_BETA[0] + STUDY_BETA[1] * x + STUDY_BETA[2] * x * x;
        let ys = vec![SCHEME_4.iter().map(|&x| f(x)).collect::<Vec<_>>(); 3];
        let s = static_series(&d, &ys, &[f(25.0); 3], 0.05).unwrap();
        assert!(s.est.iter().all(|v| (v - 25.0).abs() < 1e-6));
        let (lo, hi) = s.bounds.unwrap();
        assert!(lo.iter().zip(&hi).all(|(l, h)| h - l < 1e-4));
    }

    #[test]
    fn rejects_empty() {
        let cfg = CampaignConfig {
            replications: 0,
            ..Default::default()
        };
        assert_eq!(run_campaign(&cfg), Err(Error::EmptyCampaign));
    }
}
