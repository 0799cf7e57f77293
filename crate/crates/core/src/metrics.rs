//! Accuracy, interval width and coverage over time and across replications.

use serde::Serialize;

use crate::error::{Error, Result};

/// Metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub mse: f64,
    pub iw: f64,
    pub cp: f64,
    /// Per-time coverage indicators.
    #[serde(skip)]
    pub covered: Vec<bool>,
}

/// Averages over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub ramse: f64,
    pub aviw: f64,
    pub avcp: f64,
}

/// MSE of `est`, mean width of `[lo, hi]` and the fraction of times with
/// `lo < truth < hi` (ties are not covered).
pub fn replication_metrics(est: &[f64], lo: &[f64], hi: &[f64], truth: &[f64]) -> Result<ReplicationResult> {
    let t = est.len();
    if lo.len() != t || hi.len() != t || truth.len() != t {
        return Err(Error::Shape(format!(
            "lengths differ: est {}, lo {}, hi {}, truth {}",
            t,
            lo.len(),
            hi.len(),
            truth.len()
        )));
    }
    if t == 0 {
        return Err(Error::Shape("empty series".into()));
    }
    let n = t as f64;
    let mse = est.iter().zip(truth).map(|(e, x)| (e - x).powi(2)).sum::<f64>() / n;
    let iw = lo.iter().zip(hi).map(|(l, h)| h - l).sum::<f64>() / n;
    let covered: Vec<bool> = truth
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| l < x && x < h)
        .collect();
    let cp = covered.iter().filter(|&&c| c).count() as f64 / n;
    Ok(ReplicationResult { mse, iw, cp, covered })
}

/// `RAMSE = √(mean MSE)`, `AvIW = mean IW`, `AvCP = mean CP`.
pub fn campaign_summary(reps: &[ReplicationResult]) -> Result<CampaignSummary> {
    if reps.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    let n = reps.len() as f64;
    Ok(CampaignSummary {
        ramse: (reps.iter().map(|r| r.mse).sum::<f64>() / n).sqrt(),
        aviw: reps.iter().map(|r| r.iw).sum::<f64>() / n,
        avcp: reps.iter().map(|r| r.cp).sum::<f64>() / n,
    })
}
