//! Shared domain types: the reference design, the x-scaling transform,
//! variance pairs and filter/posterior records.
//!
//! All filtering and inversion runs on the scaled reference axis, where the
//! references have mean zero and mean-square one. Conversion back to original
//! units happens only when results are reported.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed r×3 reference design with rows `[1, x, x²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    refs: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl DesignMatrix {
    /// Reference values the rows were built from.
    pub fn refs(&self) -> &[f64] {
        &self.refs
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of references (rows).
    pub fn r(&self) -> usize {
        self.refs.len()
    }

    /// Parameter dimension (columns).
    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    /// Whether ordinary least squares has at least one residual degree of freedom.
    pub fn has_residual_dof(&self) -> bool {
        self.r() > self.d()
    }

    /// `(X'X)⁻¹`, the shape of the system covariance.
    pub fn gram_inverse(&self) -> Result<DMatrix<f64>> {
        let xtx = self.matrix.transpose() * &self.matrix;
        xtx.cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::DegenerateDesign("X'X is singular".into()))
    }
}

/// Builds the quadratic design `[1, x, x²]` from strictly increasing references.
pub fn build_design(refs: &[f64]) -> Result<DesignMatrix> {
    if refs.len() < 2 {
        return Err(Error::InsufficientReferences {
            needed: 2,
            got: refs.len(),
        });
    }
    if refs.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDesign("non-finite reference value".into()));
    }
    for w in refs.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DegenerateDesign(format!("duplicate reference {}", w[0])));
        }
        if w[0] > w[1] {
            return Err(Error::DegenerateDesign(
                "references must be strictly increasing".into(),
            ));
        }
    }
    let matrix = DMatrix::from_fn(refs.len(), 3, |i, j| refs[i].powi(j as i32));
    Ok(DesignMatrix {
        refs: refs.to_vec(),
        matrix,
    })
}

/// Affine map between original reference units and the scaled axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    /// Mean of the original references.
    pub center: f64,
    /// Root-mean-square deviation of the original references.
    pub scale: f64,
    /// Mean of the scaled references (zero up to rounding).
    pub x_bar: f64,
    /// Mean of the squared scaled references (one up to rounding).
    pub x2_bar: f64,
}

impl ScalingTransform {
    pub fn identity() -> Self {
        ScalingTransform {
            center: 0.0,
            scale: 1.0,
            x_bar: 0.0,
            x2_bar: 1.0,
        }
    }

    pub fn scale_value(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }

    pub fn rescale_value(&self, v: f64) -> f64 {
        rescale_value(v, self)
    }

    /// Converts a scaled-unit variance to original units.
    pub fn rescale_variance(&self, v: f64) -> f64 {
        v * self.scale * self.scale
    }
}

/// Maps a scaled-unit value back to original reference units.
pub fn rescale_value(v: f64, tr: &ScalingTransform) -> f64 {
    v * tr.scale + tr.center
}

/// Centers and scales the references so that `Σx = 0` and `(1/r)Σx² = 1`.
///
/// The quadratic column is recomputed from the scaled x.
pub fn center_scale(design: &DesignMatrix) -> Result<(DesignMatrix, ScalingTransform)> {
    let refs = design.refs();
    let r = refs.len() as f64;
    let center = refs.iter().sum::<f64>() / r;
    let ms = refs.iter().map(|x| (x - center).powi(2)).sum::<f64>() / r;
    if !(ms > 0.0) || !ms.is_finite() {
        return Err(Error::DegenerateDesign("references have zero variance".into()));
    }
    let scale = ms.sqrt();
    let scaled: Vec<f64> = refs.iter().map(|x| (x - center) / scale).collect();
    let x_bar = scaled.iter().sum::<f64>() / r;
    let x2_bar = scaled.iter().map(|x| x * x).sum::<f64>() / r;
    let out = build_design(&scaled)?;
    Ok((
        out,
        ScalingTransform {
            center,
            scale,
            x_bar,
            x2_bar,
        },
    ))
}

/// Affine standardization of the response axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub center: f64,
    pub scale: f64,
}

impl ResponseScale {
    pub fn identity() -> Self {
        ResponseScale {
            center: 0.0,
            scale: 1.0,
        }
    }

    /// Grand mean and standard deviation over all first-stage responses.
    /// Falls back to unit scale when the responses are constant.
    pub fn from_responses<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let v: Vec<f64> = values.copied().collect();
        if v.is_empty() {
            return Self::identity();
        }
        let n = v.len() as f64;
        let center = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|y| (y - center).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 && var.is_finite() {
            var.sqrt()
        } else if center != 0.0 {
            center.abs()
        } else {
            1.0
        };
        ResponseScale { center, scale }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.center) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.center
    }

    /// Converts a variance on the standardized axis to original response units.
    pub fn variance_to_original(&self, v: f64) -> f64 {
        v * self.scale * self.scale
    }

    pub fn variance_from_original(&self, v: f64) -> f64 {
        v / (self.scale * self.scale)
    }
}

/// Regression coefficients `(β₀, β₁, β₂)` at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionState {
    pub beta: [f64; 3],
}

impl RegressionState {
    pub fn new(beta: [f64; 3]) -> Result<Self> {
        if beta.iter().all(|b| b.is_finite()) {
            Ok(RegressionState { beta })
        } else {
            Err(Error::InvalidArgument("non-finite regression coefficient".into()))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.beta[0] + self.beta[1] * x + self.beta[2] * x * x
    }
}

/// Observation and system variances `(σ²_E, σ²_W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePair {
    pub sigma2_e: f64,
    pub sigma2_w: f64,
}

impl VariancePair {
    /// Raw constructor; only requires finite, non-negative entries.
    pub fn new(sigma2_e: f64, sigma2_w: f64) -> Result<Self> {
        if !(sigma2_e >= 0.0 && sigma2_w >= 0.0) || !sigma2_e.is_finite() || !sigma2_w.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "variances must be finite and non-negative, got ({sigma2_e}, {sigma2_w})"
            )));
        }
        Ok(VariancePair { sigma2_e, sigma2_w })
    }

    /// `0 < σ²_W < σ²_E`, the support of the variance prior.
    pub fn is_nested(&self) -> bool {
        self.sigma2_w > 0.0 && self.sigma2_w < self.sigma2_e
    }
}

/// Posterior moments `(m_t, C_t)` of the regression vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub t: usize,
}

/// Per-step diagnostics attached to a calibration posterior.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFlags {
    /// Fraction of retained draws whose curve had no real root (observation past the vertex).
    pub no_real_root: f64,
    /// Fraction of retained draws whose selected root fell outside the reference domain.
    pub outside_domain: f64,
    /// Lower credible limit sits on the admissible boundary.
    pub censored_lower: bool,
    /// Upper credible limit sits on the admissible boundary.
    pub censored_upper: bool,
}

impl PosteriorFlags {
    pub fn censored(&self) -> bool {
        self.censored_lower || self.censored_upper
    }

    /// Compact `|`-separated label used in CSV output; empty when nothing is flagged.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.no_real_root > 0.0 {
            parts.push("no_real_root");
        }
        if self.outside_domain > 0.0 {
            parts.push("outside_domain");
        }
        if self.censored_lower {
            parts.push("censored_lower");
        }
        if self.censored_upper {
            parts.push("censored_upper");
        }
        parts.join("|")
    }
}

/// Posterior of the unknown reference at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPosterior {
    pub t: usize,
    /// Mean of the retained draws, scaled units.
    pub mu: f64,
    /// Variance of the retained draws, scaled units.
    pub sigma2: f64,
    pub samples: Option<Vec<f64>>,
    /// Original units.
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub flags: PosteriorFlags,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn design_rows_are_powers() {
        let d = build_design(&[20.0, 90.0, 100.0]).unwrap();
        assert_eq!(d.r(), 3);
        assert_eq!(d.d(), 3);
        assert_eq!(d.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 20.0, 400.0]);
        let d = build_design(&[0.0, 1.0]).unwrap();
        assert_eq!(d.matrix(), &DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let d = build_design(&[20.0, 40.0, 60.0, 90.0, 100.0]).unwrap();
        assert_eq!((d.r(), d.d()), (5, 3));
    }

    #[test]
    fn design_errors() {
        assert!(matches!(
            build_design(&[1.0]),
            Err(Error::InsufficientReferences { got: 1, .. })
        ));
        assert!(matches!(build_design(&[1.0, 1.0, 2.0]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(build_design(&[2.0, 1.0]), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn center_scale_moments() {
        let d = build_design(&[20.0, 90.0, 100.0]).unwrap();
        let (s, tr) = center_scale(&d).unwrap();
        let xs: Vec<f64> = s.refs().to_vec();
        assert_abs_diff_eq!(xs.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xs.iter().map(|x| x * x).sum::<f64>() / 3.0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tr.x_bar, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tr.x2_bar, 1.0, epsilon = 1e-12);
        for (orig, sc) in d.refs().iter().zip(xs.iter()) {
            assert_abs_diff_eq!(rescale_value(*sc, &tr), *orig, epsilon = 1e-12);
            assert_abs_diff_eq!(s.matrix()[(0, 2)], xs[0] * xs[0], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(tr.rescale_value(tr.scale_value(90.0)), 90.0, epsilon = 1e-12);
    }

    #[test]
    fn center_scale_fixed_point() {
        let d = build_design(&[-1.0, 1.0]).unwrap();
        let (s, tr) = center_scale(&d).unwrap();
        assert_eq!(s.refs(), &[-1.0, 1.0]);
        assert_eq!((tr.center, tr.scale), (0.0, 1.0));
    }

    #[test]
    fn identity_transform() {
        let tr = ScalingTransform::identity();
        for v in [-3.5, 0.0, 7.25] {
            assert_eq!(rescale_value(v, &tr), v);
        }
    }

    #[test]
    fn variance_pair_support() {
        assert!(VariancePair::new(1.0, 0.5).unwrap().is_nested());
        assert!(!VariancePair::new(1.0, 1.0).unwrap().is_nested());
        assert!(VariancePair::new(-1.0, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn scale_round_trip(refs in proptest::collection::btree_set(-1000i32..1000, 2..8),
                            v in -1e4f64..1e4) {
            let refs: Vec<f64> = refs.into_iter().map(|x| x as f64 * 0.37).collect();
            let d = build_design(&refs).unwrap();
            let (s, tr) = center_scale(&d).unwrap();
            for (o, sc) in refs.iter().zip(s.refs()) {
                proptest::prop_assert!((rescale_value(*sc, &tr) - o).abs() <= 1e-12 * o.abs().max(1.0));
            }
            let back = tr.rescale_value(tr.scale_value(v));
            proptest::prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
