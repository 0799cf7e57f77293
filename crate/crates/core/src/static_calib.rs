//! Classical calibration baselines on the original (uncentered) axis: OLS
//! quadratic fit, the "+" root estimator and two approximate intervals.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::inverse::LINEAR_EPS;

/// Ordinary least-squares fit of `y = β₀ + β₁x + β₂x²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: [f64; 3],
    /// Residual variance `RSS/(m−3)`; `None` without residual degrees of freedom.
    pub s2: Option<f64>,
    /// `s²(X'X)⁻¹`, present whenever `s2` is.
    pub v: Option<Matrix3<f64>>,
    pub xtx_inv: Matrix3<f64>,
    pub n_first: usize,
    pub dof: i64,
    pub rss: f64,
}

impl OlsFit {
    pub fn eval(&self, x: f64) -> f64 {
        let b = self.beta_hat;
        b[0] + b[1] * x + b[2] * x * x
    }

    pub fn s(&self) -> Result<f64> {
        self.s2
            .map(f64::sqrt)
            .ok_or(Error::VarianceUnavailable { dof: self.dof })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Lundberg,
    Delta,
}

/// Point estimate with an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticEstimate {
    pub xi_star: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub method: IntervalMethod,
    /// Delta-method variance of the estimate; `None` for the Lundberg interval.
    pub sigma2_xi: Option<f64>,
}

impl StaticEstimate {
    pub fn width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }
}

/// Fits the quadratic by Householder QR.
pub fn fit_ols_quadratic(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    let m = x.len();
    if y.len() != m {
        return Err(Error::Shape(format!("{} x values but {} y values", m, y.len())));
    }
    if m < 3 {
        return Err(Error::InsufficientReferences { needed: 3, got: m });
    }
    let xm = DMatrix::from_fn(m, 3, |i, j| x[i].powi(j as i32));
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let rmax = (0..3).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..3).any(|i| !(r[(i, i)].abs() > 1e-12 * rmax)) {
        return Err(Error::DegenerateDesign("normal equations are singular".into()));
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::DegenerateDesign("normal equations are singular".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(3, 3))
        .ok_or_else(|| Error::DegenerateDesign("normal equations are singular".into()))?;
    let xtx_inv_d = &r_inv * r_inv.transpose();
    let xtx_inv = Matrix3::from_fn(|i, j| xtx_inv_d[(i, j)]);
    let resid = &yv - &xm * &beta;
    let rss = resid.norm_squared();
    let dof = m as i64 - 3;
    let s2 = (dof >= 1).then(|| rss / dof as f64);
    Ok(OlsFit {
        beta_hat: [beta[0], beta[1], beta[2]],
        s2,
        v: s2.map(|s2| xtx_inv * s2),
        xtx_inv,
        n_first: m,
        dof,
        rss,
    })
}

fn is_linear(b: &[f64; 3]) -> bool {
    b[2].abs() < LINEAR_EPS * b[1].abs().max(1.0)
}

/// The "+" root `(−β₁ + √(β₁² − 4β₂(β₀ − y₀)))/(2β₂)`, evaluated without
/// cancellation; a negligible `β₂` falls back to the linear inverse.
pub fn static_estimate(fit: &OlsFit, y0: f64) -> Result<f64> {
    let [b0, b1, b2] = fit.beta_hat;
    if is_linear(&fit.beta_hat) {
        if b1 == 0.0 {
            return Err(Error::FlatCurve);
        }
        return Ok((y0 - b0) / b1);
    }
    let disc = b1 * b1 - 4.0 * b2 * (b0 - y0);
    if disc < 0.0 {
        return Err(Error::NoRealRoot {
            vertex: -b1 / (2.0 * b2),
        });
    }
    let sq = disc.sqrt();
    if b1 > 0.0 {
        Ok(2.0 * (y0 - b0) / (b1 + sq))
    } else {
        Ok((sq - b1) / (2.0 * b2))
    }
}

/// Curve slope `β₁ + 2β₂ξ` at the estimate.
fn slope_at(fit: &OlsFit, xi: f64) -> f64 {
    fit.beta_hat[1] + 2.0 * fit.beta_hat[2] * xi
}

/// Analytic gradient of the "+" root: `(∂ξ/∂β₀, ∂ξ/∂β₁, ∂ξ/∂β₂)` and `∂ξ/∂y₀`.
///
/// Implicit differentiation of `β₀ + β₁ξ + β₂ξ² = y₀` gives
/// `∂ξ/∂βₖ = −ξᵏ/g` and `∂ξ/∂y₀ = 1/g` with `g = β₁ + 2β₂ξ`, which equals
/// `√D` on the "+" root.
pub fn static_gradient(fit: &OlsFit, y0: f64) -> Result<(Vector3<f64>, f64)> {
    let xi = static_estimate(fit, y0)?;
    let [b0, b1, b2] = fit.beta_hat;
    let g = if is_linear(&fit.beta_hat) {
        b1
    } else {
        (b1 * b1 - 4.0 * b2 * (b0 - y0)).sqrt()
    };
    if g == 0.0 {
        return Err(Error::VerticalTangent);
    }
    Ok((Vector3::new(-1.0 / g, -xi / g, -xi * xi / g), 1.0 / g))
}

/// Interval `ξ* ± t_{1−α/2, m+n} · d(ξ*)` with
/// `d(ξ*) = s·[1/n + Ξ'(X'X)⁻¹Ξ]^{1/2} / |β₁ + 2β₂ξ*|` and `Ξ = (1, ξ*, ξ*²)`.
pub fn lundberg_interval(fit: &OlsFit, xi_star: f64, n_second: usize, alpha: f64) -> Result<StaticEstimate> {
    check_alpha(alpha)?;
    if n_second == 0 {
        return Err(Error::InvalidArgument("second-stage count must be positive".into()));
    }
    let s = fit.s()?;
    let slope = slope_at(fit, xi_star).abs();
    if !(slope > 1e-12 * fit.beta_hat[1].abs().max(1.0)) {
        return Err(Error::VerticalTangent);
    }
    let xi = Vector3::new(1.0, xi_star, xi_star * xi_star);
    let lev = (fit.xtx_inv * xi).dot(&xi);
    let d = s * (1.0 / n_second as f64 + lev).sqrt() / slope;
    let dof = (fit.n_first + n_second) as f64;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(1.0 - alpha / 2.0);
    Ok(StaticEstimate {
        xi_star,
        ci_lo: xi_star - t * d,
        ci_hi: xi_star + t * d,
        method: IntervalMethod::Lundberg,
        sigma2_xi: None,
    })
}

/// Delta-method interval `ξ* ± z_{1−α/2} σ_ξ*` with
/// `σ²_ξ* = (∂ξ*/∂y₀ · σ_y₀)² + d'Vd`.
pub fn delta_interval(fit: &OlsFit, y0: f64, sigma_y0: f64, alpha: f64) -> Result<StaticEstimate> {
    check_alpha(alpha)?;
    if !(sigma_y0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_y0 must be non-negative, got {sigma_y0}")));
    }
    let v = fit.v.ok_or(Error::VarianceUnavailable { dof: fit.dof })?;
    let xi_star = static_estimate(fit, y0)?;
    let (d, dy0) = static_gradient(fit, y0)?;
    let var = (dy0 * sigma_y0).powi(2) + (v * d).dot(&d);
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let half = z * var.max(0.0).sqrt();
    Ok(StaticEstimate {
        xi_star,
        ci_lo: xi_star - half,
        ci_hi: xi_star + half,
        method: IntervalMethod::Delta,
        sigma2_xi: Some(var),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}
