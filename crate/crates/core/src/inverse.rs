//! Quadratic inverse prediction on the scaled reference axis and the
//! per-step normal posterior of the unknown reference.
//!
//! The second-stage model with the origin moved to the reference means is
//! `y₀ − ȳ = β₁(x − x̄) + β₂(x² − x̄²) + ε`, so the estimate solves
//! `β₂x² + β₁x + (ȳ − y₀ − β₁x̄ − β₂x̄²) = 0`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Below `LINEAR_EPS · max(1, |β₁|)` the quadratic coefficient is treated as zero.
pub const LINEAR_EPS: f64 = 1e-12;

/// Inputs to [`invert_quadratic`], all in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionContext {
    pub beta1: f64,
    pub beta2: f64,
    pub y0: f64,
    pub y_bar: f64,
    pub x_bar: f64,
    pub x2_bar: f64,
    /// Scaled image of `[min(refs), max(refs)]`.
    pub domain: (f64, f64),
}

impl InversionContext {
    /// Curve value relative to the origin shift: `ȳ + β₁(x − x̄) + β₂(x² − x̄²)`.
    pub fn forward(&self, x: f64) -> f64 {
        self.y_bar + self.beta1 * (x - self.x_bar) + self.beta2 * (x * x - self.x2_bar)
    }

    fn is_linear(&self) -> bool {
        self.beta2.abs() < LINEAR_EPS * self.beta1.abs().max(1.0)
    }

    /// Abscissa of the extremum, `−β₁/(2β₂)`.
    pub fn vertex(&self) -> Option<f64> {
        (self.beta2 != 0.0).then(|| -self.beta1 / (2.0 * self.beta2))
    }

    /// Slope of the curve at `x`.
    pub fn slope(&self, x: f64) -> f64 {
        self.beta1 + 2.0 * self.beta2 * x
    }

    /// Whether the monotone calibration branch is the increasing one, judged
    /// at the domain midpoint. A flat midpoint counts as increasing.
    pub fn increasing_branch(&self) -> bool {
        let mid = 0.5 * (self.domain.0 + self.domain.1);
        self.slope(mid) >= 0.0
    }

    fn on_branch(&self, x: f64) -> bool {
        let g = self.slope(x);
        if self.increasing_branch() {
            g >= 0.0
        } else {
            g <= 0.0
        }
    }

    fn in_domain(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    /// Part of the reference domain lying on the monotone branch.
    pub fn admissible_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.domain;
        if self.is_linear() {
            return (lo, hi);
        }
        let h = -self.beta1 / (2.0 * self.beta2);
        // Increasing with β₂ < 0, or decreasing with β₂ > 0, lives left of the vertex.
        let left_of_vertex = self.increasing_branch() == (self.beta2 < 0.0);
        if left_of_vertex {
            (lo, hi.min(h).max(lo))
        } else {
            (lo.max(h).min(hi), hi)
        }
    }
}

/// Result of an inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub x_hat: f64,
    /// False when no root lies inside the reference domain; `x_hat` is then
    /// the branch-rule root and the result is a warning, not a failure.
    pub in_domain: bool,
}

/// Solves the reduced second-stage model for the unknown reference.
///
/// Both roots are computed; roots outside the domain are discarded; if two
/// remain, the one on the monotone branch (derivative sign matching the domain
/// midpoint) is selected, with the smaller root breaking ties.
pub fn invert_quadratic(ctx: &InversionContext) -> Result<Inversion> {
    let InversionContext {
        beta1: b1,
        beta2: b2,
        y0,
        y_bar,
        x_bar,
        x2_bar,
        ..
    } = *ctx;
    if !(ctx.domain.0 < ctx.domain.1) {
        return Err(Error::InvalidArgument(format!("empty domain {:?}", ctx.domain)));
    }

    if ctx.is_linear() {
        if b1 == 0.0 {
            return Err(Error::FlatCurve);
        }
        let x_hat = (y0 - y_bar) / b1 + x_bar;
        return Ok(Inversion {
            x_hat,
            in_domain: ctx.in_domain(x_hat),
        });
    }

    let c = y_bar - y0 - b1 * x_bar - b2 * x2_bar;
    let disc = b1 * b1 - 4.0 * b2 * c;
    if disc < 0.0 {
        return Err(Error::NoRealRoot {
            vertex: -b1 / (2.0 * b2),
        });
    }
    if disc == 0.0 {
        let x_hat = -b1 / (2.0 * b2);
        return Ok(Inversion {
            x_hat,
            in_domain: ctx.in_domain(x_hat),
        });
    }

    let sign = if b1 >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b1 + sign * disc.sqrt());
    let (mut r1, mut r2) = (q / b2, c / q);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }

    let pick = |a: f64, b: f64| -> f64 {
        match (ctx.on_branch(a), ctx.on_branch(b)) {
            (true, false) => a,
            (false, true) => b,
            _ => a.min(b),
        }
    };
    let (x_hat, in_domain) = match (ctx.in_domain(r1), ctx.in_domain(r2)) {
        (true, false) => (r1, true),
        (false, true) => (r2, true),
        (true, true) => (pick(r1, r2), true),
        (false, false) => (pick(r1, r2), false),
    };
    Ok(Inversion { x_hat, in_domain })
}

/// Variance of the unknown reference implied by a response variance
/// `sigma2_y`, on the scaled x axis.
///
/// Away from the vertex this is the delta-method value `σ²_Y/g²` for curve
/// slope `g`; near the vertex, where `g → 0`, the curvature bound
/// `σ_Y/|β₂|` takes over.
pub fn local_x_variance(slope: f64, beta2: f64, sigma2_y: f64) -> f64 {
    let linear = if slope != 0.0 {
        sigma2_y / (slope * slope)
    } else {
        f64::INFINITY
    };
    let curvature = if beta2 != 0.0 {
        sigma2_y.sqrt() / beta2.abs()
    } else {
        f64::INFINITY
    };
    linear.min(curvature)
}

/// Normal posterior of the unknown reference under a standard-normal prior
/// on the scaled axis and a normal likelihood centred at `x_hat` with
/// variance `s`: mean `x̂/(1+s)`, variance `s/(1+s)`.
///
/// Infinite `s` returns the prior.
pub fn posterior_from_variance(x_hat: f64, s: f64) -> Result<(f64, f64)> {
    if !(s >= 0.0) {
        return Err(Error::InvalidCovariance(format!("negative likelihood variance {s}")));
    }
    if s.is_infinite() {
        return Ok((0.0, 1.0));
    }
    Ok((x_hat / (1.0 + s), s / (1.0 + s)))
}

/// Posterior `(μ, σ²)` of the unknown reference given the estimate, the curve
/// slope at the estimate and the response variance `σ²_Y`.
pub fn posterior_x0(x_hat: f64, slope: f64, sigma2_y: f64) -> Result<(f64, f64)> {
    if !(sigma2_y >= 0.0) {
        return Err(Error::InvalidCovariance(format!("response variance {sigma2_y}")));
    }
    let s = if slope != 0.0 {
        sigma2_y / (slope * slope)
    } else {
        f64::INFINITY
    };
    posterior_from_variance(x_hat, s)
}

/// One draw from `N(mu, sigma2)`.
pub fn draw_x0<R: Rng + ?Sized>(mu: f64, sigma2: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mu + sigma2.max(0.0).sqrt() * z
}
