//! Sequential Bayesian updating of a dynamic linear regression.
//!
//! Observation equation `Y_t = X β_t + ε_t`, `ε_t ~ N(0, σ²_E I)`; system
//! equation `β_t = β_{t-1} + ω_t`, `ω_t ~ N(0, σ²_W (X'X)⁻¹)`.
//!
//! Two implementations live here. [`filter_step`] is the covariance form,
//! written step for step in terms of the prior `(a, R)`, forecast `(f, Q)`,
//! gain `A` and posterior `(m, C)`. [`InfoFilter`] is an information-form
//! rewrite for the three-parameter quadratic model that only factors 3×3
//! matrices; the importance sampler runs it thousands of times per call.
//! The two are checked against each other in the tests.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, FilterState, VariancePair};

/// Reciprocal-condition floor for the forecast covariance.
pub const RCOND_MIN: f64 = 1e-14;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Every intermediate quantity of one filter step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Prior mean `a_t`.
    pub a: DVector<f64>,
    /// Prior covariance `R_t`.
    pub r: DMatrix<f64>,
    /// One-step forecast mean `f_t`.
    pub f: DVector<f64>,
    /// One-step forecast covariance `Q_t`.
    pub q: DMatrix<f64>,
    /// Forecast error `e_t`.
    pub e: DVector<f64>,
    /// Adaptive gain `A_t` (d×r).
    pub gain: DMatrix<f64>,
    /// Posterior `(m_t, C_t)`.
    pub state: FilterState,
    /// `log N_r(Y_t; f_t, Q_t)`.
    pub log_pred: f64,
}

pub(crate) fn check_covariance(c: &DMatrix<f64>) -> Result<()> {
    if !c.is_square() {
        return Err(Error::InvalidCovariance(format!(
            "covariance is {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry".into()));
    }
    let scale = c.amax().max(1.0);
    if (c - c.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::InvalidCovariance("not symmetric".into()));
    }
    let eig = c.clone().symmetric_eigenvalues();
    let min = eig.min();
    if min < -PSD_TOL * scale {
        return Err(Error::InvalidCovariance(format!(
            "negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Prior `(β₀ | D₀) ~ N(m0, C0)` at `t = 0`.
pub fn init_filter(m0: DVector<f64>, c0: DMatrix<f64>) -> Result<FilterState> {
    if c0.nrows() != m0.len() {
        return Err(Error::Shape(format!(
            "m0 has length {} but C0 is {}x{}",
            m0.len(),
            c0.nrows(),
            c0.ncols()
        )));
    }
    check_covariance(&c0)?;
    Ok(FilterState { m: m0, c: c0, t: 0 })
}

/// The default prior used by the calibration pipeline: `m₀ = 1_d`, `C₀ = 100 I`.
pub fn default_prior(d: usize) -> FilterState {
    FilterState {
        m: DVector::from_element(d, 1.0),
        c: DMatrix::identity(d, d) * 100.0,
        t: 0,
    }
}

/// Observation matrix together with the system covariance shape `Ω = (X'X)⁻¹`.
#[derive(Debug, Clone)]
pub struct DlrmModel {
    x: DMatrix<f64>,
    omega: DMatrix<f64>,
}

impl DlrmModel {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        Ok(DlrmModel {
            x: design.matrix().clone(),
            omega: design.gram_inverse()?,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Covariance-form update for one time step.
    pub fn step(&self, state: &FilterState, y: &DVector<f64>, gamma: VariancePair) -> Result<StepOutput> {
        let x = &self.x;
        let (r_dim, d) = x.shape();
        if y.len() != r_dim {
            return Err(Error::Shape(format!("Y_t has length {} but X has {} rows", y.len(), r_dim)));
        }
        if state.m.len() != d || state.c.shape() != (d, d) {
            return Err(Error::Shape(format!(
                "state has dimension {} but X has {} columns",
                state.m.len(),
                d
            )));
        }

        let a = state.m.clone();
        let r = &state.c + &self.omega * gamma.sigma2_w;
        let f = x * &a;
        let mut q = x * &r * x.transpose();
        for i in 0..r_dim {
            q[(i, i)] += gamma.sigma2_e;
        }
        q = (&q + q.transpose()) * 0.5;

        let chol = Cholesky::new(q.clone()).ok_or(Error::SingularForecastCovariance { rcond: 0.0 })?;
        let rcond = chol_rcond(chol.l_dirty(), r_dim);
        if !(rcond >= RCOND_MIN) {
            return Err(Error::SingularForecastCovariance { rcond });
        }

        let e = y - &f;
        // A = R X' Q⁻¹, obtained as (Q⁻¹ X R)'.
        let gain = chol.solve(&(x * &r)).transpose();
        let m = &a + &gain * &e;
        let c = &r - &gain * &q * gain.transpose();
        let c = (&c + c.transpose()) * 0.5;

        let z = chol.l().solve_lower_triangular(&e).expect("Cholesky factor is invertible");
        let log_det: f64 = (0..r_dim).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        let log_pred = -0.5 * (r_dim as f64 * LN_2PI + log_det + z.norm_squared());

        Ok(StepOutput {
            a,
            r,
            f,
            q,
            e,
            gain,
            state: FilterState { m, c, t: state.t + 1 },
            log_pred,
        })
    }
}

/// Squared ratio of extreme Cholesky pivots: a cheap estimate of the reciprocal
/// condition number of the factored matrix.
fn chol_rcond(l: &DMatrix<f64>, n: usize) -> f64 {
    let diag = (0..n).map(|i| l[(i, i)].abs());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        0.0
    } else {
        (lo / hi).powi(2)
    }
}

/// One covariance-form update; see [`DlrmModel::step`].
pub fn filter_step(
    state: &FilterState,
    design: &DesignMatrix,
    y: &DVector<f64>,
    gamma: VariancePair,
) -> Result<StepOutput> {
    DlrmModel::new(design)?.step(state, y, gamma)
}

/// Runs the covariance-form filter over a whole series.
///
/// Returns every step and the summed one-step predictive log density.
pub fn run_filter(
    design: &DesignMatrix,
    ys: &[Vec<f64>],
    gamma: VariancePair,
    m0: DVector<f64>,
    c0: DMatrix<f64>,
) -> Result<(Vec<StepOutput>, f64)> {
    if ys.is_empty() {
        return Err(Error::Shape("response series is empty".into()));
    }
    let model = DlrmModel::new(design)?;
    let mut state = init_filter(m0, c0)?;
    let mut out = Vec::with_capacity(ys.len());
    let mut total = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let step = model
            .step(&state, &DVector::from_column_slice(y), gamma)
            .map_err(|e| e.at(i + 1))?;
        total += step.log_pred;
        state = step.state.clone();
        out.push(step);
    }
    Ok((out, total))
}

/// Fixed design data shared by every [`InfoFilter`] on the same references.
#[derive(Debug, Clone)]
pub struct InfoDesign {
    rows: Vec<[f64; 3]>,
    xtx: Matrix3<f64>,
    omega: Matrix3<f64>,
}

impl InfoDesign {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        if design.d() != 3 {
            return Err(Error::Shape(format!("information filter needs d = 3, got {}", design.d())));
        }
        let rows: Vec<[f64; 3]> = design
            .matrix()
            .row_iter()
            .map(|r| [r[0], r[1], r[2]])
            .collect();
        let mut xtx = Matrix3::zeros();
        for row in &rows {
            let v = Vector3::from(*row);
            xtx += v * v.transpose();
        }
        let omega = xtx
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::DegenerateDesign("X'X is singular".into()))?;
        Ok(InfoDesign { rows, xtx, omega })
    }

    pub fn r(&self) -> usize {
        self.rows.len()
    }
}

/// Summary of one [`InfoFilter`] step.
#[derive(Debug, Clone, Copy)]
pub struct InfoStep {
    pub log_pred: f64,
    /// `tr(Q_t)`.
    pub trace_q: f64,
    /// Mean posterior predictive variance of a single response after the
    /// update, `(tr(X C_t X') + rσ²_E)/r`.
    pub response_variance: f64,
}

/// Information-form filter for the quadratic model, using only 3×3 algebra.
///
/// Uses `C_t⁻¹ = R_t⁻¹ + X'X/σ²_E`, the matrix determinant lemma for
/// `log|Q_t|` and Woodbury for `e'Q⁻¹e`.
#[derive(Debug, Clone)]
pub struct InfoFilter<'a> {
    design: &'a InfoDesign,
    gamma: VariancePair,
    pub m: Vector3<f64>,
    pub c: Matrix3<f64>,
    pub t: usize,
}

impl<'a> InfoFilter<'a> {
    pub fn new(design: &'a InfoDesign, gamma: VariancePair, m0: Vector3<f64>, c0: Matrix3<f64>) -> Self {
        InfoFilter {
            design,
            gamma,
            m: m0,
            c: c0,
            t: 0,
        }
    }

    pub fn with_default_prior(design: &'a InfoDesign, gamma: VariancePair) -> Self {
        Self::new(design, gamma, Vector3::from_element(1.0), Matrix3::identity() * 100.0)
    }

    pub fn step(&mut self, y: &[f64]) -> Result<InfoStep> {
        let r_dim = self.design.r();
        if y.len() != r_dim {
            return Err(Error::Shape(format!("Y_t has length {} but X has {} rows", y.len(), r_dim)));
        }
        let s2e = self.gamma.sigma2_e;
        let a = self.m;
        let r = self.c + self.design.omega * self.gamma.sigma2_w;
        let trace_rxx = (r * self.design.xtx).trace();
        let trace_q = trace_rxx + r_dim as f64 * s2e;
        if !(s2e > 0.0) || !(s2e / (s2e + trace_rxx) >= RCOND_MIN) {
            return Err(Error::SingularForecastCovariance {
                rcond: if s2e > 0.0 { s2e / (s2e + trace_rxx) } else { 0.0 },
            });
        }

        let r_chol = r
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("prior covariance R_t is not positive definite".into()))?;
        let r_inv = r_chol.inverse();

        let mut ete = 0.0;
        let mut xte = Vector3::zeros();
        for (row, yi) in self.design.rows.iter().zip(y) {
            let e = yi - (row[0] * a[0] + row[1] * a[1] + row[2] * a[2]);
            ete += e * e;
            xte += Vector3::from(*row) * e;
        }

        let p = r_inv + self.design.xtx / s2e;
        let p_chol = p
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("posterior precision is not positive definite".into()))?;
        let c = p_chol.inverse();
        let c = (c + c.transpose()) * 0.5;
        let u = xte / s2e;
        let cu = c * u;
        let m = a + cu;

        let ln_det = |l: &Matrix3<f64>| 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln() + l[(2, 2)].ln());
        let log_det_q = r_dim as f64 * s2e.ln() + ln_det(&r_chol.l()) + ln_det(&p_chol.l());
        let quad = ete / s2e - u.dot(&cu);
        let log_pred = -0.5 * (r_dim as f64 * LN_2PI + log_det_q + quad);

        self.m = m;
        self.c = c;
        self.t += 1;
        let response_variance = (c * self.design.xtx).trace() / r_dim as f64 + s2e;
        Ok(InfoStep {
            log_pred,
            trace_q,
            response_variance,
        })
    }
}
