//! Classical estimators on the Cd standards: the OLS fit, the inverse
//! estimate and both interval constructions.

use dyncal::datasets::{cd_pairs, CD_UNKNOWN};
use dyncal::stats::mean;
use dyncal::static_calib::{delta_interval, fit_ols_quadratic, lundberg_interval, static_estimate, static_gradient};

fn main() -> dyncal::Result<()> {
    let (x, y) = cd_pairs();
    let fit = fit_ols_quadratic(&x, &y)?;
    let y0 = mean(&CD_UNKNOWN);
    let xi = static_estimate(&fit, y0)?;
    println!("beta_hat = {:?}, s2 = {:.3}", fit.beta_hat, fit.s2.unwrap_or(f64::NAN));
    println!("xi* = {xi:.4} for mean absorbance {y0}");

    let (g, dy0) = static_gradient(&fit, y0)?;
    println!("d xi / d beta = [{:.4e}, {:.4e}, {:.4e}], d xi / d y0 = {dy0:.4e}", g[0], g[1], g[2]);

    let lb = lundberg_interval(&fit, xi, CD_UNKNOWN.len(), 0.05)?;
    println!("Lundberg 95%: [{:.4}, {:.4}]", lb.ci_lo, lb.ci_hi);
    let s_unknown = (dyncal::stats::variance(&CD_UNKNOWN) * 5.0 / 4.0).sqrt() / 5f64.sqrt();
    let dm = delta_interval(&fit, y0, s_unknown, 0.05)?;
    println!(
        "delta 95% (sigma_y0 = {s_unknown:.3}): [{:.4}, {:.4}], sd {:.4}",
        dm.ci_lo,
        dm.ci_hi,
        dm.sigma2_xi.unwrap_or(f64::NAN).sqrt()
    );
    Ok(())
}
