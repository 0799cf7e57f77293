//! Bundled data: the cadmium absorbance standards and radiometer reference
//! statistics, with generators that replay them over time.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::{build_design, DesignMatrix};
use crate::rng::{stream, Purpose};

/// Cd standard concentrations (ppb) and their peak absorbances (mm).
pub const CD_STANDARDS: [(f64, &[f64]); 4] = [
    (0.0, &[0.0, 1.0, 1.0, 0.0, 1.0]),
    (5.0, &[74.0, 74.0, 78.0, 78.0, 76.0]),
    (15.0, &[183.0, 184.0, 178.0, 183.0, 184.0]),
    (20.0, &[217.0, 215.0, 213.0, 218.0, 210.0, 215.0]),
];

/// Absorbances of the 10 ppb sample treated as unknown.
pub const CD_UNKNOWN: [f64; 5] = [135.0, 142.0, 132.0, 141.0, 136.0];

/// True concentration of the unknown sample.
pub const CD_TRUE_X0: f64 = 10.0;

/// Mean of the coefficient distribution used to replay the standards.
pub const CD_BETA_MEAN: [f64; 3] = [0.72, 16.448, -0.288];

/// Residual variance multiplying `(X'X)⁻¹` in the replay covariance.
pub const CD_SIGMA2: f64 = 4.7;

pub fn cd_refs() -> Vec<f64> {
    CD_STANDARDS.iter().map(|(x, _)| *x).collect()
}

/// All `(concentration, absorbance)` pairs of the standards table.
pub fn cd_pairs() -> (Vec<f64>, Vec<f64>) {
    CD_STANDARDS
        .iter()
        .flat_map(|(x, ys)| ys.iter().map(move |y| (*x, *y)))
        .unzip()
}

/// `(X'X)⁻¹` of the full standards table.
pub fn cd_gram_inverse() -> Matrix3<f64> {
    let (xs, _) = cd_pairs();
    let mut g = Matrix3::zeros();
    for x in xs {
        let v = Vector3::new(1.0, x, x * x);
        g += v * v.transpose();
    }
    g.try_inverse().expect("standards table has full rank")
}

/// Replays the Cd standards over `t_len` periods: `β_t ~ N(μ, 4.7 (X'X)⁻¹)`
/// independently, `Y_t = Xβ_t` at the four standards, and the unknown's five
/// absorbances cycled as second-stage observations.
pub fn cd_replay(t_len: usize, seed: u64) -> Result<(DesignMatrix, Vec<Vec<f64>>, Vec<f64>)> {
    let design = build_design(&cd_refs())?;
    let l = (cd_gram_inverse() * CD_SIGMA2)
        .cholesky()
        .expect("replay covariance is positive definite")
        .l();
    let mean = Vector3::from(CD_BETA_MEAN);
    let mut rng = stream(seed, Purpose::BetaPath, 0);
    let ys = (0..t_len)
        .map(|_| {
            let z = Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            let b = mean + l * z;
            design.refs().iter().map(|&x| b[0] + b[1] * x + b[2] * x * x).collect()
        })
        .collect();
    let y0 = (0..t_len).map(|t| CD_UNKNOWN[t % CD_UNKNOWN.len()]).collect();
    Ok((design, ys, y0))
}

/// Radiometer reference temperatures (K): cryogenic, two added points,
/// ambient, warm.
pub const RADIOMETER_REFS: [f64; 5] = [84.3, 135.0, 245.0, 296.2, 300.7];
/// Mean output voltage at each reference.
pub const RADIOMETER_MEANS: [f64; 5] = [0.0001120096, 0.0001228344, 0.0001415994, 0.0001481137, 0.0001486190];
/// Standard deviation of the output at each reference.
pub const RADIOMETER_SDS: [f64; 5] = [1.280e-7, 1.257e-7, 1.233e-7, 1.308e-7, 1.236e-7];
/// Channels used by the three-point model.
pub const RADIOMETER_3PT: [usize; 3] = [0, 3, 4];
/// Observed output of the unknown scene.
pub const RADIOMETER_Y0: f64 = 0.0001347169;
pub const RADIOMETER_TRUE_X0: f64 = 200.0;
pub const RADIOMETER_T: usize = 1400;

/// Independent normal outputs per channel matching the published means and
/// standard deviations, all five channels per step.
pub fn radiometer_series(t_len: usize, seed: u64) -> Vec<[f64; 5]> {
    let mut rng = stream(seed, Purpose::FirstStageNoise, 0);
    (0..t_len)
        .map(|_| {
            let mut v = [0.0; 5];
            for (k, out) in v.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *out = RADIOMETER_MEANS[k] + RADIOMETER_SDS[k] * z;
            }
            v
        })
        .collect()
}

/// Picks the given channels out of each step.
pub fn select_channels(series: &[[f64; 5]], channels: &[usize]) -> Vec<Vec<f64>> {
    series.iter().map(|v| channels.iter().map(|&k| v[k]).collect()).collect()
}
