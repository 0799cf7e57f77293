//! Tracks a drifting quadratic with the covariance-form filter and prints
//! the filtered coefficients against the truth every 50 steps.

use dyncal::dlrm::{default_prior, run_filter};
use dyncal::model::VariancePair;
use dyncal::simgen::{simulate, BetaMode, SimScenario, X0Spec, SCHEME_4, STUDY_BETA};

fn main() -> dyncal::Result<()> {
    let scn = SimScenario {
        scheme: SCHEME_4.to_vec(),
        beta_mean: STUDY_BETA,
        sigma2_e: 1e-5,
        sigma2_w: 1e-6,
        t_len: 300,
        x0_true: X0Spec::Constant(25.0),
        beta_mode: BetaMode::RandomWalk,
        shocks: vec![],
        seed: 7,
    };
    let data = simulate(&scn)?;
    let prior = default_prior(3);
    let gamma = VariancePair::new(scn.sigma2_e, scn.sigma2_w)?;
    let (steps, log_lik) = run_filter(&data.design, &data.ys, gamma, prior.m, prior.c)?;

    println!("{:>4}  {:>12} {:>12}  {:>12} {:>12}", "t", "b1 true", "b1 filt", "b2 true", "b2 filt");
    for t in (0..steps.len()).step_by(50) {
        let m = &steps[t].state.m;
        println!(
            "{:>4}  {:>12.6} {:>12.6}  {:>12.3e} {:>12.3e}",
            t + 1,
            data.betas[t][1],
            m[1],
            data.betas[t][2],
            m[2]
        );
    }
    println!("one-step predictive log density: {log_lik:.2}");
    Ok(())
}
