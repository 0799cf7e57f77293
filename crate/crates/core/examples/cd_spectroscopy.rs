//! Cd spectroscopy: static baseline on the standards table, then the
//! dynamic method on a replay of it over 500 periods.

use dyncal::scenarios::{run_cd, ExampleOptions};

fn main() -> dyncal::Result<()> {
    let r = run_cd(&ExampleOptions::default())?;
    println!("static  xi* = {:.4}, Lundberg [{:.4}, {:.4}]", r.xi_star, r.lundberg.ci_lo, r.lundberg.ci_hi);
    let s = &r.summary;
    println!(
        "dynamic mean median {:.4}, mean interval [{:.4}, {:.4}], width {:.4}",
        s.mean_median, s.mean_lower, s.mean_upper, s.metrics.iw
    );
    Ok(())
}
