//! Calibration of a target beyond the top reference, near the curve maximum.

use dyncal::scenarios::{run_vertex, ExampleOptions, VERTEX_X0};

fn main() -> dyncal::Result<()> {
    let r = run_vertex(&ExampleOptions::default())?;
    println!("target {VERTEX_X0} K, mean filtered vertex {:.1} K", r.mean_vertex);
    println!("steps with upper limit below target: {:.4}", r.upper_below_truth);
    println!("steps flagged censored: {:.4}", r.censored);
    let p = &r.run.posteriors[0];
    println!("first step: median {:.2}, [{:.2}, {:.2}], flags {}", p.median, p.lower95, p.upper95, p.flags.label());
    Ok(())
}
