//! Curves scaled about their vertex inside two windows.

use dyncal::scenarios::{run_shock, ExampleOptions, ShockLayout};

fn main() -> dyncal::Result<()> {
    for layout in [ShockLayout::Short, ShockLayout::Long] {
        let r = run_shock(layout, &ExampleOptions::default())?;
        println!(
            "{layout:?}: dynamic MSE {:.4} (static {:.4}); inside width {:.3} cov {:.3}; outside width {:.3} cov {:.3}",
            r.summary.metrics.mse, r.static_mse, r.inside.0, r.inside.1, r.outside.0, r.outside.1
        );
    }
    Ok(())
}
