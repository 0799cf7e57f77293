//! Radiometer brightness temperature with three and five reference points.

use dyncal::scenarios::{run_radiometer, ExampleOptions};

fn main() -> dyncal::Result<()> {
    let opts = ExampleOptions::default();
    println!("{:>6} {:>10} {:>8} {:>8} {:>8} {:>8}", "model", "mean", "sd", "MSE", "IW", "CP");
    for points in [3, 5] {
        let s = run_radiometer(points, &opts)?.summary;
        println!(
            "{:>5}p {:>10.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            points, s.mean_median, s.sd_median, s.metrics.mse, s.metrics.iw, s.metrics.cp
        );
    }
    Ok(())
}
