//! A desk-sized Monte Carlo campaign. Pass `full` for the long run.

use dyncal::campaign::{format_tables, run_campaign, CampaignConfig};
use dyncal::simgen::SCHEME_4;

fn main() -> dyncal::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let cfg = if full {
        CampaignConfig::default()
    } else {
        CampaignConfig {
            schemes: vec![SCHEME_4.to_vec()],
            sigma2_w: vec![5e-5, 1e-4],
            t_len: 200,
            replications: 20,
            seed: 11,
            ..Default::default()
        }
    };
    let start = std::time::Instant::now();
    let cells = run_campaign(&cfg)?;
    print!("{}", format_tables(&cells));
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
