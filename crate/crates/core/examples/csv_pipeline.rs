//! Writes a small first/second-stage CSV pair, reads it back and calibrates.

use dyncal::io::{check_aligned, parse_first_stage, parse_second_stage, posterior_csv};
use dyncal::model::build_design;
use dyncal::simgen::{simulate, SimScenario, X0Spec, SCHEME_5, STUDY_BETA};
use dyncal::sir::{dynamic_calibrate, DynCalConfig};

fn main() -> dyncal::Result<()> {
    let data = simulate(&SimScenario {
        scheme: SCHEME_5.to_vec(),
        beta_mean: STUDY_BETA,
        sigma2_e: 1e-5,
        sigma2_w: 5e-5,
        t_len: 10,
        x0_true: X0Spec::Constant(25.0),
        beta_mode: Default::default(),
        shocks: vec![],
        seed: 1,
    })?;
    let mut first = String::from("t,20,40,60,90,100\n");
    let mut second = String::from("t,y0\n");
    for (t, (y, y0)) in data.ys.iter().zip(&data.y0).enumerate() {
        let cells: Vec<String> = y.iter().map(f64::to_string).collect();
        first += &format!("{},{}\n", t + 1, cells.join(","));
        second += &format!("{},{y0}\n", t + 1);
    }

    let fs = parse_first_stage(first.as_bytes(), "first")?;
    let ss = parse_second_stage(second.as_bytes(), "second")?;
    check_aligned(&fs, &ss, "second")?;
    let design = build_design(fs.header_refs.as_deref().unwrap_or(&SCHEME_5))?;
    let run = dynamic_calibrate(&design, &fs.ys, &ss.y0, &DynCalConfig { seed: 3, ..Default::default() })?;
    print!("{}", posterior_csv(&fs.t, &run.posteriors, None));
    Ok(())
}
