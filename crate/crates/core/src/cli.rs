//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for bad input
//! (arguments, configuration or data files).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::campaign::{format_csv, format_tables, run_campaign, static_series};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::io::{check_aligned, posterior_csv, read_first_stage, read_second_stage, write_json, write_text};
use crate::metrics::replication_metrics;
use crate::model::build_design;
use crate::scenarios::{run_cd, run_radiometer, run_shock, run_vertex, ScenarioData};
use crate::sir::{dynamic_calibrate, CalibrationRun};
use crate::stats::mean;

#[derive(Debug, Parser)]
#[command(name = "dyncal", version, about = "Bayesian dynamic calibration of quadratic instruments")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "dyncal-out")]
    pub out: PathBuf,
    /// Worker threads; changes speed only, never results.
    #[arg(long, global = true, env = "DYNCAL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dynamic calibration of an unknown from first- and second-stage CSV files.
    Calibrate(DataArgs),
    /// Monte Carlo campaign comparing the dynamic and static methods.
    Simulate,
    /// Dynamic and static calibration side by side on the same CSV files.
    Compare(DataArgs),
    /// Runs a bundled scenario.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
    },
    /// Re-runs a previous run from its manifest.
    ManifestRerun { manifest: PathBuf },
    /// Writes a matplotlib script that plots a series CSV with its interval band.
    PlotScript,
}

#[derive(Debug, clap::Args)]
pub struct DataArgs {
    /// First-stage CSV (`t,ref_1..ref_r`).
    #[arg(long)]
    pub first_stage: Option<PathBuf>,
    /// Second-stage CSV (`t,y0`).
    #[arg(long)]
    pub second_stage: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleName {
    Cd,
    #[value(name = "radiometer-3pt")]
    #[serde(rename = "radiometer-3pt")]
    Radiometer3pt,
    #[value(name = "radiometer-5pt")]
    #[serde(rename = "radiometer-5pt")]
    Radiometer5pt,
    Vertex,
    Shock,
}

impl ExampleName {
    fn mode(self) -> Mode {
        match self {
            ExampleName::Cd => Mode::ExampleCd,
            ExampleName::Radiometer3pt | ExampleName::Radiometer5pt => Mode::ExampleRadiometer,
            ExampleName::Vertex => Mode::VertexStress,
            ExampleName::Shock => Mode::ShockStress,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub example: Option<ExampleName>,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String> {
    if let Command::PlotScript = cli.command {
        let path = cli.out.join("plot_series.py");
        write_text(&path, PLOT_SCRIPT)?;
        return Ok(format!("wrote {}\n", path.display()));
    }
    let (mode, example, config) = match &cli.command {
        Command::ManifestRerun { manifest } => {
            if cli.seed.is_some() || cli.config.is_some() {
                return Err(Error::Config("manifest-rerun takes its seed and settings from the manifest".into()));
            }
            let text = std::fs::read_to_string(manifest).map_err(|e| Error::Io {
                path: manifest.display().to_string(),
                message: e.to_string(),
            })?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", manifest.display())))?;
            (m.mode, m.example, m.config)
        }
        cmd => {
            let mut config = match &cli.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = cli.seed.or(config.seed) {
                config.apply_seed(s);
            }
            let (mode, example) = match cmd {
                Command::Calibrate(a) | Command::Compare(a) => {
                    let c = &mut config.calibrate;
                    if let Some(p) = &a.first_stage {
                        c.first_stage = Some(p.clone());
                    }
                    if let Some(p) = &a.second_stage {
                        c.second_stage = Some(p.clone());
                    }
                    for p in [&mut c.first_stage, &mut c.second_stage].into_iter().flatten() {
                        *p = std::fs::canonicalize(&*p).map_err(|e| Error::Io {
                            path: p.display().to_string(),
                            message: e.to_string(),
                        })?;
                    }
                    let mode = if matches!(cmd, Command::Calibrate(_)) {
                        Mode::Calibrate
                    } else {
                        Mode::Compare
                    };
                    (mode, None)
                }
                Command::Simulate => (Mode::Simulate, None),
                Command::Example { name } => (name.mode(), Some(*name)),
                Command::ManifestRerun { .. } | Command::PlotScript => unreachable!(),
            };
            (mode, example, config)
        }
    };
    config.validate(mode)?;
    if matches!(mode, Mode::ExampleCd | Mode::ExampleRadiometer | Mode::VertexStress | Mode::ShockStress)
        && example.is_none()
    {
        return Err(Error::Config("example runs need an example name".into()));
    }

    let job = || execute(mode, example, &config, &cli.out);
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Runs one job, writes its files under `out` and returns a short report.
pub fn execute(mode: Mode, example: Option<ExampleName>, config: &RunConfig, out: &Path) -> Result<String> {
    let mut outputs = Vec::new();
    let mut report = String::new();
    let emit_text = |name: &str, text: &str, outputs: &mut Vec<String>| -> Result<()> {
        write_text(&out.join(name), text)?;
        outputs.push(name.to_string());
        Ok(())
    };

    match mode {
        Mode::Calibrate | Mode::Compare => {
            let c = &config.calibrate;
            let (fs_path, ss_path) = (c.first_stage.as_ref().unwrap(), c.second_stage.as_ref().unwrap());
            let first = read_first_stage(fs_path)?;
            let second = read_second_stage(ss_path)?;
            check_aligned(&first, &second, &ss_path.display().to_string())?;
            let refs = match (&c.refs, &first.header_refs) {
                (Some(r), _) => r.clone(),
                (None, Some(r)) => r.clone(),
                (None, None) => {
                    return Err(Error::Config(
                        "reference values missing: set calibrate.refs or use numeric first-stage headers".into(),
                    ))
                }
            };
            if refs.len() != first.ys[0].len() {
                return Err(Error::Config(format!(
                    "{} reference values for {} first-stage columns",
                    refs.len(),
                    first.ys[0].len()
                )));
            }
            let design = build_design(&refs).map_err(|e| Error::Config(e.to_string()))?;
            let run = dynamic_calibrate(&design, &first.ys, &second.y0, &c.sampler())?;
            if mode == Mode::Calibrate {
                emit_text("posterior.csv", &posterior_csv(&first.t, &run.posteriors, None), &mut outputs)?;
                report.push_str(&run_report(&run));
            } else {
                let sc = static_series(&design, &first.ys, &second.y0, c.alpha)?;
                let mut csv = String::from("t,dc_median,dc_lo95,dc_hi95,sc_estimate,sc_lo,sc_hi\n");
                for (i, (t, p)) in first.t.iter().zip(&run.posteriors).enumerate() {
                    let (lo, hi) = match &sc.bounds {
                        Some((l, h)) => (l[i].to_string(), h[i].to_string()),
                        None => (String::new(), String::new()),
                    };
                    let _ = writeln!(csv, "{t},{},{},{},{},{lo},{hi}", p.median, p.lower95, p.upper95, sc.est[i]);
                }
                emit_text("compare.csv", &csv, &mut outputs)?;
                report.push_str(&run_report(&run));
                let _ = writeln!(report, "static: mean estimate {:.4}", mean(&sc.est));
                if let Some(x0) = c.x0_true {
                    let truth = vec![x0; first.t.len()];
                    let dc = replication_metrics(&run.medians(), &run.lower(), &run.upper(), &truth)?;
                    let st = match &sc.bounds {
                        Some((l, h)) => {
                            let m = replication_metrics(&sc.est, l, h, &truth)?;
                            json!({ "mse": m.mse, "iw": m.iw, "cp": m.cp })
                        }
                        None => {
                            let m = replication_metrics(&sc.est, &sc.est, &sc.est, &truth)?;
                            json!({ "mse": m.mse, "iw": null, "cp": null })
                        }
                    };
                    let summary = json!({
                        "x0_true": x0,
                        "dynamic": { "mse": dc.mse, "iw": dc.iw, "cp": dc.cp },
                        "static": st,
                    });
                    write_json(&out.join("compare_metrics.json"), &summary)?;
                    outputs.push("compare_metrics.json".into());
                    let _ = writeln!(report, "{}", serde_json::to_string(&summary).unwrap_or_default());
                }
            }
        }
        Mode::Simulate => {
            let cells = run_campaign(&config.campaign)?;
            let tables = format_tables(&cells);
            emit_text("tables.txt", &tables, &mut outputs)?;
            emit_text("cells.csv", &format_csv(&cells), &mut outputs)?;
            write_json(&out.join("cells.json"), &cells)?;
            outputs.push("cells.json".into());
            report.push_str(&tables);
        }
        _ => {
            let opts = &config.example;
            let series_t = |n: usize| (1..=n).map(|t| t as f64).collect::<Vec<_>>();
            let (run, data, summary) = match example.expect("validated") {
                ExampleName::Cd => {
                    let r = run_cd(opts)?;
                    let s = json!({
                        "xi_star": r.xi_star,
                        "lundberg": [r.lundberg.ci_lo, r.lundberg.ci_hi],
                        "residual_variance": r.fit.s2,
                        "dynamic": r.summary,
                    });
                    (r.run, r.data, s)
                }
                name @ (ExampleName::Radiometer3pt | ExampleName::Radiometer5pt) => {
                    let three = run_radiometer(3, opts)?;
                    let five = run_radiometer(5, opts)?;
                    let mut cmp = String::from("model,mse,iw,cp,mean_median,sd_median\n");
                    for (label, s) in [("3pt", &three.summary), ("5pt", &five.summary)] {
                        let _ = writeln!(
                            cmp,
                            "{label},{:.4},{:.4},{:.4},{:.4},{:.4}",
                            s.metrics.mse, s.metrics.iw, s.metrics.cp, s.mean_median, s.sd_median
                        );
                    }
                    emit_text("comparison.csv", &cmp, &mut outputs)?;
                    report.push_str(&cmp);
                    let s = json!({ "three_point": three.summary, "five_point": five.summary });
                    let chosen = if name == ExampleName::Radiometer3pt { three } else { five };
                    (chosen.run, chosen.data, s)
                }
                ExampleName::Vertex => {
                    let r = run_vertex(opts)?;
                    let s = json!({
                        "upper_below_truth": r.upper_below_truth,
                        "censored_fraction": r.censored,
                        "mean_vertex": r.mean_vertex,
                        "dynamic": r.summary,
                    });
                    (r.run, r.data, s)
                }
                ExampleName::Shock => {
                    let r = run_shock(opts.shock_layout, opts)?;
                    let mut gam = String::from("t,gamma\n");
                    for (t, g) in r.gammas.iter().enumerate() {
                        let _ = writeln!(gam, "{},{g}", t + 1);
                    }
                    emit_text("shock_factors.csv", &gam, &mut outputs)?;
                    let s = json!({
                        "layout": opts.shock_layout,
                        "static_mse": r.static_mse,
                        "inside": { "width": r.inside.0, "coverage": r.inside.1 },
                        "outside": { "width": r.outside.0, "coverage": r.outside.1 },
                        "dynamic": r.summary,
                    });
                    (r.run, r.data, s)
                }
            };
            let truth = &data.x0_true;
            let t = series_t(truth.len());
            let (first, second) = input_csvs(&t, &data);
            emit_text("first_stage.csv", &first, &mut outputs)?;
            emit_text("second_stage.csv", &second, &mut outputs)?;
            emit_text("series.csv", &posterior_csv(&t, &run.posteriors, Some(truth)), &mut outputs)?;
            write_json(&out.join("summary.json"), &summary)?;
            outputs.push("summary.json".into());
            report.push_str(&run_report(&run));
            let m = replication_metrics(&run.medians(), &run.lower(), &run.upper(), truth)?;
            let _ = writeln!(report, "mse {:.4}  iw {:.4}  cp {:.4}", m.mse, m.iw, m.cp);
        }
    }

    outputs.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode,
        example,
        config: config.clone(),
        outputs,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let _ = writeln!(report, "results in {}", out.display());
    Ok(report)
}

/// Scenario inputs in the format `calibrate` reads back.
fn input_csvs(t: &[f64], data: &ScenarioData) -> (String, String) {
    let mut first = String::from("t");
    for r in data.design.refs() {
        let _ = write!(first, ",{r}");
    }
    first.push('\n');
    let mut second = String::from("t,y0\n");
    for ((t, y), y0) in t.iter().zip(&data.ys).zip(&data.y0) {
        let _ = write!(first, "{t}");
        for v in y {
            let _ = write!(first, ",{v}");
        }
        first.push('\n');
        let _ = writeln!(second, "{t},{y0}");
    }
    (first, second)
}

fn run_report(run: &CalibrationRun) -> String {
    let med = run.medians();
    let flagged = run.posteriors.iter().filter(|p| p.flags.censored()).count();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} steps: mean median {:.4}, mean 95% interval [{:.4}, {:.4}], {} censored",
        med.len(),
        mean(&med),
        mean(&run.lower()),
        mean(&run.upper()),
        flagged
    );
    let _ = writeln!(
        s,
        "alpha_E {:.4e} (standardized), {} failed candidates, mean resampled sigma2_E {:.4e}",
        run.alpha_e,
        run.failed_candidates,
        run.resampled_sigma2_e()
    );
    s
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot a dyncal series CSV: posterior median with its 95% band.

usage: plot_series.py series.csv [figure.png]
"""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    src = sys.argv[1]
    dst = sys.argv[2] if len(sys.argv) > 2 else src.rsplit(".", 1)[0] + ".png"
    with open(src, newline="") as f:
        rows = list(csv.DictReader(f))
    t = [float(r["t"]) for r in rows]
    med = [float(r["median"]) for r in rows]
    lo = [float(r["lo95"]) for r in rows]
    hi = [float(r["hi95"]) for r in rows]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.fill_between(t, lo, hi, color="tab:blue", alpha=0.25, linewidth=0, label="95% interval")
    ax.plot(t, med, color="tab:blue", linewidth=0.8, label="median")
    if rows and "truth" in rows[0]:
        ax.plot(t, [float(r["truth"]) for r in rows], color="black", linestyle="--", linewidth=0.8, label="truth")
    ax.set_xlabel("t")
    ax.set_ylabel("x0")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(dst, dpi=150)
    print(dst)


if __name__ == "__main__":
    main()
"#;
