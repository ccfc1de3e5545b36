use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anisym::gauge::check_duality;
use anisym::geomeasure::{cone_coarea_check, isoperimetric_suite};
use anisym::harness::{builtin_configs, run_comparison, run_configs, run_suite, InstanceConfig, Overrides, Verdict};
use anisym::pdesolve::solve;
use anisym::rearrange::decreasing_rearrangement;
use anisym::symsol::{gradient_integral, symmetrized_solution, uniform_radii, Drift};
use anisym::{Gauge, GridFunction, MonotoneProfile, PseudoRearrangement, SymmetrizedProblem};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "anisym", version, about = "Convex symmetrization experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Cells along the longer side of the domain's bounding box.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Picard (or quadrature) tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory or file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalization, bounds and duality residuals of a gauge.
    GaugeInfo {
        #[arg(long, default_value = "euclidean")]
        gauge: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Decreasing rearrangement of a grid function, written as an `s,value` CSV.
    Rearrange {
        /// Grid-function JSON.
        input: PathBuf,
    },
    /// Geometric checks.
    Geom {
        #[command(subcommand)]
        check: GeomCmd,
    },
    /// Symmetrized solution `v` as a `rho,v,dv` CSV.
    Symmetrize {
        #[arg(long, default_value = "euclidean")]
        gauge: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        measure: f64,
        /// Source profile CSV or `const:c`.
        #[arg(long, default_value = "const:1")]
        f: String,
        /// Drift profile CSV (`r,btilde`), `beta:v` or `none`.
        #[arg(long, default_value = "none")]
        drift: String,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Number of radial intervals.
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Solves an instance and writes `u.json` and `diagnostics.json`.
    Solve { config: PathBuf },
    /// Runs one comparison experiment.
    Compare { config: PathBuf },
    /// Runs every config in a directory, or the built-in suite.
    Suite {
        dir: Option<PathBuf>,
        #[arg(long)]
        builtin: bool,
    },
}

#[derive(Subcommand)]
enum GeomCmd {
    Check {
        #[arg(long, default_value = "euclidean")]
        gauge: String,
        #[arg(long, value_enum)]
        suite: GeomSuite,
        #[arg(long, default_value_t = 100)]
        polygons: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeomSuite {
    Isoperimetric,
    Coarea,
    Euler,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        // reader closed stdout early (`| head`)
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        grid: c.grid,
        tol: c.tol,
    }
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut s = io::stdout().lock();
            s.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                s.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let c = cli.common;
    match cli.cmd {
        Cmd::GaugeInfo { gauge, n } => {
            let g = Gauge::parse(&gauge, n)?;
            let (lo, hi) = g.bounds();
            let duality = (n == 2).then(|| check_duality(&g, 1000, 1));
            let report = json!({
                "gauge": gauge,
                "kind": g.name(),
                "dim": g.dim(),
                "scale": g.scale(),
                "body_measure": g.body_measure(),
                "kappa": g.kappa(),
                "bounds": [lo, hi],
                "duality": duality,
            });
            emit(c.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Cmd::Rearrange { input } => {
            let u = GridFunction::read_json(&input)?;
            let mut buf = Vec::new();
            decreasing_rearrangement(&u).write_csv(&mut buf)?;
            emit(c.out.as_deref(), std::str::from_utf8(&buf)?)?;
            Ok(0)
        }
        Cmd::Geom {
            check:
                GeomCmd::Check {
                    gauge,
                    suite,
                    polygons,
                    seed,
                },
        } => {
            let g = Gauge::parse(&gauge, 2)?;
            let report = match suite {
                GeomSuite::Isoperimetric => {
                    let r = isoperimetric_suite(&g, polygons, seed)?;
                    json!({"suite": "isoperimetric", "gauge": gauge, "report": r,
                        "pass": r.min_ratio >= 1.0 - 1e-9 && (r.wulff_ratio - 1.0).abs() <= 1e-3})
                }
                GeomSuite::Coarea => {
                    let n = c.grid.unwrap_or(257);
                    let r = cone_coarea_check(&g, n)?;
                    json!({"suite": "coarea", "gauge": gauge, "grid": n, "report": r})
                }
                GeomSuite::Euler => {
                    let r = euler_residual(&g);
                    json!({"suite": "euler", "gauge": gauge, "samples": 720, "max_residual": r})
                }
            };
            emit(c.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Cmd::Symmetrize {
            gauge,
            n,
            measure,
            f,
            drift,
            q,
            points,
        } => {
            let g = Gauge::parse(&gauge, n)?;
            let source = match f.strip_prefix("const:") {
                Some(v) => MonotoneProfile::constant(v.parse().context("bad constant source")?, measure)?,
                None => MonotoneProfile::read_csv(&f)?,
            };
            let drift = if drift == "none" {
                Drift::None
            } else if let Some(b) = drift.strip_prefix("beta:") {
                Drift::Constant(b.parse().context("bad beta")?)
            } else {
                Drift::Pseudo(PseudoRearrangement::read_csv(&drift)?)
            };
            let mut p = SymmetrizedProblem::new(g, measure, source, drift, q)?;
            if let Some(t) = c.tol {
                p = p.with_tol(t)?;
            }
            let sol = symmetrized_solution(&p, &uniform_radii(p.radius(), points))?;
            let mut buf = Vec::new();
            sol.write_csv(&mut buf)?;
            emit(c.out.as_deref(), std::str::from_utf8(&buf)?)?;
            if c.out.is_some() {
                let gi = gradient_integral(&p)?;
                println!(
                    "{}",
                    json!({"radius": p.radius(), "v0": sol.values[0], "q": q, "gradient_integral": gi})
                );
            }
            Ok(0)
        }
        Cmd::Solve { config } => {
            let cfg = InstanceConfig::read(&config)?.with_overrides(overrides(&c));
            let base = config.parent().unwrap_or(Path::new("."));
            let inst = cfg.build(base)?;
            let sol = solve(&inst, &cfg.solver_options())?;
            let diag = serde_json::to_string_pretty(&sol.diagnostics)?;
            match &c.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    sol.u.write_json(dir.join("u.json"))?;
                    fs::write(dir.join("diagnostics.json"), &diag)?;
                }
                None => println!("{diag}"),
            }
            Ok(0)
        }
        Cmd::Compare { config } => {
            let report = run_comparison(&config, overrides(&c))?;
            let code = if report.verdict == Verdict::Pass { 0 } else { 1 };
            match c.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&report)?;
                    match &c.out {
                        Some(dir) => {
                            fs::create_dir_all(dir)?;
                            fs::write(dir.join(format!("{}.json", report.instance)), text)?;
                            println!("{} {}", report.instance, report.verdict.as_str());
                        }
                        None => println!("{text}"),
                    }
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    if let Some(curves) = &report.curves {
                        curves.write_csv(&mut buf)?;
                    }
                    match &c.out {
                        Some(dir) => {
                            fs::create_dir_all(dir)?;
                            fs::write(dir.join(format!("{}.csv", report.instance)), buf)?;
                            println!("{} {}", report.instance, report.verdict.as_str());
                        }
                        None => io::stdout().write_all(&buf)?,
                    }
                }
            }
            Ok(code)
        }
        Cmd::Suite { dir, builtin } => {
            let summary = match (dir, builtin) {
                (Some(_), true) => bail!("pass either a directory or --builtin"),
                (None, false) => bail!("suite needs a directory or --builtin"),
                (Some(d), false) => run_suite(&d, c.out.as_deref(), overrides(&c))?,
                (None, true) => {
                    let configs: Vec<_> = builtin_configs(c.grid.unwrap_or(129))
                        .into_iter()
                        .map(|cfg| (cfg.with_overrides(overrides(&c)), PathBuf::from(".")))
                        .collect();
                    run_configs(&configs, c.out.as_deref())?
                }
            };
            let mut buf = Vec::new();
            summary.write_csv(&mut buf)?;
            match c.format {
                Format::Csv => io::stdout().write_all(&buf)?,
                Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
            }
            Ok(summary.exit_code() as u8)
        }
    }
}

/// `max |⟨∇H(ξ), ξ⟩ - H(ξ)|` over unit vectors at 720 angles, skipping non-smooth rays.
fn euler_residual(g: &Gauge) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..720 {
        let t = (k as f64 + 0.37) * std::f64::consts::TAU / 720.0;
        let xi = [t.cos(), t.sin()];
        if let Ok(d) = g.gradient(&xi) {
            worst = worst.max((d[0] * xi[0] + d[1] * xi[1] - g.evaluate(&xi)).abs());
        }
    }
    worst
}
