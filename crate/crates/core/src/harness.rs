//! End-to-end comparison experiments: solve an instance, rearrange the solution and the data,
//! evaluate the symmetrized solution and compare both the rearrangements and the gradient
//! integrals.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::grid::GridFunction;
use crate::pdesolve::{
    certify_hypotheses, solve, CertificationReport, Domain, DomainShape, DriftSign, Flux, ProblemInstance,
    SolverDiagnostics, SolverOptions,
};
use crate::rearrange::{decreasing_rearrangement, pseudo_rearrangement};
use crate::symsol::{gradient_integral, symmetrized_solution, Drift, SymmetrizedProblem};

/// Exponents `q` at which the gradient integrals are compared.
pub const Q_VALUES: [f64; 3] = [0.5, 1.0, 2.0];
/// `ε_grid = GRID_CONSTANT · h`.
pub const GRID_CONSTANT: f64 = 3.0;
/// `max |u* - v*|` below which a report carries the equality flag.
pub const EQUALITY_TOL: f64 = 1e-3;
/// Monte-Carlo samples for the hypothesis check.
pub const CERTIFY_SAMPLES: usize = 1000;
pub const CERTIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    /// `disk`, `ellipse`, `rectangle`, `square` or `lshape`.
    pub shape: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub nx: usize,
}

impl DomainConfig {
    pub fn shape(&self) -> Result<DomainShape> {
        let p = &self.params;
        let need = |k: usize| -> Result<()> {
            if p.len() == k {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "domain `{}` takes {k} parameter(s), got {}",
                    self.shape,
                    p.len()
                )))
            }
        };
        let s = match self.shape.as_str() {
            "disk" => {
                need(1)?;
                DomainShape::Disk { radius: p[0] }
            }
            "ellipse" => {
                need(2)?;
                DomainShape::Ellipse { a: p[0], b: p[1] }
            }
            "rectangle" => {
                need(2)?;
                DomainShape::Rectangle {
                    width: p[0],
                    height: p[1],
                }
            }
            "square" => {
                need(1)?;
                DomainShape::Rectangle {
                    width: p[0],
                    height: p[0],
                }
            }
            "lshape" => {
                need(1)?;
                DomainShape::LShape { size: p[0] }
            }
            other => return Err(Error::Config(format!("unknown domain shape `{other}`"))),
        };
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxConfig {
    /// `"finsler"`.
    Named(String),
    Matrix {
        matrix: [[f64; 2]; 2],
    },
}

impl Default for FluxConfig {
    fn default() -> Self {
        FluxConfig::Named("finsler".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Field spec for `B`: `const:c`, `bump:amp,width` or a grid-function JSON path.
    #[serde(rename = "B")]
    pub b: String,
    /// `+1`, `-1` or `pattern`.
    #[serde(default = "default_sign")]
    pub sign: String,
}

fn default_sign() -> String {
    "+1".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMode {
    /// `b̃` from the computed solution.
    #[default]
    Pseudo,
    /// `b̃ ≡ ‖B‖_∞`.
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(default)]
    pub name: String,
    pub domain: DomainConfig,
    #[serde(default = "default_gauge")]
    pub gauge: String,
    #[serde(default)]
    pub flux: FluxConfig,
    pub drift: DriftConfig,
    pub f: String,
    #[serde(default)]
    pub drift_mode: DriftMode,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_gauge() -> String {
    "euclidean".into()
}

/// Command-line overrides for `nx` and the Picard tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl InstanceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn with_overrides(mut self, o: Overrides) -> Self {
        if let Some(n) = o.grid {
            self.domain.nx = n;
        }
        if let Some(t) = o.tol {
            self.tol = Some(t);
        }
        self
    }

    pub fn sign(&self) -> Result<DriftSign> {
        match self.drift.sign.trim() {
            "+1" | "1" | "+" | "plus" => Ok(DriftSign::Plus),
            "-1" | "-" | "minus" => Ok(DriftSign::Minus),
            "pattern" => Ok(DriftSign::Pattern),
            other => Err(Error::Config(format!("unknown drift sign `{other}`"))),
        }
    }

    pub fn flux(&self) -> Result<Flux> {
        match &self.flux {
            FluxConfig::Named(s) if s == "finsler" => Ok(Flux::FinslerLaplacian),
            FluxConfig::Named(s) => Err(Error::Config(format!("unknown flux `{s}`"))),
            FluxConfig::Matrix { matrix } => Ok(Flux::LinearMatrix(*matrix)),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        o
    }

    /// Assembles the problem; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<ProblemInstance> {
        let domain = Domain::new(self.domain.shape()?, self.domain.nx)?;
        let gauge = Gauge::parse(&self.gauge, 2).map_err(|e| Error::Config(e.to_string()))?;
        let b = field(&domain, &self.drift.b, base)?;
        let f = field(&domain, &self.f, base)?;
        ProblemInstance::new(domain, gauge, self.flux()?, b, self.sign()?, f)
    }
}

/// `const:c`, `bump:amp,width` (`amp · exp(-|x|²/width²)`), `file:path` or a bare path.
fn field(domain: &Domain, spec: &str, base: &Path) -> Result<GridFunction<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number `{s}` in field `{spec}`")))
    };
    if let Some(c) = spec.strip_prefix("const:") {
        return domain.constant(num(c)?);
    }
    if let Some(rest) = spec.strip_prefix("bump:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!("bump needs `amp,width`, got `{rest}`")));
        }
        let (amp, w) = (num(parts[0])?, num(parts[1])?);
        if !(w > 0.0) {
            return Err(Error::Config("bump width must be positive".into()));
        }
        return domain.sample(|x| amp * (-(x[0] * x[0] + x[1] * x[1]) / (w * w)).exp());
    }
    let path = spec.strip_prefix("file:").unwrap_or(spec);
    let path = if Path::new(path).is_absolute() {
        PathBuf::from(path)
    } else {
        base.join(path)
    };
    let g = GridFunction::read_json(&path)?;
    let mask = domain.constant(0.0)?;
    if !g.same_grid(&mask) {
        return Err(Error::GridMismatch);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "REJECTED")]
    Rejected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Rejected => "REJECTED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientComparison {
    pub q: f64,
    /// `∫_Ω H^q(∇u)`.
    pub solution: f64,
    /// `∫_{Ω⋆} H^q(∇v)`.
    pub symmetrized: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// `u*` and `v*` at `s_k = k h²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub s: Vec<f64>,
    pub u_star: Vec<f64>,
    pub v_star: Vec<f64>,
}

impl Curves {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "s,u_star,v_star")?;
        for k in 0..self.s.len() {
            writeln!(out, "{},{},{}", self.s[k], self.u_star[k], self.v_star[k])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub instance: String,
    pub config: InstanceConfig,
    pub grid: [usize; 2],
    pub h: f64,
    pub grid_tolerance: f64,
    pub measure: f64,
    pub kappa: f64,
    pub certification: CertificationReport,
    pub solver: Option<SolverDiagnostics>,
    /// `min_s v*(s) - u*(s)`.
    pub margin: Option<f64>,
    pub max_abs_difference: Option<f64>,
    pub equality: bool,
    pub pointwise_pass: bool,
    pub gradient_integrals: Vec<GradientComparison>,
    /// `max |v_pseudo - v_beta|` when `B` is constant.
    pub beta_consistency: Option<f64>,
    pub verdict: Verdict,
    pub curves: Option<Curves>,
}

/// Runs one experiment. Instances failing the hypothesis check are reported as REJECTED.
pub fn run_instance(cfg: &InstanceConfig, base: &Path) -> Result<ExperimentReport> {
    let inst = cfg.build(base)?;
    let spec = inst.domain.spec;
    let h = spec.h;
    let eps = GRID_CONSTANT * h;
    let cert = certify_hypotheses(&inst, CERTIFY_SAMPLES, CERTIFY_SEED);
    let mut report = ExperimentReport {
        instance: cfg.name.clone(),
        config: cfg.clone(),
        grid: [spec.nx, spec.ny],
        h,
        grid_tolerance: eps,
        measure: inst.f.measure(),
        kappa: inst.gauge.kappa(),
        certification: cert,
        solver: None,
        margin: None,
        max_abs_difference: None,
        equality: false,
        pointwise_pass: false,
        gradient_integrals: Vec::new(),
        beta_consistency: None,
        verdict: Verdict::Rejected,
        curves: None,
    };
    if !cert.passed {
        return Ok(report);
    }
    let sol = solve(&inst, &cfg.solver_options())?;
    report.solver = Some(sol.diagnostics);

    let g = &inst.gauge;
    let u_star = decreasing_rearrangement(&sol.u);
    let f_star = decreasing_rearrangement(&inst.f);
    let measure = sol.u.measure();
    let b_max = inst.b.max_abs();
    let b_const = inst.b.masked().all(|(_, v)| v == b_max);
    let pseudo = Drift::Pseudo(pseudo_rearrangement(&inst.b, &sol.u, g)?);
    let drift = match cfg.drift_mode {
        DriftMode::Pseudo => pseudo.clone(),
        DriftMode::Beta => Drift::Constant(b_max),
    };
    let problem = SymmetrizedProblem::new(g.clone(), measure, f_star, drift, 2.0)?;

    // u* is the k-th largest value on [(k-1)h², kh²); v* is smallest there at kh²
    let cells = sol.u.cell_count();
    let kappa = g.kappa();
    let cell = h * h;
    let s: Vec<f64> = (1..=cells).map(|k| k as f64 * cell).collect();
    let radii: Vec<f64> = s.iter().map(|&sk| (sk / kappa).sqrt().min(problem.radius())).collect();
    let v = symmetrized_solution(&problem, &radii)?;
    let v_star: Vec<f64> = radii.iter().map(|&r| v.eval(r)).collect();
    let u_vals: Vec<f64> = u_star.values().to_vec();
    let mut margin = f64::INFINITY;
    let mut max_abs = 0.0f64;
    for k in 0..cells {
        let d = v_star[k] - u_vals[k];
        margin = margin.min(d);
        max_abs = max_abs.max(d.abs());
    }
    report.margin = Some(margin);
    report.max_abs_difference = Some(max_abs);
    report.equality = max_abs <= EQUALITY_TOL;
    report.pointwise_pass = margin >= -eps;

    for &q in &Q_VALUES {
        let lhs = sol.gradient_power_integral(g, q);
        let mut pq = problem.clone();
        pq.q = q;
        let rhs = gradient_integral(&pq)?;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::MAX
        } else {
            1.0
        };
        report.gradient_integrals.push(GradientComparison {
            q,
            solution: lhs,
            symmetrized: rhs,
            ratio,
            pass: lhs <= (1.0 + eps) * rhs,
        });
    }

    if b_const {
        let other = match cfg.drift_mode {
            DriftMode::Pseudo => Drift::Constant(b_max),
            DriftMode::Beta => pseudo,
        };
        let mut p2 = problem.clone();
        p2.drift = other;
        let v2 = symmetrized_solution(&p2, &radii)?;
        let diff = v
            .values
            .iter()
            .zip(&v2.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        report.beta_consistency = Some(diff);
    }

    let grads_ok = report.gradient_integrals.iter().all(|c| c.pass);
    report.verdict = if report.pointwise_pass && grads_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report.curves = Some(Curves {
        s,
        u_star: u_vals,
        v_star,
    });
    Ok(report)
}

/// Reads a config file and runs it.
pub fn run_comparison(path: impl AsRef<Path>, o: Overrides) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let cfg = InstanceConfig::read(path)?.with_overrides(o);
    let base = path.parent().unwrap_or(Path::new("."));
    run_instance(&cfg, base)
}

/// The built-in suite: four domains times three drifts, all with `f ≡ 1`.
pub fn builtin_configs(nx: usize) -> Vec<InstanceConfig> {
    let domains: [(&str, &str, Vec<f64>, &str); 4] = [
        ("disk", "disk", vec![1.0], "euclidean"),
        ("square", "square", vec![2.0], "ellipse:1.5,1"),
        ("ellipse", "ellipse", vec![1.0, 0.5], "ellipse:1,2"),
        ("lshape", "lshape", vec![1.0], "euclidean"),
    ];
    let drifts = [
        ("b0", "const:0", "+1"),
        ("b1", "const:1", "-1"),
        ("bump", "bump:2,0.5", "-1"),
    ];
    let mut out = Vec::new();
    for (dname, shape, params, gauge) in &domains {
        for (bname, b, sign) in &drifts {
            out.push(InstanceConfig {
                name: format!("{dname}-{bname}"),
                domain: DomainConfig {
                    shape: shape.to_string(),
                    params: params.clone(),
                    nx,
                },
                gauge: gauge.to_string(),
                flux: FluxConfig::default(),
                drift: DriftConfig {
                    b: b.to_string(),
                    sign: sign.to_string(),
                },
                f: "const:1".into(),
                drift_mode: DriftMode::Pseudo,
                tol: None,
            });
        }
    }
    out
}

/// Writes the built-in configs as `<name>.json` into `dir`.
pub fn write_builtin_suite(dir: impl AsRef<Path>, nx: usize) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    builtin_configs(nx)
        .into_iter()
        .map(|c| {
            let p = dir.join(format!("{}.json", c.name));
            fs::write(&p, serde_json::to_string_pretty(&c)?)?;
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub instance: String,
    /// `PASS`, `FAIL`, `REJECTED`, or `FAILED` when the run errored.
    pub status: String,
    pub margin: Option<f64>,
    pub ratios: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    /// 0 when every row passed, 2 if any run errored, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.status == "FAILED") {
            2
        } else if self.rows.iter().all(|r| r.status == "PASS") {
            0
        } else {
            1
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let qs: Vec<String> = Q_VALUES.iter().map(|q| format!("ratio_q{q}")).collect();
        writeln!(out, "instance,status,margin,{},error", qs.join(","))?;
        for r in &self.rows {
            let ratios: Vec<String> = (0..Q_VALUES.len())
                .map(|k| r.ratios.get(k).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(
                out,
                "{},{},{},{},{}",
                r.instance,
                r.status,
                r.margin.map(|m| m.to_string()).unwrap_or_default(),
                ratios.join(","),
                err
            )?;
        }
        Ok(())
    }
}

fn row(name: String, res: &Result<ExperimentReport>) -> SuiteRow {
    match res {
        Ok(r) => SuiteRow {
            instance: name,
            status: r.verdict.as_str().into(),
            margin: r.margin,
            ratios: r.gradient_integrals.iter().map(|c| c.ratio).collect(),
            error: None,
        },
        Err(e) => SuiteRow {
            instance: name,
            status: "FAILED".into(),
            margin: None,
            ratios: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs a list of configs concurrently, writing `<name>.json` reports and `summary.csv` into
/// `out` when given. Results keep the input order.
pub fn run_configs(configs: &[(InstanceConfig, PathBuf)], out: Option<&Path>) -> Result<SuiteSummary> {
    let results: Vec<Result<ExperimentReport>> = configs.par_iter().map(|(c, base)| run_instance(c, base)).collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::with_capacity(results.len());
    for ((cfg, _), res) in configs.iter().zip(&results) {
        if let (Some(dir), Ok(rep)) = (out, res) {
            fs::write(
                dir.join(format!("{}.json", cfg.name)),
                serde_json::to_string_pretty(rep)?,
            )?;
        }
        rows.push(row(cfg.name.clone(), res));
    }
    let summary = SuiteSummary { rows };
    if let Some(dir) = out {
        summary.write_csv(fs::File::create(dir.join("summary.csv"))?)?;
    }
    Ok(summary)
}

/// Runs every `*.json` config in `dir` (sorted by file name). Configs that fail to parse are
/// reported as FAILED rows.
pub fn run_suite(dir: impl AsRef<Path>, out: Option<&Path>, o: Overrides) -> Result<SuiteSummary> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut configs = Vec::new();
    let mut bad = Vec::new();
    for p in &paths {
        match InstanceConfig::read(p) {
            Ok(c) => configs.push((c.with_overrides(o), dir.to_path_buf())),
            Err(e) => bad.push((p.file_stem().unwrap().to_string_lossy().into_owned(), e)),
        }
    }
    let mut summary = run_configs(&configs, out)?;
    for (name, e) in bad {
        summary.rows.push(row(name, &Err(e)));
    }
    summary.rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    if let Some(dir) = out {
        summary.write_csv(fs::File::create(dir.join("summary.csv"))?)?;
    }
    Ok(summary)
}
