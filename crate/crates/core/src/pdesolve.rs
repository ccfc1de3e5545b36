//! Finite-difference solver for `-div a(x, u, ∇u) + b(x, ∇u) = f` in `Ω`, `u = 0` on `∂Ω`.
//!
//! Unknowns live at the centers of grid cells inside `Ω`. The boundary is described by a level
//! set; when a stencil arm leaves the domain, the distance `θh` to the boundary enters the
//! diagonal only (`a/(θh²)`), which keeps the matrix symmetric and the solution second order.
//! The drift `b = B(x) H(∇u) s(x)` is lagged in a damped Picard iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{Gauge, GaugeKind};
use crate::grid::{GridFunction, GridSpec};

/// Smallest boundary fraction `θ` used in the stencil.
pub const MIN_THETA: f64 = 1e-6;

/// Planar domains centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DomainShape {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
    },
    /// `[-s, s]²` without the open quadrant `x > 0, y > 0`.
    #[serde(rename = "lshape")]
    LShape {
        size: f64,
    },
}

impl DomainShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainShape::Disk { radius } => radius > 0.0 && radius.is_finite(),
            DomainShape::Ellipse { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            DomainShape::Rectangle { width, height } => {
                width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()
            }
            DomainShape::LShape { size } => size > 0.0 && size.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!("invalid domain {self:?}")))
        }
    }

    /// Level set: negative inside, zero on the boundary.
    pub fn level_set(&self, x: [f64; 2]) -> f64 {
        match *self {
            DomainShape::Disk { radius } => x[0].hypot(x[1]) - radius,
            DomainShape::Ellipse { a, b } => (x[0] / a).hypot(x[1] / b) - 1.0,
            DomainShape::Rectangle { width, height } => (x[0].abs() - width / 2.0).max(x[1].abs() - height / 2.0),
            DomainShape::LShape { size } => {
                let square = x[0].abs().max(x[1].abs()) - size;
                square.max(x[0].min(x[1]))
            }
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.level_set(x) < 0.0
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let (w, h) = match *self {
            DomainShape::Disk { radius } => (radius, radius),
            DomainShape::Ellipse { a, b } => (a, b),
            DomainShape::Rectangle { width, height } => (width / 2.0, height / 2.0),
            DomainShape::LShape { size } => (size, size),
        };
        ([-w, -h], [w, h])
    }

    /// Exact area.
    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            DomainShape::Disk { radius } => PI * radius * radius,
            DomainShape::Ellipse { a, b } => PI * a * b,
            DomainShape::Rectangle { width, height } => width * height,
            DomainShape::LShape { size } => 3.0 * size * size,
        }
    }
}

/// A domain shape discretized on a grid with `nx` cells along the longer side of its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub shape: DomainShape,
    pub spec: GridSpec<f64>,
}

impl Domain {
    pub fn new(shape: DomainShape, nx: usize) -> Result<Self> {
        shape.validate()?;
        if nx < 3 {
            return Err(Error::InvalidGrid("need at least three cells per side".into()));
        }
        let (lo, hi) = shape.bounding_box();
        let spec = GridSpec::covering(lo, hi, nx)?;
        Ok(Self { shape, spec })
    }

    /// Samples `value` on the cells inside the domain.
    pub fn sample(&self, value: impl FnMut([f64; 2]) -> f64) -> Result<GridFunction<f64>> {
        let shape = self.shape;
        GridFunction::from_fn(self.spec, |x| shape.contains(x), value)
    }

    pub fn constant(&self, c: f64) -> Result<GridFunction<f64>> {
        self.sample(|_| c)
    }

    /// Fraction `θ ∈ (0, 1]` of the way from `x` (inside) to `y` (outside) where the boundary lies.
    fn boundary_fraction(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let at = |t: f64| {
            self.shape
                .level_set([x[0] + t * (y[0] - x[0]), x[1] + t * (y[1] - x[1])])
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).max(MIN_THETA)
    }
}

/// Principal part `a(x, η, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Flux {
    /// `a = H(ξ) ∇H(ξ)`.
    FinslerLaplacian,
    /// `a = A ξ` with a constant symmetric matrix.
    LinearMatrix([[f64; 2]; 2]),
}

/// The sign factor `s(x)` of the drift `B(x) H(ξ) s(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftSign {
    Plus,
    Minus,
    /// `+1` where `x·y >= 0`, `-1` elsewhere.
    Pattern,
}

impl DriftSign {
    pub fn at(&self, x: [f64; 2]) -> f64 {
        match self {
            DriftSign::Plus => 1.0,
            DriftSign::Minus => -1.0,
            DriftSign::Pattern => {
                if x[0] * x[1] >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Matrix `A` with `a(x, η, ξ) = Aξ` for a smooth quadratic gauge, `H(ξ)² = ξ·Aξ`.
pub fn finsler_matrix(g: &Gauge<f64>) -> Result<[[f64; 2]; 2]> {
    if g.dim() != 2 {
        return Err(Error::InvalidProblem("the solver is planar".into()));
    }
    let c2 = g.scale() * g.scale();
    match g.kind() {
        GaugeKind::Euclidean => Ok([[c2, 0.0], [0.0, c2]]),
        GaugeKind::Ellipsoidal { matrix } => Ok([[c2 * matrix[0], c2 * matrix[1]], [c2 * matrix[2], c2 * matrix[3]]]),
        _ => Err(Error::InvalidProblem(format!(
            "the Finsler Laplacian of a {} gauge is not supported by the solver",
            g.name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub domain: Domain,
    pub gauge: Gauge<f64>,
    pub flux: Flux,
    /// `B >= 0`.
    pub b: GridFunction<f64>,
    pub sign: DriftSign,
    pub f: GridFunction<f64>,
}

impl ProblemInstance {
    pub fn new(
        domain: Domain,
        gauge: Gauge<f64>,
        flux: Flux,
        b: GridFunction<f64>,
        sign: DriftSign,
        f: GridFunction<f64>,
    ) -> Result<Self> {
        let inst = Self {
            domain,
            gauge,
            flux,
            b,
            sign,
            f,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let mask = self.domain.sample(|_| 0.0)?;
        for g in [&self.b, &self.f] {
            if !g.same_grid(&mask) {
                return Err(Error::GridMismatch);
            }
        }
        if self.b.min_value() < 0.0 {
            return Err(Error::InvalidProblem("B must be nonnegative".into()));
        }
        self.matrix()?;
        Ok(())
    }

    /// Coefficient matrix of the (linear) principal part.
    pub fn matrix(&self) -> Result<[[f64; 2]; 2]> {
        match &self.flux {
            Flux::FinslerLaplacian => finsler_matrix(&self.gauge),
            Flux::LinearMatrix(a) => {
                if (a[0][1] - a[1][0]).abs() > 1e-12 * (a[0][1].abs() + 1.0) {
                    return Err(Error::InvalidProblem("flux matrix must be symmetric".into()));
                }
                Ok(*a)
            }
        }
    }

    fn flux_at(&self, xi: [f64; 2]) -> [f64; 2] {
        match &self.flux {
            Flux::FinslerLaplacian => {
                let h = self.gauge.eval2(xi[0], xi[1]);
                match self.gauge.gradient(&xi) {
                    Ok(d) => [h * d[0], h * d[1]],
                    Err(_) => [0.0, 0.0],
                }
            }
            Flux::LinearMatrix(a) => [a[0][0] * xi[0] + a[0][1] * xi[1], a[1][0] * xi[0] + a[1][1] * xi[1]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationReport {
    pub samples: usize,
    /// `min ⟨a(x, ξ), ξ⟩ - H(ξ)²` over unit-box samples.
    pub ellipticity_margin: f64,
    /// `min B(x) H(ξ) - |b(x, ξ)|`.
    pub drift_margin: f64,
    pub passed: bool,
}

/// Monte-Carlo check of `⟨a(x, η, ξ), ξ⟩ >= H(ξ)²` and `|b(x, ξ)| <= B(x) H(ξ)`.
pub fn certify_hypotheses(inst: &ProblemInstance, samples: usize, seed: u64) -> CertificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<usize> = inst.b.masked().map(|(k, _)| k).collect();
    let spec = inst.domain.spec;
    let mut ell = f64::INFINITY;
    let mut drift = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let k = cells[rng.gen_range(0..cells.len())];
        let x = spec.center(k % spec.nx, k / spec.nx);
        let xi = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let a = inst.flux_at(xi);
        let h = inst.gauge.eval2(xi[0], xi[1]);
        ell = ell.min(a[0] * xi[0] + a[1] * xi[1] - h * h);
        let bx = inst.b.values[k];
        let b = bx * h * inst.sign.at(x);
        drift = drift.min(bx * h - b.abs());
    }
    // rounding in the Euler relation ⟨H∇H, ξ⟩ = H²
    let slack = -1e-12;
    CertificationReport {
        samples: samples.max(1),
        ellipticity_margin: ell,
        drift_margin: drift,
        passed: ell >= slack && drift >= slack,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when `‖u_{k+1} - u_k‖_∞ <= tol`.
    pub tol: f64,
    pub relaxation: f64,
    pub max_iterations: usize,
    pub linear_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            relaxation: 0.7,
            max_iterations: 500,
            linear_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub relaxation: f64,
    pub linear_tol: f64,
    pub linear_iterations: usize,
}

/// Neighbours in the order west, east, south, north.
const DIRS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Symmetric 5-point operator on the unknowns inside the domain.
#[derive(Debug, Clone)]
struct Discretization {
    nx: usize,
    ny: usize,
    h: f64,
    /// grid cell of each unknown
    cells: Vec<usize>,
    /// unknown index of each grid cell
    index: Vec<Option<usize>>,
    /// per unknown and direction: neighbour unknown, or the boundary fraction θ
    arms: Vec<[Arm; 4]>,
    diag: Vec<f64>,
    /// off-diagonal weights (negative), matching `arms`
    off: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arm {
    Inside(usize),
    Boundary(f64),
}

impl Discretization {
    fn new(domain: &Domain, a: [[f64; 2]; 2]) -> Result<Self> {
        if a[0][1].abs() > 0.0 || a[1][0].abs() > 0.0 {
            return Err(Error::InvalidProblem(
                "the 5-point solver needs a diagonal flux matrix".into(),
            ));
        }
        if !(a[0][0] > 0.0 && a[1][1] > 0.0) {
            return Err(Error::InvalidProblem("flux matrix must be positive definite".into()));
        }
        let spec = domain.spec;
        let (nx, ny, h) = (spec.nx, spec.ny, spec.h);
        let mut index = vec![None; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if domain.shape.contains(spec.center(i, j)) {
                    index[spec.index(i, j)] = Some(cells.len());
                    cells.push(spec.index(i, j));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidGrid("no cell center inside the domain".into()));
        }
        let coef = [a[0][0], a[0][0], a[1][1], a[1][1]];
        let h2 = h * h;
        let mut arms = Vec::with_capacity(cells.len());
        let mut diag = Vec::with_capacity(cells.len());
        let mut off = Vec::with_capacity(cells.len());
        for &c in &cells {
            let (i, j) = ((c % nx) as isize, (c / nx) as isize);
            let x = spec.center(i as usize, j as usize);
            let mut arm = [Arm::Boundary(1.0); 4];
            let mut d = 0.0;
            let mut o = [0.0; 4];
            for (k, &(di, dj)) in DIRS.iter().enumerate() {
                let (ni, nj) = (i + di, j + dj);
                let inside = ni >= 0
                    && nj >= 0
                    && (ni as usize) < nx
                    && (nj as usize) < ny
                    && index[spec.index(ni as usize, nj as usize)].is_some();
                if inside {
                    let n = index[spec.index(ni as usize, nj as usize)].unwrap();
                    arm[k] = Arm::Inside(n);
                    d += coef[k] / h2;
                    o[k] = -coef[k] / h2;
                } else {
                    let y = [x[0] + di as f64 * h, x[1] + dj as f64 * h];
                    let theta = domain.boundary_fraction(x, y);
                    arm[k] = Arm::Boundary(theta);
                    d += coef[k] / (theta * h2);
                }
            }
            arms.push(arm);
            diag.push(d);
            off.push(o);
        }
        Ok(Self {
            nx,
            ny,
            h,
            cells,
            index,
            arms,
            diag,
            off,
        })
    }

    fn len(&self) -> usize {
        self.cells.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.len() {
            let mut s = self.diag[k] * x[k];
            for (d, arm) in self.arms[k].iter().enumerate() {
                if let Arm::Inside(n) = arm {
                    s += self.off[k][d] * x[*n];
                }
            }
            y[k] = s;
        }
    }

    /// Jacobi-preconditioned conjugate gradients from the initial guess in `x`.
    fn solve(&self, rhs: &[f64], x: &mut [f64], tol: f64) -> Result<usize> {
        let n = self.len();
        let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let mut r = vec![0.0; n];
        self.apply(x, &mut r);
        for k in 0..n {
            r[k] = rhs[k] - r[k];
        }
        let mut z: Vec<f64> = (0..n).map(|k| r[k] / self.diag[k]).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let max_iter = 20 * n + 100;
        for it in 0..max_iter {
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * norm_b {
                return Ok(it);
            }
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::LinearSolver("matrix is not positive definite".into()));
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                z[k] = r[k] / self.diag[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::LinearSolver(format!(
            "CG did not converge in {max_iter} iterations"
        )))
    }

    /// Gradient at unknown `k` from three-point differences that use the boundary distance
    /// (and `u = 0`) where an arm leaves the domain.
    fn gradient(&self, u: &[f64], k: usize) -> [f64; 2] {
        let side = |d: usize| -> (f64, f64) {
            match self.arms[k][d] {
                Arm::Inside(n) => (u[n], self.h),
                Arm::Boundary(theta) => (0.0, theta * self.h),
            }
        };
        let c = u[k];
        let deriv = |(ul, hl): (f64, f64), (ur, hr): (f64, f64)| {
            (hl * hl * (ur - c) + hr * hr * (c - ul)) / (hl * hr * (hl + hr))
        };
        [deriv(side(0), side(1)), deriv(side(2), side(3))]
    }
}

/// Grid solution together with the geometry needed for boundary-aware gradients.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction<f64>,
    pub diagnostics: SolverDiagnostics,
    disc: Discretization,
}

impl Solution {
    /// `∇u` at every masked cell, in storage order.
    pub fn gradients(&self) -> Vec<[f64; 2]> {
        let u: Vec<f64> = self.disc.cells.iter().map(|&c| self.u.values[c]).collect();
        (0..self.disc.len()).map(|k| self.disc.gradient(&u, k)).collect()
    }

    /// `∫_Ω H^q(∇u) ≈ Σ H^q(∇u) h²`.
    pub fn gradient_power_integral(&self, g: &Gauge<f64>, q: f64) -> f64 {
        let h2 = self.disc.h * self.disc.h;
        self.gradients()
            .into_iter()
            .map(|d| g.eval2(d[0], d[1]).powf(q))
            .sum::<f64>()
            * h2
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.disc.nx, self.disc.ny)
    }
}

/// Damped Picard iteration with lagged drift; a single linear solve when `B ≡ 0`.
pub fn solve(inst: &ProblemInstance, opts: &SolverOptions) -> Result<Solution> {
    inst.validate()?;
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidProblem("relaxation must lie in (0, 1]".into()));
    }
    let disc = Discretization::new(&inst.domain, inst.matrix()?)?;
    let n = disc.len();
    let spec = inst.domain.spec;
    let f: Vec<f64> = disc.cells.iter().map(|&c| inst.f.values[c]).collect();
    let b: Vec<f64> = disc.cells.iter().map(|&c| inst.b.values[c]).collect();
    let s: Vec<f64> = disc
        .cells
        .iter()
        .map(|&c| inst.sign.at(spec.center(c % spec.nx, c / spec.nx)))
        .collect();
    let has_drift = b.iter().any(|&v| v != 0.0);

    let mut u = vec![0.0; n];
    let mut diag = SolverDiagnostics {
        iterations: 0,
        residual: 0.0,
        relaxation: if has_drift { opts.relaxation } else { 1.0 },
        linear_tol: opts.linear_tol,
        linear_iterations: 0,
    };
    if f.iter().all(|&v| v == 0.0) {
        return finish(inst, disc, u, diag);
    }
    let mut next = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    loop {
        for k in 0..n {
            let drift = if has_drift {
                let d = disc.gradient(&u, k);
                b[k] * inst.gauge.eval2(d[0], d[1]) * s[k]
            } else {
                0.0
            };
            rhs[k] = f[k] - drift;
        }
        next.copy_from_slice(&u);
        diag.linear_iterations += disc.solve(&rhs, &mut next, opts.linear_tol)?;
        diag.iterations += 1;
        if !has_drift {
            u.copy_from_slice(&next);
            diag.residual = 0.0;
            break;
        }
        let w = opts.relaxation;
        let mut change = 0.0f64;
        for k in 0..n {
            let v = (1.0 - w) * u[k] + w * next[k];
            change = change.max((v - u[k]).abs());
            u[k] = v;
        }
        diag.residual = change;
        if !change.is_finite() {
            return Err(Error::NonConvergence {
                iterations: diag.iterations,
                residual: change,
            });
        }
        if change <= opts.tol {
            break;
        }
        if diag.iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations: diag.iterations,
                residual: change,
            });
        }
    }
    finish(inst, disc, u, diag)
}

fn finish(
    inst: &ProblemInstance,
    disc: Discretization,
    u: Vec<f64>,
    diagnostics: SolverDiagnostics,
) -> Result<Solution> {
    let mut values = vec![0.0; inst.f.values.len()];
    for (k, &c) in disc.cells.iter().enumerate() {
        values[c] = u[k];
    }
    let u = inst.f.with_values(values)?;
    debug_assert!(disc.index.len() == u.values.len());
    Ok(Solution { u, diagnostics, disc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::MonotoneProfile;
    use crate::symsol::{symmetrized_solution, uniform_radii, Drift, SymmetrizedProblem};

    fn torsion(nx: usize) -> ProblemInstance {
        let d = Domain::new(DomainShape::Disk { radius: 1.0 }, nx).unwrap();
        ProblemInstance::new(
            d.clone(),
            Gauge::<f64>::euclidean(2).unwrap(),
            Flux::FinslerLaplacian,
            d.constant(0.0).unwrap(),
            DriftSign::Plus,
            d.constant(1.0).unwrap(),
        )
        .unwrap()
    }

    fn torsion_error(nx: usize) -> f64 {
        let sol = solve(&torsion(nx), &SolverOptions::default()).unwrap();
        let spec = sol.u.spec();
        sol.u
            .masked()
            .map(|(k, v)| {
                let x = spec.center(k % spec.nx, k / spec.nx);
                (v - (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn torsion_on_disk() {
        let e = torsion_error(129);
        assert!(e <= 1e-3, "{e}");
    }

    #[test]
    fn torsion_converges_under_refinement() {
        let e = [torsion_error(65), torsion_error(129), torsion_error(257)];
        assert!(e[2] < e[1] && e[1] < e[0], "{e:?}");
    }

    #[test]
    fn wulff_shaped_ellipse_matches_symmetrized_solution() {
        // K0 of ellipse:1,2 is homothetic to the domain, so u is convexly symmetric
        let g = Gauge::<f64>::ellipse(1.0, 2.0).unwrap();
        let d = Domain::new(DomainShape::Ellipse { a: 1.0, b: 0.5 }, 129).unwrap();
        let inst = ProblemInstance::new(
            d.clone(),
            g.clone(),
            Flux::FinslerLaplacian,
            d.constant(0.0).unwrap(),
            DriftSign::Plus,
            d.constant(1.0).unwrap(),
        )
        .unwrap();
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        let area = d.shape.area();
        let p = SymmetrizedProblem::new(
            g.clone(),
            area,
            MonotoneProfile::<f64>::constant(1.0, area).unwrap(),
            Drift::None,
            2.0,
        )
        .unwrap();
        let v = symmetrized_solution(&p, &uniform_radii(p.radius(), 2000)).unwrap();
        let polar = g.polar();
        let spec = sol.u.spec();
        let vmax = v.values[0];
        let err = sol
            .u
            .masked()
            .map(|(k, val)| {
                let x = spec.center(k % spec.nx, k / spec.nx);
                (val - v.eval(polar.eval2(x[0], x[1]))).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 0.01 * vmax, "{err} vs {vmax}");
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let d = Domain::new(
            DomainShape::Rectangle {
                width: 2.0,
                height: 1.0,
            },
            33,
        )
        .unwrap();
        let inst = ProblemInstance::new(
            d.clone(),
            Gauge::<f64>::euclidean(2).unwrap(),
            Flux::FinslerLaplacian,
            d.constant(1.0).unwrap(),
            DriftSign::Minus,
            d.constant(0.0).unwrap(),
        )
        .unwrap();
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.diagnostics.iterations, 0);
        assert!(sol.u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maximum_principle_with_drift() {
        let d = Domain::new(DomainShape::LShape { size: 1.0 }, 65).unwrap();
        let inst = ProblemInstance::new(
            d.clone(),
            Gauge::<f64>::ellipse(1.5, 1.0).unwrap(),
            Flux::FinslerLaplacian,
            d.sample(|x| 1.0 + x[0] * x[0]).unwrap(),
            DriftSign::Plus,
            d.sample(|x| (x[0] + 2.0) * 0.5).unwrap(),
        )
        .unwrap();
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert!(sol.u.min_value() >= 0.0);
        assert!(sol.diagnostics.residual <= 1e-8);
        assert!(sol.diagnostics.iterations > 1);
    }

    #[test]
    fn symmetric_data_give_symmetric_solution() {
        let d = Domain::new(
            DomainShape::Rectangle {
                width: 2.0,
                height: 2.0,
            },
            64,
        )
        .unwrap();
        let inst = ProblemInstance::new(
            d.clone(),
            Gauge::<f64>::euclidean(2).unwrap(),
            Flux::FinslerLaplacian,
            d.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap(),
            DriftSign::Minus,
            d.constant(1.0).unwrap(),
        )
        .unwrap();
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        let (nx, ny) = sol.grid_size();
        let u = &sol.u.values;
        for j in 0..ny {
            for i in 0..nx {
                let a = u[j * nx + i];
                assert!((a - u[j * nx + (nx - 1 - i)]).abs() < 1e-10);
                assert!((a - u[(ny - 1 - j) * nx + i]).abs() < 1e-10);
                assert!((a - u[i * nx + j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn certification_examples() {
        let g = Gauge::<f64>::ellipse(1.5, 1.0).unwrap();
        let m = finsler_matrix(&g).unwrap();
        let d = Domain::new(DomainShape::Disk { radius: 1.0 }, 17).unwrap();
        let build = |flux: Flux, sign: DriftSign| {
            ProblemInstance::new(
                d.clone(),
                g.clone(),
                flux,
                d.constant(2.0).unwrap(),
                sign,
                d.constant(1.0).unwrap(),
            )
            .unwrap()
        };
        let r = certify_hypotheses(&build(Flux::FinslerLaplacian, DriftSign::Pattern), 500, 1);
        assert!(
            r.passed && r.ellipticity_margin.abs() < 1e-12 && r.drift_margin.abs() < 1e-12,
            "{r:?}"
        );

        let scaled = |s: f64| [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]];
        let twice = build(Flux::LinearMatrix(scaled(2.0)), DriftSign::Plus);
        let r = certify_hypotheses(&twice, 500, 2);
        assert!(r.passed && r.ellipticity_margin > 0.0);
        // the margin equals H(ξ)² at the sampled ξ
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let xi = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = twice.flux_at(xi);
            let h = g.eval2(xi[0], xi[1]);
            assert!((a[0] * xi[0] + a[1] * xi[1] - h * h - h * h).abs() < 1e-12);
        }
        let half = build(Flux::LinearMatrix(scaled(0.5)), DriftSign::Minus);
        let r = certify_hypotheses(&half, 500, 3);
        assert!(!r.passed && r.ellipticity_margin < 0.0);
    }

    #[test]
    fn rejects_bad_instances() {
        let d = Domain::new(DomainShape::Disk { radius: 1.0 }, 17).unwrap();
        let other = Domain::new(DomainShape::Disk { radius: 1.0 }, 19).unwrap();
        let e = Gauge::<f64>::euclidean(2).unwrap();
        assert!(matches!(
            ProblemInstance::new(
                d.clone(),
                e.clone(),
                Flux::FinslerLaplacian,
                other.constant(0.0).unwrap(),
                DriftSign::Plus,
                d.constant(1.0).unwrap()
            ),
            Err(Error::GridMismatch)
        ));
        assert!(ProblemInstance::new(
            d.clone(),
            e.clone(),
            Flux::FinslerLaplacian,
            d.constant(-1.0).unwrap(),
            DriftSign::Plus,
            d.constant(1.0).unwrap()
        )
        .is_err());
        let p = Gauge::<f64>::pnorm(3.0).unwrap();
        assert!(ProblemInstance::new(
            d.clone(),
            p,
            Flux::FinslerLaplacian,
            d.constant(0.0).unwrap(),
            DriftSign::Plus,
            d.constant(1.0).unwrap()
        )
        .is_err());
        let inst = ProblemInstance::new(
            d.clone(),
            e,
            Flux::LinearMatrix([[1.0, 0.2], [0.2, 1.0]]),
            d.constant(0.0).unwrap(),
            DriftSign::Plus,
            d.constant(1.0).unwrap(),
        )
        .unwrap();
        assert!(solve(&inst, &SolverOptions::default()).is_err());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let d = Domain::new(DomainShape::Disk { radius: 1.0 }, 33).unwrap();
        let inst = ProblemInstance::new(
            d.clone(),
            Gauge::<f64>::euclidean(2).unwrap(),
            Flux::FinslerLaplacian,
            d.constant(1.0).unwrap(),
            DriftSign::Minus,
            d.constant(1.0).unwrap(),
        )
        .unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            ..SolverOptions::default()
        };
        assert!(matches!(
            solve(&inst, &opts),
            Err(Error::NonConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn boundary_aware_gradient_of_torsion() {
        let sol = solve(&torsion(129), &SolverOptions::default()).unwrap();
        let e = Gauge::<f64>::euclidean(2).unwrap();
        // ∫ |∇u|² = π/8 for u = (1 - |x|²)/4
        let g2 = sol.gradient_power_integral(&e, 2.0);
        assert!((g2 - std::f64::consts::PI / 8.0).abs() < 0.02, "{g2}");
    }

    #[test]
    fn domain_shapes() {
        let l = DomainShape::LShape { size: 1.0 };
        assert!(l.contains([-0.5, 0.5]) && l.contains([0.5, -0.5]) && !l.contains([0.5, 0.5]));
        assert_eq!(l.area(), 3.0);
        let json = serde_json::to_string(&DomainShape::Ellipse { a: 1.0, b: 0.5 }).unwrap();
        assert_eq!(json, r#"{"shape":"ellipse","a":1.0,"b":0.5}"#);
        let d = Domain::new(DomainShape::Disk { radius: 1.0 }, 9).unwrap();
        let t = d.boundary_fraction([0.9, 0.0], [1.1, 0.0]);
        assert!((t - 0.5).abs() < 1e-12);
    }
}
