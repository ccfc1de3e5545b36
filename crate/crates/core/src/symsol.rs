//! The explicit convexly symmetric comparison solution `v`, its gradient integrals and a
//! finite-difference check of the radial equation it satisfies.
//!
//! With `B(r) = ∫_0^r b̃` and `J(t) = ∫_0^t e^{-B(r)} f*(κ r^n) r^{n-1} dr`:
//!
//! ```text
//! v'(ρ) = -ρ^{1-n} e^{B(ρ)} J(ρ),    v(ρ) = ∫_ρ^R t^{1-n} e^{B(t)} J(t) dt,
//! -v'' - (n-1)/ρ v' + b̃(ρ) v' = f*(κ ρ^n).
//! ```
//!
//! The exponential kernel is `exp(∫_r^t b̃)` for `r ≤ t`, which is at least one; with a
//! constant drift it reads `e^{β(t-r)}`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::grid::{GridFunction, GridSpec};
use crate::quad::{adaptive_simpson, MAX_DEPTH};
use crate::rearrange::{MonotoneProfile, ProfileKind, PseudoRearrangement};
use crate::scalar::Scalar;

/// Absolute quadrature tolerance over `[0, R]`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// First-order coefficient of the symmetrized problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift<T> {
    None,
    /// `b̃ ≡ β`.
    Constant(T),
    Pseudo(PseudoRearrangement<T>),
}

impl<T: Scalar> Drift<T> {
    pub fn eval(&self, r: T) -> T {
        match self {
            Drift::None => T::zero(),
            Drift::Constant(b) => *b,
            Drift::Pseudo(p) => p.eval(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedProblem<T> {
    pub gauge: Gauge<T>,
    pub measure: T,
    pub source: MonotoneProfile<T>,
    pub drift: Drift<T>,
    pub q: T,
    pub tol: T,
}

impl<T: Scalar> SymmetrizedProblem<T> {
    pub fn new(gauge: Gauge<T>, measure: T, source: MonotoneProfile<T>, drift: Drift<T>, q: T) -> Result<Self> {
        let p = Self {
            gauge,
            measure,
            source,
            drift,
            q,
            tol: T::lit(DEFAULT_TOL),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(mut self, tol: T) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidProblem("tolerance must be positive".into()));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.measure > T::zero()) || !self.measure.is_finite() {
            return Err(Error::InvalidProblem("domain measure must be positive".into()));
        }
        if !(self.q > T::zero() && self.q <= T::lit(2.0)) {
            return Err(Error::InvalidProblem(format!("q = {} is outside (0, 2]", self.q)));
        }
        if self.source.values().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProblem("source profile must be nonincreasing".into()));
        }
        if let Drift::Constant(b) = self.drift {
            if !(b >= T::zero()) || !b.is_finite() {
                return Err(Error::InvalidProblem(
                    "constant drift must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.gauge.dim()
    }

    pub fn kappa(&self) -> T {
        self.gauge.kappa()
    }

    /// `R = (|Ω| / κ_n)^{1/n}`.
    pub fn radius(&self) -> T {
        (self.measure / self.kappa()).powf(T::one() / T::of_usize(self.dim()))
    }
}

/// `m + 1` equally spaced radii on `[0, R]`.
pub fn uniform_radii<T: Scalar>(radius: T, m: usize) -> Vec<T> {
    let m = m.max(1);
    (0..=m).map(|k| radius * T::of_usize(k) / T::of_usize(m)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution<T> {
    pub radii: Vec<T>,
    pub values: Vec<T>,
    pub derivatives: Vec<T>,
    pub kappa: T,
    pub dim: usize,
}

impl<T: Scalar> RadialSolution<T> {
    pub fn radius(&self) -> T {
        *self.radii.last().unwrap()
    }

    fn interp(&self, data: &[T], r: T) -> T {
        let n = self.radii.len();
        if r >= self.radius() {
            return if r == self.radius() { data[n - 1] } else { T::zero() };
        }
        if r <= self.radii[0] {
            return data[0];
        }
        let k = self.radii.partition_point(|&x| x <= r);
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let w = (r - r0) / (r1 - r0);
        data[k - 1] + w * (data[k] - data[k - 1])
    }

    /// `v(ρ)` by linear interpolation; zero beyond `R`.
    pub fn eval(&self, r: T) -> T {
        self.interp(&self.values, r)
    }

    pub fn derivative(&self, r: T) -> T {
        self.interp(&self.derivatives, r)
    }

    /// `v*(s) = v((s / κ_n)^{1/n})`.
    pub fn rearranged(&self, s: T) -> T {
        if s < T::zero() {
            return self.values[0];
        }
        self.eval((s / self.kappa).powf(T::one() / T::of_usize(self.dim)))
    }

    /// CSV with header `rho,v,dv`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "rho,v,dv")?;
        for k in 0..self.radii.len() {
            writeln!(out, "{},{},{}", self.radii[k], self.values[k], self.derivatives[k])?;
        }
        Ok(())
    }
}

/// `B(r) = ∫_0^r b̃` in closed form: piecewise quadratic for a pseudo-rearrangement.
#[derive(Debug, Clone)]
struct DriftIntegral<T> {
    radii: Vec<T>,
    values: Vec<T>,
    cum: Vec<T>,
    beta: T,
}

impl<T: Scalar> DriftIntegral<T> {
    fn new(d: &Drift<T>) -> Self {
        match d {
            Drift::None => Self::constant(T::zero()),
            Drift::Constant(b) => Self::constant(*b),
            Drift::Pseudo(p) => {
                let radii = p.radii().to_vec();
                let values = p.values().to_vec();
                let mut cum = Vec::with_capacity(radii.len());
                cum.push(values[0] * radii[0]);
                for k in 1..radii.len() {
                    let dr = radii[k] - radii[k - 1];
                    cum.push(cum[k - 1] + (values[k] + values[k - 1]) * dr / T::lit(2.0));
                }
                Self {
                    radii,
                    values,
                    cum,
                    beta: T::zero(),
                }
            }
        }
    }

    fn constant(beta: T) -> Self {
        Self {
            radii: Vec::new(),
            values: Vec::new(),
            cum: Vec::new(),
            beta,
        }
    }

    fn eval(&self, r: T) -> T {
        if self.radii.is_empty() {
            return self.beta * r;
        }
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0] * r;
        }
        if r >= self.radii[n - 1] {
            return self.cum[n - 1] + self.values[n - 1] * (r - self.radii[n - 1]);
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let d = r - self.radii[k];
        let slope = (self.values[k + 1] - self.values[k]) / (self.radii[k + 1] - self.radii[k]);
        self.cum[k] + self.values[k] * d + slope * d * d / T::lit(2.0)
    }
}

/// Breakpoints on `[0, R]` with `J` tabulated at each of them.
struct Kernel<'a, T> {
    p: &'a SymmetrizedProblem<T>,
    big_b: DriftIntegral<T>,
    knots: Vec<T>,
    j: Vec<T>,
    n: usize,
    kappa: T,
    radius: T,
}

impl<'a, T: Scalar> Kernel<'a, T> {
    fn new(p: &'a SymmetrizedProblem<T>, extra: &[T]) -> Result<Self> {
        p.validate()?;
        let n = p.dim();
        let kappa = p.kappa();
        let radius = p.radius();
        let inv_n = T::one() / T::of_usize(n);
        let mut knots = vec![T::zero(), radius];
        for &s in p.source.breakpoints() {
            if s > T::zero() {
                knots.push((s / kappa).powf(inv_n));
            }
        }
        if let Drift::Pseudo(b) = &p.drift {
            knots.extend(b.radii().iter().copied());
        }
        knots.extend(extra.iter().copied());
        knots.retain(|&r| r >= T::zero() && r <= radius);
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let mut k = Self {
            p,
            big_b: DriftIntegral::new(&p.drift),
            knots,
            j: Vec::new(),
            n,
            kappa,
            radius,
        };
        let mut j = vec![T::zero(); k.knots.len()];
        for s in 0..k.knots.len() - 1 {
            j[s + 1] = j[s] + k.inner(s, k.knots[s + 1])?;
        }
        k.j = j;
        Ok(k)
    }

    fn seg_tol(&self, a: T, b: T) -> T {
        (self.p.tol * (b - a) / self.radius).max(T::epsilon() * T::lit(16.0))
    }

    /// Value of `r ↦ f*(κ r^n)` for `r` in segment `s`.
    fn source_fn(&self, s: usize) -> impl Fn(T) -> T + '_ {
        let kind = self.p.source.kind();
        let mid = (self.knots[s] + self.knots[s + 1]) / T::lit(2.0);
        let frozen = self.p.source.eval(self.kappa * mid.powi(self.n as i32));
        move |r: T| match kind {
            ProfileKind::Constant => frozen,
            ProfileKind::Linear => self.p.source.eval(self.kappa * r.powi(self.n as i32)),
        }
    }

    /// `∫_{knots[s]}^t e^{-B(r)} f*(κ r^n) r^{n-1} dr`.
    fn inner(&self, s: usize, t: T) -> Result<T> {
        let a = self.knots[s];
        if t <= a {
            return Ok(T::zero());
        }
        let f = self.source_fn(s);
        let n1 = (self.n - 1) as i32;
        let mut g = |r: T| (-self.big_b.eval(r)).exp() * f(r) * r.powi(n1);
        adaptive_simpson(&mut g, a, t, self.seg_tol(a, t), MAX_DEPTH)
    }

    /// `J(t)` for `t` in segment `s`.
    fn big_j(&self, s: usize, t: T) -> Result<T> {
        Ok(self.j[s] + self.inner(s, t)?)
    }

    /// `-v'(t) = t^{1-n} e^{B(t)} J(t)`.
    fn minus_dv(&self, s: usize, t: T) -> Result<T> {
        if t <= T::zero() {
            return Ok(T::zero());
        }
        let j = self.big_j(s, t)?;
        Ok(t.powi(1 - self.n as i32) * self.big_b.eval(t).exp() * j)
    }

    fn minus_dv_at_knot(&self, k: usize) -> T {
        let t = self.knots[k];
        if t <= T::zero() {
            return T::zero();
        }
        t.powi(1 - self.n as i32) * self.big_b.eval(t).exp() * self.j[k]
    }

    /// `∫_{knots[s]}^{knots[s+1]} φ(-v'(t)) w(t) dt`.
    fn outer(&self, s: usize, phi: impl Fn(T, T) -> T) -> Result<T> {
        let (a, b) = (self.knots[s], self.knots[s + 1]);
        let mut err = None;
        let mut g = |t: T| match self.minus_dv(s, t) {
            Ok(d) => phi(t, d),
            Err(e) => {
                err.get_or_insert(e);
                T::zero()
            }
        };
        let v = adaptive_simpson(&mut g, a, b, self.seg_tol(a, b), MAX_DEPTH)?;
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// Evaluates `v` and `v'` at the given radii (clamped to `[0, R]` and sorted).
pub fn symmetrized_solution<T: Scalar>(p: &SymmetrizedProblem<T>, radii: &[T]) -> Result<RadialSolution<T>> {
    let radius = p.radius();
    let mut out_r: Vec<T> = radii.iter().map(|&r| r.max(T::zero()).min(radius)).collect();
    out_r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out_r.dedup();
    if out_r.is_empty() {
        return Err(Error::InvalidProblem("empty radius grid".into()));
    }
    let k = Kernel::new(p, &out_r)?;
    let m = k.knots.len();
    // v at the knots, accumulated from v(R) = 0 inwards
    let mut v = vec![T::zero(); m];
    for s in (0..m - 1).rev() {
        v[s] = v[s + 1] + k.outer(s, |_, d| d)?;
    }
    let mut values = Vec::with_capacity(out_r.len());
    let mut derivatives = Vec::with_capacity(out_r.len());
    for &r in &out_r {
        let idx = k.knots.partition_point(|&x| x < r);
        values.push(v[idx]);
        derivatives.push(T::zero() - k.minus_dv_at_knot(idx));
    }
    Ok(RadialSolution {
        radii: out_r,
        values,
        derivatives,
        kappa: k.kappa,
        dim: k.n,
    })
}

/// `∫_{Ω⋆} H^q(∇v) = ∫_0^{|Ω|} (-v'(ρ(τ)))^q dτ`, with `H(∇v) = -v'(ρ)` on `{H_0 = ρ}`.
///
/// Evaluated after the substitution `τ = κ_n ρ^n`, which removes the `τ^{1/n-1}` endpoint
/// singularity.
pub fn gradient_integral<T: Scalar>(p: &SymmetrizedProblem<T>) -> Result<T> {
    let k = Kernel::new(p, &[])?;
    let q = p.q;
    let nk = T::of_usize(k.n) * k.kappa;
    let n1 = (k.n - 1) as i32;
    let mut total = T::zero();
    for s in 0..k.knots.len() - 1 {
        total = total
            + k.outer(s, |t, d| {
                if d <= T::zero() {
                    T::zero()
                } else {
                    d.powf(q) * nk * t.powi(n1)
                }
            })?;
    }
    Ok(total)
}

/// Samples `x ↦ v(H_0(x))` on the cells of `spec` with `H_0(x) < R`.
pub fn lift_to_grid<T: Scalar>(sol: &RadialSolution<T>, g: &Gauge<T>, spec: GridSpec<T>) -> Result<GridFunction<T>> {
    let polar = g.polar();
    let radius = sol.radius();
    GridFunction::from_fn(
        spec,
        |x| polar.eval2(x[0], x[1]) < radius,
        |x| sol.eval(polar.eval2(x[0], x[1])),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeResidualReport {
    pub points: usize,
    pub max_residual: f64,
    pub l2_residual: f64,
    /// `max |(v_{i+1} - v_{i-1}) / 2h - v'_i|`.
    pub derivative_mismatch: f64,
}

/// Central-difference residual of `-v'' - (n-1)/ρ v' + b̃ v' - f*(κ ρ^n)` at interior radii of a
/// uniform grid. Radii whose stencil straddles a jump of `f*` are skipped.
pub fn verify_radial_ode<T: Scalar>(sol: &RadialSolution<T>, p: &SymmetrizedProblem<T>) -> Result<OdeResidualReport> {
    let r = &sol.radii;
    let m = r.len();
    if m < 3 {
        return Err(Error::InvalidProblem("need at least three radii".into()));
    }
    let h = r[1] - r[0];
    if r.windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > T::lit(1e-9) * h.max(T::one()))
    {
        return Err(Error::InvalidProblem("radius grid must be uniform".into()));
    }
    let n = T::of_usize(sol.dim);
    let two = T::lit(2.0);
    let fstar = |x: T| p.source.eval(sol.kappa * x.powi(sol.dim as i32));
    let mut points = 0usize;
    let mut max = 0.0f64;
    let mut sq = 0.0f64;
    let mut mismatch = 0.0f64;
    for i in 1..m - 1 {
        let dv = sol.derivatives[i];
        let fd_v = (sol.values[i + 1] - sol.values[i - 1]) / (two * h);
        mismatch = mismatch.max((fd_v - dv).abs().f64());
        if p.source.kind() == ProfileKind::Constant && fstar(r[i - 1]) != fstar(r[i + 1]) {
            continue;
        }
        let d2 = (sol.derivatives[i + 1] - sol.derivatives[i - 1]) / (two * h);
        let res = -d2 - (n - T::one()) / r[i] * dv + p.drift.eval(r[i]) * dv - fstar(r[i]);
        let res = res.abs().f64();
        points += 1;
        max = max.max(res);
        sq += res * res;
    }
    Ok(OdeResidualReport {
        points,
        max_residual: max,
        l2_residual: if points == 0 { 0.0 } else { (sq / points as f64).sqrt() },
        derivative_mismatch: mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::decreasing_rearrangement;
    use std::f64::consts::PI;

    fn torsion(drift: Drift<f64>, q: f64) -> SymmetrizedProblem<f64> {
        SymmetrizedProblem::new(
            Gauge::<f64>::euclidean(2).unwrap(),
            PI,
            MonotoneProfile::<f64>::constant(1.0, PI).unwrap(),
            drift,
            q,
        )
        .unwrap()
    }

    /// `Σ_{k≥2} (1 - ρ^k) / (k·k!)`: the constant-drift solution with `β = 1`, `f ≡ 1`, `R = 1`.
    fn beta_one_series(rho: f64) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..40 {
            fact *= k as f64;
            if k >= 2 {
                sum += (1.0 - rho.powi(k)) / (k as f64 * fact);
            }
        }
        sum
    }

    #[test]
    fn torsion_profile() {
        let p = torsion(Drift::None, 2.0);
        let sol = symmetrized_solution(&p, &uniform_radii(1.0, 50)).unwrap();
        assert!((sol.values[0] - 0.25).abs() < 1e-8);
        for k in 0..sol.radii.len() {
            let r = sol.radii[k];
            assert!((sol.values[k] - (1.0 - r * r) / 4.0).abs() < 1e-9);
            assert!((sol.derivatives[k] + r / 2.0).abs() < 1e-9);
        }
        assert_eq!(*sol.values.last().unwrap(), 0.0);
    }

    #[test]
    fn torsion_gradient_integrals() {
        let g2 = gradient_integral(&torsion(Drift::None, 2.0)).unwrap();
        assert!((g2 - PI / 8.0).abs() <= 1e-6 * PI / 8.0);
        let g1 = gradient_integral(&torsion(Drift::None, 1.0)).unwrap();
        assert!((g1 - PI / 3.0).abs() <= 1e-6 * PI / 3.0);
        // ∫ (ρ/2)^q 2πρ dρ = 2π / (2^q (q + 2))
        let gh = gradient_integral(&torsion(Drift::None, 0.5)).unwrap();
        let exact = 2.0 * PI / (2f64.sqrt() * 2.5);
        assert!((gh - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn zero_source_gives_zero() {
        let p = SymmetrizedProblem::new(
            Gauge::<f64>::ellipse(2.0, 0.5).unwrap(),
            1.0,
            MonotoneProfile::<f64>::constant(0.0, 1.0).unwrap(),
            Drift::Constant(3.0),
            1.5,
        )
        .unwrap();
        let sol = symmetrized_solution(&p, &uniform_radii(p.radius(), 20)).unwrap();
        assert!(sol.values.iter().chain(&sol.derivatives).all(|&v| v == 0.0));
        assert_eq!(gradient_integral(&p).unwrap(), 0.0);
        let r = verify_radial_ode(&sol, &p).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn constant_drift_matches_series() {
        let p = torsion(Drift::Constant(1.0), 2.0);
        let sol = symmetrized_solution(&p, &uniform_radii(1.0, 20)).unwrap();
        assert!((sol.values[0] - 0.3179021514544).abs() < 1e-8);
        for k in 0..sol.radii.len() {
            assert!((sol.values[k] - beta_one_series(sol.radii[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_and_pseudo_paths_agree() {
        let beta = 0.8;
        let a = symmetrized_solution(&torsion(Drift::Constant(beta), 2.0), &uniform_radii(1.0, 30)).unwrap();
        let b_tilde = PseudoRearrangement::<f64>::new(vec![0.1, 0.5, 0.9], vec![beta; 3]).unwrap();
        let b = symmetrized_solution(&torsion(Drift::Pseudo(b_tilde), 2.0), &uniform_radii(1.0, 30)).unwrap();
        for k in 0..a.values.len() {
            assert!((a.values[k] - b.values[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn drift_integral_is_exact_for_piecewise_linear() {
        let b = PseudoRearrangement::<f64>::new(vec![0.2, 0.6, 1.0], vec![1.0, 3.0, 0.5]).unwrap();
        let d = DriftIntegral::new(&Drift::Pseudo(b.clone()));
        let mut acc = 0.0;
        let steps = 200_000;
        let dr = 1.4 / steps as f64;
        for k in 0..steps {
            acc += b.eval((k as f64 + 0.5) * dr) * dr;
        }
        assert!((d.eval(1.4) - acc).abs() < 1e-8);
    }

    /// Brute-force double midpoint sum of the defining formula.
    fn brute_force_v0(b: &PseudoRearrangement<f64>, m: usize) -> f64 {
        let h = 1.0 / m as f64;
        let mut big_b = vec![0.0; m + 1];
        for k in 0..m {
            big_b[k + 1] = big_b[k] + b.eval((k as f64 + 0.5) * h) * h;
        }
        let mut v0 = 0.0;
        let mut inner = 0.0; // ∫_0^t e^{-B(r)} r dr
        for k in 0..m {
            let r = (k as f64 + 0.5) * h;
            let bm = (big_b[k] + big_b[k + 1]) / 2.0;
            let half = (-bm).exp() * r * h / 2.0;
            inner += half;
            v0 += (bm.exp() * inner / r) * h;
            inner += half;
        }
        v0
    }

    #[test]
    fn pseudo_drift_matches_brute_force() {
        let b = PseudoRearrangement::<f64>::new(vec![0.1, 0.4, 0.7, 0.95], vec![2.0, 1.5, 0.5, 0.0]).unwrap();
        let sol = symmetrized_solution(&torsion(Drift::Pseudo(b.clone()), 2.0), &[0.0]).unwrap();
        let oracle = brute_force_v0(&b, 20_000);
        assert!((sol.values[0] - oracle).abs() < 1e-6, "{} vs {}", sol.values[0], oracle);
    }

    #[test]
    fn larger_drift_gives_larger_solution() {
        let radii = uniform_radii(1.0, 40);
        let mut prev: Option<RadialSolution<f64>> = None;
        for beta in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let s = symmetrized_solution(&torsion(Drift::Constant(beta), 2.0), &radii).unwrap();
            if let Some(p) = &prev {
                assert!(s.values.iter().zip(&p.values).all(|(a, b)| a >= b));
            }
            prev = Some(s);
        }
    }

    #[test]
    fn radial_ode_residuals() {
        let p = torsion(Drift::None, 2.0);
        let sol = symmetrized_solution(&p, &uniform_radii(1.0, 10_000)).unwrap();
        let r = verify_radial_ode(&sol, &p).unwrap();
        assert!(r.max_residual <= 1e-6, "{r:?}");

        let p = torsion(Drift::Constant(1.0), 2.0);
        let mut prev = f64::INFINITY;
        for m in [25, 50, 100] {
            let sol = symmetrized_solution(&p, &uniform_radii(1.0, m)).unwrap();
            let r = verify_radial_ode(&sol, &p).unwrap();
            // halving the spacing cuts the residual roughly by four
            assert!(r.max_residual < prev / 3.0, "m={m} {r:?}");
            prev = r.max_residual;
        }
    }

    #[test]
    fn step_source_and_solution_invariants() {
        let src = MonotoneProfile::<f64>::piecewise_constant(vec![0.0, 1.0, 2.0, 3.0], vec![3.0, 1.0, 0.5]).unwrap();
        let g = Gauge::<f64>::ellipse(1.5, 1.0).unwrap();
        let p = SymmetrizedProblem::new(g, 3.0, src, Drift::Constant(0.5), 2.0).unwrap();
        let sol = symmetrized_solution(&p, &uniform_radii(p.radius(), 60)).unwrap();
        assert_eq!(*sol.values.last().unwrap(), 0.0);
        assert!(sol.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(sol.derivatives.iter().all(|&d| d <= 0.0));
        assert!(sol.derivatives[1].abs() < 1e-1 && sol.derivatives[0] == 0.0);
    }

    #[test]
    fn lifted_solution_rearranges_to_direct_formula() {
        let g = Gauge::<f64>::ellipse(1.5, 1.0).unwrap();
        let p = SymmetrizedProblem::new(
            g.clone(),
            2.0,
            MonotoneProfile::<f64>::constant(1.0, 2.0).unwrap(),
            Drift::Constant(0.5),
            2.0,
        )
        .unwrap();
        let sol = symmetrized_solution(&p, &uniform_radii(p.radius(), 400)).unwrap();
        let polar = g.polar();
        let (mut lo, mut hi) = ([0.0f64; 2], [0.0f64; 2]);
        for k in 0..720 {
            let x = g.wulff_point(k as f64 * PI / 360.0, p.radius());
            for d in 0..2 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
        let spec = GridSpec::<f64>::covering([lo[0] - 0.05, lo[1] - 0.05], [hi[0] + 0.05, hi[1] + 0.05], 129).unwrap();
        let lifted = lift_to_grid(&sol, &g, spec).unwrap();
        assert!((lifted.max_abs() - sol.values[0]).abs() < 3.0 * spec.h);
        for (k, v) in lifted.masked() {
            let x = spec.center(k % spec.nx, k / spec.nx);
            assert!(polar.eval2(x[0], x[1]) < p.radius());
            assert!(v >= 0.0);
        }
        let vstar = decreasing_rearrangement(&lifted);
        let cell = spec.h * spec.h;
        for k in 0..lifted.cell_count() {
            let s = (k as f64 + 0.5) * cell;
            assert!((vstar.eval(s) - sol.rearranged(s)).abs() <= 3.0 * spec.h);
        }
    }

    #[test]
    fn rejects_invalid_problems() {
        let src = MonotoneProfile::<f64>::constant(1.0, 1.0).unwrap();
        let g = Gauge::<f64>::euclidean(2).unwrap();
        assert!(SymmetrizedProblem::new(g.clone(), 0.0, src.clone(), Drift::None, 1.0).is_err());
        assert!(SymmetrizedProblem::new(g.clone(), 1.0, src.clone(), Drift::None, 2.5).is_err());
        assert!(SymmetrizedProblem::new(g.clone(), 1.0, src.clone(), Drift::Constant(-1.0), 1.0).is_err());
        assert!(SymmetrizedProblem::new(g, 1.0, src, Drift::None, 0.0).is_err());
    }

    #[test]
    fn csv_header() {
        let sol = symmetrized_solution(&torsion(Drift::None, 2.0), &uniform_radii(1.0, 2)).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rho,v,dv\n0,0.25"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn single_precision_torsion() {
        let p = SymmetrizedProblem::<f32>::new(
            Gauge::<f32>::euclidean(2).unwrap(),
            std::f32::consts::PI,
            MonotoneProfile::<f32>::constant(1.0, std::f32::consts::PI).unwrap(),
            Drift::None,
            2.0,
        )
        .unwrap()
        .with_tol(1e-5)
        .unwrap();
        let sol = symmetrized_solution(&p, &[0.0, 0.5]).unwrap();
        assert!((sol.values[0] - 0.25).abs() < 1e-4);
    }
}
