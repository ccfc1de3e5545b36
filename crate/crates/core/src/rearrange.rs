//! Distribution functions, decreasing and convex rearrangements, and the pseudo-rearrangement
//! of a drift coefficient relative to a solution.
//!
//! Rearrangements are cell based: the `k`-th largest cell value of `|u|` occupies
//! `s ∈ [(k-1)h², kh²)`, so equimeasurability is an exact identity.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::grid::{GridFunction, GridSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// One value per interval `[s_{k-1}, s_k)`.
    Constant,
    /// One value per breakpoint, linear in between.
    Linear,
}

/// Nonincreasing function on `[0, |Ω|]`; zero beyond `|Ω|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneProfile<T> {
    breakpoints: Vec<T>,
    values: Vec<T>,
    kind: ProfileKind,
}

impl<T: Scalar> MonotoneProfile<T> {
    pub fn piecewise_constant(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile(
                "piecewise constant profile needs one more breakpoint than values".into(),
            ));
        }
        Self::checked(breakpoints, values, ProfileKind::Constant)
    }

    pub fn piecewise_linear(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != breakpoints.len() {
            return Err(Error::InvalidProfile(
                "piecewise linear profile needs one value per breakpoint".into(),
            ));
        }
        Self::checked(breakpoints, values, ProfileKind::Linear)
    }

    /// `c` on `[0, measure)`.
    pub fn constant(c: T, measure: T) -> Result<Self> {
        Self::piecewise_constant(vec![T::zero(), measure], vec![c])
    }

    fn checked(breakpoints: Vec<T>, values: Vec<T>, kind: ProfileKind) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile("profile needs at least two breakpoints".into()));
        }
        if breakpoints[0] != T::zero() {
            return Err(Error::InvalidProfile("profile must start at s = 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || !breakpoints.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidProfile("breakpoints must increase strictly".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite profile value".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProfile("profile values must be nonincreasing".into()));
        }
        Ok(Self {
            breakpoints,
            values,
            kind,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `|Ω|`, the right end of the domain.
    pub fn measure(&self) -> T {
        *self.breakpoints.last().unwrap()
    }

    /// Index `k` of the interval `[s_k, s_{k+1})` containing `s`, clamped to the domain.
    fn interval(&self, s: T) -> usize {
        let n = self.breakpoints.len();
        let k = self.breakpoints.partition_point(|&b| b <= s).saturating_sub(1);
        k.min(n - 2)
    }

    /// Right-continuous evaluation; zero for `s >= |Ω|` (constant kind) or `s > |Ω|` (linear).
    pub fn eval(&self, s: T) -> T {
        let s = s.max(T::zero());
        let end = self.measure();
        match self.kind {
            ProfileKind::Constant => {
                if s >= end {
                    T::zero()
                } else {
                    self.values[self.interval(s)]
                }
            }
            ProfileKind::Linear => {
                if s > end {
                    return T::zero();
                }
                let k = self.interval(s);
                let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
                let w = (s - a) / (b - a);
                self.values[k] + w * (self.values[k + 1] - self.values[k])
            }
        }
    }

    /// Exact `∫_a^b` of the profile (zero outside the domain).
    pub fn integral(&self, a: T, b: T) -> T {
        if b < a {
            return -self.integral(b, a);
        }
        let a = a.max(T::zero());
        let b = b.min(self.measure());
        if b <= a {
            return T::zero();
        }
        let mut total = T::zero();
        for k in 0..self.breakpoints.len() - 1 {
            let lo = self.breakpoints[k].max(a);
            let hi = self.breakpoints[k + 1].min(b);
            if hi <= lo {
                continue;
            }
            total = total
                + match self.kind {
                    ProfileKind::Constant => self.values[k] * (hi - lo),
                    ProfileKind::Linear => {
                        (self.eval_linear_in(k, lo) + self.eval_linear_in(k, hi)) / T::lit(2.0) * (hi - lo)
                    }
                };
        }
        total
    }

    fn eval_linear_in(&self, k: usize, s: T) -> T {
        let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
        self.values[k] + (s - a) / (b - a) * (self.values[k + 1] - self.values[k])
    }

    /// `|{s : profile(s) > t}|`.
    pub fn distribution(&self, t: T) -> T {
        match self.kind {
            ProfileKind::Constant => {
                let j = self.values.partition_point(|&v| v > t);
                self.breakpoints[j]
            }
            ProfileKind::Linear => {
                let j = self.values.partition_point(|&v| v > t);
                if j == 0 {
                    T::zero()
                } else if j == self.values.len() {
                    self.measure()
                } else {
                    let (a, b) = (self.breakpoints[j - 1], self.breakpoints[j]);
                    let (va, vb) = (self.values[j - 1], self.values[j]);
                    a + (va - t) / (va - vb) * (b - a)
                }
            }
        }
    }

    /// Drops breakpoints that do not change the function: equal neighbouring steps for the
    /// constant kind, interior nodes of constant runs for the linear kind.
    pub fn compressed(&self) -> Self {
        let mut bp = vec![self.breakpoints[0]];
        let mut vals = Vec::new();
        match self.kind {
            ProfileKind::Constant => {
                for (k, &v) in self.values.iter().enumerate() {
                    if vals.last() == Some(&v) {
                        *bp.last_mut().unwrap() = self.breakpoints[k + 1];
                    } else {
                        vals.push(v);
                        bp.push(self.breakpoints[k + 1]);
                    }
                }
            }
            ProfileKind::Linear => {
                vals.push(self.values[0]);
                let n = self.values.len();
                for k in 1..n {
                    let keep =
                        k == n - 1 || !(self.values[k - 1] == self.values[k] && self.values[k] == self.values[k + 1]);
                    if keep {
                        bp.push(self.breakpoints[k]);
                        vals.push(self.values[k]);
                    }
                }
            }
        }
        Self {
            breakpoints: bp,
            values: vals,
            kind: self.kind,
        }
    }

    /// Two-column CSV `s,value`. For the constant kind each row holds the left end of an
    /// interval and its value; the final row is `|Ω|` with the last value repeated.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "s,value")?;
        for (k, s) in self.breakpoints.iter().enumerate() {
            let v = match self.kind {
                ProfileKind::Constant => self.values[k.min(self.values.len() - 1)],
                ProfileKind::Linear => self.values[k],
            };
            writeln!(out, "{},{}", s.f64(), v.f64())?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Self::write_csv`] as a piecewise constant profile.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_two_columns(path.as_ref())?;
        if rows.len() < 2 {
            return Err(Error::InvalidProfile("profile CSV needs at least two rows".into()));
        }
        let bp = rows.iter().map(|r| T::lit(r.0)).collect();
        let vals = rows[..rows.len() - 1].iter().map(|r| T::lit(r.1)).collect();
        Self::piecewise_constant(bp, vals)
    }
}

pub(crate) fn read_two_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',');
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(Error::Config(format!(
                "{}:{}: expected two columns",
                path.display(),
                lineno + 1
            )));
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => rows.push((x, y)),
            // header
            _ if rows.is_empty() => continue,
            _ => return Err(Error::Config(format!("{}:{}: bad number", path.display(), lineno + 1))),
        }
    }
    Ok(rows)
}

/// `μ(t) = |{x ∈ Ω : |u(x)| > t}|` as an exact step function of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFunction<T> {
    /// `|u|` on the mask, descending.
    levels: Vec<T>,
    spec: GridSpec<T>,
}

impl<T: Scalar> DistributionFunction<T> {
    /// `h² · #{cells : |u| > t}`; right-continuous in `t`.
    pub fn eval(&self, t: T) -> T {
        let count = self.levels.partition_point(|&v| v > t);
        self.spec.cells_measure(count)
    }

    /// Cell values of `|u|`, descending.
    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn measure(&self) -> T {
        self.spec.cells_measure(self.levels.len())
    }
}

fn desc<T: Scalar>(a: &T, b: &T) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

/// Exact discrete distribution function of `u`.
pub fn distribution<T: Scalar>(u: &GridFunction<T>) -> DistributionFunction<T> {
    let mut levels: Vec<T> = u.masked().map(|(_, v)| v.abs()).collect();
    levels.sort_by(desc);
    DistributionFunction { levels, spec: u.spec() }
}

/// Masked cell indices ordered by `|u|` descending, ties by cell index ascending.
pub fn level_order<T: Scalar>(u: &GridFunction<T>) -> Vec<usize> {
    let mut idx: Vec<usize> = u.masked().map(|(k, _)| k).collect();
    // stable: equal levels keep ascending index order
    idx.sort_by(|&a, &b| desc(&u.values[a].abs(), &u.values[b].abs()));
    idx
}

/// `u*`: the `k`-th largest `|u|` on `[(k-1)h², kh²)`.
pub fn decreasing_rearrangement<T: Scalar>(u: &GridFunction<T>) -> MonotoneProfile<T> {
    let dist = distribution(u);
    let spec = u.spec();
    let n = dist.levels.len();
    let bp = (0..=n).map(|k| spec.cells_measure(k)).collect();
    MonotoneProfile {
        breakpoints: bp,
        values: dist.levels,
        kind: ProfileKind::Constant,
    }
}

/// Grid with cell width `h` covering `Ω⋆ = (|Ω|/κ)^{1/2} K0`, with one spare cell per side.
pub fn star_domain_grid<T: Scalar>(g: &Gauge<T>, measure: T, h: T) -> Result<GridSpec<T>> {
    let radius = (measure / g.kappa()).sqrt();
    // support of K0 in the coordinate directions is H(e_i)
    let wx = radius * g.eval2(T::one(), T::zero()) + h;
    let wy = radius * g.eval2(T::zero(), T::one()) + h;
    let nx = (T::lit(2.0) * wx / h).ceil().to_usize().unwrap_or(1);
    let ny = (T::lit(2.0) * wy / h).ceil().to_usize().unwrap_or(1);
    let origin = [-T::of_usize(nx) * h / T::lit(2.0), -T::of_usize(ny) * h / T::lit(2.0)];
    GridSpec::new(nx, ny, h, origin)
}

/// `u⋆(x) = u*(κ H0(x)^n)` sampled on `target`; cells with `κ H0(x)^n >= |Ω|` are masked out.
pub fn convex_rearrangement<T: Scalar>(
    u: &GridFunction<T>,
    g: &Gauge<T>,
    target: GridSpec<T>,
) -> Result<GridFunction<T>> {
    if g.dim() != 2 {
        return Err(Error::InvalidGauge("grid rearrangements need a planar gauge".into()));
    }
    let ustar = decreasing_rearrangement(u);
    let kappa = g.kappa();
    let polar = g.polar();
    let measure = ustar.measure();
    let s_of = |x: [T; 2]| {
        let r = polar.eval2(x[0], x[1]);
        kappa * r * r
    };
    GridFunction::from_fn(target, |x| s_of(x) < measure, |x| ustar.eval(s_of(x)))
}

/// `b̃` sampled on the radii `r_k = ((k - ½)h² / κ)^{1/n}` of the cells of `u` in level order.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRearrangement<T> {
    radii: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> PseudoRearrangement<T> {
    pub fn new(radii: Vec<T>, values: Vec<T>) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::InvalidProfile(
                "pseudo-rearrangement needs matching, nonempty radii and values".into(),
            ));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < T::zero() {
            return Err(Error::InvalidProfile("radii must be nonnegative and increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidProfile("b̃ must be finite and nonnegative".into()));
        }
        Ok(Self { radii, values })
    }

    /// `b̃ ≡ c` on `[0, radius]`.
    pub fn constant(c: T, radius: T) -> Result<Self> {
        Self::new(vec![T::zero(), radius], vec![c, c])
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Linear interpolation between nodes, constant extrapolation outside.
    pub fn eval(&self, r: T) -> T {
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r >= self.radii[n - 1] {
            return self.values[n - 1];
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let (a, b) = (self.radii[k], self.radii[k + 1]);
        self.values[k] + (r - a) / (b - a) * (self.values[k + 1] - self.values[k])
    }

    /// Drops interior nodes of constant runs (the interpolant is unchanged).
    pub fn compressed(&self) -> Self {
        let n = self.values.len();
        let mut radii = vec![self.radii[0]];
        let mut values = vec![self.values[0]];
        for k in 1..n {
            let keep = k == n - 1 || !(self.values[k - 1] == self.values[k] && self.values[k] == self.values[k + 1]);
            if keep {
                radii.push(self.radii[k]);
                values.push(self.values[k]);
            }
        }
        Self { radii, values }
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// Two-column CSV `r,btilde`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "r,btilde")?;
        for (r, b) in self.radii.iter().zip(&self.values) {
            writeln!(out, "{},{}", r.f64(), b.f64())?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_two_columns(path.as_ref())?;
        Self::new(
            rows.iter().map(|r| T::lit(r.0)).collect(),
            rows.iter().map(|r| T::lit(r.1)).collect(),
        )
    }
}

/// Pseudo-rearrangement of `B` relative to `u`.
///
/// With cells in [`level_order`], `C_k = h² Σ_{j<=k} B_j²` is the integral of `B²` over the
/// first `k` cells, so `dC/ds = B_k²` on the `k`-th step and `b̃_k = B_k`. On plateaus of `|u|`
/// the values enumerate the plateau's `B` in cell order.
pub fn pseudo_rearrangement<T: Scalar>(
    b: &GridFunction<T>,
    u: &GridFunction<T>,
    g: &Gauge<T>,
) -> Result<PseudoRearrangement<T>> {
    if !b.same_grid(u) {
        return Err(Error::GridMismatch);
    }
    if b.masked().any(|(_, v)| v < T::zero()) {
        return Err(Error::InvalidProblem("drift coefficient B must be nonnegative".into()));
    }
    let kappa = g.kappa();
    let inv_n = T::one() / T::of_usize(g.dim());
    let spec = u.spec();
    let order = level_order(u);
    let half_cell = spec.cells_measure(1) / T::lit(2.0);
    let radii = (0..order.len())
        .map(|k| ((spec.cells_measure(k) + half_cell) / kappa).powf(inv_n))
        .collect();
    let values = order.iter().map(|&k| b.values[k]).collect();
    PseudoRearrangement::new(radii, values)
}

/// `∫_{|u| > u*(s_k)} B²` after each of the first `k` cells in level order (`C_k`).
pub fn cumulative_b2<T: Scalar>(b: &GridFunction<T>, u: &GridFunction<T>) -> Result<Vec<T>> {
    if !b.same_grid(u) {
        return Err(Error::GridMismatch);
    }
    let cell = u.spec().cells_measure(1);
    let mut acc = T::zero();
    Ok(level_order(u)
        .into_iter()
        .map(|k| {
            acc = acc + cell * b.values[k] * b.values[k];
            acc
        })
        .collect())
}

/// Both sides of `∫_Ω |u v| <= ∫_0^{|Ω|} u* v*` on a common grid. With `v` the indicator of
/// `E` the right side is `∫_0^{|E|} u*`.
pub fn hardy_littlewood<T: Scalar>(u: &GridFunction<T>, v: &GridFunction<T>) -> Result<(T, T)> {
    if !u.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    let cell = u.h * u.h;
    let lhs = u
        .masked()
        .zip(v.masked())
        .map(|((_, a), (_, b))| (a * b).abs())
        .sum::<T>()
        * cell;
    let sorted = |g: &GridFunction<T>| -> Vec<T> { level_order(g).into_iter().map(|k| g.values[k].abs()).collect() };
    let (a, b) = (sorted(u), sorted(v));
    let rhs = a.iter().zip(&b).map(|(x, y)| *x * *y).sum::<T>() * cell;
    Ok((lhs, rhs))
}
