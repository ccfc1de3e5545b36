//! Anisotropic total variation, perimeter, coarea and isoperimetric checks, level-set energies
//! and the generalized Gronwall bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::grid::{GridFunction, GridSpec};
use crate::rearrange::{distribution, level_order};
use crate::scalar::Scalar;

/// Default number of thresholds between `0` and `max |u|`.
pub const DEFAULT_LEVELS: usize = 64;

/// Simple closed polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T> {
    vertices: Vec<[T; 2]>,
}

impl<T: Scalar> Polygon<T> {
    pub fn new(vertices: Vec<[T; 2]>) -> Result<Self> {
        let m = vertices.len();
        if m < 3 {
            return Err(Error::DegeneratePolygon("fewer than three vertices".into()));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        for i in 0..m {
            let a = vertices[i];
            let b = vertices[(i + 1) % m];
            if a == b {
                return Err(Error::DegeneratePolygon(format!("zero-length edge at vertex {i}")));
            }
        }
        let p = Self { vertices };
        if !(p.signed_area() > T::zero()) {
            return Err(Error::InvalidPolygon("vertices are not counterclockwise".into()));
        }
        if !p.is_simple() {
            return Err(Error::InvalidPolygon("polygon self-intersects".into()));
        }
        Ok(p)
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    fn signed_area(&self) -> T {
        crate::gauge::shoelace(&self.vertices)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    pub fn scaled(&self, lambda: T) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| [lambda * v[0], lambda * v[1]]).collect())
    }

    fn is_simple(&self) -> bool {
        let m = self.vertices.len();
        let seg = |i: usize| (self.vertices[i], self.vertices[(i + 1) % m]);
        for i in 0..m {
            for j in i + 1..m {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == m - 1) {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient<T: Scalar>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect<T: Scalar>(a: [T; 2], b: [T; 2], c: [T; 2], d: [T; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    let on = |p: [T; 2], q: [T; 2], r: [T; 2]| {
        r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    (d1 == z && on(c, d, a)) || (d2 == z && on(c, d, b)) || (d3 == z && on(a, b, c)) || (d4 == z && on(a, b, d))
}

/// Counterclockwise convex hull (monotone chain) of at least three non-collinear points.
pub fn convex_hull<T: Scalar>(points: &[[T; 2]]) -> Result<Polygon<T>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegeneratePolygon("hull of fewer than three points".into()));
    }
    let mut hull: Vec<[T; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[T; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    Polygon::new(hull)
}

/// `m`-gon inscribed in the Wulff shape `r K0` (vertices on `∂(r K0)` at equal angles).
pub fn wulff_polygon<T: Scalar>(g: &Gauge<T>, r: T, m: usize) -> Result<Polygon<T>> {
    let two_pi = T::lit(2.0) * T::PI();
    Polygon::new(
        (0..m)
            .map(|k| g.wulff_point(two_pi * T::of_usize(k) / T::of_usize(m), r))
            .collect(),
    )
}

/// `∫_Ω H(∇u) ≈ Σ H(∇u) h²` with [`GridFunction::gradient`].
pub fn anisotropic_tv<T: Scalar>(u: &GridFunction<T>, g: &Gauge<T>) -> T {
    let cell = u.h * u.h;
    u.masked()
        .map(|(k, _)| {
            let d = u.gradient(k % u.nx, k / u.nx);
            g.eval2(d[0], d[1])
        })
        .sum::<T>()
        * cell
}

/// `P_H(E) = Σ_edges H(ν_e) |e|`.
pub fn perimeter<T: Scalar>(e: &Polygon<T>, g: &Gauge<T>) -> T {
    let v = e.vertices();
    let m = v.len();
    (0..m)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % m];
            // outward normal of a ccw edge is its right side; H is 1-homogeneous
            g.eval2(b[1] - a[1], a[0] - b[0])
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoperimetricReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `P_H(E)` against `n κ_n^{1/n} |E|^{1-1/n}` (planar).
pub fn isoperimetric_check<T: Scalar>(e: &Polygon<T>, g: &Gauge<T>) -> IsoperimetricReport {
    let lhs = perimeter(e, g);
    let two = T::lit(2.0);
    let rhs = two * g.kappa().sqrt() * e.area().sqrt();
    IsoperimetricReport {
        lhs: lhs.f64(),
        rhs: rhs.f64(),
        ratio: (lhs / rhs).f64(),
    }
}

/// Oriented marching-squares segments of `∂{u > t}`: the superlevel set lies to the left of
/// each segment. Cells outside the mask (and a ring around the grid) count as zero, so the
/// contours close for `t >= 0`.
pub fn level_set_segments<T: Scalar>(u: &GridFunction<T>, t: T) -> Vec<([T; 2], [T; 2])> {
    let spec = u.spec();
    let (nx, ny) = (u.nx as isize, u.ny as isize);
    let value = |i: isize, j: isize| -> T {
        if i < 0 || j < 0 || i >= nx || j >= ny {
            return T::zero();
        }
        u.get(i as usize, j as usize).unwrap_or(T::zero())
    };
    let half = T::lit(0.5);
    let pos = |i: isize, j: isize| -> [T; 2] {
        [
            spec.origin[0] + (T::from_isize(i).unwrap() + half) * spec.h,
            spec.origin[1] + (T::from_isize(j).unwrap() + half) * spec.h,
        ]
    };
    let mut segs = Vec::new();
    for j in -1..ny {
        for i in -1..nx {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals = corners.map(|(a, b)| value(a, b));
            let inside = vals.map(|v| v > t);
            if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                continue;
            }
            // crossings in ccw order: (point, leaving the set?)
            let mut cross: Vec<([T; 2], bool)> = Vec::with_capacity(4);
            for k in 0..4 {
                let n = (k + 1) % 4;
                if inside[k] != inside[n] {
                    let lam = (t - vals[k]) / (vals[n] - vals[k]);
                    let pa = pos(corners[k].0, corners[k].1);
                    let pb = pos(corners[n].0, corners[n].1);
                    cross.push((
                        [pa[0] + lam * (pb[0] - pa[0]), pa[1] + lam * (pb[1] - pa[1])],
                        inside[k],
                    ));
                }
            }
            if cross.len() == 2 {
                let (out, inn) = if cross[0].1 { (0, 1) } else { (1, 0) };
                segs.push((cross[out].0, cross[inn].0));
            } else {
                // saddle: the center value decides whether the inside corners connect
                let center = vals.iter().copied().sum::<T>() / T::lit(4.0);
                let connected = center > t;
                for k in 0..4 {
                    if cross[k].1 {
                        let partner = if connected { (k + 1) % 4 } else { (k + 3) % 4 };
                        segs.push((cross[k].0, cross[partner].0));
                    }
                }
            }
        }
    }
    segs
}

/// `P_H({u > t})` from the marching-squares contour.
pub fn level_set_perimeter<T: Scalar>(u: &GridFunction<T>, g: &Gauge<T>, t: T) -> T {
    level_set_segments(u, t)
        .into_iter()
        .map(|(a, b)| g.eval2(b[1] - a[1], a[0] - b[0]))
        .sum()
}

/// `count` uniform thresholds from `0` to `max |u|` inclusive.
pub fn default_thresholds<T: Scalar>(u: &GridFunction<T>, count: usize) -> Vec<T> {
    let top = u.max_abs();
    let count = count.max(2);
    (0..count)
        .map(|k| top * T::of_usize(k) / T::of_usize(count - 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaReport {
    pub total_variation: f64,
    pub perimeter_integral: f64,
    pub residual: f64,
}

/// Compares `∫ H(∇u)` with the trapezoid rule for `∫ P_H({u > s}) ds` over `t_grid`.
pub fn coarea_check<T: Scalar>(u: &GridFunction<T>, g: &Gauge<T>, t_grid: &[T]) -> Result<CoareaReport> {
    if u.min_value() < T::zero() {
        return Err(Error::InvalidProblem("coarea check expects u >= 0".into()));
    }
    let tv = anisotropic_tv(u, g);
    let per: Vec<T> = t_grid.iter().map(|&t| level_set_perimeter(u, g, t)).collect();
    let mut integral = T::zero();
    for k in 1..t_grid.len() {
        integral = integral + (per[k] + per[k - 1]) / T::lit(2.0) * (t_grid[k] - t_grid[k - 1]);
    }
    let residual = if tv == T::zero() && integral == T::zero() {
        T::zero()
    } else {
        (tv - integral).abs() / tv.max(integral)
    };
    Ok(CoareaReport {
        total_variation: tv.f64(),
        perimeter_integral: integral.f64(),
        residual: residual.f64(),
    })
}

/// `t ↦ ∫_{|u|>t} H(∇u)` and `t ↦ ∫_{|u|>t} H²(∇u)` on a threshold grid, with `μ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetEnergyProfile<T> {
    pub thresholds: Vec<T>,
    pub distribution: Vec<T>,
    pub energy: Vec<T>,
    pub energy_sq: Vec<T>,
}

pub fn level_set_energy<T: Scalar>(u: &GridFunction<T>, g: &Gauge<T>, t_grid: &[T]) -> LevelSetEnergyProfile<T> {
    let cell = u.h * u.h;
    let order = level_order(u);
    // prefix sums along descending |u|
    let mut e1 = vec![T::zero(); order.len() + 1];
    let mut e2 = vec![T::zero(); order.len() + 1];
    for (n, &k) in order.iter().enumerate() {
        let d = u.gradient(k % u.nx, k / u.nx);
        let h = g.eval2(d[0], d[1]);
        e1[n + 1] = e1[n] + h * cell;
        e2[n + 1] = e2[n] + h * h * cell;
    }
    let mu = distribution(u);
    let levels = mu.levels();
    let mut out = LevelSetEnergyProfile {
        thresholds: t_grid.to_vec(),
        distribution: Vec::with_capacity(t_grid.len()),
        energy: Vec::with_capacity(t_grid.len()),
        energy_sq: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        let count = levels.partition_point(|&v| v > t);
        out.distribution.push(mu.eval(t));
        out.energy.push(e1[count]);
        out.energy_sq.push(e2[count]);
    }
    out
}

/// Area fraction of a cell `[-h/2, h/2]²` where `c + a·x + b·y > t`.
///
/// This is the upper tail of a sum of two uniforms, with a trapezoidal density.
fn fraction_above<T: Scalar>(c: T, a: T, b: T, h: T, t: T) -> T {
    let (a, b) = ((a * h).abs(), (b * h).abs());
    let half = T::lit(0.5);
    // P(aU + bV <= x) with x measured from the lower corner
    let x = t - c + half * (a + b);
    let w = a + b;
    if !(w > T::zero()) {
        return if c > t { T::one() } else { T::zero() };
    }
    let below = if a * b <= T::lit(1e-12) * w * w {
        (x / w).max(T::zero()).min(T::one())
    } else {
        let r = |y: T| {
            let y = y.max(T::zero());
            y * y
        };
        ((r(x) - r(x - a) - r(x - b) + r(x - w)) / (T::lit(2.0) * a * b)).min(T::one())
    };
    T::one() - below
}

/// Discrete form of
/// `μ(t)^{2/n-2} (-μ'(t)) (-d/dt ∫_{|u|>t} H²(∇u)) / (n² κ^{2/n})`, which is `>= 1` for exact
/// solutions. `|u|` is reconstructed linearly inside each cell from its gradient, so `μ` and the
/// energy vary continuously with `t` instead of jumping by whole cells. Forward differences over
/// each threshold slab; `μ` is averaged over the slab.
/// Returns `(t_k, product_k)` for every slab with `μ > 0`.
pub fn energy_distribution_products<T: Scalar>(u: &GridFunction<T>, g: &Gauge<T>, t_grid: &[T]) -> Vec<(T, T)> {
    let cell = u.h * u.h;
    let cells: Vec<(T, [T; 2], T)> = u
        .masked()
        .map(|(k, v)| {
            let d = u.gradient(k % u.nx, k / u.nx);
            let e = g.eval2(d[0], d[1]);
            (v.abs(), d, e * e)
        })
        .collect();
    let (mu, e2): (Vec<T>, Vec<T>) = t_grid
        .iter()
        .map(|&t| {
            cells.iter().fold((T::zero(), T::zero()), |(m, e), &(v, d, hh)| {
                let f = fraction_above(v, d[0], d[1], u.h, t) * cell;
                (m + f, e + f * hh)
            })
        })
        .unzip();
    let n = T::lit(2.0);
    let norm = n * n * g.kappa().powf(T::lit(2.0) / n);
    let expo = T::lit(2.0) / n - T::lit(2.0);
    let mut out = Vec::new();
    for k in 0..t_grid.len().saturating_sub(1) {
        let dt = t_grid[k + 1] - t_grid[k];
        let mu_mid = (mu[k] + mu[k + 1]) / T::lit(2.0);
        if !(dt > T::zero()) || !(mu_mid > T::zero()) {
            continue;
        }
        let dmu = (mu[k] - mu[k + 1]) / dt;
        let de2 = (e2[k] - e2[k + 1]) / dt;
        out.push((t_grid[k], mu_mid.powf(expo) * dmu * de2 / norm));
    }
    out
}

/// `t ↦ ∫_t^∞ exp(∫_t^s K) (-dψ(s))` on the sample grid.
///
/// `ψ` jumps to zero after the last sample. Increments of `ψ` over `[t_j, t_{j+1}]` are
/// weighted at the slab midpoint; the exponent uses the trapezoid rule.
pub fn gronwall_bound<T: Scalar>(grid: &[T], kernel: &[T], psi: &[T]) -> Result<Vec<T>> {
    let m = grid.len();
    if m == 0 || kernel.len() != m || psi.len() != m {
        return Err(Error::InvalidProblem(
            "Gronwall bound needs kernel and ψ sampled on the same nonempty grid".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProblem("Gronwall grid must increase".into()));
    }
    if kernel.iter().any(|k| *k < T::zero()) {
        return Err(Error::InvalidProblem("Gronwall kernel must be nonnegative".into()));
    }
    let two = T::lit(2.0);
    let eight = T::lit(8.0);
    let mut out = vec![T::zero(); m];
    // tail: ψ_m drops to zero at the last sample
    out[m - 1] = psi[m - 1];
    for i in (0..m - 1).rev() {
        let dt = grid[i + 1] - grid[i];
        let to_mid = (T::lit(3.0) * kernel[i] + kernel[i + 1]) * dt / eight;
        let to_next = (kernel[i] + kernel[i + 1]) * dt / two;
        out[i] = to_mid.exp() * (psi[i] - psi[i + 1]) + to_next.exp() * out[i + 1];
    }
    Ok(out)
}

/// Convex hull of `points` uniform samples in the unit disk.
pub fn random_convex_polygon<T: Scalar, R: Rng>(rng: &mut R, points: usize) -> Result<Polygon<T>> {
    let pts: Vec<[T; 2]> = (0..points.max(3))
        .map(|_| {
            let r: f64 = rng.gen::<f64>().sqrt();
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            [T::lit(r * t.cos()), T::lit(r * t.sin())]
        })
        .collect();
    convex_hull(&pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoperimetricSuiteReport {
    pub polygons: usize,
    pub min_ratio: f64,
    /// Ratio for the 256-gon inscribed in the Wulff shape.
    pub wulff_ratio: f64,
}

/// Isoperimetric ratios over `count` random convex polygons (seeded) and a 256-gon Wulff shape.
pub fn isoperimetric_suite<T: Scalar>(g: &Gauge<T>, count: usize, seed: u64) -> Result<IsoperimetricSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut done = 0;
    while done < count {
        let n = rng.gen_range(3..=24);
        let poly = match random_convex_polygon::<T, _>(&mut rng, n) {
            Ok(p) => p,
            // collinear draws
            Err(_) => continue,
        };
        min_ratio = min_ratio.min(isoperimetric_check(&poly, g).ratio);
        done += 1;
    }
    let wulff = wulff_polygon(g, T::one(), 256)?;
    Ok(IsoperimetricSuiteReport {
        polygons: count,
        min_ratio,
        wulff_ratio: isoperimetric_check(&wulff, g).ratio,
    })
}

/// Coarea check for the cone `1 - H_0(x)` on its Wulff-shaped support, `n` cells per side.
pub fn cone_coarea_check<T: Scalar>(g: &Gauge<T>, n: usize) -> Result<CoareaReport> {
    let polar = g.polar();
    let (mut lo, mut hi) = ([T::zero(); 2], [T::zero(); 2]);
    for k in 0..1024 {
        let x = g.wulff_point(T::lit(std::f64::consts::TAU * k as f64 / 1024.0), T::one());
        for d in 0..2 {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let spec = GridSpec::covering(lo, hi, n)?;
    let u = GridFunction::from_fn(
        spec,
        |x| polar.eval2(x[0], x[1]) < T::one(),
        |x| T::one() - polar.eval2(x[0], x[1]),
    )?;
    coarea_check(&u, g, &default_thresholds(&u, DEFAULT_LEVELS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn square(side: f64) -> Polygon<f64> {
        Polygon::<f64>::new(vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]).unwrap()
    }

    fn cone(n: usize) -> GridFunction<f64> {
        let spec = GridSpec::<f64>::covering([-1.0, -1.0], [1.0, 1.0], n).unwrap();
        GridFunction::<f64>::from_fn(spec, |x| x[0].hypot(x[1]) < 1.0, |x| 1.0 - x[0].hypot(x[1])).unwrap()
    }

    #[test]
    fn tv_examples() {
        let spec = GridSpec::<f64>::covering([0.0, 0.0], [1.0, 1.0], 32).unwrap();
        let c = GridFunction::<f64>::from_fn(spec, |_| true, |_| 3.0).unwrap();
        let g = Gauge::<f64>::ellipse(2.0, 0.5).unwrap();
        assert_eq!(anisotropic_tv(&c, &g), 0.0);
        let w = [0.4, -1.3];
        let lin = GridFunction::<f64>::from_fn(spec, |_| true, |x| w[0] * x[0] + w[1] * x[1]).unwrap();
        for gauge in [
            g.clone(),
            Gauge::<f64>::pnorm(3.0).unwrap(),
            Gauge::<f64>::euclidean(2).unwrap(),
        ] {
            let tv = anisotropic_tv(&lin, &gauge);
            assert!((tv - gauge.eval2(w[0], w[1])).abs() < 1e-10);
        }
        let tv = anisotropic_tv(&cone(257), &Gauge::<f64>::euclidean(2).unwrap());
        assert!((tv - PI).abs() < 0.02 * PI);
    }

    #[test]
    fn perimeter_examples() {
        let e = Gauge::<f64>::euclidean(2).unwrap();
        assert!((perimeter(&square(1.0), &e) - 4.0).abs() < 1e-15);
        let g = Gauge::<f64>::pnorm(3.0).unwrap();
        let p = perimeter(&square(1.0), &g);
        assert!((perimeter(&square(2.5), &g) - 2.5 * p).abs() < 1e-12);
        for gauge in [e, g, Gauge::<f64>::ellipse(2.0, 0.5).unwrap()] {
            let r = 0.7;
            let w = wulff_polygon(&gauge, r, 256).unwrap();
            let expect = 2.0 * gauge.kappa() * r;
            assert!((perimeter(&w, &gauge) - expect).abs() < 1e-3 * expect);
        }
    }

    #[test]
    fn polygon_validation() {
        assert!(matches!(
            Polygon::<f64>::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(Error::DegeneratePolygon(_))
        ));
        assert!(Polygon::<f64>::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        // bow tie
        assert!(Polygon::<f64>::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn isoperimetric_examples() {
        let e = Gauge::<f64>::euclidean(2).unwrap();
        let r = isoperimetric_check(&square(1.0), &e);
        assert!((r.lhs - 4.0).abs() < 1e-15);
        assert!((r.rhs - 2.0 * PI.sqrt()).abs() < 1e-14);
        assert!((r.ratio - 2.0 / PI.sqrt()).abs() < 1e-14);
        let g = Gauge::<f64>::ellipse(1.5, 1.0).unwrap();
        let w = wulff_polygon(&g, 1.0, 256).unwrap();
        let r = isoperimetric_check(&w, &g);
        assert!(r.ratio >= 1.0 && r.ratio <= 1.001, "{r:?}");
    }

    #[test]
    fn marching_squares_orientation_gives_positive_perimeter() {
        let u = cone(65);
        let e = Gauge::<f64>::euclidean(2).unwrap();
        let p = level_set_perimeter(&u, &e, 0.5);
        assert!((p - PI).abs() < 0.01 * PI, "{p}");
        // each segment has the superlevel set on its left
        for (a, b) in level_set_segments(&u, 0.5) {
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let left = [-(b[1] - a[1]), b[0] - a[0]];
            let inward = -(mid[0] * left[0] + mid[1] * left[1]);
            assert!(inward > 0.0);
        }
    }

    #[test]
    fn coarea_examples() {
        let e = Gauge::<f64>::euclidean(2).unwrap();
        let u = cone(257);
        let t = default_thresholds(&u, DEFAULT_LEVELS);
        let r = coarea_check(&u, &e, &t).unwrap();
        assert!(r.residual <= 0.03, "{r:?}");

        let spec = GridSpec::<f64>::covering([-1.0, -1.0], [1.0, 1.0], 129).unwrap();
        let bump = GridFunction::<f64>::from_fn(
            spec,
            |_| true,
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                1.0 / (1.0 + (20.0 * (r2.sqrt() - 0.5)).exp())
            },
        )
        .unwrap();
        let g = Gauge::<f64>::ellipse(2.0, 0.5).unwrap();
        let t = default_thresholds(&bump, DEFAULT_LEVELS);
        let r = coarea_check(&bump, &g, &t).unwrap();
        assert!(r.residual <= 0.05, "{r:?}");

        let z = GridFunction::<f64>::from_fn(spec, |_| true, |_| 0.0).unwrap();
        let r = coarea_check(&z, &e, &default_thresholds(&z, 8)).unwrap();
        assert_eq!((r.total_variation, r.perimeter_integral, r.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn level_set_energy_examples() {
        let e = Gauge::<f64>::euclidean(2).unwrap();
        let u = cone(257);
        let t = default_thresholds(&u, DEFAULT_LEVELS);
        let prof = level_set_energy(&u, &e, &t);
        assert_eq!(*prof.energy_sq.last().unwrap(), 0.0);
        assert!(prof.energy_sq.windows(2).all(|w| w[1] <= w[0]));
        assert!(prof.energy.windows(2).all(|w| w[1] <= w[0]));
        for (k, &tk) in t.iter().enumerate().take(60) {
            let exact = PI * (1.0 - tk).powi(2);
            assert!((prof.energy_sq[k] - exact).abs() <= 0.03 * PI, "t={tk}");
        }
    }

    #[test]
    fn cell_fractions() {
        assert_eq!(fraction_above::<f64>(1.0, 0.0, 0.0, 0.1, 0.5), 1.0);
        assert_eq!(fraction_above::<f64>(0.0, 0.0, 0.0, 0.1, 0.5), 0.0);
        // level line through the centre halves the cell for any direction
        for &(a, b) in &[(1.0, 0.0), (1.0, 1.0), (0.3, -2.0)] {
            assert!((fraction_above::<f64>(0.0, a, b, 0.1, 0.0) - 0.5).abs() < 1e-14);
        }
        // diagonal cut through a corner leaves a triangle of area 1/8
        assert!((fraction_above::<f64>(0.0, 1.0, 1.0, 1.0, 0.5) - 0.125).abs() < 1e-14);
        assert!((fraction_above::<f64>(0.0, 2.0, 0.0, 1.0, 0.5) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn energy_distribution_product_is_sharp_on_the_torsion_profile() {
        let e = Gauge::<f64>::euclidean(2).unwrap();
        let spec = GridSpec::<f64>::covering([-1.0, -1.0], [1.0, 1.0], 129).unwrap();
        let u = GridFunction::<f64>::from_fn(
            spec,
            |x| x[0].hypot(x[1]) < 1.0,
            |x| (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0,
        )
        .unwrap();
        let top = 0.25;
        for (t, p) in energy_distribution_products(&u, &e, &default_thresholds(&u, DEFAULT_LEVELS)) {
            if t >= 0.1 * top && t <= 0.9 * top {
                assert!((p - 1.0).abs() < 0.01, "t={t} p={p}");
            }
        }
    }

    #[test]
    fn gronwall_examples() {
        let n = 10_000;
        let grid: Vec<f64> = (0..=n).map(|k| 20.0 * k as f64 / n as f64).collect();
        let psi: Vec<f64> = grid.iter().map(|s| (-s).exp()).collect();
        let zero = vec![0.0; grid.len()];
        let b = gronwall_bound(&grid, &zero, &psi).unwrap();
        for (x, y) in b.iter().zip(&psi) {
            assert!((x - y).abs() < 1e-14);
        }
        for &(k, tmax) in &[(0.25, 5.0), (0.5, 1.0)] {
            let kern = vec![k; grid.len()];
            let b = gronwall_bound(&grid, &kern, &psi).unwrap();
            for (t, v) in grid.iter().zip(&b).filter(|(t, _)| **t <= tmax) {
                let exact = (-t).exp() / (1.0 - k);
                assert!((v - exact).abs() <= 1e-4 * exact, "k={k} t={t}");
            }
        }
        let b = gronwall_bound(&grid, &vec![0.3; grid.len()], &zero).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gronwall_is_monotone_in_psi() {
        let grid: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let kern: Vec<f64> = grid.iter().map(|t| 0.5 + 0.3 * t.sin()).collect();
        let p1: Vec<f64> = grid.iter().map(|t| (-t).exp()).collect();
        let p2: Vec<f64> = grid.iter().map(|t| 1.5 * (-t).exp() + 0.1 * (-2.0 * t).exp()).collect();
        let b1 = gronwall_bound(&grid, &kern, &p1).unwrap();
        let b2 = gronwall_bound(&grid, &kern, &p2).unwrap();
        assert!(b1.iter().zip(&b2).all(|(a, b)| a <= b));
    }

    #[test]
    fn convex_hull_is_ccw() {
        let pts = [
            [0.0f64, 0.0],
            [1.0, 0.0],
            [0.5, 0.2],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
        ];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert!((h.area() - 1.0).abs() < 1e-15);
    }
}
