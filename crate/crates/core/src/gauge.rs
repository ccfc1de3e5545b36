//! Gauge functions `H`, their polars `H0` and the convex bodies `K = {H <= 1}`, `K0 = {H0 <= 1}`.
//!
//! Every gauge built through the public constructors is normalized so that `|K| = ω_n`.
//! Polars are returned with the inherited scale (they are *not* renormalized), which is what
//! makes `κ_n = |K0|` meaningful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, MAX_DEPTH};
use crate::scalar::{unit_ball_measure, Scalar};

/// Angular tolerance for non-smooth rays of polygonal and `p ∈ {1, ∞}` gauges.
pub const NONSMOOTH_TOL: f64 = 1e-9;

/// Boundary samples used by [`sampled_support`] when no count is given.
pub const SUPPORT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeKind<T> {
    Euclidean,
    /// `H_raw(ξ) = sqrt(ξ·Mξ)` for a symmetric positive-definite, row-major `M`.
    Ellipsoidal {
        matrix: Vec<T>,
    },
    /// `H_raw(ξ) = ‖ξ‖_p`, `p = ∞` allowed. Two-dimensional only.
    PNorm {
        p: T,
    },
    /// `K_raw` is the centrally symmetric convex polygon with these counterclockwise vertices.
    /// `facet_gradients[i]` is `n_i / d_i` for the facet `⟨n_i, ξ⟩ <= d_i` joining vertex `i`
    /// to vertex `i + 1`, so `H_raw(ξ) = max_i ⟨facet_gradients[i], ξ⟩`.
    Polygonal {
        vertices: Vec<[T; 2]>,
        facet_gradients: Vec<[T; 2]>,
    },
}

/// A convex, even, 1-homogeneous function `H = scale · H_raw`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge<T> {
    kind: GaugeKind<T>,
    dim: usize,
    scale: T,
}

impl<T: Scalar> Gauge<T> {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: GaugeKind::Euclidean,
            dim,
            scale: T::one(),
        })
    }

    /// Ellipsoidal gauge from a symmetric positive-definite row-major matrix.
    pub fn ellipsoidal(matrix: Vec<T>, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if matrix.len() != dim * dim {
            return Err(Error::InvalidGauge(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        let sym_tol = T::lit(1e-12);
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (matrix[i * dim + j], matrix[j * dim + i]);
                if (a - b).abs() > sym_tol * (a.abs() + b.abs() + T::one()) {
                    return Err(Error::InvalidGauge("matrix is not symmetric".into()));
                }
            }
        }
        let chol =
            cholesky(&matrix, dim).ok_or_else(|| Error::InvalidGauge("matrix is not positive definite".into()))?;
        let det = cholesky_det(&chol, dim);
        let kind = GaugeKind::Ellipsoidal { matrix };
        // |K_raw| = ω_n / sqrt(det M)
        let raw = unit_ball_measure::<T>(dim) / det.sqrt();
        Ok(Self::normalized(kind, dim, raw))
    }

    /// Gauge of the ellipse with semi-axes `a`, `b` (before normalization).
    pub fn ellipse(a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b > T::zero() && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidGauge("ellipse semi-axes must be positive".into()));
        }
        let z = T::zero();
        Self::ellipsoidal(vec![T::one() / (a * a), z, z, T::one() / (b * b)], 2)
    }

    /// Planar `p`-norm gauge, `1 <= p <= ∞`.
    pub fn pnorm(p: T) -> Result<Self> {
        if p.is_nan() || p < T::one() {
            return Err(Error::InvalidGauge(format!("p-norm exponent must be >= 1, got {p}")));
        }
        let raw = pnorm_unit_area(p)?;
        Ok(Self::normalized(GaugeKind::PNorm { p }, 2, raw))
    }

    /// Gauge of a centrally symmetric convex polygon given by its vertices (either orientation).
    pub fn polygon(vertices: &[[T; 2]]) -> Result<Self> {
        let (vertices, facet_gradients) = polygon_parts(vertices)?;
        let raw = shoelace(&vertices);
        Ok(Self::normalized(
            GaugeKind::Polygonal {
                vertices,
                facet_gradients,
            },
            2,
            raw,
        ))
    }

    /// Parses `euclidean`, `ellipse:a,b`, `pnorm:p` (`p` may be `inf`) or
    /// `polygon:x1,y1;x2,y2;...`. `dim` only matters for `euclidean`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let spec = spec.trim();
        let (head, args) = match spec.split_once(':') {
            Some((h, a)) => (h.trim(), a.trim()),
            None => (spec, ""),
        };
        let num = |s: &str| -> Result<T> {
            let s = s.trim();
            let v = if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
                f64::INFINITY
            } else {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidGauge(format!("bad number '{s}' in '{spec}'")))?
            };
            Ok(T::lit(v))
        };
        match head {
            "euclidean" => Self::euclidean(dim),
            "ellipse" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::InvalidGauge(format!("expected ellipse:a,b, got '{spec}'")));
                }
                Self::ellipse(num(parts[0])?, num(parts[1])?)
            }
            "pnorm" => Self::pnorm(num(args)?),
            "polygon" => {
                let mut vertices = Vec::new();
                for pair in args.split(';').filter(|s| !s.trim().is_empty()) {
                    let xy: Vec<&str> = pair.split(',').collect();
                    if xy.len() != 2 {
                        return Err(Error::InvalidGauge(format!("bad vertex '{pair}'")));
                    }
                    vertices.push([num(xy[0])?, num(xy[1])?]);
                }
                Self::polygon(&vertices)
            }
            _ => Err(Error::InvalidGauge(format!("unknown gauge '{spec}'"))),
        }
    }

    fn normalized(kind: GaugeKind<T>, dim: usize, raw_measure: T) -> Self {
        let scale = (raw_measure / unit_ball_measure::<T>(dim)).powf(T::one() / T::of_usize(dim));
        Self { kind, dim, scale }
    }

    pub fn kind(&self) -> &GaugeKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GaugeKind::Euclidean => "euclidean",
            GaugeKind::Ellipsoidal { .. } => "ellipsoidal",
            GaugeKind::PNorm { .. } => "pnorm",
            GaugeKind::Polygonal { .. } => "polygonal",
        }
    }

    fn raw(&self, xi: &[T]) -> T {
        match &self.kind {
            GaugeKind::Euclidean => norm(xi),
            GaugeKind::Ellipsoidal { matrix } => quad_form(matrix, xi).max(T::zero()).sqrt(),
            GaugeKind::PNorm { p } => pnorm_eval(*p, xi),
            GaugeKind::Polygonal { facet_gradients, .. } => facet_gradients
                .iter()
                .map(|g| g[0] * xi[0] + g[1] * xi[1])
                .fold(T::zero(), T::max),
        }
    }

    /// `H(ξ)`.
    pub fn evaluate(&self, xi: &[T]) -> T {
        debug_assert_eq!(xi.len(), self.dim);
        self.scale * self.raw(xi)
    }

    /// Convenience for planar gauges.
    #[inline]
    pub fn eval2(&self, x: T, y: T) -> T {
        self.evaluate(&[x, y])
    }

    /// `∇H(ξ)` for `ξ ≠ 0` off the non-smooth rays.
    pub fn gradient(&self, xi: &[T]) -> Result<Vec<T>> {
        let n = norm(xi);
        if n == T::zero() {
            return Err(Error::NonSmoothPoint);
        }
        let c = self.scale;
        let tol = T::lit(NONSMOOTH_TOL);
        match &self.kind {
            GaugeKind::Euclidean => Ok(xi.iter().map(|&x| c * x / n).collect()),
            GaugeKind::Ellipsoidal { matrix } => {
                let h = self.raw(xi);
                Ok(mat_vec(matrix, xi).into_iter().map(|m| c * m / h).collect())
            }
            GaugeKind::PNorm { p } => {
                let p = *p;
                if p == T::one() {
                    if xi.iter().any(|&x| x.abs() <= tol * n) {
                        return Err(Error::NonSmoothPoint);
                    }
                    Ok(xi.iter().map(|&x| c * x.signum()).collect())
                } else if p.is_infinite() {
                    let (k, m) = argmax_abs(xi);
                    if xi.iter().enumerate().any(|(i, &x)| i != k && (m - x.abs()) <= tol * n) {
                        return Err(Error::NonSmoothPoint);
                    }
                    let mut g = vec![T::zero(); xi.len()];
                    g[k] = c * xi[k].signum();
                    Ok(g)
                } else {
                    let h = pnorm_eval(p, xi);
                    Ok(xi
                        .iter()
                        .map(|&x| c * x.signum() * (x.abs() / h).powf(p - T::one()))
                        .collect())
                }
            }
            GaugeKind::Polygonal {
                vertices,
                facet_gradients,
            } => {
                if vertices.iter().any(|v| on_ray(xi, v, tol)) {
                    return Err(Error::NonSmoothPoint);
                }
                let k = active_facet(facet_gradients, xi);
                let g = facet_gradients[k];
                Ok(vec![c * g[0], c * g[1]])
            }
        }
    }

    /// Extreme points of the subdifferential `∂H(ξ)` (a single point where `H` is smooth).
    pub fn subdifferential(&self, xi: &[T]) -> Vec<Vec<T>> {
        if let Ok(g) = self.gradient(xi) {
            return vec![g];
        }
        let c = self.scale;
        let tol = T::lit(NONSMOOTH_TOL);
        let n = norm(xi);
        match &self.kind {
            GaugeKind::Polygonal {
                vertices,
                facet_gradients,
            } => {
                let m = vertices.len();
                if let Some(j) = vertices.iter().position(|v| on_ray(xi, v, tol)) {
                    let a = facet_gradients[(j + m - 1) % m];
                    let b = facet_gradients[j];
                    return vec![vec![c * a[0], c * a[1]], vec![c * b[0], c * b[1]]];
                }
                Vec::new()
            }
            GaugeKind::PNorm { p } if xi.len() == 2 && n > T::zero() => {
                let s = |x: T| if x >= T::zero() { T::one() } else { -T::one() };
                if *p == T::one() {
                    if xi[0].abs() <= tol * n {
                        let sy = s(xi[1]);
                        vec![vec![-c, c * sy], vec![c, c * sy]]
                    } else {
                        let sx = s(xi[0]);
                        vec![vec![c * sx, -c], vec![c * sx, c]]
                    }
                } else {
                    vec![vec![c * s(xi[0]), T::zero()], vec![T::zero(), c * s(xi[1])]]
                }
            }
            _ => Vec::new(),
        }
    }

    /// Whether `H` is differentiable at `ξ`.
    pub fn is_smooth_at(&self, xi: &[T]) -> bool {
        self.gradient(xi).is_ok()
    }

    /// The support function `H0(x) = sup_{ξ ∈ K} ⟨x, ξ⟩`, itself a gauge (of `K0`).
    pub fn polar(&self) -> Self {
        let scale = T::one() / self.scale;
        let kind = match &self.kind {
            GaugeKind::Euclidean => GaugeKind::Euclidean,
            GaugeKind::Ellipsoidal { matrix } => GaugeKind::Ellipsoidal {
                matrix: spd_inverse(matrix, self.dim),
            },
            GaugeKind::PNorm { p } => GaugeKind::PNorm {
                p: conjugate_exponent(*p),
            },
            GaugeKind::Polygonal { facet_gradients, .. } => {
                let (vertices, facet_gradients) =
                    polygon_parts(facet_gradients).expect("polar of a valid polygon is valid");
                GaugeKind::Polygonal {
                    vertices,
                    facet_gradients,
                }
            }
        };
        Self {
            kind,
            dim: self.dim,
            scale,
        }
    }

    /// `|K|` from closed forms (quadrature of the unit-ball area for `p`-norms).
    pub fn body_measure(&self) -> T {
        let cn = self.scale.powi(self.dim as i32);
        let raw = match &self.kind {
            GaugeKind::Euclidean => unit_ball_measure::<T>(self.dim),
            GaugeKind::Ellipsoidal { matrix } => {
                let chol = cholesky(matrix, self.dim).expect("validated at construction");
                unit_ball_measure::<T>(self.dim) / cholesky_det(&chol, self.dim).sqrt()
            }
            GaugeKind::PNorm { p } => pnorm_unit_area(*p).expect("validated at construction"),
            GaugeKind::Polygonal { vertices, .. } => shoelace(vertices),
        };
        raw / cn
    }

    /// `κ_n = |K0|`.
    pub fn kappa(&self) -> T {
        self.polar().body_measure()
    }

    /// Constants `α <= β` with `α|ξ| <= H(ξ) <= β|ξ|`, both attained.
    pub fn bounds(&self) -> (T, T) {
        let c = self.scale;
        match &self.kind {
            GaugeKind::Euclidean => (c, c),
            GaugeKind::Ellipsoidal { matrix } => {
                let eig = symmetric_eigenvalues(matrix, self.dim);
                let lo = eig.iter().copied().fold(T::infinity(), T::min);
                let hi = eig.iter().copied().fold(T::neg_infinity(), T::max);
                (c * lo.sqrt(), c * hi.sqrt())
            }
            GaugeKind::PNorm { p } => {
                let n = T::of_usize(self.dim);
                let inv = if p.is_infinite() { T::zero() } else { T::one() / *p };
                let diag = n.powf(inv - T::lit(0.5));
                if diag < T::one() {
                    (c * diag, c)
                } else {
                    (c, c * diag)
                }
            }
            GaugeKind::Polygonal {
                vertices,
                facet_gradients,
            } => {
                let rmax = vertices.iter().map(|v| norm(v)).fold(T::zero(), T::max);
                let gmax = facet_gradients.iter().map(|g| norm(g)).fold(T::zero(), T::max);
                (c / rmax, c * gmax)
            }
        }
    }

    /// The point of `∂K0` in direction `θ`, scaled by `r` (a vertex of a Wulff-shape polygon).
    pub fn wulff_point(&self, theta: T, r: T) -> [T; 2] {
        let (s, co) = theta.sin_cos();
        let h0 = self.polar().eval2(co, s);
        [r * co / h0, r * s / h0]
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidGauge(format!("dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

fn conjugate_exponent<T: Scalar>(p: T) -> T {
    if p == T::one() {
        T::infinity()
    } else if p.is_infinite() {
        T::one()
    } else {
        p / (p - T::one())
    }
}

fn on_ray<T: Scalar>(xi: &[T], v: &[T; 2], tol: T) -> bool {
    let cross = xi[0] * v[1] - xi[1] * v[0];
    let dot = xi[0] * v[0] + xi[1] * v[1];
    dot > T::zero() && cross.abs() <= tol * norm(xi) * norm(v)
}

fn active_facet<T: Scalar>(grads: &[[T; 2]], xi: &[T]) -> usize {
    let mut best = 0;
    let mut val = T::neg_infinity();
    for (i, g) in grads.iter().enumerate() {
        let d = g[0] * xi[0] + g[1] * xi[1];
        if d > val {
            val = d;
            best = i;
        }
    }
    best
}

fn argmax_abs<T: Scalar>(xi: &[T]) -> (usize, T) {
    let mut k = 0;
    let mut m = T::neg_infinity();
    for (i, &x) in xi.iter().enumerate() {
        if x.abs() > m {
            m = x.abs();
            k = i;
        }
    }
    (k, m)
}

pub(crate) fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn pnorm_eval<T: Scalar>(p: T, xi: &[T]) -> T {
    let (_, m) = argmax_abs(xi);
    if m == T::zero() || p.is_infinite() {
        return m.max(T::zero());
    }
    if p == T::one() {
        return xi.iter().map(|x| x.abs()).sum();
    }
    m * xi.iter().map(|&x| (x.abs() / m).powf(p)).sum::<T>().powf(T::one() / p)
}

/// Area of the planar unit `p`-ball.
fn pnorm_unit_area<T: Scalar>(p: T) -> Result<T> {
    if p == T::one() {
        return Ok(T::lit(2.0));
    }
    if p.is_infinite() {
        return Ok(T::lit(4.0));
    }
    // |K| = ½ ∮ H(cos θ, sin θ)^-2 dθ, four symmetric quadrants, kink-free inside each octant
    let tol = T::epsilon() * T::lit(64.0);
    let mut f = |t: T| {
        let (s, c) = t.sin_cos();
        let h = pnorm_eval(p, &[c, s]);
        T::one() / (h * h)
    };
    let q = T::FRAC_PI_4();
    let a = adaptive_simpson(&mut f, T::zero(), q, tol, MAX_DEPTH)?
        + adaptive_simpson(&mut f, q, T::FRAC_PI_2(), tol, MAX_DEPTH)?;
    Ok(T::lit(2.0) * a)
}

pub(crate) fn shoelace<T: Scalar>(v: &[[T; 2]]) -> T {
    let m = v.len();
    let mut s = T::zero();
    for i in 0..m {
        let a = v[i];
        let b = v[(i + 1) % m];
        s = s + a[0] * b[1] - a[1] * b[0];
    }
    s / T::lit(2.0)
}

/// Counterclockwise vertices and facet gradients.
type PolygonParts<T> = (Vec<[T; 2]>, Vec<[T; 2]>);

/// Validates a centrally symmetric convex polygon and returns its counterclockwise vertices
/// with facet gradients.
fn polygon_parts<T: Scalar>(input: &[[T; 2]]) -> Result<PolygonParts<T>> {
    let m = input.len();
    if m < 4 {
        return Err(Error::InvalidGauge(
            "a centrally symmetric polygon needs at least 4 vertices".into(),
        ));
    }
    let mut v = input.to_vec();
    if v.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidGauge("non-finite polygon vertex".into()));
    }
    let area = shoelace(&v);
    if area == T::zero() {
        return Err(Error::InvalidGauge("polygon has zero area".into()));
    }
    if area < T::zero() {
        v.reverse();
    }
    let size = v.iter().map(|p| norm(p)).fold(T::zero(), T::max);
    let tol = T::lit(1e-9) * size;
    for i in 0..m {
        let a = v[i];
        let b = v[(i + 1) % m];
        let c = v[(i + 2) % m];
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        if norm(&e1) <= tol {
            return Err(Error::InvalidGauge("repeated polygon vertex".into()));
        }
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        if cross <= tol * norm(&e1).max(norm(&e2)) {
            return Err(Error::InvalidGauge("polygon is not strictly convex at a vertex".into()));
        }
        if !v
            .iter()
            .any(|w| (w[0] + a[0]).abs() <= tol && (w[1] + a[1]).abs() <= tol)
        {
            return Err(Error::InvalidGauge(
                "polygon is not centrally symmetric about the origin".into(),
            ));
        }
    }
    let mut grads = Vec::with_capacity(m);
    for i in 0..m {
        let a = v[i];
        let b = v[(i + 1) % m];
        let normal = [b[1] - a[1], a[0] - b[0]];
        let offset = normal[0] * a[0] + normal[1] * a[1];
        if offset <= T::zero() {
            return Err(Error::InvalidGauge("origin is not interior to the polygon".into()));
        }
        grads.push([normal[0] / offset, normal[1] / offset]);
    }
    Ok((v, grads))
}

fn quad_form<T: Scalar>(m: &[T], x: &[T]) -> T {
    let n = x.len();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            s = s + x[i] * m[i * n + j] * x[j];
        }
    }
    s
}

fn mat_vec<T: Scalar>(m: &[T], x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum()).collect()
}

fn cholesky<T: Scalar>(m: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_det<T: Scalar>(l: &[T], n: usize) -> T {
    let d = (0..n).map(|i| l[i * n + i]).fold(T::one(), |a, b| a * b);
    d * d
}

fn spd_inverse<T: Scalar>(m: &[T], n: usize) -> Vec<T> {
    let l = cholesky(m, n).expect("validated at construction");
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        // solve L y = e_col, then Lᵀ x = y
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in 0..n {
            inv[i * n + col] = x[i];
        }
    }
    // symmetrize roundoff
    for i in 0..n {
        for j in 0..i {
            let a = (inv[i * n + j] + inv[j * n + i]) / T::lit(2.0);
            inv[i * n + j] = a;
            inv[j * n + i] = a;
        }
    }
    inv
}

/// Cyclic Jacobi eigenvalues of a small symmetric matrix.
fn symmetric_eigenvalues<T: Scalar>(m: &[T], n: usize) -> Vec<T> {
    let mut a = m.to_vec();
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// `|K|` of a planar gauge by polar-angle quadrature, `½ ∮ H(θ)^-2 dθ`, independent of the
/// closed forms used by [`Gauge::body_measure`].
pub fn body_measure_quadrature<T: Scalar>(g: &Gauge<T>, tol: T) -> Result<T> {
    if g.dim() != 2 {
        return Err(Error::InvalidGauge("polar-angle quadrature is planar only".into()));
    }
    let mut cuts: Vec<T> = (0..=8).map(|k| T::of_usize(k) * T::FRAC_PI_4()).collect();
    if let GaugeKind::Polygonal { vertices, .. } = g.kind() {
        for v in vertices {
            let mut a = v[1].atan2(v[0]);
            if a < T::zero() {
                a = a + T::lit(2.0) * T::PI();
            }
            cuts.push(a);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon());
    let mut f = |t: T| {
        let (s, c) = t.sin_cos();
        let h = g.eval2(c, s);
        T::one() / (h * h)
    };
    let mut total = T::zero();
    let share = tol / T::of_usize(cuts.len());
    for w in cuts.windows(2) {
        total = total + adaptive_simpson(&mut f, w[0], w[1], share, MAX_DEPTH)?;
    }
    Ok(total / T::lit(2.0))
}

/// `sup_{ξ ∈ ∂K} ⟨x, ξ⟩` over `samples` equally spaced boundary points of a planar `K`.
///
/// Accuracy knob for the support function when no closed form is trusted; the relative
/// error decays like `samples^-2` for smooth bodies.
pub fn sampled_support<T: Scalar>(g: &Gauge<T>, x: &[T], samples: usize) -> T {
    let mut best = T::neg_infinity();
    let mut visit = |p: [T; 2]| {
        let d = p[0] * x[0] + p[1] * x[1];
        if d > best {
            best = d;
        }
    };
    for k in 0..samples {
        let t = T::lit(2.0) * T::PI() * T::of_usize(k) / T::of_usize(samples);
        let (s, c) = t.sin_cos();
        let h = g.eval2(c, s);
        visit([c / h, s / h]);
    }
    if let GaugeKind::Polygonal { vertices, .. } = g.kind() {
        let c = g.scale();
        for v in vertices {
            visit([v[0] / c, v[1] / c]);
        }
    }
    best
}

/// Maximal residuals of the Euler/duality identities over random sample points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DualityReport {
    pub samples: usize,
    /// `max |H(∇H0(x)) - 1|`
    pub h_of_grad_polar: f64,
    /// `max |H0(∇H(x)) - 1|`
    pub polar_of_grad_h: f64,
    /// `max dist(x / H0(x), ∂H(∇H0(x)))`; the plain `‖∇H(∇H0(x)) - x/H0(x)‖` where `H` is smooth.
    pub grad_h_of_grad_polar: f64,
}

impl DualityReport {
    pub fn max_residual(&self) -> f64 {
        self.h_of_grad_polar
            .max(self.polar_of_grad_h)
            .max(self.grad_h_of_grad_polar)
    }
}

/// Checks `H(∇H0) = 1`, `H0(∇H) = 1` and `∇H(∇H0(x)) = x / H0(x)` at random points avoiding
/// the non-smooth rays of `H` and `H0`.
pub fn check_duality<T: Scalar>(g: &Gauge<T>, samples: usize, seed: u64) -> DualityReport {
    let polar = g.polar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.dim();
    let mut report = DualityReport {
        samples: 0,
        h_of_grad_polar: 0.0,
        polar_of_grad_h: 0.0,
        grad_h_of_grad_polar: 0.0,
    };
    let mut attempts = 0;
    while report.samples < samples && attempts < samples.max(1) * 100 {
        attempts += 1;
        let x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        if norm(&x) < T::lit(0.05) {
            continue;
        }
        let (Ok(gp), Ok(gh)) = (polar.gradient(&x), g.gradient(&x)) else {
            continue;
        };
        report.samples += 1;
        let r1 = (g.evaluate(&gp) - T::one()).abs().f64();
        let r2 = (polar.evaluate(&gh) - T::one()).abs().f64();
        let h0 = polar.evaluate(&x);
        let target: Vec<T> = x.iter().map(|&v| v / h0).collect();
        let hull = g.subdifferential(&gp);
        let r3 = distance_to_hull(&target, &hull).f64();
        report.h_of_grad_polar = report.h_of_grad_polar.max(r1);
        report.polar_of_grad_h = report.polar_of_grad_h.max(r2);
        report.grad_h_of_grad_polar = report.grad_h_of_grad_polar.max(r3);
    }
    report
}

/// Distance from `p` to the convex hull of one or two points.
fn distance_to_hull<T: Scalar>(p: &[T], hull: &[Vec<T>]) -> T {
    match hull {
        [] => T::infinity(),
        [a] => {
            let d: Vec<T> = p.iter().zip(a).map(|(x, y)| *x - *y).collect();
            norm(&d)
        }
        [a, b, ..] => {
            let ab: Vec<T> = b.iter().zip(a).map(|(x, y)| *x - *y).collect();
            let ap: Vec<T> = p.iter().zip(a).map(|(x, y)| *x - *y).collect();
            let den: T = ab.iter().map(|v| *v * *v).sum();
            let t = if den > T::zero() {
                (ab.iter().zip(&ap).map(|(u, v)| *u * *v).sum::<T>() / den)
                    .max(T::zero())
                    .min(T::one())
            } else {
                T::zero()
            };
            let d: Vec<T> = ap.iter().zip(&ab).map(|(u, v)| *u - t * *v).collect();
            norm(&d)
        }
    }
}
