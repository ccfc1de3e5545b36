//! Scalar fields sampled at the cell centers of a uniform planar grid, restricted to a mask.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Geometry of a uniform grid: cell `(i, j)` has center
/// `origin + ((i + ½) h, (j + ½) h)`; storage is row-major (`j * nx + i`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub h: T,
    pub origin: [T; 2],
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, h: T, origin: [T; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid("grid must have at least one cell".into()));
        }
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidGrid("cell width must be positive".into()));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// Smallest grid of `n` cells along the longer side covering `[lo, hi]`.
    pub fn covering(lo: [T; 2], hi: [T; 2], n: usize) -> Result<Self> {
        let w = hi[0] - lo[0];
        let ht = hi[1] - lo[1];
        if !(w > T::zero() && ht > T::zero()) {
            return Err(Error::InvalidGrid("empty bounding box".into()));
        }
        let h = w.max(ht) / T::of_usize(n.max(1));
        let cells = |len: T| -> usize {
            let c = (len / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(1);
            c.max(1)
        };
        let nx = cells(w);
        let ny = cells(ht);
        // center the grid on the box
        let ox = lo[0] - (T::of_usize(nx) * h - w) / T::lit(2.0);
        let oy = lo[1] - (T::of_usize(ny) * h - ht) / T::lit(2.0);
        Self::new(nx, ny, h, [ox, oy])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [T; 2] {
        let half = T::lit(0.5);
        [
            self.origin[0] + (T::of_usize(i) + half) * self.h,
            self.origin[1] + (T::of_usize(j) + half) * self.h,
        ]
    }

    /// Measure of `k` cells.
    #[inline]
    pub fn cells_measure(&self, k: usize) -> T {
        T::of_usize(k) * self.h * self.h
    }
}

/// A grid function: values on masked cells, zero (and ignored) elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    pub nx: usize,
    pub ny: usize,
    pub h: T,
    pub origin: [T; 2],
    pub values: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(spec: GridSpec<T>, values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        let g = Self {
            nx: spec.nx,
            ny: spec.ny,
            h: spec.h,
            origin: spec.origin,
            values,
            mask,
        };
        g.validate()?;
        Ok(g)
    }

    /// Samples `value` on the cells whose center satisfies `inside`.
    pub fn from_fn(
        spec: GridSpec<T>,
        mut inside: impl FnMut([T; 2]) -> bool,
        mut value: impl FnMut([T; 2]) -> T,
    ) -> Result<Self> {
        let mut values = vec![T::zero(); spec.len()];
        let mut mask = vec![false; spec.len()];
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let x = spec.center(i, j);
                let k = spec.index(i, j);
                if inside(x) {
                    mask[k] = true;
                    values[k] = value(x);
                }
            }
        }
        Self::new(spec, values, mask)
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.nx, self.ny, self.h, self.origin)?;
        let n = self.nx * self.ny;
        if self.values.len() != n || self.mask.len() != n {
            return Err(Error::InvalidGrid(format!(
                "expected {n} values and mask entries, got {} and {}",
                self.values.len(),
                self.mask.len()
            )));
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(Error::InvalidGrid("mask is empty".into()));
        }
        if self.values.iter().zip(&self.mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value inside the mask".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> GridSpec<T> {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            h: self.h,
            origin: self.origin,
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.spec() == other.spec() && self.mask == other.mask
    }

    /// Same geometry and mask, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.spec(), values, self.mask.clone())
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `|Ω| = h² · #mask`.
    pub fn measure(&self) -> T {
        self.spec().cells_measure(self.cell_count())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let k = j * self.nx + i;
        self.mask[k].then(|| self.values[k])
    }

    /// Masked values in storage order.
    pub fn masked(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, &m))| m)
            .map(|(k, (&v, _))| (k, v))
    }

    pub fn max_abs(&self) -> T {
        self.masked().map(|(_, v)| v.abs()).fold(T::zero(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.masked().map(|(_, v)| v).fold(T::infinity(), T::min)
    }

    /// Discrete gradient at a masked cell: centered differences when both neighbours are in the
    /// mask, one-sided towards the masked neighbour otherwise, zero if neither is.
    pub fn gradient(&self, i: usize, j: usize) -> [T; 2] {
        let h = self.h;
        let two = T::lit(2.0);
        let c = self.values[j * self.nx + i];
        let along = |lo: Option<T>, hi: Option<T>| match (lo, hi) {
            (Some(l), Some(u)) => (u - l) / (two * h),
            (Some(l), None) => (c - l) / h,
            (None, Some(u)) => (u - c) / h,
            (None, None) => T::zero(),
        };
        let w = (i > 0).then(|| self.get(i - 1, j)).flatten();
        let e = (i + 1 < self.nx).then(|| self.get(i + 1, j)).flatten();
        let s = (j > 0).then(|| self.get(i, j - 1)).flatten();
        let n = (j + 1 < self.ny).then(|| self.get(i, j + 1)).flatten();
        [along(w, e), along(s, n)]
    }
}

impl GridFunction<f64> {
    /// Reads the JSON grid format `{nx, ny, h, origin, values, mask}`.
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let g: Self = serde_json::from_str(&text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}
