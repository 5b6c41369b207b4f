//! Sampled profiles on uniform truncated grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Far-field convention outside the truncation box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// u ≡ -1 below the box and u ≡ +1 above it along the monotone axis
    /// (the last axis); constant continuation transversally.
    Layer,
    /// Period equal to `n * h`.
    Periodic,
    /// u ≡ 0 outside the box.
    Zero,
    /// Constant continuation of the end values.
    Flat,
}

impl std::fmt::Display for Tail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tail::Layer => "layer",
            Tail::Periodic => "periodic",
            Tail::Zero => "zero",
            Tail::Flat => "flat",
        };
        f.write_str(s)
    }
}

/// Values on the uniform grid x_i = -X + i h, h = 2X/(n-1), per axis.
/// Two-dimensional data is row-major with the first axis fastest:
/// `values[i2 * n + i1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    dim: usize,
    half_width: f64,
    n: usize,
    values: Vec<f64>,
    tail: Tail,
}

impl GridFunction {
    pub fn new(dim: usize, half_width: f64, n: usize, values: Vec<f64>, tail: Tail) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dimension {dim} not supported")));
        }
        if !(half_width > 0.0) || n < 3 {
            return Err(Error::Grid(format!("need X > 0 and n >= 3 (X={half_width}, n={n})")));
        }
        if values.len() != n.pow(dim as u32) {
            return Err(Error::Grid(format!("expected {} values, got {}", n.pow(dim as u32), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite value".into()));
        }
        Ok(Self { dim, half_width, n, values, tail })
    }

    /// Samples `f` on a 1-D grid.
    pub fn from_fn_1d(half_width: f64, n: usize, tail: Tail, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 2.0 * half_width / (n as f64 - 1.0);
        let values = (0..n).map(|i| f(-half_width + i as f64 * h)).collect();
        Self::new(1, half_width, n, values, tail)
    }

    /// Samples `f(x1, x2)` on a 2-D grid.
    pub fn from_fn_2d(half_width: f64, n: usize, tail: Tail, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = 2.0 * half_width / (n as f64 - 1.0);
        let mut values = Vec::with_capacity(n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                values.push(f(-half_width + i1 as f64 * h, -half_width + i2 as f64 * h));
            }
        }
        Self::new(2, half_width, n, values, tail)
    }

    /// Periodic 1-D grid of `n` points covering one period, centered at 0;
    /// the spacing is `period / n`.
    pub fn periodic(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let half_width = 0.5 * period * (n as f64 - 1.0) / n as f64;
        Self::from_fn_1d(half_width, n, Tail::Periodic, f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n as f64 - 1.0)
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, ..self.clone() }
    }

    /// Period length for periodic grids.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.h()
    }

    /// (left, right) far-field values of a 1-D grid function.
    pub fn tail_values(&self) -> (f64, f64) {
        match self.tail {
            Tail::Layer => (-1.0, 1.0),
            Tail::Zero => (0.0, 0.0),
            Tail::Flat | Tail::Periodic => (self.values[0], self.values[self.n - 1]),
        }
    }

    /// 1-D value at a possibly out-of-range index, using the tail.
    pub fn at(&self, i: isize) -> f64 {
        let n = self.n as isize;
        if self.tail == Tail::Periodic {
            return self.values[i.rem_euclid(n) as usize];
        }
        if i < 0 {
            self.tail_values().0
        } else if i >= n {
            self.tail_values().1
        } else {
            self.values[i as usize]
        }
    }

    /// Linear interpolation in 1-D with tail continuation.
    pub fn interp(&self, x: f64) -> f64 {
        let t = (x + self.half_width) / self.h();
        if self.tail == Tail::Periodic {
            let n = self.n as f64;
            let t = t.rem_euclid(n);
            let i = t.floor();
            let f = t - i;
            let i = i as isize;
            return (1.0 - f) * self.at(i) + f * self.at(i + 1);
        }
        if t < 0.0 {
            return self.tail_values().0;
        }
        if t > (self.n - 1) as f64 {
            return self.tail_values().1;
        }
        let i = (t.floor() as usize).min(self.n - 2);
        let f = t - i as f64;
        (1.0 - f) * self.values[i] + f * self.values[i + 1]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && (self.half_width - other.half_width).abs() < 1e-12
    }
}

/// Tabulated 1-D profile with constant far-field values, used as boundary
/// data for tilted 2-D problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1d {
    grid: GridFunction,
}

impl Profile1d {
    pub fn new(grid: GridFunction) -> Result<Self> {
        if grid.dim() != 1 || grid.tail() == Tail::Periodic {
            return Err(Error::Grid("profile must be a non-periodic 1-D grid function".into()));
        }
        Ok(Self { grid })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.grid.interp(t)
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    pub fn far_values(&self) -> (f64, f64) {
        self.grid.tail_values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_coords() {
        let g = GridFunction::from_fn_1d(2.0, 5, Tail::Zero, |x| x).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.coords(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(g.at(-1), 0.0);
    }

    #[test]
    fn periodic_grid_covers_one_period() {
        let g = GridFunction::periodic(8.0, 8, |x| x).unwrap();
        assert!((g.h() - 1.0).abs() < 1e-14);
        assert!((g.period() - 8.0).abs() < 1e-14);
        assert_eq!(g.at(8), g.values()[0]);
        assert_eq!(g.at(-1), g.values()[7]);
    }

    #[test]
    fn layer_tails_and_interp() {
        let g = GridFunction::from_fn_1d(1.0, 3, Tail::Layer, |x| 0.5 * x).unwrap();
        assert_eq!(g.tail_values(), (-1.0, 1.0));
        assert_eq!(g.interp(0.5), 0.25);
        assert_eq!(g.interp(5.0), 1.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::new(1, 1.0, 4, vec![0.0; 3], Tail::Zero).is_err());
        assert!(GridFunction::new(3, 1.0, 4, vec![0.0; 64], Tail::Zero).is_err());
        assert!(GridFunction::new(1, 1.0, 3, vec![0.0, f64::NAN, 0.0], Tail::Zero).is_err());
    }
}
