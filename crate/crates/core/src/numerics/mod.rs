//! Uniform grids, trapezoid quadrature, linear interpolation and monotone
//! inversion.

mod hermite;
pub mod special;

pub use hermite::gauss_hermite;
pub use special::{bessel_j0, erf, erfc};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform sampling of `[start, end]` with `n` points including both ends.
///
/// Quadrature weights are those of the composite trapezoid rule: `h/2` at
/// the two ends and `h` in the interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    start: f64,
    end: f64,
    n: usize,
}

impl Grid {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("grid needs at least 2 points, got {n}")));
        }
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::Parameter(format!("grid interval [{start}, {end}] is empty")));
        }
        Ok(Grid { start, end, n })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn spacing(&self) -> f64 {
        self.width() / (self.n - 1) as f64
    }

    /// Coordinate of node `i`; the last node is exactly `end`.
    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.end
        } else {
            self.start + self.width() * (i as f64 / (self.n - 1) as f64)
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n {
            0.5 * h
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Trapezoid rule `sum_k w_k v_k`, summed left to right.
    pub fn quad(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        values.iter().enumerate().map(|(i, v)| self.weight(i) * v).sum()
    }

    /// Quadrature of the pointwise product of two sampled arrays.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(b.len(), self.n);
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| self.weight(i) * x * y)
            .sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end
    }

    /// Index `k` of the cell `[x_k, x_{k+1}]` containing `x`, and the
    /// fractional position of `x` inside it. `x` must lie in the grid.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.start) / self.spacing();
        let k = (s.floor().max(0.0) as usize).min(self.n - 2);
        (k, (s - k as f64).clamp(0.0, 1.0))
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Parameter(format!(
                "{what}: grids differ ([{}, {}] x {} vs [{}, {}] x {})",
                self.start, self.end, self.n, other.start, other.end, other.n
            )));
        }
        Ok(())
    }
}

/// Values of a real function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn quad(&self) -> f64 {
        quad(self)
    }

    /// `int f g` over the common grid.
    pub fn dot(&self, other: &SampledFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "inner product")?;
        Ok(self.grid.inner(&self.values, &other.values))
    }

    /// L2 norm under the trapezoid rule.
    pub fn norm(&self) -> f64 {
        self.grid.inner(&self.values, &self.values).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SampledFunction {
        SampledFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !self.grid.contains(x) {
            return None;
        }
        let (k, frac) = self.grid.locate(x);
        Some(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    /// Linear interpolation with the function extended by zero outside its grid.
    pub fn eval_or_zero(&self, x: f64) -> f64 {
        self.eval(x).unwrap_or(0.0)
    }

    /// Position and value of the largest sample.
    pub fn argmax(&self) -> (f64, f64) {
        let (i, v) = self.values.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
        (self.grid.point(i), v)
    }
}

/// Trapezoid quadrature `sum_k w_k f_k`.
pub fn quad(f: &SampledFunction) -> f64 {
    f.grid.quad(&f.values)
}

/// A strictly increasing sampled function, validated once so that repeated
/// inversions stay cheap.
#[derive(Debug, Clone)]
pub struct Monotone<'a> {
    f: &'a SampledFunction,
}

impl<'a> Monotone<'a> {
    pub fn new(f: &'a SampledFunction) -> Result<Self> {
        if let Some(k) = f.values.windows(2).position(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::Precondition(format!(
                "samples not strictly increasing at index {k} ({} -> {})",
                f.values[k],
                f.values[k + 1]
            )));
        }
        Ok(Monotone { f })
    }

    /// The `x` at which the piecewise-linear interpolant of `f` equals `y`.
    ///
    /// Bisection over the sample indices brackets `y` in one cell; inside the
    /// cell the linear interpolant is inverted exactly.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let v = &self.f.values;
        let (lo, hi) = (v[0], v[v.len() - 1]);
        if !(y >= lo && y <= hi) {
            return Err(Error::Range { value: y, lo, hi });
        }
        let (mut a, mut b) = (0usize, v.len() - 1);
        while b - a > 1 {
            let mid = (a + b) / 2;
            if v[mid] <= y {
                a = mid;
            } else {
                b = mid;
            }
        }
        let grid = &self.f.grid;
        let frac = ((y - v[a]) / (v[b] - v[a])).clamp(0.0, 1.0);
        Ok(grid.point(a) + frac * (grid.point(b) - grid.point(a)))
    }
}

/// Solve `f(x) = y` for a strictly increasing sampled `f`.
pub fn invert_monotone(f: &SampledFunction, y: f64) -> Result<f64> {
    Monotone::new(f)?.invert(y)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(2.0, 1.0, 10).is_err());
    }

    #[test]
    fn weights_sum_to_width() {
        for n in [2, 3, 17, 512, 1001] {
            let g = Grid::new(-3.5, 12.25, n).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!(((s - g.width()) / g.width()).abs() < 1e-12);
            assert_eq!(g.point(n - 1), 12.25);
            assert_eq!(g.point(0), -3.5);
        }
    }

    #[test]
    fn quad_examples() {
        let g = Grid::new(0.0, 10.0, 101).unwrap();
        let one = SampledFunction::from_fn(g, |_| 1.0).unwrap();
        assert!((quad(&one) - 10.0).abs() < 1e-12);

        let g = Grid::new(0.0, 1.0, 2).unwrap();
        let lin = SampledFunction::from_fn(g, |t| t).unwrap();
        assert_eq!(quad(&lin), 0.5);

        let g = Grid::new(0.0, PI, 2001).unwrap();
        let s = SampledFunction::from_fn(g, f64::sin).unwrap();
        assert!((quad(&s) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        assert!(SampledFunction::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(SampledFunction::new(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn interpolation_and_zero_extension() {
        let g = Grid::new(0.0, 2.0, 3).unwrap();
        let f = SampledFunction::new(g, vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.5), Some(1.0));
        assert_eq!(f.eval(1.5), Some(1.5));
        assert_eq!(f.eval(2.0), Some(1.0));
        assert_eq!(f.eval(2.1), None);
        assert_eq!(f.eval_or_zero(-0.1), 0.0);
    }

    #[test]
    fn inversion_examples() {
        let g = Grid::new(0.0, 10.0, 11).unwrap();
        let id = SampledFunction::from_fn(g, |x| x).unwrap();
        assert!((invert_monotone(&id, 4.6).unwrap() - 4.6).abs() < 1e-12);

        let g = Grid::new(0.0, 3.0, 3001).unwrap();
        let sq = SampledFunction::from_fn(g, |x| x * x).unwrap();
        assert!((invert_monotone(&sq, 4.0).unwrap() - 2.0).abs() < 1e-6);

        assert!(matches!(invert_monotone(&sq, 9.5), Err(Error::Range { .. })));
        assert!(matches!(invert_monotone(&sq, -0.1), Err(Error::Range { .. })));
    }

    #[test]
    fn inversion_rejects_non_monotone_samples() {
        let g = Grid::new(0.0, 2.0, 3).unwrap();
        let f = SampledFunction::new(g, vec![0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(invert_monotone(&f, 0.5), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn quad_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, n in 2usize..200) {
            let g = Grid::new(-1.0, 2.5, n).unwrap();
            let f = SampledFunction::from_fn(g, |x| (3.0 * x).sin()).unwrap();
            let h = SampledFunction::from_fn(g, |x| x * x - 0.3).unwrap();
            let comb = SampledFunction::new(
                g,
                f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lhs = quad(&comb);
            let rhs = a * quad(&f) + b * quad(&h);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn inversion_recovers_nodes(seed in proptest::collection::vec(0.01..2.0f64, 2..60)) {
            let g = Grid::new(0.0, 1.0, seed.len() + 1).unwrap();
            let mut vals = vec![0.0];
            for d in &seed {
                vals.push(vals.last().unwrap() + d);
            }
            let f = SampledFunction::new(g, vals.clone()).unwrap();
            let m = Monotone::new(&f).unwrap();
            for (i, y) in vals.iter().enumerate() {
                let x = m.invert(*y).unwrap();
                prop_assert!((x - g.point(i)).abs() < 1e-9);
                prop_assert!((f.eval(x).unwrap() - y).abs() < 1e-9);
            }
        }
    }
}
