//! Sampled write, read and full-cycle kernels of the memory.
//!
//! The write kernel maps the input signal amplitude onto the spin coherence
//! left in the medium at the end of writing,
//!
//! ```text
//! G_ab(z, t) = 1/sqrt(2) * int_0^t g(z, t') g*(z, t - t') dt',   g(z, t) = e^{-it} J0(sqrt(z t)),
//! ```
//!
//! and in the high-speed regime the read kernel of backward retrieval is the
//! same function on the read window. The full-cycle kernel is their spatial
//! overlap `G(t, t') = int_0^L G_ab(z, t) G_ba(z, t') dz`.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::special::j0_of_sqrt;
use crate::numerics::Grid;

pub const DEFAULT_LENGTH: f64 = 10.0;
pub const DEFAULT_DURATION: f64 = 5.5;
pub const DEFAULT_RESOLUTION: usize = 512;

/// Tolerated imaginary part of the inner convolution, relative to `1 + |Re|`.
const IMAG_TOLERANCE: f64 = 1e-9;
/// Relative asymmetry below which a square kernel is flagged symmetric.
const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Geometry, stage durations and sampling resolution of one memory cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleParams {
    /// Cell length in effective-optical-depth units.
    pub length: f64,
    pub write_duration: f64,
    pub read_duration: f64,
    pub n_z: usize,
    pub n_t: usize,
    /// Nodes of the trapezoid rule for the inner convolution integral.
    pub inner_n: usize,
}

impl Default for CycleParams {
    fn default() -> Self {
        CycleParams {
            length: DEFAULT_LENGTH,
            write_duration: DEFAULT_DURATION,
            read_duration: DEFAULT_DURATION,
            n_z: DEFAULT_RESOLUTION,
            n_t: DEFAULT_RESOLUTION,
            inner_n: DEFAULT_RESOLUTION,
        }
    }
}

impl CycleParams {
    pub fn new(length: f64, write_duration: f64, read_duration: f64) -> Result<Self> {
        let p = CycleParams {
            length,
            write_duration,
            read_duration,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    /// Equal write and read durations.
    pub fn symmetric(length: f64, duration: f64) -> Result<Self> {
        Self::new(length, duration, duration)
    }

    /// Sets the space and time resolution; the inner rule follows the time grid.
    pub fn with_resolution(mut self, n_z: usize, n_t: usize) -> Result<Self> {
        self.n_z = n_z;
        self.n_t = n_t;
        self.inner_n = n_t;
        self.validate()?;
        Ok(self)
    }

    pub fn with_inner_nodes(mut self, inner_n: usize) -> Result<Self> {
        self.inner_n = inner_n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("write duration", self.write_duration),
            ("read duration", self.read_duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, n) in [("n_z", self.n_z), ("n_t", self.n_t), ("inner_n", self.inner_n)] {
            if n < 2 {
                return Err(Error::Parameter(format!("{name} must be at least 2, got {n}")));
            }
        }
        Ok(())
    }

    /// True when a stage lasts at least as long as the cell is deep, where the
    /// closed-form kernels no longer describe the memory.
    pub fn out_of_model(&self) -> bool {
        self.write_duration >= self.length || self.read_duration >= self.length
    }

    pub fn has_equal_durations(&self) -> bool {
        self.write_duration == self.read_duration
    }

    /// `k = T_w / T_r`.
    pub fn duration_ratio(&self) -> f64 {
        self.write_duration / self.read_duration
    }

    pub fn space_grid(&self) -> Grid {
        Grid::new(0.0, self.length, self.n_z).expect("validated parameters")
    }

    pub fn stage_grid(&self, stage: Stage) -> Grid {
        let t = match stage {
            Stage::Write => self.write_duration,
            Stage::Read => self.read_duration,
        };
        Grid::new(0.0, t, self.n_t).expect("validated parameters")
    }

    fn warn_if_out_of_model(&self) {
        if self.out_of_model() {
            warn!(
                "OUT OF MODEL: stage durations (T_w = {}, T_r = {}) must stay below the cell length L = {}; \
                 results are exploratory only",
                self.write_duration, self.read_duration, self.length
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Write,
    Read,
}

/// Kernel values on a (row grid x column grid) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    row_grid: Grid,
    col_grid: Grid,
    values: DMatrix<f64>,
    symmetric: bool,
}

impl SampledKernel {
    pub fn new(row_grid: Grid, col_grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != row_grid.len() || values.ncols() != col_grid.len() {
            return Err(Error::Parameter(format!(
                "kernel is {}x{} but grids have {}x{} points",
                values.nrows(),
                values.ncols(),
                row_grid.len(),
                col_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("kernel contains non-finite values".into()));
        }
        Ok(SampledKernel {
            row_grid,
            col_grid,
            values,
            symmetric: false,
        })
    }

    /// A square kernel on one grid, flagged symmetric after checking
    /// `max |K - K^T| <= 1e-9 max |K|`.
    pub fn new_symmetric(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        let mut k = Self::new(grid, grid, values)?;
        let asym = k.asymmetry().unwrap_or(f64::INFINITY);
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Parameter(format!("kernel asymmetry {asym:e} exceeds tolerance")));
        }
        k.symmetric = true;
        Ok(k)
    }

    pub fn row_grid(&self) -> &Grid {
        &self.row_grid
    }

    pub fn col_grid(&self) -> &Grid {
        &self.col_grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    /// `max |K - K^T| / max |K|`, or `None` when the grids differ.
    pub fn asymmetry(&self) -> Option<f64> {
        if self.row_grid != self.col_grid {
            return None;
        }
        Some(relative_asymmetry(&self.values))
    }

    /// Column `j` as a function of the row variable.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

pub(crate) fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Trapezoid rule for `int_0^t (...) dt'` with the phase factor
/// `e^{i(t - 2t')}` folded into the weights.
struct InnerRule {
    nodes: Vec<f64>,
    cos_w: Vec<f64>,
    sin_w: Vec<f64>,
}

impl InnerRule {
    fn new(t: f64, n: usize) -> Option<Self> {
        if t <= 0.0 {
            return None;
        }
        let grid = Grid::new(0.0, t, n).ok()?;
        let nodes = grid.points();
        let (cos_w, sin_w) = nodes
            .iter()
            .enumerate()
            .map(|(k, &tp)| {
                let w = grid.weight(k);
                let phase = t - 2.0 * tp;
                (w * phase.cos(), w * phase.sin())
            })
            .unzip();
        Some(InnerRule { nodes, cos_w, sin_w })
    }

    /// Real and imaginary parts of `int g(z,t') g*(z,t-t') dt'` (without the
    /// `1/sqrt 2`); `bessel` is scratch space of length `n`.
    fn evaluate(&self, z: f64, bessel: &mut [f64]) -> (f64, f64) {
        for (b, &tp) in bessel.iter_mut().zip(&self.nodes) {
            *b = j0_of_sqrt(z * tp);
        }
        let n = bessel.len();
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..n {
            let p = bessel[k] * bessel[n - 1 - k];
            re += self.cos_w[k] * p;
            im += self.sin_w[k] * p;
        }
        (re, im)
    }
}

fn check_imaginary(re: f64, im: f64, z: f64, t: f64) -> Result<()> {
    if im.abs() > IMAG_TOLERANCE * (1.0 + re.abs()) {
        return Err(Error::Consistency(format!(
            "write kernel at z = {z}, t = {t} has imaginary residual {im:e}; \
             the inner quadrature is misconfigured"
        )));
    }
    Ok(())
}

/// One sample of the half-cycle kernel `G_ab(z, t)`, with the inner
/// convolution integral resolved by `inner_n` trapezoid nodes.
///
/// The integrand is conjugate-symmetric under `t' -> t - t'`, so the exact
/// value is real; the computed imaginary part is checked against that.
pub fn half_kernel_point(z: f64, t: f64, inner_n: usize) -> Result<f64> {
    if !(z >= 0.0 && t >= 0.0 && z.is_finite() && t.is_finite()) {
        return Err(Error::Parameter(format!("kernel point needs z, t >= 0 (got {z}, {t})")));
    }
    if inner_n < 2 {
        return Err(Error::Parameter(format!(
            "inner rule needs at least 2 nodes, got {inner_n}"
        )));
    }
    let Some(rule) = InnerRule::new(t, inner_n) else {
        return Ok(0.0);
    };
    let mut scratch = vec![0.0; inner_n];
    let (re, im) = rule.evaluate(z, &mut scratch);
    check_imaginary(re, im, z, t)?;
    Ok(re * std::f64::consts::FRAC_1_SQRT_2)
}

/// Samples the write (or read) kernel on `[0, L] x [0, T_stage]`.
///
/// Rows are indexed by position, columns by time. Rows are computed in
/// parallel, each with a fixed summation order, so the matrix does not depend
/// on the number of worker threads.
pub fn build_half_kernel(params: &CycleParams, stage: Stage) -> Result<SampledKernel> {
    params.validate()?;
    params.warn_if_out_of_model();
    let space = params.space_grid();
    let time = params.stage_grid(stage);
    let rules: Vec<Option<InnerRule>> = (0..time.len())
        .map(|j| InnerRule::new(time.point(j), params.inner_n))
        .collect();

    let rows: Vec<Vec<f64>> = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let z = space.point(i);
            let mut scratch = vec![0.0; params.inner_n];
            rules
                .iter()
                .enumerate()
                .map(|(j, rule)| match rule {
                    None => Ok(0.0),
                    Some(rule) => {
                        let (re, im) = rule.evaluate(z, &mut scratch);
                        check_imaginary(re, im, z, time.point(j))?;
                        Ok(re * std::f64::consts::FRAC_1_SQRT_2)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let values = DMatrix::from_fn(space.len(), time.len(), |i, j| rows[i][j]);
    SampledKernel::new(space, time, values)
}

/// `G(t, t') = int_0^L G_ab(z, t) G_ba(z, t') dz` by trapezoid quadrature over
/// the shared space grid. Rows follow the write time, columns the read time.
pub fn build_cycle_kernel(write: &SampledKernel, read: &SampledKernel) -> Result<SampledKernel> {
    write.row_grid.ensure_same(&read.row_grid, "cycle kernel space grids")?;
    let values = spatial_overlap(&write.values, &read.values, &write.row_grid);
    let mut kernel = SampledKernel::new(write.col_grid, read.col_grid, values)?;
    if kernel.asymmetry().is_some_and(|a| a <= SYMMETRY_TOLERANCE) {
        kernel.symmetric = true;
    }
    Ok(kernel)
}

/// `A^T diag(w) B` for matrices whose rows follow `space`.
fn spatial_overlap(a: &DMatrix<f64>, b: &DMatrix<f64>, space: &Grid) -> DMatrix<f64> {
    let mut weighted = b.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= space.weight(i);
    }
    a.transpose() * weighted
}

/// Full-cycle kernel for unequal write and read durations, rescaled so both
/// arguments live on the write window.
#[derive(Debug, Clone)]
pub struct SymmetrizedCycle {
    /// `(K + K^T)/2` of the rescaled kernel `K(u, t') = G(u / k, t')` on `[0, T_w]^2`.
    pub kernel: SampledKernel,
    /// `k = T_w / T_r`.
    pub k: f64,
    /// `max |K - K^T| / max |K|` of the rescaled kernel before symmetrization.
    pub asymmetry: f64,
}

impl SymmetrizedCycle {
    /// Converts an eigenvalue `sqrt(k lambda)` of the rescaled kernel back to
    /// the singular value `sqrt(lambda)` of the cycle.
    pub fn cycle_singular_value(&self, eigenvalue: f64) -> f64 {
        eigenvalue / self.k.sqrt()
    }
}

/// Rescales the read time by `k = T_w / T_r` so that the cycle kernel
/// `G(t, t')`, `t` in `[0, T_r]`, `t'` in `[0, T_w]`, becomes a square kernel on
/// `[0, T_w]^2`.
///
/// The rescaled kernel is exactly symmetric only when its stationary part
/// scales with the window; for these Bessel kernels it does not, so the
/// measured asymmetry is returned and the symmetric part is kept. The spectrum
/// of that symmetric part then only approximates the cycle; use
/// [`crate::spectral::singular_decompose`] on the rectangular cycle kernel
/// for exact singular values.
pub fn symmetrize_asymmetric(params: &CycleParams) -> Result<SymmetrizedCycle> {
    let write = build_half_kernel(params, Stage::Write)?;
    let read = if params.has_equal_durations() {
        write.clone()
    } else {
        build_half_kernel(params, Stage::Read)?
    };
    symmetrize_kernels(&write, &read)
}

/// [`symmetrize_asymmetric`] for half kernels that are already sampled on
/// time grids with the same number of nodes.
pub fn symmetrize_kernels(write: &SampledKernel, read: &SampledKernel) -> Result<SymmetrizedCycle> {
    write.row_grid.ensure_same(&read.row_grid, "cycle kernel space grids")?;
    if write.col_grid.len() != read.col_grid.len() {
        return Err(Error::Parameter(
            "write and read time grids need the same number of nodes".into(),
        ));
    }
    let k = write.col_grid.width() / read.col_grid.width();
    // Read node j sits at T_r j/(n-1), i.e. at u/k for write node u_j.
    let rescaled = spatial_overlap(&read.values, &write.values, &write.row_grid);
    let asymmetry = relative_asymmetry(&rescaled);
    if asymmetry > SYMMETRY_TOLERANCE {
        warn!(
            "rescaled cycle kernel for T_w = {}, T_r = {} is asymmetric by {:.3e} (relative)",
            write.col_grid.width(),
            read.col_grid.width(),
            asymmetry
        );
    }
    let sym = (&rescaled + rescaled.transpose()) * 0.5;
    let kernel = SampledKernel::new_symmetric(write.col_grid, sym)?;
    Ok(SymmetrizedCycle { kernel, k, asymmetry })
}
