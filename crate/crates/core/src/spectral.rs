//! Schmidt decomposition of sampled symmetric kernels.
//!
//! The integral eigenproblem `int G(t, t') phi(t') dt' = s phi(t)` is
//! discretized with the trapezoid weights `D`. Solving the symmetric matrix
//! problem for `A = D^{1/2} G D^{1/2}` and mapping eigenvectors back with
//! `phi = D^{-1/2} v` yields eigenfunctions that are orthonormal under the
//! quadrature inner product, i.e. under `int dt` of the continuum problem.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::SampledKernel;
use crate::numerics::{Grid, SampledFunction};

/// Eigenvalue residual tolerance, relative to the leading singular value.
const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Leading singular values `s_i = sqrt(lambda_i)` and their eigenfunctions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSet {
    grid: Grid,
    singular_values: Vec<f64>,
    functions: Vec<Vec<f64>>,
}

impl ModeSet {
    /// Assembles a mode set from parts; the caller guarantees ordering and
    /// orthonormality.
    pub fn from_parts(grid: Grid, singular_values: Vec<f64>, functions: Vec<Vec<f64>>) -> Result<Self> {
        if singular_values.len() != functions.len() {
            return Err(Error::Parameter("one function per singular value required".into()));
        }
        if functions.iter().any(|f| f.len() != grid.len()) {
            return Err(Error::Parameter("mode function does not match its grid".into()));
        }
        Ok(ModeSet {
            grid,
            singular_values,
            functions,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn singular_value(&self, i: usize) -> f64 {
        self.singular_values[i]
    }

    /// `lambda_i = s_i^2`, the efficiency of the cycle for input mode `i`.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.singular_values[i].powi(2)
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.functions[i]
    }

    pub fn function(&self, i: usize) -> SampledFunction {
        SampledFunction::new(self.grid, self.functions[i].clone()).expect("finite mode values")
    }

    /// Keeps the first `m` modes.
    pub fn truncated(&self, m: usize) -> ModeSet {
        let m = m.min(self.len());
        ModeSet {
            grid: self.grid,
            singular_values: self.singular_values[..m].to_vec(),
            functions: self.functions[..m].to_vec(),
        }
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g = self.grid.inner(&self.functions[i], &self.functions[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Makes the sign of a sampled eigenfunction deterministic: non-negative
/// integral, or a positive first significant sample when the integral
/// vanishes. Returns whether the function was flipped.
pub(crate) fn fix_sign(grid: &Grid, f: &mut [f64]) -> bool {
    let integral = grid.quad(f);
    let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let flip = if integral.abs() > 1e-10 * scale * grid.width() {
        integral < 0.0
    } else {
        f.iter().find(|v| v.abs() > 1e-10 * scale).is_some_and(|v| *v < 0.0)
    };
    if flip {
        f.iter_mut().for_each(|v| *v = -*v);
    }
    flip
}

/// The `m` largest eigenvalues `s_i` of a symmetric kernel and their
/// quadrature-orthonormal eigenfunctions, sorted in descending order.
///
/// Negative eigenvalues, from rounding noise or an indefinite kernel, are
/// reported as zero.
pub fn schmidt_decompose(kernel: &SampledKernel, m: usize) -> Result<ModeSet> {
    if !kernel.is_symmetric() {
        return Err(Error::Parameter(
            "Schmidt decomposition needs a symmetric kernel".into(),
        ));
    }
    let grid = *kernel.row_grid();
    let n = grid.len();
    if m > n {
        return Err(Error::Parameter(format!("requested {m} modes from a {n}-point kernel")));
    }
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let g = kernel.values();
    let a = DMatrix::from_fn(n, n, |i, j| {
        // symmetrize exactly so the solver sees a symmetric matrix
        0.5 * (g[(i, j)] + g[(j, i)]) * sqrt_w[i] * sqrt_w[j]
    });
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));

    let mut raw = Vec::with_capacity(m);
    let mut functions = Vec::with_capacity(m);
    for &idx in order.iter().take(m) {
        let s = eig.eigenvalues[idx];
        if !s.is_finite() {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        let mut phi: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] / sqrt_w[i]).collect();
        fix_sign(&grid, &mut phi);
        raw.push(s);
        functions.push(phi);
    }
    check_residuals(kernel, &grid, &raw, &functions)?;
    let singular_values = raw.into_iter().map(|s| s.max(0.0)).collect();
    Ok(ModeSet {
        grid,
        singular_values,
        functions,
    })
}

/// `|| int G phi_i dt' - s_i phi_i ||_inf <= 1e-6 s_1` for every mode.
fn check_residuals(kernel: &SampledKernel, grid: &Grid, values: &[f64], functions: &[Vec<f64>]) -> Result<()> {
    let Some(&s1) = values.first() else {
        return Ok(());
    };
    let scale = values.iter().fold(s1.abs(), |m, v| m.max(v.abs()));
    let g = kernel.values();
    for (i, phi) in functions.iter().enumerate() {
        let s = values[i];
        let weighted: Vec<f64> = phi.iter().enumerate().map(|(k, v)| grid.weight(k) * v).collect();
        let mut worst = 0.0_f64;
        for r in 0..grid.len() {
            let applied: f64 = (0..grid.len()).map(|c| g[(r, c)] * weighted[c]).sum();
            worst = worst.max((applied - s * phi[r]).abs());
        }
        if worst > RESIDUAL_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "eigenpair {} has residual {worst:e} (s_1 = {s1})",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Singular triplets of a rectangular kernel: `int G(t, t') v_i(t') dt' = s_i u_i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularModes {
    /// `u_i` on the row grid.
    pub left: ModeSet,
    /// `v_i` on the column grid.
    pub right: ModeSet,
}

/// The `m` largest singular values of a sampled kernel with quadrature
/// orthonormal left and right functions.
///
/// Works for any kernel, including cycle kernels whose write and read windows
/// differ. Signs follow the left functions; the right ones are flipped along.
pub fn singular_decompose(kernel: &SampledKernel, m: usize) -> Result<SingularModes> {
    let rows = *kernel.row_grid();
    let cols = *kernel.col_grid();
    let rank = rows.len().min(cols.len());
    if m > rank {
        return Err(Error::Parameter(format!(
            "requested {m} singular modes from a rank-{rank} kernel"
        )));
    }
    let wr: Vec<f64> = rows.weights().iter().map(|w| w.sqrt()).collect();
    let wc: Vec<f64> = cols.weights().iter().map(|w| w.sqrt()).collect();
    let g = kernel.values();
    let a = DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(i, j)] * wr[i] * wc[j]);
    let svd = a
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(Error::Numerical("singular vectors missing".into()));
    };

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .total_cmp(&svd.singular_values[x])
            .then(x.cmp(&y))
    });

    let mut values = Vec::with_capacity(m);
    let mut left = Vec::with_capacity(m);
    let mut right = Vec::with_capacity(m);
    for &idx in order.iter().take(m) {
        let s = svd.singular_values[idx];
        if !s.is_finite() {
            return Err(Error::Numerical("non-finite singular value".into()));
        }
        let mut l: Vec<f64> = (0..rows.len()).map(|i| u[(i, idx)] / wr[i]).collect();
        let mut r: Vec<f64> = (0..cols.len()).map(|j| v_t[(idx, j)] / wc[j]).collect();
        if fix_sign(&rows, &mut l) {
            r.iter_mut().for_each(|x| *x = -*x);
        }
        values.push(s);
        left.push(l);
        right.push(r);
    }
    Ok(SingularModes {
        left: ModeSet {
            grid: rows,
            singular_values: values.clone(),
            functions: left,
        },
        right: ModeSet {
            grid: cols,
            singular_values: values,
            functions: right,
        },
    })
}

/// `sum_i s_i phi_i(t) phi_i(t')` over the retained modes.
pub fn reconstruct_kernel(modes: &ModeSet) -> SampledKernel {
    let n = modes.grid.len();
    let mut values = DMatrix::<f64>::zeros(n, n);
    for (s, phi) in modes.singular_values.iter().zip(&modes.functions) {
        let col = nalgebra::DVector::from_column_slice(phi);
        values.ger(*s, &col, &col, 1.0);
    }
    let mut k = SampledKernel::new(modes.grid, modes.grid, values).expect("finite reconstruction");
    if k.asymmetry().is_some_and(|a| a <= 1e-9) {
        k = SampledKernel::new_symmetric(modes.grid, k.values().clone()).expect("checked");
    }
    k
}

/// Relative Frobenius distance between a reconstruction and the original kernel.
pub fn reconstruction_residual(modes: &ModeSet, original: &SampledKernel) -> Result<f64> {
    original.row_grid().ensure_same(&modes.grid, "reconstruction")?;
    let rec = reconstruct_kernel(modes);
    let norm = original.values().norm();
    let diff = (rec.values() - original.values()).norm();
    Ok(if norm == 0.0 { diff } else { diff / norm })
}

/// Read-stage modes `sqrt(k) phi_i(k t)` on `[0, T_w / k]` from write-stage
/// modes on `[0, T_w]`.
///
/// The output grid has as many nodes as the input, so node `j` of the output
/// maps exactly onto node `j` of the input and no interpolation is needed.
pub fn scaled_retrieval_modes(modes: &ModeSet, k: f64) -> Result<ModeSet> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Parameter(format!("duration ratio must be positive, got {k}")));
    }
    if k == 1.0 {
        return Ok(modes.clone());
    }
    let g = modes.grid;
    let grid = Grid::new(g.start() / k, g.end() / k, g.len())?;
    let root = k.sqrt();
    let functions = modes
        .functions
        .iter()
        .map(|f| f.iter().map(|v| root * v).collect())
        .collect();
    Ok(ModeSet {
        grid,
        singular_values: modes.singular_values.clone(),
        functions,
    })
}

/// Expansion coefficients `c_i = int f phi_i`.
pub fn project(f: &SampledFunction, modes: &ModeSet) -> Result<Vec<f64>> {
    f.grid().ensure_same(&modes.grid, "projection")?;
    Ok(modes
        .functions
        .iter()
        .map(|phi| modes.grid.inner(f.values(), phi))
        .collect())
}
