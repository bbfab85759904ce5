//! Full-cycle quantities: spatial response functions, overlap matrices,
//! retrieved pulse shapes, efficiencies and the re-optimized modes of a
//! cycle with mobile atoms.

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{build_cycle_kernel, build_half_kernel, CycleParams, SampledKernel, Stage};
use crate::numerics::{Grid, SampledFunction};
use crate::spectral::{schmidt_decompose, singular_decompose, ModeSet};
use crate::storage::{StorageModel, StoragePlan};

/// Modes with `s_i < RESOLVED_FRACTION * s_1` are not resolved by the
/// discretized kernel and are dropped from response sets.
pub const RESOLVED_FRACTION: f64 = 1e-8;
const NORM_WARN: f64 = 1e-3;
const NORM_FAIL: f64 = 1e-2;
const ASYMMETRY_WARN: f64 = 0.05;

/// Spatial response functions `sqrt(s_i) psi_i(z)`, split into unit parts
/// `psi_i` and norm factors `sqrt(s_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseSet {
    grid: Grid,
    unit_modes: Vec<Vec<f64>>,
    norm_factors: Vec<f64>,
}

impl ResponseSet {
    pub fn from_parts(grid: Grid, unit_modes: Vec<Vec<f64>>, norm_factors: Vec<f64>) -> Result<Self> {
        if unit_modes.len() != norm_factors.len() {
            return Err(Error::Parameter("one norm factor per mode required".into()));
        }
        if unit_modes.iter().any(|m| m.len() != grid.len()) {
            return Err(Error::Parameter("response mode does not match its grid".into()));
        }
        if unit_modes.iter().flatten().chain(&norm_factors).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite response values".into()));
        }
        Ok(ResponseSet {
            grid,
            unit_modes,
            norm_factors,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.unit_modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_modes.is_empty()
    }

    pub fn unit_values(&self, i: usize) -> &[f64] {
        &self.unit_modes[i]
    }

    pub fn unit_mode(&self, i: usize) -> SampledFunction {
        SampledFunction::new(self.grid, self.unit_modes[i].clone()).expect("checked on construction")
    }

    pub fn norm_factors(&self) -> &[f64] {
        &self.norm_factors
    }

    /// The full response `sqrt(s_i) psi_i`.
    pub fn response(&self, i: usize) -> SampledFunction {
        self.unit_mode(i).scaled(self.norm_factors[i])
    }

    pub fn truncated(&self, m: usize) -> ResponseSet {
        let m = m.min(self.len());
        ResponseSet {
            grid: self.grid,
            unit_modes: self.unit_modes[..m].to_vec(),
            norm_factors: self.norm_factors[..m].to_vec(),
        }
    }

    /// Largest deviation of `int psi_i psi_j` from `delta_ij`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g = self.grid.inner(&self.unit_modes[i], &self.unit_modes[j]);
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// `r(z) = int G_ab(z, t) x(t) dt` by quadrature over the kernel's time grid.
fn write_coherence(half_write: &SampledKernel, x: &[f64]) -> Vec<f64> {
    let t = half_write.col_grid();
    let weighted: Vec<f64> = x.iter().enumerate().map(|(k, v)| t.weight(k) * v).collect();
    let g = half_write.values();
    (0..g.nrows())
        .map(|i| (0..g.ncols()).map(|j| g[(i, j)] * weighted[j]).sum())
        .collect()
}

/// `out(t) = int G_ba(z, t) b(z) dz`.
fn read_signal(half_read: &SampledKernel, b: &[f64]) -> Vec<f64> {
    let z = half_read.row_grid();
    let weighted: Vec<f64> = b.iter().enumerate().map(|(k, v)| z.weight(k) * v).collect();
    let g = half_read.values();
    (0..g.ncols())
        .map(|j| (0..g.nrows()).map(|i| g[(i, j)] * weighted[i]).sum())
        .collect()
}

/// Writes each resolved input mode into the medium.
///
/// The measured norm `||r_i||` must equal `sqrt(s_i)`: a relative mismatch
/// above 1e-3 is logged, above 1e-2 it is an error.
pub fn response_functions(half_write: &SampledKernel, modes: &ModeSet) -> Result<ResponseSet> {
    half_write.col_grid().ensure_same(modes.grid(), "response functions")?;
    let space = *half_write.row_grid();
    let s1 = modes.singular_values().first().copied().unwrap_or(0.0);
    let mut unit_modes = Vec::new();
    let mut norm_factors = Vec::new();
    for i in 0..modes.len() {
        let s = modes.singular_value(i);
        if s < RESOLVED_FRACTION * s1 {
            debug!("mode {} (s = {s:e}) below the resolution floor; dropped", i + 1);
            break;
        }
        let r = write_coherence(half_write, modes.values(i));
        let norm = space.inner(&r, &r).sqrt();
        let expected = s.sqrt();
        if expected == 0.0 && norm == 0.0 {
            unit_modes.push(r);
            norm_factors.push(0.0);
            continue;
        }
        let mismatch = (norm - expected).abs() / expected.max(norm);
        if mismatch > NORM_FAIL {
            return Err(Error::Consistency(format!(
                "response {} has norm {norm} but the cycle kernel predicts {expected}",
                i + 1
            )));
        }
        if mismatch > NORM_WARN {
            warn!("response {} norm mismatch {mismatch:.2e}", i + 1);
        }
        unit_modes.push(r.into_iter().map(|v| v / norm).collect());
        norm_factors.push(norm);
    }
    ResponseSet::from_parts(space, unit_modes, norm_factors)
}

/// `Q_ij = int psi_i(z; stored) psi_j(z; reference) dz`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    rows: Vec<Vec<f64>>,
    label: String,
}

impl OverlapMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Parameter("overlap matrix must be square".into()));
        }
        Ok(OverlapMatrix {
            rows,
            label: label.into(),
        })
    }

    pub fn identity(m: usize) -> Self {
        let rows = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        OverlapMatrix {
            rows,
            label: "identity".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `sum_j Q_ij^2`, bounded by one for a complete reference set.
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|q| q * q).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = self.dim();
        (0..m)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (self.rows[i][j] - self.rows[j][i]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn overlap_matrix(stored: &ResponseSet, reference: &ResponseSet) -> Result<OverlapMatrix> {
    stored.grid.ensure_same(&reference.grid, "overlap matrix")?;
    if stored.len() != reference.len() {
        return Err(Error::Parameter(format!(
            "overlap of {} stored modes with {} reference modes",
            stored.len(),
            reference.len()
        )));
    }
    let rows = stored
        .unit_modes
        .iter()
        .map(|a| reference.unit_modes.iter().map(|b| stored.grid.inner(a, b)).collect())
        .collect();
    OverlapMatrix::from_rows(rows, "")
}

fn check_index(i: usize, q: &OverlapMatrix, modes: &ModeSet) -> Result<()> {
    if q.dim() > modes.len() {
        return Err(Error::Parameter(format!(
            "{} overlap rows but only {} modes",
            q.dim(),
            modes.len()
        )));
    }
    if i >= q.dim() {
        return Err(Error::Parameter(format!(
            "mode {} requested from {} modes",
            i + 1,
            q.dim()
        )));
    }
    Ok(())
}

/// Retrieved signal for input mode `i` (zero based):
/// `phi_i^out = sum_j Q_ij sqrt(s_i s_j) phi_j`.
pub fn output_profile(i: usize, q: &OverlapMatrix, modes: &ModeSet) -> Result<SampledFunction> {
    check_index(i, q, modes)?;
    let m = q.dim();
    let si = modes.singular_value(i);
    let mut out = vec![0.0; modes.grid().len()];
    for j in 0..m {
        let c = q.get(i, j) * (si * modes.singular_value(j)).sqrt();
        out.iter_mut().zip(modes.values(j)).for_each(|(o, p)| *o += c * p);
    }
    if let Some(&tail) = modes.singular_values().get(m) {
        debug!(
            "output profile {} truncated at {m} modes; neglected scale {tail:e}",
            i + 1
        );
    }
    SampledFunction::new(*modes.grid(), out)
}

/// `eta_i = sum_j Q_ij^2 s_i s_j`.
pub fn efficiency_overlap(i: usize, q: &OverlapMatrix, modes: &ModeSet) -> Result<f64> {
    check_index(i, q, modes)?;
    let si = modes.singular_value(i);
    Ok((0..q.dim())
        .map(|j| q.get(i, j).powi(2) * si * modes.singular_value(j))
        .sum())
}

/// Efficiency of a cycle pushed through explicitly: write quadrature,
/// storage, read quadrature, and the output energy.
pub fn efficiency_direct(
    input: &SampledFunction,
    half_write: &SampledKernel,
    storage: &StorageModel,
    half_read: &SampledKernel,
) -> Result<f64> {
    let plan = StoragePlan::new(*storage, *half_write.row_grid())?;
    efficiency_direct_with(input, half_write, &plan, half_read)
}

/// [`efficiency_direct`] with a prepared storage plan.
pub fn efficiency_direct_with(
    input: &SampledFunction,
    half_write: &SampledKernel,
    plan: &StoragePlan,
    half_read: &SampledKernel,
) -> Result<f64> {
    input.grid().ensure_same(half_write.col_grid(), "input signal")?;
    half_write
        .row_grid()
        .ensure_same(half_read.row_grid(), "write and read space grids")?;
    let energy = input.dot(input)?;
    if energy.is_nan() || energy <= 0.0 {
        return Err(Error::Parameter("input signal has zero energy".into()));
    }
    let mut x = input.values().to_vec();
    if (energy - 1.0).abs() > 1e-9 {
        warn!("input energy {energy} normalized to one");
        x.iter_mut().for_each(|v| *v /= energy.sqrt());
    }
    let b = plan.apply(&write_coherence(half_write, &x));
    let out = read_signal(half_read, &b);
    Ok(half_read.col_grid().inner(&out, &out))
}

/// Eigenmodes of the cycle kernel with mobile atoms.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizedCycle {
    pub modes: ModeSet,
    /// `max |K - K^T| / max |K|` before symmetrization.
    pub asymmetry: f64,
}

impl OptimizedCycle {
    /// `eta_i = s_i^2` of the new eigenmodes.
    pub fn efficiencies(&self) -> Vec<f64> {
        self.modes.singular_values().iter().map(|s| s * s).collect()
    }
}

/// Rebuilds the cycle kernel `K(t, t') = sum_ij sqrt(s_i s_j) Q_ij phi_i(t) phi_j(t')`
/// and returns its leading `m` singular values with the input modes that
/// achieve them.
///
/// `K` is not symmetric once storage mixes the modes unevenly; its singular
/// values, unlike the spectrum of the symmetric part, stay bounded by the
/// transmission of the chain.
pub fn optimized_cycle(q: &OverlapMatrix, modes: &ModeSet, m: usize) -> Result<OptimizedCycle> {
    let dim = q.dim();
    if dim > modes.len() {
        return Err(Error::Parameter(format!(
            "{dim} overlap rows but only {} modes",
            modes.len()
        )));
    }
    let grid = *modes.grid();
    let n = grid.len();
    let phi = DMatrix::from_fn(n, dim, |r, i| modes.values(i)[r]);
    let c = DMatrix::from_fn(dim, dim, |i, j| {
        (modes.singular_value(i) * modes.singular_value(j)).sqrt() * q.get(i, j)
    });
    let k = &phi * c * phi.transpose();
    let asymmetry = crate::kernel::relative_asymmetry(&k);
    if asymmetry > ASYMMETRY_WARN {
        warn!(
            "optimized cycle kernel ({}) asymmetric by {asymmetry:.3} (relative)",
            q.label()
        );
    }
    let kernel = SampledKernel::new(grid, grid, k)?;
    let modes = singular_decompose(&kernel, m.min(n))?.left;
    Ok(OptimizedCycle { modes, asymmetry })
}

/// Kernels, Schmidt modes and response functions of one memory
/// configuration with equal write and read durations.
#[derive(Debug, Clone)]
pub struct MemoryCycle {
    params: CycleParams,
    half: SampledKernel,
    modes: ModeSet,
    responses: ResponseSet,
}

impl MemoryCycle {
    pub fn build(params: &CycleParams, m: usize) -> Result<Self> {
        params.validate()?;
        if !params.has_equal_durations() {
            return Err(Error::Parameter(format!(
                "storage pipeline needs equal write and read durations (got {} and {})",
                params.write_duration, params.read_duration
            )));
        }
        if m == 0 {
            return Err(Error::Parameter("at least one mode is required".into()));
        }
        let half = build_half_kernel(params, Stage::Write)?;
        let cycle = build_cycle_kernel(&half, &half)?;
        let modes = schmidt_decompose(&cycle, m.min(params.n_t))?;
        let responses = response_functions(&half, &modes)?;
        let modes = modes.truncated(responses.len().max(1));
        Ok(MemoryCycle {
            params: *params,
            half,
            modes,
            responses,
        })
    }

    pub fn params(&self) -> &CycleParams {
        &self.params
    }

    /// The write kernel, which is also the read kernel.
    pub fn half_kernel(&self) -> &SampledKernel {
        &self.half
    }

    /// Schmidt modes, restricted to those with resolved responses.
    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn responses(&self) -> &ResponseSet {
        &self.responses
    }

    pub fn plan(&self, model: StorageModel) -> Result<StoragePlan> {
        StoragePlan::new(model, self.params.space_grid())
    }

    /// Response functions after storage, on the standard space grid.
    pub fn stored(&self, plan: &StoragePlan) -> Result<ResponseSet> {
        plan.apply_set(&self.responses)
    }

    pub fn overlap(&self, plan: &StoragePlan) -> Result<OverlapMatrix> {
        let mut q = overlap_matrix(&self.stored(plan)?, &self.responses)?;
        q.label = plan.model().label();
        Ok(q)
    }

    pub fn efficiency_direct(&self, input: &SampledFunction, plan: &StoragePlan) -> Result<f64> {
        efficiency_direct_with(input, &self.half, plan, &self.half)
    }

    /// Everything downstream of one storage model.
    pub fn report(&self, model: StorageModel) -> Result<CycleReport> {
        let plan = self.plan(model)?;
        let q = self.overlap(&plan)?;
        let m = q.dim();
        let mut efficiencies = Vec::with_capacity(m);
        let mut direct = Vec::with_capacity(m);
        let mut profiles = Vec::with_capacity(m);
        for i in 0..m {
            efficiencies.push(efficiency_overlap(i, &q, &self.modes)?);
            direct.push(self.efficiency_direct(&self.modes.function(i), &plan)?);
            profiles.push(output_profile(i, &q, &self.modes)?.into_values());
        }
        let optimized = if model.is_linear() {
            Some(optimized_cycle(&q, &self.modes, m)?)
        } else {
            None
        };
        let report = CycleReport {
            params: self.params,
            storage: model,
            out_of_model: self.params.out_of_model(),
            singular_values: self.modes.singular_values().to_vec(),
            eigenvalues: (0..m).map(|i| self.modes.eigenvalue(i)).collect(),
            overlap: q,
            efficiencies,
            efficiencies_direct: direct,
            output_profiles: profiles,
            optimized_efficiencies: optimized.as_ref().map(OptimizedCycle::efficiencies),
            optimized_asymmetry: optimized.map(|o| o.asymmetry),
        };
        report.validate()?;
        Ok(report)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleReport {
    pub params: CycleParams,
    pub storage: StorageModel,
    pub out_of_model: bool,
    pub singular_values: Vec<f64>,
    /// `lambda_i = s_i^2` with motionless atoms.
    pub eigenvalues: Vec<f64>,
    pub overlap: OverlapMatrix,
    /// From the overlap matrix.
    pub efficiencies: Vec<f64>,
    /// From the explicit write, storage and read chain.
    pub efficiencies_direct: Vec<f64>,
    /// Retrieved signal per input mode on the read time grid.
    #[serde(skip)]
    pub output_profiles: Vec<Vec<f64>>,
    /// Singular values squared of the cycle with moving atoms; absent for
    /// storage models that are not linear.
    pub optimized_efficiencies: Option<Vec<f64>>,
    pub optimized_asymmetry: Option<f64>,
}

impl CycleReport {
    fn validate(&self) -> Result<()> {
        let optimized = self.optimized_efficiencies.iter().flatten();
        for (i, eta) in self
            .efficiencies
            .iter()
            .chain(&self.efficiencies_direct)
            .chain(optimized)
            .enumerate()
        {
            if !(*eta >= 0.0 && *eta <= 1.0 + 1e-6) {
                return Err(Error::Consistency(format!(
                    "efficiency #{} = {eta} outside [0, 1]",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}
