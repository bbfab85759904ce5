//! Storage stage: thermal free expansion of the spin coherence, the
//! concentration profile it leaves behind, the coordinate change back to
//! uniform optical depth, complete mixing, and the classicality check.
//!
//! During storage an atom with longitudinal velocity `v` moves by `v T_s`.
//! Averaging over a Maxwell distribution `e^{-v^2/u^2} / (sqrt(pi) u)` blurs
//! every coherence profile with a Gaussian of displacement standard deviation
//! `sigma = dL / sqrt(2)`, where `dL = u T_s` is the mean extension.

use rayon::prelude::*;
use serde::Serialize;

use crate::cycle::ResponseSet;
use crate::error::{Error, Result};
use crate::numerics::special::{normal_mass, normal_pdf};
use crate::numerics::{gauss_hermite, Grid, Monotone, SampledFunction};

/// Half-width of the extended domain in units of the mean extension.
pub const EXTENSION: f64 = 4.0;
/// Node count of the Gauss-Hermite blur.
pub const HERMITE_NODES: usize = 64;
/// Classicality margin required for a pass.
pub const CLASSICALITY_THRESHOLD: f64 = 100.0;

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// How a coherence profile is carried through the coordinate change
/// `z_bar = f(z)` that restores uniform optical depth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateTransform {
    /// `psi_bar(z_bar) = psi(f^{-1}(z_bar))`.
    Scalar,
    /// `psi_bar = psi / sqrt(f')`, preserving `int psi^2`.
    Density,
    /// `psi_bar = psi / f'`, preserving `int psi`: the coherence carried by
    /// each atom is unchanged while the atoms are packed back to the
    /// original density.
    #[default]
    Atomic,
}

impl CoordinateTransform {
    fn jacobian_power(self) -> f64 {
        match self {
            CoordinateTransform::Scalar => 0.0,
            CoordinateTransform::Density => 0.5,
            CoordinateTransform::Atomic => 1.0,
        }
    }
}

/// Level of the homogeneous profile left by complete mixing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MixNorm {
    /// Keeps the excitation number `int b^2`.
    #[default]
    Excitation,
    /// Keeps the mean amplitude `int b / L`.
    Amplitude,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum StorageModel {
    /// Motionless atoms.
    #[default]
    None,
    FreeExpansion {
        delta_l: f64,
        transform: CoordinateTransform,
    },
    FullMixing {
        norm: MixNorm,
    },
}

impl StorageModel {
    pub fn free_expansion(delta_l: f64) -> Self {
        StorageModel::FreeExpansion {
            delta_l,
            transform: CoordinateTransform::default(),
        }
    }

    pub fn full_mixing() -> Self {
        StorageModel::FullMixing {
            norm: MixNorm::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StorageModel::FreeExpansion { delta_l, .. } = *self {
            check_extension(delta_l)?;
        }
        Ok(())
    }

    /// Whether stored coherence depends linearly on the written one.
    /// Excitation-preserving mixing fixes the level of every profile by its
    /// own norm and is not.
    pub fn is_linear(&self) -> bool {
        !matches!(
            self,
            StorageModel::FullMixing {
                norm: MixNorm::Excitation
            }
        )
    }

    /// Short human-readable tag such as `dL=2` or `mixing`.
    pub fn label(&self) -> String {
        match self {
            StorageModel::None => "motionless".into(),
            StorageModel::FreeExpansion { delta_l, .. } => format!("dL={delta_l}"),
            StorageModel::FullMixing { .. } => "mixing".into(),
        }
    }
}

fn check_extension(delta_l: f64) -> Result<()> {
    if !(delta_l.is_finite() && delta_l >= 0.0) {
        return Err(Error::Parameter(format!("mean extension must be >= 0, got {delta_l}")));
    }
    Ok(())
}

/// `space` extended by whole steps to cover `[-4 dL, L + 4 dL]`, so that the
/// original nodes stay nodes of the extended grid.
fn extended_grid(space: &Grid, delta_l: f64) -> Result<Grid> {
    if delta_l == 0.0 {
        return Ok(*space);
    }
    let h = space.spacing();
    let m = (EXTENSION * delta_l / h).ceil();
    Grid::new(space.start() - m * h, space.end() + m * h, space.len() + 2 * m as usize)
}

/// Atom density after free expansion of a uniform column on `[0, L]`,
/// `N(z) = N0 [Phi(z / sigma) - Phi((z - L) / sigma)]`, sampled with `n`
/// points on `[-4 dL, L + 4 dL]` and scaled so that its trapezoid integral is
/// exactly `L`.
pub fn blurred_concentration(length: f64, delta_l: f64, n: usize) -> Result<SampledFunction> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Parameter(format!("length must be positive, got {length}")));
    }
    check_extension(delta_l)?;
    if delta_l == 0.0 {
        return SampledFunction::new(Grid::new(0.0, length, n)?, vec![1.0; n]);
    }
    let grid = Grid::new(-EXTENSION * delta_l, length + EXTENSION * delta_l, n)?;
    concentration_on(&grid, length, delta_l)
}

fn concentration_on(grid: &Grid, length: f64, delta_l: f64) -> Result<SampledFunction> {
    let sigma = delta_l / std::f64::consts::SQRT_2;
    let raw: Vec<f64> = grid
        .points()
        .into_iter()
        .map(|z| normal_mass((z - length) / sigma, z / sigma))
        .collect();
    let total = grid.quad(&raw);
    SampledFunction::new(*grid, raw.into_iter().map(|v| v * length / total).collect())
}

/// Monotone map `f` from the expanded coordinate onto `[0, L]` with
/// `f' = N / N_bar`, i.e. the normalized cumulative atom count.
#[derive(Debug, Clone)]
pub struct ScalingMap {
    map: SampledFunction,
    concentration: SampledFunction,
    length: f64,
}

impl ScalingMap {
    pub fn map(&self) -> &SampledFunction {
        &self.map
    }

    pub fn concentration(&self) -> &SampledFunction {
        &self.concentration
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `f'(z) = L N(z) / int N`, linearly interpolated.
    pub fn derivative(&self, z: f64) -> Option<f64> {
        let total = self.concentration.quad();
        self.concentration.eval(z).map(|n| self.length * n / total)
    }

    /// `f^{-1}(z_bar)`.
    pub fn inverse(&self, z_bar: f64) -> Result<f64> {
        Monotone::new(&self.map)?.invert(z_bar)
    }
}

/// Builds `f(z) = L * int_{z_0}^z N / int N` by cumulative trapezoid
/// integration.
pub fn scaling_map(concentration: &SampledFunction, length: f64) -> Result<ScalingMap> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Parameter(format!("length must be positive, got {length}")));
    }
    let v = concentration.values();
    if let Some(k) = v.iter().position(|x| *x < 0.0) {
        return Err(Error::Parameter(format!("negative concentration at index {k}")));
    }
    let grid = *concentration.grid();
    let h = grid.spacing();
    let mut cum = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cum.push(acc);
    }
    if acc.is_nan() || acc <= 0.0 {
        return Err(Error::Parameter("concentration has zero total mass".into()));
    }
    let scale = length / acc;
    let mut f: Vec<f64> = cum.into_iter().map(|c| c * scale).collect();
    *f.last_mut().expect("grid has points") = length;
    Ok(ScalingMap {
        map: SampledFunction::new(grid, f)?,
        concentration: concentration.clone(),
        length,
    })
}

/// Contributions from farther than this many standard deviations are below
/// `1e-22` of the local weight and are skipped.
const BLUR_REACH: f64 = 10.0;

/// Weights of one output sample of the blur: the exact convolution of the
/// piecewise-linear interpolant of the input (zero outside its grid) with the
/// Gaussian. Returns the first input index and the band of weights.
fn blur_row(input: &Grid, x: f64, sigma: f64) -> (usize, Vec<f64>) {
    let h = input.spacing();
    let n = input.len();
    let lo = ((x - BLUR_REACH * sigma - input.start()) / h).floor().max(0.0) as usize;
    let hi = (((x + BLUR_REACH * sigma - input.start()) / h).ceil().max(0.0) as usize).min(n - 1);
    if lo >= hi {
        return (0, Vec::new());
    }
    let u: Vec<f64> = (lo..=hi).map(|k| (input.point(k) - x) / sigma).collect();
    let cdf: Vec<f64> = u.iter().map(|&v| normal_mass(f64::NEG_INFINITY, v)).collect();
    let pdf: Vec<f64> = u.iter().map(|&v| normal_pdf(v)).collect();
    let mut row = vec![0.0; hi - lo + 1];
    for s in 0..hi - lo {
        // int over the cell of g and of (z - a) g, with a the left node
        let i0 = if u[s] < 0.0 {
            cdf[s + 1] - cdf[s]
        } else {
            normal_mass(u[s], u[s + 1])
        };
        let i1 = -sigma * u[s] * i0 + sigma * (pdf[s] - pdf[s + 1]);
        row[s] += i0 - i1 / h;
        row[s + 1] += i1 / h;
    }
    (lo, row)
}

/// Linear operator of the free-expansion blur, stored as one band of
/// weights per output sample.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    input: Grid,
    output: Grid,
    rows: Vec<(usize, Vec<f64>)>,
}

impl BlurOperator {
    pub fn new(input: Grid, delta_l: f64) -> Result<Self> {
        check_extension(delta_l)?;
        let output = extended_grid(&input, delta_l)?;
        let rows = if delta_l == 0.0 {
            (0..input.len()).map(|k| (k, vec![1.0])).collect()
        } else {
            let sigma = delta_l / std::f64::consts::SQRT_2;
            (0..output.len())
                .into_par_iter()
                .map(|r| blur_row(&input, output.point(r), sigma))
                .collect()
        };
        Ok(BlurOperator { input, output, rows })
    }

    pub fn input_grid(&self) -> &Grid {
        &self.input
    }

    pub fn output_grid(&self) -> &Grid {
        &self.output
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|(lo, w)| dot_band(*lo, w, values)).collect()
    }
}

fn dot_band(lo: usize, w: &[f64], values: &[f64]) -> f64 {
    w.iter().zip(&values[lo..]).map(|(a, b)| a * b).sum()
}

/// Gaussian blur of `psi` (zero outside its grid) onto the extended grid,
/// without storing the operator.
pub fn blur_function(psi: &SampledFunction, delta_l: f64) -> Result<SampledFunction> {
    check_extension(delta_l)?;
    if delta_l == 0.0 {
        return Ok(psi.clone());
    }
    let input = *psi.grid();
    let output = extended_grid(&input, delta_l)?;
    let sigma = delta_l / std::f64::consts::SQRT_2;
    let values = (0..output.len())
        .into_par_iter()
        .map(|r| {
            let (lo, w) = blur_row(&input, output.point(r), sigma);
            dot_band(lo, &w, psi.values())
        })
        .collect();
    SampledFunction::new(output, values)
}

/// The same blur by a 64-node Gauss-Hermite rule over the velocity
/// distribution, `(1/sqrt pi) sum_k w_k psi(z - dL x_k)`.
///
/// Accurate for profiles that are smooth on the scale of `dL`; a profile with
/// a jump (such as a coherence cut off at the cell face) is better served by
/// [`blur_function`].
pub fn blur_gauss_hermite(psi: &SampledFunction, delta_l: f64) -> Result<SampledFunction> {
    check_extension(delta_l)?;
    let grid = extended_grid(psi.grid(), delta_l)?;
    if delta_l == 0.0 {
        return Ok(psi.clone());
    }
    let rule = gauss_hermite(HERMITE_NODES)?;
    let norm = std::f64::consts::PI.sqrt().recip();
    SampledFunction::from_fn(grid, |z| {
        norm * rule
            .iter()
            .map(|(x, w)| w * psi.eval_or_zero(z - delta_l * x))
            .sum::<f64>()
    })
}

/// Blurs every unit mode of a response set; norm factors are kept.
pub fn blur_free_expansion(r: &ResponseSet, delta_l: f64) -> Result<ResponseSet> {
    let op = BlurOperator::new(*r.grid(), delta_l)?;
    let modes = (0..r.len())
        .into_par_iter()
        .map(|i| op.apply(r.unit_values(i)))
        .collect();
    ResponseSet::from_parts(op.output, modes, r.norm_factors().to_vec())
}

/// Sampling of the coordinate change back onto the standard grid: for each
/// node `z_bar_j` the cell of `f^{-1}(z_bar_j)` in the extended grid and the
/// factor `f'^{-p}` there.
#[derive(Debug, Clone)]
struct Resampler {
    cells: Vec<(usize, f64)>,
    factors: Vec<f64>,
}

impl Resampler {
    fn new(map: &ScalingMap, target: &Grid, transform: CoordinateTransform) -> Result<Self> {
        let inv = Monotone::new(&map.map)?;
        let ext = map.map.grid();
        let p = transform.jacobian_power();
        let mut cells = Vec::with_capacity(target.len());
        let mut factors = Vec::with_capacity(target.len());
        for j in 0..target.len() {
            let x = inv.invert(target.point(j))?;
            cells.push(ext.locate(x));
            let fp = map.derivative(x).ok_or(Error::Range {
                value: x,
                lo: ext.start(),
                hi: ext.end(),
            })?;
            factors.push(if p == 0.0 { 1.0 } else { fp.powf(-p) });
        }
        Ok(Resampler { cells, factors })
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .zip(&self.factors)
            .map(|(&(k, frac), c)| c * (values[k] + frac * (values[k + 1] - values[k])))
            .collect()
    }
}

/// Re-expresses blurred profiles on the standard `[0, L]` grid of the
/// uniform-optical-depth coordinate.
pub fn rescale_to_optical_depth(
    blurred: &ResponseSet,
    map: &ScalingMap,
    transform: CoordinateTransform,
    target: &Grid,
) -> Result<ResponseSet> {
    blurred.grid().ensure_same(map.map.grid(), "rescaling")?;
    let rs = Resampler::new(map, target, transform)?;
    let modes = (0..blurred.len()).map(|i| rs.apply(blurred.unit_values(i))).collect();
    ResponseSet::from_parts(*target, modes, blurred.norm_factors().to_vec())
}

fn mix_level(grid: &Grid, b: &[f64], norm: MixNorm) -> f64 {
    let width = grid.width();
    let total = grid.quad(b);
    match norm {
        MixNorm::Excitation => {
            let sign = if total < 0.0 { -1.0 } else { 1.0 };
            sign * grid.inner(b, b).sqrt() / width.sqrt()
        }
        MixNorm::Amplitude => total / width,
    }
}

/// Complete mixing: every unit mode becomes a constant on its grid.
pub fn mix_uniform(r: &ResponseSet, norm: MixNorm) -> Result<ResponseSet> {
    let grid = *r.grid();
    let modes = (0..r.len())
        .map(|i| vec![mix_level(&grid, r.unit_values(i), norm); grid.len()])
        .collect();
    ResponseSet::from_parts(grid, modes, r.norm_factors().to_vec())
}

/// A storage model prepared for one spatial grid, applicable to any number
/// of coherence profiles.
#[derive(Debug, Clone)]
pub struct StoragePlan {
    model: StorageModel,
    space: Grid,
    expansion: Option<(BlurOperator, ScalingMap, Resampler)>,
}

impl StoragePlan {
    pub fn new(model: StorageModel, space: Grid) -> Result<Self> {
        model.validate()?;
        let expansion = match model {
            StorageModel::FreeExpansion { delta_l, transform } if delta_l > 0.0 => {
                let blur = BlurOperator::new(space, delta_l)?;
                let conc = concentration_on(blur.output_grid(), space.width(), delta_l)?;
                let map = scaling_map(&conc, space.width())?;
                let rs = Resampler::new(&map, &space, transform)?;
                Some((blur, map, rs))
            }
            _ => None,
        };
        Ok(StoragePlan {
            model,
            space,
            expansion,
        })
    }

    pub fn model(&self) -> &StorageModel {
        &self.model
    }

    pub fn scaling_map(&self) -> Option<&ScalingMap> {
        self.expansion.as_ref().map(|(_, m, _)| m)
    }

    /// Coherence on the extended grid before the coordinate change, for
    /// free expansion only.
    pub fn blurred(&self, b: &[f64]) -> Option<SampledFunction> {
        let (blur, _, _) = self.expansion.as_ref()?;
        SampledFunction::new(*blur.output_grid(), blur.apply(b)).ok()
    }

    /// Coherence on the standard grid after storage.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.space.len());
        match (&self.model, &self.expansion) {
            (_, Some((blur, _, rs))) => rs.apply(&blur.apply(b)),
            (StorageModel::FullMixing { norm }, None) => vec![mix_level(&self.space, b, *norm); b.len()],
            _ => b.to_vec(),
        }
    }

    /// Stores every unit mode of a response set.
    pub fn apply_set(&self, r: &ResponseSet) -> Result<ResponseSet> {
        r.grid().ensure_same(&self.space, "storage")?;
        let modes = (0..r.len())
            .into_par_iter()
            .map(|i| self.apply(r.unit_values(i)))
            .collect();
        ResponseSet::from_parts(self.space, modes, r.norm_factors().to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classicality {
    /// `T / (n^{2/3} h^2 / (3 m k_B))`.
    pub ratio: f64,
    pub passed: bool,
}

/// Compares the gas temperature with its degeneracy temperature.
pub fn classicality_check(temperature: f64, concentration: f64, mass: f64) -> Result<Classicality> {
    for (name, v) in [
        ("temperature", temperature),
        ("concentration", concentration),
        ("mass", mass),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
        }
    }
    let degeneracy = concentration.powf(2.0 / 3.0) * PLANCK * PLANCK / (3.0 * mass * BOLTZMANN);
    let ratio = temperature / degeneracy;
    Ok(Classicality {
        ratio,
        passed: ratio >= CLASSICALITY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn gaussian(grid: Grid, c: f64, s0: f64) -> SampledFunction {
        SampledFunction::from_fn(grid, |z| (-(z - c).powi(2) / (2.0 * s0 * s0)).exp()).unwrap()
    }

    fn variance(f: &SampledFunction) -> f64 {
        let g = f.grid();
        let m0 = f.quad();
        let x = g.points();
        let m1 = g.quad(&x.iter().zip(f.values()).map(|(x, v)| x * v).collect::<Vec<_>>()) / m0;
        g.quad(
            &x.iter()
                .zip(f.values())
                .map(|(x, v)| (x - m1).powi(2) * v)
                .collect::<Vec<_>>(),
        ) / m0
    }

    #[test]
    fn gaussian_blur_matches_analytic_variance() {
        // h = 1e-3 keeps the h^2/6 variance of the linear interpolant below 1e-6
        let grid = Grid::new(0.0, 4.0, 4001).unwrap();
        let psi = gaussian(grid, 2.0, 0.3);
        for dl in [0.1, 0.4] {
            let want = 0.09 + dl * dl / 2.0;
            let exact = blur_function(&psi, dl).unwrap();
            let gh = blur_gauss_hermite(&psi, dl).unwrap();
            assert!((variance(&exact) - want).abs() < 1e-6, "{} vs {want}", variance(&exact));
            assert!((variance(&gh) - want).abs() < 1e-6, "{} vs {want}", variance(&gh));
            let diff = exact
                .values()
                .iter()
                .zip(gh.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-6, "{diff}");
        }
    }

    #[test]
    fn blur_preserves_amplitude_integral() {
        let grid = Grid::new(0.0, 10.0, 512).unwrap();
        let psi = SampledFunction::from_fn(grid, |z| (-(z / 2.0)).exp() * (1.0 + z).cos()).unwrap();
        for dl in [0.5, 2.0, 10.0] {
            let b = blur_function(&psi, dl).unwrap();
            assert!(
                (b.quad() - psi.quad()).abs() < 1e-8,
                "{dl}: {} vs {}",
                b.quad(),
                psi.quad()
            );
        }
    }

    #[test]
    fn zero_extension_is_identity() {
        let grid = Grid::new(0.0, 10.0, 64).unwrap();
        let psi = gaussian(grid, 3.0, 1.0);
        assert_eq!(blur_function(&psi, 0.0).unwrap(), psi);
        assert_eq!(blur_gauss_hermite(&psi, 0.0).unwrap(), psi);
        assert!(blur_function(&psi, -1.0).is_err());
    }

    #[test]
    fn small_extension_approaches_identity() {
        let grid = Grid::new(0.0, 10.0, 512).unwrap();
        let psi = SampledFunction::from_fn(grid, |z| (-(z / 3.0)).exp() * (0.8 * z).cos()).unwrap();
        let dl = 1e-3 * 10.0;
        let b = blur_function(&psi, dl).unwrap();
        let mut worst = 0.0_f64;
        for (j, z) in grid.points().into_iter().enumerate() {
            if z >= EXTENSION * dl && z <= 10.0 - EXTENSION * dl {
                worst = worst.max((b.eval(z).unwrap() - psi.values()[j]).abs());
            }
        }
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn blur_contracts_overlap() {
        let grid = Grid::new(0.0, 10.0, 400).unwrap();
        let psi = SampledFunction::from_fn(grid, |z| (-(z - 1.0).powi(2)).exp()).unwrap();
        let psi = psi.scaled(psi.norm().recip());
        for dl in [0.1, 1.0, 4.0] {
            let b = blur_function(&psi, dl).unwrap();
            let overlap: f64 = grid
                .points()
                .iter()
                .zip(psi.values())
                .enumerate()
                .map(|(k, (z, v))| grid.weight(k) * v * b.eval(*z).unwrap())
                .sum();
            assert!(overlap <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn concentration_examples() {
        let box_ = blurred_concentration(10.0, 0.0, 101).unwrap();
        assert!(box_.values().iter().all(|v| *v == 1.0));
        assert!((box_.quad() - 10.0).abs() < 1e-12);
        for dl in [0.5, 1.0, 1.4, 2.0, 2.5] {
            let n = blurred_concentration(10.0, dl, 1201).unwrap();
            assert!((n.quad() - 10.0).abs() < 1e-8);
            assert_eq!(n.grid().start(), -4.0 * dl);
            // both edges are 5 / dL error-function widths away from the centre
            let want = crate::numerics::erf(5.0 / dl).unwrap();
            assert!((n.eval(5.0).unwrap() - want).abs() < 1e-6);
            if dl <= 1.4 {
                assert!((n.eval(5.0).unwrap() - 1.0).abs() < 1e-6);
            }
        }
        assert!(blurred_concentration(10.0, -1.0, 10).is_err());
        assert!(blurred_concentration(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn scaling_map_examples() {
        let id = scaling_map(&blurred_concentration(10.0, 0.0, 201).unwrap(), 10.0).unwrap();
        for (z, f) in id.map().grid().points().into_iter().zip(id.map().values()) {
            assert!((z - f).abs() <= 1e-9);
        }
        let m = scaling_map(&blurred_concentration(10.0, 2.0, 901).unwrap(), 10.0).unwrap();
        assert!(m.map().eval(5.0).map(|f| (f - 5.0).abs() < 1e-9).unwrap());
        assert!(m.map().values()[0] <= 1e-6 * 10.0);
        assert!(*m.map().values().last().unwrap() >= 10.0 * (1.0 - 1e-6));
        assert!(m.map().values().windows(2).all(|w| w[1] > w[0]));
        let total: f64 = m.concentration().quad();
        assert!((total / (total / 10.0) - 10.0).abs() < 1e-6 * 10.0);

        let grid = Grid::new(0.0, 1.0, 5).unwrap();
        assert!(scaling_map(&SampledFunction::zeros(grid), 1.0).is_err());
        assert!(scaling_map(
            &SampledFunction::new(grid, vec![1.0, -1.0, 1.0, 1.0, 1.0]).unwrap(),
            1.0
        )
        .is_err());
    }

    fn set(grid: Grid, fs: &[fn(f64) -> f64]) -> ResponseSet {
        let modes = fs.iter().map(|f| grid.points().into_iter().map(f).collect()).collect();
        ResponseSet::from_parts(grid, modes, vec![1.0; fs.len()]).unwrap()
    }

    #[test]
    fn zero_extension_storage_is_identity_for_every_transform() {
        let grid = Grid::new(0.0, 10.0, 128).unwrap();
        let r = set(grid, &[|z| (-z).exp(), |z| (0.5 * z).sin()]);
        for transform in [
            CoordinateTransform::Scalar,
            CoordinateTransform::Density,
            CoordinateTransform::Atomic,
        ] {
            let plan = StoragePlan::new(
                StorageModel::FreeExpansion {
                    delta_l: 0.0,
                    transform,
                },
                grid,
            )
            .unwrap();
            assert_eq!(plan.apply_set(&r).unwrap(), r);
        }
        assert_eq!(
            StoragePlan::new(StorageModel::None, grid)
                .unwrap()
                .apply_set(&r)
                .unwrap(),
            r
        );
    }

    #[test]
    fn transforms_differ_by_jacobian() {
        let grid = Grid::new(0.0, 10.0, 256).unwrap();
        let b: Vec<f64> = grid.points().into_iter().map(|z| (-(z / 2.0)).exp()).collect();
        let plan = |t| {
            StoragePlan::new(
                StorageModel::FreeExpansion {
                    delta_l: 2.0,
                    transform: t,
                },
                grid,
            )
            .unwrap()
        };
        let (s, d, a) = (
            plan(CoordinateTransform::Scalar).apply(&b),
            plan(CoordinateTransform::Density).apply(&b),
            plan(CoordinateTransform::Atomic).apply(&b),
        );
        let p = plan(CoordinateTransform::Scalar);
        let map = p.scaling_map().unwrap();
        for j in [0, 40, 128, 255] {
            let fp = map.derivative(map.inverse(grid.point(j)).unwrap()).unwrap();
            assert!((d[j] - s[j] / fp.sqrt()).abs() < 1e-12);
            assert!((a[j] - s[j] / fp).abs() < 1e-12);
        }
    }

    #[test]
    fn density_transform_preserves_energy() {
        let grid = Grid::new(0.0, 10.0, 2001).unwrap();
        let b: Vec<f64> = grid
            .points()
            .into_iter()
            .map(|z| (-(z - 4.0).powi(2) / 4.0).exp())
            .collect();
        let model = StorageModel::FreeExpansion {
            delta_l: 2.0,
            transform: CoordinateTransform::Density,
        };
        let plan = StoragePlan::new(model, grid).unwrap();
        let blurred = plan.blurred(&b).unwrap();
        let stored = plan.apply(&b);
        let before = blurred.grid().inner(blurred.values(), blurred.values());
        let after = grid.inner(&stored, &stored);
        assert!((before - after).abs() < 1e-6, "{before} vs {after}");
    }

    #[test]
    fn atomic_transform_preserves_amplitude() {
        // the stored profile has an unbounded slope at the cell faces, so the
        // error falls somewhat faster than h rather than as h^2
        let err = |n| {
            let grid = Grid::new(0.0, 10.0, n).unwrap();
            let b: Vec<f64> = grid
                .points()
                .into_iter()
                .map(|z| (-(z - 4.0).powi(2) / 4.0).exp())
                .collect();
            let plan = StoragePlan::new(StorageModel::free_expansion(2.0), grid).unwrap();
            (grid.quad(&plan.apply(&b)) - grid.quad(&b)).abs()
        };
        let (coarse, fine) = (err(1001), err(2001));
        assert!(fine < 2e-5 * 3.54);
        assert!(fine < 0.5 * coarse);
    }

    #[test]
    fn mixing_examples() {
        let grid = Grid::new(0.0, 10.0, 200).unwrap();
        let r = set(grid, &[|z| (-(z / 2.0)).exp(), |z| (z - 3.0) * (-(z / 3.0)).exp()]);
        let norms: Vec<f64> = (0..2)
            .map(|i| grid.inner(r.unit_values(i), r.unit_values(i)).sqrt())
            .collect();
        let r = ResponseSet::from_parts(
            grid,
            (0..2)
                .map(|i| r.unit_values(i).iter().map(|v| v / norms[i]).collect())
                .collect(),
            vec![1.0, 0.5],
        )
        .unwrap();
        let m = mix_uniform(&r, MixNorm::Excitation).unwrap();
        assert!((m.unit_values(0)[17] - 10f64.sqrt().recip()).abs() < 1e-12);
        for i in 0..2 {
            assert!((grid.inner(m.unit_values(i), m.unit_values(i)) - 1.0).abs() < 1e-10);
        }
        assert_eq!(m.norm_factors(), r.norm_factors());
        let again = mix_uniform(&m, MixNorm::Excitation).unwrap();
        assert!((again.unit_values(1)[0] - m.unit_values(1)[0]).abs() < 1e-14);

        let a = mix_uniform(&r, MixNorm::Amplitude).unwrap();
        assert!((a.unit_values(0)[0] - grid.quad(r.unit_values(0)) / 10.0).abs() < 1e-14);
        let again = mix_uniform(&a, MixNorm::Amplitude).unwrap();
        assert!((again.unit_values(0)[0] - a.unit_values(0)[0]).abs() < 1e-14);
    }

    #[test]
    fn classicality_examples() {
        let c = classicality_check(1e-4, 1e15, 2.207e-25).unwrap();
        assert!(c.passed);
        let degeneracy = 1e10 * PLANCK * PLANCK / (3.0 * 2.207e-25 * BOLTZMANN);
        assert!((c.ratio - 1e-4 / degeneracy).abs() < 1e-9 * c.ratio);
        assert!(c.ratio > 1e5 && c.ratio < 3e5);
        let at_bound = classicality_check(degeneracy, 1e15, 2.207e-25).unwrap();
        assert!((at_bound.ratio - 1.0).abs() < 1e-12);
        assert!(!at_bound.passed);
        assert!(classicality_check(0.0, 1e15, 1e-25).is_err());
        assert!(classicality_check(1.0, -1.0, 1e-25).is_err());
    }

    proptest! {
        #[test]
        fn blur_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, dl in 0.0..5.0f64) {
            let grid = Grid::new(0.0, 10.0, 96).unwrap();
            let r = set(grid, &[|z| (-z).exp(), |z| (z * 0.7).cos()]);
            let combo: Vec<f64> = r.unit_values(0).iter().zip(r.unit_values(1)).map(|(x, y)| a * x + b * y).collect();
            let combo = ResponseSet::from_parts(grid, vec![combo], vec![1.0]).unwrap();
            let blurred = blur_free_expansion(&r, dl).unwrap();
            let blurred_combo = blur_free_expansion(&combo, dl).unwrap();
            for (k, v) in blurred_combo.unit_values(0).iter().enumerate() {
                let want = a * blurred.unit_values(0)[k] + b * blurred.unit_values(1)[k];
                prop_assert!((v - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }

        #[test]
        fn mixing_is_idempotent(c in proptest::collection::vec(-2.0..2.0f64, 3)) {
            let grid = Grid::new(0.0, 10.0, 50).unwrap();
            let v: Vec<f64> = grid.points().into_iter().map(|z| c[0] + c[1] * z + c[2] * z * z).collect();
            let r = ResponseSet::from_parts(grid, vec![v], vec![1.0]).unwrap();
            for norm in [MixNorm::Excitation, MixNorm::Amplitude] {
                let once = mix_uniform(&r, norm).unwrap();
                let twice = mix_uniform(&once, norm).unwrap();
                for (x, y) in once.unit_values(0).iter().zip(twice.unit_values(0)) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }
}
