//! Mode analysis of a high-speed quantum memory on an atomic ensemble.
//!
//! The crate samples the closed-form write and read kernels of the memory,
//! decomposes the full-cycle kernel into Schmidt modes, follows the spatial
//! spin-wave response functions through a storage stage with thermal atomic
//! motion (Maxwell free expansion or complete mixing), and evaluates overlap
//! matrices, retrieved pulse shapes, efficiencies and the re-optimized modes
//! of the cycle with mobile atoms.
//!
//! All coordinates are dimensionless: time in units of the inverse Rabi
//! frequency of the driving field, length in units of effective optical depth.

pub mod cycle;
pub mod error;
pub mod kernel;
pub mod numerics;
pub mod peaks;
pub mod spectral;
pub mod storage;

pub use cycle::{
    efficiency_direct, efficiency_overlap, optimized_cycle, output_profile, overlap_matrix, response_functions,
    MemoryCycle, OptimizedCycle, OverlapMatrix, ResponseSet,
};
pub use error::{Error, Result};
pub use kernel::{
    build_cycle_kernel, build_half_kernel, half_kernel_point, symmetrize_asymmetric, symmetrize_kernels, CycleParams,
    SampledKernel, Stage, SymmetrizedCycle,
};
pub use numerics::{Grid, SampledFunction};
pub use spectral::{
    project, reconstruct_kernel, scaled_retrieval_modes, schmidt_decompose, singular_decompose, ModeSet, SingularModes,
};
pub use storage::{CoordinateTransform, MixNorm, ScalingMap, StorageModel};

/// Number of Schmidt modes retained by default.
pub const DEFAULT_MODES: usize = 10;
