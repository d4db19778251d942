//! Hyperspectral super-resolution by coupled nonnegative block-term
//! decomposition.
//!
//! A low-resolution hyperspectral image (HSI) and a high-resolution
//! multispectral image (MSI) of the same scene are fused into an estimate of
//! the super-resolution image (SRI), modelled as a sum of rank-`(L_r, L_r, 1)`
//! terms `Σ_r (A_r B_rᵀ) ∘ c_r`.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the common instantiations.
//!
//! ```
//! use hsr_btd::{apply_degradation, bcd_fuse, DegradationOps, DegradationParams, FusionConfig, Method, RankSpec, Tensor3};
//!
//! let sri = Tensor3::from_fn([6, 6, 4], |i, j, k| 1.0 + ((i + 2 * j + 3 * k) % 5) as f64).unwrap();
//! let params = DegradationParams { kernel_size: 3, sigma: 1.0, ratio: 2, ..DegradationParams::wald_default() };
//! let ops = DegradationOps::wald([6, 6, 4], 2, &params).unwrap();
//! let (hsi, msi) = apply_degradation(&sri, &ops).unwrap();
//!
//! let mut cfg = FusionConfig::new(Method::CnnBtd, RankSpec::uniform(2, 2).unwrap());
//! cfg.outer_iters = 3;
//! let fit = bcd_fuse(&hsi, &msi, &ops, &cfg).unwrap();
//! assert_eq!(fit.sri_estimate.dims(), [6, 6, 4]);
//! ```

// `!(x <= tol)` is used on purpose so NaN lands on the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod degradation;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod synthetic;
pub mod tensor;

pub use degradation::{
    add_noise, apply_degradation, build_spatial_ops, downsample_matrix, gaussian_blur_matrix,
    parse_srf_csv, realized_snr_db, simulate_pair, uniform_srf, DegradationOps, DegradationParams,
    NoiseSpec, SrfSource, MSI_NOISE_STREAM,
};
pub use error::{Error, ErrorKind, Result};
pub use linalg::{khatri_rao, kronecker, pw_khatri_rao, Mat, Partition};
pub use metrics::{cc, ergas, evaluate, match_blocks, r_snr, sam, MatchResult, MetricsReport};
pub use model::{
    abundances, btd_reconstruct, btd_unfold_direct, check_btd_identifiability,
    check_coupled_identifiability, degrade_factors, AbundanceSet, BtdFactors, Clause,
    IdentifiabilityReport, RankSpec,
};
pub use scalar::Scalar;
pub use solver::{
    admm_nn_block, bcd_fuse, build_subproblem, init_factors, objective, sylvester_solve,
    two_stage_recover, AdmmWorkspace, Block, FusionConfig, FusionResult, InitStrategy, Method, Rho,
};
pub use synthetic::{perturb_factors, random_btd_factors};
pub use tensor::{Mode, Tensor3};

pub type MatF64 = Mat<f64>;
pub type Tensor3F64 = Tensor3<f64>;
pub type BtdFactorsF64 = BtdFactors<f64>;
pub type DegradationOpsF64 = DegradationOps<f64>;
pub type FusionConfigF64 = FusionConfig<f64>;
pub type FusionResultF64 = FusionResult<f64>;

pub type MatF32 = Mat<f32>;
pub type Tensor3F32 = Tensor3<f32>;
pub type BtdFactorsF32 = BtdFactors<f32>;
pub type DegradationOpsF32 = DegradationOps<f32>;
pub type FusionConfigF32 = FusionConfig<f32>;
pub type FusionResultF32 = FusionResult<f32>;
