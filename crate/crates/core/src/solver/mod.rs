//! Coupled HSI/MSI fusion solvers.
//!
//! All methods fit factors `(A, B, C)` of the super-resolution image by
//! block coordinate descent over `A → B → C`:
//!
//! * `CnnBtd`: nonnegative rank-`(L_r, L_r, 1)` blocks, each block update by
//!   [`admm_nn_block`].
//! * `CnnCpd`: the same with every `L_r = 1`.
//! * `Stereo`: unconstrained coupled CPD, each block solved exactly.
//! * `TwoStage`: BTD of the MSI alone, then the spectra from the HSI by
//!   linear least squares ([`two_stage_recover`]).

mod admm;
mod init;
mod subproblem;
mod sylvester;

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use admm::{admm_nn_block, feasibility_gap};
pub use init::{init_factors, InitStrategy};
pub use subproblem::{build_subproblem, objective, AdmmWorkspace, Block, Rho};
pub use sylvester::{
    sylvester_residual, sylvester_solve, sylvester_solve_dense, SylvesterSolver,
    DENSE_MAX_UNKNOWNS, RESIDUAL_TOL,
};

use crate::degradation::DegradationOps;
use crate::error::{ensure_arg, ensure_dims, Error, Result};
use crate::linalg::{least_squares, Mat};
use crate::model::{abundances, btd_reconstruct, BtdFactors, RankSpec};
use crate::scalar::Scalar;
use crate::tensor::{Mode, Tensor3};
use subproblem::{
    block_value, build_subproblem_on, objective_on, raw_subproblem, store_block, Coupled,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CnnBtd,
    CnnCpd,
    Stereo,
    TwoStage,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CnnBtd => "cnn_btd",
            Method::CnnCpd => "cnn_cpd",
            Method::Stereo => "stereo",
            Method::TwoStage => "two_stage",
        }
    }

    pub fn is_constrained(self) -> bool {
        !matches!(self, Method::Stereo)
    }

    /// Rank actually fitted: the CPD methods use `R` rank-one blocks.
    pub fn effective_rank(self, rank: &RankSpec) -> RankSpec {
        match self {
            Method::CnnCpd | Method::Stereo => RankSpec::cpd(rank.blocks()).expect("blocks >= 1"),
            Method::CnnBtd | Method::TwoStage => rank.clone(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cnn_btd" => Ok(Method::CnnBtd),
            "cnn_cpd" => Ok(Method::CnnCpd),
            "stereo" => Ok(Method::Stereo),
            "two_stage" => Ok(Method::TwoStage),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?}; expected cnn_btd, cnn_cpd, stereo or two_stage"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig<T> {
    pub method: Method,
    pub rank: RankSpec,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub rho: Rho,
    /// Stop once a full sweep changes `J` by less than this relative
    /// amount; `0` disables the test.
    pub tol: f64,
    pub seed: u64,
    pub init: InitStrategy<T>,
}

impl<T: Scalar> FusionConfig<T> {
    /// 100 sweeps for `Stereo`, 20 otherwise; 5 ADMM iterations per block.
    pub fn new(method: Method, rank: RankSpec) -> Self {
        FusionConfig {
            method,
            rank,
            outer_iters: if method == Method::Stereo { 100 } else { 20 },
            inner_iters: 5,
            rho: Rho::Auto,
            tol: 0.0,
            seed: 0,
            init: InitStrategy::RandomUniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.outer_iters >= 1, "outer_iters must be at least 1");
        ensure_arg!(
            !self.method.is_constrained() || self.inner_iters >= 1,
            "inner_iters must be at least 1 for {}",
            self.method
        );
        ensure_arg!(
            self.tol >= 0.0 && self.tol.is_finite(),
            "tol must be finite and >= 0, got {}",
            self.tol
        );
        if let Rho::Fixed(v) = self.rho {
            ensure_arg!(
                v > 0.0 && v.is_finite(),
                "rho must be positive and finite, got {v}"
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult<T> {
    pub factors: BtdFactors<T>,
    pub sri_estimate: Tensor3<T>,
    /// `J` at the initial point and after every block update. For
    /// [`two_stage_recover`] these are the MSI-only objectives of the first
    /// stage followed by the coupled `J` of the final estimate.
    pub objective_trace: Vec<f64>,
    /// Completed BCD sweeps.
    pub iters_run: usize,
    pub wall_time_s: f64,
}

impl<T: Scalar> FusionResult<T> {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("objective trace is never empty")
    }
}

/// Relative diagonal jitter for singular exact block solves.
const JITTER: f64 = 1e-12;

fn exact_block_solve<T: Scalar>(
    block: Block,
    f: &BtdFactors<T>,
    data: Coupled<'_, T>,
) -> Result<Mat<T>> {
    let mut raw = raw_subproblem(block, f, data)?;
    match sylvester_solve(&raw.h1, &raw.h2, &raw.h3, &raw.h4, &raw.h5) {
        Err(Error::Singular(msg)) => {
            let target = raw.penalty_target_mut(block);
            let n = target.rows().max(1);
            let jitter = T::lit(JITTER)
                * (target.trace() / T::from_usize_lossy(n)).max(T::min_positive_value());
            log::warn!(
                "block {block:?} is singular ({msg}); adding diagonal jitter {:e}",
                jitter.as_f64()
            );
            target.add_diag(jitter);
            sylvester_solve(&raw.h1, &raw.h2, &raw.h3, &raw.h4, &raw.h5)
        }
        other => other,
    }
}

/// Block coordinate descent shared by the coupled methods and the MSI-only
/// first stage of the two-stage recovery.
fn run_bcd<T: Scalar>(
    mut f: BtdFactors<T>,
    data: Coupled<'_, T>,
    constrained: bool,
    cfg: &FusionConfig<T>,
) -> Result<(BtdFactors<T>, Vec<f64>, usize)> {
    let mut trace = vec![objective_on(&f, data)?.as_f64()];
    let mut duals: [Option<(Mat<T>, T)>; 3] = [None, None, None];
    let mut sweeps = 0;
    for _ in 0..cfg.outer_iters {
        let before = *trace.last().unwrap();
        for block in Block::CYCLE {
            let x = if constrained {
                let mut ws = build_subproblem_on(block, &f, data, cfg.rho)?;
                if let Some((u, rho_prev)) = &duals[block.index()] {
                    ws.warm_dual(u, *rho_prev);
                }
                let (z, ws) = admm_nn_block(ws, cfg.inner_iters)?;
                duals[block.index()] = Some((ws.u, ws.rho));
                z
            } else {
                exact_block_solve(block, &f, data)?
            };
            store_block(&mut f, block, &x);
            let j = objective_on(&f, data)?.as_f64();
            trace.push(j);
            if !j.is_finite() {
                return Err(Error::NonFinite { trace });
            }
        }
        sweeps += 1;
        let after = *trace.last().unwrap();
        if cfg.tol > 0.0 && (before - after).abs() <= cfg.tol * before.abs().max(f64::MIN_POSITIVE)
        {
            break;
        }
    }
    Ok((f, trace, sweeps))
}

/// Fits the coupled model by block coordinate descent (`CnnBtd`, `CnnCpd`,
/// `Stereo`); `TwoStage` is forwarded to [`two_stage_recover`].
pub fn bcd_fuse<T: Scalar>(
    hsi: &Tensor3<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
    cfg: &FusionConfig<T>,
) -> Result<FusionResult<T>> {
    if cfg.method == Method::TwoStage {
        return two_stage_recover(hsi, msi, ops, cfg);
    }
    cfg.validate()?;
    ops.check_pair(hsi, msi)?;
    let start = Instant::now();
    let rank = cfg.method.effective_rank(&cfg.rank);
    let init = init_factors(hsi, msi, ops, &rank, cfg.seed, &cfg.init)?;
    let data = Coupled {
        hsi: Some(hsi),
        msi,
        ops,
    };
    let (factors, objective_trace, iters_run) =
        run_bcd(init, data, cfg.method.is_constrained(), cfg)?;
    let sri_estimate = btd_reconstruct(&factors)?;
    Ok(FusionResult {
        factors,
        sri_estimate,
        objective_trace,
        iters_run,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Solves `Y_H⁽³⁾ = W·Ĉᵀ` for the spectra, `W = (P2 ⊗ P1)·Ŝ` formed as
/// `[vec(P1·S_r·P2ᵀ)]_r`.
pub fn recover_spectra<T: Scalar>(
    spatial: &BtdFactors<T>,
    hsi: &Tensor3<T>,
    ops: &DegradationOps<T>,
) -> Result<Mat<T>> {
    let degraded = BtdFactors {
        a: ops.p1.matmul(&spatial.a)?,
        b: ops.p2.matmul(&spatial.b)?,
        c: spatial.c.clone(),
        rank: spatial.rank.clone(),
    };
    let w = abundances(&degraded)?.s;
    ensure_dims!(
        w.rows() == hsi.dims()[0] * hsi.dims()[1],
        "HSI has {} pixels, operators produce {}",
        hsi.dims()[0] * hsi.dims()[1],
        w.rows()
    );
    let ct = least_squares(&w, &hsi.unfold(Mode::Three)).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "the degraded abundance matrix (P2 ⊗ P1)·Ŝ must have full column rank: {msg}"
        )),
        other => other,
    })?;
    Ok(ct.transpose())
}

/// Two-stage recovery: fit `{A_r, B_r}` by nonnegative BTD of the MSI alone
/// (with an auxiliary `K_M × R` spectral factor), then recover `C` from the
/// HSI by least squares.
pub fn two_stage_recover<T: Scalar>(
    hsi: &Tensor3<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
    cfg: &FusionConfig<T>,
) -> Result<FusionResult<T>> {
    cfg.validate()?;
    ops.check_pair(hsi, msi)?;
    let start = Instant::now();
    let [i_h, j_h, _] = hsi.dims();
    let blocks = cfg.rank.blocks();
    ensure_arg!(
        i_h * j_h >= blocks,
        "two-stage recovery needs at least R = {blocks} HSI pixels, got {}",
        i_h * j_h
    );
    let init = init_factors(hsi, msi, ops, &cfg.rank, cfg.seed, &cfg.init)?;

    let k_m = msi.dims()[2];
    let msi_ops = DegradationOps::new(
        ops.p1.clone(),
        ops.p2.clone(),
        Mat::identity(k_m),
        ops.params.clone(),
    );
    let stage1_init = BtdFactors {
        c: ops.p3.matmul(&init.c)?,
        ..init
    };
    let data = Coupled {
        hsi: None,
        msi,
        ops: &msi_ops,
    };
    let (spatial, mut trace, iters_run) = run_bcd(stage1_init, data, true, cfg)?;

    let c = recover_spectra(&spatial, hsi, ops)?;
    let factors = BtdFactors::new(spatial.a, spatial.b, c, cfg.rank.clone())?;
    trace.push(objective(&factors, hsi, msi, ops)?.as_f64());
    let sri_estimate = btd_reconstruct(&factors)?;
    Ok(FusionResult {
        factors,
        sri_estimate,
        objective_trace: trace,
        iters_run,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Exposes the current value of a block in the orientation of its
/// subproblem unknown (`Cᵀ` for the spectral block).
pub fn block_unknown<T: Scalar>(f: &BtdFactors<T>, block: Block) -> Mat<T> {
    block_value(f, block)
}
