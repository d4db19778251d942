//! Per-block quadratic subproblems of the coupled objective
//!
//! `J(A,B,C) = ‖Y_H − Σ_r (P1A_r)(P2B_r)ᵀ ∘ c_r‖² + ‖Y_M − Σ_r A_rB_rᵀ ∘ P3c_r‖²`
//!
//! With the other two blocks fixed, the stationarity condition of each block
//! (plus the ADMM proximal term `ρ/2·‖X − Z − U‖²`) is a Sylvester equation
//! `H1·X·H2 + H3·X·H4 = H̃5 + ρ(Z + U)`:
//!
//! | block | unknown | H1            | H2     | H3      | H4          |
//! |-------|---------|---------------|--------|---------|-------------|
//! | A     | `A`     | `P1ᵀP1`       | `GᵀG`  | `I`     | `MᵀM + ρI`  |
//! | B     | `B`     | `P2ᵀP2`       | `GᵀG`  | `I`     | `MᵀM + ρI`  |
//! | C     | `Cᵀ`    | `W_HᵀW_H + ρI`| `I`    | `W_MᵀW_M`| `P3ᵀP3`    |
//!
//! where for A: `G = C ⊙ₚ P2B`, `M = P3C ⊙ₚ B`; for B: `G = C ⊙ₚ P1A`,
//! `M = P3C ⊙ₚ A`; and for C: `W_H = [vec(P1A_r(P2B_r)ᵀ)]_r`,
//! `W_M = [vec(A_rB_rᵀ)]_r`.

use serde::{Deserialize, Serialize};

use crate::degradation::DegradationOps;
use crate::error::{ensure_arg, Result};
use crate::linalg::{pw_khatri_rao, Mat, SymmetricEigen};
use crate::model::{abundances, btd_reconstruct, degrade_factors, BtdFactors};
use crate::scalar::Scalar;
use crate::tensor::{Mode, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    A,
    B,
    C,
}

impl Block {
    pub const CYCLE: [Block; 3] = [Block::A, Block::B, Block::C];

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// ADMM penalty selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho {
    /// Mean diagonal of the Gram term that receives `ρ·I`
    /// (`trace(MᵀM)/ΣL` for A and B, `trace(W_HᵀW_H)/R` for C),
    /// recomputed for every block update.
    Auto,
    /// `√(λ_min·λ_max)` of the same Gram term (floored at `1e-6·λ_max`).
    /// Converges faster than `Auto` on ill-conditioned blocks, at the cost
    /// of one symmetric eigendecomposition per block update.
    Balanced,
    Fixed(f64),
}

/// Coefficients of one block subproblem plus the ADMM split state.
#[derive(Debug, Clone)]
pub struct AdmmWorkspace<T> {
    pub block: Block,
    pub h1: Mat<T>,
    pub h2: Mat<T>,
    pub h3: Mat<T>,
    pub h4: Mat<T>,
    /// `H̃5`, the right-hand side before the proximal term.
    pub h5_base: Mat<T>,
    pub rho: T,
    /// Split variable, kept nonnegative.
    pub z: Mat<T>,
    /// Scaled dual variable.
    pub u: Mat<T>,
    /// Last unconstrained iterate.
    pub x: Mat<T>,
}

impl<T: Scalar> AdmmWorkspace<T> {
    /// Carries a dual from an earlier update of the same block, rescaled for
    /// the current penalty.
    pub fn warm_dual(&mut self, u: &Mat<T>, rho_prev: T) {
        if u.shape() == self.u.shape() && rho_prev > T::zero() && self.rho > T::zero() {
            self.u = u.scale(rho_prev / self.rho);
        }
    }
}

/// Data of a (possibly MSI-only) coupled fit.
#[derive(Clone, Copy)]
pub(crate) struct Coupled<'a, T> {
    pub hsi: Option<&'a Tensor3<T>>,
    pub msi: &'a Tensor3<T>,
    pub ops: &'a DegradationOps<T>,
}

/// Current value of `block` in the orientation of its unknown.
pub(crate) fn block_value<T: Scalar>(f: &BtdFactors<T>, block: Block) -> Mat<T> {
    match block {
        Block::A => f.a.clone(),
        Block::B => f.b.clone(),
        Block::C => f.c.transpose(),
    }
}

pub(crate) fn store_block<T: Scalar>(f: &mut BtdFactors<T>, block: Block, x: &Mat<T>) {
    match block {
        Block::A => f.a = x.clone(),
        Block::B => f.b = x.clone(),
        Block::C => f.c = x.transpose(),
    }
}

/// Coefficients without any penalty; `penalty_term` is the Gram matrix that
/// `ρ·I` is added to (H4 for A/B, H1 for C).
pub(crate) struct RawSubproblem<T> {
    pub h1: Mat<T>,
    pub h2: Mat<T>,
    pub h3: Mat<T>,
    pub h4: Mat<T>,
    pub h5: Mat<T>,
}

impl<T: Scalar> RawSubproblem<T> {
    pub fn penalty_target_mut(&mut self, block: Block) -> &mut Mat<T> {
        match block {
            Block::A | Block::B => &mut self.h4,
            Block::C => &mut self.h1,
        }
    }

    fn penalty_target(&self, block: Block) -> &Mat<T> {
        match block {
            Block::A | Block::B => &self.h4,
            Block::C => &self.h1,
        }
    }

    pub fn auto_rho(&self, block: Block) -> T {
        let m = self.penalty_target(block);
        m.trace() / T::from_usize_lossy(m.rows().max(1))
    }

    pub fn balanced_rho(&self, block: Block) -> Result<T> {
        let eig = SymmetricEigen::new(self.penalty_target(block))?;
        let lmax = eig.values.iter().fold(T::zero(), |acc, &v| acc.max(v));
        let lmin = eig
            .values
            .iter()
            .fold(lmax, |acc, &v| acc.min(v))
            .max(lmax * T::lit(1e-6));
        Ok((lmin * lmax).sqrt())
    }
}

pub(crate) fn raw_subproblem<T: Scalar>(
    block: Block,
    f: &BtdFactors<T>,
    data: Coupled<'_, T>,
) -> Result<RawSubproblem<T>> {
    let ops = data.ops;
    let part = f.rank.partition();
    let p3c = ops.p3.matmul(&f.c)?;
    match block {
        Block::A | Block::B => {
            let (p, own_mode, other, p_other) = match block {
                Block::A => (&ops.p1, Mode::One, &f.b, &ops.p2),
                _ => (&ops.p2, Mode::Two, &f.a, &ops.p1),
            };
            let m = pw_khatri_rao(&p3c, other, part)?;
            let h4 = m.gram();
            let mut h5 = data.msi.unfold(own_mode).t_matmul(&m)?;
            let n_rows = p.cols();
            let (h1, h2) = match data.hsi {
                Some(hsi) => {
                    let g = pw_khatri_rao(&f.c, &p_other.matmul(other)?, part)?;
                    let h5_hsi = p.t_matmul(&hsi.unfold(own_mode).t_matmul(&g)?)?;
                    h5 = h5.add(&h5_hsi)?;
                    (p.gram(), g.gram())
                }
                None => (
                    Mat::zeros(n_rows, n_rows),
                    Mat::zeros(part.total(), part.total()),
                ),
            };
            Ok(RawSubproblem {
                h1,
                h2,
                h3: Mat::identity(n_rows),
                h4,
                h5,
            })
        }
        Block::C => {
            let r = f.rank.blocks();
            let w_m = abundances(f)?.s;
            let h3 = w_m.gram();
            let h4 = ops.p3.gram();
            let mut h5 = w_m
                .t_matmul(&data.msi.unfold(Mode::Three))?
                .matmul(&ops.p3)?;
            let h1 = match data.hsi {
                Some(hsi) => {
                    let (hsi_f, _) = degrade_factors(f, ops)?;
                    let w_h = abundances(&hsi_f)?.s;
                    h5 = h5.add(&w_h.t_matmul(&hsi.unfold(Mode::Three))?)?;
                    w_h.gram()
                }
                None => Mat::zeros(r, r),
            };
            Ok(RawSubproblem {
                h1,
                h2: Mat::identity(ops.p3.cols()),
                h3,
                h4,
                h5,
            })
        }
    }
}

fn resolve_rho<T: Scalar>(raw: &RawSubproblem<T>, block: Block, rho: Rho) -> Result<T> {
    let value = match rho {
        Rho::Auto => raw.auto_rho(block),
        Rho::Balanced => raw.balanced_rho(block)?,
        Rho::Fixed(v) => {
            ensure_arg!(
                v > 0.0 && v.is_finite(),
                "rho must be positive and finite, got {v}"
            );
            T::lit(v)
        }
    };
    // an all-zero Gram term (e.g. zero factors) still needs a usable penalty
    Ok(if value > T::zero() { value } else { T::one() })
}

pub(crate) fn build_subproblem_on<T: Scalar>(
    block: Block,
    f: &BtdFactors<T>,
    data: Coupled<'_, T>,
    rho: Rho,
) -> Result<AdmmWorkspace<T>> {
    let mut raw = raw_subproblem(block, f, data)?;
    let rho = resolve_rho(&raw, block, rho)?;
    raw.penalty_target_mut(block).add_diag(rho);
    let z = block_value(f, block);
    let u = Mat::zeros(z.rows(), z.cols());
    Ok(AdmmWorkspace {
        block,
        h1: raw.h1,
        h2: raw.h2,
        h3: raw.h3,
        h4: raw.h4,
        h5_base: raw.h5,
        rho,
        x: z.clone(),
        z,
        u,
    })
}

/// Assembles the ADMM subproblem for `block` with the others fixed at `f`.
/// `Z` starts at the current block value and `U` at zero.
pub fn build_subproblem<T: Scalar>(
    block: Block,
    f: &BtdFactors<T>,
    hsi: &Tensor3<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
    rho: Rho,
) -> Result<AdmmWorkspace<T>> {
    f.validate()?;
    ops.check_pair(hsi, msi)?;
    check_factor_dims(f, ops)?;
    build_subproblem_on(
        block,
        f,
        Coupled {
            hsi: Some(hsi),
            msi,
            ops,
        },
        rho,
    )
}

pub(crate) fn check_factor_dims<T: Scalar>(
    f: &BtdFactors<T>,
    ops: &DegradationOps<T>,
) -> Result<()> {
    crate::error::ensure_dims!(
        f.dims() == ops.sri_dims(),
        "factors describe a {:?} image but the operators expect {:?}",
        f.dims(),
        ops.sri_dims()
    );
    Ok(())
}

pub(crate) fn objective_on<T: Scalar>(f: &BtdFactors<T>, data: Coupled<'_, T>) -> Result<T> {
    let (hsi_f, msi_f) = degrade_factors(f, data.ops)?;
    let msi_term = data.msi.sub(&btd_reconstruct(&msi_f)?)?.frob_norm_sq();
    let hsi_term = match data.hsi {
        Some(hsi) => hsi.sub(&btd_reconstruct(&hsi_f)?)?.frob_norm_sq(),
        None => T::zero(),
    };
    Ok(hsi_term + msi_term)
}

/// Coupled least-squares objective `J(A, B, C)`.
pub fn objective<T: Scalar>(
    f: &BtdFactors<T>,
    hsi: &Tensor3<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
) -> Result<T> {
    f.validate()?;
    ops.check_pair(hsi, msi)?;
    check_factor_dims(f, ops)?;
    objective_on(
        f,
        Coupled {
            hsi: Some(hsi),
            msi,
            ops,
        },
    )
}
