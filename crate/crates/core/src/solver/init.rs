use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::degradation::DegradationOps;
use crate::error::{ensure_dims, Result};
use crate::linalg::{truncated_svd, Mat};
use crate::model::{btd_reconstruct, BtdFactors, RankSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy<T> {
    RandomUniform,
    SvdWarm,
    Provided(BtdFactors<T>),
}

fn uniform_mat<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<T> {
    Mat::from_fn(rows, cols, |_, _| T::lit(rng.random::<f64>()))
}

/// Rescales `C` so the MSI predicted by the factors has the same Frobenius
/// norm as the observed MSI. The prediction is linear in `C`, so the match
/// is exact unless the prediction vanishes.
fn match_msi_energy<T: Scalar>(
    f: &mut BtdFactors<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
) -> Result<()> {
    let predicted = BtdFactors {
        c: ops.p3.matmul(&f.c)?,
        ..f.clone()
    };
    let norm = btd_reconstruct(&predicted)?.frob_norm();
    let target = msi.frob_norm();
    if norm > T::zero() && target > T::zero() {
        f.c = f.c.scale(target / norm);
    }
    Ok(())
}

/// Initial factors for an `I_M × J_M × K_H` estimate.
///
/// * `RandomUniform`: i.i.d. `U(0, 1)` entries from `ChaCha8Rng(seed)`
///   (A, then B, then C, column-major), then `C` rescaled so the predicted
///   MSI matches `‖Y_M‖_F`.
/// * `SvdWarm`: block `r` takes the leading `L_r` singular pairs of MSI
///   band `r mod K_M` (absolute values, split as `U√σ`, `V√σ`); each `c_r`
///   is the mean HSI spectrum with a seeded ±10% jitter; `C` rescaled as
///   above.
/// * `Provided`: returned unchanged after a shape check.
pub fn init_factors<T: Scalar>(
    hsi: &Tensor3<T>,
    msi: &Tensor3<T>,
    ops: &DegradationOps<T>,
    rank: &RankSpec,
    seed: u64,
    strategy: &InitStrategy<T>,
) -> Result<BtdFactors<T>> {
    ops.check_pair(hsi, msi)?;
    let [i_m, j_m, k_h] = ops.sri_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rank.total();
    let blocks = rank.blocks();
    match strategy {
        InitStrategy::RandomUniform => {
            let a = uniform_mat(&mut rng, i_m, total);
            let b = uniform_mat(&mut rng, j_m, total);
            let c = uniform_mat(&mut rng, k_h, blocks);
            let mut f = BtdFactors::new(a, b, c, rank.clone())?;
            match_msi_energy(&mut f, msi, ops)?;
            Ok(f)
        }
        InitStrategy::SvdWarm => {
            let k_m = msi.dims()[2];
            let mut a = Mat::zeros(i_m, total);
            let mut b = Mat::zeros(j_m, total);
            for (r, (off, width)) in rank.partition().ranges().enumerate() {
                let (u, sigma, v) = truncated_svd(&msi.slab(r % k_m), width)?;
                for l in 0..width {
                    let s = sigma.get(l).copied().unwrap_or(T::zero()).sqrt();
                    let filler = T::lit(1e-3) * s.max(T::one());
                    for i in 0..i_m {
                        let val = if l < u.cols() {
                            u[(i, l)].abs() * s
                        } else {
                            T::zero()
                        };
                        a[(i, off + l)] = if val > T::zero() {
                            val
                        } else {
                            filler * T::lit(rng.random::<f64>())
                        };
                    }
                    for j in 0..j_m {
                        let val = if l < v.cols() {
                            v[(j, l)].abs() * s
                        } else {
                            T::zero()
                        };
                        b[(j, off + l)] = if val > T::zero() {
                            val
                        } else {
                            filler * T::lit(rng.random::<f64>())
                        };
                    }
                }
            }
            let [i_h, j_h, _] = hsi.dims();
            let pixels = T::from_usize_lossy(i_h * j_h);
            let mean: Vec<T> = (0..k_h)
                .map(|k| hsi.slab(k).data().iter().copied().sum::<T>() / pixels)
                .collect();
            let c = Mat::from_fn(k_h, blocks, |k, _| {
                let jitter = T::one() + T::lit(0.2 * (rng.random::<f64>() - 0.5));
                (mean[k] * jitter).max(T::zero())
            });
            let mut f = BtdFactors::new(a, b, c, rank.clone())?;
            match_msi_energy(&mut f, msi, ops)?;
            Ok(f)
        }
        InitStrategy::Provided(f) => {
            f.validate()?;
            ensure_dims!(
                f.dims() == ops.sri_dims(),
                "provided factors describe a {:?} image, expected {:?}",
                f.dims(),
                ops.sri_dims()
            );
            ensure_dims!(
                &f.rank == rank,
                "provided factors have block ranks {:?}, configuration asks for {:?}",
                f.rank.block_ranks(),
                rank.block_ranks()
            );
            Ok(f.clone())
        }
    }
}
