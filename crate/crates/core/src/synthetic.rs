//! Seeded synthetic scenes for tests, demos and the `generate` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_arg, Result};
use crate::linalg::Mat;
use crate::model::{BtdFactors, RankSpec};
use crate::scalar::Scalar;

/// Factors of an `I × J × K` image with i.i.d. `U(0, 1)` entries
/// (A, then B, then C, column-major).
pub fn random_btd_factors<T: Scalar>(
    dims: [usize; 3],
    rank: &RankSpec,
    seed: u64,
) -> Result<BtdFactors<T>> {
    ensure_arg!(
        dims.iter().all(|&d| d >= 1),
        "dimensions must be positive, got {dims:?}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows, cols| Mat::from_fn(rows, cols, |_, _| T::lit(rng.random::<f64>()));
    let a = draw(dims[0], rank.total());
    let b = draw(dims[1], rank.total());
    let c = draw(dims[2], rank.blocks());
    BtdFactors::new(a, b, c, rank.clone())
}

/// Adds Gaussian noise of Frobenius norm `rel · ‖F‖` to each factor matrix
/// (in expectation) and clips at zero so nonnegative factors stay feasible.
pub fn perturb_factors<T: Scalar>(f: &BtdFactors<T>, rel: f64, seed: u64) -> Result<BtdFactors<T>> {
    ensure_arg!(
        rel >= 0.0 && rel.is_finite(),
        "perturbation level must be finite and >= 0, got {rel}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |m: &Mat<T>| {
        let std = rel * m.frob_norm().as_f64() / (m.data().len().max(1) as f64).sqrt();
        let mut out = m.clone();
        for v in out.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (*v + T::lit(std * z)).max(T::zero());
        }
        out
    };
    let a = jitter(&f.a);
    let b = jitter(&f.b);
    let c = jitter(&f.c);
    BtdFactors::new(a, b, c, f.rank.clone())
}
