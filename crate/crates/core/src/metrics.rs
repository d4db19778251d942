//! Fusion quality metrics and block matching for identifiability studies.
//!
//! * R-SNR: `10·log10(‖Y‖² / ‖Y − Ŷ‖²)`, capped at [`R_SNR_CAP_DB`].
//! * SAM: mean spectral angle (radians) over pixels with nonzero spectra.
//! * CC: band-averaged Pearson correlation.
//! * ERGAS: `(100/d)·sqrt(mean_k RMSE_k² / μ_k²)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, ensure_dims, Error, Result};
use crate::model::{abundances, BtdFactors};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

/// Value reported when the estimate reproduces the reference exactly.
pub const R_SNR_CAP_DB: f64 = 300.0;

/// Largest block count accepted by [`match_blocks`] (exact subset DP).
pub const MAX_MATCH_BLOCKS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r_snr_db: f64,
    pub cc: f64,
    pub sam_rad: f64,
    pub ergas: f64,
    pub down_ratio: f64,
}

fn same_dims<T: Scalar>(reference: &Tensor3<T>, estimate: &Tensor3<T>) -> Result<()> {
    ensure_dims!(
        reference.dims() == estimate.dims(),
        "reference is {:?} but estimate is {:?}",
        reference.dims(),
        estimate.dims()
    );
    Ok(())
}

pub fn r_snr<T: Scalar>(reference: &Tensor3<T>, estimate: &Tensor3<T>) -> Result<T> {
    same_dims(reference, estimate)?;
    let signal = reference.frob_norm_sq();
    ensure_arg!(signal > T::zero(), "R-SNR needs a nonzero reference");
    let err = reference.sub(estimate)?.frob_norm_sq();
    let cap = T::lit(R_SNR_CAP_DB);
    if err == T::zero() {
        return Ok(cap);
    }
    Ok((T::lit(10.0) * (signal / err).log10()).min(cap))
}

pub fn sam<T: Scalar>(reference: &Tensor3<T>, estimate: &Tensor3<T>) -> Result<T> {
    same_dims(reference, estimate)?;
    let [ni, nj, _] = reference.dims();
    let mut total = T::zero();
    let mut counted = 0usize;
    for j in 0..nj {
        for i in 0..ni {
            let y = reference.fiber(i, j);
            let yh = estimate.fiber(i, j);
            let ny = y.iter().map(|&v| v * v).sum::<T>().sqrt();
            let nyh = yh.iter().map(|&v| v * v).sum::<T>().sqrt();
            if ny == T::zero() || nyh == T::zero() {
                continue;
            }
            // 2·atan2(‖u − v‖, ‖u + v‖) for unit u, v stays accurate near 0 and π
            let (mut dn, mut sn) = (T::zero(), T::zero());
            for (&a, &b) in y.iter().zip(&yh) {
                let (u, v) = (a / ny, b / nyh);
                dn += (u - v) * (u - v);
                sn += (u + v) * (u + v);
            }
            total += T::lit(2.0) * dn.sqrt().atan2(sn.sqrt());
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "SAM: every pixel has a zero spectrum".into(),
        ));
    }
    Ok(total / T::from_usize_lossy(counted))
}

pub fn cc<T: Scalar>(reference: &Tensor3<T>, estimate: &Tensor3<T>) -> Result<T> {
    same_dims(reference, estimate)?;
    let [ni, nj, nk] = reference.dims();
    let n = ni * nj;
    let nt = T::from_usize_lossy(n);
    let mut total = T::zero();
    for k in 0..nk {
        let a = &reference.data()[k * n..(k + 1) * n];
        let b = &estimate.data()[k * n..(k + 1) * n];
        let ma = a.iter().copied().sum::<T>() / nt;
        let mb = b.iter().copied().sum::<T>() / nt;
        let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
        for (&x, &y) in a.iter().zip(b) {
            let (dx, dy) = (x - ma, y - mb);
            sab += dx * dy;
            saa += dx * dx;
            sbb += dy * dy;
        }
        if saa == T::zero() {
            return Err(Error::UndefinedMetric(format!(
                "CC: reference band {k} is constant"
            )));
        }
        if sbb == T::zero() {
            continue;
        }
        total += sab / (saa.sqrt() * sbb.sqrt());
    }
    Ok(total / T::from_usize_lossy(nk))
}

/// `d` is the spatial downsampling ratio `I_M / I_H`.
pub fn ergas<T: Scalar>(reference: &Tensor3<T>, estimate: &Tensor3<T>, d: T) -> Result<T> {
    same_dims(reference, estimate)?;
    ensure_arg!(d > T::zero(), "ERGAS ratio must be positive");
    let [ni, nj, nk] = reference.dims();
    let n = ni * nj;
    let nt = T::from_usize_lossy(n);
    let mut acc = T::zero();
    for k in 0..nk {
        let a = &reference.data()[k * n..(k + 1) * n];
        let b = &estimate.data()[k * n..(k + 1) * n];
        let mean = a.iter().copied().sum::<T>() / nt;
        if mean == T::zero() {
            return Err(Error::UndefinedMetric(format!(
                "ERGAS: reference band {k} has zero mean"
            )));
        }
        let mse = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / nt;
        acc += mse / (mean * mean);
    }
    Ok(T::lit(100.0) / d * (acc / T::from_usize_lossy(nk)).sqrt())
}

pub fn evaluate<T: Scalar>(
    reference: &Tensor3<T>,
    estimate: &Tensor3<T>,
    d: f64,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        r_snr_db: r_snr(reference, estimate)?.as_f64(),
        cc: cc(reference, estimate)?.as_f64(),
        sam_rad: sam(reference, estimate)?.as_f64(),
        ergas: ergas(reference, estimate, T::lit(d))?.as_f64(),
        down_ratio: d,
    })
}

/// Optimal pairing of estimated blocks with true blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// `permutation[r]` is the true block matched to estimated block `r`.
    pub permutation: Vec<usize>,
    /// `Ŝ_r ≈ scales[r] · S_{permutation[r]}`.
    pub scales: Vec<f64>,
    /// `Σ_r ‖λ_r S_{π(r)} − Ŝ_r‖² / ‖S‖²`.
    pub matched_error: f64,
}

/// Resolves the permutation/scaling ambiguity between the abundance maps of
/// two factorizations by exact assignment over the `R × R` cost matrix.
pub fn match_blocks<T: Scalar>(truth: &BtdFactors<T>, est: &BtdFactors<T>) -> Result<MatchResult> {
    let r = truth.rank.blocks();
    ensure_dims!(
        est.rank.blocks() == r,
        "truth has {r} blocks, estimate has {}",
        est.rank.blocks()
    );
    ensure_dims!(
        truth.a.rows() == est.a.rows() && truth.b.rows() == est.b.rows(),
        "spatial sizes differ: {:?} vs {:?}",
        truth.dims(),
        est.dims()
    );
    ensure_arg!(
        r <= MAX_MATCH_BLOCKS,
        "block matching supports at most {MAX_MATCH_BLOCKS} blocks, got {r}"
    );
    let s = abundances(truth)?.s;
    let sh = abundances(est)?.s;
    let col = |m: &crate::linalg::Mat<T>, c: usize| -> Vec<f64> {
        m.col(c).iter().map(|v| v.as_f64()).collect()
    };
    let sc: Vec<Vec<f64>> = (0..r).map(|c| col(&s, c)).collect();
    let shc: Vec<Vec<f64>> = (0..r).map(|c| col(&sh, c)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // cost[t][e]: est block e explained by truth block t with its best scale
    let mut cost = vec![vec![0.0; r]; r];
    let mut scale = vec![vec![1.0; r]; r];
    for t in 0..r {
        let nt = dot(&sc[t], &sc[t]);
        for e in 0..r {
            let ne = dot(&shc[e], &shc[e]);
            if nt > 0.0 {
                let ip = dot(&sc[t], &shc[e]);
                scale[t][e] = ip / nt;
                cost[t][e] = (ne - ip * ip / nt).max(0.0);
            } else {
                cost[t][e] = ne;
            }
        }
    }

    // Subset DP: best[mask] = min cost assigning est blocks 0..popcount(mask)
    // to the truth blocks in `mask`.
    let full = 1usize << r;
    let mut best = vec![f64::INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if !best[mask].is_finite() {
            continue;
        }
        let e = mask.count_ones() as usize;
        if e == r {
            continue;
        }
        for t in 0..r {
            if mask & (1 << t) != 0 {
                continue;
            }
            let next = mask | (1 << t);
            let v = best[mask] + cost[t][e];
            if v < best[next] {
                best[next] = v;
                choice[next] = t;
            }
        }
    }
    let mut permutation = vec![0; r];
    let mut mask = full - 1;
    for e in (0..r).rev() {
        let t = choice[mask];
        permutation[e] = t;
        mask &= !(1 << t);
    }
    let scales = (0..r).map(|e| scale[permutation[e]][e]).collect();
    let norm = s.frob_norm_sq().as_f64();
    let matched_error = if norm > 0.0 {
        best[full - 1] / norm
    } else {
        best[full - 1]
    };
    Ok(MatchResult {
        permutation,
        scales,
        matched_error,
    })
}
