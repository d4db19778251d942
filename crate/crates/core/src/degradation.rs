//! Degradation operators that produce an HSI/MSI pair from a reference image:
//! separable Gaussian blur with downsampling along each spatial axis (P1, P2),
//! spectral band averaging (P3), and additive white Gaussian noise at a
//! target SNR.
//!
//! Noise is drawn from `ChaCha8Rng::seed_from_u64(seed)` through
//! `rand_distr::StandardNormal`, one `f64` sample per element in flat order.
//! The stream is therefore reproducible across platforms.

use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, ensure_dims, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::tensor::{Mode, Tensor3};

/// Where P3 came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrfSource {
    Uniform,
    Csv(String),
    Identity,
    Custom,
}

/// Provenance of a set of operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    pub kernel_size: usize,
    pub sigma: f64,
    pub ratio: usize,
    pub offset: usize,
    pub srf_source: SrfSource,
}

impl DegradationParams {
    /// 9×9 kernel, 1-in-5 downsampling, uniform SRF; σ defaults to `d/2`.
    pub fn wald_default() -> Self {
        DegradationParams {
            kernel_size: 9,
            sigma: 2.5,
            ratio: 5,
            offset: 0,
            srf_source: SrfSource::Uniform,
        }
    }
}

/// `Y_H = Y_S ×₁ P1 ×₂ P2` and `Y_M = Y_S ×₃ P3`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationOps<T> {
    /// `I_H × I_M`
    pub p1: Mat<T>,
    /// `J_H × J_M`
    pub p2: Mat<T>,
    /// `K_M × K_H`
    pub p3: Mat<T>,
    pub params: DegradationParams,
}

impl<T: Scalar> DegradationOps<T> {
    pub fn new(p1: Mat<T>, p2: Mat<T>, p3: Mat<T>, params: DegradationParams) -> Self {
        DegradationOps { p1, p2, p3, params }
    }

    /// Operators for an `I_M × J_M × K_H` reference with the given spatial
    /// parameters and a `K_M`-band uniform spectral response.
    pub fn wald(
        sri_dims: [usize; 3],
        msi_bands: usize,
        params: &DegradationParams,
    ) -> Result<Self> {
        let [i_m, j_m, k_h] = sri_dims;
        let (p1, p2) = build_spatial_ops(
            i_m,
            j_m,
            params.kernel_size,
            params.sigma,
            params.ratio,
            params.offset,
        )?;
        let p3 = uniform_srf(k_h, msi_bands)?;
        let mut params = params.clone();
        params.srf_source = SrfSource::Uniform;
        Ok(Self::new(p1, p2, p3, params))
    }

    pub fn identity(dims: [usize; 3]) -> Self {
        let params = DegradationParams {
            kernel_size: 1,
            sigma: 1.0,
            ratio: 1,
            offset: 0,
            srf_source: SrfSource::Identity,
        };
        Self::new(
            Mat::identity(dims[0]),
            Mat::identity(dims[1]),
            Mat::identity(dims[2]),
            params,
        )
    }

    /// `[I_M, J_M, K_H]`.
    pub fn sri_dims(&self) -> [usize; 3] {
        [self.p1.cols(), self.p2.cols(), self.p3.cols()]
    }

    pub fn hsi_dims(&self) -> [usize; 3] {
        [self.p1.rows(), self.p2.rows(), self.p3.cols()]
    }

    pub fn msi_dims(&self) -> [usize; 3] {
        [self.p1.cols(), self.p2.cols(), self.p3.rows()]
    }

    /// Checks that an HSI/MSI pair has the shapes these operators produce.
    pub fn check_pair(&self, hsi: &Tensor3<T>, msi: &Tensor3<T>) -> Result<()> {
        ensure_dims!(
            hsi.dims() == self.hsi_dims(),
            "HSI is {:?} but the operators produce {:?}",
            hsi.dims(),
            self.hsi_dims()
        );
        ensure_dims!(
            msi.dims() == self.msi_dims(),
            "MSI is {:?} but the operators produce {:?}",
            msi.dims(),
            self.msi_dims()
        );
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> DegradationOps<U> {
        DegradationOps {
            p1: self.p1.cast(),
            p2: self.p2.cast(),
            p3: self.p3.cast(),
            params: self.params.clone(),
        }
    }
}

/// Truncated 1-D Gaussian blur as an `n × n` row-stochastic matrix.
///
/// Row `i` carries weights `exp(−o²/(2σ²))` for offsets `|o| ≤ (size−1)/2`
/// around `i`; taps falling outside `0..n` are dropped and the row is
/// renormalized.
pub fn gaussian_blur_matrix<T: Scalar>(n: usize, kernel_size: usize, sigma: f64) -> Result<Mat<T>> {
    ensure_arg!(n >= 1, "blur matrix size must be positive");
    ensure_arg!(
        kernel_size % 2 == 1,
        "kernel size must be odd, got {kernel_size}"
    );
    ensure_arg!(
        kernel_size < 2 * n,
        "kernel size {kernel_size} exceeds 2n-1 = {}",
        2 * n - 1
    );
    ensure_arg!(
        sigma > 0.0 && sigma.is_finite(),
        "sigma must be positive and finite, got {sigma}"
    );
    let half = (kernel_size / 2) as isize;
    let mut m = Mat::zeros(n, n);
    for i in 0..n as isize {
        let lo = (i - half).max(0);
        let hi = (i + half).min(n as isize - 1);
        let weights: Vec<f64> = (lo..=hi)
            .map(|j| {
                let o = (j - i) as f64;
                (-(o * o) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for (j, w) in (lo..=hi).zip(weights) {
            m[(i as usize, j as usize)] = T::lit(w / total);
        }
    }
    Ok(m)
}

/// Keeps samples `offset, offset + d, …` (0-based); `⌈(n − offset)/d⌉` rows.
pub fn downsample_matrix<T: Scalar>(n: usize, d: usize, offset: usize) -> Result<Mat<T>> {
    ensure_arg!(
        d >= 1 && d <= n,
        "downsampling ratio must be in 1..={n}, got {d}"
    );
    ensure_arg!(
        offset < d,
        "offset {offset} must be smaller than the ratio {d}"
    );
    let rows = (n - offset).div_ceil(d);
    let mut m = Mat::zeros(rows, n);
    for r in 0..rows {
        m[(r, offset + r * d)] = T::one();
    }
    Ok(m)
}

/// `P = downsample · blur` for each spatial axis.
pub fn build_spatial_ops<T: Scalar>(
    i_m: usize,
    j_m: usize,
    kernel_size: usize,
    sigma: f64,
    d: usize,
    offset: usize,
) -> Result<(Mat<T>, Mat<T>)> {
    let p1 = downsample_matrix(i_m, d, offset)?.matmul(&gaussian_blur_matrix(
        i_m,
        kernel_size,
        sigma,
    )?)?;
    let p2 = downsample_matrix(j_m, d, offset)?.matmul(&gaussian_blur_matrix(
        j_m,
        kernel_size,
        sigma,
    )?)?;
    Ok((p1, p2))
}

/// Averages `K_H` bands into `K_M` contiguous groups; the first
/// `K_H mod K_M` groups take one extra band.
pub fn uniform_srf<T: Scalar>(k_h: usize, k_m: usize) -> Result<Mat<T>> {
    ensure_arg!(k_m >= 1, "at least one multispectral band is required");
    ensure_arg!(k_m <= k_h, "cannot average {k_h} bands into {k_m} groups");
    let base = k_h / k_m;
    let extra = k_h % k_m;
    let mut m = Mat::zeros(k_m, k_h);
    let mut start = 0;
    for g in 0..k_m {
        let size = base + usize::from(g < extra);
        let w = T::one() / T::from_usize_lossy(size);
        for k in start..start + size {
            m[(g, k)] = w;
        }
        start += size;
    }
    Ok(m)
}

/// Parses a spectral response: one row per MSI band, comma-separated
/// weights for every HSI band, no header.
pub fn parse_srf_csv<T: Scalar, R: Read>(reader: R) -> Result<Mat<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("SRF CSV: {e}")))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map(T::lit).map_err(|_| {
                    Error::InvalidArgument(format!("SRF CSV row {}: cannot parse {s:?}", line + 1))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    ensure_arg!(!rows.is_empty(), "SRF CSV is empty");
    Mat::from_rows(&rows)
}

/// `(Y_S ×₁ P1 ×₂ P2, Y_S ×₃ P3)`.
pub fn apply_degradation<T: Scalar>(
    sri: &Tensor3<T>,
    ops: &DegradationOps<T>,
) -> Result<(Tensor3<T>, Tensor3<T>)> {
    ensure_dims!(
        sri.dims() == ops.sri_dims(),
        "reference image is {:?} but the operators expect {:?}",
        sri.dims(),
        ops.sri_dims()
    );
    let hsi = sri
        .mode_product(&ops.p1, Mode::One)?
        .mode_product(&ops.p2, Mode::Two)?;
    let msi = sri.mode_product(&ops.p3, Mode::Three)?;
    Ok((hsi, msi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Target SNR in dB; `+∞` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }
}

/// `t + N` with `N` i.i.d. zero-mean Gaussian of variance
/// `‖t‖²_F / (numel · 10^(snr/10))`.
pub fn add_noise<T: Scalar>(t: &Tensor3<T>, spec: &NoiseSpec) -> Result<Tensor3<T>> {
    ensure_arg!(
        !spec.snr_db.is_nan() && spec.snr_db != f64::NEG_INFINITY,
        "SNR must be a number, got {}",
        spec.snr_db
    );
    if spec.snr_db == f64::INFINITY {
        return Ok(t.clone());
    }
    let energy = t.frob_norm_sq().as_f64();
    ensure_arg!(energy > 0.0, "SNR is undefined for an all-zero tensor");
    let var = energy / (t.len() as f64 * 10f64.powf(spec.snr_db / 10.0));
    let std = var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = t.clone();
    for v in out.data_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += T::lit(std * z);
    }
    Ok(out)
}

/// Offset between the HSI and MSI noise streams of one simulation seed.
pub const MSI_NOISE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Degrades `sri` and adds noise at `snr_db` to both outputs; the HSI uses
/// `seed`, the MSI `seed + MSI_NOISE_STREAM` (wrapping).
pub fn simulate_pair<T: Scalar>(
    sri: &Tensor3<T>,
    ops: &DegradationOps<T>,
    snr_db: f64,
    seed: u64,
) -> Result<(Tensor3<T>, Tensor3<T>)> {
    let (hsi, msi) = apply_degradation(sri, ops)?;
    let hsi = add_noise(&hsi, &NoiseSpec { snr_db, seed })?;
    let msi = add_noise(
        &msi,
        &NoiseSpec {
            snr_db,
            seed: seed.wrapping_add(MSI_NOISE_STREAM),
        },
    )?;
    Ok((hsi, msi))
}

/// `10·log10(‖clean‖² / ‖noisy − clean‖²)`.
pub fn realized_snr_db<T: Scalar>(clean: &Tensor3<T>, noisy: &Tensor3<T>) -> Result<f64> {
    let noise = noisy.sub(clean)?.frob_norm_sq().as_f64();
    Ok(10.0 * (clean.frob_norm_sq().as_f64() / noise).log10())
}
