use std::fs;
use std::path::Path;

use hsr_btd::{
    bcd_fuse, btd_reconstruct, build_spatial_ops, check_coupled_identifiability, evaluate,
    parse_srf_csv, random_btd_factors, realized_snr_db, simulate_pair, uniform_srf, BtdFactors,
    DegradationOps, DegradationParams, FusionConfig, InitStrategy, Mat, Method, MetricsReport,
    RankSpec, Rho, SrfSource, Tensor3, MSI_NOISE_STREAM,
};
use serde::Serialize;

use crate::args::{DegradationArgs, EvaluateArgs, FuseArgs, GenerateArgs, InitArg, SimulateArgs};
use crate::error::{CliError, CliResult};
use crate::tensor_file::{read_tensor, write_atomic, write_tensor};

impl DegradationArgs {
    pub fn params(&self) -> DegradationParams {
        DegradationParams {
            kernel_size: self.kernel_size,
            sigma: self.sigma.unwrap_or(self.ratio as f64 / 2.0),
            ratio: self.ratio,
            offset: self.offset,
            srf_source: match &self.srf {
                Some(p) => SrfSource::Csv(p.display().to_string()),
                None => SrfSource::Uniform,
            },
        }
    }

    /// Operators for an `I_M × J_M × K_H` reference.
    pub fn build(&self, sri_dims: [usize; 3]) -> CliResult<DegradationOps<f64>> {
        let params = self.params();
        let (p1, p2) = build_spatial_ops(
            sri_dims[0],
            sri_dims[1],
            params.kernel_size,
            params.sigma,
            params.ratio,
            params.offset,
        )?;
        let p3 = match &self.srf {
            Some(path) => {
                let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                let p3: Mat<f64> = parse_srf_csv(file)?;
                if p3.cols() != sri_dims[2] {
                    return Err(CliError::Usage(format!(
                        "{}: spectral response has {} columns but the image has {} bands",
                        path.display(),
                        p3.cols(),
                        sri_dims[2]
                    )));
                }
                p3
            }
            None => uniform_srf(sri_dims[2], self.msi_bands)?,
        };
        Ok(DegradationOps::new(p1, p2, p3, params))
    }
}

#[derive(Debug, Serialize)]
pub struct RealizedSnr {
    pub hsi: f64,
    pub msi: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulateManifest {
    pub sri: String,
    pub hsi: String,
    pub msi: String,
    pub sri_dims: [usize; 3],
    pub hsi_dims: [usize; 3],
    pub msi_dims: [usize; 3],
    /// `null` when noise is disabled.
    pub snr_db: Option<f64>,
    pub realized_snr_db: Option<RealizedSnr>,
    pub seed: u64,
    pub msi_seed: u64,
    pub degradation: DegradationParams,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateManifest> {
    let sri = read_tensor(&args.sri)?;
    let ops = args.degradation.build(sri.dims())?;
    let (hsi, msi) = simulate_pair(&sri, &ops, args.snr_db, args.seed)?;
    let realized = if args.snr_db.is_finite() {
        let (clean_h, clean_m) = hsr_btd::apply_degradation(&sri, &ops)?;
        Some(RealizedSnr {
            hsi: realized_snr_db(&clean_h, &hsi)?,
            msi: realized_snr_db(&clean_m, &msi)?,
        })
    } else {
        None
    };
    write_tensor(&args.out_hsi, &hsi)?;
    write_tensor(&args.out_msi, &msi)?;
    Ok(SimulateManifest {
        sri: args.sri.display().to_string(),
        hsi: args.out_hsi.display().to_string(),
        msi: args.out_msi.display().to_string(),
        sri_dims: sri.dims(),
        hsi_dims: hsi.dims(),
        msi_dims: msi.dims(),
        snr_db: args.snr_db.is_finite().then_some(args.snr_db),
        realized_snr_db: realized,
        seed: args.seed,
        msi_seed: args.seed.wrapping_add(MSI_NOISE_STREAM),
        degradation: ops.params,
    })
}

/// `(R, L)` used when the flags leave them out.
pub fn default_rank(method: Method) -> (usize, usize) {
    match method {
        Method::CnnBtd | Method::TwoStage => (10, 20),
        Method::CnnCpd | Method::Stereo => (100, 1),
    }
}

pub fn rank_for(
    method: Method,
    blocks: Option<usize>,
    block_rank: Option<usize>,
) -> CliResult<RankSpec> {
    let (r, l) = default_rank(method);
    let spec = RankSpec::uniform(blocks.unwrap_or(r), block_rank.unwrap_or(l))?;
    Ok(method.effective_rank(&spec))
}

pub fn parse_rho(s: &str) -> CliResult<Rho> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(Rho::Auto),
        "balanced" => Ok(Rho::Balanced),
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Rho::Fixed(v)),
            _ => Err(CliError::Usage(format!(
                "--rho must be auto, balanced or a positive number, got {s:?}"
            ))),
        },
    }
}

pub fn read_factors(path: &Path) -> CliResult<BtdFactors<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f: BtdFactors<f64> = serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?;
    // rebuild the matrices so inconsistent payload lengths are caught here
    let rebuild = |m: Mat<f64>| Mat::from_col_major(m.rows(), m.cols(), m.into_data());
    let checked = (|| BtdFactors::new(rebuild(f.a)?, rebuild(f.b)?, rebuild(f.c)?, f.rank))();
    checked.map_err(|e| CliError::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    write_atomic(path, text.as_bytes())
}

/// Logs an advisory when the generic uniqueness conditions fail; the fit
/// still runs.
pub fn identifiability_warning(
    sri_dims: [usize; 3],
    hsi_dims: [usize; 3],
    msi_bands: usize,
    rank: &RankSpec,
) -> Option<String> {
    let report = check_coupled_identifiability(
        sri_dims[0],
        sri_dims[1],
        msi_bands,
        hsi_dims[0],
        hsi_dims[1],
        rank,
    )
    .ok()?;
    if report.holds() {
        return None;
    }
    let failed: Vec<String> = report
        .failed()
        .map(|c| format!("{} ({} < {})", c.name, c.lhs, c.rhs))
        .collect();
    let msg = format!("uniqueness conditions not met: {}", failed.join("; "));
    log::warn!("{msg}");
    Some(msg)
}

#[derive(Debug, Serialize)]
pub struct FuseSummary {
    pub method: Method,
    pub block_ranks: Vec<usize>,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub rho: Rho,
    pub tol: f64,
    pub seed: u64,
    pub init: String,
    pub iters_run: usize,
    pub objective_trace_len: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub wall_time_s: f64,
    pub identifiable: bool,
    pub warnings: Vec<String>,
    pub out: String,
}

pub fn cmd_fuse(args: &FuseArgs) -> CliResult<FuseSummary> {
    let hsi = read_tensor(&args.hsi)?;
    let msi = read_tensor(&args.msi)?;
    let method: Method = args.method.into();
    let [i_m, j_m, k_m] = msi.dims();
    let sri_dims = [i_m, j_m, hsi.dims()[2]];
    let ops = args.degradation.build(sri_dims)?;
    ops.check_pair(&hsi, &msi)?;

    let rank = rank_for(method, args.blocks, args.block_rank)?;
    let mut cfg = FusionConfig::new(method, rank.clone());
    if let Some(n) = args.outer_iters {
        cfg.outer_iters = n;
    }
    cfg.inner_iters = args.inner_iters;
    cfg.rho = parse_rho(&args.rho)?;
    cfg.tol = args.tol;
    cfg.seed = args.seed;
    let init_name;
    cfg.init = match &args.init_factors {
        Some(path) => {
            init_name = format!("provided:{}", path.display());
            let f = read_factors(path)?;
            if f.rank != rank {
                return Err(CliError::Usage(format!(
                    "{}: factors have block ranks {:?}, the flags ask for {:?}",
                    path.display(),
                    f.rank.block_ranks(),
                    rank.block_ranks()
                )));
            }
            InitStrategy::Provided(f)
        }
        None => match args.init {
            InitArg::RandomUniform => {
                init_name = "random_uniform".into();
                InitStrategy::RandomUniform
            }
            InitArg::SvdWarm => {
                init_name = "svd_warm".into();
                InitStrategy::SvdWarm
            }
        },
    };
    cfg.validate()?;

    let warning = identifiability_warning(sri_dims, hsi.dims(), k_m, &rank);
    let fit = bcd_fuse(&hsi, &msi, &ops, &cfg)?;
    write_tensor(&args.out, &fit.sri_estimate)?;
    if let Some(path) = &args.factors_out {
        write_json(path, &fit.factors)?;
    }
    Ok(FuseSummary {
        method,
        block_ranks: rank.block_ranks().to_vec(),
        outer_iters: cfg.outer_iters,
        inner_iters: cfg.inner_iters,
        rho: cfg.rho,
        tol: cfg.tol,
        seed: cfg.seed,
        init: init_name,
        iters_run: fit.iters_run,
        objective_trace_len: fit.objective_trace.len(),
        initial_objective: fit.objective_trace[0],
        final_objective: fit.final_objective(),
        wall_time_s: fit.wall_time_s,
        identifiable: warning.is_none(),
        warnings: warning.into_iter().collect(),
        out: args.out.display().to_string(),
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<MetricsReport> {
    let reference = read_tensor(&args.reference)?;
    let estimate = read_tensor(&args.estimate)?;
    Ok(evaluate(&reference, &estimate, args.ratio)?)
}

#[derive(Debug, Serialize)]
pub struct GenerateSummary {
    pub out: String,
    pub dims: [usize; 3],
    pub block_ranks: Vec<usize>,
    pub seed: u64,
    pub frob_norm: f64,
    pub factors_out: Option<String>,
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<GenerateSummary> {
    let dims: [usize; 3] = args.dims.as_slice().try_into().map_err(|_| {
        CliError::Usage(format!(
            "--dims needs exactly three values, got {:?}",
            args.dims
        ))
    })?;
    let rank = RankSpec::uniform(args.blocks, args.block_rank)?;
    let f = random_btd_factors::<f64>(dims, &rank, args.seed)?;
    let sri: Tensor3<f64> = btd_reconstruct(&f)?;
    write_tensor(&args.out, &sri)?;
    if let Some(path) = &args.factors_out {
        write_json(path, &f)?;
    }
    Ok(GenerateSummary {
        out: args.out.display().to_string(),
        dims,
        block_ranks: rank.block_ranks().to_vec(),
        seed: args.seed,
        frob_norm: sri.frob_norm(),
        factors_out: args.factors_out.as_ref().map(|p| p.display().to_string()),
    })
}
