//! Monte Carlo comparison of fusion methods on one reference image.
//!
//! Every trial draws its own noise from `seed_base + trial` and runs every
//! method with that seed; trials run in parallel and are merged by index.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hsr_btd::{
    bcd_fuse, btd_reconstruct, evaluate, random_btd_factors, simulate_pair, DegradationOps,
    DegradationParams, FusionConfig, Method, MetricsReport, RankSpec, Rho, SrfSource, Tensor3,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{default_rank, identifiability_warning};
use crate::error::{CliError, CliResult};
use crate::tensor_file::{read_tensor, write_atomic};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub trials: usize,
    /// `null` or absent for noiseless data.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub methods: Vec<BenchMethod>,
    #[serde(default)]
    pub degradation: BenchDegradation,
    #[serde(default)]
    pub seed_base: u64,
    pub output: PathBuf,
    pub sri: SriSource,
    /// Include the runtime column; disable for byte-stable tables.
    #[serde(default = "yes")]
    pub timing: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchMethod {
    pub method: Method,
    #[serde(default)]
    pub blocks: Option<usize>,
    #[serde(default)]
    pub block_rank: Option<usize>,
    #[serde(default)]
    pub outer_iters: Option<usize>,
    #[serde(default)]
    pub inner_iters: Option<usize>,
    #[serde(default)]
    pub rho: Option<Rho>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchDegradation {
    pub kernel_size: usize,
    pub sigma: Option<f64>,
    pub ratio: usize,
    pub offset: usize,
    pub msi_bands: usize,
}

impl Default for BenchDegradation {
    fn default() -> Self {
        BenchDegradation {
            kernel_size: 9,
            sigma: None,
            ratio: 5,
            offset: 0,
            msi_bands: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SriSource {
    File(PathBuf),
    Synthetic {
        dims: [usize; 3],
        blocks: usize,
        #[serde(default = "one")]
        block_rank: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> usize {
    1
}

impl BenchConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::Usage("bench needs at least one trial".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Usage("bench needs at least one method".into()));
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() {
                return Err(CliError::Usage("snr_db must be a number".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub block_ranks: Vec<usize>,
    pub trials_ok: usize,
    pub r_snr_db: f64,
    pub cc: f64,
    pub sam_rad: f64,
    pub ergas: f64,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchFailure {
    pub trial: usize,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub output: String,
    pub trials: usize,
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
    pub warnings: Vec<String>,
}

struct Planned {
    method: Method,
    cfg: FusionConfig<f64>,
}

fn plan(m: &BenchMethod) -> CliResult<Planned> {
    let (r, l) = default_rank(m.method);
    let rank = m.method.effective_rank(&RankSpec::uniform(
        m.blocks.unwrap_or(r),
        m.block_rank.unwrap_or(l),
    )?);
    let mut cfg = FusionConfig::new(m.method, rank);
    if let Some(n) = m.outer_iters {
        cfg.outer_iters = n;
    }
    if let Some(n) = m.inner_iters {
        cfg.inner_iters = n;
    }
    if let Some(rho) = m.rho {
        cfg.rho = rho;
    }
    cfg.validate()?;
    Ok(Planned {
        method: m.method,
        cfg,
    })
}

type RunOutcome = Result<(MetricsReport, f64), String>;

fn run_trial(
    sri: &Tensor3<f64>,
    ops: &DegradationOps<f64>,
    snr_db: f64,
    seed: u64,
    plans: &[Planned],
) -> Vec<RunOutcome> {
    let (hsi, msi) = match simulate_pair(sri, ops, snr_db, seed) {
        Ok(pair) => pair,
        Err(e) => {
            return plans
                .iter()
                .map(|_| Err(format!("simulation failed: {e}")))
                .collect()
        }
    };
    plans
        .iter()
        .map(|p| {
            let mut cfg = p.cfg.clone();
            cfg.seed = seed;
            let fit = bcd_fuse(&hsi, &msi, ops, &cfg).map_err(|e| e.to_string())?;
            let report = evaluate(sri, &fit.sri_estimate, ops.params.ratio as f64)
                .map_err(|e| e.to_string())?;
            Ok((report, fit.wall_time_s))
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn cmd_bench(config_path: &Path) -> CliResult<BenchSummary> {
    let cfg = BenchConfig::load(config_path)?;
    run_bench(&cfg)
}

pub fn run_bench(cfg: &BenchConfig) -> CliResult<BenchSummary> {
    cfg.validate()?;
    let sri = match &cfg.sri {
        SriSource::File(path) => read_tensor(path)?,
        SriSource::Synthetic {
            dims,
            blocks,
            block_rank,
            seed,
        } => {
            let rank = RankSpec::uniform(*blocks, *block_rank)?;
            btd_reconstruct(&random_btd_factors::<f64>(*dims, &rank, *seed)?)?
        }
    };
    let d = &cfg.degradation;
    let params = DegradationParams {
        kernel_size: d.kernel_size,
        sigma: d.sigma.unwrap_or(d.ratio as f64 / 2.0),
        ratio: d.ratio,
        offset: d.offset,
        srf_source: SrfSource::Uniform,
    };
    let ops = DegradationOps::wald(sri.dims(), d.msi_bands, &params)?;
    let plans = cfg
        .methods
        .iter()
        .map(plan)
        .collect::<CliResult<Vec<_>>>()?;
    let snr_db = cfg.snr_db.unwrap_or(f64::INFINITY);

    let mut warnings: Vec<String> = Vec::new();
    for p in &plans {
        if let Some(w) =
            identifiability_warning(sri.dims(), ops.hsi_dims(), d.msi_bands, &p.cfg.rank)
        {
            warnings.push(format!("{}: {w}", p.method));
        }
    }

    let outcomes: Vec<Vec<RunOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(
                &sri,
                &ops,
                snr_db,
                cfg.seed_base.wrapping_add(trial as u64),
                &plans,
            )
        })
        .collect();

    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (m, p) in plans.iter().enumerate() {
        let mut ok = Vec::new();
        for (trial, runs) in outcomes.iter().enumerate() {
            match &runs[m] {
                Ok(v) => ok.push(v.clone()),
                Err(e) => {
                    log::warn!("trial {trial}, {}: {e}", p.method);
                    failures.push(BenchFailure {
                        trial,
                        method: p.method,
                        error: e.clone(),
                    });
                }
            }
        }
        rows.push(BenchRow {
            method: p.method,
            block_ranks: p.cfg.rank.block_ranks().to_vec(),
            trials_ok: ok.len(),
            r_snr_db: mean(ok.iter().map(|(r, _)| r.r_snr_db)),
            cc: mean(ok.iter().map(|(r, _)| r.cc)),
            sam_rad: mean(ok.iter().map(|(r, _)| r.sam_rad)),
            ergas: mean(ok.iter().map(|(r, _)| r.ergas)),
            runtime_s: cfg.timing.then(|| mean(ok.iter().map(|(_, t)| *t))),
        });
    }

    let table = if cfg
        .output
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        render_csv(&rows, cfg.timing)
    } else {
        render_markdown(&rows, cfg.timing)
    };
    write_atomic(&cfg.output, table.as_bytes())?;

    let total = cfg.trials * plans.len();
    if failures.len() == total {
        return Err(CliError::Numerical(format!(
            "all {total} runs failed; first error: {}",
            failures[0].error
        )));
    }
    Ok(BenchSummary {
        output: cfg.output.display().to_string(),
        trials: cfg.trials,
        rows,
        failures,
        warnings,
    })
}

fn rank_label(ranks: &[usize]) -> String {
    if ranks.iter().all(|&l| l == 1) {
        format!("F={}", ranks.len())
    } else if ranks.iter().all(|&l| l == ranks[0]) {
        format!("R={} L={}", ranks.len(), ranks[0])
    } else {
        format!("L={ranks:?}")
    }
}

pub fn render_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut out = String::from("method,rank,trials_ok,r_snr_db,cc,sam_rad,ergas");
    out.push_str(if timing { ",runtime_s\n" } else { "\n" });
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.method,
            rank_label(&r.block_ranks),
            r.trials_ok,
            r.r_snr_db,
            r.cc,
            r.sam_rad,
            r.ergas
        );
        if let Some(t) = r.runtime_s.filter(|_| timing) {
            let _ = write!(out, ",{t:.3}");
        }
        out.push('\n');
    }
    out
}

pub fn render_markdown(rows: &[BenchRow], timing: bool) -> String {
    let mut out = String::from("| Algorithm | Rank | Trials | R-SNR | CC | SAM | ERGAS |");
    out.push_str(if timing { " Runtime (s) |\n" } else { "\n" });
    out.push_str("|---|---|---|---|---|---|---|");
    out.push_str(if timing { "---|\n" } else { "\n" });
    for r in rows {
        let _ = write!(
            out,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |",
            r.method,
            rank_label(&r.block_ranks),
            r.trials_ok,
            r.r_snr_db,
            r.cc,
            r.sam_rad,
            r.ergas
        );
        if let Some(t) = r.runtime_s.filter(|_| timing) {
            let _ = write!(out, " {t:.2} |");
        }
        out.push('\n');
    }
    out
}
