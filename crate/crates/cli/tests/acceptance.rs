//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::coupled::{projected_gradient_oracle, scene, with_block};
use common::*;
use hsr_btd::linalg::Partition;
use hsr_btd::solver::{admm_nn_block, feasibility_gap, sylvester_solve_dense, SylvesterSolver};
use hsr_btd::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit_s: f64) -> Result<f64, String> {
    let t = start.elapsed().as_secs_f64();
    check(t < limit_s, || format!("took {t:.2} s, limit {limit_s} s"))?;
    Ok(t)
}

fn products() -> Outcome {
    let start = Instant::now();
    let mut g = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (ra, ca, rb, cb) = (
            g.random_range(1..=5),
            g.random_range(1..=5),
            g.random_range(1..=5),
            g.random_range(1..=5),
        );
        let a = rand_mat(&mut g, ra, ca);
        let b = rand_mat(&mut g, rb, cb);
        worst = worst.max(mat_rel_err(
            &kronecker(&a, &b),
            &kron_oracle(&to_rows(&a), &to_rows(&b)),
        ));
        let b2 = rand_mat(&mut g, rb, ca);
        let kr = khatri_rao(&a, &b2).map_err(|e| e.to_string())?;
        worst = worst.max(mat_rel_err(
            &kr,
            &khatri_rao_oracle(&to_rows(&a), &to_rows(&b2)),
        ));
        let blocks = g.random_range(1..=3);
        let widths: Vec<usize> = (0..blocks).map(|_| g.random_range(1..=3)).collect();
        let total: usize = widths.iter().sum();
        let rc = g.random_range(1..=5);
        let c = rand_mat(&mut g, rc, blocks);
        let a2 = rand_mat(&mut g, ra, total.min(5));
        let widths = trim_widths(widths, a2.cols());
        let c = Mat::from_fn(c.rows(), widths.len(), |i, j| c[(i, j)]);
        let part = Partition::new(widths.clone()).map_err(|e| e.to_string())?;
        let pkr = pw_khatri_rao(&c, &a2, &part).map_err(|e| e.to_string())?;
        worst = worst.max(mat_rel_err(
            &pkr,
            &pw_khatri_rao_oracle(&to_rows(&c), &to_rows(&a2), &widths),
        ));
    }
    check(worst <= 1e-14, || format!("max relative error {worst:e}"))?;
    let t = within_time(start, 5.0)?;
    Ok(format!("200 instances, max rel err {worst:.1e}, {t:.2} s"))
}

/// Keeps the partition within `cols` columns so every dimension stays ≤ 5.
fn trim_widths(widths: Vec<usize>, cols: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = cols;
    for w in widths {
        if left == 0 {
            break;
        }
        let w = w.min(left);
        out.push(w);
        left -= w;
    }
    if left > 0 {
        *out.last_mut().unwrap() += left;
    }
    out
}

fn unfoldings() -> Outcome {
    let start = Instant::now();
    let mut g = rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dims = [
            g.random_range(1..=10),
            g.random_range(1..=10),
            g.random_range(1..=10),
        ];
        let blocks = g.random_range(1..=3);
        let widths: Vec<usize> = (0..blocks).map(|_| g.random_range(1..=3)).collect();
        let rank = RankSpec::new(widths).map_err(|e| e.to_string())?;
        let a = rand_mat(&mut g, dims[0], rank.total());
        let b = rand_mat(&mut g, dims[1], rank.total());
        let c = rand_mat(&mut g, dims[2], blocks);
        let f = BtdFactors::new(a, b, c, rank).map_err(|e| e.to_string())?;
        let x = btd_reconstruct(&f).map_err(|e| e.to_string())?;
        let nested = reconstruct_oracle(&f);
        for (n, mode) in Mode::ALL.into_iter().enumerate() {
            let direct = btd_unfold_direct(&f, mode).map_err(|e| e.to_string())?;
            worst = worst.max(mat_rel_err(&direct, &to_rows(&x.unfold(mode))));
            worst = worst.max(mat_rel_err(&direct, &unfold_oracle(&nested, n + 1)));
        }
    }
    check(worst <= 1e-12, || format!("max relative error {worst:e}"))?;
    let t = within_time(start, 10.0)?;
    Ok(format!(
        "100 factor sets x 3 modes, max rel err {worst:.1e}, {t:.2} s"
    ))
}

fn sylvester_small() -> Result<(f64, f64), String> {
    let mut g = rng(103);
    let (mut worst, mut worst_res): (f64, f64) = (0.0, 0.0);
    for row_form in [true, false] {
        for _ in 0..100 {
            let (m, n) = (g.random_range(1..=8), g.random_range(1..=8));
            let c = g.random_range(0.2..2.0);
            let (h1, h2, h3, h4) = if row_form {
                (
                    sym_pos_def(&mut g, m),
                    sym_pos_def(&mut g, n),
                    Mat::identity(m).scale(c),
                    sym_pos_def(&mut g, n),
                )
            } else {
                (
                    sym_pos_def(&mut g, m),
                    Mat::identity(n).scale(c),
                    sym_pos_def(&mut g, m),
                    sym_pos_def(&mut g, n),
                )
            };
            let h5 = rand_mat(&mut g, m, n);
            let x = SylvesterSolver::new(&h1, &h2, &h3, &h4)
                .and_then(|s| s.solve(&h5))
                .map_err(|e| format!("{m}x{n} instance: {e}"))?;
            let want = sylvester_oracle(&h1, &h2, &h3, &h4, &h5);
            worst = worst.max(mat_rel_err(&x, &want));
            let dense =
                sylvester_solve_dense(&h1, &h2, &h3, &h4, &h5).map_err(|e| e.to_string())?;
            worst = worst.max(mat_rel_err(&dense, &want));
            worst_res = worst_res
                .max(sylvester_residual_oracle(&h1, &h2, &h3, &h4, &x, &h5) / h5.frob_norm());
        }
    }
    check(worst <= 1e-9, || format!("oracle mismatch {worst:e}"))?;
    check(worst_res <= 1e-8, || format!("residual {worst_res:e}"))?;
    Ok((worst, worst_res))
}

struct RecoveryScene {
    truth: BtdFactors<f64>,
    sri: Tensor3<f64>,
    hsi: Tensor3<f64>,
    msi: Tensor3<f64>,
    ops: DegradationOps<f64>,
}

fn recovery_scene() -> RecoveryScene {
    let rank = RankSpec::uniform(3, 2).unwrap();
    let truth = random_btd_factors::<f64>([27, 27, 16], &rank, 7).unwrap();
    let sri = btd_reconstruct(&truth).unwrap();
    let params = DegradationParams {
        kernel_size: 3,
        sigma: 1.5,
        ratio: 3,
        offset: 0,
        srf_source: SrfSource::Uniform,
    };
    let ops = DegradationOps::wald([27, 27, 16], 4, &params).unwrap();
    let (hsi, msi) = apply_degradation(&sri, &ops).unwrap();
    RecoveryScene {
        truth,
        sri,
        hsi,
        msi,
        ops,
    }
}

fn warm_config(s: &RecoveryScene, method: Method) -> FusionConfig<f64> {
    let mut cfg = FusionConfig::new(method, s.truth.rank.clone());
    cfg.outer_iters = 50;
    cfg.inner_iters = 5;
    cfg.init = InitStrategy::Provided(perturb_factors(&s.truth, 0.01, 11).unwrap());
    cfg
}

/// Re-runs the constrained sweeps from public pieces, checking every
/// Sylvester solve against the brute-force residual. Returns the worst
/// relative residual, the solve count and the final factors.
fn replay_cnn_btd(
    s: &RecoveryScene,
    cfg: &FusionConfig<f64>,
) -> Result<(f64, usize, BtdFactors<f64>), String> {
    let InitStrategy::Provided(init) = &cfg.init else {
        unreachable!()
    };
    let mut f = init.clone();
    let mut duals: Vec<Option<(Mat<f64>, f64)>> = vec![None, None, None];
    let (mut worst, mut solves): (f64, usize) = (0.0, 0);
    for _ in 0..cfg.outer_iters {
        for (idx, block) in Block::CYCLE.into_iter().enumerate() {
            let mut w = build_subproblem(block, &f, &s.hsi, &s.msi, &s.ops, cfg.rho)
                .map_err(|e| e.to_string())?;
            if let Some((u, rho)) = &duals[idx] {
                w.warm_dual(u, *rho);
            }
            let solver =
                SylvesterSolver::new(&w.h1, &w.h2, &w.h3, &w.h4).map_err(|e| e.to_string())?;
            for _ in 0..cfg.inner_iters {
                let h5 = w.h5_base.add(&w.z.add(&w.u).unwrap().scale(w.rho)).unwrap();
                let x = solver.solve(&h5).map_err(|e| format!("{block:?}: {e}"))?;
                let res =
                    sylvester_residual_oracle(&w.h1, &w.h2, &w.h3, &w.h4, &x, &h5) / h5.frob_norm();
                worst = worst.max(res);
                solves += 1;
                let z = x.sub(&w.u).unwrap().positive_part();
                w.u = w.u.add(&z).unwrap().sub(&x).unwrap();
                w.z = z;
            }
            let value = if block == Block::C {
                w.z.transpose()
            } else {
                w.z.clone()
            };
            f = with_block(&f, block, &value);
            duals[idx] = Some((w.u, w.rho));
        }
    }
    Ok((worst, solves, f))
}

fn sylvester(
    replay: &Result<(f64, usize, BtdFactors<f64>), String>,
    fitted: &Option<Tensor3<f64>>,
) -> Outcome {
    let (worst, worst_res) = sylvester_small()?;
    let (prod_res, solves, f) = replay.clone()?;
    check(prod_res <= 1e-8, || {
        format!("production residual {prod_res:e}")
    })?;
    // the replay must be the run that criterion 6 scored
    let fitted = fitted.as_ref().ok_or("criterion 6 fit unavailable")?;
    let diff = btd_reconstruct(&f).unwrap().rel_diff(fitted).unwrap();
    check(diff <= 1e-12, || {
        format!("replay departs from bcd_fuse by {diff:e}")
    })?;
    Ok(format!(
        "200 small instances, max oracle err {worst:.1e}, residual {worst_res:.1e}; {solves} production solves, residual {prod_res:.1e}"
    ))
}

fn stereo_monotone() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10 {
        let s = scene(400 + seed, 20.0);
        let mut cfg = FusionConfig::new(Method::Stereo, RankSpec::uniform(3, 1).unwrap());
        cfg.outer_iters = 20;
        cfg.seed = seed;
        let fit = bcd_fuse(&s.hsi, &s.msi, &s.ops, &cfg).map_err(|e| e.to_string())?;
        check(fit.objective_trace.len() == 1 + 3 * 20, || {
            "trace length".into()
        })?;
        for (step, pair) in fit.objective_trace.windows(2).enumerate() {
            let rise = (pair[1] - pair[0]) / pair[0];
            worst = worst.max(rise);
            check(pair[1] <= pair[0] * (1.0 + 1e-9), || {
                format!("instance {seed}, update {step}: {pair:?}")
            })?;
        }
    }
    Ok(format!(
        "10 instances x 60 updates, largest relative change {worst:.1e}"
    ))
}

fn admm_optimality() -> Outcome {
    let mut g = rng(105);
    let (mut worst_obj, mut worst_gap): (f64, f64) = (0.0, 0.0);
    for trial in 0..20 {
        let s = scene(500 + trial, 5.0);
        let f = random_btd_factors::<f64>([8, 8, 6], &s.truth.rank, 600 + trial).unwrap();
        let block = Block::CYCLE[g.random_range(0..3)];
        let oracle = projected_gradient_oracle(&s, &f, block);
        let j_star = objective(&with_block(&f, block, &oracle), &s.hsi, &s.msi, &s.ops).unwrap();
        let w = build_subproblem(block, &f, &s.hsi, &s.msi, &s.ops, Rho::Auto)
            .map_err(|e| e.to_string())?;
        let (z, w) = admm_nn_block(w, 500).map_err(|e| e.to_string())?;
        let gap = feasibility_gap(&w);
        let z = if block == Block::C { z.transpose() } else { z };
        let j = objective(&with_block(&f, block, &z), &s.hsi, &s.msi, &s.ops).unwrap();
        let rel = (j - j_star).abs() / j_star;
        worst_obj = worst_obj.max(rel);
        worst_gap = worst_gap.max(gap);
        check(rel <= 1e-6, || {
            format!("trial {trial} {block:?}: J {j} vs oracle {j_star}")
        })?;
        check(gap <= 1e-6, || {
            format!("trial {trial} {block:?}: gap {gap:e}")
        })?;
    }
    Ok(format!(
        "20 instances, objective gap {worst_obj:.1e}, feasibility gap {worst_gap:.1e}"
    ))
}

fn recovery(s: &RecoveryScene, fitted: &mut Option<Tensor3<f64>>) -> Outcome {
    let ident =
        check_coupled_identifiability(27, 27, 4, 9, 9, &s.truth.rank).map_err(|e| e.to_string())?;
    check(ident.holds(), || {
        "scene fails the identifiability conditions".into()
    })?;
    let start = Instant::now();
    let mut parts = Vec::new();
    for method in [Method::CnnBtd, Method::TwoStage] {
        let cfg = warm_config(s, method);
        let fit = bcd_fuse(&s.hsi, &s.msi, &s.ops, &cfg).map_err(|e| format!("{method}: {e}"))?;
        check(fit.iters_run <= 50, || {
            format!("{method}: {} sweeps", fit.iters_run)
        })?;
        let snr = r_snr(&s.sri, &fit.sri_estimate).unwrap();
        check(snr >= 40.0, || format!("{method}: R-SNR {snr:.2} dB"))?;
        parts.push(format!("{method} {snr:.1} dB"));
        if method == Method::CnnBtd {
            *fitted = Some(fit.sri_estimate);
        }
    }
    let t = within_time(start, 60.0)?;
    Ok(format!("{}, {t:.2} s", parts.join(", ")))
}

fn identifiability() -> Outcome {
    let large =
        check_coupled_identifiability(145, 145, 4, 29, 29, &RankSpec::uniform(10, 20).unwrap())
            .unwrap();
    check(!large.holds(), || {
        "145x145x4 / 29x29 with R=10, L=20 reported identifiable".into()
    })?;
    let small =
        check_coupled_identifiability(27, 27, 4, 9, 9, &RankSpec::uniform(3, 2).unwrap()).unwrap();
    check(small.holds(), || {
        "27x27x4 / 9x9 with R=3, L=2 reported not identifiable".into()
    })?;
    Ok("large setting rejected, recovery setting accepted".into())
}

fn noise() -> Outcome {
    let t = Tensor3::from_fn([100, 100, 20], |i, j, k| {
        1.0 + ((3 * i + 5 * j + 7 * k) % 17) as f64 / 4.0
    })
    .unwrap();
    let noisy = add_noise(
        &t,
        &NoiseSpec {
            snr_db: 30.0,
            seed: 0,
        },
    )
    .map_err(|e| e.to_string())?;
    let realized = realized_snr_db(&t, &noisy).unwrap();
    check((realized - 30.0).abs() <= 0.05, || {
        format!("realized {realized:.4} dB")
    })?;
    Ok(format!("realized {realized:.4} dB at 30 dB target"))
}

fn metric_identities() -> Outcome {
    let mut g = rng(109);
    for _ in 0..50 {
        // CC needs at least two pixels per band
        let dims = [
            g.random_range(2..=6),
            g.random_range(1..=6),
            g.random_range(2..=6),
        ];
        let r = Tensor3::from_fn(dims, |_, _, _| g.random_range(0.1..1.0)).unwrap();
        let d = g.random_range(1.0..8.0);
        let same = evaluate(&r, &r, d).map_err(|e| e.to_string())?;
        check(same.r_snr_db == metrics::R_SNR_CAP_DB, || {
            format!("R-SNR {}", same.r_snr_db)
        })?;
        check(same.sam_rad == 0.0 && same.ergas == 0.0, || {
            format!("{same:?}")
        })?;
        check((same.cc - 1.0).abs() <= 1e-12, || format!("CC {}", same.cc))?;

        let e = Tensor3::from_fn(dims, |_, _, _| g.random_range(0.1..1.0)).unwrap();
        let scales: Vec<f64> = (0..dims[0] * dims[1])
            .map(|_| g.random_range(0.1..10.0))
            .collect();
        let scaled =
            Tensor3::from_fn(dims, |i, j, k| e[(i, j, k)] * scales[i + dims[0] * j]).unwrap();
        let (s0, s1) = (sam(&r, &e).unwrap(), sam(&r, &scaled).unwrap());
        check((s0 - s1).abs() <= 1e-12, || {
            format!("SAM {s0} vs {s1} under pixel scaling")
        })?;

        let gains: Vec<(f64, f64)> = (0..dims[2])
            .map(|_| (g.random_range(0.1..10.0), g.random_range(-5.0..5.0)))
            .collect();
        let affine =
            Tensor3::from_fn(dims, |i, j, k| gains[k].0 * r[(i, j, k)] + gains[k].1).unwrap();
        let c = cc(&r, &affine).unwrap();
        check((c - 1.0).abs() <= 1e-12, || {
            format!("CC {c} under band affine maps")
        })?;

        let e1 = ergas(&r, &e, 1.0).unwrap();
        let ed = ergas(&r, &e, d).unwrap();
        check((ed - e1 / d).abs() <= 1e-12 * e1, || {
            format!("ERGAS {ed} vs {e1}/{d}")
        })?;
    }
    Ok("50 random images: identities and invariances hold".into())
}

fn cpd_specialization(s: &RecoveryScene) -> Outcome {
    let mut cpd = FusionConfig::new(Method::CnnCpd, RankSpec::uniform(3, 2).unwrap());
    cpd.seed = 21;
    cpd.outer_iters = 20;
    let mut btd = cpd.clone();
    btd.method = Method::CnnBtd;
    btd.rank = RankSpec::uniform(3, 1).unwrap();
    let a = bcd_fuse(&s.hsi, &s.msi, &s.ops, &cpd).map_err(|e| e.to_string())?;
    let b = bcd_fuse(&s.hsi, &s.msi, &s.ops, &btd).map_err(|e| e.to_string())?;
    let worst = a
        .sri_estimate
        .data()
        .iter()
        .zip(b.sri_estimate.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    check(worst <= 1e-12, || {
        format!("max elementwise difference {worst:e}")
    })?;
    Ok(format!("max elementwise difference {worst:.1e}"))
}

fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hsr-btd"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn pipeline_run(dir: &Path) -> Result<(Vec<Vec<u8>>, Vec<u8>), String> {
    let spatial = ["--ratio", "3", "--kernel-size", "3", "--sigma", "1.5"];
    let gen = [
        "generate",
        "--dims",
        "27,27,16",
        "--blocks",
        "3",
        "--block-rank",
        "2",
        "--seed",
        "7",
        "--out",
        "sri.hsrt",
    ];
    cli(dir, &gen)?;
    let sim = [
        &[
            "simulate",
            "--sri",
            "sri.hsrt",
            "--out-hsi",
            "hsi.hsrt",
            "--out-msi",
            "msi.hsrt",
            "--seed",
            "3",
        ][..],
        &spatial,
    ]
    .concat();
    cli(dir, &sim)?;
    let fuse = [
        &[
            "fuse", "--hsi", "hsi.hsrt", "--msi", "msi.hsrt", "--out", "est.hsrt", "--method",
            "cnn-btd",
        ][..],
        &[
            "--blocks",
            "3",
            "--block-rank",
            "2",
            "--outer-iters",
            "10",
            "--seed",
            "5",
        ],
        &spatial,
    ]
    .concat();
    cli(dir, &fuse)?;
    let report = cli(
        dir,
        &[
            "evaluate",
            "--reference",
            "sri.hsrt",
            "--estimate",
            "est.hsrt",
            "--ratio",
            "3",
        ],
    )?;
    let files = ["sri.hsrt", "hsi.hsrt", "msi.hsrt", "est.hsrt"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((files, report))
}

fn pipeline() -> Outcome {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (files_a, report_a) = pipeline_run(first.path())?;
    let (files_b, report_b) = pipeline_run(second.path())?;
    check(files_a == files_b, || {
        "tensor files differ between runs".into()
    })?;
    check(report_a == report_b, || {
        "metrics reports differ between runs".into()
    })?;
    let report: MetricsReport = serde_json::from_slice(&report_a).map_err(|e| e.to_string())?;
    Ok(format!(
        "4 files and report identical, R-SNR {:.2} dB",
        report.r_snr_db
    ))
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() -> ExitCode {
    let suite = Instant::now();
    let recovery_data = recovery_scene();
    let mut fitted = None;
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    results.push((1, "product oracles", guarded(products)));
    results.push((2, "unfolding identities", guarded(unfoldings)));
    results.push((
        6,
        "coupled recovery",
        guarded(|| recovery(&recovery_data, &mut fitted)),
    ));
    let replay =
        guarded(|| replay_cnn_btd(&recovery_data, &warm_config(&recovery_data, Method::CnnBtd)));
    results.push((
        3,
        "Sylvester correctness",
        guarded(|| sylvester(&replay, &fitted)),
    ));
    results.push((4, "STEREO monotone descent", guarded(stereo_monotone)));
    results.push((5, "ADMM subproblem optimality", guarded(admm_optimality)));
    results.push((7, "identifiability checker", guarded(identifiability)));
    results.push((8, "noise calibration", guarded(noise)));
    results.push((9, "metric identities", guarded(metric_identities)));
    results.push((
        10,
        "CPD specialization",
        guarded(|| cpd_specialization(&recovery_data)),
    ));
    results.push((11, "pipeline reproducibility", guarded(pipeline)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} ({name}): PASS  {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} ({name}): FAIL  {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        suite.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
