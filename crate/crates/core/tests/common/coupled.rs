//! Coupled-objective helpers: a small seeded scene, the block gradients
//! written directly from the factorized unfoldings, and a projected-gradient
//! reference solver for the nonnegative block subproblems.

use hsr_btd::*;

pub struct Scene {
    pub truth: BtdFactors<f64>,
    pub hsi: Tensor3<f64>,
    pub msi: Tensor3<f64>,
    pub ops: DegradationOps<f64>,
}

pub fn scene(seed: u64, snr_db: f64) -> Scene {
    let rank = RankSpec::uniform(2, 2).unwrap();
    let truth = random_btd_factors([8, 8, 6], &rank, seed).unwrap();
    let params = DegradationParams {
        kernel_size: 3,
        sigma: 1.0,
        ratio: 2,
        offset: 0,
        srf_source: SrfSource::Uniform,
    };
    let ops = DegradationOps::wald([8, 8, 6], 3, &params).unwrap();
    let (hsi, msi) = apply_degradation(&btd_reconstruct(&truth).unwrap(), &ops).unwrap();
    let hsi = add_noise(&hsi, &NoiseSpec { snr_db, seed }).unwrap();
    let msi = add_noise(
        &msi,
        &NoiseSpec {
            snr_db,
            seed: seed + 1,
        },
    )
    .unwrap();
    Scene {
        truth,
        hsi,
        msi,
        ops,
    }
}

pub fn with_block(f: &BtdFactors<f64>, block: Block, value: &Mat<f64>) -> BtdFactors<f64> {
    let mut g = f.clone();
    match block {
        Block::A => g.a = value.clone(),
        Block::B => g.b = value.clone(),
        Block::C => g.c = value.clone(),
    }
    g
}

pub fn natural_block(f: &BtdFactors<f64>, block: Block) -> Mat<f64> {
    match block {
        Block::A => f.a.clone(),
        Block::B => f.b.clone(),
        Block::C => f.c.clone(),
    }
}

/// Columns `vec(U_r V_rᵀ)` built entry by entry.
pub fn abundance_oracle(u: &Mat<f64>, v: &Mat<f64>, widths: &[usize]) -> Mat<f64> {
    let (ni, nj) = (u.rows(), v.rows());
    let mut out = Mat::zeros(ni * nj, widths.len());
    let mut off = 0;
    for (r, &w) in widths.iter().enumerate() {
        for i in 0..ni {
            for j in 0..nj {
                out[(i + ni * j, r)] = (off..off + w).map(|l| u[(i, l)] * v[(j, l)]).sum();
            }
        }
        off += w;
    }
    out
}

/// Gradient of the coupled objective with respect to A, B or C
/// (not `Cᵀ`), written directly from the factorized unfoldings.
pub fn gradient(s: &Scene, f: &BtdFactors<f64>, block: Block) -> Mat<f64> {
    let (p1, p2, p3) = (&s.ops.p1, &s.ops.p2, &s.ops.p3);
    let part = f.rank.partition();
    let p3c = p3.matmul(&f.c).unwrap();
    match block {
        Block::A | Block::B => {
            let (own, other, p_own, p_other, mode) = match block {
                Block::A => (&f.a, &f.b, p1, p2, Mode::One),
                _ => (&f.b, &f.a, p2, p1, Mode::Two),
            };
            let g = pw_khatri_rao(&f.c, &p_other.matmul(other).unwrap(), part).unwrap();
            let m = pw_khatri_rao(&p3c, other, part).unwrap();
            let res_h = s
                .hsi
                .unfold(mode)
                .sub(&g.matmul(&p_own.matmul(own).unwrap().transpose()).unwrap())
                .unwrap();
            let res_m = s
                .msi
                .unfold(mode)
                .sub(&m.matmul(&own.transpose()).unwrap())
                .unwrap();
            let gh = p_own.t_matmul(&res_h.t_matmul(&g).unwrap()).unwrap();
            let gm = res_m.t_matmul(&m).unwrap();
            gh.add(&gm).unwrap().scale(-2.0)
        }
        Block::C => {
            let widths = f.rank.block_ranks();
            let w_h =
                abundance_oracle(&p1.matmul(&f.a).unwrap(), &p2.matmul(&f.b).unwrap(), widths);
            let w_m = abundance_oracle(&f.a, &f.b, widths);
            let res_h = s
                .hsi
                .unfold(Mode::Three)
                .sub(&w_h.matmul(&f.c.transpose()).unwrap())
                .unwrap();
            let res_m = s
                .msi
                .unfold(Mode::Three)
                .sub(&w_m.matmul(&p3c.transpose()).unwrap())
                .unwrap();
            let gh = res_h.t_matmul(&w_h).unwrap();
            let gm = p3.t_matmul(&res_m.t_matmul(&w_m).unwrap()).unwrap();
            gh.add(&gm).unwrap().scale(-2.0)
        }
    }
}

pub fn fd_gradient(s: &Scene, f: &BtdFactors<f64>, block: Block, h: f64) -> Mat<f64> {
    let x0 = natural_block(f, block);
    Mat::from_fn(x0.rows(), x0.cols(), |i, j| {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus.data_mut()[i + j * x0.rows()] += h;
        minus.data_mut()[i + j * x0.rows()] -= h;
        let jp = objective(&with_block(f, block, &plus), &s.hsi, &s.msi, &s.ops).unwrap();
        let jm = objective(&with_block(f, block, &minus), &s.hsi, &s.msi, &s.ops).unwrap();
        (jp - jm) / (2.0 * h)
    })
}

/// Accelerated projected gradient with adaptive restart on one block.
pub fn projected_gradient_oracle(s: &Scene, f: &BtdFactors<f64>, block: Block) -> Mat<f64> {
    let zero = with_block(f, block, &natural_block(f, block).scale(0.0));
    let g0 = gradient(s, &zero, block);
    let lin = |x: &Mat<f64>| {
        gradient(s, &with_block(f, block, x), block)
            .sub(&g0)
            .unwrap()
    };
    let mut v = natural_block(f, block).map(|_| 1.0);
    let mut lip = 0.0;
    for _ in 0..200 {
        let w = lin(&v);
        lip = w.frob_norm() / v.frob_norm();
        v = w.scale(1.0 / w.frob_norm());
    }
    let step = 1.0 / (1.01 * lip);
    let mut x = natural_block(f, block).positive_part();
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let value = |x: &Mat<f64>| objective(&with_block(f, block, x), &s.hsi, &s.msi, &s.ops).unwrap();
    let mut fx = value(&x);
    for _ in 0..20000 {
        let g = gradient(s, &with_block(f, block, &y), block);
        let next = y.sub(&g.scale(step)).unwrap().positive_part();
        let f_next = value(&next);
        if f_next > fx {
            // restart momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next
            .add(&next.sub(&x).unwrap().scale((t - 1.0) / t_next))
            .unwrap();
        x = next;
        fx = f_next;
        t = t_next;
    }
    x
}
