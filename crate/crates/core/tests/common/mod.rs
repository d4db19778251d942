//! Brute-force reference implementations used by the integration tests.
//! Everything here works on plain nested loops over `Vec<Vec<f64>>` or
//! index arithmetic so it shares no code paths with the library.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod coupled;

use hsr_btd::{BtdFactors, Mat, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rand_pos_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
}

pub fn to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn mat_rel_err(got: &Mat<f64>, want: &[Vec<f64>]) -> f64 {
    assert_eq!(got.rows(), want.len());
    let flat_got: Vec<f64> = (0..got.rows())
        .flat_map(|i| (0..got.cols()).map(move |j| (i, j)))
        .map(|ij| got[ij])
        .collect();
    let flat_want: Vec<f64> = want.iter().flatten().copied().collect();
    rel_err(&flat_got, &flat_want)
}

pub fn kron_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn khatri_rao_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ra, rb, f) = (a.len(), b.len(), a[0].len());
    let mut out = vec![vec![0.0; f]; ra * rb];
    for col in 0..f {
        for i in 0..ra {
            for k in 0..rb {
                out[i * rb + k][col] = a[i][col] * b[k][col];
            }
        }
    }
    out
}

/// `[c_r ⊗ A_r]` by explicit loops over blocks.
pub fn pw_khatri_rao_oracle(c: &[Vec<f64>], a: &[Vec<f64>], widths: &[usize]) -> Vec<Vec<f64>> {
    let (rc, ra) = (c.len(), a.len());
    let total: usize = widths.iter().sum();
    let mut out = vec![vec![0.0; total]; rc * ra];
    let mut off = 0;
    for (r, &w) in widths.iter().enumerate() {
        for l in 0..w {
            for k in 0..rc {
                for i in 0..ra {
                    out[k * ra + i][off + l] = c[k][r] * a[i][off + l];
                }
            }
        }
        off += w;
    }
    out
}

/// `X(i,j,k) = Σ_r Σ_l A(i,l) B(j,l) C(k,r)` entry by entry.
pub fn reconstruct_oracle(f: &BtdFactors<f64>) -> Vec<Vec<Vec<f64>>> {
    let [ni, nj, nk] = f.dims();
    let widths = f.rank.block_ranks().to_vec();
    let mut x = vec![vec![vec![0.0; nk]; nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let mut off = 0;
                let mut s = 0.0;
                for (r, &w) in widths.iter().enumerate() {
                    for l in off..off + w {
                        s += f.a[(i, l)] * f.b[(j, l)] * f.c[(k, r)];
                    }
                    off += w;
                }
                x[i][j][k] = s;
            }
        }
    }
    x
}

pub fn tensor_rel_err(t: &Tensor3<f64>, want: &[Vec<Vec<f64>>]) -> f64 {
    let [ni, nj, nk] = t.dims();
    let mut got = Vec::new();
    let mut exp = Vec::new();
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                got.push(t[(i, j, k)]);
                exp.push(want[i][j][k]);
            }
        }
    }
    rel_err(&got, &exp)
}

/// Unfolding of a nested tensor, following the row/column conventions
/// `X1(k·J+j, i)`, `X2(k·I+i, j)`, `X3(j·I+i, k)`.
pub fn unfold_oracle(x: &[Vec<Vec<f64>>], mode: usize) -> Vec<Vec<f64>> {
    let (ni, nj, nk) = (x.len(), x[0].len(), x[0][0].len());
    let (rows, cols) = match mode {
        1 => (nk * nj, ni),
        2 => (nk * ni, nj),
        _ => (nj * ni, nk),
    };
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let v = x[i][j][k];
                match mode {
                    1 => out[k * nj + j][i] = v,
                    2 => out[k * ni + i][j] = v,
                    _ => out[j * ni + i][k] = v,
                }
            }
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Solves `H1·X·H2 + H3·X·H4 = H5` through the `mn × mn` system
/// `Σ_{k,l} (H1(i,k)H2(l,j) + H3(i,k)H4(l,j)) X(k,l) = H5(i,j)`.
pub fn sylvester_oracle(
    h1: &Mat<f64>,
    h2: &Mat<f64>,
    h3: &Mat<f64>,
    h4: &Mat<f64>,
    h5: &Mat<f64>,
) -> Vec<Vec<f64>> {
    let (m, n) = (h5.rows(), h5.cols());
    let mut sys = vec![vec![0.0; m * n]; m * n];
    let mut rhs = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let eq = i * n + j;
            rhs[eq] = h5[(i, j)];
            for k in 0..m {
                for l in 0..n {
                    sys[eq][k * n + l] = h1[(i, k)] * h2[(l, j)] + h3[(i, k)] * h4[(l, j)];
                }
            }
        }
    }
    let x = gauss_solve(sys, rhs);
    (0..m).map(|i| x[i * n..(i + 1) * n].to_vec()).collect()
}

/// Plain `[rows][cols]` product.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn sym_pos_def(rng: &mut ChaCha8Rng, n: usize) -> Mat<f64> {
    let g = rand_mat(rng, n, n);
    let mut s = g.t_matmul(&g).unwrap();
    s.add_diag(0.5);
    // exact symmetry
    Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

/// `‖H1·X·H2 + H3·X·H4 − H5‖_F` by explicit quadruple sums.
pub fn sylvester_residual_oracle(
    h1: &Mat<f64>,
    h2: &Mat<f64>,
    h3: &Mat<f64>,
    h4: &Mat<f64>,
    x: &Mat<f64>,
    h5: &Mat<f64>,
) -> f64 {
    let (m, n) = x.shape();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..n {
            let mut v = -h5[(i, j)];
            for k in 0..m {
                for l in 0..n {
                    v += (h1[(i, k)] * h2[(l, j)] + h3[(i, k)] * h4[(l, j)]) * x[(k, l)];
                }
            }
            s += v * v;
        }
    }
    s.sqrt()
}
