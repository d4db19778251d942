//! Small dense factorizations: symmetric eigendecomposition (cyclic Jacobi),
//! LU with partial pivoting, and Householder least squares.

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

const MAX_JACOBI_SWEEPS: usize = 100;

/// `A = V · diag(values) · Vᵀ` for symmetric `A`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: Mat<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Only the upper triangle is read; the caller is responsible for symmetry.
    pub fn new(a: &Mat<T>) -> Result<Self> {
        ensure_dims!(
            a.is_square(),
            "eigendecomposition needs a square matrix, got {:?}",
            a.shape()
        );
        let n = a.rows();
        let mut m = Mat::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
        let mut v = Mat::identity(n);
        let total = m.frob_norm_sq();
        if !total.is_finite() {
            return Err(Error::Singular(
                "eigendecomposition input is not finite".into(),
            ));
        }
        let eps = T::epsilon();

        for _ in 0..MAX_JACOBI_SWEEPS {
            let off: T = (0..n)
                .flat_map(|j| (0..j).map(move |i| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum();
            if off <= eps * eps * total {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    m[(p, q)] = T::zero();
                    m[(q, p)] = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let values = (0..n).map(|i| m[(i, i)]).collect();
        Ok(SymmetricEigen { values, vectors: v })
    }

    /// Indices of eigenvalues sorted in decreasing order.
    pub fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].partial_cmp(&self.values[a]).unwrap());
        idx
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Fails with [`Error::Singular`] when a pivot falls below
    /// `n·ε·max|a|`.
    pub fn new(a: &Mat<T>) -> Result<Self> {
        ensure_dims!(
            a.is_square(),
            "LU needs a square matrix, got {:?}",
            a.shape()
        );
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let floor = T::from_usize_lossy(n.max(1)) * T::epsilon() * a.max_abs();

        for k in 0..n {
            let (piv, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pmax > floor) {
                return Err(Error::Singular(format!(
                    "pivot {k} of {n} is {:e} (threshold {:e})",
                    pmax.as_f64(),
                    floor.as_f64()
                )));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= d;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == T::zero() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve_mat(&self, b: &Mat<T>) -> Result<Mat<T>> {
        ensure_dims!(
            b.rows() == self.dim(),
            "right-hand side has {} rows, expected {}",
            b.rows(),
            self.dim()
        );
        let mut x = b.clone();
        for j in 0..x.cols() {
            self.solve_in_place(x.col_mut(j));
        }
        Ok(x)
    }
}

/// Minimizes `‖A X − B‖_F` for tall full-column-rank `A` by Householder QR.
///
/// Fails with [`Error::Singular`] when `A` is numerically rank deficient
/// (a diagonal of R below `max(m,n)·ε·max|R_jj|`).
pub fn least_squares<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    let (m, n) = a.shape();
    ensure_dims!(
        b.rows() == m,
        "right-hand side has {} rows, expected {m}",
        b.rows()
    );
    ensure_dims!(m >= n, "least squares needs rows >= cols, got {m}x{n}");
    let mut r = a.clone();
    let mut qtb = b.clone();

    for k in 0..n {
        let norm: T = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sq: T = v.iter().map(|&x| x * x).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        let apply = |mat: &mut Mat<T>, cols: std::ops::Range<usize>| {
            for j in cols {
                let s: T = v
                    .iter()
                    .enumerate()
                    .map(|(t, &vi)| vi * mat[(k + t, j)])
                    .sum();
                let f = T::lit(2.0) * s / vnorm_sq;
                for (t, &vi) in v.iter().enumerate() {
                    mat[(k + t, j)] -= f * vi;
                }
            }
        };
        apply(&mut r, k..n);
        let nb = qtb.cols();
        apply(&mut qtb, 0..nb);
    }

    let rmax = (0..n).fold(T::zero(), |acc, j| acc.max(r[(j, j)].abs()));
    let floor = T::from_usize_lossy(m.max(n)) * T::epsilon() * rmax;
    for j in 0..n {
        if !(r[(j, j)].abs() > floor) {
            return Err(Error::Singular(format!(
                "least-squares matrix is rank deficient: |R[{j},{j}]| = {:e} <= {:e}",
                r[(j, j)].abs().as_f64(),
                floor.as_f64()
            )));
        }
    }

    let mut x = Mat::zeros(n, b.cols());
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = qtb[(i, c)];
            for k in i + 1..n {
                s -= r[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Leading `k` singular triplets of `a` via the eigendecomposition of the
/// smaller Gram matrix. Returns `(U, σ, V)` with `U: m×k`, `V: n×k`.
/// Directions with vanishing singular value come back as zero columns.
pub fn truncated_svd<T: Scalar>(a: &Mat<T>, k: usize) -> Result<(Mat<T>, Vec<T>, Mat<T>)> {
    let (m, n) = a.shape();
    let k = k.min(m).min(n);
    let transpose = m < n;
    let work = if transpose { a.transpose() } else { a.clone() };
    let eig = SymmetricEigen::new(&work.gram())?;
    let order = eig.order_desc();
    let (wm, wn) = work.shape();
    let mut left = Mat::zeros(wm, k);
    let mut right = Mat::zeros(wn, k);
    let mut sigma = Vec::with_capacity(k);
    let top = eig.values[order[0]].max(T::zero());
    for (c, &idx) in order.iter().take(k).enumerate() {
        let s = eig.values[idx].max(T::zero()).sqrt();
        sigma.push(s);
        if s <= T::epsilon().sqrt() * top.sqrt() || s == T::zero() {
            continue;
        }
        let v = eig.vectors.columns(idx, 1);
        let u = work.matmul(&v)?.scale(T::one() / s);
        right.set_columns(c, &v);
        left.set_columns(c, &u);
    }
    Ok(if transpose {
        (right, sigma, left)
    } else {
        (left, sigma, right)
    })
}
