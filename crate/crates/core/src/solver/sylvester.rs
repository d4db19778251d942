//! Generalized Sylvester equations `H1·X·H2 + H3·X·H4 = H5`.
//!
//! Two structured forms are supported, which cover every block update of the
//! coupled solver:
//!
//! * **row form** (`H3 = c·I`, `H1` symmetric): with `H1 = Q·D·Qᵀ` and
//!   `Y = QᵀX`, row `i` of `Y` solves `y_i·(d_i·H2 + c·H4) = (QᵀH5)_i`.
//! * **column form** (`H2 = c·I`, `H4` symmetric): with `H4 = Q·D·Qᵀ` and
//!   `Y = XQ`, column `j` solves `(c·H1 + d_j·H3)·y_j = (H5·Q)_j`.
//!
//! The small per-row (per-column) systems are factorized once in
//! [`SylvesterSolver::new`], so repeated solves with a changing right-hand
//! side (the ADMM inner loop) only pay for back-substitution.

use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{kronecker, Lu, Mat, SymmetricEigen};
use crate::scalar::Scalar;

/// Accepted relative residual `‖H1XH2 + H3XH4 − H5‖ / ‖H5‖` for `f64`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Largest `rows·cols` handled by [`sylvester_solve_dense`].
pub const DENSE_MAX_UNKNOWNS: usize = 1024;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Form<T> {
    Rows { q: Mat<T>, systems: Vec<Lu<T>> },
    Cols { q: Mat<T>, systems: Vec<Lu<T>> },
}

/// Prepared solver for a fixed coefficient quadruple.
#[derive(Debug, Clone)]
pub struct SylvesterSolver<T> {
    h: [Mat<T>; 4],
    form: Form<T>,
}

fn residual_tol<T: Scalar>() -> T {
    T::lit(RESIDUAL_TOL).max(T::epsilon() * T::lit(1e3))
}

impl<T: Scalar> SylvesterSolver<T> {
    pub fn new(h1: &Mat<T>, h2: &Mat<T>, h3: &Mat<T>, h4: &Mat<T>) -> Result<Self> {
        let m = h1.rows();
        let n = h2.rows();
        h1.expect_square(m, "H1")?;
        h2.expect_square(n, "H2")?;
        h3.expect_square(m, "H3")?;
        h4.expect_square(n, "H4")?;
        let sym = T::lit(SYMMETRY_TOL);

        let form = if let Some(c) = h3.scaled_identity_factor() {
            if !h1.is_symmetric(sym) {
                return Err(Error::InvalidArgument(
                    "row form needs a symmetric H1".into(),
                ));
            }
            let eig = SymmetricEigen::new(h1)?;
            let systems = eig
                .values
                .par_iter()
                .enumerate()
                .map(|(i, &d)| {
                    // y_i M = f_i  <=>  Mᵀ y_iᵀ = f_iᵀ
                    let mt = Mat::from_fn(n, n, |r, s| d * h2[(s, r)] + c * h4[(s, r)]);
                    Lu::new(&mt).map_err(|e| {
                        Error::Singular(format!(
                            "row {i} (H1 eigenvalue {:e}, H3 = {:e}·I): {e}",
                            d.as_f64(),
                            c.as_f64()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Form::Rows {
                q: eig.vectors,
                systems,
            }
        } else if let Some(c) = h2.scaled_identity_factor() {
            if !h4.is_symmetric(sym) {
                return Err(Error::InvalidArgument(
                    "column form needs a symmetric H4".into(),
                ));
            }
            let eig = SymmetricEigen::new(h4)?;
            let systems = eig
                .values
                .par_iter()
                .enumerate()
                .map(|(j, &d)| {
                    let sys = Mat::from_fn(m, m, |r, s| c * h1[(r, s)] + d * h3[(r, s)]);
                    Lu::new(&sys).map_err(|e| {
                        Error::Singular(format!(
                            "column {j} (H4 eigenvalue {:e}, H2 = {:e}·I): {e}",
                            d.as_f64(),
                            c.as_f64()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Form::Cols {
                q: eig.vectors,
                systems,
            }
        } else {
            return Err(Error::InvalidArgument(
                "unsupported Sylvester structure: neither H3 nor H2 is a multiple of the identity; \
                 use sylvester_solve_dense for small general systems"
                    .into(),
            ));
        };
        Ok(SylvesterSolver {
            h: [h1.clone(), h2.clone(), h3.clone(), h4.clone()],
            form,
        })
    }

    /// `(rows, cols)` of the unknown.
    pub fn shape(&self) -> (usize, usize) {
        (self.h[0].rows(), self.h[1].rows())
    }

    fn solve_once(&self, h5: &Mat<T>) -> Result<Mat<T>> {
        match &self.form {
            Form::Rows { q, systems } => {
                // columns of (QᵀH5)ᵀ are the rows to solve for
                let mut yt = h5.t_matmul(q)?;
                let n = yt.rows();
                yt.data_mut()
                    .par_chunks_mut(n.max(1))
                    .zip(systems.par_iter())
                    .for_each(|(col, lu)| lu.solve_in_place(col));
                q.matmul(&yt.transpose())
            }
            Form::Cols { q, systems } => {
                let mut y = h5.matmul(q)?;
                let m = y.rows();
                y.data_mut()
                    .par_chunks_mut(m.max(1))
                    .zip(systems.par_iter())
                    .for_each(|(col, lu)| lu.solve_in_place(col));
                y.matmul(&q.transpose())
            }
        }
    }

    /// Solves for `X`, with one step of iterative refinement when the first
    /// residual misses [`RESIDUAL_TOL`].
    pub fn solve(&self, h5: &Mat<T>) -> Result<Mat<T>> {
        ensure_dims!(
            h5.shape() == self.shape(),
            "H5 is {:?}, expected {:?}",
            h5.shape(),
            self.shape()
        );
        let [h1, h2, h3, h4] = &self.h;
        let scale = h5.frob_norm();
        let tol = residual_tol::<T>();
        let mut x = self.solve_once(h5)?;
        let mut res = sylvester_residual(h1, h2, h3, h4, &x, h5)?;
        if res.frob_norm() > tol * scale {
            let dx = self.solve_once(&res.scale(-T::one()))?;
            x = x.add(&dx)?;
            res = sylvester_residual(h1, h2, h3, h4, &x, h5)?;
        }
        let r = res.frob_norm();
        if !(r <= tol * scale) && !(scale == T::zero() && r == T::zero()) {
            return Err(Error::Singular(format!(
                "Sylvester residual {:e} exceeds {:e}·‖H5‖ = {:e}",
                r.as_f64(),
                tol.as_f64(),
                (tol * scale).as_f64()
            )));
        }
        Ok(x)
    }
}

/// `H1·X·H2 + H3·X·H4 − H5`.
pub fn sylvester_residual<T: Scalar>(
    h1: &Mat<T>,
    h2: &Mat<T>,
    h3: &Mat<T>,
    h4: &Mat<T>,
    x: &Mat<T>,
    h5: &Mat<T>,
) -> Result<Mat<T>> {
    let left = h1.matmul(x)?.matmul(h2)?;
    let right = h3.matmul(x)?.matmul(h4)?;
    left.add(&right)?.sub(h5)
}

/// One-shot structured solve; see [`SylvesterSolver`].
pub fn sylvester_solve<T: Scalar>(
    h1: &Mat<T>,
    h2: &Mat<T>,
    h3: &Mat<T>,
    h4: &Mat<T>,
    h5: &Mat<T>,
) -> Result<Mat<T>> {
    SylvesterSolver::new(h1, h2, h3, h4)?.solve(h5)
}

/// Solves `(H2ᵀ ⊗ H1 + H4ᵀ ⊗ H3)·vec(X) = vec(H5)` directly. Any structure is
/// accepted, but only up to [`DENSE_MAX_UNKNOWNS`] unknowns.
pub fn sylvester_solve_dense<T: Scalar>(
    h1: &Mat<T>,
    h2: &Mat<T>,
    h3: &Mat<T>,
    h4: &Mat<T>,
    h5: &Mat<T>,
) -> Result<Mat<T>> {
    let (m, n) = h5.shape();
    h1.expect_square(m, "H1")?;
    h3.expect_square(m, "H3")?;
    h2.expect_square(n, "H2")?;
    h4.expect_square(n, "H4")?;
    ensure_dims!(
        m * n <= DENSE_MAX_UNKNOWNS,
        "dense Sylvester solve limited to {DENSE_MAX_UNKNOWNS} unknowns, got {}",
        m * n
    );
    let k = kronecker(&h2.transpose(), h1).add(&kronecker(&h4.transpose(), h3))?;
    let lu = Lu::new(&k)?;
    let mut v = h5.data().to_vec();
    lu.solve_in_place(&mut v);
    Mat::from_col_major(m, n, v)
}
