//! Dense third-order tensors, their three unfoldings and mode-n products.
//!
//! Element `(i, j, k)` (0-based) lives at flat index `i + I·j + I·J·k`, so a
//! frontal slab `X(:,:,k)` is a column-major `I × J` matrix. The unfoldings
//! are laid out so the factorized forms of a block-term tensor hold
//! literally:
//!
//! | mode | shape       | entry                            |
//! |------|-------------|----------------------------------|
//! | 1    | `(K·J) × I` | `X₁(k·J + j, i) = X(i,j,k)`      |
//! | 2    | `(K·I) × J` | `X₂(k·I + i, j) = X(i,j,k)`      |
//! | 3    | `(I·J) × K` | `X₃(j·I + i, k) = X(i,j,k)`      |

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, ensure_dims, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Parses the 1-based mode number.
    pub fn from_number(n: usize) -> Result<Mode> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::InvalidArgument(format!(
                "mode must be 1, 2 or 3, got {n}"
            ))),
        }
    }

    #[inline]
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Tensor3 {
            dims,
            data: vec![T::zero(); dims.iter().product()],
        })
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        check_dims(dims)?;
        let n: usize = dims.iter().product();
        ensure_dims!(
            data.len() == n,
            "{} values supplied for a {dims:?} tensor",
            data.len()
        );
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        check_dims(dims)?;
        let [ni, nj, nk] = dims;
        let mut data = Vec::with_capacity(ni * nj * nk);
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..ni {
                    data.push(f(i, j, k));
                }
            }
        }
        Ok(Tensor3 { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Frontal slab `X(:,:,k)` as an `I × J` matrix.
    pub fn slab(&self, k: usize) -> Mat<T> {
        let n = self.dims[0] * self.dims[1];
        Mat::from_col_major(
            self.dims[0],
            self.dims[1],
            self.data[k * n..(k + 1) * n].to_vec(),
        )
        .expect("slab size is consistent")
    }

    /// Spectral fiber `X(i,j,:)`.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<T> {
        let [ni, nj, nk] = self.dims;
        (0..nk)
            .map(|k| self.data[i + ni * j + ni * nj * k])
            .collect()
    }

    pub fn unfold(&self, mode: Mode) -> Mat<T> {
        let [ni, nj, nk] = self.dims;
        match mode {
            Mode::One => Mat::from_fn(nk * nj, ni, |row, i| {
                let (k, j) = (row / nj, row % nj);
                self[(i, j, k)]
            }),
            Mode::Two => Mat::from_fn(nk * ni, nj, |row, j| {
                let (k, i) = (row / ni, row % ni);
                self[(i, j, k)]
            }),
            Mode::Three => Mat::from_col_major(ni * nj, nk, self.data.clone())
                .expect("mode-3 unfolding reuses the flat layout"),
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &Mat<T>, mode: Mode, dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        let [ni, nj, nk] = dims;
        let expect = match mode {
            Mode::One => (nk * nj, ni),
            Mode::Two => (nk * ni, nj),
            Mode::Three => (ni * nj, nk),
        };
        ensure_dims!(
            m.shape() == expect,
            "a mode-{} unfolding of a {dims:?} tensor is {}x{}, got {}x{}",
            mode.axis() + 1,
            expect.0,
            expect.1,
            m.rows(),
            m.cols()
        );
        match mode {
            Mode::One => Self::from_fn(dims, |i, j, k| m[(k * nj + j, i)]),
            Mode::Two => Self::from_fn(dims, |i, j, k| m[(k * ni + i, j)]),
            Mode::Three => Self::from_vec(dims, m.data().to_vec()),
        }
    }

    /// `t ×_mode p`: every mode-`mode` fiber is multiplied by `p`.
    pub fn mode_product(&self, p: &Mat<T>, mode: Mode) -> Result<Self> {
        let [ni, nj, nk] = self.dims;
        let axis = mode.axis();
        ensure_dims!(
            p.cols() == self.dims[axis],
            "mode-{} product needs {} columns, operator is {}x{}",
            axis + 1,
            self.dims[axis],
            p.rows(),
            p.cols()
        );
        let mut dims = self.dims;
        dims[axis] = p.rows();
        check_dims(dims)?;
        match mode {
            Mode::One => {
                let mut data = Vec::with_capacity(dims.iter().product());
                for k in 0..nk {
                    data.extend(p.matmul(&self.slab(k))?.into_data());
                }
                Self::from_vec(dims, data)
            }
            Mode::Two => {
                let pt = p.transpose();
                let mut data = Vec::with_capacity(dims.iter().product());
                for k in 0..nk {
                    data.extend(self.slab(k).matmul(&pt)?.into_data());
                }
                Self::from_vec(dims, data)
            }
            Mode::Three => {
                let x3 = Mat::from_col_major(ni * nj, nk, self.data.clone())?;
                Self::from_vec(dims, x3.matmul(&p.transpose())?.into_data())
            }
        }
    }

    pub fn frob_norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frob_norm(&self) -> T {
        self.frob_norm_sq().sqrt()
    }

    pub fn sub(&self, rhs: &Tensor3<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &Tensor3<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn zip_with(&self, rhs: &Tensor3<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_dims!(
            self.dims == rhs.dims,
            "tensor dims {:?} and {:?} differ",
            self.dims,
            rhs.dims
        );
        Ok(Tensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `‖self − rhs‖_F / ‖rhs‖_F`.
    pub fn rel_diff(&self, rhs: &Tensor3<T>) -> Result<T> {
        Ok(self.sub(rhs)?.frob_norm() / rhs.frob_norm().max(T::min_positive_value()))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    ensure_arg!(
        dims.iter().all(|&d| d >= 1),
        "tensor dims must all be >= 1, got {dims:?}"
    );
    Ok(())
}

impl<T> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &T {
        let [ni, nj, nk] = self.dims;
        debug_assert!(i < ni && j < nj && k < nk);
        &self.data[i + ni * (j + nj * k)]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut T {
        let [ni, nj, nk] = self.dims;
        debug_assert!(i < ni && j < nj && k < nk);
        &mut self.data[i + ni * (j + nj * k)]
    }
}
