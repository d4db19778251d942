use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, ensure_dims, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Column partition `(L_1, …, L_R)` of a block matrix `[A_1, …, A_R]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    widths: Vec<usize>,
}

impl Partition {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        ensure_arg!(!widths.is_empty(), "a partition needs at least one block");
        ensure_arg!(
            widths.iter().all(|&w| w >= 1),
            "block widths must be positive, got {widths:?}"
        );
        Ok(Partition { widths })
    }

    pub fn uniform(blocks: usize, width: usize) -> Result<Self> {
        Self::new(vec![width; blocks])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn blocks(&self) -> usize {
        self.widths.len()
    }

    pub fn total(&self) -> usize {
        self.widths.iter().sum()
    }

    /// First column of block `r`.
    pub fn offset(&self, r: usize) -> usize {
        self.widths[..r].iter().sum()
    }

    /// `(offset, width)` for every block, in order.
    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.iter().scan(0, |off, &w| {
            let start = *off;
            *off += w;
            Some((start, w))
        })
    }
}

/// Kronecker product `a ⊗ b`; block `(i, j)` is `a(i,j)·b`.
pub fn kronecker<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Mat::zeros(ra * rb, ca * cb);
    for ja in 0..ca {
        for jb in 0..cb {
            let col = out.col_mut(ja * cb + jb);
            for (ia, &av) in a.col(ja).iter().enumerate() {
                for (ib, &bv) in b.col(jb).iter().enumerate() {
                    col[ia * rb + ib] = av * bv;
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker product: column `f` is `a(:,f) ⊗ b(:,f)`.
pub fn khatri_rao<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    ensure_dims!(
        a.cols() == b.cols(),
        "Khatri-Rao operands need equal column counts, got {} and {}",
        a.cols(),
        b.cols()
    );
    let rb = b.rows();
    let mut out = Mat::zeros(a.rows() * rb, a.cols());
    for f in 0..a.cols() {
        let bcol = b.col(f);
        let col = out.col_mut(f);
        for (ia, &av) in a.col(f).iter().enumerate() {
            for (ib, &bv) in bcol.iter().enumerate() {
                col[ia * rb + ib] = av * bv;
            }
        }
    }
    Ok(out)
}

/// Partition-wise Khatri-Rao product `[c_1 ⊗ A_1, …, c_R ⊗ A_R]`.
pub fn pw_khatri_rao<T: Scalar>(c: &Mat<T>, a: &Mat<T>, part: &Partition) -> Result<Mat<T>> {
    ensure_dims!(
        c.cols() == part.blocks(),
        "left operand has {} columns but the partition has {} blocks",
        c.cols(),
        part.blocks()
    );
    ensure_dims!(
        a.cols() == part.total(),
        "right operand has {} columns but the partition covers {}",
        a.cols(),
        part.total()
    );
    let ra = a.rows();
    let mut out = Mat::zeros(c.rows() * ra, a.cols());
    for (r, (off, w)) in part.ranges().enumerate() {
        let ccol = c.col(r);
        for l in off..off + w {
            let acol = a.col(l);
            let col = out.col_mut(l);
            for (k, &cv) in ccol.iter().enumerate() {
                for (i, &av) in acol.iter().enumerate() {
                    col[k * ra + i] = cv * av;
                }
            }
        }
    }
    Ok(out)
}
