//! Block-term factors in rank-`(L_r, L_r, 1)` terms and the identities that
//! tie them to tensors: reconstruction, factorized unfoldings, degraded
//! factor forms and the generic-uniqueness dimension checks.
//!
//! A CPD with `F` components is the special case `R = F`, all `L_r = 1`.

use serde::{Deserialize, Serialize};

use crate::degradation::DegradationOps;
use crate::error::{ensure_arg, ensure_dims, Error, Result};
use crate::linalg::{pw_khatri_rao, Mat, Partition};
use crate::scalar::Scalar;
use crate::tensor::{Mode, Tensor3};

/// Number of blocks `R` and per-block ranks `L_r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankSpec {
    part: Partition,
}

impl RankSpec {
    pub fn new(block_ranks: Vec<usize>) -> Result<Self> {
        Ok(RankSpec {
            part: Partition::new(block_ranks)?,
        })
    }

    pub fn uniform(blocks: usize, rank: usize) -> Result<Self> {
        ensure_arg!(blocks >= 1, "at least one block is required");
        Ok(RankSpec {
            part: Partition::uniform(blocks, rank)?,
        })
    }

    /// Rank-`F` CPD as `F` blocks of rank one.
    pub fn cpd(components: usize) -> Result<Self> {
        Self::uniform(components, 1)
    }

    pub fn blocks(&self) -> usize {
        self.part.blocks()
    }

    pub fn block_ranks(&self) -> &[usize] {
        self.part.widths()
    }

    /// `Σ L_r`, the column count of `A` and `B`.
    pub fn total(&self) -> usize {
        self.part.total()
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    /// The shared `L` when every block has the same rank.
    pub fn uniform_rank(&self) -> Option<usize> {
        let w = self.part.widths();
        w.iter().all(|&l| l == w[0]).then_some(w[0])
    }

    pub fn is_cpd(&self) -> bool {
        self.uniform_rank() == Some(1)
    }
}

/// `X = Σ_r (A_r B_rᵀ) ∘ c_r` with `A = [A_1 … A_R]`, `B = [B_1 … B_R]`,
/// `C = [c_1 … c_R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtdFactors<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub rank: RankSpec,
}

impl<T: Scalar> BtdFactors<T> {
    pub fn new(a: Mat<T>, b: Mat<T>, c: Mat<T>, rank: RankSpec) -> Result<Self> {
        let f = BtdFactors { a, b, c, rank };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.rank.total();
        ensure_dims!(
            self.a.cols() == total,
            "A has {} columns, rank spec needs {total}",
            self.a.cols()
        );
        ensure_dims!(
            self.b.cols() == total,
            "B has {} columns, rank spec needs {total}",
            self.b.cols()
        );
        ensure_dims!(
            self.c.cols() == self.rank.blocks(),
            "C has {} columns, rank spec has {} blocks",
            self.c.cols(),
            self.rank.blocks()
        );
        ensure_arg!(
            self.a.rows() >= 1 && self.b.rows() >= 1 && self.c.rows() >= 1,
            "factor matrices need at least one row"
        );
        Ok(())
    }

    /// `(I, J, K)` of the tensor these factors describe.
    pub fn dims(&self) -> [usize; 3] {
        [self.a.rows(), self.b.rows(), self.c.rows()]
    }

    pub fn block_a(&self, r: usize) -> Mat<T> {
        let off = self.rank.partition().offset(r);
        self.a.columns(off, self.rank.block_ranks()[r])
    }

    pub fn block_b(&self, r: usize) -> Mat<T> {
        let off = self.rank.partition().offset(r);
        self.b.columns(off, self.rank.block_ranks()[r])
    }

    pub fn is_nonnegative(&self) -> bool {
        [&self.a, &self.b, &self.c]
            .iter()
            .all(|m| m.data().iter().all(|&v| v >= T::zero()))
    }

    pub fn all_finite(&self) -> bool {
        self.a.all_finite() && self.b.all_finite() && self.c.all_finite()
    }

    pub fn cast<U: Scalar>(&self) -> BtdFactors<U> {
        BtdFactors {
            a: self.a.cast(),
            b: self.b.cast(),
            c: self.c.cast(),
            rank: self.rank.clone(),
        }
    }
}

/// Abundance matrix `S = [vec(A_1B_1ᵀ), …, vec(A_RB_Rᵀ)]` of an `I × J` scene.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceSet<T> {
    pub s: Mat<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> AbundanceSet<T> {
    pub fn from_matrix(s: Mat<T>, rows: usize, cols: usize) -> Result<Self> {
        ensure_dims!(
            s.rows() == rows * cols,
            "abundance matrix has {} rows, expected {rows}·{cols}",
            s.rows()
        );
        Ok(AbundanceSet { s, rows, cols })
    }

    pub fn blocks(&self) -> usize {
        self.s.cols()
    }

    /// Abundance map `S_r` as an `I × J` matrix.
    pub fn map(&self, r: usize) -> Mat<T> {
        Mat::from_col_major(self.rows, self.cols, self.s.col(r).to_vec())
            .expect("consistent map size")
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

pub fn abundances<T: Scalar>(f: &BtdFactors<T>) -> Result<AbundanceSet<T>> {
    f.validate()?;
    let (ni, nj) = (f.a.rows(), f.b.rows());
    let mut s = Mat::zeros(ni * nj, f.rank.blocks());
    for r in 0..f.rank.blocks() {
        let map = f.block_a(r).matmul(&f.block_b(r).transpose())?;
        s.set_columns(r, &Mat::from_col_major(ni * nj, 1, map.into_data())?);
    }
    AbundanceSet::from_matrix(s, ni, nj)
}

pub fn btd_reconstruct<T: Scalar>(f: &BtdFactors<T>) -> Result<Tensor3<T>> {
    let x3 = btd_unfold_direct(f, Mode::Three)?;
    Tensor3::fold(&x3, Mode::Three, f.dims())
}

/// Unfoldings straight from the factors:
/// `X₁ = (C ⊙ₚ B)Aᵀ`, `X₂ = (C ⊙ₚ A)Bᵀ`, `X₃ = S Cᵀ`.
pub fn btd_unfold_direct<T: Scalar>(f: &BtdFactors<T>, mode: Mode) -> Result<Mat<T>> {
    f.validate()?;
    let part = f.rank.partition();
    match mode {
        Mode::One => pw_khatri_rao(&f.c, &f.b, part)?.matmul(&f.a.transpose()),
        Mode::Two => pw_khatri_rao(&f.c, &f.a, part)?.matmul(&f.b.transpose()),
        Mode::Three => abundances(f)?.s.matmul(&f.c.transpose()),
    }
}

/// Factors of the degraded pair: HSI `({P1 A_r}, {P2 B_r}, C)` and
/// MSI `({A_r}, {B_r}, P3 C)`.
pub fn degrade_factors<T: Scalar>(
    f: &BtdFactors<T>,
    ops: &DegradationOps<T>,
) -> Result<(BtdFactors<T>, BtdFactors<T>)> {
    f.validate()?;
    ensure_dims!(
        ops.p1.cols() == f.a.rows() && ops.p2.cols() == f.b.rows() && ops.p3.cols() == f.c.rows(),
        "operators of widths ({}, {}, {}) do not match factor heights {:?}",
        ops.p1.cols(),
        ops.p2.cols(),
        ops.p3.cols(),
        f.dims()
    );
    let hsi = BtdFactors {
        a: ops.p1.matmul(&f.a)?,
        b: ops.p2.matmul(&f.b)?,
        c: f.c.clone(),
        rank: f.rank.clone(),
    };
    let msi = BtdFactors {
        a: f.a.clone(),
        b: f.b.clone(),
        c: ops.p3.matmul(&f.c)?,
        rank: f.rank.clone(),
    };
    Ok((hsi, msi))
}

/// One inequality of a uniqueness condition, `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub lhs: u64,
    pub rhs: u64,
}

impl Clause {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// Outcome of a sufficient-condition check. Failing the check does not
/// mean the model is unidentifiable; callers treat it as advisory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentifiabilityReport {
    pub clauses: Vec<Clause>,
}

impl IdentifiabilityReport {
    pub fn holds(&self) -> bool {
        self.clauses.iter().all(Clause::holds)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.holds())
    }
}

fn uniform_rank_for_check(rank: &RankSpec) -> Result<u64> {
    rank.uniform_rank().map(|l| l as u64).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "uniqueness conditions are stated for equal block ranks, got {:?}",
            rank.block_ranks()
        ))
    })
}

fn kruskal_clauses(i: u64, j: u64, k: u64, r: u64, l: u64) -> [Clause; 2] {
    [
        Clause {
            name: "spatial size I·J >= L²·R",
            lhs: i * j,
            rhs: l * l * r,
        },
        Clause {
            name: "min(⌊I/L⌋,R) + min(⌊J/L⌋,R) + min(K,R) >= 2R+2",
            lhs: (i / l).min(r) + (j / l).min(r) + k.min(r),
            rhs: 2 * r + 2,
        },
    ]
}

/// Generic essential uniqueness of a rank-`(L,L,1)` BTD of an `I × J × K`
/// tensor (dimension inequalities only).
pub fn check_btd_identifiability(
    i: usize,
    j: usize,
    k: usize,
    rank: &RankSpec,
) -> Result<IdentifiabilityReport> {
    let l = uniform_rank_for_check(rank)?;
    let r = rank.blocks() as u64;
    Ok(IdentifiabilityReport {
        clauses: kruskal_clauses(i as u64, j as u64, k as u64, r, l).to_vec(),
    })
}

/// Generic identifiability of the super-resolution image from the coupled
/// HSI/MSI model: the MSI must satisfy the BTD condition and the HSI must
/// have at least `R` pixels.
pub fn check_coupled_identifiability(
    i_m: usize,
    j_m: usize,
    k_m: usize,
    i_h: usize,
    j_h: usize,
    rank: &RankSpec,
) -> Result<IdentifiabilityReport> {
    let l = uniform_rank_for_check(rank)?;
    let r = rank.blocks() as u64;
    let [spatial, kruskal] = kruskal_clauses(i_m as u64, j_m as u64, k_m as u64, r, l);
    Ok(IdentifiabilityReport {
        clauses: vec![
            spatial,
            Clause {
                name: "HSI pixels I_H·J_H >= R",
                lhs: (i_h * j_h) as u64,
                rhs: r,
            },
            kruskal,
        ],
    })
}
