//! Dense matrix type and the handful of factorizations the solvers need.

mod decomp;
mod mat;
mod products;

pub use decomp::{least_squares, truncated_svd, Lu, SymmetricEigen};
pub use mat::{rel_diff, Mat};
pub use products::{khatri_rao, kronecker, pw_khatri_rao, Partition};
