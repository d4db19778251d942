use crate::error::{ensure_arg, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::solver::subproblem::AdmmWorkspace;
use crate::solver::sylvester::SylvesterSolver;

/// Nonnegative block update by ADMM on the split `X = Z, Z ≥ 0`:
///
/// ```text
/// repeat inner_iters times:
///     H5 = H̃5 + ρ(Z + U)
///     X  = solve H1·X·H2 + H3·X·H4 = H5
///     Z  = [X − U]₊
///     U  = U + Z − X
/// ```
///
/// Returns `Z` (always feasible) and the workspace for warm starts.
pub fn admm_nn_block<T: Scalar>(
    mut w: AdmmWorkspace<T>,
    inner_iters: usize,
) -> Result<(Mat<T>, AdmmWorkspace<T>)> {
    ensure_arg!(inner_iters >= 1, "inner_iters must be at least 1");
    ensure_arg!(w.rho > T::zero(), "ADMM needs a positive penalty");
    let solver = SylvesterSolver::new(&w.h1, &w.h2, &w.h3, &w.h4)?;
    for _ in 0..inner_iters {
        let h5 = w.h5_base.add(&w.z.add(&w.u)?.scale(w.rho))?;
        let x = solver.solve(&h5)?;
        let z = x.sub(&w.u)?.positive_part();
        w.u = w.u.add(&z)?.sub(&x)?;
        w.z = z;
        w.x = x;
    }
    Ok((w.z.clone(), w))
}

/// `‖Z − X‖_F / max(1, ‖X‖_F)` of the last iterate.
pub fn feasibility_gap<T: Scalar>(w: &AdmmWorkspace<T>) -> T {
    let diff =
        w.z.sub(&w.x)
            .map(|d| d.frob_norm())
            .unwrap_or(T::infinity());
    diff / w.x.frob_norm().max(T::one())
}
