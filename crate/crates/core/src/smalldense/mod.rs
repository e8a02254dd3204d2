//! Dense kernels for the small `w x w` problems that follow the Gram
//! update: eigendecompositions, least squares and matrix products.

mod eig;
mod gemm;
mod lstsq;
mod mat;
mod sym_eig;

pub use eig::{eig, Eigen};
pub use gemm::{cgemm, cmatvec, gemm, rc_gemm, Op};
pub use lstsq::{solve_ls, LstsqSolution};
pub use mat::{CMat, Mat};
pub use sym_eig::{sym_eig, SymEigen, SYMMETRY_TOL};
