//! Dense linear algebra, eigensolvers, optimizer state, seeded randomness
//! and gradient checking.

pub mod adam;
pub mod eigen;
pub mod gradcheck;
pub mod matrix;
pub mod rng;

pub use adam::{AdamConfig, AdamState, Parameters};
pub use eigen::{sym_eigen, sym_eigs_smallest, EigenMethod, SymEigen};
pub use gradcheck::finite_diff_check;
pub use matrix::{axpy, dot, euclidean, norm, Matrix};
pub use rng::Rng;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
