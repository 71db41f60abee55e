//! Numerical linear algebra support: fast verified interval kernels,
//! floating-point sparse factorizations used for approximation, and the
//! certification primitives (interval Cholesky, Krawczyk enclosures,
//! eigenvalue bound searches).

pub mod chol;
pub mod dense;
pub mod eigen;
pub mod midrad;
pub mod sparse;
pub mod verified;
