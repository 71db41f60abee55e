//! Rigorous-numerics kernels for computer-assisted existence certificates of
//! stationary Navier-Stokes solutions on block-structured 3D domains.
//!
//! The crate is organized around the certificate pipeline:
//! interval arithmetic and verified linear algebra ([`interval`]), exact
//! block-structured tetrahedral meshes ([`mesh`]), Bernstein polynomial
//! calculus on tetrahedra ([`polytet`]), finite element spaces and interval
//! assembly ([`spaces`]), certified Stokes eigenvalue bounds ([`eigbound`]),
//! hypercircle a-priori constants ([`apriori`]), the approximate solver with
//! its divergence-free correction ([`nsolve`]), and the verification engine
//! producing the final certificate ([`verify`]).

pub mod apriori;
pub mod divfree;
pub mod eigbound;
pub mod error;
pub mod interval;
pub mod linalg;
pub mod mesh;
pub mod nsolve;
pub mod par;
pub mod polytet;
pub mod rat;
pub mod spaces;
pub mod verify;

pub use error::Error;
pub use interval::Interval;
