//! charflow-core: method of characteristics for first-order PDEs
//! h(x, grad z) = 0 on the 1-jet space J^1(R^n), together with the
//! odd-symplectic linear algebra that governs the quadratic case.
//!
//! The crate is organized around three views of the same dynamics:
//!
//! * [`jet_contact`] — the 1-jet space with its contact form, the
//!   characteristic / contact / lifted vector fields of a Hamiltonian
//!   function, and Lie-bracket diagnostics relating them.
//! * [`odd_symplectic`] — the group Sp(2n+1,R) of linear symplectomorphisms
//!   of R^{2n+2} fixing the z direction, its algebra of block generators,
//!   and a matrix exponential.
//! * [`quadratic`] — the bridge: every quadratic Hamiltonian induces an
//!   algebra generator whose affine flow reproduces the characteristic
//!   flow up to a z-shift that vanishes exactly when the PDE's
//!   characteristic and contact fields commute.
//!
//! On top of these sit [`flows`] (a fixed-step RK4 integrator with
//! conservation diagnostics), [`cauchy`] (initial strips and solution
//! sheets for Cauchy problems), and [`applications`] (Hamilton-Jacobi
//! reduction and ray tracing through layered media).

pub mod applications;
pub mod cauchy;
pub mod csv;
pub mod error;
pub mod flows;
pub mod jet_contact;
pub mod odd_symplectic;
pub mod quadratic;

pub use applications::{LayeredMedium, MechanicalHamiltonian, Ray};
pub use cauchy::{InitialDataManifold, InitialStrip, SolutionSheet};
pub use error::{Error, Result};
pub use jet_contact::{Hamiltonian, JetPoint, LiftedHamiltonian, SymplPoint, TangentVector};
pub use odd_symplectic::{GeneratorU, GroupElement};
pub use quadratic::QuadraticPDE;
