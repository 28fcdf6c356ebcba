//! Stability certification of relative equilibria in Hamiltonian systems
//! with symmetry on flat phase spaces.
//!
//! A relative equilibrium `m` with velocity `xi` is certified stable (modulo
//! the isotropy group `H` of `mu = Phi(m)`) when the Hessian of the augmented
//! Hamiltonian `h - <Phi, xi>` is definite on the symplectic slice
//! `ker dPhi(m) / T_m(H.m)`, with `xi` orthogonal to the isotropy algebra of
//! `m` in an `Ad(H)`-invariant inner product. The [`dynamics`] probe gives an
//! independent, empirical check of every verdict.

pub mod analysis;
pub mod builtin;
pub mod dynamics;
pub mod equilibria;
pub mod expr;
pub mod liealg;
pub mod linalg;
pub mod phasespace;
pub mod point;
pub mod slice;
pub mod sysfile;

pub use analysis::{analyze, Analysis, AnalysisError, VelocityChoice};
pub use phasespace::SystemDef;
pub use slice::Verdict;
pub use sysfile::{load_system, LoadError, LoadedSystem};
