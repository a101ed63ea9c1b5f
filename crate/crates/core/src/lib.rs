//! Numerical laboratory for a qubit coupled to a chaotic defect Ising chain.
//!
//! The crate builds the model Hamiltonians over a bit-string product basis,
//! diagonalizes them densely, propagates the total system with a Krylov
//! propagator, extracts reduced density matrices of the qubit, and compares
//! their long-time averages against closed-form predictions derived from the
//! eigenstate thermalization hypothesis (ETH).
//!
//! # Basis convention
//!
//! Used by every module in the crate:
//!
//! * environment index `i`: bit `l - 1` of `i` is spin `l` (sites are
//!   1-based), and a set bit means `S^z = +1/2`;
//! * qubit index `α ∈ {0, 1}` labels the eigenstates of `H^S = q_s S^z` in
//!   increasing energy (`α = 0` is `S^z = -1/2`), which requires `q_s ≥ 0`;
//! * total index `α · 2^N + i`, so every environmental branch is a
//!   contiguous slice of the state vector.

pub mod dynamics;
pub mod eigensolver;
pub mod ef;
pub mod eth;
pub mod lattice;
pub mod predictions;
pub mod small;
pub mod sparse;

pub use num_complex::Complex64;
