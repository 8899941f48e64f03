//! Coherence of quantum states with respect to general measurements (POVMs),
//! quantified through the quantum Fisher information.
//!
//! The measure of a state `ρ` relative to a POVM `{E_j}` is
//! `C_F(ρ, E) = Σ_j F(ρ, E_j)` where `F` is the quantum Fisher information
//! of the unitary family `exp(-i E_j θ)`. Alongside the direct measure the
//! crate evaluates the same quantity through a canonical Naimark extension,
//! the convex-roof extension over pure-state ensembles together with the
//! commutation criterion that decides when the two coincide, and the
//! Cramér–Rao bounds that the measure controls.
//!
//! All `F` values use the convention whose pure-state value is four times
//! the variance of the generator.

pub mod coherence;
pub mod convexroof;
pub mod error;
pub mod metrology;
pub mod naimark;
pub mod numerics;
pub mod qfi;
pub mod states;

pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector, Hermitian, Spectrum, Tolerances};
pub use states::{BasisMeasurement, DensityMatrix, Measurement, Povm, ProjectiveMeasurement};
