//! Uniform tail estimates for parametric U-statistics.
//!
//! The crate is organised along the analytic pipeline:
//!
//! - [`psi`]: moment envelopes, `Gψ` norms, Young-Fenchel tail bounds;
//! - [`empirics`]: moment tables, natural envelopes and distances, tail curves
//!   estimated from Monte Carlo panels;
//! - [`entropy`]: covering numbers, metric entropy and entropy integrals of
//!   finite metric spaces;
//! - [`ustat`]: kernels, samplers, exact and incomplete U-statistics, the
//!   Hoeffding decomposition and the seeded panel simulator;
//! - [`bounds`]: the uniform-norm bound for the normalized deviation field,
//!   closed-form bound families, the lower bound and the comparison report.

pub mod bounds;
pub mod empirics;
pub mod entropy;
pub mod error;
pub mod psi;
pub mod ustat;

pub use error::{Error, Result};
