//! Exact event-driven simulation and numerical verification for lonely (and
//! more generally self-catalytic) critical branching random walks on lattice
//! tori.
//!
//! * [`kernel`]: jump kernels, torus geometry, Fourier transition tables,
//!   Green integrals and bridge rates.
//! * [`sim`]: direct-method Gillespie simulation of the particle system.
//! * [`sizebias`]: the size-biased system with a selected bridge particle and
//!   the process viewed from the immigration source.
//! * [`moments`]: first/second moment equations, their closed quadrature
//!   forms, and the moment bounds.
//! * [`genverify`]: generator identities checked exactly on capped state
//!   spaces.

pub mod error;
pub mod genverify;
pub mod kernel;
pub mod moments;
pub mod quad;
pub mod seeding;
pub mod sim;
pub mod sizebias;
pub mod stats;

mod index;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
