//! Numerics for a quasi-periodic split-step quantum walk with rotation coins
//! `R_{2π(nβ+θ)}`: spectra of periodic approximants, transfer-matrix
//! cocycles and their Lyapunov exponents, and the Fourier duality between
//! the walk and its cocycle.

pub mod cocycle;
pub mod duality;
pub mod error;
pub mod mat2;
pub mod operators;
pub mod output;
pub mod spectral;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
pub use torus::{Frequency, TorusPoint};
