//! Toroidal pseudodifferential calculus.
//!
//! Difference calculus on the lattice, Fourier series quantization of
//! symbols and amplitudes on the torus, periodisation of Euclidean data,
//! symbol extension, L2 bounds, Fourier series operator composition and a
//! spectral solver for periodised first-order hyperbolic problems.

pub mod diffcalc;
pub mod error;
pub mod fso;
pub mod grid;
pub mod hyperbolic;
pub mod io;
pub mod numerics;
pub mod periodise;
pub mod presets;
pub mod quantize;
pub mod symbols;

pub use error::{Error, Result};
