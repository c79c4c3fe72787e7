//! Fourier representation on the circle: fields, Sobolev norms, diagonal
//! semigroups, the slow/fast splitting and exact convolution.

mod convolution;
mod field;
mod operator;
pub mod phi;
mod split;

pub use convolution::{convolve, convolve_fft, convolve_full, power};
pub use field::FourierField;
pub use operator::{sobolev_norm, DiagonalOperator, SobolevIndex, FOUR_PI_SQ};
pub use split::{project_fast, project_slow, split_cutoff, split_cutoff_for, SpectralSplit};
