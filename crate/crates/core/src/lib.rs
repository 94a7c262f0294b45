//! Thermoacoustic tomography in attenuating media.
//!
//! The crate builds the full chain from causal attenuation laws to image
//! reconstruction: complex attenuation laws and their causality
//! diagnostics ([`attenuation`]), discretized dissipation and detector
//! kernels ([`kernels`]), analytic ball-phantom projections
//! ([`projections`]), attenuated forward data with an independent
//! Green-function oracle ([`forward`]), regularized Volterra inversion
//! back to projections ([`inverse`]), and explicit reconstruction of the
//! source function from spherical projections ([`recon`]).
//!
//! Conventions: sound speed c₀ = 1, time in µs, angular frequency in
//! rad/µs; the symmetric Fourier transform `f̂(ω) = (2π)^{-1/2}∫f e^{iωt}dt`
//! so causal signals extend holomorphically to the upper half plane.

pub mod attenuation;
pub mod bessel;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod kernels;
pub mod projections;
pub mod pulse;
pub mod recon;

pub use attenuation::{alpha_star, causality_diagnostic, k1_hat, wavenumber, AttenuationLaw};
pub use error::{Error, Result};
pub use forward::{
    attenuated_line_data, attenuated_planar_data, attenuated_point_data, green_forward,
    ideal_point_pressure, PressureSignal,
};
pub use grid::{FrequencyGrid, TimeGrid};
pub use inverse::{deattenuate, discrepancy_select, solve_projection, Regularizer, VolterraSystem};
pub use kernels::{convolve_pulse, m_matrix, n_line, n_planar, n_point, KernelMatrix};
pub use projections::{
    circular_projection, line_integral, planar_projection, spherical_projection, Ball,
    DetectorSet, Phantom,
};
pub use pulse::Pulse;
pub use recon::{planar_projection_recovery, spherical_backprojection, VolumeGrid};
