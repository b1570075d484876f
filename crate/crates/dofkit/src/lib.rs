//! Time/band-limiting concentration operators over arbitrary support sets:
//! eigenvalue spectra, the phase transition of the eigenvalues, and
//! degrees-of-freedom counts for cut-set geometries.
//!
//! The pipeline is: build support sets P (observation) and Q (spectral)
//! with optional linear scalings ([`geometry`]), discretize the composite
//! timelimit-bandlimit-timelimit operator on a quadrature grid
//! ([`operator`]), compute its spectrum and eigenvalue counts
//! ([`spectrum`]), and convert spectra into Kolmogorov n-widths and
//! degrees-of-freedom reports ([`dof`]).

pub mod dof;
pub mod geometry;
pub mod operator;
pub mod quad;
pub mod spectrum;
