//! Numerical laboratory for anti-linear Hankel operators with simple spectrum.
//!
//! The crate computes the direct spectral map (symbol → spectral datum), the
//! inverse map (datum → symbol), stability diagnostics for the model
//! contraction, rank-one perturbation analytics, and the cubic Szegő flow
//! both on spectral data and on Fourier coefficients.

pub mod complex_json;
pub mod diagnostics;
pub mod direct_map;
pub mod inverse_map;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod perturbation;
pub mod szego_flow;
#[cfg(test)]
mod testutil;

pub use direct_map::HankelSymbol;
pub use linalg::C64;
pub use measure::SpectralMeasure;
pub use model::SpectralDatum;
