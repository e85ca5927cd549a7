//! Numerics for cusp-type parametrices of the wave equation near a glancing
//! boundary: Airy functions, gallery modes, billiard maps, eikonal jets,
//! symbol calculus and norm measurement.

pub mod airy;
pub mod cutoff;
pub mod dd;
pub mod quad;
pub mod billiard;
pub mod ode;
pub mod scale;
pub mod eikonal;
pub mod fft;
pub mod symbols;
pub mod spectrum;
pub mod cusp;
pub mod norms;
