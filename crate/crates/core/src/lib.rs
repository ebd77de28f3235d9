//! Numerical toolkit for the fractional Lane-Emden equation
//! `(-Delta)^alpha u = u^p` on exterior domains, the whole space and the half
//! space: Green-kernel bounds, blow-up cascades for the non-existence regime
//! and a monotone Picard iteration for the existence regime.

pub mod cascade;
pub mod cli;
pub mod kernels;
pub mod params;
pub mod picard;
pub mod quad;
pub mod special;
