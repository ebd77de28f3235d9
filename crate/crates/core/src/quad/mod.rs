//! Quadrature: fixed rules, adaptive integration and the singular integrals
//! built on them.

pub mod adaptive;
pub mod convolution;
pub mod pv;
pub mod remark;
pub mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaptive::{integrate, integrate_origin_power, integrate_tail, Integral, Tolerance};
pub use convolution::{convolution_integral, AxisWeight, KernelFactor, RadialIntegrand, Support};
pub use pv::{pv_breakdown, pv_fractional_laplacian, Decay, PvBreakdown, PvTarget};
pub use remark::{remark_identity_check, reproducing_integral, Ball, Bump, IdentitySides, RadialLaplacianTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not integrable: {0}")]
    NotIntegrable(String),
    #[error("tolerance not met: value {value}, error estimate {error}")]
    ToleranceNotMet { value: f64, error: f64 },
    #[error("no decay behavior declared for the integrand")]
    DecayUnknown,
    #[error("invalid quadrature input: {0}")]
    InvalidInput(String),
}

/// Quadrature budget shared by every integral of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Split point between the finite part and the mapped infinite tail.
    pub truncation_radius: f64,
    /// Radius of the ball on which the principal value is replaced by its
    /// second-order Taylor expansion.
    pub pv_epsilon: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { rel_tol: 1e-8, abs_tol: 1e-12, max_panels: 1 << 20, truncation_radius: 16.0, pv_epsilon: 1e-3 }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(QuadError::InvalidInput("rel_tol and abs_tol must be positive".into()));
        }
        if self.max_panels == 0 {
            return Err(QuadError::InvalidInput("max_panels must be positive".into()));
        }
        if !(self.truncation_radius > 1.0 && self.truncation_radius.is_finite()) {
            return Err(QuadError::InvalidInput("truncation_radius must exceed 1".into()));
        }
        if !(self.pv_epsilon > 0.0 && self.pv_epsilon < 1.0) {
            return Err(QuadError::InvalidInput("pv_epsilon must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.abs_tol, self.rel_tol)
    }

    /// Tolerance for integrals nested inside an outer integral.
    pub(crate) fn inner_tolerance(&self) -> Tolerance {
        Tolerance::new(f64::MIN_POSITIVE, 0.1 * self.rel_tol)
    }

    pub(crate) fn inner_panels(&self) -> usize {
        self.max_panels.min(4096)
    }

    pub(crate) fn check(&self, r: Integral) -> Result<Integral, QuadError> {
        if r.value.is_finite() && r.error <= self.tolerance().target(r.value) {
            Ok(r)
        } else {
            Err(QuadError::ToleranceNotMet { value: r.value, error: r.error })
        }
    }
}
