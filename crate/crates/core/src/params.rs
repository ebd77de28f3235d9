//! Problem parameters, the two critical exponents, the decay-exponent
//! recursion and the regime classifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("dimension must be positive, got {0}")]
    Dimension(usize),
    #[error("order alpha must lie in (0, 1), got {0}")]
    Order(f64),
    #[error("exponent p must be positive, got {0}")]
    Exponent(f64),
    #[error("need N > 2 alpha, got N = {dim}, alpha = {alpha}")]
    Subcritical { dim: usize, alpha: f64 },
    #[error("exterior radius must be positive, got {0}")]
    Radius(f64),
    #[error("initial exponent tau0 must be negative, got {0}")]
    InitialExponent(f64),
    #[error("max_steps must be positive")]
    ZeroSteps,
    #[error("the recursion reaches a nonnegative exponent only after {needed} steps (max_steps = {max_steps})")]
    MaxStepsExceeded { needed: u64, max_steps: usize },
}

/// Geometry of the domain Omega.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DomainKind {
    WholeSpace,
    Exterior { r0: f64 },
    HalfSpace,
}

/// Validated `(N, alpha, p, domain)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    dim_n: usize,
    alpha: f64,
    p: f64,
    domain: DomainKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    dim_n: usize,
    alpha: f64,
    p: f64,
    domain: DomainKind,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = ParamsError;
    fn try_from(raw: RawParams) -> Result<Self, ParamsError> {
        ProblemParams::new(raw.dim_n, raw.alpha, raw.p, raw.domain)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams { dim_n: p.dim_n, alpha: p.alpha, p: p.p, domain: p.domain }
    }
}

impl ProblemParams {
    pub fn new(dim_n: usize, alpha: f64, p: f64, domain: DomainKind) -> Result<Self, ParamsError> {
        if dim_n == 0 {
            return Err(ParamsError::Dimension(dim_n));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ParamsError::Order(alpha));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(ParamsError::Exponent(p));
        }
        if (dim_n as f64) <= 2.0 * alpha {
            return Err(ParamsError::Subcritical { dim: dim_n, alpha });
        }
        if let DomainKind::Exterior { r0 } = domain {
            if !(r0 > 0.0 && r0.is_finite()) {
                return Err(ParamsError::Radius(r0));
            }
        }
        Ok(ProblemParams { dim_n, alpha, p, domain })
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    /// Dimension as a float, for exponent arithmetic.
    pub fn n(&self) -> f64 {
        self.dim_n as f64
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn with_p(&self, p: f64) -> Result<Self, ParamsError> {
        ProblemParams::new(self.dim_n, self.alpha, p, self.domain)
    }

    pub fn with_domain(&self, domain: DomainKind) -> Result<Self, ParamsError> {
        ProblemParams::new(self.dim_n, self.alpha, self.p, domain)
    }

    /// Initial decay exponent of the Green potential of a localized source:
    /// `2 alpha - N` away from a compact hole, `alpha - N` in the half space.
    pub fn initial_tau(&self) -> f64 {
        match self.domain {
            DomainKind::HalfSpace => self.alpha - self.n(),
            _ => 2.0 * self.alpha - self.n(),
        }
    }

    /// Whether `p` lies in `[(N+a)/(N-a), N/(N-2a))`.
    pub fn in_existence_window(&self) -> bool {
        let (p_ext, p_half) = serrin_exponents(self);
        self.p >= p_half && self.p < p_ext
    }
}

/// `(N/(N-2a), (N+a)/(N-a))`: the exterior and half-space critical exponents.
pub fn serrin_exponents(params: &ProblemParams) -> (f64, f64) {
    let n = params.n();
    let a = params.alpha();
    (n / (n - 2.0 * a), (n + a) / (n - a))
}

/// `1 + 2 alpha / (-tau0)`: the recursion reaches a nonnegative exponent
/// exactly for `p` below this value.
pub fn reach_threshold(alpha: f64, tau0: f64) -> f64 {
    1.0 + 2.0 * alpha / (-tau0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TauVerdict {
    Reaches { j0: usize },
    Stalled { fixed_point: f64 },
}

/// The exponents `tau_j = 2 alpha + p tau_(j-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTrace {
    pub tau: Vec<f64>,
    pub j0: Option<usize>,
    pub verdict: TauVerdict,
    /// Stopping index predicted by the closed form (p != 1 only).
    pub j0_closed_form: Option<u64>,
}

/// Number of stored exponents for a stalled recursion.
const STALLED_PREVIEW: usize = 32;

/// Default cap on the recursion length.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// `tau_j` from the closed form `tau_0 + (tau_1 - tau_0)(1 - p^j)/(1 - p)`.
pub fn tau_closed_form(tau0: f64, alpha: f64, p: f64, j: u32) -> f64 {
    let d = 2.0 * alpha + tau0 * (p - 1.0);
    if p == 1.0 {
        tau0 + j as f64 * d
    } else {
        tau0 + d * (1.0 - p.powi(j as i32)) / (1.0 - p)
    }
}

/// Generates the exponent sequence from `tau0 < 0` and decides whether it
/// reaches `[0, inf)`.
pub fn tau_sequence(tau0: f64, params: &ProblemParams, max_steps: usize) -> Result<ExponentTrace, ParamsError> {
    if !(tau0 < 0.0) {
        return Err(ParamsError::InitialExponent(tau0));
    }
    if max_steps == 0 {
        return Err(ParamsError::ZeroSteps);
    }
    let alpha = params.alpha();
    let p = params.p();
    let threshold = reach_threshold(alpha, tau0);
    let step = |t: f64| 2.0 * alpha + p * t;

    if p >= threshold {
        let fixed_point = if p == threshold { tau0 } else { 2.0 * alpha / (1.0 - p) };
        let mut tau = vec![tau0];
        for _ in 0..STALLED_PREVIEW.min(max_steps) {
            let next = step(*tau.last().unwrap());
            tau.push(next);
        }
        return Ok(ExponentTrace {
            tau,
            j0: None,
            verdict: TauVerdict::Stalled { fixed_point },
            j0_closed_form: None,
        });
    }

    // p^j crosses 2 alpha / (tau_1 - tau_0) at the stopping index, for p on
    // either side of 1.
    let d = 2.0 * alpha + tau0 * (p - 1.0);
    let j0_closed_form = if p == 1.0 {
        Some((-tau0 / d).ceil().max(1.0) as u64)
    } else {
        let x = (2.0 * alpha / d).ln() / p.ln();
        if x.is_finite() {
            Some(x.ceil().max(1.0) as u64)
        } else {
            None
        }
    };
    if let Some(needed) = j0_closed_form {
        if needed > max_steps as u64 + 1 {
            return Err(ParamsError::MaxStepsExceeded { needed, max_steps });
        }
    }

    let mut tau = vec![tau0];
    loop {
        let last = *tau.last().unwrap();
        if last >= 0.0 {
            break;
        }
        if tau.len() > max_steps {
            return Err(ParamsError::MaxStepsExceeded {
                needed: j0_closed_form.unwrap_or(u64::MAX),
                max_steps,
            });
        }
        tau.push(step(last));
    }
    let j0 = tau.len() - 1;
    Ok(ExponentTrace {
        tau,
        j0: Some(j0),
        verdict: TauVerdict::Reaches { j0 },
        j0_closed_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    LiouvilleNonexistence,
    ExistenceWindow,
    AboveSerrin,
}

pub fn classify_regime(params: &ProblemParams) -> Regime {
    let (p_ext, p_half) = serrin_exponents(params);
    let p = params.p();
    match params.domain() {
        DomainKind::WholeSpace | DomainKind::Exterior { .. } => {
            if p < p_ext {
                Regime::LiouvilleNonexistence
            } else {
                Regime::AboveSerrin
            }
        }
        DomainKind::HalfSpace => {
            if p < p_half {
                Regime::LiouvilleNonexistence
            } else if p < p_ext {
                Regime::ExistenceWindow
            } else {
                Regime::AboveSerrin
            }
        }
    }
}
