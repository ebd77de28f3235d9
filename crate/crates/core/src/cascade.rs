//! Blow-up cascade for the non-existence regime.
//!
//! A nonnegative solution dominates the Green potential of its source, which
//! decays like `|x|^tau_0`. Feeding the bound `u >= c_j |x|^tau_j` back into
//! the equation through a kernel lower bound gives `u >= c_(j+1) |x|^tau_(j+1)`
//! with `tau_(j+1) = 2 alpha + p tau_j` and
//!
//! ```text
//! c_(j+1) = K c_j^p I_j
//! ```
//!
//! where `I_j` is a fixed convolution integral of the region (the exterior of
//! the unit ball, or the cone `C_1` about `e_N`) and `K` the kernel constant
//! (`c4`, or `c9 = 1/c10` in the half space). Once the exponent is
//! nonnegative, the potential of the bound over `B_r` grows without limit in
//! `r`, which is incompatible with a solution. The engine records every
//! constant so that the final certificate can be audited.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelConstants, KernelError};
use crate::params::{tau_sequence, DomainKind, ParamsError, ProblemParams, TauVerdict, DEFAULT_MAX_STEPS};
use crate::quad::{convolution_integral, AxisWeight, KernelFactor, QuadError, QuadSpec, RadialIntegrand, Support};

/// Relative tolerance between the fitted and the expected growth exponent.
pub const SLOPE_REL_TOL: f64 = 0.05;
/// Absolute tolerance on the fitted exponent when the growth is logarithmic.
pub const LOG_SLOPE_TOL: f64 = 1e-3;
/// Exponents below this in magnitude count as zero (logarithmic growth).
pub const LOG_CASE_EPS: f64 = 1e-9;
/// Number of doublings in the default probe radii.
pub const DEFAULT_PROBES: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error("source mass must be positive, got {0}")]
    ZeroSource(f64),
    #[error("source radius must exceed {min}, got {got}")]
    SourceRadius { min: f64, got: f64 },
    #[error("tau_j p = {product} is not below {limit}: the step integral diverges")]
    IntegrabilityViolated { product: f64, limit: f64 },
    #[error("cascade already reached its final index {0}")]
    Finished(usize),
    #[error("fitted growth exponent {fitted} does not match the expected {expected}")]
    SlopeMismatch { fitted: f64, expected: f64 },
    #[error("lower bound is not increasing across the probe radii")]
    NotIncreasing,
    #[error("invalid probe radii: {0}")]
    ProbeRadii(String),
    #[error("cascade did not stall but has no divergence certificate")]
    Incomplete,
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Where the lower bounds hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CascadeRegion {
    /// `|x| >= 4 r0`; the whole space uses `r0 = 0`.
    ExteriorAnnulus { r0: f64 },
    /// The cone `C_1 = {x_N > 1, |x'| < x_N}`.
    Cone,
}

impl CascadeRegion {
    pub fn of(params: &ProblemParams) -> Self {
        match params.domain() {
            DomainKind::WholeSpace => CascadeRegion::ExteriorAnnulus { r0: 0.0 },
            DomainKind::Exterior { r0 } => CascadeRegion::ExteriorAnnulus { r0 },
            DomainKind::HalfSpace => CascadeRegion::Cone,
        }
    }

    /// First radius of the final growth integral. Exterior: the bound point
    /// `x` sits on `|x| = max(1, 8 r0)`, where the `c4` kernel bound is
    /// certified. Cone: `x = e_N` and `y` ranges over `|y| > 2|x|`.
    pub fn probe_start(&self) -> f64 {
        match *self {
            CascadeRegion::ExteriorAnnulus { r0 } => (8.0 * r0).max(1.0),
            CascadeRegion::Cone => 2.0,
        }
    }

    /// `probe_start * 2^k`, `k = 0..=DEFAULT_PROBES`.
    pub fn default_probe_radii(&self) -> Vec<f64> {
        let r = self.probe_start();
        (0..=DEFAULT_PROBES).map(|k| r * 2f64.powi(k as i32)).collect()
    }
}

/// Localized part of the source measure: total mass inside a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceGeometry {
    pub mass: f64,
    /// Radius of the ball carrying the mass (`n1` in the exterior, `n2` in
    /// the half space, where the mass also sits above `y_N = 1`).
    pub radius: f64,
}

impl Default for SourceGeometry {
    fn default() -> Self {
        SourceGeometry { mass: 1.0, radius: 4.0 }
    }
}

impl SourceGeometry {
    pub fn with_mass(mass: f64) -> Self {
        SourceGeometry { mass, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    pub tau: f64,
    /// May underflow to zero deep in a cascade; `ln_c` is kept separately.
    pub c: f64,
    pub ln_c: f64,
    /// Integral feeding the next step; absent on the last row.
    pub integral: Option<f64>,
    pub integral_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CascadeVerdict {
    DivergenceCertified { final_exponent: f64, log_case: bool },
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub probe_radii: Vec<f64>,
    /// `exp(log_scale) * growth_integrals`; can underflow when the constants
    /// are tiny, the integrals and `log_scale` cannot.
    pub lower_bound_values: Vec<f64>,
    /// Growth integral from the probe start to each probe radius.
    pub growth_integrals: Vec<f64>,
    /// Natural log of the constant factor in front of the integrals.
    pub log_scale: f64,
    pub fitted_slope: f64,
    pub expected_slope: f64,
    pub log_case: bool,
    /// Index `J` of the first exponent whose potential diverges.
    pub final_index: usize,
}

impl DivergenceCertificate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("probe_r,lower_bound,growth_integral\n");
        for ((r, v), g) in self.probe_radii.iter().zip(&self.lower_bound_values).zip(&self.growth_integrals) {
            s.push_str(&format!("{r:.16e},{v:.16e},{g:.16e}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub params: ProblemParams,
    pub region: CascadeRegion,
    /// `K` in `c_(j+1) = K c_j^p I_j`.
    pub kernel_constant: f64,
    pub steps: Vec<CascadeStep>,
    /// Index of the last bound needed before the final growth integral;
    /// `None` when the exponents never become nonnegative.
    pub last_index: Option<usize>,
    pub verdict: Option<CascadeVerdict>,
    pub certificate: Option<DivergenceCertificate>,
}

impl CascadeTrace {
    /// Index of the current (last) bound.
    pub fn j(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn current(&self) -> &CascadeStep {
        self.steps.last().expect("a trace holds at least the initial bound")
    }

    pub fn taus(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.tau).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,tau_j,c_j,I_j,ln_c_j\n");
        for (j, st) in self.steps.iter().enumerate() {
            let i = st.integral.map(|v| format!("{v:.16e}")).unwrap_or_default();
            s.push_str(&format!("{j},{:.16e},{:.16e},{i},{:.16e}\n", st.tau, st.c, st.ln_c));
        }
        s
    }
}

/// Constant and exponent of the first bound `u >= c0 |x|^tau0`.
///
/// Exterior: for `|y| < n1` and `|x| >= 2 n1`, `|x - y| <= 3|x|/2`, so
/// `c0 = c4 (3/2)^(2a-N) mass`. Half space: for `y` in `B_n2 ∩ {y_N > 1}` and
/// `x` in `C_1`, `|x - y| < (n2 + 1)|x|` and `x_N > |x|/sqrt 2`, so
/// `c0 = c9 (n2+1)^(2a-N) (sqrt 2 (n2+1)^2)^(-a) mass`.
pub fn initial_decay(
    params: &ProblemParams,
    constants: &KernelConstants,
    source: &SourceGeometry,
) -> Result<(f64, f64), CascadeError> {
    if !(source.mass > 0.0 && source.mass.is_finite()) {
        return Err(CascadeError::ZeroSource(source.mass));
    }
    constants.validate()?;
    let a = params.alpha();
    let s = 2.0 * a - params.n();
    let tau0 = params.initial_tau();
    let c0 = match CascadeRegion::of(params) {
        CascadeRegion::ExteriorAnnulus { r0 } => {
            if !(source.radius > 4.0 * r0) {
                return Err(CascadeError::SourceRadius { min: 4.0 * r0, got: source.radius });
            }
            constants.c4 * 1.5f64.powf(s) * source.mass
        }
        CascadeRegion::Cone => {
            if !(source.radius > 1.0) {
                return Err(CascadeError::SourceRadius { min: 1.0, got: source.radius });
            }
            let m = source.radius + 1.0;
            constants.c9() * m.powf(s) * (std::f64::consts::SQRT_2 * m * m).powf(-a) * source.mass
        }
    };
    Ok((c0, tau0))
}

/// Index `J` of the final growth integral, given the stopping index `j0` of
/// the exponents. The cone integral of `|y|^(tau p - N) y_N^a` grows like
/// `r^(tau_(j0) - a)`, so when `tau_(j0) < a` one more cone step is taken;
/// it is integrable since the cone step only needs `tau_(j+1) < a`.
fn final_index(region: CascadeRegion, tau: &[f64], j0: usize, alpha: f64) -> usize {
    match region {
        CascadeRegion::ExteriorAnnulus { .. } => j0,
        CascadeRegion::Cone if tau[j0] - alpha >= -LOG_CASE_EPS => j0,
        CascadeRegion::Cone => j0 + 1,
    }
}

/// Trace holding only the initial bound.
pub fn start_cascade(
    params: &ProblemParams,
    constants: &KernelConstants,
    source: &SourceGeometry,
) -> Result<CascadeTrace, CascadeError> {
    let (c0, tau0) = initial_decay(params, constants, source)?;
    let region = CascadeRegion::of(params);
    let kernel_constant = match region {
        CascadeRegion::ExteriorAnnulus { .. } => constants.c4,
        CascadeRegion::Cone => constants.c9(),
    };
    let exps = tau_sequence(tau0, params, DEFAULT_MAX_STEPS)?;
    let (last_index, verdict) = match exps.verdict {
        TauVerdict::Reaches { j0 } => (Some(final_index(region, &exps.tau, j0, params.alpha()) - 1), None),
        TauVerdict::Stalled { .. } => (None, Some(CascadeVerdict::Stalled)),
    };
    Ok(CascadeTrace {
        params: *params,
        region,
        kernel_constant,
        steps: vec![CascadeStep { tau: tau0, c: c0, ln_c: c0.ln(), integral: None, integral_error: None }],
        last_index,
        verdict,
        certificate: None,
    })
}

/// Integrand of the step integral `I_j` for the exponent `tau_j p`.
pub fn step_integrand(region: CascadeRegion, params: &ProblemParams, power: f64) -> RadialIntegrand {
    let n = params.dim_n();
    let s = 2.0 * params.alpha() - params.n();
    match region {
        CascadeRegion::ExteriorAnnulus { .. } => {
            RadialIntegrand::power(power, n).with_kernel(KernelFactor::Riesz { exponent: s })
        }
        CascadeRegion::Cone => RadialIntegrand::power(power, n)
            .with_kernel(KernelFactor::Smoothed { exponent: s })
            .with_weight(AxisWeight::ConeWeight(params.alpha()))
            .with_support(Support::Cone),
    }
}

/// Appends `(tau_(j+1), c_(j+1))` and records `I_j` on the current row.
pub fn cascade_step(mut trace: CascadeTrace, spec: &QuadSpec) -> Result<CascadeTrace, CascadeError> {
    let j = trace.j();
    if trace.last_index.map_or(true, |last| j >= last) {
        return Err(CascadeError::Finished(j));
    }
    let params = trace.params;
    let a = params.alpha();
    let p = params.p();
    let cur = *trace.current();
    let product = cur.tau * p;
    // Exterior: the far decay needs tau p < -2a. Cone: the weight
    // z_N^a (1+|z|)^(-2a) gains |z|^(-a), so tau p < -a suffices.
    let limit = match trace.region {
        CascadeRegion::ExteriorAnnulus { .. } => -2.0 * a,
        CascadeRegion::Cone => -a,
    };
    if !(product < limit) {
        return Err(CascadeError::IntegrabilityViolated { product, limit });
    }
    let integrand = step_integrand(trace.region, &params, product);
    let inner = match trace.region {
        CascadeRegion::ExteriorAnnulus { .. } => 1.0,
        CascadeRegion::Cone => 0.0,
    };
    let integral = convolution_integral(&integrand, inner, f64::INFINITY, spec, &params)?;
    let c_next = trace.kernel_constant * cur.c.powf(p) * integral.value;
    let ln_c_next = trace.kernel_constant.ln() + p * cur.ln_c + integral.value.ln();
    let tau_next = 2.0 * a + p * cur.tau;
    let row = trace.steps.last_mut().unwrap();
    row.integral = Some(integral.value);
    row.integral_error = Some(integral.error);
    trace.steps.push(CascadeStep { tau: tau_next, c: c_next, ln_c: ln_c_next, integral: None, integral_error: None });
    Ok(trace)
}

/// Lower bound of `u` at a fixed point from the source `c |y|^(tau p)` on the
/// shell `r_lo < |y| < r_hi`, and the exponent `s` with growth `r^s`.
///
/// Exterior: `x` on `|x| = r_start`, `|x - y| <= 2|y|`, giving
/// `K 2^(2a-N) c^p int |y|^(2a-N+tau p) dy` with `s = tau_(J)`.
/// Cone: `x = e_N`, `|x - y| <= 2|y|` and `x_N y_N / |x-y|^2 <= 1`, giving
/// `K 2^(2a-N) 4^(-a) c^p int_(C_1) |y|^(tau p - N) y_N^a dy` with
/// `s = tau p + a`.
struct GrowthIntegral {
    integrand: RadialIntegrand,
    log_scale: f64,
    exponent: f64,
}

fn growth_integral(trace: &CascadeTrace, step: &CascadeStep) -> GrowthIntegral {
    let params = &trace.params;
    let n = params.dim_n();
    let a = params.alpha();
    let p = params.p();
    let s = 2.0 * a - params.n();
    let product = step.tau * p;
    let log_base = trace.kernel_constant.ln() + s * std::f64::consts::LN_2 + p * step.ln_c;
    match trace.region {
        CascadeRegion::ExteriorAnnulus { .. } => GrowthIntegral {
            integrand: RadialIntegrand::power(s + product, n),
            log_scale: log_base,
            exponent: 2.0 * a + product,
        },
        CascadeRegion::Cone => GrowthIntegral {
            integrand: RadialIntegrand::power(product - params.n(), n)
                .with_weight(AxisWeight::Height(a))
                .with_support(Support::Cone),
            log_scale: log_base - a * 4f64.ln(),
            exponent: product + a,
        },
    }
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Evaluates the final lower bound at each probe radius and checks that it
/// grows with the exponent predicted by the last cascade step.
///
/// The slope is fitted to the increments between consecutive probes against
/// the geometric midpoint of each interval, which removes the constant
/// offset of the truncated integral; for geometric probes the fit is exact.
pub fn final_divergence(
    trace: &CascadeTrace,
    probe_radii: &[f64],
    spec: &QuadSpec,
) -> Result<DivergenceCertificate, CascadeError> {
    let last = trace.last_index.ok_or(CascadeError::Incomplete)?;
    if trace.j() != last {
        return Err(CascadeError::Incomplete);
    }
    let start = trace.region.probe_start();
    if probe_radii.len() < 3 {
        return Err(CascadeError::ProbeRadii("need at least three radii".into()));
    }
    if probe_radii[0] < start || probe_radii.windows(2).any(|w| !(w[1] > w[0])) || !probe_radii[probe_radii.len() - 1].is_finite() {
        return Err(CascadeError::ProbeRadii(format!("radii must increase from at least {start}")));
    }
    let g = growth_integral(trace, trace.current());
    let params = &trace.params;
    let first = convolution_integral(&g.integrand, start, probe_radii[0], spec, params)?.value;
    let mut integrals = vec![first];
    let mut increments = Vec::with_capacity(probe_radii.len() - 1);
    for w in probe_radii.windows(2) {
        let inc = convolution_integral(&g.integrand, w[0], w[1], spec, params)?.value;
        increments.push(inc);
        integrals.push(integrals.last().unwrap() + inc);
    }
    if increments.iter().any(|&v| !(v > 0.0)) {
        return Err(CascadeError::NotIncreasing);
    }
    let mids: Vec<f64> = probe_radii.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let fitted_slope = log_log_slope(&mids, &increments);
    let expected = g.exponent;
    let log_case = expected.abs() < LOG_CASE_EPS;
    let ok = if log_case {
        fitted_slope.abs() <= LOG_SLOPE_TOL
    } else {
        (fitted_slope - expected).abs() <= SLOPE_REL_TOL * expected.abs()
    };
    if !ok {
        return Err(CascadeError::SlopeMismatch { fitted: fitted_slope, expected });
    }
    Ok(DivergenceCertificate {
        probe_radii: probe_radii.to_vec(),
        lower_bound_values: integrals.iter().map(|v| v * g.log_scale.exp()).collect(),
        growth_integrals: integrals,
        log_scale: g.log_scale,
        fitted_slope,
        expected_slope: if log_case { 0.0 } else { expected },
        log_case,
        final_index: last + 1,
    })
}

/// Full cascade: initial bound, steps up to the last index, then the
/// divergence certificate. A stalled exponent sequence is reported as
/// `Stalled` without further work.
pub fn run_cascade(
    params: &ProblemParams,
    constants: &KernelConstants,
    source: &SourceGeometry,
    probe_radii: Option<&[f64]>,
    spec: &QuadSpec,
) -> Result<CascadeTrace, CascadeError> {
    spec.validate()?;
    let mut trace = start_cascade(params, constants, source)?;
    let Some(last) = trace.last_index else {
        return Ok(trace);
    };
    while trace.j() < last {
        trace = cascade_step(trace, spec)?;
    }
    let defaults = trace.region.default_probe_radii();
    let radii = probe_radii.unwrap_or(&defaults);
    let cert = final_divergence(&trace, radii, spec)?;
    trace.verdict = Some(CascadeVerdict::DivergenceCertified {
        final_exponent: cert.expected_slope,
        log_case: cert.log_case,
    });
    trace.certificate = Some(cert);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(domain: DomainKind, p: f64) -> (ProblemParams, KernelConstants) {
        let params = ProblemParams::new(3, 0.5, p, domain).unwrap();
        let constants = KernelConstants::for_params(&params);
        (params, constants)
    }

    #[test]
    fn initial_exponents_and_linearity() {
        let (ext, kc) = setup(DomainKind::Exterior { r0: 0.25 }, 1.2);
        let (c0, tau0) = initial_decay(&ext, &kc, &SourceGeometry::with_mass(1.0)).unwrap();
        assert_eq!(tau0, -2.0);
        let (c1, _) = initial_decay(&ext, &kc, &SourceGeometry::with_mass(2.0)).unwrap();
        assert!((c1 - 2.0 * c0).abs() <= 1e-15 * c1);
        let (half, kc) = setup(DomainKind::HalfSpace, 1.2);
        assert_eq!(initial_decay(&half, &kc, &SourceGeometry::default()).unwrap().1, -2.5);
        assert_eq!(
            initial_decay(&half, &kc, &SourceGeometry::with_mass(0.0)),
            Err(CascadeError::ZeroSource(0.0))
        );
    }

    #[test]
    fn exterior_run_follows_exponents() {
        let (params, kc) = setup(DomainKind::Exterior { r0: 0.5 }, 1.2);
        let spec = QuadSpec::default();
        let trace = run_cascade(&params, &kc, &SourceGeometry::default(), None, &spec).unwrap();
        let exps = tau_sequence(-2.0, &params, DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(trace.taus(), exps.tau[..3].to_vec());
        match trace.verdict {
            Some(CascadeVerdict::DivergenceCertified { final_exponent, log_case }) => {
                assert!((final_exponent - 0.184).abs() < 1e-12);
                assert!(!log_case);
            }
            other => panic!("{other:?}"),
        }
        let s0 = trace.steps[0];
        let want = kc.c4 * s0.c.powf(1.2) * s0.integral.unwrap();
        assert!((trace.steps[1].c - want).abs() <= 1e-15 * want);
        let cert = trace.certificate.unwrap();
        assert!(cert.lower_bound_values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_is_homogeneous_in_c() {
        let (params, kc) = setup(DomainKind::WholeSpace, 1.2);
        let spec = QuadSpec::default();
        let a = cascade_step(start_cascade(&params, &kc, &SourceGeometry::with_mass(1.0)).unwrap(), &spec).unwrap();
        let b = cascade_step(start_cascade(&params, &kc, &SourceGeometry::with_mass(3.0)).unwrap(), &spec).unwrap();
        let ratio = b.steps[1].c / a.steps[1].c;
        assert!((ratio - 3f64.powf(1.2)).abs() < 1e-12 * ratio);
    }

    #[test]
    fn half_space_stalls_in_existence_window() {
        let (params, kc) = setup(DomainKind::HalfSpace, 1.45);
        let trace = run_cascade(&params, &kc, &SourceGeometry::default(), None, &QuadSpec::default()).unwrap();
        assert_eq!(trace.verdict, Some(CascadeVerdict::Stalled));
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn cone_takes_extra_step_when_final_exponent_is_small() {
        // tau = -2.5, -2, -1.4, -0.68, 0.184 < alpha: one more cone step.
        let (params, kc) = setup(DomainKind::HalfSpace, 1.2);
        let trace = run_cascade(&params, &kc, &SourceGeometry::default(), None, &QuadSpec::default()).unwrap();
        assert_eq!(trace.steps.len(), 5);
        let cert = trace.certificate.unwrap();
        assert_eq!(cert.final_index, 5);
        assert!((cert.expected_slope - (0.184 * 1.2 + 0.5)).abs() < 1e-12);
        assert!((cert.fitted_slope - cert.expected_slope).abs() < 1e-6);
    }

    #[test]
    fn whole_space_matches_exterior_exponents() {
        let (whole, kc) = setup(DomainKind::WholeSpace, 1.3);
        let (ext, _) = setup(DomainKind::Exterior { r0: 0.1 }, 1.3);
        let a = start_cascade(&whole, &kc, &SourceGeometry::default()).unwrap();
        let b = start_cascade(&ext, &kc, &SourceGeometry::default()).unwrap();
        assert_eq!(a.last_index, b.last_index);
        assert_eq!(a.taus(), b.taus());
    }

    #[test]
    fn doubling_probes_scales_increments() {
        let (params, kc) = setup(DomainKind::WholeSpace, 1.2);
        let spec = QuadSpec::default();
        let mut trace = start_cascade(&params, &kc, &SourceGeometry::default()).unwrap();
        while trace.j() < trace.last_index.unwrap() {
            trace = cascade_step(trace, &spec).unwrap();
        }
        let radii: Vec<f64> = (0..4).map(|k| 2f64.powi(k)).collect();
        let doubled: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
        let a = final_divergence(&trace, &radii, &spec).unwrap();
        let b = final_divergence(&trace, &doubled, &spec).unwrap();
        let inc = |c: &DivergenceCertificate| c.lower_bound_values[2] - c.lower_bound_values[1];
        assert!((inc(&b) / inc(&a) - 2f64.powf(0.184)).abs() < 1e-7);
    }

    #[test]
    fn csv_columns() {
        let (params, kc) = setup(DomainKind::WholeSpace, 1.2);
        let trace = run_cascade(&params, &kc, &SourceGeometry::default(), None, &QuadSpec::default()).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("j,tau_j,c_j,I_j,ln_c_j\n0,"));
        assert_eq!(csv.lines().count(), trace.steps.len() + 1);
        assert!(trace.certificate.unwrap().to_csv().starts_with("probe_r,lower_bound,growth_integral\n"));
    }
}
