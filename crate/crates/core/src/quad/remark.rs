//! Self-tests that combine the principal-value operator with the convolution
//! quadrature: the integrated identity
//! `int_O (-Delta)^a xi = int_O xi(x) int_{O^c} c_{N,a} |x-y|^(-N-2a) dy dx`,
//! the reproducing identity `int G(x, y) (-Delta)^a xi(x) dx = xi(y)`, and a
//! tabulated radial profile of `(-Delta)^a xi` for smooth bumps.

use serde::{Deserialize, Serialize};

use super::adaptive::{integrate, integrate_tail, Integral, Tolerance};
use super::convolution::{convolution_integral, KernelFactor, RadialIntegrand};
use super::pv::{pv_fractional_laplacian, Decay, PvTarget};
use super::rules::GaussLegendre;
use super::{QuadError, QuadSpec};
use crate::kernels::{pv_constant, riesz_constant};
use crate::params::ProblemParams;
use crate::special::sphere_area;

/// `amplitude * exp(-1 / (1 - (|x - center| / radius)^2))` inside the ball,
/// zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Bump { center, radius, amplitude: 1.0 }
    }

    pub fn scaled(&self, amplitude: f64) -> Self {
        Bump { amplitude: self.amplitude * amplitude, ..self.clone() }
    }

    /// Profile as a function of the distance to the center.
    pub fn profile(&self, s: f64) -> f64 {
        let q = s / self.radius;
        if q >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - q * q)).exp()
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        self.profile(s)
    }

    fn target(&self) -> PvTarget<impl Fn(&[f64]) -> f64 + '_> {
        PvTarget::new(move |y: &[f64]| self.eval(y), Decay::CompactSupport { center: self.center.clone(), radius: self.radius })
    }

    /// `(-Delta)^a xi` at distance `s` from the center, by the principal-value quadrature.
    pub fn laplacian_at(&self, s: f64, spec: &QuadSpec, params: &ProblemParams) -> Result<f64, QuadError> {
        let mut x = self.center.clone();
        let n = x.len();
        x[n - 1] += s;
        pv_fractional_laplacian(&self.target(), &x, spec, params)
    }

    fn check(&self, params: &ProblemParams) -> Result<(), QuadError> {
        if self.center.len() != params.dim_n() || !(self.radius > 0.0) {
            return Err(QuadError::InvalidInput("bump does not match the dimension".into()));
        }
        Ok(())
    }
}

/// A ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Both sides of the integrated identity on a ball concentric with the bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentitySides {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
}

impl IdentitySides {
    pub fn relative_residual(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs().max(f64::MIN_POSITIVE)
    }
}

fn outer_tol(spec: &QuadSpec) -> Tolerance {
    Tolerance::new(spec.abs_tol, spec.rel_tol.max(1e-10))
}

/// `lhs = int_O (-Delta)^a xi dx` through the principal value;
/// `rhs = int_O xi(x) V(x) dx` with `V(x) = c_{N,a} int_{|y - c| > R} |x - y|^(-N-2a) dy`
/// through the convolution quadrature.
pub fn remark_identity_check(xi: &Bump, domain: &Ball, spec: &QuadSpec, params: &ProblemParams) -> Result<IdentitySides, QuadError> {
    spec.validate()?;
    xi.check(params)?;
    let n = params.dim_n();
    let nf = n as f64;
    let a = params.alpha();
    if domain.center != xi.center || !(domain.radius > xi.radius) {
        return Err(QuadError::InvalidInput("the bump must be concentric with and compactly supported in O".into()));
    }
    let big_r = domain.radius;
    let area = sphere_area(n - 1);
    let c = pv_constant(params);
    let tol = outer_tol(spec);
    let pv_spec = QuadSpec { rel_tol: 0.01 * spec.rel_tol, abs_tol: 0.01 * spec.abs_tol, ..*spec };

    let mut failure = None;
    let lhs = integrate(
        |s: f64| match xi.laplacian_at(s, &pv_spec, params) {
            Ok(v) => v * s.powi(n as i32 - 1),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &[0.0, xi.radius, big_r],
        tol,
        256,
    );
    if let Some(e) = failure {
        return Err(e);
    }

    // V(s e) = c s^(-2a) int_{|z| > R/s} |e - z|^(-N-2a) dz
    let kernel = RadialIntegrand::power(0.0, n).with_kernel(KernelFactor::Riesz { exponent: -nf - 2.0 * a });
    let conv_spec = QuadSpec { rel_tol: 0.01 * spec.rel_tol, ..*spec };
    let mut failure = None;
    let rhs = integrate(
        |s: f64| {
            let v = if s <= 0.0 {
                c * area * big_r.powf(-2.0 * a) / (2.0 * a)
            } else {
                match convolution_integral(&kernel, big_r / s, f64::INFINITY, &conv_spec, params) {
                    Ok(r) => c * s.powf(-2.0 * a) * r.value,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            };
            xi.profile(s) * v * s.powi(n as i32 - 1)
        },
        &[0.0, xi.radius],
        tol,
        256,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    for r in [&lhs, &rhs] {
        if !r.converged {
            return Err(QuadError::ToleranceNotMet { value: r.value, error: r.error });
        }
    }
    Ok(IdentitySides { lhs: area * lhs.value, rhs: area * rhs.value, lhs_error: area * lhs.error, rhs_error: area * rhs.error })
}

/// `int G(x, c) (-Delta)^a xi(x) dx` for the whole-space kernel and the bump
/// center `c`; equals `xi(c)` exactly. `constant` overrides `c3` (for
/// sensitivity checks).
pub fn reproducing_integral(xi: &Bump, constant: Option<f64>, spec: &QuadSpec, params: &ProblemParams) -> Result<Integral, QuadError> {
    spec.validate()?;
    xi.check(params)?;
    let n = params.dim_n();
    let a = params.alpha();
    let c3 = constant.unwrap_or_else(|| riesz_constant(params));
    let table = RadialLaplacianTable::new(xi, spec, params)?;
    let tol = outer_tol(spec);
    let f = |r: f64| r.powf(2.0 * a - 1.0) * table.eval(r);
    let split = 4.0 * xi.radius;
    let near = super::adaptive::integrate_origin_power(f, 0.5 * xi.radius, 2.0 * a, tol, 4096);
    let mid = integrate(f, &[0.5 * xi.radius, xi.radius, 2.0 * xi.radius, split], tol, 4096);
    // r^(2a-1) H(r) decays like r^(-N-1)
    let far = integrate_tail(f, split, params.n(), tol, 4096);
    let total = near.combine(mid).combine(far);
    if !total.converged {
        return Err(QuadError::ToleranceNotMet { value: total.value, error: total.error });
    }
    Ok(total.scale(c3 * sphere_area(n - 1)))
}

const TABLE_DEGREE: usize = 24;
/// Panel edges in units of the bump radius.
const TABLE_EDGES: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];
const FAR_ORDER: usize = 48;

/// `H(s) = (-Delta)^a xi` at distance `s` from the bump center.
///
/// On `s <= 1.5 radius` the profile is a piecewise Chebyshev interpolant of
/// principal-value evaluations; beyond it `H` is the non-singular integral
/// `-c_{N,a} int xi(y) |x - y|^(-N-2a) dy`, evaluated by a fixed Gauss rule
/// in (radius, polar angle).
#[derive(Debug, Clone)]
pub struct RadialLaplacianTable {
    radius: f64,
    amplitude: f64,
    n: usize,
    exponent: f64,
    c: f64,
    panels: Vec<(f64, f64, Vec<f64>)>,
    far_t: Vec<(f64, f64)>,
    far_theta: Vec<(f64, f64)>,
}

impl RadialLaplacianTable {
    pub fn new(xi: &Bump, spec: &QuadSpec, params: &ProblemParams) -> Result<Self, QuadError> {
        xi.check(params)?;
        let n = params.dim_n();
        let a = params.alpha();
        let pv_spec = QuadSpec { rel_tol: spec.rel_tol.min(1e-9), abs_tol: spec.abs_tol.min(1e-13), ..*spec };
        let m = TABLE_DEGREE + 1;
        let mut panels = Vec::new();
        for w in TABLE_EDGES.windows(2) {
            let (lo, hi) = (w[0] * xi.radius, w[1] * xi.radius);
            let mut vals = Vec::with_capacity(m);
            for j in 0..m {
                let x = (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos();
                vals.push(xi.laplacian_at(0.5 * (lo + hi) + 0.5 * (hi - lo) * x, &pv_spec, params)?);
            }
            let coeffs: Vec<f64> = (0..m)
                .map(|k| {
                    let s: f64 = vals
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m as f64).cos())
                        .sum();
                    if k == 0 {
                        s / m as f64
                    } else {
                        2.0 * s / m as f64
                    }
                })
                .collect();
            panels.push((lo, hi, coeffs));
        }
        let gl = GaussLegendre::new(FAR_ORDER);
        let far_t: Vec<(f64, f64)> = gl.on(0.0, xi.radius).collect();
        let far_theta: Vec<(f64, f64)> = if n >= 2 { gl.on(0.0, std::f64::consts::PI).collect() } else { Vec::new() };
        Ok(RadialLaplacianTable {
            radius: xi.radius,
            amplitude: xi.amplitude,
            n,
            exponent: -(n as f64) - 2.0 * a,
            c: pv_constant(params),
            panels,
            far_t,
            far_theta,
        })
    }

    pub fn table_end(&self) -> f64 {
        TABLE_EDGES[TABLE_EDGES.len() - 1] * self.radius
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s < self.table_end() {
            let idx = self.panels.iter().position(|(_, hi, _)| s <= *hi).unwrap_or(self.panels.len() - 1);
            let (lo, hi, c) = &self.panels[idx];
            let x = ((2.0 * s - lo - hi) / (hi - lo)).clamp(-1.0, 1.0);
            let (mut b1, mut b2) = (0.0, 0.0);
            for &ck in c.iter().skip(1).rev() {
                let b0 = 2.0 * x * b1 - b2 + ck;
                b2 = b1;
                b1 = b0;
            }
            x * b1 - b2 + c[0]
        } else {
            self.far(s)
        }
    }

    fn far(&self, s: f64) -> f64 {
        let bump = Bump { center: vec![0.0], radius: self.radius, amplitude: self.amplitude };
        let half = 0.5 * self.exponent;
        let n = self.n;
        let mut total = 0.0;
        for &(t, wt) in &self.far_t {
            let shell = if n == 1 {
                (s - t).abs().powf(self.exponent) + (s + t).powf(self.exponent)
            } else {
                let m = (n - 2) as i32;
                let ang: f64 = self
                    .far_theta
                    .iter()
                    .map(|&(th, w)| w * th.sin().powi(m) * (s * s + t * t - 2.0 * s * t * th.cos()).powf(half))
                    .sum();
                sphere_area(n - 2) * ang
            };
            total += wt * bump.profile(t) * t.powi(n as i32 - 1) * shell;
        }
        -self.c * total
    }
}
