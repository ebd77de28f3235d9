//! Principal-value evaluation of `(-Delta)^alpha u(x)`.
//!
//! `c_{N,a} PV int (u(x) - u(x+z)) |z|^(-N-2a) dz` is written as
//! `c_{N,a} int_0^inf rho^(-1-2a) A(rho) drho` with the symmetrized spherical
//! mean `A(rho) = int_S [u(x) - (u(x + rho w) + u(x - rho w)) / 2] dw`.
//! On `rho < eps` the second-order Taylor expansion `A ~ -|S| Lap u rho^2 / (2N)`
//! is integrated exactly; beyond the last support/feature radius the tail is
//! either exact (compact support) or mapped with the `rho^(-1-2a)` decay.

use serde::{Deserialize, Serialize};

use super::adaptive::{integrate, integrate_tail, Integral, Tolerance};
use super::rules::GaussLegendre;
use super::{QuadError, QuadSpec};
use crate::kernels::pv_constant;
use crate::params::ProblemParams;
use crate::special::sphere_area;

/// Far-field behavior of the function the operator is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    /// `u = 0` outside `B(center, radius)`.
    CompactSupport { center: Vec<f64>, radius: f64 },
    /// `|u(y)| <= C |y|^(-exponent)` for large `|y|`.
    Power { exponent: f64 },
    Unknown,
}

/// A function together with the structural hints the quadrature uses.
pub struct PvTarget<F> {
    pub u: F,
    pub decay: Decay,
    /// Location of an integrable singularity of `u`, if any.
    pub singular_point: Option<Vec<f64>>,
}

impl<F: Fn(&[f64]) -> f64> PvTarget<F> {
    pub fn new(u: F, decay: Decay) -> Self {
        PvTarget { u, decay, singular_point: None }
    }

    pub fn with_singular_point(mut self, y: Vec<f64>) -> Self {
        self.singular_point = Some(y);
        self
    }
}

/// Contributions of the Taylor ball, the adaptive middle range and the tail,
/// each already multiplied by `c_{N,a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvBreakdown {
    pub inner: f64,
    pub outer: f64,
    pub tail: f64,
    pub error: f64,
}

impl PvBreakdown {
    pub fn value(&self) -> f64 {
        self.inner + self.outer + self.tail
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Orthonormal frame whose first vector is `axis`.
fn frame(axis: &[f64]) -> Vec<Vec<f64>> {
    let n = axis.len();
    let mut basis = vec![axis.to_vec()];
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    basis
}

/// Integrals over the transversal sphere `S^m` spanned by a partial frame,
/// `m = frame.len() - 1`; `S^0` is the two-point set.
struct Transversal {
    gl: GaussLegendre,
}

const TRAP_START: usize = 4;
const TRAP_MAX: usize = 1024;

impl Transversal {
    fn new() -> Self {
        Transversal { gl: GaussLegendre::new(24) }
    }

    /// `int_{S^m} g(s * eta) d eta`.
    fn integrate<G: FnMut(&[f64]) -> f64>(&self, frame: &[Vec<f64>], s: f64, rel: f64, g: &mut G) -> f64 {
        let base = vec![0.0; frame[0].len()];
        self.level(frame, &base, s, rel, g)
    }

    /// `int_{S^m} g(base + scale * eta) d eta`.
    fn level<G: FnMut(&[f64]) -> f64>(&self, frame: &[Vec<f64>], base: &[f64], scale: f64, rel: f64, g: &mut G) -> f64 {
        use std::f64::consts::PI;
        let m = frame.len() - 1;
        let n = base.len();
        let at = |c: f64, s: f64| -> Vec<f64> {
            (0..n)
                .map(|i| base[i] + scale * (c * frame[0][i] + if m >= 1 { s * frame[1][i] } else { 0.0 }))
                .collect()
        };
        match m {
            0 => g(&at(1.0, 0.0)) + g(&at(-1.0, 0.0)),
            1 => {
                // periodic trapezoid with doubling
                let mut eval = |k: usize, count: usize| {
                    let (s, c) = (2.0 * PI * k as f64 / count as f64).sin_cos();
                    g(&at(c, s))
                };
                let mut count = TRAP_START;
                let mut sum: f64 = (0..count).map(|k| eval(k, count)).sum();
                let mut est = 2.0 * PI * sum / count as f64;
                while count < TRAP_MAX {
                    sum += (0..count).map(|k| eval(2 * k + 1, 2 * count)).sum::<f64>();
                    count *= 2;
                    let next = 2.0 * PI * sum / count as f64;
                    let done = (next - est).abs() <= rel * next.abs();
                    est = next;
                    if done {
                        break;
                    }
                }
                est
            }
            _ => {
                // polar angle psi from frame[0], remaining S^(m-1) on frame[1..]
                let pw = (m - 1) as i32;
                let mut total = 0.0;
                for (psi, w) in self.gl.on(0.0, PI) {
                    let (s, c) = psi.sin_cos();
                    let b: Vec<f64> = (0..n).map(|i| base[i] + scale * c * frame[0][i]).collect();
                    total += w * s.powi(pw) * self.level(&frame[1..], &b, scale * s, rel, g);
                }
                total
            }
        }
    }
}

struct Geometry {
    axis: Vec<f64>,
    /// Radii where the spherical mean is not smooth.
    breaks: Vec<f64>,
    /// `(|x - c|, radius)` of a compact support, polar axis pointing away from `c`.
    support: Option<(f64, f64)>,
    /// End of the finite range: support edge or truncation radius.
    top: f64,
}

fn geometry<F>(target: &PvTarget<F>, x: &[f64], spec: &QuadSpec) -> Result<Geometry, QuadError> {
    let n = x.len();
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    let mut axis = e_n.clone();
    let mut breaks = Vec::new();
    let mut support = None;
    let mut top = spec.truncation_radius.max(2.0 * (1.0 + norm(x)));
    match &target.decay {
        Decay::Unknown => return Err(QuadError::DecayUnknown),
        Decay::CompactSupport { center, radius } => {
            if center.len() != n || !(*radius > 0.0) {
                return Err(QuadError::InvalidInput("bad compact support".into()));
            }
            let off: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            let d = norm(&off);
            if d > 0.0 {
                axis = off.iter().map(|v| v / d).collect();
                support = Some((d, *radius));
            }
            breaks.push((d - radius).abs());
            top = d + radius;
        }
        Decay::Power { exponent } => {
            if !(*exponent > 0.0) {
                return Err(QuadError::InvalidInput("decay exponent must be positive".into()));
            }
        }
    }
    if let Some(y) = &target.singular_point {
        if y.len() != n {
            return Err(QuadError::InvalidInput("singular point dimension mismatch".into()));
        }
        let off: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let d = norm(&off);
        if d == 0.0 {
            return Err(QuadError::InvalidInput("evaluation point coincides with the singularity".into()));
        }
        axis = off.iter().map(|v| v / d).collect();
        support = None;
        breaks.push(d);
        top = top.max(2.0 * d);
    }
    Ok(Geometry { axis, breaks, support, top })
}

/// `c_{N,a} (-Delta)^a`-style principal value at `x` with its three parts.
pub fn pv_breakdown<F: Fn(&[f64]) -> f64>(
    target: &PvTarget<F>,
    x: &[f64],
    spec: &QuadSpec,
    params: &ProblemParams,
) -> Result<PvBreakdown, QuadError> {
    spec.validate()?;
    let n = params.dim_n();
    if x.len() != n {
        return Err(QuadError::InvalidInput(format!("point has {} coordinates, expected {n}", x.len())));
    }
    let geo = geometry(target, x, spec)?;
    let a = params.alpha();
    let nf = n as f64;
    let eps = spec.pv_epsilon;
    let area = sphere_area(n - 1);
    let c = pv_constant(params);
    let u = &target.u;
    let ux = u(x);

    // Taylor ball: fourth-order central differences with step eps. As
    // alpha -> 1 the ball carries almost all of the value, so a second-order
    // stencil's O(eps^2) error would dominate.
    let mut lap = 0.0;
    let mut xp = x.to_vec();
    for i in 0..n {
        let mut at = |h: f64| {
            xp[i] = x[i] + h;
            let v = u(&xp);
            xp[i] = x[i];
            v
        };
        let (u1, v1, u2, v2) = (at(eps), at(-eps), at(2.0 * eps), at(-2.0 * eps));
        lap += (16.0 * (u1 + v1) - (u2 + v2) - 30.0 * ux) / (12.0 * eps * eps);
    }
    let inner = -area * lap / (2.0 * nf) * eps.powf(2.0 - 2.0 * a) / (2.0 - 2.0 * a);

    let fr = frame(&geo.axis);
    let transversal = Transversal::new();
    let inner_rel = 0.1 * spec.rel_tol;

    // magnitude probe for the absolute part of the angular tolerance
    let mut scale = ux.abs();
    let mut probe = x.to_vec();
    for k in 0..24 {
        let t = eps * (geo.top / eps).powf(k as f64 / 23.0);
        for sgn in [1.0, -1.0] {
            for i in 0..n {
                probe[i] = x[i] + sgn * t * geo.axis[i];
            }
            let v = u(&probe);
            if v.is_finite() {
                scale = scale.max(v.abs());
            }
        }
    }
    let angle_tol = Tolerance::new((inner_rel * area * scale).max(f64::MIN_POSITIVE), inner_rel);
    let inner_max = spec.inner_panels();
    let mut angle_failed = false;

    let mean = |rho: f64, failed: &mut bool| -> f64 {
        let mut buf_p = vec![0.0; n];
        let mut buf_m = vec![0.0; n];
        let mut h = |w: &[f64]| -> f64 {
            for i in 0..n {
                buf_p[i] = x[i] + rho * w[i];
                buf_m[i] = x[i] - rho * w[i];
            }
            ux - 0.5 * (u(&buf_p) + u(&buf_m))
        };
        if n == 1 {
            return 2.0 * h(&fr[0]);
        }
        // symmetric in w -> -w: polar angle on [0, pi/2], doubled
        let mut t_pts = vec![0.0, std::f64::consts::FRAC_PI_2];
        if let Some((d, r)) = geo.support {
            let cs = (r * r - d * d - rho * rho) / (2.0 * rho * d);
            for cv in [cs, -cs] {
                if cv > 0.0 && cv < 1.0 {
                    t_pts.push(cv.acos());
                }
            }
        }
        t_pts.sort_by(f64::total_cmp);
        let pw = (n - 2) as i32;
        let res = integrate(
            |t: f64| {
                let (s, cth) = t.sin_cos();
                let mut g = |eta: &[f64]| -> f64 {
                    let w: Vec<f64> = (0..n).map(|i| cth * fr[0][i] + eta[i]).collect();
                    h(&w)
                };
                let tr = transversal.integrate(&fr[1..], s, inner_rel, &mut g);
                s.powi(pw) * tr
            },
            &t_pts,
            angle_tol,
            inner_max,
        );
        *failed |= !res.converged;
        2.0 * res.value
    };

    let outer_tol = Tolerance::new(0.5 * spec.abs_tol / c, 0.5 * spec.rel_tol);
    let mut pts = vec![eps, geo.top];
    let mut g = 2.0 * eps;
    while g < geo.top.min(1.0) {
        pts.push(g);
        g *= 2.0;
    }
    pts.extend(geo.breaks.iter().copied());
    pts.retain(|&r| r >= eps && r <= geo.top);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let outer = integrate(|rho| rho.powf(-1.0 - 2.0 * a) * mean(rho, &mut angle_failed), &pts, outer_tol, spec.max_panels);

    let tail = match target.decay {
        Decay::CompactSupport { .. } => {
            let v = area * ux * geo.top.powf(-2.0 * a) / (2.0 * a);
            Integral { value: v, error: 0.0, panels: 0, converged: true }
        }
        _ => integrate_tail(|rho| rho.powf(-1.0 - 2.0 * a) * mean(rho, &mut angle_failed), geo.top, 2.0 * a, outer_tol, spec.max_panels),
    };
    if angle_failed || !outer.converged || !tail.converged {
        return Err(QuadError::ToleranceNotMet { value: c * (inner + outer.value + tail.value), error: c * (outer.error + tail.error) });
    }
    let error = c * (outer.error + tail.error) + inner_rel * c * (outer.value.abs() + tail.value.abs());
    Ok(PvBreakdown { inner: c * inner, outer: c * outer.value, tail: c * tail.value, error })
}

/// `(-Delta)^alpha u(x)` in the principal-value sense.
pub fn pv_fractional_laplacian<F: Fn(&[f64]) -> f64>(
    target: &PvTarget<F>,
    x: &[f64],
    spec: &QuadSpec,
    params: &ProblemParams,
) -> Result<f64, QuadError> {
    pv_breakdown(target, x, spec, params).map(|b| b.value())
}

/// Value of `(-Delta)^a (1 - |x|^2)_+^a` inside the unit ball.
pub fn getoor_constant(params: &ProblemParams) -> f64 {
    use statrs::function::gamma::gamma;
    let a = params.alpha();
    let h = params.n() / 2.0;
    4f64.powf(a) * gamma(a + 1.0) * gamma(h + a) / gamma(h)
}
