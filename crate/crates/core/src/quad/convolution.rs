//! Rotationally symmetric convolution integrals
//! `int_region |z|^power K(z) w(z) dz` with an optional integrable kernel
//! singularity at a unit vector `e`, reduced to (radius, polar angle about
//! `e`) coordinates.
//!
//! A ball `B_{1/2}(e)` around the singular point is integrated separately in
//! local polar coordinates `z = e + s w`, where the `s^(N-1+exponent)`
//! behavior is absorbed by a power substitution. Infinite tails are mapped
//! onto a finite interval with the decay rate of the integrand.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::adaptive::{integrate, integrate_origin_power, Integral, Tolerance};
use super::{QuadError, QuadSpec};
use crate::params::ProblemParams;
use crate::special::sphere_area;

/// Radial/kernel factor `K(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFactor {
    None,
    /// `|e - z|^exponent`
    Riesz { exponent: f64 },
    /// `(1 + |z|)^exponent`
    Smoothed { exponent: f64 },
}

/// Weight `w(z)` depending on the height `z . e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisWeight {
    None,
    /// `min{1, (z_N / |e - z|^2)^a}` on `z_N > 0`, zero elsewhere.
    MinFactor(f64),
    /// `z_N^a (1 + |z|)^(-2a)` on `z_N > 0`, zero elsewhere.
    ConeWeight(f64),
    /// `z_N^a` on `z_N > 0`, zero elsewhere.
    Height(f64),
}

/// Angular support of the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Full,
    /// The cone `{z_N > 1, |z'| < z_N}` about the singular axis.
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialIntegrand {
    pub power: f64,
    pub kernel: KernelFactor,
    pub axis_weight: AxisWeight,
    pub support: Support,
    /// Unit vector carrying the kernel singularity; also the symmetry axis.
    pub singular_point: Vec<f64>,
}

const LOCAL_RADIUS: f64 = 0.5;

impl RadialIntegrand {
    /// `|z|^power` over the full space, singular axis `e_N`.
    pub fn power(power: f64, dim: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[dim - 1] = 1.0;
        RadialIntegrand {
            power,
            kernel: KernelFactor::None,
            axis_weight: AxisWeight::None,
            support: Support::Full,
            singular_point: e,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelFactor) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_weight(mut self, weight: AxisWeight) -> Self {
        self.axis_weight = weight;
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    fn kernel_value(&self, r: f64, d: f64) -> f64 {
        match self.kernel {
            KernelFactor::None => 1.0,
            KernelFactor::Riesz { exponent } => d.powf(exponent),
            KernelFactor::Smoothed { exponent } => (1.0 + r).powf(exponent),
        }
    }

    fn weight_value(&self, r: f64, zn: f64, d: f64) -> f64 {
        match self.axis_weight {
            AxisWeight::None => 1.0,
            AxisWeight::MinFactor(a) => {
                if zn <= 0.0 {
                    0.0
                } else {
                    (zn / (d * d)).powf(a).min(1.0)
                }
            }
            AxisWeight::ConeWeight(a) => {
                if zn <= 0.0 {
                    0.0
                } else {
                    zn.powf(a) * (1.0 + r).powf(-2.0 * a)
                }
            }
            AxisWeight::Height(a) => {
                if zn <= 0.0 {
                    0.0
                } else {
                    zn.powf(a)
                }
            }
        }
    }

    /// Integrand at a point given `|z|`, `z . e` and `|e - z|`.
    pub fn value(&self, r: f64, zn: f64, d: f64) -> f64 {
        r.powf(self.power) * self.kernel_value(r, d) * self.weight_value(r, zn, d)
    }

    fn value_without_kernel(&self, r: f64, zn: f64, d: f64) -> f64 {
        r.powf(self.power) * self.weight_value(r, zn, d)
    }

    /// Integrand at a Cartesian point, zero outside the support (radial
    /// limits excluded). Used by sampling cross-checks.
    pub fn eval_point(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let zn: f64 = z.iter().zip(&self.singular_point).map(|(a, b)| a * b).sum();
        let d = z.iter().zip(&self.singular_point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if self.support == Support::Cone {
            let lateral = (r * r - zn * zn).max(0.0).sqrt();
            if !(zn > 1.0 && lateral < zn) {
                return 0.0;
            }
        }
        self.value(r, zn, d)
    }

    /// `value(r, r cos t, d) / r^far_exponent` written in `x = 1/r`, so the
    /// far field can be evaluated without forming `r` (which overflows for
    /// slowly decaying tails). `x = 0` gives the limit at infinity.
    fn scaled_value(&self, x: f64, cos_t: f64, half_sin: f64) -> f64 {
        if cos_t <= 0.0 && self.axis_weight != AxisWeight::None {
            return 0.0;
        }
        // d / r
        let rho = ((1.0 - x) * (1.0 - x) + 4.0 * x * half_sin * half_sin).sqrt();
        let k = match self.kernel {
            KernelFactor::None => 1.0,
            KernelFactor::Riesz { exponent } => rho.powf(exponent),
            KernelFactor::Smoothed { exponent } => (1.0 + x).powf(exponent),
        };
        let w = match self.axis_weight {
            AxisWeight::None => 1.0,
            // min{1, (z_N/d^2)^a} r^a = min{r^a, (cos t / rho^2)^a}
            AxisWeight::MinFactor(a) => (cos_t / (rho * rho)).powf(a).min(x.powf(-a)),
            AxisWeight::ConeWeight(a) => cos_t.powf(a) * (1.0 + x).powf(-2.0 * a),
            AxisWeight::Height(a) => cos_t.powf(a),
        };
        k * w
    }

    /// Growth exponent of the integrand (without the volume element) as
    /// `|z| -> inf`.
    pub fn far_exponent(&self) -> f64 {
        let k = match self.kernel {
            KernelFactor::None => 0.0,
            KernelFactor::Riesz { exponent } | KernelFactor::Smoothed { exponent } => exponent,
        };
        let w = match self.axis_weight {
            AxisWeight::None => 0.0,
            AxisWeight::MinFactor(a) | AxisWeight::ConeWeight(a) => -a,
            AxisWeight::Height(a) => a,
        };
        self.power + k + w
    }

    fn singular_exponent(&self) -> Option<f64> {
        match self.kernel {
            KernelFactor::Riesz { exponent } if exponent < 0.0 => Some(exponent),
            _ => None,
        }
    }
}

/// Measure of the polar-angle integral: `|S^(N-2)| int sin^(N-2)(t) f(t) dt`
/// over `[lo, hi]`; for `N = 1` the "angles" are the two points `0` and `pi`.
fn angular<F: FnMut(f64) -> f64>(n: usize, lo: f64, hi: f64, mut f: F, tol: Tolerance, max: usize) -> Integral {
    if hi <= lo {
        return Integral::zero();
    }
    match n {
        1 => {
            let mut v = 0.0;
            if lo <= 0.0 {
                v += f(0.0);
            }
            if hi >= PI {
                v += f(PI);
            }
            Integral { value: v, error: 0.0, panels: 0, converged: true }
        }
        2 => integrate(f, &[lo, hi], tol, max).scale(2.0),
        _ => {
            let m = (n - 2) as i32;
            integrate(|t: f64| t.sin().powi(m) * f(t), &[lo, hi], tol, max).scale(sphere_area(n - 2))
        }
    }
}

/// Tracks the worst relative error of nested inner integrals.
struct InnerLog {
    worst_rel: f64,
    failed: bool,
}

impl InnerLog {
    fn record(&mut self, r: &Integral) {
        if r.value != 0.0 {
            self.worst_rel = self.worst_rel.max(r.error / r.value.abs());
        }
        self.failed |= !r.converged && r.error > 0.0;
    }
}

/// `int_{inner <= |z| <= outer} integrand(z) dz` (intersected with the
/// integrand's support), with an error estimate.
pub fn convolution_integral(
    integrand: &RadialIntegrand,
    inner_radius: f64,
    outer_radius: f64,
    spec: &QuadSpec,
    params: &ProblemParams,
) -> Result<Integral, QuadError> {
    spec.validate()?;
    let n = params.dim_n();
    let nf = n as f64;
    let e = &integrand.singular_point;
    if e.len() != n {
        return Err(QuadError::InvalidInput(format!("singular point has {} coordinates, expected {n}", e.len())));
    }
    let e_norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (e_norm - 1.0).abs() > 1e-12 {
        return Err(QuadError::InvalidInput("singular point must be a unit vector".into()));
    }
    let axis_dependent = integrand.support == Support::Cone || integrand.axis_weight != AxisWeight::None;
    if axis_dependent && (e[n - 1] - 1.0).abs() > 1e-12 {
        return Err(QuadError::InvalidInput("cone support and axis weights require the singular point e_N".into()));
    }
    if !(inner_radius >= 0.0) || !(outer_radius >= inner_radius) {
        return Err(QuadError::InvalidInput(format!("bad radii [{inner_radius}, {outer_radius}]")));
    }
    let cone = integrand.support == Support::Cone;
    let lo = if cone { inner_radius.max(1.0) } else { inner_radius };
    if lo >= outer_radius {
        return Ok(Integral::zero());
    }
    if lo == 0.0 && integrand.power + nf <= 0.0 {
        return Err(QuadError::NotIntegrable(format!("|z|^{} is not integrable at the origin", integrand.power)));
    }
    let singular = integrand.singular_exponent().filter(|_| inner_radius <= 1.0 && 1.0 <= outer_radius);
    if let Some(ex) = singular {
        if ex + nf <= 0.0 {
            return Err(QuadError::NotIntegrable(format!("|e - z|^{ex} is not integrable at e")));
        }
    }
    let decay = -(nf + integrand.far_exponent());
    if outer_radius.is_infinite() && decay <= 0.0 {
        return Err(QuadError::NotIntegrable(format!(
            "integrand grows like |z|^{} at infinity",
            integrand.far_exponent()
        )));
    }

    let inner_tol = spec.inner_tolerance();
    let inner_max = spec.inner_panels();
    let piece_tol = Tolerance::new(0.25 * spec.abs_tol, 0.5 * spec.rel_tol);
    let delta = LOCAL_RADIUS;
    let mut log = InnerLog { worst_rel: 0.0, failed: false };

    let radial = |r: f64, log: &mut InnerLog| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let mut t_lo = 0.0;
        let mut t_hi = PI;
        if cone {
            if r <= 1.0 {
                return 0.0;
            }
            t_hi = FRAC_PI_4.min((1.0 / r).acos());
        }
        if singular.is_some() && (r - 1.0).abs() < delta {
            let c = ((1.0 + r * r - delta * delta) / (2.0 * r)).clamp(-1.0, 1.0);
            t_lo = c.acos();
        }
        let res = angular(
            n,
            t_lo,
            t_hi,
            |t: f64| {
                let half = (0.5 * t).sin();
                let d = ((r - 1.0) * (r - 1.0) + 4.0 * r * half * half).sqrt();
                integrand.value(r, r * t.cos(), d)
            },
            inner_tol,
            inner_max,
        );
        log.record(&res);
        r.powi(n as i32 - 1) * res.value
    };

    let finite_top = if outer_radius.is_infinite() {
        spec.truncation_radius.max(2.0 * (1.0 + delta)).max(2.0 * lo)
    } else {
        outer_radius
    };
    let mut pts = vec![lo, finite_top];
    if singular.is_some() {
        pts.extend([1.0 - delta, 1.0, 1.0 + delta]);
    }
    if cone {
        pts.extend([1.0, SQRT_2]);
    }
    let mut g = lo.max(1.0);
    while g < finite_top {
        pts.push(g);
        g *= 2.0;
    }
    pts.retain(|&x| x >= lo && x <= finite_top);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut total = Integral::zero();
    let mut start = 0;
    if lo == 0.0 {
        let end = pts[1];
        let r = integrate_origin_power(|r| radial(r, &mut log), end, integrand.power + nf, piece_tol, spec.max_panels);
        total = total.combine(r);
        start = 1;
    }
    if pts.len() > start + 1 {
        let r = integrate(|r| radial(r, &mut log), &pts[start..], piece_tol, spec.max_panels);
        total = total.combine(r);
    }
    if outer_radius.is_infinite() {
        // int_R^inf r^(-decay-1) H(1/r) dr with u = (R/r)^decay; H is the
        // angular integral of the scaled integrand.
        let scaled = |u: f64, log: &mut InnerLog| -> f64 {
            let x = (u.ln() / decay).exp() / finite_top;
            let t_hi = if cone { FRAC_PI_4.min(x.min(1.0).acos()) } else { PI };
            let res = angular(
                n,
                0.0,
                t_hi,
                |t: f64| integrand.scaled_value(x, t.cos(), (0.5 * t).sin()),
                inner_tol,
                inner_max,
            );
            log.record(&res);
            res.value
        };
        let r = integrate(|u| scaled(u, &mut log), &[0.0, 1.0], piece_tol, spec.max_panels)
            .scale(finite_top.powf(-decay) / decay);
        total = total.combine(r);
    }
    if let Some(ex) = singular {
        let (in2, out2) = (inner_radius * inner_radius, outer_radius * outer_radius);
        let local = integrate_origin_power(
            |s: f64| {
                let mut c_lo = ((in2 - 1.0 - s * s) / (2.0 * s)).clamp(-1.0, 1.0);
                let c_hi = if outer_radius.is_infinite() {
                    1.0
                } else {
                    ((out2 - 1.0 - s * s) / (2.0 * s)).clamp(-1.0, 1.0)
                };
                if cone {
                    c_lo = c_lo.max(0.0);
                }
                if c_hi <= c_lo {
                    return 0.0;
                }
                let res = angular(
                    n,
                    c_hi.acos(),
                    c_lo.acos(),
                    |phi: f64| {
                        let c = phi.cos();
                        let r = (1.0 + s * s + 2.0 * s * c).sqrt();
                        integrand.value_without_kernel(r, 1.0 + s * c, s)
                    },
                    inner_tol,
                    inner_max,
                );
                log.record(&res);
                s.powf(nf - 1.0 + ex) * res.value
            },
            delta,
            nf + ex,
            piece_tol,
            spec.max_panels,
        );
        total = total.combine(local);
    }
    if log.failed || log.worst_rel > spec.rel_tol {
        return Err(QuadError::ToleranceNotMet { value: total.value, error: total.error });
    }
    total.error += log.worst_rel * total.value.abs();
    total.converged = total.converged && total.error <= spec.tolerance().target(total.value);
    spec.check(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DomainKind;

    fn params(n: usize, a: f64) -> ProblemParams {
        ProblemParams::new(n, a, 1.2, DomainKind::WholeSpace).unwrap()
    }

    #[test]
    fn pure_power_exterior() {
        // int_{|z|>1} |z|^{-N-1} dz = |S^{N-1}|
        for n in 1..=4 {
            let p = params(n, 0.25);
            let r = convolution_integral(&RadialIntegrand::power(-(n as f64) - 1.0, n), 1.0, f64::INFINITY, &QuadSpec::default(), &p)
                .unwrap();
            let exact = sphere_area(n - 1);
            assert!((r.value - exact).abs() <= 1e-9 * exact, "N={n}: {} vs {exact}", r.value);
            assert!(r.error >= (r.value - exact).abs());
        }
    }

    #[test]
    fn slowly_decaying_tail() {
        // int_{|z|>1} |z|^(-N-eps) dz = |S^2| / eps; most of the mass sits
        // beyond any representable radius.
        let p = params(3, 0.5);
        for eps in [1e-2, 1e-3, 1e-4] {
            let r = convolution_integral(&RadialIntegrand::power(-3.0 - eps, 3), 1.0, f64::INFINITY, &QuadSpec::default(), &p)
                .unwrap();
            let exact = 4.0 * PI / eps;
            assert!((r.value - exact).abs() <= 1e-9 * exact, "eps={eps}: {} vs {exact}", r.value);
        }
    }

    #[test]
    fn pure_power_ball() {
        // int_{|z|<2} |z|^{-1} dz = 4 pi * 2 = 8 pi in R^3
        let r = convolution_integral(&RadialIntegrand::power(-1.0, 3), 0.0, 2.0, &QuadSpec::default(), &params(3, 0.5)).unwrap();
        assert!((r.value - 8.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn riesz_ball_average() {
        // int_{|z|<2} |e - z|^{-2} dz = 2 pi int_0^2 r ln((r+1)/|r-1|) dr in R^3
        let integrand = RadialIntegrand::power(0.0, 3).with_kernel(KernelFactor::Riesz { exponent: -2.0 });
        let r = convolution_integral(&integrand, 0.0, 2.0, &QuadSpec::default(), &params(3, 0.5)).unwrap();
        let exact = 2.0 * PI * integrate(|r: f64| r * ((r + 1.0) / (r - 1.0).abs()).ln(), &[0.0, 1.0, 2.0], Tolerance::new(1e-14, 1e-13), 10_000).value;
        assert!((r.value - exact).abs() < 1e-8 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn cone_volume_in_ball() {
        let integrand = RadialIntegrand::power(0.0, 3).with_support(Support::Cone);
        let r = convolution_integral(&integrand, 0.0, 2.0, &QuadSpec::default(), &params(3, 0.5)).unwrap();
        // closed form: 2 pi int_0^{pi/4} sin t int_{1/cos t}^2 r^2 dr dt
        let exact = 2.0 * PI
            * integrate(
                |t: f64| t.sin() * (8.0 - t.cos().powi(-3)) / 3.0,
                &[0.0, PI / 4.0],
                Tolerance::new(1e-15, 1e-13),
                1000,
            )
            .value;
        assert!((r.value - exact).abs() < 1e-9 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn errors() {
        let p = params(3, 0.5);
        let spec = QuadSpec::default();
        let bad = RadialIntegrand::power(-2.5, 3);
        assert!(matches!(convolution_integral(&bad, 1.0, f64::INFINITY, &spec, &p), Err(QuadError::NotIntegrable(_))));
        let bad = RadialIntegrand::power(-3.0, 3);
        assert!(matches!(convolution_integral(&bad, 0.0, 1.0, &spec, &p), Err(QuadError::NotIntegrable(_))));
        let bad = RadialIntegrand::power(-4.0, 3).with_kernel(KernelFactor::Riesz { exponent: -3.0 });
        assert!(matches!(convolution_integral(&bad, 0.5, 2.0, &spec, &p), Err(QuadError::NotIntegrable(_))));
        let tight = QuadSpec { max_panels: 1, rel_tol: 1e-15, ..spec };
        let hard = RadialIntegrand::power(-2.0, 3).with_kernel(KernelFactor::Riesz { exponent: -2.0 });
        assert!(matches!(convolution_integral(&hard, 1.0, f64::INFINITY, &tight, &p), Err(QuadError::ToleranceNotMet { .. })));
    }

    #[test]
    fn rotation_invariance_of_shell_integrals() {
        let p = params(3, 0.5);
        let spec = QuadSpec::default();
        let base = RadialIntegrand::power(-2.0, 3).with_kernel(KernelFactor::Riesz { exponent: -2.0 });
        let a = convolution_integral(&base, 1.0, f64::INFINITY, &spec, &p).unwrap();
        let mut turned = base.clone();
        turned.singular_point = vec![0.6, 0.0, 0.8];
        let b = convolution_integral(&turned, 1.0, f64::INFINITY, &spec, &p).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
