//! Special functions: sphere areas, the half-space incomplete-Beta profile
//! and a tabulated variant of it for inner loops.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::quad::adaptive::{integrate, Tolerance};

/// Surface measure of the unit sphere `S^m` in `R^(m+1)`.
/// `S^0` is the two-point set, of measure 2.
pub fn sphere_area(m: usize) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Complete Beta function via log-gamma.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// `x^e` with shortcuts for integer and half-integer exponents, which are
/// common (`alpha = 1/2` and odd `N`) and sit in inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FastPow {
    Int(i32),
    /// `x^(k + 1/2)`
    HalfInt(i32),
    General(f64),
}

impl FastPow {
    pub fn new(e: f64) -> Self {
        if e == e.round() && e.abs() < 64.0 {
            FastPow::Int(e as i32)
        } else if 2.0 * e == (2.0 * e).round() && e.abs() < 64.0 {
            FastPow::HalfInt((e - 0.5).round() as i32)
        } else {
            FastPow::General(e)
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FastPow::Int(k) => x.powi(k),
            FastPow::HalfInt(k) => x.powi(k) * x.sqrt(),
            FastPow::General(e) => x.powf(e),
        }
    }
}

/// `int_0^r t^(a-1) (1+t)^(-a-b) dt` for `a, b > 0`, with `a + b = N/2` in
/// the half-space kernel.
///
/// For `r <= 1` the substitution `t = s^(1/a)` removes the endpoint
/// singularity; for `r > 1` the complement `int_r^inf` is mapped through
/// `t = 1/v`, `v = w^(1/b)` and subtracted from the complete integral.
#[derive(Debug, Clone, Copy)]
pub struct BetaProfile {
    pub a: f64,
    pub b: f64,
    complete: f64,
}

const PROFILE_TOL: Tolerance = Tolerance { abs: 1e-300, rel: 1e-13 };

impl BetaProfile {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a > 0.0 && b > 0.0, "beta profile needs positive parameters");
        BetaProfile { a, b, complete: beta(a, b) }
    }

    pub fn complete(&self) -> f64 {
        self.complete
    }

    /// Lower piece `(1/a) int_0^sigma (1 + s^(1/a))^(-(a+b)) ds`, `sigma = r^a`.
    fn lower(&self, sigma: f64) -> f64 {
        let (a, n2) = (self.a, self.a + self.b);
        let inv = 1.0 / a;
        integrate(|s: f64| (1.0 + s.powf(inv)).powf(-n2), &[0.0, sigma], PROFILE_TOL, 4096).value / a
    }

    /// Upper complement `int_r^inf`, as a function of `omega = r^(-b)`.
    fn upper(&self, omega: f64) -> f64 {
        let (b, n2) = (self.b, self.a + self.b);
        let inv = 1.0 / b;
        integrate(|w: f64| (1.0 + w.powf(inv)).powf(-n2), &[0.0, omega], PROFILE_TOL, 4096).value / b
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r <= 1.0 {
            self.lower(r.powf(self.a))
        } else if r.is_infinite() {
            self.complete
        } else {
            self.complete - self.upper(r.powf(-self.b))
        }
    }

    /// Ratio to the complete integral, in `[0, 1]`.
    pub fn fraction(&self, r: f64) -> f64 {
        (self.eval(r) / self.complete).clamp(0.0, 1.0)
    }
}

/// Piecewise Chebyshev interpolant of [`BetaProfile`] in the mapped
/// variables `sigma = r^a` (r <= 1) and `omega = r^(-b)` (r > 1), on dyadic
/// panels accumulating at 0. Agrees with the adaptive profile to ~1e-13.
#[derive(Debug, Clone)]
pub struct BetaTable {
    profile: BetaProfile,
    pow_a: FastPow,
    pow_neg_b: FastPow,
    lower: ChebPanels,
    upper: ChebPanels,
}

impl BetaTable {
    pub fn new(profile: BetaProfile) -> Self {
        let lower = ChebPanels::build(|s| profile.lower(s), profile.a, 1.0);
        let upper = ChebPanels::build(|w| profile.upper(w), profile.b, 1.0);
        BetaTable { profile, pow_a: FastPow::new(profile.a), pow_neg_b: FastPow::new(-profile.b), lower, upper }
    }

    pub fn profile(&self) -> &BetaProfile {
        &self.profile
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r <= 1.0 {
            self.lower.eval(self.pow_a.eval(r))
        } else if r.is_infinite() {
            self.profile.complete
        } else {
            self.profile.complete - self.upper.eval(self.pow_neg_b.eval(r))
        }
    }
}

const CHEB_DEGREE: usize = 16;
const CHEB_LEVELS: usize = 40;

/// Chebyshev panels `[2^-(k+1), 2^-k] * top`, `k < CHEB_LEVELS`; below the
/// last panel the function is taken as linear through the origin (the
/// profiles start like `s / param`).
#[derive(Debug, Clone)]
struct ChebPanels {
    top: f64,
    slope: f64,
    coeffs: Vec<[f64; CHEB_DEGREE + 1]>,
}

impl ChebPanels {
    fn build<F: Fn(f64) -> f64>(f: F, param: f64, top: f64) -> Self {
        let n = CHEB_DEGREE + 1;
        let mut coeffs = Vec::with_capacity(CHEB_LEVELS);
        for k in 0..CHEB_LEVELS {
            let hi = top * 0.5f64.powi(k as i32);
            let lo = 0.5 * hi;
            let vals: Vec<f64> = (0..n)
                .map(|j| {
                    let x = (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos();
                    f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
                })
                .collect();
            let mut c = [0.0; CHEB_DEGREE + 1];
            for (m, cm) in c.iter_mut().enumerate() {
                let s: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v * (std::f64::consts::PI * m as f64 * (j as f64 + 0.5) / n as f64).cos()
                    })
                    .sum();
                *cm = 2.0 * s / n as f64;
            }
            c[0] *= 0.5;
            coeffs.push(c);
        }
        ChebPanels { top, slope: 1.0 / param, coeffs }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let ratio = self.top / s;
        // panel index k with 2^-(k+1) < s/top <= 2^-k, i.e. floor(log2(ratio))
        // read off the exponent bits (ratio is normal here)
        let k = if ratio <= 1.0 { 0 } else { ((ratio.to_bits() >> 52) & 0x7ff) as usize - 1023 };
        if k >= CHEB_LEVELS {
            return self.slope * s;
        }
        let hi = self.top * f64::from_bits(((1023 - k) as u64) << 52);
        let lo = 0.5 * hi;
        let x = ((2.0 * s - lo - hi) / (hi - lo)).clamp(-1.0, 1.0);
        let c = &self.coeffs[k];
        // Clenshaw
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cm in c.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + cm;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + c[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta_reg;

    #[test]
    fn fast_pow_matches_powf() {
        for e in [-2.0, -1.5, -0.5, 0.5, 1.0, 2.5, 0.3, -1.7] {
            let fp = FastPow::new(e);
            for x in [1e-8f64, 0.3, 1.0, 7.0, 1e9] {
                let want: f64 = x.powf(e);
                assert!((fp.eval(x) - want).abs() <= 1e-14 * want, "{e} {x}");
            }
        }
        assert_eq!(FastPow::new(-1.5), FastPow::HalfInt(-2));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(0) - 2.0).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((sphere_area(2) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn profile_matches_regularized_incomplete_beta() {
        // int_0^r t^(a-1)(1+t)^(-a-b) dt = B(a,b) I_{r/(1+r)}(a,b); for r > 1
        // use the reflection I_x(a,b) = 1 - I_{1-x}(b,a) to keep 1-x exact
        for &(a, b) in &[(0.5, 1.0), (0.3, 1.2), (0.7, 0.8), (0.25, 0.25), (0.9, 1.6)] {
            let prof = BetaProfile::new(a, b);
            let table = BetaTable::new(prof);
            for &r in &[1e-9, 1e-4, 0.01, 0.3, 0.999, 1.0, 1.001, 4.0, 100.0, 1e6, 1e12] {
                let oracle = if r <= 1.0 {
                    beta(a, b) * beta_reg(a, b, r / (1.0 + r))
                } else {
                    beta(a, b) * (1.0 - beta_reg(b, a, 1.0 / (1.0 + r)))
                };
                let got = prof.eval(r);
                assert!((got - oracle).abs() <= 1e-11 * oracle, "a={a} b={b} r={r}: {got} vs {oracle}");
                let tab = table.eval(r);
                assert!((tab - got).abs() <= 1e-12 * got.max(1e-300), "table a={a} r={r}: {tab} vs {got}");
            }
        }
    }
}
