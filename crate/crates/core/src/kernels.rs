//! Green kernels of `(-Delta)^alpha`: the whole-space Riesz kernel, the
//! exterior barrier and its lower bound, the exact half-space kernel and its
//! two-sided `min{1, (x_N y_N / |x-y|^2)^alpha}` enclosure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::params::ProblemParams;
use crate::special::{BetaProfile, BetaTable, FastPow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel is singular at coincident points")]
    CoincidentPoints,
    #[error("barrier is singular at the origin")]
    OriginSingularity,
    #[error("points must lie outside B(0, {min_radius})")]
    OutsideValidRegion { min_radius: f64 },
    #[error("points must lie in the open half space x_N > 0")]
    OutsideDomain,
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid kernel constant {name} = {value}")]
    InvalidConstant { name: &'static str, value: f64 },
}

/// Normalization and comparability constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConstants {
    /// Riesz normalization: `G(x, y) = c3 |x-y|^(2a-N)` in `R^N`.
    pub c3: f64,
    /// Exterior lower-bound constant `(1 - 2^(2a-N)) c3`.
    pub c4: f64,
    /// Half-space comparability constant (> 1).
    pub c10: f64,
    /// Principal-value normalization of the operator.
    #[serde(rename = "cNalpha")]
    pub c_n_alpha: f64,
}

/// Optional per-field overrides, as read from a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c10: Option<f64>,
    #[serde(rename = "cNalpha")]
    pub c_n_alpha: Option<f64>,
}

/// Safety factor applied to the sampled half-space comparability constant.
pub const C10_SAFETY: f64 = 1.05;
/// Number of random pairs used to estimate `c10`.
pub const C10_SAMPLES: usize = 10_000;
const C10_SEED: u64 = 0x5eed_c10;

pub fn riesz_constant(params: &ProblemParams) -> f64 {
    let n = params.n();
    let a = params.alpha();
    gamma((n - 2.0 * a) / 2.0) / (4f64.powf(a) * std::f64::consts::PI.powf(n / 2.0) * gamma(a))
}

pub fn pv_constant(params: &ProblemParams) -> f64 {
    let n = params.n();
    let a = params.alpha();
    let g_neg = gamma(1.0 - a) / (-a);
    4f64.powf(a) * gamma(n / 2.0 + a) / (std::f64::consts::PI.powf(n / 2.0) * g_neg.abs())
}

impl KernelConstants {
    /// Closed-form constants plus the sampled `c10`.
    pub fn for_params(params: &ProblemParams) -> Self {
        let c3 = riesz_constant(params);
        let partial = KernelConstants {
            c3,
            c4: (1.0 - 2f64.powf(2.0 * params.alpha() - params.n())) * c3,
            c10: 2.0,
            c_n_alpha: pv_constant(params),
        };
        let kern = Kernels::new(*params, partial).expect("closed-form constants are valid");
        let est = kern.estimate_c10(C10_SAMPLES, C10_SEED);
        KernelConstants { c10: est.c10_default, ..partial }
    }

    pub fn with_overrides(mut self, o: &ConstantOverrides) -> Self {
        if let Some(v) = o.c3 {
            self.c3 = v;
        }
        if let Some(v) = o.c4 {
            self.c4 = v;
        }
        if let Some(v) = o.c10 {
            self.c10 = v;
        }
        if let Some(v) = o.c_n_alpha {
            self.c_n_alpha = v;
        }
        self
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        for (name, value) in [("c3", self.c3), ("c4", self.c4), ("cNalpha", self.c_n_alpha)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KernelError::InvalidConstant { name, value });
            }
        }
        if !(self.c10 > 1.0 && self.c10.is_finite()) {
            return Err(KernelError::InvalidConstant { name: "c10", value: self.c10 });
        }
        Ok(())
    }

    /// Lower constant of the half-space estimate, `1/c10`.
    pub fn c9(&self) -> f64 {
        1.0 / self.c10
    }
}

/// `lower <= G <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEnclosure {
    pub lower: f64,
    pub upper: f64,
}

impl KernelEnclosure {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Sampled sup/inf of `G_+(x,y) |x-y|^(N-2a) / M(x,y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C10Estimate {
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `max(ratio_max, 1/ratio_min)`.
    pub c10_raw: f64,
    /// `c10_raw * C10_SAFETY`.
    pub c10_default: f64,
    pub samples: usize,
}

/// Kernel evaluator bound to one parameter set and constant table.
#[derive(Debug, Clone)]
pub struct Kernels {
    params: ProblemParams,
    constants: KernelConstants,
    /// `c3 / B(a, N/2 - a)`
    kappa: f64,
    profile: BetaProfile,
    table: BetaTable,
    /// `d2 -> d2^((2a-N)/2)`
    half_power: FastPow,
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl Kernels {
    pub fn new(params: ProblemParams, constants: KernelConstants) -> Result<Self, KernelError> {
        constants.validate()?;
        let a = params.alpha();
        let profile = BetaProfile::new(a, params.n() / 2.0 - a);
        let table = BetaTable::new(profile);
        let half_power = FastPow::new(a - params.n() / 2.0);
        Ok(Kernels { params, kappa: constants.c3 / profile.complete(), constants, profile, table, half_power })
    }

    /// Convenience constructor with the default constants.
    pub fn with_defaults(params: ProblemParams) -> Self {
        Kernels::new(params, KernelConstants::for_params(&params)).expect("default constants are valid")
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn constants(&self) -> &KernelConstants {
        &self.constants
    }

    fn check(&self, x: &[f64]) -> Result<(), KernelError> {
        let n = self.params.dim_n();
        if x.len() != n {
            return Err(KernelError::DimensionMismatch { expected: n, got: x.len() });
        }
        Ok(())
    }

    fn power(&self) -> f64 {
        2.0 * self.params.alpha() - self.params.n()
    }

    pub fn riesz_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check(x)?;
        self.check(y)?;
        let d = dist(x, y);
        if d == 0.0 {
            return Err(KernelError::CoincidentPoints);
        }
        Ok(self.riesz_at_distance(d))
    }

    pub fn riesz_at_distance(&self, d: f64) -> f64 {
        self.constants.c3 * d.powf(self.power())
    }

    /// Green function of `delta_y - |y|^(2a-N) delta_0` in `R^N`; vanishes on
    /// `|x - y| = |x||y|` and is negative inside that surface.
    pub fn gamma_barrier(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check(x)?;
        self.check(y)?;
        let nx = norm(x);
        if nx == 0.0 {
            return Err(KernelError::OriginSingularity);
        }
        let d = dist(x, y);
        if d == 0.0 {
            return Err(KernelError::CoincidentPoints);
        }
        let s = self.power();
        let c3 = self.constants.c3;
        Ok(c3 * d.powf(s) - c3 * norm(y).powf(s) * nx.powf(s))
    }

    /// `c4 |x-y|^(2a-N)` for `|x|, |y| >= 4 r0`. The barrier argument
    /// certifies it as a lower bound of the exterior Green function once both
    /// points lie outside `B(0, 8 r0)`.
    pub fn exterior_kernel_lower(&self, x: &[f64], y: &[f64], r0: f64) -> Result<f64, KernelError> {
        self.check(x)?;
        self.check(y)?;
        let min_radius = 4.0 * r0;
        if norm(x) < min_radius || norm(y) < min_radius {
            return Err(KernelError::OutsideValidRegion { min_radius });
        }
        let d = dist(x, y);
        if d == 0.0 {
            return Err(KernelError::CoincidentPoints);
        }
        Ok(self.constants.c4 * d.powf(self.power()))
    }

    fn halfspace_check(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check(x)?;
        self.check(y)?;
        let n = self.params.dim_n();
        if !(x[n - 1] > 0.0 && y[n - 1] > 0.0) {
            return Err(KernelError::OutsideDomain);
        }
        let d = dist(x, y);
        if d == 0.0 {
            return Err(KernelError::CoincidentPoints);
        }
        Ok(d)
    }

    /// Exact half-space Green function
    /// `kappa |x-y|^(2a-N) int_0^r t^(a-1) (1+t)^(-N/2) dt`, `r = 4 x_N y_N / |x-y|^2`.
    pub fn halfspace_green(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        let d = self.halfspace_check(x, y)?;
        let n = self.params.dim_n();
        let r = 4.0 * x[n - 1] * y[n - 1] / (d * d);
        Ok(self.kappa * d.powf(self.power()) * self.profile.eval(r))
    }

    /// Same kernel through the tabulated profile; no validation. Takes the
    /// squared distance and the two heights.
    #[inline]
    pub fn halfspace_green_fast(&self, dist2: f64, xn: f64, yn: f64) -> f64 {
        let r = 4.0 * xn * yn / dist2;
        self.kappa * self.half_power.eval(dist2) * self.table.eval(r)
    }

    /// `min{1, (x_N y_N / |x-y|^2)^a}`
    pub fn boundary_factor(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        let d = self.halfspace_check(x, y)?;
        let n = self.params.dim_n();
        Ok((x[n - 1] * y[n - 1] / (d * d)).powf(self.params.alpha()).min(1.0))
    }

    pub fn halfspace_enclosure(&self, x: &[f64], y: &[f64], c10: f64) -> Result<KernelEnclosure, KernelError> {
        if !(c10 > 1.0) {
            return Err(KernelError::InvalidConstant { name: "c10", value: c10 });
        }
        let d = self.halfspace_check(x, y)?;
        let m = self.boundary_factor(x, y)?;
        let base = m * d.powf(self.power());
        Ok(KernelEnclosure { lower: base / c10, upper: base * c10 })
    }

    /// Samples `count` random pairs (plus the two analytic limits `r -> 0`
    /// and `r -> inf`) to estimate the half-space comparability constant.
    pub fn estimate_c10(&self, count: usize, seed: u64) -> C10Estimate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.params.alpha();
        // limits of G |x-y|^(N-2a) / M: kappa 4^a / a as r -> 0, c3 as r -> inf
        let mut lo = self.constants.c3.min(self.kappa * 4f64.powf(a) / a);
        let mut hi = self.constants.c3.max(self.kappa * 4f64.powf(a) / a);
        for _ in 0..count {
            let (x, y) = random_halfspace_pair(&mut rng, self.params.dim_n());
            let Ok(g) = self.halfspace_green(&x, &y) else { continue };
            let d = dist(&x, &y);
            let m = self.boundary_factor(&x, &y).unwrap();
            let ratio = g * d.powf(-self.power()) / m;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let c10_raw = hi.max(1.0 / lo);
        C10Estimate { ratio_min: lo, ratio_max: hi, c10_raw, c10_default: c10_raw * C10_SAFETY, samples: count }
    }
}

/// Random pair in the upper half space with heights and separations spread
/// over several decades.
pub fn random_halfspace_pair<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let spread = 10f64.powf(rng.gen_range(-2.0..2.0));
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n - 1 {
        x[i] = rng.gen_range(-1.0..1.0) * spread;
        y[i] = rng.gen_range(-1.0..1.0) * spread;
    }
    x[n - 1] = 10f64.powf(rng.gen_range(-3.0..2.0));
    y[n - 1] = 10f64.powf(rng.gen_range(-3.0..2.0));
    (x, y)
}
