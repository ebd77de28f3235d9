//! Sampling oracle shared by the integration and acceptance tests.
#![allow(dead_code)]

use lane_emden::quad::{KernelFactor, RadialIntegrand, Support};
use lane_emden::special::sphere_area;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            // Box-Muller pair.
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (std::f64::consts::TAU * u2).cos());
            v.push(r * (std::f64::consts::TAU * u2).sin());
        }
        v.truncate(n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Monte Carlo estimate of `int_{inner <= |z| <= outer} f(z) dz` in full
/// Cartesian coordinates, with no use of the rotational reduction.
///
/// Importance density: an equal mixture of a radial power law (tail heavier
/// than the integrand, lighter than `r^-N`, so the weights have finite
/// variance) and, when the kernel is singular at `e`, a local power law
/// `|z - e|^sigma` on `B_{1/2}(e)` matching the singularity.
pub fn monte_carlo(f: &RadialIntegrand, inner: f64, outer: f64, samples: usize, seed: u64) -> McEstimate {
    let n = f.singular_point.len();
    let nf = n as f64;
    let area = sphere_area(n - 1);
    let e = &f.singular_point;
    let sigma = match f.kernel {
        KernelFactor::Riesz { exponent } if exponent < 0.0 => Some(exponent),
        _ => None,
    };
    // The cone lies outside the unit ball.
    let lo = if f.support == Support::Cone { inner.max(1.0) } else { inner };
    let finite = outer.is_finite();
    // Radial part: Cartesian density ~ r^E on [lo, inf), or uniform in the
    // shell when the outer radius is finite.
    let big_e = (f.far_exponent() - nf) / 2.0;
    let a = -(big_e + nf);
    assert!(finite || (a > 0.0 && lo > 0.0), "tail sampler needs inner > 0 and decay");
    let shell_vol = area * (outer.powf(nf) - lo.powf(nf)) / nf;
    let radial_density = |r: f64| -> f64 {
        if r < lo || r > outer {
            0.0
        } else if finite {
            1.0 / shell_vol
        } else {
            a * lo.powf(a) * r.powf(-a - 1.0) / (area * r.powf(nf - 1.0))
        }
    };
    let b = sigma.map(|s| nf + s);
    let local_density = |s: f64| -> f64 {
        match b {
            Some(b) if s < 0.5 => b * s.powf(b - 1.0) / 0.5f64.powf(b) / (area * s.powf(nf - 1.0)),
            _ => 0.0,
        }
    };
    let mix = if b.is_some() { 0.5 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0f64, 0.0f64);
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        let w = unit_direction(&mut rng, n);
        let u: f64 = 1.0 - rng.gen::<f64>();
        if b.is_none() || rng.gen::<f64>() < mix {
            let r = if finite {
                (lo.powf(nf) + u * (outer.powf(nf) - lo.powf(nf))).powf(1.0 / nf)
            } else {
                lo * u.powf(-1.0 / a)
            };
            z.iter_mut().zip(&w).for_each(|(zi, wi)| *zi = r * wi);
        } else {
            let s = 0.5 * u.powf(1.0 / b.unwrap());
            z.iter_mut().zip(w.iter().zip(e)).for_each(|(zi, (wi, ei))| *zi = ei + s * wi);
        }
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let value = if r < inner || r > outer { 0.0 } else { f.eval_point(&z) };
        let ds = z.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let density = mix * radial_density(r) + (1.0 - mix) * local_density(ds);
        let x = if value == 0.0 { 0.0 } else { value / density };
        sum += x;
        sum2 += x * x;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum2 / m - mean * mean).max(0.0);
    McEstimate { mean, std_err: (var / (m - 1.0)).sqrt() }
}
