//! Acceptance suite: one PASS/FAIL line per criterion on stderr.
//!
//! Lines are written straight to the stderr handle so they show up even
//! though libtest captures `println!` output of passing tests.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::monte_carlo;
use lane_emden::cascade::{run_cascade, step_integrand, CascadeRegion, CascadeVerdict, SourceGeometry};
use lane_emden::kernels::{random_halfspace_pair, KernelConstants, Kernels};
use lane_emden::params::{
    classify_regime, reach_threshold, tau_closed_form, tau_sequence, DomainKind, ProblemParams, Regime, TauVerdict,
    DEFAULT_MAX_STEPS,
};
use lane_emden::picard::{
    barrier_thresholds, estimate_c14, picard_run, refinement_difference, regularity_bootstrap, verify_weak_form,
    IterationControl, PicardProblem,
};
use lane_emden::quad::pv::{getoor_constant, Decay, PvTarget};
use lane_emden::quad::{
    convolution_integral, integrate, integrate_origin_power, pv_fractional_laplacian, remark_identity_check,
    reproducing_integral, AxisWeight, Ball, Bump, QuadSpec, RadialIntegrand, Support, Tolerance,
};
use lane_emden::special::sphere_area;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion} [{verdict}] {name}: {detail}");
}

fn finish(criterion: u32, name: &str, failures: &[String], start: Instant, budget: Duration, summary: &str) {
    let elapsed = start.elapsed();
    let mut failures = failures.to_vec();
    if elapsed > budget {
        failures.push(format!("runtime {elapsed:.1?} over budget {budget:?}"));
    }
    let detail = if failures.is_empty() {
        format!("{summary}; {elapsed:.1?}")
    } else {
        format!("{summary}; {elapsed:.1?}; {}", failures.join("; "))
    };
    report(criterion, name, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "criterion {criterion}: {}", failures.join("; "));
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_1_exponent_engine() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let mut worst_closed: f64 = 0.0;
    let mut reaches = 0;
    for case in 0..200 {
        let n = rng.gen_range(2..=8usize);
        let alpha = rng.gen_range(0.05..0.95);
        let p = rng.gen_range(1.01..3.0);
        let params = ProblemParams::new(n, alpha, p, DomainKind::WholeSpace).unwrap();
        let nf = n as f64;
        let tau0 = if case % 2 == 0 { 2.0 * alpha - nf } else { alpha - nf };
        let trace = tau_sequence(tau0, &params, DEFAULT_MAX_STEPS).unwrap();
        let threshold = 1.0 + 2.0 * alpha / (-tau0);
        let reached = matches!(trace.verdict, TauVerdict::Reaches { .. });
        reaches += usize::from(reached);
        if reached != (p < threshold) {
            failures.push(format!("verdict mismatch at N={n} a={alpha} p={p} tau0={tau0}"));
        }
        for (j, &t) in trace.tau.iter().enumerate() {
            let c = tau_closed_form(tau0, alpha, p, j as u32);
            let scale = t.abs().max(1e-300);
            worst_closed = worst_closed.max((c - t).abs() / scale);
        }
        if (reach_threshold(alpha, tau0) - threshold).abs() > 1e-15 * threshold {
            failures.push(format!("reach_threshold disagrees at a={alpha} tau0={tau0}"));
        }
        let ext = 1.0 + 2.0 * alpha / (nf - 2.0 * alpha);
        let half = 1.0 + 2.0 * alpha / (nf - alpha);
        if rel(ext, nf / (nf - 2.0 * alpha)) > 1e-12 || rel(half, (nf + alpha) / (nf - alpha)) > 1e-12 {
            failures.push(format!("threshold identity fails at N={n} a={alpha}"));
        }
    }
    if worst_closed > 1e-12 {
        failures.push(format!("closed form deviates by {worst_closed:.2e}"));
    }
    let summary = format!("200 cases, {reaches} reach, closed-form worst rel {worst_closed:.2e}");
    finish(1, "exponent engine", &failures, start, Duration::from_secs(1), &summary);
}

#[test]
fn criterion_2_kernel_suite() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let params = ProblemParams::new(3, 0.5, 1.45, DomainKind::HalfSpace).unwrap();
    let base = Kernels::with_defaults(params);
    let c10 = base.estimate_c10(10_000, 5).c10_default;
    let kernels = Kernels::new(params, KernelConstants { c10, ..*base.constants() }).unwrap();
    let s = 2.0 * params.alpha() - params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut scaling, mut symmetry, mut above, mut outside, mut pairs) = (0f64, 0f64, f64::NEG_INFINITY, 0usize, 0);
    while pairs < 10_000 {
        let (x, y) = random_halfspace_pair(&mut rng, 3);
        let Ok(g) = kernels.halfspace_green(&x, &y) else { continue };
        pairs += 1;
        let lam: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
        let xs: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * lam).collect();
        let gs = kernels.halfspace_green(&xs, &ys).unwrap();
        let rz = kernels.riesz_kernel(&x, &y).unwrap();
        scaling = scaling.max(rel(gs, lam.powf(s) * g));
        symmetry = symmetry.max(rel(kernels.halfspace_green(&y, &x).unwrap(), g));
        above = above.max(g - rz);
        outside += usize::from(!kernels.halfspace_enclosure(&x, &y, c10).unwrap().contains(g));
    }
    if scaling > 1e-10 {
        failures.push(format!("scaling {scaling:.2e}"));
    }
    if symmetry > 1e-10 {
        failures.push(format!("symmetry {symmetry:.2e}"));
    }
    if above > 0.0 {
        failures.push(format!("half-space kernel exceeds Riesz kernel by {above:.2e}"));
    }
    if outside > 0 {
        failures.push(format!("{outside} pairs outside the enclosure"));
    }
    let summary = format!(
        "10^4 pairs, scaling {scaling:.1e}, symmetry {symmetry:.1e}, max(G - riesz) {above:.1e}, c10 {c10:.4}, enclosure misses {outside}"
    );
    finish(2, "kernel suite", &failures, start, Duration::from_secs(30), &summary);
}

#[test]
fn criterion_3_quadrature_oracles() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let whole = ProblemParams::new(3, 0.5, 1.2, DomainKind::WholeSpace).unwrap();
    let a = whole.alpha();

    // Closed form first checked against a 1-D radial integral at the center.
    let exact = getoor_constant(&whole);
    let tol = Tolerance::new(1e-15, 1e-12);
    let f = |r: f64| -(a * (-r * r).ln_1p()).exp_m1() * r.powf(-1.0 - 2.0 * a);
    let radial = integrate_origin_power(f, 0.5, 2.0 - 2.0 * a, tol, 10_000).value + integrate(f, &[0.5, 1.0], tol, 10_000).value;
    let c_na = KernelConstants::for_params(&whole).c_n_alpha;
    let oracle = c_na * sphere_area(2) * (radial + 1.0 / (2.0 * a));
    if rel(oracle, exact) > 1e-9 {
        failures.push(format!("closed form {exact} vs radial oracle {oracle}"));
    }
    let target = PvTarget::new(
        move |y: &[f64]| (1.0 - y.iter().map(|v| v * v).sum::<f64>()).max(0.0).powf(a),
        Decay::CompactSupport { center: vec![0.0; 3], radius: 1.0 },
    );
    let pv_spec = QuadSpec { rel_tol: 1e-7, ..QuadSpec::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut getoor_worst: f64 = 0.0;
    for _ in 0..20 {
        let r = rng.gen_range(0.0..0.9);
        let (u, phi): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let w = (1.0 - u * u).sqrt();
        let x = [r * w * phi.cos(), r * w * phi.sin(), r * u];
        let v = pv_fractional_laplacian(&target, &x, &pv_spec, &whole).unwrap();
        getoor_worst = getoor_worst.max(rel(v, exact));
    }
    if getoor_worst > 1e-2 {
        failures.push(format!("Getoor worst {getoor_worst:.2e}"));
    }

    let spec = QuadSpec::default();
    let xi = Bump::new(vec![0.0; 3], 0.5);
    let repro = reproducing_integral(&xi, None, &spec, &whole).unwrap();
    let repro_err = rel(repro.value, xi.eval(&[0.0; 3]));
    if repro_err > 1e-3 {
        failures.push(format!("reproducing identity {repro_err:.2e}"));
    }
    let sides = remark_identity_check(&xi, &Ball { center: vec![0.0; 3], radius: 1.0 }, &spec, &whole).unwrap();
    let remark_err = sides.relative_residual();
    if remark_err > 1e-4 {
        failures.push(format!("remark identity {remark_err:.2e}"));
    }

    // Five cascade integrands against 10^7-sample Monte Carlo.
    let ext = |alpha: f64, p: f64| ProblemParams::new(3, alpha, p, DomainKind::Exterior { r0: 0.5 }).unwrap();
    let half = |alpha: f64, p: f64| ProblemParams::new(3, alpha, p, DomainKind::HalfSpace).unwrap();
    let cases: Vec<(&str, RadialIntegrand, f64, f64, ProblemParams)> = vec![
        ("exterior a=0.5 tau p=-2", step_integrand(CascadeRegion::ExteriorAnnulus { r0: 0.5 }, &ext(0.5, 1.0), -2.0), 1.0, f64::INFINITY, ext(0.5, 1.2)),
        ("exterior a=0.3 tau0 p", step_integrand(CascadeRegion::ExteriorAnnulus { r0: 0.5 }, &ext(0.3, 1.3), -2.4 * 1.3), 1.0, f64::INFINITY, ext(0.3, 1.3)),
        ("cone a=0.5 tau0 p", step_integrand(CascadeRegion::Cone, &half(0.5, 1.2), -2.5 * 1.2), 0.0, f64::INFINITY, half(0.5, 1.2)),
        ("cone a=0.7 tau0 p", step_integrand(CascadeRegion::Cone, &half(0.7, 1.3), -2.3 * 1.3), 0.0, f64::INFINITY, half(0.7, 1.3)),
        (
            "cone growth shell [2,16]",
            RadialIntegrand::power(-0.3 - 3.0, 3).with_weight(AxisWeight::Height(0.5)).with_support(Support::Cone),
            2.0,
            16.0,
            half(0.5, 1.2),
        ),
    ];
    let mut sigmas = Vec::new();
    for (i, (label, f, inner, outer, pr)) in cases.iter().enumerate() {
        let quad = convolution_integral(f, *inner, *outer, &spec, pr).unwrap();
        let mc = monte_carlo(f, *inner, *outer, 10_000_000, 900 + i as u64);
        let sigma = (quad.value - mc.mean).abs() / mc.std_err;
        sigmas.push(format!("{sigma:.2}"));
        if (quad.value - mc.mean).abs() > 3.0 * mc.std_err + quad.error {
            failures.push(format!("{label}: quad {} vs mc {} +- {}", quad.value, mc.mean, mc.std_err));
        }
    }
    let sigmas = sigmas.join(", ");
    let summary = format!(
        "Getoor worst {getoor_worst:.1e} at 20 points, reproducing {repro_err:.1e}, remark {remark_err:.1e}, Monte Carlo deviations [{sigmas}] SE"
    );
    finish(3, "quadrature oracles", &failures, start, Duration::from_secs(300), &summary);
}

/// 20 exponents straddling `threshold`: 10 below (above 1), 10 above, none
/// within 0.01 of it.
fn straddling_grid(threshold: f64) -> Vec<f64> {
    let lo = (threshold - 0.3).max(1.02);
    let below_hi = threshold - 0.015;
    let above_lo = threshold + 0.015;
    let above_hi = threshold + 0.3;
    let mut ps: Vec<f64> = (0..10).map(|i| lo + (below_hi - lo) * i as f64 / 9.0).collect();
    ps.extend((0..10).map(|i| above_lo + (above_hi - above_lo) * i as f64 / 9.0));
    ps
}

fn sweep_params() -> Vec<ProblemParams> {
    let mut out = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let n = 3.0;
        let ext_t = n / (n - 2.0 * alpha);
        let half_t = (n + alpha) / (n - alpha);
        for p in straddling_grid(ext_t) {
            out.push(ProblemParams::new(3, alpha, p, DomainKind::Exterior { r0: 0.5 }).unwrap());
        }
        for p in straddling_grid(half_t) {
            out.push(ProblemParams::new(3, alpha, p, DomainKind::HalfSpace).unwrap());
        }
    }
    out
}

#[test]
fn criterion_4_cascade_sharpness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let spec = QuadSpec::default();
    let (mut certified, mut stalled, mut worst_slope) = (0, 0, 0f64);
    for params in sweep_params() {
        let constants = KernelConstants::for_params(&params);
        let label = format!("a={} p={:.4} {:?}", params.alpha(), params.p(), params.domain());
        let trace = match run_cascade(&params, &constants, &SourceGeometry::default(), None, &spec) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let nonexistence = classify_regime(&params) == Regime::LiouvilleNonexistence;
        match (&trace.verdict, nonexistence) {
            (Some(CascadeVerdict::DivergenceCertified { .. }), true) => {
                certified += 1;
                let cert = trace.certificate.as_ref().unwrap();
                let taus = tau_sequence(params.initial_tau(), &params, DEFAULT_MAX_STEPS).unwrap();
                let j0 = taus.j0.unwrap();
                // Exterior: the certificate exponent is tau_(j0) itself.
                if matches!(trace.region, CascadeRegion::ExteriorAnnulus { .. })
                    && (cert.expected_slope - taus.tau[j0]).abs() > 1e-12 * taus.tau[j0].abs().max(1.0)
                {
                    failures.push(format!("{label}: expected slope {} vs tau_j0 {}", cert.expected_slope, taus.tau[j0]));
                }
                let dev = if cert.log_case {
                    cert.fitted_slope.abs()
                } else {
                    (cert.fitted_slope - cert.expected_slope).abs() / cert.expected_slope.abs()
                };
                worst_slope = worst_slope.max(dev);
            }
            (Some(CascadeVerdict::Stalled), false) => stalled += 1,
            (v, _) => failures.push(format!("{label}: verdict {v:?} but nonexistence regime is {nonexistence}")),
        }
    }
    let summary = format!("{certified} certified, {stalled} stalled of 120; worst slope deviation {worst_slope:.2e} (tolerance 5%)");
    finish(4, "cascade sharpness", &failures, start, Duration::from_secs(600), &summary);
}

#[test]
fn criterion_5_picard_construction() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for p in [1.4, 1.45] {
        let params = ProblemParams::new(3, 0.5, p, DomainKind::HalfSpace).unwrap();
        let coarse = PicardProblem::standard(params, 0).unwrap();
        let fine = PicardProblem::standard(params, 1).unwrap();
        let est = match estimate_c14(&[&coarse, &fine]) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("p={p}: c14 {e}"));
                continue;
            }
        };
        let barrier = barrier_thresholds(est.c14, &params).unwrap();
        let k = 0.5 * barrier.kp;
        let control = IterationControl { max_iter: 200, stop_tol: 1e-6 };
        // picard_run rejects a non-monotone step, so Ok means every
        // iterate was pointwise above its predecessor.
        let (cs, fs) = match (picard_run(&coarse, k, Some(&barrier), control), picard_run(&fine, k, Some(&barrier), control)) {
            (Ok(c), Ok(f)) => (c, f),
            (c, f) => {
                failures.push(format!("p={p}: coarse {:?} fine {:?}", c.err(), f.err()));
                continue;
            }
        };
        for (label, s) in [("coarse", &cs), ("fine", &fs)] {
            if !s.barrier_held {
                failures.push(format!("p={p} {label}: barrier violated"));
            }
            if !(s.converged_increment() < 1e-6 && s.n <= 200) {
                failures.push(format!("p={p} {label}: increment {:.2e} after {}", s.converged_increment(), s.n));
            }
        }
        let refine = refinement_difference(&coarse, &cs, &fine, &fs);
        if refine > 0.02 {
            failures.push(format!("p={p}: refinement difference {refine:.3e}"));
        }
        let xi = Bump::new(vec![0.0, 0.0, 2.0], 0.5);
        let weak = verify_weak_form(&fine, &fs, &xi, &QuadSpec::default()).unwrap();
        if !weak.passes(1e-3) {
            failures.push(format!("p={p}: weak-form residual {:.2e}", weak.residual()));
        }
        let crit = barrier.criticality_defect();
        if crit > 1e-10 {
            failures.push(format!("p={p}: criticality defect {crit:.2e}"));
        }
        lines.push(format!(
            "p={p}: c14 {:.4} kp {:.4e} iters {}/{} refine {refine:.2e} weak residual {:.1e} (rel {:.1e}) criticality {crit:.1e}",
            est.c14,
            barrier.kp,
            cs.n,
            fs.n,
            weak.residual(),
            weak.relative_residual()
        ));
    }
    finish(5, "Picard construction", &failures, start, Duration::from_secs(900), &lines.join(" | "));
}

#[test]
fn criterion_6_regularity_bootstrap() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let params = ProblemParams::new(3, 0.5, 1.2, DomainKind::HalfSpace).unwrap();
    let trace = regularity_bootstrap(&params).unwrap();
    let q: Vec<f64> = trace.steps.iter().map(|s| s.0).collect();
    let want = [1.125, 1.5, 2.5, 12.5];
    if q.len() != want.len() || q.iter().zip(want).any(|(a, b)| (a - b).abs() > 1e-12) || trace.i0 != 3 {
        failures.push(format!("trace {q:?} i0 {}", trace.i0));
    }
    let mut checked = 0;
    for params in sweep_params() {
        let upper = params.n() / (params.n() - 2.0 * params.alpha());
        if !(params.p() > 1.0 && params.p() < upper) {
            continue;
        }
        let t = regularity_bootstrap(&params).unwrap();
        checked += 1;
        let worst = t.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        if !(t.ratio_bound > 1.0 && t.ratios.iter().all(|r| *r > 1.0 && *r >= t.ratio_bound * (1.0 - 1e-12))) {
            failures.push(format!("a={} p={}: ratios {worst} bound {}", params.alpha(), params.p(), t.ratio_bound));
        }
    }
    let summary = format!("q = {q:?}, i0 = {}; ratio bound > 1 on {checked} sweep points", trace.i0);
    finish(6, "regularity bootstrap", &failures, start, Duration::from_secs(60), &summary);
}
