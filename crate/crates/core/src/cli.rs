//! Batch front end: JSON configuration, subcommands and output files.
//!
//! Exit codes: 0 certified or passed, 1 a valid negative outcome (stalled
//! cascade, diverged iteration, failed self-check), 2 usage or configuration
//! error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cascade::{run_cascade, CascadeError, CascadeVerdict, SourceGeometry};
use crate::kernels::{random_halfspace_pair, ConstantOverrides, KernelConstants, Kernels};
use crate::params::{
    classify_regime, reach_threshold, serrin_exponents, tau_sequence, DomainKind, ProblemParams, DEFAULT_MAX_STEPS,
};
use crate::picard::{
    barrier_thresholds, estimate_c14, minimality_check, picard_run, refinement_difference, verify_weak_form,
    IterationControl, PicardError, PicardProblem, PicardState, DEFAULT_MAX_ITER, DEFAULT_STOP_TOL,
};
use crate::quad::pv::{getoor_constant, Decay, PvTarget};
use crate::quad::{pv_fractional_laplacian, remark_identity_check, reproducing_integral, Ball, Bump, QuadSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "lane-emden", version, about = "Green kernels, blow-up cascades and Picard iteration for (-Delta)^a u = u^p")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime of (N, alpha, p, domain) and the critical exponents.
    Classify(CommonArgs),
    /// Exponent sequence tau_j from the domain's initial decay.
    Tau(CommonArgs),
    /// Blow-up cascade and divergence certificate.
    Cascade(CommonArgs),
    /// Monotone iteration for the half-space problem with a point source.
    Picard(CommonArgs),
    /// Kernel and quadrature self-checks.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Whole,
    Exterior,
    Half,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    /// Hole radius for `--domain exterior`.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeConfig {
    pub source: SourceGeometry,
    pub probe_radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    /// Source mass; defaults to `k_fraction * kp`.
    pub k: Option<f64>,
    pub k_fraction: f64,
    /// Use this `c14` instead of the sampled estimate.
    pub c14: Option<f64>,
    pub grid_level: u32,
    /// Also solve on the next grid level and report the difference.
    pub refine: bool,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub weak_form: bool,
    /// Downward steps of the minimality check.
    pub minimality_steps: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            k: None,
            k_fraction: 0.5,
            c14: None,
            grid_level: 0,
            refine: false,
            max_iter: DEFAULT_MAX_ITER,
            stop_tol: DEFAULT_STOP_TOL,
            weak_form: true,
            minimality_steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Random pairs for the kernel checks.
    pub pairs: usize,
    pub seed: u64,
    /// Multiplies every tolerance (relaxation for stress runs).
    pub tolerance_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { pairs: 10_000, seed: 7, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: Option<ProblemParams>,
    pub quad: QuadSpec,
    pub constants: ConstantOverrides,
    pub cascade: CascadeConfig,
    pub picard: PicardConfig,
    pub verify: VerifyConfig,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Failure { code: EXIT_USAGE, message: m.to_string() }
    }
    fn numerical(m: impl ToString) -> Self {
        Failure { code: EXIT_NUMERICAL, message: m.to_string() }
    }
}

/// Config file merged with the command-line overrides.
pub struct Resolved {
    pub params: ProblemParams,
    pub config: RunConfig,
    pub constants: KernelConstants,
    pub out_dir: PathBuf,
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

pub fn resolve(args: &CommonArgs) -> Result<Resolved, Failure> {
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let base = config.params;
    let dim = args.dim.or(base.map(|b| b.dim_n()));
    let alpha = args.alpha.or(base.map(|b| b.alpha()));
    let p = args.p.or(base.map(|b| b.p()));
    let domain = match args.domain {
        Some(DomainArg::Whole) => Some(DomainKind::WholeSpace),
        Some(DomainArg::Half) => Some(DomainKind::HalfSpace),
        Some(DomainArg::Exterior) => {
            let r0 = args.r0.or(match base.map(|b| b.domain()) {
                Some(DomainKind::Exterior { r0 }) => Some(r0),
                _ => None,
            });
            Some(DomainKind::Exterior { r0: r0.ok_or_else(|| Failure::usage("--domain exterior needs --r0"))? })
        }
        None => match (base.map(|b| b.domain()), args.r0) {
            (Some(DomainKind::Exterior { .. }), Some(r0)) => Some(DomainKind::Exterior { r0 }),
            (d, _) => d,
        },
    };
    let (Some(dim), Some(alpha), Some(p), Some(domain)) = (dim, alpha, p, domain) else {
        return Err(Failure::usage("dim, alpha, p and domain must be given in the config or as flags"));
    };
    let params = ProblemParams::new(dim, alpha, p, domain).map_err(Failure::usage)?;
    config.quad.validate().map_err(Failure::usage)?;
    let constants = KernelConstants::for_params(&params).with_overrides(&config.constants);
    constants.validate().map_err(Failure::usage)?;
    Ok(Resolved { params, config, constants, out_dir: args.out_dir.clone() })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable output")
}

pub fn cmd_classify(r: &Resolved) -> Result<u8, Failure> {
    let (p_ext, p_half) = serrin_exponents(&r.params);
    let out = json!({
        "regime": classify_regime(&r.params),
        "p_exterior": p_ext,
        "p_half": p_half,
        "tau0": r.params.initial_tau(),
        "params": r.params,
    });
    emit(&pretty(&out));
    Ok(EXIT_OK)
}

pub fn cmd_tau(r: &Resolved) -> Result<u8, Failure> {
    let tau0 = r.params.initial_tau();
    let trace = tau_sequence(tau0, &r.params, DEFAULT_MAX_STEPS).map_err(Failure::usage)?;
    let out = json!({
        "tau0": tau0,
        "threshold": reach_threshold(r.params.alpha(), tau0),
        "trace": trace,
    });
    emit(&pretty(&out));
    Ok(EXIT_OK)
}

fn cascade_failure(e: CascadeError) -> Failure {
    match e {
        CascadeError::ZeroSource(_)
        | CascadeError::SourceRadius { .. }
        | CascadeError::ProbeRadii(_)
        | CascadeError::Params(_)
        | CascadeError::Kernel(_) => Failure::usage(e),
        _ => Failure::numerical(e),
    }
}

pub fn cmd_cascade(r: &Resolved) -> Result<u8, Failure> {
    let cfg = &r.config.cascade;
    let trace = run_cascade(&r.params, &r.constants, &cfg.source, cfg.probe_radii.as_deref(), &r.config.quad)
        .map_err(cascade_failure)?;
    write_file(&r.out_dir, "trace.csv", &trace.to_csv())?;
    let out = json!({
        "params": r.params,
        "region": trace.region,
        "kernel_constant": trace.kernel_constant,
        "verdict": trace.verdict,
        "certificate": trace.certificate,
    });
    write_file(&r.out_dir, "certificate.json", &pretty(&out))?;
    emit(&pretty(&json!({ "verdict": trace.verdict, "steps": trace.steps.len() })));
    Ok(match trace.verdict {
        Some(CascadeVerdict::DivergenceCertified { .. }) => EXIT_OK,
        _ => EXIT_NEGATIVE,
    })
}

fn picard_failure(e: PicardError) -> Failure {
    match e {
        PicardError::InvalidExponent(_)
        | PicardError::WindowViolation { .. }
        | PicardError::NotHalfSpace
        | PicardError::InvalidInput(_) => Failure::usage(e),
        _ => Failure::numerical(e),
    }
}

fn state_csv(problem: &PicardProblem, state: &PicardState) -> String {
    let n = problem.grid.dim();
    let mut s = String::from("i,r,t");
    for d in 1..=n {
        s.push_str(&format!(",x_{d}"));
    }
    s.push_str(",v,barrier\n");
    for (i, x) in problem.grid.points.iter().enumerate() {
        let (rad, t) = problem.grid.polar(i);
        s.push_str(&format!("{i},{rad:.16e},{t:.16e}"));
        for c in x {
            s.push_str(&format!(",{c:.16e}"));
        }
        let b = state.barrier.as_ref().map(|b| format!("{:.16e}", b[i])).unwrap_or_default();
        s.push_str(&format!(",{:.16e},{b}\n", state.v[i]));
    }
    s
}

pub fn cmd_picard(r: &Resolved) -> Result<u8, Failure> {
    let cfg = &r.config.picard;
    let control = IterationControl { max_iter: cfg.max_iter, stop_tol: cfg.stop_tol };
    if cfg.max_iter == 0 || !(cfg.stop_tol > 0.0) {
        return Err(Failure::usage("max_iter and stop_tol must be positive"));
    }
    let grid = crate::picard::SampleGrid::standard(r.params.dim_n(), cfg.grid_level).map_err(Failure::usage);
    let problem = PicardProblem::new(r.params, r.constants, grid?).map_err(picard_failure)?;
    let (c14, c14_sampled) = match cfg.c14 {
        Some(c) => (c, None),
        None => {
            let est = estimate_c14(&[&problem]).map_err(picard_failure)?;
            (est.c14, Some(est.sup_ratio))
        }
    };
    let barrier = barrier_thresholds(c14, &r.params).map_err(picard_failure)?;
    let k = cfg.k.unwrap_or(cfg.k_fraction * barrier.kp);
    if !(k >= 0.0) {
        return Err(Failure::usage(format!("source mass must be nonnegative, got {k}")));
    }
    let use_barrier = k <= barrier.kp;
    let state = match picard_run(&problem, k, use_barrier.then_some(&barrier), control) {
        Ok(s) => s,
        Err(PicardError::IterationDiverged { n }) => {
            emit(&pretty(&json!({ "k": k, "kp": barrier.kp, "diverged_at": n })));
            return Ok(EXIT_NEGATIVE);
        }
        Err(e) => return Err(picard_failure(e)),
    };
    let minimality = use_barrier.then(|| minimality_check(&problem, &state, &barrier, cfg.minimality_steps));
    let weak = if cfg.weak_form {
        let mut center = vec![0.0; r.params.dim_n()];
        center[r.params.dim_n() - 1] = 2.0;
        let xi = Bump::new(center, 0.5);
        Some(verify_weak_form(&problem, &state, &xi, &r.config.quad).map_err(picard_failure)?)
    } else {
        None
    };
    let refinement = if cfg.refine {
        let fine = PicardProblem::standard(r.params, cfg.grid_level + 1).map_err(picard_failure)?;
        let fine_state =
            picard_run(&fine, k, use_barrier.then_some(&barrier), control).map_err(picard_failure)?;
        Some(refinement_difference(&problem, &state, &fine, &fine_state))
    } else {
        None
    };
    write_file(&r.out_dir, "state.csv", &state_csv(&problem, &state))?;
    let summary = json!({
        "params": r.params,
        "k": k,
        "kp": barrier.kp,
        "tp": barrier.tp,
        "c14": c14,
        "c14_sampled_sup": c14_sampled,
        "criticality_defect": barrier.criticality_defect(),
        "n_final": state.n,
        "increments": state.increments,
        "contraction_rate": state.contraction_rate(),
        "barrier_held": use_barrier.then_some(state.barrier_held),
        "minimality": minimality,
        "weak_form": weak.map(|w| json!({
            "lhs": w.lhs,
            "rhs": w.rhs,
            "residual": w.residual(),
            "relative_residual": w.relative_residual(),
        })),
        "refinement_difference": refinement,
    });
    write_file(&r.out_dir, "summary.json", &pretty(&summary))?;
    emit(&pretty(&summary));
    let held = !use_barrier || state.barrier_held;
    Ok(if held { EXIT_OK } else { EXIT_NEGATIVE })
}

/// One self-check: measured error against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Check { name, measured, tolerance, pass: measured <= tolerance }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Kernel identities on random half-space pairs and the quadrature
/// self-tests for the configured `(N, alpha)`.
pub fn run_checks(r: &Resolved) -> Result<Vec<Check>, Failure> {
    let cfg = &r.config.verify;
    let scale = cfg.tolerance_scale;
    let half = r.params.with_domain(DomainKind::HalfSpace).map_err(Failure::usage)?;
    let whole = r.params.with_domain(DomainKind::WholeSpace).map_err(Failure::usage)?;
    let kernels = Kernels::new(half, r.constants).map_err(Failure::usage)?;
    let n = half.dim_n();
    let s = 2.0 * half.alpha() - half.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut scaling, mut symmetry, mut above, mut outside) = (0f64, 0f64, 0f64, 0usize);
    for _ in 0..cfg.pairs {
        let (x, y) = random_halfspace_pair(&mut rng, n);
        let Ok(g) = kernels.halfspace_green(&x, &y) else { continue };
        let lam = 10f64.powf((x[0] * 7.0).sin());
        let xs: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * lam).collect();
        let gs = kernels.halfspace_green(&xs, &ys).map_err(Failure::numerical)?;
        let rz = kernels.riesz_kernel(&x, &y).map_err(Failure::numerical)?;
        let rzs = kernels.riesz_kernel(&xs, &ys).map_err(Failure::numerical)?;
        scaling = scaling.max(rel(gs, lam.powf(s) * g)).max(rel(rzs, lam.powf(s) * rz));
        symmetry = symmetry.max(rel(kernels.halfspace_green(&y, &x).map_err(Failure::numerical)?, g));
        above = above.max((g - rz) / rz);
        let enc = kernels.halfspace_enclosure(&x, &y, r.constants.c10).map_err(Failure::numerical)?;
        outside += usize::from(!enc.contains(g));
    }
    let mut checks = vec![
        Check::new("kernel_scaling", scaling, 1e-10 * scale),
        Check::new("kernel_symmetry", symmetry, 1e-10 * scale),
        Check::new("domain_monotonicity", above.max(0.0), 1e-12 * scale),
        Check::new("halfspace_enclosure_violations", outside as f64, 0.0),
    ];

    let spec = &r.config.quad;
    let a = whole.alpha();
    let getoor = PvTarget::new(
        move |y: &[f64]| (1.0 - y.iter().map(|v| v * v).sum::<f64>()).max(0.0).powf(a),
        Decay::CompactSupport { center: vec![0.0; n], radius: 1.0 },
    );
    let exact = getoor_constant(&whole);
    let mut worst = 0f64;
    for i in 0..4 {
        let mut x = vec![0.0; n];
        x[0] = 0.2 * i as f64;
        let v = pv_fractional_laplacian(&getoor, &x, spec, &whole).map_err(Failure::numerical)?;
        worst = worst.max(rel(v, exact));
    }
    checks.push(Check::new("getoor_constant", worst, 1e-2 * scale));

    let xi = Bump::new(vec![0.0; n], 0.5);
    let sides = remark_identity_check(&xi, &Ball { center: vec![0.0; n], radius: 1.0 }, spec, &whole)
        .map_err(Failure::numerical)?;
    checks.push(Check::new("remark_identity", sides.relative_residual(), 1e-4 * scale));

    let repro = reproducing_integral(&xi, Some(r.constants.c3), spec, &whole).map_err(Failure::numerical)?;
    checks.push(Check::new("reproducing_identity", rel(repro.value, xi.eval(&vec![0.0; n])), 1e-3 * scale));
    Ok(checks)
}

pub fn cmd_verify(r: &Resolved) -> Result<u8, Failure> {
    let checks = run_checks(r)?;
    let all = checks.iter().all(|c| c.pass);
    emit(&pretty(&json!({ "pass": all, "checks": checks })));
    Ok(if all { EXIT_OK } else { EXIT_NEGATIVE })
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> u8 {
    let (args, cmd): (&CommonArgs, fn(&Resolved) -> Result<u8, Failure>) = match &cli.command {
        Command::Classify(a) => (a, cmd_classify),
        Command::Tau(a) => (a, cmd_tau),
        Command::Cascade(a) => (a, cmd_cascade),
        Command::Picard(a) => (a, cmd_picard),
        Command::Verify(a) => (a, cmd_verify),
    };
    match resolve(args).and_then(|r| cmd(&r)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
