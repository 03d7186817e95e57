use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use nhwind::dilation::{build_schedule, run_dilated, Branch, DilationParams, EtaDerivative};
use nhwind::evolution::{evolve, prepare_dual_pair, AlphaPolicy};
use nhwind::experiment::{
    measure_loop, measure_winding, sweep_csv, texture_csv, winding_sweep, DilationPrep, MeasureConfig,
};
use nhwind::genexp::{generalized_expectation, parse_observables, GenExpRequest, MeasurementMode};
use nhwind::linalg::sigma_0;
use nhwind::ssh::{Boundary, SshParams};
use nhwind::statevector::{read_state, StateVector};
use nhwind::C64;
use serde::Serialize;
use serde_json::json;

use crate::args::{DilationArgs, GenexpArgs, LoopArgs, PhaseArgs, PrepareArgs};
use crate::{CliError, CliResult};

const OUT_DIR_ENV: &str = "NHWIND_OUT_DIR";

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn required(v: Option<f64>, name: &str) -> CliResult<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => usage(format!("--{name} must be finite, got {x}")),
        None => usage(format!("--{name} is required")),
    }
}

fn positive(v: f64, name: &str) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage(format!("--{name} must be positive, got {v}"))
    }
}

fn boundary(bc: Option<&str>) -> CliResult<Boundary> {
    bc.unwrap_or("pbc")
        .parse()
        .map_err(|e: nhwind::Error| CliError::Usage(e.to_string()))
}

fn model(t1: Option<f64>, delta: Option<f64>, bc: Option<&str>) -> CliResult<SshParams> {
    let p = SshParams::new(required(t1, "t1")?, required(delta, "delta")?, boundary(bc)?);
    p.validate()?;
    Ok(p)
}

fn alpha_policy(alpha: Option<&str>, phase: Option<f64>, default: AlphaPolicy) -> CliResult<AlphaPolicy> {
    if let Some(ph) = phase {
        if !ph.is_finite() {
            return usage("--alpha-phase must be finite");
        }
        return Ok(AlphaPolicy::Fixed(C64::from_polar(1.0, ph)));
    }
    let Some(text) = alpha else {
        return Ok(default);
    };
    match text.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(AlphaPolicy::Auto),
        "sign" => Ok(AlphaPolicy::Sign),
        other => {
            let a: C64 = other
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot parse --alpha `{text}`")))?;
            if (a.norm() - 1.0).abs() > 1e-9 {
                return usage(format!("--alpha must have unit modulus, got |alpha| = {}", a.norm()));
            }
            Ok(AlphaPolicy::Fixed(a))
        }
    }
}

fn alpha_label(a: AlphaPolicy) -> String {
    match a {
        AlphaPolicy::Auto => "auto".into(),
        AlphaPolicy::Sign => "sign".into(),
        AlphaPolicy::Fixed(c) => format!("{}{:+}i", c.re, c.im),
    }
}

fn measurement(shots: Option<u64>, seed: Option<u64>) -> CliResult<MeasurementMode> {
    match shots {
        None => Ok(MeasurementMode::Exact),
        Some(0) => usage("--shots must be at least 1"),
        Some(shots) => Ok(MeasurementMode::Sampled {
            shots,
            seed: seed.unwrap_or(0),
        }),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Writes `# nhwind <command> <config-json>` followed by `body`.
fn write_output(dir: &Path, file: &str, command: &str, config: &impl Serialize, body: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    let header = serde_json::to_string(config).expect("config serializes");
    std::fs::write(&path, format!("# nhwind {command} {header}\n{body}"))?;
    Ok(path)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => usage("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Serialize)]
struct LoopConfig {
    t1: f64,
    delta: f64,
    t2: f64,
    bc: String,
    #[serde(rename = "T")]
    t_total: f64,
    #[serde(rename = "N")]
    n_k: usize,
    alpha: String,
    mode: &'static str,
    shots: Option<u64>,
    seed: Option<u64>,
    ep_threshold: f64,
    via_dilation: Option<DilationPrep>,
}

fn shots_and_seed(mode: MeasurementMode) -> (Option<u64>, Option<u64>) {
    match mode {
        MeasurementMode::Exact => (None, None),
        MeasurementMode::Sampled { shots, seed } => (Some(shots), Some(seed)),
    }
}

fn measure_config(
    t_total: Option<f64>,
    alpha: AlphaPolicy,
    mode: MeasurementMode,
    ep_threshold: Option<f64>,
) -> CliResult<MeasureConfig> {
    let ep_threshold = ep_threshold.unwrap_or(1e-6);
    if !(ep_threshold >= 0.0) {
        return usage("--ep-threshold must be non-negative");
    }
    Ok(MeasureConfig {
        t_total: positive(t_total.unwrap_or(10.0), "T")?,
        alpha,
        mode,
        ep_threshold,
        via_dilation: None,
    })
}

fn loop_size(n: Option<usize>) -> CliResult<usize> {
    let n = n.unwrap_or(1000);
    if n < 16 {
        return usage(format!("--N must be at least 16, got {n}"));
    }
    Ok(n)
}

pub fn texture(a: LoopArgs, winding: bool) -> CliResult<()> {
    let p = model(a.t1, a.delta, a.bc.as_deref())?;
    let n_k = loop_size(a.n_k)?;
    let alpha = alpha_policy(a.alpha.as_deref(), a.alpha_phase, AlphaPolicy::Auto)?;
    let mode = measurement(a.shots, a.seed)?;
    let mut cfg = measure_config(a.t_total, alpha, mode, a.ep_threshold)?;
    if a.via_dilation.unwrap_or(false) {
        let steps = a.dilation_steps.unwrap_or(10_000);
        if steps < 10 {
            return usage("--dilation-steps must be at least 10");
        }
        cfg.via_dilation = Some(DilationPrep {
            eta0: positive(required(a.eta0, "eta0")?, "eta0")?,
            b: required(a.b, "b")?,
            steps,
        });
    }
    let (shots, seed) = shots_and_seed(mode);
    let resolved = LoopConfig {
        t1: p.t1,
        delta: p.delta,
        t2: p.t2,
        bc: p.bc.to_string(),
        t_total: cfg.t_total,
        n_k,
        alpha: alpha_label(alpha),
        mode: nhwind::experiment::mode_name(mode),
        shots,
        seed,
        ep_threshold: cfg.ep_threshold,
        via_dilation: cfg.via_dilation,
    };
    let dir = out_dir(a.out_dir);

    if !winding {
        let samples = with_jobs(a.jobs, || measure_loop(&p, n_k, &cfg))??;
        let name = a.name.unwrap_or_else(|| "texture".into());
        let path = write_output(&dir, &format!("{name}.csv"), "texture", &resolved, &texture_csv(&samples))?;
        println!("{}", path.display());
        return Ok(());
    }

    let report = with_jobs(a.jobs, || measure_winding(&p, n_k, &cfg))??;
    let name = a.name.unwrap_or_else(|| "winding".into());
    write_output(
        &dir,
        &format!("{name}_texture.csv"),
        "winding",
        &resolved,
        &texture_csv(&report.textures),
    )?;
    let summary = report.summary(&cfg);
    let doc = json!({ "config": resolved, "summary": summary });
    let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    std::fs::write(dir.join(format!("{name}.json")), format!("{text}\n"))?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

#[derive(Serialize)]
struct PhaseConfig {
    delta: f64,
    t2: f64,
    bc: String,
    t1_grid: Vec<f64>,
    #[serde(rename = "T")]
    t_total: f64,
    #[serde(rename = "N")]
    n_k: usize,
    alpha: String,
    mode: &'static str,
    shots: Option<u64>,
    seed: Option<u64>,
    ep_threshold: f64,
}

pub fn phase_diagram(a: PhaseArgs) -> CliResult<()> {
    let delta = required(a.delta, "delta")?;
    let bc = boundary(a.bc.as_deref())?;
    let (lo, hi) = (a.t1_min.unwrap_or(0.01), a.t1_max.unwrap_or(1.99));
    let step = positive(a.t1_step.unwrap_or(0.02), "t1-step")?;
    if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return usage(format!("empty t1 range [{lo}, {hi}]"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|j| lo + step * j as f64).collect();
    let n_k = loop_size(a.n_k)?;
    let alpha = alpha_policy(a.alpha.as_deref(), a.alpha_phase, AlphaPolicy::Auto)?;
    let mode = measurement(a.shots, a.seed)?;
    let cfg = measure_config(a.t_total, alpha, mode, a.ep_threshold)?;
    let base = SshParams::new(0.0, delta, bc);
    let rows = with_jobs(a.jobs, || winding_sweep(&grid, &base, n_k, &cfg))?;
    let (shots, seed) = shots_and_seed(mode);
    let resolved = PhaseConfig {
        delta,
        t2: base.t2,
        bc: bc.to_string(),
        t1_grid: grid,
        t_total: cfg.t_total,
        n_k,
        alpha: alpha_label(alpha),
        mode: nhwind::experiment::mode_name(mode),
        shots,
        seed,
        ep_threshold: cfg.ep_threshold,
    };
    let name = a.name.unwrap_or_else(|| "phase_diagram".into());
    let path = write_output(&out_dir(a.out_dir), &format!("{name}.csv"), "phase-diagram", &resolved, &sweep_csv(&rows))?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct PrepareConfig {
    t1: f64,
    delta: f64,
    t2: f64,
    bc: String,
    k: f64,
    #[serde(rename = "T")]
    t_total: f64,
    steps: usize,
    alpha: String,
    alpha_resolved: [f64; 2],
}

pub fn prepare(a: PrepareArgs) -> CliResult<()> {
    let p = model(a.t1, a.delta, a.bc.as_deref())?;
    let k = a.k.unwrap_or(FRAC_PI_2);
    let t_total = positive(a.t_total.unwrap_or(10.0), "T")?;
    let steps = a.steps.unwrap_or(200);
    if steps == 0 {
        return usage("--steps must be at least 1");
    }
    let policy = alpha_policy(a.alpha.as_deref(), a.alpha_phase, AlphaPolicy::Auto)?;
    let h = p.hamiltonian(k)?;
    let (pair, right, left) = prepare_dual_pair(&h, t_total, steps, policy)?;
    let resolved = PrepareConfig {
        t1: p.t1,
        delta: p.delta,
        t2: p.t2,
        bc: p.bc.to_string(),
        k,
        t_total,
        steps,
        alpha: alpha_label(policy),
        alpha_resolved: [pair.alpha.re, pair.alpha.im],
    };
    let dir = out_dir(a.out_dir);
    let name = a.name.unwrap_or_else(|| "prepare".into());
    write_output(&dir, &format!("{name}_right.csv"), "prepare", &resolved, &right.to_csv())?;
    write_output(&dir, &format!("{name}_left.csv"), "prepare", &resolved, &left.to_csv())?;
    let summary = json!({
        "eigenvalue": [pair.eigenvalue.re, pair.eigenvalue.im],
        "alpha": [pair.alpha.re, pair.alpha.im],
        "overlap": [pair.overlap.re, pair.overlap.im],
        "fidelity_right": right.final_fidelity(),
        "fidelity_left": left.final_fidelity(),
        "growth_gap": pair.growth_gap,
    });
    println!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct DilationConfig {
    t1: f64,
    delta: f64,
    t2: f64,
    bc: String,
    k: f64,
    eta0: f64,
    b: f64,
    alpha: String,
    alpha_resolved: [f64; 2],
    #[serde(rename = "T")]
    t_total: f64,
    steps: usize,
    branch: String,
    eta_derivative: String,
}

pub fn dilation_check(a: DilationArgs) -> CliResult<()> {
    let p = model(a.t1, a.delta, a.bc.as_deref())?;
    let k = a.k.unwrap_or(FRAC_PI_2);
    let eta0 = positive(required(a.eta0, "eta0")?, "eta0")?;
    let b = required(a.b, "b")?;
    let t_total = positive(a.t_total.unwrap_or(10.0), "T")?;
    let steps = a.steps.unwrap_or(10_000);
    if steps < 10 {
        return usage("--steps must be at least 10");
    }
    let branch = match a.branch.as_deref().unwrap_or("right") {
        "right" => Branch::Right,
        "left" => Branch::Left,
        other => return usage(format!("--branch must be right or left, got `{other}`")),
    };
    let eta_derivative = match a.eta_derivative.as_deref().unwrap_or("analytic") {
        "analytic" => EtaDerivative::Analytic,
        "central" => EtaDerivative::CentralDifference,
        other => return usage(format!("--eta-derivative must be analytic or central, got `{other}`")),
    };
    let policy = alpha_policy(a.alpha.as_deref(), a.alpha_phase, AlphaPolicy::Sign)?;
    let h = p.hamiltonian(k)?;
    let alpha = policy.resolve(&h)?;
    let params = DilationParams::new(eta0, b, alpha, t_total, steps)
        .with_branch(branch)
        .with_eta_derivative(eta_derivative);
    let schedule = build_schedule(&h, &params)?;
    let psi0 = StateVector::zero(1);
    let run = run_dilated(&psi0, &schedule)?;
    let direct = evolve(&params.effective_hamiltonian(&h), &psi0, t_total, steps)?;

    let mut compare = String::from("t,pop0_dilated,pop0_direct,abs_diff,success_prob\n");
    let mut max_dev: f64 = 0.0;
    for (j, t) in run.times.iter().enumerate() {
        let pd = run.states[j].probabilities()[0];
        let pe = direct.populations[j][0];
        max_dev = max_dev.max((pd - pe).abs());
        compare.push_str(&format!(
            "{t:.10},{pd:.12e},{pe:.12e},{:.12e},{:.12e}\n",
            (pd - pe).abs(),
            run.success_prob[j]
        ));
    }

    let resolved = DilationConfig {
        t1: p.t1,
        delta: p.delta,
        t2: p.t2,
        bc: p.bc.to_string(),
        k,
        eta0,
        b,
        alpha: alpha_label(policy),
        alpha_resolved: [alpha.re, alpha.im],
        t_total,
        steps,
        branch: format!("{branch:?}").to_lowercase(),
        eta_derivative: match eta_derivative {
            EtaDerivative::Analytic => "analytic".into(),
            EtaDerivative::CentralDifference => "central".into(),
        },
    };
    let dir = out_dir(a.out_dir);
    let name = a.name.unwrap_or_else(|| "dilation".into());
    write_output(&dir, &format!("{name}_schedule.csv"), "dilation-check", &resolved, &schedule.to_csv()?)?;
    write_output(&dir, &format!("{name}_compare.csv"), "dilation-check", &resolved, &compare)?;
    let summary = json!({
        "max_population_deviation": max_dev,
        "max_relative_hermiticity_residual": schedule.max_relative_hermiticity_residual(),
        "min_eig_m_minus_i": schedule.min_positivity(),
        "propagator_unitary": run.propagator.is_unitary(1e-8),
        "min_success_prob": run.success_prob.iter().copied().fold(f64::INFINITY, f64::min),
        "alpha": [alpha.re, alpha.im],
    });
    println!("{summary}");
    Ok(())
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// `-0.0` prints as `0.0`.
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

pub fn genexp(a: GenexpArgs) -> CliResult<()> {
    let need = |p: Option<PathBuf>, name: &str| p.ok_or_else(|| CliError::Usage(format!("--{name} is required")));
    let psi1 = read_state(&read_file(&need(a.psi1, "psi1")?)?)?;
    let psi2 = read_state(&read_file(&need(a.psi2, "psi2")?)?)?;
    let o = parse_observables(&read_file(&need(a.o, "o")?)?)?;
    let o_prime = match a.o_prime {
        Some(path) => parse_observables(&read_file(&path)?)?,
        None => vec![sigma_0(); psi1.n_qubits()],
    };
    let mode = measurement(a.shots, a.seed)?;
    let v = generalized_expectation(
        &GenExpRequest::new(psi1, psi2, o)
            .with_o_prime(o_prime)
            .with_mode(mode),
    )?;
    if mode.is_exact() {
        println!("{:?} {:?}", clean(v.value.re), clean(v.value.im));
    } else {
        println!(
            "{:?} {:?} {:?} {:?}",
            clean(v.value.re),
            clean(v.value.im),
            clean(v.stderr.re),
            clean(v.stderr.im)
        );
    }
    Ok(())
}
