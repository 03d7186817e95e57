//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use nhwind::dilation::{build_schedule, run_dilated, Branch, DilationParams};
use nhwind::evolution::{evolve, prepare_dual_pair, AlphaPolicy};
use nhwind::experiment::{measure_winding, winding_oracle, winding_sweep, MeasureConfig, SweepRow};
use nhwind::genexp::{generalized_expectation, GenExpRequest, MeasurementMode};
use nhwind::linalg::{inner, sigma_x, sigma_y, sigma_z};
use nhwind::ssh::{analytic_texture, SshParams};
use nhwind::{ComplexMatrix, StateVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps = (0..1 << n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalize_from(amps).unwrap()
}

fn random_hermitian(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let [a0, ax, ay, az]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let m = &ComplexMatrix::identity(2).scale_re(a0) + &sigma_x().scale_re(ax);
    &(&m + &sigma_y().scale_re(ay)) + &sigma_z().scale_re(az)
}

fn full_operator(ops: &[ComplexMatrix]) -> ComplexMatrix {
    ops[1..].iter().fold(ops[0].clone(), |acc, o| acc.kron(o))
}

fn matrix_element(a: &StateVector, op: &ComplexMatrix, b: &StateVector) -> C64 {
    inner(a.amplitudes(), &op.mul_vec(b.amplitudes()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = 1 + done % 3;
        let psi1 = random_state(&mut rng, n);
        let psi2 = random_state(&mut rng, n);
        let o: Vec<_> = (0..n).map(|_| random_hermitian(&mut rng)).collect();
        let op: Vec<_> = (0..n).map(|_| random_hermitian(&mut rng)).collect();
        let den = matrix_element(&psi1, &full_operator(&op), &psi2);
        if den.norm() < 0.05 {
            continue;
        }
        let expected = matrix_element(&psi1, &full_operator(&o), &psi2) / den;
        let got = generalized_expectation(&GenExpRequest::new(psi1, psi2, o).with_o_prime(op))
            .unwrap()
            .value;
        worst = worst.max((got.re - expected.re).abs()).max((got.im - expected.im).abs());
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 10.0,
        format!("1000 instances, max component error {worst:.2e} (tol 1e-10), {secs:.2} s (limit 10 s)"),
    )
}

fn t1_grid() -> Vec<f64> {
    (0..100).map(|j| 0.01 + 0.02 * j as f64).collect()
}

/// Midpoints between neighbouring grid points whose rounded windings differ.
fn transitions(rows: &[SweepRow]) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let a = (2.0 * w[0].measured?).round();
        let b = (2.0 * w[1].measured?).round();
        if a != b {
            out.push((w[0].t1 + w[1].t1) / 2.0);
        }
    }
    Some(out)
}

fn points_match(points: &[(f64, f64)], p: impl Fn(f64) -> SshParams, cfg: &MeasureConfig) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for &(t1, target) in points {
        match measure_winding(&p(t1), 1000, cfg) {
            Ok(r) => {
                ok &= (r.measured.value - target).abs() <= 0.02;
                detail.push(format!("w({t1}) = {:.4}", r.measured.value));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("w({t1}) failed: {e}"));
            }
        }
    }
    (ok, detail.join(", "))
}

fn transitions_match(rows: &[SweepRow], targets: &[f64]) -> (bool, String) {
    match transitions(rows) {
        Some(found) => {
            let ok = found.len() == targets.len()
                && found.iter().zip(targets).all(|(f, t)| (f - t).abs() <= 0.05);
            let f: Vec<String> = found.iter().map(|x| format!("{x:.3}")).collect();
            (ok, format!("transitions at [{}]", f.join(", ")))
        }
        None => (false, "sweep had failed points".into()),
    }
}

fn criterion_2() -> Outcome {
    let cfg = MeasureConfig::default();
    let (points_ok, points) = points_match(&[(0.2, 1.0), (1.0, 0.5), (1.8, 0.0)], |t1| SshParams::pbc(t1, 0.5), &cfg);
    let start = Instant::now();
    let rows = winding_sweep(&t1_grid(), &SshParams::pbc(0.0, 0.5), 1000, &cfg);
    let secs = start.elapsed().as_secs_f64();
    let (tr_ok, tr) = transitions_match(&rows, &[0.5, 1.5]);
    outcome(
        points_ok && tr_ok && secs < 60.0,
        format!("{points}; {tr} (expected 0.5, 1.5); sweep {secs:.1} s (limit 60 s)"),
    )
}

/// Smallest fidelity of either branch over the last fifth of the run.
fn late_fidelity(p: &SshParams, k: f64, alpha: AlphaPolicy) -> f64 {
    let h = p.hamiltonian(k).unwrap();
    let (_, right, left) = prepare_dual_pair(&h, 10.0, 200, alpha).unwrap();
    let window = |r: &nhwind::evolution::EvolutionResult| {
        r.times
            .iter()
            .zip(r.fidelities.as_ref().unwrap())
            .filter(|(t, _)| **t >= 8.0)
            .map(|(_, f)| *f)
            .fold(1.0, f64::min)
    };
    window(&right).min(window(&left))
}

fn criterion_3() -> Outcome {
    let cfg = MeasureConfig::default();
    let (points_ok, points) = points_match(&[(0.4, 1.0), (1.6, 0.0)], |t1| SshParams::obc(t1, 0.5), &cfg);
    let p = SshParams::obc(1.6, 0.5);
    let f_one = late_fidelity(&p, FRAC_PI_2, AlphaPolicy::Fixed(C64::new(1.0, 0.0)));
    let f_rot = late_fidelity(&p, FRAC_PI_2, AlphaPolicy::Fixed(C64::from_polar(1.0, PI / 16.0)));
    let alpha_ok = f_one < 0.999 && f_rot >= 0.999;
    let rows = winding_sweep(&t1_grid(), &SshParams::obc(0.0, 0.5), 1000, &cfg);
    let boundary = (1.0f64 + 0.25).sqrt();
    let (tr_ok, tr) = transitions_match(&rows, &[boundary]);
    outcome(
        points_ok && alpha_ok && tr_ok,
        format!(
            "{points}; k=pi/2 late-window fidelity alpha=1: {f_one:.4}, alpha=e^(i pi/16): {f_rot:.6}; {tr} (expected {boundary:.3})"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for t1 in [0.2, 1.0, 1.8] {
        let h = SshParams::pbc(t1, 0.5).hamiltonian(FRAC_PI_2).unwrap();
        let (_, right, left) = prepare_dual_pair(&h, 10.0, 100, AlphaPolicy::Auto).unwrap();
        let (fr, fl) = (right.final_fidelity().unwrap(), left.final_fidelity().unwrap());
        ok &= fr >= 0.999 && fl >= 0.999;
        detail.push(format!("t1={t1}: R {fr:.6}, L {fl:.6}"));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_5() -> Outcome {
    let sets = [
        ("PBC t1=1.8", SshParams::pbc(1.8, 0.5), 0.8, 0.23, AlphaPolicy::Sign),
        (
            "OBC t1=1.6",
            SshParams::obc(1.6, 0.5),
            0.7,
            0.35,
            AlphaPolicy::Fixed(C64::from_polar(1.0, PI / 16.0)),
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, p, eta0, b, policy) in sets {
        let h = p.hamiltonian(FRAC_PI_2).unwrap();
        let alpha = policy.resolve(&h).unwrap();
        for branch in [Branch::Right, Branch::Left] {
            let params = DilationParams::new(eta0, b, alpha, 10.0, 10_000).with_branch(branch);
            let schedule = match build_schedule(&h, &params) {
                Ok(s) => s,
                Err(e) => {
                    ok = false;
                    detail.push(format!("{name} {branch:?}: {e}"));
                    continue;
                }
            };
            let psi0 = StateVector::zero(1);
            let run = run_dilated(&psi0, &schedule).unwrap();
            let direct = evolve(&params.effective_hamiltonian(&h), &psi0, 10.0, 10_000).unwrap();
            let dev = run
                .states
                .iter()
                .zip(&direct.states)
                .map(|(a, b)| (a.probabilities()[0] - b.probabilities()[0]).abs())
                .fold(0.0, f64::max);
            let herm = schedule.max_relative_hermiticity_residual();
            let pos = schedule.min_positivity();
            ok &= dev <= 1e-3 && herm <= 1e-9 && pos > 0.0;
            detail.push(format!(
                "{name} {branch:?} (alpha {:.3}{:+.3}i): pop dev {dev:.2e}, herm {herm:.2e}, min eig(M-I) {pos:.3e}",
                alpha.re, alpha.im
            ));
        }
    }
    outcome(ok, detail.join("; "))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // the denominator |<psi1|psi2>|^2 must stay well above shot noise at 10^3 shots
    let (psi1, psi2) = loop {
        let a = random_state(&mut rng, 2);
        let b = random_state(&mut rng, 2);
        if a.inner(&b).norm_sqr() > 0.5 {
            break (a, b);
        }
    };
    let o = vec![random_hermitian(&mut rng), random_hermitian(&mut rng)];
    let exact_req = GenExpRequest::new(psi1, psi2, o);
    let exact = generalized_expectation(&exact_req).unwrap().value;

    let run = |shots: u64, seeds: std::ops::Range<u64>| {
        let n = (seeds.end - seeds.start) as f64;
        let (mut mean, mut se) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for seed in seeds {
            let v = generalized_expectation(
                &exact_req.clone().with_mode(MeasurementMode::Sampled { shots, seed }),
            )
            .unwrap();
            mean += v.value / n;
            se += v.stderr / n;
        }
        (mean, se)
    };

    let (mean, se) = run(10_000, 0..100);
    let bias_ok = (mean.re - exact.re).abs() <= 4.0 * se.re / 10.0
        && (mean.im - exact.im).abs() <= 4.0 * se.im / 10.0;

    let ladder: Vec<C64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&s| run(s, 1000..1020).1)
        .collect();
    let lo = 10f64.sqrt() / 2.0;
    let hi = 2.0 * 10f64.sqrt();
    let ratios: Vec<f64> = ladder
        .windows(2)
        .flat_map(|w| [w[0].re / w[1].re, w[0].im / w[1].im])
        .collect();
    let scale_ok = ratios.iter().all(|r| (lo..=hi).contains(r));
    outcome(
        bias_ok && scale_ok,
        format!(
            "mean-exact = ({:.2e}, {:.2e}) vs 4 sigma_mean = ({:.2e}, {:.2e}); stderr ratios per decade {:?} (allowed [{lo:.2}, {hi:.2}])",
            mean.re - exact.re,
            mean.im - exact.im,
            0.4 * se.re,
            0.4 * se.im,
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

/// Smallest distance of `(t1, δ)` from a phase boundary or a degenerate GBZ.
fn boundary_distance(p: &SshParams) -> f64 {
    let (a, d) = (p.t1.abs(), p.delta.abs());
    if p.bc == nhwind::ssh::Boundary::Pbc {
        (a + d - 1.0).abs().min(((a - d).abs() - 1.0).abs())
    } else {
        ((p.t1 * p.t1 - p.delta * p.delta).abs() - 1.0).abs().min((a - d).abs())
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = MeasureConfig::default().with_time(20.0);
    let mut worst: f64 = 0.0;
    let mut worst_quant: f64 = 0.0;
    let mut failures = Vec::new();
    let mut done = 0;
    while done < 50 {
        let t1 = rng.random_range(0.0..2.0);
        let delta = rng.random_range(-1.0..1.0);
        let p = if done % 2 == 0 {
            SshParams::pbc(t1, delta)
        } else {
            SshParams::obc(t1, delta)
        };
        if boundary_distance(&p) < 0.05 {
            continue;
        }
        done += 1;
        let oracle = winding_oracle(&p, 2000).unwrap().value;
        match measure_winding(&p, 2000, &cfg) {
            Ok(r) => {
                worst = worst.max((r.measured.value - oracle).abs());
                worst_quant = worst_quant.max(r.measured.quantization_residual);
            }
            Err(e) => failures.push(format!("{p:?}: {e}")),
        }
    }
    outcome(
        failures.is_empty() && worst <= 1e-3 && worst_quant <= 1e-3,
        format!(
            "50 parameter sets, max |measured - oracle| = {worst:.2e} (tol 1e-3), max distance from a multiple of 1/2 = {worst_quant:.2e}, {} failures {:?}",
            failures.len(),
            failures
        ),
    )
}

fn criterion_8() -> Outcome {
    // contamination decays like exp(-2|d|_min T); T = 40 pushes it below 1e-13
    let cfg = MeasureConfig::default().with_time(40.0);
    let mut ok = true;
    let mut worst_w: f64 = 0.0;
    let mut worst_n: f64 = 0.0;
    for (t1, target) in [(0.3, 1.0), (0.6, 1.0), (1.4, 0.0), (1.7, 0.0)] {
        for p in [SshParams::pbc(t1, 0.0), SshParams::obc(t1, 0.0)] {
            let r = match measure_winding(&p, 1000, &cfg) {
                Ok(r) => r,
                Err(_) => {
                    ok = false;
                    continue;
                }
            };
            worst_w = worst_w.max((r.measured.value - target).abs());
            for s in &r.textures {
                let n = analytic_texture(&p.d_vector(s.k).unwrap()).unwrap();
                for i in 0..3 {
                    worst_n = worst_n.max((s.n[i] - n[i]).norm()).max(s.n[i].im.abs());
                }
            }
        }
    }
    ok &= worst_w <= 1e-9 && worst_n <= 1e-10;
    outcome(
        ok,
        format!("max winding error {worst_w:.1e} (tol 1e-9), max texture error vs d/|d| {worst_n:.1e} (tol 1e-10)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("generalized expectation identity", criterion_1),
        ("Bloch winding numbers", criterion_2),
        ("non-Bloch winding numbers", criterion_3),
        ("dual-pair preparation fidelity", criterion_4),
        ("dilation vs direct evolution", criterion_5),
        ("shot-noise behaviour", criterion_6),
        ("measured winding vs oracle", criterion_7),
        ("Hermitian limit", criterion_8),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "criterion {}: {} - {name}: {} [{:.1} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
