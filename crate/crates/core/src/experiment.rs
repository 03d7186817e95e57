//! Spin textures and winding numbers of the SSH model, measured end to end.
//!
//! For each momentum `k` the dual pair of `H(k)` (or `H(β(k))` under open
//! boundaries) is prepared by nonunitary evolution, the biorthogonal texture
//! `n = ⟨ψL|σ|ψR⟩ / ⟨ψL|ψR⟩` is read out with the SWAP-test circuit, and the
//! complex angle `φ` with `tan φ = n_y / n_x` is unwrapped around the loop.
//!
//! `φ` is only defined modulo π, so the real increments are wrapped into
//! `(-π/2, π/2]`. That is what allows half-integer windings.

use std::f64::consts::PI;
use std::fmt::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dilation::{build_schedule, run_dilated, Branch, DilationParams};
use crate::error::{Error, Result};
use crate::evolution::{exact_dual_pair, prepare_dual_pair, AlphaPolicy, DualPair};
use crate::genexp::{generalized_expectation, GenExpRequest, MeasurementMode};
use crate::linalg::{sigma_0, sigma_x, sigma_y, sigma_z, ComplexMatrix, C64};
use crate::ssh::{expected_winding, SshParams};
use crate::statevector::StateVector;

/// Dilation settings for preparing the pair through the ancilla circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationPrep {
    pub eta0: f64,
    pub b: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    /// Preparation time in units of `1/t2`.
    pub t_total: f64,
    pub alpha: AlphaPolicy,
    pub mode: MeasurementMode,
    /// Below this `|⟨ψL|ψR⟩|` the texture is measured in ratio mode.
    pub ep_threshold: f64,
    pub via_dilation: Option<DilationPrep>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            t_total: 10.0,
            alpha: AlphaPolicy::Auto,
            mode: MeasurementMode::Exact,
            ep_threshold: 1e-6,
            via_dilation: None,
        }
    }
}

impl MeasureConfig {
    pub fn with_time(mut self, t_total: f64) -> Self {
        self.t_total = t_total;
        self
    }

    pub fn with_alpha(mut self, alpha: AlphaPolicy) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_mode(mut self, mode: MeasurementMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Which circuit produced a texture sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    /// `O ∈ {σx, σy, σz}`, `O' = σ0`.
    Direct,
    /// `O = σy`, `O' = σx`; only `φ` is available.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSample {
    pub k: f64,
    /// `(n_x, n_y, n_z)`; NaN in ratio mode.
    pub n: [C64; 3],
    /// Standard errors per component (zero in exact mode).
    pub n_stderr: [C64; 3],
    pub phi: C64,
    pub overlap_mag: f64,
    pub sampled: bool,
    pub readout: ReadoutMode,
    pub alpha: C64,
    /// Fidelities of the prepared right and left states with the exact ones.
    pub fidelity: (f64, f64),
}

impl TextureSample {
    pub fn mode_label(&self) -> &'static str {
        match (self.sampled, self.readout) {
            (false, ReadoutMode::Direct) => "exact",
            (true, ReadoutMode::Direct) => "sampled",
            (false, ReadoutMode::Ratio) => "exact-ratio",
            (true, ReadoutMode::Ratio) => "sampled-ratio",
        }
    }
}

/// The complex angle with `tan φ = y / x`, as `-(i/2) ln((x + iy)/(x - iy))`.
/// `Re φ` lies in `(-π/2, π/2]`.
pub fn complex_angle(x: C64, y: C64) -> Result<C64> {
    let i = C64::i();
    let num = x + i * y;
    let den = x - i * y;
    if num.norm() == 0.0 || den.norm() == 0.0 || !(num / den).is_finite() {
        return Err(Error::ExceptionalPoint(format!(
            "angle undefined for n_x = {x}, n_y = {y}"
        )));
    }
    Ok(-0.5 * i * (num / den).ln())
}

/// Uniform loop `k_j = -π + 2πj/N`, `j = 0..N`.
pub fn k_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

fn child_seeds(seed: u64, k_index: u64) -> [u64; 3] {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k_index);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

fn with_seed(mode: MeasurementMode, seed: u64) -> MeasurementMode {
    match mode {
        MeasurementMode::Exact => mode,
        MeasurementMode::Sampled { shots, .. } => MeasurementMode::Sampled { shots, seed },
    }
}

fn prepare(h: &ComplexMatrix, cfg: &MeasureConfig) -> Result<(DualPair, (f64, f64))> {
    let (pair, right, left) = prepare_dual_pair(h, cfg.t_total, 1, cfg.alpha)?;
    let fid = (
        right.final_fidelity().unwrap_or(f64::NAN),
        left.final_fidelity().unwrap_or(f64::NAN),
    );
    let Some(d) = cfg.via_dilation else {
        return Ok((pair, fid));
    };
    let psi0 = StateVector::zero(1);
    let mut finals = Vec::with_capacity(2);
    for branch in [Branch::Right, Branch::Left] {
        let params = DilationParams::new(d.eta0, d.b, pair.alpha, cfg.t_total, d.steps)
            .with_branch(branch);
        let run = run_dilated(&psi0, &build_schedule(h, &params)?)?;
        finals.push(run.states.last().cloned().expect("non-empty run"));
    }
    let psi_l = finals.pop().expect("left state");
    let psi_r = finals.pop().expect("right state");
    let exact = exact_dual_pair(h, pair.alpha)?;
    let fid = (
        exact.psi_r.inner(&psi_r).norm_sqr(),
        exact.psi_l.inner(&psi_l).norm_sqr(),
    );
    let overlap = psi_l.inner(&psi_r);
    Ok((
        DualPair {
            psi_r,
            psi_l,
            overlap,
            ..pair
        },
        fid,
    ))
}

/// Prepares the pair at `k` and measures its texture.
pub fn measure_texture(k: f64, p: &SshParams, cfg: &MeasureConfig) -> Result<TextureSample> {
    measure_texture_indexed(k, 0, p, cfg)
}

fn measure_texture_indexed(k: f64, index: u64, p: &SshParams, cfg: &MeasureConfig) -> Result<TextureSample> {
    if !(-PI..=PI).contains(&k) {
        return Err(Error::Domain(format!("k = {k} outside [-pi, pi]")));
    }
    p.validate()?;
    let h = p.hamiltonian(k)?;
    let (pair, fidelity) = prepare(&h, cfg)?;
    let overlap_mag = pair.overlap.norm();
    let seeds = match cfg.mode {
        MeasurementMode::Exact => [0; 3],
        MeasurementMode::Sampled { seed, .. } => child_seeds(seed, index),
    };
    let sampled = !cfg.mode.is_exact();

    if overlap_mag >= cfg.ep_threshold {
        match direct_texture(&pair, cfg.mode, seeds) {
            Ok((n, n_stderr)) => {
                return Ok(TextureSample {
                    k,
                    phi: complex_angle(n[0], n[1])?,
                    n,
                    n_stderr,
                    overlap_mag,
                    sampled,
                    readout: ReadoutMode::Direct,
                    alpha: pair.alpha,
                    fidelity,
                })
            }
            Err(Error::OrthogonalDenominator { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let req = GenExpRequest::new(pair.psi_l.clone(), pair.psi_r.clone(), vec![sigma_y()])
        .with_o_prime(vec![sigma_x()])
        .with_mode(with_seed(cfg.mode, seeds[0]));
    let ratio = generalized_expectation(&req).map_err(|e| match e {
        Error::OrthogonalDenominator { magnitude } => Error::ExceptionalPoint(format!(
            "both readouts vanish at k = {k} (overlap {overlap_mag:.3e}, <L|sx|R> {magnitude:.3e})"
        )),
        other => other,
    })?;
    let nan = C64::new(f64::NAN, f64::NAN);
    Ok(TextureSample {
        k,
        n: [nan; 3],
        n_stderr: [nan; 3],
        phi: complex_angle(C64::new(1.0, 0.0), ratio.value)?,
        overlap_mag,
        sampled,
        readout: ReadoutMode::Ratio,
        alpha: pair.alpha,
        fidelity,
    })
}

fn direct_texture(
    pair: &DualPair,
    mode: MeasurementMode,
    seeds: [u64; 3],
) -> Result<([C64; 3], [C64; 3])> {
    let mut n = [C64::new(0.0, 0.0); 3];
    let mut se = n;
    for (i, op) in [sigma_x(), sigma_y(), sigma_z()].into_iter().enumerate() {
        let req = GenExpRequest::new(pair.psi_l.clone(), pair.psi_r.clone(), vec![op])
            .with_o_prime(vec![sigma_0()])
            .with_mode(with_seed(mode, seeds[i]));
        let v = generalized_expectation(&req)?;
        n[i] = v.value;
        se[i] = v.stderr;
    }
    Ok((n, se))
}

/// Textures on the uniform `N`-point loop, computed in parallel and returned
/// in `k` order.
pub fn measure_loop(p: &SshParams, n_k: usize, cfg: &MeasureConfig) -> Result<Vec<TextureSample>> {
    k_grid(n_k)
        .into_par_iter()
        .enumerate()
        .map(|(j, k)| measure_texture_indexed(k, j as u64, p, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindingMethod {
    Measured,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingResult {
    pub value: f64,
    pub n: usize,
    pub method: WindingMethod,
    /// Closed-loop sum of the imaginary increments of `φ`.
    pub residual_im: f64,
    /// Distance from the nearest multiple of 1/2.
    pub quantization_residual: f64,
}

fn half_integer_residual(v: f64) -> f64 {
    (v - (2.0 * v).round() / 2.0).abs()
}

/// Winding of `Re φ` around a closed loop, with `φ` defined modulo π.
pub fn winding_from_phases(phis: &[C64]) -> Result<WindingResult> {
    let n = phis.len();
    if n < 16 {
        return Err(Error::Domain(format!("need at least 16 samples, got {n}")));
    }
    if phis.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite phase in loop".into()));
    }
    let mut total = 0.0;
    let mut residual_im = 0.0;
    for j in 0..n {
        let (a, b) = (phis[j], phis[(j + 1) % n]);
        let mut d = b.re - a.re;
        d -= PI * (d / PI).round();
        if d <= -PI / 2.0 {
            d += PI;
        } else if d > PI / 2.0 {
            d -= PI;
        }
        if (d.abs() - PI / 2.0).abs() < 1e-12 {
            return Err(Error::AmbiguousBranch { step: j });
        }
        total += d;
        residual_im += b.im - a.im;
    }
    let value = total / (2.0 * PI);
    Ok(WindingResult {
        value,
        n,
        method: WindingMethod::Measured,
        residual_im,
        quantization_residual: half_integer_residual(value),
    })
}

/// Winding number from the phases of `q± = d_x ± i d_y` on the loop.
pub fn winding_oracle(p: &SshParams, n_k: usize) -> Result<WindingResult> {
    if n_k < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {n_k}")));
    }
    let ds = k_grid(n_k)
        .into_iter()
        .map(|k| p.d_vector(k))
        .collect::<Result<Vec<_>>>()?;
    let wind = |q: &dyn Fn(usize) -> C64| -> Result<f64> {
        let mut total = 0.0;
        for j in 0..n_k {
            let (a, b) = (q(j), q((j + 1) % n_k));
            if a.norm() < 1e-12 {
                return Err(Error::ExceptionalPoint(format!("q vanishes at sample {j}")));
            }
            total += (b / a).arg();
        }
        Ok(total / (2.0 * PI))
    };
    let wp = wind(&|j| ds[j].q_plus())?;
    let wm = wind(&|j| ds[j].q_minus())?;
    let raw = (wp - wm) / 2.0;
    let rounded = (2.0 * raw).round() / 2.0;
    let value = if (raw - rounded).abs() < 1e-9 { rounded } else { raw };
    Ok(WindingResult {
        value,
        n: n_k,
        method: WindingMethod::Oracle,
        residual_im: 0.0,
        quantization_residual: half_integer_residual(raw),
    })
}

/// Full pipeline result for one parameter point.
#[derive(Debug, Clone)]
pub struct WindingReport {
    pub params: SshParams,
    pub textures: Vec<TextureSample>,
    pub measured: WindingResult,
    pub oracle: Option<WindingResult>,
    /// `None` when the point lies on a phase boundary.
    pub expected: Option<f64>,
}

impl WindingReport {
    pub fn ratio_mode_count(&self) -> usize {
        self.textures
            .iter()
            .filter(|t| t.readout == ReadoutMode::Ratio)
            .count()
    }

    pub fn summary(&self, cfg: &MeasureConfig) -> WindingSummary {
        WindingSummary {
            t1: self.params.t1,
            delta: self.params.delta,
            t2: self.params.t2,
            bc: self.params.bc.to_string(),
            n: self.measured.n,
            t_total: cfg.t_total,
            mode: mode_name(cfg.mode).to_string(),
            shots: match cfg.mode {
                MeasurementMode::Sampled { shots, .. } => Some(shots),
                MeasurementMode::Exact => None,
            },
            seed: match cfg.mode {
                MeasurementMode::Sampled { seed, .. } => Some(seed),
                MeasurementMode::Exact => None,
            },
            value: self.measured.value,
            oracle: self.oracle.map(|o| o.value),
            expected: self.expected,
            residual_im: self.measured.residual_im,
            quantization_residual: self.measured.quantization_residual,
            ratio_mode_points: self.ratio_mode_count(),
            min_overlap: self
                .textures
                .iter()
                .map(|t| t.overlap_mag)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn mode_name(mode: MeasurementMode) -> &'static str {
    match mode {
        MeasurementMode::Exact => "exact",
        MeasurementMode::Sampled { .. } => "sampled",
    }
}

/// Machine-readable summary of one winding measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingSummary {
    pub t1: f64,
    pub delta: f64,
    pub t2: f64,
    pub bc: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t_total: f64,
    pub mode: String,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub value: f64,
    pub oracle: Option<f64>,
    pub expected: Option<f64>,
    pub residual_im: f64,
    pub quantization_residual: f64,
    pub ratio_mode_points: usize,
    pub min_overlap: f64,
}

pub fn measure_winding(p: &SshParams, n_k: usize, cfg: &MeasureConfig) -> Result<WindingReport> {
    let textures = measure_loop(p, n_k, cfg)?;
    let phis: Vec<C64> = textures.iter().map(|t| t.phi).collect();
    let measured = winding_from_phases(&phis)?;
    Ok(WindingReport {
        params: *p,
        textures,
        measured,
        oracle: winding_oracle(p, n_k).ok(),
        expected: expected_winding(p).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t1: f64,
    pub measured: Option<f64>,
    pub oracle: Option<f64>,
    pub expected: Option<f64>,
    pub error: Option<String>,
}

/// Runs the pipeline for each `t1`; failures are recorded per row.
pub fn winding_sweep(t1s: &[f64], base: &SshParams, n_k: usize, cfg: &MeasureConfig) -> Vec<SweepRow> {
    t1s.iter()
        .map(|&t1| {
            let p = SshParams { t1, ..*base };
            let oracle = winding_oracle(&p, n_k).ok().map(|w| w.value);
            let expected = expected_winding(&p).ok();
            match measure_winding(&p, n_k, cfg) {
                Ok(r) => SweepRow {
                    t1,
                    measured: Some(r.measured.value),
                    oracle,
                    expected,
                    error: None,
                },
                Err(e) => SweepRow {
                    t1,
                    measured: None,
                    oracle,
                    expected,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Texture CSV: `k, re_nx, im_nx, re_ny, im_ny, re_nz, im_nz, re_phi, im_phi,
/// overlap_mag, mode`.
pub fn texture_csv(samples: &[TextureSample]) -> String {
    let mut out =
        String::from("k,re_nx,im_nx,re_ny,im_ny,re_nz,im_nz,re_phi,im_phi,overlap_mag,mode\n");
    for s in samples {
        let _ = write!(out, "{:.12}", s.k);
        for c in s.n.iter().chain(std::iter::once(&s.phi)) {
            let _ = write!(out, ",{:.12e},{:.12e}", c.re, c.im);
        }
        let _ = writeln!(out, ",{:.12e},{}", s.overlap_mag, s.mode_label());
    }
    out
}

/// Sweep table: `t1, measured, oracle, expected, error`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.10}"));
    let mut out = String::from("t1,measured,oracle,expected,error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.10},{},{},{},{}",
            r.t1,
            opt(r.measured),
            opt(r.oracle),
            opt(r.expected),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}
