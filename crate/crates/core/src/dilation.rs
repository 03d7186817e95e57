//! Simulating nonunitary evolution with a Hermitian Hamiltonian on the system
//! plus one ancilla qubit, followed by postselection.
//!
//! With `H' = H_eff - ib`, `G' = -iH'† G`, `M(t) = G M(0) G†` and
//! `η = √(M - I)`, the dilated Hamiltonian
//!
//! ```text
//! 𝓗 = Λ ⊗ σ0 + Γ ⊗ σz
//! Λ = (H' + ηH'η + i η̇ η) M⁻¹
//! Γ = i (H'η - ηH' - i η̇) M⁻¹
//! ```
//!
//! is Hermitian and evolves `|ψ⟩|−⟩ + e^{bt} η|ψ⟩|+⟩` into the same form at
//! later times, where `ψ` follows `i ψ' = H_eff ψ`. Here
//! `|−⟩ = (|0⟩ - i|1⟩)/√2` and `|+⟩ = (-i|0⟩ + |1⟩)/√2`, so `X(-π/2)` on the
//! ancilla followed by keeping outcome 0 returns `ψ(t)`.
//!
//! The offset `b` must keep `M(t) - I` positive definite for the whole run;
//! the schedule reports the smallest eigenvalue so a bad choice is visible.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::linalg::{eigh, expm, inverse, sigma_0, sigma_z, ComplexMatrix, C64, I};
use crate::statevector::{apply, postselect_discard, GateOp, StateVector};

/// Which member of the dual pair is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// `H_eff = α H`.
    #[default]
    Right,
    /// `H_eff = -α* H†`.
    Left,
}

/// How `dη/dt` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaDerivative {
    /// Solves `η η̇ + η̇ η = Ṁ` in the eigenbasis of `η`, with `Ṁ` from the
    /// equation of motion of `M`.
    #[default]
    Analytic,
    /// Central differences of `η` on the time grid (one-sided at the ends).
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationParams {
    pub eta0: f64,
    pub b: f64,
    pub alpha: C64,
    pub t_total: f64,
    pub steps: usize,
    pub branch: Branch,
    pub eta_derivative: EtaDerivative,
}

impl DilationParams {
    pub fn new(eta0: f64, b: f64, alpha: C64, t_total: f64, steps: usize) -> Self {
        DilationParams {
            eta0,
            b,
            alpha,
            t_total,
            steps,
            branch: Branch::Right,
            eta_derivative: EtaDerivative::Analytic,
        }
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    pub fn with_eta_derivative(mut self, d: EtaDerivative) -> Self {
        self.eta_derivative = d;
        self
    }

    /// Ancilla preparation angle `θ = 2 arctan η0`.
    pub fn theta(&self) -> f64 {
        2.0 * self.eta0.atan()
    }

    pub fn dt(&self) -> f64 {
        self.t_total / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return Err(Error::Domain(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !self.b.is_finite() {
            return Err(Error::Domain("b must be finite".into()));
        }
        if (self.alpha.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "alpha must have unit modulus, got |alpha| = {}",
                self.alpha.norm()
            )));
        }
        if !(self.t_total > 0.0) || !self.t_total.is_finite() {
            return Err(Error::Domain(format!("T must be positive, got {}", self.t_total)));
        }
        if self.steps < 10 {
            return Err(Error::Domain(format!("steps must be at least 10, got {}", self.steps)));
        }
        Ok(())
    }

    /// The Hamiltonian whose nonunitary evolution is being reproduced.
    pub fn effective_hamiltonian(&self, h: &ComplexMatrix) -> ComplexMatrix {
        match self.branch {
            Branch::Right => h.scale(self.alpha),
            Branch::Left => h.dagger().scale(-self.alpha.conj()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchedulePoint {
    pub t: f64,
    pub lambda: ComplexMatrix,
    pub gamma: ComplexMatrix,
    pub m: ComplexMatrix,
    pub eta: ComplexMatrix,
    pub eta_dot: ComplexMatrix,
    /// `𝓗 = Λ⊗σ0 + Γ⊗σz`.
    pub dilated: ComplexMatrix,
    /// `‖𝓗 - 𝓗†‖` (Frobenius).
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue of `M - I`.
    pub min_eig: f64,
}

#[derive(Debug, Clone)]
pub struct DilationSchedule {
    pub params: DilationParams,
    pub h_prime: ComplexMatrix,
    pub points: Vec<SchedulePoint>,
    /// Dilated Hamiltonian at the midpoint of each step.
    pub step_hamiltonians: Vec<ComplexMatrix>,
}

impl DilationSchedule {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn hermiticity_residuals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.hermiticity_residual).collect()
    }

    /// Largest `‖𝓗 - 𝓗†‖ / ‖𝓗‖` over grid points and step midpoints.
    pub fn max_relative_hermiticity_residual(&self) -> f64 {
        let grid = self
            .points
            .iter()
            .map(|p| p.hermiticity_residual / p.dilated.norm().max(f64::MIN_POSITIVE));
        let mids = self
            .step_hamiltonians
            .iter()
            .map(|h| (h - &h.dagger()).norm() / h.norm().max(f64::MIN_POSITIVE));
        grid.chain(mids).fold(0.0, f64::max)
    }

    pub fn min_positivity(&self) -> f64 {
        self.points.iter().map(|p| p.min_eig).fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t, Lambda_0..z, Gamma_0..z, minEig(M-I)`; components
    /// are the real Pauli coefficients of the 2×2 blocks.
    pub fn to_csv(&self) -> Result<String> {
        if self.h_prime.dim() != 2 {
            return Err(Error::Dimension(
                "schedule CSV needs a single-qubit system".into(),
            ));
        }
        let mut out = String::from(
            "t,Lambda_0,Lambda_x,Lambda_y,Lambda_z,Gamma_0,Gamma_x,Gamma_y,Gamma_z,minEig(M-I)\n",
        );
        for p in &self.points {
            let _ = write!(out, "{:.10}", p.t);
            for m in [&p.lambda, &p.gamma] {
                for c in m.pauli_components() {
                    let _ = write!(out, ",{:.12e}", c.re);
                }
            }
            let _ = writeln!(out, ",{:.12e}", p.min_eig);
        }
        Ok(out)
    }
}

/// `M`, `η`, `η̇` (analytic) and the blocks at one instant.
struct Instant {
    m: ComplexMatrix,
    eta: ComplexMatrix,
    eta_dot: ComplexMatrix,
    min_eig: f64,
}

fn instant(h_prime: &ComplexMatrix, g: &ComplexMatrix, m0: f64, t: f64) -> Result<Instant> {
    let n = h_prime.dim();
    let m = (&g.scale_re(m0) * &g.dagger()).hermitian_part();
    let m_minus_i = &m - &ComplexMatrix::identity(n);
    let e = eigh(&m_minus_i)?;
    let min_eig = e.values[0];
    if !(min_eig > 0.0) {
        return Err(Error::InvalidDilation {
            time: t,
            min_eigenvalue: min_eig,
        });
    }
    let s: Vec<f64> = e.values.iter().map(|v| v.sqrt()).collect();
    let eta = e.apply_fn(f64::sqrt);

    // Ṁ = -iH'†M + iMH', then η̇ solves η η̇ + η̇ η = Ṁ.
    let hp_dag = h_prime.dagger();
    let m_dot = &(&hp_dag * &m).scale(-I) + &(&m * h_prime).scale(I);
    let v = &e.vectors;
    let a = &(&v.dagger() * &m_dot) * v;
    let mut x = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] = a[(i, j)] / (s[i] + s[j]);
        }
    }
    let eta_dot = &(v * &x) * &v.dagger();
    Ok(Instant {
        m,
        eta,
        eta_dot,
        min_eig,
    })
}

/// `(Λ, Γ, 𝓗)` from `H'`, `M`, `η` and `η̇`.
fn blocks(
    h_prime: &ComplexMatrix,
    m: &ComplexMatrix,
    eta: &ComplexMatrix,
    eta_dot: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    let m_inv = inverse(m)?;
    let eta_h = eta * h_prime;
    let h_eta = h_prime * eta;
    let lambda_num = &(h_prime + &(&eta_h * eta)) + &(eta_dot * eta).scale(I);
    let lambda = &lambda_num * &m_inv;
    let gamma_num = &(&h_eta - &eta_h) - &eta_dot.scale(I);
    let gamma = (&gamma_num * &m_inv).scale(I);
    let dilated = &lambda.kron(&sigma_0()) + &gamma.kron(&sigma_z());
    Ok((lambda, gamma, dilated))
}

pub fn build_schedule(h: &ComplexMatrix, p: &DilationParams) -> Result<DilationSchedule> {
    p.validate()?;
    let n = h.dim();
    let h_prime = &p.effective_hamiltonian(h) - &ComplexMatrix::identity(n).scale(C64::new(0.0, p.b));
    let m0 = 1.0 + p.eta0 * p.eta0;
    let dt = p.dt();
    let gen = h_prime.dagger().scale(-I);
    let step = expm(&gen.scale_re(dt))?;
    let half = expm(&gen.scale_re(dt / 2.0))?;

    let mut gs = Vec::with_capacity(p.steps + 1);
    let mut g = ComplexMatrix::identity(n);
    for _ in 0..=p.steps {
        gs.push(g.clone());
        g = &step * &g;
    }
    let times: Vec<f64> = (0..=p.steps).map(|j| j as f64 * dt).collect();

    let grid = gs
        .iter()
        .zip(&times)
        .map(|(g, &t)| instant(&h_prime, g, m0, t))
        .collect::<Result<Vec<_>>>()?;
    let mids = gs[..p.steps]
        .iter()
        .zip(&times)
        .map(|(g, &t)| instant(&h_prime, &(&half * g), m0, t + dt / 2.0))
        .collect::<Result<Vec<_>>>()?;

    let fd_grid = |j: usize| -> ComplexMatrix {
        let (lo, hi) = match j {
            0 => (0, 1),
            j if j == p.steps => (j - 1, j),
            j => (j - 1, j + 1),
        };
        (&grid[hi].eta - &grid[lo].eta).scale_re(1.0 / ((hi - lo) as f64 * dt))
    };

    let mut points = Vec::with_capacity(grid.len());
    for (j, inst) in grid.iter().enumerate() {
        let eta_dot = match p.eta_derivative {
            EtaDerivative::Analytic => inst.eta_dot.clone(),
            EtaDerivative::CentralDifference => fd_grid(j),
        };
        let (lambda, gamma, dilated) = blocks(&h_prime, &inst.m, &inst.eta, &eta_dot)?;
        let hermiticity_residual = (&dilated - &dilated.dagger()).norm();
        points.push(SchedulePoint {
            t: times[j],
            lambda,
            gamma,
            m: inst.m.clone(),
            eta: inst.eta.clone(),
            eta_dot,
            dilated,
            hermiticity_residual,
            min_eig: inst.min_eig,
        });
    }

    let step_hamiltonians = mids
        .iter()
        .enumerate()
        .map(|(j, inst)| {
            let eta_dot = match p.eta_derivative {
                EtaDerivative::Analytic => inst.eta_dot.clone(),
                EtaDerivative::CentralDifference => {
                    (&grid[j + 1].eta - &grid[j].eta).scale_re(1.0 / dt)
                }
            };
            blocks(&h_prime, &inst.m, &inst.eta, &eta_dot).map(|(_, _, d)| d)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DilationSchedule {
        params: *p,
        h_prime,
        points,
        step_hamiltonians,
    })
}

#[derive(Debug, Clone)]
pub struct DilatedRun {
    pub times: Vec<f64>,
    /// Postselected, normalized system states.
    pub states: Vec<StateVector>,
    /// Probability of the ancilla outcome 0 at each time.
    pub success_prob: Vec<f64>,
    /// Product of all step unitaries.
    pub propagator: ComplexMatrix,
}

impl DilatedRun {
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.probabilities()).collect()
    }
}

/// `(|ψ0⟩|−⟩ + η0 |ψ0⟩|+⟩) / √(1+η0²)` via `Y(θ)` then `X(π/2)` on an
/// ancilla that starts in `|0⟩`.
pub fn initial_dilated_state(psi0: &StateVector, eta0: f64) -> Result<StateVector> {
    let anc = psi0.n_qubits();
    let mut s = psi0.tensor(&StateVector::zero(1));
    s = apply(&s, &GateOp::ry(2.0 * eta0.atan(), anc))?;
    apply(&s, &GateOp::rx(std::f64::consts::FRAC_PI_2, anc))
}

/// Rotates the ancilla back with `X(-π/2)` and keeps outcome 0.
fn readout(state: &StateVector) -> Result<(StateVector, f64)> {
    let anc = state.n_qubits() - 1;
    let rotated = apply(state, &GateOp::rx(-std::f64::consts::FRAC_PI_2, anc))?;
    let p0: f64 = rotated
        .amplitudes()
        .iter()
        .step_by(2)
        .map(|a| a.norm_sqr())
        .sum();
    if p0 < 1e-12 {
        return Err(Error::Numerical(format!(
            "postselection probability {p0:.3e} is too small"
        )));
    }
    postselect_discard(&rotated, anc, 0)
}

pub fn run_dilated(psi0: &StateVector, schedule: &DilationSchedule) -> Result<DilatedRun> {
    let p = &schedule.params;
    if psi0.dim() != schedule.h_prime.dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            psi0.dim(),
            schedule.h_prime.dim()
        )));
    }
    if !psi0.is_normalized() {
        return Err(Error::Domain("initial state must be normalized".into()));
    }
    let init = initial_dilated_state(psi0, p.eta0)?;
    let dt = p.dt();
    let big_n = init.dim();
    let mut propagator = ComplexMatrix::identity(big_n);
    let mut states = Vec::with_capacity(schedule.points.len());
    let mut success_prob = Vec::with_capacity(schedule.points.len());
    let mut current = init.clone();
    for j in 0..schedule.points.len() {
        let (s, prob) = readout(&current)?;
        states.push(s);
        success_prob.push(prob);
        if j < schedule.step_hamiltonians.len() {
            let u = expm(&schedule.step_hamiltonians[j].scale(C64::new(0.0, -dt)))?;
            propagator = &u * &propagator;
            current = StateVector::normalize_from(propagator.mul_vec(init.amplitudes()))?;
        }
    }
    Ok(DilatedRun {
        times: schedule.times(),
        states,
        success_prob,
        propagator,
    })
}
