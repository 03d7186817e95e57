//! Nonunitary evolution `i d/dt |ψ⟩ = H |ψ⟩` and dual-eigenstate preparation.
//!
//! Evolving `|0⟩` for a long time under `αH` filters out everything except the
//! eigenvector whose eigenvalue has the largest `Im(αE)`. Running the same
//! procedure under `-α* H†` gives the matching left eigenvector, because the
//! eigenvalues of `-α* H†` are `-(αE)*` and share the imaginary parts.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::linalg::{eig, eigenvalues_2x2, expm, ComplexMatrix, C64, I};
use crate::statevector::StateVector;

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Normalized state at each time.
    pub states: Vec<StateVector>,
    pub populations: Vec<Vec<f64>>,
    /// `|⟨target|ψ(t)⟩|²`, present when a target was supplied.
    pub fidelities: Option<Vec<f64>>,
    /// `ln ‖exp(-iHt) ψ0‖`, so the unnormalized state is recoverable.
    pub log_norm_factors: Vec<f64>,
}

impl EvolutionResult {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("at least one stored time")
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelities.as_ref().and_then(|f| f.last().copied())
    }

    /// Adds fidelities against a target vector (normalized internally).
    pub fn with_target(mut self, target: &[C64]) -> Result<Self> {
        let target = StateVector::normalize_from(target.to_vec())?;
        if target.dim() != self.final_state().dim() {
            return Err(Error::Dimension("target and state dimensions differ".into()));
        }
        self.fidelities = Some(
            self.states
                .iter()
                .map(|s| target.inner(s).norm_sqr())
                .collect(),
        );
        Ok(self)
    }

    /// Trajectory CSV with columns `t, pop_0.., fidelity, norm_factor_log`.
    pub fn to_csv(&self) -> String {
        let dim = self.final_state().dim();
        let mut out = String::from("t");
        for i in 0..dim {
            let _ = write!(out, ",pop_{i}");
        }
        out.push_str(",fidelity,norm_factor_log\n");
        for (j, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.10}");
            for p in &self.populations[j] {
                let _ = write!(out, ",{p:.12e}");
            }
            match &self.fidelities {
                Some(f) => {
                    let _ = write!(out, ",{:.12e}", f[j]);
                }
                None => out.push_str(",nan"),
            }
            let _ = writeln!(out, ",{:.12e}", self.log_norm_factors[j]);
        }
        out
    }
}

/// Stored times `t_j = j T / steps`, `j = 0..=steps`.
pub fn time_grid(t_total: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|j| t_total * j as f64 / steps as f64)
        .collect()
}

/// Evolves `psi0` under a time-independent `h`, one matrix exponential per
/// stored time.
pub fn evolve(h: &ComplexMatrix, psi0: &StateVector, t_total: f64, steps: usize) -> Result<EvolutionResult> {
    if h.dim() != psi0.dim() {
        return Err(Error::Domain(format!(
            "Hamiltonian dimension {} does not match state dimension {}",
            h.dim(),
            psi0.dim()
        )));
    }
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::Domain(format!("evolution time must be positive, got {t_total}")));
    }
    if steps == 0 {
        return Err(Error::Domain("steps must be at least 1".into()));
    }
    let psi0 = StateVector::normalize_from(psi0.amplitudes().to_vec())?;
    let gen = h.scale(-I);
    let times = time_grid(t_total, steps);
    let mut states = Vec::with_capacity(times.len());
    let mut log_norm_factors = Vec::with_capacity(times.len());
    for &t in &times {
        let psi = expm(&gen.scale_re(t))?.mul_vec(psi0.amplitudes());
        let norm = crate::linalg::vec_norm(&psi);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical(format!(
                "state norm {norm} at t = {t}; the evolution time is too long for this Hamiltonian"
            )));
        }
        log_norm_factors.push(norm.ln());
        states.push(StateVector::normalize_from(psi)?);
    }
    let populations = states.iter().map(|s| s.probabilities()).collect();
    Ok(EvolutionResult {
        times,
        states,
        populations,
        fidelities: None,
        log_norm_factors,
    })
}

/// `α = i (E₊ - E₋)* / |E₊ - E₋|`, which makes `Im(α(E₊ - E₋))` as large as
/// possible so the `+` band dominates the evolution.
pub fn select_alpha(e_plus: C64, e_minus: C64) -> Result<C64> {
    let gap = e_plus - e_minus;
    let mag = gap.norm();
    if mag < 1e-12 * (1.0 + e_plus.norm().max(e_minus.norm())) {
        return Err(Error::ExceptionalPoint(format!(
            "eigenvalues coincide (E+ = {e_plus}, E- = {e_minus})"
        )));
    }
    Ok(I * gap.conj() / mag)
}

/// How the complex multiplier `α` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlphaPolicy {
    /// Rotate the spectrum so the `+` band has the largest possible growth
    /// advantage (2×2 only; larger matrices fall back to `α = 1`).
    #[default]
    Auto,
    /// `α = -1` when `Im E₊ < Im E₋`, else `α = 1`.
    Sign,
    Fixed(C64),
}

impl AlphaPolicy {
    pub fn resolve(&self, h: &ComplexMatrix) -> Result<C64> {
        match *self {
            AlphaPolicy::Fixed(a) => {
                if (a.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!("alpha must have unit modulus, got |alpha| = {}", a.norm())));
                }
                Ok(a)
            }
            AlphaPolicy::Auto if h.dim() == 2 => {
                let (ep, em) = eigenvalues_2x2(h);
                select_alpha(ep, em)
            }
            AlphaPolicy::Auto => Ok(C64::new(1.0, 0.0)),
            AlphaPolicy::Sign => {
                let (ep, em) = if h.dim() == 2 {
                    eigenvalues_2x2(h)
                } else {
                    return Ok(C64::new(1.0, 0.0));
                };
                Ok(if ep.im < em.im {
                    C64::new(-1.0, 0.0)
                } else {
                    C64::new(1.0, 0.0)
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualPair {
    pub psi_r: StateVector,
    pub psi_l: StateVector,
    /// Eigenvalue of `H` (not of `αH`) that the preparation targets.
    pub eigenvalue: C64,
    /// `⟨ψL|ψR⟩`.
    pub overlap: C64,
    pub alpha: C64,
    /// `Im(αE)` of the target minus the largest `Im(αE')` of the others.
    /// Non-positive means the evolution cannot single out the target.
    pub growth_gap: f64,
}

/// Target eigenvalue and its right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct DualTarget {
    pub index: usize,
    pub eigenvalue: C64,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
    pub growth_gap: f64,
}

/// Picks the eigenvalue with the largest `Im(αE)`; ties go to `E₊` for 2×2
/// matrices and to the first eigenvalue otherwise.
pub fn dual_target(h: &ComplexMatrix, alpha: C64) -> Result<DualTarget> {
    let sys = eig(h)?;
    if sys.degenerate {
        return Err(Error::ExceptionalPoint(format!(
            "degenerate spectrum {:?}",
            sys.values()
        )));
    }
    let values = sys.values();
    let scale = 1.0 + values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut candidates: Vec<usize> = (0..values.len()).collect();
    if h.dim() == 2 {
        let (ep, _) = eigenvalues_2x2(h);
        let plus = sys.closest(ep);
        candidates.swap(0, plus);
    }
    let growth = |i: usize| (alpha * values[i]).im;
    let mut index = candidates[0];
    for &i in &candidates[1..] {
        if growth(i) > growth(index) + 1e-12 * scale {
            index = i;
        }
    }
    let runner_up = (0..values.len())
        .filter(|&i| i != index)
        .map(growth)
        .fold(f64::NEG_INFINITY, f64::max);
    let eigenvalue = values[index];

    let left_sys = eig(&h.dagger())?;
    let left = left_sys.pairs[left_sys.closest(eigenvalue.conj())].vector.clone();
    Ok(DualTarget {
        index,
        eigenvalue,
        right: sys.pairs[index].vector.clone(),
        left,
        growth_gap: growth(index) - runner_up,
    })
}

/// Prepares `(ψR, ψL)` by evolving `|0⟩` under `αH` and `-α* H†`.
///
/// Returns the pair together with both trajectories; the trajectories carry
/// fidelities against the exact right and left eigenvectors.
pub fn prepare_dual_pair(
    h: &ComplexMatrix,
    t_total: f64,
    steps: usize,
    alpha: AlphaPolicy,
) -> Result<(DualPair, EvolutionResult, EvolutionResult)> {
    let n_qubits = qubit_count(h.dim())?;
    let alpha = alpha.resolve(h)?;
    let target = dual_target(h, alpha)?;

    let psi0 = StateVector::zero(n_qubits);
    let overlap0 = target.right[0].norm().min(target.left[0].norm());
    if overlap0 < 1e-12 {
        return Err(Error::PreparationImpossible { overlap: overlap0 });
    }

    let h_right = h.scale(alpha);
    let h_left = h.dagger().scale(-alpha.conj());
    let right = evolve(&h_right, &psi0, t_total, steps)?.with_target(&target.right)?;
    let left = evolve(&h_left, &psi0, t_total, steps)?.with_target(&target.left)?;

    let psi_r = right.final_state().clone();
    let psi_l = left.final_state().clone();
    let overlap = psi_l.inner(&psi_r);
    Ok((
        DualPair {
            psi_r,
            psi_l,
            eigenvalue: target.eigenvalue,
            overlap,
            alpha,
            growth_gap: target.growth_gap,
        },
        right,
        left,
    ))
}

/// The dual pair from an exact eigensolve, for comparison with prepared ones.
pub fn exact_dual_pair(h: &ComplexMatrix, alpha: C64) -> Result<DualPair> {
    let target = dual_target(h, alpha)?;
    let psi_r = StateVector::normalize_from(target.right)?;
    let psi_l = StateVector::normalize_from(target.left)?;
    let overlap = psi_l.inner(&psi_r);
    Ok(DualPair {
        psi_r,
        psi_l,
        eigenvalue: target.eigenvalue,
        overlap,
        alpha,
        growth_gap: target.growth_gap,
    })
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "Hamiltonian dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_x, sigma_z, ONE, ZERO};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitian_populations_constant() {
        let r = evolve(&sigma_z(), &StateVector::zero(1), 3.0, 30).unwrap();
        for p in &r.populations {
            assert!((p[0] - 1.0).abs() < 1e-14 && p[1].abs() < 1e-14);
        }
        for l in &r.log_norm_factors {
            assert!(l.abs() < 1e-12);
        }
    }

    #[test]
    fn decay_of_one_component() {
        let h = ComplexMatrix::from_rows([[ZERO, ZERO], [ZERO, c(0.0, -1.0)]]);
        let s = 1.0 / 2f64.sqrt();
        let psi0 = StateVector::from_amplitudes(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        let r = evolve(&h, &psi0, 20.0, 4).unwrap();
        let pops: Vec<f64> = r.populations.iter().map(|p| p[0]).collect();
        assert!(pops.windows(2).all(|w| w[1] > w[0]));
        assert!(1.0 - pops[4] < 1e-15 + 4.0 * (-40f64).exp());
        // unnormalized norm² at t is (1 + e^{-2t})/2
        for (t, l) in r.times.iter().zip(&r.log_norm_factors) {
            let expected = (0.5 * (1.0 + (-2.0 * t).exp())).sqrt().ln();
            assert!((l - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn evolve_rejects_bad_input() {
        assert!(evolve(&sigma_z(), &StateVector::zero(2), 1.0, 1).is_err());
        assert!(evolve(&sigma_z(), &StateVector::zero(1), 0.0, 1).is_err());
        assert!(evolve(&sigma_z(), &StateVector::zero(1), 1.0, 0).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert!((select_alpha(I, -I).unwrap() - ONE).norm() < 1e-15);
        assert!((select_alpha(ONE, -ONE).unwrap() - I).norm() < 1e-15);
        assert!((select_alpha(-I, I).unwrap() + ONE).norm() < 1e-15);
        assert!(matches!(select_alpha(ONE, ONE), Err(Error::ExceptionalPoint(_))));
    }

    #[test]
    fn alpha_is_unit_and_maximizes_gap() {
        for (ep, em) in [(c(2.0, -0.3), c(-2.0, 0.3)), (c(0.1, 0.2), c(0.5, -1.0))] {
            let a = select_alpha(ep, em).unwrap();
            assert!((a.norm() - 1.0).abs() < 1e-15);
            assert!(((a * (ep - em)).im - (ep - em).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_policy() {
        // E± = ±(2 - 0.25i): Im E+ < Im E-
        let h = sigma_x().scale(c(2.0, -0.25));
        let a = AlphaPolicy::Sign.resolve(&h).unwrap();
        assert_eq!(a, c(-1.0, 0.0));
        let a = AlphaPolicy::Sign.resolve(&sigma_x().scale(c(2.0, 0.25))).unwrap();
        assert_eq!(a, c(1.0, 0.0));
        assert!(AlphaPolicy::Fixed(c(2.0, 0.0)).resolve(&h).is_err());
    }

    #[test]
    fn hermitian_sigma_x_with_alpha_i() {
        let (pair, right, left) =
            prepare_dual_pair(&sigma_x(), 20.0, 10, AlphaPolicy::Fixed(I)).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((pair.eigenvalue - ONE).norm() < 1e-12);
        for psi in [&pair.psi_r, &pair.psi_l] {
            let a = psi.amplitudes();
            assert!((a[0].norm() - s).abs() < 1e-12 && (a[1].norm() - s).abs() < 1e-12);
            assert!((a[1] / a[0] - ONE).norm() < 1e-12);
        }
        assert!(right.final_fidelity().unwrap() > 1.0 - 1e-12);
        assert!(left.final_fidelity().unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn preparation_impossible_from_orthogonal_start() {
        // with α = i the growing eigenvector of -σz is |1⟩
        let h = sigma_z().scale(c(-1.0, 0.0));
        let err = prepare_dual_pair(&h, 1.0, 1, AlphaPolicy::Fixed(I));
        assert!(matches!(err, Err(Error::PreparationImpossible { .. })));
    }

    #[test]
    fn exceptional_point_detected() {
        // [[0,1],[0,0]] is defective
        let h = ComplexMatrix::from_rows([[ZERO, ONE], [ZERO, ZERO]]);
        assert!(matches!(
            prepare_dual_pair(&h, 1.0, 1, AlphaPolicy::Fixed(ONE)),
            Err(Error::ExceptionalPoint(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let r = evolve(&sigma_x(), &StateVector::zero(1), 1.0, 2)
            .unwrap()
            .with_target(&[ONE, ZERO])
            .unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,pop_0,pop_1,fidelity,norm_factor_log");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
