//! Measuring tensor-product observables from computational-basis shots.
//!
//! A single-qubit Hermitian operator is written as `d·σ + d0 σ0`. Rotating the
//! qubit by `U = exp(-i θ/2 û·σ)` with `θ = arccos(d̂·ẑ)` and `û = d̂×ẑ/sin θ`
//! turns it into `|d| σz + d0 σ0`, which a Z-basis measurement reads out.

use crate::error::{Error, Result};
use crate::linalg::{sigma_x, sigma_y, sigma_z, ComplexMatrix, I};
use crate::statevector::{apply_in_place, sample, GateOp, StateVector, NORM_TOL};

/// Below this `|d|` an observable is treated as a pure multiple of σ0.
const PURE_IDENTITY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableDecomposition {
    pub d_vec: [f64; 3],
    pub d0: f64,
    pub d_norm: f64,
}

impl ObservableDecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let [dx, dy, dz] = self.d_vec;
        let mut m = ComplexMatrix::identity(2).scale_re(self.d0);
        m = &m + &sigma_x().scale_re(dx);
        m = &m + &sigma_y().scale_re(dy);
        &m + &sigma_z().scale_re(dz)
    }

    fn is_identity_like(&self) -> bool {
        self.d_norm < PURE_IDENTITY
    }
}

pub fn decompose(obs: &ComplexMatrix) -> Result<ObservableDecomposition> {
    if obs.dim() != 2 {
        return Err(Error::Dimension("observable must be 2x2".into()));
    }
    if !obs.is_hermitian(NORM_TOL) {
        return Err(Error::Domain("observable is not Hermitian".into()));
    }
    let [c0, cx, cy, cz] = obs.pauli_components();
    let d_vec = [cx.re, cy.re, cz.re];
    let d_norm = d_vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(ObservableDecomposition {
        d_vec,
        d0: c0.re,
        d_norm,
    })
}

/// The basis-change unitary `U` with `U (d·σ) U† = |d| σz`.
///
/// `d ∥ ẑ` gives the identity; `d ∥ -ẑ` uses the y axis, i.e. `Y(π)`.
pub fn rotation_matrix(dec: &ObservableDecomposition) -> Result<ComplexMatrix> {
    if dec.is_identity_like() {
        return Err(Error::Domain(
            "rotation undefined for a pure identity observable".into(),
        ));
    }
    let [dx, dy, dz] = dec.d_vec.map(|x| x / dec.d_norm);
    let theta = dz.clamp(-1.0, 1.0).acos();
    let transverse = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = if transverse < 1e-12 {
        if dz > 0.0 {
            return Ok(ComplexMatrix::identity(2));
        }
        (0.0, 1.0)
    } else {
        // d̂ × ẑ = (dy, -dx, 0)
        (dy / transverse, -dx / transverse)
    };
    let (s, c) = (theta / 2.0).sin_cos();
    let axis = &sigma_x().scale_re(ux) + &sigma_y().scale_re(uy);
    Ok(&ComplexMatrix::identity(2).scale_re(c) + &axis.scale(-I * s))
}

pub fn rotation_for(dec: &ObservableDecomposition, qubit: usize) -> Result<GateOp> {
    GateOp::new(rotation_matrix(dec)?, vec![qubit])
}

/// How shot outcomes are combined into a product expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Mean of per-shot products over all qubits; exact for correlated outcomes.
    #[default]
    Joint,
    /// Product of per-qubit marginal means, `∏ (d (N0-N1)/N + d0)`. Biased
    /// when outcomes on different qubits are correlated.
    Factored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub fn shot_expectation(
    state: &StateVector,
    obs_per_qubit: &[ComplexMatrix],
    shots: u64,
    seed: u64,
) -> Result<ShotEstimate> {
    shot_expectation_with(state, obs_per_qubit, shots, seed, Estimator::Joint)
}

pub fn shot_expectation_with(
    state: &StateVector,
    obs_per_qubit: &[ComplexMatrix],
    shots: u64,
    seed: u64,
    estimator: Estimator,
) -> Result<ShotEstimate> {
    let n = state.n_qubits();
    if obs_per_qubit.len() != n {
        return Err(Error::Dimension(format!(
            "{} observables for {n} qubits",
            obs_per_qubit.len()
        )));
    }
    let decs = obs_per_qubit
        .iter()
        .map(decompose)
        .collect::<Result<Vec<_>>>()?;

    let mut rotated = state.clone();
    for (q, dec) in decs.iter().enumerate() {
        if !dec.is_identity_like() {
            apply_in_place(&mut rotated, &rotation_for(dec, q)?)?;
        }
    }
    let counts = sample(&rotated, shots, seed)?;
    let nshots = shots as f64;

    // per-qubit (value on outcome 0, value on outcome 1)
    let levels: Vec<(f64, f64)> = decs
        .iter()
        .map(|d| {
            if d.is_identity_like() {
                (d.d0, d.d0)
            } else {
                (d.d0 + d.d_norm, d.d0 - d.d_norm)
            }
        })
        .collect();

    match estimator {
        Estimator::Joint => {
            let value_of = |idx: usize| {
                levels
                    .iter()
                    .enumerate()
                    .map(|(q, &(v0, v1))| if idx & (1 << (n - 1 - q)) != 0 { v1 } else { v0 })
                    .product::<f64>()
            };
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (&idx, &cnt) in &counts.joint {
                let v = value_of(idx);
                sum += v * cnt as f64;
                sum_sq += v * v * cnt as f64;
            }
            let mean = sum / nshots;
            let stderr = if shots > 1 {
                let var = ((sum_sq - nshots * mean * mean) / (nshots - 1.0)).max(0.0);
                (var / nshots).sqrt()
            } else {
                0.0
            };
            Ok(ShotEstimate {
                estimate: mean,
                stderr,
            })
        }
        Estimator::Factored => {
            let factors: Vec<(f64, f64)> = levels
                .iter()
                .zip(&counts.marginals)
                .map(|(&(v0, v1), &(n0, n1))| {
                    let p0 = n0 as f64 / nshots;
                    let p1 = n1 as f64 / nshots;
                    let mean = v0 * p0 + v1 * p1;
                    let var = (v0 - mean).powi(2) * p0 + (v1 - mean).powi(2) * p1;
                    (mean, var / nshots)
                })
                .collect();
            let estimate = factors.iter().map(|f| f.0).product::<f64>();
            let var: f64 = (0..factors.len())
                .map(|q| {
                    let others: f64 = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != q)
                        .map(|(_, f)| f.0)
                        .product();
                    others * others * factors[q].1
                })
                .sum();
            Ok(ShotEstimate {
                estimate,
                stderr: var.sqrt(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_0, C64};
    use crate::statevector::{apply, controlled_register_swap, expectation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn plus() -> StateVector {
        let r = 1.0 / 2f64.sqrt();
        StateVector::from_amplitudes(vec![C64::new(r, 0.0), C64::new(r, 0.0)]).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let data = (0..4)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_row_major(data).unwrap().hermitian_part()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        StateVector::normalize_from(amps).unwrap()
    }

    fn equal_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> bool {
        let overlap = (&a.dagger() * b).trace();
        (overlap.norm() - 2.0).abs() < 1e-12
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&sigma_z()).unwrap();
        assert_eq!(d.d_vec, [0.0, 0.0, 1.0]);
        assert_eq!(d.d0, 0.0);
        let d = decompose(&sigma_0()).unwrap();
        assert_eq!(d.d_vec, [0.0, 0.0, 0.0]);
        assert_eq!(d.d0, 1.0);
        let r = 1.0 / 2f64.sqrt();
        let d = decompose(&(&sigma_x() + &sigma_z()).scale_re(r)).unwrap();
        assert!((d.d_vec[0] - r).abs() < 1e-15 && d.d_vec[1] == 0.0 && (d.d_vec[2] - r).abs() < 1e-15);
        assert!(decompose(&ComplexMatrix::from_rows([[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]])).is_err());
    }

    #[test]
    fn rotations_match_named_gates() {
        let ry = |t: f64| crate::statevector::rotation(&sigma_y(), t);
        let rx = |t: f64| crate::statevector::rotation(&sigma_x(), t);
        let ux = rotation_matrix(&decompose(&sigma_x()).unwrap()).unwrap();
        assert!(equal_up_to_phase(&ux, &ry(-PI / 2.0)));
        let uy = rotation_matrix(&decompose(&sigma_y()).unwrap()).unwrap();
        assert!(equal_up_to_phase(&uy, &rx(PI / 2.0)));
        let uz = rotation_matrix(&decompose(&sigma_z()).unwrap()).unwrap();
        assert!(uz.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let um = rotation_matrix(&decompose(&sigma_z().scale_re(-1.0)).unwrap()).unwrap();
        assert!(um.max_abs_diff(&ry(PI)) < 1e-15);
        assert!(rotation_matrix(&decompose(&sigma_0()).unwrap()).is_err());
    }

    #[test]
    fn conjugation_diagonalizes_random_observables() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let obs = random_hermitian(&mut rng);
            let dec = decompose(&obs).unwrap();
            assert!(dec.reconstruct().max_abs_diff(&obs) < 1e-12);
            let u = rotation_matrix(&dec).unwrap();
            let dsig = &obs - &ComplexMatrix::identity(2).scale_re(dec.d0);
            let conj = &(&u * &dsig) * &u.dagger();
            assert!(conj.max_abs_diff(&sigma_z().scale_re(dec.d_norm)) < 1e-10);
        }
    }

    #[test]
    fn deterministic_outcomes_have_zero_error() {
        let e = shot_expectation(&StateVector::zero(1), &[sigma_z()], 777, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.stderr, 0.0);
        let e = shot_expectation(&plus(), &[sigma_x()], 10_000, 2).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn swap_test_state_with_identical_inputs() {
        // ψ1 = ψ2 = |0⟩ → Re(⟨σz⟩) = 1
        let s = StateVector::zero(2).tensor(&plus());
        let s = controlled_register_swap(&s, 2, &[0], &[1]).unwrap();
        let e = shot_expectation(&s, &[sigma_z(), sigma_0(), sigma_x()], 100_000, 3).unwrap();
        assert!((e.estimate - 1.0).abs() <= 3.0 * e.stderr + 1e-12);
    }

    #[test]
    fn estimator_is_consistent_with_exact_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let s = random_state(&mut rng, 3);
            let obs: Vec<ComplexMatrix> = (0..3).map(|_| random_hermitian(&mut rng)).collect();
            let exact = expectation(&s, &obs).unwrap();
            let runs: Vec<ShotEstimate> = (0..100)
                .map(|seed| shot_expectation(&s, &obs, 2000, seed).unwrap())
                .collect();
            let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / 100.0;
            let se = runs.iter().map(|r| r.stderr).sum::<f64>() / 100.0 / 10.0;
            assert!((mean - exact).abs() <= 4.0 * se, "mean {mean} exact {exact} se {se}");
        }
    }

    #[test]
    fn stderr_scales_as_inverse_sqrt_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = random_state(&mut rng, 3);
        let obs = [sigma_x(), sigma_y(), sigma_z()];
        let se: Vec<f64> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&n| shot_expectation(&s, &obs, n, 5).unwrap().stderr)
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            let ideal = 10f64.sqrt();
            assert!(ratio > ideal / 2.0 && ratio < ideal * 2.0, "ratio {ratio}");
        }
    }

    #[test]
    fn factored_estimator_agrees_on_product_states() {
        let a = apply(&StateVector::zero(1), &GateOp::ry(0.7, 0)).unwrap();
        let b = apply(&StateVector::zero(1), &GateOp::rx(1.9, 0)).unwrap();
        let s = a.tensor(&b);
        let obs = [sigma_x(), sigma_y()];
        let exact = expectation(&s, &obs).unwrap();
        let f = shot_expectation_with(&s, &obs, 200_000, 9, Estimator::Factored).unwrap();
        assert!((f.estimate - exact).abs() <= 4.0 * f.stderr);
    }

    #[test]
    fn factored_estimator_is_biased_on_correlated_states() {
        // Bell state: ⟨Z⊗Z⟩ = 1 but the marginal product is ≈ 0.
        let r = 1.0 / 2f64.sqrt();
        let bell = StateVector::from_amplitudes(vec![
            C64::new(r, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(r, 0.0),
        ])
        .unwrap();
        let obs = [sigma_z(), sigma_z()];
        let joint = shot_expectation(&bell, &obs, 10_000, 1).unwrap();
        let fact = shot_expectation_with(&bell, &obs, 10_000, 1, Estimator::Factored).unwrap();
        assert_eq!(joint.estimate, 1.0);
        assert!(fact.estimate.abs() < 0.05);
    }
}
