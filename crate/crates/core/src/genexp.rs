//! The SWAP-test circuit for generalized expectations `⟨ψ1|O|ψ2⟩ / ⟨ψ1|O'|ψ2⟩`.
//!
//! Registers: qubits `[0, n)` hold `ψ1` (system A), `[n, 2n)` hold `ψ2`
//! (system B) and qubit `2n` is the ancilla. After a Hadamard on the
//! ancilla and a register-controlled swap the state is
//!
//! ```text
//! |Ψ2⟩ = (|ψ1⟩|ψ2⟩|0⟩ + |ψ2⟩|ψ1⟩|1⟩) / √2
//! ```
//!
//! and three ordinary expectations on it give both components of the ratio:
//!
//! ```text
//! Re r = ⟨O⊗O'⊗σx⟩ / ⟨O'⊗O'⊗σx⟩,   Im r = ⟨O⊗O'⊗σy⟩ / ⟨O'⊗O'⊗σx⟩
//! ```
//!
//! The denominator equals `|⟨ψ1|O'|ψ2⟩|²`, so it vanishes exactly when the
//! two states are orthogonal with respect to `O'`.

use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg::{sigma_0, sigma_x, sigma_y, sigma_z, ComplexMatrix, C64};
use crate::readout::shot_expectation;
use crate::statevector::{apply_in_place, controlled_register_swap, expectation, GateOp, StateVector};

/// Exact (statevector) or shot-sampled evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementMode {
    #[default]
    Exact,
    Sampled { shots: u64, seed: u64 },
}

impl MeasurementMode {
    pub fn is_exact(&self) -> bool {
        matches!(self, MeasurementMode::Exact)
    }
}

#[derive(Debug, Clone)]
pub struct GenExpRequest {
    pub psi1: StateVector,
    pub psi2: StateVector,
    pub o: Vec<ComplexMatrix>,
    pub o_prime: Vec<ComplexMatrix>,
    pub mode: MeasurementMode,
}

impl GenExpRequest {
    /// Request with `O' = σ0` on every qubit, evaluated exactly.
    pub fn new(psi1: StateVector, psi2: StateVector, o: Vec<ComplexMatrix>) -> Self {
        let n = psi1.n_qubits();
        GenExpRequest {
            psi1,
            psi2,
            o,
            o_prime: vec![sigma_0(); n],
            mode: MeasurementMode::Exact,
        }
    }

    pub fn with_o_prime(mut self, o_prime: Vec<ComplexMatrix>) -> Self {
        self.o_prime = o_prime;
        self
    }

    pub fn with_mode(mut self, mode: MeasurementMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenExpValue {
    pub value: C64,
    /// Standard error per component; zero in exact mode.
    pub stderr: C64,
}

/// Builds `|Ψ2⟩` on `2n + 1` qubits with a Hadamard and a register swap.
pub fn build_swap_test_state(psi1: &StateVector, psi2: &StateVector) -> Result<StateVector> {
    if psi1.n_qubits() != psi2.n_qubits() {
        return Err(Error::Domain(format!(
            "input states have {} and {} qubits",
            psi1.n_qubits(),
            psi2.n_qubits()
        )));
    }
    if !psi1.is_normalized() || !psi2.is_normalized() {
        return Err(Error::Domain("input states must be normalized".into()));
    }
    let n = psi1.n_qubits();
    let ancilla = 2 * n;
    let mut state = psi1.tensor(psi2).tensor(&StateVector::zero(1));
    apply_in_place(&mut state, &GateOp::hadamard(ancilla))?;
    let reg_a: Vec<usize> = (0..n).collect();
    let reg_b: Vec<usize> = (n..2 * n).collect();
    controlled_register_swap(&state, ancilla, &reg_a, &reg_b)
}

fn full_ops(a: &[ComplexMatrix], b: &[ComplexMatrix], ancilla: ComplexMatrix) -> Vec<ComplexMatrix> {
    let mut ops = Vec::with_capacity(a.len() + b.len() + 1);
    ops.extend_from_slice(a);
    ops.extend_from_slice(b);
    ops.push(ancilla);
    ops
}

/// Child seeds for the three independent measurement settings.
fn seed_stream(seed: u64) -> [u64; 3] {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

pub fn generalized_expectation(req: &GenExpRequest) -> Result<GenExpValue> {
    let n = req.psi1.n_qubits();
    if req.o.len() != n || req.o_prime.len() != n {
        return Err(Error::Dimension(format!(
            "need {n} per-qubit operators, got O: {}, O': {}",
            req.o.len(),
            req.o_prime.len()
        )));
    }
    let state = build_swap_test_state(&req.psi1, &req.psi2)?;
    let re_ops = full_ops(&req.o, &req.o_prime, sigma_x());
    let im_ops = full_ops(&req.o, &req.o_prime, sigma_y());
    let den_ops = full_ops(&req.o_prime, &req.o_prime, sigma_x());

    match req.mode {
        MeasurementMode::Exact => {
            let den = expectation(&state, &den_ops)?;
            if den.abs() < 1e-12 {
                return Err(Error::OrthogonalDenominator {
                    magnitude: den.abs(),
                });
            }
            let re = expectation(&state, &re_ops)?;
            let im = expectation(&state, &im_ops)?;
            Ok(GenExpValue {
                value: C64::new(re / den, im / den),
                stderr: C64::new(0.0, 0.0),
            })
        }
        MeasurementMode::Sampled { shots, seed } => {
            let [s_re, s_im, s_den] = seed_stream(seed);
            let den = shot_expectation(&state, &den_ops, shots, s_den)?;
            if den.estimate.abs() < 1e-12 || den.estimate.abs() < 3.0 * den.stderr {
                return Err(Error::OrthogonalDenominator {
                    magnitude: den.estimate.abs(),
                });
            }
            let re = shot_expectation(&state, &re_ops, shots, s_re)?;
            let im = shot_expectation(&state, &im_ops, shots, s_im)?;
            let ratio_err = |num: f64, num_se: f64| {
                let r = num / den.estimate;
                (r, ((num_se / den.estimate).powi(2) + (r * den.stderr / den.estimate).powi(2)).sqrt())
            };
            let (vr, er) = ratio_err(re.estimate, re.stderr);
            let (vi, ei) = ratio_err(im.estimate, im.stderr);
            Ok(GenExpValue {
                value: C64::new(vr, vi),
                stderr: C64::new(er, ei),
            })
        }
    }
}

/// `⟨ψ1|A|ψ2⟩ / ⟨ψ1|O'|ψ2⟩` for a general single-qubit-product operator `A`,
/// measured through its Hermitian and anti-Hermitian parts. Each factor of
/// `A` is split separately, so `A` must be a product of 2×2 factors with at
/// most one non-Hermitian factor.
pub fn generalized_expectation_general(
    psi1: &StateVector,
    psi2: &StateVector,
    a: &[ComplexMatrix],
    o_prime: &[ComplexMatrix],
    mode: MeasurementMode,
) -> Result<GenExpValue> {
    let nh: Vec<usize> = (0..a.len())
        .filter(|&q| !a[q].is_hermitian(1e-10))
        .collect();
    if nh.len() > 1 {
        return Err(Error::Domain(
            "at most one non-Hermitian factor is supported".into(),
        ));
    }
    let Some(&q) = nh.first() else {
        let req = GenExpRequest::new(psi1.clone(), psi2.clone(), a.to_vec())
            .with_o_prime(o_prime.to_vec())
            .with_mode(mode);
        return generalized_expectation(&req);
    };
    let herm = a[q].hermitian_part();
    let anti = (&a[q] - &a[q].dagger()).scale(C64::new(0.0, -0.5));
    let mut ops_h = a.to_vec();
    ops_h[q] = herm;
    let mut ops_a = a.to_vec();
    ops_a[q] = anti;
    let second_mode = match mode {
        MeasurementMode::Exact => mode,
        MeasurementMode::Sampled { shots, seed } => MeasurementMode::Sampled {
            shots,
            seed: seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        },
    };
    let h = generalized_expectation(
        &GenExpRequest::new(psi1.clone(), psi2.clone(), ops_h)
            .with_o_prime(o_prime.to_vec())
            .with_mode(mode),
    )?;
    let k = generalized_expectation(
        &GenExpRequest::new(psi1.clone(), psi2.clone(), ops_a)
            .with_o_prime(o_prime.to_vec())
            .with_mode(second_mode),
    )?;
    let i = C64::new(0.0, 1.0);
    Ok(GenExpValue {
        value: h.value + i * k.value,
        stderr: C64::new(
            (h.stderr.re.powi(2) + k.stderr.im.powi(2)).sqrt(),
            (h.stderr.im.powi(2) + k.stderr.re.powi(2)).sqrt(),
        ),
    })
}

/// Parses an observable description: one line per qubit, either a Pauli
/// name (`I`, `X`, `Y`, `Z`) or four complex entries in row-major order.
/// Entries are written either as four tokens like `1+0.5i` or as eight
/// real numbers `re im re im ...`.
pub fn parse_observables(text: &str) -> Result<Vec<ComplexMatrix>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_observable_line)
        .collect()
}

fn parse_observable_line(line: &str) -> Result<ComplexMatrix> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let parse_f = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number `{t}` in `{line}`")))
    };
    match tokens.as_slice() {
        [name] => match name.to_ascii_uppercase().as_str() {
            "I" => Ok(sigma_0()),
            "X" => Ok(sigma_x()),
            "Y" => Ok(sigma_y()),
            "Z" => Ok(sigma_z()),
            other => Err(Error::Parse(format!("unknown Pauli name `{other}`"))),
        },
        [_, _, _, _] => {
            let entries = tokens
                .iter()
                .map(|t| {
                    C64::from_str(t).map_err(|_| Error::Parse(format!("bad complex `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            ComplexMatrix::from_row_major(entries)
        }
        t if t.len() == 8 => {
            let nums = t.iter().map(|x| parse_f(x)).collect::<Result<Vec<_>>>()?;
            let entries = nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            ComplexMatrix::from_row_major(entries)
        }
        _ => Err(Error::Parse(format!("cannot parse observable line `{line}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ket0() -> StateVector {
        StateVector::zero(1)
    }

    fn ket1() -> StateVector {
        StateVector::basis(1, 1)
    }

    fn plus() -> StateVector {
        let r = 1.0 / 2f64.sqrt();
        StateVector::from_amplitudes(vec![c(r, 0.0), c(r, 0.0)]).unwrap()
    }

    #[test]
    fn swap_test_state_examples() {
        let s = build_swap_test_state(&ket0(), &ket0()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let expected = [r, r, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - c(e, 0.0)).norm() < 1e-15);
        }
        let s = build_swap_test_state(&ket0(), &ket1()).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let e = if i == 0b010 || i == 0b101 { r } else { 0.0 };
            assert!((a - c(e, 0.0)).norm() < 1e-15);
        }
        assert!(build_swap_test_state(&ket0(), &StateVector::zero(2)).is_err());
    }

    #[test]
    fn named_examples() {
        let v = generalized_expectation(&GenExpRequest::new(ket0(), ket0(), vec![sigma_z()])).unwrap();
        assert!((v.value - ONE).norm() < 1e-15);

        let v = generalized_expectation(&GenExpRequest::new(ket0(), plus(), vec![sigma_y()])).unwrap();
        assert!((v.value - c(0.0, -1.0)).norm() < 1e-14);

        let req = GenExpRequest::new(ket0(), ket1(), vec![sigma_x()]).with_o_prime(vec![sigma_x()]);
        let v = generalized_expectation(&req).unwrap();
        assert!((v.value - ONE).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_states_need_another_o_prime() {
        let err = generalized_expectation(&GenExpRequest::new(ket0(), ket1(), vec![sigma_x()]));
        assert!(matches!(err, Err(Error::OrthogonalDenominator { .. })));
    }

    #[test]
    fn sampled_mode_reports_errors() {
        let req = GenExpRequest::new(ket0(), plus(), vec![sigma_y()])
            .with_mode(MeasurementMode::Sampled { shots: 20_000, seed: 4 });
        let v = generalized_expectation(&req).unwrap();
        assert!(v.stderr.re > 0.0 && v.stderr.im > 0.0);
        assert!((v.value.re - 0.0).abs() <= 4.0 * v.stderr.re);
        assert!((v.value.im + 1.0).abs() <= 4.0 * v.stderr.im);
        // same seed, same answer
        assert_eq!(generalized_expectation(&req).unwrap(), v);
    }

    #[test]
    fn general_operator_via_hermitian_parts() {
        // A = σ+ = |0⟩⟨1|: ⟨0|σ+|ψ⟩/⟨0|ψ⟩ = ψ1/ψ0
        let a = ComplexMatrix::from_rows([[ZERO, ONE], [ZERO, ZERO]]);
        let psi = StateVector::normalize_from(vec![c(0.6, 0.2), c(-0.3, 0.7)]).unwrap();
        let v = generalized_expectation_general(&ket0(), &psi, &[a], &[sigma_0()], MeasurementMode::Exact).unwrap();
        let expected = psi.amplitudes()[1] / psi.amplitudes()[0];
        assert!((v.value - expected).norm() < 1e-12);
    }

    #[test]
    fn observable_file_parsing() {
        let ops = parse_observables("X\nz\n# comment\n1 0 0 1\n0 0 1 0 1 0 0 0\n").unwrap();
        assert_eq!(ops.len(), 4);
        assert_eq!(ops[0], sigma_x());
        assert_eq!(ops[1], sigma_z());
        assert_eq!(ops[2], sigma_0());
        assert_eq!(ops[3], sigma_x());
        let ops = parse_observables("0 -1i 1i 0").unwrap();
        assert_eq!(ops[0], sigma_y());
        assert!(parse_observables("Q").is_err());
        assert!(parse_observables("1 2 3").is_err());
    }
}
