//! Exact n-qubit statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis label: for three qubits
//! the amplitude of `|q0 q1 q2⟩` sits at index `4*q0 + 2*q1 + q2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg::{inner, sigma_x, sigma_y, vec_norm, ComplexMatrix, C64, I, ONE, ZERO};

/// Tolerance on the unit norm of states and on gate unitarity.
pub const NORM_TOL: f64 = 1e-10;

/// Upper bound on register size; the engine stays exact up to here.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
    normalized: bool,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n_qubits));
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[index] = ONE;
        StateVector {
            n_qubits,
            amplitudes,
            normalized: true,
        }
    }

    /// Wraps normalized amplitudes. The length must be a power of two and the
    /// norm must be one within [`NORM_TOL`].
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!(
                "state norm is {norm}, expected 1 (use normalize_from for raw vectors)"
            )));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
            normalized: true,
        })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalize_from(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm = vec_norm(&amplitudes);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize a vector of norm {norm}")));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
            normalized: true,
        })
    }

    /// Keeps amplitudes as given and marks the state as unnormalized. Only
    /// nonunitary evolution produces these.
    pub fn unnormalized(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        Ok(StateVector {
            n_qubits,
            amplitudes,
            normalized: false,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amplitudes: amps,
            normalized: self.normalized && other.normalized,
        }
    }

    fn require_normalized(&self) -> Result<()> {
        if !self.normalized || (self.norm() - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain("operation requires a normalized state".into()));
        }
        Ok(())
    }

    /// Bit mask of qubit `q` in a basis index.
    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Applies an arbitrary (not necessarily unitary) matrix to `targets`.
    fn apply_matrix(&mut self, matrix: &ComplexMatrix, targets: &[usize]) {
        let k = targets.len();
        let masks: Vec<usize> = targets.iter().map(|&q| self.mask(q)).collect();
        let all: usize = masks.iter().sum();
        let sub = 1 << k;
        // basis offset for each local index of the gate (first target = MSB)
        let offsets: Vec<usize> = (0..sub)
            .map(|local| {
                (0..k)
                    .filter(|&j| local & (1 << (k - 1 - j)) != 0)
                    .map(|j| masks[j])
                    .sum()
            })
            .collect();
        let mut buf = vec![ZERO; sub];
        for base in 0..self.amplitudes.len() {
            if base & all != 0 {
                continue;
            }
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = self.amplitudes[base + off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, b) in buf.iter().enumerate() {
                    acc += matrix[(r, c)] * b;
                }
                self.amplitudes[base + off] = acc;
            }
        }
    }

    /// Applies one 2×2 factor per qubit (a tensor-product operator).
    fn apply_local_ops(&mut self, ops: &[ComplexMatrix]) {
        for (q, op) in ops.iter().enumerate() {
            if *op != ComplexMatrix::identity(2) {
                self.apply_matrix(op, &[q]);
            }
        }
    }

    /// Removes qubit `q`, keeping the amplitudes where it equals `outcome`.
    /// The result is not renormalized.
    fn slice_out(&self, q: usize, outcome: u8) -> Vec<C64> {
        let mask = self.mask(q);
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & mask) != 0) == (outcome == 1))
            .map(|(_, a)| *a)
            .collect()
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "{len} amplitudes is not 2^n for n >= 1"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::Dimension(format!("{n} qubits exceeds the {MAX_QUBITS}-qubit limit")));
    }
    Ok(n)
}

/// A unitary acting on an ordered list of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    matrix: ComplexMatrix,
    targets: Vec<usize>,
}

impl GateOp {
    pub fn new(matrix: ComplexMatrix, targets: Vec<usize>) -> Result<Self> {
        if targets.is_empty() || matrix.dim() != 1 << targets.len() {
            return Err(Error::Dimension(format!(
                "a {}x{} gate cannot act on {} qubit(s)",
                matrix.dim(),
                matrix.dim(),
                targets.len()
            )));
        }
        if !matrix.is_unitary(NORM_TOL) {
            return Err(Error::Domain("gate matrix is not unitary".into()));
        }
        Ok(GateOp { matrix, targets })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn inverse(&self) -> GateOp {
        GateOp {
            matrix: self.matrix.dagger(),
            targets: self.targets.clone(),
        }
    }

    pub fn hadamard(q: usize) -> Self {
        let r = C64::new(1.0 / 2f64.sqrt(), 0.0);
        Self::single(ComplexMatrix::from_rows([[r, r], [r, -r]]), q)
    }

    pub fn pauli_x(q: usize) -> Self {
        Self::single(sigma_x(), q)
    }

    /// `X(θ) = exp(-i θ/2 σx)`.
    pub fn rx(theta: f64, q: usize) -> Self {
        Self::single(rotation(&sigma_x(), theta), q)
    }

    /// `Y(θ) = exp(-i θ/2 σy)`.
    pub fn ry(theta: f64, q: usize) -> Self {
        Self::single(rotation(&sigma_y(), theta), q)
    }

    /// Controlled-SWAP on `(control, a, b)`.
    pub fn fredkin(control: usize, a: usize, b: usize) -> Self {
        let mut m = ComplexMatrix::identity(8);
        m[(5, 5)] = ZERO;
        m[(6, 6)] = ZERO;
        m[(5, 6)] = ONE;
        m[(6, 5)] = ONE;
        GateOp {
            matrix: m,
            targets: vec![control, a, b],
        }
    }

    pub(crate) fn single(matrix: ComplexMatrix, q: usize) -> Self {
        GateOp {
            matrix,
            targets: vec![q],
        }
    }
}

/// `exp(-i θ/2 P)` for an involutory Pauli matrix `P`.
pub fn rotation(pauli: &ComplexMatrix, theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    &ComplexMatrix::identity(2).scale_re(c) + &pauli.scale(-I * s)
}

fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    for (i, &q) in targets.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::Index(format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        if targets[..i].contains(&q) {
            return Err(Error::Index(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Applies `gate` and returns the new state.
pub fn apply(state: &StateVector, gate: &GateOp) -> Result<StateVector> {
    let mut out = state.clone();
    apply_in_place(&mut out, gate)?;
    Ok(out)
}

pub fn apply_in_place(state: &mut StateVector, gate: &GateOp) -> Result<()> {
    check_targets(state.n_qubits, &gate.targets)?;
    state.apply_matrix(&gate.matrix, &gate.targets);
    Ok(())
}

/// Exchanges registers `reg_a` and `reg_b` qubit by qubit on the branch
/// where `control` is 1.
pub fn controlled_register_swap(
    state: &StateVector,
    control: usize,
    reg_a: &[usize],
    reg_b: &[usize],
) -> Result<StateVector> {
    if reg_a.len() != reg_b.len() {
        return Err(Error::Index("registers must have equal length".into()));
    }
    let mut all = vec![control];
    all.extend_from_slice(reg_a);
    all.extend_from_slice(reg_b);
    check_targets(state.n_qubits, &all)?;

    let cmask = state.mask(control);
    let pairs: Vec<(usize, usize)> = reg_a
        .iter()
        .zip(reg_b)
        .map(|(&a, &b)| (state.mask(a), state.mask(b)))
        .collect();
    let mut out = state.clone();
    for (i, amp) in state.amplitudes.iter().enumerate() {
        if i & cmask == 0 {
            continue;
        }
        let mut j = i;
        for &(ma, mb) in &pairs {
            let (ba, bb) = (i & ma != 0, i & mb != 0);
            if ba != bb {
                j ^= ma | mb;
            }
        }
        out.amplitudes[j] = *amp;
    }
    Ok(out)
}

/// `⟨Ψ|⊗ᵢ Oᵢ|Ψ⟩` for Hermitian single-qubit factors.
pub fn expectation(state: &StateVector, per_qubit_ops: &[ComplexMatrix]) -> Result<f64> {
    state.require_normalized()?;
    if per_qubit_ops.len() != state.n_qubits {
        return Err(Error::Dimension(format!(
            "{} operators for {} qubits",
            per_qubit_ops.len(),
            state.n_qubits
        )));
    }
    let mut scale = 1.0;
    for op in per_qubit_ops {
        if op.dim() != 2 {
            return Err(Error::Dimension("per-qubit operators must be 2x2".into()));
        }
        if !op.is_hermitian(NORM_TOL) {
            return Err(Error::Domain("expectation of a non-Hermitian factor".into()));
        }
        scale *= op.norm().max(1.0);
    }
    let value = expectation_complex(state, per_qubit_ops);
    if value.im.abs() > NORM_TOL * scale {
        return Err(Error::Numerical(format!(
            "expectation has imaginary residue {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// `⟨Ψ|⊗ᵢ Oᵢ|Ψ⟩` without hermiticity checks.
pub fn expectation_complex(state: &StateVector, per_qubit_ops: &[ComplexMatrix]) -> C64 {
    let mut applied = state.clone();
    applied.apply_local_ops(per_qubit_ops);
    state.inner(&applied)
}

/// Shot record: joint bitstring counts plus per-qubit marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts {
    pub n_qubits: usize,
    pub shots: u64,
    pub seed: u64,
    /// Basis index → number of occurrences.
    pub joint: BTreeMap<usize, u64>,
    /// Per qubit `(N0, N1)`.
    pub marginals: Vec<(u64, u64)>,
}

impl Counts {
    pub fn bitstring(&self, index: usize) -> String {
        (0..self.n_qubits)
            .map(|q| {
                if index & (1 << (self.n_qubits - 1 - q)) != 0 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Count-record text: `shots <N> seed <s>` then `<bitstring> <count>` lines.
    pub fn to_record(&self) -> String {
        let mut out = format!("shots {} seed {}\n", self.shots, self.seed);
        for (idx, n) in &self.joint {
            let _ = writeln!(out, "{} {}", self.bitstring(*idx), n);
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Counts> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty count record".into()))?
            .split_whitespace()
            .collect();
        let (shots, seed) = match header.as_slice() {
            ["shots", n, "seed", s] => (
                n.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?,
                s.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?,
            ),
            _ => return Err(Error::Parse("expected header `shots <N> seed <s>`".into())),
        };
        let mut joint = BTreeMap::new();
        let mut n_qubits = 0;
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [bits, count] = parts.as_slice() else {
                return Err(Error::Parse(format!("bad count line `{line}`")));
            };
            n_qubits = bits.len();
            let idx = usize::from_str_radix(bits, 2).map_err(|e| Error::Parse(e.to_string()))?;
            let count = count.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?;
            joint.insert(idx, count);
        }
        if joint.values().sum::<u64>() != shots {
            return Err(Error::Parse("counts do not sum to the shot total".into()));
        }
        let marginals = marginals_from_joint(n_qubits, &joint);
        Ok(Counts {
            n_qubits,
            shots,
            seed,
            joint,
            marginals,
        })
    }
}

fn marginals_from_joint(n_qubits: usize, joint: &BTreeMap<usize, u64>) -> Vec<(u64, u64)> {
    (0..n_qubits)
        .map(|q| {
            let mask = 1 << (n_qubits - 1 - q);
            joint.iter().fold((0, 0), |(n0, n1), (&idx, &c)| {
                if idx & mask != 0 {
                    (n0, n1 + c)
                } else {
                    (n0 + c, n1)
                }
            })
        })
        .collect()
}

/// Draws `shots` computational-basis outcomes i.i.d. from `|amplitude|²`.
/// Deterministic for a given seed (ChaCha20 stream).
pub fn sample(state: &StateVector, shots: u64, seed: u64) -> Result<Counts> {
    Ok(sample_with_outcomes(state, shots, seed)?.0)
}

/// Like [`sample`] but also returns the ordered list of outcomes.
pub fn sample_with_outcomes(
    state: &StateVector,
    shots: u64,
    seed: u64,
) -> Result<(Counts, Vec<usize>)> {
    if shots == 0 {
        return Err(Error::Domain("shots must be positive".into()));
    }
    state.require_normalized()?;
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for p in state.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut joint = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *joint.entry(idx).or_insert(0) += 1;
        outcomes.push(idx);
    }
    let marginals = marginals_from_joint(state.n_qubits, &joint);
    Ok((
        Counts {
            n_qubits: state.n_qubits,
            shots,
            seed,
            joint,
            marginals,
        },
        outcomes,
    ))
}

/// Projects `qubit` onto `outcome`; returns the renormalized state (same
/// register size) and the outcome probability.
pub fn postselect(state: &StateVector, qubit: usize, outcome: u8) -> Result<(StateVector, f64)> {
    let (kept, p) = project(state, qubit, outcome)?;
    let mask = state.mask(qubit);
    let mut amps = vec![ZERO; state.dim()];
    let mut it = kept.into_iter();
    for (i, a) in amps.iter_mut().enumerate() {
        if ((i & mask) != 0) == (outcome == 1) {
            *a = it.next().unwrap();
        }
    }
    Ok((StateVector::normalize_from(amps)?, p))
}

/// Projects `qubit` onto `outcome` and discards it, returning the
/// renormalized state of the remaining qubits and the outcome probability.
pub fn postselect_discard(
    state: &StateVector,
    qubit: usize,
    outcome: u8,
) -> Result<(StateVector, f64)> {
    if state.n_qubits < 2 {
        return Err(Error::Index("cannot discard the only qubit".into()));
    }
    let (kept, p) = project(state, qubit, outcome)?;
    Ok((StateVector::normalize_from(kept)?, p))
}

fn project(state: &StateVector, qubit: usize, outcome: u8) -> Result<(Vec<C64>, f64)> {
    check_targets(state.n_qubits, &[qubit])?;
    if outcome > 1 {
        return Err(Error::Domain(format!("outcome must be 0 or 1, got {outcome}")));
    }
    state.require_normalized()?;
    let kept = state.slice_out(qubit, outcome);
    let p = kept.iter().map(|a| a.norm_sqr()).sum::<f64>();
    if p < 1e-14 {
        return Err(Error::PostselectionImpossible { probability: p });
    }
    Ok((kept, p.min(1.0)))
}

/// State file: `nqubits <n>` followed by `2^n` lines `<re> <im>`.
pub fn write_state(state: &StateVector) -> String {
    let mut out = format!("nqubits {}\n", state.n_qubits);
    for a in &state.amplitudes {
        let _ = writeln!(out, "{:.16e} {:.16e}", a.re, a.im);
    }
    out
}

pub fn read_state(text: &str) -> Result<StateVector> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty state file".into()))?;
    let n: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["nqubits", n] => n
            .parse()
            .map_err(|_| Error::Parse(format!("bad qubit count `{n}`")))?,
        _ => return Err(Error::Parse("state file must start with `nqubits <n>`".into())),
    };
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Parse(format!("unsupported qubit count {n}")));
    }
    let mut amps = Vec::with_capacity(1 << n);
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [re, im] = parts.as_slice() else {
            return Err(Error::Parse(format!("bad amplitude line `{line}`")));
        };
        let re: f64 = re.parse().map_err(|_| Error::Parse(format!("bad number `{re}`")))?;
        let im: f64 = im.parse().map_err(|_| Error::Parse(format!("bad number `{im}`")))?;
        amps.push(C64::new(re, im));
    }
    if amps.len() != 1 << n {
        return Err(Error::Parse(format!(
            "expected {} amplitudes, found {}",
            1usize << n,
            amps.len()
        )));
    }
    StateVector::from_amplitudes(amps)
}
