//! Dense complex matrices of small dimension.
//!
//! Everything in this crate that acts on a Hilbert space of at most a few
//! qubits goes through [`ComplexMatrix`]: Bloch Hamiltonians, gate matrices,
//! dilation blocks and propagators. The decompositions here are written for
//! dimensions up to 8 and make no attempt at cache blocking.
//!
//! Eigenpairs returned by [`eig`] are ordered by descending imaginary part of
//! the eigenvalue (ties, within the configured tolerance, by descending real
//! part), so index 0 is always the mode that dominates a long nonunitary
//! evolution under `exp(-iHt)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerances used by the decompositions. All of them are relative to the
/// Frobenius norm of the input (with a floor of 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Eigenvalues closer than this (relative) are flagged as degenerate.
    pub degeneracy: f64,
    /// Imaginary parts closer than this (relative) count as a tie when ordering.
    pub ordering_tie: f64,
    /// Hermiticity tolerance for `sqrtm_pd` and friends.
    pub hermitian: f64,
    /// Smallest admissible eigenvalue for positive definiteness.
    pub positive: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            degeneracy: 1e-9,
            ordering_tie: 1e-12,
            hermitian: 1e-10,
            positive: 1e-10,
        }
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        ComplexMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries. Fails unless `entries.len()`
    /// is a positive perfect square.
    pub fn from_row_major(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::Dimension(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix { dim, data: entries })
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ComplexMatrix { dim: N, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.dim)
            .map(|c| (0..self.dim).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Scale of the matrix used for hybrid tolerances: `max(1, ‖m‖_F)`.
    fn tol_scale(&self) -> f64 {
        self.norm().max(1.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self - &self.dagger()).norm() <= tol * self.tol_scale()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = &self.dagger() * self;
        prod.max_abs_diff(&Self::identity(self.dim)) <= tol
    }

    pub fn is_positive_definite(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        match eigh(&self.hermitian_part()) {
            Ok(e) => e.values[0] > tol * self.tol_scale(),
            Err(_) => false,
        }
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.dagger()).scale_re(0.5)
    }

    /// Coefficients `(c0, cx, cy, cz)` of a 2×2 matrix in the Pauli basis,
    /// `m = c0 σ0 + cx σx + cy σy + cz σz`.
    pub fn pauli_components(&self) -> [C64; 4] {
        assert_eq!(self.dim, 2, "Pauli components need a 2x2 matrix");
        let half = |m: ComplexMatrix| (&m * self).trace() * 0.5;
        [
            half(sigma_0()),
            half(sigma_x()),
            half(sigma_y()),
            half(sigma_z()),
        ]
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| format!("{:.6}", self[(r, c)]))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

pub fn sigma_0() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]])
}

/// Vector helpers shared across modules.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = vec_norm(v);
    v.iter().map(|x| x / n).collect()
}

// ---------------------------------------------------------------------------
// Eigendecomposition of general matrices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// Right eigenvector, unit norm.
    pub vector: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub pairs: Vec<EigenPair>,
    /// Set when two eigenvalues coincide within the degeneracy tolerance;
    /// for a non-Hermitian input this usually means an exceptional point.
    pub degenerate: bool,
}

impl Eigensystem {
    pub fn values(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// Index of the eigenvalue closest to `target`.
    pub fn closest(&self, target: C64) -> usize {
        let mut best = 0;
        for (i, p) in self.pairs.iter().enumerate() {
            if (p.value - target).norm() < (self.pairs[best].value - target).norm() {
                best = i;
            }
        }
        best
    }
}

/// Right eigenpairs of a square matrix.
pub fn eig(m: &ComplexMatrix) -> Result<Eigensystem> {
    eig_with(m, &Tolerances::default())
}

pub fn eig_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<Eigensystem> {
    if !m.is_finite() {
        return Err(Error::Numerical("eig: non-finite matrix entries".into()));
    }
    let mut pairs = match m.dim() {
        1 => vec![EigenPair {
            value: m[(0, 0)],
            vector: vec![ONE],
        }],
        2 => eig_2x2(m),
        _ => eig_schur(m)?,
    };

    let scale = m.tol_scale();
    order_pairs(&mut pairs, tol.ordering_tie * scale);

    let mut degenerate = false;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if (pairs[i].value - pairs[j].value).norm() < tol.degeneracy * scale {
                degenerate = true;
            }
        }
    }
    Ok(Eigensystem { pairs, degenerate })
}

/// Insertion sort with a tolerance-aware comparator; `sort_by` needs a
/// total order, which a tolerance comparison is not.
fn order_pairs(pairs: &mut [EigenPair], tie: f64) {
    let before = |a: &EigenPair, b: &EigenPair| {
        let dim = a.value.im - b.value.im;
        if dim.abs() > tie {
            dim > 0.0
        } else {
            a.value.re > b.value.re
        }
    };
    for i in 1..pairs.len() {
        let mut j = i;
        while j > 0 && before(&pairs[j], &pairs[j - 1]) {
            pairs.swap(j, j - 1);
            j -= 1;
        }
    }
}

/// The two eigenvalues of a 2×2 matrix labelled by branch:
/// `(tr/2 + s, tr/2 - s)` with `s` the principal square root of the
/// discriminant (`Re s ≥ 0`). For `H = d·σ` this is `(+√(d·d), -√(d·d))`.
pub fn eigenvalues_2x2(m: &ComplexMatrix) -> (C64, C64) {
    assert_eq!(m.dim(), 2);
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let s = (half_diff * half_diff + b * c).sqrt();
    (half_tr + s, half_tr - s)
}

fn eig_2x2(m: &ComplexMatrix) -> Vec<EigenPair> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let (lp, lm) = eigenvalues_2x2(m);
    [lp, lm]
        .into_iter()
        .map(|lambda| {
            // Two candidate null vectors of (m - λ); keep the better conditioned one.
            let v1 = [b, lambda - a];
            let v2 = [lambda - d, c];
            let v = if vec_norm(&v1) >= vec_norm(&v2) { v1 } else { v2 };
            let vector = if vec_norm(&v) == 0.0 {
                // m is a multiple of the identity
                if lambda == lp {
                    vec![ONE, ZERO]
                } else {
                    vec![ZERO, ONE]
                }
            } else {
                normalized(&v)
            };
            EigenPair {
                value: lambda,
                vector,
            }
        })
        .collect()
}

/// Givens rotation `[[c, s], [-s*, c]]` mapping `(a, b)` onto `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, ZERO);
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

/// Complex Schur decomposition `m = Q T Q†` with `T` upper triangular.
pub fn schur(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = m.dim();
    let mut h = m.clone();
    let mut q = ComplexMatrix::identity(n);

    // Householder reduction to upper Hessenberg form.
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|r| h[(r, k)]).collect();
        let xnorm = vec_norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            ONE
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vn = vec_norm(&v);
        let v: Vec<C64> = v.iter().map(|z| z / vn).collect();
        // h <- P h, P = I - 2 v v†, acting on rows k+1..n
        for c in 0..n {
            let dot: C64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, c)]).sum();
            for i in 0..v.len() {
                h[(k + 1 + i, c)] -= v[i] * dot * 2.0;
            }
        }
        // h <- h P, q <- q P
        for mat in [&mut h, &mut q] {
            for r in 0..n {
                let dot: C64 = (0..v.len()).map(|i| mat[(r, k + 1 + i)] * v[i]).sum();
                for i in 0..v.len() {
                    mat[(r, k + 1 + i)] -= dot * v[i].conj() * 2.0;
                }
            }
        }
    }

    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let max_iter = 100 * n;
    while hi > 0 {
        // Find the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let floor = if diag == 0.0 { m.norm() } else { diag };
            if sub <= eps * floor {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::Numerical(format!(
                "Schur iteration did not converge for a {n}x{n} matrix"
            )));
        }

        // Wilkinson shift from the trailing 2x2 block; exceptional shift occasionally.
        let mu = if iter.is_multiple_of(11) {
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm(), 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half_tr = (a + d) * 0.5;
            let s = (((a - d) * 0.5).powi(2) + b * c).sqrt();
            let (l1, l2) = (half_tr + s, half_tr - s);
            if (l1 - d).norm() < (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };

        for i in lo..=hi {
            h[(i, i)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
            for col in i..n {
                let (x, y) = (h[(i, col)], h[(i + 1, col)]);
                h[(i, col)] = x * c + s * y;
                h[(i + 1, col)] = -s.conj() * x + y * c;
            }
            rots.push((i, c, s));
        }
        for &(i, c, s) in &rots {
            let top = (i + 2).min(hi);
            for r in 0..=top {
                let (x, y) = (h[(r, i)], h[(r, i + 1)]);
                h[(r, i)] = x * c + y * s.conj();
                h[(r, i + 1)] = -x * s + y * c;
            }
            for r in 0..n {
                let (x, y) = (q[(r, i)], q[(r, i + 1)]);
                q[(r, i)] = x * c + y * s.conj();
                q[(r, i + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += mu;
        }
    }
    // Clean the strictly lower part left by rounding.
    for r in 1..n {
        for c in 0..r {
            h[(r, c)] = ZERO;
        }
    }
    Ok((h, q))
}

fn eig_schur(m: &ComplexMatrix) -> Result<Vec<EigenPair>> {
    let n = m.dim();
    let (t, q) = schur(m)?;
    let small = f64::EPSILON * m.tol_scale();
    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![ZERO; n];
        y[k] = ONE;
        for j in (0..k).rev() {
            let acc: C64 = (j + 1..=k).map(|l| t[(j, l)] * y[l]).sum();
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            y[j] = -acc / denom;
        }
        let v = q.mul_vec(&y);
        pairs.push(EigenPair {
            value: lambda,
            vector: normalized(&v),
        });
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending real eigenvalues.
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.vectors;
        let n = v.dim();
        let mut out = ComplexMatrix::zeros(n);
        for (k, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += v[(r, k)] * v[(c, k)].conj() * fl;
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix. Only the upper triangle's
/// Hermitian part is meaningful; callers pass `m.hermitian_part()` when
/// unsure.
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.norm();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale || off == 0.0 {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
            let values = idx.iter().map(|&i| a[(i, i)].re).collect();
            let mut vectors = ComplexMatrix::zeros(n);
            for (new, &old) in idx.iter().enumerate() {
                for r in 0..n {
                    vectors[(r, new)] = v[(r, old)];
                }
            }
            return Ok(HermitianEigen { values, vectors });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = D J with D = diag(1, conj(phase)) on (p, q); columns p, q of G:
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;
                // a <- a G
                for row in 0..n {
                    let (x, y) = (a[(row, p)], a[(row, q)]);
                    a[(row, p)] = x * g_pp + y * g_qp;
                    a[(row, q)] = x * g_pq + y * g_qq;
                }
                // a <- G† a
                for col in 0..n {
                    let (x, y) = (a[(p, col)], a[(q, col)]);
                    a[(p, col)] = g_pp.conj() * x + g_qp.conj() * y;
                    a[(q, col)] = g_pq.conj() * x + g_qq.conj() * y;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for row in 0..n {
                    let (x, y) = (v[(row, p)], v[(row, q)]);
                    v[(row, p)] = x * g_pp + y * g_qp;
                    v[(row, q)] = x * g_pq + y * g_qq;
                }
            }
        }
    }
    Err(Error::Numerical("Jacobi sweeps did not converge".into()))
}

/// Principal square root of a Hermitian positive-definite matrix.
pub fn sqrtm_pd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    sqrtm_pd_with(m, &Tolerances::default())
}

pub fn sqrtm_pd_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let e = checked_pd_eigen(m, tol)?;
    Ok(e.apply_fn(f64::sqrt))
}

/// Eigendecomposition of `m` after checking it is Hermitian positive definite.
pub fn checked_pd_eigen(m: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    let scale = m.tol_scale();
    if (m - &m.dagger()).norm() > tol.hermitian * scale {
        let e = eigh(&m.hermitian_part())?;
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: e.values[0],
        });
    }
    let e = eigh(&m.hermitian_part())?;
    if e.values[0] <= tol.positive * scale {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: e.values[0],
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Linear solves and the matrix exponential
// ---------------------------------------------------------------------------

/// Solves `a x = b` for a matrix right-hand side by LU with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim();
    assert_eq!(n, b.dim());
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm()))
            .unwrap();
        if lu[(piv, k)].norm() == 0.0 {
            return Err(Error::Numerical("singular matrix in solve".into()));
        }
        if piv != k {
            for c in 0..n {
                let t = lu[(k, c)];
                lu[(k, c)] = lu[(piv, c)];
                lu[(piv, c)] = t;
                let t = x[(k, c)];
                x[(k, c)] = x[(piv, c)];
                x[(piv, c)] = t;
            }
        }
        for r in k + 1..n {
            let f = lu[(r, k)] / lu[(k, k)];
            if f == ZERO {
                continue;
            }
            for c in k..n {
                let v = lu[(k, c)];
                lu[(r, c)] -= f * v;
            }
            for c in 0..n {
                let v = x[(k, c)];
                x[(r, c)] -= f * v;
            }
        }
    }
    for r in (0..n).rev() {
        for c in 0..n {
            let mut acc = x[(r, c)];
            for k in r + 1..n {
                acc -= lu[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / lu[(r, r)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(a, &ComplexMatrix::identity(a.dim()))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3 to 13 (Higham 2005).
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.dim();
    let norm = m.norm_1();
    if !norm.is_finite() {
        return Err(Error::Numerical(format!(
            "expm: matrix norm {norm} is not finite"
        )));
    }
    let id = ComplexMatrix::identity(n);
    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return finish_pade(&pade_low(m, coeffs, &id), norm);
        }
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if s > 1000 {
        return Err(Error::Numerical(format!(
            "expm: norm {norm:.3e} is too large to exponentiate"
        )));
    }
    let a = m.scale_re(0.5f64.powi(s));
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| {
        let mut out = a6.scale_re(c6);
        out = &out + &a4.scale_re(c4);
        out = &out + &a2.scale_re(c2);
        &out + &id.scale_re(c0)
    };
    let u_inner = lin(b[13], b[11], b[9], 0.0);
    let u_tail = lin(b[7], b[5], b[3], b[1]);
    let u = &a * &(&(&a6 * &u_inner) + &u_tail);
    let v_inner = lin(b[12], b[10], b[8], 0.0);
    let v_tail = lin(b[6], b[4], b[2], b[0]);
    let v = &(&a6 * &v_inner) + &v_tail;
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    finish_pade(&Ok(r), norm)
}

fn pade_low(a: &ComplexMatrix, b: &[f64], id: &ComplexMatrix) -> Result<ComplexMatrix> {
    let a2 = a * a;
    let mut pow = id.clone();
    let mut u_acc = ComplexMatrix::zeros(a.dim());
    let mut v_acc = ComplexMatrix::zeros(a.dim());
    for j in 0..b.len() / 2 {
        v_acc = &v_acc + &pow.scale_re(b[2 * j]);
        u_acc = &u_acc + &pow.scale_re(b[2 * j + 1]);
        pow = &pow * &a2;
    }
    let u = a * &u_acc;
    solve(&(&v_acc - &u), &(&v_acc + &u))
}

fn finish_pade(r: &Result<ComplexMatrix>, norm: f64) -> Result<ComplexMatrix> {
    match r {
        Ok(r) if r.is_finite() => Ok(r.clone()),
        Ok(_) => Err(Error::Numerical(format!(
            "expm overflow for matrix of norm {norm:.3e}"
        ))),
        Err(e) => Err(e.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ComplexMatrix {
        let data = (0..n * n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
            .collect();
        ComplexMatrix::from_row_major(data).unwrap()
    }

    /// Taylor series summed until the term norm drops below 1e-16 relative.
    fn taylor_expm(m: &ComplexMatrix) -> ComplexMatrix {
        let mut term = ComplexMatrix::identity(m.dim());
        let mut sum = term.clone();
        for k in 1..200 {
            term = (&term * m).scale_re(1.0 / k as f64);
            sum = &sum + &term;
            if term.norm() < 1e-16 * sum.norm() {
                break;
            }
        }
        sum
    }

    /// Closed form for 2×2 via Cayley–Hamilton.
    fn expm_2x2_closed(m: &ComplexMatrix) -> ComplexMatrix {
        let half_tr = m.trace() * 0.5;
        let shifted = m - &ComplexMatrix::identity(2).scale(half_tr);
        let s = ((shifted[(0, 0)] * shifted[(0, 0)]) + shifted[(0, 1)] * shifted[(1, 0)]).sqrt();
        let sinhc = if s.norm() < 1e-8 { ONE + s * s / 6.0 } else { s.sinh() / s };
        let out = &ComplexMatrix::identity(2).scale(s.cosh()) + &shifted.scale(sinhc);
        out.scale(half_tr.exp())
    }

    #[test]
    fn eig_of_paulis() {
        let e = eig(&sigma_z()).unwrap();
        // equal imaginary parts: ordered by descending real part
        assert!((e.pairs[0].value - ONE).norm() < 1e-15);
        assert!((e.pairs[1].value + ONE).norm() < 1e-15);
        assert!((e.pairs[0].vector[0].norm() - 1.0).abs() < 1e-15);

        let e = eig(&sigma_x()).unwrap();
        assert!((e.pairs[0].value - ONE).norm() < 1e-15);
        let v = &e.pairs[0].vector;
        let r = 1.0 / 2f64.sqrt();
        assert!(((v[0] / v[0].norm()).norm() - 1.0).abs() < 1e-15);
        assert!((v[0].norm() - r).abs() < 1e-15 && (v[1] - v[0]).norm() < 1e-15);
        let w = &e.pairs[1].vector;
        assert!((w[1] + w[0]).norm() < 1e-15);
    }

    #[test]
    fn eig_of_ssh_matrix_matches_hand_expansion() {
        // H(k=π/2), t1 = 0.2, t2 = 1, δ = 0.5: off-diagonals t1 - δ - i, t1 + δ + i
        let h = ComplexMatrix::from_rows([[ZERO, c(-0.3, -1.0)], [c(0.7, 1.0), ZERO]]);
        let expected = c(0.79, -1.0).sqrt();
        let e = eig(&h).unwrap();
        let vals = e.values();
        assert!(vals.iter().any(|v| (v - expected).norm() < 1e-12));
        assert!(vals.iter().any(|v| (v + expected).norm() < 1e-12));
        assert!(vals[0].im >= vals[1].im);
    }

    #[test]
    fn eig_residuals_random_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            for _ in 0..20 {
                let m = random_matrix(&mut rng, n, 2.0);
                let e = eig(&m).unwrap();
                assert_eq!(e.pairs.len(), n);
                for p in &e.pairs {
                    let mv = m.mul_vec(&p.vector);
                    let res: Vec<C64> = mv.iter().zip(&p.vector).map(|(a, b)| a - p.value * b).collect();
                    assert!(vec_norm(&res) <= 1e-12 * m.norm(), "n={n} residual {}", vec_norm(&res));
                    assert!((vec_norm(&p.vector) - 1.0).abs() < 1e-12);
                }
                for w in e.pairs.windows(2) {
                    assert!(w[0].value.im >= w[1].value.im - 1e-12 * m.norm());
                }
            }
        }
    }

    #[test]
    fn eig_flags_degeneracy() {
        // Jordan block: exceptional point
        let m = ComplexMatrix::from_rows([[ZERO, ONE], [ZERO, ZERO]]);
        assert!(eig(&m).unwrap().degenerate);
        assert!(!eig(&sigma_x()).unwrap().degenerate);
    }

    #[test]
    fn eig_ordering_is_stable_for_real_spectra() {
        // Real spectrum with rounding noise in the imaginary parts: ties go by real part.
        let m = ComplexMatrix::from_rows([[ZERO, c(1.1, 1e-17)], [c(3.0, -1e-17), ZERO]]);
        let e = eig(&m).unwrap();
        assert!(e.pairs[0].value.re > 0.0);
    }

    #[test]
    fn expm_identities() {
        let z = ComplexMatrix::zeros(3);
        assert!(expm(&z).unwrap().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);

        let m = sigma_x().scale(c(0.0, -PI / 2.0));
        let expected = sigma_x().scale(-I);
        assert!(expm(&m).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 4] {
            for _ in 0..50 {
                let m = random_matrix(&mut rng, n, 1.0);
                let e = expm(&m).unwrap();
                let t = taylor_expm(&m);
                assert!((&e - &t).norm() <= 1e-13 * t.norm());
            }
        }
    }

    #[test]
    fn expm_matches_closed_form_for_large_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let scale = rng.random_range(0.1..25.0);
            // anti-Hermitian plus small Hermitian part keeps e^m representable
            let a = random_matrix(&mut rng, 2, scale);
            let m = (&a - &a.dagger()).scale_re(0.5);
            let h = random_matrix(&mut rng, 2, 1.0).hermitian_part();
            let m = &m + &h;
            let e = expm(&m).unwrap();
            let oracle = expm_2x2_closed(&m);
            assert!((&e - &oracle).norm() <= 1e-12 * oracle.norm(), "norm {}", m.norm());
        }
    }

    #[test]
    fn expm_inverse_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 4, 8] {
            for _ in 0..30 {
                let m = random_matrix(&mut rng, n, 10.0 / (n as f64 * 2f64.sqrt()));
                let prod = &expm(&m).unwrap() * &expm(&-&m).unwrap();
                assert!(prod.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
                let h = m.hermitian_part();
                let u = expm(&h.scale(-I)).unwrap();
                assert!(u.is_unitary(1e-10));
            }
        }
    }

    #[test]
    fn expm_reports_overflow() {
        let m = ComplexMatrix::identity(2).scale_re(1e6);
        match expm(&m) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("norm")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn sqrtm_basic_cases() {
        let id = ComplexMatrix::identity(2);
        assert!(sqrtm_pd(&id).unwrap().max_abs_diff(&id) < 1e-15);
        let d = ComplexMatrix::from_diagonal(&[c(4.0, 0.0), c(9.0, 0.0)]);
        let s = sqrtm_pd(&d).unwrap();
        let expected = ComplexMatrix::from_diagonal(&[c(2.0, 0.0), c(3.0, 0.0)]);
        assert!(s.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn sqrtm_random_pd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = random_matrix(&mut rng, 2, 2.0);
            let m = &(&a.dagger() * &a) + &ComplexMatrix::identity(2);
            let s = sqrtm_pd(&m).unwrap();
            assert!((&(&s * &s) - &m).norm() <= 1e-10 * m.norm());
            assert!(s.is_hermitian(1e-10));
            assert!(s.is_positive_definite(1e-10));
        }
    }

    #[test]
    fn sqrtm_rejects_indefinite_and_non_hermitian() {
        let m = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(-2.0, 0.0)]);
        match sqrtm_pd(&m) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 2.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        let nh = ComplexMatrix::from_rows([[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(sqrtm_pd(&nh), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn eigh_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 4, 8] {
            let h = random_matrix(&mut rng, n, 3.0).hermitian_part();
            let e = eigh(&h).unwrap();
            assert!(e.apply_fn(|x| x).max_abs_diff(&h) < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn pauli_components_reconstruct() {
        let m = ComplexMatrix::from_rows([[c(1.0, 0.5), c(2.0, -1.0)], [c(0.0, 3.0), c(-0.5, 0.0)]]);
        let [a0, ax, ay, az] = m.pauli_components();
        let r = &(&(&sigma_0().scale(a0) + &sigma_x().scale(ax)) + &sigma_y().scale(ay)) + &sigma_z().scale(az);
        assert!(r.max_abs_diff(&m) < 1e-15);
    }
}
