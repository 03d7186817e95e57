//! The nonreciprocal SSH model `H = d·σ` with intra-cell hoppings `t1 ± δ`.
//!
//! Under periodic boundaries the Bloch vector is
//! `d(k) = (t1 + t2 cos k, t2 sin k - iδ, 0)`. Under open boundaries the
//! spectrum is governed by the generalized Brillouin zone `β = r e^{ik}` with
//! `r = √|(t1+δ)/(t1-δ)|`, and `d(β)` replaces `e^{ik}` by `β`.
//!
//! Energies are measured in units of `t2`, which is 1 unless set otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigma_x, sigma_y, sigma_z, ComplexMatrix, C64};

/// Distance from a phase boundary below which a point is rejected.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic boundaries, Bloch band theory.
    Pbc,
    /// Open boundaries, non-Bloch band theory on the generalized Brillouin zone.
    Obc,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbc" | "periodic" => Ok(Boundary::Pbc),
            "obc" | "open" => Ok(Boundary::Obc),
            other => Err(Error::Parse(format!("unknown boundary condition `{other}`"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Pbc => "pbc",
            Boundary::Obc => "obc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SshParams {
    pub t1: f64,
    pub delta: f64,
    pub t2: f64,
    pub bc: Boundary,
}

impl SshParams {
    pub fn new(t1: f64, delta: f64, bc: Boundary) -> Self {
        SshParams { t1, delta, t2: 1.0, bc }
    }

    pub fn pbc(t1: f64, delta: f64) -> Self {
        Self::new(t1, delta, Boundary::Pbc)
    }

    pub fn obc(t1: f64, delta: f64) -> Self {
        Self::new(t1, delta, Boundary::Obc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1.is_finite() && self.delta.is_finite() && self.t2.is_finite()) {
            return Err(Error::Domain("SSH parameters must be finite".into()));
        }
        if !(self.t2 > 0.0) {
            return Err(Error::Domain(format!("t2 must be positive, got {}", self.t2)));
        }
        if self.bc == Boundary::Obc {
            gbz_radius(self)?;
        }
        Ok(())
    }

    /// `d` at momentum `k` for the configured boundary condition.
    pub fn d_vector(&self, k: f64) -> Result<DVector> {
        match self.bc {
            Boundary::Pbc => Ok(d_bloch(k, self)),
            Boundary::Obc => d_nonbloch(k, self),
        }
    }

    pub fn hamiltonian(&self, k: f64) -> Result<ComplexMatrix> {
        Ok(self.d_vector(k)?.hamiltonian())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DVector {
    pub x: C64,
    pub y: C64,
    pub z: C64,
}

impl DVector {
    pub fn new(x: C64, y: C64, z: C64) -> Self {
        DVector { x, y, z }
    }

    /// `d·d` without complex conjugation; `E± = ±√(d·d)`.
    pub fn dot(&self) -> C64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        let m = &sigma_x().scale(self.x) + &sigma_y().scale(self.y);
        &m + &sigma_z().scale(self.z)
    }

    /// `d_x + i d_y`.
    pub fn q_plus(&self) -> C64 {
        self.x + C64::i() * self.y
    }

    /// `d_x - i d_y`.
    pub fn q_minus(&self) -> C64 {
        self.x - C64::i() * self.y
    }

    /// `E₊ = √(d·d)` on the principal branch.
    pub fn energy(&self) -> C64 {
        self.dot().sqrt()
    }
}

pub fn d_bloch(k: f64, p: &SshParams) -> DVector {
    let (s, c) = k.sin_cos();
    DVector::new(
        C64::new(p.t1 + p.t2 * c, 0.0),
        C64::new(p.t2 * s, -p.delta),
        C64::new(0.0, 0.0),
    )
}

pub fn gbz_radius(p: &SshParams) -> Result<f64> {
    let den = p.t1 - p.delta;
    let num = p.t1 + p.delta;
    if den.abs() < BOUNDARY_TOL || num.abs() < BOUNDARY_TOL {
        return Err(Error::GbzDegenerate(p.t1.abs()));
    }
    Ok((num / den).abs().sqrt())
}

pub fn d_nonbloch(k: f64, p: &SshParams) -> Result<DVector> {
    let r = gbz_radius(p)?;
    let beta = C64::from_polar(r, k);
    let inv = beta.inv();
    Ok(DVector::new(
        C64::new(p.t1, 0.0) + (beta + inv) * (p.t2 / 2.0),
        (beta - inv) * p.t2 / C64::new(0.0, 2.0) - C64::new(0.0, p.delta),
        C64::new(0.0, 0.0),
    ))
}

/// Biorthogonal spin texture `n = d / √(d·d)` of the `+` band.
pub fn analytic_texture(d: &DVector) -> Result<[C64; 3]> {
    let dd = d.dot();
    let scale = d.x.norm_sqr() + d.y.norm_sqr() + d.z.norm_sqr();
    if dd.norm() <= 1e-14 * scale {
        return Err(Error::ExceptionalPoint(format!("d·d = {dd} vanishes")));
    }
    let e = dd.sqrt();
    Ok([d.x / e, d.y / e, d.z / e])
}

/// Winding number predicted by the phase diagram: `0`, `1/2` or `1`.
pub fn expected_winding(p: &SshParams) -> Result<f64> {
    p.validate()?;
    let (a, d, t2) = (p.t1.abs(), p.delta.abs(), p.t2);
    let near = |x: f64, what: &str| -> Result<()> {
        if x.abs() < BOUNDARY_TOL {
            Err(Error::PhaseBoundary(format!(
                "{what} (t1 = {}, delta = {})",
                p.t1, p.delta
            )))
        } else {
            Ok(())
        }
    };
    match p.bc {
        Boundary::Pbc => {
            near(a + d - t2, "|t1| + |delta| = t2")?;
            near((a - d).abs() - t2, "||t1| - |delta|| = t2")?;
            Ok(if a + d < t2 {
                1.0
            } else if (a - d).abs() < t2 {
                0.5
            } else {
                0.0
            })
        }
        Boundary::Obc => {
            let s = (p.t1 * p.t1 - p.delta * p.delta).abs();
            near(s - t2 * t2, "|t1^2 - delta^2| = t2^2")?;
            Ok(if s < t2 * t2 { 1.0 } else { 0.0 })
        }
    }
}
