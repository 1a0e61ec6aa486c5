//! Unit-modulus phase vectors.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// A point of the torus `{w ∈ Cⁿ : |wᵢ| = 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPhases(CVector);

impl TorusPhases {
    pub fn ones(dim: usize) -> Self {
        Self(CVector::from_element(dim, Complex64::new(1.0, 0.0)))
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self(CVector::from_iterator(angles.len(), angles.iter().map(|&t| Complex64::from_polar(1.0, t))))
    }

    /// Wraps an existing vector, checking the unit-modulus invariant.
    pub fn from_vector(v: CVector) -> Result<Self> {
        if let Some(i) = v.iter().position(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::param(format!("entry {i} has modulus {}", v[i].norm())));
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }

    pub fn is_anchored(&self) -> bool {
        self.0.is_empty() || self.0[0].arg().abs() <= 1e-12
    }

    /// Stacks `self` (past) on top of `other` (new).
    pub fn concat(&self, other: &TorusPhases) -> TorusPhases {
        let v: Vec<_> = self.0.iter().chain(other.0.iter()).copied().collect();
        Self(CVector::from_vec(v))
    }

    pub fn slice(&self, start: usize, len: usize) -> TorusPhases {
        Self(self.0.rows(start, len).into_owned())
    }

    pub fn rotate(&self, unit: Complex64) -> TorusPhases {
        Self(self.0.map(|z| normalize(z * unit)))
    }
}

fn normalize(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 && r.is_finite() {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Entrywise projection onto the torus: `vᵢ / |vᵢ|`, with `0 ↦ 1`.
///
/// This is the minimizer of `−Re(wᴴ v)` over the torus.
pub fn phase_project(v: &CVector) -> TorusPhases {
    TorusPhases(v.map(normalize))
}

/// Rotates `w` so that its first entry is exactly 1.
pub fn anchor_reference(w: &TorusPhases) -> TorusPhases {
    if w.dim() == 0 {
        return w.clone();
    }
    let r = w.0[0].conj();
    let mut out = w.0.map(|z| normalize(z * r));
    out[0] = Complex64::new(1.0, 0.0);
    TorusPhases(out)
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}
