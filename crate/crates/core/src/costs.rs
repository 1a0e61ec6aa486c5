//! Covariance-fitting objectives over the torus.
//!
//! Both objectives are quadratic forms in the phase vector:
//!
//! - KL: `wᴴ (Ψ⁻¹ ∘ Σ) w`
//! - Frobenius: `−2 wᴴ (Ψ ∘ Σ) w`
//!
//! with `Ψ = |Σ|`. The block forms split `w = (w_past, w_new)` and are exact
//! rewrites of the full forms through the Schur-complement inverse of `Ψ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    abs_entrywise, hadamard_real, modulus, pd_inverse, quad_form, BlockCov, CMatrix, CVector, HermitianCov,
    SchurFactors,
};
use crate::torus::TorusPhases;

/// `Ψ⁻¹ ∘ Σ`.
pub fn kl_matrix(sigma: &HermitianCov, jitter: f64) -> Result<CMatrix> {
    let psi_inv = pd_inverse(&abs_entrywise(sigma), jitter)?;
    hadamard_real(&psi_inv, sigma.matrix())
}

/// `Ψ ∘ Σ`.
pub fn frob_matrix(sigma: &HermitianCov) -> CMatrix {
    hadamard_real(&abs_entrywise(sigma), sigma.matrix()).expect("same shape")
}

fn check_dim(w: &TorusPhases, dim: usize) -> Result<()> {
    if w.dim() != dim {
        return Err(Error::dims(format!("phase vector of length {} for dimension {dim}", w.dim())));
    }
    Ok(())
}

pub fn kl_cost_full(w: &TorusPhases, sigma: &HermitianCov, jitter: f64) -> Result<f64> {
    check_dim(w, sigma.dim())?;
    Ok(quad_form(&kl_matrix(sigma, jitter)?, w.as_vector()).re)
}

pub fn frob_cost_full(w: &TorusPhases, sigma: &HermitianCov) -> Result<f64> {
    check_dim(w, sigma.dim())?;
    Ok(-2.0 * quad_form(&frob_matrix(sigma), w.as_vector()).re)
}

fn check_blocks(w_past: &TorusPhases, w_new: &TorusPhases, blocks: &BlockCov) -> Result<()> {
    check_dim(w_past, blocks.p)?;
    check_dim(w_new, blocks.k)
}

/// `Re(uᴴ B v)` for a rectangular `B`.
fn cross_form(u: &CVector, b: &CMatrix, v: &CVector) -> f64 {
    u.dotc(&(b * v)).re
}

/// Block form of the KL objective:
/// `wᴴ(F⁻¹∘Σ_p)w + 2Re(w̄ᴴ(A∘Σ_pn)w) + w̄ᴴ M w̄`.
pub fn kl_cost_block(
    w_past: &TorusPhases,
    w_new: &TorusPhases,
    blocks: &BlockCov,
    factors: &SchurFactors,
) -> Result<f64> {
    check_blocks(w_past, w_new, blocks)?;
    let past_term = quad_form(&hadamard_real(&factors.f_inv(), &blocks.past)?, w_past.as_vector()).re;
    let cross = hadamard_real(factors.a_mat(), &blocks.cross)?;
    let cross_term = 2.0 * cross_form(w_new.as_vector(), &cross, w_past.as_vector());
    let new_term = quad_form(&factors.m_mat, w_new.as_vector()).re;
    Ok(past_term + cross_term + new_term)
}

/// Block form of the Frobenius objective:
/// `−2[wᴴ(|Σ_p|∘Σ_p)w + 2Re(w̄ᴴ(|Σ_pn|∘Σ_pn)w) + w̄ᴴ(|Σ_n|∘Σ_n)w̄]`.
pub fn frob_cost_block(w_past: &TorusPhases, w_new: &TorusPhases, blocks: &BlockCov) -> Result<f64> {
    check_blocks(w_past, w_new, blocks)?;
    let weighted = |m: &CMatrix| hadamard_real(&modulus(m), m).expect("same shape");
    let past_term = quad_form(&weighted(&blocks.past), w_past.as_vector()).re;
    let cross_term = 2.0 * cross_form(w_new.as_vector(), &weighted(&blocks.cross), w_past.as_vector());
    let new_term = quad_form(&weighted(&blocks.new), w_new.as_vector()).re;
    Ok(-2.0 * (past_term + cross_term + new_term))
}

/// Imaginary part of the KL quadratic form relative to its real part; a
/// rounding diagnostic for Hermitian operands.
pub fn kl_imaginary_residual(w: &TorusPhases, sigma: &HermitianCov, jitter: f64) -> Result<f64> {
    let q: Complex64 = quad_form(&kl_matrix(sigma, jitter)?, w.as_vector());
    Ok(q.im.abs() / q.re.abs().max(1.0))
}
