//! Dense complex-Hermitian matrix kernel.
//!
//! Everything here is dense and row-agnostic (nalgebra storage); the
//! dimensions in play are the number of acquisitions, at most a few hundred.

use std::borrow::Cow;

use nalgebra::{ComplexField, DMatrix, DVector, Scalar};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<Complex64>;

/// Relative diagonal loading used when a factorization fails.
pub const DEFAULT_JITTER: f64 = 1e-9;

const POWER_MAX_ITERS: usize = 10_000;
const POWER_TOL: f64 = 1e-8;
const DENSE_FALLBACK_DIM: usize = 64;

/// Complex Hermitian matrix with a real, non-negative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianCov(CMatrix);

impl HermitianCov {
    /// Symmetrizes `m` as `(m + mᴴ) / 2` so that the Hermitian invariant holds
    /// exactly. Fails on non-square input or a negative diagonal entry.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let h = symmetrize(m);
        if let Some(i) = (0..h.nrows()).find(|&i| h[(i, i)].re < 0.0) {
            return Err(Error::param(format!("negative diagonal entry {} at index {i}", h[(i, i)].re)));
        }
        Ok(Self(h))
    }

    pub fn from_real(psi: &RMatrix) -> Result<Self> {
        Self::new(psi.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Leading principal block of size `len` (the past images).
    pub fn leading(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.dim() {
            return Err(Error::OutOfRange(format!("principal block {len} of a {}x{} matrix", self.dim(), self.dim())));
        }
        Ok(Self(self.0.view((0, 0), (len, len)).into_owned()))
    }

    /// Trailing principal block starting at `start`.
    pub fn trailing(&self, start: usize) -> Result<Self> {
        if start >= self.dim() {
            return Err(Error::OutOfRange(format!(
                "trailing block from {start} of a {}x{} matrix",
                self.dim(),
                self.dim()
            )));
        }
        let len = self.dim() - start;
        Ok(Self(self.0.view((start, start), (len, len)).into_owned()))
    }
}

fn symmetrize(m: CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut h = m.clone();
    for i in 0..n {
        h[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

/// Entrywise (Schur) product.
pub fn hadamard<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: Scalar + std::ops::Mul<Output = T> + Copy,
{
    if a.shape() != b.shape() {
        return Err(Error::dims(format!("hadamard of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(a.zip_map(b, |x, y| x * y))
}

/// Entrywise product of a real mask/weight matrix with a complex matrix.
pub fn hadamard_real(r: &RMatrix, c: &CMatrix) -> Result<CMatrix> {
    if r.shape() != c.shape() {
        return Err(Error::dims(format!("hadamard of {:?} and {:?}", r.shape(), c.shape())));
    }
    Ok(c.zip_map(r, |z, x| z * x))
}

/// Entrywise modulus of a Hermitian plug-in (its real core).
pub fn abs_entrywise(sigma: &HermitianCov) -> RMatrix {
    modulus(sigma.matrix())
}

pub fn modulus(m: &CMatrix) -> RMatrix {
    m.map(|z| z.norm())
}

pub fn to_complex(r: &RMatrix) -> CMatrix {
    r.map(|x| Complex64::new(x, 0.0))
}

/// `wᴴ H w`.
pub fn quad_form(h: &CMatrix, w: &CVector) -> Complex64 {
    w.dotc(&(h * w))
}

fn jitter_shift<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, jitter: f64) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let trace: f64 = (0..n).map(|i| a[(i, i)].clone().real()).sum();
    let load = jitter * trace / n as f64;
    if !(load > 0.0) || !load.is_finite() {
        return None;
    }
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += T::from_real(load);
    }
    Some(shifted)
}

fn cholesky_with_jitter<T>(a: &DMatrix<T>, jitter: f64) -> Result<nalgebra::Cholesky<T, nalgebra::Dyn>>
where
    T: ComplexField<RealField = f64>,
{
    if !a.is_square() {
        return Err(Error::dims(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Err(Error::dims("empty matrix"));
    }
    if let Some(c) = nalgebra::Cholesky::new(a.clone()) {
        return Ok(c);
    }
    if jitter > 0.0 {
        if let Some(c) = jitter_shift(a, jitter).and_then(nalgebra::Cholesky::new) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite)
}

/// Inverse of a symmetric/Hermitian positive-definite matrix by Cholesky.
///
/// On factorization failure the diagonal is loaded with
/// `jitter * trace(a) / dim` and the factorization is retried once.
pub fn pd_inverse<T>(a: &DMatrix<T>, jitter: f64) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    let chol = cholesky_with_jitter(a, jitter)?;
    let inv = chol.inverse();
    if inv.iter().any(|x| !x.clone().is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(inv)
}

/// Lower-triangular square root `L` with `L Lᴴ = a` (jitter rule as
/// [`pd_inverse`]). A zero matrix yields a zero root.
pub fn pd_sqrt(a: &CMatrix, jitter: f64) -> Result<CMatrix> {
    if a.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(CMatrix::zeros(a.nrows(), a.ncols()));
    }
    Ok(cholesky_with_jitter(a, jitter)?.unpack())
}

/// Past/cross/new partition of an `l x l` matrix.
///
/// `cross` is the lower-left `k x p` block; the upper-right block is its
/// conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks<T: Scalar> {
    pub p: usize,
    pub k: usize,
    pub past: DMatrix<T>,
    pub cross: DMatrix<T>,
    pub new: DMatrix<T>,
}

pub type BlockCov = Blocks<Complex64>;

pub fn partition<T: Scalar>(m: &DMatrix<T>, p: usize) -> Result<Blocks<T>> {
    if !m.is_square() {
        return Err(Error::dims(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let l = m.nrows();
    if p == 0 || p >= l {
        return Err(Error::OutOfRange(format!("past length {p} must be in [1, {})", l)));
    }
    let k = l - p;
    Ok(Blocks {
        p,
        k,
        past: m.view((0, 0), (p, p)).into_owned(),
        cross: m.view((p, 0), (k, p)).into_owned(),
        new: m.view((p, p), (k, k)).into_owned(),
    })
}

impl<T: ComplexField> Blocks<T> {
    /// Reassembles `[[past, crossᴴ], [cross, new]]`.
    pub fn reassemble(&self) -> DMatrix<T> {
        let l = self.p + self.k;
        let mut m = DMatrix::zeros(l, l);
        m.view_mut((0, 0), (self.p, self.p)).copy_from(&self.past);
        m.view_mut((self.p, 0), (self.k, self.p)).copy_from(&self.cross);
        m.view_mut((0, self.p), (self.p, self.k)).copy_from(&self.cross.adjoint());
        m.view_mut((self.p, self.p), (self.k, self.k)).copy_from(&self.new);
        m
    }
}

impl BlockCov {
    pub fn from_cov(sigma: &HermitianCov, p: usize) -> Result<Self> {
        partition(sigma.matrix(), p)
    }

    /// Blockwise entrywise modulus (`|Σ_p|`, `|Σ_pn|`, `|Σ_n|`).
    pub fn modulus(&self) -> Blocks<f64> {
        Blocks { p: self.p, k: self.k, past: modulus(&self.past), cross: modulus(&self.cross), new: modulus(&self.new) }
    }
}

/// Block inverse of a real symmetric core matrix via its Schur complement.
///
/// With `D = Ψ_n − Ψ_pn Ψ_p⁻¹ Ψ_pnᵀ` and `A = −D⁻¹ Ψ_pn Ψ_p⁻¹` the inverse is
/// `[[F⁻¹, Aᵀ], [A, D⁻¹]]`.
#[derive(Debug, Clone)]
pub struct SchurInverse {
    pub p: usize,
    pub k: usize,
    pub psi_p_inv: RMatrix,
    pub d_inv: RMatrix,
    pub a_mat: RMatrix,
    psi_cross: RMatrix,
}

impl SchurInverse {
    /// Top-left block `F⁻¹ = Ψ_p⁻¹ − Aᵀ Ψ_pn Ψ_p⁻¹`. Costs `O(k p²)`.
    pub fn f_inv(&self) -> RMatrix {
        let right = &self.psi_cross * &self.psi_p_inv;
        let mut f = &self.psi_p_inv - self.a_mat.transpose() * right;
        symmetrize_real(&mut f);
        f
    }

    /// Full `l x l` inverse assembled from the blocks.
    pub fn assemble(&self) -> RMatrix {
        Blocks { p: self.p, k: self.k, past: self.f_inv(), cross: self.a_mat.clone(), new: self.d_inv.clone() }
            .reassemble()
    }
}

fn symmetrize_real(m: &mut RMatrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Schur-complement factors of a real symmetric `psi` split at `p`.
pub fn schur_factors(psi: &RMatrix, p: usize, jitter: f64) -> Result<SchurInverse> {
    let b = partition(psi, p)?;
    schur_from_blocks(&b, jitter)
}

fn schur_from_blocks(b: &Blocks<f64>, jitter: f64) -> Result<SchurInverse> {
    let psi_p_inv = pd_inverse(&b.past, jitter)?;
    let cross_pinv = &b.cross * &psi_p_inv;
    let mut d = &b.new - &cross_pinv * b.cross.transpose();
    symmetrize_real(&mut d);
    let d_inv = pd_inverse(&d, jitter)?;
    let a_mat = -(&d_inv * &cross_pinv);
    Ok(SchurInverse { p: b.p, k: b.k, psi_p_inv, d_inv, a_mat, psi_cross: b.cross.clone() })
}

/// Everything the sequential KL objective needs from a partitioned plug-in:
/// the Schur inverse of its real core and `M = D⁻¹ ∘ Σ_n`.
#[derive(Debug, Clone)]
pub struct SchurFactors {
    pub inverse: SchurInverse,
    pub m_mat: CMatrix,
    f_inv: Option<RMatrix>,
}

impl SchurFactors {
    pub fn new(blocks: &BlockCov, jitter: f64) -> Result<Self> {
        let inverse = schur_from_blocks(&blocks.modulus(), jitter)?;
        let m_mat = symmetrize(hadamard_real(&inverse.d_inv, &blocks.new)?);
        Ok(Self { inverse, m_mat, f_inv: None })
    }

    /// Precomputes `F⁻¹` (only the constant term of the block KL cost uses it).
    pub fn with_f_inv(mut self) -> Self {
        self.f_inv = Some(self.inverse.f_inv());
        self
    }

    pub fn f_inv(&self) -> Cow<'_, RMatrix> {
        match &self.f_inv {
            Some(f) => Cow::Borrowed(f),
            None => Cow::Owned(self.inverse.f_inv()),
        }
    }

    pub fn a_mat(&self) -> &RMatrix {
        &self.inverse.a_mat
    }

    pub fn d_inv(&self) -> &RMatrix {
        &self.inverse.d_inv
    }
}

fn power_dominant(h: &CMatrix, shift: f64) -> Option<f64> {
    let n = h.nrows();
    let mut v = CVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let apply = |v: &CVector| -> CVector {
        let mut y = h * v;
        if shift != 0.0 {
            y.axpy(Complex64::new(-shift, 0.0), v, Complex64::new(1.0, 0.0));
        }
        y
    };
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let y = apply(&v);
        let rho = v.dotc(&y).re;
        let ynorm = y.norm();
        if ynorm == 0.0 {
            return Some(0.0);
        }
        let resid = (&y - &v * Complex64::new(rho, 0.0)).norm();
        let settled = (rho - prev).abs() <= POWER_TOL * rho.abs();
        if settled && resid <= POWER_TOL * rho.abs() {
            return Some(rho);
        }
        prev = rho;
        v = y / Complex64::new(ynorm, 0.0);
    }
    None
}

fn dense_largest_eigenvalue(h: &CMatrix) -> f64 {
    h.clone().symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue of a Hermitian matrix.
///
/// Power iteration from the normalized all-ones vector; if the dominant
/// eigenvalue is negative the iteration is rerun on `H − μI` (which is PSD).
/// Falls back to a dense eigensolver for dim ≤ 64 when the iteration stalls.
pub fn largest_eigenvalue(h: &CMatrix) -> Result<f64> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::dims(format!("{}x{} is not a square matrix", h.nrows(), h.ncols())));
    }
    if h.nrows() == 1 {
        return Ok(h[(0, 0)].re);
    }
    let result = match power_dominant(h, 0.0) {
        Some(mu) if mu >= 0.0 => Some(mu),
        Some(mu) => power_dominant(h, mu).map(|nu| nu + mu),
        None => None,
    };
    match result {
        Some(lambda) => Ok(lambda),
        None if h.nrows() <= DENSE_FALLBACK_DIM => Ok(dense_largest_eigenvalue(h)),
        None => Err(Error::NonConvergence(POWER_MAX_ITERS)),
    }
}

pub fn smallest_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(-largest_eigenvalue(&(-h))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = random_complex(rng, n, n);
        (&a + a.adjoint()) * c(0.5, 0.0)
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> RMatrix {
        let a = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + RMatrix::identity(n, n) * 0.5
    }

    fn toeplitz(n: usize, rho: f64) -> RMatrix {
        RMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn hadamard_identity_mask_and_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_complex(&mut rng, 4, 4);
        let eye = CMatrix::identity(4, 4);
        let diag = hadamard(&eye, &m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { m[(i, j)] } else { c(0.0, 0.0) };
                assert_eq!(diag[(i, j)], want);
            }
        }
        let ones = CMatrix::from_element(4, 4, c(1.0, 0.0));
        assert_eq!(hadamard(&ones, &m).unwrap(), m);
    }

    #[test]
    fn hadamard_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_complex(&mut rng, 4, 4);
        let b = random_complex(&mut rng, 4, 4);
        let got = hadamard(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let re = a[(i, j)].re * b[(i, j)].re - a[(i, j)].im * b[(i, j)].im;
                let im = a[(i, j)].re * b[(i, j)].im + a[(i, j)].im * b[(i, j)].re;
                assert!((got[(i, j)] - c(re, im)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn hadamard_rejects_mismatch() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(3, 2);
        assert!(matches!(hadamard(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn abs_recovers_real_core() {
        let psi = toeplitz(4, 0.7);
        let theta = [0.0, 0.4, -1.3, 2.9];
        let sigma = CMatrix::from_fn(4, 4, |i, j| Complex64::from_polar(psi[(i, j)], theta[i] - theta[j]));
        let got = abs_entrywise(&HermitianCov::new(sigma).unwrap());
        assert!((got - psi).amax() < 1e-14);

        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(3.0, 0.0)]));
        let got = abs_entrywise(&HermitianCov::new(d).unwrap());
        assert_eq!(got, RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0])));
    }

    #[test]
    fn abs_matches_scalar_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HermitianCov::new(random_hermitian(&mut rng, 5).map(|z| z + c(3.0, 0.0))).unwrap();
        let got = abs_entrywise(&h);
        for i in 0..5 {
            for j in 0..5 {
                let z = h.matrix()[(i, j)];
                assert!((got[(i, j)] - (z.re * z.re + z.im * z.im).sqrt()).abs() < 1e-15);
                assert_eq!(got[(i, j)], got[(j, i)]);
            }
        }
    }

    #[test]
    fn hermitian_cov_is_exactly_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_complex(&mut rng, 5, 5).map(|z| z + c(2.0, 0.0));
        let h = HermitianCov::new(m).unwrap();
        for i in 0..5 {
            assert_eq!(h.matrix()[(i, i)].im, 0.0);
            for j in 0..5 {
                assert_eq!(h.matrix()[(i, j)], h.matrix()[(j, i)].conj());
            }
        }
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(HermitianCov::new(neg).is_err());
    }

    #[test]
    fn pd_inverse_trivial_cases() {
        let eye = RMatrix::identity(3, 3);
        assert_eq!(pd_inverse(&eye, 0.0).unwrap(), eye);
        let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]));
        let inv = pd_inverse(&d, 0.0).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15 && (inv[(1, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(inv[(0, 1)], 0.0);
    }

    #[test]
    fn pd_inverse_residual_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 8);
        let inv = pd_inverse(&a, 0.0).unwrap();
        let resid = (&a * &inv - RMatrix::identity(8, 8)).amax();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn pd_inverse_complex_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_complex(&mut rng, 6, 6);
        let h = &a * a.adjoint() + CMatrix::identity(6, 6);
        let inv = pd_inverse(&h, 0.0).unwrap();
        assert!((&h * &inv - CMatrix::identity(6, 6)).camax() < 1e-10);
    }

    #[test]
    fn pd_inverse_jitter_and_failure() {
        // Singular PSD: plain Cholesky may fail, the jittered retry succeeds.
        let a = RMatrix::from_element(3, 3, 1.0);
        let inv = pd_inverse(&a, 1e-6).unwrap();
        let loaded = &a + RMatrix::identity(3, 3) * 1e-6;
        assert!((&loaded * &inv - RMatrix::identity(3, 3)).amax() < 1e-6);

        let indefinite = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(pd_inverse(&indefinite, DEFAULT_JITTER), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn partition_small_and_round_trip() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, -0.1), c(0.2, 0.1), c(3.0, 0.0)]);
        let b = partition(&m, 1).unwrap();
        assert_eq!(b.past[(0, 0)], m[(0, 0)]);
        assert_eq!(b.cross[(0, 0)], m[(1, 0)]);
        assert_eq!(b.new[(0, 0)], m[(1, 1)]);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 10);
        let b = partition(&h, 7).unwrap();
        assert_eq!((b.p, b.k), (7, 3));
        assert_eq!(b.reassemble(), h);

        assert!(partition(&h, 10).is_err());
        assert!(partition(&h, 0).is_err());
    }

    #[test]
    fn schur_two_by_two_closed_form() {
        let rho = 0.6;
        let psi = RMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let s = schur_factors(&psi, 1, 0.0).unwrap();
        let d = 1.0 - rho * rho;
        assert!((s.d_inv[(0, 0)] - 1.0 / d).abs() < 1e-14);
        assert!((s.a_mat[(0, 0)] + rho / d).abs() < 1e-14);
        assert!((s.f_inv()[(0, 0)] - 1.0 / d).abs() < 1e-14);
    }

    #[test]
    fn schur_identity() {
        let s = schur_factors(&RMatrix::identity(5, 5), 3, 0.0).unwrap();
        assert_eq!(s.f_inv(), RMatrix::identity(3, 3));
        assert_eq!(s.d_inv, RMatrix::identity(2, 2));
        assert_eq!(s.a_mat, RMatrix::zeros(2, 3));
    }

    #[test]
    fn schur_matches_dense_inverse_on_toeplitz() {
        let psi = toeplitz(12, 0.8);
        let s = schur_factors(&psi, 8, 0.0).unwrap();
        let direct = pd_inverse(&psi, 0.0).unwrap();
        let assembled = s.assemble();
        let scale = direct.amax();
        assert!((assembled - direct).amax() / scale < 1e-8);
    }

    #[test]
    fn schur_factors_m_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_complex(&mut rng, 7, 7);
        let sigma = HermitianCov::new(&a * a.adjoint() + CMatrix::identity(7, 7) * c(0.1, 0.0)).unwrap();
        let blocks = BlockCov::from_cov(&sigma, 4).unwrap();
        let f = SchurFactors::new(&blocks, DEFAULT_JITTER).unwrap();
        let lmax = largest_eigenvalue(&f.m_mat).unwrap();
        let lmin = smallest_eigenvalue(&f.m_mat).unwrap();
        assert!(lmin >= -1e-10 * lmax);
    }

    #[test]
    fn largest_eigenvalue_trivial() {
        assert!((largest_eigenvalue(&CMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]));
        assert!((largest_eigenvalue(&d).unwrap() - 3.0).abs() < 1e-8);
        let neg = -CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(5.0, 0.0)]));
        assert!((largest_eigenvalue(&neg).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn largest_eigenvalue_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 10);
            let want = dense_largest_eigenvalue(&h);
            let got = largest_eigenvalue(&h).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}
