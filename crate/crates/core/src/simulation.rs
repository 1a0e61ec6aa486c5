//! Synthetic ground truth and sample generation.
//!
//! All randomness flows from explicit 64-bit seeds through ChaCha generators,
//! so every draw is a pure function of its seed.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{pd_sqrt, CMatrix, CVector, HermitianCov, RMatrix, DEFAULT_JITTER};
use crate::plugins::SampleStack;
use crate::torus::TorusPhases;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Gaussian,
    ScaledGaussian,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Gaussian => "gaussian",
            Distribution::ScaledGaussian => "scaled_gaussian",
        })
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Distribution::Gaussian),
            "scaled_gaussian" | "scaled-gaussian" | "scaledgaussian" => Ok(Distribution::ScaledGaussian),
            other => Err(Error::param(format!("unknown distribution '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub l: usize,
    pub p: usize,
    pub k: usize,
    pub rho: f64,
    pub nu: f64,
    pub distribution: Distribution,
    pub n: usize,
    pub seed: u64,
    /// Total phase excursion of the linear ramp across the `l` dates.
    pub total_phase: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            l: 40,
            p: 35,
            k: 5,
            rho: 0.98,
            nu: 1.0,
            distribution: Distribution::Gaussian,
            n: 64,
            seed: 0,
            total_phase: 2.0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p + self.k != self.l {
            return Err(Error::param(format!("p + k = {} must equal l = {}", self.p + self.k, self.l)));
        }
        check_rho(self.rho)?;
        if !(self.nu > 0.0) {
            return Err(Error::param(format!("nu {} must be positive", self.nu)));
        }
        if self.n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<(RMatrix, TorusPhases, HermitianCov)> {
        let psi = toeplitz_coherence(self.l, self.rho)?;
        let w = linear_phase_ramp(self.l, self.total_phase);
        let sigma = build_true_covariance(&psi, &w)?;
        Ok((psi, w, sigma))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("rho out of range: {rho} not in (0, 1)")));
    }
    Ok(())
}

/// `Ψᵢⱼ = ρ^{|i−j|}`.
pub fn toeplitz_coherence(l: usize, rho: f64) -> Result<RMatrix> {
    check_rho(rho)?;
    Ok(RMatrix::from_fn(l, l, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Phases `θᵢ = i · total / l`, starting at zero.
pub fn linear_phase_ramp(l: usize, total_rad: f64) -> TorusPhases {
    let step = if l == 0 { 0.0 } else { total_rad / l as f64 };
    TorusPhases::from_angles(&(0..l).map(|i| i as f64 * step).collect::<Vec<_>>())
}

/// `Σ = Ψ ∘ w wᴴ`.
pub fn build_true_covariance(psi: &RMatrix, w: &TorusPhases) -> Result<HermitianCov> {
    if psi.nrows() != w.dim() || psi.ncols() != w.dim() {
        return Err(Error::dims(format!("{}x{} core with {} phases", psi.nrows(), psi.ncols(), w.dim())));
    }
    let v = w.as_vector();
    HermitianCov::new(CMatrix::from_fn(w.dim(), w.dim(), |i, j| v[i] * v[j].conj() * psi[(i, j)]))
}

/// Standard circular complex Gaussian: real and imaginary parts each `N(0, ½)`.
pub fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_vectors(sigma: &HermitianCov, n: usize, seed: u64) -> Result<Vec<CVector>> {
    let root = pd_sqrt(sigma.matrix(), DEFAULT_JITTER)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = sigma.dim();
    Ok((0..n)
        .map(|_| {
            let z = CVector::from_fn(l, |_, _| circular_normal(&mut rng));
            &root * z
        })
        .collect())
}

fn to_stack(vectors: Vec<CVector>) -> Result<SampleStack> {
    SampleStack::new(vectors.into_iter().map(|v| v.iter().copied().collect()).collect())
}

/// `n` i.i.d. draws `x = L z` with `L Lᴴ = Σ`.
pub fn sample_gaussian(sigma: &HermitianCov, n: usize, seed: u64) -> Result<SampleStack> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    to_stack(gaussian_vectors(sigma, n, seed)?)
}

/// Gamma(shape ν, scale 1/ν) textures, mean one.
pub fn sample_textures(n: usize, nu: f64, seed: u64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(nu, 1.0 / nu).map_err(|e| Error::param(format!("texture shape {nu}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7465_7874]));
    Ok((0..n).map(|_| gamma.sample(&mut rng)).collect())
}

/// Compound-Gaussian draws `√τᵢ · xᵢ` with given textures. The Gaussian part
/// uses the same stream as [`sample_gaussian`] for the same seed.
pub fn sample_scaled_gaussian_with_textures(sigma: &HermitianCov, textures: &[f64], seed: u64) -> Result<SampleStack> {
    if textures.is_empty() {
        return Err(Error::param("n must be at least 1"));
    }
    if let Some(t) = textures.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::param(format!("negative texture {t}")));
    }
    let vectors = gaussian_vectors(sigma, textures.len(), seed)?;
    to_stack(vectors.into_iter().zip(textures).map(|(x, t)| x * Complex64::new(t.sqrt(), 0.0)).collect())
}

pub fn sample_scaled_gaussian(sigma: &HermitianCov, n: usize, nu: f64, seed: u64) -> Result<SampleStack> {
    if !(nu > 0.0) {
        return Err(Error::param(format!("nu {nu} must be positive")));
    }
    let textures = sample_textures(n, nu, seed)?;
    sample_scaled_gaussian_with_textures(sigma, &textures, seed)
}

pub fn sample(sigma: &HermitianCov, cfg: &SimulationConfig, seed: u64) -> Result<SampleStack> {
    match cfg.distribution {
        Distribution::Gaussian => sample_gaussian(sigma, cfg.n, seed),
        Distribution::ScaledGaussian => sample_scaled_gaussian(sigma, cfg.n, cfg.nu, seed),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a sub-stream keyed by `path` (e.g. `[n, trial]`), independent of
/// scheduling order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}
