//! Covariance plug-ins: SCM and phase-only estimators with optional
//! shrinkage to identity or tapering.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianCov};

/// `n` observation vectors of length `l` for one pixel neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStack {
    l: usize,
    samples: Vec<Vec<Complex64>>,
}

impl SampleStack {
    pub fn new(samples: Vec<Vec<Complex64>>) -> Result<Self> {
        let l = samples.first().map(Vec::len).ok_or_else(|| Error::param("empty sample stack"))?;
        if l == 0 {
            return Err(Error::param("zero-length samples"));
        }
        if let Some(i) = samples.iter().position(|s| s.len() != l) {
            return Err(Error::dims(format!("sample {i} has length {}, expected {l}", samples[i].len())));
        }
        Ok(Self { l, samples })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Scm,
    PhaseOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    Shrinkage(f64),
    Tapering(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginSpec {
    pub estimator: Estimator,
    pub regularizer: Regularizer,
}

impl PluginSpec {
    pub fn new(estimator: Estimator, regularizer: Regularizer) -> Result<Self> {
        if let Regularizer::Shrinkage(beta) = regularizer {
            check_beta(beta)?;
        }
        Ok(Self { estimator, regularizer })
    }

    pub const fn scm() -> Self {
        Self { estimator: Estimator::Scm, regularizer: Regularizer::None }
    }

    pub const fn phase_only() -> Self {
        Self { estimator: Estimator::PhaseOnly, regularizer: Regularizer::None }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::param(format!("shrinkage beta {beta} out of [0, 1]")));
    }
    Ok(())
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Scm => "scm",
            Estimator::PhaseOnly => "po",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scm" => Ok(Estimator::Scm),
            "po" | "phase_only" | "phase-only" => Ok(Estimator::PhaseOnly),
            other => Err(Error::param(format!("unknown estimator '{other}'"))),
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::None => f.write_str("none"),
            Regularizer::Shrinkage(beta) => write!(f, "shrink:{beta}"),
            Regularizer::Tapering(b) => write!(f, "taper:{b}"),
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    /// Accepts `none`, `shrink:BETA` and `taper:B`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "none" {
            return Ok(Regularizer::None);
        }
        let (kind, value) = s.split_once(':').ok_or_else(|| Error::param(format!("unknown regularizer '{s}'")))?;
        match kind {
            "shrink" => {
                let beta: f64 = value.parse().map_err(|_| Error::param(format!("bad beta '{value}'")))?;
                check_beta(beta)?;
                Ok(Regularizer::Shrinkage(beta))
            }
            "taper" => {
                value.parse().map(Regularizer::Tapering).map_err(|_| Error::param(format!("bad bandwidth '{value}'")))
            }
            _ => Err(Error::param(format!("unknown regularizer '{s}'"))),
        }
    }
}

fn outer_average<'a>(
    l: usize,
    n: usize,
    vectors: impl Iterator<Item = std::borrow::Cow<'a, [Complex64]>>,
) -> HermitianCov {
    let mut acc = CMatrix::zeros(l, l);
    for x in vectors {
        for i in 0..l {
            for j in 0..=i {
                acc[(i, j)] += x[i] * x[j].conj();
            }
        }
    }
    let scale = 1.0 / n as f64;
    for i in 0..l {
        acc[(i, i)] = Complex64::new(acc[(i, i)].re * scale, 0.0);
        for j in 0..i {
            let v = acc[(i, j)] * scale;
            acc[(i, j)] = v;
            acc[(j, i)] = v.conj();
        }
    }
    HermitianCov::new(acc).expect("averaged outer products are Hermitian PSD")
}

/// Sample covariance matrix `(1/n) Σ xⁱ xⁱᴴ`.
pub fn scm(stack: &SampleStack) -> HermitianCov {
    outer_average(stack.l, stack.n(), stack.samples.iter().map(|s| s.as_slice().into()))
}

fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 && r.is_finite() {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Phase-only estimator: SCM of the entrywise phase-normalized samples.
/// Zero entries map to phase zero.
pub fn phase_only(stack: &SampleStack) -> HermitianCov {
    outer_average(
        stack.l,
        stack.n(),
        stack.samples.iter().map(|s| s.iter().map(|&z| unit_phase(z)).collect::<Vec<_>>().into()),
    )
}

/// `β Σ + (1 − β) (tr Σ / l) I`.
pub fn shrink_to_identity(sigma: &HermitianCov, beta: f64) -> Result<HermitianCov> {
    check_beta(beta)?;
    let l = sigma.dim();
    let target = (1.0 - beta) * sigma.trace() / l as f64;
    let mut m = sigma.matrix() * Complex64::new(beta, 0.0);
    for i in 0..l {
        m[(i, i)] += target;
    }
    HermitianCov::new(m)
}

/// Zeroes every entry with `|i − j| > bandwidth`.
pub fn taper(sigma: &HermitianCov, bandwidth: usize) -> HermitianCov {
    let mut m = sigma.matrix().clone();
    let l = sigma.dim();
    for i in 0..l {
        for j in 0..l {
            if i.abs_diff(j) > bandwidth {
                m[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    HermitianCov::new(m).expect("masking keeps a Hermitian matrix")
}

pub fn estimate(stack: &SampleStack, spec: &PluginSpec) -> Result<HermitianCov> {
    let base = match spec.estimator {
        Estimator::Scm => scm(stack),
        Estimator::PhaseOnly => phase_only(stack),
    };
    regularize(base, &spec.regularizer)
}

pub fn regularize(sigma: HermitianCov, reg: &Regularizer) -> Result<HermitianCov> {
    match *reg {
        Regularizer::None => Ok(sigma),
        Regularizer::Shrinkage(beta) => shrink_to_identity(&sigma, beta),
        Regularizer::Tapering(b) => Ok(taper(&sigma, b)),
    }
}
