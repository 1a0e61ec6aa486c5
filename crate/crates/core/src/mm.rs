//! Majorization-minimization solvers on the torus.
//!
//! Every solver follows the same pattern: a linear surrogate
//! `−Re(wᴴ ẅ(w⁽ᵗ⁾))` that majorizes the quadratic objective, minimized in
//! closed form by projecting `ẅ` onto the torus.
//!
//! - Convex forms `wᴴHw` (KL) are majorized through `H − λ_max I`.
//! - Concave forms `−wᴴHw` (Frobenius) are majorized by their tangent,
//!   which requires `H ⪰ 0`. Entrywise products such as `|Σ| ∘ Σ` need not be
//!   PSD (tapered plug-ins in particular), so `H` is shifted by `−λ_min`
//!   when needed. On the torus `wᴴ(H + cI)w = wᴴHw + c·dim`, so the shift
//!   only changes the cost by a constant and the reported costs exclude it.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::costs::{frob_matrix, kl_matrix};
use crate::error::{Error, Result};
use crate::linalg::{
    hadamard_real, largest_eigenvalue, modulus, quad_form, BlockCov, CMatrix, CVector, HermitianCov, SchurFactors,
    DEFAULT_JITTER,
};
use crate::torus::{anchor_reference, TorusPhases};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Kl,
    Frobenius,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Kl => "kl",
            Distance::Frobenius => "frob",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kl" => Ok(Distance::Kl),
            "frob" | "frobenius" | "ls" => Ok(Distance::Frobenius),
            other => Err(Error::param(format!("unknown distance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Ones,
    Given(TorusPhases),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMConfig {
    pub max_iters: usize,
    /// Stop when `|c_t − c_{t−1}| ≤ tol · max(1, |c_t|)`.
    pub tol: f64,
    pub init: Init,
    /// Relative diagonal loading for failed factorizations.
    pub jitter: f64,
}

impl Default for MMConfig {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-8, init: Init::Ones, jitter: DEFAULT_JITTER }
    }
}

impl MMConfig {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param(format!("tol {} must be non-negative", self.tol)));
        }
        Ok(())
    }

    fn start(&self, dim: usize) -> Result<CVector> {
        match &self.init {
            Init::Ones => Ok(TorusPhases::ones(dim).as_vector().clone()),
            Init::Given(w) if w.dim() == dim => Ok(w.as_vector().clone()),
            Init::Given(w) => Err(Error::dims(format!("initial phases of length {} for dimension {dim}", w.dim()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub phases: TorusPhases,
    /// Objective before the first update followed by one value per iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Torus projection used inside the solvers: a vanishing surrogate
/// coefficient leaves that entry unchanged (every phase is a minimizer).
fn project_or_keep(target: &CVector, current: &CVector) -> CVector {
    target.zip_map(current, |z, w| {
        let r = z.norm();
        if r > 0.0 && r.is_finite() {
            z / r
        } else {
            w
        }
    })
}

fn run_mm(
    mut w: CVector,
    cfg: &MMConfig,
    cost: impl Fn(&CVector) -> f64,
    surrogate: impl Fn(&CVector) -> CVector,
) -> Result<(CVector, Vec<f64>, usize, bool)> {
    cfg.validate()?;
    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut prev = cost(&w);
    trace.push(prev);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        w = project_or_keep(&surrogate(&w), &w);
        iterations += 1;
        let c = cost(&w);
        trace.push(c);
        let settled = (c - prev).abs() <= cfg.tol * c.abs().max(1.0);
        prev = c;
        if settled {
            converged = true;
            break;
        }
    }
    Ok((w, trace, iterations, converged))
}

/// Upper bound on `λ_max(h)` used in the convex majorizer. The small margin
/// keeps `h − λI` negative semidefinite despite rounding in the estimate.
fn majorizing_eigenvalue(h: &CMatrix) -> Result<f64> {
    let lambda = largest_eigenvalue(h)?;
    Ok(lambda + 1e-10 * lambda.abs().max(f64::MIN_POSITIVE))
}

/// `λI − h` with `λ` from [`majorizing_eigenvalue`], negative semidefinite
/// complement of `h`.
fn shifted_complement(h: &CMatrix) -> Result<CMatrix> {
    let lambda = majorizing_eigenvalue(h)?;
    let mut k = -h;
    for i in 0..k.nrows() {
        k[(i, i)] += lambda;
    }
    Ok(k)
}

/// Shift `c ≥ 0` such that `h + cI ⪰ 0`.
fn psd_shift(h: &CMatrix) -> f64 {
    if nalgebra::Cholesky::new(h.clone()).is_some() {
        return 0.0;
    }
    let lmin = h.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        0.0
    } else {
        -lmin * (1.0 + 1e-10)
    }
}

/// Tangent majorizer of `wᴴHw` at `w_t`, valid whenever `H ⪯ λI`:
/// `λ‖w‖² + 2Re(wᴴ(H − λI)w_t) − w_tᴴ(H − λI)w_t`.
pub fn convex_majorizer(h: &CMatrix, lambda: f64, w: &CVector, w_t: &CVector) -> f64 {
    let mut a = h.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= lambda;
    }
    let aw_t = &a * w_t;
    lambda * w.norm_squared() + 2.0 * w.dotc(&aw_t).re - w_t.dotc(&aw_t).re
}

/// Tangent majorizer of `−wᴴHw` at `w_t`, valid whenever `H ⪰ 0`:
/// `−2Re(wᴴHw_t) + w_tᴴHw_t`.
pub fn concave_majorizer(h: &CMatrix, w: &CVector, w_t: &CVector) -> f64 {
    let hw_t = h * w_t;
    -2.0 * w.dotc(&hw_t).re + w_t.dotc(&hw_t).re
}

/// Offline KL fit: minimizes `wᴴ(Ψ⁻¹∘Σ)w` over the full torus.
pub fn solve_offline_kl(sigma: &HermitianCov, cfg: &MMConfig) -> Result<SolveReport> {
    let h = kl_matrix(sigma, cfg.jitter)?;
    let k = shifted_complement(&h)?;
    let w0 = cfg.start(sigma.dim())?;
    let (w, trace, iterations, converged) = run_mm(w0, cfg, |w| quad_form(&h, w).re, |w| &k * w)?;
    finish_offline(w, trace, iterations, converged)
}

/// Offline Frobenius fit: minimizes `−2wᴴ(Ψ∘Σ)w` over the full torus.
pub fn solve_offline_frob(sigma: &HermitianCov, cfg: &MMConfig) -> Result<SolveReport> {
    let h = frob_matrix(sigma) * Complex64::new(2.0, 0.0);
    let shift = psd_shift(&h);
    let w0 = cfg.start(sigma.dim())?;
    let (w, trace, iterations, converged) =
        run_mm(w0, cfg, |w| -quad_form(&h, w).re, |w| &h * w + w * Complex64::new(shift, 0.0))?;
    finish_offline(w, trace, iterations, converged)
}

fn finish_offline(w: CVector, cost_trace: Vec<f64>, iterations: usize, converged: bool) -> Result<SolveReport> {
    let phases = anchor_reference(&TorusPhases::from_vector(w)?);
    Ok(SolveReport { phases, cost_trace, iterations, converged })
}

pub fn solve_offline(distance: Distance, sigma: &HermitianCov, cfg: &MMConfig) -> Result<SolveReport> {
    match distance {
        Distance::Kl => solve_offline_kl(sigma, cfg),
        Distance::Frobenius => solve_offline_frob(sigma, cfg),
    }
}

fn check_past(blocks: &BlockCov, w_past: &TorusPhases) -> Result<()> {
    if w_past.dim() != blocks.p {
        return Err(Error::dims(format!("past phases of length {} for p = {}", w_past.dim(), blocks.p)));
    }
    Ok(())
}

/// Sequential KL fit of the `k` new phases with `w_past` held fixed.
///
/// Iterates `ẅ = N − (M − λ_max I) w̄` and `w̄ ← Φ(ẅ)` with
/// `N = ((−A) ∘ Σ_pn) w_past` and `M = D⁻¹ ∘ Σ_n`.
pub fn solve_seq_kl(
    blocks: &BlockCov,
    factors: &SchurFactors,
    w_past: &TorusPhases,
    cfg: &MMConfig,
) -> Result<SolveReport> {
    check_past(blocks, w_past)?;
    let wp = w_past.as_vector();
    let n_vec = -(hadamard_real(factors.a_mat(), &blocks.cross)? * wp);
    let m = &factors.m_mat;
    let k = shifted_complement(m)?;
    let past_term = quad_form(&hadamard_real(&factors.f_inv(), &blocks.past)?, wp).re;
    let w0 = cfg.start(blocks.k)?;
    let (w, cost_trace, iterations, converged) =
        run_mm(w0, cfg, |w| past_term - 2.0 * w.dotc(&n_vec).re + quad_form(m, w).re, |w| &n_vec + &k * w)?;
    Ok(SolveReport { phases: TorusPhases::from_vector(w)?, cost_trace, iterations, converged })
}

/// Sequential Frobenius fit of the `k` new phases with `w_past` held fixed.
///
/// Iterates `ẅ = (|Σ_pn| ∘ Σ_pn) w_past + (|Σ_n| ∘ Σ_n) w̄` and `w̄ ← Φ(ẅ)`.
pub fn solve_seq_frob(blocks: &BlockCov, w_past: &TorusPhases, cfg: &MMConfig) -> Result<SolveReport> {
    check_past(blocks, w_past)?;
    let wp = w_past.as_vector();
    let weighted = |m: &CMatrix| hadamard_real(&modulus(m), m);
    let drive = weighted(&blocks.cross)? * wp;
    let new_core = weighted(&blocks.new)?;
    let shift = psd_shift(&new_core);
    let past_term = -2.0 * quad_form(&weighted(&blocks.past)?, wp).re;
    let w0 = cfg.start(blocks.k)?;
    let (w, cost_trace, iterations, converged) = run_mm(
        w0,
        cfg,
        |w| past_term - 4.0 * w.dotc(&drive).re - 2.0 * quad_form(&new_core, w).re,
        |w| &drive + &new_core * w + w * Complex64::new(shift, 0.0),
    )?;
    Ok(SolveReport { phases: TorusPhases::from_vector(w)?, cost_trace, iterations, converged })
}

/// Sequential fit from a full `(p + k)` plug-in.
pub fn solve_sequential(
    distance: Distance,
    sigma: &HermitianCov,
    w_past: &TorusPhases,
    cfg: &MMConfig,
) -> Result<SolveReport> {
    let blocks = BlockCov::from_cov(sigma, w_past.dim())?;
    match distance {
        Distance::Kl => {
            let factors = SchurFactors::new(&blocks, cfg.jitter)?;
            solve_seq_kl(&blocks, &factors, w_past, cfg)
        }
        Distance::Frobenius => solve_seq_frob(&blocks, w_past, cfg),
    }
}
