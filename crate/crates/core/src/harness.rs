//! Monte Carlo MSE experiments, the multi-block study and solver timing.
//!
//! Every trial draws its samples from `derive_seed(master_seed, [n, trial])`,
//! so offline and sequential runs with the same master seed see identical
//! data, and results do not depend on how trials are scheduled.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{BlockCov, HermitianCov, SchurFactors};
use crate::mm::{solve_offline, solve_seq_frob, solve_seq_kl, solve_sequential, Distance, MMConfig};
use crate::plugins::{estimate, PluginSpec};
use crate::simulation::{derive_seed, sample, sample_gaussian, SimulationConfig};
use crate::torus::{wrap_angle, TorusPhases};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Offline,
    Sequential,
    Multiblock(Vec<usize>),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Offline => f.write_str("offline"),
            Mode::Sequential => f.write_str("sequential"),
            Mode::Multiblock(sizes) => {
                let s: Vec<String> = sizes.iter().map(usize::to_string).collect();
                write!(f, "multiblock:{}", s.join("/"))
            }
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "offline" => Ok(Mode::Offline),
            "sequential" | "seq" => Ok(Mode::Sequential),
            _ => {
                let sizes = s.strip_prefix("multiblock:").ok_or_else(|| Error::param(format!("unknown mode '{s}'")))?;
                let sizes = sizes
                    .split(['/', ' ', ';'])
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse().map_err(|_| Error::param(format!("bad block size '{t}'"))))
                    .collect::<Result<Vec<usize>>>()?;
                Ok(Mode::Multiblock(sizes))
            }
        }
    }
}

pub const DEFAULT_N_GRID: [usize; 7] = [20, 30, 40, 50, 64, 80, 110];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimulationConfig,
    pub plugin: PluginSpec,
    pub distance: Distance,
    pub mode: Mode,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Replace the plug-in by the true covariance.
    pub noiseless: bool,
    pub mm: MMConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimulationConfig::default(),
            plugin: PluginSpec::scm(),
            distance: Distance::Kl,
            mode: Mode::Offline,
            n_grid: DEFAULT_N_GRID.to_vec(),
            trials: 200,
            master_seed: 0,
            noiseless: false,
            mm: MMConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.mm.validate()?;
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::param("n_grid must not be empty"));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::param("sample sizes must be at least 1"));
        }
        if self.sim.l < 2 {
            return Err(Error::param("experiments need l >= 2"));
        }
        if let Mode::Multiblock(sizes) = &self.mode {
            if sizes.len() < 2 || sizes.contains(&0) {
                return Err(Error::param("multiblock needs at least two non-empty blocks"));
            }
            let total: usize = sizes.iter().sum();
            if total != self.sim.l {
                return Err(Error::param(format!("multiblock sizes sum to {total}, expected l = {}", self.sim.l)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub mode: String,
    pub distance: Distance,
    pub plugin: PluginSpec,
    pub n: usize,
    pub trials: usize,
    pub excluded: usize,
    /// Mean squared error over the kept trials; `None` when none were kept.
    pub mse: Option<f64>,
    /// Standard error of `mse`; `None` with fewer than two kept trials.
    pub stderr: Option<f64>,
}

impl MseRow {
    fn from_errors(mode: &str, cfg: &ExperimentConfig, n: usize, errors: &[Option<f64>]) -> Self {
        let kept: Vec<f64> = errors.iter().flatten().copied().collect();
        let (mse, stderr) = mean_and_stderr(&kept);
        Self {
            mode: mode.to_string(),
            distance: cfg.distance,
            plugin: cfg.plugin,
            n,
            trials: errors.len(),
            excluded: errors.len() - kept.len(),
            mse,
            stderr,
        }
    }

    /// `[mse − 2·stderr, mse + 2·stderr]`.
    pub fn band(&self) -> Option<(f64, f64)> {
        let m = self.mse?;
        let s = self.stderr.unwrap_or(0.0);
        Some((m - 2.0 * s, m + 2.0 * s))
    }
}

/// Whether the `±2·stderr` bands of two rows intersect.
pub fn bands_overlap(a: &MseRow, b: &MseRow) -> bool {
    match (a.band(), b.band()) {
        (Some((lo_a, hi_a)), Some((lo_b, hi_b))) => lo_a <= hi_b && lo_b <= hi_a,
        _ => false,
    }
}

/// Sample mean and standard error, summed in slice order.
pub fn mean_and_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// One trial's squared error, `None` if the trial was excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub mode: String,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<MseRow>,
    pub trials: Vec<TrialRecord>,
}

/// `wrap((θ̂ᵢ − θ̂ⱼ) − (θᵢ − θⱼ))²`.
pub fn phase_diff_error(theta_hat: &TorusPhases, theta_true: &TorusPhases, i: usize, j: usize) -> Result<f64> {
    if theta_hat.dim() != theta_true.dim() {
        return Err(Error::dims(format!("{} estimated phases for {} true", theta_hat.dim(), theta_true.dim())));
    }
    if i >= theta_hat.dim() || j >= theta_hat.dim() {
        return Err(Error::OutOfRange(format!("dates ({i}, {j}) with {} phases", theta_hat.dim())));
    }
    let (h, t) = (theta_hat.as_vector(), theta_true.as_vector());
    let est = (h[i] * h[j].conj()).arg();
    let truth = (t[i] * t[j].conj()).arg();
    Ok(wrap_angle(est - truth).powi(2))
}

struct Truth {
    phases: TorusPhases,
    sigma: HermitianCov,
}

fn plugin_for_trial(cfg: &ExperimentConfig, truth: &Truth, n: usize, seed: u64) -> Result<HermitianCov> {
    if cfg.noiseless {
        return Ok(truth.sigma.clone());
    }
    let sim = SimulationConfig { n, ..cfg.sim.clone() };
    estimate(&sample(&truth.sigma, &sim, seed)?, &cfg.plugin)
}

fn offline_phases(distance: Distance, sigma: &HermitianCov, cfg: &MMConfig) -> Result<TorusPhases> {
    Ok(solve_offline(distance, sigma, cfg)?.phases)
}

/// Past phases from an offline fit on the leading `p` dates, then the
/// sequential fit of the remaining dates.
fn sequential_phases(distance: Distance, sigma: &HermitianCov, p: usize, cfg: &MMConfig) -> Result<TorusPhases> {
    let w_past = offline_phases(distance, &sigma.leading(p)?, cfg)?;
    let w_new = solve_sequential(distance, sigma, &w_past, cfg)?.phases;
    Ok(w_past.concat(&w_new))
}

/// Offline fit of the first block, then one sequential fit per later block.
fn cascaded_phases(distance: Distance, sigma: &HermitianCov, sizes: &[usize], cfg: &MMConfig) -> Result<TorusPhases> {
    let mut known = sizes[0];
    let mut w = offline_phases(distance, &sigma.leading(known)?, cfg)?;
    for &size in &sizes[1..] {
        known += size;
        let w_new = solve_sequential(distance, &sigma.leading(known)?, &w, cfg)?.phases;
        w = w.concat(&w_new);
    }
    Ok(w)
}

fn truth_of(cfg: &ExperimentConfig) -> Result<Truth> {
    let (_, phases, sigma) = cfg.sim.truth()?;
    Ok(Truth { phases, sigma })
}

fn tasks(cfg: &ExperimentConfig) -> Vec<(usize, usize, u64)> {
    let mut n_grid = cfg.n_grid.clone();
    n_grid.sort_unstable();
    n_grid.dedup();
    n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t, derive_seed(cfg.master_seed, &[n as u64, t as u64]))))
        .collect()
}

/// Runs `per_trial` for every `(n, trial)` in parallel and aggregates one
/// row per `(mode label, n)` in the order the labels are returned.
fn run_experiment(
    cfg: &ExperimentConfig,
    labels: &[&str],
    per_trial: impl Fn(usize, u64) -> Vec<Option<f64>> + Sync,
) -> ExperimentOutput {
    let tasks = tasks(cfg);
    let results: Vec<Vec<Option<f64>>> = tasks.par_iter().map(|&(n, _, seed)| per_trial(n, seed)).collect();
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (li, label) in labels.iter().enumerate() {
        for chunk in tasks.chunks(cfg.trials).zip(results.chunks(cfg.trials)) {
            let (task_chunk, result_chunk) = chunk;
            let n = task_chunk[0].0;
            let errors: Vec<Option<f64>> = result_chunk.iter().map(|r| r[li]).collect();
            rows.push(MseRow::from_errors(label, cfg, n, &errors));
            trials.extend(task_chunk.iter().zip(&errors).map(|(&(n, trial, seed), &error)| TrialRecord {
                mode: label.to_string(),
                n,
                trial,
                seed,
                error,
            }));
        }
    }
    ExperimentOutput { rows, trials }
}

fn finite(e: Result<f64>) -> Option<f64> {
    e.ok().filter(|v| v.is_finite())
}

/// MSE of the (first, last) phase difference versus `n` for the configured
/// offline or sequential mode. Multiblock configurations are dispatched to
/// [`multiblock_experiment`].
pub fn mc_mse_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if matches!(cfg.mode, Mode::Multiblock(_)) {
        return multiblock_experiment(cfg);
    }
    let truth = truth_of(cfg)?;
    let l = cfg.sim.l;
    let label = cfg.mode.to_string();
    Ok(run_experiment(cfg, &[&label], |n, seed| {
        let error = plugin_for_trial(cfg, &truth, n, seed).and_then(|sigma| {
            let est = match cfg.mode {
                Mode::Offline => offline_phases(cfg.distance, &sigma, &cfg.mm)?,
                _ => sequential_phases(cfg.distance, &sigma, cfg.sim.p, &cfg.mm)?,
            };
            phase_diff_error(&est, &truth.phases, 0, l - 1)
        });
        vec![finite(error)]
    }))
}

/// Mean over the last block's dates of the squared wrapped error of the
/// phase difference to the first date.
pub fn last_block_error(theta_hat: &TorusPhases, theta_true: &TorusPhases, last: usize) -> Result<f64> {
    let l = theta_true.dim();
    if last == 0 || last > l {
        return Err(Error::OutOfRange(format!("last block of {last} dates with l = {l}")));
    }
    let mut total = 0.0;
    for j in l - last..l {
        total += phase_diff_error(theta_hat, theta_true, j, 0)?;
    }
    Ok(total / last as f64)
}

pub const MULTIBLOCK_LABELS: [&str; 3] = ["offline", "sequential", "cascaded"];

/// Estimates the last block three ways on the same trials: full offline,
/// one sequential step given an offline past, and sequential steps block by
/// block from an offline first block.
pub fn multiblock_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let Mode::Multiblock(sizes) = &cfg.mode else {
        return Err(Error::param("multiblock experiment needs a multiblock mode"));
    };
    let truth = truth_of(cfg)?;
    let last = *sizes.last().expect("validated non-empty");
    let l = cfg.sim.l;
    Ok(run_experiment(cfg, &MULTIBLOCK_LABELS, |n, seed| match plugin_for_trial(cfg, &truth, n, seed) {
        Ok(sigma) => {
            let score = |est: Result<TorusPhases>| finite(est.and_then(|w| last_block_error(&w, &truth.phases, last)));
            vec![
                score(offline_phases(cfg.distance, &sigma, &cfg.mm)),
                score(sequential_phases(cfg.distance, &sigma, l - last, &cfg.mm)),
                score(cascaded_phases(cfg.distance, &sigma, sizes, &cfg.mm)),
            ]
        }
        Err(_) => vec![None; 3],
    }))
}

pub const MSE_CSV_HEADER: &str = "mode,distance,estimator,regularizer,n,trials,excluded,mse,stderr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_mse_csv<W: Write>(w: &mut W, rows: &[MseRow]) -> Result<()> {
    writeln!(w, "{MSE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.mode,
            r.distance,
            r.plugin.estimator,
            r.plugin.regularizer,
            r.n,
            r.trials,
            r.excluded,
            opt(r.mse),
            opt(r.stderr)
        )?;
    }
    Ok(())
}

pub const TRIAL_CSV_HEADER: &str = "mode,n,trial,seed,error";

/// Per-trial squared errors; excluded trials have an empty error field.
pub fn write_trial_csv<W: Write>(w: &mut W, trials: &[TrialRecord]) -> Result<()> {
    writeln!(w, "{TRIAL_CSV_HEADER}")?;
    for t in trials {
        writeln!(w, "{},{},{},{},{}", t.mode, t.n, t.trial, t.seed, opt(t.error))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub p: usize,
    pub k: usize,
    pub distance: Distance,
    pub seq_ms: f64,
    pub offline_ms: f64,
}

impl TimingRow {
    pub fn ratio(&self) -> f64 {
        self.seq_ms / self.offline_ms
    }
}

pub const TIMING_CSV_HEADER: &str = "p,k,distance,seq_ms,offline_ms,ratio";

pub fn write_timing_csv<W: Write>(w: &mut W, rows: &[TimingRow]) -> Result<()> {
    writeln!(w, "{TIMING_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.p, r.k, r.distance, r.seq_ms, r.offline_ms, r.ratio())?;
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn time_ms<T>(f: impl FnOnce() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    std::hint::black_box(f()?);
    Ok(start.elapsed().as_secs_f64() * 1e3)
}

/// Median wall time of one sequential solve (Schur factors included) and one
/// offline solve on the same phase-only plug-in, plug-in estimation excluded.
pub fn timing_experiment(p: usize, k: usize, distance: Distance, reps: usize, seed: u64) -> Result<TimingRow> {
    if k == 0 || p < k {
        return Err(Error::param(format!("timing needs p >= k >= 1, got p = {p}, k = {k}")));
    }
    if reps == 0 {
        return Err(Error::param("timing needs at least one repetition"));
    }
    let l = p + k;
    let sim = SimulationConfig { l, p, k, n: 4 * l, seed, ..SimulationConfig::default() };
    let (_, _, sigma_true) = sim.truth()?;
    let sigma = estimate(&sample_gaussian(&sigma_true, sim.n, seed)?, &PluginSpec::phase_only())?;
    let cfg = MMConfig::default();
    let w_past = offline_phases(distance, &sigma.leading(p)?, &cfg)?;
    let mut seq = Vec::with_capacity(reps);
    let mut off = Vec::with_capacity(reps);
    for _ in 0..reps {
        seq.push(time_ms(|| {
            let blocks = BlockCov::from_cov(&sigma, p)?;
            match distance {
                Distance::Kl => solve_seq_kl(&blocks, &SchurFactors::new(&blocks, cfg.jitter)?, &w_past, &cfg),
                Distance::Frobenius => solve_seq_frob(&blocks, &w_past, &cfg),
            }
        })?);
        off.push(time_ms(|| solve_offline(distance, &sigma, &cfg))?);
    }
    Ok(TimingRow { p, k, distance, seq_ms: median(seq), offline_ms: median(off) })
}
