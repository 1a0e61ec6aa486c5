//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use seqlink_core::harness::{mc_mse_experiment, timing_experiment, write_mse_csv, write_timing_csv, write_trial_csv};
use seqlink_core::io::{load_phases, load_stack, read_truth_csv, save_phases, save_stack, DType};
use seqlink_core::raster::{noiseless_stack, process_stack_offline, process_stack_sequential, window_size};
use seqlink_core::simulation::{sample, SimulationConfig};
use seqlink_core::torus::wrap_angle;
use seqlink_core::{Distance, Estimator, ImageStack, MMConfig, PhaseRaster, PluginSpec, Regularizer, TorusPhases};

use crate::config::{experiment_echo, experiment_from, simulation_from, ConfigFile};
use crate::manifest::{manifest_path, Manifest};
use crate::{BenchArgs, CliError, OutputFormat, SimulateArgs, SolveArgs, SolveMode, TimingArgs};

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse()
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} {} does not exist", path.display())))
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn absolute(path: &Path) -> String {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()).display().to_string()
}

fn parse_flag<T: std::str::FromStr>(flag: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::usage(format!("invalid --{flag} '{value}': {e}")))
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = read_config(&args.config)?;
    let jobs = cfg.jobs();
    if jobs.len() != 1 {
        return Err(CliError::usage("simulate expects a config without sections"));
    }
    let keys = &jobs[0].1;
    let sim: SimulationConfig = simulation_from(keys)?;
    let height: usize = keys.get_or("height", 32)?;
    let width: usize = keys.get_or("width", 32)?;
    let noiseless: bool = keys.get_or("noiseless", false)?;
    let window: usize = keys.get_or("window", 8)?;
    let dtype = match keys.get_or("dtype", "c128".to_string())?.as_str() {
        "c64" => DType::Complex64,
        "c128" => DType::Complex128,
        other => return Err(CliError::usage(format!("bad value for key 'dtype': '{other}' (expected c64 or c128)"))),
    };
    keys.finish()?;
    if height == 0 || width == 0 {
        return Err(CliError::usage("height and width must be positive"));
    }

    let full = with_suffix(&args.out, ".stack");
    let past = with_suffix(&args.out, ".past.stack");
    let new = with_suffix(&args.out, ".new.stack");
    let truth_path = with_suffix(&args.out, ".truth.csv");
    let mut manifest = Manifest::new("simulate");
    manifest.echo("config", &cfg.globals);
    manifest.set("seed", sim.seed);
    manifest.set("output.stack", full.display());
    manifest.set("output.past_stack", past.display());
    manifest.set("output.new_stack", new.display());
    manifest.set("output.truth", truth_path.display());
    let manifest_file = manifest_path(&full);
    manifest.write(&manifest_file)?;

    let (_, truth, sigma) = sim.truth()?;
    let stack = if noiseless {
        noiseless_stack(&sigma, height, width, window)?
    } else {
        let draws = sample(&sigma, &SimulationConfig { n: height * width, ..sim.clone() }, sim.seed)?;
        let samples = draws.samples();
        ImageStack::from_pixels(sim.l, height, width, |r, c| samples[r * width + c].clone().into())?
    };
    save_stack(&full, &stack, dtype)?;
    save_stack(&past, &stack.images(0, sim.p)?, dtype)?;
    save_stack(&new, &stack.images(sim.p, sim.k)?, dtype)?;
    let mut w = BufWriter::new(File::create(&truth_path)?);
    seqlink_core::io::write_truth_csv(&mut w, &truth)?;
    w.flush()?;

    manifest.finish();
    manifest.write(&manifest_file)
}

/// Maximum wrapped error of the phases at each unmasked pixel against the
/// truth re-anchored at its first date. Sequential outputs are compared with
/// the trailing dates of the truth. Returns the maximum over pixels whose
/// window lies fully inside the raster, and over all unmasked pixels.
fn truth_errors(raster: &PhaseRaster, truth: &TorusPhases, window: usize) -> Result<(f64, f64), CliError> {
    let angles = truth.angles();
    if angles.len() < raster.count() {
        return Err(CliError::usage(format!(
            "truth has {} dates but the output has {} phases",
            angles.len(),
            raster.count()
        )));
    }
    let offset = angles.len() - raster.count();
    let want: Vec<f64> = angles[offset..].iter().map(|t| wrap_angle(t - angles[0])).collect();
    let (mut interior, mut all) = (0.0f64, 0.0f64);
    for r in 0..raster.height() {
        for c in 0..raster.width() {
            if raster.is_masked(r, c) {
                continue;
            }
            let err =
                raster.angles_at(r, c).iter().zip(&want).map(|(a, b)| wrap_angle(a - b).abs()).fold(0.0, f64::max);
            all = all.max(err);
            if window_size(raster.height(), raster.width(), r, c, window) == window * window {
                interior = interior.max(err);
            }
        }
    }
    Ok((interior, all))
}

fn write_flags(path: &Path, raster: &PhaseRaster) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "row,col,masked,undersampled")?;
    for r in 0..raster.height() {
        for c in 0..raster.width() {
            let p = r * raster.width() + c;
            writeln!(w, "{r},{c},{},{}", u8::from(raster.mask()[p]), u8::from(raster.undersampled()[p]))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let distance: Distance = parse_flag("distance", &args.distance)?;
    let estimator: Estimator = parse_flag("estimator", &args.estimator)?;
    let regularizer: Regularizer = parse_flag("regularizer", &args.regularizer)?;
    let spec = PluginSpec::new(estimator, regularizer)?;
    let cfg = MMConfig::default().with_max_iters(args.max_iters).with_tol(args.tol);
    cfg.validate()?;
    if args.window == 0 {
        return Err(CliError::usage("--window must be at least 1"));
    }
    require_file(&args.stack, "stack")?;
    if let Some(t) = &args.truth {
        require_file(t, "truth file")?;
    }

    let past = match args.mode {
        SolveMode::Offline => None,
        SolveMode::Sequential => {
            let phases =
                args.past_phases.as_ref().ok_or_else(|| CliError::usage("sequential mode requires --past-phases"))?;
            require_file(phases, "past phase raster")?;
            let stack = match &args.past_stack {
                Some(s) => s.clone(),
                None => {
                    let m = Manifest::read(&manifest_path(phases))?;
                    PathBuf::from(m.get("input_stack").ok_or_else(|| {
                        CliError::usage("sequential mode requires --past-stack or a past manifest with input_stack")
                    })?)
                }
            };
            require_file(&stack, "past stack")?;
            Some((phases.clone(), stack))
        }
    };

    let manifest_file = manifest_path(&args.out);
    let mut manifest = Manifest::new("solve");
    manifest.set("input_stack", absolute(&args.stack));
    manifest.set("mode", format!("{:?}", args.mode).to_ascii_lowercase());
    manifest.set("distance", distance);
    manifest.set("estimator", estimator);
    manifest.set("regularizer", regularizer);
    manifest.set("window", args.window);
    manifest.set("max_iters", cfg.max_iters);
    manifest.set("tol", cfg.tol);
    if let Some((phases, stack)) = &past {
        manifest.set("past_phases", absolute(phases));
        manifest.set("past_stack", absolute(stack));
    }
    manifest.set("format", format!("{:?}", args.format).to_ascii_lowercase());
    manifest.set("output", args.out.display());
    manifest.write(&manifest_file)?;

    let stack = load_stack(&args.stack)?;
    let raster = match &past {
        None => process_stack_offline(&stack, &spec, distance, args.window, &cfg)?,
        Some((phases, past_stack)) => {
            let past_phases = load_phases(phases)?;
            let past_stack = load_stack(past_stack)?;
            process_stack_sequential(&stack, &past_phases, &past_stack, &spec, distance, args.window, &cfg)?
        }
    };

    let binary = args.format == OutputFormat::Bin;
    save_phases(&args.out, &raster, binary)?;
    if !binary {
        let flags = with_suffix(&args.out, ".flags.csv");
        write_flags(&flags, &raster)?;
        manifest.set("output.flags", flags.display());
    }
    let pixels = raster.height() * raster.width();
    let masked = raster.masked_count();
    let undersampled = raster.undersampled().iter().filter(|u| **u).count();
    manifest.set("pixels", pixels);
    manifest.set("masked", masked);
    manifest.set("undersampled", undersampled);
    if masked > 0 {
        eprintln!("warning: {masked} of {pixels} pixels failed and were masked");
    }
    if let Some(t) = &args.truth {
        let truth = read_truth_csv(BufReader::new(File::open(t)?))?;
        let (interior, all) = truth_errors(&raster, &truth, args.window)?;
        manifest.set("truth", absolute(t));
        manifest.set("max_error", interior);
        manifest.set("max_error_all", all);
    }
    manifest.finish();
    manifest.write(&manifest_file)
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let file = read_config(&args.config)?;
    let mut jobs = Vec::new();
    for (name, keys) in file.jobs() {
        let cfg = experiment_from(&keys)
            .map_err(|e| CliError::usage(if name.is_empty() { e.to_string() } else { format!("[{name}]: {e}") }))?;
        keys.finish()?;
        jobs.push((name, cfg));
    }

    let manifest_file = manifest_path(&args.out);
    let mut manifest = Manifest::new("bench");
    manifest.set("jobs", jobs.len());
    for (i, (name, cfg)) in jobs.iter().enumerate() {
        manifest.set(&format!("job.{i}.name"), name);
        manifest.echo(&format!("job.{i}"), &experiment_echo(cfg));
    }
    manifest.set("output", args.out.display());
    if let Some(t) = &args.trials_out {
        manifest.set("output.trials", t.display());
    }
    manifest.write(&manifest_file)?;

    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (_, cfg) in &jobs {
        let out = mc_mse_experiment(cfg)?;
        rows.extend(out.rows);
        trials.extend(out.trials);
    }
    let excluded: usize = rows.iter().map(|r| r.excluded).sum();
    if excluded > 0 {
        eprintln!("note: {excluded} trial results excluded after solver failures");
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_mse_csv(&mut w, &rows)?;
    w.flush()?;
    if let Some(t) = &args.trials_out {
        let mut w = BufWriter::new(File::create(t)?);
        write_trial_csv(&mut w, &trials)?;
        w.flush()?;
    }
    manifest.finish();
    manifest.write(&manifest_file)
}

pub fn timing(args: &TimingArgs) -> Result<(), CliError> {
    let distance: Distance = parse_flag("distance", &args.distance)?;
    let row = timing_experiment(args.p, args.k, distance, args.reps, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_timing_csv(&mut w, &[row])?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            write_timing_csv(&mut stdout.lock(), &[row])?;
        }
    }
    Ok(())
}
