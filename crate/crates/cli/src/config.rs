//! Flat `key = value` configuration files.
//!
//! Lines are `key = value` pairs; `#` starts a comment. A line `[name]`
//! opens a section. Keys that appear before the first section are globals,
//! inherited by every section unless the section overrides them. A file
//! without sections describes a single job made of its globals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use seqlink_core::harness::{ExperimentConfig, Mode};
use seqlink_core::{Distance, Estimator, MMConfig, PluginSpec, Regularizer, SimulationConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigFile {
    pub globals: BTreeMap<String, String>,
    pub sections: Vec<Section>,
}

impl FromStr for ConfigFile {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = ConfigFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                cfg.sections.push(Section { name: name.trim().to_string(), entries: BTreeMap::new() });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("config line {}: expected 'key = value', got '{line}'", i + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(CliError::usage(format!("config line {}: empty key", i + 1)));
            }
            let target = match cfg.sections.last_mut() {
                Some(section) => &mut section.entries,
                None => &mut cfg.globals,
            };
            if target.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::usage(format!("config line {}: key '{key}' set twice", i + 1)));
            }
        }
        Ok(cfg)
    }
}

impl ConfigFile {
    /// One merged key set per job: each section over the globals, or the
    /// globals alone when there are no sections.
    pub fn jobs(&self) -> Vec<(String, Keys)> {
        if self.sections.is_empty() {
            return vec![(String::new(), Keys::new(self.globals.clone()))];
        }
        self.sections
            .iter()
            .map(|s| {
                let mut merged = self.globals.clone();
                merged.extend(s.entries.clone());
                (s.name.clone(), Keys::new(merged))
            })
            .collect()
    }
}

impl fmt::Display for ConfigFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.globals {
            writeln!(f, "{k} = {v}")?;
        }
        for s in &self.sections {
            writeln!(f, "[{}]", s.name)?;
            for (k, v) in &s.entries {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

/// Key lookup that remembers which keys were read, so leftovers can be
/// reported as unknown.
#[derive(Debug, Clone)]
pub struct Keys {
    map: BTreeMap<String, String>,
    used: std::cell::RefCell<Vec<String>>,
}

impl Keys {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        Self { map, used: Default::default() }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().push(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("bad value for key '{key}': '{v}' ({e})"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<T>().map_err(|e| CliError::usage(format!("bad value for key '{key}': '{t}' ({e})")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Errors on the first key that was never read.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(k)) {
            Some(k) => Err(CliError::usage(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }
}

pub fn simulation_from(keys: &Keys) -> Result<SimulationConfig, CliError> {
    let d = SimulationConfig::default();
    let sim = SimulationConfig {
        l: keys.get_or("l", d.l)?,
        p: keys.get_or("p", d.p)?,
        k: keys.get_or("k", d.k)?,
        rho: keys.get_or("rho", d.rho)?,
        nu: keys.get_or("nu", d.nu)?,
        distribution: keys.get_or("distribution", d.distribution)?,
        n: d.n,
        seed: keys.get_or("seed", d.seed)?,
        total_phase: keys.get_or("total_phase", d.total_phase)?,
    };
    sim.validate()?;
    Ok(sim)
}

pub fn mm_from(keys: &Keys) -> Result<MMConfig, CliError> {
    let d = MMConfig::default();
    let cfg =
        MMConfig::default().with_max_iters(keys.get_or("max_iters", d.max_iters)?).with_tol(keys.get_or("tol", d.tol)?);
    cfg.validate()?;
    Ok(cfg)
}

pub fn plugin_from(keys: &Keys) -> Result<PluginSpec, CliError> {
    let estimator: Estimator = keys.get_or("estimator", Estimator::Scm)?;
    let regularizer: Regularizer = keys.get_or("regularizer", Regularizer::None)?;
    Ok(PluginSpec::new(estimator, regularizer)?)
}

pub fn experiment_from(keys: &Keys) -> Result<ExperimentConfig, CliError> {
    let d = ExperimentConfig::default();
    let mut sim = simulation_from(keys)?;
    let master_seed = keys.get_or("master_seed", sim.seed)?;
    sim.seed = master_seed;
    let cfg = ExperimentConfig {
        sim,
        plugin: plugin_from(keys)?,
        distance: keys.get_or("distance", Distance::Kl)?,
        mode: keys.get_or("mode", Mode::Offline)?,
        n_grid: keys.list("n_grid")?.unwrap_or(d.n_grid),
        trials: keys.get_or("trials", d.trials)?,
        master_seed,
        noiseless: keys.get_or("noiseless", false)?,
        mm: mm_from(keys)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Key set that reproduces `cfg` through [`experiment_from`].
pub fn experiment_echo(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    let grid: Vec<String> = cfg.n_grid.iter().map(usize::to_string).collect();
    [
        ("l", cfg.sim.l.to_string()),
        ("p", cfg.sim.p.to_string()),
        ("k", cfg.sim.k.to_string()),
        ("rho", cfg.sim.rho.to_string()),
        ("nu", cfg.sim.nu.to_string()),
        ("distribution", cfg.sim.distribution.to_string()),
        ("total_phase", cfg.sim.total_phase.to_string()),
        ("estimator", cfg.plugin.estimator.to_string()),
        ("regularizer", cfg.plugin.regularizer.to_string()),
        ("distance", cfg.distance.to_string()),
        ("mode", cfg.mode.to_string()),
        ("n_grid", grid.join(",")),
        ("trials", cfg.trials.to_string()),
        ("master_seed", cfg.master_seed.to_string()),
        ("noiseless", cfg.noiseless.to_string()),
        ("max_iters", cfg.mm.max_iters.to_string()),
        ("tol", cfg.mm.tol.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}
