//! Shared fixtures for the criterion benchmarks.

use seqlink_core::mm::solve_offline;
use seqlink_core::plugins::estimate;
use seqlink_core::simulation::{derive_seed, sample_gaussian};
use seqlink_core::{Distance, HermitianCov, MMConfig, PluginSpec, SampleStack, SimulationConfig, TorusPhases};

/// A phase-only plug-in for `p + k` dates from `4(p + k)` Gaussian samples.
pub struct Fixture {
    pub p: usize,
    pub k: usize,
    pub samples: SampleStack,
    pub sigma: HermitianCov,
}

impl Fixture {
    pub fn new(p: usize, k: usize, seed: u64) -> Self {
        let l = p + k;
        let sim = SimulationConfig { l, p, k, n: 4 * l, seed, ..SimulationConfig::default() };
        let (_, _, truth) = sim.truth().expect("valid simulation");
        let samples = sample_gaussian(&truth, sim.n, derive_seed(seed, &[l as u64])).expect("sampling");
        let sigma = estimate(&samples, &PluginSpec::phase_only()).expect("plug-in");
        Self { p, k, samples, sigma }
    }

    /// Past phases from an offline fit on the leading `p` dates.
    pub fn past_phases(&self, distance: Distance) -> TorusPhases {
        let past = self.sigma.leading(self.p).expect("p within l");
        solve_offline(distance, &past, &MMConfig::default()).expect("past fit").phases
    }
}
