//! Deterministic random substreams.
//!
//! Each random draw made by the filter, the simulator and the forecaster comes
//! from a small generator keyed by `(seed, purpose, step, particle, leaf)`.
//! The draws for one particle therefore never depend on how particles are
//! scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init = 1,
    Propagate = 2,
    Resample = 3,
    Observe = 4,
    Forecast = 5,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Root of a tree of substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    pub seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Substreams { seed }
    }

    /// Streams for one step of one purpose.
    #[inline]
    pub fn at(&self, purpose: Purpose, step: u64) -> StepStreams {
        let h = mix(self.seed.wrapping_add(GOLDEN.wrapping_mul(purpose as u64)));
        StepStreams {
            base: mix(h ^ step.wrapping_add(1).wrapping_mul(0xd6e8_feb8_6659_fd93)),
        }
    }

    /// Shorthand for `at(purpose, step).stream(particle, leaf)`.
    pub fn stream(&self, purpose: Purpose, step: u64, particle: u64, leaf: u64) -> SplitMix64 {
        self.at(purpose, step).stream(particle, leaf)
    }

    /// A derived seed, for seeding child computations such as one filter run
    /// per MCMC iteration.
    pub fn child_seed(&self, index: u64) -> u64 {
        mix(mix(self.seed ^ 0x5851_f42d_4c95_7f2d) ^ index.wrapping_mul(GOLDEN))
    }
}

/// Substreams sharing a purpose and step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepStreams {
    base: u64,
}

impl StepStreams {
    #[inline]
    pub fn stream(&self, particle: u64, leaf: u64) -> SplitMix64 {
        let k = mix(self.base ^ particle.wrapping_add(1).wrapping_mul(GOLDEN));
        SplitMix64::seed_from_u64(k.wrapping_add(leaf.wrapping_mul(0xa076_1d64_78bd_642f)))
    }
}
