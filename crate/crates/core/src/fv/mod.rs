//! Fleming-Viot particle system: `N` particles move independently with the
//! chain's rates; a particle hitting the absorbing state jumps onto the
//! position of another particle chosen uniformly.

mod dynamics;
mod estimate;
mod exact;
mod types;

pub use dynamics::{fv_init, fv_run, Dynamics, EventStream, FvEvent, Mode, Move, MoveKind};
pub use estimate::{
    estimate_profile, estimate_stationary, profile_samples, MomentEstimate, StationaryEstimate,
    StationaryOptions, TypeOccupancy, DEFAULT_BATCHES,
};
pub use exact::{
    compositions, exact_unlabeled_stationary, unlabeled_transitions, UnlabeledLaw,
    MAX_CONFIGURATIONS,
};
pub use types::{check_type_bound, BoundRelation, TypeBoundReport, TypeBoundRow};

use crate::error::{Error, Result};

/// Default cap on tracked particle types.
pub const DEFAULT_TYPE_CAP: u32 = 16;

/// Labeled particle positions `ξ(i)` at time `clock`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfiguration<T> {
    pub states: Vec<usize>,
    pub clock: T,
}

impl<T> ParticleConfiguration<T> {
    pub fn new(states: Vec<usize>, clock: T) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 particles, got {}",
                states.len()
            )));
        }
        Ok(Self { states, clock })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn occupation(&self, n_states: usize) -> Occupation {
        Occupation::from_states(&self.states, n_states)
    }
}

/// Particle counts per state, `η(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation {
    pub counts: Vec<usize>,
}

impl Occupation {
    pub fn from_states(states: &[usize], n_states: usize) -> Self {
        let mut counts = vec![0; n_states];
        for &s in states {
            counts[s] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `η(x) / N`.
    pub fn profile(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Per-particle types: 0 until the first absorption; a particle that jumps
/// onto a type-`k` particle becomes type `k + 1`. Types above `cap` are
/// stored as `cap + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeLedger {
    types: Vec<u32>,
    cap: u32,
    reset_on_regeneration: bool,
}

impl TypeLedger {
    /// Types never reset (transient bounds).
    pub fn transient(n: usize, cap: u32) -> Self {
        Self {
            types: vec![0; n],
            cap,
            reset_on_regeneration: false,
        }
    }

    /// Types reset to 0 at regeneration marks (stationary bounds).
    pub fn stationary(n: usize, cap: u32) -> Self {
        Self {
            types: vec![0; n],
            cap,
            reset_on_regeneration: true,
        }
    }

    pub fn types(&self) -> &[u32] {
        &self.types
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn resets_on_regeneration(&self) -> bool {
        self.reset_on_regeneration
    }

    /// Particles whose type exceeded the cap.
    pub fn overflow(&self) -> usize {
        self.types.iter().filter(|&&k| k > self.cap).count()
    }

    pub(crate) fn absorbed_onto(&mut self, i: usize, j: usize) {
        self.types[i] = (self.types[j] + 1).min(self.cap + 1);
    }

    pub(crate) fn regenerated(&mut self, i: usize) {
        if self.reset_on_regeneration {
            self.types[i] = 0;
        }
    }
}
