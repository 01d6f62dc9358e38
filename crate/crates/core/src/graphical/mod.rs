//! Graphical construction of the particle system from marked Poisson
//! processes, backward ancestries, perfect sampling of the stationary law
//! and the coupling of two ancestries.

mod ancestry;
mod cftp;
mod coupling;
mod window;

pub use ancestry::{ancestry_backward, evolve_particle, AncestrySet};
pub use cftp::{cftp_window, perfect_sample, perfect_sample_with, PerfectSample, MAX_DOUBLINGS};
pub use coupling::{
    coupled_ancestry, coupling_bound, estimate_i_probability, CouplingState, IndicatorReport,
};
pub use window::{
    evolve_forward, generate_window, EventKind, EventWindow, GraphicalKernel, MarkedEvent,
};
