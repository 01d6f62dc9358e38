//! Coupling from the past.
//!
//! The window `[-2^k, 0]` is the union of the segments `[-1, 0]` and
//! `[-2^m, -2^(m-1)]` for `m = 1..k`, each generated from its own keyed
//! stream, so doubling never changes events already drawn. Once the union of
//! all ancestries is empty at some time in the window, the configuration at
//! 0 no longer depends on the configuration at `-2^k`.

use std::sync::Arc;

use super::ancestry::Members;
use super::window::{evolve_forward, EventWindow, GraphicalKernel};
use crate::chain::RateMatrix;
use crate::error::{Error, Result};
use crate::fv::ParticleConfiguration;
use crate::rng::derive_key;
use crate::scalar::Real;

pub const MAX_DOUBLINGS: u32 = 30;

const TAG_SEGMENT: u64 = 0xcf79;

#[derive(Debug, Clone)]
pub struct PerfectSample<T> {
    /// Configuration at time 0.
    pub config: ParticleConfiguration<T>,
    /// Doublings used: the window is `[-2^k, 0]`.
    pub doublings: u32,
    /// Latest time at which every ancestry was empty.
    pub coalescence_time: T,
    pub window: EventWindow<T>,
}

fn checked_kernel<T: Real>(rates: &RateMatrix<T>, n: usize) -> Result<Arc<GraphicalKernel<T>>> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 particles".into()));
    }
    let kernel = GraphicalKernel::new(rates);
    if !(kernel.alpha() > T::zero()) {
        return Err(Error::NoRegeneration("perfect sampling"));
    }
    Ok(Arc::new(kernel))
}

fn segment<T: Real>(
    kernel: &Arc<GraphicalKernel<T>>,
    n: usize,
    seed: u64,
    m: u32,
) -> EventWindow<T> {
    let two = T::lit(2.0);
    let (s, t) = if m == 0 {
        (-T::one(), T::zero())
    } else {
        (-two.powi(m as i32), -two.powi(m as i32 - 1))
    };
    EventWindow::from_segment(
        kernel.clone(),
        n,
        s,
        t,
        derive_key(seed, &[TAG_SEGMENT, m as u64]),
    )
}

/// The window `[-2^k, 0]` used at doubling level `k`.
pub fn cftp_window<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    seed: u64,
    k: u32,
) -> Result<EventWindow<T>> {
    let kernel = checked_kernel(rates, n)?;
    let mut w = segment(&kernel, n, seed, 0);
    for m in 1..=k {
        w.extend_back(segment(&kernel, n, seed, m));
    }
    Ok(w)
}

pub fn perfect_sample<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    seed: u64,
) -> Result<PerfectSample<T>> {
    perfect_sample_with(rates, n, seed, MAX_DOUBLINGS)
}

pub fn perfect_sample_with<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    seed: u64,
    max_doublings: u32,
) -> Result<PerfectSample<T>> {
    let kernel = checked_kernel(rates, n)?;
    let mut window = segment(&kernel, n, seed, 0);
    let mut union = Members::full(n);
    // Events of the window not yet read backward: `events[..pending]`.
    let mut pending = window.events.len();
    let mut k = 0;
    loop {
        let mut emptied = None;
        for ev in window.events[..pending].iter().rev() {
            union.step_back(ev);
            if union.is_empty() {
                emptied = Some(ev.time);
                break;
            }
        }
        if let Some(tau) = emptied {
            let start = ParticleConfiguration::new(vec![0; n], window.start)?;
            let config = evolve_forward(&window, &start)?;
            return Ok(PerfectSample {
                config,
                doublings: k,
                coalescence_time: tau,
                window,
            });
        }
        if k == max_doublings {
            return Err(Error::NoCoalescence {
                doublings: k,
                ancestry_size: union.len(),
            });
        }
        k += 1;
        let earlier = segment(&kernel, n, seed, k);
        pending = earlier.events.len();
        window.extend_back(earlier);
    }
}
