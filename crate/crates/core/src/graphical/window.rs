//! Marked Poisson events of the graphical construction.
//!
//! Each particle carries three Poisson processes: regenerations at rate `α`
//! with mark `A ~ α(·)/α`, internal events at rate `r` with marks
//! `B(x) = y` with probability `(q(x,y) - α(y))/r` (staying put otherwise),
//! and voter events at rate `C` with marks `F(x) = 1` with probability
//! `q(x,0)/C` and `C` uniform among the other particles. `r` is the smallest
//! rate making every `B(x)` a probability, `max_x Σ_y (q(x,y) - α(y))`.
//!
//! `B` and `F` are functions of the state. They are sampled on demand from a
//! counter-based generator keyed by the event and the queried state, so an
//! event always answers the same query the same way.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;

use crate::chain::{doeblin_rates, RateMatrix};
use crate::error::{Error, Result};
use crate::fv::ParticleConfiguration;
use crate::rng::{derive_key, keyed_uniform, stream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Regeneration,
    Internal,
    Voter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedEvent<T> {
    pub time: T,
    pub particle: usize,
    pub kind: EventKind,
    /// Key of the lazily sampled marks `B(x)`, `F(x)`.
    pub key: u64,
    /// Mark `A` of a regeneration.
    pub target: Option<usize>,
    /// Mark `C` of a voter event.
    pub partner: Option<usize>,
}

/// Rates and mark tables of the construction for one chain.
#[derive(Debug, Clone)]
pub struct GraphicalKernel<T> {
    n_states: usize,
    alpha: T,
    internal: T,
    c: T,
    regen: Vec<(usize, T)>,
    jumps: Vec<Vec<(usize, T)>>,
    absorb: Vec<T>,
}

fn cumulative<T: Real>(items: impl Iterator<Item = (usize, T)>) -> Vec<(usize, T)> {
    let mut acc = T::zero();
    items
        .filter(|(_, w)| *w > T::zero())
        .map(|(y, w)| {
            acc = acc + w;
            (y, acc)
        })
        .collect()
}

impl<T: Real> GraphicalKernel<T> {
    /// Accepts any chain, including `α = 0` or `C = 0`.
    pub fn new(rates: &RateMatrix<T>) -> Self {
        let n = rates.len();
        let az = doeblin_rates(rates);
        let jumps: Vec<Vec<(usize, T)>> = (0..n)
            .map(|x| cumulative(rates.row(x).iter().map(|&(y, q)| (y, q - az[y]))))
            .collect();
        let internal = jumps
            .iter()
            .filter_map(|j| j.last().map(|&(_, c)| c))
            .fold(T::zero(), |m, v| m.max(v));
        Self {
            n_states: n,
            alpha: az.iter().fold(T::zero(), |a, &v| a + v),
            internal,
            c: rates.max_absorption(),
            regen: cumulative(az.into_iter().enumerate()),
            jumps,
            absorb: rates.absorption_rates().to_vec(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn internal_rate(&self) -> T {
        self.internal
    }

    pub fn c(&self) -> T {
        self.c
    }

    /// Event rate of one particle, `α + r + C`.
    pub fn rate_per_particle(&self) -> T {
        self.alpha + self.internal + self.c
    }

    /// Mark `B(x)` of an internal event.
    pub fn internal_mark(&self, ev: &MarkedEvent<T>, x: usize) -> usize {
        let s = T::lit(keyed_uniform(derive_key(ev.key, &[x as u64]))) * self.internal;
        let table = &self.jumps[x];
        let i = table.partition_point(|&(_, c)| c <= s);
        table.get(i).map_or(x, |&(y, _)| y)
    }

    /// Mark `F(x)` of a voter event.
    pub fn voter_mark(&self, ev: &MarkedEvent<T>, x: usize) -> bool {
        T::lit(keyed_uniform(derive_key(ev.key, &[x as u64]))) * self.c < self.absorb[x]
    }

    /// Events on `[s, t)` for `n` particles, from the stream keyed by `key`.
    pub(crate) fn segment(&self, n: usize, s: T, t: T, key: u64) -> Vec<MarkedEvent<T>> {
        let per = self.rate_per_particle();
        let total = per * T::from_count(n);
        let mut out = Vec::new();
        if !(total > T::zero()) {
            return out;
        }
        let mut rng = stream(key, &[]);
        let mut time = s;
        let mut seq = 0u64;
        loop {
            let e: f64 = rng.sample(Exp1);
            time = time + T::lit(e) / total;
            if !(time < t) {
                break;
            }
            let particle = rng.random_range(0..n);
            let u = T::lit(rng.random::<f64>()) * per;
            let mut ev = MarkedEvent {
                time,
                particle,
                kind: EventKind::Internal,
                key: derive_key(key, &[seq]),
                target: None,
                partner: None,
            };
            if u < self.alpha {
                ev.kind = EventKind::Regeneration;
                let i = self.regen.partition_point(|&(_, c)| c <= u);
                ev.target = Some(self.regen[i.min(self.regen.len() - 1)].0);
            } else if u >= self.alpha + self.internal {
                ev.kind = EventKind::Voter;
                let k = rng.random_range(0..n - 1);
                ev.partner = Some(if k >= particle { k + 1 } else { k });
            }
            out.push(ev);
            seq += 1;
        }
        // Floating-point ties are broken by kind, then particle; the sort is
        // stable, so generation order decides the rest.
        out.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .expect("finite times")
                .then(a.kind.cmp(&b.kind))
                .then(a.particle.cmp(&b.particle))
        });
        out
    }
}

/// Time-sorted marked events of `n` particles on `[start, end]`.
#[derive(Debug, Clone)]
pub struct EventWindow<T> {
    pub start: T,
    pub end: T,
    pub n: usize,
    pub events: Vec<MarkedEvent<T>>,
    pub kernel: Arc<GraphicalKernel<T>>,
}

impl<T: Real> EventWindow<T> {
    pub(crate) fn from_segment(
        kernel: Arc<GraphicalKernel<T>>,
        n: usize,
        s: T,
        t: T,
        key: u64,
    ) -> Self {
        let events = kernel.segment(n, s, t, key);
        Self {
            start: s,
            end: t,
            n,
            events,
            kernel,
        }
    }

    /// Prepends the events of an earlier window ending where this one starts.
    pub(crate) fn extend_back(&mut self, earlier: EventWindow<T>) {
        debug_assert!(earlier.end == self.start);
        let mut events = earlier.events;
        events.append(&mut self.events);
        self.events = events;
        self.start = earlier.start;
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub(crate) fn apply_event(&self, states: &mut [usize], ev: &MarkedEvent<T>) {
        let i = ev.particle;
        match ev.kind {
            EventKind::Regeneration => states[i] = ev.target.expect("regeneration mark"),
            EventKind::Internal => states[i] = self.kernel.internal_mark(ev, states[i]),
            EventKind::Voter => {
                if self.kernel.voter_mark(ev, states[i]) {
                    states[i] = states[ev.partner.expect("voter mark")];
                }
            }
        }
    }
}

/// Events of `n` particles on `[s, t]`. Refuses chains with `α = 0`, whose
/// ancestries never empty.
pub fn generate_window<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    s: T,
    t: T,
    seed: u64,
) -> Result<EventWindow<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 particles".into()));
    }
    if !(s < t) || !(t - s).is_finite() {
        return Err(Error::InvalidArgument("window needs finite s < t".into()));
    }
    let kernel = GraphicalKernel::new(rates);
    if !(kernel.alpha() > T::zero()) {
        return Err(Error::NoRegeneration("the graphical construction"));
    }
    let key = derive_key(seed, &[s.approx().to_bits(), t.approx().to_bits()]);
    Ok(EventWindow::from_segment(Arc::new(kernel), n, s, t, key))
}

/// Applies the window's events in time order.
pub fn evolve_forward<T: Real>(
    window: &EventWindow<T>,
    initial: &ParticleConfiguration<T>,
) -> Result<ParticleConfiguration<T>> {
    if initial.len() != window.n {
        return Err(Error::InvalidArgument(format!(
            "configuration has {} particles, window has {}",
            initial.len(),
            window.n
        )));
    }
    if initial
        .states
        .iter()
        .any(|&x| x >= window.kernel.n_states())
    {
        return Err(Error::InvalidArgument("particle state out of range".into()));
    }
    if initial.clock != window.start {
        return Err(Error::InvalidArgument(
            "configuration clock must equal the window start".into(),
        ));
    }
    let mut states = initial.states.clone();
    for ev in &window.events {
        window.apply_event(&mut states, ev);
    }
    Ok(ParticleConfiguration {
        states,
        clock: window.end,
    })
}
