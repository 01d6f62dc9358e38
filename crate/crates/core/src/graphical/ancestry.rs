//! Backward ancestry: the particles at time `r` whose states at `r` determine
//! particle `i` at time `t`.
//!
//! Reading the window backward from `t`, a regeneration of a member removes
//! it (its earlier state is forgotten) and a voter event of a member adds
//! the particle its mark points to (whose state it may copy). Internal
//! events only move a member within its own line.

use super::window::{EventKind, EventWindow, MarkedEvent};
use crate::error::{Error, Result};
use crate::fv::ParticleConfiguration;
use crate::scalar::Real;

/// Membership mask with a size counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Members {
    mask: Vec<bool>,
    size: usize,
}

impl Members {
    pub(crate) fn empty(n: usize) -> Self {
        Self {
            mask: vec![false; n],
            size: 0,
        }
    }

    pub(crate) fn singleton(n: usize, i: usize) -> Self {
        let mut m = Self::empty(n);
        m.insert(i);
        m
    }

    pub(crate) fn full(n: usize) -> Self {
        Self {
            mask: vec![true; n],
            size: n,
        }
    }

    #[inline]
    pub(crate) fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    #[inline]
    pub(crate) fn insert(&mut self, i: usize) -> bool {
        let fresh = !self.mask[i];
        if fresh {
            self.mask[i] = true;
            self.size += 1;
        }
        fresh
    }

    #[inline]
    pub(crate) fn remove(&mut self, i: usize) -> bool {
        let present = self.mask[i];
        if present {
            self.mask[i] = false;
            self.size -= 1;
        }
        present
    }

    pub(crate) fn len(&self) -> usize {
        self.size
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub(crate) fn to_vec(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// Backward update at `ev`. Returns whether the event belongs to the
    /// ancestry (its particle is a member just after the event) and the
    /// particle added, if any.
    #[inline]
    pub(crate) fn step_back<T>(&mut self, ev: &MarkedEvent<T>) -> (bool, Option<usize>) {
        if !self.mask[ev.particle] {
            return (false, None);
        }
        match ev.kind {
            EventKind::Regeneration => {
                self.remove(ev.particle);
                (true, None)
            }
            EventKind::Internal => (true, None),
            EventKind::Voter => {
                let c = ev.partner.expect("voter mark");
                (true, self.insert(c).then_some(c))
            }
        }
    }
}

/// `Ψ^i[r, t]` for `r` running back from `t` to the window start.
#[derive(Debug, Clone, PartialEq)]
pub struct AncestrySet<T> {
    pub particle: usize,
    pub start: T,
    pub end: T,
    /// `(τ, set)`: the set valid for `r < τ` until the next entry; the first
    /// entry is `(end, {i})`.
    pub path: Vec<(T, Vec<usize>)>,
    /// Indices of the window's events whose particle is a member just after
    /// the event: the events that particle `i` at `end` depends on.
    pub events: Vec<usize>,
}

impl<T: Real> AncestrySet<T> {
    /// `Ψ^i[r, t]`.
    pub fn at(&self, r: T) -> &[usize] {
        let mut out = &self.path[0].1;
        for (tau, set) in &self.path[1..] {
            if r < *tau {
                out = set;
            } else {
                break;
            }
        }
        out
    }

    /// `Ψ^i[s, t]` at the window start.
    pub fn support(&self) -> &[usize] {
        &self.path.last().expect("non-empty path").1
    }

    /// Backward time at which the set became empty.
    pub fn emptied_at(&self) -> Option<T> {
        self.path
            .last()
            .filter(|(_, s)| s.is_empty())
            .map(|&(tau, _)| tau)
    }
}

pub fn ancestry_backward<T: Real>(window: &EventWindow<T>, i: usize) -> Result<AncestrySet<T>> {
    if i >= window.n {
        return Err(Error::InvalidArgument(format!(
            "particle {i} out of range for {} particles",
            window.n
        )));
    }
    let mut set = Members::singleton(window.n, i);
    let mut path = vec![(window.end, vec![i])];
    let mut events = Vec::new();
    for (k, ev) in window.events.iter().enumerate().rev() {
        if set.is_empty() {
            break;
        }
        let before = set.len();
        let (relevant, added) = set.step_back(ev);
        if relevant {
            events.push(k);
        }
        if added.is_some() || set.len() != before {
            path.push((ev.time, set.to_vec()));
        }
    }
    events.reverse();
    Ok(AncestrySet {
        particle: i,
        start: window.start,
        end: window.end,
        path,
        events,
    })
}

/// State of particle `i` at the window end computed from the initial states
/// of its ancestry and the events it depends on only.
pub fn evolve_particle<T: Real>(
    window: &EventWindow<T>,
    ancestry: &AncestrySet<T>,
    initial: &ParticleConfiguration<T>,
) -> Result<usize> {
    if initial.len() != window.n || initial.clock != window.start {
        return Err(Error::InvalidArgument(
            "configuration must match the window's size and start".into(),
        ));
    }
    // Non-members keep stale states; they are never read.
    let mut states = initial.states.clone();
    for &k in &ancestry.events {
        window.apply_event(&mut states, &window.events[k]);
    }
    Ok(states[ancestry.particle])
}
