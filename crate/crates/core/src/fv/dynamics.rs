//! Event-driven simulation by thinning.
//!
//! Every particle carries a Poisson clock of a fixed dominating rate. At a
//! ring the particle's current state and a uniform mark decide what happens.
//! In [`Mode::Minimal`] the dominating rate is `q̄` and the mark is split into
//! internal jumps, absorption and a no-op. In [`Mode::Graphical`] the rate is
//! `α + r + C` and the mark is split into a regeneration (target drawn from
//! `α(·)/α`), an internal jump with rates `q(x,y) - α(y)`, and a voter event
//! firing with probability `q(x,0)/C`. Both give the same particle process;
//! the second one exposes regenerations, which the stationary type ledger
//! needs.

use rand::Rng;
use rand_distr::Exp1;

use super::{ParticleConfiguration, TypeLedger};
use crate::chain::{validate_chain, Distribution, RateMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};
use crate::scalar::Real;

const TAG_INIT: u64 = 0x1417;
const TAG_RUN: u64 = 0x2a11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Minimal,
    Graphical,
}

/// One ring of a particle clock. `u` is uniform in [0,1); `partner` is
/// uniform among the other particles and used only if the particle is
/// absorbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvEvent<T> {
    pub time: T,
    pub particle: usize,
    pub u: f64,
    pub partner: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Internal,
    Absorption,
    Regeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub particle: usize,
    pub from: usize,
    pub to: usize,
    pub kind: MoveKind,
}

/// Precomputed thinning tables for one chain.
#[derive(Debug, Clone)]
pub struct Dynamics<T> {
    mode: Mode,
    n_states: usize,
    rate: T,
    alpha: T,
    internal_cap: T,
    /// Cumulative regeneration weights `α(z)`.
    regen: Vec<(usize, T)>,
    /// Cumulative internal jump weights per state.
    jumps: Vec<Vec<(usize, T)>>,
    jump_total: Vec<T>,
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

fn pick<T: Real>(table: &[(usize, T)], s: T) -> usize {
    let i = table.partition_point(|&(_, c)| c <= s);
    // Rounding can push `s` past the last cumulative value.
    table[i.min(table.len() - 1)].0
}

impl<T: Real> Dynamics<T> {
    pub fn new(rates: &RateMatrix<T>, mode: Mode) -> Result<Self> {
        let n = rates.len();
        let absorb = rates.absorption_rates().to_vec();
        match mode {
            // No absorption is allowed here: the particles then move independently.
            Mode::Minimal => {
                let jumps: Vec<_> = (0..n)
                    .map(|x| cumulative(rates.row(x).iter().copied()))
                    .collect();
                let jump_total = (0..n).map(|x| rates.internal_rate(x)).collect();
                Ok(Self {
                    mode,
                    n_states: n,
                    rate: rates.qbar(),
                    alpha: T::zero(),
                    internal_cap: T::zero(),
                    regen: Vec::new(),
                    jumps,
                    jump_total,
                    absorb,
                })
            }
            Mode::Graphical => {
                let summary = validate_chain(rates)?;
                if !summary.perfect_sampling_available() {
                    return Err(Error::NoRegeneration("the graphical construction"));
                }
                let az = &summary.alpha_z;
                let jumps: Vec<_> = (0..n)
                    .map(|x| cumulative(rates.row(x).iter().map(|&(y, q)| (y, q - az[y]))))
                    .collect();
                let jump_total: Vec<T> = jumps
                    .iter()
                    .map(|j| j.last().map_or(T::zero(), |&(_, c)| c))
                    .collect();
                let internal_cap = jump_total.iter().fold(T::zero(), |m, &v| m.max(v));
                Ok(Self {
                    mode,
                    n_states: n,
                    rate: summary.alpha + internal_cap + summary.c,
                    alpha: summary.alpha,
                    internal_cap,
                    regen: cumulative(az.iter().copied().enumerate()),
                    jumps,
                    jump_total,
                    absorb,
                })
            }
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Dominating clock rate of a single particle.
    pub fn rate_per_particle(&self) -> T {
        self.rate
    }

    /// Applies one clock ring to `states`; returns the move if the particle
    /// changed state or was regenerated.
    pub fn apply(
        &self,
        states: &mut [usize],
        ev: &FvEvent<T>,
        ledger: Option<&mut TypeLedger>,
    ) -> Option<Move> {
        let i = ev.particle;
        let x = states[i];
        let mut s = T::lit(ev.u) * self.rate;
        if self.mode == Mode::Graphical {
            if s < self.alpha {
                let to = pick(&self.regen, s);
                states[i] = to;
                if let Some(l) = ledger {
                    l.regenerated(i);
                }
                return Some(Move {
                    particle: i,
                    from: x,
                    to,
                    kind: MoveKind::Regeneration,
                });
            }
            s = s - self.alpha;
        }
        if s < self.jump_total[x] {
            let to = pick(&self.jumps[x], s);
            states[i] = to;
            return Some(Move {
                particle: i,
                from: x,
                to,
                kind: MoveKind::Internal,
            });
        }
        s = if self.mode == Mode::Graphical {
            s - self.internal_cap
        } else {
            s - self.jump_total[x]
        };
        if s >= T::zero() && s < self.absorb[x] {
            let to = states[ev.partner];
            states[i] = to;
            if let Some(l) = ledger {
                l.absorbed_onto(i, ev.partner);
            }
            return Some(Move {
                particle: i,
                from: x,
                to,
                kind: MoveKind::Absorption,
            });
        }
        None
    }
}

/// Superposition of `N` particle clocks.
pub struct EventStream<T> {
    rng: StreamRng,
    n: usize,
    total: T,
    clock: T,
}

impl<T: Real> EventStream<T> {
    pub fn new(rate_per_particle: T, n: usize, start: T, rng: StreamRng) -> Self {
        Self {
            rng,
            n,
            total: rate_per_particle * T::from_count(n),
            clock: start,
        }
    }

    pub fn next_event(&mut self) -> FvEvent<T> {
        let e: f64 = self.rng.sample(Exp1);
        self.clock = self.clock + T::lit(e) / self.total;
        let particle = self.rng.random_range(0..self.n);
        let u = self.rng.random::<f64>();
        let k = self.rng.random_range(0..self.n - 1);
        FvEvent {
            time: self.clock,
            particle,
            u,
            partner: if k >= particle { k + 1 } else { k },
        }
    }
}

/// `N` i.i.d. particles with law `mu`.
pub fn fv_init<T: Real>(
    mu: &Distribution<T>,
    n: usize,
    seed: u64,
) -> Result<ParticleConfiguration<T>> {
    let table = cumulative(mu.weights().iter().copied().enumerate());
    let mut rng = stream(seed, &[TAG_INIT]);
    let total = table.last().map_or(T::zero(), |&(_, c)| c);
    let states = (0..n)
        .map(|_| pick(&table, T::lit(rng.random::<f64>()) * total))
        .collect();
    ParticleConfiguration::new(states, T::zero())
}

/// Advances `config` to time `t_end`. A ledger that resets at regenerations
/// switches the simulation to the graphical thinning.
pub fn fv_run<T: Real>(
    rates: &RateMatrix<T>,
    config: &ParticleConfiguration<T>,
    t_end: T,
    ledger: Option<&mut TypeLedger>,
    seed: u64,
) -> Result<ParticleConfiguration<T>> {
    if config.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 particles".into()));
    }
    if config.states.iter().any(|&s| s >= rates.len()) {
        return Err(Error::InvalidArgument("particle state out of range".into()));
    }
    if !(t_end >= config.clock) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(
            "end time must be finite and not before the configuration clock".into(),
        ));
    }
    let mode = match &ledger {
        Some(l) if l.resets_on_regeneration() => Mode::Graphical,
        _ => Mode::Minimal,
    };
    if let Some(l) = &ledger {
        if l.types().len() != config.len() {
            return Err(Error::InvalidArgument("ledger size differs from N".into()));
        }
    }
    let dynamics = Dynamics::new(rates, mode)?;
    let mut events = EventStream::new(
        dynamics.rate_per_particle(),
        config.len(),
        config.clock,
        stream(seed, &[TAG_RUN]),
    );
    Ok(run_events(&dynamics, config, t_end, ledger, || {
        events.next_event()
    }))
}

/// Applies events from `next` until one falls after `t_end`.
pub(crate) fn run_events<T: Real>(
    dynamics: &Dynamics<T>,
    config: &ParticleConfiguration<T>,
    t_end: T,
    mut ledger: Option<&mut TypeLedger>,
    mut next: impl FnMut() -> FvEvent<T>,
) -> ParticleConfiguration<T> {
    let mut states = config.states.clone();
    loop {
        let ev = next();
        if ev.time > t_end {
            break;
        }
        dynamics.apply(&mut states, &ev, ledger.as_deref_mut());
    }
    ParticleConfiguration {
        states,
        clock: t_end,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{asymmetric_walk, two_state_example};

    fn ev(particle: usize, u: f64, partner: usize) -> FvEvent<f64> {
        FvEvent {
            time: 0.0,
            particle,
            u,
            partner,
        }
    }

    #[test]
    fn minimal_thinning_partitions_the_mark() {
        // Two-state example: q̄ = 2. State 1 (index 0): jump on [0, .5), absorb on [.5, 1).
        let d = Dynamics::new(&two_state_example::<f64>(), Mode::Minimal).unwrap();
        assert_eq!(d.rate_per_particle(), 2.0);
        let mut s = vec![0, 1, 1];
        assert_eq!(
            d.apply(&mut s, &ev(0, 0.3, 1), None).unwrap().kind,
            MoveKind::Internal
        );
        assert_eq!(s, vec![1, 1, 1]);
        let mut s = vec![0, 1, 0];
        let mut l = TypeLedger::transient(3, 4);
        let m = d.apply(&mut s, &ev(0, 0.7, 1), Some(&mut l)).unwrap();
        assert_eq!(m.kind, MoveKind::Absorption);
        assert_eq!(s, vec![1, 1, 0]);
        assert_eq!(l.types(), &[1, 0, 0]);
        // State 2 (index 1) has exit rate 1: the upper half of the mark is a no-op.
        let mut s = vec![1, 0];
        assert!(d.apply(&mut s, &ev(0, 0.6, 1), None).is_none());
        assert_eq!(s, vec![1, 0]);
    }

    #[test]
    fn graphical_thinning_partitions_the_mark() {
        // α(1) = α(2) = 1, no internal residue, C = 1: rate 3.
        let d = Dynamics::new(&two_state_example::<f64>(), Mode::Graphical).unwrap();
        assert_eq!(d.rate_per_particle(), 3.0);
        let mut l = TypeLedger::stationary(2, 4);
        let mut s = vec![1, 1];
        l.absorbed_onto(0, 1);
        let m = d.apply(&mut s, &ev(0, 0.1, 1), Some(&mut l)).unwrap();
        assert_eq!((m.kind, m.to), (MoveKind::Regeneration, 0));
        assert_eq!(l.types(), &[0, 0]);
        let m = d.apply(&mut s, &ev(1, 0.5, 0), None).unwrap();
        assert_eq!((m.kind, m.to), (MoveKind::Regeneration, 1));
        // Voter from state 1 fires (q(1,0)/C = 1), from state 2 never.
        let mut s = vec![0, 1];
        let m = d.apply(&mut s, &ev(0, 0.9, 1), None).unwrap();
        assert_eq!((m.kind, m.to), (MoveKind::Absorption, 1));
        assert!(d.apply(&mut s, &ev(0, 0.9, 1), None).is_none());
    }

    #[test]
    fn graphical_mode_needs_regeneration() {
        let q = asymmetric_walk(0.3f64, 4).unwrap();
        assert!(matches!(
            Dynamics::new(&q, Mode::Graphical),
            Err(Error::NoRegeneration(_))
        ));
    }

    #[test]
    fn partner_is_never_self() {
        let mut s = EventStream::new(1.0f64, 3, 0.0, stream(5, &[]));
        let mut last = 0.0;
        for _ in 0..10_000 {
            let e = s.next_event();
            assert_ne!(e.particle, e.partner);
            assert!(e.partner < 3 && e.time > last);
            last = e.time;
        }
    }

    #[test]
    fn run_is_deterministic_and_keeps_size() {
        let q = asymmetric_walk(0.4f64, 5).unwrap();
        let mu = Distribution::point_mass(q.space().clone(), 2);
        let c0 = fv_init(&mu, 50, 1).unwrap();
        assert!(c0.states.iter().all(|&s| s == 2));
        let a = fv_run(&q, &c0, 3.0, None, 9).unwrap();
        let b = fv_run(&q, &c0, 3.0, None, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert_eq!(a.clock, 3.0);
        assert!(fv_run(&q, &c0, -1.0, None, 9).is_err());
    }

    #[test]
    fn init_matches_law() {
        let q = two_state_example::<f64>();
        let mu = Distribution::new(q.space().clone(), vec![0.25, 0.75]).unwrap();
        let c = fv_init(&mu, 200_000, 3).unwrap();
        let p = c.occupation(2).profile();
        assert!((p[0] - 0.25).abs() < 5.0 * (0.25f64 * 0.75 / 200_000.0).sqrt());
    }
}
