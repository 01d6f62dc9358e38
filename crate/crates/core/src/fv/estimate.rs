//! Replica and time-average estimators of the empirical profile `η/N`.

use std::collections::HashMap;

use rayon::prelude::*;

use super::dynamics::{fv_init, fv_run, Dynamics, EventStream, Mode, MoveKind};
use super::{TypeLedger, DEFAULT_TYPE_CAP};
use crate::chain::{validate_chain, Distribution, RateMatrix};
use crate::error::{Error, Result};
use crate::rng::{derive_key, stream};
use crate::scalar::Real;

pub const DEFAULT_BATCHES: usize = 50;

const TAG_STAT_INIT: u64 = 0x57a1;
const TAG_STAT_RUN: u64 = 0x57a2;

/// Mean and covariance of the profile `η(x)/N`, with standard errors.
///
/// `cov(x,y)` estimates `E[η(x)η(y)]/N² - E[η(x)/N] E[η(y)/N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub n_states: usize,
    pub mean_profile: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Row-major `n_states × n_states`.
    pub cov: Vec<f64>,
    pub cov_stderr: Vec<f64>,
    /// Independent replicas, or batches for a time average.
    pub replicas: usize,
}

impl MomentEstimate {
    pub fn cov(&self, x: usize, y: usize) -> f64 {
        self.cov[x * self.n_states + y]
    }

    pub fn cov_stderr(&self, x: usize, y: usize) -> f64 {
        self.cov_stderr[x * self.n_states + y]
    }

    /// Moments of independent profile samples.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let r = samples.len();
        if r < 2 {
            return Err(Error::InvalidArgument("need at least 2 replicas".into()));
        }
        let n = samples[0].len();
        let (mean_profile, stderr) = columns_mean_se(samples, n);
        let mut cov = vec![0.0; n * n];
        let mut cov_stderr = vec![0.0; n * n];
        let mut prod = vec![0.0; r];
        for x in 0..n {
            for y in x..n {
                for (p, s) in prod.iter_mut().zip(samples) {
                    *p = (s[x] - mean_profile[x]) * (s[y] - mean_profile[y]);
                }
                let (m, se) = mean_se(&prod);
                // Unbiased covariance.
                let c = m * r as f64 / (r - 1) as f64;
                for (a, b) in [(x, y), (y, x)] {
                    cov[a * n + b] = c;
                    cov_stderr[a * n + b] = se;
                }
            }
        }
        Ok(Self {
            n_states: n,
            mean_profile,
            stderr,
            cov,
            cov_stderr,
            replicas: r,
        })
    }
}

pub(crate) fn mean_se(v: &[f64]) -> (f64, f64) {
    let r = v.len() as f64;
    let m = v.iter().sum::<f64>() / r;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (r - 1.0);
    (m, (var / r).sqrt())
}

pub(crate) fn columns_mean_se(samples: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut col = vec![0.0; samples.len()];
    (0..width)
        .map(|j| {
            for (c, s) in col.iter_mut().zip(samples) {
                *c = s[j];
            }
            mean_se(&col)
        })
        .unzip()
}

/// Per-replica final profiles `η_t/N`, in replica order. Replica `r` uses
/// seeds derived from `(seed, r)`.
pub fn profile_samples<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    n: usize,
    t: T,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let k = rates.len();
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let c0 = fv_init(mu, n, derive_key(seed, &[r, 0]))?;
            let c = fv_run(rates, &c0, t, None, derive_key(seed, &[r, 1]))?;
            Ok(c.occupation(k).profile())
        })
        .collect()
}

/// Moments of `η_t/N` over independent replicas started i.i.d. from `mu`.
pub fn estimate_profile<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    n: usize,
    t: T,
    replicas: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if replicas < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicas".into()));
    }
    MomentEstimate::from_samples(&profile_samples(rates, mu, n, t, replicas, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryOptions {
    pub batches: usize,
    pub type_cap: u32,
    /// Record the law of the unlabeled configuration. `None` records it when
    /// there are at most 64 configurations.
    pub track_configurations: Option<bool>,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            batches: DEFAULT_BATCHES,
            type_cap: DEFAULT_TYPE_CAP,
            track_configurations: None,
        }
    }
}

/// Time-averaged fraction of particles at `x` carrying type `k`. Row
/// `cap + 1` aggregates every type above the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeOccupancy {
    pub cap: u32,
    pub n_states: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl TypeOccupancy {
    pub fn get(&self, k: usize, x: usize) -> f64 {
        self.mean[k * self.n_states + x]
    }

    pub fn stderr(&self, k: usize, x: usize) -> f64 {
        self.stderr[k * self.n_states + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEstimate {
    pub moments: MomentEstimate,
    pub types: TypeOccupancy,
    /// Unlabeled configurations with their time fraction and standard error,
    /// sorted by configuration.
    pub configurations: Vec<(Vec<usize>, f64, f64)>,
    /// `α > C`, where the stationary type construction is proven.
    pub in_proven_regime: bool,
    pub events: u64,
}

impl StationaryEstimate {
    pub fn configuration_weight(&self, counts: &[usize]) -> Option<(f64, f64)> {
        self.configurations
            .iter()
            .find(|(c, _, _)| c == counts)
            .map(|&(_, w, s)| (w, s))
    }
}

/// Piecewise-constant quantities integrated in time, updated lazily.
struct TimeIntegral {
    value: Vec<f64>,
    acc: Vec<f64>,
    since: Vec<f64>,
}

impl TimeIntegral {
    fn new(value: Vec<f64>, t: f64) -> Self {
        let n = value.len();
        Self {
            value,
            acc: vec![0.0; n],
            since: vec![t; n],
        }
    }

    #[inline]
    fn set(&mut self, i: usize, v: f64, t: f64) {
        self.acc[i] += self.value[i] * (t - self.since[i]);
        self.since[i] = t;
        self.value[i] = v;
    }

    /// Time averages over `[start, t]`; restarts the integrals at `t`.
    fn flush(&mut self, start: f64, t: f64) -> Vec<f64> {
        let len = t - start;
        let out = (0..self.value.len())
            .map(|i| (self.acc[i] + self.value[i] * (t - self.since[i])) / len)
            .collect();
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        self.since.iter_mut().for_each(|s| *s = t);
        out
    }
}

fn composition_count(n: usize, k: usize) -> f64 {
    // C(n + k - 1, k - 1)
    (1..k).fold(1.0, |a, i| a * (n + i) as f64 / i as f64)
}

/// Long-run averages of one trajectory after `burn_in`, with batch-means
/// standard errors.
///
/// The trajectory uses the graphical thinning so that regenerations are
/// visible to the type ledger, which resets types at every regeneration.
pub fn estimate_stationary<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    burn_in: T,
    horizon: T,
    seed: u64,
    opts: &StationaryOptions,
) -> Result<StationaryEstimate> {
    let summary = validate_chain(rates)?;
    if !summary.perfect_sampling_available() {
        return Err(Error::NoRegeneration("stationary estimation"));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 particles".into()));
    }
    if opts.batches < 2 {
        return Err(Error::InvalidArgument("need at least 2 batches".into()));
    }
    if !(burn_in >= T::zero()) || !(horizon > T::zero()) || !(burn_in + horizon).is_finite() {
        return Err(Error::InvalidArgument(
            "burn-in must be >= 0 and horizon > 0, both finite".into(),
        ));
    }
    let k = rates.len();
    let dynamics = Dynamics::new(rates, Mode::Graphical)?;
    let mu_alpha = summary.mu_alpha.as_ref().expect("alpha > 0");
    let mut states = fv_init(mu_alpha, n, derive_key(seed, &[TAG_STAT_INIT]))?.states;
    let mut ledger = TypeLedger::stationary(n, opts.type_cap);
    let mut events = EventStream::new(
        dynamics.rate_per_particle(),
        n,
        T::zero(),
        stream(seed, &[TAG_STAT_RUN]),
    );
    let mut ev = events.next_event();
    while ev.time <= burn_in {
        dynamics.apply(&mut states, &ev, Some(&mut ledger));
        ev = events.next_event();
    }

    let t0 = burn_in.approx();
    let rows = opts.type_cap as usize + 2;
    let mut counts = vec![0usize; k];
    let mut typed = vec![0usize; rows * k];
    for (i, &x) in states.iter().enumerate() {
        counts[x] += 1;
        typed[ledger.types()[i] as usize * k + x] += 1;
    }
    let mut single = TimeIntegral::new(counts.iter().map(|&c| c as f64).collect(), t0);
    let mut pairs = TimeIntegral::new(
        (0..k * k)
            .map(|i| (counts[i / k] * counts[i % k]) as f64)
            .collect(),
        t0,
    );
    let mut type_int = TimeIntegral::new(typed.iter().map(|&c| c as f64).collect(), t0);
    let track = opts
        .track_configurations
        .unwrap_or_else(|| composition_count(n, k) <= 64.0);
    let mut config_time: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut config_since = t0;

    let nf = n as f64;
    let mut batch_single = Vec::with_capacity(opts.batches);
    let mut batch_pairs = Vec::with_capacity(opts.batches);
    let mut batch_types = Vec::with_capacity(opts.batches);
    let mut batch_configs = Vec::with_capacity(opts.batches);
    let mut n_events = 0u64;
    let mut start = t0;
    for b in 1..=opts.batches {
        let end_t = burn_in + horizon * T::from_count(b) / T::from_count(opts.batches);
        let end = end_t.approx();
        while ev.time <= end_t {
            let t = ev.time.approx();
            let i = ev.particle;
            let old_type = ledger.types()[i] as usize;
            n_events += 1;
            if let Some(m) = dynamics.apply(&mut states, &ev, Some(&mut ledger)) {
                let new_type = ledger.types()[i] as usize;
                if m.from != m.to {
                    if track {
                        *config_time.entry(counts.clone()).or_insert(0.0) += t - config_since;
                        config_since = t;
                    }
                    counts[m.from] -= 1;
                    counts[m.to] += 1;
                    for a in [m.from, m.to] {
                        single.set(a, counts[a] as f64, t);
                        for y in 0..k {
                            let v = (counts[a] * counts[y]) as f64;
                            pairs.set(a * k + y, v, t);
                            pairs.set(y * k + a, v, t);
                        }
                    }
                }
                if m.from != m.to || old_type != new_type {
                    let (src, dst) = (old_type * k + m.from, new_type * k + m.to);
                    typed[src] -= 1;
                    type_int.set(src, typed[src] as f64, t);
                    typed[dst] += 1;
                    type_int.set(dst, typed[dst] as f64, t);
                }
                debug_assert!(m.kind != MoveKind::Regeneration || new_type == 0);
            }
            ev = events.next_event();
        }
        batch_single.push(
            single
                .flush(start, end)
                .into_iter()
                .map(|v| v / nf)
                .collect::<Vec<_>>(),
        );
        batch_pairs.push(
            pairs
                .flush(start, end)
                .into_iter()
                .map(|v| v / (nf * nf))
                .collect::<Vec<_>>(),
        );
        batch_types.push(
            type_int
                .flush(start, end)
                .into_iter()
                .map(|v| v / nf)
                .collect::<Vec<_>>(),
        );
        if track {
            *config_time.entry(counts.clone()).or_insert(0.0) += end - config_since;
            config_since = end;
            let len = end - start;
            batch_configs.push(
                std::mem::take(&mut config_time)
                    .into_iter()
                    .map(|(c, w)| (c, w / len))
                    .collect::<HashMap<_, _>>(),
            );
        }
        start = end;
    }

    let (mean_profile, stderr) = columns_mean_se(&batch_single, k);
    let mut cov = vec![0.0; k * k];
    let mut cov_stderr = vec![0.0; k * k];
    let mut vals = vec![0.0; opts.batches];
    for x in 0..k {
        for y in 0..k {
            let e2 = batch_pairs.iter().map(|p| p[x * k + y]).sum::<f64>() / opts.batches as f64;
            cov[x * k + y] = e2 - mean_profile[x] * mean_profile[y];
            for (v, (p, m)) in vals.iter_mut().zip(batch_pairs.iter().zip(&batch_single)) {
                *v = p[x * k + y] - m[x] * m[y];
            }
            cov_stderr[x * k + y] = mean_se(&vals).1;
        }
    }
    let (type_mean, type_se) = columns_mean_se(&batch_types, rows * k);

    let mut configurations = Vec::new();
    if track {
        let mut keys: Vec<Vec<usize>> = batch_configs
            .iter()
            .flat_map(|m| m.keys().cloned())
            .collect();
        keys.sort();
        keys.dedup();
        for key in keys {
            for (v, m) in vals.iter_mut().zip(&batch_configs) {
                *v = m.get(&key).copied().unwrap_or(0.0);
            }
            let (w, se) = mean_se(&vals);
            configurations.push((key, w, se));
        }
    }

    Ok(StationaryEstimate {
        moments: MomentEstimate {
            n_states: k,
            mean_profile,
            stderr,
            cov,
            cov_stderr,
            replicas: opts.batches,
        },
        types: TypeOccupancy {
            cap: opts.type_cap,
            n_states: k,
            mean: type_mean,
            stderr: type_se,
        },
        configurations,
        in_proven_regime: summary.existence_regime(),
        events: n_events,
    })
}
