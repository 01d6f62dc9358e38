//! Absorbed continuous-time Markov chains on a finite working state space.
//!
//! The absorbing state is implicit: a [`RateMatrix`] stores the off-diagonal
//! rates `q(x, y)` between live states and the absorption rates `q(x, 0)`.
//! Diagonal entries are never stored; they are always derived as minus the
//! total exit rate.

mod builders;
mod semigroup;
mod simulate;
mod spec;

pub use builders::{asymmetric_walk, single_state, symmetric_two_state, two_state_example};
pub use semigroup::{resolvent, semigroup, transient, SERIES_TOL};
pub use simulate::{simulate_absorbing_chain, AbsorptionSample, ChainState};
pub use spec::{load_spec, to_spec, AbsorptionEntry, ChainSpec, RateEntry};

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::scalar::{max_of, min_of, Scalar};

/// Ordered, duplicate-free labels of the live states.
#[derive(Debug, Clone)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidChain("state space is empty".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l == "0" {
                return Err(Error::InvalidChain(
                    "label \"0\" is reserved for the absorbing state".into(),
                ));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidChain(format!("duplicate state label {l:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// States labelled `"1"`, ..., `"n"`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Sparse transition rates of an absorbed chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix<T> {
    space: Arc<StateSpace>,
    rows: Vec<Vec<(usize, T)>>,
    absorb: Vec<T>,
}

impl<T: Scalar> RateMatrix<T> {
    /// Builds a rate matrix from `(from, to, rate)` triples between live
    /// states and a dense vector of absorption rates. Zero rates are dropped.
    pub fn new(
        space: Arc<StateSpace>,
        offdiag: impl IntoIterator<Item = (usize, usize, T)>,
        absorb: Vec<T>,
    ) -> Result<Self> {
        let n = space.len();
        if absorb.len() != n {
            return Err(Error::InvalidChain(format!(
                "{} absorption rates for {} states",
                absorb.len(),
                n
            )));
        }
        for (x, a) in absorb.iter().enumerate() {
            check_rate(a, || format!("q({},0)", space.label(x)))?;
        }
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (x, y, r) in offdiag {
            if x >= n || y >= n {
                return Err(Error::InvalidChain(format!(
                    "state index out of range: ({x},{y})"
                )));
            }
            if x == y {
                return Err(Error::InvalidChain(format!(
                    "diagonal rate q({0},{0}) given; it is derived",
                    space.label(x)
                )));
            }
            check_rate(&r, || format!("q({},{})", space.label(x), space.label(y)))?;
            if rows[x].iter().any(|(t, _)| *t == y) {
                return Err(Error::InvalidChain(format!(
                    "duplicate rate q({},{})",
                    space.label(x),
                    space.label(y)
                )));
            }
            if !r.is_zero() {
                rows[x].push((y, r));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|(y, _)| *y);
        }
        Ok(Self {
            space,
            rows,
            absorb,
        })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Nonzero off-diagonal rates out of `x`, sorted by target.
    pub fn row(&self, x: usize) -> &[(usize, T)] {
        &self.rows[x]
    }

    /// `q(x, y)`; the diagonal is derived.
    pub fn rate(&self, x: usize, y: usize) -> T {
        if x == y {
            return self.diagonal(x);
        }
        self.rows[x]
            .binary_search_by_key(&y, |(t, _)| *t)
            .map(|k| self.rows[x][k].1.clone())
            .unwrap_or_else(|_| T::zero())
    }

    pub fn absorption(&self, x: usize) -> &T {
        &self.absorb[x]
    }

    pub fn absorption_rates(&self) -> &[T] {
        &self.absorb
    }

    /// Total rate of jumps to other live states.
    pub fn internal_rate(&self, x: usize) -> T {
        self.rows[x]
            .iter()
            .fold(T::zero(), |acc, (_, r)| acc + r.clone())
    }

    pub fn exit_rate(&self, x: usize) -> T {
        self.internal_rate(x) + self.absorb[x].clone()
    }

    pub fn diagonal(&self, x: usize) -> T {
        -self.exit_rate(x)
    }

    /// Maximal exit rate `q̄`.
    pub fn qbar(&self) -> T {
        (0..self.len()).fold(T::zero(), |m, x| max_of(m, self.exit_rate(x)))
    }

    /// Maximal absorption rate `C`.
    pub fn max_absorption(&self) -> T {
        self.absorb
            .iter()
            .fold(T::zero(), |m, a| max_of(m, a.clone()))
    }

    pub fn offdiag_entries(&self) -> impl Iterator<Item = (usize, usize, &T)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().map(move |(y, r)| (x, *y, r)))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> RateMatrix<U> {
        RateMatrix {
            space: self.space.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|(y, r)| (*y, f(r))).collect())
                .collect(),
            absorb: self.absorb.iter().map(&f).collect(),
        }
    }

    /// All rates multiplied by `k > 0` (a time change).
    pub fn scaled(&self, k: T) -> Self {
        self.map(|r| r.clone() * k.clone())
    }

    /// `Q` restricted to the live states, diagonal included.
    pub fn restricted_generator(&self) -> Dense<T> {
        let n = self.len();
        let mut q = Dense::zeros(n);
        for x in 0..n {
            *q.get_mut(x, x) = self.diagonal(x);
            for (y, r) in &self.rows[x] {
                *q.get_mut(x, *y) = r.clone();
            }
        }
        q
    }

    /// Row vector times the restricted generator, `v Q_Λ`.
    pub fn left_mul(&self, v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = (0..self.len())
            .map(|x| v[x].clone() * self.diagonal(x))
            .collect();
        for (x, row) in self.rows.iter().enumerate() {
            if v[x].is_zero() {
                continue;
            }
            for (y, r) in row {
                out[*y] = out[*y].clone() + v[x].clone() * r.clone();
            }
        }
        out
    }

    /// Whether the directed graph of positive off-diagonal rates is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (x, y, _) in self.offdiag_entries() {
            reverse[y].push(x);
        }
        let forward: Vec<Vec<usize>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(|(y, _)| *y).collect())
            .collect();
        reaches_all(&forward) && reaches_all(&reverse)
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn check_rate<T: Scalar>(r: &T, name: impl Fn() -> String) -> Result<()> {
    if !r.is_finite_value() {
        return Err(Error::InvalidChain(format!("{} is not finite", name())));
    }
    if *r < T::zero() {
        return Err(Error::InvalidChain(format!(
            "{} = {} is negative",
            name(),
            r
        )));
    }
    Ok(())
}

/// A probability vector on the live states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    space: Arc<StateSpace>,
    weights: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(space: Arc<StateSpace>, weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} states",
                weights.len(),
                space.len()
            )));
        }
        let mut sum = T::zero();
        for (x, w) in weights.iter().enumerate() {
            if !w.is_finite_value() || *w < T::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {} at state {}",
                    w,
                    space.label(x)
                )));
            }
            sum = sum + w.clone();
        }
        if (sum.clone() - T::one()).magnitude() > T::lit(T::SUM_TOL) {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Ok(Self { space, weights })
    }

    /// Rescales nonnegative weights with a positive total.
    pub fn normalized(space: Arc<StateSpace>, weights: Vec<T>) -> Result<Self> {
        let sum = weights.iter().fold(T::zero(), |a, w| a + w.clone());
        if sum <= T::zero() {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        let w = weights.into_iter().map(|w| w / sum.clone()).collect();
        Self::new(space, w)
    }

    pub fn point_mass(space: Arc<StateSpace>, x: usize) -> Self {
        let mut weights = vec![T::zero(); space.len()];
        weights[x] = T::one();
        Self { space, weights }
    }

    pub fn uniform(space: Arc<StateSpace>) -> Self {
        let n = T::from_count(space.len());
        let weights = vec![T::one() / n; space.len()];
        Self { space, weights }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    pub fn get(&self, x: usize) -> &T {
        &self.weights[x]
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.weights
            .iter()
            .zip(&other.weights)
            .fold(T::zero(), |m, (a, b)| {
                max_of(m, (a.clone() - b.clone()).magnitude())
            })
    }
}

/// A sub-Markov kernel on the live states together with the mass sent to
/// the absorbing state; holds `P_t` and `R_λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubKernel<T> {
    pub space: Arc<StateSpace>,
    pub entries: Dense<T>,
    pub absorb_col: Vec<T>,
}

impl<T: Scalar> SubKernel<T> {
    pub fn get(&self, z: usize, x: usize) -> &T {
        self.entries.get(z, x)
    }

    /// Row sum over the live states plus the absorbed mass.
    pub fn honest_row_sum(&self, z: usize) -> T {
        (0..self.entries.n).fold(self.absorb_col[z].clone(), |a, x| {
            a + self.entries.get(z, x).clone()
        })
    }

    /// `mu K` restricted to the live states.
    pub fn left_apply(&self, mu: &[T]) -> Vec<T> {
        let n = self.entries.n;
        (0..n)
            .map(|x| {
                (0..n).fold(T::zero(), |a, z| {
                    a + mu[z].clone() * self.entries.get(z, x).clone()
                })
            })
            .collect()
    }
}

/// Scalar characteristics of a validated chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary<T> {
    /// Ergodicity coefficient `α = Σ_z α(z)`.
    pub alpha: T,
    /// `α(z) = inf_{x≠z} q(x, z)`.
    pub alpha_z: Vec<T>,
    /// Maximal absorption rate.
    pub c: T,
    pub qbar: T,
    /// `α(x)/α`, present when `α > 0`.
    pub mu_alpha: Option<Distribution<T>>,
    pub irreducible: bool,
}

impl<T: Scalar> ChainSummary<T> {
    /// `α > 0`: the particle system is ergodic and perfect sampling applies.
    pub fn perfect_sampling_available(&self) -> bool {
        self.alpha > T::zero()
    }

    /// `α > C`: existence and uniqueness of the QSD, vanishing stationary correlations.
    pub fn existence_regime(&self) -> bool {
        self.alpha > self.c
    }
}

/// `α(z) = inf_{x≠z} q(x,z)` for every `z`; missing entries count as 0 and
/// a one-state chain gets 0.
pub fn doeblin_rates<T: Scalar>(rates: &RateMatrix<T>) -> Vec<T> {
    let n = rates.len();
    // Column-wise minimum over x ≠ z, missing entries count as 0.
    let mut col_min: Vec<Option<T>> = vec![None; n];
    let mut col_count = vec![0usize; n];
    for (_, y, r) in rates.offdiag_entries() {
        col_count[y] += 1;
        col_min[y] = Some(match col_min[y].take() {
            Some(m) => min_of(m, r.clone()),
            None => r.clone(),
        });
    }
    (0..n)
        .map(|z| {
            if n > 1 && col_count[z] == n - 1 {
                col_min[z].clone().unwrap_or_else(T::zero)
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Validates `rates` and computes `α`, `α(z)`, `C`, `q̄` and `μ_α`.
pub fn validate_chain<T: Scalar>(rates: &RateMatrix<T>) -> Result<ChainSummary<T>> {
    for (x, y, r) in rates.offdiag_entries() {
        check_rate(r, || {
            format!("q({},{})", rates.space.label(x), rates.space.label(y))
        })?;
    }
    let c = rates.max_absorption();
    if c.is_zero() {
        return Err(Error::NoAbsorption);
    }
    let qbar = rates.qbar();

    let alpha_z = doeblin_rates(rates);
    let alpha = alpha_z.iter().fold(T::zero(), |a, v| a + v.clone());
    let mu_alpha = if alpha > T::zero() {
        let w = alpha_z.iter().map(|a| a.clone() / alpha.clone()).collect();
        Some(Distribution::new(rates.space.clone(), w)?)
    } else {
        None
    };
    Ok(ChainSummary {
        alpha,
        alpha_z,
        c,
        qbar,
        mu_alpha,
        irreducible: rates.is_irreducible(),
    })
}
