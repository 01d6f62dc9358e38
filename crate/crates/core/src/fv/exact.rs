//! Exact stationary law of the unlabeled process `η` for small `N`.
//!
//! From `η`, one particle moves from `x` to `y` at rate
//! `η(x) [q(x,y) + q(x,0) η(y)/(N-1)]`.

use std::collections::HashMap;

use crate::chain::RateMatrix;
use crate::error::{Error, Result};
use crate::linalg::{solve, Dense};
use crate::scalar::Scalar;

/// Largest configuration space handled by the dense solve.
pub const MAX_CONFIGURATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledLaw<T> {
    pub configurations: Vec<Vec<usize>>,
    pub weights: Vec<T>,
    /// `ρ^N(x) = Σ_η π(η) η(x)/N`.
    pub profile: Vec<T>,
}

impl<T> UnlabeledLaw<T> {
    pub fn weight_of(&self, counts: &[usize]) -> Option<&T> {
        self.configurations
            .iter()
            .position(|c| c == counts)
            .map(|i| &self.weights[i])
    }
}

/// Occupation vectors of `n` particles over `k` states, first coordinate
/// descending.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            go(left - c, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        go(n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Outgoing transitions of the unlabeled process from `eta`.
pub fn unlabeled_transitions<T: Scalar>(
    rates: &RateMatrix<T>,
    eta: &[usize],
) -> Vec<(Vec<usize>, T)> {
    let n: usize = eta.iter().sum();
    let others = T::from_count(n - 1);
    let mut out = Vec::new();
    for x in 0..eta.len() {
        if eta[x] == 0 {
            continue;
        }
        let ex = T::from_count(eta[x]);
        for y in 0..eta.len() {
            if y == x {
                continue;
            }
            let r = rates.rate(x, y)
                + rates.absorption(x).clone() * T::from_count(eta[y]) / others.clone();
            if r > T::zero() {
                let mut to = eta.to_vec();
                to[x] -= 1;
                to[y] += 1;
                out.push((to, ex.clone() * r));
            }
        }
    }
    out
}

/// Solves `πA = 0`, `Σπ = 1` for the generator `A` of `η`.
pub fn exact_unlabeled_stationary<T: Scalar>(
    rates: &RateMatrix<T>,
    n: usize,
) -> Result<UnlabeledLaw<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 particles".into()));
    }
    let k = rates.len();
    let configurations = compositions(n, k);
    let m = configurations.len();
    if m > MAX_CONFIGURATIONS {
        return Err(Error::InvalidArgument(format!(
            "{m} configurations exceed the exact-solver limit {MAX_CONFIGURATIONS}"
        )));
    }
    let index: HashMap<&[usize], usize> = configurations
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i))
        .collect();
    // Transposed generator: row j collects inflow into configuration j.
    let mut at: Dense<T> = Dense::zeros(m);
    for (i, c) in configurations.iter().enumerate() {
        for (to, r) in unlabeled_transitions(rates, c) {
            let j = index[to.as_slice()];
            *at.get_mut(j, i) = at.get(j, i).clone() + r.clone();
            *at.get_mut(i, i) = at.get(i, i).clone() - r;
        }
    }
    for i in 0..m {
        *at.get_mut(m - 1, i) = T::one();
    }
    let mut rhs = vec![T::zero(); m];
    rhs[m - 1] = T::one();
    let weights = solve(&at, &rhs, 1)?;
    let nn = T::from_count(n);
    let profile = (0..k)
        .map(|x| {
            configurations
                .iter()
                .zip(&weights)
                .fold(T::zero(), |a, (c, w)| {
                    a + w.clone() * T::from_count(c[x]) / nn.clone()
                })
        })
        .collect();
    Ok(UnlabeledLaw {
        configurations,
        weights,
        profile,
    })
}
