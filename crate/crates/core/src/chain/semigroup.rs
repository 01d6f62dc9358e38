//! Transition probabilities by uniformization and the resolvent by a linear solve.

use super::{RateMatrix, SubKernel};
use crate::error::{Error, Result};
use crate::linalg::{solve, Dense};
use crate::scalar::{Real, Scalar};

/// Poisson tail mass at which the uniformization series is truncated.
pub const SERIES_TOL: f64 = 1e-14;

/// Largest `q̄ τ` handled in a single series; longer times are split into blocks.
const MAX_BLOCK_RATE: f64 = 30.0;
const MAX_TERMS: usize = 100_000;

/// One application of the jump kernel `Π = I + Q/q̄` to a row vector on
/// `Λ ∪ {0}` (the absorbing coordinate is last).
fn jump<T: Real>(rates: &RateMatrix<T>, qbar: T, v: &[T], out: &mut [T]) {
    let n = rates.len();
    out[n] = v[n];
    for x in 0..n {
        out[x] = v[x] * (T::one() - rates.exit_rate(x) / qbar);
    }
    for x in 0..n {
        let vx = v[x];
        if vx == T::zero() {
            continue;
        }
        for &(y, r) in rates.row(x) {
            out[y] = out[y] + vx * r / qbar;
        }
        out[n] = out[n] + vx * *rates.absorption(x) / qbar;
    }
}

fn uniformized_block<T: Real>(rates: &RateMatrix<T>, qbar: T, v: &[T], tau: T) -> Vec<T> {
    let lam = qbar * tau;
    let tol = T::lit(SERIES_TOL).max(T::epsilon() * T::lit(10.0));
    let mut w = (-lam).exp();
    let mut cum = w;
    let mut term = v.to_vec();
    let mut next = vec![T::zero(); v.len()];
    let mut acc: Vec<T> = term.iter().map(|&a| a * w).collect();
    let mut k = 0usize;
    while T::one() - cum > tol && k < MAX_TERMS {
        k += 1;
        jump(rates, qbar, &term, &mut next);
        std::mem::swap(&mut term, &mut next);
        w = w * lam / T::from_count(k);
        cum = cum + w;
        for (a, t) in acc.iter_mut().zip(&term) {
            *a = *a + w * *t;
        }
    }
    acc
}

/// `mu P_t` on the live states together with the absorbed mass `Σ_y mu(y) P_t(y, 0)`.
pub fn transient<T: Real>(rates: &RateMatrix<T>, mu: &[T], t: T) -> Result<(Vec<T>, T)> {
    if t < T::zero() || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time {t:?} must be finite and >= 0"
        )));
    }
    let n = rates.len();
    if mu.len() != n {
        return Err(Error::InvalidArgument(
            "initial vector has wrong length".into(),
        ));
    }
    let mut v: Vec<T> = mu.to_vec();
    v.push(T::zero());
    let qbar = rates.qbar();
    if t > T::zero() && qbar > T::zero() {
        let blocks = (qbar * t / T::lit(MAX_BLOCK_RATE)).ceil().max(T::one());
        let tau = t / blocks;
        let blocks = blocks.to_usize().unwrap_or(usize::MAX);
        for _ in 0..blocks {
            v = uniformized_block(rates, qbar, &v, tau);
        }
    }
    let absorbed = v.pop().expect("absorbing coordinate");
    Ok((v, absorbed))
}

/// `P_t` on the live states plus the absorption column.
pub fn semigroup<T: Real>(rates: &RateMatrix<T>, t: T) -> Result<SubKernel<T>> {
    let n = rates.len();
    let mut entries = Dense::zeros(n);
    let mut absorb_col = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for z in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[z] = T::one();
        let (row, absorbed) = transient(rates, &e, t)?;
        entries.data[z * n..(z + 1) * n].copy_from_slice(&row);
        absorb_col[z] = absorbed;
    }
    Ok(SubKernel {
        space: rates.space().clone(),
        entries,
        absorb_col,
    })
}

/// `R_λ = λ (λ I - Q_Λ)^{-1}`, the semigroup sampled at an independent
/// exponential time of rate `λ`. The absorption column is the probability
/// of absorption before that time.
pub fn resolvent<T: Scalar>(rates: &RateMatrix<T>, lambda: T) -> Result<SubKernel<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite_value() {
        return Err(Error::InvalidArgument(format!(
            "resolvent rate {lambda} must be > 0"
        )));
    }
    let n = rates.len();
    let q = rates.restricted_generator();
    let mut a = Dense::zeros(n);
    for (k, v) in q.data.iter().enumerate() {
        a.data[k] = -v.clone();
    }
    for x in 0..n {
        let d = a.get_mut(x, x);
        *d = d.clone() + lambda.clone();
    }
    let mut rhs = Dense::<T>::identity(n);
    for v in rhs.data.iter_mut() {
        *v = v.clone() * lambda.clone();
    }
    let x = solve(&a, &rhs.data, n)?;
    let entries = Dense { n, data: x };
    let absorb_col = (0..n)
        .map(|z| (0..n).fold(T::one(), |acc, x| acc - entries.get(z, x).clone()))
        .collect();
    Ok(SubKernel {
        space: rates.space().clone(),
        entries,
        absorb_col,
    })
}
