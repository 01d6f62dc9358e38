//! Direct solution of the quasi-stationarity system on a finite state space.
//!
//! A QSD `ν` is a left eigenvector of `Q_Λ` with eigenvalue
//! `θ = -Σ_y ν(y) q(y,0)`; equivalently it solves
//! `Σ_y ν(y) [q(y,x) + q(y,0) ν(x)] = 0` for every `x`.

use crate::chain::{validate_chain, Distribution, RateMatrix};
use crate::conditioned::yaglom_iterate;
use crate::error::{Error, Result};
use crate::scalar::{max_of, Real, Scalar};

/// Weights below this flag a possibly reducible chain.
pub const EIGEN_FLOOR: f64 = 1e-13;

/// Laziness factor of the power-iteration kernel `I + Q_Λ / (LAZINESS q̄)`.
const LAZINESS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QsdResult<T> {
    pub nu: Distribution<T>,
    /// Perron eigenvalue of `Q_Λ` (negative).
    pub eigenvalue: T,
    pub residual: T,
    pub iterations: usize,
    /// Some weight fell below [`EIGEN_FLOOR`]; the answer may sit on the boundary.
    pub boundary_warning: bool,
}

/// `sup_x |Σ_y ν(y) [q(y,x) + q(y,0) ν(x)]|`.
pub fn qsd_residual<T: Scalar>(rates: &RateMatrix<T>, nu: &Distribution<T>) -> T {
    let w = nu.weights();
    let killing = w
        .iter()
        .zip(rates.absorption_rates())
        .fold(T::zero(), |a, (p, c)| a + p.clone() * c.clone());
    rates
        .left_mul(w)
        .into_iter()
        .zip(w)
        .fold(T::zero(), |m, (d, p)| {
            max_of(m, (d + killing.clone() * p.clone()).magnitude())
        })
}

/// Power iteration on the lazy uniformized kernel acting on the left.
///
/// Stops once successive iterates differ by less than `tol` in sup norm and
/// the QSD residual is at most `tol`.
pub fn qsd_power<T: Real>(rates: &RateMatrix<T>, tol: T, max_iter: usize) -> Result<QsdResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    validate_chain(rates)?;
    let n = rates.len();
    let scale = rates.qbar() * T::lit(LAZINESS);
    let keep: Vec<T> = (0..n)
        .map(|x| T::one() + rates.diagonal(x) / scale)
        .collect();
    let mut v = vec![T::one() / T::from_count(n); n];
    let mut w = vec![T::zero(); n];
    let mut delta = T::infinity();
    let mut residual = T::infinity();
    for it in 1..=max_iter {
        for x in 0..n {
            w[x] = v[x] * keep[x];
        }
        for x in 0..n {
            let vx = v[x];
            if vx == T::zero() {
                continue;
            }
            for &(y, r) in rates.row(x) {
                w[y] = w[y] + vx * r / scale;
            }
        }
        let r = w.iter().fold(T::zero(), |a, &b| a + b);
        delta = T::zero();
        for x in 0..n {
            let nx = w[x] / r;
            delta = delta.max((nx - v[x]).abs());
            v[x] = nx;
        }
        if delta < tol {
            let nu = Distribution::normalized(rates.space().clone(), v.clone())?;
            residual = qsd_residual(rates, &nu);
            if residual <= tol {
                let boundary_warning = v.iter().any(|&p| p < T::lit(EIGEN_FLOOR));
                return Ok(QsdResult {
                    nu,
                    eigenvalue: scale * (r - T::one()),
                    residual,
                    iterations: it,
                    boundary_warning,
                });
            }
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        last_delta: delta.approx(),
        residual: residual.approx(),
    })
}

/// QSD as the Yaglom limit from the uniform law, certified by its residual.
pub fn qsd_via_yaglom<T: Real>(rates: &RateMatrix<T>, tol: T) -> Result<QsdResult<T>> {
    let mu = Distribution::uniform(rates.space().clone());
    qsd_via_yaglom_from(rates, &mu, tol)
}

pub fn qsd_via_yaglom_from<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    tol: T,
) -> Result<QsdResult<T>> {
    let summary = validate_chain(rates)?;
    let block = T::lit(10.0) / summary.qbar;
    let mut inner_tol = tol;
    let mut start = mu.clone();
    let mut total = 0;
    let mut last = None;
    // Tighten the stopping rule until the residual certifies the limit.
    for _ in 0..6 {
        let y = yaglom_iterate(rates, &start, block, inner_tol, 100_000)?;
        total += y.iterations;
        let residual = qsd_residual(rates, &y.limit);
        if residual <= tol {
            let boundary_warning = y.limit.weights().iter().any(|&p| p < T::lit(EIGEN_FLOOR));
            return Ok(QsdResult {
                eigenvalue: -y.decay_rate,
                nu: y.limit,
                residual,
                iterations: total,
                boundary_warning,
            });
        }
        inner_tol = inner_tol / T::lit(10.0);
        last = Some((y.final_delta, residual));
        start = y.limit;
    }
    let (d, r) = last.expect("loop ran");
    Err(Error::NotConverged {
        iterations: total,
        last_delta: d.approx(),
        residual: r.approx(),
    })
}
