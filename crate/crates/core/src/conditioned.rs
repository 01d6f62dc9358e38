//! The law of the chain conditioned on survival, computed two ways: as a
//! ratio of semigroup entries and by integrating the nonlinear forward
//! equation. Iterating the former gives the Yaglom limit.

use crate::chain::{transient, Distribution, RateMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weights below `-ODE_NEG_TOL` after an RK4 step abort the integration.
pub const ODE_NEG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPath<T> {
    pub times: Vec<T>,
    pub phis: Vec<Distribution<T>>,
    /// Largest `|Σ φ - 1|` seen before renormalization.
    pub norm_drift: T,
}

impl<T: Real> ConditionedPath<T> {
    pub fn last(&self) -> &Distribution<T> {
        self.phis.last().expect("path has at least one point")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YaglomResult<T> {
    pub limit: Distribution<T>,
    pub iterations: usize,
    pub final_delta: T,
    /// `Σ_y limit(y) q(y, 0)`; minus the Perron eigenvalue of `Q_Λ`.
    pub decay_rate: T,
}

/// `φ_t^μ(x) = (μ P_t)(x) / P_μ(not absorbed by t)`.
pub fn phi_semigroup<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    t: T,
) -> Result<Distribution<T>> {
    let (live, _absorbed) = transient(rates, mu.weights(), t)?;
    // The live mass equals 1 - μP_t(·,0) by honesty and keeps full relative
    // precision when survival is small.
    let survival = live.iter().fold(T::zero(), |a, &v| a + v);
    if !(survival > T::epsilon()) {
        return Err(Error::VanishingSurvival {
            survival: survival.approx(),
        });
    }
    let w = live
        .into_iter()
        .map(|v| (v / survival).max(T::zero()))
        .collect();
    Distribution::normalized(mu.space().clone(), w)
}

/// Right-hand side of the conditioned forward equation,
/// `Σ_y φ(y) [q(y,x) + q(y,0) φ(x)]`.
pub fn forward_drift<T: Real>(rates: &RateMatrix<T>, phi: &[T]) -> Vec<T> {
    let killing = phi
        .iter()
        .zip(rates.absorption_rates())
        .fold(T::zero(), |a, (&p, &c)| a + p * c);
    let mut out = rates.left_mul(phi);
    for (o, &p) in out.iter_mut().zip(phi) {
        *o = *o + killing * p;
    }
    out
}

/// Integrates the conditioned forward equation with classical RK4 at a
/// fixed step, projecting back to the simplex after every step.
pub fn phi_ode<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    t_end: T,
    step: T,
) -> Result<ConditionedPath<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidArgument("ODE step must be > 0".into()));
    }
    if !(t_end >= T::zero()) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(
            "ODE end time must be finite and >= 0".into(),
        ));
    }
    let space = mu.space().clone();
    let mut times = vec![T::zero()];
    let mut phis = vec![mu.clone()];
    let mut drift = T::zero();
    if t_end == T::zero() {
        return Ok(ConditionedPath {
            times,
            phis,
            norm_drift: drift,
        });
    }
    let steps = (t_end / step - T::lit(1e-9)).ceil().max(T::one());
    let h = t_end / steps;
    let steps = steps.to_usize().expect("step count fits usize");
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let neg_tol = T::lit(ODE_NEG_TOL);
    let mut phi: Vec<T> = mu.weights().to_vec();
    let mut tmp = vec![T::zero(); phi.len()];
    for k in 1..=steps {
        let k1 = forward_drift(rates, &phi);
        for i in 0..phi.len() {
            tmp[i] = phi[i] + half * h * k1[i];
        }
        let k2 = forward_drift(rates, &tmp);
        for i in 0..phi.len() {
            tmp[i] = phi[i] + half * h * k2[i];
        }
        let k3 = forward_drift(rates, &tmp);
        for i in 0..phi.len() {
            tmp[i] = phi[i] + h * k3[i];
        }
        let k4 = forward_drift(rates, &tmp);
        for i in 0..phi.len() {
            phi[i] = phi[i] + h * sixth * (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]);
        }
        let t = if k == steps {
            t_end
        } else {
            h * T::from_count(k)
        };
        for (x, p) in phi.iter_mut().enumerate() {
            if *p < -neg_tol {
                return Err(Error::StepTooLarge {
                    state: space.label(x).to_string(),
                    value: p.approx(),
                    time: t.approx(),
                });
            }
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let sum = phi.iter().fold(T::zero(), |a, &p| a + p);
        drift = drift.max((sum - T::one()).abs());
        for p in phi.iter_mut() {
            *p = *p / sum;
        }
        times.push(t);
        phis.push(Distribution::normalized(space.clone(), phi.clone())?);
    }
    Ok(ConditionedPath {
        times,
        phis,
        norm_drift: drift,
    })
}

/// Applies `φ ← φ_block^φ` until the sup-norm change drops below `tol`.
pub fn yaglom_iterate<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    block: T,
    tol: T,
    max_blocks: usize,
) -> Result<YaglomResult<T>> {
    if !(block > T::zero()) || !(tol > T::zero()) {
        return Err(Error::InvalidArgument("block and tol must be > 0".into()));
    }
    let mut phi = mu.clone();
    let mut delta = T::infinity();
    for it in 1..=max_blocks {
        let next = phi_semigroup(rates, &phi, block)?;
        delta = next.sup_distance(&phi);
        phi = next;
        if delta < tol {
            let decay_rate = phi
                .weights()
                .iter()
                .zip(rates.absorption_rates())
                .fold(T::zero(), |a, (&p, &c)| a + p * c);
            return Ok(YaglomResult {
                limit: phi,
                iterations: it,
                final_delta: delta,
                decay_rate,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_blocks,
        last_delta: delta.approx(),
        residual: f64::NAN,
    })
}
