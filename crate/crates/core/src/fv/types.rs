//! Transient type bounds: the fraction of particles at `x` that have been
//! absorbed exactly `k` times is at most `((Ct)^k / k!) μP_t(x)`, with
//! equality for `k = 0`, and the whole profile is at most `e^{Ct} μP_t(x)`.

use rayon::prelude::*;

use super::dynamics::{fv_init, fv_run};
use super::estimate::columns_mean_se;
use super::TypeLedger;
use crate::chain::{transient, validate_chain, Distribution, RateMatrix};
use crate::error::{Error, Result};
use crate::rng::derive_key;
use crate::scalar::Real;

/// Slack in standard errors before a bound counts as violated.
const SIGMAS: f64 = 3.0;
/// Absolute floor on the slack, for estimates with zero spread.
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRelation {
    Equality,
    AtMost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeBoundRow {
    /// `None` for the total profile.
    pub k: Option<u32>,
    pub state: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub relation: BoundRelation,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeBoundReport {
    pub t: f64,
    pub n_particles: usize,
    pub replicas: usize,
    /// `μP_t(x)`.
    pub survival_profile: Vec<f64>,
    pub rows: Vec<TypeBoundRow>,
    /// Mean fraction of particles with type above `k_max`.
    pub overflow: f64,
}

impl TypeBoundReport {
    pub fn violations(&self) -> impl Iterator<Item = &TypeBoundRow> {
        self.rows.iter().filter(|r| !r.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn row(&self, k: Option<u32>, state: usize) -> Option<&TypeBoundRow> {
        self.rows.iter().find(|r| r.k == k && r.state == state)
    }
}

fn judge(estimate: f64, stderr: f64, bound: f64, relation: BoundRelation) -> bool {
    let slack = SIGMAS * stderr + FLOOR;
    match relation {
        BoundRelation::Equality => (estimate - bound).abs() <= slack,
        BoundRelation::AtMost => estimate <= bound + slack,
    }
}

/// Runs `replicas` independent systems from i.i.d. `mu` starts with types
/// that never reset, and compares the type-resolved profile at time `t`
/// with its bounds.
pub fn check_type_bound<T: Real>(
    rates: &RateMatrix<T>,
    mu: &Distribution<T>,
    n: usize,
    t: T,
    replicas: usize,
    k_max: u32,
    seed: u64,
) -> Result<TypeBoundReport> {
    if replicas < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicas".into()));
    }
    let summary = validate_chain(rates)?;
    let k = rates.len();
    let rows = k_max as usize + 2;
    let samples: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let c0 = fv_init(mu, n, derive_key(seed, &[r, 0]))?;
            let mut ledger = TypeLedger::transient(n, k_max);
            let c = fv_run(rates, &c0, t, Some(&mut ledger), derive_key(seed, &[r, 1]))?;
            let mut f = vec![0.0; rows * k];
            for (&x, &ty) in c.states.iter().zip(ledger.types()) {
                f[ty as usize * k + x] += 1.0 / n as f64;
            }
            Ok(f)
        })
        .collect::<Result<_>>()?;
    let totals: Vec<Vec<f64>> = samples
        .iter()
        .map(|f| {
            (0..k)
                .map(|x| (0..rows).map(|j| f[j * k + x]).sum())
                .collect()
        })
        .collect();
    let (mean, se) = columns_mean_se(&samples, rows * k);
    let (tot_mean, tot_se) = columns_mean_se(&totals, k);

    let (live, _) = transient(rates, mu.weights(), t)?;
    let survival_profile: Vec<f64> = live.iter().map(|v| v.approx()).collect();
    let ct = (summary.c * t).approx();
    let mut out = Vec::with_capacity((k_max as usize + 2) * k);
    let mut coef = 1.0;
    for j in 0..=k_max {
        if j > 0 {
            coef *= ct / j as f64;
        }
        let relation = if j == 0 {
            BoundRelation::Equality
        } else {
            BoundRelation::AtMost
        };
        for x in 0..k {
            let i = j as usize * k + x;
            let bound = coef * survival_profile[x];
            out.push(TypeBoundRow {
                k: Some(j),
                state: x,
                estimate: mean[i],
                stderr: se[i],
                bound,
                relation,
                holds: judge(mean[i], se[i], bound, relation),
            });
        }
    }
    for x in 0..k {
        let bound = ct.exp() * survival_profile[x];
        out.push(TypeBoundRow {
            k: None,
            state: x,
            estimate: tot_mean[x],
            stderr: tot_se[x],
            bound,
            relation: BoundRelation::AtMost,
            holds: judge(tot_mean[x], tot_se[x], bound, BoundRelation::AtMost),
        });
    }
    let overflow = (0..k).map(|x| mean[(k_max as usize + 1) * k + x]).sum();
    Ok(TypeBoundReport {
        t: t.approx(),
        n_particles: n,
        replicas,
        survival_profile,
        rows: out,
        overflow,
    })
}
