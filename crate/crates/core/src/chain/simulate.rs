use rand::Rng;
use rand_distr::Exp1;

use super::RateMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainState {
    Live(usize),
    Absorbed,
}

/// One trajectory of the absorbed chain up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionSample<T> {
    pub start: usize,
    /// Jump times (strictly increasing) and the state entered.
    pub path: Vec<(T, ChainState)>,
    /// `None` when the chain survived past the horizon.
    pub absorption_time: Option<T>,
}

impl<T: Real> AbsorptionSample<T> {
    pub fn state_at(&self, t: T) -> ChainState {
        let k = self.path.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            ChainState::Live(self.start)
        } else {
            self.path[k - 1].1
        }
    }
}

/// Simulates `Z_t` from `start` with exponential holding times.
pub fn simulate_absorbing_chain<T: Real>(
    rates: &RateMatrix<T>,
    start: usize,
    horizon: T,
    seed: u64,
) -> Result<AbsorptionSample<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::InvalidArgument("horizon must be > 0".into()));
    }
    if start >= rates.len() {
        return Err(Error::InvalidArgument(format!(
            "start state {start} out of range"
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut path = Vec::new();
    let mut clock = T::zero();
    let mut x = start;
    loop {
        let exit = rates.exit_rate(x);
        if exit == T::zero() {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        clock = clock + T::lit(e) / exit;
        if clock > horizon {
            break;
        }
        let mut u = T::lit(rng.random::<f64>()) * exit;
        let mut next = ChainState::Absorbed;
        for &(y, r) in rates.row(x) {
            if u < r {
                next = ChainState::Live(y);
                break;
            }
            u = u - r;
        }
        // Rounding may leave u marginally above the last live rate with zero absorption.
        if next == ChainState::Absorbed && *rates.absorption(x) == T::zero() {
            next = ChainState::Live(rates.row(x).last().expect("positive exit rate").0);
        }
        path.push((clock, next));
        match next {
            ChainState::Live(y) => x = y,
            ChainState::Absorbed => {
                return Ok(AbsorptionSample {
                    start,
                    path,
                    absorption_time: Some(clock),
                })
            }
        }
    }
    Ok(AbsorptionSample {
        start,
        path,
        absorption_time: None,
    })
}
