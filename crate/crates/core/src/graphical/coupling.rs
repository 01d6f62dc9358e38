//! Coupling of the ancestries of two particles `i ≠ j`.
//!
//! Two independent event windows are drawn, green and red. Reading backward
//! from `t`, `Ψ^i`, `Ψ^j` and `Ψ̂^i` follow the green events. `Ψ̂^j` follows
//! the green events until the hatted sets first intersect, which sets the
//! indicator `I`, and the red events afterwards. Before the intersection
//! `Ψ̂^j = Ψ^j`; after it, `Ψ̂^j` is driven by events independent of
//! everything read so far, so `Ψ̂^i` and `Ψ̂^j` evolve independently while
//! `Ψ̂^j` keeps the law of `Ψ^j`.

use std::sync::Arc;

use rayon::prelude::*;

use super::ancestry::Members;
use super::window::{EventWindow, GraphicalKernel, MarkedEvent};
use crate::chain::RateMatrix;
use crate::error::{Error, Result};
use crate::rng::derive_key;
use crate::scalar::Real;

const TAG_GREEN: u64 = 0x6ee1;
const TAG_RED: u64 = 0x4ed1;

#[derive(Debug, Clone)]
pub struct CouplingState<T> {
    pub green: EventWindow<T>,
    pub red: EventWindow<T>,
    pub i: usize,
    pub j: usize,
    /// Sets at the window start `s`, sorted.
    pub psi_i: Vec<usize>,
    pub psi_j: Vec<usize>,
    pub psi_i_hat: Vec<usize>,
    pub psi_j_hat: Vec<usize>,
    /// `I[s, t]`.
    pub indicator: bool,
    /// Backward time at which the hatted sets first intersected.
    pub intersection_time: Option<T>,
}

struct Coupled {
    psi_i: Members,
    psi_j: Members,
    hat_i: Members,
    hat_j: Members,
    indicator: bool,
}

impl Coupled {
    fn green<T>(&mut self, ev: &MarkedEvent<T>) -> bool {
        self.psi_i.step_back(ev);
        self.psi_j.step_back(ev);
        let (_, grown_i) = self.hat_i.step_back(ev);
        if self.indicator {
            return false;
        }
        let (_, grown_j) = self.hat_j.step_back(ev);
        // The sets start disjoint and only meet through an added particle.
        let meet = grown_i.is_some_and(|c| self.hat_j.contains(c))
            || grown_j.is_some_and(|c| self.hat_i.contains(c));
        if meet {
            self.indicator = true;
        }
        meet
    }

    fn red<T>(&mut self, ev: &MarkedEvent<T>) {
        if self.indicator {
            self.hat_j.step_back(ev);
        }
    }
}

pub fn coupled_ancestry<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    i: usize,
    j: usize,
    s: T,
    t: T,
    seed: u64,
) -> Result<CouplingState<T>> {
    if n < 2 || i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument(
            "need two distinct particles among at least 2".into(),
        ));
    }
    if !(s < t) || !(t - s).is_finite() {
        return Err(Error::InvalidArgument("window needs finite s < t".into()));
    }
    let kernel = Arc::new(GraphicalKernel::new(rates));
    let green = EventWindow::from_segment(kernel.clone(), n, s, t, derive_key(seed, &[TAG_GREEN]));
    let red = EventWindow::from_segment(kernel, n, s, t, derive_key(seed, &[TAG_RED]));
    let mut st = Coupled {
        psi_i: Members::singleton(n, i),
        psi_j: Members::singleton(n, j),
        hat_i: Members::singleton(n, i),
        hat_j: Members::singleton(n, j),
        indicator: false,
    };
    let mut intersection_time = None;
    let (mut g, mut r) = (green.events.len(), red.events.len());
    while g > 0 || r > 0 {
        // Latest remaining event first; green wins exact ties.
        let take_green = r == 0 || (g > 0 && green.events[g - 1].time >= red.events[r - 1].time);
        if take_green {
            g -= 1;
            let ev = &green.events[g];
            if st.green(ev) {
                intersection_time = Some(ev.time);
            }
        } else {
            r -= 1;
            st.red(&red.events[r]);
        }
    }
    Ok(CouplingState {
        i,
        j,
        psi_i: st.psi_i.to_vec(),
        psi_j: st.psi_j.to_vec(),
        psi_i_hat: st.hat_i.to_vec(),
        psi_j_hat: st.hat_j.to_vec(),
        indicator: st.indicator,
        intersection_time,
        green,
        red,
    })
}

/// Upper bound on `P(I[s,t] = 1)` for a window of length `dt`:
/// `(1/(N-1)) (C/(α-C)) (1 - e^{2(C-α) dt})`, read as `2C dt/(N-1)` when `α = C`.
pub fn coupling_bound(alpha: f64, c: f64, n: usize, dt: f64) -> f64 {
    let scale = 1.0 / (n as f64 - 1.0);
    if alpha == c {
        scale * 2.0 * c * dt
    } else {
        scale * c / (alpha - c) * -(2.0 * (c - alpha) * dt).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub n: usize,
    pub dt: f64,
    pub replicas: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `estimate ≤ bound + 3 stderr`.
    pub holds: bool,
}

/// Monte Carlo estimate of `P(I[-dt, 0] = 1)` for particles 0 and 1.
pub fn estimate_i_probability<T: Real>(
    rates: &RateMatrix<T>,
    n: usize,
    dt: T,
    replicas: usize,
    seed: u64,
) -> Result<IndicatorReport> {
    if replicas < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicas".into()));
    }
    let hits: Vec<bool> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            coupled_ancestry(rates, n, 0, 1, -dt, T::zero(), derive_key(seed, &[r]))
                .map(|c| c.indicator)
        })
        .collect::<Result<_>>()?;
    let k = hits.iter().filter(|&&h| h).count() as f64;
    let m = replicas as f64;
    let estimate = k / m;
    let stderr = (estimate * (1.0 - estimate) / (m - 1.0)).sqrt();
    let kernel = GraphicalKernel::new(rates);
    let bound = coupling_bound(kernel.alpha().approx(), kernel.c().approx(), n, dt.approx());
    Ok(IndicatorReport {
        n,
        dt: dt.approx(),
        replicas,
        estimate,
        stderr,
        bound,
        holds: estimate <= bound + 3.0 * stderr,
    })
}
