//! Independent oracles and property checks shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qsdfv::chain::{asymmetric_walk, two_state_example};
use qsdfv::fv::{
    fv_run, Dynamics, EventStream, FvEvent, Mode, Occupation, ParticleConfiguration, TypeLedger,
};
use qsdfv::graphical::{
    ancestry_backward, cftp_window, coupled_ancestry, evolve_forward, generate_window,
    perfect_sample,
};
use qsdfv::RateMatrix;

pub type Check = Result<(), String>;

/// Full generator on `Λ ∪ {0}` as a dense row-major matrix; the absorbing
/// state is the last index.
pub fn full_generator(q: &RateMatrix<f64>) -> Vec<Vec<f64>> {
    let n = q.len();
    let mut g = vec![vec![0.0; n + 1]; n + 1];
    for x in 0..n {
        for &(y, r) in q.row(x) {
            g[x][y] = r;
        }
        g[x][n] = *q.absorption(x);
        g[x][x] = -(q.row(x).iter().map(|&(_, r)| r).sum::<f64>() + g[x][n]);
    }
    g
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `e^{tG}` by scaling and squaring of a Taylor series.
pub fn expm(g: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = g.len();
    let norm = g
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as u32;
    let h = t / 2f64.powi(squarings as i32);
    let a: Vec<Vec<f64>> = g
        .iter()
        .map(|r| r.iter().map(|v| v * h).collect())
        .collect();
    let mut sum: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = sum.clone();
    for k in 1..30 {
        term = matmul(&term, &a);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    sum
}

/// Conditioned law `μP_t / (1 - μP_t(·,0))` from the matrix exponential.
pub fn phi_oracle(q: &RateMatrix<f64>, mu: &[f64], t: f64) -> Vec<f64> {
    let p = expm(&full_generator(q), t);
    let n = q.len();
    let live: Vec<f64> = (0..n)
        .map(|x| (0..n).map(|z| mu[z] * p[z][x]).sum())
        .collect();
    let s: f64 = live.iter().sum();
    live.iter().map(|v| v / s).collect()
}

/// Two-sample χ² test of homogeneity; bins with fewer than 10 pooled
/// counts are merged into their neighbour. Returns the p-value.
pub fn chi2_homogeneity(a: &BTreeMap<usize, u64>, b: &BTreeMap<usize, u64>) -> f64 {
    let keys: Vec<usize> = a
        .keys()
        .chain(b.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in keys {
        acc.0 += *a.get(&k).unwrap_or(&0) as f64;
        acc.1 += *b.get(&k).unwrap_or(&0) as f64;
        if acc.0 + acc.1 >= 10.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let (na, nb): (f64, f64) = bins.iter().fold((0.0, 0.0), |s, b| (s.0 + b.0, s.1 + b.1));
    let total = na + nb;
    let stat: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let ea = na * col / total;
            let eb = nb * col / total;
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let df = (bins.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Chains used by the property checks.
pub fn chains() -> Vec<(&'static str, RateMatrix<f64>)> {
    vec![
        ("two_state_example", two_state_example()),
        ("asymmetric_walk", asymmetric_walk(0.3, 6).unwrap()),
    ]
}

/// Relabeling the particles of the initial configuration and of every event
/// relabels the whole trajectory and leaves the occupation path unchanged.
pub fn exchangeability(cases: u64) -> Check {
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let (name, q) = chains().swap_remove((case % 2) as usize);
        let mode = if case % 4 == 0 {
            Mode::Graphical
        } else {
            Mode::Minimal
        };
        let dynamics = Dynamics::new(&q, mode).map_err(|e| e.to_string())?;
        let n = rng.random_range(2..12);
        let states: Vec<usize> = (0..n).map(|_| rng.random_range(0..q.len())).collect();
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(&mut rng);
        let mut a = states.clone();
        let mut b = vec![0; n];
        for i in 0..n {
            b[sigma[i]] = a[i];
        }
        let mut la = TypeLedger::transient(n, 8);
        let mut lb = TypeLedger::transient(n, 8);
        let mut events = EventStream::new(
            dynamics.rate_per_particle(),
            n,
            0.0,
            qsdfv::rng::stream(case, &[]),
        );
        for step in 0..2000 {
            let ev = events.next_event();
            let relabeled = FvEvent {
                particle: sigma[ev.particle],
                partner: sigma[ev.partner],
                ..ev
            };
            dynamics.apply(&mut a, &ev, Some(&mut la));
            dynamics.apply(&mut b, &relabeled, Some(&mut lb));
            let same = (0..n).all(|i| a[i] == b[sigma[i]] && la.types()[i] == lb.types()[sigma[i]]);
            if !same || Occupation::from_states(&a, q.len()) != Occupation::from_states(&b, q.len())
            {
                return Err(format!(
                    "{name}, case {case}: trajectories differ after event {step}"
                ));
            }
        }
    }
    Ok(())
}

/// The occupation sums to `N` after every event and at the end of every run.
pub fn occupation_sum(cases: u64) -> Check {
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(case ^ 0x5eed);
        let (name, q) = chains().swap_remove((case % 2) as usize);
        let n = rng.random_range(2..30);
        let states: Vec<usize> = (0..n).map(|_| rng.random_range(0..q.len())).collect();
        for mode in [Mode::Minimal, Mode::Graphical] {
            let Ok(dynamics) = Dynamics::new(&q, mode) else {
                continue;
            };
            let mut s = states.clone();
            let mut events = EventStream::new(
                dynamics.rate_per_particle(),
                n,
                0.0,
                qsdfv::rng::stream(case, &[1]),
            );
            for step in 0..1000 {
                dynamics.apply(&mut s, &events.next_event(), None);
                let occ = Occupation::from_states(&s, q.len());
                if occ.total() != n {
                    return Err(format!(
                        "{name}, case {case}: occupation {} after event {step}",
                        occ.total()
                    ));
                }
            }
        }
        let c0 = ParticleConfiguration::new(states, 0.0).unwrap();
        let c =
            fv_run(&q, &c0, rng.random_range(0.0..3.0), None, case).map_err(|e| e.to_string())?;
        if c.occupation(q.len()).total() != n || c.len() != n {
            return Err(format!(
                "{name}, case {case}: fv_run changed the particle count"
            ));
        }
    }
    Ok(())
}

/// Regenerating a window from the same key gives the same events, and the
/// doubled window `[-2^k, 0]` restricted to `[-2^(k-1), 0]` is the smaller
/// window.
pub fn window_reuse(cases: u64) -> Check {
    let q = two_state_example::<f64>();
    for seed in 0..cases {
        let n = 2 + (seed % 5) as usize;
        let a = generate_window(&q, n, -1.5, 0.5, seed).map_err(|e| e.to_string())?;
        let b = generate_window(&q, n, -1.5, 0.5, seed).map_err(|e| e.to_string())?;
        if a.events != b.events {
            return Err(format!("seed {seed}: regenerated window differs"));
        }
        let mut small = cftp_window(&q, n, seed, 0).map_err(|e| e.to_string())?;
        for k in 1..=5 {
            let big = cftp_window(&q, n, seed, k).map_err(|e| e.to_string())?;
            let tail: Vec<_> = big
                .events
                .iter()
                .filter(|e| e.time >= small.start)
                .copied()
                .collect();
            if tail != small.events {
                return Err(format!(
                    "seed {seed}: window 2^{k} does not extend window 2^{}",
                    k - 1
                ));
            }
            small = big;
        }
    }
    Ok(())
}

/// Once `Ψ^i[s,t]` is empty it stays empty for every earlier `s`, both along
/// one window and across nested windows; every change of size is ±1.
pub fn ancestry_monotonicity(windows: u64) -> Check {
    let q = two_state_example::<f64>();
    for seed in 0..windows {
        let n = 2 + (seed % 6) as usize;
        let small = cftp_window(&q, n, seed, 2).map_err(|e| e.to_string())?;
        let big = cftp_window(&q, n, seed, 3).map_err(|e| e.to_string())?;
        let mut grid: Vec<f64> = big.events.iter().map(|e| e.time).collect();
        grid.push(big.start);
        for i in 0..n {
            let a = ancestry_backward(&big, i).map_err(|e| e.to_string())?;
            for w in a.path.windows(2) {
                if w[0].1.len().abs_diff(w[1].1.len()) != 1 {
                    return Err(format!(
                        "seed {seed}, particle {i}: ancestry jumped in size"
                    ));
                }
            }
            if let Some(tau) = a.emptied_at() {
                if grid.iter().any(|&r| r < tau && !a.at(r).is_empty()) {
                    return Err(format!(
                        "seed {seed}, particle {i}: ancestry refilled after emptying"
                    ));
                }
            }
            let b = ancestry_backward(&small, i).map_err(|e| e.to_string())?;
            if let Some(tau) = b.emptied_at() {
                if a.emptied_at() != Some(tau) || !a.support().is_empty() {
                    return Err(format!(
                        "seed {seed}, particle {i}: longer window revived the ancestry"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// `|Ψ̂^j[s,t]|` from coupled runs against `|Ψ^j[s,t]|` from independent
/// windows. Returns the χ² p-value.
pub fn coupled_marginal_p_value(runs: u64, n: usize, dt: f64) -> Result<f64, String> {
    let q = two_state_example::<f64>();
    let mut coupled = BTreeMap::new();
    let mut direct = BTreeMap::new();
    for seed in 0..runs {
        let c = coupled_ancestry(&q, n, 0, 1, -dt, 0.0, seed).map_err(|e| e.to_string())?;
        *coupled.entry(c.psi_j_hat.len()).or_insert(0) += 1;
        let w = generate_window(&q, n, -dt, 0.0, seed ^ 0x0fac_e0ff).map_err(|e| e.to_string())?;
        let a = ancestry_backward(&w, 1).map_err(|e| e.to_string())?;
        *direct.entry(a.support().len()).or_insert(0) += 1;
    }
    Ok(chi2_homogeneity(&coupled, &direct))
}

/// Perfect samples do not depend on the configuration at the window start.
pub fn initial_condition_independence(windows: u64) -> Check {
    let q = two_state_example::<f64>();
    for seed in 0..windows {
        let n = 2 + (seed % 4) as usize;
        let p = perfect_sample(&q, n, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2 {
            let states = (0..n).map(|_| rng.random_range(0..2)).collect();
            let c = ParticleConfiguration::new(states, p.window.start).unwrap();
            let out = evolve_forward(&p.window, &c).map_err(|e| e.to_string())?;
            if out != p.config {
                return Err(format!(
                    "seed {seed}: output depends on the initial configuration"
                ));
            }
        }
    }
    Ok(())
}

pub fn report(criterion: u32, title: &str, outcome: &Check) {
    match outcome {
        Ok(()) => println!("criterion {criterion:>2} PASS  {title}"),
        Err(e) => println!("criterion {criterion:>2} FAIL  {title}: {e}"),
    }
}
