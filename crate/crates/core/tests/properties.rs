mod common;

use std::sync::Arc;

use proptest::prelude::*;

use qsdfv::chain::semigroup;
use qsdfv::conditioned::phi_semigroup;
use qsdfv::fv::{
    exact_unlabeled_stationary, fv_run, unlabeled_transitions, ParticleConfiguration, TypeLedger,
};
use qsdfv::graphical::{
    ancestry_backward, evolve_forward, evolve_particle, generate_window, EventKind,
};
use qsdfv::{validate_chain, Distribution, RateMatrix, StateSpace};

/// Random chains on 2 to 4 states with at least one positive absorption
/// rate. With `dense` every off-diagonal rate is positive, so `α > 0`.
fn chain(dense: bool) -> impl Strategy<Value = RateMatrix<f64>> {
    (2usize..=4).prop_flat_map(move |k| {
        let lo = if dense { 0.05 } else { 0.0 };
        (
            prop::collection::vec(lo..2.0f64, k * (k - 1)),
            prop::collection::vec(0.0..1.5f64, k),
            0..k,
        )
            .prop_map(move |(off, mut absorb, hot)| {
                absorb[hot] += 0.1;
                let space = Arc::new(StateSpace::numbered(k).unwrap());
                let mut entries = Vec::new();
                let mut it = off.into_iter();
                for x in 0..k {
                    for y in 0..k {
                        if x != y {
                            let r = it.next().unwrap();
                            // Sparse chains drop small rates.
                            if dense || r > 0.5 {
                                entries.push((x, y, r));
                            }
                        }
                    }
                }
                RateMatrix::new(space, entries, absorb).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_bounds(q in chain(false)) {
        let s = validate_chain(&q).unwrap();
        // The sharp form of α ≤ q̄: α ≤ internal(x) + α(x) for every x.
        for x in 0..q.len() {
            prop_assert!(s.alpha <= q.internal_rate(x) + s.alpha_z[x] + 1e-12);
        }
        prop_assert!(s.c <= s.qbar + 1e-12);
        let total: f64 = s.alpha_z.iter().sum();
        prop_assert!((total - s.alpha).abs() < 1e-12);
    }

    #[test]
    fn semigroup_is_honest(q in chain(false), t in 0.0..5.0f64) {
        let p = semigroup(&q, t).unwrap();
        for z in 0..q.len() {
            prop_assert!((p.honest_row_sum(z) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn conditioning_composes(q in chain(false), t in 0.0..2.0f64, s in 0.0..2.0f64) {
        let mu = Distribution::uniform(q.space().clone());
        let direct = phi_semigroup(&q, &mu, t + s).unwrap();
        let staged = phi_semigroup(&q, &phi_semigroup(&q, &mu, t).unwrap(), s).unwrap();
        prop_assert!(direct.sup_distance(&staged) < 1e-9);
    }

    #[test]
    fn particle_count_is_conserved(q in chain(false), n in 2usize..40, t in 0.0..3.0f64, seed: u64) {
        let states: Vec<usize> = (0..n).map(|i| i % q.len()).collect();
        let c0 = ParticleConfiguration::new(states, 0.0).unwrap();
        let mut ledger = TypeLedger::transient(n, 4);
        let c = fv_run(&q, &c0, t, Some(&mut ledger), seed).unwrap();
        prop_assert_eq!(c.occupation(q.len()).total(), n);
        prop_assert_eq!(c.clock, t);
        prop_assert!(ledger.types().iter().all(|&k| k <= 5));
    }

    #[test]
    fn restricted_evolution_is_exact(q in chain(true), n in 2usize..8, seed: u64) {
        let w = generate_window(&q, n, 0.0, 1.5, seed).unwrap();
        let init = ParticleConfiguration::new((0..n).map(|i| (i * 7) % q.len()).collect(), 0.0).unwrap();
        let full = evolve_forward(&w, &init).unwrap();
        for i in 0..n {
            let a = ancestry_backward(&w, i).unwrap();
            prop_assert_eq!(evolve_particle(&w, &a, &init).unwrap(), full.states[i]);
            for pair in a.path.windows(2) {
                prop_assert_eq!(pair[0].1.len().abs_diff(pair[1].1.len()), 1);
            }
        }
        // Internal events never touch the ancestry.
        let mut internal_only = w.clone();
        internal_only.events.retain(|e| e.kind == EventKind::Internal);
        for i in 0..n {
            let a = ancestry_backward(&internal_only, i).unwrap();
            prop_assert_eq!(a.support(), &[i][..]);
        }
    }

    #[test]
    fn exact_stationary_law_balances(q in chain(true), n in 2usize..6) {
        let law = exact_unlabeled_stationary(&q, n).unwrap();
        let total: f64 = law.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(law.weights.iter().all(|&w| w > 0.0));
        // Global balance: inflow equals outflow at every configuration.
        let m = law.configurations.len();
        let mut inflow = vec![0.0; m];
        let mut outflow = vec![0.0; m];
        for (a, eta) in law.configurations.iter().enumerate() {
            for (to, r) in unlabeled_transitions(&q, eta) {
                let b = law.configurations.iter().position(|c| *c == to).unwrap();
                outflow[a] += law.weights[a] * r;
                inflow[b] += law.weights[a] * r;
            }
        }
        for a in 0..m {
            prop_assert!((inflow[a] - outflow[a]).abs() < 1e-9);
        }
        let mass: f64 = law.profile.iter().sum();
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }
}

#[test]
fn exchangeability() {
    common::exchangeability(400).unwrap();
}

#[test]
fn occupation_sum() {
    common::occupation_sum(400).unwrap();
}
