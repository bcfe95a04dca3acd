use gibbs_mala::diagnostics::{ess_slice, gelman_rubin_slices, iterations_to_threshold};
use gibbs_mala::samplers::{chain_rng, Event, Trace};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn ar1(seed: u64, stream: u64, n: usize, phi: f64, start: f64) -> Vec<f64> {
    let mut rng = chain_rng(seed, stream);
    let mut x = start;
    (0..n)
        .map(|_| {
            x = phi * x + rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

fn trace(values: Vec<f64>) -> Trace {
    let n = values.len();
    Trace {
        chain_id: 0,
        seed: 0,
        steps: (1..=n as u64).collect(),
        samples: DMatrix::from_vec(n, 1, values),
        events: vec![Event::Accepted; n],
        acceptance_rate: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrink_factor_affine_invariant(
        seed in any::<u64>(),
        m in 2usize..6,
        a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        b in -100.0f64..100.0,
    ) {
        let chains: Vec<Vec<f64>> = (0..m).map(|i| ar1(seed, i as u64, 400, 0.6, 3.0 * i as f64)).collect();
        let mapped: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| a * v + b).collect()).collect();
        let (p1, u1) = gelman_rubin_slices(&chains.iter().map(Vec::as_slice).collect::<Vec<_>>(), 400).unwrap();
        let (p2, u2) = gelman_rubin_slices(&mapped.iter().map(Vec::as_slice).collect::<Vec<_>>(), 400).unwrap();
        prop_assert!((p1 - p2).abs() <= 1e-9 * p1, "{p1} vs {p2}");
        prop_assert!((u1 - u2).abs() <= 1e-9 * u1, "{u1} vs {u2}");
    }

    #[test]
    fn ess_affine_invariant(seed in any::<u64>(), phi in -0.5f64..0.95, a in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], b in -50.0f64..50.0) {
        let x = ar1(seed, 0, 2000, phi, 0.0);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (e1, e2) = (ess_slice(&x).unwrap(), ess_slice(&y).unwrap());
        prop_assert!((e1 - e2).abs() <= 1e-8 * e1, "{e1} vs {e2}");
    }

    #[test]
    fn iterations_to_threshold_monotone(seed in any::<u64>(), m in 2usize..5, t1 in 1.001f64..1.3, dt in 0.0f64..0.3) {
        // chains start apart and drift together
        let chains: Vec<Trace> = (0..m).map(|i| trace(ar1(seed, i as u64, 600, 0.9, 10.0 * i as f64))).collect();
        let strict = iterations_to_threshold(&chains, t1, 20).unwrap();
        let loose = iterations_to_threshold(&chains, t1 + dt, 20).unwrap();
        match (strict, loose) {
            (Some(s), Some(l)) => prop_assert!(l <= s),
            (Some(_), None) => prop_assert!(false, "looser threshold never crossed"),
            _ => {}
        }
    }
}

#[test]
fn iid_shrink_factor_near_one() {
    let chains: Vec<Vec<f64>> = (0..4).map(|i| ar1(99, i, 10_000, 0.0, 0.0)).collect();
    let (p, _) = gelman_rubin_slices(&chains.iter().map(Vec::as_slice).collect::<Vec<_>>(), 10_000).unwrap();
    assert!((p - 1.0).abs() <= 0.05, "{p}");
}
