use std::sync::Arc;

use gibbs_mala::estimation::{empirical_gram_precond, empirical_hessian_precond, minimize_empirical_risk, ErmConfig};
use gibbs_mala::samplers::{chain_rng, ProposalSpec};
use gibbs_mala::targets::{CheckLoss, Dataset, GibbsSpec, Loss, Prior, SquaredLoss};
use nalgebra::{dvector, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn spec(data: Dataset, loss: Arc<dyn Loss>) -> GibbsSpec {
    let d = data.dim();
    GibbsSpec::new(Arc::new(data), loss, 1.0, Prior::symmetric_box(d, 20.0).unwrap()).unwrap()
}

fn regression_data(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = chain_rng(seed, 0);
    let mut cov = Vec::with_capacity(n * d);
    let mut resp = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) }).collect();
        resp.push(
            x.iter().enumerate().map(|(j, v)| (j as f64 - 0.5) * v).sum::<f64>() + rng.sample::<f64, _>(StandardNormal),
        );
        cov.extend(x);
    }
    Dataset::from_rows(n, d, cov, resp).unwrap()
}

#[test]
fn median_of_three() {
    let s = spec(
        Dataset::from_rows(3, 1, vec![1.0; 3], vec![1.0, 2.0, 3.0]).unwrap(),
        Arc::new(CheckLoss::new(0.5).unwrap()),
    );
    let fit = minimize_empirical_risk(&s, &dvector![0.0], &ErmConfig::default()).unwrap();
    let grid_min = (0..10_000)
        .map(|i| 4.0 * i as f64 / 9_999.0)
        .min_by(|a, b| s.empirical_risk(&dvector![*a]).total_cmp(&s.empirical_risk(&dvector![*b])))
        .unwrap();
    assert!((fit.theta[0] - 2.0).abs() <= 1e-3, "{}", fit.theta[0]);
    assert!((fit.theta[0] - grid_min).abs() <= 1e-3);
}

#[test]
fn least_squares_matches_normal_equations() {
    for (seed, d) in [(1, 1), (2, 2), (3, 3)] {
        let data = regression_data(seed, 80, d);
        let x = data.covariate_matrix();
        let y = DVector::from_column_slice(data.responses());
        let ols = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * y));
        let fit =
            minimize_empirical_risk(&spec(data, Arc::new(SquaredLoss)), &DVector::zeros(d), &ErmConfig::default())
                .unwrap();
        assert!((&fit.theta - &ols).amax() <= 1e-6, "d={d}: {} vs {}", fit.theta, ols);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_dimensional_check_loss_matches_grid(seed in any::<u64>(), tau in 0.1f64..0.9) {
        let mut rng = chain_rng(seed, 1);
        let y: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..4.0)).collect();
        let s = spec(Dataset::from_rows(25, 1, vec![1.0; 25], y).unwrap(), Arc::new(CheckLoss::new(tau).unwrap()));
        let fit = minimize_empirical_risk(&s, &dvector![0.0], &ErmConfig::default()).unwrap();
        let grid = (0..10_000).map(|i| s.empirical_risk(&dvector![4.0 * i as f64 / 9_999.0])).fold(f64::INFINITY, f64::min);
        prop_assert!((fit.risk - grid).abs() <= 1e-3, "{} vs {grid}", fit.risk);
    }

    #[test]
    fn two_dimensional_check_loss_matches_grid(seed in any::<u64>(), tau in 0.2f64..0.8) {
        let s = spec(regression_data(seed, 40, 2), Arc::new(CheckLoss::new(tau).unwrap()));
        let fit = minimize_empirical_risk(&s, &dvector![0.0, 0.0], &ErmConfig::default()).unwrap();
        let mut grid = f64::INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                let th = dvector![-3.0 + 6.0 * i as f64 / 99.0, -2.0 + 4.0 * j as f64 / 99.0];
                grid = grid.min(s.empirical_risk(&th));
            }
        }
        // the grid may miss the minimiser by its spacing, but never beats ERM by more than the tolerance
        prop_assert!(fit.risk <= grid + 1e-3, "{} vs {grid}", fit.risk);
    }

    #[test]
    fn preconditioners_are_valid_proposal_matrices(seed in any::<u64>(), d in 1usize..5) {
        let data = regression_data(seed, 50, d);
        let gram = empirical_gram_precond(&data).unwrap();
        let theta = DVector::zeros(d);
        let hess = empirical_hessian_precond(&spec(data, Arc::new(SquaredLoss)), &theta).unwrap();
        prop_assert!((gram.matrix() - hess.matrix()).amax() <= 1e-10 * gram.op_norm());
        prop_assert!(ProposalSpec::preconditioned_mala(0.1, gram).is_ok());
        prop_assert!(ProposalSpec::preconditioned_mala(0.1, hess).is_ok());
    }
}
