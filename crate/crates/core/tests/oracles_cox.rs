//! Partial-likelihood derivatives against independent oracles: direct
//! risk-set sums, central finite differences, and a dense Newton solver.

mod common;

use approx::assert_abs_diff_eq;
use common::{fd_gradient, naive_gradient, naive_hessian, naive_loss, newton_oracle};
use farmhazard::cox::{
    cox_derivatives, irrepresentable_stat, newton_cox, partial_loglik, score_at_truth,
    NewtonOptions,
};
use ndarray::Array1;

#[test]
fn loss_matches_naive_risk_set_sums() {
    for seed in 0..30 {
        let tie_prob = if seed % 3 == 0 { 0.3 } else { 0.0 };
        let (ds, index, theta) = common::random_instance(25, 4, seed, tie_prob);
        let fast = partial_loglik(ds.covariates().view(), theta.view(), &index).unwrap();
        let slow = naive_loss(
            ds.covariates().view(),
            theta.view(),
            ds.times(),
            ds.events(),
        );
        assert_abs_diff_eq!(fast, slow, epsilon = 1e-10 * (1.0 + slow.abs()));
        assert!(fast >= 0.0);
    }
}

#[test]
fn gradient_matches_naive_and_finite_differences() {
    for seed in 0..25 {
        let (ds, index, theta) = common::random_instance(30, 5, seed, 0.15);
        let derivs = cox_derivatives(ds.covariates().view(), theta.view(), &index, false).unwrap();
        let slow = naive_gradient(
            ds.covariates().view(),
            theta.view(),
            ds.times(),
            ds.events(),
        );
        for j in 0..5 {
            assert_abs_diff_eq!(derivs.gradient[j], slow[j], epsilon = 1e-10);
        }
        let fd = fd_gradient(
            |t| partial_loglik(ds.covariates().view(), t, &index).unwrap(),
            theta.view(),
            1e-5,
        );
        for j in 0..5 {
            let scale = 1.0 + derivs.gradient[j].abs();
            assert_abs_diff_eq!(derivs.gradient[j], fd[j], epsilon = 1e-6 * scale);
        }
    }
}

#[test]
fn hessian_matches_naive_and_gradient_differences() {
    for seed in 0..15 {
        let (ds, index, theta) = common::random_instance(22, 4, seed, 0.2);
        let derivs = cox_derivatives(ds.covariates().view(), theta.view(), &index, true).unwrap();
        let hess = derivs.hessian.as_ref().unwrap();
        let slow = naive_hessian(
            ds.covariates().view(),
            theta.view(),
            ds.times(),
            ds.events(),
        );
        for a in 0..4 {
            for b in 0..4 {
                assert_abs_diff_eq!(hess[[a, b]], slow[[a, b]], epsilon = 1e-10);
            }
        }
        // Differentiate the analytic gradient column by column.
        let h = 1e-5;
        for b in 0..4 {
            let mut hi = theta.to_owned();
            let mut lo = theta.to_owned();
            hi[b] += h;
            lo[b] -= h;
            let ghi = cox_derivatives(ds.covariates().view(), hi.view(), &index, false)
                .unwrap()
                .gradient;
            let glo = cox_derivatives(ds.covariates().view(), lo.view(), &index, false)
                .unwrap()
                .gradient;
            for a in 0..4 {
                let fd = (ghi[a] - glo[a]) / (2.0 * h);
                assert_abs_diff_eq!(hess[[a, b]], fd, epsilon = 1e-4 * (1.0 + fd.abs()));
            }
        }
    }
}

#[test]
fn hessian_is_positive_semidefinite() {
    for seed in 100..130 {
        let (ds, index, theta) = common::random_instance(28, 6, seed, 0.1);
        let derivs = cox_derivatives(ds.covariates().view(), theta.view(), &index, true).unwrap();
        let h = derivs.hessian.unwrap();
        let hm = nalgebra::DMatrix::from_fn(6, 6, |a, b| h[[a, b]]);
        let min_eig = hm
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |acc, &e| acc.min(e));
        assert!(
            min_eig >= -1e-8,
            "negative curvature {min_eig} at seed {seed}"
        );
    }
}

#[test]
fn newton_matches_dense_oracle() {
    for seed in 0..8 {
        let (ds, index, _) = common::random_instance(40, 3, seed, 0.0);
        let fit = newton_cox(
            ds.covariates().view(),
            &index,
            None,
            NewtonOptions::default(),
        )
        .unwrap();
        let oracle = newton_oracle(ds.covariates().view(), ds.times(), ds.events(), 200, 1e-10);
        for j in 0..3 {
            assert_abs_diff_eq!(fit[j], oracle[j], epsilon = 1e-6);
        }
    }
}

#[test]
fn score_at_truth_reduces_to_gradient_norm_on_identical_designs() {
    for seed in 40..46 {
        let (ds, index, theta) = common::random_instance(26, 4, seed, 0.0);
        let eta_score = score_at_truth(
            ds.covariates().view(),
            theta.view(),
            ds.covariates().view(),
            &index,
        )
        .unwrap();
        let grad = naive_gradient(
            ds.covariates().view(),
            theta.view(),
            ds.times(),
            ds.events(),
        );
        let sup = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        assert_abs_diff_eq!(eta_score, sup, epsilon = 1e-10);
    }
}

#[test]
fn irrepresentable_matches_dense_block_algebra() {
    for seed in 60..66 {
        let (ds, index, theta) = common::random_instance(30, 6, seed, 0.0);
        let support = [0usize, 2, 5];
        let stat = irrepresentable_stat(ds.covariates().view(), theta.view(), &support, &index)
            .unwrap();
        let h = naive_hessian(
            ds.covariates().view(),
            theta.view(),
            ds.times(),
            ds.events(),
        );
        let comp: Vec<usize> = (0..6).filter(|j| !support.contains(j)).collect();
        let hss = nalgebra::DMatrix::from_fn(3, 3, |a, b| h[[support[a], support[b]]]);
        let hcs = nalgebra::DMatrix::from_fn(comp.len(), 3, |a, b| h[[comp[a], support[b]]]);
        let m = &hcs * hss.try_inverse().expect("oracle support block invertible");
        let mut worst = 0.0f64;
        for a in 0..comp.len() {
            let row_sum: f64 = (0..3).map(|b| m[(a, b)].abs()).sum();
            worst = worst.max(row_sum);
        }
        assert_abs_diff_eq!(stat, worst, epsilon = 1e-8 * (1.0 + worst));
    }
}

#[test]
fn extreme_scores_stay_finite_where_naive_overflows() {
    let (ds, index, _) = common::random_instance(20, 2, 7, 0.0);
    let theta = Array1::from_vec(vec![400.0, -380.0]);
    let loss = partial_loglik(ds.covariates().view(), theta.view(), &index).unwrap();
    assert!(loss.is_finite() && loss >= 0.0);
    let derivs = cox_derivatives(ds.covariates().view(), theta.view(), &index, true).unwrap();
    assert!(derivs.gradient.iter().all(|g| g.is_finite()));
    assert!(derivs.hessian.unwrap().iter().all(|h| h.is_finite()));
}
