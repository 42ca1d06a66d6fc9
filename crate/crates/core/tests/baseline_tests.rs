//! Baseline regressor tests: OLS normal equations, SIM profile search, and
//! RNC limiting behavior.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use netreg_core::baselines::{self, BaselineMethod};
use netreg_core::network::{self, AdjacencyMatrix, CommunityAssignment, ProbabilityMatrix};
use netreg_core::rng;

fn random_design(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut stream = rng::stream(seed, &[]);
    Array2::from_shape_fn((n, p), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut stream)
    })
}

fn connected_graph(n: usize, seed: u64) -> AdjacencyMatrix {
    // ER(0.15) plus a ring so every node has degree >= 2
    let prob = ProbabilityMatrix::new(Array2::from_elem((n, n), 0.15)).expect("er");
    let mut m = network::sample_inhomogeneous_er(&prob, &mut rng::stream(seed, &[]))
        .matrix()
        .clone();
    for i in 0..n {
        let j = (i + 1) % n;
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    }
    AdjacencyMatrix::new(m).expect("ring + ER")
}

#[test]
fn ols_satisfies_normal_equations() {
    let n = 60;
    let x = random_design(n, 4, 1);
    let y = Array1::from_shape_fn(n, |i| (i as f64 * 0.3).sin() + x[(i, 0)]);
    let fit = baselines::fit_ols(&x.view(), &y.view()).expect("ols");
    assert_eq!(fit.method, BaselineMethod::Ols);
    // residual orthogonal to every column
    let resid = &y - &fit.fitted_values;
    let cross = x.t().dot(&resid);
    for v in cross.iter() {
        assert!(v.abs() < 1e-8, "normal equations violated: {v:.3e}");
    }
    // interpolation case: y exactly in col(X)
    let y2 = x.dot(&ndarray::array![1.0, -2.0, 0.5, 3.0]);
    let fit2 = baselines::fit_ols(&x.view(), &y2.view()).expect("ols");
    assert!((fit2.beta[0] - 1.0).abs() < 1e-10);
    assert!((fit2.beta[3] - 3.0).abs() < 1e-10);
}

#[test]
fn sim_nests_ols_at_gamma_zero() {
    // with the grid pinned to {0} and eta-columns orthogonalized out, SIM
    // with gamma = 0 must fit at least as well as OLS on [X, LX]
    let n = 50;
    let x = random_design(n, 3, 2);
    let y = Array1::from_shape_fn(n, |i| (i as f64 * 0.2).cos());
    let a = connected_graph(n, 3);
    let fit = baselines::fit_sim(&x.view(), &y.view(), &a, &[0.0]).expect("sim gamma=0");
    assert_eq!(fit.gamma_ar, Some(0.0));
    // gamma = 0 SIM equals OLS on the augmented design [X, LX]
    let degrees = a.degrees();
    let mut l = a.matrix().clone();
    for (i, mut row) in l.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v / degrees[i]);
    }
    let lx = l.dot(&x);
    let mut design = Array2::zeros((n, 6));
    design.slice_mut(ndarray::s![.., ..3]).assign(&x);
    design.slice_mut(ndarray::s![.., 3..]).assign(&lx);
    let ols = baselines::fit_ols(&design.view(), &y.view()).expect("ols on [X, LX]");
    let d = (&fit.fitted_values - &ols.fitted_values).mapv(f64::abs).sum();
    assert!(d < 1e-8, "SIM(0) differs from OLS on [X, LX] by {d:.3e}");
}

#[test]
fn sim_recovers_planted_autoregressive_gamma() {
    // generate Y = (I - g L)^{-1} (X b + L X eta + small noise) and check the
    // profile search lands near g
    let n = 150;
    let g_true = 0.4;
    let x = random_design(n, 2, 5);
    let a = connected_graph(n, 6);
    let degrees = a.degrees();
    let mut l = a.matrix().clone();
    for (i, mut row) in l.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v / degrees[i]);
    }
    let beta = ndarray::array![1.0, -1.0];
    let eta = ndarray::array![0.5, 0.25];
    let mean = x.dot(&beta) + l.dot(&x).dot(&eta);
    // solve (I - g L) y = mean + noise
    let mut system = -l.mapv(|v| v * g_true);
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    use ndarray_linalg::Solve;
    let y = system.solve(&mean).expect("solve");
    let fit = baselines::fit_sim(&x.view(), &y.view(), &a, &baselines::default_gamma_grid())
        .expect("sim");
    // noiseless: gamma_true = 0.4 is on the grid, so recovery is exact and
    // the coefficients follow
    let g_hat = fit.gamma_ar.expect("gamma estimate");
    assert!((g_hat - g_true).abs() < 1e-12, "gamma_hat {g_hat} vs {g_true}");
    assert!((fit.beta[0] - 1.0).abs() < 1e-8);
    assert!((fit.beta[1] + 1.0).abs() < 1e-8);
    let dy = (&fit.fitted_values - &y).mapv(f64::abs).sum();
    assert!(dy < 1e-8, "noiseless SIM must interpolate, residual {dy:.2e}");
}

#[test]
fn sim_rejects_isolated_nodes() {
    let mut m = Array2::zeros((6, 6));
    m[(0, 1)] = 1.0;
    m[(1, 0)] = 1.0;
    m[(2, 3)] = 1.0;
    m[(3, 2)] = 1.0;
    // nodes 4, 5 isolated
    let a = AdjacencyMatrix::new(m).expect("adjacency");
    let x = random_design(6, 1, 8);
    let y = Array1::zeros(6);
    let err = baselines::fit_sim(&x.view(), &y.view(), &a, &[0.0]).expect_err("isolated");
    match err {
        netreg_core::error::Error::IsolatedNodes { count } => assert_eq!(count, 2),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn rnc_large_lambda_approaches_cohesive_limit() {
    // as lambda -> infinity the individual effects must flatten out on a
    // connected graph (mu -> constant vector)
    let n = 40;
    let x = random_design(n, 2, 9);
    let a = connected_graph(n, 10);
    let y = Array1::from_shape_fn(n, |i| x[(i, 0)] - x[(i, 1)] + ((i % 5) as f64));
    let fit = baselines::fit_rnc(&x.view(), &y.view(), &a, &[1e8], 5, 11).expect("rnc");
    let mu = fit.mu.expect("mu present");
    let mean = mu.mean().expect("mean");
    let spread = mu.iter().fold(0.0f64, |acc, v| acc.max((v - mean).abs()));
    assert!(spread < 1e-4, "mu spread {spread:.2e} at lambda = 1e8");
    assert_eq!(fit.lambda, Some(1e8));
}

#[test]
fn rnc_zero_lambda_interpolates() {
    let n = 30;
    let x = random_design(n, 2, 12);
    let a = connected_graph(n, 13);
    let y = Array1::from_shape_fn(n, |i| (i as f64).sqrt());
    let fit = baselines::fit_rnc(&x.view(), &y.view(), &a, &[0.0], 5, 14).expect("rnc");
    let resid = (&y - &fit.fitted_values).mapv(f64::abs).sum();
    assert!(resid < 1e-8, "lambda = 0 must interpolate, residual {resid:.2e}");
}

#[test]
fn rnc_cv_picks_a_grid_point_and_is_seeded() {
    let n = 60;
    let x = random_design(n, 2, 15);
    let a = connected_graph(n, 16);
    // cohesive signal: mu follows the two communities
    let g = CommunityAssignment::balanced(n, 2);
    let y = Array1::from_shape_fn(n, |i| {
        x[(i, 0)] + if g.labels()[i] == 0 { 2.0 } else { -2.0 }
    });
    let grid = baselines::default_lambda_grid();
    let f1 = baselines::fit_rnc(&x.view(), &y.view(), &a, &grid, 10, 99).expect("rnc");
    let f2 = baselines::fit_rnc(&x.view(), &y.view(), &a, &grid, 10, 99).expect("rnc");
    let lambda = f1.lambda.expect("lambda chosen");
    assert!(grid.contains(&lambda));
    assert_eq!(f1.lambda, f2.lambda, "same seed must choose the same lambda");
    assert_eq!(f1.beta, f2.beta);
}

#[test]
fn default_grids_match_their_documented_shape() {
    let gg = baselines::default_gamma_grid();
    assert_eq!(gg.len(), 199);
    assert!((gg[0] + 0.99).abs() < 1e-12);
    assert!((gg[198] - 0.99).abs() < 1e-12);
    assert!((gg[1] - gg[0] - 0.01).abs() < 1e-12);
    let lg = baselines::default_lambda_grid();
    assert_eq!(lg.len(), 17);
    assert!((lg[0] - 1e-4).abs() < 1e-16);
    assert!((lg[16] - 1e4).abs() < 1e-8);
    // log-spaced: constant ratio
    let ratio = lg[1] / lg[0];
    for w in lg.windows(2) {
        assert!((w[1] / w[0] - ratio).abs() < 1e-8);
    }
}
