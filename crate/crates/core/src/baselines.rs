//! Benchmark regressors: ordinary least squares, the social-interaction
//! (linear-in-means) model, and regression with network cohesion.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::AdjacencyMatrix;
use crate::rng;
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ols,
    Sim,
    Rnc,
}

/// Fit summary shared by the three benchmark methods. Method-specific
/// parameters are `None` where they do not apply.
#[derive(Clone, Debug)]
pub struct BaselineFit {
    pub method: BaselineMethod,
    pub fitted_values: Array1<f64>,
    pub beta: Array1<f64>,
    /// SIM autoregressive coefficient gamma.
    pub gamma_ar: Option<f64>,
    /// SIM exogenous-peer coefficients eta.
    pub eta: Option<Array1<f64>>,
    /// RNC individual effects mu.
    pub mu: Option<Array1<f64>>,
    /// RNC penalty selected by cross-validation.
    pub lambda: Option<f64>,
}

/// Default SIM autoregressive grid: [-0.99, 0.99] in steps of 0.01.
pub fn default_gamma_grid() -> Vec<f64> {
    (-99..=99).map(|i| i as f64 / 100.0).collect()
}

/// Default RNC penalty grid: 17 log-spaced points on [1e-4, 1e4].
pub fn default_lambda_grid() -> Vec<f64> {
    (0..17).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 16.0)).collect()
}

/// Ordinary least squares.
pub fn fit_ols(x: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Result<BaselineFit> {
    spectral::orthonormal_basis(x)?; // rank check
    let xtx = x.t().dot(x);
    let gx = linalg::solve_spd(&xtx.view(), &x.t())?;
    let beta = gx.dot(&y.to_owned());
    let fitted_values = x.dot(&beta);
    Ok(BaselineFit {
        method: BaselineMethod::Ols,
        fitted_values,
        beta,
        gamma_ar: None,
        eta: None,
        mu: None,
        lambda: None,
    })
}

/// Social-interaction model Y = gamma L Y + X beta + (L X) eta + eps with
/// L = D^{-1} A, fit by profile least squares over a gamma grid.
pub fn fit_sim(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    a: &AdjacencyMatrix,
    gamma_grid: &[f64],
) -> Result<BaselineFit> {
    let (n, p) = x.dim();
    if a.n() != n || y.len() != n {
        return Err(Error::DimensionMismatch { detail: "X, Y and A sizes differ".into() });
    }
    if gamma_grid.is_empty() {
        return Err(Error::InvalidConfig { detail: "gamma grid is empty".into() });
    }
    let degrees = a.degrees();
    let isolated = degrees.iter().filter(|&&d| d <= 0.0).count();
    if isolated > 0 {
        return Err(Error::IsolatedNodes { count: isolated });
    }
    // Row-normalized walk matrix applied to Y and X.
    let mut l = a.matrix().clone();
    for (i, mut row) in l.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v / degrees[i]);
    }
    let ly = l.dot(&y.to_owned());
    let lx = l.dot(x);
    let mut design = Array2::zeros((n, 2 * p));
    design.slice_mut(ndarray::s![.., ..p]).assign(x);
    design.slice_mut(ndarray::s![.., p..]).assign(&lx);

    // Coefficients are linear in gamma: coef(gamma) = c0 - gamma * c1, so the
    // grid search only recombines two solves.
    let dtd = design.t().dot(&design);
    let gd = linalg::solve_spd(&dtd.view(), &design.t())?;
    let c0 = gd.dot(&y.to_owned());
    let c1 = gd.dot(&ly);
    let resid0 = &y.to_owned() - &design.dot(&c0);
    let resid1 = &ly - &design.dot(&c1);
    let a0 = resid0.dot(&resid0);
    let a1 = resid0.dot(&resid1);
    let a2 = resid1.dot(&resid1);

    let mut best = (f64::INFINITY, gamma_grid[0]);
    for &g in gamma_grid {
        let rss = a0 - 2.0 * g * a1 + g * g * a2;
        if rss < best.0 {
            best = (rss, g);
        }
    }
    let gamma = best.1;
    let coef = &c0 - &(c1.mapv(|v| v * gamma));
    let beta = coef.slice(ndarray::s![..p]).to_owned();
    let eta = coef.slice(ndarray::s![p..]).to_owned();
    let fitted_values = ly.mapv(|v| v * gamma) + design.dot(&coef);
    Ok(BaselineFit {
        method: BaselineMethod::Sim,
        fitted_values,
        beta,
        gamma_ar: Some(gamma),
        eta: Some(eta),
        mu: None,
        lambda: None,
    })
}

/// Solve the RNC normal equations
/// [X^T S X, X^T S; S X, S + lambda L] (beta, mu) = (X^T S y, S y)
/// where S selects the training rows (identity for the final fit). Returns
/// None when the system is numerically singular at this lambda.
fn rnc_solve(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    lap: &Array2<f64>,
    lambda: f64,
    train_mask: Option<&[bool]>,
) -> Option<(Array1<f64>, Array1<f64>)> {
    let (n, p) = x.dim();
    let m = p + n;
    let mut sel = Array1::ones(n);
    if let Some(mask) = train_mask {
        for (i, &keep) in mask.iter().enumerate() {
            if !keep {
                sel[i] = 0.0;
            }
        }
    }
    let sx = {
        let mut sx = x.to_owned();
        for (i, mut row) in sx.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| v * sel[i]);
        }
        sx
    };
    let sy = y.to_owned() * &sel;

    let mut system = Array2::zeros((m, m));
    system.slice_mut(ndarray::s![..p, ..p]).assign(&x.t().dot(&sx));
    system.slice_mut(ndarray::s![..p, p..]).assign(&sx.t());
    system.slice_mut(ndarray::s![p.., ..p]).assign(&sx);
    {
        let mut block = system.slice_mut(ndarray::s![p.., p..]);
        block.assign(&lap.mapv(|v| v * lambda));
        for i in 0..n {
            block[(i, i)] += sel[i];
        }
    }
    let mut rhs = Array1::zeros(m);
    rhs.slice_mut(ndarray::s![..p]).assign(&x.t().dot(&sy));
    rhs.slice_mut(ndarray::s![p..]).assign(&sy);

    let rhs2 = rhs.insert_axis(Axis(1));
    let sol = linalg::solve_spd(&system.view(), &rhs2.view()).ok()?;
    let sol = sol.index_axis(Axis(1), 0);
    let beta = sol.slice(ndarray::s![..p]).to_owned();
    let mu = sol.slice(ndarray::s![p..]).to_owned();
    if beta.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some((beta, mu))
}

/// Regression with network cohesion: least squares with a lambda mu^T L mu
/// penalty on individual effects, lambda tuned by seeded k-fold CV on
/// held-out squared error.
pub fn fit_rnc(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    a: &AdjacencyMatrix,
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
) -> Result<BaselineFit> {
    let (n, _p) = x.dim();
    if a.n() != n || y.len() != n {
        return Err(Error::DimensionMismatch { detail: "X, Y and A sizes differ".into() });
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidConfig { detail: "lambda grid is empty".into() });
    }
    let folds = cv_folds.clamp(2, n);
    let degrees = a.degrees();
    let mut lap = -a.matrix().clone();
    for i in 0..n {
        lap[(i, i)] = degrees[i];
    }

    // Seeded fold assignment by shuffled index.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::FOLDS]));
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };

    let mut best: Option<(f64, f64)> = None; // (cv error, lambda)
    for &lambda in lambda_grid {
        if lambda <= 0.0 {
            continue; // interpolating limit, handled below
        }
        let mut err = 0.0;
        let mut ok = true;
        for fold in 0..folds {
            let mask: Vec<bool> = fold_of.iter().map(|&f| f != fold).collect();
            match rnc_solve(x, y, &lap, lambda, Some(&mask)) {
                Some((beta, mu)) => {
                    let fitted = x.dot(&beta) + &mu;
                    for i in 0..n {
                        if !mask[i] {
                            err += (y[i] - fitted[i]).powi(2);
                        }
                    }
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && best.map_or(true, |(e, _)| err < e) {
            best = Some((err, lambda));
        }
    }

    // Non-positive lambda requested explicitly: exact interpolation.
    if best.is_none() && lambda_grid.iter().any(|&l| l <= 0.0) {
        return Ok(BaselineFit {
            method: BaselineMethod::Rnc,
            fitted_values: y.to_owned(),
            beta: Array1::zeros(x.ncols()),
            gamma_ar: None,
            eta: None,
            mu: Some(y.to_owned()),
            lambda: Some(0.0),
        });
    }

    let (_, lambda) = best.ok_or(Error::SingularSystem)?;
    let (beta, mu) = rnc_solve(x, y, &lap, lambda, None).ok_or(Error::SingularSystem)?;
    let fitted_values = x.dot(&beta) + &mu;
    Ok(BaselineFit {
        method: BaselineMethod::Rnc,
        fitted_values,
        beta,
        gamma_ar: None,
        eta: None,
        mu: Some(mu),
        lambda: Some(lambda),
    })
}
