//! Point estimation, covariance estimation, contrast/coefficient inference
//! and the chi-squared network-effect test (Algorithm 1, steps 4-8).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::NetworkEstimate;
use crate::rank::{self, RankSelectionReport};
use crate::spectral::{self, ProjectionDiagnostics};

/// How the intersection dimension r is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RMode {
    Fixed(usize),
    AutoThreshold,
    AutoBootstrap,
}

/// Degrees of freedom used by the network-effect test: the dimension of
/// gamma0 (K - r), or the full subspace dimension K.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChisqDfMode {
    DimGamma,
    FullK,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Network-subspace dimension K.
    pub k: usize,
    pub r_mode: RMode,
    /// Significance level for CIs and the model guard.
    #[serde(default = "default_alpha")]
    pub alpha_level: f64,
    #[serde(default = "default_df_mode")]
    pub chisq_df_mode: ChisqDfMode,
    /// Bootstrap replicates for `RMode::AutoBootstrap`.
    #[serde(default = "default_bootstrap_reps")]
    pub bootstrap_reps: usize,
    /// Seed for the bootstrap rank selection.
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_df_mode() -> ChisqDfMode {
    ChisqDfMode::DimGamma
}
fn default_bootstrap_reps() -> usize {
    50
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            r_mode: RMode::AutoThreshold,
            alpha_level: default_alpha(),
            chisq_df_mode: default_df_mode(),
            bootstrap_reps: default_bootstrap_reps(),
            seed: 0,
        }
    }

    pub fn with_fixed_r(k: usize, r: usize) -> Self {
        FitConfig { r_mode: RMode::Fixed(r), ..Self::new(k) }
    }

    fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.k == 0 || self.k > n.saturating_sub(1) {
            return Err(Error::InvalidConfig { detail: format!("K = {} outside 1..=n-1", self.k) });
        }
        if let RMode::Fixed(r) = self.r_mode {
            if r > p.min(self.k) {
                return Err(Error::InvalidConfig {
                    detail: format!("fixed r = {r} exceeds min(p, K) = {}", p.min(self.k)),
                });
            }
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::InvalidConfig { detail: "alpha_level must lie in (0,1)".into() });
        }
        if self.r_mode == RMode::AutoBootstrap && self.bootstrap_reps == 0 {
            return Err(Error::InvalidConfig { detail: "bootstrap_reps must be >= 1".into() });
        }
        Ok(())
    }
}

/// Outcome of the chi-squared network-effect test.
#[derive(Clone, Debug)]
pub struct NetworkEffect {
    pub gamma0: Array1<f64>,
    pub chisq: f64,
    pub df: usize,
    pub pvalue: f64,
}

/// Everything produced by one fit. Covariances are stored both with the
/// plug-in sigma2 and at unit noise (`*_unit`); the unit versions decide
/// direction degeneracy independently of the realized noise level.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub theta_hat: Array1<f64>,
    pub beta_hat: Array1<f64>,
    pub alpha_hat: Array1<f64>,
    pub fitted_values: Array1<f64>,
    pub sigma2_hat: f64,
    pub cov_theta: Array2<f64>,
    pub cov_beta: Array2<f64>,
    pub cov_theta_unit: Array2<f64>,
    pub cov_beta_unit: Array2<f64>,
    /// gamma_hat = W-breve_{(r+1):K}^T P_N Y, length K - r.
    pub gamma_hat: Array1<f64>,
    /// W-breve^T P_N P_N^T W-breve restricted to the tail columns, unit noise.
    pub sigma_gamma_unit: Array2<f64>,
    /// None when the covariance of gamma_hat is singular (e.g. a noiseless
    /// fit) or when K - r = 0; `network_effect_test` reconstructs the error.
    pub network_effect: Option<NetworkEffect>,
    pub r_used: usize,
    pub k: usize,
    pub sigma_hat_values: Vec<f64>,
    pub rank_report: Option<RankSelectionReport>,
    pub alpha_level: f64,
    pub chisq_df_mode: ChisqDfMode,
    /// True when `model_guard_fit` replaced the spectral fit with OLS.
    pub fallback: bool,
    pub projection_diagnostics: ProjectionDiagnostics,
    pub degree_floor_applied: bool,
}

/// One-dimensional normal inference summary.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Inference {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub z: f64,
    pub pvalue: f64,
}

/// Check that every column of X has norm sqrt(n) within 1%.
pub fn check_standardized(x: &ArrayView2<f64>) -> Result<()> {
    let expected = (x.nrows() as f64).sqrt();
    for (j, col) in x.columns().into_iter().enumerate() {
        let norm = linalg::norm2(&col);
        if (norm - expected).abs() > 0.01 * expected {
            return Err(Error::UnstandardizedDesign { column: j + 1, norm, expected });
        }
    }
    Ok(())
}

/// Rescale each column of X to norm sqrt(n) (no centering). Returns the
/// rescaled matrix and the per-column factors applied.
pub fn standardize_columns(x: &ArrayView2<f64>) -> Result<(Array2<f64>, Vec<f64>)> {
    let expected = (x.nrows() as f64).sqrt();
    let mut out = x.to_owned();
    let mut scales = Vec::with_capacity(x.ncols());
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let norm = linalg::norm2(&col.view());
        if norm <= 0.0 {
            return Err(Error::InvalidConfig { detail: format!("column {} has zero norm", j + 1) });
        }
        let s = expected / norm;
        col.mapv_inplace(|v| v * s);
        scales.push(s);
    }
    Ok((out, scales))
}

/// Spectral projection estimation.
pub fn fit(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    p_hat: &NetworkEstimate,
    config: &FitConfig,
) -> Result<FitResult> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { detail: format!("X has {n} rows but Y has {}", y.len()) });
    }
    if p_hat.n() != n {
        return Err(Error::DimensionMismatch {
            detail: format!("X has {n} rows but the network estimate is {0}x{0}", p_hat.n()),
        });
    }
    config.validate(n, p)?;
    check_standardized(x)?;

    let k = config.k;
    let z = spectral::orthonormal_basis(x)?;
    let eig = p_hat.leading_eigenvectors(k)?;
    let svd = spectral::alignment_svd(&z, &eig.basis)?;

    let (r, rank_report) = match config.r_mode {
        RMode::Fixed(r) => (r, None),
        RMode::AutoThreshold => {
            let report = rank::select_r_threshold(&svd.sigma_hat, p_hat.d_hat, p, k, n);
            (report.r_hat, Some(report))
        }
        RMode::AutoBootstrap => {
            let adj = p_hat.adjacency_matrix().ok_or_else(|| Error::InvalidConfig {
                detail: "bootstrap rank selection needs the source adjacency matrix".into(),
            })?;
            let report = rank::select_r_bootstrap(
                adj,
                &z,
                k,
                config.bootstrap_reps,
                config.seed,
                p_hat.eigen_direction,
            )?;
            (report.r_hat, Some(report))
        }
    };

    let df = n as i64 - p as i64 - k as i64 + r as i64;
    if df <= 0 {
        return Err(Error::DegreesOfFreedomExhausted { df });
    }

    let proj = spectral::build_projections(&svd, r)?;
    let y_owned = y.to_owned();

    // gx = (X^T X)^{-1} X^T, the shared least-squares operator.
    let xtx = x.t().dot(x);
    let gx = linalg::solve_spd(&xtx.view(), &x.t())?;

    let theta_hat = gx.dot(&proj.p_r.dot(&y_owned));
    let beta_hat = gx.dot(&proj.p_c.dot(&y_owned));
    let alpha_hat = proj.p_n.dot(&y_owned);
    let fitted_values = proj.h.dot(&y_owned);
    let resid = &y_owned - &fitted_values;
    let sigma2_hat = resid.dot(&resid) / df as f64;

    let gr = gx.dot(&proj.p_r);
    let cov_theta_unit = gr.dot(&gr.t());
    let gc = gx.dot(&proj.p_c);
    let cov_beta_unit = gc.dot(&gc.t());
    let cov_theta = cov_theta_unit.mapv(|v| v * sigma2_hat);
    let cov_beta = cov_beta_unit.mapv(|v| v * sigma2_hat);

    // Tail network directions and the network-effect coordinates.
    let tail = svd.w_breve.slice_axis(Axis(1), ndarray::Slice::from(r..k)).to_owned();
    let gamma_hat = tail.t().dot(&alpha_hat);
    let q = proj.p_n.t().dot(&tail); // P_N^T W-breve_tail, n x (K - r)
    let sigma_gamma_unit = q.t().dot(&q);

    let network_effect = compute_network_effect(
        &gamma_hat,
        &sigma_gamma_unit,
        sigma2_hat,
        k,
        r,
        config.chisq_df_mode,
    )
    .ok()
    .flatten();

    Ok(FitResult {
        theta_hat,
        beta_hat,
        alpha_hat,
        fitted_values,
        sigma2_hat,
        cov_theta,
        cov_beta,
        cov_theta_unit,
        cov_beta_unit,
        gamma_hat,
        sigma_gamma_unit,
        network_effect,
        r_used: r,
        k,
        sigma_hat_values: svd.sigma_hat.clone(),
        rank_report,
        alpha_level: config.alpha_level,
        chisq_df_mode: config.chisq_df_mode,
        fallback: false,
        projection_diagnostics: proj.diagnostics(),
        degree_floor_applied: p_hat.degree_floor_applied,
    })
}

/// Ok(None) when K - r = 0 (mapped to NoNetworkComponent by the public
/// test); Err carries the singular-covariance diagnosis.
fn compute_network_effect(
    gamma_hat: &Array1<f64>,
    sigma_gamma_unit: &Array2<f64>,
    sigma2_hat: f64,
    k: usize,
    r: usize,
    df_mode: ChisqDfMode,
) -> Result<Option<NetworkEffect>> {
    if k == r {
        return Ok(None);
    }
    let sigma_gamma = sigma_gamma_unit.mapv(|v| v * sigma2_hat);
    let floor = (1e-12 * sigma2_hat).max(f64::MIN_POSITIVE);
    let inv_sqrt = linalg::inv_sqrt_sym(&sigma_gamma.view(), floor)
        .map_err(|eigenvalue| Error::SingularGammaCovariance { eigenvalue, floor })?;
    let gamma0 = inv_sqrt.dot(gamma_hat);
    let chisq = gamma0.dot(&gamma0);
    let df = match df_mode {
        ChisqDfMode::DimGamma => k - r,
        ChisqDfMode::FullK => k,
    };
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    let pvalue = dist.sf(chisq).clamp(0.0, 1.0);
    Ok(Some(NetworkEffect { gamma0, chisq, df, pvalue }))
}

/// Chi-squared test for the presence of a network-only effect.
pub fn network_effect_test(fit: &FitResult) -> Result<(f64, usize, f64)> {
    if fit.k == fit.r_used {
        return Err(Error::NoNetworkComponent);
    }
    match compute_network_effect(
        &fit.gamma_hat,
        &fit.sigma_gamma_unit,
        fit.sigma2_hat,
        fit.k,
        fit.r_used,
        fit.chisq_df_mode,
    )? {
        Some(ne) => Ok((ne.chisq, ne.df, ne.pvalue)),
        None => Err(Error::NoNetworkComponent),
    }
}

fn normal_inference(estimate: f64, se_unit: f64, sigma2: f64, level: f64) -> Result<Inference> {
    if se_unit < 1e-12 {
        return Err(Error::DegenerateDirection { se_unit });
    }
    let std_error = sigma2.sqrt() * se_unit;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (z, pvalue) = if std_error > 0.0 {
        let z = estimate / std_error;
        (z, (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0))
    } else if estimate.abs() < 1e-10 {
        // Noiseless fit: no sampling variability and a null-consistent
        // estimate — report an uninformative test.
        (0.0, 1.0)
    } else {
        (f64::INFINITY * estimate.signum(), 0.0)
    };
    let crit = normal.inverse_cdf(1.0 - level / 2.0);
    Ok(Inference {
        estimate,
        std_error,
        ci_lo: estimate - crit * std_error,
        ci_hi: estimate + crit * std_error,
        z,
        pvalue,
    })
}

/// Normal inference for a unit-norm linear contrast of beta.
pub fn contrast_inference(
    fit: &FitResult,
    omega: &ArrayView1<f64>,
    level: f64,
) -> Result<Inference> {
    if omega.len() != fit.beta_hat.len() {
        return Err(Error::DimensionMismatch {
            detail: format!("omega has length {} but p = {}", omega.len(), fit.beta_hat.len()),
        });
    }
    if (linalg::norm2(omega) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidConfig { detail: "omega must have unit norm".into() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig { detail: "level must lie in (0,1)".into() });
    }
    let estimate = omega.dot(&fit.beta_hat);
    let se_unit = omega.dot(&fit.cov_beta_unit.dot(omega)).max(0.0).sqrt();
    normal_inference(estimate, se_unit, fit.sigma2_hat, level)
}

/// Coefficient test: contrast inference at omega = e_j (0-based j).
pub fn coefficient_test(fit: &FitResult, j: usize) -> Result<Inference> {
    let p = fit.beta_hat.len();
    if j >= p {
        return Err(Error::DimensionMismatch { detail: format!("index {j} out of range for p = {p}") });
    }
    let mut e = Array1::zeros(p);
    e[j] = 1.0;
    contrast_inference(fit, &e.view(), fit.alpha_level)
}

/// Normal inference for theta_j based on the P_R covariance.
pub fn theta_inference(fit: &FitResult, j: usize) -> Result<Inference> {
    let p = fit.theta_hat.len();
    if j >= p {
        return Err(Error::DimensionMismatch { detail: format!("index {j} out of range for p = {p}") });
    }
    let estimate = fit.theta_hat[j];
    let se_unit = fit.cov_theta_unit[(j, j)].max(0.0).sqrt();
    normal_inference(estimate, se_unit, fit.sigma2_hat, fit.alpha_level)
}

/// Plain least squares of Y on X, packaged as a FitResult with theta, alpha
/// and the network pieces zeroed out.
pub fn fit_ols_result(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    config: &FitConfig,
) -> Result<FitResult> {
    let (n, p) = x.dim();
    if n <= p {
        return Err(Error::DegreesOfFreedomExhausted { df: n as i64 - p as i64 });
    }
    let z = spectral::orthonormal_basis(x)?; // rank check
    let xtx = x.t().dot(x);
    let gx = linalg::solve_spd(&xtx.view(), &x.t())?;
    let beta_hat = gx.dot(&y.to_owned());
    let fitted_values = x.dot(&beta_hat);
    let resid = &y.to_owned() - &fitted_values;
    let sigma2_hat = resid.dot(&resid) / (n - p) as f64;
    let cov_beta_unit = gx.dot(&gx.t());
    let cov_beta = cov_beta_unit.mapv(|v| v * sigma2_hat);
    // H = Z Z^T is the OLS hat matrix; all mass sits in the column block.
    let h = z.matrix().dot(&z.matrix().t());
    let hh = h.dot(&h);
    let diagnostics = ProjectionDiagnostics {
        h_asym: linalg::max_abs(&(&h - &h.t()).view()),
        h_idem: linalg::max_abs(&(&hh - &h).view()),
        trace_err: (h.diag().sum() - p as f64).abs(),
        pr_cross: 0.0,
    };
    Ok(FitResult {
        theta_hat: Array1::zeros(p),
        beta_hat,
        alpha_hat: Array1::zeros(n),
        fitted_values,
        sigma2_hat,
        cov_theta: Array2::zeros((p, p)),
        cov_beta,
        cov_theta_unit: Array2::zeros((p, p)),
        cov_beta_unit,
        gamma_hat: Array1::zeros(0),
        sigma_gamma_unit: Array2::zeros((0, 0)),
        network_effect: None,
        r_used: 0,
        k: config.k,
        sigma_hat_values: Vec::new(),
        rank_report: None,
        alpha_level: config.alpha_level,
        chisq_df_mode: config.chisq_df_mode,
        fallback: true,
        projection_diagnostics: diagnostics,
        degree_floor_applied: false,
    })
}

/// Fit, test the network effect, and fall back to OLS when the test does not
/// reject at `config.alpha_level`. The spectral fit's test outcome is kept on
/// the fallback result so reports can show why it triggered.
pub fn model_guard_fit(
    x: &ArrayView2<f64>,
    y: &ArrayView1<f64>,
    p_hat: &NetworkEstimate,
    config: &FitConfig,
) -> Result<FitResult> {
    let spectral_fit = fit(x, y, p_hat, config)?;
    let (_, _, pvalue) = network_effect_test(&spectral_fit)?;
    if pvalue > config.alpha_level {
        let mut ols = fit_ols_result(x, y, config)?;
        ols.network_effect = spectral_fit.network_effect.clone();
        ols.r_used = spectral_fit.r_used;
        ols.sigma_hat_values = spectral_fit.sigma_hat_values.clone();
        Ok(ols)
    } else {
        Ok(spectral_fit)
    }
}
