//! Selection of the intersection dimension r: the theoretical threshold rule
//! and the network bootstrap.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, EigenDirection};
use crate::network::{self, AdjacencyMatrix, NetworkEstimate, ProbabilityMatrix};
use crate::rng;
use crate::spectral::{self, OrthonormalBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Threshold,
    Bootstrap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSelectionReport {
    pub r_hat: usize,
    /// Observed singular values of Z^T W-hat, descending.
    pub sigma_hat: Vec<f64>,
    /// The cutoff the rule compared against.
    pub threshold: f64,
    pub method: RankMethod,
    /// Bootstrap max deviation delta (bootstrap only).
    pub delta: Option<f64>,
    /// Bootstrap replicate count (bootstrap only).
    pub replicates: Option<usize>,
    /// Set when the threshold fell to 0 and every singular value qualified.
    pub unreliable: bool,
}

/// Threshold rule: r-hat = max{ i : sigma_i >= 1 - 4 sqrt(pK ln n) / d-hat },
/// with the cutoff floored at 0.
pub fn select_r_threshold(
    sigma_hat: &[f64],
    d_hat: f64,
    p: usize,
    k: usize,
    n: usize,
) -> RankSelectionReport {
    let raw = 1.0 - 4.0 * ((p * k) as f64 * (n as f64).ln()).sqrt() / d_hat;
    let threshold = raw.max(0.0);
    let r_hat = sigma_hat.iter().filter(|&&s| s >= threshold).count().min(p.min(k));
    RankSelectionReport {
        r_hat,
        sigma_hat: sigma_hat.to_vec(),
        threshold,
        method: RankMethod::Threshold,
        delta: None,
        replicates: None,
        unreliable: raw <= 0.0,
    }
}

/// Singular value thresholding estimate of P: rank-K eigen-truncation of A,
/// clamped to [0,1] and rescaled so its average degree matches the target.
/// Clamping and rescaling are applied twice so the degree match survives the
/// final clamp.
pub fn svt_estimate(
    a: &AdjacencyMatrix,
    k: usize,
    target_avg_degree: f64,
) -> Result<ProbabilityMatrix> {
    let n = a.n();
    let k = k.min(n);
    let eig = linalg::partial_eigh(&a.matrix().view(), k, EigenDirection::Largest)?;
    let mut scaled = eig.vectors.clone();
    for (j, &v) in eig.values.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|x| x * v);
    }
    let mut p_star: Array2<f64> = scaled.dot(&eig.vectors.t());
    // exact symmetry despite roundoff
    p_star = (&p_star + &p_star.t()) * 0.5;
    for _pass in 0..2 {
        p_star.mapv_inplace(|v| v.clamp(0.0, 1.0));
        let avg = off_diagonal_average(&p_star);
        if avg > 0.0 && target_avg_degree > 0.0 {
            let s = target_avg_degree / avg;
            p_star.mapv_inplace(|v| v * s);
        }
    }
    p_star.mapv_inplace(|v| v.clamp(0.0, 1.0));
    ProbabilityMatrix::new(p_star)
}

fn off_diagonal_average(m: &Array2<f64>) -> f64 {
    (m.sum() - m.diag().sum()) / m.nrows() as f64
}

/// Bootstrap rule: sample `replicates` networks from the SVT estimate, track
/// how far the observed singular values move, and keep every direction whose
/// singular value clears 1 - (max deviation). Strict `>` comparison.
pub fn select_r_bootstrap(
    a: &AdjacencyMatrix,
    z: &OrthonormalBasis,
    k: usize,
    replicates: usize,
    seed: u64,
    direction: EigenDirection,
) -> Result<RankSelectionReport> {
    let p = z.k();
    let sigma_hat = observed_sigma(a, z, k, direction)?;
    let d_hat = network::average_degree(a);
    let p_star = svt_estimate(a, k, d_hat)?;
    let mut delta = 0.0f64;
    for b in 0..replicates {
        let mut stream = rng::stream(seed, &[rng::tag::BOOTSTRAP, b as u64]);
        let a_b = network::sample_inhomogeneous_er(&p_star, &mut stream);
        let sigma_b = observed_sigma(&a_b, z, k, direction)?;
        for (s_b, s) in sigma_b.iter().zip(&sigma_hat) {
            delta = delta.max((s_b - s).abs());
        }
    }
    let threshold = 1.0 - delta;
    let r_hat = sigma_hat.iter().filter(|&&s| s > threshold).count().min(p.min(k));
    Ok(RankSelectionReport {
        r_hat,
        sigma_hat,
        threshold,
        method: RankMethod::Bootstrap,
        delta: Some(delta),
        replicates: Some(replicates),
        unreliable: false,
    })
}

/// Singular values of Z^T W-hat where W-hat follows the active eigenvalue
/// direction (adjacency: largest of A; Laplacian: smallest of D - A).
fn observed_sigma(
    a: &AdjacencyMatrix,
    z: &OrthonormalBasis,
    k: usize,
    direction: EigenDirection,
) -> Result<Vec<f64>> {
    let estimate = match direction {
        EigenDirection::Largest => NetworkEstimate::adjacency(a.clone()),
        EigenDirection::Smallest => network::laplacian(a),
    };
    let w_hat = estimate.leading_eigenvectors(k)?;
    let svd = spectral::alignment_svd(z, &w_hat.basis)?;
    Ok(svd.sigma_hat)
}
