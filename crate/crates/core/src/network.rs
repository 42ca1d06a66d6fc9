//! Network generation and estimation: inhomogeneous Erdős–Rényi sampling,
//! block-model probability matrices and their maximum-likelihood estimates,
//! and the Laplacian construction.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, EigenDirection};
use crate::spectral::{self, EigvectorSet};

/// Symmetric matrix of edge probabilities.
#[derive(Clone, Debug)]
pub struct ProbabilityMatrix {
    matrix: Array2<f64>,
    /// True when clamping to [0, 1] changed at least one entry.
    pub clamped: bool,
}

impl ProbabilityMatrix {
    /// Symmetrize-check and clamp entries into [0, 1].
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { detail: "probability matrix must be square".into() });
        }
        let tol = 1e-12 * linalg::max_abs(&matrix.view()).max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > tol {
                    return Err(Error::InvalidConfig {
                        detail: format!("probability matrix not symmetric at ({i},{j})"),
                    });
                }
            }
        }
        let mut clamped = false;
        let matrix = matrix.mapv(|v| {
            if !(0.0..=1.0).contains(&v) {
                clamped = true;
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        });
        Ok(Self { matrix, clamped })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Average expected degree (1/n) sum_{i != j} P_ij.
    pub fn average_degree(&self) -> f64 {
        let n = self.n();
        let total: f64 = self.matrix.sum();
        let diag: f64 = self.matrix.diag().sum();
        (total - diag) / n as f64
    }
}

/// Symmetric adjacency matrix with zero diagonal.
#[derive(Clone, Debug)]
pub struct AdjacencyMatrix {
    matrix: Array2<f64>,
}

impl AdjacencyMatrix {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { detail: "adjacency matrix must be square".into() });
        }
        for i in 0..n {
            for j in i..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig {
                        detail: format!("adjacency matrix not symmetric at ({i},{j})"),
                    });
                }
                if !(0.0..=1.0).contains(&matrix[(i, j)]) {
                    return Err(Error::InvalidConfig {
                        detail: format!("adjacency entry ({i},{j}) outside [0,1]"),
                    });
                }
            }
            if matrix[(i, i)] != 0.0 {
                return Err(Error::InvalidConfig { detail: format!("nonzero diagonal at {i}") });
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn degrees(&self) -> Array1<f64> {
        self.matrix.sum_axis(ndarray::Axis(1))
    }
}

/// Average degree d_hat = (1/n) sum_ij A_ij.
pub fn average_degree(a: &AdjacencyMatrix) -> f64 {
    a.matrix.sum() / a.n() as f64
}

/// Node-to-community labels, 0-based internally.
#[derive(Clone, Debug)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl CommunityAssignment {
    /// Build from 0-based labels; the number of communities is
    /// `max(label) + 1` and every community must be nonempty.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
        let mut counts = vec![0usize; k];
        for &g in &labels {
            counts[g] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCommunity { label: empty + 1 });
        }
        Ok(Self { labels, counts })
    }

    /// Balanced assignment of n nodes into k communities in label order.
    pub fn balanced(n: usize, k: usize) -> Self {
        let labels = (0..n).map(|i| i * k / n).collect();
        Self::new(labels).expect("balanced assignment is nonempty")
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_communities(&self) -> usize {
        self.counts.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// Where a network estimate came from; block-model sources carry their
/// fitted parameters.
#[derive(Clone, Debug)]
pub enum NetworkSource {
    Adjacency,
    Laplacian,
    Sbm { b_hat: Array2<f64>, communities: CommunityAssignment },
    Dcbm { b_hat: Array2<f64>, nu_hat: Array1<f64>, communities: CommunityAssignment },
}

/// The P-hat handed to the estimator: a symmetric matrix plus the convention
/// for which end of its spectrum carries the network subspace.
#[derive(Clone, Debug)]
pub struct NetworkEstimate {
    matrix: Array2<f64>,
    pub eigen_direction: EigenDirection,
    pub source: NetworkSource,
    /// Average degree of the adjacency matrix this estimate was built from.
    pub d_hat: f64,
    /// The source adjacency matrix, kept for rank selection.
    adjacency: Option<AdjacencyMatrix>,
    /// True when parametric estimation clamped entries into [0, 1]
    /// (disables the block-structured eigenvector shortcut).
    clamped: bool,
    /// True when a degree floor was applied to isolated nodes (DCBM).
    pub degree_floor_applied: bool,
}

impl NetworkEstimate {
    /// Use the raw adjacency matrix as P-hat (the model-free route).
    pub fn adjacency(a: AdjacencyMatrix) -> Self {
        let d_hat = average_degree(&a);
        NetworkEstimate {
            matrix: a.matrix().clone(),
            eigen_direction: EigenDirection::Largest,
            source: NetworkSource::Adjacency,
            d_hat,
            adjacency: Some(a),
            clamped: false,
            degree_floor_applied: false,
        }
    }

    /// Treat a known block-model probability matrix as the network estimate
    /// (the population oracle used by simulations).
    pub fn from_block_parameters(
        g: &CommunityAssignment,
        b: &ArrayView2<f64>,
        nu: Option<&Array1<f64>>,
    ) -> Result<Self> {
        let prob = match nu {
            Some(nu) => dcbm_probability(g, b, nu)?,
            None => sbm_probability(g, b)?,
        };
        let d_hat = prob.average_degree();
        let source = match nu {
            Some(nu) => NetworkSource::Dcbm {
                b_hat: b.to_owned(),
                nu_hat: nu.clone(),
                communities: g.clone(),
            },
            None => NetworkSource::Sbm { b_hat: b.to_owned(), communities: g.clone() },
        };
        Ok(NetworkEstimate {
            matrix: prob.matrix().clone(),
            eigen_direction: EigenDirection::Largest,
            source,
            d_hat,
            adjacency: None,
            clamped: prob.clamped,
            degree_floor_applied: false,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjacency_matrix(&self) -> Option<&AdjacencyMatrix> {
        self.adjacency.as_ref()
    }

    /// K eigenvectors in this estimate's direction.
    ///
    /// Block-model estimates with intact block structure are handled through
    /// the community-reduced eigenproblem; everything else goes through the
    /// dense solver.
    pub fn leading_eigenvectors(&self, k: usize) -> Result<EigvectorSet> {
        if !self.clamped {
            match &self.source {
                NetworkSource::Sbm { b_hat, communities } => {
                    if let Some(set) = block_eigvectors(b_hat, None, communities, k)? {
                        return Ok(set);
                    }
                }
                NetworkSource::Dcbm { b_hat, nu_hat, communities } => {
                    if let Some(set) = block_eigvectors(b_hat, Some(nu_hat), communities, k)? {
                        return Ok(set);
                    }
                }
                _ => {}
            }
        }
        spectral::leading_eigvectors(&self.matrix.view(), k, self.eigen_direction)
    }
}

/// Eigenvectors of a block-structured matrix P_ij = nu_i nu_j B_{g_i g_j}
/// via the reduced K_comm x K_comm problem. Returns None when the top-k
/// algebraic eigenvalues are not all strictly positive (the null space would
/// participate, so the caller must fall back to the dense path).
fn block_eigvectors(
    b: &Array2<f64>,
    nu: Option<&Array1<f64>>,
    g: &CommunityAssignment,
    k: usize,
) -> Result<Option<EigvectorSet>> {
    let kc = g.n_communities();
    if k > kc {
        return Ok(None);
    }
    let n = g.n();
    // Community masses m_c = sum_{g_i = c} nu_i^2 (nu = 1 for the SBM).
    let mut mass = vec![0.0f64; kc];
    for (i, &c) in g.labels().iter().enumerate() {
        let w = nu.map(|v| v[i] * v[i]).unwrap_or(1.0);
        mass[c] += w;
    }
    if mass.iter().any(|&m| m <= 0.0) {
        return Ok(None);
    }
    let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let reduced = Array2::from_shape_fn((kc, kc), |(a, c)| b[(a, c)] * sqrt_mass[a] * sqrt_mass[c]);
    let (vals, vecs) = linalg::full_eigh(&reduced.view())?; // ascending
    // Top-k by algebraic value; require them above the zero bulk.
    let tol = 1e-10 * vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let top: Vec<usize> = (0..kc).rev().take(k).collect();
    if top.iter().any(|&j| vals[j] <= tol) {
        return Ok(None);
    }
    // Eigenvalue k+1 of the full matrix: next reduced eigenvalue or 0.
    let next_value = if k < kc { vals[kc - 1 - k].max(0.0) } else if kc < n { 0.0 } else { f64::NAN };
    let mut vectors = Array2::zeros((n, k));
    for (col, &j) in top.iter().enumerate() {
        for (i, &c) in g.labels().iter().enumerate() {
            let nu_i = nu.map(|v| v[i]).unwrap_or(1.0);
            vectors[(i, col)] = nu_i * vecs[(c, j)] / sqrt_mass[c];
        }
    }
    linalg::fix_column_signs(&mut vectors);
    let eigenvalues: Vec<f64> = top.iter().map(|&j| vals[j]).collect();
    let norm = linalg::max_abs(&reduced.view());
    let gap_warning = if next_value.is_nan() {
        None
    } else {
        let gap = (eigenvalues[k - 1] - next_value).abs();
        (gap < 1e-8 * norm).then_some(gap)
    };
    let basis = spectral::OrthonormalBasis::from_orthonormal(vectors)?;
    Ok(Some(EigvectorSet { basis, eigenvalues, gap_warning }))
}

/// Sample an undirected network with independent edges A_ij ~ Bernoulli(P_ij)
/// for i < j. Zero diagonal; reproducible for a fixed RNG stream.
///
/// Uses geometric skipping per run of equal probabilities, so sparse
/// matrices cost O(#edges) rather than O(n^2) draws.
pub fn sample_inhomogeneous_er(p: &ProbabilityMatrix, rng: &mut ChaCha8Rng) -> AdjacencyMatrix {
    let n = p.n();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let row = p.matrix.row(i);
        let mut j = i + 1;
        while j < n {
            let prob = row[j];
            // extend the run of identical probabilities
            let mut run_end = j + 1;
            while run_end < n && row[run_end] == prob {
                run_end += 1;
            }
            if prob <= 0.0 {
                j = run_end;
                continue;
            }
            if prob >= 1.0 {
                for t in j..run_end {
                    a[(i, t)] = 1.0;
                    a[(t, i)] = 1.0;
                }
                j = run_end;
                continue;
            }
            // geometric skips within [j, run_end)
            let log1p = (1.0 - prob).ln();
            let mut t = j;
            loop {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let skip = (u.ln() / log1p).floor() as usize;
                t += skip;
                if t >= run_end {
                    break;
                }
                a[(i, t)] = 1.0;
                a[(t, i)] = 1.0;
                t += 1;
                if t >= run_end {
                    break;
                }
            }
            j = run_end;
        }
    }
    AdjacencyMatrix { matrix: a }
}

/// SBM probability matrix: P_ij = B_{g_i g_j}.
pub fn sbm_probability(g: &CommunityAssignment, b: &ArrayView2<f64>) -> Result<ProbabilityMatrix> {
    let kc = g.n_communities();
    if b.nrows() != kc || b.ncols() != kc {
        return Err(Error::DimensionMismatch {
            detail: format!("B is {}x{} but there are {kc} communities", b.nrows(), b.ncols()),
        });
    }
    let n = g.n();
    let labels = g.labels();
    let p = Array2::from_shape_fn((n, n), |(i, j)| b[(labels[i], labels[j])]);
    ProbabilityMatrix::new(p)
}

/// DCBM probability matrix: P_ij = nu_i nu_j B_{g_i g_j}, clamped to [0, 1].
pub fn dcbm_probability(
    g: &CommunityAssignment,
    b: &ArrayView2<f64>,
    nu: &Array1<f64>,
) -> Result<ProbabilityMatrix> {
    if nu.len() != g.n() {
        return Err(Error::DimensionMismatch { detail: "nu length differs from n".into() });
    }
    if nu.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidConfig { detail: "nu entries must be positive".into() });
    }
    let kc = g.n_communities();
    if b.nrows() != kc || b.ncols() != kc {
        return Err(Error::DimensionMismatch {
            detail: format!("B is {}x{} but there are {kc} communities", b.nrows(), b.ncols()),
        });
    }
    let labels = g.labels();
    let n = g.n();
    let p = Array2::from_shape_fn((n, n), |(i, j)| nu[i] * nu[j] * b[(labels[i], labels[j])]);
    ProbabilityMatrix::new(p)
}

/// SBM maximum likelihood fit: B_hat_{kl} = (sum of block edges) / (n_k n_l),
/// diagonal blocks included with the same divisor.
pub fn estimate_sbm(a: &AdjacencyMatrix, g: &CommunityAssignment) -> Result<NetworkEstimate> {
    if g.n() != a.n() {
        return Err(Error::DimensionMismatch { detail: "labels length differs from n".into() });
    }
    let kc = g.n_communities();
    let labels = g.labels();
    let counts = g.counts();
    let mut sums = Array2::<f64>::zeros((kc, kc));
    for i in 0..a.n() {
        for j in 0..a.n() {
            let v = a.matrix[(i, j)];
            if v != 0.0 {
                sums[(labels[i], labels[j])] += v;
            }
        }
    }
    let b_hat = Array2::from_shape_fn((kc, kc), |(k, l)| sums[(k, l)] / (counts[k] * counts[l]) as f64);
    let n = a.n();
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| b_hat[(labels[i], labels[j])]);
    Ok(NetworkEstimate {
        matrix,
        eigen_direction: EigenDirection::Largest,
        source: NetworkSource::Sbm { b_hat, communities: g.clone() },
        d_hat: average_degree(a),
        adjacency: Some(a.clone()),
        clamped: false,
        degree_floor_applied: false,
    })
}

/// DCBM fit: nu_hat_i = n_k d_i / (community degree), then
/// B_hat_{kl} = (1/(n_k n_l)) sum A_ij / (nu_hat_i nu_hat_j).
/// Isolated nodes get a 1e-8 degree floor so the division stays finite.
pub fn estimate_dcbm(a: &AdjacencyMatrix, g: &CommunityAssignment) -> Result<NetworkEstimate> {
    if g.n() != a.n() {
        return Err(Error::DimensionMismatch { detail: "labels length differs from n".into() });
    }
    let n = a.n();
    let kc = g.n_communities();
    let labels = g.labels();
    let counts = g.counts();
    let degrees = a.degrees();
    let mut comm_degree = vec![0.0f64; kc];
    for i in 0..n {
        comm_degree[labels[i]] += degrees[i];
    }
    if let Some(zero) = comm_degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegreeCommunity { label: zero + 1 });
    }
    let mut floor_applied = false;
    let nu_hat = Array1::from_shape_fn(n, |i| {
        let v = counts[labels[i]] as f64 * degrees[i] / comm_degree[labels[i]];
        if v < 1e-8 {
            floor_applied = true;
            1e-8
        } else {
            v
        }
    });
    let mut sums = Array2::<f64>::zeros((kc, kc));
    for i in 0..n {
        for j in 0..n {
            let v = a.matrix[(i, j)];
            if v != 0.0 {
                sums[(labels[i], labels[j])] += v / (nu_hat[i] * nu_hat[j]);
            }
        }
    }
    let b_hat = Array2::from_shape_fn((kc, kc), |(k, l)| sums[(k, l)] / (counts[k] * counts[l]) as f64);
    let mut clamped = false;
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
        let v = nu_hat[i] * nu_hat[j] * b_hat[(labels[i], labels[j])];
        if v > 1.0 {
            clamped = true;
            1.0
        } else {
            v
        }
    });
    Ok(NetworkEstimate {
        matrix,
        eigen_direction: EigenDirection::Largest,
        source: NetworkSource::Dcbm { b_hat, nu_hat, communities: g.clone() },
        d_hat: average_degree(a),
        adjacency: Some(a.clone()),
        clamped,
        degree_floor_applied: floor_applied,
    })
}

/// Laplacian of an existing (typically parametric) estimate:
/// L = diag(row sums) - P-hat, with the subspace at the smallest eigenvalues.
pub fn laplacian_of_estimate(est: &NetworkEstimate) -> NetworkEstimate {
    let n = est.n();
    let row_sums = est.matrix.sum_axis(ndarray::Axis(1));
    let mut matrix = -est.matrix.clone();
    for i in 0..n {
        matrix[(i, i)] += row_sums[i];
    }
    NetworkEstimate {
        matrix,
        eigen_direction: EigenDirection::Smallest,
        source: NetworkSource::Laplacian,
        d_hat: est.d_hat,
        adjacency: est.adjacency.clone(),
        clamped: false,
        degree_floor_applied: est.degree_floor_applied,
    }
}

/// Graph Laplacian L = D - A; the network subspace sits at the smallest
/// eigenvalues.
pub fn laplacian(a: &AdjacencyMatrix) -> NetworkEstimate {
    let n = a.n();
    let degrees = a.degrees();
    let mut matrix = -a.matrix().clone();
    for i in 0..n {
        matrix[(i, i)] = degrees[i];
    }
    NetworkEstimate {
        matrix,
        eigen_direction: EigenDirection::Smallest,
        source: NetworkSource::Laplacian,
        d_hat: average_degree(a),
        adjacency: Some(a.clone()),
        clamped: false,
        degree_floor_applied: false,
    }
}
