//! Subspace machinery: orthonormal bases, the alignment SVD between the
//! covariate and network subspaces, and the three projection operators built
//! from it.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{QR, SVD};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenDirection};

/// Matrix with orthonormal columns spanning some subspace of R^n.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    matrix: Array2<f64>,
}

impl OrthonormalBasis {
    /// Wrap a matrix that is already orthonormal (checked to 1e-10).
    pub fn from_orthonormal(matrix: Array2<f64>) -> Result<Self> {
        let g = matrix.t().dot(&matrix);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g[(i, j)] - expect).abs() > 1e-10 {
                    return Err(Error::InvalidConfig {
                        detail: format!("columns not orthonormal: gram[{i},{j}] = {}", g[(i, j)]),
                    });
                }
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

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Orthonormal basis of col(X) via QR, with a deterministic sign convention:
/// the first nonzero entry of each column is nonnegative.
pub fn orthonormal_basis(x: &ArrayView2<f64>) -> Result<OrthonormalBasis> {
    let (n, p) = x.dim();
    if n < p {
        return Err(Error::DimensionMismatch { detail: format!("need n >= p, got {n} x {p}") });
    }
    let (q, r) = x
        .to_owned()
        .qr()
        .map_err(|e| Error::InvalidConfig { detail: format!("QR failed: {e}") })?;
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let smallest = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-10 * largest) {
        return Err(Error::RankDeficient { smallest, largest });
    }
    let mut q = q.slice(s![.., ..p]).to_owned();
    linalg::fix_column_signs(&mut q);
    Ok(OrthonormalBasis { matrix: q })
}

/// Leading (or trailing) eigenvectors of a symmetric matrix.
pub struct EigvectorSet {
    pub basis: OrthonormalBasis,
    pub eigenvalues: Vec<f64>,
    /// Set when |lambda_K - lambda_{K+1}| < 1e-8 * ||S||: the K-dimensional
    /// eigenspace is ill-defined. Non-fatal.
    pub gap_warning: Option<f64>,
}

/// K eigenvectors of a symmetric matrix ordered by eigenvalue (descending for
/// `Largest`, ascending for `Smallest`), with the same sign convention as
/// `orthonormal_basis`.
pub fn leading_eigvectors(
    sym: &ArrayView2<f64>,
    k: usize,
    direction: EigenDirection,
) -> Result<EigvectorSet> {
    let n = sym.nrows();
    let sym_tol = 1e-10 * linalg::max_abs(sym).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (sym[(i, j)] - sym[(j, i)]).abs() > sym_tol {
                return Err(Error::DimensionMismatch {
                    detail: format!("matrix not symmetric at ({i},{j})"),
                });
            }
        }
    }
    let eig = linalg::partial_eigh(sym, k, direction)?;
    let mut vectors = eig.vectors;
    linalg::fix_column_signs(&mut vectors);
    let norm = linalg::inf_norm(sym);
    let gap_warning = eig.next_value.and_then(|next| {
        let gap = (eig.values[k - 1] - next).abs();
        (gap < 1e-8 * norm).then_some(gap)
    });
    Ok(EigvectorSet {
        basis: OrthonormalBasis { matrix: vectors },
        eigenvalues: eig.values,
        gap_warning,
    })
}

/// The SVD of Z^T W_hat together with the rotated bases it induces.
///
/// Zhat = Z U, Wbreve = W_hat V; Zhat^T Wbreve is diagonal with the singular
/// values (cosines of the principal angles) on the diagonal.
#[derive(Clone, Debug)]
pub struct AlignmentSvd {
    pub u_hat: Array2<f64>,
    pub sigma_hat: Vec<f64>,
    pub v_hat: Array2<f64>,
    pub z_hat: Array2<f64>,
    pub w_breve: Array2<f64>,
}

impl AlignmentSvd {
    pub fn n(&self) -> usize {
        self.z_hat.nrows()
    }
    pub fn p(&self) -> usize {
        self.z_hat.ncols()
    }
    pub fn k(&self) -> usize {
        self.w_breve.ncols()
    }
}

/// Align two orthonormal bases by the SVD of Z^T W_hat.
///
/// Singular values are clamped to [0, 1] (floating point can exceed 1 by
/// ~1e-15). Column signs of Zhat are fixed by the usual convention with the
/// paired Wbreve column flipped alongside so the diagonal stays nonnegative.
pub fn alignment_svd(z: &OrthonormalBasis, w_hat: &OrthonormalBasis) -> Result<AlignmentSvd> {
    if z.n() != w_hat.n() {
        return Err(Error::DimensionMismatch {
            detail: format!("row dimensions differ: {} vs {}", z.n(), w_hat.n()),
        });
    }
    let p = z.k();
    let k = w_hat.k();
    let g = z.matrix().t().dot(w_hat.matrix());
    let (u, sig, vt) = g
        .svd(true, true)
        .map_err(|e| Error::InvalidConfig { detail: format!("SVD failed: {e}") })?;
    let mut u = u.expect("full U requested");
    let vt = vt.expect("full Vt requested");
    let mut v = vt.t().to_owned();
    let sigma_hat: Vec<f64> = sig.iter().map(|&s| s.clamp(0.0, 1.0)).collect();

    let mut z_hat = z.matrix().dot(&u);
    let mut w_breve = w_hat.matrix().dot(&v);
    // Deterministic signs: fix Zhat columns; mirror the flip onto the paired
    // Wbreve column (and U/V) so Zhat^T Wbreve keeps nonnegative diagonal.
    let n = z_hat.nrows();
    for j in 0..p {
        let col_max = (0..n).fold(0.0f64, |acc, i| acc.max(z_hat[(i, j)].abs()));
        if col_max == 0.0 {
            continue;
        }
        let tol = 1e-12 * col_max;
        let mut flip = false;
        for i in 0..n {
            let val = z_hat[(i, j)];
            if val.abs() > tol {
                flip = val < 0.0;
                break;
            }
        }
        if flip {
            z_hat.column_mut(j).mapv_inplace(|x| -x);
            u.column_mut(j).mapv_inplace(|x| -x);
            if j < k {
                w_breve.column_mut(j).mapv_inplace(|x| -x);
                v.column_mut(j).mapv_inplace(|x| -x);
            }
        }
    }
    // Wbreve columns beyond the paired range get the sign rule directly.
    for j in p.min(k)..k {
        let col = w_breve.column(j);
        let col_max = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if col_max == 0.0 {
            continue;
        }
        let tol = 1e-12 * col_max;
        let flip = col.iter().find(|v| v.abs() > tol).map(|v| *v < 0.0).unwrap_or(false);
        if flip {
            w_breve.column_mut(j).mapv_inplace(|x| -x);
            v.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok(AlignmentSvd { u_hat: u, sigma_hat, v_hat: v, z_hat, w_breve })
}

/// The three projection operators of the decomposition, plus their sum H.
#[derive(Clone, Debug)]
pub struct ProjectionSet {
    pub p_r: Array2<f64>,
    pub p_c: Array2<f64>,
    pub p_n: Array2<f64>,
    pub h: Array2<f64>,
    pub r: usize,
    pub k: usize,
    pub p: usize,
    pub sigma_hat: Vec<f64>,
}

/// Structural diagnostics of a ProjectionSet.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionDiagnostics {
    pub h_asym: f64,
    pub h_idem: f64,
    pub trace_err: f64,
    pub pr_cross: f64,
}

impl ProjectionSet {
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    /// Max-entry deviations from the structural identities: H symmetric,
    /// H idempotent, trace(H) = p + K - r, P_R (P_C + P_N) = 0.
    pub fn diagnostics(&self) -> ProjectionDiagnostics {
        let h_asym = linalg::max_abs(&(&self.h - &self.h.t()).view());
        let hh = self.h.dot(&self.h);
        let h_idem = linalg::max_abs(&(&hh - &self.h).view());
        let trace: f64 = self.h.diag().sum();
        let trace_err = (trace - (self.p + self.k - self.r) as f64).abs();
        let cn = &self.p_c + &self.p_n;
        let pr_cross = linalg::max_abs(&self.p_r.dot(&cn).view());
        ProjectionDiagnostics { h_asym, h_idem, trace_err, pr_cross }
    }

    /// True when the diagnostics meet the standard tolerances
    /// (1e-8 for identities, 1e-6 for the trace).
    pub fn is_structurally_sound(&self) -> bool {
        let d = self.diagnostics();
        d.h_asym <= 1e-8 && d.h_idem <= 1e-8 && d.trace_err <= 1e-6 && d.pr_cross <= 1e-8
    }
}

/// Build P_R, P_C, P_N from the aligned bases at intersection dimension r.
///
/// P_R projects onto the first r aligned directions; P_C and P_N are the
/// oblique projections onto the covariate-only and network-only subspaces,
/// built from the pseudoinverse of M = (Zhat_{r+1..p}, Wbreve_{r+1..K}).
pub fn build_projections(svd: &AlignmentSvd, r: usize) -> Result<ProjectionSet> {
    let n = svd.n();
    let p = svd.p();
    let k = svd.k();
    let min_pk = p.min(k);
    if r > min_pk {
        return Err(Error::InvalidConfig { detail: format!("r = {r} exceeds min(p, K) = {min_pk}") });
    }
    if r < min_pk {
        let next = svd.sigma_hat[r];
        if next > 1.0 - 1e-8 {
            return Err(Error::DegenerateAngle { r, sigma: next });
        }
    }
    let z_rest = svd.z_hat.slice(s![.., r..]);
    let w_rest = svd.w_breve.slice(s![.., r..]);
    let m1 = p - r;
    let m2 = k - r;

    let p_r = if r > 0 {
        let z_head = svd.z_hat.slice(s![.., ..r]);
        z_head.dot(&z_head.t())
    } else {
        Array2::zeros((n, n))
    };

    let (p_c, p_n) = if m1 + m2 == 0 {
        (Array2::zeros((n, n)), Array2::zeros((n, n)))
    } else {
        let mut m = Array2::zeros((n, m1 + m2));
        m.slice_mut(s![.., ..m1]).assign(&z_rest);
        m.slice_mut(s![.., m1..]).assign(&w_rest);
        let gram = m.t().dot(&m);
        // (M^T M)^{-1} M^T, computed columnwise against M^T.
        let pinv = linalg::solve_spd(&gram.view(), &m.t().view())
            .map_err(|_| Error::DegenerateAngle { r, sigma: *svd.sigma_hat.get(r).unwrap_or(&1.0) })?;
        let p_c = if m1 > 0 { z_rest.dot(&pinv.slice(s![..m1, ..])) } else { Array2::zeros((n, n)) };
        let p_n = if m2 > 0 { w_rest.dot(&pinv.slice(s![m1.., ..])) } else { Array2::zeros((n, n)) };
        (p_c, p_n)
    };

    let h = &p_r + &p_c + &p_n;
    Ok(ProjectionSet { p_r, p_c, p_n, h, r, k, p, sigma_hat: svd.sigma_hat.clone() })
}

/// Closed-form oblique projections from the singular value pattern
/// (test oracle for `build_projections`).
///
/// Expects r unit singular values, s strictly interior ones, and zeros after
/// index r + s.
pub fn closed_form_projections(
    svd: &AlignmentSvd,
    r: usize,
    s_count: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = svd.n();
    let p = svd.p();
    let k = svd.k();
    let min_pk = p.min(k);
    if r + s_count > min_pk {
        return Err(Error::InvalidConfig {
            detail: format!("r + s = {} exceeds min(p, K) = {min_pk}", r + s_count),
        });
    }
    let pattern_tol = 1e-6;
    for (i, &sig) in svd.sigma_hat.iter().enumerate() {
        let ok = if i < r {
            sig >= 1.0 - pattern_tol
        } else if i < r + s_count {
            sig > pattern_tol && sig < 1.0 - pattern_tol
        } else {
            sig <= pattern_tol
        };
        if !ok {
            return Err(Error::BadPartition { r, s: s_count, index: i, sigma: sig });
        }
    }
    let mut p_c: Array2<f64> = Array2::zeros((n, n));
    let mut p_n: Array2<f64> = Array2::zeros((n, n));
    for i in r..r + s_count {
        let sig = svd.sigma_hat[i];
        let denom = 1.0 - sig * sig;
        let zi = svd.z_hat.column(i).insert_axis(Axis(1));
        let wi = svd.w_breve.column(i).insert_axis(Axis(1));
        p_c = p_c + &zi.dot(&zi.t()) / denom - &zi.dot(&wi.t()) * (sig / denom);
        p_n = p_n + &wi.dot(&wi.t()) / denom - &wi.dot(&zi.t()) * (sig / denom);
    }
    for i in r + s_count..p {
        let zi = svd.z_hat.column(i).insert_axis(Axis(1));
        p_c = p_c + zi.dot(&zi.t());
    }
    for i in r + s_count..k {
        let wi = svd.w_breve.column(i).insert_axis(Axis(1));
        p_n = p_n + wi.dot(&wi.t());
    }
    Ok((p_c, p_n))
}

/// Spectral norm of (What What^T - W W^T) Z: the perturbation of the network
/// subspace seen from the covariate subspace. Simulation diagnostic.
pub fn subspace_perturbation(
    z: &OrthonormalBasis,
    w: &OrthonormalBasis,
    w_hat: &OrthonormalBasis,
) -> f64 {
    // (What What^T - W W^T) Z as n x p, avoiding any n x n product.
    let a = w_hat.matrix().dot(&w_hat.matrix().t().dot(z.matrix()));
    let b = w.matrix().dot(&w.matrix().t().dot(z.matrix()));
    linalg::spectral_norm(&(&a - &b).view())
}

/// Perturbation of the projection of a single fixed vector:
/// ||(What What^T - W W^T) v||.
pub fn projection_perturbation(w: &OrthonormalBasis, w_hat: &OrthonormalBasis, v: &Array1<f64>) -> f64 {
    let a = w_hat.matrix().dot(&w_hat.matrix().t().dot(v));
    let b = w.matrix().dot(&w.matrix().t().dot(v));
    linalg::norm2(&(&a - &b).view())
}
