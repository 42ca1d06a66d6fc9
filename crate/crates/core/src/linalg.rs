//! Dense linear-algebra helpers shared across the crate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eigh, SVD, UPLO};

use crate::error::{Error, Result};

/// Which end of the spectrum to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenDirection {
    Largest,
    Smallest,
}

/// Eigenpairs of a symmetric matrix at one end of the spectrum.
///
/// `values` and the columns of `vectors` are ordered by eigenvalue:
/// descending for `Largest`, ascending for `Smallest`. `next_value` is the
/// first eigenvalue beyond the requested block (used for gap diagnostics),
/// absent when k = n.
pub struct PartialEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub next_value: Option<f64>,
}

/// Subset eigendecomposition of a symmetric matrix via LAPACK dsyevr.
///
/// Computes the `k` eigenpairs at the requested end of the spectrum plus one
/// extra eigenvalue for the gap report. Much cheaper than a full
/// decomposition when k << n.
pub fn partial_eigh(s: &ArrayView2<f64>, k: usize, direction: EigenDirection) -> Result<PartialEigen> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch { detail: format!("eigendecomposition needs a square matrix, got {}x{}", n, s.ncols()) });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig { detail: format!("requested {k} eigenvectors of a {n}x{n} matrix") });
    }
    let m_req = (k + 1).min(n);
    // dsyevr returns eigenvalues ascending within the selected index range.
    let (il, iu) = match direction {
        EigenDirection::Largest => ((n - m_req + 1) as i32, n as i32),
        EigenDirection::Smallest => (1, m_req as i32),
    };
    let mut a = s.t().as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * m_req];
    let mut isuppz = vec![0i32; 2 * m_req];
    let mut m_found = 0i32;
    let mut info = 0i32;
    let mut work = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::dsyevr(
            b'V', b'I', b'L', n as i32, &mut a, n as i32, 0.0, 0.0, il, iu, 0.0, &mut m_found,
            &mut w, &mut z, n as i32, &mut isuppz, &mut work, -1, &mut iwork, -1, &mut info,
        );
        let lwork = work[0] as i32;
        let liwork = iwork[0];
        work = vec![0.0; lwork as usize];
        iwork = vec![0i32; liwork as usize];
        lapack::dsyevr(
            b'V', b'I', b'L', n as i32, &mut a, n as i32, 0.0, 0.0, il, iu, 0.0, &mut m_found,
            &mut w, &mut z, n as i32, &mut isuppz, &mut work, lwork, &mut iwork, liwork, &mut info,
        );
    }
    if info != 0 || (m_found as usize) < m_req {
        return Err(Error::InvalidConfig { detail: format!("dsyevr failed: info = {info}, found {m_found} of {m_req} eigenpairs") });
    }
    // Map the ascending LAPACK order onto the requested ordering.
    let order: Vec<usize> = match direction {
        EigenDirection::Largest => (0..m_req).rev().collect(),
        EigenDirection::Smallest => (0..m_req).collect(),
    };
    let values: Vec<f64> = order.iter().take(k).map(|&j| w[j]).collect();
    let next_value = if m_req > k { Some(w[order[k]]) } else { None };
    let vectors = Array2::from_shape_fn((n, k), |(i, j)| z[order[j] * n + i]);
    Ok(PartialEigen { values, vectors, next_value })
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn full_eigh(s: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    s.to_owned()
        .eigh(UPLO::Lower)
        .map_err(|e| Error::InvalidConfig { detail: format!("eigendecomposition failed: {e}") })
}

/// Flip column signs so the first entry with magnitude above `1e-12 * max|col|`
/// is nonnegative. Zero columns stay untouched.
pub fn fix_column_signs(m: &mut Array2<f64>) {
    let n = m.nrows();
    for j in 0..m.ncols() {
        let col_max = (0..n).fold(0.0f64, |acc, i| acc.max(m[(i, j)].abs()));
        if col_max == 0.0 {
            continue;
        }
        let tol = 1e-12 * col_max;
        for i in 0..n {
            let v = m[(i, j)];
            if v.abs() > tol {
                if v < 0.0 {
                    for r in 0..n {
                        m[(r, j)] = -m[(r, j)];
                    }
                }
                break;
            }
        }
    }
}

/// Spectral norm of a rectangular matrix (largest singular value).
pub fn spectral_norm(m: &ArrayView2<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (_, s, _) = m.to_owned().svd(false, false).expect("svd of finite matrix");
    s.iter().cloned().fold(0.0, f64::max)
}

/// Max absolute entry.
pub fn max_abs(m: &ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Infinity norm (max absolute row sum); upper bound on the spectral norm
/// for symmetric matrices.
pub fn inf_norm(m: &ArrayView2<f64>) -> f64 {
    let mut best = 0.0f64;
    for row in m.rows() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Symmetric inverse square root via eigendecomposition.
///
/// Eigenvalues below `floor` abort with the offending value so the caller can
/// raise a domain error.
pub fn inv_sqrt_sym(m: &ArrayView2<f64>, floor: f64) -> std::result::Result<Array2<f64>, f64> {
    let (vals, vecs) = full_eigh(m).map_err(|_| f64::NAN)?;
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        if v < floor {
            return Err(v);
        }
        let s = 1.0 / v.sqrt();
        scaled.column_mut(j).mapv_inplace(|x| x * s);
    }
    Ok(scaled.dot(&vecs.t()))
}

/// Solve the SPD system `a x = b` for each column of `b` via Cholesky.
pub fn solve_spd(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    use ndarray_linalg::cholesky::{CholeskyFactorized, FactorizeC, SolveC};
    let f: CholeskyFactorized<_> = a
        .to_owned()
        .factorizec(UPLO::Lower)
        .map_err(|_| Error::SingularSystem)?;
    let mut out = Array2::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let x = f.solvec(&col.to_owned()).map_err(|_| Error::SingularSystem)?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

/// Euclidean norm of a vector view.
pub fn norm2(v: &ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
