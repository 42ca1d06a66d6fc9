//! Oracles for the spectral core: algorithmic projections vs their closed
//! form, projector structure, and perturbation identities.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use netreg_core::linalg;
use netreg_core::rng;
use netreg_core::spectral::{self, OrthonormalBasis};

fn random_orthonormal(n: usize, k: usize, stream: &mut rand_chacha::ChaCha8Rng) -> Array2<f64> {
    let g = Array2::from_shape_fn((n, k), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, stream)
    });
    spectral::orthonormal_basis(&g.view()).expect("random matrix has full rank").matrix().clone()
}

/// Construct (Z, W) with a prescribed singular value pattern by rotating a
/// shared orthonormal frame: Z spans columns u_1..u_p, W spans
/// cos(angle_i) u_i + sin(angle_i) u_{p+i}.
fn planted_pair(
    n: usize,
    p: usize,
    k: usize,
    sigmas: &[f64],
    stream: &mut rand_chacha::ChaCha8Rng,
) -> (OrthonormalBasis, OrthonormalBasis) {
    assert!(n >= p + k);
    let frame = random_orthonormal(n, p + k, stream);
    let z = frame.slice(ndarray::s![.., ..p]).to_owned();
    let mut w = Array2::zeros((n, k));
    for i in 0..k {
        let sigma = sigmas[i.min(sigmas.len() - 1)];
        let (c, s) = (sigma, (1.0 - sigma * sigma).sqrt());
        if i < p {
            let col = frame.column(i).mapv(|v| v * c) + frame.column(p + i).mapv(|v| v * s);
            w.column_mut(i).assign(&col);
        } else {
            w.column_mut(i).assign(&frame.column(p + i));
        }
    }
    (
        OrthonormalBasis::from_orthonormal(z).expect("orthonormal"),
        OrthonormalBasis::from_orthonormal(w).expect("orthonormal"),
    )
}

#[test]
fn alignment_svd_recovers_planted_angles() {
    let mut stream = rng::stream(1, &[]);
    let (z, w) = planted_pair(40, 3, 4, &[1.0, 0.7, 0.3, 0.0], &mut stream);
    let svd = spectral::alignment_svd(&z, &w).expect("svd");
    let want = [1.0, 0.7, 0.3];
    for (got, want) in svd.sigma_hat.iter().zip(want) {
        assert!((got - want).abs() < 1e-10, "sigma {got} vs {want}");
    }
}

#[test]
fn projections_match_closed_form_on_random_instances() {
    let mut checked = 0;
    for trial in 0..200u64 {
        let mut stream = rng::stream(97, &[trial]);
        let geom = rand::Rng::gen_range(&mut stream, 0..4u32);
        let (p, k) = match geom {
            0 => (1, 1),
            1 => (3, 4),
            2 => (4, 3),
            _ => (5, 5),
        };
        let n = rand::Rng::gen_range(&mut stream, (p + k).max(8)..=64);
        let min_pk = p.min(k);
        // draw a sigma pattern with gaps >= 0.05 away from 0 and 1
        let r = rand::Rng::gen_range(&mut stream, 0..=min_pk);
        let s = rand::Rng::gen_range(&mut stream, 0..=(min_pk - r));
        let mut sigmas = Vec::new();
        for i in 0..k {
            if i < r {
                sigmas.push(1.0);
            } else if i < r + s {
                sigmas.push(rand::Rng::gen_range(&mut stream, 0.05..0.95));
            } else {
                sigmas.push(0.0);
            }
        }
        sigmas[..min_pk].sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let (z, w) = planted_pair(n, p, k, &sigmas, &mut stream);
        let svd = spectral::alignment_svd(&z, &w).expect("svd");
        let proj = spectral::build_projections(&svd, r).expect("projections");
        let (p_c, p_n) = spectral::closed_form_projections(&svd, r, s).expect("closed form");
        let dc = linalg::max_abs(&(&proj.p_c - &p_c).view());
        let dn = linalg::max_abs(&(&proj.p_n - &p_n).view());
        assert!(dc < 1e-10, "P_C deviates by {dc:.3e} (trial {trial}, r={r} s={s})");
        assert!(dn < 1e-10, "P_N deviates by {dn:.3e} (trial {trial}, r={r} s={s})");
        assert!(proj.is_structurally_sound(), "H structure broken at trial {trial}");
        checked += 1;
    }
    assert_eq!(checked, 200);
}

#[test]
fn h_reproduces_joint_span() {
    // H must act as the identity on col(X) + col(W).
    let mut stream = rng::stream(5, &[]);
    let (z, w) = planted_pair(30, 3, 3, &[1.0, 0.4, 0.2], &mut stream);
    let svd = spectral::alignment_svd(&z, &w).expect("svd");
    let proj = spectral::build_projections(&svd, 1).expect("projections");
    for source in [z.matrix(), w.matrix()] {
        let image = proj.h.dot(source);
        let diff = linalg::max_abs(&(&image - source).view());
        assert!(diff < 1e-9, "H is not the identity on the joint span: {diff:.3e}");
    }
    // trace(H) = p + K - r
    let trace: f64 = proj.h.diag().sum();
    assert!((trace - (3.0 + 3.0 - 1.0)).abs() < 1e-8);
}

#[test]
fn degenerate_angle_is_rejected() {
    let mut stream = rng::stream(9, &[]);
    let (z, w) = planted_pair(25, 2, 2, &[1.0, 1.0 - 1e-12], &mut stream);
    let svd = spectral::alignment_svd(&z, &w).expect("svd");
    let err = spectral::build_projections(&svd, 1).expect_err("sigma_2 ~ 1 must fail");
    assert_eq!(err.kind(), "degenerate_angle");
}

#[test]
fn bad_partition_is_rejected() {
    let mut stream = rng::stream(11, &[]);
    let (z, w) = planted_pair(25, 2, 2, &[1.0, 0.5], &mut stream);
    let svd = spectral::alignment_svd(&z, &w).expect("svd");
    // claiming r=0, s=0 puts sigma_1 = 1 in the zero block
    let err = spectral::closed_form_projections(&svd, 0, 0).expect_err("pattern mismatch");
    assert_eq!(err.kind(), "bad_partition");
}

#[test]
fn rank_deficient_design_is_rejected() {
    let mut x = Array2::zeros((10, 3));
    for i in 0..10 {
        x[(i, 0)] = 1.0 + i as f64;
        x[(i, 1)] = 2.0 * (1.0 + i as f64); // collinear
        x[(i, 2)] = (i as f64).sin();
    }
    let err = spectral::orthonormal_basis(&x.view()).expect_err("collinear design");
    assert_eq!(err.kind(), "rank_deficient");
}

#[test]
fn perturbation_vanishes_for_equal_subspaces() {
    let mut stream = rng::stream(13, &[]);
    let w = random_orthonormal(20, 3, &mut stream);
    let w1 = OrthonormalBasis::from_orthonormal(w.clone()).expect("orthonormal");
    let w2 = OrthonormalBasis::from_orthonormal(w).expect("orthonormal");
    let v = Array1::from_shape_fn(20, |i| (i as f64).cos());
    assert!(spectral::projection_perturbation(&w1, &w2, &v) < 1e-12);
}

#[test]
fn perturbation_is_basis_invariant() {
    // rotating the columns of W leaves W W^T, and hence the perturbation,
    // unchanged
    let mut stream = rng::stream(17, &[]);
    let w = random_orthonormal(24, 2, &mut stream);
    let theta: f64 = 0.83;
    let rot =
        ndarray::array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
    let w_rot = w.dot(&rot);
    let w_hat = random_orthonormal(24, 2, &mut stream);
    let v = Array1::from_shape_fn(24, |i| 1.0 / (1.0 + i as f64));
    let a = OrthonormalBasis::from_orthonormal(w).expect("orthonormal");
    let b = OrthonormalBasis::from_orthonormal(w_rot).expect("orthonormal");
    let h = OrthonormalBasis::from_orthonormal(w_hat).expect("orthonormal");
    let pa = spectral::projection_perturbation(&a, &h, &v);
    let pb = spectral::projection_perturbation(&b, &h, &v);
    assert!((pa - pb).abs() < 1e-10);
}
