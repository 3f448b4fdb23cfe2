//! Property tests for the linear-algebra substrate.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use groupoid_effect_core::numlin::{
    induced_quotient_map, jacobi_svd, max_principal_angle, numeric_rank, orthonormalize,
    QuotientSpace,
};
use groupoid_effect_core::tol::ToleranceProfile;

fn tol() -> ToleranceProfile<f64> {
    ToleranceProfile::default()
}

fn vec3_strategy() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3).prop_map(DVector::from_vec)
}

fn mat_strategy(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, r * c)
        .prop_map(move |v| DMatrix::from_vec(r, c, v))
}

/// Maps preserving a given longitudinal subspace, built blockwise in an
/// adapted orthonormal frame.
fn longitudinal_preserving(
    q: &QuotientSpace<f64>,
    block_c: &DMatrix<f64>,
    block_l: &DMatrix<f64>,
    block_mix: &DMatrix<f64>,
) -> DMatrix<f64> {
    let c = &q.complement;
    let l = &q.longitudinal.basis;
    c * block_c * c.transpose() + l * block_l * l.transpose() + l * block_mix * c.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn induced_map_is_functorial(
        long_dir in vec3_strategy(),
        bc1 in mat_strategy(2, 2),
        bl1 in mat_strategy(1, 1),
        bm1 in mat_strategy(1, 2),
        bc2 in mat_strategy(2, 2),
        bl2 in mat_strategy(1, 1),
        bm2 in mat_strategy(1, 2),
    ) {
        prop_assume!(long_dir.norm() > 0.1);
        let sub = orthonormalize(3, &[long_dir], &tol()).unwrap();
        let q = QuotientSpace::from_longitudinal(sub);
        prop_assume!(q.dim() == 2);
        let a = longitudinal_preserving(&q, &bc1, &bl1, &bm1);
        let b = longitudinal_preserving(&q, &bc2, &bl2, &bm2);
        let ma = induced_quotient_map(&a, &q, &q, &tol()).unwrap();
        let mb = induced_quotient_map(&b, &q, &q, &tol()).unwrap();
        let mab = induced_quotient_map(&(&a * &b), &q, &q, &tol()).unwrap();
        let residual = (&ma.matrix * &mb.matrix - &mab.matrix).norm();
        prop_assert!(residual < 1e-8, "functoriality residual {residual}");
    }

    #[test]
    fn orthonormalize_is_idempotent(
        v1 in vec3_strategy(),
        v2 in vec3_strategy(),
        v3 in vec3_strategy(),
    ) {
        let s = orthonormalize(3, &[v1, v2, v3], &tol()).unwrap();
        let columns: Vec<DVector<f64>> = (0..s.dim()).map(|j| s.basis.column(j).into_owned()).collect();
        let again = orthonormalize(3, &columns, &tol()).unwrap();
        prop_assert_eq!(again.dim(), s.dim());
        let angle = max_principal_angle(&s, &again);
        prop_assert!(angle < 1e-8, "subspace moved by {angle}");
    }

    #[test]
    fn rank_is_orthogonally_invariant(m in mat_strategy(3, 3), rot_vec in vec3_strategy()) {
        prop_assume!(rot_vec.norm() > 1e-3);
        let r = groupoid_effect_core::group::rot_axis(&rot_vec, rot_vec.norm());
        let rank = numeric_rank(&m, &tol());
        prop_assert_eq!(numeric_rank(&(&r * &m), &tol()), rank);
        prop_assert_eq!(numeric_rank(&(&m * &r), &tol()), rank);
    }

    #[test]
    fn jacobi_svd_factors_accurately(m in mat_strategy(3, 3)) {
        let (u, sigma) = jacobi_svd(&m);
        // Columns with nonzero sigma are orthonormal.
        for i in 0..3 {
            for j in i..3 {
                if sigma[i] > 1e-12 && sigma[j] > 1e-12 {
                    let dot = u.column(i).dot(&u.column(j));
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() < 1e-10);
                }
            }
        }
        // Largest sigma equals the spectral norm within tolerance.
        let spectral = (m.transpose() * &m).symmetric_eigenvalues().max().max(0.0).sqrt();
        prop_assert!((sigma[0] - spectral).abs() < 1e-8 * (1.0 + spectral));
    }
}

/// Regression: the rank-one projector onto a generic line must decompose with
/// singular values {1, 0, 0} to machine precision. The bidiagonalization SVD
/// shipped by the matrix library loses four digits on this input, which is
/// why rank decisions run on the Jacobi kernel.
#[test]
fn projector_svd_regression() {
    let x = DVector::from_vec(vec![
        -0.27212757319191394f64,
        -2.3341544377302865,
        0.1497295810214383,
    ]);
    let xh = &x / x.norm();
    let b = {
        let g1 = DVector::from_vec(vec![0.0, -x[2], x[1]]);
        let g2 = DVector::from_vec(vec![x[2], 0.0, -x[0]]);
        let g3 = DVector::from_vec(vec![-x[1], x[0], 0.0]);
        orthonormalize(3, &[g1, g2, g3], &tol()).unwrap()
    };
    let proj = DMatrix::<f64>::identity(3, 3) - &b.basis * b.basis.transpose();
    let (u, sigma) = jacobi_svd(&proj);
    assert!((sigma[0] - 1.0).abs() < 1e-12, "sigma_0 = {}", sigma[0]);
    assert!(sigma[1].abs() < 1e-12);
    assert!((u.column(0).dot(&xh).abs() - 1.0).abs() < 1e-12);
}
