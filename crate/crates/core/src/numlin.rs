//! Tolerance-aware dense linear algebra: numerical subspaces, quotient spaces
//! represented by orthonormal complements, and linear maps induced on
//! quotients. Everything downstream (longitudinal spaces, effects, transversal
//! maps) is built on these primitives.
//!
//! A quotient T/L is always realized concretely as the orthogonal complement
//! of L, so induced maps have canonical matrices and subspaces can be compared
//! through principal angles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{approx_f64, Scalar};
use crate::tol::ToleranceProfile;

/// Singular values (descending) and left singular vectors of `a`, by
/// one-sided Jacobi orthogonalization of the columns.
///
/// The matrices in this crate are tiny but frequently rank-deficient with
/// repeated singular values, a regime where the bidiagonalization SVD can
/// lose several digits; Jacobi stays at machine precision there.
pub fn jacobi_svd<T: Scalar>(a: &DMatrix<T>) -> (DMatrix<T>, Vec<T>) {
    let n = a.ncols();
    let mut u = a.clone();
    if n == 0 || a.nrows() == 0 {
        return (u, vec![T::zero(); n]);
    }
    let eps = T::default_epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let up = u.column(p).into_owned();
                let uq = u.column(q).into_owned();
                let alpha = up.dot(&up);
                let beta = uq.dot(&uq);
                let gamma = up.dot(&uq);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / ((T::one() + T::one()) * gamma);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let new_p = &up * c - &uq * s;
                let new_q = &up * s + &uq * c;
                u.set_column(p, &new_p);
                u.set_column(q, &new_q);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = (0..n).map(|j| u.column(j).norm()).collect();
    order.sort_by(|i, j| norms[*j].partial_cmp(&norms[*i]).unwrap());
    let mut sigma = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    for &j in &order {
        let nj = norms[j];
        sigma.push(nj);
        if nj > T::zero() {
            cols.push(u.column(j).into_owned() / nj);
        } else {
            cols.push(DVector::zeros(a.nrows()));
        }
    }
    (DMatrix::from_columns(&cols), sigma)
}

/// A numerical subspace of R^n, stored as a column-orthonormal basis.
/// The rank may be zero, in which case the basis is an n-by-0 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<T: Scalar> {
    pub ambient_dim: usize,
    pub basis: DMatrix<T>,
}

impl<T: Scalar> Subspace<T> {
    pub fn zero(ambient_dim: usize) -> Self {
        Self { ambient_dim, basis: DMatrix::zeros(ambient_dim, 0) }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self { ambient_dim, basis: DMatrix::identity(ambient_dim, ambient_dim) }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<T>) -> DVector<T> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &DVector<T>) -> T {
        (v - self.project(v)).norm()
    }

    /// Whether `v` lies in the subspace within `tol`.
    pub fn contains(&self, v: &DVector<T>, tol: T) -> bool {
        self.residual(v) <= tol
    }

    /// Basis-orthonormality defect, `|| B^T B - I ||`.
    pub fn orthonormality_defect(&self) -> T {
        let r = self.dim();
        let gram = self.basis.transpose() * &self.basis;
        (gram - DMatrix::<T>::identity(r, r)).norm()
    }
}

/// Number of singular values of `a` above the relative threshold
/// `rank_rel_tol * max(nrows, ncols) * sigma_max`.
pub fn numeric_rank<T: Scalar>(a: &DMatrix<T>, tol: &ToleranceProfile<T>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let (_, sigma) = jacobi_svd(a);
    let smax = sigma[0];
    if smax <= T::zero() {
        return 0;
    }
    let dim = T::from_usize(a.nrows().max(a.ncols())).unwrap();
    let thr = tol.rank_rel_tol * dim * smax;
    sigma.iter().filter(|s| **s > thr).count()
}

/// Orthonormal basis of the numerical column span of `vectors`.
///
/// The ambient dimension must be given explicitly so the empty family yields
/// the zero subspace of the right space.
pub fn orthonormalize<T: Scalar>(
    ambient_dim: usize,
    vectors: &[DVector<T>],
    tol: &ToleranceProfile<T>,
) -> Result<Subspace<T>> {
    if ambient_dim == 0 {
        return Err(Error::Dimension("ambient dimension must be >= 1".into()));
    }
    for v in vectors {
        if v.len() != ambient_dim {
            return Err(Error::Dimension(format!(
                "vector of length {} in ambient dimension {}",
                v.len(),
                ambient_dim
            )));
        }
    }
    if vectors.is_empty() {
        return Ok(Subspace::zero(ambient_dim));
    }
    let a = DMatrix::from_columns(vectors);
    let (u, sigma) = jacobi_svd(&a);
    let smax = sigma[0];
    if smax <= T::zero() {
        return Ok(Subspace::zero(ambient_dim));
    }
    let dim = T::from_usize(ambient_dim.max(vectors.len())).unwrap();
    let thr = tol.rank_rel_tol * dim * smax;
    let cols: Vec<DVector<T>> = sigma
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > thr)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(Subspace::zero(ambient_dim));
    }
    Ok(Subspace { ambient_dim, basis: DMatrix::from_columns(&cols) })
}

/// Orthonormal basis of the orthogonal complement of `sub`.
///
/// Computed from the SVD of `I - B B^T`, whose singular values are exactly
/// 0 and 1, so the split is unambiguous without a tolerance.
pub fn orthogonal_complement<T: Scalar>(sub: &Subspace<T>) -> DMatrix<T> {
    let n = sub.ambient_dim;
    let m = sub.dim();
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    if m >= n {
        return DMatrix::zeros(n, 0);
    }
    let proj = DMatrix::<T>::identity(n, n) - &sub.basis * sub.basis.transpose();
    let (u, sigma) = jacobi_svd(&proj);
    // Projector singular values are exactly 0 or 1; split at one half.
    let half = T::from_f64(0.5).unwrap();
    let cols: Vec<DVector<T>> = sigma
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > half)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    debug_assert_eq!(cols.len(), n - m, "complement projector has defective rank");
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Orthonormal basis of the numerical null space of `a` (right kernel),
/// obtained as the orthogonal complement of the row space.
pub fn kernel<T: Scalar>(a: &DMatrix<T>, tol: &ToleranceProfile<T>) -> Result<Subspace<T>> {
    let n = a.ncols();
    let rows: Vec<DVector<T>> = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
    let row_space = orthonormalize(n, &rows, tol)?;
    let basis = orthogonal_complement(&row_space);
    Ok(Subspace { ambient_dim: n, basis })
}

/// Largest principal angle between two subspaces of the same ambient space,
/// computed through the sine (the projection residual), which stays accurate
/// for nearly equal subspaces. Subspaces of different dimension are never
/// equal; the angle returned for them is pi/2.
pub fn max_principal_angle<T: Scalar>(a: &Subspace<T>, b: &Subspace<T>) -> T {
    assert_eq!(a.ambient_dim, b.ambient_dim, "ambient dimensions differ");
    if a.dim() != b.dim() {
        return T::frac_pi_2();
    }
    if a.dim() == 0 {
        return T::zero();
    }
    let residual = &b.basis - &a.basis * (a.basis.transpose() * &b.basis);
    let (_, sigma) = jacobi_svd(&residual);
    let smax = sigma[0];
    smax.min(T::one()).max(-T::one()).asin()
}

/// The quotient of R^n by a longitudinal subspace, realized by an orthonormal
/// basis of the orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientSpace<T: Scalar> {
    pub ambient_dim: usize,
    pub longitudinal: Subspace<T>,
    pub complement: DMatrix<T>,
}

impl<T: Scalar> QuotientSpace<T> {
    pub fn from_longitudinal(longitudinal: Subspace<T>) -> Self {
        let complement = orthogonal_complement(&longitudinal);
        Self { ambient_dim: longitudinal.ambient_dim, longitudinal, complement }
    }

    pub fn dim(&self) -> usize {
        self.complement.ncols()
    }

    /// Coordinates of the class of `v` in the complement basis.
    pub fn project_class(&self, v: &DVector<T>) -> DVector<T> {
        self.complement.transpose() * v
    }
}

/// A linear map between two quotient spaces, expressed in the complement bases.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientLinearMap<T: Scalar> {
    pub source: QuotientSpace<T>,
    pub target: QuotientSpace<T>,
    pub matrix: DMatrix<T>,
}

impl<T: Scalar> QuotientLinearMap<T> {
    pub fn identity(space: &QuotientSpace<T>) -> Self {
        Self {
            source: space.clone(),
            target: space.clone(),
            matrix: DMatrix::identity(space.dim(), space.dim()),
        }
    }

    /// Frobenius distance from the identity; only square maps can be compared.
    pub fn deviation_from_identity(&self) -> T {
        let (r, c) = self.matrix.shape();
        if r != c {
            return T::max_value().unwrap_or_else(T::one);
        }
        (&self.matrix - DMatrix::<T>::identity(r, r)).norm()
    }

    /// Compose `self` after `earlier` (matrix product on class coordinates).
    pub fn compose(&self, earlier: &Self) -> Result<Self> {
        if earlier.target.dim() != self.source.dim() {
            return Err(Error::Dimension("quotient map composition shape mismatch".into()));
        }
        Ok(Self {
            source: earlier.source.clone(),
            target: self.target.clone(),
            matrix: &self.matrix * &earlier.matrix,
        })
    }

    pub fn min_singular_value(&self) -> T {
        if self.matrix.nrows() == 0 || self.matrix.ncols() == 0 {
            return T::zero();
        }
        *jacobi_svd(&self.matrix).1.last().unwrap()
    }

    pub fn max_singular_value(&self) -> T {
        if self.matrix.nrows() == 0 || self.matrix.ncols() == 0 {
            return T::zero();
        }
        jacobi_svd(&self.matrix).1[0]
    }

    /// Condition number, infinite (f64::INFINITY converted) when singular.
    pub fn condition_number(&self) -> T {
        let smin = self.min_singular_value();
        if smin <= T::zero() {
            T::max_value().unwrap_or_else(T::one)
        } else {
            self.max_singular_value() / smin
        }
    }

    pub fn try_inverse(&self) -> Option<Self> {
        if self.matrix.nrows() != self.matrix.ncols() {
            return None;
        }
        self.matrix.clone().try_inverse().map(|inv| Self {
            source: self.target.clone(),
            target: self.source.clone(),
            matrix: inv,
        })
    }
}

/// The linear map induced by `a` on the quotients, i.e. `C_dst^T * a * C_src`.
///
/// Defined only when `a` carries the source longitudinal into the target
/// longitudinal; otherwise the residual is reported in the error.
pub fn induced_quotient_map<T: Scalar>(
    a: &DMatrix<T>,
    src: &QuotientSpace<T>,
    dst: &QuotientSpace<T>,
    tol: &ToleranceProfile<T>,
) -> Result<QuotientLinearMap<T>> {
    if a.ncols() != src.ambient_dim || a.nrows() != dst.ambient_dim {
        return Err(Error::Dimension(format!(
            "map is {}x{}, expected {}x{}",
            a.nrows(),
            a.ncols(),
            dst.ambient_dim,
            src.ambient_dim
        )));
    }
    let mut residual = T::zero();
    for j in 0..src.longitudinal.dim() {
        let image = a * src.longitudinal.basis.column(j).into_owned();
        let leak = (dst.complement.transpose() * &image).norm();
        residual = residual.max(leak);
    }
    if residual > tol.map_abs_tol {
        return Err(Error::NotWellDefined { residual: approx_f64(residual) });
    }
    let matrix = dst.complement.transpose() * a * &src.complement;
    Ok(QuotientLinearMap { source: src.clone(), target: dst.clone(), matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn tol() -> ToleranceProfile<f64> {
        ToleranceProfile::default()
    }

    fn vec3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    /// Classical Gram-Schmidt, used as an independent oracle.
    fn gram_schmidt_oracle(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            let mut u = v.clone();
            for b in &basis {
                let coeff = b.dot(&u);
                u -= b * coeff;
            }
            if u.norm() > 1e-12 {
                let n = u.norm();
                basis.push(u / n);
            }
        }
        basis
    }

    #[test]
    fn collinear_input_spans_one_dimension() {
        let s = orthonormalize(3, &[vec3(1.0, 0.0, 0.0), vec3(2.0, 0.0, 0.0)], &tol()).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.contains(&vec3(1.0, 0.0, 0.0), 1e-12));
        assert!(!s.contains(&vec3(0.0, 1.0, 0.0), 1e-12));
    }

    #[test]
    fn empty_family_spans_zero() {
        let s = orthonormalize(3, &[], &tol()).unwrap();
        assert_eq!(s.dim(), 0);
        assert_eq!(s.ambient_dim, 3);
    }

    #[test]
    fn plane_span_matches_gram_schmidt_oracle() {
        let inputs = [vec3(1.0, 1.0, 0.0), vec3(1.0, -1.0, 0.0)];
        let s = orthonormalize(3, &inputs, &tol()).unwrap();
        assert_eq!(s.dim(), 2);
        for v in &inputs {
            assert!(s.residual(v) < 1e-12, "input projects back into span");
        }
        let oracle = gram_schmidt_oracle(&inputs);
        assert_eq!(oracle.len(), 2);
        let oracle_sub = Subspace { ambient_dim: 3, basis: DMatrix::from_columns(&oracle) };
        assert!(max_principal_angle(&s, &oracle_sub) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let bad = orthonormalize(3, &[DVector::from_vec(vec![1.0, 2.0])], &tol());
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&DMatrix::<f64>::zeros(3, 3), &tol()), 0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-20, 2.0]));
        assert_eq!(numeric_rank(&d, &tol()), 2);
    }

    #[test]
    fn rank_of_qr_orthonormal_columns() {
        // Orthonormal 5x3 frame constructed via a QR oracle.
        let mut rng = crate::rng::seeded(11);
        let a = DMatrix::<f64>::from_fn(5, 3, |_, _| crate::rng::standard_normal(&mut rng));
        let qr = a.qr();
        let q = qr.q();
        assert_eq!(numeric_rank(&q, &tol()), 3);
    }

    #[test]
    fn induced_identity_descends_to_identity() {
        let long = orthonormalize(3, &[vec3(0.0, 0.0, 1.0)], &tol()).unwrap();
        let q = QuotientSpace::from_longitudinal(long);
        let m = induced_quotient_map(&DMatrix::identity(3, 3), &q, &q, &tol()).unwrap();
        assert_eq!(m.matrix.shape(), (2, 2));
        assert!(m.deviation_from_identity() < 1e-14);
    }

    #[test]
    fn induced_reflection_on_e1_e3_plane() {
        // diag(1,-1,-1) preserves span{e2}; its class map on span{e1,e3} is diag(1,-1).
        let long = orthonormalize(3, &[vec3(0.0, 1.0, 0.0)], &tol()).unwrap();
        let q = QuotientSpace::from_longitudinal(long);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        let m = induced_quotient_map(&a, &q, &q, &tol()).unwrap();
        // Express expected map in the complement basis actually chosen.
        let c = &q.complement;
        let expected = c.transpose() * &a * c;
        assert!((&m.matrix - &expected).norm() < 1e-14);
        // The complement basis spans {e1, e3}; diag entries are +1 and -1.
        let mut eigs: Vec<f64> = m.matrix.symmetric_eigenvalues().iter().cloned().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eigs[0] + 1.0).abs() < 1e-12 && (eigs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_does_not_preserve_e1_axis() {
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let long = orthonormalize(3, &[vec3(1.0, 0.0, 0.0)], &tol()).unwrap();
        let q = QuotientSpace::from_longitudinal(long);
        match induced_quotient_map(&rot, &q, &q, &tol()) {
            Err(Error::NotWellDefined { residual }) => {
                // Residual computed by direct multiplication: || C^T R e1 || = |sin 0.3|.
                assert!((residual - 0.3f64.sin()).abs() < 1e-12);
            }
            other => panic!("expected not-well-defined error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_of_wide_matrix() {
        // Rows span a 2-dim row space in R^3; kernel is 1-dim.
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let k = kernel(&a, &tol()).unwrap();
        assert_eq!(k.dim(), 1);
        assert!(k.contains(&vec3(0.0, 0.0, 1.0), 1e-12));
    }

    #[test]
    fn complement_dimensions_add_up() {
        let long = orthonormalize(3, &[vec3(1.0, 2.0, 0.5)], &tol()).unwrap();
        let q = QuotientSpace::from_longitudinal(long);
        assert_eq!(q.dim(), 2);
        let defect = (q.complement.transpose() * &q.longitudinal.basis).norm();
        assert!(defect < 1e-12);
    }

    #[test]
    fn f32_lane_behaves() {
        let t = ToleranceProfile::<f32>::default();
        let v = [
            DVector::from_vec(vec![1.0f32, 1.0, 0.0]),
            DVector::from_vec(vec![1.0f32, -1.0, 0.0]),
        ];
        let s = orthonormalize(3, &v, &t).unwrap();
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn quotient_map_composition_requires_matching_dims() {
        let long2 = orthonormalize(2, &[DVector::from_vec(vec![1.0, 0.0])], &tol()).unwrap();
        let q1 = QuotientSpace::from_longitudinal(Subspace::zero(2));
        let q2 = QuotientSpace::from_longitudinal(long2);
        let a = QuotientLinearMap {
            source: q1.clone(),
            target: q1.clone(),
            matrix: DMatrix::identity(2, 2),
        };
        let b = QuotientLinearMap { source: q2.clone(), target: q2, matrix: DMatrix::identity(1, 1) };
        assert!(b.compose(&a).is_err(), "2-dim target cannot feed a 1-dim source");
    }
}
