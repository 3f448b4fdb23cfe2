//! Concrete matrix Lie groups: multiplication, inversion, exponential and
//! seeded sampling. Only the groups the scenarios instantiate are provided;
//! each gets a closed-form exponential (they are all rotations or unipotent),
//! so no general matrix exponential is needed.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::rng::{self, Rng};
use crate::scalar::{real, Scalar};

type GroupOp<T> = Arc<dyn Fn(&DMatrix<T>, &DMatrix<T>) -> DMatrix<T> + Send + Sync>;
type GroupInv<T> = Arc<dyn Fn(&DMatrix<T>) -> DMatrix<T> + Send + Sync>;
type GroupExp<T> = Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;
type GroupSampler<T> = Arc<dyn Fn(&mut Rng) -> DMatrix<T> + Send + Sync>;

/// A matrix Lie group presented by its operations and a basis of its algebra.
#[derive(Clone)]
pub struct LieGroupModel<T: Scalar> {
    pub name: String,
    pub group_dim: usize,
    pub matrix_size: usize,
    pub algebra_basis: Vec<DMatrix<T>>,
    multiply: GroupOp<T>,
    invert: GroupInv<T>,
    identity: DMatrix<T>,
    exp: GroupExp<T>,
    sample: GroupSampler<T>,
}

impl<T: Scalar> std::fmt::Debug for LieGroupModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LieGroupModel")
            .field("name", &self.name)
            .field("group_dim", &self.group_dim)
            .field("matrix_size", &self.matrix_size)
            .finish()
    }
}

impl<T: Scalar> LieGroupModel<T> {
    pub fn multiply(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
        (self.multiply)(a, b)
    }

    pub fn invert(&self, a: &DMatrix<T>) -> DMatrix<T> {
        (self.invert)(a)
    }

    pub fn identity(&self) -> DMatrix<T> {
        self.identity.clone()
    }

    /// Exponential of the algebra element with the given coordinates in
    /// `algebra_basis`.
    pub fn exp(&self, coords: &DVector<T>) -> DMatrix<T> {
        assert_eq!(coords.len(), self.group_dim, "algebra coordinate count");
        (self.exp)(coords)
    }

    pub fn sample(&self, rng: &mut Rng) -> DMatrix<T> {
        (self.sample)(rng)
    }

    /// The algebra element with the given coordinates.
    pub fn algebra_element(&self, coords: &DVector<T>) -> DMatrix<T> {
        let mut a = DMatrix::zeros(self.matrix_size, self.matrix_size);
        for (c, basis) in coords.iter().zip(&self.algebra_basis) {
            a += basis * *c;
        }
        a
    }
}

/// 2x2 rotation by `angle`.
pub fn rot2<T: Scalar>(angle: T) -> DMatrix<T> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// 2x2 reflection across the line at `angle/2` (determinant -1).
pub fn reflect2<T: Scalar>(angle: T) -> DMatrix<T> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
}

/// Rotation about the z-axis. The third row and column are exact.
pub fn rot_z<T: Scalar>(angle: T) -> DMatrix<T> {
    let (s, c) = angle.sin_cos();
    let z = T::zero();
    let o = T::one();
    DMatrix::from_row_slice(3, 3, &[c, -s, z, s, c, z, z, z, o])
}

/// Rodrigues rotation about a unit axis.
pub fn rot_axis<T: Scalar>(axis: &DVector<T>, angle: T) -> DMatrix<T> {
    assert_eq!(axis.len(), 3);
    let n = axis.norm();
    assert!(n > T::default_epsilon(), "axis must be nonzero");
    let u = axis / n;
    let k = hat3(&u);
    let (s, c) = angle.sin_cos();
    DMatrix::identity(3, 3) + &k * s + &k * &k * (T::one() - c)
}

/// so(3) hat map of a 3-vector.
pub fn hat3<T: Scalar>(w: &DVector<T>) -> DMatrix<T> {
    let z = T::zero();
    DMatrix::from_row_slice(3, 3, &[z, -w[2], w[1], w[2], z, -w[0], -w[1], w[0], z])
}

fn matmul<T: Scalar>() -> GroupOp<T> {
    Arc::new(|a: &DMatrix<T>, b: &DMatrix<T>| a * b)
}

fn transpose_inverse<T: Scalar>() -> GroupInv<T> {
    Arc::new(|a: &DMatrix<T>| a.transpose())
}

/// SO(2): rotations of the plane.
pub fn so2<T: Scalar>() -> LieGroupModel<T> {
    let j = DMatrix::from_row_slice(2, 2, &[T::zero(), -T::one(), T::one(), T::zero()]);
    LieGroupModel {
        name: "SO(2)".into(),
        group_dim: 1,
        matrix_size: 2,
        algebra_basis: vec![j],
        multiply: matmul(),
        invert: transpose_inverse(),
        identity: DMatrix::identity(2, 2),
        exp: Arc::new(|c: &DVector<T>| rot2(c[0])),
        sample: Arc::new(|rng: &mut Rng| rot2(rng::uniform::<T>(rng, 0.0, std::f64::consts::TAU))),
    }
}

/// O(2): rotations and reflections of the plane. The algebra is so(2).
pub fn o2<T: Scalar>() -> LieGroupModel<T> {
    let mut g = so2::<T>();
    g.name = "O(2)".into();
    g.sample = Arc::new(|rng: &mut Rng| {
        let angle = rng::uniform::<T>(rng, 0.0, std::f64::consts::TAU);
        if rng::uniform::<f64>(rng, 0.0, 1.0) < 0.5 {
            rot2(angle)
        } else {
            reflect2(angle)
        }
    });
    g
}

/// SO(3): rotations of 3-space, with the standard algebra basis.
pub fn so3<T: Scalar>() -> LieGroupModel<T> {
    let e = |i: usize| {
        let mut v = DVector::zeros(3);
        v[i] = T::one();
        v
    };
    let basis = vec![hat3(&e(0)), hat3(&e(1)), hat3(&e(2))];
    LieGroupModel {
        name: "SO(3)".into(),
        group_dim: 3,
        matrix_size: 3,
        algebra_basis: basis,
        multiply: matmul(),
        invert: transpose_inverse(),
        identity: DMatrix::identity(3, 3),
        exp: Arc::new(|c: &DVector<T>| {
            let angle = c.norm();
            if angle <= T::default_epsilon() {
                // First-order fallback at the origin of the algebra.
                DMatrix::identity(3, 3) + hat3(c)
            } else {
                rot_axis(c, angle)
            }
        }),
        sample: Arc::new(|rng: &mut Rng| {
            let axis = rng::nonzero_vector::<T>(rng, 3, 1e-3);
            let angle = rng::uniform::<T>(rng, 0.0, std::f64::consts::TAU);
            rot_axis(&axis, angle)
        }),
    }
}

/// The closed subgroup of SO(3) preserving the z-axis up to sign:
/// z-rotations together with their composites with rotation by pi about e1.
/// Its identity component is the circle of z-rotations, so the algebra is
/// spanned by the z generator alone.
pub fn axis_flip_group<T: Scalar>() -> LieGroupModel<T> {
    let ez = DVector::from_vec(vec![T::zero(), T::zero(), T::one()]);
    LieGroupModel {
        name: "G(z-axis)".into(),
        group_dim: 1,
        matrix_size: 3,
        algebra_basis: vec![hat3(&ez)],
        multiply: matmul(),
        invert: transpose_inverse(),
        identity: DMatrix::identity(3, 3),
        exp: Arc::new(|c: &DVector<T>| rot_z(c[0])),
        sample: Arc::new(|rng: &mut Rng| {
            let r = rot_z(rng::uniform::<T>(rng, 0.0, std::f64::consts::TAU));
            if rng::uniform::<f64>(rng, 0.0, 1.0) < 0.5 {
                r
            } else {
                let flip = DMatrix::from_diagonal(&DVector::from_vec(vec![
                    T::one(),
                    -T::one(),
                    -T::one(),
                ]));
                r * flip
            }
        }),
    }
}

/// The additive line (R,+) as unipotent 2x2 matrices [[1, t], [0, 1]].
/// `line_parameter` reads the parameter back off a group element.
pub fn line_group<T: Scalar>() -> LieGroupModel<T> {
    let z = T::zero();
    let o = T::one();
    let n = DMatrix::from_row_slice(2, 2, &[z, o, z, z]);
    LieGroupModel {
        name: "(R,+)".into(),
        group_dim: 1,
        matrix_size: 2,
        algebra_basis: vec![n],
        multiply: matmul(),
        invert: Arc::new(|a: &DMatrix<T>| {
            let mut inv = a.clone();
            inv[(0, 1)] = -a[(0, 1)];
            inv
        }),
        identity: DMatrix::identity(2, 2),
        exp: Arc::new(move |c: &DVector<T>| {
            let z = T::zero();
            let o = T::one();
            DMatrix::from_row_slice(2, 2, &[o, c[0], z, o])
        }),
        sample: Arc::new(|rng: &mut Rng| {
            let t = rng::uniform::<T>(rng, -10.0, 10.0);
            let z = T::zero();
            let o = T::one();
            DMatrix::from_row_slice(2, 2, &[o, t, z, o])
        }),
    }
}

/// Group parameter of a `line_group` element.
pub fn line_parameter<T: Scalar>(g: &DMatrix<T>) -> T {
    g[(0, 1)]
}

/// Build a `line_group` element from its parameter.
pub fn line_element<T: Scalar>(theta: T) -> DMatrix<T> {
    let z = T::zero();
    let o = T::one();
    DMatrix::from_row_slice(2, 2, &[o, theta, z, o])
}

/// Embedding O(2) -> SO(3), A |-> diag(A, det A). The determinant of an
/// orthogonal input is exactly plus or minus one, so only its sign is used.
pub fn embed_o2_block<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let mut m = DMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(a);
    m[(2, 2)] = if det >= T::zero() { T::one() } else { -T::one() };
    m
}

/// Truncated power series for the matrix exponential; test oracle only.
pub fn exp_series_oracle<T: Scalar>(a: &DMatrix<T>, terms: usize) -> DMatrix<T> {
    let n = a.nrows();
    let mut acc = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    for k in 1..=terms {
        term = &term * a / real::<T>(k as f64);
        acc += &term;
    }
    acc
}
