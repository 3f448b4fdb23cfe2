//! The concrete groupoids every scenario draws from, wired with their
//! analytic stabilizer samplers, orbit oracles and connectors.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::action::{linear_action, rotation_fiber_action, SmoothFn};
use crate::error::Result;
use crate::group::{self, rot2, rot_axis, rot_z};
use crate::groupoid::{Arrow, BaseMapData, BasePoint, GroupoidModel, RotationKernel};
use crate::rng::{self};
use crate::scalar::{real, Scalar};
use crate::tol::ToleranceProfile;

fn norm2<T: Scalar>(v: &DVector<T>) -> T {
    v.norm()
}

/// Rotation in SO(3) carrying unit vector `a` to unit vector `b`.
fn rotation_between<T: Scalar>(a: &DVector<T>, b: &DVector<T>) -> DMatrix<T> {
    let eps = real::<T>(1e-12);
    let na = a.norm();
    let nb = b.norm();
    if na < eps || nb < eps {
        return DMatrix::identity(3, 3);
    }
    let u = a / na;
    let v = b / nb;
    let cross = DVector::from_vec(vec![
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]);
    let dot = u.dot(&v);
    if cross.norm() < eps {
        if dot > T::zero() {
            return DMatrix::identity(3, 3);
        }
        // Antipodal: rotate by pi about any axis orthogonal to u.
        let helper = if u[0].abs() < real(0.9) {
            DVector::from_vec(vec![T::one(), T::zero(), T::zero()])
        } else {
            DVector::from_vec(vec![T::zero(), T::one(), T::zero()])
        };
        let axis = DVector::from_vec(vec![
            u[1] * helper[2] - u[2] * helper[1],
            u[2] * helper[0] - u[0] * helper[2],
            u[0] * helper[1] - u[1] * helper[0],
        ]);
        return rot_axis(&axis, T::pi());
    }
    let angle = dot.min(T::one()).max(-T::one()).acos();
    rot_axis(&cross, angle)
}

/// SO(3) acting canonically on R^3 (the origin included).
pub fn so3_r3<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    so3_like(tol, false)
}

/// SO(3) acting on R^3 minus the origin.
pub fn so3_r3_punctured<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    so3_like(tol, true)
}

fn so3_like<T: Scalar>(tol: ToleranceProfile<T>, punctured: bool) -> GroupoidModel<T> {
    let name = if punctured { "SO(3)|R3-0" } else { "SO(3)|R3" };
    let iso_tol = tol.map_abs_tol;
    GroupoidModel::translation(name, group::so3::<T>(), linear_action(3), tol)
        .with_base_sampler(move |rng| {
            if punctured {
                BasePoint::Flat(rng::nonzero_vector(rng, 3, 0.2))
            } else {
                BasePoint::Flat(rng::normal_vector(rng, 3))
            }
        })
        .with_orbit_oracle(move |a, b| match (a.as_flat(), b.as_flat()) {
            (Ok(u), Ok(v)) => (norm2(u) - norm2(v)).abs() <= real(1e-7),
            _ => false,
        })
        .with_isotropy_sampler(move |rng, x| {
            let xv = x.as_flat().ok()?;
            if xv.norm() <= iso_tol {
                let g = group::so3::<T>();
                return Some(Arrow::Translation { g: g.sample(rng), x: xv.clone() });
            }
            let angle = rng::uniform::<T>(rng, 0.0, TAU);
            Some(Arrow::Translation { g: rot_axis(xv, angle), x: xv.clone() })
        })
        .with_connector(move |a, b| {
            let (u, v) = (a.as_flat().ok()?, b.as_flat().ok()?);
            if (norm2(u) - norm2(v)).abs() > real(1e-7) {
                return None;
            }
            Some(Arrow::Translation { g: rotation_between(u, v), x: u.clone() })
        })
}

/// SO(2) acting canonically on the punctured plane.
pub fn so2_r2_punctured<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    plane_groupoid(tol, false, true)
}

/// SO(2) acting canonically on the plane.
pub fn so2_r2<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    plane_groupoid(tol, false, false)
}

/// O(2) acting canonically on the plane.
pub fn o2_r2<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    plane_groupoid(tol, true, false)
}

/// O(2) acting canonically on the punctured plane.
pub fn o2_r2_punctured<T: Scalar>(tol: ToleranceProfile<T>) -> GroupoidModel<T> {
    plane_groupoid(tol, true, true)
}

fn plane_groupoid<T: Scalar>(
    tol: ToleranceProfile<T>,
    full_orthogonal: bool,
    punctured: bool,
) -> GroupoidModel<T> {
    let name = match (full_orthogonal, punctured) {
        (true, true) => "O(2)|R2-0",
        (true, false) => "O(2)|R2",
        (false, true) => "SO(2)|R2-0",
        (false, false) => "SO(2)|R2",
    };
    let grp = if full_orthogonal { group::o2::<T>() } else { group::so2::<T>() };
    let iso_tol = tol.map_abs_tol;
    GroupoidModel::translation(name, grp, linear_action(2), tol)
        .with_base_sampler(move |rng| {
            if punctured {
                BasePoint::Flat(rng::nonzero_vector(rng, 2, 0.2))
            } else {
                BasePoint::Flat(rng::normal_vector(rng, 2))
            }
        })
        .with_orbit_oracle(move |a, b| match (a.as_flat(), b.as_flat()) {
            (Ok(u), Ok(v)) => (norm2(u) - norm2(v)).abs() <= real(1e-7),
            _ => false,
        })
        .with_isotropy_sampler(move |rng, x| {
            let xv = x.as_flat().ok()?;
            if xv.norm() <= iso_tol {
                let g = if full_orthogonal { group::o2::<T>() } else { group::so2::<T>() };
                return Some(Arrow::Translation { g: g.sample(rng), x: xv.clone() });
            }
            if full_orthogonal && rng::uniform::<f64>(rng, 0.0, 1.0) < 0.5 {
                // Reflection across the line through x: 2 p p^T / |p|^2 - I.
                let n = xv.norm();
                let p = xv / n;
                let refl = &p * p.transpose() * real::<T>(2.0) - DMatrix::identity(2, 2);
                Some(Arrow::Translation { g: refl, x: xv.clone() })
            } else {
                Some(Arrow::Translation { g: DMatrix::identity(2, 2), x: xv.clone() })
            }
        })
        .with_connector(move |a, b| {
            let (u, v) = (a.as_flat().ok()?, b.as_flat().ok()?);
            if (norm2(u) - norm2(v)).abs() > real(1e-7) {
                return None;
            }
            if u.norm() < real(1e-12) {
                return Some(Arrow::Translation { g: DMatrix::identity(2, 2), x: u.clone() });
            }
            let angle = v[1].atan2(v[0]) - u[1].atan2(u[0]);
            Some(Arrow::Translation { g: rot2(angle), x: u.clone() })
        })
}

/// The subgroup of SO(3) preserving the z-axis up to sign, acting on R^3
/// (optionally punctured at the origin).
pub fn axis_flip_r3<T: Scalar>(tol: ToleranceProfile<T>, punctured: bool) -> GroupoidModel<T> {
    let name = if punctured { "G(z)|R3-0" } else { "G(z)|R3" };
    let iso_tol = tol.map_abs_tol;
    GroupoidModel::translation(name, group::axis_flip_group::<T>(), linear_action(3), tol)
        .with_base_sampler(move |rng| {
            if punctured {
                BasePoint::Flat(rng::nonzero_vector(rng, 3, 0.2))
            } else {
                BasePoint::Flat(rng::normal_vector(rng, 3))
            }
        })
        .with_orbit_oracle(move |a, b| match (a.as_flat(), b.as_flat()) {
            (Ok(u), Ok(v)) => {
                let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let rv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                (ru - rv).abs() <= real(1e-7) && (u[2].abs() - v[2].abs()).abs() <= real(1e-7)
            }
            _ => false,
        })
        .with_isotropy_sampler(move |rng, x| {
            let xv = x.as_flat().ok()?;
            let fiber = (xv[0] * xv[0] + xv[1] * xv[1]).sqrt();
            if xv.norm() <= iso_tol {
                let g = group::axis_flip_group::<T>();
                return Some(Arrow::Translation { g: g.sample(rng), x: xv.clone() });
            }
            if fiber <= iso_tol {
                // On the z-axis: stabilizer is the circle of z-rotations.
                let angle = rng::uniform::<T>(rng, 0.0, TAU);
                return Some(Arrow::Translation { g: rot_z(angle), x: xv.clone() });
            }
            if xv[2].abs() <= iso_tol && rng::uniform::<f64>(rng, 0.0, 1.0) < 0.5 {
                // In the z = 0 plane: rotation by pi about the point's axis
                // flips e3 and fixes the point.
                return Some(Arrow::Translation { g: rot_axis(xv, T::pi()), x: xv.clone() });
            }
            Some(Arrow::Translation { g: DMatrix::identity(3, 3), x: xv.clone() })
        })
}

/// The rotation groupoid R x (C x R): the additive line acting by fiberwise
/// rotations of frequency omega(t) on coordinates (a, b, t).
pub fn rotation_groupoid<T: Scalar>(
    omega: SmoothFn<T>,
    tol: ToleranceProfile<T>,
) -> GroupoidModel<T> {
    let om_iso = omega.clone();
    let om_orb = omega.clone();
    let om_conn = omega.clone();
    let iso_tol = tol.map_abs_tol;
    GroupoidModel::translation(
        format!("R|CxR[{}]", omega.label),
        group::line_group::<T>(),
        rotation_fiber_action(omega),
        tol,
    )
    .with_base_sampler(|rng| BasePoint::Flat(rng::normal_vector(rng, 3)))
    .with_orbit_oracle(move |a, b| match (a.as_flat(), b.as_flat()) {
        (Ok(u), Ok(v)) => {
            if (u[2] - v[2]).abs() > real(1e-7) {
                return false;
            }
            let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
            let rv = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if om_orb.eval(u[2]).abs() <= real(1e-9) {
                // Trivial action over the vanishing locus: orbits are points.
                (u - v).norm() <= real(1e-7)
            } else {
                (ru - rv).abs() <= real(1e-7)
            }
        }
        _ => false,
    })
    .with_isotropy_sampler(move |rng, x| {
        let xv = x.as_flat().ok()?;
        let t = xv[2];
        let w = om_iso.eval(t);
        let fiber = (xv[0] * xv[0] + xv[1] * xv[1]).sqrt();
        if w.abs() <= iso_tol || fiber <= iso_tol {
            // Trivial action (or axis point): every angle is isotropic.
            let theta = rng::uniform::<T>(rng, -8.0, 8.0);
            return Some(Arrow::Translation { g: group::line_element(theta), x: xv.clone() });
        }
        // Stabilizer off the axis: full turns of the fiber rotation.
        let mut m: i64 = 0;
        while m == 0 {
            m = rng::uniform::<f64>(rng, -3.99, 3.99) as i64;
        }
        let theta = real::<T>(m as f64) * T::two_pi() / w;
        Some(Arrow::Translation { g: group::line_element(theta), x: xv.clone() })
    })
    .with_connector(move |a, b| {
        let (u, v) = (a.as_flat().ok()?, b.as_flat().ok()?);
        if (u[2] - v[2]).abs() > real(1e-7) {
            return None;
        }
        let w = om_conn.eval(u[2]);
        let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let rv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if (ru - rv).abs() > real(1e-7) {
            return None;
        }
        if w.abs() <= real(1e-9) || ru <= real(1e-9) {
            if (u - v).norm() <= real(1e-7) {
                return Some(Arrow::Translation { g: group::line_element(T::zero()), x: u.clone() });
            }
            return None;
        }
        let da = v[1].atan2(v[0]) - u[1].atan2(u[0]);
        Some(Arrow::Translation { g: group::line_element(da / w), x: u.clone() })
    })
}

/// Rotation kernel for the groupoid above.
pub fn rotation_kernel<T: Scalar>(
    omega: SmoothFn<T>,
    scale: num_rational::Ratio<i64>,
    tol: ToleranceProfile<T>,
) -> Result<RotationKernel<T>> {
    RotationKernel::new(omega, scale, tol)
}

/// Base map (a, b, t) -> (0, 0, t) into R^3, used by the rotation scenarios.
pub fn axis_projection_map<T: Scalar>() -> BaseMapData<T> {
    BaseMapData {
        domain_dim: 3,
        codomain_dim: 3,
        map: Arc::new(|x: &DVector<T>| DVector::from_vec(vec![T::zero(), T::zero(), x[2]])),
        jacobian: Arc::new(|_: &DVector<T>| {
            let mut j = DMatrix::zeros(3, 3);
            j[(2, 2)] = T::one();
            j
        }),
        section: None,
    }
}

/// Base map R^2 -> R^3, (x, y) -> (x, y, 0).
pub fn plane_embedding_map<T: Scalar>() -> BaseMapData<T> {
    BaseMapData {
        domain_dim: 2,
        codomain_dim: 3,
        map: Arc::new(|x: &DVector<T>| DVector::from_vec(vec![x[0], x[1], T::zero()])),
        jacobian: Arc::new(|_: &DVector<T>| {
            DMatrix::from_row_slice(3, 2, &[
                T::one(),
                T::zero(),
                T::zero(),
                T::one(),
                T::zero(),
                T::zero(),
            ])
        }),
        section: None,
    }
}

/// Constant base map R^2 -> R^3 onto (0, 0, 1).
pub fn constant_pole_map<T: Scalar>() -> BaseMapData<T> {
    BaseMapData {
        domain_dim: 2,
        codomain_dim: 3,
        map: Arc::new(|_: &DVector<T>| DVector::from_vec(vec![T::zero(), T::zero(), T::one()])),
        jacobian: Arc::new(|_: &DVector<T>| DMatrix::zeros(3, 2)),
        section: None,
    }
}

/// The essentially surjective axis map (0, inf) -> R^3 minus the origin,
/// t -> (0, 0, t), with its partial section.
pub fn axis_curve_map<T: Scalar>() -> BaseMapData<T> {
    BaseMapData {
        domain_dim: 1,
        codomain_dim: 3,
        map: Arc::new(|x: &DVector<T>| DVector::from_vec(vec![T::zero(), T::zero(), x[0]])),
        jacobian: Arc::new(|_: &DVector<T>| {
            DMatrix::from_column_slice(3, 1, &[T::zero(), T::zero(), T::one()])
        }),
        section: Some(Arc::new(|p: &DVector<T>| {
            let fiber = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if fiber <= real(1e-9) && p[2] > real(1e-9) {
                Some(DVector::from_vec(vec![p[2]]))
            } else {
                None
            }
        })),
    }
}

/// The circle-bundle pullback of SO(3) on punctured 3-space along the axis
/// curve, over the ray (0, inf).
pub fn axis_pullback<T: Scalar>(
    target: Arc<GroupoidModel<T>>,
    tol: ToleranceProfile<T>,
) -> Result<GroupoidModel<T>> {
    let g = GroupoidModel::pullback("axis^*SO(3)", axis_curve_map::<T>(), target, tol)?
        .with_base_sampler(|rng| {
            BasePoint::Flat(DVector::from_vec(vec![rng::uniform::<T>(rng, 0.2, 3.0)]))
        })
        .with_orbit_oracle(|a, b| match (a.as_flat(), b.as_flat()) {
            (Ok(u), Ok(v)) => (u[0] - v[0]).abs() <= real(1e-7),
            _ => false,
        })
        .with_connector(|a, b| {
            let (u, v) = (a.as_flat().ok()?, b.as_flat().ok()?);
            if (u[0] - v[0]).abs() > real(1e-9) {
                return None;
            }
            let axis_pt = DVector::from_vec(vec![T::zero(), T::zero(), u[0]]);
            Some(Arrow::Pullback {
                target_pt: v.clone(),
                inner: Box::new(Arrow::Translation { g: DMatrix::identity(3, 3), x: axis_pt }),
                source_pt: u.clone(),
            })
        });
    Ok(g)
}

/// Reflection of the plane fixing the ray through `p`.
pub fn reflection_fixing<T: Scalar>(p: &DVector<T>) -> DMatrix<T> {
    let n = p.norm();
    let u = p / n;
    &u * u.transpose() * real::<T>(2.0) - DMatrix::identity(2, 2)
}

/// Stabilizer circle of (0,0,t) in SO(3), sampled at `count` evenly spaced
/// angles; the analytically complete candidate set for obstruction searches.
pub fn pole_stabilizer_circle<T: Scalar>(t: T, count: usize) -> Vec<Arrow<T>> {
    let x = DVector::from_vec(vec![T::zero(), T::zero(), t]);
    (0..count)
        .map(|i| {
            let angle = real::<T>(i as f64 * TAU / count as f64);
            Arrow::Translation { g: rot_z(angle), x: x.clone() }
        })
        .collect()
}

/// Evenly spaced circle of z-rotations based at an arbitrary point.
pub fn z_rotation_candidates<T: Scalar>(x: &DVector<T>, count: usize) -> Vec<Arrow<T>> {
    (0..count)
        .map(|i| {
            let angle = real::<T>(i as f64 * TAU / count as f64);
            Arrow::Translation { g: rot_z(angle), x: x.clone() }
        })
        .collect()
}

