//! Longitudinal and transversal tangent data, and the linear effect of
//! arrows on the transversal space.
//!
//! For a translation groupoid the longitudinal space at x is the span of the
//! infinitesimal generators there, and the effect of an isotropic arrow
//! (g, x) is the class map of the analytic base Jacobian of g at x: this is
//! the constant-group-coordinate source section, whose section independence
//! is what makes the effect well defined. Group bundles have identity
//! effects. Quotient classes use their stored representative. Pullback
//! arrows transport through the projection's quotient map, and weak pullback
//! arrows through their third component.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::groupoid::{Arrow, BasePoint, GroupoidKind, GroupoidModel};
use crate::numlin::{
    induced_quotient_map, orthonormalize, QuotientLinearMap, QuotientSpace, Subspace,
};
use crate::scalar::{approx_f64, Scalar};

/// Longitudinal subspace and quotient data at a base point.
#[derive(Debug, Clone)]
pub struct TransversalData<T: Scalar> {
    pub point: BasePoint<T>,
    pub longitudinal: Subspace<T>,
    pub quotient: QuotientSpace<T>,
}

/// Tangent directions along the orbit at `x`.
pub fn longitudinal_space<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    x: &BasePoint<T>,
) -> Result<Subspace<T>> {
    match &groupoid.kind {
        GroupoidKind::Translation { group, action } => {
            let xv = x.as_flat()?;
            let gens: Vec<_> =
                group.algebra_basis.iter().map(|a| action.generator(a, xv)).collect();
            orthonormalize(action.base_dim, &gens, &groupoid.tol)
        }
        GroupoidKind::GroupBundle { .. } => Ok(Subspace::zero(groupoid.base_dim)),
        GroupoidKind::Quotient { base, .. } => longitudinal_space(base, x),
        GroupoidKind::Pullback { target, map } => {
            // Preimage of the target longitudinal under the base Jacobian:
            // kernel of C^T Df, where C spans the transversal complement at f(x).
            let xv = x.as_flat()?;
            let fx = BasePoint::Flat((map.map)(xv));
            let downstairs = transversal_space(target, &fx)?;
            let constraint = downstairs.quotient.complement.transpose() * (map.jacobian)(xv);
            crate::numlin::kernel(&constraint, &groupoid.tol)
        }
        GroupoidKind::WeakPullback { phi, .. } => match x {
            // Identified with the third component through pr_Gamma.
            BasePoint::Triple { right, .. } => longitudinal_space(&phi.domain, right),
            _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
        },
    }
}

/// Longitudinal space together with the orthonormal complement realizing the
/// transversal quotient.
pub fn transversal_space<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    x: &BasePoint<T>,
) -> Result<TransversalData<T>> {
    let longitudinal = longitudinal_space(groupoid, x)?;
    let quotient = QuotientSpace::from_longitudinal(longitudinal.clone());
    Ok(TransversalData { point: x.clone(), longitudinal, quotient })
}

/// The quotient-level linear map an arrow induces from the transversal space
/// at its source to the one at its target. For isotropic arrows this is the
/// effect; for general arrows it is the transport used by conjugation,
/// natural-transformation checks and skeleton equivalence.
pub fn arrow_transport<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    a: &Arrow<T>,
) -> Result<QuotientLinearMap<T>> {
    match (&groupoid.kind, a) {
        (GroupoidKind::Translation { action, .. }, Arrow::Translation { g, x }) => {
            let source = BasePoint::Flat(x.clone());
            let src = transversal_space(groupoid, &source)?;
            let tgt_pt = groupoid.target(a)?;
            // An isotropic arrow induces an endomorphism of one transversal
            // space; recomputing the frame at the rounded target point would
            // introduce an arbitrary change of gauge.
            let dst = if groupoid.point_dist(&tgt_pt, &source)? <= groupoid.tol.map_abs_tol {
                src.clone()
            } else {
                transversal_space(groupoid, &tgt_pt)?
            };
            let jac = action.base_jacobian(g, x);
            induced_quotient_map(&jac, &src.quotient, &dst.quotient, &groupoid.tol)
        }
        (GroupoidKind::GroupBundle { .. }, Arrow::Bundle { x, .. }) => {
            let here = transversal_space(groupoid, &BasePoint::Flat(x.clone()))?;
            Ok(QuotientLinearMap::identity(&here.quotient))
        }
        (GroupoidKind::Quotient { base, .. }, Arrow::Quotient { rep, .. }) => {
            // Effects are computed on representatives; kernel arrows are the
            // ones whose representative Jacobian still descends to the identity.
            arrow_transport(base, rep)
        }
        (GroupoidKind::Pullback { target, map }, Arrow::Pullback { target_pt, inner, source_pt }) => {
            let same_pt = (target_pt - source_pt).norm() <= groupoid.tol.map_abs_tol;
            let src = transversal_space(groupoid, &BasePoint::Flat(source_pt.clone()))?;
            let dst = if same_pt {
                src.clone()
            } else {
                transversal_space(groupoid, &BasePoint::Flat(target_pt.clone()))?
            };
            let src_down =
                transversal_space(target, &BasePoint::Flat((map.map)(source_pt)))?;
            let dst_down = if same_pt {
                src_down.clone()
            } else {
                transversal_space(target, &BasePoint::Flat((map.map)(target_pt)))?
            };
            let proj_src = induced_quotient_map(
                &(map.jacobian)(source_pt),
                &src.quotient,
                &src_down.quotient,
                &groupoid.tol,
            )?;
            let proj_dst = induced_quotient_map(
                &(map.jacobian)(target_pt),
                &dst.quotient,
                &dst_down.quotient,
                &groupoid.tol,
            )?;
            let inner_map = arrow_transport(target, inner)?;
            let proj_dst_inv = proj_dst.try_inverse().ok_or_else(|| {
                Error::Unsupported(
                    "pullback projection quotient map is singular; effect transport undefined"
                        .into(),
                )
            })?;
            proj_dst_inv.compose(&inner_map.compose(&proj_src)?)
        }
        (GroupoidKind::WeakPullback { phi, .. }, Arrow::WeakPullback { right, .. }) => {
            arrow_transport(&phi.domain, right)
        }
        _ => Err(Error::Typing(format!("arrow does not belong to groupoid {}", groupoid.name))),
    }
}

/// The effect of an isotropic arrow.
#[derive(Debug, Clone)]
pub struct Effect<T: Scalar> {
    pub arrow: Arrow<T>,
    pub map: QuotientLinearMap<T>,
}

pub fn effect<T: Scalar>(groupoid: &GroupoidModel<T>, a: &Arrow<T>) -> Result<Effect<T>> {
    let defect = groupoid.isotropy_defect(a)?;
    if defect > groupoid.tol.map_abs_tol {
        return Err(Error::Precondition(format!(
            "effect requires an isotropic arrow (source/target deviation {:.3e})",
            approx_f64(defect)
        )));
    }
    let map = arrow_transport(groupoid, a)?;
    Ok(Effect { arrow: a.clone(), map })
}

/// Whether the arrow's effect is the identity, together with the deviation.
pub fn is_ineffective<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    a: &Arrow<T>,
) -> Result<(bool, T)> {
    let e = effect(groupoid, a)?;
    let dev = e.map.deviation_from_identity();
    Ok((dev <= groupoid.tol.map_abs_tol, dev))
}

/// Partition of isotropy samples into ineffective and effective arrows.
#[derive(Debug, Clone)]
pub struct IneffectivePartition<T: Scalar> {
    pub ineffective: Vec<(Arrow<T>, f64)>,
    pub effective: Vec<(Arrow<T>, f64)>,
    /// Max deviation of products of sampled ineffective pairs from being
    /// ineffective (the sampled kernel is closed under composition).
    pub closure_residual: f64,
}

pub fn ineffective_subgroup_sample<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    x: &BasePoint<T>,
    samples: &[Arrow<T>],
) -> Result<IneffectivePartition<T>> {
    let mut ineffective = Vec::new();
    let mut effective = Vec::new();
    for a in samples {
        let at = groupoid.point_dist(&groupoid.source(a)?, x)?;
        if at > groupoid.tol.map_abs_tol {
            return Err(Error::Precondition("isotropy sample is not based at x".into()));
        }
        let (flat, dev) = is_ineffective(groupoid, a)?;
        if flat {
            ineffective.push((a.clone(), approx_f64(dev)));
        } else {
            effective.push((a.clone(), approx_f64(dev)));
        }
    }
    let mut closure_residual = 0.0f64;
    for (i, (a, _)) in ineffective.iter().enumerate() {
        for (b, _) in ineffective.iter().skip(i) {
            let prod = groupoid.compose(a, b)?;
            let (_, dev) = is_ineffective(groupoid, &prod)?;
            closure_residual = closure_residual.max(approx_f64(dev));
        }
    }
    Ok(IneffectivePartition { ineffective, effective, closure_residual })
}

/// The sampled image of the isotropy group inside GL of the transversal
/// space: deduplicated effect matrices of a sampled generating set.
#[derive(Debug, Clone)]
pub struct EffectiveIsotropyModel<T: Scalar> {
    pub point: BasePoint<T>,
    pub quotient: QuotientSpace<T>,
    pub effects: Vec<(String, DMatrix<T>)>,
    /// Max functoriality residual of sampled products against the table.
    pub closure_residual: f64,
}

impl<T: Scalar> EffectiveIsotropyModel<T> {
    /// Index of the table entry matching `m` within `tol`, if any.
    pub fn find(&self, m: &DMatrix<T>, tol: T) -> Option<usize> {
        self.effects.iter().position(|(_, e)| {
            e.shape() == m.shape() && (e - m).norm() <= tol
        })
    }
}

pub fn effective_infinitesimal_model<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    x: &BasePoint<T>,
    samples: &[Arrow<T>],
) -> Result<EffectiveIsotropyModel<T>> {
    let here = transversal_space(groupoid, x)?;
    let dim = here.quotient.dim();
    let mut model = EffectiveIsotropyModel {
        point: x.clone(),
        quotient: here.quotient,
        effects: vec![("unit".into(), DMatrix::identity(dim, dim))],
        closure_residual: 0.0,
    };
    for (i, a) in samples.iter().enumerate() {
        let e = effect(groupoid, a)?;
        if model.find(&e.map.matrix, groupoid.tol.map_abs_tol).is_none() {
            model.effects.push((format!("sample-{i}"), e.map.matrix));
        }
    }
    // Sampled closure: products of sampled arrows have effects equal to the
    // products of their effect matrices.
    let mut closure = 0.0f64;
    for a in samples.iter().take(10) {
        for b in samples.iter().take(10) {
            let prod = groupoid.compose(a, b)?;
            let ep = effect(groupoid, &prod)?;
            let ea = effect(groupoid, a)?;
            let eb = effect(groupoid, b)?;
            let residual = (&ea.map.matrix * &eb.map.matrix - &ep.map.matrix).norm();
            closure = closure.max(approx_f64(residual));
        }
    }
    model.closure_residual = closure;
    Ok(model)
}

/// Max residual of `effect(a2 a1) = effect(a2) effect(a1)` over composable
/// isotropic pairs.
pub fn effect_functoriality_check<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    pairs: &[(Arrow<T>, Arrow<T>)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a2, a1) in pairs {
        let composite = groupoid.compose(a2, a1)?;
        let ec = effect(groupoid, &composite)?;
        let e2 = effect(groupoid, a2)?;
        let e1 = effect(groupoid, a1)?;
        let residual = (&e2.map.matrix * &e1.map.matrix - &ec.map.matrix).norm();
        worst = worst.max(approx_f64(residual));
    }
    Ok(worst)
}

/// Conjugation stability of ineffectivity: if `n` is ineffective at the
/// source of `a`, then `a n a^{-1}` is ineffective at its target. Returns the
/// worst deviation of the conjugates from the identity effect.
pub fn conjugation_stability_check<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    cases: &[(Arrow<T>, Arrow<T>)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (n, a) in cases {
        let (flat, _) = is_ineffective(groupoid, n)?;
        if !flat {
            return Err(Error::Precondition("conjugation case is not ineffective".into()));
        }
        let conj = groupoid.compose(a, &groupoid.compose(n, &groupoid.inverse(a)?)?)?;
        let (_, dev) = is_ineffective(groupoid, &conj)?;
        worst = worst.max(approx_f64(dev));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::rot_z;
    use crate::tol::ToleranceProfile;
    use nalgebra::DVector;

    #[test]
    fn effect_of_non_isotropic_arrow_is_a_precondition_error() {
        let g = crate::models::so3_r3(ToleranceProfile::<f64>::default());
        let moving = Arrow::Translation {
            g: crate::group::rot_axis(&DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.9),
            x: DVector::from_vec(vec![0.0, 0.0, 1.0]),
        };
        assert!(matches!(effect(&g, &moving), Err(Error::Precondition(_))));
    }

    #[test]
    fn isotropy_samples_must_be_based_at_the_point() {
        let g = crate::models::so3_r3(ToleranceProfile::<f64>::default());
        let elsewhere =
            Arrow::Translation { g: rot_z(0.4), x: DVector::from_vec(vec![0.0, 0.0, 2.0]) };
        let x = BasePoint::flat(vec![0.0, 0.0, 1.0]);
        assert!(ineffective_subgroup_sample(&g, &x, &[elsewhere]).is_err());
    }

    #[test]
    fn transport_between_distinct_points_has_matching_spaces() {
        let g = crate::models::so3_r3(ToleranceProfile::<f64>::default());
        let conn = g
            .connect(&BasePoint::flat(vec![0.0, 0.0, 1.0]), &BasePoint::flat(vec![1.0, 0.0, 0.0]))
            .unwrap();
        let m = arrow_transport(&g, &conn).unwrap();
        assert_eq!(m.source.dim(), 1);
        assert_eq!(m.target.dim(), 1);
        assert!((m.matrix[(0, 0)].abs() - 1.0).abs() < 1e-10, "isometric on radial lines");
    }
}
