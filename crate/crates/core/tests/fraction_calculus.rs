//! Worked examples for the span calculus: construction and composition of
//! right fractions, span equivalence through bridges, the axiom instances,
//! and the transversal-skeleton operations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use groupoid_effect_core::action::FreqSpec;
use groupoid_effect_core::fractions::{
    axiom_iii_instance, compose_spans, model_isomorphism_check, skeleton_compose,
    skeleton_equivalence_check, skeleton_point, span_equivalence_check, Span, SpanBridge,
};
use groupoid_effect_core::group::{embed_o2_block, line_element, rot2, rot_z};
use groupoid_effect_core::groupoid::{Arrow, BaseMapData, BasePoint, GroupoidModel};
use groupoid_effect_core::homs::{
    ClassifySettings, CongruenceMode, GroupoidHom, HomKind, NaturalTransformationWitness,
};
use groupoid_effect_core::models;
use groupoid_effect_core::rng::{self, seeded};
use groupoid_effect_core::scenario::{build_rotation_pair, RotationPair};
use groupoid_effect_core::tol::ToleranceProfile;

fn tol() -> ToleranceProfile<f64> {
    ToleranceProfile::default()
}

fn settings() -> ClassifySettings {
    ClassifySettings::default()
}

fn default_pair() -> RotationPair {
    build_rotation_pair(
        tol(),
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, -1.0] },
    )
    .unwrap()
}

/// Constant-frequency pair: omega = 1 never vanishes, so the two homs have
/// different axis values and are not even naturally congruent.
fn constant_freq_pair() -> RotationPair {
    build_rotation_pair(
        tol(),
        FreqSpec::Poly { coeffs: vec![1.0] },
        FreqSpec::Poly { coeffs: vec![1.0] },
        FreqSpec::Poly { coeffs: vec![-1.0] },
    )
    .unwrap()
}

fn wrap_quotient(pair: &RotationPair, rep: Arrow<f64>) -> Arrow<f64> {
    match &pair.quotient.kind {
        groupoid_effect_core::groupoid::GroupoidKind::Quotient { kernel, .. } => {
            groupoid_effect_core::groupoid::make_class(kernel, rep)
        }
        _ => panic!("quotient expected"),
    }
}

fn isotropy_at(
    groupoid: &Arc<GroupoidModel<f64>>,
    x: &BasePoint<f64>,
    count: usize,
    rng: &mut rng::Rng,
) -> Vec<Arrow<f64>> {
    let mut v = Vec::new();
    for _ in 0..count {
        if let Some(a) = groupoid.sample_isotropy(rng, x).unwrap() {
            v.push(a);
        }
    }
    v
}

/// Fiberwise angle-multiplying endomorphism of the trivial circle bundle.
fn winding_endo(bundle: &Arc<GroupoidModel<f64>>, k: i64) -> Arc<GroupoidHom<f64>> {
    Arc::new(GroupoidHom::from_parts(
        format!("wind[{k}]"),
        HomKind::Custom,
        bundle.clone(),
        bundle.clone(),
        move |a: &Arrow<f64>| match a {
            Arrow::Bundle { g, x } => {
                let angle = g[(1, 0)].atan2(g[(0, 0)]);
                Ok(Arrow::Bundle { g: rot2(k as f64 * angle), x: x.clone() })
            }
            _ => Err(groupoid_effect_core::error::Error::Typing("bundle arrow".into())),
        },
        |x: &BasePoint<f64>| Ok(x.clone()),
        Some(Arc::new(|_: &DVector<f64>| DMatrix::identity(1, 1))),
        Default::default(),
    ))
}

// ----- spans -----------------------------------------------------------------------

#[test]
fn span_construction_refuses_uncertified_right_leg() {
    let pair = default_pair();
    let mut rng = seeded(50);
    // phi0 has no witnesses at all, so it cannot close a right fraction.
    let err = Span::new(pair.phi0.clone(), pair.phi0.clone(), &mut rng, 4, &settings());
    assert!(err.is_err());
}

#[test]
fn self_equivalence_with_identity_bridge() {
    let bundle =
        Arc::new(models::axis_pullback(Arc::new(models::so3_r3_punctured(tol())), tol()).unwrap());
    let mut rng = seeded(51);
    let id = || Arc::new(GroupoidHom::identity(bundle.clone()));
    let span = Span::new(id(), id(), &mut rng, 4, &settings()).unwrap();
    let span2 = Span::new(id(), id(), &mut rng, 4, &settings()).unwrap();
    let bridge = SpanBridge {
        to_first: id(),
        to_second: id(),
        tau_left: NaturalTransformationWitness::units(CongruenceMode::Congruence, &id()),
        tau_right: NaturalTransformationWitness::units(CongruenceMode::Congruence, &id()),
    };
    let arrows: Vec<Arrow<f64>> =
        (0..30).map(|_| bundle.sample_arrow(&mut rng, None).unwrap()).collect();
    let report =
        span_equivalence_check(&span, &span2, &bridge, &arrows, &mut rng, &settings()).unwrap();
    assert!(report.equivalent, "a span is equivalent to itself through identities");
}

#[test]
fn bundle_endo_spans_are_equivalent() {
    // Two spans over the trivial bundle whose left legs differ by
    // identity-covering endomorphisms are equivalent through units:
    // everything in the codomain is ineffective.
    let bundle = Arc::new(GroupoidModel::group_bundle(
        "SO(2)xR",
        groupoid_effect_core::group::so2::<f64>(),
        1,
        tol(),
    ));
    let mut rng = seeded(52);
    let id = || Arc::new(GroupoidHom::identity(bundle.clone()));
    let s1 = Span::new(winding_endo(&bundle, 2), id(), &mut rng, 4, &settings()).unwrap();
    let s2 = Span::new(winding_endo(&bundle, 5), id(), &mut rng, 4, &settings()).unwrap();
    let bridge = SpanBridge {
        to_first: id(),
        to_second: id(),
        tau_left: NaturalTransformationWitness::units(
            CongruenceMode::Congruence,
            &winding_endo(&bundle, 2),
        ),
        tau_right: NaturalTransformationWitness::units(CongruenceMode::Congruence, &id()),
    };
    let arrows: Vec<Arrow<f64>> =
        (0..40).map(|_| bundle.sample_arrow(&mut rng, None).unwrap()).collect();
    let report =
        span_equivalence_check(&s1, &s2, &bridge, &arrows, &mut rng, &settings()).unwrap();
    assert!(report.equivalent);
}

#[test]
fn rotation_pair_spans_differ_when_axis_values_differ() {
    // omega = 1: the base map hits (0,0,t) for every t including the origin,
    // where ineffectivity is trivial; the unit transformation fails there.
    let pair = constant_freq_pair();
    let mut rng = seeded(53);
    let id_apex = || Arc::new(GroupoidHom::identity(pair.quotient.clone()));
    let s1 = Span::new(pair.phi0.clone(), id_apex(), &mut rng, 4, &settings()).unwrap();
    let s2 = Span::new(pair.phi1.clone(), id_apex(), &mut rng, 4, &settings()).unwrap();
    let bridge = SpanBridge {
        to_first: id_apex(),
        to_second: id_apex(),
        tau_left: NaturalTransformationWitness::units(CongruenceMode::Congruence, &pair.phi0),
        tau_right: NaturalTransformationWitness::units(CongruenceMode::Congruence, &id_apex()),
    };
    // Arrows over the t = 0 slice decide the failure.
    let mut arrows = Vec::new();
    for _ in 0..20 {
        let z = rng::nonzero_vector::<f64>(&mut rng, 2, 0.2);
        let theta = rng::uniform::<f64>(&mut rng, 0.4, 2.0);
        let rep = Arrow::Translation {
            g: line_element(theta),
            x: DVector::from_vec(vec![z[0], z[1], 0.0]),
        };
        arrows.push(wrap_quotient(&pair, rep));
    }
    let report =
        span_equivalence_check(&s1, &s2, &bridge, &arrows, &mut rng, &settings()).unwrap();
    assert!(!report.equivalent, "no unit-valued congruence at the origin slice");
    assert!(report.left_triangle.max_deviation > 1e-3);
}

#[test]
fn span_composition_associates_up_to_equivalence() {
    // Three identity-based spans over the circle bundle: both association
    // orders produce weak pullback apexes; the reassociating bridge maps one
    // onto the other and both triangles commute through units.
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma, tol()).unwrap());
    let mut rng = seeded(54);
    let id = || Arc::new(GroupoidHom::identity(bundle.clone()));
    let s1 = Span::new(id(), id(), &mut rng, 3, &settings()).unwrap();
    let s2 = Span::new(id(), id(), &mut rng, 3, &settings()).unwrap();
    let s3 = Span::new(id(), id(), &mut rng, 3, &settings()).unwrap();

    let left = compose_spans(
        &compose_spans(&s1, &s2, &mut rng, 3, &settings()).unwrap(),
        &s3,
        &mut rng,
        3,
        &settings(),
    )
    .unwrap();
    let right = compose_spans(
        &s1,
        &compose_spans(&s2, &s3, &mut rng, 3, &settings()).unwrap(),
        &mut rng,
        3,
        &settings(),
    )
    .unwrap();
    assert!(left.right_classification.in_e());
    assert!(right.right_classification.in_e());

    // The reassociator ((h,k,g),k2,g2) -> (h, k, (g,k2,g2)) between the two
    // apexes, covering the corresponding reshuffle of fibered base points.
    let reassoc = Arc::new(GroupoidHom::from_parts(
        "reassociate",
        HomKind::Custom,
        left.apex.clone(),
        right.apex.clone(),
        |a: &Arrow<f64>| {
            let (outer_left, k2, g2) = a.weak_pullback_parts()?;
            let (h, k, g) = outer_left.weak_pullback_parts()?;
            Ok(Arrow::WeakPullback {
                left: Box::new(h.clone()),
                mid: Box::new(k.clone()),
                right: Box::new(Arrow::WeakPullback {
                    left: Box::new(g.clone()),
                    mid: Box::new(k2.clone()),
                    right: Box::new(g2.clone()),
                }),
            })
        },
        |x: &BasePoint<f64>| match x {
            BasePoint::Triple { left, mid, right } => match &**left {
                BasePoint::Triple { left: h_pt, mid: k_pt, right: g_pt } => Ok(BasePoint::Triple {
                    left: h_pt.clone(),
                    mid: k_pt.clone(),
                    right: Box::new(BasePoint::Triple {
                        left: g_pt.clone(),
                        mid: mid.clone(),
                        right: right.clone(),
                    }),
                }),
                _ => Err(groupoid_effect_core::error::Error::Typing("nested triple".into())),
            },
            _ => Err(groupoid_effect_core::error::Error::Typing("triple".into())),
        },
        None,
        Default::default(),
    ));

    // Functoriality of the reassociator on samples.
    for _ in 0..25 {
        let x = left.apex.sample_base(&mut rng).unwrap();
        let a1 = left.apex.sample_arrow(&mut rng, Some(&x)).unwrap();
        let t1 = left.apex.target(&a1).unwrap();
        let a2 = left.apex.sample_arrow(&mut rng, Some(&t1)).unwrap();
        let composite = left.apex.compose(&a2, &a1).unwrap();
        let lhs = reassoc.apply(&composite).unwrap();
        let rhs = right
            .apex
            .compose(&reassoc.apply(&a2).unwrap(), &reassoc.apply(&a1).unwrap())
            .unwrap();
        assert!(right.apex.arrow_dist(&lhs, &rhs).unwrap() < 1e-10);
    }

    let arrows: Vec<Arrow<f64>> =
        (0..25).map(|_| left.apex.sample_arrow(&mut rng, None).unwrap()).collect();
    let bridge = SpanBridge {
        to_first: Arc::new(GroupoidHom::identity(left.apex.clone())),
        to_second: reassoc,
        tau_left: NaturalTransformationWitness::units(CongruenceMode::Congruence, &left.left),
        tau_right: NaturalTransformationWitness::units(CongruenceMode::Congruence, &left.right),
    };
    let report =
        span_equivalence_check(&left, &right, &bridge, &arrows, &mut rng, &settings()).unwrap();
    assert!(report.left_triangle.passes(1e-8));
    assert!(report.right_triangle.passes(1e-8));
    assert!(report.equivalent);
}

// ----- axiom III ---------------------------------------------------------------------

#[test]
fn axiom_iii_rejects_corrupted_tau() {
    // A transformation offset by a non-axis rotation at the origin: it is
    // typed (the origin is fixed by every rotation) but fails naturality
    // there, where ineffectivity is trivial and the image arrows are genuine
    // rotations (omega = 1). Away from the origin it is the unit, so only
    // the t = 0 slice exhibits the deviation.
    let pair = constant_freq_pair();
    let mut rng = seeded(55);
    let identity_phi = Arc::new(GroupoidHom::identity(pair.downstairs.clone()));
    let corrupted = NaturalTransformationWitness::new(CongruenceMode::Congruence, {
        let phi0 = pair.phi0.clone();
        move |x: &BasePoint<f64>| {
            let fx = phi0.base_map(x)?;
            let fxv = fx.as_flat()?;
            if fxv.norm() <= 1e-9 {
                let tilt = groupoid_effect_core::group::rot_axis(
                    &DVector::from_vec(vec![1.0, 0.0, 0.0]),
                    0.3,
                );
                Ok(Arrow::Translation { g: tilt, x: fxv.clone() })
            } else {
                Ok(Arrow::Translation { g: DMatrix::identity(3, 3), x: fxv.clone() })
            }
        }
    });
    let slice = vec![BasePoint::flat(vec![0.8, -0.3, 0.0])];
    let report = axiom_iii_instance(
        pair.phi0.clone(),
        pair.phi0.clone(),
        identity_phi,
        BaseMapData::identity(3),
        corrupted,
        &slice,
        &mut rng,
        40,
    )
    .unwrap();
    assert!(
        report.lifted_congruence.max_deviation > 1e-3,
        "tilted transformation fails naturality at the origin: {}",
        report.lifted_congruence.max_deviation
    );
    assert!(!report.holds(1e-8));
}

#[test]
fn trivial_axiom_iii_instance_passes() {
    let pair = default_pair();
    let mut rng = seeded(56);
    let identity_phi = Arc::new(GroupoidHom::identity(pair.downstairs.clone()));
    let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &pair.phi0);
    let slice = vec![BasePoint::flat(vec![0.8, -0.3, 0.0])];
    let report = axiom_iii_instance(
        pair.phi0.clone(),
        pair.phi0.clone(),
        identity_phi,
        BaseMapData::identity(3),
        tau,
        &slice,
        &mut rng,
        40,
    )
    .unwrap();
    assert!(report.holds(1e-8));
}

// ----- skeletons ----------------------------------------------------------------------

#[test]
fn identity_skeleton_composes_trivially() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g.clone());
    let x = BasePoint::flat(vec![0.0, 0.0, 1.0]);
    let mut rng = seeded(57);
    let iso = isotropy_at(&g, &x, 12, &mut rng);
    let p = skeleton_point(&id, &x, &iso).unwrap();
    assert!(p.lambda.deviation_from_identity() < 1e-12);
    let q = skeleton_point(&id, &x, &iso).unwrap();
    let composed = skeleton_compose(&g, &p, &q).unwrap();
    assert!(composed.lambda.deviation_from_identity() < 1e-12);
    assert_eq!(composed.theta_table.len(), p.theta_table.len());
}

#[test]
fn skeleton_composition_is_functorial_for_the_rotation_chain() {
    // Projection followed by the rotation hom: the skeleton of the composite
    // equals the composite of skeletons at matching samples.
    let pair = default_pair();
    let mut rng = seeded(58);
    let x = BasePoint::flat(vec![0.0, 0.0, 1.4]);
    let base_iso = isotropy_at(&pair.base, &x, 16, &mut rng);
    let p = skeleton_point(&pair.projection, &x, &base_iso).unwrap();
    let quotient_iso: Vec<Arrow<f64>> =
        base_iso.iter().map(|a| pair.projection.apply(a).unwrap()).collect();
    let q = skeleton_point(&pair.phi0, &x, &quotient_iso).unwrap();
    let composed = skeleton_compose(&pair.quotient, &p, &q).unwrap();

    let chain = GroupoidHom::compose(&pair.phi0, &pair.projection).unwrap();
    let direct = skeleton_point(&chain, &x, &base_iso).unwrap();
    let lambda_gap = (&composed.lambda.matrix - &direct.lambda.matrix).norm();
    assert!(lambda_gap < 1e-8, "lambda functoriality gap {lambda_gap}");
    assert_eq!(composed.theta_table.len(), direct.theta_table.len());
}

#[test]
fn skeleton_lambda_composition_is_associative() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g.clone());
    let x = BasePoint::flat(vec![0.3, -0.8, 0.5]);
    let mut rng = seeded(63);
    let iso = isotropy_at(&g, &x, 8, &mut rng);
    let p = skeleton_point(&id, &x, &iso).unwrap();
    let ab_c = skeleton_compose(&g, &skeleton_compose(&g, &p, &p).unwrap(), &p).unwrap();
    let a_bc = skeleton_compose(&g, &p, &skeleton_compose(&g, &p, &p).unwrap()).unwrap();
    assert!((&ab_c.lambda.matrix - &a_bc.lambda.matrix).norm() < 1e-12);
}

#[test]
fn skeleton_points_conjugate_along_the_orbit() {
    // The same hom at two orbit-equivalent base points, with the connecting
    // rotation and its image as witness pair.
    let g = Arc::new(models::so3_r3_punctured(tol()));
    let id = Arc::new(GroupoidHom::identity(g.clone()));
    let mut rng = seeded(59);
    let x1 = BasePoint::flat(vec![0.0, 0.0, 1.0]);
    let x2 = BasePoint::flat(vec![1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()]);
    let p1 = skeleton_point(&id, &x1, &isotropy_at(&g, &x1, 10, &mut rng)).unwrap();
    let p2 = skeleton_point(&id, &x2, &isotropy_at(&g, &x2, 10, &mut rng)).unwrap();
    let witness = g.connect(&x1, &x2).unwrap();
    let (equal, dev) =
        skeleton_equivalence_check(&g, &g, &p1, &p2, (&witness, &witness)).unwrap();
    assert!(equal, "rotating one pole onto the other matches the data, dev {dev}");
}

#[test]
fn scaled_lambda_breaks_skeleton_equivalence() {
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let pi = Arc::new(GroupoidHom::pullback_projection(bundle.clone()).unwrap());
    let mut rng = seeded(60);
    let x = BasePoint::flat(vec![1.0]);
    let iso = isotropy_at(&bundle, &x, 10, &mut rng);
    let p1 = skeleton_point(&pi, &x, &iso).unwrap();
    let mut p2 = skeleton_point(&pi, &x, &iso).unwrap();
    p2.lambda.matrix *= 2.0;
    let w = (bundle.unit(&x).unwrap(), sigma.unit(&BasePoint::flat(vec![0.0, 0.0, 1.0])).unwrap());
    let (equal, dev) = skeleton_equivalence_check(&bundle, &sigma, &p1, &p2, (&w.0, &w.1)).unwrap();
    assert!(!equal);
    assert!((dev - 1.0).abs() < 1e-9, "deviation is the norm of lambda, got {dev}");
}

// ----- model isomorphism ---------------------------------------------------------------

#[test]
fn model_isomorphism_fails_for_the_constant_pole_hom() {
    let upstairs = Arc::new(models::so2_r2(tol()));
    let downstairs = Arc::new(models::so3_r3(tol()));
    let phi = Arc::new(GroupoidHom::translation(
        "pole",
        upstairs.clone(),
        downstairs,
        |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(g),
        models::constant_pole_map(),
    ));
    let mut rng = seeded(61);
    let points = vec![BasePoint::flat(vec![0.8, 0.1])];
    let report = model_isomorphism_check(&phi, &points, &mut rng, 8).unwrap();
    assert!(!report.passes(), "zero transversal map cannot be invertible");
    assert!(!report.points[0].lambda_invertible);
}

#[test]
fn model_isomorphism_passes_for_identity() {
    let g = Arc::new(models::so3_r3_punctured(tol()));
    let id = GroupoidHom::identity(g.clone());
    let mut rng = seeded(62);
    let points: Vec<_> = (0..3).map(|_| g.sample_base(&mut rng).unwrap()).collect();
    let report = model_isomorphism_check(&id, &points, &mut rng, 8).unwrap();
    assert!(report.passes());
}

// ----- typing errors ---------------------------------------------------------------

#[test]
fn skeleton_composition_requires_matching_points() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g.clone());
    let mut rng = seeded(64);
    let x1 = BasePoint::flat(vec![0.0, 0.0, 1.0]);
    let x2 = BasePoint::flat(vec![0.0, 0.0, 2.0]);
    let p = skeleton_point(&id, &x1, &isotropy_at(&g, &x1, 6, &mut rng)).unwrap();
    let q = skeleton_point(&id, &x2, &isotropy_at(&g, &x2, 6, &mut rng)).unwrap();
    assert!(matches!(
        skeleton_compose(&g, &p, &q),
        Err(groupoid_effect_core::error::Error::Typing(_))
    ));
}

#[test]
fn skeleton_equivalence_rejects_ill_typed_witness() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g.clone());
    let mut rng = seeded(65);
    let x = BasePoint::flat(vec![0.0, 0.0, 1.0]);
    let p = skeleton_point(&id, &x, &isotropy_at(&g, &x, 6, &mut rng)).unwrap();
    // A witness arrow based somewhere else entirely.
    let bad = Arrow::Translation { g: rot_z(0.4), x: DVector::from_vec(vec![3.0, 0.0, 0.0]) };
    assert!(matches!(
        skeleton_equivalence_check(&g, &g, &p, &p, (&bad, &bad)),
        Err(groupoid_effect_core::error::Error::Typing(_))
    ));
}

// ----- axiom II with a degenerate left input -------------------------------------------

#[test]
fn axiom_ii_certifies_projection_even_for_constant_orbit_psi() {
    // The certification of the projection onto psi's domain rests only on
    // phi's properties; a psi collapsing everything onto the pole sphere
    // still yields a certified square completion.
    use groupoid_effect_core::fractions::axiom_ii_instance;
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let sigma_w = sigma.clone();
    let pi = Arc::new(
        GroupoidHom::pullback_projection(bundle.clone()).unwrap().with_surjectivity(move |c| {
            let cv = c.as_flat().ok()?;
            let r = cv.norm();
            if r <= 1e-9 {
                return None;
            }
            let axis = BasePoint::flat(vec![0.0, 0.0, r]);
            let k = sigma_w.connect(&axis, c)?;
            Some((BasePoint::flat(vec![r]), k))
        }),
    );
    let plane = Arc::new(models::so2_r2(tol()));
    let constant_psi = Arc::new(GroupoidHom::translation(
        "pole",
        plane,
        sigma.clone(),
        |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(g),
        models::constant_pole_map(),
    ));
    let mut rng = seeded(91);
    let report = axiom_ii_instance(
        constant_psi,
        pi,
        &mut rng,
        400,
        6,
        &ClassifySettings::default(),
    )
    .unwrap();
    assert!(report.wp_axioms.worst() < 1e-8);
    assert!(report.pr_delta.in_e(), "certification depends only on the inverted leg");
    assert!(report.pr_gamma_preservation.in_dotted_at_samples());
}
