//! Worked examples for the homomorphism layer: transversal maps,
//! intertwining, classification, preservation of ineffectivity, natural
//! congruences, obstruction search and orbit comparison.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use groupoid_effect_core::effect::arrow_transport;
use groupoid_effect_core::group::rot_z;
use groupoid_effect_core::groupoid::{Arrow, BasePoint};
use groupoid_effect_core::homs::{
    classify, congruence_obstruction, intertwining_check, natural_congruence_check,
    natural_transformation_effect_check, orbit_map_check, transversal_map, ClassifySettings,
    CongruenceMode, Flag, GroupoidHom, NaturalTransformationWitness, ObstructionOutcome,
};
use groupoid_effect_core::models;
use groupoid_effect_core::rng::{self, seeded};
use groupoid_effect_core::scenario::RotationPair;
use groupoid_effect_core::tol::ToleranceProfile;

fn tol() -> ToleranceProfile<f64> {
    ToleranceProfile::default()
}

fn settings() -> ClassifySettings {
    ClassifySettings::default()
}

fn pt(coords: &[f64]) -> BasePoint<f64> {
    BasePoint::flat(coords.to_vec())
}

// ----- transversal maps -------------------------------------------------------

#[test]
fn constant_base_map_descends_to_zero() {
    let ex2a = groupoid_effect_core_test_ex2a();
    let m = transversal_map(&ex2a.phi, &pt(&[0.7, 0.3])).unwrap();
    assert_eq!(m.matrix.shape(), (1, 1));
    assert!(m.matrix.norm() < 1e-14, "zero Jacobian descends to the zero map");
}

fn groupoid_effect_core_test_ex2a() -> Ex2aCtx {
    let upstairs = Arc::new(models::so2_r2(tol()));
    let downstairs = Arc::new(models::so3_r3(tol()));
    let phi = Arc::new(GroupoidHom::translation(
        "pole",
        upstairs.clone(),
        downstairs.clone(),
        |g: &DMatrix<f64>, _: &DVector<f64>| groupoid_effect_core::group::embed_o2_block(g),
        models::constant_pole_map(),
    ));
    Ex2aCtx { upstairs, downstairs, phi }
}

struct Ex2aCtx {
    upstairs: Arc<groupoid_effect_core::groupoid::GroupoidModel<f64>>,
    downstairs: Arc<groupoid_effect_core::groupoid::GroupoidModel<f64>>,
    phi: Arc<GroupoidHom<f64>>,
}

#[test]
fn pullback_projection_transversal_map_is_unit() {
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let pi = GroupoidHom::pullback_projection(bundle).unwrap();
    let m = transversal_map(&pi, &pt(&[1.3])).unwrap();
    assert_eq!(m.matrix.shape(), (1, 1));
    assert!((m.matrix[(0, 0)].abs() - 1.0).abs() < 1e-12);
}

#[test]
fn identity_hom_transversal_map_is_identity() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g);
    let m = transversal_map(&id, &pt(&[0.0, 0.0, 1.0])).unwrap();
    assert!(m.deviation_from_identity() < 1e-14);
}

// ----- intertwining --------------------------------------------------------------

#[test]
fn intertwining_for_the_reflection_pair_at_unit_x() {
    let upstairs = Arc::new(models::o2_r2(tol()));
    let downstairs = Arc::new(models::axis_flip_r3(tol(), false));
    let hom = GroupoidHom::translation(
        "embed",
        upstairs.clone(),
        downstairs,
        |g: &DMatrix<f64>, _: &DVector<f64>| groupoid_effect_core::group::embed_o2_block(g),
        models::plane_embedding_map(),
    );
    let x = pt(&[1.0, 0.0]);
    let refl = Arrow::Translation {
        g: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])),
        x: DVector::from_vec(vec![1.0, 0.0]),
    };
    let residual = intertwining_check(&hom, &x, &[refl]).unwrap();
    assert!(residual < 1e-10, "intertwining residual {residual}");

    let unit = upstairs.unit(&x).unwrap();
    let residual = intertwining_check(&hom, &x, &[unit]).unwrap();
    assert_eq!(residual, 0.0, "unit arrow intertwines exactly");
}

#[test]
fn intertwining_at_the_origin_with_full_circle() {
    // The constant-pole hom at the origin: 500 stabilizer samples.
    let ctx = groupoid_effect_core_test_ex2a();
    let x = pt(&[0.0, 0.0]);
    let mut rng = seeded(41);
    let mut samples = Vec::new();
    for _ in 0..500 {
        samples.push(ctx.upstairs.sample_isotropy(&mut rng, &x).unwrap().unwrap());
    }
    let residual = intertwining_check(&ctx.phi, &x, &samples).unwrap();
    assert!(residual < 1e-8, "residual {residual}");
}

// ----- classification ---------------------------------------------------------------

#[test]
fn identity_hom_classifies_true_everywhere() {
    let g = Arc::new(models::so3_r3_punctured(tol()));
    let id = GroupoidHom::identity(g.clone());
    let mut rng = seeded(42);
    let points: Vec<_> = (0..5).map(|_| g.sample_base(&mut rng).unwrap()).collect();
    let cls = classify(&id, &points, &mut rng, &settings()).unwrap();
    assert!(cls.transversal.flag.is_true());
    assert!(cls.completely_transversal.flag.is_true());
    assert!(cls.cinfty_full.flag.is_true());
    assert!(cls.faithful_at_samples.flag.is_true());
    assert!(cls.faithfully_transversal.flag.is_true());
    assert!(cls.weak_equivalence());
    assert!(cls.in_e());
    assert!(cls.in_dotted_category.flag.is_true());
}

#[test]
fn missing_witnesses_leave_flags_undetermined() {
    let ctx = groupoid_effect_core_test_ex2a();
    let mut rng = seeded(43);
    let points: Vec<_> = (0..4).map(|_| ctx.upstairs.sample_base(&mut rng).unwrap()).collect();
    let cls = classify(&ctx.phi, &points, &mut rng, &settings()).unwrap();
    assert_eq!(cls.cinfty_full.flag, Flag::Undetermined, "no lift witness supplied");
    assert_eq!(cls.completely_transversal.flag, Flag::Undetermined, "no surjectivity witness");
    assert_eq!(cls.transversal.flag, Flag::False);
    assert_eq!(cls.faithfully_transversal.flag, Flag::False);
}

// ----- natural transformations ---------------------------------------------------

#[test]
fn unit_transformation_between_equal_homs_is_exact() {
    let ctx = groupoid_effect_core_test_ex2a();
    let mut rng = seeded(44);
    let arrows: Vec<_> =
        (0..50).map(|_| ctx.upstairs.sample_arrow(&mut rng, None).unwrap()).collect();
    let tau = NaturalTransformationWitness::units(CongruenceMode::Exact, &ctx.phi);
    let report = natural_congruence_check(&tau, &ctx.phi, &ctx.phi, &arrows).unwrap();
    assert!(report.max_deviation < 1e-14, "deviation {}", report.max_deviation);
    assert_eq!(report.typing_residual, 0.0);
}

#[test]
fn non_isotropic_connecting_arrow_rejects_tau() {
    // A transformation candidate whose connecting arrows move the base point
    // is rejected before any deviation is measured.
    let ctx = groupoid_effect_core_test_ex2a();
    let downstairs = ctx.downstairs.clone();
    let bad = NaturalTransformationWitness::new(CongruenceMode::Congruence, move |_x| {
        // An arrow out of the pole that genuinely moves it.
        Ok(Arrow::Translation {
            g: groupoid_effect_core::group::rot_axis(
                &DVector::from_vec(vec![1.0, 0.0, 0.0]),
                0.7,
            ),
            x: DVector::from_vec(vec![0.0, 0.0, 1.0]),
        })
    });
    let _ = &downstairs;
    let mut rng = seeded(45);
    let arrows: Vec<_> =
        (0..10).map(|_| ctx.upstairs.sample_arrow(&mut rng, None).unwrap()).collect();
    let err = natural_congruence_check(&bad, &ctx.phi, &ctx.phi, &arrows);
    assert!(err.is_err(), "non-isotropic connecting arrow must reject tau");
}

#[test]
fn obstruction_search_with_empty_candidates_is_undetermined() {
    let ctx = groupoid_effect_core_test_ex2a();
    let x = pt(&[0.4, 0.2]);
    let g = Arrow::Translation {
        g: groupoid_effect_core::group::rot2(0.9),
        x: DVector::from_vec(vec![0.4, 0.2]),
    };
    let outcome =
        congruence_obstruction(&ctx.phi, &ctx.phi, &x, &g, &[], CongruenceMode::Exact).unwrap();
    assert!(matches!(outcome, ObstructionOutcome::Undetermined));
}

#[test]
fn obstruction_search_finds_witness_for_equal_homs() {
    let ctx = groupoid_effect_core_test_ex2a();
    let x = pt(&[0.4, 0.2]);
    let g = Arrow::Translation {
        g: groupoid_effect_core::group::rot2(0.9),
        x: DVector::from_vec(vec![0.4, 0.2]),
    };
    let candidates = models::pole_stabilizer_circle(1.0f64, 8);
    let outcome =
        congruence_obstruction(&ctx.phi, &ctx.phi, &x, &g, &candidates, CongruenceMode::Exact)
            .unwrap();
    assert!(outcome.witness_found(), "the unit candidate intertwines equal homs");
}

#[test]
fn congruence_mode_accepts_everything_at_ineffective_points() {
    // Obstruction in congruence mode at the pole: all candidates pass because
    // the stabilizer is ineffective there.
    let rotpair = build_rotation_pair();
    let t = 1.7;
    let x = pt(&[0.0, 0.0, t]);
    let g = wrap_quotient(
        &rotpair,
        Arrow::Translation {
            g: groupoid_effect_core::group::line_element(1.3),
            x: DVector::from_vec(vec![0.0, 0.0, t]),
        },
    );
    let candidates = models::z_rotation_candidates(&DVector::from_vec(vec![0.0, 0.0, t]), 24);
    let outcome = congruence_obstruction(
        &rotpair.phi0,
        &rotpair.phi1,
        &x,
        &g,
        &candidates,
        CongruenceMode::Congruence,
    )
    .unwrap();
    assert!(outcome.witness_found(), "everything is ineffective away from the origin");
}

fn build_rotation_pair() -> RotationPair {
    use groupoid_effect_core::action::FreqSpec;
    groupoid_effect_core::scenario::build_rotation_pair(
        tol(),
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, -1.0] },
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

// ----- natural transformation effect identity -----------------------------------

#[test]
fn unit_tau_effect_identity_is_exact() {
    let ctx = groupoid_effect_core_test_ex2a();
    let tau = NaturalTransformationWitness::units(CongruenceMode::Exact, &ctx.phi);
    let points = vec![pt(&[0.5, -0.5]), pt(&[1.0, 0.0])];
    let worst =
        natural_transformation_effect_check(&tau, &ctx.phi, &ctx.phi, &points).unwrap();
    assert!(worst < 1e-12);
}

#[test]
fn rotating_tau_between_projections() {
    // tau(t) = a z-rotation at (0,0,t) is an exact natural transformation
    // from the axis projection to itself; its effect transport fixes the
    // radial line.
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let pi = Arc::new(GroupoidHom::pullback_projection(bundle.clone()).unwrap());
    let tau = NaturalTransformationWitness::new(CongruenceMode::Exact, move |x: &BasePoint<f64>| {
        let t = x.as_flat()?[0];
        Ok(Arrow::Translation { g: rot_z(0.8), x: DVector::from_vec(vec![0.0, 0.0, t]) })
    });
    let points = vec![pt(&[0.7]), pt(&[2.1])];
    let worst = natural_transformation_effect_check(&tau, &pi, &pi, &points).unwrap();
    assert!(worst < 1e-12, "worst {worst}");

    let mut rng = seeded(46);
    let arrows: Vec<_> =
        (0..40).map(|_| bundle.sample_arrow(&mut rng, None).unwrap()).collect();
    let report = natural_congruence_check(&tau, &pi, &pi, &arrows).unwrap();
    assert!(report.max_deviation < 1e-10, "rotations commute with the stabilizer");
}

// ----- orbit map ---------------------------------------------------------------------

#[test]
fn identity_orbit_map_is_bijective() {
    let g = Arc::new(models::so3_r3(tol()));
    let id = GroupoidHom::identity(g.clone());
    let mut rng = seeded(47);
    let pairs: Vec<_> = (0..40)
        .map(|_| (g.sample_base(&mut rng).unwrap(), g.sample_base(&mut rng).unwrap()))
        .collect();
    let codomain: Vec<_> = (0..40).map(|_| g.sample_base(&mut rng).unwrap()).collect();
    let report = orbit_map_check(&id, &pairs, &codomain).unwrap();
    assert!(report.bijective_at_samples());
}

#[test]
fn orbit_map_without_oracle_is_undetermined() {
    let bundle = Arc::new(groupoid_effect_core::groupoid::GroupoidModel::group_bundle(
        "SO(2)xR",
        groupoid_effect_core::group::so2::<f64>(),
        1,
        tol(),
    ));
    let id = GroupoidHom::identity(bundle);
    let report = orbit_map_check(&id, &[], &[]).unwrap();
    assert!(report.undetermined);
}

// ----- transports across base points --------------------------------------------------

#[test]
fn transport_of_connecting_rotation_between_sphere_points() {
    // eps(g) for a non-isotropic arrow between different sphere points is an
    // isometry of the radial lines.
    let g = models::so3_r3(tol());
    let a = DVector::from_vec(vec![1.0, 0.4, -0.2]);
    let conn = g
        .connect(&BasePoint::Flat(a.clone()), &pt(&[0.0, 0.0, (1.0f64 + 0.16 + 0.04).sqrt()]))
        .unwrap();
    let m = arrow_transport(&g, &conn).unwrap();
    assert_eq!(m.matrix.shape(), (1, 1));
    assert!((m.matrix[(0, 0)].abs() - 1.0).abs() < 1e-10);
}

// ----- malformed homs --------------------------------------------------------------

#[test]
fn longitudinal_violation_is_reported_as_not_well_defined() {
    // A shear base map carries the circle direction at (0,1) off the
    // longitudinal line, so no quotient map descends: a malformed hom.
    let plane = Arc::new(models::so2_r2(tol()));
    let shear = GroupoidHom::from_parts(
        "shear",
        groupoid_effect_core::homs::HomKind::Custom,
        plane.clone(),
        plane.clone(),
        |a: &Arrow<f64>| Ok(a.clone()),
        |x: &BasePoint<f64>| {
            let v = x.as_flat()?;
            Ok(BasePoint::flat(vec![v[0], v[0] + v[1]]))
        },
        Some(Arc::new(|_: &DVector<f64>| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])
        })),
        Default::default(),
    );
    let err = transversal_map(&shear, &pt(&[0.0, 1.0]));
    assert!(
        matches!(err, Err(groupoid_effect_core::error::Error::NotWellDefined { .. })),
        "expected longitudinal violation, got {err:?}"
    );
}

// ----- functoriality of homs ----------------------------------------------------------

#[test]
fn scenario_homs_are_functorial_on_samples() {
    let mut rng = seeded(66);
    // Plane embedding into the axis group.
    let upstairs = Arc::new(models::o2_r2(tol()));
    let downstairs = Arc::new(models::axis_flip_r3(tol(), false));
    let embed = GroupoidHom::translation(
        "embed",
        upstairs,
        downstairs,
        |g: &DMatrix<f64>, _: &DVector<f64>| groupoid_effect_core::group::embed_o2_block(g),
        models::plane_embedding_map(),
    );
    let (functor_dev, base_dev) = embed.functoriality_residual(&mut rng, 100).unwrap();
    assert!(functor_dev < 1e-10, "functoriality {functor_dev}");
    assert!(base_dev < 1e-10, "base compatibility {base_dev}");

    // The rotation pair: quotient projection and the downstairs hom.
    let pair = build_rotation_pair_default();
    let (functor_dev, base_dev) = pair.projection.functoriality_residual(&mut rng, 100).unwrap();
    assert!(functor_dev < 1e-9, "projection functoriality {functor_dev}");
    assert!(base_dev < 1e-12);
    let (functor_dev, base_dev) = pair.phi0.functoriality_residual(&mut rng, 100).unwrap();
    assert!(functor_dev < 1e-9, "phi0 functoriality {functor_dev}");
    assert!(base_dev < 1e-12);

    // The pullback projection is a functor by construction; verify on samples.
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma, tol()).unwrap());
    let pi = GroupoidHom::pullback_projection(bundle).unwrap();
    let (functor_dev, base_dev) = pi.functoriality_residual(&mut rng, 100).unwrap();
    assert!(functor_dev < 1e-12, "pi functoriality {functor_dev}");
    assert!(base_dev < 1e-12);
}

fn build_rotation_pair_default() -> RotationPair {
    use groupoid_effect_core::action::FreqSpec;
    groupoid_effect_core::scenario::build_rotation_pair(
        tol(),
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, 1.0] },
        FreqSpec::Poly { coeffs: vec![0.0, -1.0] },
    )
    .unwrap()
}

#[test]
fn hom_base_jacobians_match_finite_differences() {
    let mut rng = seeded(67);
    let pair = build_rotation_pair_default();
    for _ in 0..50 {
        let x = rng::nonzero_vector::<f64>(&mut rng, 3, 0.2);
        let fd = groupoid_effect_core::fd::jacobian_central(
            |p| {
                pair.phi0
                    .base_map(&BasePoint::Flat(p.clone()))
                    .unwrap()
                    .as_flat()
                    .unwrap()
                    .clone()
            },
            &x,
            1e-6,
        );
        let analytic = pair.phi0.base_jacobian(&BasePoint::Flat(x.clone())).unwrap();
        assert!((fd - analytic).norm() < 1e-9);
    }
}

// ----- witness failure paths -----------------------------------------------------------

#[test]
fn corrupted_lift_witness_fails_smooth_fullness() {
    // A lift that returns an arrow over the wrong endpoints must flip the
    // smooth-fullness flag to false rather than undetermined.
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let bundle_for_lift = bundle.clone();
    let pi = GroupoidHom::pullback_projection(bundle.clone())
        .unwrap()
        .with_lift(move |_h, x, _x2| bundle_for_lift.unit(x).ok());
    let mut rng = seeded(80);
    let points: Vec<BasePoint<f64>> = (0..4)
        .map(|_| BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.3, 2.0)]))
        .collect();
    let cls = classify(&pi, &points, &mut rng, &settings()).unwrap();
    assert_eq!(cls.cinfty_full.flag, Flag::False, "{}", cls.cinfty_full.detail);
}

#[test]
fn broken_surjectivity_witness_fails_complete_transversality() {
    let sigma = Arc::new(models::so3_r3_punctured(tol()));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol()).unwrap());
    let pi = GroupoidHom::pullback_projection(bundle.clone())
        .unwrap()
        .with_surjectivity(|_c| None);
    let mut rng = seeded(81);
    let points: Vec<BasePoint<f64>> = (0..4)
        .map(|_| BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.3, 2.0)]))
        .collect();
    let cls = classify(&pi, &points, &mut rng, &settings()).unwrap();
    assert_eq!(cls.completely_transversal.flag, Flag::False);
    assert_eq!(cls.in_e.flag, Flag::False);
}

// ----- f32 lane through the effect engine -----------------------------------------------

#[test]
fn f32_effects_behave() {
    let mut t = ToleranceProfile::<f32>::default();
    t.rank_rel_tol = 1e-5;
    t.map_abs_tol = 1e-4;
    t.fd_abs_tol = 1e-1;
    t.fd_step = 1e-2;
    let g = models::so3_r3::<f32>(t);
    let pole = groupoid_effect_core::groupoid::BasePoint::flat(vec![0.0f32, 0.0, 1.0]);
    let mut rng = seeded(82);
    for _ in 0..20 {
        let a = g.sample_isotropy(&mut rng, &pole).unwrap().unwrap();
        let (flat, dev) = groupoid_effect_core::effect::is_ineffective(&g, &a).unwrap();
        assert!(flat, "pole stabilizer ineffective in f32, dev {dev}");
    }
}
