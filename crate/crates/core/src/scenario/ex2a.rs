//! Constant-pole homomorphisms SO(2)/R^2 -> SO(3)/R^3: composing the fiber
//! rotation with an angle-multiplying endomorphism changes nothing up to
//! natural congruence (the pole stabilizer is ineffective) but admits no
//! exact natural isomorphism (the stabilizer is abelian).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::group::{embed_o2_block, rot2};
use crate::groupoid::{Arrow, BasePoint};
use crate::homs::{
    classify, congruence_obstruction, natural_congruence_check, orbit_map_check, ClassifySettings,
    CongruenceMode, Flag, GroupoidHom, NaturalTransformationWitness,
};
use crate::models;
use crate::report::CheckRecord;
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{axioms_check, check_rng, intertwining_scenario_check, jacobian_check, sample_points, status_of};

pub struct Ex2a {
    pub upstairs: Arc<crate::groupoid::GroupoidModel<f64>>,
    pub downstairs: Arc<crate::groupoid::GroupoidModel<f64>>,
    pub phi: Arc<GroupoidHom<f64>>,
    pub psi: Arc<GroupoidHom<f64>>,
}

fn plane_angle(g: &DMatrix<f64>) -> f64 {
    g[(1, 0)].atan2(g[(0, 0)])
}

pub fn build(tol: ToleranceProfile<f64>, k: i64) -> Ex2a {
    let upstairs = Arc::new(models::so2_r2(tol));
    let downstairs = Arc::new(models::so3_r3(tol));
    let phi = Arc::new(GroupoidHom::translation(
        "pole[k=1]",
        upstairs.clone(),
        downstairs.clone(),
        |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(g),
        models::constant_pole_map(),
    ));
    let psi = Arc::new(GroupoidHom::translation(
        format!("pole[k={k}]"),
        upstairs.clone(),
        downstairs.clone(),
        move |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(&rot2(k as f64 * plane_angle(g))),
        models::constant_pole_map(),
    ));
    Ex2a { upstairs, downstairs, phi, psi }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let k = config.param_i64("k", 3)?;
    if k == 1 {
        return Err(Error::Config("k = 1 makes the two homs equal; pick k != 1".into()));
    }
    let ctx = build(tol, k);
    let samples = config.samples as usize;
    let mut checks = Vec::new();

    // Natural congruence with the unit-valued transformation: the connecting
    // arrows are pole rotations, whose effect on the radial line is exactly 1.
    {
        let mut rng = check_rng(config, "ex2a.congruence");
        let mut arrows = Vec::new();
        for _ in 0..samples.min(400) {
            arrows.push(ctx.upstairs.sample_arrow(&mut rng, None)?);
        }
        let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &ctx.phi);
        let report = natural_congruence_check(&tau, &ctx.phi, &ctx.psi, &arrows)?;
        checks.push(
            CheckRecord::new(
                "congruence_unit_tau",
                "unit-valued transformation is a natural congruence (pole isotropy is ineffective)",
                status_of(report.passes(approx_f64(tol.map_abs_tol))),
            )
            .with_deviation(report.max_deviation)
            .with_witness(format!("{} arrows", report.arrows_checked)),
        );
    }

    // Exact naturality fails: over the abelian pole stabilizer, an exact
    // intertwiner would force the two rotations to agree.
    {
        let mut rng = check_rng(config, "ex2a.obstruction");
        let candidates = models::pole_stabilizer_circle(1.0f64, 360);
        let mut found_any = false;
        let mut best = f64::INFINITY;
        let mut cases = 0usize;
        for _ in 0..10 {
            let x = ctx.upstairs.sample_base(&mut rng)?;
            let beta = crate::rng::uniform::<f64>(&mut rng, 0.3, 5.0);
            let g = Arrow::Translation { g: rot2(beta), x: x.as_flat()?.clone() };
            let outcome = congruence_obstruction(
                &ctx.phi,
                &ctx.psi,
                &x,
                &g,
                &candidates,
                CongruenceMode::Exact,
            )?;
            cases += 1;
            match outcome {
                crate::homs::ObstructionOutcome::WitnessFound { .. } => found_any = true,
                crate::homs::ObstructionOutcome::NoWitness { best_deviation } => {
                    best = best.min(best_deviation)
                }
                crate::homs::ObstructionOutcome::Undetermined => {}
            }
        }
        checks.push(
            CheckRecord::new(
                "exact_obstruction_absent",
                "no exact intertwiner among 360 pole stabilizer candidates at 10 points",
                status_of(!found_any && cases == 10),
            )
            .with_deviation(if best.is_finite() { best } else { 0.0 })
            .with_witness("closest candidate deviation recorded"),
        );
    }

    // The abelian closed form of the same obstruction: candidates commute
    // with everything, so exact naturality forces phi(g) = psi(g).
    {
        let mut rng = check_rng(config, "ex2a.closedform");
        let mut min_gap = f64::INFINITY;
        for _ in 0..50 {
            let x = ctx.upstairs.sample_base(&mut rng)?;
            let beta = crate::rng::uniform::<f64>(&mut rng, 0.3, 5.0);
            let g = Arrow::Translation { g: rot2(beta), x: x.as_flat()?.clone() };
            let gap = ctx
                .downstairs
                .arrow_dist(&ctx.phi.apply(&g)?, &ctx.psi.apply(&g)?)?;
            min_gap = min_gap.min(approx_f64(gap));
        }
        checks.push(
            CheckRecord::new(
                "abelian_closed_form_gap",
                "the two images differ as arrows at every sampled angle",
                status_of(min_gap > approx_f64(tol.map_abs_tol)),
            )
            .with_deviation(min_gap),
        );
    }

    // In exact mode the unit transformation is obstructed with the full
    // rotation gap.
    {
        let mut rng = check_rng(config, "ex2a.exactmode");
        let mut arrows = Vec::new();
        for _ in 0..100 {
            arrows.push(ctx.upstairs.sample_arrow(&mut rng, None)?);
        }
        let tau = NaturalTransformationWitness::units(CongruenceMode::Exact, &ctx.phi);
        let report = natural_congruence_check(&tau, &ctx.phi, &ctx.psi, &arrows)?;
        checks.push(
            CheckRecord::new(
                "exact_mode_fails",
                "unit-valued transformation is not an exact natural isomorphism",
                status_of(report.max_deviation > approx_f64(tol.map_abs_tol)),
            )
            .with_deviation(report.max_deviation),
        );
    }

    // Flags: the constant base map has zero transversal rank into the radial
    // line, so the hom is neither transversal nor faithfully transversal; it
    // does stay in the dotted subcategory.
    {
        let mut rng = check_rng(config, "ex2a.classify");
        let points = sample_points(&ctx.upstairs, 8, &mut rng)?;
        let cls = classify(&ctx.phi, &points, &mut rng, &ClassifySettings::default())?;
        checks.push(
            CheckRecord::new(
                "classification_flags",
                "zero transversal map: not transversal, not faithfully transversal, in the dotted subcategory",
                status_of(
                    cls.transversal.flag == Flag::False
                        && cls.faithfully_transversal.flag == Flag::False
                        && cls.in_dotted_category.flag == Flag::True,
                ),
            )
            .with_witness(format!("transversal: {:?}", cls.transversal.flag))
            .with_witness(format!("faithfully_transversal: {:?}", cls.faithfully_transversal.flag))
            .with_witness(format!("in_dotted: {:?}", cls.in_dotted_category.flag)),
        );
    }

    // Orbit comparison: everything upstairs maps into the pole's sphere, so
    // orbit injectivity fails as expected for a non-full hom.
    {
        let mut rng = check_rng(config, "ex2a.orbits");
        let mut pairs = Vec::new();
        for _ in 0..100 {
            let a = ctx.upstairs.sample_base(&mut rng)?;
            let b = ctx.upstairs.sample_base(&mut rng)?;
            pairs.push((a, b));
        }
        let report = orbit_map_check(&ctx.phi, &pairs, &[])?;
        checks.push(
            CheckRecord::new(
                "orbit_injectivity_fails",
                "distinct orbits upstairs collapse onto the pole sphere downstairs",
                status_of(report.injectivity_violations > 0),
            )
            .with_witness(format!(
                "{} violations in {} pairs",
                report.injectivity_violations, report.injectivity_pairs
            )),
        );
    }

    // Effect functoriality in the codomain at the pole and at the origin.
    {
        let mut rng = check_rng(config, "ex2a.functoriality");
        for (label, pt) in [
            ("pole", BasePoint::flat(vec![0.0, 0.0, 1.0])),
            ("origin", BasePoint::flat(vec![0.0, 0.0, 0.0])),
        ] {
            let mut pairs = Vec::new();
            for _ in 0..1000 {
                let a = ctx.downstairs.sample_isotropy(&mut rng, &pt)?.unwrap();
                let b = ctx.downstairs.sample_isotropy(&mut rng, &pt)?.unwrap();
                pairs.push((a, b));
            }
            let worst = crate::effect::effect_functoriality_check(&ctx.downstairs, &pairs)?;
            checks.push(
                CheckRecord::new(
                    format!("effect_functoriality_{label}"),
                    "effect of a composite equals the composite of effects",
                    status_of(worst < 1e-8),
                )
                .with_deviation(worst)
                .with_witness("1000 composable isotropic pairs"),
            );
        }
    }

    // Intertwining for both homs, including the origin where the upstairs
    // stabilizer is the whole circle group.
    {
        let mut rng = check_rng(config, "ex2a.intertwining");
        let mut points = sample_points(&ctx.upstairs, 8, &mut rng)?;
        points.push(BasePoint::flat(vec![0.0, 0.0]));
        for (name, hom) in [("intertwining_phi", &ctx.phi), ("intertwining_psi", &ctx.psi)] {
            checks.push(intertwining_scenario_check(
                name,
                hom,
                &points,
                (samples / points.len()).max(56),
                1e-8,
                &mut rng,
            )?);
        }
    }

    // Axioms and first-order data.
    {
        let mut rng = check_rng(config, "ex2a.axioms");
        checks.push(axioms_check("axioms_upstairs", &ctx.upstairs, samples.min(800), 1e-8, &mut rng)?);
        checks.push(axioms_check("axioms_downstairs", &ctx.downstairs, samples.min(800), 1e-8, &mut rng)?);
    }
    {
        let mut rng = check_rng(config, "ex2a.jacobians");
        checks.push(jacobian_check(
            "jacobian_validation",
            &crate::group::so3::<f64>(),
            &crate::action::linear_action::<f64>(3),
            |rng| crate::rng::normal_vector(rng, 3),
            200,
            &mut rng,
            &tol,
        ));
    }

    Ok(checks)
}
