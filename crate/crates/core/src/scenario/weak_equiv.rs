//! The circle-bundle presentation of punctured 3-space: the pullback of the
//! rotation groupoid along the positive z-axis is a weak equivalence, and the
//! square-completion axiom runs against it with the reflection inclusion.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::effect::is_ineffective;
use crate::error::Result;
use crate::fractions::{
    axiom_ii_instance, compose_spans, model_isomorphism_check, skeleton_point, Span,
};
use crate::group::embed_o2_block;
use crate::groupoid::{BasePoint, GroupoidModel};
use crate::homs::{
    classify, transversal_map, weak_pullback_with_projections, ClassifySettings, GroupoidHom,
};
use crate::models;
use crate::report::{CheckRecord, CheckStatus};
use crate::rng::{self};
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{axioms_check, check_rng, intertwining_scenario_check, jacobian_check, status_of};

pub struct WeakEquiv {
    pub sigma: Arc<GroupoidModel<f64>>,
    pub bundle: Arc<GroupoidModel<f64>>,
    pub pi: Arc<GroupoidHom<f64>>,
    pub psi_o2: Arc<GroupoidHom<f64>>,
    pub psi_so2: Arc<GroupoidHom<f64>>,
    pub plane_o2: Arc<GroupoidModel<f64>>,
    pub plane_so2: Arc<GroupoidModel<f64>>,
}

pub fn build(tol: ToleranceProfile<f64>) -> Result<WeakEquiv> {
    let sigma = Arc::new(models::so3_r3_punctured(tol));
    let bundle = Arc::new(models::axis_pullback(sigma.clone(), tol)?);
    let sigma_for_witness = sigma.clone();
    let pi = Arc::new(
        GroupoidHom::pullback_projection(bundle.clone())?.with_surjectivity(move |c| {
            let cv = c.as_flat().ok()?;
            let r = cv.norm();
            if r <= 1e-9 {
                return None;
            }
            let axis = BasePoint::flat(vec![0.0, 0.0, r]);
            let k = sigma_for_witness.connect(&axis, c)?;
            Some((BasePoint::flat(vec![r]), k))
        }),
    );
    let plane_o2 = Arc::new(models::o2_r2_punctured(tol));
    let plane_so2 = Arc::new(models::so2_r2_punctured(tol));
    let psi_o2 = Arc::new(GroupoidHom::translation(
        "embed[O(2)->SO(3)]",
        plane_o2.clone(),
        sigma.clone(),
        |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(g),
        models::plane_embedding_map(),
    ));
    let psi_so2 = Arc::new(GroupoidHom::translation(
        "embed[SO(2)->SO(3)]",
        plane_so2.clone(),
        sigma.clone(),
        |g: &DMatrix<f64>, _: &DVector<f64>| embed_o2_block(g),
        models::plane_embedding_map(),
    ));
    Ok(WeakEquiv { sigma, bundle, pi, psi_o2, psi_so2, plane_o2, plane_so2 })
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let ctx = build(tol)?;
    let samples = config.samples as usize;
    let mut checks = Vec::new();
    let settings = ClassifySettings::default();

    // The projection classifies as a weak equivalence.
    {
        let mut rng = check_rng(config, "we.classify");
        let points: Vec<BasePoint<f64>> = (0..8)
            .map(|_| BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]))
            .collect();
        let cls = classify(&ctx.pi, &points, &mut rng, &settings)?;
        checks.push(
            CheckRecord::new(
                "pi_weak_equivalence",
                "projection of the axis pullback is a certified weak equivalence",
                status_of(cls.weak_equivalence() && cls.in_e()),
            )
            .with_witness(format!("completely_transversal: {:?}", cls.completely_transversal.flag))
            .with_witness(format!("cinfty_full: {:?}", cls.cinfty_full.flag))
            .with_witness(format!("faithfully_transversal: {:?}", cls.faithfully_transversal.flag))
            .with_witness(format!("intertwining residual {:.3e}", cls.intertwining_residual)),
        );
    }

    // The transversal map is bijective with small condition number along the ray.
    {
        let mut rng = check_rng(config, "we.bijective");
        let mut worst_cond = 0.0f64;
        let mut ok = true;
        for _ in 0..100 {
            let t = rng::uniform::<f64>(&mut rng, 0.2, 3.0);
            let m = transversal_map(&ctx.pi, &BasePoint::flat(vec![t]))?;
            ok &= m.matrix.nrows() == 1 && m.matrix.ncols() == 1;
            let cond = approx_f64(m.condition_number());
            worst_cond = worst_cond.max(cond);
        }
        checks.push(
            CheckRecord::new(
                "transversal_bijectivity",
                "transversal map of the projection is bijective with bounded condition number",
                status_of(ok && worst_cond < 10.0),
            )
            .with_deviation(worst_cond)
            .with_witness("100 sampled ray points"),
        );
    }

    // Ineffectivity transfers both ways across the projection.
    {
        let mut rng = check_rng(config, "we.ineffectivity");
        let mut agree = true;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let t = rng::uniform::<f64>(&mut rng, 0.2, 3.0);
            let x = BasePoint::flat(vec![t]);
            // Upstairs to downstairs.
            if let Some(up) = ctx.bundle.sample_isotropy(&mut rng, &x)? {
                let (u, du) = is_ineffective(&ctx.bundle, &up)?;
                let (d, dd) = is_ineffective(&ctx.sigma, &ctx.pi.apply(&up)?)?;
                agree &= u == d;
                worst = worst.max(approx_f64(du)).max(approx_f64(dd));
            }
            // Downstairs isotropy lifted upstairs through the fibered triple.
            let axis = BasePoint::flat(vec![0.0, 0.0, t]);
            if let Some(down) = ctx.sigma.sample_isotropy(&mut rng, &axis)? {
                let lifted = crate::groupoid::Arrow::Pullback {
                    target_pt: DVector::from_vec(vec![t]),
                    inner: Box::new(down.clone()),
                    source_pt: DVector::from_vec(vec![t]),
                };
                ctx.bundle.validate_arrow(&lifted)?;
                let (u, _) = is_ineffective(&ctx.bundle, &lifted)?;
                let (d, _) = is_ineffective(&ctx.sigma, &down)?;
                agree &= u == d;
            }
        }
        checks.push(
            CheckRecord::new(
                "ineffectivity_equivalence",
                "isotropic arrows are ineffective upstairs exactly when their images are",
                status_of(agree && worst < 1e-8),
            )
            .with_deviation(worst)
            .with_witness("100 samples in each direction"),
        );
    }

    // Orbit spaces compare bijectively: radii against spheres.
    {
        let mut rng = check_rng(config, "we.orbits");
        let mut pairs = Vec::new();
        for _ in 0..100 {
            pairs.push((
                BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]),
                BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]),
            ));
        }
        let codomain_points: Vec<BasePoint<f64>> =
            (0..100).map(|_| ctx.sigma.sample_base(&mut rng).unwrap()).collect();
        let report = crate::homs::orbit_map_check(&ctx.pi, &pairs, &codomain_points)?;
        checks.push(
            CheckRecord::new(
                "orbit_bijectivity",
                "the induced map between orbit spaces is bijective at samples",
                status_of(report.bijective_at_samples()),
            )
            .with_witness(format!(
                "{} pairs, {} codomain points",
                report.injectivity_pairs, report.surjectivity_points
            )),
        );
    }

    // Square-completion instance: weak pullback fuzz, certified projection,
    // ineffectivity preservation of the other projection.
    {
        let mut rng = check_rng(config, "we.axiom2");
        let report = axiom_ii_instance(
            ctx.psi_o2.clone(),
            ctx.pi.clone(),
            &mut rng,
            samples.max(1000),
            7,
            &settings,
        )?;
        let worst = report.wp_axioms.worst();
        checks.push(
            CheckRecord::new(
                "axiom_ii_wp_fuzz",
                "weak pullback structure axioms hold on random triples",
                status_of(worst < 1e-8),
            )
            .with_deviation(worst)
            .with_witness(format!("{} triples", report.wp_axioms.samples)),
        );
        checks.push(
            CheckRecord::new(
                "axiom_ii_pr_delta_in_e",
                "projection onto the reflection side lies in the inverted class",
                status_of(report.pr_delta.in_e()),
            )
            .with_witness(format!("cinfty_full: {:?}", report.pr_delta.cinfty_full.flag))
            .with_witness(format!(
                "completely_transversal: {:?}",
                report.pr_delta.completely_transversal.flag
            )),
        );
        checks.push(
            CheckRecord::new(
                "axiom_ii_pr_gamma_preserves",
                "the other projection preserves ineffective isotropy at samples",
                status_of(report.pr_gamma_preservation.in_dotted_at_samples()),
            )
            .with_deviation(report.pr_gamma_preservation.max_transferred_deviation)
            .with_witness(format!(
                "{} isotropy samples ({} nontrivial)",
                report.pr_gamma_preservation.cases, report.pr_gamma_preservation.nontrivial_cases
            )),
        );
    }

    // Cross-check of the two effect routes through a weak pullback arrow.
    {
        let mut rng = check_rng(config, "we.crosscheck");
        let (wp, _, _) = weak_pullback_with_projections(
            ctx.psi_o2.clone(),
            ctx.pi.clone(),
            &mut rng,
            &settings,
        )?;
        let mut arrows = Vec::new();
        for _ in 0..50 {
            let z = wp.sample_base(&mut rng)?;
            if let Some(a) = wp.sample_isotropy(&mut rng, &z)? {
                arrows.push(a);
            }
        }
        let worst = crate::fractions::weak_pullback_effect_crosscheck(&wp, &arrows)?;
        checks.push(
            CheckRecord::new(
                "wp_effect_crosscheck",
                "effect computed through either component agrees after conjugation by the connector",
                status_of(worst < 1e-8),
            )
            .with_deviation(worst)
            .with_witness(format!("{} isotropic triples", arrows.len())),
        );
    }

    // Right-fraction composition: the rotation inclusion composed against the
    // inverse of the projection.
    {
        let mut rng = check_rng(config, "we.spans");
        let outer = Span::new(
            ctx.psi_so2.clone(),
            Arc::new(GroupoidHom::identity(ctx.plane_so2.clone())),
            &mut rng,
            6,
            &settings,
        )?;
        let inner = Span::new(
            Arc::new(GroupoidHom::identity(ctx.bundle.clone())),
            ctx.pi.clone(),
            &mut rng,
            6,
            &settings,
        )?;
        let record = match compose_spans(&outer, &inner, &mut rng, 6, &settings) {
            Ok(span) => {
                let fuzz = crate::groupoid::check_groupoid_axioms(&span.apex, 300, &mut rng)?;
                CheckRecord::new(
                    "span_composition",
                    "composition of right fractions through the weak pullback stays a right fraction",
                    status_of(span.right_classification.in_e() && fuzz.worst() < 1e-8),
                )
                .with_deviation(fuzz.worst())
                .with_witness(format!("apex {}", span.apex.name))
            }
            Err(e) => CheckRecord::new(
                "span_composition",
                "composition of right fractions through the weak pullback stays a right fraction",
                CheckStatus::Fail,
            )
            .with_witness(format!("{e}")),
        };
        checks.push(record);

        // Identity spans compose with themselves: the multiplicative axiom.
        let id_span = Span::new(
            Arc::new(GroupoidHom::identity(ctx.bundle.clone())),
            Arc::new(GroupoidHom::identity(ctx.bundle.clone())),
            &mut rng,
            5,
            &settings,
        )?;
        let record = match compose_spans(&id_span, &id_span, &mut rng, 5, &settings) {
            Ok(span) => CheckRecord::new(
                "axiom_i_identity_span",
                "identity spans are accepted and compose within the inverted class",
                status_of(span.right_classification.in_e()),
            ),
            Err(e) => CheckRecord::new(
                "axiom_i_identity_span",
                "identity spans are accepted and compose within the inverted class",
                CheckStatus::Fail,
            )
            .with_witness(format!("{e}")),
        };
        checks.push(record);
    }

    // Skeleton datum of the projection at t = 1.
    {
        let mut rng = check_rng(config, "we.skeleton");
        let x = BasePoint::flat(vec![1.0]);
        let mut iso = Vec::new();
        for _ in 0..20 {
            if let Some(g) = ctx.bundle.sample_isotropy(&mut rng, &x)? {
                iso.push(g);
            }
        }
        let record = match skeleton_point(&ctx.pi, &x, &iso) {
            Ok(p) => {
                let lambda_ok = p.lambda.matrix.shape() == (1, 1)
                    && (p.lambda.matrix[(0, 0)].abs() - 1.0).abs() < 1e-9;
                let table_trivial = p.theta_table.len() == 1;
                CheckRecord::new(
                    "skeleton_pi",
                    "skeleton datum of the projection: unit transversal map, identity isotropy table",
                    status_of(lambda_ok && table_trivial && p.equivariance_residual < 1e-8),
                )
                .with_deviation(p.equivariance_residual)
                .with_witness(format!("table size {}", p.theta_table.len()))
            }
            Err(e) => CheckRecord::new(
                "skeleton_pi",
                "skeleton datum of the projection: unit transversal map, identity isotropy table",
                CheckStatus::Fail,
            )
            .with_witness(format!("{e}")),
        };
        checks.push(record);
    }

    // Effective-model comparison across the projection.
    {
        let mut rng = check_rng(config, "we.modeliso");
        let points: Vec<BasePoint<f64>> = (0..5)
            .map(|_| BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]))
            .collect();
        let report = model_isomorphism_check(&ctx.pi, &points, &mut rng, 16)?;
        let max_cond =
            report.points.iter().map(|p| p.condition_number).fold(0.0f64, f64::max);
        checks.push(
            CheckRecord::new(
                "model_isomorphism",
                "transversal map invertible and sampled effective models in bijection",
                status_of(report.passes()),
            )
            .with_deviation(max_cond)
            .with_witness(format!("{} points", report.points.len())),
        );
    }

    // Intertwining for the scenario homs.
    {
        let mut rng = check_rng(config, "we.intertwining");
        let ray_points: Vec<BasePoint<f64>> = (0..8)
            .map(|_| BasePoint::flat(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]))
            .collect();
        checks.push(intertwining_scenario_check(
            "intertwining_pi",
            &ctx.pi,
            &ray_points,
            (samples / 8).max(63),
            1e-8,
            &mut rng,
        )?);
        let plane_points: Vec<BasePoint<f64>> = (0..8)
            .map(|_| ctx.plane_o2.sample_base(&mut rng).unwrap())
            .collect();
        checks.push(intertwining_scenario_check(
            "intertwining_psi",
            &ctx.psi_o2,
            &plane_points,
            (samples / 8).max(63),
            1e-8,
            &mut rng,
        )?);
    }

    // Structure axioms of the bundle and first-order data of the target.
    {
        let mut rng = check_rng(config, "we.axioms");
        checks.push(axioms_check("axioms_bundle", &ctx.bundle, samples.min(600), 1e-8, &mut rng)?);
    }
    {
        let mut rng = check_rng(config, "we.jacobians");
        checks.push(jacobian_check(
            "jacobian_validation",
            &crate::group::so3::<f64>(),
            &crate::action::linear_action::<f64>(3),
            |rng| rng::nonzero_vector(rng, 3, 0.2),
            200,
            &mut rng,
            &tol,
        ));
        // The axis curve's analytic Jacobian against finite differences.
        let map = models::axis_curve_map::<f64>();
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let x = DVector::from_vec(vec![rng::uniform::<f64>(&mut rng, 0.2, 3.0)]);
            let fd = crate::fd::jacobian_central(|p| (map.map)(p), &x, tol.fd_step);
            worst = worst.max(approx_f64((fd - (map.jacobian)(&x)).norm()));
        }
        checks.push(
            CheckRecord::new(
                "base_map_jacobian",
                "analytic Jacobian of the axis curve agrees with central finite differences",
                status_of(worst < approx_f64(tol.fd_abs_tol)),
            )
            .with_deviation(worst)
            .with_witness("200 evaluation points"),
        );
    }

    Ok(checks)
}
