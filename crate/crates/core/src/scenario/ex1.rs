//! The reflection pair: O(2) on the plane mapped into the z-axis-preserving
//! subgroup of SO(3) on 3-space. The reflection across the x-axis is
//! ineffective upstairs but its image reflects the transversal plane
//! downstairs, so the hom leaves the dotted subcategory.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::effect::{effect, is_ineffective, transversal_space};
use crate::error::Result;
use crate::fractions::skeleton_point;
use crate::group::embed_o2_block;
use crate::groupoid::{Arrow, BasePoint};
use crate::homs::{classify, ineffective_preservation_check, ClassifySettings, Flag, GroupoidHom};
use crate::models;
use crate::report::{CheckRecord, CheckStatus};
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{axioms_check, check_rng, intertwining_scenario_check, jacobian_check, sample_points, status_of};

pub struct Ex1 {
    pub upstairs: Arc<crate::groupoid::GroupoidModel<f64>>,
    pub downstairs: Arc<crate::groupoid::GroupoidModel<f64>>,
    pub hom: Arc<GroupoidHom<f64>>,
}

pub fn build(tol: ToleranceProfile<f64>) -> Ex1 {
    let upstairs = Arc::new(models::o2_r2(tol));
    let downstairs = Arc::new(models::axis_flip_r3(tol, false));
    let hom = Arc::new(GroupoidHom::translation(
        "embed[O(2)->G(z)]",
        upstairs.clone(),
        downstairs.clone(),
        |g: &DMatrix<f64>, _x: &DVector<f64>| embed_o2_block(g),
        models::plane_embedding_map(),
    ));
    Ex1 { upstairs, downstairs, hom }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let ctx = build(tol);
    let samples = config.samples as usize;
    let mut checks = Vec::new();

    let base_pt = BasePoint::flat(vec![1.0, 0.0]);
    let reflection =
        Arrow::Translation { g: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), x: DVector::from_vec(vec![1.0, 0.0]) };

    // Upstairs the reflection acts trivially on the radial direction.
    {
        let (flat, dev) = is_ineffective(&ctx.upstairs, &reflection)?;
        checks.push(
            CheckRecord::new(
                "upstairs_reflection_ineffective",
                "effect of the x-axis reflection at (1,0) is the identity on the radial line",
                status_of(flat && approx_f64(dev) < 1e-8),
            )
            .with_deviation(approx_f64(dev)),
        );
    }

    // Downstairs the image reflects the transversal (e1, e3)-plane.
    {
        let image = ctx.hom.apply(&reflection)?;
        let e = effect(&ctx.downstairs, &image)?;
        let (flat, dev) = is_ineffective(&ctx.downstairs, &image)?;
        let x3 = BasePoint::flat(vec![1.0, 0.0, 0.0]);
        let ts = transversal_space(&ctx.downstairs, &x3)?;
        let flip = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        let expected = ts.quotient.complement.transpose() * flip * &ts.quotient.complement;
        let matrix_dev = (&e.map.matrix - expected).norm();
        checks.push(
            CheckRecord::new(
                "downstairs_image_effective",
                "image arrow reflects the 2-dim transversal space at (1,0,0)",
                status_of(!flat && matrix_dev < 1e-8 && ts.quotient.dim() == 2),
            )
            .with_deviation(matrix_dev)
            .with_witness(format!("deviation from identity {:.3e}", approx_f64(dev))),
        );
    }

    // The hom maps an ineffective arrow to an effective one: outside the
    // dotted subcategory at (1,0).
    {
        let mut rng = check_rng(config, "ex1.dotted");
        let report =
            ineffective_preservation_check(&ctx.hom, std::slice::from_ref(&base_pt), &mut rng, 64)?;
        checks.push(
            CheckRecord::new(
                "hom_outside_dotted_category",
                "an ineffective isotropic arrow maps to an effective one at (1,0)",
                status_of(!report.in_dotted_at_samples()),
            )
            .with_deviation(report.max_transferred_deviation)
            .with_witness(format!(
                "{} violations among {} isotropy samples",
                report.dotted_violations.len(),
                report.cases
            )),
        );
    }

    // Classification: not transversal (the plane misses the vertical
    // directions downstairs), injective transversal maps, outside the dotted
    // subcategory.
    {
        let mut rng = check_rng(config, "ex1.classify");
        let mut points = sample_points(&ctx.upstairs, 6, &mut rng)?;
        points.push(base_pt.clone());
        let cls = classify(&ctx.hom, &points, &mut rng, &ClassifySettings::default())?;
        checks.push(
            CheckRecord::new(
                "classification_flags",
                "hom is neither transversal nor inside the dotted subcategory",
                status_of(
                    cls.transversal.flag == Flag::False
                        && cls.in_dotted_category.flag == Flag::False,
                ),
            )
            .with_witness(format!("transversal: {:?}", cls.transversal.flag))
            .with_witness(format!("in_dotted: {:?}", cls.in_dotted_category.flag))
            .with_witness(format!("intertwining residual {:.3e}", cls.intertwining_residual)),
        );
    }

    // Intertwining holds for every hom, this one included.
    {
        let mut rng = check_rng(config, "ex1.intertwining");
        let mut points = sample_points(&ctx.upstairs, 9, &mut rng)?;
        points.push(base_pt.clone());
        checks.push(intertwining_scenario_check(
            "intertwining",
            &ctx.hom,
            &points,
            (samples / points.len()).max(50),
            1e-8,
            &mut rng,
        )?);
    }

    // Effect functoriality on the upstairs isotropy at (1,0).
    {
        let mut rng = check_rng(config, "ex1.functoriality");
        let mut pairs = Vec::new();
        for _ in 0..200 {
            let a = ctx.upstairs.sample_isotropy(&mut rng, &base_pt)?.unwrap();
            let b = ctx.upstairs.sample_isotropy(&mut rng, &base_pt)?.unwrap();
            pairs.push((a, b));
        }
        let worst = crate::effect::effect_functoriality_check(&ctx.upstairs, &pairs)?;
        checks.push(
            CheckRecord::new(
                "effect_functoriality_upstairs",
                "effect of a composite equals the composite of effects",
                status_of(worst < 1e-8),
            )
            .with_deviation(worst)
            .with_witness("200 isotropy pairs at (1,0)"),
        );
    }

    // Structure axioms of both groupoids.
    {
        let mut rng = check_rng(config, "ex1.axioms");
        checks.push(axioms_check("axioms_upstairs", &ctx.upstairs, samples.min(1000), 1e-8, &mut rng)?);
        checks.push(axioms_check("axioms_downstairs", &ctx.downstairs, samples.min(1000), 1e-8, &mut rng)?);
    }

    // First-order data against finite differences.
    {
        let mut rng = check_rng(config, "ex1.jacobians");
        let up_group = crate::group::o2::<f64>();
        let up_action = crate::action::linear_action::<f64>(2);
        checks.push(jacobian_check(
            "jacobian_validation_upstairs",
            &up_group,
            &up_action,
            |rng| crate::rng::normal_vector(rng, 2),
            200,
            &mut rng,
            &tol,
        ));
        let down_group = crate::group::axis_flip_group::<f64>();
        let down_action = crate::action::linear_action::<f64>(3);
        checks.push(jacobian_check(
            "jacobian_validation_downstairs",
            &down_group,
            &down_action,
            |rng| crate::rng::normal_vector(rng, 3),
            200,
            &mut rng,
            &tol,
        ));
    }

    // Skeleton datum of the hom at (1,0).
    {
        let mut rng = check_rng(config, "ex1.skeleton");
        let mut iso = Vec::new();
        for _ in 0..32 {
            if let Some(g) = ctx.upstairs.sample_isotropy(&mut rng, &base_pt)? {
                iso.push(g);
            }
        }
        let record = match skeleton_point(&ctx.hom, &base_pt, &iso) {
            Ok(p) => {
                let ok = p.lambda.matrix.shape() == (2, 1) && p.equivariance_residual < 1e-8;
                CheckRecord::new(
                    "skeleton_point",
                    "skeleton datum at (1,0): 1-dim quotient mapping into the 2-dim quotient",
                    status_of(ok),
                )
                .with_deviation(p.equivariance_residual)
                .with_witness(format!("theta table size {}", p.theta_table.len()))
            }
            Err(e) => CheckRecord::new(
                "skeleton_point",
                "skeleton datum at (1,0): 1-dim quotient mapping into the 2-dim quotient",
                CheckStatus::Fail,
            )
            .with_witness(format!("{e}")),
        };
        checks.push(record);
    }

    Ok(checks)
}
