//! Trivial circle bundle over the line: every arrow is isotropic with
//! identity effect, and any two identity-covering endomorphisms are
//! naturally congruent through units.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::config::ScenarioConfig;
use crate::effect::{effective_infinitesimal_model, is_ineffective};
use crate::error::{Error, Result};
use crate::group::rot2;
use crate::groupoid::{Arrow, BasePoint, GroupoidModel};
use crate::homs::{
    natural_congruence_check, CongruenceMode, GroupoidHom, HomKind, NaturalTransformationWitness,
    Witnesses,
};
use crate::report::CheckRecord;
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{axioms_check, check_rng, intertwining_scenario_check, sample_points, status_of};

pub struct Ex3 {
    pub bundle: Arc<GroupoidModel<f64>>,
    pub endo_a: Arc<GroupoidHom<f64>>,
    pub endo_b: Arc<GroupoidHom<f64>>,
}

fn fiber_angle(g: &DMatrix<f64>) -> f64 {
    g[(1, 0)].atan2(g[(0, 0)])
}

/// Fiberwise angle-multiplying endomorphism covering the identity.
fn winding_endo(bundle: Arc<GroupoidModel<f64>>, k: i64) -> GroupoidHom<f64> {
    GroupoidHom::from_parts(
        format!("wind[{k}]"),
        HomKind::Custom,
        bundle.clone(),
        bundle,
        move |a: &Arrow<f64>| match a {
            Arrow::Bundle { g, x } => {
                Ok(Arrow::Bundle { g: rot2(k as f64 * fiber_angle(g)), x: x.clone() })
            }
            _ => Err(Error::Typing("bundle arrow expected".into())),
        },
        |x: &BasePoint<f64>| Ok(x.clone()),
        Some(std::sync::Arc::new(|_: &nalgebra::DVector<f64>| DMatrix::identity(1, 1))),
        Witnesses::default(),
    )
}

pub fn build(tol: ToleranceProfile<f64>, k_a: i64, k_b: i64) -> Ex3 {
    let bundle =
        Arc::new(GroupoidModel::group_bundle("SO(2)xR", crate::group::so2::<f64>(), 1, tol));
    let endo_a = Arc::new(winding_endo(bundle.clone(), k_a));
    let endo_b = Arc::new(winding_endo(bundle.clone(), k_b));
    Ex3 { bundle, endo_a, endo_b }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let k_a = config.param_i64("k_a", 2)?;
    let k_b = config.param_i64("k_b", 5)?;
    let ctx = build(tol, k_a, k_b);
    let samples = config.samples as usize;
    let mut checks = Vec::new();

    // Every sampled arrow is ineffective, with deviation exactly zero.
    {
        let mut rng = check_rng(config, "ex3.ineffective");
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let a = ctx.bundle.sample_arrow(&mut rng, None)?;
            let (flat, dev) = is_ineffective(&ctx.bundle, &a)?;
            if !flat {
                worst = worst.max(1.0);
            }
            worst = worst.max(approx_f64(dev));
        }
        checks.push(
            CheckRecord::new(
                "all_arrows_ineffective",
                "bundle arrows fix the base pointwise, so their effect is trivially the identity",
                status_of(worst < 1e-10),
            )
            .with_deviation(worst)
            .with_witness("1000 sampled arrows"),
        );
    }

    // Identity-covering endomorphisms are naturally congruent through units.
    {
        let mut rng = check_rng(config, "ex3.congruence");
        let mut arrows = Vec::new();
        for _ in 0..samples.min(300) {
            arrows.push(ctx.bundle.sample_arrow(&mut rng, None)?);
        }
        let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &ctx.endo_a);
        let report = natural_congruence_check(&tau, &ctx.endo_a, &ctx.endo_b, &arrows)?;
        checks.push(
            CheckRecord::new(
                "endos_congruent",
                "any two identity-covering endomorphisms are naturally congruent through units",
                status_of(report.passes(approx_f64(tol.map_abs_tol))),
            )
            .with_deviation(report.max_deviation)
            .with_witness(format!("winding numbers {k_a} and {k_b}")),
        );
    }

    // Endomorphisms against the identity hom.
    {
        let mut rng = check_rng(config, "ex3.identity");
        let identity = Arc::new(GroupoidHom::identity(ctx.bundle.clone()));
        let mut arrows = Vec::new();
        for _ in 0..150 {
            arrows.push(ctx.bundle.sample_arrow(&mut rng, None)?);
        }
        let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &ctx.endo_a);
        let report = natural_congruence_check(&tau, &ctx.endo_a, &identity, &arrows)?;
        checks.push(
            CheckRecord::new(
                "endo_congruent_to_identity",
                "identity-covering endomorphism is naturally congruent to the identity",
                status_of(report.passes(approx_f64(tol.map_abs_tol))),
            )
            .with_deviation(report.max_deviation),
        );
    }

    // Fiberwise structure fuzz.
    {
        let mut rng = check_rng(config, "ex3.axioms");
        checks.push(axioms_check("axioms_bundle", &ctx.bundle, samples.min(1000), 1e-12, &mut rng)?);
    }

    // Sampled effective model is the single identity class.
    {
        let mut rng = check_rng(config, "ex3.model");
        let x = ctx.bundle.sample_base(&mut rng)?;
        let mut iso = Vec::new();
        for _ in 0..30 {
            if let Some(g) = ctx.bundle.sample_isotropy(&mut rng, &x)? {
                iso.push(g);
            }
        }
        let model = effective_infinitesimal_model(&ctx.bundle, &x, &iso)?;
        checks.push(
            CheckRecord::new(
                "effective_model_trivial",
                "the sampled effective isotropy model collapses to the identity class",
                status_of(model.effects.len() == 1 && model.closure_residual < 1e-12),
            )
            .with_deviation(model.closure_residual)
            .with_witness(format!("{} isotropy samples", iso.len())),
        );
    }

    // Intertwining for the endomorphisms (transversal maps are the identity
    // on the full tangent line).
    {
        let mut rng = check_rng(config, "ex3.intertwining");
        let points = sample_points(&ctx.bundle, 6, &mut rng)?;
        checks.push(intertwining_scenario_check(
            "intertwining_endo",
            &ctx.endo_a,
            &points,
            (samples / points.len()).max(84),
            1e-10,
            &mut rng,
        )?);
    }

    Ok(checks)
}
