//! The rotation groupoid over C x R modulo its rotation kernel, mapped into
//! SO(3)/R^3 by fiberwise rotations of prescribed magnitude: two such homs
//! are naturally congruent exactly when their frequencies agree on the
//! vanishing slice, and never exactly isomorphic once they differ elsewhere.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::action::FreqSpec;
use crate::config::ScenarioConfig;
use crate::effect::is_ineffective;
use crate::error::{Error, Result};
use crate::fractions::axiom_iii_instance;
use crate::group::{line_parameter, rot_z};
use crate::groupoid::{Arrow, BaseMapData, BasePoint, GroupoidModel, RotationKernel};
use crate::homs::{
    congruence_obstruction, ineffective_preservation_check, natural_congruence_check,
    CongruenceMode, GroupoidHom, NaturalTransformationWitness,
};
use crate::models;
use crate::report::CheckRecord;
use crate::rng::{self};
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{axioms_check, check_rng, intertwining_scenario_check, jacobian_check, status_of};

/// The rotation pair: base groupoid, its quotient, the two homs downstairs
/// and the projection.
pub struct RotationPair {
    pub base: Arc<GroupoidModel<f64>>,
    pub quotient: Arc<GroupoidModel<f64>>,
    pub downstairs: Arc<GroupoidModel<f64>>,
    pub projection: Arc<GroupoidHom<f64>>,
    pub phi0: Arc<GroupoidHom<f64>>,
    pub phi1: Arc<GroupoidHom<f64>>,
    pub omega: FreqSpec,
    pub phi0_spec: FreqSpec,
    pub phi1_spec: FreqSpec,
}

fn freq_magnitudes_match(omega: &FreqSpec, phi: &FreqSpec) -> bool {
    let om = omega.to_smooth_fn::<f64>();
    let ph = phi.to_smooth_fn::<f64>();
    (-20..=20).all(|i| {
        let t = i as f64 * 0.173;
        (om.eval(t).abs() - ph.eval(t).abs()).abs() <= 1e-9 * (1.0 + om.eval(t).abs())
    })
}

pub fn build(
    tol: ToleranceProfile<f64>,
    omega: FreqSpec,
    phi0_spec: FreqSpec,
    phi1_spec: FreqSpec,
) -> Result<RotationPair> {
    for (name, spec) in [("phi0", &phi0_spec), ("phi1", &phi1_spec)] {
        if !freq_magnitudes_match(&omega, spec) {
            return Err(Error::Config(format!(
                "{name} must satisfy |phi(t)| = |omega(t)| for all t"
            )));
        }
    }
    let om = omega.to_smooth_fn::<f64>();
    let base = Arc::new(models::rotation_groupoid(om.clone(), tol));
    let kernel = RotationKernel::new(om.clone(), num_rational::Ratio::new(1, 1), tol)?;
    let om_orbit = om.clone();
    let quotient = Arc::new(
        GroupoidModel::quotient_by_kernel("rot/K", base.clone(), kernel)?.with_orbit_oracle(
            move |a, b| match (a.as_flat(), b.as_flat()) {
                (Ok(u), Ok(v)) => {
                    if (u[2] - v[2]).abs() > 1e-7 {
                        return false;
                    }
                    let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
                    let rv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                    if om_orbit.eval(u[2]).abs() <= 1e-9 {
                        (u - v).norm() <= 1e-7
                    } else {
                        (ru - rv).abs() <= 1e-7
                    }
                }
                _ => false,
            },
        ),
    );
    let downstairs = Arc::new(models::so3_r3(tol));
    let projection = Arc::new(GroupoidHom::quotient_projection(base.clone(), quotient.clone())?);
    let mk_hom = |label: &str, spec: &FreqSpec| {
        let f = spec.to_smooth_fn::<f64>();
        GroupoidHom::translation(
            format!("rotpair[{label}]"),
            quotient.clone(),
            downstairs.clone(),
            move |g: &DMatrix<f64>, x: &DVector<f64>| rot_z(f.eval(x[2]) * line_parameter(g)),
            models::axis_projection_map(),
        )
    };
    let phi0 = Arc::new(mk_hom("phi0", &phi0_spec));
    let phi1 = Arc::new(mk_hom("phi1", &phi1_spec));
    Ok(RotationPair {
        base,
        quotient,
        downstairs,
        projection,
        phi0,
        phi1,
        omega,
        phi0_spec,
        phi1_spec,
    })
}

pub fn build_from_config(config: &ScenarioConfig) -> Result<RotationPair> {
    let tol = config.tolerance_profile::<f64>()?;
    let omega = config.param_freq("omega", FreqSpec::Poly { coeffs: vec![0.0, 1.0] })?;
    let phi0 = config.param_freq("phi0", omega.clone())?;
    let phi1 = config.param_freq(
        "phi1",
        match &omega {
            FreqSpec::Poly { coeffs } => {
                FreqSpec::Poly { coeffs: coeffs.iter().map(|c| -c).collect() }
            }
            FreqSpec::TExp { scale, rate } => FreqSpec::TExp { scale: -scale, rate: *rate },
        },
    )?;
    build(tol, omega, phi0, phi1)
}

/// A base point with nonzero fiber coordinate and slow coordinate bounded
/// away from the vanishing locus of omega.
fn sample_regular_point(
    ctx: &RotationPair,
    rng: &mut rng::Rng,
    min_t: f64,
) -> Result<DVector<f64>> {
    let om = ctx.omega.to_smooth_fn::<f64>();
    loop {
        let v = rng::nonzero_vector::<f64>(rng, 3, 0.2);
        let fiber = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if fiber > 0.1 && v[2].abs() > min_t && om.eval(v[2]).abs() > 0.05 {
            return Ok(v);
        }
    }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let ctx = build_from_config(config)?;
    run_with(config, &ctx)
}

/// The `custom` scenario runs the same manifest on user-supplied frequencies.
pub fn run_custom(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let ctx = build_from_config(config)?;
    run_with(config, &ctx)
}

fn run_with(config: &ScenarioConfig, ctx: &RotationPair) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let samples = config.samples as usize;
    let om = ctx.omega.to_smooth_fn::<f64>();
    let ph0 = ctx.phi0_spec.to_smooth_fn::<f64>();
    let ph1 = ctx.phi1_spec.to_smooth_fn::<f64>();
    let mut checks = Vec::new();

    // Kernel arrows are ineffective in the base groupoid.
    {
        let mut rng = check_rng(config, "ex2b.kernel");
        let kernel =
            RotationKernel::new(om.clone(), num_rational::Ratio::new(1, 1), tol)?;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = sample_regular_point(ctx, &mut rng, 0.01)?;
            let (theta, pt) = kernel.sample_member(&mut rng, &x);
            let arrow = Arrow::Translation { g: crate::group::line_element(theta), x: pt };
            let (flat, dev) = is_ineffective(&ctx.base, &arrow)?;
            worst = worst.max(approx_f64(dev));
            if !flat {
                worst = worst.max(1.0);
            }
        }
        checks.push(
            CheckRecord::new(
                "kernel_arrows_ineffective",
                "full-turn arrows have identity effect off the vanishing locus",
                status_of(worst < 1e-6),
            )
            .with_deviation(worst)
            .with_witness("100 sampled kernel members with |t| > 0.01, z != 0"),
        );
    }

    // Natural congruence of the two homs with the unit transformation holds
    // iff the frequencies agree on the vanishing slice t = 0.
    {
        let mut rng = check_rng(config, "ex2b.congruence");
        let mut arrows = Vec::new();
        for _ in 0..samples.min(200) {
            arrows.push(ctx.quotient.sample_arrow(&mut rng, None)?);
        }
        // Include the axis slice t = 0, where ineffectivity downstairs is
        // trivial and the congruence is decided.
        for _ in 0..40 {
            let z0 = rng::nonzero_vector::<f64>(&mut rng, 2, 0.1);
            let theta = rng::uniform::<f64>(&mut rng, -4.0, 4.0);
            let x = DVector::from_vec(vec![z0[0], z0[1], 0.0]);
            let rep = Arrow::Translation { g: crate::group::line_element(theta), x };
            arrows.push(wrap_class(ctx, rep)?);
        }
        let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &ctx.phi0);
        let report = natural_congruence_check(&tau, &ctx.phi0, &ctx.phi1, &arrows)?;
        let should_match = (ph0.eval(0.0) - ph1.eval(0.0)).abs() <= 1e-12;
        let passed = report.passes(approx_f64(tol.map_abs_tol));
        checks.push(
            CheckRecord::new(
                "congruence_iff_axis_match",
                "unit transformation is a natural congruence exactly when phi0(0) = phi1(0)",
                status_of(passed == should_match),
            )
            .with_deviation(report.max_deviation)
            .with_witness(format!(
                "phi0(0)={}, phi1(0)={}, congruence {}",
                ph0.eval(0.0),
                ph1.eval(0.0),
                if passed { "holds" } else { "fails" }
            )),
        );
    }

    // Exact naturality is obstructed on the axis wherever the frequencies
    // disagree.
    {
        let mut rng = check_rng(config, "ex2b.obstruction");
        let mut found_any = false;
        let mut cases = 0usize;
        let mut probed = 0usize;
        for _ in 0..200 {
            if probed >= 10 {
                break;
            }
            let t = rng::uniform::<f64>(&mut rng, 0.3, 2.5)
                * if rng::uniform::<f64>(&mut rng, 0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
            if (ph0.eval(t) - ph1.eval(t)).abs() < 0.05 || om.eval(t).abs() < 0.05 {
                continue;
            }
            probed += 1;
            let x = DVector::from_vec(vec![0.0, 0.0, t]);
            let theta = rng::uniform::<f64>(&mut rng, 0.4, 3.0);
            let g = wrap_class(ctx, Arrow::Translation { g: crate::group::line_element(theta), x: x.clone() })?;
            let candidates = models::z_rotation_candidates(&DVector::from_vec(vec![0.0, 0.0, t]), 360);
            let outcome = congruence_obstruction(
                &ctx.phi0,
                &ctx.phi1,
                &BasePoint::Flat(x),
                &g,
                &candidates,
                CongruenceMode::Exact,
            )?;
            cases += 1;
            if outcome.witness_found() {
                found_any = true;
            }
        }
        let record = if cases == 0 {
            CheckRecord::new(
                "exact_obstruction_on_axis",
                "no exact intertwiner among 360 z-rotations where the frequencies differ",
                crate::report::CheckStatus::Undetermined,
            )
            .with_witness("frequencies never differ on the probed range")
        } else {
            CheckRecord::new(
                "exact_obstruction_on_axis",
                "no exact intertwiner among 360 z-rotations where the frequencies differ",
                status_of(!found_any),
            )
            .with_witness(format!("{cases} axis points probed"))
        };
        checks.push(record);
    }

    // Quotient groupoid structure axioms (samples avoid the vanishing locus).
    {
        let mut rng = check_rng(config, "ex2b.axioms");
        checks.push(axioms_check("axioms_quotient", &ctx.quotient, samples.min(600), 1e-8, &mut rng)?);
        checks.push(axioms_check("axioms_base", &ctx.base, samples.min(600), 1e-8, &mut rng)?);
    }

    // Effect functoriality in the quotient along the axis, where the isotropy
    // is a genuine circle of classes.
    {
        let mut rng = check_rng(config, "ex2b.functoriality");
        let mut pairs = Vec::new();
        for _ in 0..1000 {
            let t = rng::uniform::<f64>(&mut rng, 0.3, 2.5);
            let x = BasePoint::flat(vec![0.0, 0.0, t]);
            let a = ctx.quotient.sample_isotropy(&mut rng, &x)?.unwrap();
            let b = ctx.quotient.sample_isotropy(&mut rng, &x)?.unwrap();
            pairs.push((a, b));
        }
        let worst = crate::effect::effect_functoriality_check(&ctx.quotient, &pairs)?;
        checks.push(
            CheckRecord::new(
                "effect_functoriality_quotient",
                "effect of a composite equals the composite of effects",
                status_of(worst < 1e-8),
            )
            .with_deviation(worst)
            .with_witness("1000 composable isotropic pairs on the axis"),
        );
    }

    // Intertwining for both homs and the projection.
    {
        let mut rng = check_rng(config, "ex2b.intertwining");
        let mut points = Vec::new();
        for _ in 0..6 {
            points.push(BasePoint::Flat(sample_regular_point(ctx, &mut rng, 0.05)?));
        }
        for _ in 0..3 {
            let t = rng::uniform::<f64>(&mut rng, 0.3, 2.0);
            points.push(BasePoint::flat(vec![0.0, 0.0, t]));
        }
        for (name, hom) in [
            ("intertwining_phi0", &ctx.phi0),
            ("intertwining_phi1", &ctx.phi1),
            ("intertwining_projection", &ctx.projection),
        ] {
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

    // Both homs stay in the dotted subcategory on samples.
    {
        let mut rng = check_rng(config, "ex2b.dotted");
        let mut points = Vec::new();
        for _ in 0..4 {
            points.push(BasePoint::Flat(sample_regular_point(ctx, &mut rng, 0.05)?));
        }
        points.push(BasePoint::flat(vec![0.0, 0.0, 1.1]));
        let report = ineffective_preservation_check(&ctx.phi0, &points, &mut rng, 16)?;
        checks.push(
            CheckRecord::new(
                "phi0_in_dotted_category",
                "ineffective isotropy maps to ineffective isotropy at samples",
                status_of(report.in_dotted_at_samples()),
            )
            .with_deviation(report.max_transferred_deviation)
            .with_witness(format!("{} samples, {} nontrivial", report.cases, report.nontrivial_cases)),
        );
    }

    // First-order data of the rotation action.
    {
        let mut rng = check_rng(config, "ex2b.jacobians");
        checks.push(jacobian_check(
            "jacobian_validation",
            &crate::group::line_group::<f64>(),
            &crate::action::rotation_fiber_action(om.clone()),
            |rng| rng::normal_vector(rng, 3),
            200,
            &mut rng,
            &tol,
        ));
    }

    // Equalizing-axiom instance through the identity cover: the lifted unit
    // transformation verifies as a natural congruence when the axis values
    // agree, and the congruence-transfer implication holds on samples.
    {
        let mut rng = check_rng(config, "ex2b.axiom3");
        let identity_phi = Arc::new(GroupoidHom::identity(ctx.downstairs.clone()));
        let cover = BaseMapData::identity(3);
        let tau = NaturalTransformationWitness::units(CongruenceMode::Congruence, &ctx.phi0);
        // The congruence is decided on the vanishing slice t = 0.
        let slice = vec![
            BasePoint::flat(vec![0.9, 0.2, 0.0]),
            BasePoint::flat(vec![-0.4, 0.7, 0.0]),
        ];
        match axiom_iii_instance(
            ctx.phi0.clone(),
            ctx.phi1.clone(),
            identity_phi,
            cover,
            tau,
            &slice,
            &mut rng,
            60,
        ) {
            Ok(report) => {
                let should_match = (ph0.eval(0.0) - ph1.eval(0.0)).abs() <= 1e-12;
                let holds = report.holds(approx_f64(tol.map_abs_tol));
                checks.push(
                    CheckRecord::new(
                        "axiom_iii_instance",
                        "lifted transformation is a congruence over the cover; congruence transfers through the inverted hom",
                        status_of(holds == should_match),
                    )
                    .with_deviation(report.lifted_congruence.max_deviation)
                    .with_witness(format!(
                        "{} transfer cases, {} violations",
                        report.transfer_cases, report.transfer_violations
                    )),
                );
            }
            Err(e) => {
                // Off-axis frequency mismatch rejects the transformation
                // before any deviation is measured; that is the expected
                // outcome when the axis values differ.
                let should_match = (ph0.eval(0.0) - ph1.eval(0.0)).abs() <= 1e-12;
                checks.push(
                    CheckRecord::new(
                        "axiom_iii_instance",
                        "lifted transformation is a congruence over the cover; congruence transfers through the inverted hom",
                        status_of(!should_match),
                    )
                    .with_witness(format!("{e}")),
                );
            }
        }
    }

    Ok(checks)
}

fn wrap_class(ctx: &RotationPair, rep: Arrow<f64>) -> Result<Arrow<f64>> {
    match &ctx.quotient.kind {
        crate::groupoid::GroupoidKind::Quotient { kernel, .. } => {
            Ok(crate::groupoid::make_class(kernel, rep))
        }
        _ => Err(Error::Typing("quotient groupoid expected".into())),
    }
}
