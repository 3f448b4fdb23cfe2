//! Rotation kernels at two scales over the trivial line bundle: the
//! half-period kernel strictly contains the full-period one, and both pass
//! the kernel invariants (units, total isotropy, conjugation stability,
//! closedness along sampled convergent sequences).

use crate::action::FreqSpec;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::group::{line_element, line_parameter};
use crate::groupoid::{Arrow, GroupoidModel, RotationKernel};
use crate::models;
use crate::report::CheckRecord;
use crate::rng::{self};
use crate::scalar::approx_f64;
use crate::tol::ToleranceProfile;

use super::{check_rng, status_of};

pub struct Ex4 {
    pub base: GroupoidModel<f64>,
    pub k_full: RotationKernel<f64>,
    pub k_half: RotationKernel<f64>,
    pub omega: FreqSpec,
}

pub fn build(tol: ToleranceProfile<f64>, omega: FreqSpec) -> Result<Ex4> {
    let om = omega.to_smooth_fn::<f64>();
    let base = models::rotation_groupoid(om.clone(), tol);
    let k_full = RotationKernel::new(om.clone(), num_rational::Ratio::new(1, 1), tol)?;
    let k_half = RotationKernel::new(om, num_rational::Ratio::new(1, 2), tol)?;
    Ok(Ex4 { base, k_full, k_half, omega })
}

/// A slow coordinate where the frequency is comfortably nonzero.
fn probe_t(omega: &FreqSpec, rng: &mut rng::Rng) -> f64 {
    let om = omega.to_smooth_fn::<f64>();
    if om.eval(3.0).abs() > 0.1 {
        return 3.0;
    }
    loop {
        let t = rng::uniform::<f64>(rng, -4.0, 4.0);
        if om.eval(t).abs() > 0.1 {
            return t;
        }
    }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let tol = config.tolerance_profile::<f64>()?;
    let omega = config.param_freq("omega", FreqSpec::Poly { coeffs: vec![0.0, 1.0] })?;
    let ctx = build(tol, omega)?;
    let om = ctx.omega.to_smooth_fn::<f64>();
    let mut checks = Vec::new();

    // Strict containment: a half-period arrow on the axis belongs to the
    // half-scale kernel, not to the full kernel, and its full-kernel
    // normalization is nonzero.
    {
        let mut rng = check_rng(config, "ex4.containment");
        let t0 = probe_t(&ctx.omega, &mut rng);
        let theta = std::f64::consts::PI / om.eval(t0);
        let axis_pt = nalgebra::DVector::from_vec(vec![0.0, 0.0, t0]);
        let in_half = ctx.k_half.is_member(theta, &axis_pt);
        let in_full = ctx.k_full.is_member(theta, &axis_pt);
        let normalization = ctx.k_full.normalize_theta(theta, t0);
        // Sampled inclusion: every full-kernel member satisfies the
        // half-kernel membership too.
        let mut inclusion_ok = true;
        for _ in 0..100 {
            let x = rng::nonzero_vector::<f64>(&mut rng, 3, 0.2);
            if om.eval(x[2]).abs() < 0.05 {
                continue;
            }
            let (th, pt) = ctx.k_full.sample_member(&mut rng, &x);
            if !ctx.k_half.is_member(th, &pt) {
                inclusion_ok = false;
            }
        }
        checks.push(
            CheckRecord::new(
                "strict_containment",
                "the half-scale kernel strictly contains the full kernel",
                status_of(in_half && !in_full && normalization.abs() > 1e-9 && inclusion_ok),
            )
            .with_deviation(normalization.abs())
            .with_witness(format!(
                "half-period arrow at t={t0}: member of the half kernel {in_half}, of the full kernel {in_full}"
            ))
            .with_witness(format!("its full-kernel normalization is {normalization:.6}")),
        );
    }

    // Kernel invariants for both scales.
    for (label, kernel) in [("full", &ctx.k_full), ("half", &ctx.k_half)] {
        let mut rng = check_rng(config, &format!("ex4.invariants.{label}"));
        let mut unit_ok = true;
        let mut isotropy_worst = 0.0f64;
        let mut conjugation_ok = true;
        for _ in 0..100 {
            let x = rng::nonzero_vector::<f64>(&mut rng, 3, 0.2);
            if om.eval(x[2]).abs() < 0.05 {
                continue;
            }
            unit_ok &= kernel.is_member(0.0, &x);
            let (theta, pt) = kernel.sample_member(&mut rng, &x);
            let member = Arrow::Translation { g: line_element(theta), x: pt.clone() };
            isotropy_worst =
                isotropy_worst.max(approx_f64(ctx.base.isotropy_defect(&member)?));
            // Conjugation by a random arrow at the same point.
            let other = Arrow::Translation {
                g: line_element(rng::uniform::<f64>(&mut rng, -4.0, 4.0)),
                x: pt.clone(),
            };
            let conj = ctx.base.compose(
                &other,
                &ctx.base.compose(&member, &ctx.base.inverse(&other)?)?,
            )?;
            if let Arrow::Translation { g, x } = &conj {
                conjugation_ok &= kernel.is_member(line_parameter(g), x);
            }
        }
        checks.push(
            CheckRecord::new(
                format!("kernel_invariants_{label}"),
                "kernel contains units, is totally isotropic, and is conjugation-stable on samples",
                status_of(unit_ok && isotropy_worst < 1e-8 && conjugation_ok),
            )
            .with_deviation(isotropy_worst)
            .with_witness("100 sampled members"),
        );
    }

    // First-order data of the rotation action backing both kernels.
    {
        let mut rng = check_rng(config, "ex4.jacobians");
        checks.push(super::jacobian_check(
            "jacobian_validation",
            &crate::group::line_group::<f64>(),
            &crate::action::rotation_fiber_action(om.clone()),
            |rng| rng::normal_vector(rng, 3),
            200,
            &mut rng,
            &tol,
        ));
    }

    // Closedness along sampled convergent sequences: members over t_n -> t0
    // converge to a member over t0.
    {
        let mut rng = check_rng(config, "ex4.closedness");
        let mut ok = true;
        let mut worst_gap = 0.0f64;
        for _ in 0..50 {
            let t0 = probe_t(&ctx.omega, &mut rng);
            let z = rng::nonzero_vector::<f64>(&mut rng, 2, 0.2);
            let m = 1 + (rng::uniform::<f64>(&mut rng, 0.0, 2.99) as i64);
            let mut theta_prev = None;
            for n in 1..=12 {
                let t_n = t0 + 0.5f64.powi(n);
                if om.eval(t_n).abs() < 1e-6 {
                    continue;
                }
                let theta_n = m as f64 * 2.0 * std::f64::consts::PI / om.eval(t_n);
                let pt = nalgebra::DVector::from_vec(vec![z[0], z[1], t_n]);
                ok &= ctx.k_full.is_member(theta_n, &pt);
                theta_prev = Some(theta_n);
            }
            // The limit arrow of the sequence.
            let theta_star = m as f64 * 2.0 * std::f64::consts::PI / om.eval(t0);
            let pt0 = nalgebra::DVector::from_vec(vec![z[0], z[1], t0]);
            ok &= ctx.k_full.is_member(theta_star, &pt0);
            if let Some(last) = theta_prev {
                worst_gap = worst_gap.max((last - theta_star).abs());
            }
        }
        checks.push(
            CheckRecord::new(
                "closedness_along_sequences",
                "kernel membership persists along sampled convergent sequences",
                status_of(ok),
            )
            .with_deviation(worst_gap)
            .with_witness("50 sequences of 12 terms each"),
        );
    }

    Ok(checks)
}
