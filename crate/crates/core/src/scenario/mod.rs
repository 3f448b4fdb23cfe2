//! Executable scenarios: each builds its groupoids and homs, runs a fixed
//! manifest of checks deterministically under the configured seed, and emits
//! one record per check.

mod ex1;
mod ex2a;
mod ex2b;
mod ex3;
mod ex4;
mod weak_equiv;

use std::time::Instant;

use crate::action::SmoothActionModel;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::group::LieGroupModel;
use crate::groupoid::{check_groupoid_axioms, BasePoint, GroupoidModel};
use crate::homs::GroupoidHom;
use crate::report::{CheckRecord, CheckStatus, Report};
use crate::rng::{self, Rng};
use crate::scalar::{approx_f64, Scalar};

pub use ex2b::{build as build_rotation_pair, RotationPair};

/// Names and one-line summaries of the built-in scenarios.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        ("ex1", "reflection pair O(2)/R^2 vs the z-axis group: effects and the dotted subcategory"),
        ("ex2a", "constant-pole homomorphisms into SO(3): natural congruence vs exact naturality"),
        ("ex2b", "rotation groupoid modulo its kernel: congruences controlled by the axis value"),
        ("ex3", "trivial circle bundle over the line: everything is ineffective"),
        ("ex4", "rotation kernels at two scales: strict containment and kernel invariants"),
        ("weak_equiv", "circle-bundle presentation of punctured 3-space: weak equivalence suite"),
        ("custom", "rotation-family scenario with user-chosen frequencies (ex2b checks)"),
    ]
}

/// Run one scenario to a full report. Exit-code policy is the caller's
/// business; the report's failure state is queryable.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let mut report = Report::new(config.scenario.clone(), config.samples, config.seed);
    report.parameters = config.params.clone();
    report.checks = match config.scenario.as_str() {
        "ex1" => ex1::run(config)?,
        "ex2a" => ex2a::run(config)?,
        "ex2b" => ex2b::run(config)?,
        "ex3" => ex3::run(config)?,
        "ex4" => ex4::run(config)?,
        "weak_equiv" => weak_equiv::run(config)?,
        "custom" => ex2b::run_custom(config)?,
        other => {
            return Err(Error::Config(format!(
                "unknown scenario `{other}`; see `list-scenarios`"
            )))
        }
    };
    // Every manifested check appears exactly once.
    let mut names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    debug_assert_eq!(names.len(), report.checks.len(), "duplicate check names in manifest");
    report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    Ok(report)
}

pub(crate) fn status_of(pass: bool) -> CheckStatus {
    if pass {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Shared check: structure-axiom fuzz of a groupoid.
pub(crate) fn axioms_check<T: Scalar>(
    name: &str,
    groupoid: &GroupoidModel<T>,
    samples: usize,
    threshold: f64,
    rng: &mut Rng,
) -> Result<CheckRecord> {
    let report = check_groupoid_axioms(groupoid, samples, rng)?;
    let worst = report.worst();
    Ok(CheckRecord::new(
        name,
        "groupoid structure axioms (units, associativity, inverses) on random samples",
        status_of(worst <= threshold),
    )
    .with_deviation(worst)
    .with_witness(format!("{samples} samples on {}", groupoid.name)))
}

/// Shared check: analytic Jacobian and generator against central finite
/// differences at random group elements and base points.
pub(crate) fn jacobian_check<T: Scalar>(
    name: &str,
    group: &LieGroupModel<T>,
    action: &SmoothActionModel<T>,
    sampler: impl Fn(&mut Rng) -> nalgebra::DVector<T>,
    count: usize,
    rng: &mut Rng,
    tol: &crate::tol::ToleranceProfile<T>,
) -> CheckRecord {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let g = group.sample(rng);
        let x = sampler(rng);
        let (jd, gd) = crate::action::validate_first_order(group, action, &g, &x, tol.fd_step);
        worst = worst.max(approx_f64(jd)).max(approx_f64(gd));
    }
    CheckRecord::new(
        name,
        "analytic base Jacobian and generator agree with central finite differences",
        status_of(worst <= approx_f64(tol.fd_abs_tol)),
    )
    .with_deviation(worst)
    .with_witness(format!("{count} evaluation points"))
}

/// Shared check: intertwining residual of a hom over sampled isotropy.
pub(crate) fn intertwining_scenario_check<T: Scalar>(
    name: &str,
    hom: &GroupoidHom<T>,
    points: &[BasePoint<T>],
    per_point: usize,
    threshold: f64,
    rng: &mut Rng,
) -> Result<CheckRecord> {
    let mut worst = 0.0f64;
    let mut total = 0usize;
    for x in points {
        let mut samples = Vec::new();
        for _ in 0..per_point {
            if let Some(g) = hom.domain.sample_isotropy(rng, x)? {
                samples.push(g);
            }
        }
        total += samples.len();
        worst = worst.max(crate::homs::intertwining_check(hom, x, &samples)?);
    }
    Ok(CheckRecord::new(
        name,
        "transversal map intertwines the isotropy effect representations",
        status_of(worst <= threshold),
    )
    .with_deviation(worst)
    .with_witness(format!("{total} isotropic samples for {}", hom.name)))
}

/// Sample `count` base points from a groupoid.
pub(crate) fn sample_points<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<BasePoint<T>>> {
    (0..count).map(|_| groupoid.sample_base(rng)).collect()
}

/// Derive the per-check RNG for a scenario run.
pub(crate) fn check_rng(config: &ScenarioConfig, check: &str) -> Rng {
    rng::derive(config.seed, check)
}
