//! Natural transformations modulo ineffective isotropy, obstruction search
//! for exact naturality, the effect identity of natural transformations, and
//! the orbit-space comparison of a hom.

use std::sync::Arc;

use super::{transversal_map, GroupoidHom};
use crate::effect::{arrow_transport, is_ineffective};
use crate::error::{Error, Result};
use crate::groupoid::{Arrow, BasePoint};
use crate::scalar::{approx_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CongruenceMode {
    /// The connecting arrow must be a unit: ordinary natural isomorphism.
    Exact,
    /// The connecting arrow must be ineffective: natural congruence.
    Congruence,
}

/// A candidate natural transformation, given pointwise.
#[derive(Clone)]
pub struct NaturalTransformationWitness<T: Scalar> {
    pub mode: CongruenceMode,
    tau: Arc<dyn Fn(&BasePoint<T>) -> Result<Arrow<T>> + Send + Sync>,
}

impl<T: Scalar> NaturalTransformationWitness<T> {
    pub fn new(
        mode: CongruenceMode,
        tau: impl Fn(&BasePoint<T>) -> Result<Arrow<T>> + Send + Sync + 'static,
    ) -> Self {
        Self { mode, tau: Arc::new(tau) }
    }

    /// Unit-valued transformation between homs with equal base maps.
    pub fn units(mode: CongruenceMode, phi: &Arc<GroupoidHom<T>>) -> Self {
        let phi = phi.clone();
        Self {
            mode,
            tau: Arc::new(move |x: &BasePoint<T>| {
                let fx = phi.base_map(x)?;
                phi.codomain.unit(&fx)
            }),
        }
    }

    pub fn tau(&self, x: &BasePoint<T>) -> Result<Arrow<T>> {
        (self.tau)(x)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CongruenceReport {
    pub arrows_checked: usize,
    /// Worst endpoint-typing residual of tau itself.
    pub typing_residual: f64,
    /// Worst deviation of the connecting arrow from unit (exact mode) or
    /// from ineffectivity (congruence mode).
    pub max_deviation: f64,
}

impl CongruenceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.typing_residual <= tol && self.max_deviation <= tol
    }
}

/// Verify `tau(tg) . phi(g) == psi(g) . tau(sg)` modulo units or ineffective
/// isotropy on the sampled arrows. A connecting arrow that is not even
/// isotropic rejects tau outright.
pub fn natural_congruence_check<T: Scalar>(
    tau: &NaturalTransformationWitness<T>,
    phi: &GroupoidHom<T>,
    psi: &GroupoidHom<T>,
    arrows: &[Arrow<T>],
) -> Result<CongruenceReport> {
    let cod = &phi.codomain;
    let mut report = CongruenceReport::default();
    for g in arrows {
        let sg = phi.domain.source(g)?;
        let tg = phi.domain.target(g)?;
        let tau_s = tau.tau(&sg)?;
        let tau_t = tau.tau(&tg)?;
        // tau(x) must run from phi(x) to psi(x).
        for (t_arrow, x) in [(&tau_s, &sg), (&tau_t, &tg)] {
            let want_src = phi.base_map(x)?;
            let want_tgt = psi.base_map(x)?;
            let ds = cod.point_dist(&cod.source(t_arrow)?, &want_src)?;
            let dt = cod.point_dist(&cod.target(t_arrow)?, &want_tgt)?;
            report.typing_residual = report.typing_residual.max(approx_f64(ds.max(dt)));
        }
        let lhs = cod.compose(&tau_t, &phi.apply(g)?)?;
        let rhs = cod.compose(&psi.apply(g)?, &tau_s)?;
        let d = cod.compose(&cod.inverse(&rhs)?, &lhs)?;
        let defect = cod.isotropy_defect(&d)?;
        if defect > cod.tol.map_abs_tol {
            return Err(Error::Precondition(format!(
                "connecting arrow is not isotropic (deviation {:.3e}); not a transformation",
                approx_f64(defect)
            )));
        }
        let deviation = match tau.mode {
            CongruenceMode::Exact => {
                let unit = cod.unit(&cod.source(&d)?)?;
                approx_f64(cod.arrow_dist(&d, &unit)?)
            }
            CongruenceMode::Congruence => {
                let (_, dev) = is_ineffective(cod, &d)?;
                approx_f64(dev)
            }
        };
        report.max_deviation = report.max_deviation.max(deviation);
        report.arrows_checked += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub enum ObstructionOutcome {
    /// Some candidate intertwines the two homs at the sample.
    WitnessFound { index: usize, deviation: f64 },
    /// No candidate works; the best (smallest) deviation is reported.
    NoWitness { best_deviation: f64 },
    /// Empty candidate set: nothing can be concluded.
    Undetermined,
}

impl ObstructionOutcome {
    pub fn witness_found(&self) -> bool {
        matches!(self, ObstructionOutcome::WitnessFound { .. })
    }
}

/// Brute-force search for an arrow h: phi(x) -> psi(x) among the candidates
/// with `h . phi(g) == psi(g) . h` in the requested mode. Reproduces the
/// negative naturality claims with analytically complete candidate sets.
pub fn congruence_obstruction<T: Scalar>(
    phi: &GroupoidHom<T>,
    psi: &GroupoidHom<T>,
    x: &BasePoint<T>,
    g: &Arrow<T>,
    candidates: &[Arrow<T>],
    mode: CongruenceMode,
) -> Result<ObstructionOutcome> {
    if candidates.is_empty() {
        return Ok(ObstructionOutcome::Undetermined);
    }
    let cod = &phi.codomain;
    let tol = approx_f64(cod.tol.map_abs_tol);
    let want_src = phi.base_map(x)?;
    let want_tgt = psi.base_map(x)?;
    let phi_g = phi.apply(g)?;
    let psi_g = psi.apply(g)?;
    let mut best = f64::INFINITY;
    for (i, h) in candidates.iter().enumerate() {
        let ds = cod.point_dist(&cod.source(h)?, &want_src)?;
        let dt = cod.point_dist(&cod.target(h)?, &want_tgt)?;
        if approx_f64(ds.max(dt)) > tol {
            return Err(Error::Typing(format!("candidate {i} is not an arrow phi(x) -> psi(x)")));
        }
        let lhs = cod.compose(h, &phi_g)?;
        let rhs = cod.compose(&psi_g, h)?;
        let d = cod.compose(&cod.inverse(&rhs)?, &lhs)?;
        if cod.isotropy_defect(&d)? > cod.tol.map_abs_tol {
            continue;
        }
        let deviation = match mode {
            CongruenceMode::Exact => {
                let unit = cod.unit(&cod.source(&d)?)?;
                approx_f64(cod.arrow_dist(&d, &unit)?)
            }
            CongruenceMode::Congruence => approx_f64(is_ineffective(cod, &d)?.1),
        };
        if deviation <= tol {
            return Ok(ObstructionOutcome::WitnessFound { index: i, deviation });
        }
        best = best.min(deviation);
    }
    Ok(ObstructionOutcome::NoWitness { best_deviation: best })
}

/// Max residual of `eps(tau(x)) . T phi = T psi` over the sampled points,
/// where `eps(tau(x))` is the transport of the (possibly non-isotropic)
/// connecting arrow between the transversal spaces at phi(x) and psi(x).
pub fn natural_transformation_effect_check<T: Scalar>(
    tau: &NaturalTransformationWitness<T>,
    phi: &GroupoidHom<T>,
    psi: &GroupoidHom<T>,
    points: &[BasePoint<T>],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let t_phi = transversal_map(phi, x)?;
        let t_psi = transversal_map(psi, x)?;
        let transport = arrow_transport(&phi.codomain, &tau.tau(x)?)?;
        let lhs = &transport.matrix * &t_phi.matrix;
        worst = worst.max(approx_f64((lhs - &t_psi.matrix).norm()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Default)]
pub struct OrbitMapReport {
    pub injectivity_pairs: usize,
    pub injectivity_violations: usize,
    pub surjectivity_points: usize,
    pub surjectivity_failures: usize,
    pub undetermined: bool,
    pub detail: String,
}

impl OrbitMapReport {
    pub fn bijective_at_samples(&self) -> bool {
        !self.undetermined && self.injectivity_violations == 0 && self.surjectivity_failures == 0
    }
}

/// Sample-level comparison of the induced map between orbit spaces:
/// injectivity on the given domain point pairs, surjectivity through the
/// hom's surjectivity witness on the given codomain points.
pub fn orbit_map_check<T: Scalar>(
    hom: &GroupoidHom<T>,
    point_pairs: &[(BasePoint<T>, BasePoint<T>)],
    codomain_points: &[BasePoint<T>],
) -> Result<OrbitMapReport> {
    let mut report = OrbitMapReport::default();
    if !hom.domain.has_orbit_oracle() || !hom.codomain.has_orbit_oracle() {
        report.undetermined = true;
        report.detail = "missing orbit oracle".into();
        return Ok(report);
    }
    for (x, y) in point_pairs {
        let fx = hom.base_map(x)?;
        let fy = hom.base_map(y)?;
        let down = hom.codomain.same_orbit(&fx, &fy).unwrap();
        let up = hom.domain.same_orbit(x, y).unwrap();
        report.injectivity_pairs += 1;
        if down && !up {
            report.injectivity_violations += 1;
        }
    }
    match &hom.witnesses.surjectivity {
        None => {
            report.undetermined = true;
            report.detail = "no surjectivity witness; image coverage undetermined".into();
        }
        Some(w) => {
            for c in codomain_points {
                report.surjectivity_points += 1;
                match w(c) {
                    None => report.surjectivity_failures += 1,
                    Some((x, _)) => {
                        let fx = hom.base_map(&x)?;
                        if !hom.codomain.same_orbit(&fx, c).unwrap() {
                            report.surjectivity_failures += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}
