//! The span calculus of right fractions: composition through weak pullbacks,
//! span equivalence through bridges, sample-level instances of the three
//! fraction-calculus axioms, and the pointwise transversal-skeleton data.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::effect::{self, arrow_transport, effect as arrow_effect, is_ineffective};
use crate::error::{Error, Result};
use crate::groupoid::{check_groupoid_axioms, Arrow, AxiomReport, BaseMapData, BasePoint, GroupoidModel};
use crate::homs::{
    classify, natural_congruence_check, weak_pullback_with_projections, ClassifySettings,
    CongruenceReport, GroupoidHom, HomClassification, NaturalTransformationWitness,
    PreservationReport,
};
use crate::numlin::{numeric_rank, QuotientLinearMap};
use crate::rng::Rng;
use crate::scalar::{approx_f64, Scalar};

/// A right fraction: a span whose right leg is certified to lie in the
/// inverted class and whose left leg preserves ineffective isotropy at
/// samples. Construction refuses anything weaker.
pub struct Span<T: Scalar> {
    pub apex: Arc<GroupoidModel<T>>,
    pub left: Arc<GroupoidHom<T>>,
    pub right: Arc<GroupoidHom<T>>,
    pub right_classification: HomClassification,
    pub left_preservation: PreservationReport,
}

impl<T: Scalar> std::fmt::Debug for Span<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Span({} <- {} ~> {})", self.left.codomain.name, self.apex.name, self.right.codomain.name)
    }
}

impl<T: Scalar> Span<T> {
    pub fn new(
        left: Arc<GroupoidHom<T>>,
        right: Arc<GroupoidHom<T>>,
        rng: &mut Rng,
        sample_points: usize,
        settings: &ClassifySettings,
    ) -> Result<Self> {
        if !Arc::ptr_eq(&left.domain, &right.domain) {
            return Err(Error::Typing("span legs must share their apex".into()));
        }
        let apex = left.domain.clone();
        let mut points = Vec::new();
        for _ in 0..sample_points.max(1) {
            points.push(apex.sample_base(rng)?);
        }
        let right_classification = classify(&right, &points, rng, settings)?;
        if !right_classification.in_e() {
            return Err(Error::Precondition(format!(
                "right leg {} is not certified in the inverted class: full={:?}, surjective={:?}",
                right.name,
                right_classification.cinfty_full.flag,
                right_classification.completely_transversal.flag
            )));
        }
        let left_preservation =
            crate::homs::ineffective_preservation_check(&left, &points, rng, 8)?;
        if !left_preservation.in_dotted_at_samples() {
            return Err(Error::Precondition(format!(
                "left leg {} does not preserve ineffective isotropy at samples",
                left.name
            )));
        }
        Ok(Self { apex, left, right, right_classification, left_preservation })
    }
}

/// Composition of right fractions: the apex is the weak pullback of the
/// outer left leg along the inner right leg, and the new right leg must
/// classify into the inverted class again.
pub fn compose_spans<T: Scalar>(
    outer: &Span<T>,
    inner: &Span<T>,
    rng: &mut Rng,
    sample_points: usize,
    settings: &ClassifySettings,
) -> Result<Span<T>> {
    if !Arc::ptr_eq(&inner.right.codomain, &outer.left.codomain) {
        return Err(Error::Typing(
            "inner right leg must land in the outer left leg's codomain".into(),
        ));
    }
    let (_wp, pr_outer_apex, pr_inner_apex) =
        weak_pullback_with_projections(outer.left.clone(), inner.right.clone(), rng, settings)?;
    let pr_outer_apex = Arc::new(pr_outer_apex);
    let pr_inner_apex = Arc::new(pr_inner_apex);
    let new_right = Arc::new(GroupoidHom::compose(&outer.right, &pr_outer_apex)?);
    let new_left = Arc::new(GroupoidHom::compose(&inner.left, &pr_inner_apex)?);
    Span::new(new_left, new_right, rng, sample_points, settings)
}

/// A bridge datum for span equivalence: a core groupoid mapping into both
/// apexes, with natural-congruence witnesses for the two triangles.
pub struct SpanBridge<T: Scalar> {
    pub to_first: Arc<GroupoidHom<T>>,
    pub to_second: Arc<GroupoidHom<T>>,
    pub tau_left: NaturalTransformationWitness<T>,
    pub tau_right: NaturalTransformationWitness<T>,
}

#[derive(Debug, Clone)]
pub struct SpanEquivalenceReport {
    pub left_triangle: CongruenceReport,
    pub right_triangle: CongruenceReport,
    pub through_in_e: bool,
    pub equivalent: bool,
}

/// Check that the two triangles of the bridge diagram commute up to natural
/// congruence on the sampled arrows, and that the through-map lies in the
/// inverted class.
pub fn span_equivalence_check<T: Scalar>(
    first: &Span<T>,
    second: &Span<T>,
    bridge: &SpanBridge<T>,
    arrows: &[Arrow<T>],
    rng: &mut Rng,
    settings: &ClassifySettings,
) -> Result<SpanEquivalenceReport> {
    let left_first = Arc::new(GroupoidHom::compose(&first.left, &bridge.to_first)?);
    let left_second = Arc::new(GroupoidHom::compose(&second.left, &bridge.to_second)?);
    let right_first = Arc::new(GroupoidHom::compose(&first.right, &bridge.to_first)?);
    let right_second = Arc::new(GroupoidHom::compose(&second.right, &bridge.to_second)?);

    let left_triangle = natural_congruence_check(&bridge.tau_left, &left_first, &left_second, arrows)?;
    let right_triangle =
        natural_congruence_check(&bridge.tau_right, &right_first, &right_second, arrows)?;

    let mut points = Vec::new();
    for _ in 0..6 {
        points.push(bridge.to_first.domain.sample_base(rng)?);
    }
    let through = classify(&right_first, &points, rng, settings)?;
    let tol = approx_f64(first.apex.tol.map_abs_tol);
    let equivalent =
        left_triangle.passes(tol) && right_triangle.passes(tol) && through.in_e();
    Ok(SpanEquivalenceReport {
        left_triangle,
        right_triangle,
        through_in_e: through.in_e(),
        equivalent,
    })
}

#[derive(Debug)]
pub struct AxiomTwoReport {
    pub wp_axioms: AxiomReport,
    pub pr_delta: HomClassification,
    pub pr_gamma_preservation: PreservationReport,
}

impl AxiomTwoReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.wp_axioms.worst() <= tol
            && self.pr_delta.in_e()
            && self.pr_gamma_preservation.in_dotted_at_samples()
    }
}

/// Instance of the square-completion axiom: form the weak pullback of
/// `phi` (in the inverted class) along `psi`, fuzz its structure axioms,
/// certify the projection onto psi's domain, and check that the other
/// projection preserves ineffective isotropy.
pub fn axiom_ii_instance<T: Scalar>(
    psi: Arc<GroupoidHom<T>>,
    phi: Arc<GroupoidHom<T>>,
    rng: &mut Rng,
    fuzz_samples: usize,
    preservation_samples: usize,
    settings: &ClassifySettings,
) -> Result<AxiomTwoReport> {
    let (wp, pr_delta, pr_gamma) =
        weak_pullback_with_projections(psi, phi, rng, settings)?;
    let wp_axioms = check_groupoid_axioms(&wp, fuzz_samples, rng)?;
    let mut points = Vec::new();
    for _ in 0..8 {
        points.push(wp.sample_base(rng)?);
    }
    let pr_delta_class = classify(&pr_delta, &points, rng, settings)?;
    let pr_gamma_preservation =
        crate::homs::ineffective_preservation_check(&pr_gamma, &points, rng, preservation_samples)?;
    Ok(AxiomTwoReport { wp_axioms, pr_delta: pr_delta_class, pr_gamma_preservation })
}

#[derive(Debug)]
pub struct AxiomThreeReport {
    pub lifted_congruence: CongruenceReport,
    /// Violations of "images congruent implies arrows congruent" on the
    /// constructed sample pairs (faithful-transversality transfer).
    pub transfer_cases: usize,
    pub transfer_violations: usize,
}

impl AxiomThreeReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lifted_congruence.passes(tol) && self.transfer_violations == 0
    }
}

/// Instance of the equalizing axiom: given naturally congruent composites
/// `phi . psi1` and `phi . psi2` with `phi` in the inverted class, pull the
/// groupoid back along the supplied cover, verify the lifted transformation
/// as a natural congruence there, and verify the congruence-transfer
/// implication on sampled arrow pairs.
///
/// `slice_points` are cover base points that must be exercised in addition
/// to random samples; congruences in the rotation scenarios are decided on
/// the vanishing slice, which random sampling misses.
#[allow(clippy::too_many_arguments)]
pub fn axiom_iii_instance<T: Scalar>(
    psi1: Arc<GroupoidHom<T>>,
    psi2: Arc<GroupoidHom<T>>,
    phi: Arc<GroupoidHom<T>>,
    cover: BaseMapData<T>,
    lifted_tau: NaturalTransformationWitness<T>,
    slice_points: &[BasePoint<T>],
    rng: &mut Rng,
    samples: usize,
) -> Result<AxiomThreeReport> {
    if !Arc::ptr_eq(&psi1.domain, &psi2.domain) || !Arc::ptr_eq(&psi1.codomain, &psi2.codomain) {
        return Err(Error::Typing("parallel homs must share domain and codomain".into()));
    }
    if !Arc::ptr_eq(&psi1.codomain, &phi.domain) {
        return Err(Error::Typing("phi must compose with the parallel pair".into()));
    }
    // Pull the common domain back along the cover.
    let gamma = psi1.domain.clone();
    let cover_gpd = Arc::new(GroupoidModel::pullback(
        format!("cover^*{}", gamma.name),
        cover,
        gamma.clone(),
        gamma.tol,
    )?);
    let pi = Arc::new(GroupoidHom::pullback_projection(cover_gpd.clone())?);
    let psi1_pi = Arc::new(GroupoidHom::compose(&psi1, &pi)?);
    let psi2_pi = Arc::new(GroupoidHom::compose(&psi2, &pi)?);

    let mut arrows = Vec::new();
    for _ in 0..samples {
        arrows.push(cover_gpd.sample_arrow(rng, None)?);
    }
    for p in slice_points {
        for _ in 0..4 {
            arrows.push(cover_gpd.sample_arrow(rng, Some(p))?);
        }
    }
    let lifted_congruence = natural_congruence_check(&lifted_tau, &psi1_pi, &psi2_pi, &arrows)?;

    // Faithful-transversality transfer: phi-congruent arrows must already be
    // congruent. Pairs are built both from ineffective and from effective
    // perturbations so the implication is exercised in both directions.
    let delta = phi.domain.clone();
    let mut transfer_cases = 0usize;
    let mut transfer_violations = 0usize;
    for _ in 0..samples {
        let x = delta.sample_base(rng)?;
        let h1 = delta.sample_arrow(rng, Some(&x))?;
        let Some(n) = delta.sample_isotropy(rng, &x)? else { continue };
        let h2 = delta.compose(&h1, &n)?;
        let congruent_upstairs = arrows_congruent(&delta, &h1, &h2)?;
        let congruent_downstairs =
            arrows_congruent(&phi.codomain, &phi.apply(&h1)?, &phi.apply(&h2)?)?;
        transfer_cases += 1;
        if congruent_downstairs && !congruent_upstairs {
            transfer_violations += 1;
        }
    }
    Ok(AxiomThreeReport { lifted_congruence, transfer_cases, transfer_violations })
}

/// Cross-check of the two effect routes through an isotropic weak pullback
/// arrow (h, k, g): conjugating by the connector must intertwine the
/// component effects,
/// `eps(k) . Tphi . eps(g) = eps(psi h) . eps(k) . Tphi`.
pub fn weak_pullback_effect_crosscheck<T: Scalar>(
    wp: &GroupoidModel<T>,
    samples: &[Arrow<T>],
) -> Result<f64> {
    let (psi, phi) = match &wp.kind {
        crate::groupoid::GroupoidKind::WeakPullback { psi, phi } => (psi.clone(), phi.clone()),
        _ => return Err(Error::Typing("weak pullback groupoid expected".into())),
    };
    let sigma = psi.codomain.clone();
    let mut worst = 0.0f64;
    for a in samples {
        let (h, k, g) = a.weak_pullback_parts()?;
        let defect = wp.isotropy_defect(a)?;
        if defect > wp.tol.map_abs_tol {
            return Err(Error::Precondition("cross-check samples must be isotropic".into()));
        }
        let x = phi.domain.source(g)?;
        let t_phi = crate::homs::transversal_map(&phi, &x)?;
        let eps_k = arrow_transport(&sigma, k)?;
        let eps_g = arrow_effect(&phi.domain, g)?;
        let psi_h = psi.apply(h)?;
        let eps_psi_h = arrow_effect(&sigma, &psi_h)?;
        let lhs = &eps_k.matrix * &t_phi.matrix * &eps_g.map.matrix;
        let rhs = &eps_psi_h.map.matrix * &eps_k.matrix * &t_phi.matrix;
        worst = worst.max(approx_f64((lhs - rhs).norm()));
    }
    Ok(worst)
}

/// Whether two arrows with common endpoints agree modulo ineffective
/// isotropy: h2^{-1} h1 is isotropic and ineffective.
pub fn arrows_congruent<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    h1: &Arrow<T>,
    h2: &Arrow<T>,
) -> Result<bool> {
    let ds = groupoid.point_dist(&groupoid.source(h1)?, &groupoid.source(h2)?)?;
    let dt = groupoid.point_dist(&groupoid.target(h1)?, &groupoid.target(h2)?)?;
    if ds.max(dt) > groupoid.tol.map_abs_tol {
        return Ok(false);
    }
    let d = groupoid.compose(&groupoid.inverse(h2)?, h1)?;
    if groupoid.isotropy_defect(&d)? > groupoid.tol.map_abs_tol {
        return Ok(false);
    }
    Ok(is_ineffective(groupoid, &d)?.0)
}

/// A point of the transversal skeleton: base points on both sides, the
/// sampled effect-level isotropy map, and the induced transversal map.
pub struct SkeletonPoint<T: Scalar> {
    pub x: BasePoint<T>,
    pub y: BasePoint<T>,
    /// Pairs (effect of g, effect of phi(g)) over sampled isotropy at x,
    /// deduplicated in the first component.
    pub theta_table: Vec<(DMatrix<T>, DMatrix<T>)>,
    pub lambda: QuotientLinearMap<T>,
    pub equivariance_residual: f64,
}

impl<T: Scalar> std::fmt::Debug for SkeletonPoint<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SkeletonPoint")
            .field("table_len", &self.theta_table.len())
            .field("lambda_shape", &self.lambda.matrix.shape())
            .field("equivariance_residual", &self.equivariance_residual)
            .finish()
    }
}

/// The skeleton datum of a hom at a base point, from sampled isotropy.
pub fn skeleton_point<T: Scalar>(
    phi: &GroupoidHom<T>,
    x: &BasePoint<T>,
    isotropy_samples: &[Arrow<T>],
) -> Result<SkeletonPoint<T>> {
    let lambda = crate::homs::transversal_map(phi, x)?;
    let y = phi.base_map(x)?;
    let tol = phi.domain.tol.map_abs_tol;
    let mut table: Vec<(DMatrix<T>, DMatrix<T>)> = Vec::new();
    let mut worst = 0.0f64;
    let dim_src = lambda.source.dim();
    let dim_dst = lambda.target.dim();
    table.push((DMatrix::identity(dim_src, dim_src), DMatrix::identity(dim_dst, dim_dst)));
    for g in isotropy_samples {
        let up = arrow_effect(&phi.domain, g)?;
        let down = arrow_effect(&phi.codomain, &phi.apply(g)?)?;
        let residual =
            (&lambda.matrix * &up.map.matrix - &down.map.matrix * &lambda.matrix).norm();
        worst = worst.max(approx_f64(residual));
        if approx_f64(residual) > approx_f64(tol) {
            return Err(Error::MalformedArrow {
                context: "skeleton datum fails theta-equivariance; hom is outside the dotted \
                          subcategory at this point"
                    .into(),
                residual: approx_f64(residual),
            });
        }
        if !table.iter().any(|(e, _)| (e - &up.map.matrix).norm() <= tol) {
            table.push((up.map.matrix, down.map.matrix));
        }
    }
    Ok(SkeletonPoint { x: x.clone(), y, theta_table: table, lambda, equivariance_residual: worst })
}

/// Conjugation-equivalence of two skeleton points by a witness pair of
/// arrows (g: x1 -> x2 in the domain, h: y1 -> y2 in the codomain).
pub fn skeleton_equivalence_check<T: Scalar>(
    domain: &GroupoidModel<T>,
    codomain: &GroupoidModel<T>,
    p1: &SkeletonPoint<T>,
    p2: &SkeletonPoint<T>,
    witness: (&Arrow<T>, &Arrow<T>),
) -> Result<(bool, f64)> {
    let (g, h) = witness;
    let typing = domain.point_dist(&domain.source(g)?, &p1.x)?
        .max(domain.point_dist(&domain.target(g)?, &p2.x)?)
        .max(codomain.point_dist(&codomain.source(h)?, &p1.y)?)
        .max(codomain.point_dist(&codomain.target(h)?, &p2.y)?);
    if typing > domain.tol.map_abs_tol {
        return Err(Error::Typing(format!(
            "witness arrows are not typed between the skeleton points ({:.3e})",
            approx_f64(typing)
        )));
    }
    let tg = arrow_transport(domain, g)?;
    let th = arrow_transport(codomain, h)?;
    let tg_inv = tg
        .try_inverse()
        .ok_or_else(|| Error::Unsupported("witness transport not invertible".into()))?;
    let th_inv = th
        .try_inverse()
        .ok_or_else(|| Error::Unsupported("witness transport not invertible".into()))?;

    let tol = domain.tol.map_abs_tol;
    let mut worst = 0.0f64;
    // lambda2 . eps(g) = eps(h) . lambda1
    let lambda_dev =
        (&p2.lambda.matrix * &tg.matrix - &th.matrix * &p1.lambda.matrix).norm();
    worst = worst.max(approx_f64(lambda_dev));
    // theta2 . c_g = c_h . theta1 at effect level.
    for (e, f) in &p1.theta_table {
        let conj_e = &tg.matrix * e * &tg_inv.matrix;
        let expected_f = &th.matrix * f * &th_inv.matrix;
        match p1_table_lookup(&p2.theta_table, &conj_e, tol) {
            Some(found_f) => {
                worst = worst.max(approx_f64((found_f - &expected_f).norm()));
            }
            None => {
                worst = worst.max(1.0);
            }
        }
    }
    Ok((worst <= approx_f64(tol), worst))
}

fn p1_table_lookup<'a, T: Scalar>(
    table: &'a [(DMatrix<T>, DMatrix<T>)],
    key: &DMatrix<T>,
    tol: T,
) -> Option<&'a DMatrix<T>> {
    table
        .iter()
        .find(|(e, _)| e.shape() == key.shape() && (e - key).norm() <= tol)
        .map(|(_, f)| f)
}

/// Composition of skeleton points along matching middle base points.
pub fn skeleton_compose<T: Scalar>(
    middle: &GroupoidModel<T>,
    p: &SkeletonPoint<T>,
    q: &SkeletonPoint<T>,
) -> Result<SkeletonPoint<T>> {
    let gap = middle.point_dist(&p.y, &q.x)?;
    if gap > middle.tol.map_abs_tol {
        return Err(Error::Typing(format!(
            "skeleton composition base mismatch ({:.3e})",
            approx_f64(gap)
        )));
    }
    let tol = middle.tol.map_abs_tol;
    let mut table = Vec::new();
    let mut dropped = 0usize;
    for (e, f) in &p.theta_table {
        match p1_table_lookup(&q.theta_table, f, tol) {
            Some(k) => table.push((e.clone(), k.clone())),
            None => dropped += 1,
        }
    }
    if dropped > 0 && table.len() <= 1 {
        return Err(Error::Undetermined(
            "skeleton tables share no sampled elements beyond the unit".into(),
        ));
    }
    let lambda = q.lambda.compose(&p.lambda)?;
    Ok(SkeletonPoint {
        x: p.x.clone(),
        y: q.y.clone(),
        theta_table: table,
        lambda,
        equivariance_residual: p.equivariance_residual.max(q.equivariance_residual),
    })
}

#[derive(Debug, Clone)]
pub struct ModelIsoPointReport {
    pub lambda_invertible: bool,
    pub condition_number: f64,
    pub theta_injective: bool,
    pub theta_surjective: bool,
    pub match_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ModelIsoReport {
    pub points: Vec<ModelIsoPointReport>,
}

impl ModelIsoReport {
    pub fn passes(&self) -> bool {
        !self.points.is_empty()
            && self.points.iter().all(|p| {
                p.lambda_invertible && p.theta_injective && p.theta_surjective
            })
    }
}

/// Check the effective-infinitesimal-model comparison at sampled points: the
/// transversal map must be invertible and the sampled effect-level isotropy
/// map must biject onto the codomain's sampled effective model.
pub fn model_isomorphism_check<T: Scalar>(
    phi: &GroupoidHom<T>,
    points: &[BasePoint<T>],
    rng: &mut Rng,
    isotropy_per_point: usize,
) -> Result<ModelIsoReport> {
    let tol = phi.domain.tol.map_abs_tol;
    let mut report = ModelIsoReport::default();
    for x in points {
        let lambda = crate::homs::transversal_map(phi, x)?;
        let square = lambda.matrix.nrows() == lambda.matrix.ncols();
        let invertible = square
            && numeric_rank(&lambda.matrix, &phi.domain.tol) == lambda.matrix.ncols();
        let condition_number = approx_f64(lambda.condition_number());

        let mut up_samples = Vec::new();
        for _ in 0..isotropy_per_point {
            if let Some(g) = phi.domain.sample_isotropy(rng, x)? {
                up_samples.push(g);
            }
        }
        let up_model = effect::effective_infinitesimal_model(&phi.domain, x, &up_samples)?;
        let y = phi.base_map(x)?;
        let mut down_samples = Vec::new();
        for _ in 0..isotropy_per_point {
            if let Some(h) = phi.codomain.sample_isotropy(rng, &y)? {
                down_samples.push(h);
            }
        }
        let down_model = effect::effective_infinitesimal_model(&phi.codomain, &y, &down_samples)?;

        // Push the upstairs table through phi and compare with the downstairs
        // sampled model.
        let mut pushed: Vec<(DMatrix<T>, DMatrix<T>)> = Vec::new();
        for g in &up_samples {
            let e_up = arrow_effect(&phi.domain, g)?.map.matrix;
            let e_down = arrow_effect(&phi.codomain, &phi.apply(g)?)?.map.matrix;
            if !pushed.iter().any(|(e, _)| (e - &e_up).norm() <= tol) {
                pushed.push((e_up, e_down));
            }
        }
        let dim = up_model.quotient.dim();
        let ddim = down_model.quotient.dim();
        pushed.push((DMatrix::identity(dim, dim), DMatrix::identity(ddim, ddim)));

        let mut injective = true;
        for (i, (e1, f1)) in pushed.iter().enumerate() {
            for (e2, f2) in pushed.iter().skip(i + 1) {
                let distinct_up = (e1 - e2).norm() > tol;
                let collide_down = (f1 - f2).norm() <= tol;
                if distinct_up && collide_down {
                    injective = false;
                }
            }
        }
        let mut match_residual = 0.0f64;
        let mut surjective = true;
        for (_, down_e) in &down_model.effects {
            let best = pushed
                .iter()
                .map(|(_, f)| approx_f64((f - down_e).norm()))
                .fold(f64::INFINITY, f64::min);
            match_residual = match_residual.max(best);
            if best > approx_f64(tol) {
                surjective = false;
            }
        }
        report.points.push(ModelIsoPointReport {
            lambda_invertible: invertible,
            condition_number,
            theta_injective: injective,
            theta_surjective: surjective,
            match_residual,
        });
    }
    Ok(report)
}
