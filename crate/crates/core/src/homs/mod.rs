//! Homomorphisms of groupoid models: structured arrow maps with base-level
//! first-order data, witness payloads (smooth lifts, surjectivity sections)
//! and the taxonomy classifier.

mod classify;
mod congruence;

pub use classify::{classify, ClassifySettings, Flag, FlagEvidence, HomClassification};
pub use congruence::{
    congruence_obstruction, natural_congruence_check, natural_transformation_effect_check,
    orbit_map_check, CongruenceMode, CongruenceReport, NaturalTransformationWitness,
    ObstructionOutcome, OrbitMapReport,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::effect::{self, transversal_space};
use crate::error::{Error, Result};
use crate::groupoid::{make_class, Arrow, BaseMapData, BasePoint, GroupoidKind, GroupoidModel};
use crate::numlin::{induced_quotient_map, QuotientLinearMap};
use crate::scalar::{approx_f64, Scalar};

type ApplyFn<T> = Arc<dyn Fn(&Arrow<T>) -> Result<Arrow<T>> + Send + Sync>;
type BaseMapFn<T> = Arc<dyn Fn(&BasePoint<T>) -> Result<BasePoint<T>> + Send + Sync>;
type BaseJacFn<T> = Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;
type LiftFn<T> =
    Arc<dyn Fn(&Arrow<T>, &BasePoint<T>, &BasePoint<T>) -> Option<Arrow<T>> + Send + Sync>;
type SurjectivityFn<T> =
    Arc<dyn Fn(&BasePoint<T>) -> Option<(BasePoint<T>, Arrow<T>)> + Send + Sync>;
type SectionFn<T> = Arc<dyn Fn(&BasePoint<T>) -> Option<BasePoint<T>> + Send + Sync>;

/// Constructor tag of a homomorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomKind {
    Identity,
    Translation,
    QuotientProjection,
    PullbackProjection,
    WeakPullbackProjDelta,
    WeakPullbackProjGamma,
    Composite,
    Custom,
}

/// Witness payloads backing the non-inferable classification flags.
///
/// `lift` certifies smooth fullness pointwise: given a codomain arrow and
/// prescribed domain endpoints it must return a preimage arrow with those
/// endpoints. `surjectivity` certifies complete transversality: for a
/// codomain base point it returns a domain point and an arrow connecting the
/// image of that point to the given one. `base_section` is a section of the
/// base map, used as submersivity evidence where no Jacobian exists.
#[derive(Clone, Default)]
pub struct Witnesses<T: Scalar> {
    pub lift: Option<LiftFn<T>>,
    pub surjectivity: Option<SurjectivityFn<T>>,
    pub base_section: Option<SectionFn<T>>,
}

impl<T: Scalar> std::fmt::Debug for Witnesses<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Witnesses")
            .field("lift", &self.lift.is_some())
            .field("surjectivity", &self.surjectivity.is_some())
            .field("base_section", &self.base_section.is_some())
            .finish()
    }
}

/// A homomorphism of groupoid models.
pub struct GroupoidHom<T: Scalar> {
    pub name: String,
    pub kind: HomKind,
    pub domain: Arc<GroupoidModel<T>>,
    pub codomain: Arc<GroupoidModel<T>>,
    apply: ApplyFn<T>,
    base_map: BaseMapFn<T>,
    base_jacobian: Option<BaseJacFn<T>>,
    pub witnesses: Witnesses<T>,
}

impl<T: Scalar> std::fmt::Debug for GroupoidHom<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupoidHom({}: {} -> {})", self.name, self.domain.name, self.codomain.name)
    }
}

impl<T: Scalar> GroupoidHom<T> {
    pub fn apply(&self, a: &Arrow<T>) -> Result<Arrow<T>> {
        (self.apply)(a)
    }

    pub fn base_map(&self, x: &BasePoint<T>) -> Result<BasePoint<T>> {
        (self.base_map)(x)
    }

    pub fn base_jacobian(&self, x: &BasePoint<T>) -> Result<DMatrix<T>> {
        match &self.base_jacobian {
            Some(j) => Ok(j(x.as_flat()?)),
            None => Err(Error::Unsupported(format!(
                "hom {} has no base Jacobian (fibered base)",
                self.name
            ))),
        }
    }

    pub fn has_base_jacobian(&self) -> bool {
        self.base_jacobian.is_some()
    }

    // ----- builders --------------------------------------------------------

    pub fn identity(groupoid: Arc<GroupoidModel<T>>) -> Self {
        let g_unit = groupoid.clone();
        let g_surj = groupoid.clone();
        let dim = groupoid.base_dim;
        let tol = groupoid.tol;
        let g_lift = groupoid.clone();
        Self {
            name: format!("id[{}]", groupoid.name),
            kind: HomKind::Identity,
            domain: groupoid.clone(),
            codomain: groupoid.clone(),
            apply: Arc::new(|a: &Arrow<T>| Ok(a.clone())),
            base_map: Arc::new(|x: &BasePoint<T>| Ok(x.clone())),
            base_jacobian: Some(Arc::new(move |_: &DVector<T>| DMatrix::identity(dim, dim))),
            witnesses: Witnesses {
                lift: Some(Arc::new(move |a, x, x2| {
                    let s_ok = g_lift.source(a).ok().and_then(|s| g_lift.point_dist(&s, x).ok());
                    let t_ok = g_lift.target(a).ok().and_then(|t| g_lift.point_dist(&t, x2).ok());
                    match (s_ok, t_ok) {
                        (Some(ds), Some(dt)) if ds <= tol.map_abs_tol && dt <= tol.map_abs_tol => {
                            Some(a.clone())
                        }
                        _ => None,
                    }
                })),
                surjectivity: Some(Arc::new(move |c: &BasePoint<T>| {
                    g_surj.unit(c).ok().map(|u| (c.clone(), u))
                })),
                base_section: Some(Arc::new(move |c: &BasePoint<T>| {
                    let _ = &g_unit;
                    Some(c.clone())
                })),
            },
        }
    }

    /// Hom between translation-type groupoids determined by a base map and a
    /// (possibly base-dependent) map on group elements. Quotient-class arrows
    /// are evaluated on their canonical representative.
    pub fn translation(
        name: impl Into<String>,
        domain: Arc<GroupoidModel<T>>,
        codomain: Arc<GroupoidModel<T>>,
        arrow_map: impl Fn(&DMatrix<T>, &DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
        base: BaseMapData<T>,
    ) -> Self {
        let arrow_map = Arc::new(arrow_map);
        let map = base.map.clone();
        let map2 = base.map.clone();
        let jac = base.jacobian.clone();
        let codp = codomain.clone();
        let am = arrow_map.clone();
        Self {
            name: name.into(),
            kind: HomKind::Translation,
            domain,
            codomain,
            apply: Arc::new(move |a: &Arrow<T>| {
                let (g, x) = flat_parts(a)?;
                let out_g = am(g, x);
                let out_x = map(x);
                flat_arrow(&codp, out_g, out_x)
            }),
            base_map: Arc::new(move |x: &BasePoint<T>| Ok(BasePoint::Flat(map2(x.as_flat()?)))),
            base_jacobian: Some(Arc::new(move |x: &DVector<T>| jac(x))),
            witnesses: Witnesses::default(),
        }
    }

    /// The projection of a rotation groupoid onto its quotient by a kernel.
    pub fn quotient_projection(
        base: Arc<GroupoidModel<T>>,
        quotient: Arc<GroupoidModel<T>>,
    ) -> Result<Self> {
        let kernel = match &quotient.kind {
            GroupoidKind::Quotient { kernel, .. } => kernel.clone(),
            _ => return Err(Error::Typing("codomain is not a quotient groupoid".into())),
        };
        let dim = base.base_dim;
        Ok(Self {
            name: format!("proj[{}/{}]", base.name, kernel.scale),
            kind: HomKind::QuotientProjection,
            domain: base,
            codomain: quotient,
            apply: Arc::new(move |a: &Arrow<T>| match a {
                Arrow::Translation { .. } => Ok(make_class(&kernel, a.clone())),
                _ => Err(Error::Typing("quotient projection expects translation arrows".into())),
            }),
            base_map: Arc::new(|x: &BasePoint<T>| Ok(x.clone())),
            base_jacobian: Some(Arc::new(move |_: &DVector<T>| DMatrix::identity(dim, dim))),
            witnesses: Witnesses::default(),
        })
    }

    /// The canonical projection of a pullback groupoid onto its target.
    /// Its smooth lift is constructive: an arrow over prescribed endpoints is
    /// the triple itself.
    pub fn pullback_projection(pullback: Arc<GroupoidModel<T>>) -> Result<Self> {
        let (target, map) = match &pullback.kind {
            GroupoidKind::Pullback { target, map } => (target.clone(), map.clone()),
            _ => return Err(Error::Typing("domain is not a pullback groupoid".into())),
        };
        let jac = map.jacobian.clone();
        let fmap = map.map.clone();
        let tol = pullback.tol;
        let target_lift = target.clone();
        let fmap_lift = map.map.clone();
        Ok(Self {
            name: format!("pi[{}]", pullback.name),
            kind: HomKind::PullbackProjection,
            domain: pullback,
            codomain: target.clone(),
            apply: Arc::new(|a: &Arrow<T>| match a {
                Arrow::Pullback { inner, .. } => Ok((**inner).clone()),
                _ => Err(Error::Typing("pullback projection expects pullback arrows".into())),
            }),
            base_map: Arc::new(move |x: &BasePoint<T>| Ok(BasePoint::Flat(fmap(x.as_flat()?)))),
            base_jacobian: Some(Arc::new(move |x: &DVector<T>| jac(x))),
            witnesses: Witnesses {
                lift: Some(Arc::new(move |h: &Arrow<T>, x: &BasePoint<T>, x2: &BasePoint<T>| {
                    let (Ok(xv), Ok(x2v)) = (x.as_flat(), x2.as_flat()) else { return None };
                    let fits = |p: &DVector<T>, q: &BasePoint<T>| -> bool {
                        target_lift
                            .point_dist(&BasePoint::Flat(fmap_lift(p)), q)
                            .map(|d| d <= tol.map_abs_tol)
                            .unwrap_or(false)
                    };
                    let (Ok(sh), Ok(th)) = (target_lift.source(h), target_lift.target(h)) else {
                        return None;
                    };
                    if fits(xv, &sh) && fits(x2v, &th) {
                        Some(Arrow::Pullback {
                            target_pt: x2v.clone(),
                            inner: Box::new(h.clone()),
                            source_pt: xv.clone(),
                        })
                    } else {
                        None
                    }
                })),
                surjectivity: None,
                base_section: map.section.clone().map(|s| {
                    let s: SectionFn<T> =
                        Arc::new(move |y: &BasePoint<T>| {
                            y.as_flat().ok().and_then(|yv| s(yv)).map(BasePoint::Flat)
                        });
                    s
                }),
            },
        })
    }

    /// Fully explicit hom from closures; used for scenario-specific maps that
    /// do not fit a canned shape (bundle endomorphisms, bridge maps).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: impl Into<String>,
        kind: HomKind,
        domain: Arc<GroupoidModel<T>>,
        codomain: Arc<GroupoidModel<T>>,
        apply: impl Fn(&Arrow<T>) -> Result<Arrow<T>> + Send + Sync + 'static,
        base_map: impl Fn(&BasePoint<T>) -> Result<BasePoint<T>> + Send + Sync + 'static,
        base_jacobian: Option<BaseJacFn<T>>,
        witnesses: Witnesses<T>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            domain,
            codomain,
            apply: Arc::new(apply),
            base_map: Arc::new(base_map),
            base_jacobian,
            witnesses,
        }
    }

    pub fn with_lift(
        mut self,
        lift: impl Fn(&Arrow<T>, &BasePoint<T>, &BasePoint<T>) -> Option<Arrow<T>>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.witnesses.lift = Some(Arc::new(lift));
        self
    }

    pub fn with_surjectivity(
        mut self,
        w: impl Fn(&BasePoint<T>) -> Option<(BasePoint<T>, Arrow<T>)> + Send + Sync + 'static,
    ) -> Self {
        self.witnesses.surjectivity = Some(Arc::new(w));
        self
    }

    pub fn with_base_section(
        mut self,
        s: impl Fn(&BasePoint<T>) -> Option<BasePoint<T>> + Send + Sync + 'static,
    ) -> Self {
        self.witnesses.base_section = Some(Arc::new(s));
        self
    }

    /// Composite `outer . inner`, with composed witnesses.
    pub fn compose(outer: &Arc<Self>, inner: &Arc<Self>) -> Result<Self> {
        if !Arc::ptr_eq(&inner.codomain, &outer.domain) {
            return Err(Error::Typing(format!(
                "cannot compose {} after {}: middle groupoid differs",
                outer.name, inner.name
            )));
        }
        let o = outer.clone();
        let i = inner.clone();
        let o2 = outer.clone();
        let i2 = inner.clone();
        let jac = match (&outer.base_jacobian, &inner.base_jacobian) {
            (Some(jo), Some(ji)) => {
                let jo = jo.clone();
                let ji = ji.clone();
                let im = inner.base_map.clone();
                let j: BaseJacFn<T> = Arc::new(move |x: &DVector<T>| {
                    let mid = im(&BasePoint::Flat(x.clone()))
                        .and_then(|p| p.as_flat().cloned())
                        .expect("flat middle point under composite Jacobian");
                    jo(&mid) * ji(x)
                });
                Some(j)
            }
            _ => None,
        };

        let lift = match (outer.witnesses.lift.clone(), inner.witnesses.lift.clone()) {
            (Some(lo), Some(li)) => {
                let im = inner.base_map.clone();
                let l: LiftFn<T> = Arc::new(move |a, x, x2| {
                    let mid_x = im(x).ok()?;
                    let mid_x2 = im(x2).ok()?;
                    let b = lo(a, &mid_x, &mid_x2)?;
                    li(&b, x, x2)
                });
                Some(l)
            }
            _ => None,
        };
        let surjectivity = match (
            outer.witnesses.surjectivity.clone(),
            inner.witnesses.surjectivity.clone(),
        ) {
            (Some(so), Some(si)) => {
                let oc = outer.codomain.clone();
                let oa = outer.clone();
                let s: SurjectivityFn<T> = Arc::new(move |c| {
                    let (y, h) = so(c)?;
                    let (x, m) = si(&y)?;
                    let m_img = oa.apply(&m).ok()?;
                    let connecting = oc.compose(&h, &m_img).ok()?;
                    Some((x, connecting))
                });
                Some(s)
            }
            _ => None,
        };
        let base_section = match (
            outer.witnesses.base_section.clone(),
            inner.witnesses.base_section.clone(),
        ) {
            (Some(so), Some(si)) => {
                let s: SectionFn<T> = Arc::new(move |c| si(&so(c)?));
                Some(s)
            }
            _ => None,
        };

        Ok(Self {
            name: format!("{}.{}", outer.name, inner.name),
            kind: HomKind::Composite,
            domain: inner.domain.clone(),
            codomain: outer.codomain.clone(),
            apply: Arc::new(move |a: &Arrow<T>| o.apply(&i.apply(a)?)),
            base_map: Arc::new(move |x: &BasePoint<T>| o2.base_map(&i2.base_map(x)?)),
            base_jacobian: jac,
            witnesses: Witnesses { lift, surjectivity, base_section },
        })
    }

    /// Max functoriality residual over sampled composable pairs, plus the
    /// max base-compatibility residual f(s(a)) vs s(apply(a)).
    pub fn functoriality_residual(
        &self,
        rng: &mut crate::rng::Rng,
        samples: usize,
    ) -> Result<(f64, f64)> {
        let mut worst = 0.0f64;
        let mut base_worst = 0.0f64;
        for _ in 0..samples {
            let x = self.domain.sample_base(rng)?;
            let a1 = self.domain.sample_arrow(rng, Some(&x))?;
            let t1 = self.domain.target(&a1)?;
            let a2 = self.domain.sample_arrow(rng, Some(&t1))?;
            let composite = self.domain.compose(&a2, &a1)?;
            let lhs = self.apply(&composite)?;
            let rhs = self.codomain.compose(&self.apply(&a2)?, &self.apply(&a1)?)?;
            worst = worst.max(approx_f64(self.codomain.arrow_dist(&lhs, &rhs)?));
            let fs = self.base_map(&x)?;
            let sa = self.codomain.source(&self.apply(&a1)?)?;
            base_worst = base_worst.max(approx_f64(self.codomain.point_dist(&fs, &sa)?));
        }
        Ok((worst, base_worst))
    }
}

/// Build the weak pullback of `phi` along `psi` together with its two
/// projections. The projection onto psi's domain carries constructive
/// witnesses assembled from phi's: a smooth lift (solving the conjugation
/// equation through phi's lift), a surjectivity witness (every base point of
/// psi's domain sits under a fibered triple), and a base section.
///
/// `phi` is required to be transversal; this is checked by classification at
/// sampled points before anything is built.
pub fn weak_pullback_with_projections<T: Scalar>(
    psi: Arc<GroupoidHom<T>>,
    phi: Arc<GroupoidHom<T>>,
    rng: &mut crate::rng::Rng,
    settings: &classify::ClassifySettings,
) -> Result<(Arc<GroupoidModel<T>>, GroupoidHom<T>, GroupoidHom<T>)> {
    let mut points = Vec::new();
    for _ in 0..6 {
        points.push(phi.domain.sample_base(rng)?);
    }
    let phi_class = classify::classify(&phi, &points, rng, settings)?;
    if phi_class.transversal.flag == classify::Flag::False {
        return Err(Error::Precondition(format!(
            "weak pullback needs a transversal hom; {} fails the rank check",
            phi.name
        )));
    }

    let name = format!("{}|^|{}", psi.domain.name, phi.domain.name);
    let wp = Arc::new(GroupoidModel::weak_pullback(name, psi.clone(), phi.clone())?);

    let sigma = psi.codomain.clone();

    // Projection onto psi's domain.
    let psi_l = psi.clone();
    let phi_l = phi.clone();
    let sigma_l = sigma.clone();
    let lift: LiftFn<T> = Arc::new(move |h: &Arrow<T>, z: &BasePoint<T>, z2: &BasePoint<T>| {
        let (BasePoint::Triple { mid: k, right: x, .. }, BasePoint::Triple { mid: k2, right: x2, .. }) =
            (z, z2)
        else {
            return None;
        };
        let phi_lift = phi_l.witnesses.lift.as_ref()?;
        // phi(g) must equal k2^{-1} psi(h) k.
        let psi_h = psi_l.apply(h).ok()?;
        let conj = sigma_l
            .compose(&sigma_l.inverse(k2).ok()?, &sigma_l.compose(&psi_h, k).ok()?)
            .ok()?;
        let g = phi_lift(&conj, x, x2)?;
        Some(Arrow::WeakPullback {
            left: Box::new(h.clone()),
            mid: k.clone(),
            right: Box::new(g),
        })
    });

    let psi_s = psi.clone();
    let phi_s = phi.clone();
    let triple_over = move |y: &BasePoint<T>| -> Option<BasePoint<T>> {
        let surj = phi_s.witnesses.surjectivity.as_ref()?;
        let psi_y = psi_s.base_map(y).ok()?;
        let (x, k) = surj(&psi_y)?;
        Some(BasePoint::Triple { left: Box::new(y.clone()), mid: Box::new(k), right: Box::new(x) })
    };
    let triple_over_surj = triple_over.clone();
    let psi_dom = psi.domain.clone();
    let surjectivity: SurjectivityFn<T> = Arc::new(move |y: &BasePoint<T>| {
        let z = triple_over_surj(y)?;
        let unit = psi_dom.unit(y).ok()?;
        Some((z, unit))
    });
    let triple_over_sec = triple_over;
    let section: SectionFn<T> = Arc::new(move |y: &BasePoint<T>| triple_over_sec(y));

    let pr_delta = GroupoidHom::from_parts(
        format!("pr[{}]", psi.domain.name),
        HomKind::WeakPullbackProjDelta,
        wp.clone(),
        psi.domain.clone(),
        |a: &Arrow<T>| Ok(a.weak_pullback_parts()?.0.clone()),
        |x: &BasePoint<T>| match x {
            BasePoint::Triple { left, .. } => Ok((**left).clone()),
            _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
        },
        None,
        Witnesses { lift: Some(lift), surjectivity: Some(surjectivity), base_section: Some(section) },
    );

    let pr_gamma = GroupoidHom::from_parts(
        format!("pr[{}]", phi.domain.name),
        HomKind::WeakPullbackProjGamma,
        wp.clone(),
        phi.domain.clone(),
        |a: &Arrow<T>| Ok(a.weak_pullback_parts()?.2.clone()),
        |x: &BasePoint<T>| match x {
            BasePoint::Triple { right, .. } => Ok((**right).clone()),
            _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
        },
        None,
        Witnesses::default(),
    );
    Ok((wp, pr_delta, pr_gamma))
}

/// Group element and source point of a flat (translation/bundle/quotient)
/// arrow; quotient classes expose their canonical representative.
pub fn flat_parts<T: Scalar>(a: &Arrow<T>) -> Result<(&DMatrix<T>, &DVector<T>)> {
    match a {
        Arrow::Translation { g, x } | Arrow::Bundle { g, x } => Ok((g, x)),
        Arrow::Quotient { normalized, .. } => flat_parts(normalized),
        _ => Err(Error::Typing("expected a flat arrow".into())),
    }
}

/// Build the flat arrow of the right variant for `codomain`.
pub fn flat_arrow<T: Scalar>(
    codomain: &GroupoidModel<T>,
    g: DMatrix<T>,
    x: DVector<T>,
) -> Result<Arrow<T>> {
    match &codomain.kind {
        GroupoidKind::Translation { .. } => Ok(Arrow::Translation { g, x }),
        GroupoidKind::GroupBundle { .. } => Ok(Arrow::Bundle { g, x }),
        GroupoidKind::Quotient { kernel, .. } => {
            Ok(make_class(kernel, Arrow::Translation { g, x }))
        }
        _ => Err(Error::Typing("flat arrow constructor needs a flat codomain".into())),
    }
}

/// The linear map induced between transversal spaces by the base map of a
/// hom at `x`. The longitudinal-preservation check inside
/// `induced_quotient_map` is the well-definedness test; a violation signals a
/// malformed hom.
pub fn transversal_map<T: Scalar>(
    hom: &GroupoidHom<T>,
    x: &BasePoint<T>,
) -> Result<QuotientLinearMap<T>> {
    match hom.kind {
        HomKind::WeakPullbackProjGamma => {
            // The transversal space of the weak pullback is already realized
            // on the Gamma component, so the projection descends to the
            // identity in those coordinates.
            let src = transversal_space(&hom.domain, x)?;
            let dst = transversal_space(&hom.codomain, &hom.base_map(x)?)?;
            if src.quotient.dim() != dst.quotient.dim() {
                return Err(Error::Dimension("weak pullback identification mismatch".into()));
            }
            Ok(QuotientLinearMap {
                matrix: DMatrix::identity(dst.quotient.dim(), src.quotient.dim()),
                source: src.quotient,
                target: dst.quotient,
            })
        }
        HomKind::WeakPullbackProjDelta => Err(Error::Unsupported(
            "transversal map of the Delta projection has no flat chart; use section evidence"
                .into(),
        )),
        _ => {
            let src = transversal_space(&hom.domain, x)?;
            let dst = transversal_space(&hom.codomain, &hom.base_map(x)?)?;
            let jac = hom.base_jacobian(x)?;
            induced_quotient_map(&jac, &src.quotient, &dst.quotient, &hom.domain.tol)
        }
    }
}

/// Max intertwining residual `|| T phi . eps(g) - eps(phi g) . T phi ||`
/// over isotropic samples at `x`.
pub fn intertwining_check<T: Scalar>(
    hom: &GroupoidHom<T>,
    x: &BasePoint<T>,
    isotropy_samples: &[Arrow<T>],
) -> Result<f64> {
    let tphi = transversal_map(hom, x)?;
    let mut worst = 0.0f64;
    for g in isotropy_samples {
        let up = effect::effect(&hom.domain, g)?;
        let down = effect::effect(&hom.codomain, &hom.apply(g)?)?;
        let lhs = &tphi.matrix * &up.map.matrix;
        let rhs = &down.map.matrix * &tphi.matrix;
        worst = worst.max(approx_f64((lhs - rhs).norm()));
    }
    Ok(worst)
}

/// Report of the ineffectivity-preservation implications at sampled points.
#[derive(Debug, Clone, Default)]
pub struct PreservationReport {
    pub cases: usize,
    /// Samples that were not units (the informative ones).
    pub nontrivial_cases: usize,
    /// (surjective T-map) ineffective upstairs must stay ineffective.
    pub surjective_violations: usize,
    /// (injective T-map) effective upstairs must stay effective.
    pub injective_violations: usize,
    /// Ineffective upstairs mapped to effective downstairs, regardless of
    /// rank data: membership in the dotted subcategory fails at the sample.
    pub dotted_violations: Vec<(usize, f64)>,
    /// Largest downstairs deviation over upstairs-ineffective samples.
    pub max_transferred_deviation: f64,
}

impl PreservationReport {
    pub fn in_dotted_at_samples(&self) -> bool {
        self.dotted_violations.is_empty()
    }
}

/// Check the rank-conditioned preservation implications of ineffectivity on
/// sampled isotropy, and decide sampled membership in the dotted subcategory.
pub fn ineffective_preservation_check<T: Scalar>(
    hom: &GroupoidHom<T>,
    points: &[BasePoint<T>],
    rng: &mut crate::rng::Rng,
    samples_per_point: usize,
) -> Result<PreservationReport> {
    let mut report = PreservationReport::default();
    for x in points {
        let (surjective, injective) = match transversal_map(hom, x) {
            Ok(tphi) => {
                let rank = crate::numlin::numeric_rank(&tphi.matrix, &hom.domain.tol);
                (rank == tphi.target.dim(), rank == tphi.source.dim())
            }
            Err(_) => (false, false),
        };
        for _ in 0..samples_per_point {
            let Some(g) = hom.domain.sample_isotropy(rng, x)? else { continue };
            let unit = hom.domain.unit(x)?;
            if hom.domain.arrow_dist(&g, &unit)? > hom.domain.tol.map_abs_tol {
                report.nontrivial_cases += 1;
            }
            report.cases += 1;
            let (up_ineff, _) = effect::is_ineffective(&hom.domain, &g)?;
            let image = hom.apply(&g)?;
            let (down_ineff, down_dev) = effect::is_ineffective(&hom.codomain, &image)?;
            if up_ineff {
                report.max_transferred_deviation =
                    report.max_transferred_deviation.max(approx_f64(down_dev));
                if !down_ineff {
                    report.dotted_violations.push((report.cases - 1, approx_f64(down_dev)));
                    if surjective {
                        report.surjective_violations += 1;
                    }
                }
            } else if injective && down_ineff {
                report.injective_violations += 1;
            }
        }
    }
    Ok(report)
}
