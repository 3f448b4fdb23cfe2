//! Witnessed classification of homomorphisms against the taxonomy:
//! membership in the dotted subcategory, transversality, complete
//! transversality, smooth fullness, sampled faithfulness, faithful
//! transversality, weak equivalence, and membership in the inverted class.
//!
//! Flags that cannot be decided from finite data without a witness
//! (surjectivity, smooth lifts) are never inferred: a missing witness leaves
//! the flag undetermined.

use serde::Serialize;

use super::{intertwining_check, transversal_map, GroupoidHom};
use crate::effect;
use crate::error::Result;
use crate::groupoid::BasePoint;
use crate::numlin::numeric_rank;
use crate::rng::Rng;
use crate::scalar::{approx_f64, real, Scalar};

/// Three-valued verdict with evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    True,
    False,
    Undetermined,
}

impl Flag {
    pub fn and(self, other: Flag) -> Flag {
        use Flag::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (Undetermined, _) | (_, Undetermined) => Undetermined,
            (True, True) => True,
        }
    }

    pub fn is_true(self) -> bool {
        self == Flag::True
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagEvidence {
    pub flag: Flag,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
}

impl FlagEvidence {
    fn new(flag: Flag, detail: impl Into<String>, metric: Option<f64>) -> Self {
        Self { flag, detail: detail.into(), metric }
    }

    fn undetermined(detail: impl Into<String>) -> Self {
        Self::new(Flag::Undetermined, detail, None)
    }
}

/// The flag record of a classified homomorphism.
#[derive(Debug, Clone, Serialize)]
pub struct HomClassification {
    pub hom: String,
    pub in_dotted_category: FlagEvidence,
    pub transversal: FlagEvidence,
    pub completely_transversal: FlagEvidence,
    pub cinfty_full: FlagEvidence,
    pub faithful_at_samples: FlagEvidence,
    pub faithfully_transversal: FlagEvidence,
    pub weak_equivalence: FlagEvidence,
    pub in_e: FlagEvidence,
    /// Max intertwining residual observed while classifying; holds for every
    /// hom, so a large value signals a malformed hom rather than a flag.
    pub intertwining_residual: f64,
}

impl HomClassification {
    pub fn in_e(&self) -> bool {
        self.in_e.flag.is_true()
    }

    pub fn weak_equivalence(&self) -> bool {
        self.weak_equivalence.flag.is_true()
    }
}

#[derive(Debug, Clone)]
pub struct ClassifySettings {
    pub isotropy_per_point: usize,
    pub lift_cases: usize,
    pub surjectivity_cases: usize,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self { isotropy_per_point: 16, lift_cases: 16, surjectivity_cases: 32 }
    }
}

pub fn classify<T: Scalar>(
    hom: &GroupoidHom<T>,
    points: &[BasePoint<T>],
    rng: &mut Rng,
    settings: &ClassifySettings,
) -> Result<HomClassification> {
    let tol = hom.domain.tol;

    // Transversality and injectivity margins through the quotient maps,
    // where a flat chart exists; otherwise through the base section.
    let mut surj_margin = f64::INFINITY;
    let mut inj_margin = f64::INFINITY;
    let mut t_available = true;
    let mut injective_all = true;
    let mut surjective_all = true;
    for x in points {
        match transversal_map(hom, x) {
            Ok(t) => {
                let rank = numeric_rank(&t.matrix, &tol);
                let (_, sigma) = crate::numlin::jacobi_svd(&t.matrix);
                let margin_at = |d: usize| -> f64 {
                    if d == 0 || d > sigma.len() {
                        0.0
                    } else {
                        approx_f64(sigma[d - 1])
                    }
                };
                if rank < t.target.dim() {
                    surjective_all = false;
                    surj_margin = 0.0;
                } else if t.target.dim() > 0 {
                    surj_margin = surj_margin.min(margin_at(t.target.dim()));
                }
                if rank < t.source.dim() {
                    injective_all = false;
                    inj_margin = 0.0;
                } else if t.source.dim() > 0 {
                    inj_margin = inj_margin.min(margin_at(t.source.dim()));
                }
            }
            Err(_) => {
                t_available = false;
                break;
            }
        }
    }

    let finite = |m: f64| if m.is_finite() { Some(m) } else { None };
    let transversal = if t_available {
        if surjective_all {
            FlagEvidence::new(
                Flag::True,
                format!("quotient map has full row rank at {} sampled points", points.len()),
                finite(surj_margin),
            )
        } else {
            FlagEvidence::new(
                Flag::False,
                "quotient map fails to be surjective at a sampled point",
                Some(0.0),
            )
        }
    } else if let Some(section) = &hom.witnesses.base_section {
        // Submersivity evidence through a section of the base map: perturbed
        // codomain points must admit preimage base points.
        let mut worst = 0.0f64;
        let mut failed = false;
        let mut tried = 0usize;
        'outer: for x in points {
            let fx = hom.base_map(x)?;
            for _ in 0..4 {
                let shifted = match perturb(&fx, rng, 1e-3) {
                    Some(p) => p,
                    None => fx.clone(),
                };
                tried += 1;
                match section(&shifted) {
                    Some(pre) => {
                        let back = hom.base_map(&pre)?;
                        let resid =
                            approx_f64(hom.codomain.point_dist(&back, &shifted)?);
                        worst = worst.max(resid);
                        if resid > approx_f64(tol.map_abs_tol) {
                            failed = true;
                            break 'outer;
                        }
                    }
                    None => {
                        failed = true;
                        break 'outer;
                    }
                }
            }
        }
        if failed {
            FlagEvidence::new(Flag::False, "base section failed on a perturbed point", Some(worst))
        } else {
            FlagEvidence::new(
                Flag::True,
                format!("base section produced preimages for {tried} perturbed points"),
                Some(worst),
            )
        }
    } else {
        FlagEvidence::undetermined("no quotient chart and no base section supplied")
    };

    // Complete transversality: transversal plus verified surjectivity
    // witnesses on sampled codomain points.
    let completely_transversal = match &hom.witnesses.surjectivity {
        None => FlagEvidence::undetermined("no surjectivity witness supplied"),
        Some(w) => {
            let mut worst = 0.0f64;
            let mut outcome = Flag::True;
            let mut detail = String::new();
            for i in 0..settings.surjectivity_cases {
                let c = hom.codomain.sample_base(rng)?;
                match w(&c) {
                    None => {
                        outcome = Flag::False;
                        detail = format!("witness returned nothing for sampled point {i}");
                        break;
                    }
                    Some((x, connecting)) => {
                        let fx = hom.base_map(&x)?;
                        let ds =
                            hom.codomain.point_dist(&hom.codomain.source(&connecting)?, &fx)?;
                        let dt = hom.codomain.point_dist(&hom.codomain.target(&connecting)?, &c)?;
                        let resid = approx_f64(ds.max(dt));
                        worst = worst.max(resid);
                        if resid > approx_f64(tol.map_abs_tol) {
                            outcome = Flag::False;
                            detail = format!("witness arrow has endpoint residual {resid:.3e}");
                            break;
                        }
                    }
                }
            }
            if detail.is_empty() {
                detail = format!(
                    "verified connecting arrows for {} sampled codomain points",
                    settings.surjectivity_cases
                );
            }
            FlagEvidence::new(transversal.flag.and(outcome), detail, Some(worst))
        }
    };

    // Smooth fullness through the lift witness, exercised on arrows built
    // from the image of the hom composed with sampled codomain isotropy.
    let cinfty_full = match &hom.witnesses.lift {
        None => FlagEvidence::undetermined("no lift witness supplied"),
        Some(lift) => {
            let mut worst = 0.0f64;
            let mut outcome = Flag::True;
            let mut detail = String::new();
            'cases: for i in 0..settings.lift_cases {
                let x = points[i % points.len()].clone();
                let a = hom.domain.sample_arrow(rng, Some(&x))?;
                let x2 = hom.domain.target(&a)?;
                let mut h = hom.apply(&a)?;
                let fx2 = hom.base_map(&x2)?;
                if let Some(n) = hom.codomain.sample_isotropy(rng, &fx2)? {
                    h = hom.codomain.compose(&n, &h)?;
                }
                match lift(&h, &x, &x2) {
                    None => {
                        outcome = Flag::False;
                        detail = format!("lift returned nothing on case {i}");
                        break 'cases;
                    }
                    Some(g) => {
                        let image = hom.apply(&g)?;
                        let dh = hom.codomain.arrow_dist(&image, &h)?;
                        let ds = hom.domain.point_dist(&hom.domain.source(&g)?, &x)?;
                        let dt = hom.domain.point_dist(&hom.domain.target(&g)?, &x2)?;
                        let resid = approx_f64(dh.max(ds).max(dt));
                        worst = worst.max(resid);
                        if resid > approx_f64(tol.map_abs_tol) {
                            outcome = Flag::False;
                            detail = format!("lifted arrow misses by {resid:.3e} on case {i}");
                            break 'cases;
                        }
                    }
                }
            }
            if detail.is_empty() {
                detail = format!("verified {} lift cases", settings.lift_cases);
            }
            FlagEvidence::new(outcome, detail, Some(worst))
        }
    };

    // Dotted subcategory membership and faithfulness on sampled isotropy.
    let mut dotted = Flag::True;
    let mut dotted_detail = String::new();
    let mut dotted_metric = 0.0f64;
    let mut nontrivial = 0usize;
    let mut faithful = Flag::True;
    let mut faithful_detail = String::new();
    let mut intertwining_residual = 0.0f64;
    for x in points {
        let mut samples = Vec::new();
        for _ in 0..settings.isotropy_per_point {
            if let Some(g) = hom.domain.sample_isotropy(rng, x)? {
                samples.push(g);
            }
        }
        let unit = hom.domain.unit(x)?;
        samples.push(unit.clone());
        for g in &samples {
            if hom.domain.arrow_dist(g, &unit)? > tol.map_abs_tol {
                nontrivial += 1;
            }
            let (up_ineff, _) = effect::is_ineffective(&hom.domain, g)?;
            if up_ineff {
                let image = hom.apply(g)?;
                let (down_ineff, down_dev) = effect::is_ineffective(&hom.codomain, &image)?;
                dotted_metric = dotted_metric.max(approx_f64(down_dev));
                if !down_ineff {
                    dotted = Flag::False;
                    dotted_detail =
                        format!("ineffective arrow maps to effect deviating by {:.3e}", approx_f64(down_dev));
                }
            }
        }
        // Pairwise faithfulness on the sampled isotropy.
        for (i, a) in samples.iter().enumerate() {
            for b in samples.iter().skip(i + 1) {
                if hom.domain.arrow_dist(a, b)? > real::<T>(1e-6) {
                    let da = hom.apply(a)?;
                    let db = hom.apply(b)?;
                    if hom.codomain.arrow_dist(&da, &db)? <= tol.map_abs_tol {
                        faithful = Flag::False;
                        faithful_detail = "distinct isotropic arrows collide in the image".into();
                    }
                }
            }
        }
        if let Ok(resid) = intertwining_check(hom, x, &samples) {
            intertwining_residual = intertwining_residual.max(resid);
        }
    }
    if dotted_detail.is_empty() {
        dotted_detail = format!("preserved on samples ({nontrivial} nontrivial)");
    }
    if faithful_detail.is_empty() {
        faithful_detail = format!("no collisions among sampled isotropy ({nontrivial} nontrivial)");
    }

    let faithfully_transversal = if !t_available {
        FlagEvidence::undetermined("no quotient chart for the injectivity margin")
    } else {
        let thr = approx_f64(tol.rank_rel_tol);
        if transversal.flag.is_true() && injective_all && inj_margin > thr {
            FlagEvidence::new(
                Flag::True,
                "transversal with injective quotient maps at all sampled points",
                finite(inj_margin),
            )
        } else {
            FlagEvidence::new(
                transversal.flag.and(if injective_all { Flag::True } else { Flag::False }),
                "quotient map not injective at a sampled point or transversality fails",
                Some(if injective_all && inj_margin.is_finite() { inj_margin } else { 0.0 }),
            )
        }
    };

    let weak_equivalence = {
        let flag = completely_transversal
            .flag
            .and(cinfty_full.flag)
            .and(faithful)
            .and(faithfully_transversal.flag);
        FlagEvidence::new(
            flag,
            "conjunction of complete transversality, smooth fullness, sampled faithfulness and faithful transversality",
            None,
        )
    };

    let in_e = {
        let flag = cinfty_full.flag.and(completely_transversal.flag);
        FlagEvidence::new(flag, "smooth-full and completely transversal", None)
    };

    Ok(HomClassification {
        hom: hom.name.clone(),
        in_dotted_category: FlagEvidence::new(dotted, dotted_detail, Some(dotted_metric)),
        transversal,
        completely_transversal,
        cinfty_full,
        faithful_at_samples: FlagEvidence::new(faithful, faithful_detail, None),
        faithfully_transversal,
        weak_equivalence,
        in_e,
        intertwining_residual,
    })
}

/// Gaussian perturbation of a flat base point; fibered points are returned
/// unchanged (None signals that no perturbation was possible).
fn perturb<T: Scalar>(p: &BasePoint<T>, rng: &mut Rng, scale: f64) -> Option<BasePoint<T>> {
    match p {
        BasePoint::Flat(v) => {
            let noise = crate::rng::normal_vector::<T>(rng, v.len()) * real::<T>(scale);
            Some(BasePoint::Flat(v + noise))
        }
        BasePoint::Triple { .. } => None,
    }
}
