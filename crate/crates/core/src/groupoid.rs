//! Concrete Lie groupoid models with uniform structure maps.
//!
//! Five constructors are provided: translation groupoids of group actions,
//! Lie group bundles, quotients of rotation groupoids by rotation kernels,
//! pullbacks along essentially submersive base maps, and weak pullbacks of a
//! pair of homomorphisms into a common codomain. Base points of the first
//! four live in coordinate space; weak pullback base points are fibered
//! triples (y, k, x).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;

use crate::action::{SmoothActionModel, SmoothFn};
use crate::error::{Error, Result};
use crate::group::{line_element, line_parameter, LieGroupModel};
use crate::homs::GroupoidHom;
use crate::rng::{self, Rng};
use crate::scalar::{approx_f64, real, Scalar};
use crate::tol::ToleranceProfile;

/// A base point: a coordinate vector, or a fibered triple for weak pullbacks.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint<T: Scalar> {
    Flat(DVector<T>),
    Triple { left: Box<BasePoint<T>>, mid: Box<Arrow<T>>, right: Box<BasePoint<T>> },
}

impl<T: Scalar> BasePoint<T> {
    pub fn flat(coords: Vec<T>) -> Self {
        BasePoint::Flat(DVector::from_vec(coords))
    }

    pub fn as_flat(&self) -> Result<&DVector<T>> {
        match self {
            BasePoint::Flat(v) => Ok(v),
            BasePoint::Triple { .. } => {
                Err(Error::Typing("expected coordinate base point, found fibered triple".into()))
            }
        }
    }
}

impl<T: Scalar> From<DVector<T>> for BasePoint<T> {
    fn from(v: DVector<T>) -> Self {
        BasePoint::Flat(v)
    }
}

/// An arrow, tagged by the constructor of its owning groupoid.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrow<T: Scalar> {
    /// Translation groupoid arrow (g, x): source x, target g.x.
    Translation { g: DMatrix<T>, x: DVector<T> },
    /// Group bundle arrow (g, x): source = target = x.
    Bundle { g: DMatrix<T>, x: DVector<T> },
    /// Class of a rotation-groupoid arrow modulo a rotation kernel.
    Quotient { rep: Box<Arrow<T>>, normalized: Box<Arrow<T>> },
    /// Pullback arrow (x', h, x) with f(x') = t(h), f(x) = s(h).
    Pullback { target_pt: DVector<T>, inner: Box<Arrow<T>>, source_pt: DVector<T> },
    /// Weak pullback arrow (h, k, g).
    WeakPullback { left: Box<Arrow<T>>, mid: Box<Arrow<T>>, right: Box<Arrow<T>> },
}

impl<T: Scalar> Arrow<T> {
    /// Group element of a translation or bundle arrow.
    pub fn group_elt(&self) -> Result<&DMatrix<T>> {
        match self {
            Arrow::Translation { g, .. } | Arrow::Bundle { g, .. } => Ok(g),
            Arrow::Quotient { normalized, .. } => normalized.group_elt(),
            _ => Err(Error::Typing("arrow carries no direct group element".into())),
        }
    }

    /// Rotation parameter of a (possibly quotient-wrapped) line-group arrow.
    pub fn theta(&self) -> Result<T> {
        Ok(line_parameter(self.group_elt()?))
    }

    pub fn quotient_rep(&self) -> Result<&Arrow<T>> {
        match self {
            Arrow::Quotient { rep, .. } => Ok(rep),
            _ => Err(Error::Typing("not a quotient class".into())),
        }
    }

    pub fn weak_pullback_parts(&self) -> Result<(&Arrow<T>, &Arrow<T>, &Arrow<T>)> {
        match self {
            Arrow::WeakPullback { left, mid, right } => Ok((left, mid, right)),
            _ => Err(Error::Typing("not a weak pullback arrow".into())),
        }
    }
}

/// A smooth base map with analytic Jacobian, plus an optional section used
/// for arrow sampling in pullback groupoids.
#[derive(Clone)]
pub struct BaseMapData<T: Scalar> {
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub map: Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>,
    pub jacobian: Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>,
    pub section: Option<Arc<dyn Fn(&DVector<T>) -> Option<DVector<T>> + Send + Sync>>,
}

impl<T: Scalar> std::fmt::Debug for BaseMapData<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaseMapData")
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .finish()
    }
}

impl<T: Scalar> BaseMapData<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            domain_dim: dim,
            codomain_dim: dim,
            map: Arc::new(|x: &DVector<T>| x.clone()),
            jacobian: Arc::new(move |_: &DVector<T>| DMatrix::identity(dim, dim)),
            section: Some(Arc::new(|y: &DVector<T>| Some(y.clone()))),
        }
    }
}

/// The rotation kernel of a fiberwise rotation groupoid: arrows whose angle
/// is a full period of the (possibly rescaled) rotation. The scale is an
/// exact rational; 1 gives the plain kernel, 1/2 its half-period rescaling.
#[derive(Debug, Clone)]
pub struct RotationKernel<T: Scalar> {
    pub omega: SmoothFn<T>,
    pub scale: Ratio<i64>,
    tol: ToleranceProfile<T>,
}

impl<T: Scalar> RotationKernel<T> {
    pub fn new(omega: SmoothFn<T>, scale: Ratio<i64>, tol: ToleranceProfile<T>) -> Result<Self> {
        if *scale.numer() <= 0 || *scale.denom() <= 0 {
            return Err(Error::Config("kernel scale must be a positive rational".into()));
        }
        Ok(Self { omega, scale, tol })
    }

    pub fn scale_value(&self) -> T {
        real::<T>(*self.scale.numer() as f64) / real::<T>(*self.scale.denom() as f64)
    }

    /// Reduction modulus at slow coordinate `t`, when the frequency is
    /// nonzero there: `scale * 2pi / |omega(t)|`.
    pub fn modulus(&self, t: T) -> Option<T> {
        let w = self.omega.eval(t);
        if w.abs() <= self.tol.map_abs_tol {
            None
        } else {
            Some(self.scale_value() * T::two_pi() / w.abs())
        }
    }

    /// Membership in the defining set: omega(t) != 0 and omega(t)*theta in
    /// scale*2pi*Z, or theta = 0.
    pub fn member_formula(&self, theta: T, t: T) -> bool {
        if theta.abs() <= self.tol.map_abs_tol {
            return true;
        }
        match self.modulus(t) {
            None => false,
            Some(m) => {
                let ratio = theta / m;
                (ratio - ratio.round()).abs() * m <= self.tol.map_abs_tol
            }
        }
    }

    /// Kernel membership proper: the defining set intersected with the
    /// isotropic locus. Arrows of the set rotate the fiber by a multiple of
    /// `scale * 2pi`; they fix the base point exactly when that multiple is a
    /// full turn or the point lies on the axis z = 0.
    pub fn is_member(&self, theta: T, x: &DVector<T>) -> bool {
        let t = x[2];
        if !self.member_formula(theta, t) {
            return false;
        }
        if theta.abs() <= self.tol.map_abs_tol {
            return true;
        }
        let fiber_norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if fiber_norm <= self.tol.map_abs_tol {
            return true;
        }
        // Full turn: omega * theta in 2pi Z.
        let w = self.omega.eval(t);
        let turns = w * theta / T::two_pi();
        (turns - turns.round()).abs() <= self.tol.map_abs_tol
    }

    /// Canonical class representative of `theta` at slow coordinate `t`:
    /// reduced into [0, modulus) where the frequency is nonzero, unchanged on
    /// the vanishing locus.
    pub fn normalize_theta(&self, theta: T, t: T) -> T {
        match self.modulus(t) {
            None => theta,
            Some(m) => {
                let r = theta - (theta / m).floor() * m;
                // Snap to zero at both ends of the window (r == m can appear
                // from rounding).
                let at_edge = (r - m).abs() <= self.tol.map_abs_tol * m.max(T::one())
                    || r >= m
                    || r.abs() <= self.tol.map_abs_tol;
                if at_edge {
                    T::zero()
                } else {
                    r
                }
            }
        }
    }

    /// Circular distance between two normalized angles at `t`.
    pub fn class_distance(&self, theta_a: T, theta_b: T, t: T) -> T {
        match self.modulus(t) {
            None => (theta_a - theta_b).abs(),
            Some(m) => {
                let d = (theta_a - theta_b).abs();
                let wrapped = d - (d / m).floor() * m;
                wrapped.min((m - wrapped).abs())
            }
        }
    }

    /// Sample a kernel member at (or near) the given base point. Members that
    /// are not full turns only exist on the axis, so the fiber coordinates are
    /// zeroed in that case.
    pub fn sample_member(&self, rng: &mut Rng, x: &DVector<T>) -> (T, DVector<T>) {
        let t = x[2];
        if self.modulus(t).is_none() {
            return (T::zero(), x.clone());
        }
        let mut m: i64 = 0;
        while m == 0 {
            m = rng::uniform::<f64>(rng, -3.99, 3.99) as i64;
        }
        let mut point = x.clone();
        let full_turn = (m * self.scale.numer()) % self.scale.denom() == 0;
        if !full_turn {
            point[0] = T::zero();
            point[1] = T::zero();
        }
        let theta = real::<T>(m as f64) * self.modulus(t).unwrap();
        (theta, point)
    }
}

/// Per-kind data of a groupoid model.
pub enum GroupoidKind<T: Scalar> {
    Translation { group: LieGroupModel<T>, action: SmoothActionModel<T> },
    GroupBundle { group: LieGroupModel<T> },
    Quotient { base: Arc<GroupoidModel<T>>, kernel: RotationKernel<T> },
    Pullback { target: Arc<GroupoidModel<T>>, map: BaseMapData<T> },
    WeakPullback { psi: Arc<GroupoidHom<T>>, phi: Arc<GroupoidHom<T>> },
}

impl<T: Scalar> std::fmt::Debug for GroupoidKind<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            GroupoidKind::Translation { .. } => "Translation",
            GroupoidKind::GroupBundle { .. } => "GroupBundle",
            GroupoidKind::Quotient { .. } => "Quotient",
            GroupoidKind::Pullback { .. } => "Pullback",
            GroupoidKind::WeakPullback { .. } => "WeakPullback",
        };
        write!(f, "GroupoidKind::{tag}")
    }
}

type BaseSampler<T> = Arc<dyn Fn(&mut Rng) -> BasePoint<T> + Send + Sync>;
type OrbitOracle<T> = Arc<dyn Fn(&BasePoint<T>, &BasePoint<T>) -> bool + Send + Sync>;
type IsotropySampler<T> = Arc<dyn Fn(&mut Rng, &BasePoint<T>) -> Option<Arrow<T>> + Send + Sync>;
type Connector<T> = Arc<dyn Fn(&BasePoint<T>, &BasePoint<T>) -> Option<Arrow<T>> + Send + Sync>;

/// A concrete groupoid model: structure maps, sampling, and the optional
/// scenario-supplied oracles (orbit membership, stabilizer sampling, orbit
/// connectors).
pub struct GroupoidModel<T: Scalar> {
    pub name: String,
    pub base_dim: usize,
    pub kind: GroupoidKind<T>,
    pub tol: ToleranceProfile<T>,
    base_sampler: Option<BaseSampler<T>>,
    orbit_oracle: Option<OrbitOracle<T>>,
    isotropy_sampler: Option<IsotropySampler<T>>,
    connector: Option<Connector<T>>,
}

impl<T: Scalar> std::fmt::Debug for GroupoidModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupoidModel")
            .field("name", &self.name)
            .field("base_dim", &self.base_dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl<T: Scalar> GroupoidModel<T> {
    // ----- constructors ---------------------------------------------------

    /// Translation groupoid of a smooth action: arrows (g, x) with source x
    /// and target g.x, composed by (g', g.x)(g, x) = (g'g, x).
    pub fn translation(
        name: impl Into<String>,
        group: LieGroupModel<T>,
        action: SmoothActionModel<T>,
        tol: ToleranceProfile<T>,
    ) -> Self {
        let base_dim = action.base_dim;
        Self {
            name: name.into(),
            base_dim,
            kind: GroupoidKind::Translation { group, action },
            tol,
            base_sampler: None,
            orbit_oracle: None,
            isotropy_sampler: None,
            connector: None,
        }
    }

    /// Trivial Lie group bundle over R^base_dim: every arrow is isotropic.
    pub fn group_bundle(
        name: impl Into<String>,
        group: LieGroupModel<T>,
        base_dim: usize,
        tol: ToleranceProfile<T>,
    ) -> Self {
        Self {
            name: name.into(),
            base_dim,
            kind: GroupoidKind::GroupBundle { group },
            tol,
            base_sampler: None,
            orbit_oracle: None,
            isotropy_sampler: None,
            connector: None,
        }
    }

    /// Quotient of a rotation-action translation groupoid by a rotation
    /// kernel built from the same frequency. The frequency of the base is
    /// recovered from the analytic generator and compared with the kernel's.
    pub fn quotient_by_kernel(
        name: impl Into<String>,
        base: Arc<GroupoidModel<T>>,
        kernel: RotationKernel<T>,
    ) -> Result<Self> {
        let action = match &base.kind {
            GroupoidKind::Translation { action, .. } => action,
            _ => return Err(Error::Config("quotient base must be a translation groupoid".into())),
        };
        if base.base_dim != 3 {
            return Err(Error::Config("rotation quotients live over C x R".into()));
        }
        // Probe the frequency through the generator at (1, 0, t).
        let n = DMatrix::from_row_slice(2, 2, &[T::zero(), T::one(), T::zero(), T::zero()]);
        for t in [-1.7, -0.3, 0.4, 2.1] {
            let t = real::<T>(t);
            let probe = DVector::from_vec(vec![T::one(), T::zero(), t]);
            let gen = action.generator(&n, &probe);
            let from_base = gen[1];
            let from_kernel = kernel.omega.eval(t);
            if (from_base - from_kernel).abs() > base.tol.fd_abs_tol {
                return Err(Error::Config(format!(
                    "kernel frequency disagrees with base action at t={}: {} vs {}",
                    approx_f64(t),
                    approx_f64(from_base),
                    approx_f64(from_kernel)
                )));
            }
        }
        let tol = base.tol;
        Ok(Self {
            name: name.into(),
            base_dim: base.base_dim,
            kind: GroupoidKind::Quotient { base, kernel },
            tol,
            base_sampler: None,
            orbit_oracle: None,
            isotropy_sampler: None,
            connector: None,
        })
    }

    /// Pullback groupoid of `target` along the base map, with arrows
    /// (x', h, x) such that f(x) = s(h) and f(x') = t(h).
    pub fn pullback(
        name: impl Into<String>,
        map: BaseMapData<T>,
        target: Arc<GroupoidModel<T>>,
        tol: ToleranceProfile<T>,
    ) -> Result<Self> {
        if map.codomain_dim != target.base_dim {
            return Err(Error::Dimension("pullback map codomain must match groupoid base".into()));
        }
        Ok(Self {
            name: name.into(),
            base_dim: map.domain_dim,
            kind: GroupoidKind::Pullback { target, map },
            tol,
            base_sampler: None,
            orbit_oracle: None,
            isotropy_sampler: None,
            connector: None,
        })
    }

    /// Weak pullback of `phi` along `psi` (arrows (h, k, g) with
    /// k in Sigma(phi(sg), psi(sh))). `phi` must target the same groupoid as
    /// `psi` and is expected to be transversal; the caller classifies it.
    pub fn weak_pullback(
        name: impl Into<String>,
        psi: Arc<GroupoidHom<T>>,
        phi: Arc<GroupoidHom<T>>,
    ) -> Result<Self> {
        if !Arc::ptr_eq(&psi.codomain, &phi.codomain) {
            return Err(Error::Typing("weak pullback legs must share a codomain".into()));
        }
        let tol = psi.domain.tol;
        Ok(Self {
            name: name.into(),
            base_dim: 0, // fibered base, no global coordinate dimension
            kind: GroupoidKind::WeakPullback { psi, phi },
            tol,
            base_sampler: None,
            orbit_oracle: None,
            isotropy_sampler: None,
            connector: None,
        })
    }

    // ----- builder-style oracles -------------------------------------------

    pub fn with_base_sampler(
        mut self,
        sampler: impl Fn(&mut Rng) -> BasePoint<T> + Send + Sync + 'static,
    ) -> Self {
        self.base_sampler = Some(Arc::new(sampler));
        self
    }

    pub fn with_orbit_oracle(
        mut self,
        oracle: impl Fn(&BasePoint<T>, &BasePoint<T>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.orbit_oracle = Some(Arc::new(oracle));
        self
    }

    pub fn with_isotropy_sampler(
        mut self,
        sampler: impl Fn(&mut Rng, &BasePoint<T>) -> Option<Arrow<T>> + Send + Sync + 'static,
    ) -> Self {
        self.isotropy_sampler = Some(Arc::new(sampler));
        self
    }

    pub fn with_connector(
        mut self,
        connector: impl Fn(&BasePoint<T>, &BasePoint<T>) -> Option<Arrow<T>> + Send + Sync + 'static,
    ) -> Self {
        self.connector = Some(Arc::new(connector));
        self
    }

    pub fn has_orbit_oracle(&self) -> bool {
        self.orbit_oracle.is_some()
    }

    // ----- structure maps ---------------------------------------------------

    pub fn source(&self, a: &Arrow<T>) -> Result<BasePoint<T>> {
        match (&self.kind, a) {
            (GroupoidKind::Translation { .. }, Arrow::Translation { x, .. }) => {
                Ok(BasePoint::Flat(x.clone()))
            }
            (GroupoidKind::GroupBundle { .. }, Arrow::Bundle { x, .. }) => {
                Ok(BasePoint::Flat(x.clone()))
            }
            (GroupoidKind::Quotient { base, .. }, Arrow::Quotient { normalized, .. }) => {
                base.source(normalized)
            }
            (GroupoidKind::Pullback { .. }, Arrow::Pullback { source_pt, .. }) => {
                Ok(BasePoint::Flat(source_pt.clone()))
            }
            (GroupoidKind::WeakPullback { psi, phi }, Arrow::WeakPullback { left, mid, right }) => {
                Ok(BasePoint::Triple {
                    left: Box::new(psi.domain.source(left)?),
                    mid: mid.clone(),
                    right: Box::new(phi.domain.source(right)?),
                })
            }
            _ => Err(Error::Typing(format!("arrow does not belong to groupoid {}", self.name))),
        }
    }

    pub fn target(&self, a: &Arrow<T>) -> Result<BasePoint<T>> {
        match (&self.kind, a) {
            (GroupoidKind::Translation { action, .. }, Arrow::Translation { g, x }) => {
                Ok(BasePoint::Flat(action.act(g, x)))
            }
            (GroupoidKind::GroupBundle { .. }, Arrow::Bundle { x, .. }) => {
                Ok(BasePoint::Flat(x.clone()))
            }
            (GroupoidKind::Quotient { base, .. }, Arrow::Quotient { normalized, .. }) => {
                base.target(normalized)
            }
            (GroupoidKind::Pullback { .. }, Arrow::Pullback { target_pt, .. }) => {
                Ok(BasePoint::Flat(target_pt.clone()))
            }
            (GroupoidKind::WeakPullback { psi, phi }, Arrow::WeakPullback { left, mid, right }) => {
                let sigma = &psi.codomain;
                let psi_h = psi.apply(left)?;
                let phi_g = phi.apply(right)?;
                let k_new = sigma.compose(&psi_h, &sigma.compose(mid, &sigma.inverse(&phi_g)?)?)?;
                Ok(BasePoint::Triple {
                    left: Box::new(psi.domain.target(left)?),
                    mid: Box::new(k_new),
                    right: Box::new(phi.domain.target(right)?),
                })
            }
            _ => Err(Error::Typing(format!("arrow does not belong to groupoid {}", self.name))),
        }
    }

    pub fn unit(&self, x: &BasePoint<T>) -> Result<Arrow<T>> {
        match &self.kind {
            GroupoidKind::Translation { group, .. } => {
                Ok(Arrow::Translation { g: group.identity(), x: x.as_flat()?.clone() })
            }
            GroupoidKind::GroupBundle { group } => {
                Ok(Arrow::Bundle { g: group.identity(), x: x.as_flat()?.clone() })
            }
            GroupoidKind::Quotient { base, kernel } => {
                let rep = base.unit(x)?;
                Ok(make_class(kernel, rep))
            }
            GroupoidKind::Pullback { target, map } => {
                let xv = x.as_flat()?;
                let fx = (map.map)(xv);
                let inner = target.unit(&BasePoint::Flat(fx))?;
                Ok(Arrow::Pullback {
                    target_pt: xv.clone(),
                    inner: Box::new(inner),
                    source_pt: xv.clone(),
                })
            }
            GroupoidKind::WeakPullback { psi, phi } => match x {
                BasePoint::Triple { left, mid, right } => Ok(Arrow::WeakPullback {
                    left: Box::new(psi.domain.unit(left)?),
                    mid: mid.clone(),
                    right: Box::new(phi.domain.unit(right)?),
                }),
                _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
            },
        }
    }

    /// Compose `second` after `first`; sources and targets must match within
    /// `map_abs_tol`.
    pub fn compose(&self, second: &Arrow<T>, first: &Arrow<T>) -> Result<Arrow<T>> {
        let mismatch = self.point_dist(&self.source(second)?, &self.target(first)?)?;
        if mismatch > self.tol.map_abs_tol {
            return Err(Error::NotComposable { residual: approx_f64(mismatch) });
        }
        match (&self.kind, second, first) {
            (
                GroupoidKind::Translation { group, .. },
                Arrow::Translation { g: g2, .. },
                Arrow::Translation { g: g1, x: x1 },
            ) => Ok(Arrow::Translation { g: group.multiply(g2, g1), x: x1.clone() }),
            (
                GroupoidKind::GroupBundle { group },
                Arrow::Bundle { g: g2, .. },
                Arrow::Bundle { g: g1, x: x1 },
            ) => Ok(Arrow::Bundle { g: group.multiply(g2, g1), x: x1.clone() }),
            (
                GroupoidKind::Quotient { base, kernel },
                Arrow::Quotient { normalized: n2, .. },
                Arrow::Quotient { normalized: n1, .. },
            ) => {
                // Compose normalized representatives in the base groupoid,
                // gluing the tiny angle mismatch left by normalization.
                let theta = n2.theta()? + n1.theta()?;
                let x1 = base.source(n1)?.as_flat()?.clone();
                let rep = Arrow::Translation { g: line_element(theta), x: x1 };
                Ok(make_class(kernel, rep))
            }
            (
                GroupoidKind::Pullback { target, .. },
                Arrow::Pullback { target_pt: x2t, inner: h2, .. },
                Arrow::Pullback { inner: h1, source_pt: x1s, .. },
            ) => Ok(Arrow::Pullback {
                target_pt: x2t.clone(),
                inner: Box::new(target.compose(h2, h1)?),
                source_pt: x1s.clone(),
            }),
            (
                GroupoidKind::WeakPullback { psi, phi },
                Arrow::WeakPullback { left: h2, right: g2, .. },
                Arrow::WeakPullback { left: h1, mid: k1, right: g1 },
            ) => Ok(Arrow::WeakPullback {
                left: Box::new(psi.domain.compose(h2, h1)?),
                mid: k1.clone(),
                right: Box::new(phi.domain.compose(g2, g1)?),
            }),
            _ => Err(Error::Typing(format!("arrows do not belong to groupoid {}", self.name))),
        }
    }

    pub fn inverse(&self, a: &Arrow<T>) -> Result<Arrow<T>> {
        match (&self.kind, a) {
            (GroupoidKind::Translation { group, action }, Arrow::Translation { g, x }) => {
                Ok(Arrow::Translation { g: group.invert(g), x: action.act(g, x) })
            }
            (GroupoidKind::GroupBundle { group }, Arrow::Bundle { g, x }) => {
                Ok(Arrow::Bundle { g: group.invert(g), x: x.clone() })
            }
            (GroupoidKind::Quotient { base, kernel }, Arrow::Quotient { normalized, .. }) => {
                let rep = base.inverse(normalized)?;
                Ok(make_class(kernel, rep))
            }
            (GroupoidKind::Pullback { target, .. }, Arrow::Pullback { target_pt, inner, source_pt }) => {
                Ok(Arrow::Pullback {
                    target_pt: source_pt.clone(),
                    inner: Box::new(target.inverse(inner)?),
                    source_pt: target_pt.clone(),
                })
            }
            (GroupoidKind::WeakPullback { psi, phi }, Arrow::WeakPullback { left, mid, right }) => {
                let sigma = &psi.codomain;
                let psi_h = psi.apply(left)?;
                let phi_g = phi.apply(right)?;
                let k_new = sigma.compose(&psi_h, &sigma.compose(mid, &sigma.inverse(&phi_g)?)?)?;
                Ok(Arrow::WeakPullback {
                    left: Box::new(psi.domain.inverse(left)?),
                    mid: Box::new(k_new),
                    right: Box::new(phi.domain.inverse(right)?),
                })
            }
            _ => Err(Error::Typing(format!("arrow does not belong to groupoid {}", self.name))),
        }
    }

    // ----- metrics ----------------------------------------------------------

    pub fn point_dist(&self, a: &BasePoint<T>, b: &BasePoint<T>) -> Result<T> {
        match (a, b) {
            (BasePoint::Flat(u), BasePoint::Flat(v)) => {
                if u.len() != v.len() {
                    return Err(Error::Dimension("base points of different dimension".into()));
                }
                Ok((u - v).norm())
            }
            (
                BasePoint::Triple { left: l1, mid: m1, right: r1 },
                BasePoint::Triple { left: l2, mid: m2, right: r2 },
            ) => match &self.kind {
                GroupoidKind::WeakPullback { psi, phi } => {
                    let dl = psi.domain.point_dist(l1, l2)?;
                    let dm = psi.codomain.arrow_dist(m1, m2)?;
                    let dr = phi.domain.point_dist(r1, r2)?;
                    Ok(dl.max(dm).max(dr))
                }
                _ => Err(Error::Typing("fibered base point outside weak pullback".into())),
            },
            _ => Err(Error::Typing("cannot compare flat and fibered base points".into())),
        }
    }

    pub fn arrow_dist(&self, a: &Arrow<T>, b: &Arrow<T>) -> Result<T> {
        match (&self.kind, a, b) {
            (
                GroupoidKind::Translation { .. },
                Arrow::Translation { g: g1, x: x1 },
                Arrow::Translation { g: g2, x: x2 },
            )
            | (
                GroupoidKind::GroupBundle { .. },
                Arrow::Bundle { g: g1, x: x1 },
                Arrow::Bundle { g: g2, x: x2 },
            ) => Ok((g1 - g2).norm().max((x1 - x2).norm())),
            (
                GroupoidKind::Quotient { base, kernel },
                Arrow::Quotient { normalized: n1, .. },
                Arrow::Quotient { normalized: n2, .. },
            ) => {
                let x1 = base.source(n1)?.as_flat()?.clone();
                let x2 = base.source(n2)?.as_flat()?.clone();
                let dpt = (&x1 - &x2).norm();
                let dth = kernel.class_distance(n1.theta()?, n2.theta()?, x1[2]);
                Ok(dpt.max(dth))
            }
            (
                GroupoidKind::Pullback { target, .. },
                Arrow::Pullback { target_pt: t1, inner: h1, source_pt: s1 },
                Arrow::Pullback { target_pt: t2, inner: h2, source_pt: s2 },
            ) => {
                let d = target.arrow_dist(h1, h2)?;
                Ok(d.max((t1 - t2).norm()).max((s1 - s2).norm()))
            }
            (
                GroupoidKind::WeakPullback { psi, phi },
                Arrow::WeakPullback { left: h1, mid: k1, right: g1 },
                Arrow::WeakPullback { left: h2, mid: k2, right: g2 },
            ) => {
                let dh = psi.domain.arrow_dist(h1, h2)?;
                let dk = psi.codomain.arrow_dist(k1, k2)?;
                let dg = phi.domain.arrow_dist(g1, g2)?;
                Ok(dh.max(dk).max(dg))
            }
            _ => Err(Error::Typing(format!("arrows do not belong to groupoid {}", self.name))),
        }
    }

    /// Whether source and target coincide, with the deviation.
    pub fn isotropy_defect(&self, a: &Arrow<T>) -> Result<T> {
        self.point_dist(&self.source(a)?, &self.target(a)?)
    }

    pub fn is_isotropic(&self, a: &Arrow<T>) -> Result<bool> {
        Ok(self.isotropy_defect(a)? <= self.tol.map_abs_tol)
    }

    // ----- arrow validity ----------------------------------------------------

    /// Check the fibered-product constraints of structured arrows.
    pub fn validate_arrow(&self, a: &Arrow<T>) -> Result<()> {
        match (&self.kind, a) {
            (GroupoidKind::Pullback { target, map }, Arrow::Pullback { target_pt, inner, source_pt }) => {
                let fs = (map.map)(source_pt);
                let ft = (map.map)(target_pt);
                let ds = target.point_dist(&BasePoint::Flat(fs), &target.source(inner)?)?;
                let dt = target.point_dist(&BasePoint::Flat(ft), &target.target(inner)?)?;
                let worst = ds.max(dt);
                if worst > self.tol.map_abs_tol {
                    return Err(Error::MalformedArrow {
                        context: "pullback arrow incompatible with base map".into(),
                        residual: approx_f64(worst),
                    });
                }
                Ok(())
            }
            (GroupoidKind::WeakPullback { psi, phi }, Arrow::WeakPullback { left, mid, right }) => {
                let sigma = &psi.codomain;
                let want_src = phi.base_map(&phi.domain.source(right)?)?;
                let want_tgt = psi.base_map(&psi.domain.source(left)?)?;
                let ds = sigma.point_dist(&sigma.source(mid)?, &want_src)?;
                let dt = sigma.point_dist(&sigma.target(mid)?, &want_tgt)?;
                let worst = ds.max(dt);
                if worst > self.tol.map_abs_tol {
                    return Err(Error::MalformedArrow {
                        context: "weak pullback triple violates fibered product".into(),
                        residual: approx_f64(worst),
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    // ----- sampling -----------------------------------------------------------

    pub fn sample_base(&self, rng: &mut Rng) -> Result<BasePoint<T>> {
        if let Some(s) = &self.base_sampler {
            return Ok(s(rng));
        }
        match &self.kind {
            GroupoidKind::Translation { .. } | GroupoidKind::GroupBundle { .. } => {
                Ok(BasePoint::Flat(rng::normal_vector(rng, self.base_dim)))
            }
            GroupoidKind::Quotient { base, kernel } => {
                // Keep samples away from the vanishing locus of the frequency,
                // where the normalization modulus is discontinuous.
                for _ in 0..1000 {
                    let p = base.sample_base(rng)?;
                    let t = p.as_flat()?[2];
                    if kernel.omega.eval(t).abs() >= self.tol.fd_step {
                        return Ok(p);
                    }
                }
                Err(Error::Precondition("could not sample away from the vanishing locus".into()))
            }
            GroupoidKind::Pullback { .. } => {
                Ok(BasePoint::Flat(rng::normal_vector(rng, self.base_dim)))
            }
            GroupoidKind::WeakPullback { psi, phi } => {
                let surj = phi.witnesses.surjectivity.as_ref().ok_or_else(|| {
                    Error::Undetermined(
                        "weak pullback base sampling needs a surjectivity witness on phi".into(),
                    )
                })?;
                for _ in 0..100 {
                    let y = psi.domain.sample_base(rng)?;
                    let psi_y = psi.base_map(&y)?;
                    if let Some((x, k)) = surj(&psi_y) {
                        return Ok(BasePoint::Triple {
                            left: Box::new(y),
                            mid: Box::new(k),
                            right: Box::new(x),
                        });
                    }
                }
                Err(Error::Undetermined("surjectivity witness failed on sampled points".into()))
            }
        }
    }

    /// Sample an arrow with the given source (or a sampled one).
    pub fn sample_arrow(&self, rng: &mut Rng, at: Option<&BasePoint<T>>) -> Result<Arrow<T>> {
        let x = match at {
            Some(p) => p.clone(),
            None => self.sample_base(rng)?,
        };
        match &self.kind {
            GroupoidKind::Translation { group, .. } => {
                Ok(Arrow::Translation { g: group.sample(rng), x: x.as_flat()?.clone() })
            }
            GroupoidKind::GroupBundle { group } => {
                Ok(Arrow::Bundle { g: group.sample(rng), x: x.as_flat()?.clone() })
            }
            GroupoidKind::Quotient { base, kernel } => {
                let rep = base.sample_arrow(rng, Some(&x))?;
                Ok(make_class(kernel, rep))
            }
            GroupoidKind::Pullback { target, map } => {
                let xv = x.as_flat()?;
                let fx = BasePoint::Flat((map.map)(xv));
                if let Some(section) = &map.section {
                    let h = target.sample_arrow(rng, Some(&fx))?;
                    let th = target.target(&h)?;
                    if let Some(xt) = section(th.as_flat()?) {
                        let residual =
                            target.point_dist(&BasePoint::Flat((map.map)(&xt)), &th)?;
                        if residual <= self.tol.map_abs_tol {
                            return Ok(Arrow::Pullback {
                                target_pt: xt,
                                inner: Box::new(h),
                                source_pt: xv.clone(),
                            });
                        }
                    }
                }
                // Fall back to the stabilizer of f(x): these arrows always
                // close up over x itself.
                let h = target
                    .sample_isotropy(rng, &fx)?
                    .ok_or_else(|| Error::Undetermined("no isotropy sampler on pullback target".into()))?;
                Ok(Arrow::Pullback { target_pt: xv.clone(), inner: Box::new(h), source_pt: xv.clone() })
            }
            GroupoidKind::WeakPullback { psi, phi } => match &x {
                BasePoint::Triple { left, mid, right } => {
                    let h = psi.domain.sample_arrow(rng, Some(left))?;
                    let g = phi.domain.sample_arrow(rng, Some(right))?;
                    Ok(Arrow::WeakPullback {
                        left: Box::new(h),
                        mid: mid.clone(),
                        right: Box::new(g),
                    })
                }
                _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
            },
        }
    }

    /// Sample an isotropic arrow at `x` using the scenario-supplied stabilizer
    /// sampler where present, or structural knowledge where possible.
    pub fn sample_isotropy(&self, rng: &mut Rng, x: &BasePoint<T>) -> Result<Option<Arrow<T>>> {
        if let Some(s) = &self.isotropy_sampler {
            return Ok(s(rng, x));
        }
        match &self.kind {
            GroupoidKind::GroupBundle { group } => {
                Ok(Some(Arrow::Bundle { g: group.sample(rng), x: x.as_flat()?.clone() }))
            }
            GroupoidKind::Quotient { base, kernel } => {
                match base.sample_isotropy(rng, x)? {
                    Some(rep) => Ok(Some(make_class(kernel, rep))),
                    None => Ok(None),
                }
            }
            GroupoidKind::Pullback { target, map } => {
                let xv = x.as_flat()?;
                let fx = BasePoint::Flat((map.map)(xv));
                match target.sample_isotropy(rng, &fx)? {
                    Some(h) => Ok(Some(Arrow::Pullback {
                        target_pt: xv.clone(),
                        inner: Box::new(h),
                        source_pt: xv.clone(),
                    })),
                    None => Ok(None),
                }
            }
            GroupoidKind::WeakPullback { psi, phi } => match x {
                BasePoint::Triple { left, mid, right } => {
                    let sigma = &psi.codomain;
                    for _ in 0..20 {
                        let Some(h) = psi.domain.sample_isotropy(rng, left)? else { break };
                        // Solve psi(h) k phi(g)^{-1} = k for g through the lift
                        // witness of phi: phi(g) = k^{-1} psi(h) k.
                        let Some(lift) = phi.witnesses.lift.as_ref() else { break };
                        let psi_h = psi.apply(&h)?;
                        let conj = sigma.compose(
                            &sigma.inverse(mid)?,
                            &sigma.compose(&psi_h, mid)?,
                        )?;
                        if let Some(g) = lift(&conj, right, right) {
                            let arrow = Arrow::WeakPullback {
                                left: Box::new(h),
                                mid: mid.clone(),
                                right: Box::new(g),
                            };
                            if self.isotropy_defect(&arrow)? <= self.tol.map_abs_tol {
                                return Ok(Some(arrow));
                            }
                        }
                    }
                    Ok(Some(self.unit(x)?))
                }
                _ => Err(Error::Typing("weak pullback base point must be a triple".into())),
            },
            GroupoidKind::Translation { .. } => Ok(None),
        }
    }

    pub fn same_orbit(&self, a: &BasePoint<T>, b: &BasePoint<T>) -> Option<bool> {
        self.orbit_oracle.as_ref().map(|o| o(a, b))
    }

    pub fn connect(&self, a: &BasePoint<T>, b: &BasePoint<T>) -> Option<Arrow<T>> {
        self.connector.as_ref().and_then(|c| c(a, b))
    }
}

/// Wrap a representative arrow of the rotation groupoid into its kernel class.
pub fn make_class<T: Scalar>(kernel: &RotationKernel<T>, rep: Arrow<T>) -> Arrow<T> {
    let (g, x) = match &rep {
        Arrow::Translation { g, x } => (g, x),
        _ => panic!("quotient representatives are translation arrows"),
    };
    let theta = line_parameter(g);
    let normalized_theta = kernel.normalize_theta(theta, x[2]);
    let normalized = Arrow::Translation { g: line_element(normalized_theta), x: x.clone() };
    Arrow::Quotient { rep: Box::new(rep.clone()), normalized: Box::new(normalized) }
}

/// Structure-axiom fuzz report: max residuals over all samples.
#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub samples: usize,
    pub unit_endpoints: f64,
    pub left_unit: f64,
    pub right_unit: f64,
    pub inverse_law: f64,
    pub inverse_endpoints: f64,
    pub associativity: f64,
    pub composite_endpoints: f64,
    pub antihomomorphism: f64,
}

impl AxiomReport {
    pub fn worst(&self) -> f64 {
        [
            self.unit_endpoints,
            self.left_unit,
            self.right_unit,
            self.inverse_law,
            self.inverse_endpoints,
            self.associativity,
            self.composite_endpoints,
            self.antihomomorphism,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Fuzz the groupoid structure axioms on `samples` random configurations.
pub fn check_groupoid_axioms<T: Scalar>(
    groupoid: &GroupoidModel<T>,
    samples: usize,
    rng: &mut Rng,
) -> Result<AxiomReport> {
    let mut report = AxiomReport { samples, ..Default::default() };
    let track = |slot: &mut f64, value: T| {
        let v = approx_f64(value);
        if v > *slot {
            *slot = v;
        }
    };
    for _ in 0..samples {
        let x = groupoid.sample_base(rng)?;
        let u = groupoid.unit(&x)?;
        track(&mut report.unit_endpoints, groupoid.point_dist(&groupoid.source(&u)?, &x)?);
        track(&mut report.unit_endpoints, groupoid.point_dist(&groupoid.target(&u)?, &x)?);

        let a1 = groupoid.sample_arrow(rng, Some(&x))?;
        let t1 = groupoid.target(&a1)?;
        let left_unit = groupoid.compose(&groupoid.unit(&t1)?, &a1)?;
        track(&mut report.left_unit, groupoid.arrow_dist(&left_unit, &a1)?);
        let right_unit = groupoid.compose(&a1, &u)?;
        track(&mut report.right_unit, groupoid.arrow_dist(&right_unit, &a1)?);

        let inv = groupoid.inverse(&a1)?;
        track(
            &mut report.inverse_endpoints,
            groupoid.point_dist(&groupoid.target(&inv)?, &x)?,
        );
        track(
            &mut report.inverse_endpoints,
            groupoid.point_dist(&groupoid.source(&inv)?, &t1)?,
        );
        let back = groupoid.compose(&inv, &a1)?;
        track(&mut report.inverse_law, groupoid.arrow_dist(&back, &u)?);
        let forth = groupoid.compose(&a1, &inv)?;
        track(&mut report.inverse_law, groupoid.arrow_dist(&forth, &groupoid.unit(&t1)?)?);

        let a2 = groupoid.sample_arrow(rng, Some(&t1))?;
        let t2 = groupoid.target(&a2)?;
        let a3 = groupoid.sample_arrow(rng, Some(&t2))?;

        let a21 = groupoid.compose(&a2, &a1)?;
        track(
            &mut report.composite_endpoints,
            groupoid.point_dist(&groupoid.source(&a21)?, &x)?,
        );
        track(
            &mut report.composite_endpoints,
            groupoid.point_dist(&groupoid.target(&a21)?, &t2)?,
        );

        let left = groupoid.compose(&groupoid.compose(&a3, &a2)?, &a1)?;
        let right = groupoid.compose(&a3, &a21)?;
        track(&mut report.associativity, groupoid.arrow_dist(&left, &right)?);

        let anti = groupoid.compose(&groupoid.inverse(&a1)?, &groupoid.inverse(&a2)?)?;
        track(&mut report.antihomomorphism, groupoid.arrow_dist(&anti, &groupoid.inverse(&a21)?)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::FreqSpec;
    use crate::group::rot_z;

    fn tol() -> ToleranceProfile<f64> {
        ToleranceProfile::default()
    }

    #[test]
    fn non_composable_pair_is_rejected() {
        let g = crate::models::so3_r3(tol());
        let a = Arrow::Translation { g: rot_z(0.5), x: DVector::from_vec(vec![1.0, 0.0, 0.0]) };
        let b = Arrow::Translation { g: rot_z(0.2), x: DVector::from_vec(vec![0.0, 2.0, 0.0]) };
        match g.compose(&b, &a) {
            Err(Error::NotComposable { residual }) => assert!(residual > 0.1),
            other => panic!("expected composition error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_kernel_frequency_is_a_config_error() {
        let om_t = FreqSpec::Poly { coeffs: vec![0.0, 1.0] }.to_smooth_fn::<f64>();
        let om_2t = FreqSpec::Poly { coeffs: vec![0.0, 2.0] }.to_smooth_fn::<f64>();
        let base = Arc::new(crate::models::rotation_groupoid(om_t, tol()));
        let kernel = RotationKernel::new(om_2t, Ratio::new(1, 1), tol()).unwrap();
        match GroupoidModel::quotient_by_kernel("bad", base, kernel) {
            Err(Error::Config(msg)) => assert!(msg.contains("frequency")),
            other => panic!("expected configuration error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_pullback_arrow_is_detected() {
        let target = Arc::new(crate::models::so3_r3_punctured(tol()));
        let pb = crate::models::axis_pullback(target, tol()).unwrap();
        // Inner arrow not based over f(source): residual above tolerance.
        let bad = Arrow::Pullback {
            target_pt: DVector::from_vec(vec![1.0]),
            inner: Box::new(Arrow::Translation {
                g: rot_z(0.3),
                x: DVector::from_vec(vec![0.5, 0.5, 1.0]),
            }),
            source_pt: DVector::from_vec(vec![1.0]),
        };
        match pb.validate_arrow(&bad) {
            Err(Error::MalformedArrow { residual, .. }) => assert!(residual > 0.1),
            other => panic!("expected malformed-arrow error, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_kernel_scale_is_rejected() {
        let om = FreqSpec::Poly { coeffs: vec![0.0, 1.0] }.to_smooth_fn::<f64>();
        assert!(RotationKernel::new(om, Ratio::new(-1, 2), tol()).is_err());
    }

    #[test]
    fn kernel_normalization_is_idempotent() {
        let om = FreqSpec::Poly { coeffs: vec![0.0, 1.0] }.to_smooth_fn::<f64>();
        let kernel = RotationKernel::new(om, Ratio::new(1, 1), tol()).unwrap();
        for theta in [-7.3, -0.4, 0.0, 2.9, 55.1] {
            let once = kernel.normalize_theta(theta, 1.7);
            let twice = kernel.normalize_theta(once, 1.7);
            assert!((once - twice).abs() < 1e-12, "theta={theta}");
        }
    }

    #[test]
    fn f32_lane_fuzzes_clean() {
        let mut t = ToleranceProfile::<f32>::default();
        t.rank_rel_tol = 1e-5;
        t.map_abs_tol = 1e-4;
        t.fd_abs_tol = 1e-1;
        t.fd_step = 1e-2;
        let g = crate::models::so3_r3(t);
        let mut rng = crate::rng::seeded(77);
        let report = check_groupoid_axioms(&g, 200, &mut rng).unwrap();
        assert!(report.worst() < 1e-4, "f32 worst residual {}", report.worst());
    }
}
