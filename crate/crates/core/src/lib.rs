//! Numerical diagnostics for the transversal geometry of Lie groupoids.
//!
//! The crate models a closed family of concretely presented Lie groupoids
//! (translation groupoids of matrix group actions, Lie group bundles,
//! quotients by rotation kernels, pullbacks and weak pullbacks), computes
//! longitudinal/transversal tangent data and the linear effect of isotropic
//! arrows, classifies homomorphisms (transversality, fullness, weak
//! equivalence, the inverted class used for right fractions), verifies
//! natural congruences and the fraction-calculus axioms at sample level, and
//! packages everything as deterministic, seedable scenario reports.
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the type aliases at the crate root fix the default
//! `f64` lane used by the CLI.

// Models and homs are bundles of callbacks; their field types spell out the
// closure signatures on purpose.
#![allow(clippy::type_complexity)]

pub mod action;
pub mod config;
pub mod effect;
pub mod error;
pub mod fd;
pub mod fractions;
pub mod group;
pub mod groupoid;
pub mod homs;
pub mod models;
pub mod numlin;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod scalar;
pub mod tol;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar lane.
pub type Real = f64;

pub type Subspace = numlin::Subspace<Real>;
pub type QuotientSpace = numlin::QuotientSpace<Real>;
pub type QuotientLinearMap = numlin::QuotientLinearMap<Real>;
pub type ToleranceProfile = tol::ToleranceProfile<Real>;
pub type LieGroupModel = group::LieGroupModel<Real>;
pub type SmoothActionModel = action::SmoothActionModel<Real>;
pub type SmoothFn = action::SmoothFn<Real>;
pub type BasePoint = groupoid::BasePoint<Real>;
pub type Arrow = groupoid::Arrow<Real>;
pub type GroupoidModel = groupoid::GroupoidModel<Real>;
pub type RotationKernel = groupoid::RotationKernel<Real>;
pub type TransversalData = effect::TransversalData<Real>;
pub type Effect = effect::Effect<Real>;
pub type EffectiveIsotropyModel = effect::EffectiveIsotropyModel<Real>;
pub type GroupoidHom = homs::GroupoidHom<Real>;
pub type NaturalTransformationWitness = homs::NaturalTransformationWitness<Real>;
pub type Span = fractions::Span<Real>;
pub type SkeletonPoint = fractions::SkeletonPoint<Real>;

#[cfg(test)]
mod concurrency_contract {
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn models_are_shareable_across_threads() {
        assert_send_sync::<crate::GroupoidModel>();
        assert_send_sync::<crate::GroupoidHom>();
        assert_send_sync::<crate::LieGroupModel>();
        assert_send_sync::<crate::SmoothActionModel>();
        assert_send_sync::<crate::Span>();
    }
}
