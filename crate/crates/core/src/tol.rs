//! Tolerance profile shared by all numerical decisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Thresholds controlling rank decisions, map comparisons and
/// finite-difference cross-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceProfile<T: Scalar> {
    /// Relative singular-value threshold for rank decisions, scaled by the
    /// largest singular value and the larger matrix dimension.
    pub rank_rel_tol: T,
    /// Absolute tolerance for comparing analytically computed linear maps.
    pub map_abs_tol: T,
    /// Absolute tolerance for finite-difference cross-checks.
    pub fd_abs_tol: T,
    /// Step size for central finite differences.
    pub fd_step: T,
}

impl<T: Scalar> Default for ToleranceProfile<T> {
    fn default() -> Self {
        Self {
            rank_rel_tol: real(1e-10),
            map_abs_tol: real(1e-8),
            fd_abs_tol: real(1e-5),
            fd_step: real(1e-6),
        }
    }
}

impl<T: Scalar> ToleranceProfile<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero();
        if !(pos(self.rank_rel_tol) && pos(self.map_abs_tol) && pos(self.fd_abs_tol) && pos(self.fd_step)) {
            return Err(Error::Config("all tolerances must be strictly positive".into()));
        }
        if self.fd_abs_tol < self.map_abs_tol {
            return Err(Error::Config("fd_abs_tol must be >= map_abs_tol".into()));
        }
        Ok(())
    }
}

/// Serializable override with optional fields, applied on top of defaults.
/// Used by the CLI config file and the `GE_TOL_OVERRIDE` environment variable.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

impl ToleranceOverride {
    pub fn apply<T: Scalar>(&self, base: ToleranceProfile<T>) -> ToleranceProfile<T> {
        ToleranceProfile {
            rank_rel_tol: self.rank_rel_tol.map(real).unwrap_or(base.rank_rel_tol),
            map_abs_tol: self.map_abs_tol.map(real).unwrap_or(base.map_abs_tol),
            fd_abs_tol: self.fd_abs_tol.map(real).unwrap_or(base.fd_abs_tol),
            fd_step: self.fd_step.map(real).unwrap_or(base.fd_step),
        }
    }
}
