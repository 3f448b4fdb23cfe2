//! Smooth actions of the model groups on coordinate space, with analytic
//! Jacobians and infinitesimal generators. Finite-difference validation of
//! both is part of every scenario.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::line_parameter;
use crate::scalar::{real, Scalar};

type ActFn<T> = Arc<dyn Fn(&DMatrix<T>, &DVector<T>) -> DVector<T> + Send + Sync>;
type JacFn<T> = Arc<dyn Fn(&DMatrix<T>, &DVector<T>) -> DMatrix<T> + Send + Sync>;
type GenFn<T> = Arc<dyn Fn(&DMatrix<T>, &DVector<T>) -> DVector<T> + Send + Sync>;

/// A smooth left action together with its first-order data.
#[derive(Clone)]
pub struct SmoothActionModel<T: Scalar> {
    pub base_dim: usize,
    act: ActFn<T>,
    base_jacobian: JacFn<T>,
    generator: GenFn<T>,
}

impl<T: Scalar> std::fmt::Debug for SmoothActionModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothActionModel").field("base_dim", &self.base_dim).finish()
    }
}

impl<T: Scalar> SmoothActionModel<T> {
    pub fn act(&self, g: &DMatrix<T>, x: &DVector<T>) -> DVector<T> {
        (self.act)(g, x)
    }

    /// Analytic Jacobian of `x -> act(g, x)`.
    pub fn base_jacobian(&self, g: &DMatrix<T>, x: &DVector<T>) -> DMatrix<T> {
        (self.base_jacobian)(g, x)
    }

    /// Analytic derivative `d/ds act(exp(s A), x)` at `s = 0` for an algebra
    /// element `A`.
    pub fn generator(&self, algebra_elt: &DMatrix<T>, x: &DVector<T>) -> DVector<T> {
        (self.generator)(algebra_elt, x)
    }
}

/// Canonical linear action of a matrix group on R^n by matrix-vector product.
pub fn linear_action<T: Scalar>(n: usize) -> SmoothActionModel<T> {
    SmoothActionModel {
        base_dim: n,
        act: Arc::new(|g: &DMatrix<T>, x: &DVector<T>| g * x),
        base_jacobian: Arc::new(|g: &DMatrix<T>, _: &DVector<T>| g.clone()),
        generator: Arc::new(|a: &DMatrix<T>, x: &DVector<T>| a * x),
    }
}

/// A scalar function of the slow coordinate with an analytic derivative.
#[derive(Clone)]
pub struct SmoothFn<T: Scalar> {
    pub label: String,
    eval: Arc<dyn Fn(T) -> T + Send + Sync>,
    deriv: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T: Scalar> std::fmt::Debug for SmoothFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SmoothFn({})", self.label)
    }
}

impl<T: Scalar> SmoothFn<T> {
    pub fn eval(&self, t: T) -> T {
        (self.eval)(t)
    }

    pub fn deriv(&self, t: T) -> T {
        (self.deriv)(t)
    }
}

/// The documented family of frequency functions accepted in configuration:
/// polynomials and `scale * t * exp(rate * t)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreqSpec {
    Poly { coeffs: Vec<f64> },
    TExp { scale: f64, rate: f64 },
}

impl FreqSpec {
    /// Parse the compact CLI form `poly:c0,c1,...` or `texp:scale,rate`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("frequency spec `{s}` missing `kind:` prefix")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{p}` in frequency spec `{s}`")))
            })
            .collect::<Result<_>>()?;
        match kind {
            "poly" => {
                if nums.is_empty() {
                    return Err(Error::Config("polynomial spec needs coefficients".into()));
                }
                Ok(FreqSpec::Poly { coeffs: nums })
            }
            "texp" => {
                if nums.len() != 2 {
                    return Err(Error::Config("texp spec needs exactly scale,rate".into()));
                }
                Ok(FreqSpec::TExp { scale: nums[0], rate: nums[1] })
            }
            other => Err(Error::Config(format!("unknown frequency kind `{other}`"))),
        }
    }

    pub fn to_smooth_fn<T: Scalar>(&self) -> SmoothFn<T> {
        match self {
            FreqSpec::Poly { coeffs } => {
                let c: Vec<T> = coeffs.iter().map(|x| real(*x)).collect();
                let c2 = c.clone();
                let label = format!("poly{coeffs:?}");
                SmoothFn {
                    label,
                    eval: Arc::new(move |t: T| {
                        let mut acc = T::zero();
                        for coeff in c.iter().rev() {
                            acc = acc * t + *coeff;
                        }
                        acc
                    }),
                    deriv: Arc::new(move |t: T| {
                        let mut acc = T::zero();
                        for (i, coeff) in c2.iter().enumerate().skip(1).rev() {
                            acc = acc * t + *coeff * real(i as f64);
                        }
                        acc
                    }),
                }
            }
            FreqSpec::TExp { scale, rate } => {
                let s: T = real(*scale);
                let r: T = real(*rate);
                SmoothFn {
                    label: format!("texp[{scale},{rate}]"),
                    eval: Arc::new(move |t: T| s * t * (r * t).exp()),
                    deriv: Arc::new(move |t: T| s * (r * t).exp() * (T::one() + r * t)),
                }
            }
        }
    }
}

/// Fiberwise rotation of C x R with frequency `omega(t)`: the line group
/// parameter theta acts on coordinates (a, b, t) by rotating (a, b) through
/// the angle `omega(t) * theta` and fixing t.
pub fn rotation_fiber_action<T: Scalar>(omega: SmoothFn<T>) -> SmoothActionModel<T> {
    let om1 = omega.clone();
    let om2 = omega.clone();
    let om3 = omega;
    SmoothActionModel {
        base_dim: 3,
        act: Arc::new(move |g: &DMatrix<T>, x: &DVector<T>| {
            let theta = line_parameter(g);
            let phi = om1.eval(x[2]) * theta;
            let (s, c) = phi.sin_cos();
            DVector::from_vec(vec![x[0] * c - x[1] * s, x[0] * s + x[1] * c, x[2]])
        }),
        base_jacobian: Arc::new(move |g: &DMatrix<T>, x: &DVector<T>| {
            let theta = line_parameter(g);
            let t = x[2];
            let phi = om2.eval(t) * theta;
            let dphi_dt = om2.deriv(t) * theta;
            let (s, c) = phi.sin_cos();
            let da_dt = dphi_dt * (-x[0] * s - x[1] * c);
            let db_dt = dphi_dt * (x[0] * c - x[1] * s);
            let z = T::zero();
            let o = T::one();
            DMatrix::from_row_slice(3, 3, &[c, -s, da_dt, s, c, db_dt, z, z, o])
        }),
        generator: Arc::new(move |a: &DMatrix<T>, x: &DVector<T>| {
            // Algebra element c*N with N = [[0,1],[0,0]]; the flow rotates the
            // fiber with angular speed c * omega(t).
            let speed = a[(0, 1)] * om3.eval(x[2]);
            DVector::from_vec(vec![-x[1] * speed, x[0] * speed, T::zero()])
        }),
    }
}

/// Max deviation between the analytic Jacobian/generator and central finite
/// differences at one sample.
pub fn validate_first_order<T: Scalar>(
    group: &crate::group::LieGroupModel<T>,
    action: &SmoothActionModel<T>,
    g: &DMatrix<T>,
    x: &DVector<T>,
    fd_step: T,
) -> (T, T) {
    let jac = action.base_jacobian(g, x);
    let jac_fd = crate::fd::jacobian_central(|p| action.act(g, p), x, fd_step);
    let jac_dev = (jac - jac_fd).norm();

    let mut gen_dev = T::zero();
    for i in 0..group.group_dim {
        let analytic = action.generator(&group.algebra_basis[i], x);
        let fd = crate::fd::curve_derivative(
            |s: T| {
                let mut coords = DVector::zeros(group.group_dim);
                coords[i] = s;
                action.act(&group.exp(&coords), x)
            },
            fd_step,
        );
        gen_dev = gen_dev.max((analytic - fd).norm());
    }
    (jac_dev, gen_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{line_element, line_group, so3};
    use crate::rng::{nonzero_vector, seeded};

    #[test]
    fn linear_action_first_order_data() {
        let g = so3::<f64>();
        let action = linear_action::<f64>(3);
        let mut rng = seeded(9);
        for _ in 0..50 {
            let elt = g.sample(&mut rng);
            let x = nonzero_vector::<f64>(&mut rng, 3, 1e-2);
            let (jd, gd) = validate_first_order(&g, &action, &elt, &x, 1e-6);
            assert!(jd < 1e-9, "jacobian dev {jd}");
            assert!(gd < 1e-9, "generator dev {gd}");
        }
    }

    #[test]
    fn rotation_fiber_action_first_order_data() {
        let omega = FreqSpec::Poly { coeffs: vec![0.0, 1.0] }.to_smooth_fn::<f64>();
        let action = rotation_fiber_action(omega);
        let g = line_group::<f64>();
        let mut rng = seeded(10);
        for _ in 0..50 {
            let elt = line_element(crate::rng::uniform::<f64>(&mut rng, -3.0, 3.0));
            let x = nonzero_vector::<f64>(&mut rng, 3, 1e-2);
            let (jd, gd) = validate_first_order(&g, &action, &elt, &x, 1e-6);
            assert!(jd < 1e-5, "jacobian dev {jd}");
            assert!(gd < 1e-5, "generator dev {gd}");
        }
    }

    #[test]
    fn action_axioms_hold_on_samples() {
        let omega = FreqSpec::TExp { scale: 0.5, rate: -0.25 }.to_smooth_fn::<f64>();
        let action = rotation_fiber_action(omega);
        let g = line_group::<f64>();
        let mut rng = seeded(11);
        for _ in 0..100 {
            let a = g.sample(&mut rng);
            let b = g.sample(&mut rng);
            let x = nonzero_vector::<f64>(&mut rng, 3, 1e-2);
            let id_res = (action.act(&g.identity(), &x) - &x).norm();
            assert!(id_res < 1e-14);
            let lhs = action.act(&a, &action.act(&b, &x));
            let rhs = action.act(&g.multiply(&a, &b), &x);
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn freq_spec_parsing() {
        assert_eq!(
            FreqSpec::parse("poly:0,1").unwrap(),
            FreqSpec::Poly { coeffs: vec![0.0, 1.0] }
        );
        assert_eq!(FreqSpec::parse("texp:2,-0.5").unwrap(), FreqSpec::TExp { scale: 2.0, rate: -0.5 });
        assert!(FreqSpec::parse("poly").is_err());
        assert!(FreqSpec::parse("spline:1,2").is_err());
    }

    #[test]
    fn poly_derivative_matches_finite_differences() {
        let f = FreqSpec::Poly { coeffs: vec![1.0, -2.0, 0.5, 3.0] }.to_smooth_fn::<f64>();
        for t in [-1.5, 0.0, 0.7, 2.0] {
            let fd = (f.eval(t + 1e-6) - f.eval(t - 1e-6)) / 2e-6;
            assert!((f.deriv(t) - fd).abs() < 1e-5);
        }
    }
}
