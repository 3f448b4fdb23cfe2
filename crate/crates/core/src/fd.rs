//! Central finite differences, used to cross-validate every analytic Jacobian
//! and infinitesimal generator supplied by a scenario.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{real, Scalar};

/// Central-difference Jacobian of `f` at `x` with step `h` per coordinate.
pub fn jacobian_central<T, F>(f: F, x: &DVector<T>, h: T) -> DMatrix<T>
where
    T: Scalar,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let n = x.len();
    let two = real::<T>(2.0);
    let f0 = f(x);
    let m = f0.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        let df = (f(&xp) - f(&xm)) / (two * h);
        jac.set_column(j, &df);
    }
    jac
}

/// Central-difference derivative of a curve `t -> f(t)` at `t = 0`.
pub fn curve_derivative<T, F>(f: F, h: T) -> DVector<T>
where
    T: Scalar,
    F: Fn(T) -> DVector<T>,
{
    let two = real::<T>(2.0);
    (f(h) - f(-h)) / (two * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        let f = |x: &DVector<f64>| &a * x;
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let j = jacobian_central(f, &x, 1e-6);
        assert!((j - a).norm() < 1e-9);
    }

    #[test]
    fn curve_derivative_of_sine() {
        let f = |t: f64| DVector::from_vec(vec![t.sin(), t.cos()]);
        let d = curve_derivative(f, 1e-6);
        assert!((d[0] - 1.0).abs() < 1e-9);
        assert!(d[1].abs() < 1e-9);
    }
}
