//! Closed-form metrics and fields used by the bundled scenarios.
//!
//! Coordinates on `R x N` are `(t, x^1, ..., x^n)` with time first.

use crate::fields::{CovectorField, Matrix, ScalarField, Vector};
use crate::geometry::{MetricField, Signature};
use crate::stationary::StationaryMetric;

/// Flat `diag(-1, 1, ..., 1)`.
pub fn minkowski(dim: usize) -> MetricField {
    MetricField::new(dim, Signature::Lorentzian, move |_| {
        let mut g = Matrix::identity(dim, dim);
        g[(0, 0)] = -1.0;
        g
    })
    .with_deriv(move |_| vec![Matrix::zeros(dim, dim); dim])
}

pub fn euclidean(dim: usize) -> MetricField {
    MetricField::new(dim, Signature::Riemannian, move |_| Matrix::identity(dim, dim))
        .with_deriv(move |_| vec![Matrix::zeros(dim, dim); dim])
}

/// `-dt^2 + h` on `R x N`.
pub fn product(h: MetricField) -> MetricField {
    let n = h.dim();
    let base = h.clone();
    let out = MetricField::new(n + 1, Signature::Lorentzian, move |x| {
        let xs = x.rows(1, n).into_owned();
        let mut g = Matrix::zeros(n + 1, n + 1);
        g[(0, 0)] = -1.0;
        g.view_mut((1, 1), (n, n)).copy_from(&base.eval(&xs));
        g
    });
    if !h.has_analytic_deriv() {
        return out;
    }
    out.with_deriv(move |x| {
        let xs = x.rows(1, n).into_owned();
        let mut d = vec![Matrix::zeros(n + 1, n + 1)];
        for dk in h.deriv(&xs) {
            let mut m = Matrix::zeros(n + 1, n + 1);
            m.view_mut((1, 1), (n, n)).copy_from(&dk);
            d.push(m);
        }
        d
    })
}

/// `(1 + a e^{-|x|^2}) id` on the plane.
pub fn conformal_bump_metric(a: f64) -> MetricField {
    MetricField::new(2, Signature::Riemannian, move |x| {
        Matrix::identity(2, 2) * (1.0 + a * (-x.norm_squared()).exp())
    })
    .with_deriv(move |x| {
        let e = (-x.norm_squared()).exp();
        (0..2).map(|k| Matrix::identity(2, 2) * (-2.0 * a * x[k] * e)).collect()
    })
}

/// `-dt^2 + (1 + a e^{-|x|^2}) |dx|^2`.
pub fn perturbed_product(a: f64) -> MetricField {
    product(conformal_bump_metric(a))
}

/// Stationary metric with constant `lambda`, constant `omega` and flat base.
pub fn constant_stationary(lambda: f64, omega: [f64; 2]) -> MetricField {
    StationaryMetric::new(ScalarField::constant(lambda, 2), constant_form(&omega), euclidean(2)).assembled()
}

pub fn constant_form(c: &[f64]) -> CovectorField {
    let v = Vector::from_column_slice(c);
    let n = c.len();
    CovectorField::new(n, move |_| v.clone()).with_jacobian(move |_| Matrix::zeros(n, n))
}

/// `(b / 2)(x^1 dx^2 - x^2 dx^1)`, whose differential is `b dx^1 ^ dx^2`.
pub fn rotation_form(b: f64) -> CovectorField {
    CovectorField::new(2, move |x| Vector::from_vec(vec![-0.5 * b * x[1], 0.5 * b * x[0]]))
        .with_jacobian(move |_| Matrix::from_row_slice(2, 2, &[0.0, -0.5 * b, 0.5 * b, 0.0]))
}

/// `lambda = 1`, `omega = rotation_form(b)`, flat `h`.
pub fn stationary_rot(b: f64) -> StationaryMetric {
    StationaryMetric::new(ScalarField::constant(1.0, 2), rotation_form(b), euclidean(2))
}

/// `(b / 2)(1 + k x^1)(x^1 dx^2 - x^2 dx^1)`: a field strength varying along `x^1`.
pub fn nonuniform_rotation_form(b: f64, k: f64) -> CovectorField {
    CovectorField::new(2, move |x| {
        let s = 0.5 * b * (1.0 + k * x[0]);
        Vector::from_vec(vec![-s * x[1], s * x[0]])
    })
    .with_jacobian(move |x| {
        let h = 0.5 * b;
        Matrix::from_row_slice(
            2,
            2,
            &[-h * k * x[1], -h * (1.0 + k * x[0]), h * (1.0 + 2.0 * k * x[0]), 0.0],
        )
    })
}

/// The gauge term `a (rho sin(theta) + rho^2 cos(theta))` used by
/// [`stationary_rot_normal`].
pub fn normal_gauge_term(a: f64) -> ScalarField {
    ScalarField::new(move |x| a * (x[1] * x[0].sin() + x[1] * x[1] * x[0].cos())).with_gradient(move |x| {
        let (s, c) = x[0].sin_cos();
        Vector::from_vec(vec![a * (x[1] * c - x[1] * x[1] * s), a * (s + 2.0 * x[1] * c)])
    })
}

/// [`stationary_rot`] in boundary normal coordinates `(theta, rho)` with
/// `rho = 1 - |x|`, plus `d` of [`normal_gauge_term`].
pub fn stationary_rot_normal(b: f64, a: f64) -> StationaryMetric {
    let h = MetricField::new(2, Signature::Riemannian, |x| {
        Matrix::from_row_slice(2, 2, &[(1.0 - x[1]).powi(2), 0.0, 0.0, 1.0])
    })
    .with_deriv(|x| {
        vec![
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(2, 2, &[-2.0 * (1.0 - x[1]), 0.0, 0.0, 0.0]),
        ]
    })
    .with_domain(|x| x[1] < 1.0);
    let gauge = normal_gauge_term(a);
    let omega = CovectorField::new(2, move |x| {
        Vector::from_vec(vec![0.5 * b * (1.0 - x[1]).powi(2), 0.0]) + gauge.gradient(x)
    });
    StationaryMetric::new(ScalarField::constant(1.0, 2), omega, h)
}

/// `amplitude * exp(-|x - center|^2 / width^2)`.
pub fn gaussian(amplitude: f64, center: &[f64], width: f64) -> ScalarField {
    let c = Vector::from_column_slice(center);
    let c2 = c.clone();
    let w2 = width * width;
    ScalarField::new(move |x| amplitude * (-(x - &c).norm_squared() / w2).exp()).with_gradient(move |x| {
        let d = x - &c2;
        let e = amplitude * (-d.norm_squared() / w2).exp();
        d * (-2.0 * e / w2)
    })
}

/// `amplitude * (1 - |x|^2)^4` inside the unit disk and zero outside; it
/// vanishes to third order on the unit circle.
pub fn collar_bump(amplitude: f64) -> ScalarField {
    ScalarField::new(move |x| {
        let q = 1.0 - x.norm_squared();
        if q > 0.0 {
            amplitude * q.powi(4)
        } else {
            0.0
        }
    })
    .with_gradient(move |x| {
        let q = 1.0 - x.norm_squared();
        if q > 0.0 {
            x * (-8.0 * amplitude * q.powi(3))
        } else {
            Vector::zeros(x.len())
        }
    })
}

/// A field on `N` viewed as a time-independent field on `R x N`.
pub fn spatial_lift(f: &ScalarField) -> ScalarField {
    let (a, b) = (f.clone(), f.clone());
    let lifted = ScalarField::new(move |x| a.eval(&x.rows(1, x.len() - 1).into_owned())).with_gradient(move |x| {
        let g = b.gradient(&x.rows(1, x.len() - 1).into_owned());
        let mut out = Vector::zeros(x.len());
        out.rows_mut(1, g.len()).copy_from(&g);
        out
    });
    if f.is_positive() {
        lifted.positive()
    } else {
        lifted
    }
}
