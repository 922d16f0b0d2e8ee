//! The light ray transform of symmetric two-tensors, the symmetrized
//! differential, and its kernel checks.

use crate::fields::{CovectorField, Matrix, ScalarField, SymTwoTensorField, Vector};
use crate::geometry::{christoffel, GeodesicPath, MetricField};
use crate::quadrature::simpson;
use crate::{Error, Result};

/// Largest `|(gamma', gamma')|` accepted as lightlike.
pub const LIGHTLIKE_TOL: f64 = 1e-8;

/// Simpson quadrature of `<f, gamma' gamma'>` over the path samples, with no
/// causal precondition.
pub fn ray_integral(f: &SymTwoTensorField, path: &GeodesicPath) -> f64 {
    let nodes: Vec<f64> = path.samples.iter().map(|s| s.sigma).collect();
    let vals: Vec<f64> = path.samples.iter().map(|s| f.pair(&s.x, &s.v, &s.v)).collect();
    simpson(&nodes, &vals)
}

/// `L f` over a lightlike path.
pub fn light_ray_transform(f: &SymTwoTensorField, path: &GeodesicPath) -> Result<f64> {
    if path.speed_squared.abs() > LIGHTLIKE_TOL {
        return Err(Error::Precondition(format!(
            "light ray transform needs a lightlike path, speed squared is {:e}",
            path.speed_squared
        )));
    }
    Ok(ray_integral(f, path))
}

/// `(d^s v)_ij = (v_i;j + v_j;i) / 2` with the Levi-Civita connection of `g`.
pub fn sym_diff(v: &CovectorField, g: &MetricField) -> SymTwoTensorField {
    let (v, g) = (v.clone(), g.clone());
    let n = g.dim();
    SymTwoTensorField::new(n, move |x| {
        let jac = v.jacobian(x);
        let vx = v.eval(x);
        let gamma = christoffel(&g, x).unwrap_or_else(|e| panic!("connection undefined: {e}"));
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut c = 0.0;
                for k in 0..n {
                    c += gamma.get(k, i, j) * vx[k];
                }
                out[(i, j)] = 0.5 * (jac[(i, j)] + jac[(j, i)]) - c;
            }
        }
        out
    })
}

/// `v(gamma')` at the exit minus at the entry.
pub fn ftc_boundary_term(v: &CovectorField, path: &GeodesicPath) -> f64 {
    let (a, b) = (path.first(), path.last());
    v.eval(&b.x).dot(&b.v) - v.eval(&a.x).dot(&a.v)
}

/// `max |L(d^s v)|` over the rays; `v` must vanish at every ray endpoint.
pub fn kernel_potential_test(v: &CovectorField, g: &MetricField, rays: &[GeodesicPath]) -> Result<f64> {
    let f = sym_diff(v, g);
    let mut worst: f64 = 0.0;
    for ray in rays {
        for end in [ray.first(), ray.last()] {
            let m = v.eval(&end.x).norm();
            if m > 1e-10 {
                return Err(Error::Precondition(format!(
                    "potential does not vanish at a ray endpoint (|v| = {m:e})"
                )));
            }
        }
        worst = worst.max(light_ray_transform(&f, ray)?.abs());
    }
    Ok(worst)
}

/// `max |L(c g)|` over the rays.
pub fn kernel_conformal_test(c: &ScalarField, g: &MetricField, rays: &[GeodesicPath]) -> Result<f64> {
    let f = g.as_tensor().scaled_by(c);
    let mut worst: f64 = 0.0;
    for ray in rays {
        worst = worst.max(light_ray_transform(&f, ray)?.abs());
    }
    Ok(worst)
}

/// `I[f, beta] = int <f, x' x'> + int beta(x')` over a unit-speed base path.
pub fn magnetic_linearized_transform(f: &SymTwoTensorField, beta: &CovectorField, path: &GeodesicPath) -> Result<f64> {
    if (path.speed_squared - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "magnetic transform needs a unit-speed path, speed squared is {}",
            path.speed_squared
        )));
    }
    Ok(crate::stationary::magnetic_transform(f, beta, path))
}

/// `(dx^axis)^2` as a constant tensor field.
pub fn coordinate_square(dim: usize, axis: usize) -> SymTwoTensorField {
    SymTwoTensorField::new(dim, move |_| {
        let mut m = Matrix::zeros(dim, dim);
        m[(axis, axis)] = 1.0;
        m
    })
}

/// A constant covector field.
pub fn constant_covector(c: &Vector) -> CovectorField {
    crate::models::constant_form(c.as_slice())
}
