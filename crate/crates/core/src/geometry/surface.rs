use std::fmt;
use std::sync::Arc;

use crate::fields::{bilinear, Matrix, Vector};
use crate::geometry::metric::{inner, MetricField};
use crate::{Error, Result};

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceType {
    Timelike,
    Spacelike,
}

/// Explicit local parametrization `u -> X(u)` of a hypersurface.
#[derive(Clone)]
pub struct SurfaceChart {
    param_dim: usize,
    embed: VectorFn,
    coords: VectorFn,
    tangents: MatrixFn,
}

impl SurfaceChart {
    pub fn new(
        param_dim: usize,
        embed: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        coords: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        tangents: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            param_dim,
            embed: Arc::new(embed),
            coords: Arc::new(coords),
            tangents: Arc::new(tangents),
        }
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn embed(&self, u: &Vector) -> Vector {
        (self.embed)(u)
    }

    /// Chart coordinates of a point on the surface.
    pub fn coords(&self, x: &Vector) -> Vector {
        (self.coords)(x)
    }

    /// Columns are the coordinate tangent vectors `dX/du^a`.
    pub fn tangents(&self, u: &Vector) -> Matrix {
        (self.tangents)(u)
    }
}

/// A hypersurface `{b = 0}` with its gradient and orientation.
///
/// The exterior is the side where `exterior_sign * b > 0`.
#[derive(Clone)]
pub struct BoundaryHypersurface {
    dim: usize,
    defining: ScalarFn,
    gradient: VectorFn,
    causal_type: SurfaceType,
    exterior_sign: f64,
    chart: Option<SurfaceChart>,
}

impl fmt::Debug for BoundaryHypersurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryHypersurface")
            .field("dim", &self.dim)
            .field("causal_type", &self.causal_type)
            .field("exterior_sign", &self.exterior_sign)
            .field("chart", &self.chart.is_some())
            .finish()
    }
}

impl BoundaryHypersurface {
    pub fn new(
        dim: usize,
        defining: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        causal_type: SurfaceType,
        exterior_sign: f64,
    ) -> Self {
        Self {
            dim,
            defining: Arc::new(defining),
            gradient: Arc::new(gradient),
            causal_type,
            exterior_sign: exterior_sign.signum(),
            chart: None,
        }
    }

    pub fn with_chart(mut self, chart: SurfaceChart) -> Self {
        self.chart = Some(chart);
        self
    }

    /// The timelike cylinder `R x {|x| = radius}` in coordinates `(t, x1, x2)`,
    /// charted by `(t, theta)`.
    pub fn cylinder(radius: f64) -> Self {
        let chart = SurfaceChart::new(
            2,
            move |u| Vector::from_vec(vec![u[0], radius * u[1].cos(), radius * u[1].sin()]),
            |x| Vector::from_vec(vec![x[0], x[2].atan2(x[1])]),
            move |u| Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, -radius * u[1].sin(), 0.0, radius * u[1].cos()]),
        );
        Self::new(
            3,
            move |x| x[1] * x[1] + x[2] * x[2] - radius * radius,
            |x| Vector::from_vec(vec![0.0, 2.0 * x[1], 2.0 * x[2]]),
            SurfaceType::Timelike,
            1.0,
        )
        .with_chart(chart)
    }

    /// The circle `{|x| = radius}` in the plane, charted by the polar angle.
    pub fn circle(radius: f64) -> Self {
        let chart = SurfaceChart::new(
            1,
            move |u| Vector::from_vec(vec![radius * u[0].cos(), radius * u[0].sin()]),
            |x| Vector::from_vec(vec![x[1].atan2(x[0])]),
            move |u| Matrix::from_row_slice(2, 1, &[-radius * u[0].sin(), radius * u[0].cos()]),
        );
        Self::new(
            2,
            move |x| x[0] * x[0] + x[1] * x[1] - radius * radius,
            |x| Vector::from_vec(vec![2.0 * x[0], 2.0 * x[1]]),
            SurfaceType::Timelike,
            1.0,
        )
        .with_chart(chart)
    }

    /// The coordinate plane `{x^axis = offset}`; exterior is where
    /// `exterior_sign * (x^axis - offset) > 0`. Charted by the other coordinates.
    pub fn plane(dim: usize, axis: usize, offset: f64, exterior_sign: f64, causal_type: SurfaceType) -> Self {
        let s = exterior_sign.signum();
        let chart = SurfaceChart::new(
            dim - 1,
            move |u| {
                let mut x = Vector::zeros(dim);
                let mut k = 0;
                for i in 0..dim {
                    if i == axis {
                        x[i] = offset;
                    } else {
                        x[i] = u[k];
                        k += 1;
                    }
                }
                x
            },
            move |x| Vector::from_iterator(dim - 1, (0..dim).filter(|&i| i != axis).map(|i| x[i])),
            move |_| {
                let mut t = Matrix::zeros(dim, dim - 1);
                let mut k = 0;
                for i in 0..dim {
                    if i != axis {
                        t[(i, k)] = 1.0;
                        k += 1;
                    }
                }
                t
            },
        );
        Self::new(
            dim,
            move |x| s * (x[axis] - offset),
            move |_| {
                let mut g = Vector::zeros(dim);
                g[axis] = s;
                g
            },
            causal_type,
            1.0,
        )
        .with_chart(chart)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn causal_type(&self) -> SurfaceType {
        self.causal_type
    }

    pub fn exterior_sign(&self) -> f64 {
        self.exterior_sign
    }

    pub fn chart(&self) -> Option<&SurfaceChart> {
        self.chart.as_ref()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.defining)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.value(x).abs() <= tol
    }

    /// Checks a nonzero gradient and that the normal's causal character
    /// matches the declared surface type.
    pub fn validate_at(&self, g: &MetricField, x: &Vector) -> Result<()> {
        boundary_normal(self, g, x).map(|_| ())
    }
}

/// The exterior g-unit normal at `x`: `(nu, nu)_g = +1` for timelike
/// surfaces and `-1` for spacelike ones.
pub fn boundary_normal(s: &BoundaryHypersurface, g: &MetricField, x: &Vector) -> Result<Vector> {
    let db = s.gradient(x);
    if db.norm() == 0.0 || !db.iter().all(|c| c.is_finite()) {
        return Err(Error::DegenerateBoundary("vanishing gradient".into()));
    }
    let ginv = g.inverse(x)?;
    let n = &ginv * &db;
    let q = db.dot(&n);
    let scale = db.norm_squared() * ginv.abs().max();
    if q.abs() <= 1e-14 * scale {
        return Err(Error::DegenerateBoundary(
            "induced metric is degenerate (lightlike surface)".into(),
        ));
    }
    let consistent = match s.causal_type() {
        SurfaceType::Timelike => q > 0.0,
        SurfaceType::Spacelike => q < 0.0,
    };
    if !consistent {
        return Err(Error::DegenerateBoundary(format!(
            "surface declared {:?} but (db, db)_g^-1 = {q:e}",
            s.causal_type()
        )));
    }
    Ok(n * (s.exterior_sign() / q.abs().sqrt()))
}

fn normal_sign(s: &BoundaryHypersurface) -> f64 {
    match s.causal_type() {
        SurfaceType::Timelike => 1.0,
        SurfaceType::Spacelike => -1.0,
    }
}

/// Orthogonal projection of `v` onto `T_x S`.
pub fn boundary_project(g: &MetricField, s: &BoundaryHypersurface, x: &Vector, v: &Vector) -> Result<Vector> {
    let nu = boundary_normal(s, g, x)?;
    let vn = inner(g, x, v, &nu)?;
    Ok(v - nu * (vn * normal_sign(s)))
}

/// The lightlike vector `v' + a nu` whose projection is `v'`;
/// `orientation = -1` points into the interior.
pub fn lightlike_completion(
    g: &MetricField,
    s: &BoundaryHypersurface,
    x: &Vector,
    v_proj: &Vector,
    orientation: f64,
) -> Result<Vector> {
    let db = s.gradient(x);
    let normal_component = db.dot(v_proj);
    if normal_component.abs() > 1e-8 * db.norm() * v_proj.norm().max(1e-300) {
        return Err(Error::NotTangent { normal_component });
    }
    let nu = boundary_normal(s, g, x)?;
    let gx = g.eval(x);
    let q = bilinear(&gx, v_proj, v_proj);
    let a2 = -q * normal_sign(s);
    if a2 <= 0.0 {
        return Err(Error::NoLift { quadratic: q });
    }
    Ok(v_proj + nu * (orientation.signum() * a2.sqrt()))
}

/// Rejects rays with `|(v, nu)_g| < 1e-8 |v|`.
pub fn check_transversal(g: &MetricField, s: &BoundaryHypersurface, x: &Vector, v: &Vector) -> Result<f64> {
    let nu = boundary_normal(s, g, x)?;
    let vn = inner(g, x, v, &nu)?;
    let ratio = vn.abs() / v.norm().max(1e-300);
    if ratio < 1e-8 {
        return Err(Error::Tangency { ratio });
    }
    Ok(vn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    #[test]
    fn product_normal_on_cylinder() {
        let g = models::minkowski(3);
        let s = BoundaryHypersurface::cylinder(1.0);
        let nu = boundary_normal(&s, &g, &v(&[0.7, 1.0, 0.0])).unwrap();
        assert!((nu - v(&[0.0, 1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn stationary_normal_has_time_shift() {
        let g = models::constant_stationary(1.0, [0.3, 0.0]);
        let s = BoundaryHypersurface::cylinder(1.0);
        let nu = boundary_normal(&s, &g, &v(&[2.0, 1.0, 0.0])).unwrap();
        assert!((&nu - v(&[-0.3, 1.0, 0.0])).norm() < 1e-14, "{nu}");
    }

    #[test]
    fn normal_is_unit_on_surface_grid() {
        let g = models::stationary_rot(0.2).assembled();
        let s = BoundaryHypersurface::cylinder(1.0);
        let chart = s.chart().unwrap().clone();
        for i in 0..50 {
            let u = v(&[0.1 * i as f64, 2.0 * std::f64::consts::PI * i as f64 / 50.0]);
            let x = chart.embed(&u);
            let nu = boundary_normal(&s, &g, &x).unwrap();
            assert!((inner(&g, &x, &nu, &nu).unwrap() - 1.0).abs() < 1e-12);
            for t in chart.tangents(&u).column_iter() {
                assert!(inner(&g, &x, &nu, &t.into_owned()).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let g = models::minkowski(3);
        let s = BoundaryHypersurface::cylinder(1.0);
        let x = v(&[0.3, 1.0, 0.0]);
        let nu = boundary_normal(&s, &g, &x).unwrap();
        assert!(boundary_project(&g, &s, &x, &nu).unwrap().norm() < 1e-15);
        let p = boundary_project(&g, &s, &x, &v(&[1.0, 1.0, 0.0])).unwrap();
        assert!((p - v(&[1.0, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn stationary_projection_time_component_two_ways() {
        let omega = [0.3, -0.2];
        let g = models::constant_stationary(1.0, omega);
        let s = BoundaryHypersurface::cylinder(1.0);
        let th: f64 = 0.4;
        let x = v(&[0.0, th.cos(), th.sin()]);
        let vv = v(&[0.9, -0.5, 0.2]);
        let p = boundary_project(&g, &s, &x, &vv).unwrap();
        let nux = [th.cos(), th.sin()];
        let w_nu = omega[0] * nux[0] + omega[1] * nux[1];
        let vx_nu = vv[1] * nux[0] + vv[2] * nux[1];
        // coordinate time component, then v'_t = v'^0 + <omega, v'_x>
        assert!((p[0] - (vv[0] + w_nu * vx_nu)).abs() < 1e-14);
        let vt_proj = p[0] + omega[0] * p[1] + omega[1] * p[2];
        let vt_direct = vv[0] + omega[0] * vv[1] + omega[1] * vv[2];
        assert!((vt_proj - vt_direct).abs() < 1e-12);
    }

    #[test]
    fn completion_examples() {
        let g = models::minkowski(3);
        let s = BoundaryHypersurface::cylinder(1.0);
        let x = v(&[0.0, 1.0, 0.0]);
        let w = lightlike_completion(&g, &s, &x, &v(&[1.0, 0.0, 0.0]), -1.0).unwrap();
        assert!((w - v(&[1.0, -1.0, 0.0])).norm() < 1e-15);
        // spacelike v' on a timelike surface has no lightlike lift
        assert!(matches!(
            lightlike_completion(&g, &s, &x, &v(&[0.0, 0.0, 1.0]), -1.0),
            Err(Error::NoLift { .. })
        ));
        assert!(matches!(
            lightlike_completion(&g, &s, &x, &v(&[1.0, 0.5, 0.0]), -1.0),
            Err(Error::NotTangent { .. })
        ));
    }

    #[test]
    fn stationary_completion_is_null_and_round_trips() {
        let omega = [0.3, 0.1];
        let g = models::constant_stationary(1.0, omega);
        let s = BoundaryHypersurface::cylinder(1.0);
        let th: f64 = 1.1;
        let x = v(&[0.5, th.cos(), th.sin()]);
        let tangent = v(&[0.0, -th.sin(), th.cos()]);
        let vp = v(&[1.0, 0.0, 0.0]) + tangent * 0.4;
        let w = lightlike_completion(&g, &s, &x, &vp, -1.0).unwrap();
        let k = w[0] + omega[0] * w[1] + omega[1] * w[2];
        let res = -k * k + w[1] * w[1] + w[2] * w[2];
        assert!(res.abs() < 1e-12);
        let back = boundary_project(&g, &s, &x, &w).unwrap();
        assert!((back - vp).norm() < 1e-12);
    }

    #[test]
    fn tangent_rays_are_rejected() {
        let g = models::minkowski(3);
        let s = BoundaryHypersurface::cylinder(1.0);
        let x = v(&[0.0, 1.0, 0.0]);
        assert!(matches!(
            check_transversal(&g, &s, &x, &v(&[1.0, 0.0, 1.0])),
            Err(Error::Tangency { .. })
        ));
        assert!(check_transversal(&g, &s, &x, &v(&[1.0, 0.6, 0.8])).is_ok());
    }

    #[test]
    fn declared_type_must_match_normal() {
        let g = models::minkowski(3);
        let wrong = BoundaryHypersurface::plane(3, 0, 0.0, 1.0, SurfaceType::Timelike);
        assert!(wrong.validate_at(&g, &Vector::zeros(3)).is_err());
        let right = BoundaryHypersurface::plane(3, 0, 0.0, 1.0, SurfaceType::Spacelike);
        let nu = boundary_normal(&right, &g, &Vector::zeros(3)).unwrap();
        assert!((inner(&g, &Vector::zeros(3), &nu, &nu).unwrap() + 1.0).abs() < 1e-15);
    }
}
