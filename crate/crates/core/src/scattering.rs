//! The scattering relation: lightlike rays from one boundary hypersurface to
//! another, recorded by their tangential projections.

use crate::fields::{bilinear, Vector};
use crate::geometry::{
    boundary_project, check_transversal, integrate_geodesic, lightlike_completion, BoundaryHypersurface, GeodesicPath,
    IntegrationConfig, MetricField, Stop,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringRecord {
    pub x: Vector,
    pub v_proj: Vector,
    pub y: Vector,
    pub w_proj: Vector,
    /// Affine length of the ray in the normalization of `v_proj`.
    pub travel: f64,
    /// Unprojected entry velocity.
    pub v_full: Vector,
    /// Unprojected exit velocity.
    pub w_full: Vector,
}

impl ScatteringRecord {
    /// The same ray with velocities scaled by `a > 0`.
    pub fn rescaled(&self, a: f64) -> Self {
        Self {
            x: self.x.clone(),
            v_proj: &self.v_proj * a,
            y: self.y.clone(),
            w_proj: &self.w_proj * a,
            travel: self.travel / a,
            v_full: &self.v_full * a,
            w_full: &self.w_full * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedMode {
    /// `|(v', v')_g| = 1`.
    UnitInduced,
    /// `v'_t = -(v', dt)_g = 1`.
    TimeComponent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterConfig {
    pub integration: IntegrationConfig,
    pub sigma_max: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            integration: IntegrationConfig::default(),
            sigma_max: 20.0,
        }
    }
}

/// `-(v, d_t)_g`, the time component of `v` with respect to the coordinate
/// time axis (index 0).
pub fn time_component(g: &MetricField, x: &Vector, v: &Vector) -> f64 {
    let gx = g.eval(x);
    -(gx.row(0) * v)[0]
}

/// Scatters `(x, v_proj)` from `U` to the first transversal hit on `V`.
pub fn scatter(
    g: &MetricField,
    u: &BoundaryHypersurface,
    v: &BoundaryHypersurface,
    x: &Vector,
    v_proj: &Vector,
    cfg: &ScatterConfig,
) -> Result<ScatteringRecord> {
    scatter_path(g, u, v, x, v_proj, cfg).map(|(rec, _)| rec)
}

/// As [`scatter`], also returning the sampled ray.
pub fn scatter_path(
    g: &MetricField,
    u: &BoundaryHypersurface,
    v: &BoundaryHypersurface,
    x: &Vector,
    v_proj: &Vector,
    cfg: &ScatterConfig,
) -> Result<(ScatteringRecord, GeodesicPath)> {
    if !u.contains(x, 1e-10 * u.gradient(x).norm().max(1.0)) {
        return Err(Error::Precondition(format!(
            "entry point is off the entry surface (b = {:e})",
            u.value(x)
        )));
    }
    let full = lightlike_completion(g, u, x, v_proj, -1.0)?;
    check_transversal(g, u, x, &full)?;
    let path = integrate_geodesic(
        g,
        x,
        &full,
        Stop::Surface {
            surface: v,
            sigma_max: cfg.sigma_max,
        },
        &cfg.integration,
    )?;
    let end = path.last();
    check_transversal(g, v, &end.x, &end.v)?;
    let w_proj = boundary_project(g, v, &end.x, &end.v)?;
    let rec = ScatteringRecord {
        x: x.clone(),
        v_proj: v_proj.clone(),
        y: end.x.clone(),
        w_proj,
        travel: end.sigma,
        v_full: full,
        w_full: end.v.clone(),
    };
    Ok((rec, path))
}

/// Value of the normalization functional on `v_proj` at `x`.
pub fn normalization_functional(g: &MetricField, x: &Vector, v_proj: &Vector, mode: ReducedMode) -> f64 {
    match mode {
        ReducedMode::UnitInduced => bilinear(&g.eval(x), v_proj, v_proj).abs().sqrt(),
        ReducedMode::TimeComponent => time_component(g, x, v_proj),
    }
}

/// Rescales the record by the positive factor that makes the entry satisfy `mode`.
pub fn normalize(g: &MetricField, rec: &ScatteringRecord, mode: ReducedMode) -> Result<ScatteringRecord> {
    let value = normalization_functional(g, &rec.x, &rec.v_proj, mode);
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Normalization { value });
    }
    Ok(rec.rescaled(1.0 / value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceType;
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    fn slab() -> (BoundaryHypersurface, BoundaryHypersurface) {
        (
            BoundaryHypersurface::plane(3, 1, 0.0, -1.0, SurfaceType::Timelike),
            BoundaryHypersurface::plane(3, 1, 1.0, 1.0, SurfaceType::Timelike),
        )
    }

    #[test]
    fn minkowski_slab_straight_ray() {
        let (u, w) = slab();
        let g = models::minkowski(3);
        let rec = scatter(
            &g,
            &u,
            &w,
            &v(&[0.0, 0.0, 0.0]),
            &v(&[1.0, 0.0, 0.0]),
            &ScatterConfig::default(),
        )
        .unwrap();
        assert!((&rec.y - v(&[1.0, 1.0, 0.0])).norm() < 1e-12);
        assert!((&rec.w_proj - v(&[1.0, 0.0, 0.0])).norm() < 1e-12);
        assert!((rec.travel - 1.0).abs() < 1e-12);
        assert!((&rec.v_full - v(&[1.0, 1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn spacelike_projection_has_no_lift() {
        let (u, w) = slab();
        let g = models::minkowski(3);
        let r = scatter(
            &g,
            &u,
            &w,
            &Vector::zeros(3),
            &v(&[0.5, 0.0, 1.0]),
            &ScatterConfig::default(),
        );
        assert!(matches!(r, Err(Error::NoLift { .. })));
    }

    #[test]
    fn product_disk_exit_time_is_chord_length() {
        let g = models::product(models::euclidean(2));
        let c = BoundaryHypersurface::cylinder(1.0);
        let th: f64 = 0.4;
        let x = v(&[0.0, th.cos(), th.sin()]);
        let vp = v(&[1.0, -0.6 * th.sin(), 0.6 * th.cos()]);
        let rec = scatter(&g, &c, &c, &x, &vp, &ScatterConfig::default()).unwrap();
        let chord = (spatial(&rec.y) - spatial(&x)).norm();
        assert!((rec.y[0] - chord).abs() < 1e-10);
        fn spatial(x: &Vector) -> Vector {
            x.rows(1, 2).into_owned()
        }
    }

    #[test]
    fn homogeneity_and_normalization() {
        let g = models::perturbed_product(0.1);
        let c = BoundaryHypersurface::cylinder(1.0);
        let x = v(&[0.0, 1.0, 0.0]);
        let vp = v(&[1.0, 0.0, 0.5]);
        let cfg = ScatterConfig::default();
        let base = scatter(&g, &c, &c, &x, &vp, &cfg).unwrap();
        let doubled = scatter(&g, &c, &c, &x, &(&vp * 2.0), &cfg).unwrap();
        assert!((&doubled.w_proj - &base.w_proj * 2.0).norm() < 1e-8);
        assert!((doubled.travel - base.travel / 2.0).abs() < 1e-8);
        for mode in [ReducedMode::UnitInduced, ReducedMode::TimeComponent] {
            let a = normalize(&g, &base, mode).unwrap();
            let b = normalize(&g, &doubled, mode).unwrap();
            assert!((&a.w_proj - &b.w_proj).norm() < 1e-8);
            let again = normalize(&g, &a, mode).unwrap();
            assert!((&again.v_proj - &a.v_proj).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_functional_is_rejected() {
        let g = models::minkowski(3);
        let rec = ScatteringRecord {
            x: Vector::zeros(3),
            v_proj: v(&[0.0, 0.0, 1.0]),
            y: Vector::zeros(3),
            w_proj: Vector::zeros(3),
            travel: 1.0,
            v_full: Vector::zeros(3),
            w_full: Vector::zeros(3),
        };
        assert!(matches!(
            normalize(&g, &rec, ReducedMode::TimeComponent),
            Err(Error::Normalization { .. })
        ));
    }
}
