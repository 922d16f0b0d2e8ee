//! Two-point connecting geodesics, the energy-based defining function `r`
//! of the lightlike boundary pairs, and checks built on it.

use std::sync::Arc;

use crate::fields::{bilinear, Matrix, SymTwoTensorField, Vector};
use crate::geometry::{
    causal_classify, integrate_flow, lightlike_completion, BoundaryHypersurface, CausalClass, Flow, GeodesicFlow,
    GeodesicPath, IntegrationConfig, MetricField, Stop, CAUSAL_TOL,
};
use crate::lightray::light_ray_transform;
use crate::quadrature::simpson;
use crate::scattering::{scatter, ScatterConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    pub integration: IntegrationConfig,
    /// Convergence threshold on `|exp_x(v) - y|`.
    pub tol: f64,
    /// Newton keeps polishing below `tol` while it still gains; it stops at this level.
    pub polish_tol: f64,
    pub max_iter: usize,
    pub max_condition: f64,
    /// Relative forward-difference step for the Jacobian.
    pub fd_rel: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            integration: IntegrationConfig::default(),
            tol: 1e-10,
            polish_tol: 1e-13,
            max_iter: 50,
            max_condition: 1e10,
            fd_rel: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub path: GeodesicPath,
    pub iterations: usize,
    pub residual: f64,
    /// Condition number of the last Jacobian.
    pub condition: f64,
}

/// Newton iteration on `v -> exp_x(v) - y` with `exp` over `sigma in [0, 1]`.
pub fn shoot<F: Flow + ?Sized>(
    flow: &F,
    x: &Vector,
    y: &Vector,
    seed: Option<&Vector>,
    cfg: &ShootingConfig,
) -> Result<Shot> {
    let eval = |v: &Vector| -> Result<(GeodesicPath, Vector)> {
        let path = integrate_flow(flow, x, v, Stop::MaxSigma(1.0), &cfg.integration)?;
        let f = &path.last().x - y;
        Ok((path, f))
    };
    let mut v = seed.cloned().unwrap_or_else(|| y - x);
    let (mut path, mut f) = eval(&v)?;
    let mut res = f.norm();
    let mut condition = f64::NAN;
    let n = x.len();
    for iter in 0..cfg.max_iter {
        if res <= cfg.polish_tol {
            return Ok(Shot {
                path,
                iterations: iter,
                residual: res,
                condition,
            });
        }
        let d = cfg.fd_rel * v.norm().max(1.0);
        let mut jac = Matrix::zeros(n, n);
        for j in 0..n {
            let mut vj = v.clone();
            vj[j] += d;
            let (_, fj) = eval(&vj)?;
            jac.set_column(j, &((fj - &f) / d));
        }
        let sv = jac.singular_values();
        let smin = sv.min();
        condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
        if condition > cfg.max_condition {
            return Err(Error::ConjugatePoint { condition });
        }
        let delta = jac.lu().solve(&f).ok_or(Error::ConjugatePoint {
            condition: f64::INFINITY,
        })?;
        if res <= cfg.tol {
            let v_try = &v - &delta;
            let (p_try, f_try) = eval(&v_try)?;
            let r_try = f_try.norm();
            if r_try < 0.5 * res {
                v = v_try;
                path = p_try;
                f = f_try;
                res = r_try;
                continue;
            }
            return Ok(Shot {
                path,
                iterations: iter,
                residual: res,
                condition,
            });
        }
        let mut lam = 1.0;
        loop {
            let v_try = &v - &delta * lam;
            let attempt = eval(&v_try);
            let accept = match &attempt {
                Ok((_, f_try)) => f_try.norm() < res || lam < 1.0 / 64.0,
                Err(_) => false,
            };
            if accept {
                let (p_try, f_try) = attempt?;
                v = v_try;
                path = p_try;
                res = f_try.norm();
                f = f_try;
                break;
            }
            if lam < 1.0 / 64.0 {
                attempt?;
            }
            lam *= 0.5;
        }
    }
    if res <= cfg.tol {
        return Ok(Shot {
            path,
            iterations: cfg.max_iter,
            residual: res,
            condition,
        });
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual: res,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectingGeodesic {
    pub path: GeodesicPath,
    pub x: Vector,
    pub y: Vector,
    /// `1/2 int_0^1 (gamma', gamma')_g`.
    pub energy: f64,
    pub causal: CausalClass,
    pub iterations: usize,
    pub residual: f64,
}

impl ConnectingGeodesic {
    /// `1/2 (gamma', gamma')_g` at the given sample.
    pub fn energy_density(&self, g: &MetricField, index: usize) -> f64 {
        let s = &self.path.samples[index];
        0.5 * bilinear(&g.eval(&s.x), &s.v, &s.v)
    }
}

/// Energy `1/2 int (gamma', gamma')_g` of a sampled path.
pub fn energy(g: &MetricField, path: &GeodesicPath) -> f64 {
    let nodes: Vec<f64> = path.samples.iter().map(|s| s.sigma).collect();
    let vals: Vec<f64> = path
        .samples
        .iter()
        .map(|s| 0.5 * bilinear(&g.eval(&s.x), &s.v, &s.v))
        .collect();
    simpson(&nodes, &vals)
}

pub fn connecting_geodesic(
    g: &MetricField,
    x: &Vector,
    y: &Vector,
    seed: Option<&Vector>,
    cfg: &ShootingConfig,
) -> Result<ConnectingGeodesic> {
    if (x - y).norm() == 0.0 {
        return Err(Error::Precondition("connector endpoints coincide".into()));
    }
    for p in [x, y] {
        if !g.in_domain(p) {
            return Err(Error::ChartDomain {
                point: p.as_slice().to_vec(),
            });
        }
    }
    let shot = shoot(&GeodesicFlow::new(g), x, y, seed, cfg)?;
    let first = shot.path.first();
    let causal = causal_classify(g, &first.x, &first.v, CAUSAL_TOL)?;
    Ok(ConnectingGeodesic {
        energy: energy(g, &shot.path),
        x: x.clone(),
        y: y.clone(),
        causal,
        iterations: shot.iterations,
        residual: shot.residual,
        path: shot.path,
    })
}

/// `r(x, y)`: the energy of the connector on `[0, 1]`.
pub fn defining_r(g: &MetricField, x: &Vector, y: &Vector, seed: Option<&Vector>, cfg: &ShootingConfig) -> Result<f64> {
    connecting_geodesic(g, x, y, seed, cfg).map(|c| c.energy)
}

pub fn sigma_detect(g: &MetricField, x: &Vector, y: &Vector, tol: f64, cfg: &ShootingConfig) -> Result<bool> {
    Ok(defining_r(g, x, y, None, cfg)?.abs() <= tol)
}

/// A root of `f` in `[a, b]` by the Illinois variant of false position.
pub fn illinois(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Precondition("root is not bracketed".into()));
    }
    let mut side = 0;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a).abs() <= tol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: fa.abs().min(fb.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MichelConfig {
    pub shooting: ShootingConfig,
    pub scatter: ScatterConfig,
    pub fd_step: f64,
    pub sigma_tol: f64,
}

impl Default for MichelConfig {
    fn default() -> Self {
        Self {
            shooting: ShootingConfig::default(),
            scatter: ScatterConfig::default(),
            fd_step: 1e-5,
            sigma_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MichelResidual {
    /// `|arrival point - y|`.
    pub position: f64,
    /// `|a eta - d'_y r|` where `eta` is the lowered arrival projection and
    /// `a` the positive scale matching their time components.
    pub covector: f64,
    pub scale: f64,
    pub r: f64,
}

impl MichelResidual {
    pub fn max(&self) -> f64 {
        self.position.max(self.covector)
    }
}

fn surface_gradient(
    chart: &crate::geometry::SurfaceChart,
    at: &Vector,
    step: f64,
    mut r: impl FnMut(&Vector) -> Result<f64>,
) -> Result<Vector> {
    let u0 = chart.coords(at);
    let mut out = Vector::zeros(u0.len());
    for a in 0..u0.len() {
        let mut up = u0.clone();
        up[a] += step;
        let mut dn = u0.clone();
        dn[a] -= step;
        out[a] = (r(&chart.embed(&up))? - r(&chart.embed(&dn))?) / (2.0 * step);
    }
    Ok(out)
}

/// Checks that `(-grad'_x r, grad'_y r)` is a reduced representation of the
/// scattering relation at a lightlike pair.
pub fn michel_check(
    g: &MetricField,
    u: &BoundaryHypersurface,
    v: &BoundaryHypersurface,
    x: &Vector,
    y: &Vector,
    cfg: &MichelConfig,
) -> Result<MichelResidual> {
    let (cu, cv) = match (u.chart(), v.chart()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Precondition("surfaces need charts".into())),
    };
    let base = connecting_geodesic(g, x, y, None, &cfg.shooting)?;
    if base.energy.abs() > cfg.sigma_tol {
        return Err(Error::NotOnSigma { r: base.energy });
    }
    let seed = base.path.first().v.clone();
    let dx = surface_gradient(cu, x, cfg.fd_step, |p| defining_r(g, p, y, Some(&seed), &cfg.shooting))?;
    let dy = surface_gradient(cv, y, cfg.fd_step, |p| defining_r(g, x, p, Some(&seed), &cfg.shooting))?;
    let tx = cu.tangents(&cu.coords(x));
    let gx = g.eval(x);
    let induced = tx.transpose() * &gx * &tx;
    let xi = induced
        .lu()
        .solve(&dx)
        .ok_or_else(|| Error::DegenerateBoundary("induced metric is singular".into()))?;
    let v_proj = -(&tx * xi);
    lightlike_completion(g, u, x, &v_proj, -1.0)?;
    let rec = scatter(g, u, v, x, &v_proj, &cfg.scatter)?;
    let ty = cv.tangents(&cv.coords(&rec.y));
    let eta = ty.transpose() * (g.eval(&rec.y) * &rec.w_proj);
    let scale = dy[0] / eta[0];
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Normalization { value: scale });
    }
    Ok(MichelResidual {
        position: (&rec.y - y).norm(),
        covector: (eta * scale - dy).norm(),
        scale,
        r: base.energy,
    })
}

/// A one-parameter family `g_tau` with its derivative at `tau = 0`.
#[derive(Clone)]
pub struct MetricFamily {
    eval: Arc<dyn Fn(f64) -> MetricField + Send + Sync>,
    derivative: SymTwoTensorField,
}

impl std::fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricFamily").finish_non_exhaustive()
    }
}

impl MetricFamily {
    pub fn new(eval: impl Fn(f64) -> MetricField + Send + Sync + 'static, derivative: SymTwoTensorField) -> Self {
        Self {
            eval: Arc::new(eval),
            derivative,
        }
    }

    /// Derivative by central differences in `tau`.
    pub fn with_fd_derivative(
        eval: impl Fn(f64) -> MetricField + Send + Sync + 'static,
        dim: usize,
        step: f64,
    ) -> Self {
        let eval: Arc<dyn Fn(f64) -> MetricField + Send + Sync> = Arc::new(eval);
        let (plus, minus) = (eval(step), eval(-step));
        let derivative = SymTwoTensorField::new(dim, move |x| (plus.eval(x) - minus.eval(x)) / (2.0 * step));
        Self { eval, derivative }
    }

    /// `g + tau f`.
    pub fn linear(g: &MetricField, f: &SymTwoTensorField) -> Self {
        let (g, f2) = (g.clone(), f.clone());
        Self::new(move |tau| g.perturbed(&f2, tau), f.clone())
    }

    pub fn eval(&self, tau: f64) -> MetricField {
        (self.eval)(tau)
    }

    pub fn derivative(&self) -> &SymTwoTensorField {
        &self.derivative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationReport {
    pub fd_value: f64,
    pub lrt_value: f64,
    pub kappa: f64,
    pub rel_error: f64,
    pub base_r: f64,
}

impl LinearizationReport {
    pub fn abs_error(&self) -> f64 {
        (self.fd_value - self.kappa * self.lrt_value).abs()
    }
}

/// Central difference of `tau -> r_tau(x, y)` against `1/2 L f` on the
/// base connector.
pub fn linearize_r(
    family: &MetricFamily,
    x: &Vector,
    y: &Vector,
    fd_step: f64,
    sigma_tol: f64,
    cfg: &ShootingConfig,
) -> Result<LinearizationReport> {
    let g0 = family.eval(0.0);
    let base = connecting_geodesic(&g0, x, y, None, cfg)?;
    if base.energy.abs() > sigma_tol {
        return Err(Error::NotOnSigma { r: base.energy });
    }
    let seed = base.path.first().v.clone();
    let rp = defining_r(&family.eval(fd_step), x, y, Some(&seed), cfg)?;
    let rm = defining_r(&family.eval(-fd_step), x, y, Some(&seed), cfg)?;
    let fd_value = (rp - rm) / (2.0 * fd_step);
    let lrt_value = light_ray_transform(&family.derivative, &base.path)?;
    let kappa = 0.5;
    let floor = 1e-12;
    Ok(LinearizationReport {
        fd_value,
        lrt_value,
        kappa,
        rel_error: (fd_value - kappa * lrt_value).abs() / (kappa * lrt_value).abs().max(floor),
        base_r: base.energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CausalTag;
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    #[test]
    fn minkowski_lightlike_connector() {
        let g = models::minkowski(3);
        let c = connecting_geodesic(
            &g,
            &v(&[0.0, -1.0, 0.0]),
            &v(&[2.0, 1.0, 0.0]),
            None,
            &ShootingConfig::default(),
        )
        .unwrap();
        assert!(c.energy.abs() < 1e-12);
        assert_eq!(c.causal.tag, CausalTag::Lightlike);
        assert!((&c.path.last().x - &c.y).norm() < 1e-10);
    }

    #[test]
    fn product_disk_energy_trichotomy() {
        let g = models::product(models::euclidean(2));
        let cfg = ShootingConfig::default();
        let x = v(&[0.0, -0.5, 0.0]);
        for (s, expect, tag) in [
            (2.0, -1.5, CausalTag::Timelike),
            (1.0, 0.0, CausalTag::Lightlike),
            (0.5, 0.375, CausalTag::Spacelike),
        ] {
            let c = connecting_geodesic(&g, &x, &v(&[s, 0.5, 0.0]), None, &cfg).unwrap();
            assert!((c.energy - expect).abs() < 1e-10, "{} {}", c.energy, expect);
            assert_eq!(c.causal.tag, tag);
            let on = sigma_detect(&g, &x, &v(&[s, 0.5, 0.0]), 1e-8, &cfg).unwrap();
            assert_eq!(on, tag == CausalTag::Lightlike);
        }
    }

    #[test]
    fn perturbed_product_step_halving() {
        let g = models::perturbed_product(0.1);
        let x = v(&[0.0, -0.6, 0.1]);
        let y = v(&[1.3, 0.6, -0.2]);
        let coarse = ShootingConfig::default();
        let fine = ShootingConfig {
            integration: IntegrationConfig::with_step(5e-4),
            ..coarse
        };
        let a = connecting_geodesic(&g, &x, &y, None, &coarse).unwrap();
        let b = connecting_geodesic(&g, &x, &y, None, &fine).unwrap();
        assert!((&a.path.last().x - &y).norm() <= 1e-10);
        assert!((a.energy - b.energy).abs() < 1e-8);
        let e0 = a.energy_density(&g, 0);
        let e_mid = a.energy_density(&g, a.path.len() / 2);
        let e1 = a.energy_density(&g, a.path.len() - 1);
        assert!((e0 - e_mid).abs() < 1e-8 && (e0 - e1).abs() < 1e-8);
    }

    #[test]
    fn illinois_finds_sigma_crossing() {
        let g = models::product(models::euclidean(2));
        let cfg = ShootingConfig::default();
        let x = v(&[0.0, -0.5, 0.0]);
        let s = illinois(
            |s| defining_r(&g, &x, &v(&[s, 0.5, 0.0]), None, &cfg),
            0.3,
            2.0,
            1e-12,
            100,
        )
        .unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_disk_michel() {
        let g = models::product(models::euclidean(2));
        let c = BoundaryHypersurface::cylinder(1.0);
        let (a, b): (f64, f64) = (2.8, 0.3);
        let xs = v(&[a.cos(), a.sin()]);
        let ys = v(&[b.cos(), b.sin()]);
        let rho = (&ys - &xs).norm();
        let x = v(&[0.0, xs[0], xs[1]]);
        let y = v(&[rho, ys[0], ys[1]]);
        let r = michel_check(&g, &c, &c, &x, &y, &MichelConfig::default()).unwrap();
        assert!(r.max() < 1e-6, "{r:?}");
        assert!((r.scale - 1.0).abs() < 1e-5);
    }

    #[test]
    fn scaled_metric_family_matches_half_lrt() {
        let g = models::product(models::euclidean(2));
        let f = SymTwoTensorField::new(3, |_| {
            let mut m = Matrix::identity(3, 3);
            m[(0, 0)] = 0.0;
            m
        });
        let fam = MetricFamily::linear(&g, &f);
        let rep = linearize_r(
            &fam,
            &v(&[0.0, -0.5, 0.0]),
            &v(&[1.0, 0.5, 0.0]),
            1e-4,
            1e-8,
            &ShootingConfig::default(),
        )
        .unwrap();
        assert!((rep.lrt_value - 1.0).abs() < 1e-9);
        assert!((rep.fd_value - 0.5).abs() < 1e-7);
    }
}
