//! Stationary metrics `lambda (-(dt + omega)^2 + h)` on `R x N` and their
//! reduction to magnetic systems `(N, h, omega)`.

use crate::connect::{shoot, ShootingConfig};
use crate::fields::{bilinear, CovectorField, Matrix, ScalarField, SymTwoTensorField, Vector};
use crate::geometry::BoundaryHypersurface;
use crate::geometry::{
    boundary_normal, boundary_project, geodesic_acceleration, integrate_flow, Flow, GeodesicPath, IntegrationConfig,
    MetricField, PathSample, Signature, Stop,
};
use crate::lightray::ray_integral;
use crate::quadrature::{cumulative_hermite, integrate_gl, simpson};
use crate::scattering::{scatter, time_component, ScatterConfig};
use crate::{Error, Result};

pub use crate::gauge::GaugePair;

/// Spatial part `x` of a spacetime point `(t, x)`.
pub fn spatial(x: &Vector) -> Vector {
    x.rows(1, x.len() - 1).into_owned()
}

/// The spacetime point `(t, x)`.
pub fn spacetime(t: f64, xs: &Vector) -> Vector {
    let mut out = Vector::zeros(xs.len() + 1);
    out[0] = t;
    out.rows_mut(1, xs.len()).copy_from(xs);
    out
}

/// `g = lambda (-(dt + omega_j dx^j)^2 + h_ij dx^i dx^j)`.
#[derive(Clone, Debug)]
pub struct StationaryMetric {
    lambda: ScalarField,
    omega: CovectorField,
    base: MetricField,
}

impl StationaryMetric {
    pub fn new(lambda: ScalarField, omega: CovectorField, base: MetricField) -> Self {
        Self { lambda, omega, base }
    }

    pub fn lambda(&self) -> &ScalarField {
        &self.lambda
    }

    pub fn omega(&self) -> &CovectorField {
        &self.omega
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn magnetic(&self) -> MagneticSystem {
        MagneticSystem::new(self.base.clone(), self.omega.clone())
    }

    /// Checks `lambda > 0` and `h` positive definite at a base point.
    pub fn validate_at(&self, xs: &Vector) -> Result<()> {
        let l = self.lambda.eval(xs);
        if !(l > 0.0) {
            return Err(Error::Precondition(format!("lambda = {l} is not positive")));
        }
        match self.base.checked(xs) {
            Err(Error::SignatureMismatch { point, .. }) => Err(Error::NotPositiveDefinite { point }),
            other => other.map(|_| ()),
        }
    }

    /// The block matrix of `g` at a base point.
    pub fn matrix_at(&self, xs: &Vector) -> Matrix {
        let n = self.base_dim();
        let l = self.lambda.eval(xs);
        let w = self.omega.eval(xs);
        let h = self.base.eval(xs);
        let mut g = Matrix::zeros(n + 1, n + 1);
        g[(0, 0)] = -l;
        for j in 0..n {
            g[(0, j + 1)] = -l * w[j];
            g[(j + 1, 0)] = -l * w[j];
            for i in 0..n {
                g[(i + 1, j + 1)] = l * (h[(i, j)] - w[i] * w[j]);
            }
        }
        g
    }

    /// The Lorentzian metric on `R x N`, with analytic derivatives when
    /// `lambda`, `omega` and `h` all carry them.
    pub fn assembled(&self) -> MetricField {
        let n = self.base_dim();
        let me = self.clone();
        let domain_base = self.base.clone();
        let out = MetricField::new(n + 1, Signature::Lorentzian, move |x| me.matrix_at(&spatial(x)))
            .with_domain(move |x| domain_base.in_domain(&spatial(x)));
        if !(self.lambda.has_gradient() && self.omega.has_jacobian() && self.base.has_analytic_deriv()) {
            return out;
        }
        let me = self.clone();
        out.with_deriv(move |x| {
            let xs = spatial(x);
            let l = me.lambda.eval(&xs);
            let dl = me.lambda.gradient(&xs);
            let w = me.omega.eval(&xs);
            let jw = me.omega.jacobian(&xs);
            let h = me.base.eval(&xs);
            let dh = me.base.deriv(&xs);
            let mut out = vec![Matrix::zeros(n + 1, n + 1)];
            for k in 0..n {
                let mut m = Matrix::zeros(n + 1, n + 1);
                m[(0, 0)] = -dl[k];
                for j in 0..n {
                    let v = -(dl[k] * w[j] + l * jw[(j, k)]);
                    m[(0, j + 1)] = v;
                    m[(j + 1, 0)] = v;
                    for i in 0..n {
                        m[(i + 1, j + 1)] = dl[k] * (h[(i, j)] - w[i] * w[j])
                            + l * (dh[k][(i, j)] - jw[(i, k)] * w[j] - w[i] * jw[(j, k)]);
                    }
                }
                out.push(m);
            }
            out
        })
    }
}

/// The metric written as `-lambda dt^2 + 2 omega~_j dt dx^j + h~_ij dx^i dx^j`.
pub fn raw_metric(lambda: &ScalarField, omega_raw: &CovectorField, h_raw: &MetricField) -> MetricField {
    let n = h_raw.dim();
    let (l, w, h) = (lambda.clone(), omega_raw.clone(), h_raw.clone());
    MetricField::new(n + 1, Signature::Lorentzian, move |x| {
        let xs = spatial(x);
        let lv = l.eval(&xs);
        let wv = w.eval(&xs);
        let mut g = Matrix::zeros(n + 1, n + 1);
        g[(0, 0)] = -lv;
        for j in 0..n {
            g[(0, j + 1)] = wv[j];
            g[(j + 1, 0)] = wv[j];
        }
        g.view_mut((1, 1), (n, n)).copy_from(&h.eval(&xs));
        g
    })
}

/// Completes the square: `h = h~ / lambda + omega~ omega~ / lambda^2`,
/// `omega = -omega~ / lambda`. Positivity is checked at `samples`.
pub fn from_raw(
    lambda: &ScalarField,
    omega_raw: &CovectorField,
    h_raw: &MetricField,
    samples: &[Vector],
) -> Result<StationaryMetric> {
    let n = h_raw.dim();
    let (l, w, ht) = (lambda.clone(), omega_raw.clone(), h_raw.clone());
    let h = MetricField::new(n, Signature::Riemannian, move |x| {
        let lv = l.eval(x);
        let wv = w.eval(x);
        ht.eval(x) / lv + (&wv * wv.transpose()) / (lv * lv)
    });
    let (l, w) = (lambda.clone(), omega_raw.clone());
    let omega = CovectorField::new(n, move |x| w.eval(x) / -l.eval(x));
    let m = StationaryMetric::new(lambda.clone(), omega, h);
    for x in samples {
        m.validate_at(x)?;
    }
    Ok(m)
}

/// The same `omega` and `h` with `lambda = 1`.
pub fn conformal_normalize(m: &StationaryMetric) -> StationaryMetric {
    StationaryMetric::new(
        ScalarField::constant(1.0, m.base_dim()),
        m.omega.clone(),
        m.base.clone(),
    )
}

/// `(N, h, omega)` with Lorentz force `Y` given by `<Y u, v>_h = d omega(u, v)`.
#[derive(Clone, Debug)]
pub struct MagneticSystem {
    base: MetricField,
    omega: CovectorField,
}

impl MagneticSystem {
    pub fn new(base: MetricField, omega: CovectorField) -> Self {
        Self { base, omega }
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn omega(&self) -> &CovectorField {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `Omega_ij = d_i omega_j - d_j omega_i`.
    pub fn two_form(&self, x: &Vector) -> Matrix {
        self.omega.exterior_derivative(x)
    }

    /// Deviation of the two-form from a purely finite-difference `d omega`.
    pub fn two_form_fd_residual(&self, x: &Vector) -> f64 {
        let w = self.omega.clone();
        let fd = CovectorField::new(self.dim(), move |y| w.eval(y));
        (self.two_form(x) - fd.exterior_derivative(x)).abs().max()
    }

    /// Matrix of `Y` at `x`, from the Gram system `h Y = Omega^T`.
    pub fn lorentz_matrix(&self, x: &Vector) -> Result<Matrix> {
        let h = self.base.eval(x);
        let rhs = self.two_form(x).transpose();
        h.lu().solve(&rhs).ok_or_else(|| Error::SingularMetric {
            point: x.as_slice().to_vec(),
            det: self.base.eval(x).determinant(),
        })
    }

    /// Cotangent lift `u -> -Y^T u` of the Lorentz force.
    pub fn lorentz_covector(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        Ok(-(self.lorentz_matrix(x)?.transpose() * u))
    }

    /// `|(Y u, w)_h + (u, Y w)_h|`.
    pub fn antisymmetry_residual(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<f64> {
        let y = self.lorentz_matrix(x)?;
        let h = self.base.eval(x);
        Ok((bilinear(&h, &(&y * u), w) + bilinear(&h, u, &(&y * w))).abs())
    }
}

/// `Y u` at `x`.
pub fn lorentz_force(mag: &MagneticSystem, x: &Vector, u: &Vector) -> Result<Vector> {
    Ok(mag.lorentz_matrix(x)? * u)
}

/// How the Lorentz force is weighted in the magnetic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Charge {
    /// `D x' = k Y x'`.
    Fixed(f64),
    /// `D x' = |x'|_h Y x'`: unit-speed magnetic geodesics at any constant speed.
    Homogeneous,
}

pub struct MagneticFlow<'a> {
    pub system: &'a MagneticSystem,
    pub charge: Charge,
}

impl<'a> MagneticFlow<'a> {
    pub fn new(system: &'a MagneticSystem, charge: Charge) -> Self {
        Self { system, charge }
    }
}

impl Flow for MagneticFlow<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn acceleration(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        let geo = geodesic_acceleration(&self.system.base, x, v)?;
        let k = match self.charge {
            Charge::Fixed(k) => k,
            Charge::Homogeneous => bilinear(&self.system.base.eval(x), v, v).sqrt(),
        };
        if k == 0.0 {
            return Ok(geo);
        }
        Ok(geo + lorentz_force(self.system, x, v)? * k)
    }

    fn invariant(&self, x: &Vector, v: &Vector) -> f64 {
        bilinear(&self.system.base.eval(x), v, v)
    }

    fn in_domain(&self, x: &Vector) -> bool {
        self.system.base.in_domain(x)
    }
}

/// Unit-speed magnetic geodesic (`k = 1`) from `(x0, u0)`.
pub fn magnetic_integrate(
    mag: &MagneticSystem,
    x0: &Vector,
    u0: &Vector,
    stop: Stop<'_>,
    cfg: &IntegrationConfig,
) -> Result<GeodesicPath> {
    let speed = bilinear(&mag.base.eval(x0), u0, u0).sqrt();
    if (speed - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "magnetic entry speed is {speed}, expected 1"
        )));
    }
    integrate_flow(&MagneticFlow::new(mag, Charge::Fixed(1.0)), x0, u0, stop, cfg)
}

/// Diagnostics of the reduction of a geodesic of `R x N` to the base.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResiduals {
    /// `k = t' + <omega, x'>` at the first sample.
    pub k: f64,
    pub k_drift: f64,
    /// `m = |x'|_h` at the first sample.
    pub m: f64,
    pub m_drift: f64,
    /// `max |D x' - k Y x'|_h`.
    pub ode_residual: f64,
    /// `max |(gamma', gamma')_g - (-k^2 + m^2)|`.
    pub speed_identity: f64,
}

/// Projects a geodesic of the assembled metric (with `lambda = 1`) to `N`
/// and measures how well it solves the magnetic system.
pub fn project_and_verify(m: &StationaryMetric, path: &GeodesicPath) -> Result<ReductionResiduals> {
    let g = m.assembled();
    let mag = m.magnetic();
    let base = &m.base;
    let mut k0 = None;
    let mut m0 = None;
    let mut out = ReductionResiduals {
        k: 0.0,
        k_drift: 0.0,
        m: 0.0,
        m_drift: 0.0,
        ode_residual: 0.0,
        speed_identity: 0.0,
    };
    for s in &path.samples {
        let xs = spatial(&s.x);
        let lam = m.lambda.eval(&xs);
        if (lam - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("reduction needs lambda = 1, found {lam}")));
        }
        let vs = spatial(&s.v);
        let k = s.v[0] + m.omega.eval(&xs).dot(&vs);
        let hx = base.eval(&xs);
        let speed = bilinear(&hx, &vs, &vs).sqrt();
        let k_ref = *k0.get_or_insert(k);
        let m_ref = *m0.get_or_insert(speed);
        out.k_drift = out.k_drift.max((k - k_ref).abs());
        out.m_drift = out.m_drift.max((speed - m_ref).abs());
        let accel = spatial(&geodesic_acceleration(&g, &s.x, &s.v)?);
        let cov = accel - geodesic_acceleration(base, &xs, &vs)?;
        let r = cov - lorentz_force(&mag, &xs, &vs)? * k;
        out.ode_residual = out.ode_residual.max(bilinear(&hx, &r, &r).sqrt());
        let q = bilinear(&g.eval(&s.x), &s.v, &s.v);
        out.speed_identity = out.speed_identity.max((q - (-k * k + speed * speed)).abs());
    }
    out.k = k0.unwrap_or(0.0);
    out.m = m0.unwrap_or(0.0);
    Ok(out)
}

/// Lifts a unit-speed magnetic geodesic to the lightlike curve
/// `(t(sigma), x(sigma))` with `t' = 1 - <omega, x'>`.
pub fn lift_magnetic(m: &StationaryMetric, base_path: &GeodesicPath, t0: f64) -> Result<GeodesicPath> {
    if (base_path.speed_squared - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "base path speed squared is {}, expected 1",
            base_path.speed_squared
        )));
    }
    let mag = m.magnetic();
    let flow = MagneticFlow::new(&mag, Charge::Fixed(1.0));
    let mut nodes = Vec::with_capacity(base_path.len());
    let mut rate = Vec::with_capacity(base_path.len());
    let mut slope = Vec::with_capacity(base_path.len());
    for s in &base_path.samples {
        let w = m.omega.eval(&s.x);
        let jw = m.omega.jacobian(&s.x);
        let acc = flow.acceleration(&s.x, &s.v)?;
        nodes.push(s.sigma);
        rate.push(1.0 - w.dot(&s.v));
        slope.push(-(&jw * &s.v).dot(&s.v) - w.dot(&acc));
    }
    let t = cumulative_hermite(&nodes, &rate, &slope);
    let samples: Vec<PathSample> = base_path
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| PathSample {
            sigma: s.sigma,
            x: spacetime(t0 + t[i], &s.x),
            v: spacetime(rate[i], &s.v),
        })
        .collect();
    let g = m.assembled();
    let first = &samples[0];
    let speed_squared = bilinear(&g.eval(&first.x), &first.v, &first.v);
    Ok(GeodesicPath { samples, speed_squared })
}

/// Unit completion `u' + a nu` of a tangential base vector, `|u|_h = 1`.
pub fn unit_completion(
    h: &MetricField,
    boundary: &BoundaryHypersurface,
    x: &Vector,
    u_proj: &Vector,
    orientation: f64,
) -> Result<Vector> {
    let db = boundary.gradient(x);
    let normal_component = db.dot(u_proj);
    if normal_component.abs() > 1e-8 * db.norm() * u_proj.norm().max(1e-300) {
        return Err(Error::NotTangent { normal_component });
    }
    let nu = boundary_normal(boundary, h, x)?;
    let q = bilinear(&h.eval(x), u_proj, u_proj);
    let a2 = 1.0 - q;
    if a2 <= 0.0 {
        return Err(Error::NoLift { quadratic: q });
    }
    Ok(u_proj + nu * (orientation.signum() * a2.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticRecord {
    pub x: Vector,
    pub u_proj: Vector,
    pub y: Vector,
    pub w_proj: Vector,
    pub length: f64,
    /// `int omega` along the magnetic geodesic.
    pub flux: f64,
    /// `length - flux`.
    pub action: f64,
}

/// `int_gamma omega` over the samples of a base path.
pub fn flux(omega: &CovectorField, path: &GeodesicPath) -> f64 {
    let nodes: Vec<f64> = path.samples.iter().map(|s| s.sigma).collect();
    let vals: Vec<f64> = path.samples.iter().map(|s| omega.eval(&s.x).dot(&s.v)).collect();
    simpson(&nodes, &vals)
}

/// Magnetic scattering with unit speed from `x` on the boundary of `N`.
pub fn magnetic_scatter(
    mag: &MagneticSystem,
    boundary: &BoundaryHypersurface,
    x: &Vector,
    u_proj: &Vector,
    cfg: &ScatterConfig,
) -> Result<(MagneticRecord, GeodesicPath)> {
    let u = unit_completion(&mag.base, boundary, x, u_proj, -1.0)?;
    let path = magnetic_integrate(
        mag,
        x,
        &u,
        Stop::Surface {
            surface: boundary,
            sigma_max: cfg.sigma_max,
        },
        &cfg.integration,
    )?;
    let end = path.last();
    crate::geometry::check_transversal(&mag.base, boundary, &end.x, &end.v)?;
    let w_proj = boundary_project(&mag.base, boundary, &end.x, &end.v)?;
    let length = end.sigma;
    let fl = flux(&mag.omega, &path);
    let rec = MagneticRecord {
        x: x.clone(),
        u_proj: u_proj.clone(),
        y: end.x.clone(),
        w_proj,
        length,
        flux: fl,
        action: length - fl,
    };
    Ok((rec, path))
}

/// A magnetic geodesic joining two base points, traversed on `[0, 1]` at
/// constant speed `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticConnector {
    pub path: GeodesicPath,
    pub length: f64,
    pub flux: f64,
    pub action: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl MagneticConnector {
    /// The same curve at unit speed on `[0, length]`.
    pub fn unit_speed_path(&self) -> GeodesicPath {
        self.path.reparametrized(1.0 / self.length)
    }
}

pub fn magnetic_connector(
    mag: &MagneticSystem,
    x: &Vector,
    y: &Vector,
    seed: Option<&Vector>,
    cfg: &ShootingConfig,
) -> Result<MagneticConnector> {
    if (x - y).norm() == 0.0 {
        return Err(Error::Precondition("connector endpoints coincide".into()));
    }
    let flow = MagneticFlow::new(mag, Charge::Homogeneous);
    let shot = shoot(&flow, x, y, seed, cfg)?;
    let length = shot.path.speed_squared.sqrt();
    let fl = flux(&mag.omega, &shot.path);
    Ok(MagneticConnector {
        length,
        flux: fl,
        action: length - fl,
        iterations: shot.iterations,
        residual: shot.residual,
        path: shot.path,
    })
}

/// The boundary action `A(x, y) = length - int omega` of the magnetic connector.
pub fn action_a(mag: &MagneticSystem, x: &Vector, y: &Vector, cfg: &ShootingConfig) -> Result<f64> {
    magnetic_connector(mag, x, y, None, cfg).map(|c| c.action)
}

/// Residuals of the reduction of the Lorentzian scattering relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThmMagResidual {
    /// `|pi(y) - y_mag|`.
    pub exit_point: f64,
    /// `|w'_x - w'_mag|`.
    pub exit_direction: f64,
    /// `|l_mag - (s - t + int omega)|`.
    pub length: f64,
    /// `|A(x, y) - (s - t)|`.
    pub action: f64,
    /// `|w'_t - 1|`.
    pub exit_time_component: f64,
    /// Lorentzian exit rebuilt from the magnetic record and `A`, compared
    /// with the direct one.
    pub round_trip: f64,
    pub travel_time: f64,
}

impl ThmMagResidual {
    pub fn max(&self) -> f64 {
        [
            self.exit_point,
            self.exit_direction,
            self.length,
            self.action,
            self.exit_time_component,
            self.round_trip,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Compares Lorentzian scattering on the cylinder over `boundary` with the
/// magnetic scattering and boundary action on the base.
pub fn thmmag_verify(
    m: &StationaryMetric,
    cylinder: &BoundaryHypersurface,
    boundary: &BoundaryHypersurface,
    x: &Vector,
    v_proj: &Vector,
    scfg: &ScatterConfig,
    ccfg: &ShootingConfig,
) -> Result<ThmMagResidual> {
    let g = m.assembled();
    let xs = spatial(x);
    if (m.lambda.eval(&xs) - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("reduction needs lambda = 1".into()));
    }
    let vt = time_component(&g, x, v_proj);
    if (vt - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "entry must be normalized to v'_t = 1, found {vt}"
        )));
    }
    let rec = scatter(&g, cylinder, cylinder, x, v_proj, scfg)?;
    let mag = m.magnetic();
    let (mrec, _) = magnetic_scatter(&mag, boundary, &xs, &spatial(v_proj), scfg)?;
    let ys = spatial(&rec.y);
    let travel_time = rec.y[0] - x[0];
    let a = magnetic_connector(&mag, &xs, &mrec.y, None, ccfg)?.action;
    let wt = time_component(&g, &rec.y, &rec.w_proj);
    let rebuilt_y = spacetime(x[0] + a, &mrec.y);
    let rebuilt_w = spacetime(1.0 - m.omega.eval(&mrec.y).dot(&mrec.w_proj), &mrec.w_proj);
    Ok(ThmMagResidual {
        exit_point: (&ys - &mrec.y).norm(),
        exit_direction: (spatial(&rec.w_proj) - &mrec.w_proj).norm(),
        length: (mrec.length - (travel_time + mrec.flux)).abs(),
        action: (a - travel_time).abs(),
        exit_time_component: (wt - 1.0).abs(),
        round_trip: (rebuilt_y - &rec.y).norm().max((rebuilt_w - &rec.w_proj).norm()),
        travel_time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticMichelResidual {
    pub entry: f64,
    pub exit: f64,
    pub action: f64,
}

/// Checks `u'(x) = -d'_x A + omega'(x)` and `u'(y) = d'_y A + omega'(y)` with
/// tangential gradients of `A` by central differences in the boundary chart.
pub fn magnetic_michel(
    mag: &MagneticSystem,
    boundary: &BoundaryHypersurface,
    x: &Vector,
    y: &Vector,
    fd_step: f64,
    cfg: &ShootingConfig,
) -> Result<MagneticMichelResidual> {
    let chart = boundary
        .chart()
        .ok_or_else(|| Error::Precondition("boundary needs a chart".into()))?;
    let base = magnetic_connector(mag, x, y, None, cfg)?;
    let seed = base.path.first().v.clone();
    let p = chart.param_dim();
    let grad = |at_x: bool| -> Result<Vector> {
        let point = if at_x { x } else { y };
        let u0 = chart.coords(point);
        let mut out = Vector::zeros(p);
        for a in 0..p {
            let mut vals = [0.0; 2];
            for (i, sgn) in [1.0, -1.0].into_iter().enumerate() {
                let mut u = u0.clone();
                u[a] += sgn * fd_step;
                let moved = chart.embed(&u);
                let c = if at_x {
                    magnetic_connector(mag, &moved, y, Some(&seed), cfg)?
                } else {
                    magnetic_connector(mag, x, &moved, Some(&seed), cfg)?
                };
                vals[i] = c.action;
            }
            out[a] = (vals[0] - vals[1]) / (2.0 * fd_step);
        }
        Ok(out)
    };
    let dx = grad(true)?;
    let dy = grad(false)?;
    let tangential = |point: &Vector, vel: &Vector| -> (Vector, Vector) {
        let t = chart.tangents(&chart.coords(point));
        let h = mag.base.eval(point);
        let u = vel / base.length;
        let lowered = t.transpose() * (&h * u);
        let om = t.transpose() * mag.omega.eval(point);
        (lowered, om)
    };
    let (ux, ox) = tangential(x, &base.path.first().v);
    let (uy, oy) = tangential(y, &base.path.last().v);
    Ok(MagneticMichelResidual {
        entry: (ux - (-dx + ox)).norm(),
        exit: (uy - (dy + oy)).norm(),
        action: base.action,
    })
}

/// `delta g` on `R x N` produced by perturbing `h` by `dh` and `omega` by `dw`.
pub fn perturbation_tensor(m: &StationaryMetric, dh: &SymTwoTensorField, dw: &CovectorField) -> SymTwoTensorField {
    let n = m.base_dim();
    let (me, dh, dw) = (m.clone(), dh.clone(), dw.clone());
    SymTwoTensorField::new(n + 1, move |x| {
        let xs = spatial(x);
        let l = me.lambda.eval(&xs);
        let w = me.omega.eval(&xs);
        let d = dw.eval(&xs);
        let hh = dh.eval(&xs);
        let mut f = Matrix::zeros(n + 1, n + 1);
        for j in 0..n {
            f[(0, j + 1)] = -l * d[j];
            f[(j + 1, 0)] = -l * d[j];
            for i in 0..n {
                f[(i + 1, j + 1)] = l * (hh[(i, j)] - w[i] * d[j] - w[j] * d[i]);
            }
        }
        f
    })
}

/// `I[f, beta] = int <f, x' x'> + int beta` over a unit-speed base path.
pub fn magnetic_transform(f: &SymTwoTensorField, beta: &CovectorField, path: &GeodesicPath) -> f64 {
    let nodes: Vec<f64> = path.samples.iter().map(|s| s.sigma).collect();
    let vals: Vec<f64> = path
        .samples
        .iter()
        .map(|s| f.pair(&s.x, &s.v, &s.v) + beta.eval(&s.x).dot(&s.v))
        .collect();
    simpson(&nodes, &vals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationEquivalence {
    /// `L f` on the lightlike connector over `[0, 1]`.
    pub lorentzian_value: f64,
    /// `I[dh / 2, -dw]` on the unit-speed base connector.
    pub magnetic_value: f64,
    pub length: f64,
    /// `lorentzian_value / magnetic_value`.
    pub ratio: f64,
    /// `|L f - 2 l I| / max(|2 l I|, floor)`.
    pub integrated_residual: f64,
    /// `max_sigma |<f, g' g'> - 2 l^2 (dh(u, u) / 2 - dw(u))| / max |<f, g' g'>|`.
    pub pointwise_residual: f64,
    /// `r` at the lifted pair.
    pub defining_r: f64,
}

/// Lifts the base pair `(x, y)` to the lightlike pair `((t0, x), (t0 + A, y))`
/// and compares the Lorentzian and magnetic linearizations.
pub fn linearization_equivalence(
    m: &StationaryMetric,
    dh: &SymTwoTensorField,
    dw: &CovectorField,
    x: &Vector,
    y: &Vector,
    t0: f64,
    cfg: &ShootingConfig,
) -> Result<LinearizationEquivalence> {
    let mag = m.magnetic();
    let g = m.assembled();
    let mc = magnetic_connector(&mag, x, y, None, cfg)?;
    let ell = mc.length;
    let v0 = mc.path.first().v.clone();
    let seed = spacetime(ell - m.omega.eval(x).dot(&v0), &v0);
    let xa = spacetime(t0, x);
    let ya = spacetime(t0 + mc.action, y);
    let conn = crate::connect::connecting_geodesic(&g, &xa, &ya, Some(&seed), cfg)?;
    let f = perturbation_tensor(m, dh, dw);
    let lorentzian_value = ray_integral(&f, &conn.path);
    let half = SymTwoTensorField::linear_combination(&[(0.5, dh.clone())]);
    let beta = dw.scaled(-1.0);
    let unit = mc.unit_speed_path();
    let magnetic_value = magnetic_transform(&half, &beta, &unit);
    let expected = 2.0 * ell * magnetic_value;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (ls, bs) in conn.path.samples.iter().zip(&mc.path.samples) {
        let lhs = f.pair(&ls.x, &ls.v, &ls.v);
        let u = &bs.v / ell;
        let rhs = 2.0 * ell * ell * (0.5 * dh.pair(&bs.x, &u, &u) - dw.eval(&bs.x).dot(&u));
        worst = worst.max((lhs - rhs).abs());
        scale = scale.max(lhs.abs());
    }
    Ok(LinearizationEquivalence {
        lorentzian_value,
        magnetic_value,
        length: ell,
        ratio: lorentzian_value / magnetic_value,
        integrated_residual: (lorentzian_value - expected).abs() / expected.abs().max(1e-12),
        pointwise_residual: worst / scale.max(1e-12),
        defining_r: conn.energy,
    })
}

/// A potential `phi` with `d_n phi = omega_n`, `phi = 0` on `{x^n = 0}`, and
/// the transformed form `omega - d phi`.
#[derive(Clone, Debug)]
pub struct NormalGauge {
    pub phi: ScalarField,
    pub omega: CovectorField,
    pub normal_axis: usize,
}

impl NormalGauge {
    /// The new time coordinate `t' = t + phi(x)` in which the metric has `omega - d phi`.
    pub fn time_coordinate(&self, x: &Vector) -> f64 {
        x[0] + self.phi.eval(&spatial(x))
    }

    pub fn normal_component(&self, xs: &Vector) -> f64 {
        self.omega.eval(xs)[self.normal_axis]
    }
}

/// For a base already in boundary normal coordinates (boundary at
/// `x^normal_axis = 0`), removes the normal component of `omega` by an exact form.
pub fn boundary_normal_coords(mag: &MagneticSystem, normal_axis: usize) -> NormalGauge {
    let omega = mag.omega.clone();
    let phi = ScalarField::new(move |x| {
        let xn = x[normal_axis];
        if xn == 0.0 {
            return 0.0;
        }
        let panels = ((xn.abs() / 0.1).ceil() as usize).max(1);
        let w = omega.clone();
        integrate_gl(
            move |s| {
                let mut p = x.clone();
                p[normal_axis] = s;
                w.eval(&p)[normal_axis]
            },
            0.0,
            xn,
            12,
            panels,
        )
    });
    let exact = CovectorField::exact(&phi, mag.dim());
    NormalGauge {
        omega: mag.omega.sum(&exact.scaled(-1.0)),
        phi,
        normal_axis,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{causal_classify, integrate_geodesic, CausalTag, CAUSAL_TOL};
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    #[test]
    fn assembled_matches_polarized_inner_product() {
        let m = StationaryMetric::new(
            models::gaussian(0.5, &[0.0, 0.0], 1.0).positive(),
            models::rotation_form(0.3),
            models::conformal_bump_metric(0.1),
        );
        let m = StationaryMetric::new(
            {
                let l = m.lambda.clone();
                ScalarField::new(move |x| 1.0 + l.eval(x))
            },
            m.omega.clone(),
            m.base.clone(),
        );
        let x = v(&[0.4, 0.2, -0.5]);
        let xs = spatial(&x);
        let g = m.assembled().eval(&x);
        let (a, b) = (v(&[0.7, -0.2, 0.9]), v(&[-1.1, 0.4, 0.3]));
        let w = m.omega.eval(&xs);
        let l = m.lambda.eval(&xs);
        let (ax, bx) = (spatial(&a), spatial(&b));
        let direct = l * (-(a[0] + w.dot(&ax)) * (b[0] + w.dot(&bx)) + bilinear(&m.base.eval(&xs), &ax, &bx));
        assert!((bilinear(&g, &a, &b) - direct).abs() < 1e-14);
    }

    #[test]
    fn from_raw_examples() {
        let w = models::constant_form(&[0.3, -0.2]);
        let one = ScalarField::constant(1.0, 2);
        let m = from_raw(&one, &w, &models::euclidean(2), &[Vector::zeros(2)]).unwrap();
        let x = v(&[0.1, 0.2]);
        assert!((m.omega.eval(&x) - v(&[-0.3, 0.2])).norm() < 1e-15);
        let expect = Matrix::identity(2, 2) + v(&[0.3, -0.2]) * v(&[0.3, -0.2]).transpose();
        assert!((m.base.eval(&x) - expect).abs().max() < 1e-15);
        let zero = from_raw(
            &one,
            &CovectorField::zero(2),
            &models::euclidean(2),
            &[Vector::zeros(2)],
        )
        .unwrap();
        let g = zero.assembled().eval(&v(&[0.0, 0.3, 0.3]));
        assert!((g - models::minkowski(3).eval(&Vector::zeros(3))).abs().max() < 1e-15);
    }

    #[test]
    fn from_raw_rejects_indefinite_h() {
        let one = ScalarField::constant(1.0, 2);
        let bad = MetricField::new(2, Signature::Riemannian, |_| {
            Matrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0])
        });
        let r = from_raw(&one, &CovectorField::zero(2), &bad, &[Vector::zeros(2)]);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn constant_field_lorentz_force() {
        let mag = models::stationary_rot(0.2).magnetic();
        let x = v(&[0.3, -0.1]);
        let u = v(&[0.6, 0.8]);
        let yu = lorentz_force(&mag, &x, &u).unwrap();
        assert!((yu - v(&[-0.2 * 0.8, 0.2 * 0.6])).norm() < 1e-15);
        assert!(mag.antisymmetry_residual(&x, &u, &v(&[0.1, 0.5])).unwrap() < 1e-15);
        assert!(mag.two_form_fd_residual(&x) < 1e-9);
        let closed = MagneticSystem::new(models::euclidean(2), models::constant_form(&[0.5, 1.0]));
        assert_eq!(lorentz_force(&closed, &x, &u).unwrap().norm(), 0.0);
    }

    #[test]
    fn magnetic_circle_exit_matches_arc_geometry() {
        let b = 0.2;
        let mag = models::stationary_rot(b).magnetic();
        let circle = BoundaryHypersurface::circle(1.0);
        let th: f64 = 2.5;
        let x = v(&[th.cos(), th.sin()]);
        let tangent = v(&[-th.sin(), th.cos()]);
        let (rec, path) = magnetic_scatter(&mag, &circle, &x, &(tangent * 0.3), &ScatterConfig::default()).unwrap();
        let u = path.first().v.clone();
        let center = &x + v(&[-u[1], u[0]]) / b;
        let c_hat = &center / center.norm();
        let y_exact = &c_hat * (2.0 * x.dot(&c_hat)) - &x;
        assert!((&rec.y - &y_exact).norm() < 1e-8, "{} vs {}", rec.y, y_exact);
        let (a0, a1) = ((&x - &center), (&y_exact - &center));
        let mut turn = a1[1].atan2(a1[0]) - a0[1].atan2(a0[0]);
        while turn <= 0.0 {
            turn += 2.0 * std::f64::consts::PI;
        }
        assert!((rec.length - turn / b).abs() < 1e-8);
        assert!(path.max_drift(|x, v| bilinear(&mag.base.eval(x), v, v)) < 1e-9);
    }

    #[test]
    fn lightlike_geodesics_reduce_to_magnetic_ones() {
        let m = models::stationary_rot(0.2);
        let g = m.assembled();
        let vx = v(&[0.8, 0.6]);
        let x0 = v(&[0.0, -0.3, 0.1]);
        let w = m.omega.eval(&spatial(&x0));
        let v0 = spacetime(1.0 - w.dot(&vx), &vx);
        assert_eq!(
            causal_classify(&g, &x0, &v0, CAUSAL_TOL).unwrap().tag,
            CausalTag::Lightlike
        );
        let path = integrate_geodesic(&g, &x0, &v0, Stop::MaxSigma(1.5), &IntegrationConfig::default()).unwrap();
        let r = project_and_verify(&m, &path).unwrap();
        assert!((r.k - 1.0).abs() < 1e-14);
        assert!(r.k_drift < 1e-7 && r.ode_residual < 1e-6 && r.m_drift < 1e-8, "{r:?}");
        let base: Vec<PathSample> = path
            .samples
            .iter()
            .map(|s| PathSample {
                sigma: s.sigma,
                x: spatial(&s.x),
                v: spatial(&s.v),
            })
            .collect();
        let base = GeodesicPath {
            samples: base,
            speed_squared: 1.0,
        };
        let lifted = lift_magnetic(&m, &base, 0.0).unwrap();
        for (a, b) in lifted.samples.iter().zip(&path.samples) {
            assert!((&a.x - &b.x).norm() < 1e-7);
        }
    }

    #[test]
    fn non_null_speed_identity() {
        let m = models::stationary_rot(0.2);
        let g = m.assembled();
        for v0 in [v(&[2.0, 0.3, 0.4]), v(&[0.1, 0.9, -0.2])] {
            let path = integrate_geodesic(
                &g,
                &v(&[0.0, 0.1, 0.1]),
                &v0,
                Stop::MaxSigma(1.0),
                &IntegrationConfig::default(),
            )
            .unwrap();
            let r = project_and_verify(&m, &path).unwrap();
            assert!(r.speed_identity < 1e-8);
        }
    }

    #[test]
    fn field_free_action_is_chord_length() {
        let mag = MagneticSystem::new(models::euclidean(2), CovectorField::zero(2));
        let a = action_a(&mag, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), &ShootingConfig::default()).unwrap();
        assert!((a - 2.0).abs() < 1e-10);
    }

    #[test]
    fn constant_field_action_matches_arc_oracle() {
        let b = 0.2;
        let mag = models::stationary_rot(b).magnetic();
        let (x, y) = (v(&[-1.0, 0.0]), v(&[1.0, 0.0]));
        let c = magnetic_connector(&mag, &x, &y, None, &ShootingConfig::default()).unwrap();
        let radius = 1.0 / b;
        let half = (1.0 / radius).asin();
        let length = 2.0 * radius * half;
        let segment = radius * radius * (half - half.sin() * half.cos());
        assert!((c.length - length).abs() < 1e-9, "{} {}", c.length, length);
        assert!((c.flux - b * segment).abs() < 1e-9, "{} {}", c.flux, b * segment);
        assert!((c.action - (length - b * segment)).abs() < 1e-9);
    }

    #[test]
    fn normal_gauge_examples() {
        let mag = MagneticSystem::new(models::euclidean(2), CovectorField::new(2, |x| v(&[0.0, x[1]])));
        let ng = boundary_normal_coords(&mag, 1);
        let x = v(&[0.3, 0.7]);
        assert!((ng.phi.eval(&x) - 0.245).abs() < 1e-14);
        assert!(ng.normal_component(&x).abs() < 1e-9);
        let flat = MagneticSystem::new(models::euclidean(2), models::constant_form(&[0.4, 0.0]));
        assert_eq!(boundary_normal_coords(&flat, 1).phi.eval(&x), 0.0);
    }
}
