//! Gauge actions on stationary metrics, conformal changes and the
//! Hamiltonian reparametrization, with scattering-invariance harnesses.

use std::fmt;
use std::sync::Arc;

use crate::fields::{CovectorField, Matrix, ScalarField, Vector};
use crate::geometry::{BoundaryHypersurface, MetricField, Signature};
use crate::scattering::{scatter, ScatterConfig};
use crate::stationary::{spatial, StationaryMetric};
use crate::{Error, Result};

type MapFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type JacFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// A diffeomorphism of the base given in closed form with its inverse and Jacobian.
#[derive(Clone)]
pub struct Diffeomorphism {
    dim: usize,
    map: MapFn,
    inverse: MapFn,
    jacobian: JacFn,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeomorphism").field("dim", &self.dim).finish()
    }
}

impl Diffeomorphism {
    pub fn new(
        dim: usize,
        map: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        inverse: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            map: Arc::new(map),
            inverse: Arc::new(inverse),
            jacobian: Arc::new(jacobian),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |x| x.clone(), |x| x.clone(), move |_| Matrix::identity(dim, dim))
    }

    /// Rotation of the plane by the angle `eps (1 - |x|^2)^4` inside the unit
    /// disk; the identity on and outside the unit circle.
    pub fn twist(eps: f64) -> Self {
        fn angle(eps: f64, x: &Vector) -> (f64, f64) {
            let q = 1.0 - x.norm_squared();
            if q > 0.0 {
                (eps * q.powi(4), -4.0 * eps * q.powi(3))
            } else {
                (0.0, 0.0)
            }
        }
        fn rotate(th: f64, x: &Vector) -> Vector {
            let (s, c) = th.sin_cos();
            Vector::from_vec(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
        }
        Self::new(
            2,
            move |x| rotate(angle(eps, x).0, x),
            move |x| rotate(-angle(eps, x).0, x),
            move |x| {
                let (th, dq) = angle(eps, x);
                let (s, c) = th.sin_cos();
                let r = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
                let rjx = &r * Vector::from_vec(vec![-x[1], x[0]]);
                let grad = x * (2.0 * dq);
                r + rjx * grad.transpose()
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.map)(x)
    }

    pub fn apply_inverse(&self, x: &Vector) -> Vector {
        (self.inverse)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }

    /// Jacobian of the inverse map at `x`.
    pub fn inverse_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let y = self.apply_inverse(x);
        self.jacobian(&y).try_inverse().ok_or(Error::SingularMetric {
            point: y.as_slice().to_vec(),
            det: 0.0,
        })
    }

    /// `self o other`.
    pub fn compose(&self, other: &Diffeomorphism) -> Diffeomorphism {
        let (a, b) = (self.clone(), other.clone());
        let (ai, bi) = (self.clone(), other.clone());
        let (aj, bj) = (self.clone(), other.clone());
        Self::new(
            self.dim,
            move |x| a.apply(&b.apply(x)),
            move |x| bi.apply_inverse(&ai.apply_inverse(x)),
            move |x| aj.jacobian(&bj.apply(x)) * bj.jacobian(x),
        )
    }

    pub fn inverse(&self) -> Diffeomorphism {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        Self::new(
            self.dim,
            move |x| a.apply_inverse(x),
            move |x| b.apply(x),
            move |x| {
                c.inverse_jacobian(x)
                    .unwrap_or_else(|_| Matrix::from_element(c.dim, c.dim, f64::NAN))
            },
        )
    }
}

/// `phi o psi`, with gradient `J^T grad phi(psi(x))`.
pub fn pull_back_scalar(phi: &ScalarField, psi: &Diffeomorphism) -> ScalarField {
    let (p, s) = (phi.clone(), psi.clone());
    let (pg, sg) = (phi.clone(), psi.clone());
    ScalarField::new(move |x| p.eval(&s.apply(x)))
        .with_gradient(move |x| sg.jacobian(x).transpose() * pg.gradient(&sg.apply(x)))
}

/// `(psi, phi)` acting by `h -> psi^* h`, `omega -> psi^*(omega + d phi)`.
#[derive(Clone, Debug)]
pub struct GaugePair {
    pub psi: Diffeomorphism,
    pub phi: ScalarField,
}

impl GaugePair {
    pub fn new(psi: Diffeomorphism, phi: ScalarField) -> Self {
        Self { psi, phi }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Diffeomorphism::identity(dim), ScalarField::constant(0.0, dim))
    }

    pub fn time_shift(phi: ScalarField) -> Self {
        Self::new(Diffeomorphism::identity(2), phi)
    }

    pub fn diffeomorphism(psi: Diffeomorphism) -> Self {
        let dim = psi.dim();
        Self::new(psi, ScalarField::constant(0.0, dim))
    }

    /// Largest of `|psi(x) - x|` and `|phi(x)|` over boundary samples.
    pub fn boundary_deviation(&self, boundary_points: &[Vector]) -> f64 {
        boundary_points
            .iter()
            .map(|x| (self.psi.apply(x) - x).norm().max(self.phi.eval(x).abs()))
            .fold(0.0, f64::max)
    }

    /// `max |psi(psi^-1(x)) - x|` over samples.
    pub fn inverse_residual(&self, points: &[Vector]) -> f64 {
        points
            .iter()
            .map(|x| (self.psi.apply(&self.psi.apply_inverse(x)) - x).norm())
            .fold(0.0, f64::max)
    }

    /// Largest difference of the maps and potentials of two pairs over samples.
    pub fn distance(&self, other: &GaugePair, points: &[Vector]) -> f64 {
        points
            .iter()
            .map(|x| {
                (self.psi.apply(x) - other.psi.apply(x))
                    .norm()
                    .max((self.phi.eval(x) - other.phi.eval(x)).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Pulls `(lambda, omega, h)` back by the pair. Jacobians are checked for
/// invertibility at `samples`.
pub fn apply_gauge(pair: &GaugePair, m: &StationaryMetric, samples: &[Vector]) -> Result<StationaryMetric> {
    for x in samples {
        let det = pair.psi.jacobian(x).determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::SingularMetric {
                point: x.as_slice().to_vec(),
                det,
            });
        }
    }
    let n = m.base_dim();
    let psi = pair.psi.clone();
    let lambda = pull_back_scalar(m.lambda(), &psi);
    let lambda = if m.lambda().is_positive() {
        lambda.positive()
    } else {
        lambda
    };
    let (h, p) = (m.base().clone(), psi.clone());
    let base = MetricField::new(n, Signature::Riemannian, move |x| {
        let j = p.jacobian(x);
        j.transpose() * h.eval(&p.apply(x)) * j
    });
    let (w, phi, p) = (m.omega().clone(), pair.phi.clone(), psi);
    let omega = CovectorField::new(n, move |x| {
        let y = p.apply(x);
        p.jacobian(x).transpose() * (w.eval(&y) + phi.gradient(&y))
    });
    Ok(StationaryMetric::new(lambda, omega, base))
}

/// The pair whose action is that of `p1` followed by `p2`.
pub fn compose_gauge(p1: &GaugePair, p2: &GaugePair) -> GaugePair {
    let psi = p1.psi.compose(&p2.psi);
    let (f1, f2, inv) = (p1.phi.clone(), p2.phi.clone(), p1.psi.clone());
    let (g1, g2, ginv) = (p1.phi.clone(), p2.phi.clone(), p1.psi.clone());
    let phi = ScalarField::new(move |x| f1.eval(x) + f2.eval(&inv.apply_inverse(x))).with_gradient(move |x| {
        let y = ginv.apply_inverse(x);
        let jinv = ginv
            .inverse_jacobian(x)
            .unwrap_or_else(|_| Matrix::from_element(x.len(), x.len(), f64::NAN));
        g1.gradient(x) + jinv.transpose() * g2.gradient(&y)
    });
    GaugePair::new(psi, phi)
}

pub fn inverse_gauge(p: &GaugePair) -> GaugePair {
    let phi = pull_back_scalar(&p.phi, &p.psi);
    let (a, b) = (phi.clone(), phi);
    GaugePair::new(
        p.psi.inverse(),
        ScalarField::new(move |x| -a.eval(x)).with_gradient(move |x| -b.gradient(x)),
    )
}

/// A positive conformal factor.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    c: ScalarField,
}

impl ConformalFactor {
    /// Checks positivity at `samples`.
    pub fn new(c: ScalarField, samples: &[Vector]) -> Result<Self> {
        for x in samples {
            let v = c.eval(x);
            if !(v > 0.0) {
                return Err(Error::Precondition(format!(
                    "conformal factor is {v} at {:?}",
                    x.as_slice()
                )));
            }
        }
        Ok(Self { c: c.positive() })
    }

    pub fn constant(value: f64, dim: usize) -> Result<Self> {
        Self::new(ScalarField::constant(value, dim), &[Vector::zeros(dim)])
    }

    pub fn field(&self) -> &ScalarField {
        &self.c
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.c.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianState {
    pub x: Vector,
    pub xi: Vector,
}

/// `H = 1/2 g^ij xi_i xi_j`.
pub fn hamiltonian(g: &MetricField, s: &HamiltonianState) -> Result<f64> {
    let ginv = g.inverse(&s.x)?;
    Ok(0.5 * s.xi.dot(&(ginv * &s.xi)))
}

/// `1/2 c^-1 g^ij xi_i xi_j`.
pub fn scaled_hamiltonian(g: &MetricField, c: Option<&ConformalFactor>, s: &HamiltonianState) -> Result<f64> {
    let cv = c.map(|c| c.eval(&s.x)).unwrap_or(1.0);
    Ok(hamiltonian(g, s)? / cv)
}

struct HamFlow<'a> {
    g: &'a MetricField,
    c: Option<&'a ConformalFactor>,
}

impl HamFlow<'_> {
    fn rhs(&self, x: &Vector, xi: &Vector) -> Result<(Vector, Vector)> {
        let ginv = self.g.inverse(x)?;
        let u = &ginv * xi;
        let dg = self.g.deriv(x);
        let (cv, dc) = match self.c {
            Some(c) => (c.eval(x), c.field().gradient(x)),
            None => (1.0, Vector::zeros(x.len())),
        };
        let q = xi.dot(&u);
        let xdot = &u / cv;
        let xidot = Vector::from_fn(x.len(), |i, _| {
            0.5 / cv * u.dot(&(&dg[i] * &u)) + 0.5 / (cv * cv) * dc[i] * q
        });
        Ok((xdot, xidot))
    }

    fn step(&self, s: &HamiltonianState, h: f64) -> Result<HamiltonianState> {
        let (k1x, k1p) = self.rhs(&s.x, &s.xi)?;
        let (k2x, k2p) = self.rhs(&(&s.x + &k1x * (0.5 * h)), &(&s.xi + &k1p * (0.5 * h)))?;
        let (k3x, k3p) = self.rhs(&(&s.x + &k2x * (0.5 * h)), &(&s.xi + &k2p * (0.5 * h)))?;
        let (k4x, k4p) = self.rhs(&(&s.x + &k3x * h), &(&s.xi + &k3p * h))?;
        let out = HamiltonianState {
            x: &s.x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0),
            xi: &s.xi + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0),
        };
        if out.x.iter().chain(out.xi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "hamiltonian flow",
            });
        }
        Ok(out)
    }
}

/// RK4 on the Hamiltonian system of `H` (or `c^-1 H`), sampled on a uniform grid
/// ending at `sigma_max`.
pub fn hamiltonian_flow(
    g: &MetricField,
    state0: &HamiltonianState,
    c: Option<&ConformalFactor>,
    sigma_max: f64,
    step: f64,
) -> Result<Vec<HamiltonianState>> {
    if c.is_some() {
        let h0 = hamiltonian(g, state0)?;
        if h0.abs() > 1e-10 * state0.xi.norm_squared().max(1.0) {
            return Err(Error::Precondition(format!(
                "conformal reparametrization needs H = 0, found {h0:e}"
            )));
        }
    }
    let steps = ((sigma_max / step) - 1e-9).ceil().max(1.0) as usize;
    let h = sigma_max / steps as f64;
    let flow = HamFlow { g, c };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    for _ in 0..steps {
        let next = flow.step(out.last().expect("nonempty"), h)?;
        out.push(next);
    }
    Ok(out)
}

/// The unscaled flow with RK4 dense output, extended on demand.
struct DenseFlow<'a> {
    flow: HamFlow<'a>,
    h: f64,
    samples: Vec<HamiltonianState>,
}

impl DenseFlow<'_> {
    fn at(&mut self, u: f64) -> Result<HamiltonianState> {
        let k = (u / self.h).floor().max(0.0) as usize;
        while self.samples.len() <= k {
            let next = self.flow.step(self.samples.last().expect("nonempty"), self.h)?;
            self.samples.push(next);
        }
        let rest = u - k as f64 * self.h;
        if rest == 0.0 {
            return Ok(self.samples[k].clone());
        }
        self.flow.step(&self.samples[k], rest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReparamReport {
    /// `max_s |(x~, xi~)(s) - (x, xi)(alpha(s))|`.
    pub max_deviation: f64,
    pub alpha_end: f64,
    pub alpha_monotone: bool,
    /// Drift of `c^-1 H` along the scaled flow.
    pub h_drift: f64,
}

/// Integrates the scaled flow and the unscaled flow composed with the
/// solution of `alpha' = 1 / c(x(alpha))`, and compares them.
pub fn conformal_reparam_check(
    g: &MetricField,
    c: &ConformalFactor,
    state0: &HamiltonianState,
    sigma_max: f64,
    step: f64,
) -> Result<ReparamReport> {
    let scaled = hamiltonian_flow(g, state0, Some(c), sigma_max, step)?;
    let h = sigma_max / (scaled.len() - 1) as f64;
    let mut dense = DenseFlow {
        flow: HamFlow { g, c: None },
        h,
        samples: vec![state0.clone()],
    };
    let rate = |dense: &mut DenseFlow<'_>, a: f64| -> Result<f64> { Ok(1.0 / c.eval(&dense.at(a)?.x)) };
    let mut alpha = 0.0;
    let mut monotone = true;
    let mut worst: f64 = 0.0;
    let h0 = scaled_hamiltonian(g, Some(c), state0)?;
    let mut h_drift: f64 = 0.0;
    for (j, s) in scaled.iter().enumerate() {
        if j > 0 {
            let k1 = rate(&mut dense, alpha)?;
            let k2 = rate(&mut dense, alpha + 0.5 * h * k1)?;
            let k3 = rate(&mut dense, alpha + 0.5 * h * k2)?;
            let k4 = rate(&mut dense, alpha + h * k3)?;
            let next = alpha + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            monotone &= next > alpha;
            alpha = next;
        }
        let ref_state = dense.at(alpha)?;
        let d = ((&s.x - &ref_state.x).norm_squared() + (&s.xi - &ref_state.xi).norm_squared()).sqrt();
        worst = worst.max(d);
        h_drift = h_drift.max((scaled_hamiltonian(g, Some(c), s)? - h0).abs());
    }
    Ok(ReparamReport {
        max_deviation: worst,
        alpha_end: alpha,
        alpha_monotone: monotone,
        h_drift,
    })
}

/// Boundary-preserving transformations of stationary metrics.
#[derive(Clone, Debug)]
pub enum Transform {
    Gauge(GaugePair),
    /// `lambda -> mu lambda` with `mu > 0` a field on the base.
    Conformal(ScalarField),
    /// Applied left to right.
    Composite(Vec<Transform>),
}

impl Transform {
    /// Largest deviation from the identity on boundary samples.
    pub fn boundary_deviation(&self, boundary_points: &[Vector]) -> f64 {
        match self {
            Transform::Gauge(p) => p.boundary_deviation(boundary_points),
            Transform::Conformal(_) => 0.0,
            Transform::Composite(ts) => ts
                .iter()
                .map(|t| t.boundary_deviation(boundary_points))
                .fold(0.0, f64::max),
        }
    }
}

pub fn apply_transform(t: &Transform, m: &StationaryMetric, samples: &[Vector]) -> Result<StationaryMetric> {
    match t {
        Transform::Gauge(p) => apply_gauge(p, m, samples),
        Transform::Conformal(mu) => {
            for x in samples {
                let v = mu.eval(x);
                if !(v > 0.0) {
                    return Err(Error::Precondition(format!("conformal factor is {v}")));
                }
            }
            let (a, b) = (mu.clone(), m.lambda().clone());
            let (ag, bg) = (mu.clone(), m.lambda().clone());
            let lambda = ScalarField::new(move |x| a.eval(x) * b.eval(x))
                .with_gradient(move |x| ag.gradient(x) * bg.eval(x) + bg.gradient(x) * ag.eval(x))
                .positive();
            Ok(StationaryMetric::new(lambda, m.omega().clone(), m.base().clone()))
        }
        Transform::Composite(ts) => {
            let mut out = m.clone();
            for t in ts {
                out = apply_transform(t, &out, samples)?;
            }
            Ok(out)
        }
    }
}

/// An entry point on the cylinder with a projected direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySpec {
    pub x: Vector,
    pub v_proj: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub max_deviation: f64,
    pub deviations: Vec<f64>,
}

/// Scattering deviation of a single ray between two metrics, with the exit
/// direction matched by its best positive scale.
pub fn scattering_deviation(
    g0: &MetricField,
    g1: &MetricField,
    boundary: &BoundaryHypersurface,
    ray: &RaySpec,
    cfg: &ScatterConfig,
) -> Result<f64> {
    let a = scatter(g0, boundary, boundary, &ray.x, &ray.v_proj, cfg)?;
    let b = scatter(g1, boundary, boundary, &ray.x, &ray.v_proj, cfg)?;
    let scale = b.w_proj.dot(&a.w_proj) / b.w_proj.norm_squared();
    if !(scale > 0.0) {
        return Err(Error::Normalization { value: scale });
    }
    Ok((&a.y - &b.y).norm().max((&b.w_proj * scale - &a.w_proj).norm()))
}

/// Compares the scattering relation of `m` and of its transform on the rays.
pub fn invariance_check(
    t: &Transform,
    m: &StationaryMetric,
    boundary: &BoundaryHypersurface,
    rays: &[RaySpec],
    samples: &[Vector],
    cfg: &ScatterConfig,
) -> Result<InvarianceReport> {
    let entry_points: Vec<Vector> = rays.iter().map(|r| spatial(&r.x)).collect();
    let dev = t.boundary_deviation(&entry_points);
    if dev > 1e-10 {
        return Err(Error::Precondition(format!("transform moves boundary data by {dev:e}")));
    }
    let g0 = m.assembled();
    let g1 = apply_transform(t, m, samples)?.assembled();
    let deviations = rays
        .iter()
        .map(|r| scattering_deviation(&g0, &g1, boundary, r, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(InvarianceReport {
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    fn grid() -> Vec<Vector> {
        let mut out = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                let p = v(&[-0.9 + 0.3 * i as f64, -0.9 + 0.3 * j as f64]);
                if p.norm() < 0.99 {
                    out.push(p);
                }
            }
        }
        out
    }

    fn null_velocity(g: &MetricField, x: &Vector) -> Vector {
        let c = g.eval(x)[(1, 1)];
        v(&[c.sqrt(), 0.8, 0.6])
    }

    #[test]
    fn twist_jacobian_and_inverse() {
        let psi = Diffeomorphism::twist(0.8);
        for x in grid() {
            let fd = Matrix::from_fn(2, 2, |i, k| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[k] += 1e-6;
                b[k] -= 1e-6;
                (psi.apply(&a)[i] - psi.apply(&b)[i]) / 2e-6
            });
            assert!((psi.jacobian(&x) - fd).abs().max() < 1e-8);
            assert!((psi.apply(&psi.apply_inverse(&x)) - &x).norm() < 1e-14);
        }
        let edge = v(&[0.6, 0.8]);
        assert!((psi.apply(&edge) - &edge).norm() < 1e-15);
    }

    #[test]
    fn time_shift_adds_exact_form() {
        let m = models::stationary_rot(0.2);
        let phi = models::collar_bump(0.3);
        let out = apply_gauge(&GaugePair::time_shift(phi.clone()), &m, &grid()).unwrap();
        let x = v(&[0.2, -0.4]);
        assert!((out.omega().eval(&x) - m.omega().eval(&x) - phi.gradient(&x)).norm() < 1e-14);
        assert!((out.base().eval(&x) - m.base().eval(&x)).abs().max() < 1e-14);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let m = models::stationary_rot(0.2);
        let p1 = GaugePair::new(Diffeomorphism::twist(0.5), models::collar_bump(0.2));
        let p2 = GaugePair::new(Diffeomorphism::twist(-0.3), models::gaussian(0.1, &[0.1, 0.0], 0.3));
        let p2 = GaugePair::new(p2.psi, {
            let (a, b) = (models::collar_bump(1.0), p2.phi.clone());
            ScalarField::new(move |x| a.eval(x) * b.eval(x))
        });
        let seq = apply_gauge(&p2, &apply_gauge(&p1, &m, &grid()).unwrap(), &grid()).unwrap();
        let once = apply_gauge(&compose_gauge(&p1, &p2), &m, &grid()).unwrap();
        for x in grid() {
            assert!((seq.omega().eval(&x) - once.omega().eval(&x)).norm() < 1e-9);
            assert!((seq.base().eval(&x) - once.base().eval(&x)).abs().max() < 1e-10);
        }
        let id = compose_gauge(&p1, &inverse_gauge(&p1));
        assert!(id.distance(&GaugePair::identity(2), &grid()) < 1e-12);
    }

    #[test]
    fn unit_factor_flow_matches_geodesic() {
        use crate::geometry::{integrate_geodesic, IntegrationConfig, Stop};
        let g = models::perturbed_product(0.2);
        let x = v(&[0.0, -0.5, 0.1]);
        let vel = null_velocity(&g, &x);
        let gx = g.eval(&x);
        let xi = &gx * &vel;
        let s0 = HamiltonianState { x: x.clone(), xi };
        let one = ConformalFactor::constant(1.0, 3).unwrap();
        let flow = hamiltonian_flow(&g, &s0, Some(&one), 1.0, 1e-3).unwrap();
        let geo = integrate_geodesic(&g, &x, &vel, Stop::MaxSigma(1.0), &IntegrationConfig::default()).unwrap();
        for (a, b) in flow.iter().zip(&geo.samples) {
            assert!((&a.x - &b.x).norm() < 1e-8);
        }
    }

    #[test]
    fn constant_factor_rates() {
        let g = models::perturbed_product(0.2);
        let x = v(&[0.0, -0.5, 0.1]);
        let xi = g.eval(&x) * null_velocity(&g, &x);
        let s0 = HamiltonianState { x, xi };
        for (c, tol) in [(1.0, 1e-10), (4.0, 1e-9)] {
            let f = ConformalFactor::constant(c, 3).unwrap();
            let rep = conformal_reparam_check(&g, &f, &s0, 1.0, 1e-3).unwrap();
            assert!(rep.max_deviation < tol, "{rep:?}");
            assert!((rep.alpha_end - 1.0 / c).abs() < 1e-9);
        }
    }

    #[test]
    fn nonnull_state_is_rejected() {
        let g = models::minkowski(3);
        let s0 = HamiltonianState {
            x: Vector::zeros(3),
            xi: v(&[-1.0, 0.0, 0.0]),
        };
        let c = ConformalFactor::constant(2.0, 3).unwrap();
        assert!(hamiltonian_flow(&g, &s0, Some(&c), 1.0, 1e-3).is_err());
        assert!(hamiltonian_flow(&g, &s0, None, 1.0, 1e-3).is_ok());
    }
}
