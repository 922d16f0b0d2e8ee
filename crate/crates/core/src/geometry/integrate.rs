//! Fixed-step RK4 integration of second-order flows with optional
//! hypersurface stopping.

use crate::fields::{bilinear, Vector};
use crate::geometry::metric::{geodesic_acceleration, MetricField};
use crate::geometry::surface::BoundaryHypersurface;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub sigma: f64,
    pub x: Vector,
    pub v: Vector,
}

/// A sampled parametrized curve with velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    /// The conserved quadratic invariant evaluated at the first sample.
    pub speed_squared: f64,
}

impl GeodesicPath {
    pub fn first(&self) -> &PathSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &PathSample {
        self.samples.last().expect("paths are never empty")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sigma_end(&self) -> f64 {
        self.last().sigma
    }

    /// The same curve traversed `a` times faster: `sigma -> sigma / a`,
    /// velocities times `a`.
    pub fn reparametrized(&self, a: f64) -> GeodesicPath {
        GeodesicPath {
            samples: self
                .samples
                .iter()
                .map(|s| PathSample {
                    sigma: s.sigma / a,
                    x: s.x.clone(),
                    v: &s.v * a,
                })
                .collect(),
            speed_squared: self.speed_squared * a * a,
        }
    }

    /// Largest deviation of `quad(x, v)` from the recorded invariant.
    pub fn max_drift(&self, quad: impl Fn(&Vector, &Vector) -> f64) -> f64 {
        self.samples
            .iter()
            .map(|s| (quad(&s.x, &s.v) - self.speed_squared).abs())
            .fold(0.0, f64::max)
    }

    /// `max |(v, v)_g - speed_squared|` along the path.
    pub fn speed_drift(&self, g: &MetricField) -> f64 {
        self.max_drift(|x, v| bilinear(&g.eval(x), v, v))
    }

    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        if self.samples.len() < 2 {
            return true;
        }
        let h = self.samples[1].sigma - self.samples[0].sigma;
        self.samples
            .windows(2)
            .all(|w| ((w[1].sigma - w[0].sigma) - h).abs() <= rel_tol * h.abs())
    }
}

/// A second-order flow `x'' = a(x, x')` with a conserved quadratic invariant.
pub trait Flow {
    fn dim(&self) -> usize;
    fn acceleration(&self, x: &Vector, v: &Vector) -> Result<Vector>;
    fn invariant(&self, x: &Vector, v: &Vector) -> f64;
    fn in_domain(&self, x: &Vector) -> bool;
}

/// Geodesics of a metric: `x'' + Gamma(x', x') = 0`.
pub struct GeodesicFlow<'a> {
    pub metric: &'a MetricField,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(metric: &'a MetricField) -> Self {
        Self { metric }
    }
}

impl Flow for GeodesicFlow<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn acceleration(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        geodesic_acceleration(self.metric, x, v)
    }

    fn invariant(&self, x: &Vector, v: &Vector) -> f64 {
        bilinear(&self.metric.eval(x), v, v)
    }

    fn in_domain(&self, x: &Vector) -> bool {
        self.metric.in_domain(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub step: f64,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_steps: 5_000_000,
        }
    }
}

impl IntegrationConfig {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Stop<'a> {
    /// Integrate over `[0, sigma]` with uniform samples ending exactly there.
    MaxSigma(f64),
    /// Stop at the first transversal crossing of `surface`, giving up at
    /// `sigma_max`.
    Surface {
        surface: &'a BoundaryHypersurface,
        sigma_max: f64,
    },
}

/// One classical RK4 step for `(x, v)`.
pub fn rk4_step<F: Flow + ?Sized>(flow: &F, x: &Vector, v: &Vector, h: f64) -> Result<(Vector, Vector)> {
    let a1 = flow.acceleration(x, v)?;
    let x2 = x + v * (0.5 * h);
    let v2 = v + &a1 * (0.5 * h);
    let a2 = flow.acceleration(&x2, &v2)?;
    let x3 = x + &v2 * (0.5 * h);
    let v3 = v + &a2 * (0.5 * h);
    let a3 = flow.acceleration(&x3, &v3)?;
    let x4 = x + &v3 * h;
    let v4 = v + &a3 * h;
    let a4 = flow.acceleration(&x4, &v4)?;
    let xn = x + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    if xn.iter().chain(vn.iter()).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { context: "RK4 step" });
    }
    Ok((xn, vn))
}

const BISECTION_STEPS: usize = 60;
const NEWTON_STEPS: usize = 3;

/// Integrates `flow` from `(x0, v0)` until the stop condition.
pub fn integrate_flow<F: Flow + ?Sized>(
    flow: &F,
    x0: &Vector,
    v0: &Vector,
    stop: Stop<'_>,
    cfg: &IntegrationConfig,
) -> Result<GeodesicPath> {
    let n = flow.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len().min(v0.len()),
        });
    }
    if x0.iter().chain(v0.iter()).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite {
            context: "initial data",
        });
    }
    if !flow.in_domain(x0) {
        return Err(Error::ChartDomain {
            point: x0.as_slice().to_vec(),
        });
    }
    let speed_squared = flow.invariant(x0, v0);
    let mut samples = vec![PathSample {
        sigma: 0.0,
        x: x0.clone(),
        v: v0.clone(),
    }];
    let truncated = |samples: Vec<PathSample>| {
        let sigma = samples.last().map(|s| s.sigma).unwrap_or(0.0);
        Error::Truncation {
            sigma,
            partial: Box::new(GeodesicPath { samples, speed_squared }),
        }
    };

    match stop {
        Stop::MaxSigma(sigma_end) => {
            let steps = ((sigma_end / cfg.step) - 1e-9).ceil().max(1.0) as usize;
            if steps > cfg.max_steps {
                return Err(Error::NonTerminating {
                    required: steps,
                    limit: cfg.max_steps,
                });
            }
            let h = sigma_end / steps as f64;
            let (mut x, mut v) = (x0.clone(), v0.clone());
            for i in 1..=steps {
                let (xn, vn) = rk4_step(flow, &x, &v, h)?;
                if !flow.in_domain(&xn) {
                    return Err(truncated(samples));
                }
                x = xn;
                v = vn;
                samples.push(PathSample {
                    sigma: if i == steps { sigma_end } else { i as f64 * h },
                    x: x.clone(),
                    v: v.clone(),
                });
            }
        }
        Stop::Surface { surface, sigma_max } => {
            let h = cfg.step;
            let steps = (sigma_max / h).ceil() as usize;
            if steps > cfg.max_steps {
                return Err(Error::NonTerminating {
                    required: steps,
                    limit: cfg.max_steps,
                });
            }
            let mut b_prev = surface.value(x0);
            if b_prev.abs() <= 1e-9 * surface.gradient(x0).norm().max(1.0) {
                b_prev = 0.0;
            }
            let mut hit = false;
            for i in 1..=steps {
                let prev = samples.last().expect("nonempty");
                let (xn, vn) = rk4_step(flow, &prev.x, &prev.v, h)?;
                if !flow.in_domain(&xn) {
                    return Err(truncated(samples));
                }
                let b = surface.value(&xn);
                if b_prev != 0.0 && b_prev * b <= 0.0 {
                    let sigma0 = prev.sigma;
                    let last = refine_crossing(flow, surface, prev, h, b_prev)?;
                    debug_assert!(last.sigma >= sigma0);
                    samples.push(last);
                    hit = true;
                    break;
                }
                b_prev = b;
                samples.push(PathSample {
                    sigma: i as f64 * h,
                    x: xn,
                    v: vn,
                });
            }
            if !hit {
                return Err(Error::Escape {
                    sigma_max,
                    partial: Box::new(GeodesicPath { samples, speed_squared }),
                });
            }
        }
    }
    Ok(GeodesicPath { samples, speed_squared })
}

/// Locates `b(x(sigma)) = 0` inside one step by bisection, then Newton.
fn refine_crossing<F: Flow + ?Sized>(
    flow: &F,
    surface: &BoundaryHypersurface,
    from: &PathSample,
    h: f64,
    b_from: f64,
) -> Result<PathSample> {
    let at = |d: f64| rk4_step(flow, &from.x, &from.v, d);
    let (mut lo, mut hi) = (0.0, h);
    let sign_lo = b_from.signum();
    let scale = b_from.abs().max(1e-300);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (xm, _) = at(mid)?;
        let bm = surface.value(&xm);
        if bm.abs() <= 1e-15 * scale.max(1.0) {
            lo = mid;
            hi = mid;
            break;
        }
        if bm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * h {
            break;
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..NEWTON_STEPS {
        let (x, v) = at(d)?;
        let b = surface.value(&x);
        let slope = surface.gradient(&x).dot(&v);
        if slope == 0.0 || b == 0.0 {
            break;
        }
        let next = d - b / slope;
        if next.is_finite() && (0.0..=h).contains(&next) {
            d = next;
        }
    }
    let (x, v) = at(d)?;
    Ok(PathSample {
        sigma: from.sigma + d,
        x,
        v,
    })
}

/// Geodesic of `g` from `(x0, v0)`.
pub fn integrate_geodesic(
    g: &MetricField,
    x0: &Vector,
    v0: &Vector,
    stop: Stop<'_>,
    cfg: &IntegrationConfig,
) -> Result<GeodesicPath> {
    integrate_flow(&GeodesicFlow::new(g), x0, v0, stop, cfg)
}
