use std::fmt;
use std::sync::Arc;

use crate::fields::{bilinear, fd_step, Matrix, ScalarField, SymTwoTensorField, Vector};
use crate::{Error, Result};

type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type DerivFn = Arc<dyn Fn(&Vector) -> Vec<Matrix> + Send + Sync>;
type DomainFn = Arc<dyn Fn(&Vector) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    /// `(-, +, ..., +)`
    Lorentzian,
    Riemannian,
}

impl Signature {
    pub fn negative_count(self) -> usize {
        match self {
            Signature::Lorentzian => 1,
            Signature::Riemannian => 0,
        }
    }
}

/// A chart-local symmetric metric tensor.
///
/// `deriv(x)[k]` holds the coordinate partial `d_k g_ij`. Without an analytic
/// derivative the field is differentiated by central differences.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    signature: Signature,
    eval: MatrixFn,
    deriv: Option<DerivFn>,
    domain: Option<DomainFn>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("signature", &self.signature)
            .field("analytic_deriv", &self.deriv.is_some())
            .finish()
    }
}

impl MetricField {
    pub fn new(dim: usize, signature: Signature, eval: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        Self {
            dim,
            signature,
            eval: Arc::new(eval),
            deriv: None,
            domain: None,
        }
    }

    pub fn with_deriv(mut self, deriv: impl Fn(&Vector) -> Vec<Matrix> + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn with_domain(mut self, domain: impl Fn(&Vector) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(domain));
        self
    }

    /// Drops any analytic derivative, forcing finite differences.
    pub fn without_deriv(mut self) -> Self {
        self.deriv = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn has_analytic_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn in_domain(&self, x: &Vector) -> bool {
        x.iter().all(|c| c.is_finite()) && self.domain.as_ref().is_none_or(|d| d(x))
    }

    /// Raw evaluation, no validation.
    pub fn eval(&self, x: &Vector) -> Matrix {
        (self.eval)(x)
    }

    fn require_domain(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::ChartDomain {
                point: x.as_slice().to_vec(),
            });
        }
        Ok(())
    }

    /// Evaluates and validates symmetry, non-degeneracy and signature.
    pub fn checked(&self, x: &Vector) -> Result<Matrix> {
        self.require_domain(x)?;
        let g = self.eval(x);
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context: "metric" });
        }
        let scale = g.abs().max().max(f64::MIN_POSITIVE);
        let asymmetry = (&g - g.transpose()).abs().max();
        if asymmetry > 1e-12 * scale {
            return Err(Error::NotSymmetric {
                point: x.as_slice().to_vec(),
                asymmetry,
            });
        }
        let det = g.determinant();
        if det.abs() <= 1e-12 * scale.powi(self.dim as i32) {
            return Err(Error::SingularMetric {
                point: x.as_slice().to_vec(),
                det,
            });
        }
        let eig = g.clone().symmetric_eigenvalues();
        let found = eig.iter().filter(|&&l| l < 0.0).count();
        let expected = self.signature.negative_count();
        if found != expected {
            return Err(Error::SignatureMismatch {
                point: x.as_slice().to_vec(),
                expected,
                found,
            });
        }
        Ok(g)
    }

    pub fn inverse(&self, x: &Vector) -> Result<Matrix> {
        self.require_domain(x)?;
        invert(&self.eval(x), x)
    }

    /// Coordinate partials `d_k g_ij`, analytic when available.
    pub fn deriv(&self, x: &Vector) -> Vec<Matrix> {
        match &self.deriv {
            Some(d) => d(x),
            None => {
                let h = fd_step(x);
                let mut xp = x.clone();
                (0..self.dim)
                    .map(|k| {
                        xp[k] = x[k] + h;
                        let gp = self.eval(&xp);
                        xp[k] = x[k] - h;
                        let gm = self.eval(&xp);
                        xp[k] = x[k];
                        (gp - gm) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// The conformal metric `c g`.
    pub fn conformal(&self, c: &ScalarField) -> MetricField {
        let (g, cc) = (self.clone(), c.clone());
        let mut out = MetricField::new(self.dim, self.signature, move |x| g.eval(x) * cc.eval(x));
        out.domain = self.domain.clone();
        if self.deriv.is_some() && c.has_gradient() {
            let (g, cc) = (self.clone(), c.clone());
            out = out.with_deriv(move |x| {
                let base = g.eval(x);
                let value = cc.eval(x);
                let grad = cc.gradient(x);
                g.deriv(x)
                    .into_iter()
                    .enumerate()
                    .map(|(k, dg)| dg * value + &base * grad[k])
                    .collect()
            });
        }
        out
    }

    /// The metric `g + tau f`.
    pub fn perturbed(&self, f: &SymTwoTensorField, tau: f64) -> MetricField {
        let (g, f) = (self.clone(), f.clone());
        let mut out = MetricField::new(self.dim, self.signature, move |x| g.eval(x) + f.eval(x) * tau);
        out.domain = self.domain.clone();
        out
    }

    /// The metric viewed as a symmetric two-tensor field.
    pub fn as_tensor(&self) -> SymTwoTensorField {
        let g = self.clone();
        SymTwoTensorField::new(self.dim, move |x| g.eval(x))
    }
}

pub(crate) fn invert(m: &Matrix, x: &Vector) -> Result<Matrix> {
    m.clone().try_inverse().ok_or_else(|| Error::SingularMetric {
        point: x.as_slice().to_vec(),
        det: m.determinant(),
    })
}

/// `(u, w)_g` at `x`.
pub fn inner(g: &MetricField, x: &Vector, u: &Vector, w: &Vector) -> Result<f64> {
    g.require_domain(x)?;
    Ok(bilinear(&g.eval(x), u, w))
}

/// Christoffel symbols of the second kind, stored as `[k][i][j]`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// `Gamma^k_ij u^i w^j`.
    pub fn contract(&self, u: &Vector, w: &Vector) -> Vector {
        let n = self.dim;
        Vector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.data[(k * n + i) * n + j] * u[i] * w[j];
                }
            }
            acc
        })
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Largest deviation of `d_k g_ij` from `Gamma^l_ki g_lj + Gamma^l_kj g_il`.
    pub fn compatibility_residual(&self, g: &Matrix, dg: &[Matrix]) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut rhs = 0.0;
                    for l in 0..n {
                        rhs += self.get(l, k, i) * g[(l, j)] + self.get(l, k, j) * g[(i, l)];
                    }
                    worst = worst.max((dg[k][(i, j)] - rhs).abs());
                }
            }
        }
        worst
    }
}

/// Levi-Civita connection coefficients at `x`.
pub fn christoffel(g: &MetricField, x: &Vector) -> Result<Christoffel> {
    g.require_domain(x)?;
    let n = g.dim();
    let ginv = invert(&g.eval(x), x)?;
    let dg = g.deriv(x);
    // first kind: Gamma_lij = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    let mut first = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                first[(l * n + i) * n + j] = 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
            }
        }
    }
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * first[(l * n + i) * n + j];
                }
                data[(k * n + i) * n + j] = acc;
                data[(k * n + j) * n + i] = acc;
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

/// `-Gamma^k_ij v^i v^j`, computed without forming the full symbol array.
pub fn geodesic_acceleration(g: &MetricField, x: &Vector, v: &Vector) -> Result<Vector> {
    let n = g.dim();
    let dg = g.deriv(x);
    let ginv = invert(&g.eval(x), x)?;
    // w_l = (d_i g_lj) v^i v^j - (1/2) (d_l g_ij) v^i v^j
    let mut dv = Matrix::zeros(n, n);
    for (i, d) in dg.iter().enumerate() {
        if v[i] != 0.0 {
            dv += d * v[i];
        }
    }
    let first = &dv * v;
    let w = Vector::from_fn(n, |l, _| first[l] - 0.5 * bilinear(&dg[l], v, v));
    Ok(-(ginv * w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalTag {
    Timelike,
    Lightlike,
    Spacelike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalClass {
    pub tag: CausalTag,
    pub quadratic_form_value: f64,
    /// Absolute tolerance band used for the classification.
    pub tol: f64,
}

/// Default relative band for classifying integrated lightlike rays.
pub const CAUSAL_TOL: f64 = 1e-9;

/// Classifies `v` by the sign of `(v, v)_g`, with band `tol * |v|^2`.
pub fn causal_classify(g: &MetricField, x: &Vector, v: &Vector, tol: f64) -> Result<CausalClass> {
    let value = inner(g, x, v, v)?;
    let band = tol * v.norm_squared();
    let tag = if value < -band {
        CausalTag::Timelike
    } else if value > band {
        CausalTag::Spacelike
    } else {
        CausalTag::Lightlike
    };
    Ok(CausalClass {
        tag,
        quadratic_form_value: value,
        tol: band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    #[test]
    fn minkowski_inner_products() {
        let g = models::minkowski(3);
        let e0 = v(&[1.0, 0.0, 0.0]);
        assert_eq!(inner(&g, &v(&[0.0, 0.0, 0.0]), &e0, &e0).unwrap(), -1.0);
        assert_eq!(inner(&g, &e0, &e0, &Vector::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn stationary_inner_product_by_polarization() {
        let g = models::constant_stationary(1.0, [0.3, 0.0]);
        let u = v(&[1.0, 1.0, 0.0]);
        let val = inner(&g, &v(&[0.0, 0.2, 0.1]), &u, &u).unwrap();
        assert!((val + 0.69).abs() < 1e-14, "{val}");
    }

    #[test]
    fn causal_classes() {
        let g = models::minkowski(3);
        let x = Vector::zeros(3);
        let c = causal_classify(&g, &x, &v(&[1.0, 1.0, 0.0]), CAUSAL_TOL).unwrap();
        assert_eq!(c.tag, CausalTag::Lightlike);
        let c = causal_classify(&g, &x, &v(&[1.0, 0.0, 0.0]), CAUSAL_TOL).unwrap();
        assert_eq!(c.tag, CausalTag::Timelike);
        let c = causal_classify(&g, &x, &v(&[0.1, 0.0, 1.0]), CAUSAL_TOL).unwrap();
        assert_eq!(c.tag, CausalTag::Spacelike);
    }

    #[test]
    fn stationary_lightlike_condition_classifies_as_lightlike() {
        let omega = [0.3, -0.1];
        let g = models::constant_stationary(1.0, omega);
        let vx: [f64; 2] = [0.6, 0.8];
        let norm = (vx[0] * vx[0] + vx[1] * vx[1]).sqrt();
        let vt = -(omega[0] * vx[0] + omega[1] * vx[1]) + norm;
        let c = causal_classify(&g, &Vector::zeros(3), &v(&[vt, vx[0], vx[1]]), CAUSAL_TOL).unwrap();
        assert_eq!(c.tag, CausalTag::Lightlike);
    }

    #[test]
    fn flat_christoffels_vanish() {
        let g = models::euclidean(2).without_deriv();
        let c = christoffel(&g, &v(&[0.3, 0.7])).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(c.get(k, i, j).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn product_metric_has_no_time_christoffels() {
        let g = models::product(models::conformal_bump_metric(0.1)).without_deriv();
        let c = christoffel(&g, &v(&[0.5, 0.3, -0.4])).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!(c.get(0, a, b).abs() < 1e-10);
                assert!(c.get(a, 0, b).abs() < 1e-10);
                assert!(c.get(a, b, 0).abs() < 1e-10);
            }
        }
    }

    /// Closed-form Christoffels of h = e^{2u} id with u = ln(1 + a e^{-|x|^2}) / 2:
    /// Gamma^k_ij = d_i u delta_jk + d_j u delta_ik - d_k u delta_ij.
    #[test]
    fn conformal_christoffels_match_closed_form() {
        let a = 0.1;
        let g = models::conformal_bump_metric(a).without_deriv();
        for p in [[0.3, -0.2], [0.0, 0.9], [-0.7, 0.1], [0.05, 0.02]] {
            let x = v(&p);
            let r2 = p[0] * p[0] + p[1] * p[1];
            let e = (-r2).exp();
            let du = [-a * e * p[0] / (1.0 + a * e), -a * e * p[1] / (1.0 + a * e)];
            let c = christoffel(&g, &x).unwrap();
            let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let exact = du[i] * delta(j, k) + du[j] * delta(i, k) - du[k] * delta(i, j);
                        assert!((c.get(k, i, j) - exact).abs() < 1e-7);
                    }
                }
            }
            assert_eq!(c.max_asymmetry(), 0.0);
            let res = c.compatibility_residual(&g.eval(&x), &g.deriv(&x));
            assert!(res < 1e-6, "{res}");
        }
    }

    #[test]
    fn geodesic_acceleration_agrees_with_christoffel_contraction() {
        let g = models::stationary_rot(0.2).assembled();
        let x = v(&[0.1, 0.4, -0.3]);
        let u = v(&[1.2, 0.3, 0.9]);
        let a = geodesic_acceleration(&g, &x, &u).unwrap();
        let c = christoffel(&g, &x).unwrap().contract(&u, &u);
        assert!((a + c).norm() < 1e-13);
    }

    #[test]
    fn checked_rejects_bad_metrics() {
        let singular = MetricField::new(2, Signature::Riemannian, |_| Matrix::zeros(2, 2));
        assert!(matches!(
            singular.checked(&Vector::zeros(2)),
            Err(Error::SingularMetric { .. })
        ));
        let wrong = MetricField::new(2, Signature::Lorentzian, |_| Matrix::identity(2, 2));
        assert!(matches!(
            wrong.checked(&Vector::zeros(2)),
            Err(Error::SignatureMismatch { .. })
        ));
        let asym = MetricField::new(2, Signature::Riemannian, |_| {
            Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])
        });
        assert!(matches!(
            asym.checked(&Vector::zeros(2)),
            Err(Error::NotSymmetric { .. })
        ));
        let boxed = models::euclidean(2).with_domain(|x| x.norm() < 1.0);
        assert!(matches!(
            inner(&boxed, &v(&[2.0, 0.0]), &v(&[1.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::ChartDomain { .. })
        ));
    }
}
