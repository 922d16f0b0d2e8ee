//! Closed-form scalar, covector and symmetric two-tensor fields on a chart.
//!
//! Fields are cheap to clone (closures behind `Arc`) and immutable. Each one
//! may carry an analytic derivative; when it does not, derivatives fall back
//! to central differences with step `1e-5 * max(1, |x|)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Central-difference step used for all metric and field derivatives.
pub fn fd_step(x: &Vector) -> f64 {
    1e-5 * x.norm().max(1.0)
}

/// A real function on the chart, optionally with its gradient.
#[derive(Clone)]
pub struct ScalarField {
    eval: ScalarFn,
    gradient: Option<VectorFn>,
    positive: bool,
}

impl ScalarField {
    pub fn new(eval: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            gradient: None,
            positive: false,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Marks the field as a conformal-type factor that must stay positive.
    pub fn positive(mut self) -> Self {
        self.positive = true;
        self
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        let mut f = Self::new(move |_| value).with_gradient(move |_| Vector::zeros(dim));
        f.positive = value > 0.0;
        f
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match &self.gradient {
            Some(g) => g(x),
            None => {
                let h = fd_step(x);
                let mut out = Vector::zeros(x.len());
                let mut xp = x.clone();
                for k in 0..x.len() {
                    xp[k] = x[k] + h;
                    let fp = self.eval(&xp);
                    xp[k] = x[k] - h;
                    let fm = self.eval(&xp);
                    xp[k] = x[k];
                    out[k] = (fp - fm) / (2.0 * h);
                }
                out
            }
        }
    }

    /// Checks finiteness, and positivity for fields flagged positive.
    pub fn check_at(&self, x: &Vector) -> crate::Result<f64> {
        let value = self.eval(x);
        if !value.is_finite() {
            return Err(crate::Error::NonFinite {
                context: "scalar field",
            });
        }
        if self.positive && value <= 0.0 {
            return Err(crate::Error::Precondition(format!(
                "positive scalar field is {value} at {:?}",
                x.as_slice()
            )));
        }
        Ok(value)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("positive", &self.positive)
            .finish()
    }
}

/// A one-form field. `jacobian(x)[(i, j)]` is the coordinate partial `d_j v_i`.
#[derive(Clone)]
pub struct CovectorField {
    dim: usize,
    eval: VectorFn,
    jacobian: Option<MatrixFn>,
}

impl CovectorField {
    pub fn new(dim: usize, eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| Vector::zeros(dim)).with_jacobian(move |_| Matrix::zeros(dim, dim))
    }

    /// The exact form `d phi`.
    pub fn exact(phi: &ScalarField, dim: usize) -> Self {
        let p = phi.clone();
        Self::new(dim, move |x| p.gradient(x))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        match &self.jacobian {
            Some(j) => j(x),
            None => {
                let h = fd_step(x);
                let n = x.len();
                let mut out = Matrix::zeros(self.dim, n);
                let mut xp = x.clone();
                for k in 0..n {
                    xp[k] = x[k] + h;
                    let fp = self.eval(&xp);
                    xp[k] = x[k] - h;
                    let fm = self.eval(&xp);
                    xp[k] = x[k];
                    for i in 0..self.dim {
                        out[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
                    }
                }
                out
            }
        }
    }

    /// Coordinate exterior derivative `(d v)_ij = d_i v_j - d_j v_i`.
    pub fn exterior_derivative(&self, x: &Vector) -> Matrix {
        let j = self.jacobian(x);
        &j.transpose() - &j
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let base = self.clone();
        let out = Self::new(self.dim, move |x| base.eval(x) * factor);
        match &self.jacobian {
            Some(_) => {
                let base = self.clone();
                out.with_jacobian(move |x| base.jacobian(x) * factor)
            }
            None => out,
        }
    }

    pub fn sum(&self, other: &CovectorField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let out = Self::new(self.dim, move |x| a.eval(x) + b.eval(x));
        if self.has_jacobian() && other.has_jacobian() {
            let (a, b) = (self.clone(), other.clone());
            out.with_jacobian(move |x| a.jacobian(x) + b.jacobian(x))
        } else {
            out
        }
    }
}

impl fmt::Debug for CovectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovectorField")
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

/// A symmetric covariant two-tensor field.
#[derive(Clone)]
pub struct SymTwoTensorField {
    dim: usize,
    eval: MatrixFn,
}

impl SymTwoTensorField {
    pub fn new(dim: usize, eval: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| Matrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        (self.eval)(x)
    }

    /// `<f, u ⊗ w> = f_ij u^i w^j`.
    pub fn pair(&self, x: &Vector, u: &Vector, w: &Vector) -> f64 {
        bilinear(&self.eval(x), u, w)
    }

    pub fn scaled_by(&self, c: &ScalarField) -> Self {
        let (f, c) = (self.clone(), c.clone());
        Self::new(self.dim, move |x| f.eval(x) * c.eval(x))
    }

    pub fn linear_combination(terms: &[(f64, SymTwoTensorField)]) -> Self {
        let dim = terms.first().map(|t| t.1.dim).unwrap_or(0);
        let terms = terms.to_vec();
        Self::new(dim, move |x| {
            let mut out = Matrix::zeros(dim, dim);
            for (a, f) in &terms {
                out += f.eval(x) * *a;
            }
            out
        })
    }

    /// Largest asymmetry `max |f_ij - f_ji|` at `x`.
    pub fn asymmetry(&self, x: &Vector) -> f64 {
        let m = self.eval(x);
        (&m - m.transpose()).abs().max()
    }
}

impl fmt::Debug for SymTwoTensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymTwoTensorField").field("dim", &self.dim).finish()
    }
}

/// `u^T m w` without allocating.
pub fn bilinear(m: &Matrix, u: &Vector, w: &Vector) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * w[j];
        }
        acc += ui * row;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_matches_analytic() {
        let f = ScalarField::new(|x| x[0] * x[0] * x[1] + x[1].sin());
        let x = Vector::from_vec(vec![0.3, -0.7]);
        let g = f.gradient(&x);
        assert!((g[0] - 2.0 * 0.3 * -0.7).abs() < 1e-9);
        assert!((g[1] - (0.09 + (-0.7f64).cos())).abs() < 1e-9);
    }

    #[test]
    fn exterior_derivative_of_rotation_form() {
        let b = 0.2;
        let w = CovectorField::new(2, move |x| Vector::from_vec(vec![-0.5 * b * x[1], 0.5 * b * x[0]]));
        let d = w.exterior_derivative(&Vector::from_vec(vec![0.4, 0.1]));
        assert!((d[(0, 1)] - b).abs() < 1e-9);
        assert!((d[(1, 0)] + b).abs() < 1e-9);
        assert!(d[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn positive_flag_is_checked() {
        let c = ScalarField::new(|x| x[0]).positive();
        assert!(c.check_at(&Vector::from_vec(vec![1.0])).is_ok());
        assert!(c.check_at(&Vector::from_vec(vec![-1.0])).is_err());
    }
}
