use std::f64::consts::PI;

use proptest::prelude::*;
use scatterlab::fields::bilinear;
use scatterlab::gauge::{compose_gauge, inverse_gauge, Diffeomorphism, GaugePair};
use scatterlab::geometry::BoundaryHypersurface;
use scatterlab::lightray::light_ray_transform;
use scatterlab::models;
use scatterlab::scattering::{normalize, scatter, scatter_path, ReducedMode, ScatterConfig};
use scatterlab::stationary::{from_raw, raw_metric, MagneticSystem, StationaryMetric};
use scatterlab::{CovectorField, Matrix, MetricField, ScalarField, SymTwoTensorField, Vector};

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

fn entry(theta: f64, alpha: f64) -> (Vector, Vector) {
    (
        v(&[0.0, theta.cos(), theta.sin()]),
        v(&[1.0, -alpha * theta.sin(), alpha * theta.cos()]),
    )
}

fn metrics() -> Vec<MetricField> {
    vec![
        models::product(models::euclidean(2)),
        models::perturbed_product(0.1),
        models::stationary_rot(0.2).assembled(),
    ]
}

fn in_disk() -> impl Strategy<Value = Vector> {
    (0.0..0.9f64, 0.0..2.0 * PI).prop_map(|(r, a)| v(&[r * a.cos(), r * a.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scattering_is_positively_homogeneous(theta in 0.0..2.0 * PI, alpha in -0.8..0.8f64, a in 0.3..3.0f64, which in 0..3usize) {
        let g = &metrics()[which];
        let c = BoundaryHypersurface::cylinder(1.0);
        let cfg = ScatterConfig::default();
        let (x, vp) = entry(theta, alpha);
        let base = scatter(g, &c, &c, &x, &vp, &cfg).unwrap();
        let scaled = scatter(g, &c, &c, &x, &(&vp * a), &cfg).unwrap();
        prop_assert!((&scaled.y - &base.y).norm() < 1e-8);
        prop_assert!((&scaled.w_proj - &base.w_proj * a).norm() < 1e-8 * a.max(1.0));
        prop_assert!((scaled.travel * a - base.travel).abs() < 1e-8);
        let n1 = normalize(g, &base, ReducedMode::TimeComponent).unwrap();
        let n2 = normalize(g, &scaled, ReducedMode::TimeComponent).unwrap();
        prop_assert!((&n1.w_proj - &n2.w_proj).norm() < 1e-8);
    }

    #[test]
    fn scattering_is_deterministic_and_future_directed(theta in 0.0..2.0 * PI, alpha in -0.8..0.8f64, which in 0..3usize) {
        let g = &metrics()[which];
        let c = BoundaryHypersurface::cylinder(1.0);
        let cfg = ScatterConfig::default();
        let (x, vp) = entry(theta, alpha);
        let (a, path) = scatter_path(g, &c, &c, &x, &vp, &cfg).unwrap();
        let b = scatter(g, &c, &c, &x, &vp, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        for s in &path.samples {
            prop_assert!(s.v[0] > 0.0);
            prop_assert!(bilinear(&g.eval(&s.x), &s.v, &s.v).abs() < 1e-8);
        }
        prop_assert!(a.y[0] > x[0]);
    }

    #[test]
    fn conformal_change_preserves_scattering_up_to_scale(theta in 0.0..2.0 * PI, alpha in -0.8..0.8f64, amp in 0.1..1.0f64) {
        let g = models::product(models::euclidean(2));
        let c = models::spatial_lift(&models::gaussian(amp, &[0.1, -0.2], 0.5)).positive();
        let c1 = c.clone();
        let cg = g.conformal(&ScalarField::new(move |x| 1.0 + c1.eval(x)).positive());
        let cyl = BoundaryHypersurface::cylinder(1.0);
        let cfg = ScatterConfig::default();
        let (x, vp) = entry(theta, alpha);
        let a = scatter(&g, &cyl, &cyl, &x, &vp, &cfg).unwrap();
        let b = scatter(&cg, &cyl, &cyl, &x, &vp, &cfg).unwrap();
        prop_assert!((&a.y - &b.y).norm() < 1e-7);
        prop_assert!((&a.w_proj / a.w_proj[0] - &b.w_proj / b.w_proj[0]).norm() < 1e-7);
    }

    #[test]
    fn light_ray_transform_is_linear(theta in 0.0..2.0 * PI, alpha in -0.8..0.8f64, s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let g = models::perturbed_product(0.1);
        let cyl = BoundaryHypersurface::cylinder(1.0);
        let (x, vp) = entry(theta, alpha);
        let (_, path) = scatter_path(&g, &cyl, &cyl, &x, &vp, &ScatterConfig::default()).unwrap();
        let q = models::spatial_lift(&models::gaussian(1.0, &[0.0, 0.3], 0.4));
        let f1 = SymTwoTensorField::new(3, move |y| Matrix::from_fn(3, 3, |i, j| q.eval(y) * (1 + i + j) as f64));
        let f2 = SymTwoTensorField::new(3, |y| Matrix::from_fn(3, 3, |i, j| if i == j { y[1] * y[2] } else { 0.1 }));
        let combo = SymTwoTensorField::linear_combination(&[(s, f1.clone()), (t, f2.clone())]);
        let lhs = light_ray_transform(&combo, &path).unwrap();
        let rhs = s * light_ray_transform(&f1, &path).unwrap() + t * light_ray_transform(&f2, &path).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn from_raw_round_trip(x in in_disk(), l0 in 0.5..2.0f64, w in prop::array::uniform2(-0.5..0.5f64), s in 0.5..2.0f64) {
        let lambda = ScalarField::new(move |y| l0 + 0.2 * y[0] * y[0]).positive();
        let wv = w;
        let omega = CovectorField::new(2, move |y| v(&[wv[0] + 0.1 * y[1], wv[1]]));
        let h = MetricField::new(2, scatterlab::geometry::Signature::Riemannian, move |y| {
            Matrix::from_row_slice(2, 2, &[s + y[0] * y[0], 0.1, 0.1, 1.0])
        });
        let m = StationaryMetric::new(lambda.clone(), omega.clone(), h.clone());
        let l2 = lambda.clone();
        let o2 = omega.clone();
        let omega_raw = CovectorField::new(2, move |y| o2.eval(y) * -l2.eval(y));
        let (l3, o3, h3) = (lambda.clone(), omega.clone(), h.clone());
        let h_raw = MetricField::new(2, scatterlab::geometry::Signature::Riemannian, move |y| {
            let w = o3.eval(y);
            (h3.eval(y) - &w * w.transpose()) * l3.eval(y)
        });
        let back = from_raw(&lambda, &omega_raw, &h_raw, std::slice::from_ref(&x)).unwrap();
        prop_assert!((back.base().eval(&x) - h.eval(&x)).abs().max() < 1e-12);
        prop_assert!((back.omega().eval(&x) - omega.eval(&x)).norm() < 1e-12);
        let p = v(&[0.3, x[0], x[1]]);
        let raw = raw_metric(&lambda, &omega_raw, &h_raw).eval(&p);
        prop_assert!((m.assembled().eval(&p) - raw).abs().max() < 1e-12);
    }

    #[test]
    fn lorentz_force_is_skew(x in in_disk(), u in prop::array::uniform2(-2.0..2.0f64), w in prop::array::uniform2(-2.0..2.0f64)) {
        let mag = MagneticSystem::new(models::conformal_bump_metric(0.3), models::nonuniform_rotation_form(0.7, 0.4));
        let (u, w) = (v(&u), v(&w));
        prop_assert!(mag.antisymmetry_residual(&x, &u, &w).unwrap() < 1e-12 * (1.0 + u.norm() * w.norm()));
        let y = mag.lorentz_matrix(&x).unwrap();
        let h = mag.base().eval(&x);
        prop_assert!(bilinear(&h, &(&y * &u), &u).abs() < 1e-12 * (1.0 + u.norm_squared()));
    }

    #[test]
    fn twist_inverse_is_exact(x in in_disk(), eps in -1.5..1.5f64) {
        let d = Diffeomorphism::twist(eps);
        prop_assert!((d.apply(&d.apply_inverse(&x)) - &x).norm() < 1e-13);
        prop_assert!((d.jacobian(&d.apply_inverse(&x)) * d.inverse_jacobian(&x).unwrap() - Matrix::identity(2, 2)).abs().max() < 1e-12);
    }
}

fn gauge_a() -> GaugePair {
    GaugePair::new(Diffeomorphism::twist(0.7), models::collar_bump(0.3))
}

fn gauge_b() -> GaugePair {
    GaugePair::new(Diffeomorphism::twist(-0.4), models::gaussian(0.2, &[0.1, 0.0], 0.3))
}

fn gauge_c() -> GaugePair {
    GaugePair::new(Diffeomorphism::twist(1.1), models::collar_bump(-0.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_group_axioms(x in in_disk()) {
        let pts = [x];
        let id = GaugePair::identity(2);
        let (a, b, c) = (gauge_a(), gauge_b(), gauge_c());
        prop_assert!(compose_gauge(&a, &id).distance(&a, &pts) < 1e-13);
        prop_assert!(compose_gauge(&id, &a).distance(&a, &pts) < 1e-13);
        prop_assert!(compose_gauge(&a, &inverse_gauge(&a)).distance(&id, &pts) < 1e-12);
        prop_assert!(compose_gauge(&inverse_gauge(&a), &a).distance(&id, &pts) < 1e-12);
        let left = compose_gauge(&compose_gauge(&a, &b), &c);
        let right = compose_gauge(&a, &compose_gauge(&b, &c));
        prop_assert!(left.distance(&right, &pts) < 1e-12);
    }

    #[test]
    fn gauge_action_respects_composition(x in in_disk()) {
        let m = models::stationary_rot(0.3);
        let (a, b) = (gauge_a(), gauge_b());
        let pts = [x.clone()];
        let step = scatterlab::gauge::apply_gauge(&b, &scatterlab::gauge::apply_gauge(&a, &m, &pts).unwrap(), &pts).unwrap();
        let once = scatterlab::gauge::apply_gauge(&compose_gauge(&a, &b), &m, &pts).unwrap();
        prop_assert!((step.base().eval(&x) - once.base().eval(&x)).abs().max() < 1e-10);
        prop_assert!((step.omega().eval(&x) - once.omega().eval(&x)).norm() < 1e-7);
        prop_assert!((step.lambda().eval(&x) - once.lambda().eval(&x)).abs() < 1e-14);
    }
}
