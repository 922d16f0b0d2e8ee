use std::f64::consts::PI;

use scatterlab::connect::{connecting_geodesic, defining_r, ShootingConfig};
use scatterlab::fields::bilinear;
use scatterlab::geometry::BoundaryHypersurface;
use scatterlab::lightray::sym_diff;
use scatterlab::models;
use scatterlab::scattering::{normalize, scatter, ReducedMode, ScatterConfig};
use scatterlab::stationary::{
    action_a, boundary_normal_coords, linearization_equivalence, magnetic_connector, magnetic_transform, spacetime,
    spatial, MagneticSystem,
};
use scatterlab::{CovectorField, ScalarField, SymTwoTensorField, Vector};

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

fn on_circle(theta: f64) -> Vector {
    v(&[theta.cos(), theta.sin()])
}

fn bump_covector(c: [f64; 2]) -> CovectorField {
    let b = models::collar_bump(1.0);
    let b2 = b.clone();
    let cv = v(&c);
    let cj = cv.clone();
    CovectorField::new(2, move |x| &cv * b.eval(x)).with_jacobian(move |x| &cj * b2.gradient(x).transpose())
}

fn kernel_beta(mag: &MagneticSystem, u: &CovectorField, phi: &ScalarField) -> CovectorField {
    let (m, u, dphi) = (mag.clone(), u.clone(), CovectorField::exact(phi, 2));
    CovectorField::new(2, move |x| dphi.eval(x) - m.lorentz_covector(x, &u.eval(x)).unwrap())
}

#[test]
fn magnetic_kernel_vanishes_on_connectors() {
    let cfg = ShootingConfig::default();
    let u = bump_covector([0.4, -0.7]);
    let phi = models::collar_bump(0.6);
    for mag in [
        models::stationary_rot(0.3).magnetic(),
        MagneticSystem::new(
            models::conformal_bump_metric(0.2),
            models::nonuniform_rotation_form(0.6, 0.4),
        ),
    ] {
        let f = sym_diff(&u, mag.base());
        let beta = kernel_beta(&mag, &u, &phi);
        let mut worst: f64 = 0.0;
        for i in 0..30 {
            let a = 0.2 + 2.0 * PI * i as f64 / 30.0;
            let b = a + 0.8 + 0.1 * (i % 7) as f64;
            let c = magnetic_connector(&mag, &on_circle(a), &on_circle(b), None, &cfg).unwrap();
            worst = worst.max(magnetic_transform(&f, &beta, &c.unit_speed_path()).abs());
        }
        assert!(worst < 1e-8, "magnetic kernel residual {worst:e}");
    }
}

#[test]
fn action_asymmetry_is_twice_the_triangle_flux() {
    let cfg = ShootingConfig::default();
    let b = 0.4;
    let constant = models::stationary_rot(b).magnetic();
    for (a0, a1) in [(0.3, 2.1), (1.0, 1.7), (4.0, 5.9)] {
        let (x, y) = (on_circle(a0), on_circle(a1));
        let asym = action_a(&constant, &x, &y, &cfg).unwrap() - action_a(&constant, &y, &x, &cfg).unwrap();
        // Mirror arcs enclose equal areas, so only the chord flux b * area(0, x, y) survives.
        let expected = -b * f64::sin(a1 - a0);
        assert!(
            (asym - expected).abs() < 1e-9,
            "asymmetry {asym:e}, expected {expected:e}"
        );
    }
    let skewed = MagneticSystem::new(models::euclidean(2), models::nonuniform_rotation_form(0.8, 0.6));
    let (x, y) = (on_circle(0.3), on_circle(2.1));
    let forward = magnetic_connector(&skewed, &x, &y, None, &cfg).unwrap();
    let backward = magnetic_connector(&skewed, &y, &x, None, &cfg).unwrap();
    assert!((forward.length - backward.length).abs() > 1e-4);
}

#[test]
fn constant_field_action_matches_arc_geometry() {
    let b = 0.5;
    let mag = models::stationary_rot(b).magnetic();
    let (x, y) = (on_circle(0.0), on_circle(1.4));
    let c = magnetic_connector(&mag, &x, &y, None, &ShootingConfig::default()).unwrap();
    // Unit-speed orbits are circles of radius 1/b; the connector is the short arc.
    let radius = 1.0 / b;
    let chord = (&y - &x).norm();
    let angle = 2.0 * (chord / (2.0 * radius)).asin();
    assert!((c.length - radius * angle).abs() < 1e-9);
}

#[test]
fn stationary_energy_splits_into_length_and_k() {
    let m = models::stationary_rot(0.3);
    let g = m.assembled();
    let cfg = ShootingConfig::default();
    for i in 0..8 {
        let a = 0.4 + 0.7 * i as f64;
        let (xs, ys) = (on_circle(a), on_circle(a + 1.3));
        let dt = 0.4 + 0.35 * i as f64;
        let c = connecting_geodesic(&g, &spacetime(0.0, &xs), &spacetime(dt, &ys), None, &cfg).unwrap();
        let s0 = c.path.first();
        let k = s0.v[0] + m.omega().eval(&spatial(&s0.x)).dot(&spatial(&s0.v));
        let h = m.base().eval(&spatial(&s0.x));
        let ell = bilinear(&h, &spatial(&s0.v), &spatial(&s0.v)).sqrt();
        assert!((c.energy - 0.5 * (ell * ell - k * k)).abs() < 1e-9);
    }
}

#[test]
fn defining_function_sign_follows_action() {
    let m = models::stationary_rot(0.3);
    let g = m.assembled();
    let cfg = ShootingConfig::default();
    let mag = m.magnetic();
    for i in 0..6 {
        let a = 0.2 + 1.0 * i as f64;
        let (xs, ys) = (on_circle(a), on_circle(a + 1.5));
        let action = action_a(&mag, &xs, &ys, &cfg).unwrap();
        let x = spacetime(0.0, &xs);
        let later = defining_r(&g, &x, &spacetime(action + 0.2, &ys), None, &cfg).unwrap();
        let earlier = defining_r(&g, &x, &spacetime(action - 0.2, &ys), None, &cfg).unwrap();
        assert!(later < 0.0 && earlier > 0.0, "r = {later}, {earlier}");
        let on = defining_r(&g, &x, &spacetime(action, &ys), None, &cfg).unwrap();
        assert!(on.abs() < 1e-9);
    }
}

#[test]
fn linearization_equivalence_kills_gauge_and_kernel_directions() {
    let m = models::stationary_rot(0.3);
    let mag = m.magnetic();
    let cfg = ShootingConfig::default();
    let phi = models::collar_bump(0.5);
    let u = bump_covector([0.5, 0.2]);
    let ds = sym_diff(&u, m.base());
    let kernel_h = SymTwoTensorField::linear_combination(&[(2.0, ds)]);
    let um = (mag.clone(), u.clone());
    let kernel_w = CovectorField::new(2, move |x| um.0.lorentz_covector(x, &um.1.eval(x)).unwrap());
    for i in 0..5 {
        let a = 0.1 + 1.2 * i as f64;
        let (x, y) = (on_circle(a), on_circle(a + 1.1));
        let gauge = linearization_equivalence(
            &m,
            &SymTwoTensorField::zero(2),
            &CovectorField::exact(&phi, 2),
            &x,
            &y,
            0.0,
            &cfg,
        )
        .unwrap();
        assert!(gauge.lorentzian_value.abs() < 1e-9 && gauge.magnetic_value.abs() < 1e-9);
        let kernel = linearization_equivalence(&m, &kernel_h, &kernel_w, &x, &y, 0.0, &cfg).unwrap();
        assert!(kernel.lorentzian_value.abs() < 1e-8, "{}", kernel.lorentzian_value);
        assert!(kernel.defining_r.abs() < 1e-10);
    }
}

#[test]
fn normal_gauge_potential_matches_closed_form() {
    let m = models::stationary_rot_normal(0.4, 0.25);
    let ng = boundary_normal_coords(&m.magnetic(), 1);
    let oracle = models::normal_gauge_term(0.25);
    for i in 0..12 {
        for j in 0..6 {
            let x = v(&[0.5 * i as f64, 0.07 * j as f64]);
            assert!((ng.phi.eval(&x) - oracle.eval(&x)).abs() < 1e-12);
            assert!(ng.normal_component(&x).abs() < 1e-8);
        }
    }
    let x = v(&[0.3, 0.2, 0.1]);
    assert!((ng.time_coordinate(&x) - 0.3 - oracle.eval(&v(&[0.2, 0.1]))).abs() < 1e-12);
}

#[test]
fn time_component_normalization_on_minkowski_slab() {
    let g = models::minkowski(3);
    let u = BoundaryHypersurface::plane(3, 1, 0.0, -1.0, scatterlab::geometry::SurfaceType::Timelike);
    let w = BoundaryHypersurface::plane(3, 1, 2.0, 1.0, scatterlab::geometry::SurfaceType::Timelike);
    let rec = scatter(
        &g,
        &u,
        &w,
        &Vector::zeros(3),
        &v(&[3.0, 0.0, 1.8]),
        &ScatterConfig::default(),
    )
    .unwrap();
    let n = normalize(&g, &rec, ReducedMode::TimeComponent).unwrap();
    // Straight ray with direction (1, 0.8, 0.6).
    assert!((&n.y - v(&[2.5, 2.0, 1.5])).norm() < 1e-10);
    assert!((&n.w_proj - v(&[1.0, 0.0, 0.6])).norm() < 1e-12);
    assert!((n.travel - 2.5).abs() < 1e-10);
}
