//! One function per experiment command. Each returns its records in
//! canonical order; records are computed on the rayon pool.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use scatterlab::connect::{connecting_geodesic, defining_r, illinois, linearize_r, michel_check, MetricFamily};
use scatterlab::fields::bilinear;
use scatterlab::gauge::{
    apply_transform, conformal_reparam_check, scattering_deviation, ConformalFactor, Diffeomorphism, GaugePair,
    HamiltonianState, RaySpec, Transform,
};
use scatterlab::geometry::{
    causal_classify, integrate_geodesic, lightlike_completion, BoundaryHypersurface, CausalTag, Signature, Stop,
    CAUSAL_TOL,
};
use scatterlab::lightray::{
    ftc_boundary_term, kernel_conformal_test, kernel_potential_test, light_ray_transform, sym_diff,
};
use scatterlab::models;
use scatterlab::scattering::{normalize, scatter, scatter_path, ReducedMode};
use scatterlab::stationary::{
    action_a, boundary_normal_coords, linearization_equivalence, magnetic_michel, magnetic_scatter, project_and_verify,
    spacetime, spatial, thmmag_verify, MagneticSystem,
};
use scatterlab::{CovectorField, Matrix, MetricField, ScalarField, SymTwoTensorField, Vector};

use crate::config::{Config, FamilyKind, ScenarioKind, TransformKind};
use crate::error::Fault;
use crate::report::Record;
use crate::scenario::Scenario;

/// A record that could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFailure {
    pub label: String,
    pub message: String,
}

pub type Outcome = Result<Record, RecordFailure>;

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub config: &'a Config,
    pub seed: u64,
}

impl Context<'_> {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn tol(&self, name: &str) -> f64 {
        self.scenario.tol(name)
    }
}

struct Job<T> {
    label: String,
    item: T,
}

fn jobs<T>(items: impl IntoIterator<Item = (String, T)>) -> Vec<Job<T>> {
    items.into_iter().map(|(label, item)| Job { label, item }).collect()
}

fn fan_out<T: Sync>(jobs: &[Job<T>], f: impl Fn(&str, &T) -> scatterlab::Result<Record> + Sync) -> Vec<Outcome> {
    jobs.par_iter()
        .map(|j| {
            f(&j.label, &j.item).map_err(|e| RecordFailure {
                label: j.label.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

fn unit_circle() -> BoundaryHypersurface {
    BoundaryHypersurface::circle(1.0)
}

fn tag_name(t: CausalTag) -> &'static str {
    match t {
        CausalTag::Timelike => "timelike",
        CausalTag::Lightlike => "lightlike",
        CausalTag::Spacelike => "spacelike",
    }
}

fn lambda_is_one(s: &Scenario) -> bool {
    s.samples()
        .iter()
        .all(|x| (s.stationary.lambda().eval(x) - 1.0).abs() < 1e-14)
}

/// Exit of the straight line `x + s v` for the flat scenarios.
fn straight_exit(s: &Scenario, x: &Vector, vel: &Vector) -> Option<Vector> {
    let step = match s.kind {
        ScenarioKind::MinkowskiSlab => (s.parameters["width"] - x[1]) / vel[1],
        ScenarioKind::ProductDisk => {
            let (p, d) = (spatial(x), spatial(vel));
            -2.0 * p.dot(&d) / d.norm_squared()
        }
        _ => return None,
    };
    Some(x + vel * step)
}

/// Lightlike pairs `(x, y)` joined by the scattered rays of the grid.
fn sigma_pairs(ctx: &Context<'_>) -> Vec<Outcome> {
    let s = ctx.scenario;
    let cfg = ctx.config.scatter();
    let js = jobs(s.rays().into_iter().map(|r| (r.label.clone(), r)));
    fan_out(&js, |label, ray| {
        let rec = scatter(&s.metric, &s.entry, &s.exit, &ray.x, &ray.v_proj, &cfg)?;
        Ok(Record::new(label).input("x", &rec.x).input("y", &rec.y))
    })
}

fn pair_of(r: &Record) -> (Vector, Vector) {
    let get = |k: &str| match &r.inputs[k] {
        crate::report::Value::Vector(xs) => Vector::from_vec(xs.clone()),
        _ => unreachable!("pair inputs are vectors"),
    };
    (get("x"), get("y"))
}

/// Splits outcomes into successes, propagating the first failure.
fn successes(outcomes: Vec<Outcome>) -> Result<Vec<Record>, Vec<Outcome>> {
    if outcomes.iter().any(|o| o.is_err()) {
        return Err(outcomes);
    }
    Ok(outcomes.into_iter().map(|o| o.unwrap()).collect())
}

pub fn scatter_rays(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let cfg = ctx.config.scatter();
    let magnetic =
        matches!(s.kind, ScenarioKind::StationaryRot | ScenarioKind::Custom).then(|| s.normalized_stationary());
    let js = jobs(s.rays().into_iter().map(|r| (r.label.clone(), r)));
    Ok(fan_out(&js, |label, ray| {
        let (rec, path) = scatter_path(&s.metric, &s.entry, &s.exit, &ray.x, &ray.v_proj, &cfg)?;
        let mut r = Record::new(label)
            .input("x", &ray.x)
            .input("v_proj", &ray.v_proj)
            .output("y", &rec.y)
            .output("w_proj", &rec.w_proj)
            .output("travel", rec.travel)
            .max("speed_drift", path.speed_drift(&s.metric), ctx.tol("speed_drift"));
        if let Some(exact) = straight_exit(s, &ray.x, &rec.v_full) {
            r = r.max("closed_form", (exact - &rec.y).norm(), ctx.tol("closed_form"));
        }
        if let Some(m) = &magnetic {
            let g = m.assembled();
            let n = normalize(&g, &rec, ReducedMode::TimeComponent)?;
            let mag = m.magnetic();
            let (mrec, mpath) = magnetic_scatter(&mag, &unit_circle(), &spatial(&rec.x), &spatial(&n.v_proj), &cfg)?;
            let h = mag.base().clone();
            r = r.output("magnetic_exit", &mrec.y).max(
                "magnetic_speed_drift",
                mpath.max_drift(|x, u| bilinear(&h.eval(x), u, u)),
                ctx.tol("speed_drift"),
            );
        }
        Ok(r)
    }))
}

pub fn connect(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let cfg = ctx.config.shooting();
    let flat = matches!(s.kind, ScenarioKind::MinkowskiSlab | ScenarioKind::ProductDisk);
    let split = lambda_is_one(s);
    let js = jobs(s.spacetime_pairs().into_iter().map(|(l, x, y)| (l, (x, y))));
    Ok(fan_out(&js, |label, (x, y)| {
        let c = connecting_geodesic(&s.metric, x, y, None, &cfg)?;
        let first = c.path.first();
        let class = causal_classify(&s.metric, &first.x, &first.v, CAUSAL_TOL)?;
        let by_sign = if c.energy < 0.0 {
            CausalTag::Timelike
        } else {
            CausalTag::Spacelike
        };
        let mut r = Record::new(label)
            .input("x", x)
            .input("y", y)
            .output("r", c.energy)
            .output("causal", tag_name(class.tag))
            .output("iterations", c.iterations)
            .max("shooting", c.residual, ctx.tol("shooting"));
        if class.tag != CausalTag::Lightlike {
            r = r.max("class_mismatch", if class.tag == by_sign { 0.0 } else { 1.0 }, 0.0);
        }
        if flat {
            let dt = y[0] - x[0];
            let exact = 0.5 * ((spatial(y) - spatial(x)).norm_squared() - dt * dt);
            r = r.output("r_exact", exact).max(
                "closed_form",
                (c.energy - exact).abs() / exact.abs().max(1e-6),
                ctx.tol("closed_form"),
            );
        } else if split {
            let xs = spatial(&first.x);
            let (xd, td) = (spatial(&first.v), first.v[0]);
            let k = td + s.stationary.omega().eval(&xs).dot(&xd);
            let ell2 = bilinear(&s.stationary.base().eval(&xs), &xd, &xd);
            r = r.max(
                "energy_split",
                (c.energy - 0.5 * (ell2 - k * k)).abs(),
                ctx.tol("closed_form"),
            );
        }
        Ok(r)
    }))
}

pub fn defining_r_sweep(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let cfg = ctx.config.shooting();
    let sw = &s.grids.sweep;
    let dts: Vec<f64> = (0..sw.samples)
        .map(|j| sw.dt_min + (sw.dt_max - sw.dt_min) * j as f64 / (sw.samples - 1) as f64)
        .collect();
    let mag = s.normalized_stationary().magnetic();
    let js = jobs(s.base_pairs(sw.lines).into_iter().map(|p| (p.label.clone(), p)));
    Ok(fan_out(&js, |label, pair| {
        let x = spacetime(0.0, &pair.x);
        let r_at = |dt: f64| defining_r(&s.metric, &x, &spacetime(dt, &pair.y), None, &cfg);
        let rs = dts.iter().map(|&dt| r_at(dt)).collect::<scatterlab::Result<Vec<_>>>()?;
        let crossings: Vec<usize> = (1..rs.len())
            .filter(|&j| rs[j - 1].signum() != rs[j].signum())
            .collect();
        let mut r = Record::new(label)
            .input("x", &x)
            .input("y_base", &pair.y)
            .output("r", Vector::from_vec(rs.clone()))
            .output("sign_changes", crossings.len())
            .max("sign_change_excess", (crossings.len() as f64 - 1.0).abs(), 0.0);
        if let [j] = crossings[..] {
            let crossing = illinois(r_at, dts[j - 1], dts[j], 1e-13, 200)?;
            let expected = action_a(&mag, &pair.x, &pair.y, &cfg)?;
            r = r.output("crossing", crossing).output("action", expected).max(
                "crossing",
                (crossing - expected).abs(),
                ctx.tol("closed_form"),
            );
        }
        Ok(r)
    }))
}

pub fn michel(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let pairs = match successes(sigma_pairs(ctx)) {
        Ok(p) => p,
        Err(failed) => return Ok(failed),
    };
    let cfg = ctx.config.michel();
    let js = jobs(pairs.iter().map(|r| (r.label.clone(), pair_of(r))));
    Ok(fan_out(&js, |label, (x, y)| {
        let m = michel_check(&s.metric, &s.entry, &s.exit, x, y, &cfg)?;
        Ok(Record::new(label)
            .input("x", x)
            .input("y", y)
            .output("position", m.position)
            .output("covector", m.covector)
            .output("scale", m.scale)
            .output("r", m.r)
            .max("michel", m.max(), ctx.tol("michel")))
    }))
}

fn covector_times_bump(bump: &ScalarField, c: Vector) -> CovectorField {
    let n = c.len();
    let (b, bg) = (bump.clone(), bump.clone());
    let cj = c.clone();
    CovectorField::new(n, move |x| &c * b.eval(&spatial(x))).with_jacobian(move |x| {
        let mut grad = Vector::zeros(n);
        grad.rows_mut(1, n - 1).copy_from(&bg.gradient(&spatial(x)));
        &cj * grad.transpose()
    })
}

fn family(ctx: &Context<'_>, kind: FamilyKind) -> MetricFamily {
    let s = ctx.scenario;
    let g = &s.metric;
    let spatial_identity = |q: Option<ScalarField>| {
        SymTwoTensorField::new(3, move |x| {
            let mut m = Matrix::identity(3, 3);
            m[(0, 0)] = 0.0;
            match &q {
                Some(q) => m * q.eval(x),
                None => m,
            }
        })
    };
    let f = match kind {
        FamilyKind::SpatialScale => spatial_identity(None),
        FamilyKind::Gaussian => {
            let c = s.interior_point([0.4, -0.2]);
            spatial_identity(Some(models::spatial_lift(&models::gaussian(1.0, &c, 0.5))))
        }
        FamilyKind::Conformal => {
            let c = s.interior_point([-0.2, 0.4]);
            g.as_tensor()
                .scaled_by(&models::spatial_lift(&models::gaussian(0.8, &c, 0.5)))
        }
        FamilyKind::Potential => sym_diff(&covector_times_bump(&s.interior_bump(), v(&[0.3, 0.5, -0.4])), g),
    };
    MetricFamily::linear(g, &f)
}

fn family_name(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::SpatialScale => "spatial_scale",
        FamilyKind::Gaussian => "gaussian",
        FamilyKind::Conformal => "conformal",
        FamilyKind::Potential => "potential",
    }
}

pub fn verify_thm1(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let opts = &ctx.config.experiment;
    if opts.families.is_empty() {
        return Err(Fault::Scenario("experiment.families is empty".into()));
    }
    let pairs = match successes(sigma_pairs(ctx)) {
        Ok(p) => p,
        Err(failed) => return Ok(failed),
    };
    let cfg = ctx.config.shooting();
    let families: Vec<(FamilyKind, MetricFamily)> = opts.families.iter().map(|&k| (k, family(ctx, k))).collect();
    let mut items = Vec::new();
    for (fi, (kind, _)) in families.iter().enumerate() {
        for p in &pairs {
            items.push((format!("{} {}", family_name(*kind), p.label), (fi, pair_of(p))));
        }
    }
    let js = jobs(items);
    Ok(fan_out(&js, |label, (fi, (x, y))| {
        let (kind, fam) = &families[*fi];
        let rep = linearize_r(fam, x, y, opts.tau_step, opts.sigma_tol, &cfg)?;
        let r = Record::new(label)
            .input("family", family_name(*kind))
            .input("x", x)
            .input("y", y)
            .output("fd_value", rep.fd_value)
            .output("half_lf", rep.kappa * rep.lrt_value)
            .output("base_r", rep.base_r);
        Ok(match kind {
            FamilyKind::SpatialScale | FamilyKind::Gaussian => r.max("thm1_rel", rep.rel_error, ctx.tol("thm1_rel")),
            FamilyKind::Conformal | FamilyKind::Potential => r.max(
                "gauge_family",
                rep.fd_value.abs().max(rep.lrt_value.abs()),
                ctx.tol("gauge_family"),
            ),
        })
    }))
}

pub fn kernel_tests(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let g = &s.metric;
    let cfg = ctx.config.scatter();
    let mut rng = ctx.rng(1);
    let mut coeffs = || {
        v(&[
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])
    };
    let (cv, cw) = (coeffs(), coeffs());
    let interior = covector_times_bump(&s.interior_bump(), cv.clone());
    let cj = cw.clone();
    let open = CovectorField::new(3, move |x| {
        v(&[
            cw[0] * x[1] * x[2],
            cw[1] * x[0] + x[2].sin(),
            cw[2] * x[1] * x[1] - x[0],
        ])
    })
    .with_jacobian(move |x| {
        Matrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                cj[0] * x[2],
                cj[0] * x[1],
                cj[1],
                0.0,
                x[2].cos(),
                -1.0,
                2.0 * cj[2] * x[1],
                0.0,
            ],
        )
    });
    let open_f = sym_diff(&open, g);
    let c = models::spatial_lift(&models::gaussian(1.0, &s.interior_point([0.2, -0.4]), 0.4));
    let js = jobs(s.rays().into_iter().map(|r| (r.label.clone(), r)));
    Ok(fan_out(&js, |label, ray| {
        let (_, path) = scatter_path(g, &s.entry, &s.exit, &ray.x, &ray.v_proj, &cfg)?;
        let ray_set = std::slice::from_ref(&path);
        let pot = kernel_potential_test(&interior, g, ray_set)?;
        let conf = kernel_conformal_test(&c, g, ray_set)?;
        let ftc = (light_ray_transform(&open_f, &path)? - ftc_boundary_term(&open, &path)).abs();
        Ok(Record::new(label)
            .input("x", &ray.x)
            .input("v_proj", &ray.v_proj)
            .input("potential_coefficients", &cv)
            .max("kernel_potential", pot, ctx.tol("kernel_potential"))
            .max("kernel_conformal", conf, ctx.tol("kernel_conformal"))
            .max("ftc", ftc, ctx.tol("ftc")))
    }))
}

pub fn verify_thmmag(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    s.require_unit_disk("verify-thmmag")?;
    let m = s.normalized_stationary();
    let g = m.assembled();
    let (scfg, ccfg) = (ctx.config.scatter(), ctx.config.shooting());
    let cyl = BoundaryHypersurface::cylinder(1.0);
    let circle = unit_circle();
    let js = jobs(s.rays().into_iter().map(|r| (r.label.clone(), r)));
    Ok(fan_out(&js, |label, ray| {
        let (rec, path) = scatter_path(&g, &cyl, &cyl, &ray.x, &ray.v_proj, &scfg)?;
        let n = normalize(&g, &rec, ReducedMode::TimeComponent)?;
        let t = thmmag_verify(&m, &cyl, &circle, &ray.x, &n.v_proj, &scfg, &ccfg)?;
        let red = project_and_verify(&m, &path)?;
        let tol = ctx.tol("thmmag");
        let mut identity: f64 = 0.0;
        for shift in [0.3, -0.3] {
            let vel = &rec.v_full + v(&[shift, 0.0, 0.0]);
            let p = integrate_geodesic(&g, &ray.x, &vel, Stop::MaxSigma(0.5), &scfg.integration)?;
            identity = identity.max(project_and_verify(&m, &p)?.speed_identity);
        }
        Ok(Record::new(label)
            .input("x", &ray.x)
            .input("v_proj", &n.v_proj)
            .output("travel_time", t.travel_time)
            .output("k", red.k)
            .max("exit_point", t.exit_point, tol)
            .max("exit_direction", t.exit_direction, tol)
            .max("length", t.length, tol)
            .max("action", t.action, tol)
            .max("exit_time_component", t.exit_time_component, tol)
            .max("round_trip", t.round_trip, ctx.tol("round_trip"))
            .max("reduction_ode", red.ode_residual, ctx.tol("reduction_ode"))
            .max("k_drift", red.k_drift, ctx.tol("k_drift"))
            .max("speed_identity", identity, ctx.tol("speed_identity")))
    }))
}

pub fn magnetic_michel_pairs(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    s.require_unit_disk("magnetic-michel")?;
    let mag = s.normalized_stationary().magnetic();
    let cfg = ctx.config.shooting();
    let step = ctx.config.experiment.fd_step;
    let circle = unit_circle();
    let js = jobs(
        s.base_pairs(s.grids.pairs.count)
            .into_iter()
            .map(|p| (p.label.clone(), p)),
    );
    Ok(fan_out(&js, |label, p| {
        let r = magnetic_michel(&mag, &circle, &p.x, &p.y, step, &cfg)?;
        Ok(Record::new(label)
            .input("x", &p.x)
            .input("y", &p.y)
            .output("action", r.action)
            .max("magnetic_michel", r.entry.max(r.exit), ctx.tol("magnetic_michel")))
    }))
}

struct Perturbation {
    name: String,
    dh: SymTwoTensorField,
    dw: CovectorField,
}

fn perturbations(ctx: &Context<'_>) -> Vec<Perturbation> {
    let mut rng = ctx.rng(2);
    let mut out = Vec::new();
    for t in 0..ctx.config.experiment.perturbations {
        let mut centre = || [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
        let (c1, c2) = (centre(), centre());
        let a1 = rng.random_range(0.3..0.7);
        let a2 = rng.random_range(0.3..0.7);
        let shift = rng.random_range(-0.3..0.3);
        let q = models::gaussian(a1, &c1, 0.5);
        let dh = SymTwoTensorField::new(2, move |x| Matrix::identity(2, 2) * q.eval(x));
        let p = models::gaussian(a2, &c2, 0.6);
        let dw = CovectorField::new(2, move |x| v(&[-x[1], x[0] + shift]) * p.eval(x));
        out.push(Perturbation {
            name: format!("dh {t}"),
            dh: dh.clone(),
            dw: CovectorField::zero(2),
        });
        out.push(Perturbation {
            name: format!("dw {t}"),
            dh: SymTwoTensorField::zero(2),
            dw: dw.clone(),
        });
        out.push(Perturbation {
            name: format!("mixed {t}"),
            dh,
            dw,
        });
    }
    out
}

pub fn lin_equivalence(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    s.require_unit_disk("lin-equivalence")?;
    if ctx.config.experiment.perturbations == 0 {
        return Err(Fault::Scenario("experiment.perturbations must be positive".into()));
    }
    let m = s.normalized_stationary();
    let cfg = ctx.config.shooting();
    let perts = perturbations(ctx);
    let mut items = Vec::new();
    for p in s.base_pairs(s.grids.pairs.count) {
        for (k, pert) in perts.iter().enumerate() {
            items.push((format!("{} {}", p.label, pert.name), (p.x.clone(), p.y.clone(), k)));
        }
    }
    let js = jobs(items);
    let tol = ctx.tol("lin_equivalence");
    Ok(fan_out(&js, |label, (x, y, k)| {
        let p = &perts[*k];
        let e = linearization_equivalence(&m, &p.dh, &p.dw, x, y, 0.0, &cfg)?;
        Ok(Record::new(label)
            .input("x", x)
            .input("y", y)
            .input("perturbation", p.name.as_str())
            .output("lorentzian", e.lorentzian_value)
            .output("magnetic", e.magnetic_value)
            .output("length", e.length)
            .output("ratio", e.ratio)
            .output("ratio_over_2l2", e.ratio / (2.0 * e.length * e.length))
            .output("r", e.defining_r)
            .max("pointwise", e.pointwise_residual, tol)
            .max("integrated", e.integrated_residual, tol))
    }))
}

fn transform(kind: TransformKind) -> Transform {
    let twist = || Transform::Gauge(GaugePair::diffeomorphism(Diffeomorphism::twist(0.8)));
    let shift = || Transform::Gauge(GaugePair::time_shift(models::collar_bump(0.4)));
    let conformal = || {
        Transform::Conformal(
            ScalarField::new(|x: &Vector| 1.0 + 0.5 * (-x.norm_squared()).exp())
                .with_gradient(|x: &Vector| x * (-(-x.norm_squared()).exp()))
                .positive(),
        )
    };
    match kind {
        TransformKind::Twist => twist(),
        TransformKind::TimeShift => shift(),
        TransformKind::Conformal => conformal(),
        TransformKind::Composite => Transform::Composite(vec![twist(), shift(), conformal()]),
    }
}

fn transform_name(kind: TransformKind) -> &'static str {
    match kind {
        TransformKind::Twist => "twist",
        TransformKind::TimeShift => "time_shift",
        TransformKind::Conformal => "conformal",
        TransformKind::Composite => "composite",
    }
}

pub fn gauge_invariance(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    s.require_unit_disk("gauge-invariance")?;
    let kinds = &ctx.config.experiment.transforms;
    if kinds.is_empty() {
        return Err(Fault::Scenario("experiment.transforms is empty".into()));
    }
    let cfg = ctx.config.scatter();
    let samples = s.samples();
    let rays = s.rays();
    let entry_points: Vec<Vector> = rays.iter().map(|r| spatial(&r.x)).collect();
    let mut metrics = Vec::new();
    for &k in kinds {
        let t = transform(k);
        let dev = t.boundary_deviation(&entry_points);
        let m1 = if dev > 1e-10 {
            Err(format!("transform moves boundary data by {dev:e}"))
        } else {
            apply_transform(&t, &s.stationary, &samples).map_err(|e| e.to_string())
        };
        metrics.push((k, m1.map(|m| m.assembled())));
    }
    let g0 = s.stationary.assembled();
    let mut items = Vec::new();
    for (ti, (k, _)) in metrics.iter().enumerate() {
        for r in &rays {
            items.push((format!("{} {}", transform_name(*k), r.label), (ti, r.clone())));
        }
    }
    let js = jobs(items);
    Ok(js
        .par_iter()
        .map(|j| {
            let (ti, ray) = &j.item;
            let (k, g1) = &metrics[*ti];
            let fail = |message: String| RecordFailure {
                label: j.label.clone(),
                message,
            };
            let g1 = g1.as_ref().map_err(|e| fail(e.clone()))?;
            let spec = RaySpec {
                x: ray.x.clone(),
                v_proj: ray.v_proj.clone(),
            };
            let d = scattering_deviation(&g0, g1, &s.entry, &spec, &cfg).map_err(|e| fail(e.to_string()))?;
            Ok(Record::new(&j.label)
                .input("transform", transform_name(*k))
                .input("x", &ray.x)
                .input("v_proj", &ray.v_proj)
                .max("invariance", d, ctx.tol("invariance")))
        })
        .collect())
}

pub fn conformal_reparam(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    let g = &s.metric;
    let opts = &ctx.config.experiment;
    let bump = models::spatial_lift(&models::gaussian(0.6, &s.interior_point([0.0, 0.2]), 0.5));
    let bg = bump.clone();
    let gaussian = ConformalFactor::new(
        ScalarField::new(move |x| 1.0 + bump.eval(x)).with_gradient(move |x| bg.gradient(x)),
        &[],
    )
    .map_err(|e| Fault::Scenario(e.to_string()))?;
    let constant = |c: f64| ConformalFactor::constant(c, 3).map_err(|e| Fault::Scenario(e.to_string()));
    let factors = [
        ("gaussian", gaussian),
        ("constant 4", constant(4.0)?),
        ("constant 1", constant(1.0)?),
    ];
    let mut items = Vec::new();
    for r in s.rays() {
        for (fi, (name, _)) in factors.iter().enumerate() {
            items.push((format!("{name} {}", r.label), (fi, r.clone())));
        }
    }
    let js = jobs(items);
    let len = opts.flow_length;
    Ok(fan_out(&js, |label, (fi, ray)| {
        let (name, c) = &factors[*fi];
        let full = lightlike_completion(g, &s.entry, &ray.x, &ray.v_proj, -1.0)?;
        let state = HamiltonianState {
            x: ray.x.clone(),
            xi: g.eval(&ray.x) * full,
        };
        let rep = conformal_reparam_check(g, c, &state, len, opts.flow_step)?;
        let mut r = Record::new(label)
            .input("factor", *name)
            .input("x", &ray.x)
            .input("xi", &state.xi)
            .output("alpha_end", rep.alpha_end)
            .max("alpha_not_monotone", if rep.alpha_monotone { 0.0 } else { 1.0 }, 0.0)
            .max("hamiltonian", rep.h_drift, ctx.tol("hamiltonian"));
        r = match *fi {
            0 => r.max("reparam_gaussian", rep.max_deviation, ctx.tol("reparam_gaussian")),
            1 => r
                .max("reparam_constant", rep.max_deviation, ctx.tol("reparam_constant"))
                .max(
                    "alpha_rate",
                    (rep.alpha_end - len / 4.0).abs(),
                    ctx.tol("reparam_constant"),
                ),
            _ => r.max("reparam_identity", rep.max_deviation, ctx.tol("reparam_identity")),
        };
        Ok(r)
    }))
}

/// The scenario's `(h, omega)` in collar coordinates `(theta, rho)`,
/// `x = (1 - rho)(cos theta, sin theta)`, with `d phi0` added to `omega`.
fn collar_system(s: &Scenario, gauge: &ScalarField) -> MagneticSystem {
    fn embed(u: &Vector) -> (Vector, Matrix) {
        let (sn, cs) = u[0].sin_cos();
        let r = 1.0 - u[1];
        let p = v(&[r * cs, r * sn]);
        let j = Matrix::from_row_slice(2, 2, &[-r * sn, -cs, r * cs, -sn]);
        (p, j)
    }
    let h = s.stationary.base().clone();
    let base = MetricField::new(2, Signature::Riemannian, move |u| {
        let (p, j) = embed(u);
        j.transpose() * h.eval(&p) * j
    })
    .with_domain(|u| u[1] < 1.0);
    let (w, gauge) = (s.stationary.omega().clone(), gauge.clone());
    let omega = CovectorField::new(2, move |u| {
        let (p, j) = embed(u);
        j.transpose() * w.eval(&p) + gauge.gradient(u)
    });
    MagneticSystem::new(base, omega)
}

pub fn normal_coords(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let s = ctx.scenario;
    s.require_unit_disk("normal-coords")?;
    let c = &s.grids.collar;
    let phi0 = models::normal_gauge_term(ctx.config.experiment.normal_gauge);
    let mag = collar_system(s, &phi0);
    let ng = boundary_normal_coords(&mag, 1);
    let omega = s.stationary.omega().clone();
    let mut items = Vec::new();
    for i in 0..c.tangential {
        for j in 0..c.normal {
            let rho = if c.normal == 1 {
                0.0
            } else {
                c.depth * j as f64 / (c.normal - 1) as f64
            };
            let theta = 2.0 * PI * i as f64 / c.tangential as f64;
            items.push((format!("collar {i}.{j}"), v(&[theta, rho])));
        }
    }
    let js = jobs(items);
    let tol = ctx.tol("normal_component");
    Ok(fan_out(&js, |label, u| {
        let mut r = Record::new(label)
            .input("theta_rho", u)
            .output("phi", ng.phi.eval(u))
            .max("normal_component", ng.normal_component(u).abs(), tol);
        // With a purely tangential omega the potential is exactly phi0.
        let p = (1.0 - u[1]) * v(&[u[0].cos(), u[0].sin()]);
        if omega.eval(&p).dot(&p).abs() <= 1e-14 {
            r = r.max("phi_oracle", (ng.phi.eval(u) - phi0.eval(u)).abs(), tol);
        }
        Ok(r)
    }))
}

/// Observed orders of the RK4 endpoint error and of the central difference
/// in `linearize_r`.
pub fn convergence(ctx: &Context<'_>) -> Result<Vec<Outcome>, Fault> {
    let g = models::perturbed_product(0.3);
    let x0 = v(&[0.0, -0.7, 0.1]);
    let v0 = v(&[1.2, 0.9, 0.3]);
    let end = |h: f64| -> scatterlab::Result<Vector> {
        let cfg = scatterlab::geometry::IntegrationConfig::with_step(h);
        Ok(integrate_geodesic(&g, &x0, &v0, Stop::MaxSigma(1.6), &cfg)?
            .last()
            .x
            .clone())
    };
    let rk4 = (|| -> scatterlab::Result<Record> {
        let reference = end(1e-3)?;
        let steps = [0.2, 0.1, 0.05];
        let errs = steps
            .iter()
            .map(|&h| Ok((end(h)? - &reference).norm()))
            .collect::<scatterlab::Result<Vec<_>>>()?;
        let order = errs
            .windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .fold(f64::INFINITY, f64::min);
        Ok(Record::new("rk4 endpoint")
            .input("steps", Vector::from_vec(steps.to_vec()))
            .output("errors", Vector::from_vec(errs))
            .min("rk4_order", order, ctx.tol("rk4_order")))
    })()
    .map_err(|e| RecordFailure {
        label: "rk4 endpoint".into(),
        message: e.to_string(),
    });
    let fam = family(ctx, FamilyKind::Gaussian);
    let cfg = ctx.config.shooting();
    let pairs = sigma_pairs(ctx);
    let mut out = vec![rk4];
    let taus = [8e-2, 4e-2, 2e-2];
    let js = jobs(pairs.into_iter().take(4).map(|p| match p {
        Ok(r) => (r.label.clone(), Ok(pair_of(&r))),
        Err(f) => (f.label.clone(), Err(f.message)),
    }));
    out.extend(
        js.par_iter()
            .map(|j| {
                let fail = |message: String| RecordFailure {
                    label: format!("fd {}", j.label),
                    message,
                };
                let (x, y) = j.item.as_ref().map_err(|m| fail(m.clone()))?;
                let errs = taus
                    .iter()
                    .map(|&t| linearize_r(&fam, x, y, t, ctx.config.experiment.sigma_tol, &cfg).map(|r| r.abs_error()))
                    .collect::<scatterlab::Result<Vec<_>>>()
                    .map_err(|e| fail(e.to_string()))?;
                let order = errs
                    .windows(2)
                    .map(|w| (w[0] / w[1]).log2())
                    .fold(f64::INFINITY, f64::min);
                Ok(Record::new(format!("fd {}", j.label))
                    .input("x", x)
                    .input("y", y)
                    .input("tau_steps", Vector::from_vec(taus.to_vec()))
                    .output("errors", Vector::from_vec(errs))
                    .min("fd_order", order, ctx.tol("fd_order")))
            })
            .collect::<Vec<_>>(),
    );
    Ok(out)
}
