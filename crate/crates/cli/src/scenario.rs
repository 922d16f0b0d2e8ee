//! Scenario registry: turns a descriptor into metrics, boundaries and grids.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use scatterlab::geometry::{BoundaryHypersurface, SurfaceType};
use scatterlab::models;
use scatterlab::stationary::{conformal_normalize, spacetime, StationaryMetric};
use scatterlab::{MetricField, ScalarField, Vector};

use crate::config::{Config, Grids, ScenarioKind};
use crate::error::{scenario_error, Fault};

/// `(key, default, min, max)` of every parameter a kind accepts.
fn parameter_table(kind: ScenarioKind) -> &'static [(&'static str, f64, f64, f64)] {
    match kind {
        ScenarioKind::MinkowskiSlab => &[("width", 1.0, 0.1, 10.0)],
        ScenarioKind::ProductDisk => &[("radius", 1.0, 0.25, 4.0)],
        ScenarioKind::PerturbedProduct => &[("amplitude", 0.1, 0.0, 0.5)],
        ScenarioKind::StationaryRot => &[("B", 0.2, -1.0, 1.0)],
        ScenarioKind::Custom => &[
            ("B", 0.2, -1.0, 1.0),
            ("k", 0.0, -1.0, 1.0),
            ("lambda_bump", 0.0, 0.0, 1.0),
            ("h_bump", 0.0, 0.0, 0.5),
        ],
    }
}

/// Named tolerances and their defaults.
const TOLERANCES: &[(&str, f64)] = &[
    ("speed_drift", 1e-8),
    ("hamiltonian", 1e-9),
    ("closed_form", 1e-8),
    ("shooting", 1e-10),
    ("michel", 1e-5),
    ("thm1_rel", 1e-3),
    ("gauge_family", 1e-6),
    ("kernel_potential", 1e-8),
    ("kernel_conformal", 1e-12),
    ("ftc", 1e-8),
    ("reduction_ode", 1e-6),
    ("k_drift", 1e-7),
    ("speed_identity", 1e-8),
    ("thmmag", 1e-6),
    ("round_trip", 1e-5),
    ("magnetic_michel", 1e-5),
    ("lin_equivalence", 1e-6),
    ("invariance", 1e-6),
    ("reparam_gaussian", 1e-6),
    ("reparam_constant", 1e-9),
    ("reparam_identity", 1e-10),
    ("normal_component", 1e-8),
    ("rk4_order", 3.7),
    ("fd_order", 1.8),
];

#[derive(Debug, Clone)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Tolerances {
    fn resolve(overrides: &BTreeMap<String, f64>) -> Result<Self, Fault> {
        let mut map: BTreeMap<String, f64> = TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !map.contains_key(k) {
                return Err(scenario_error(format!("unknown tolerance '{k}'")));
            }
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(scenario_error(format!(
                    "tolerance '{k}' must be finite and nonnegative"
                )));
            }
            map.insert(k.clone(), *v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

/// An entry ray: a boundary point and a projected direction.
#[derive(Debug, Clone)]
pub struct Ray {
    pub label: String,
    pub x: Vector,
    pub v_proj: Vector,
}

/// A pair of base points on the spatial boundary.
#[derive(Debug, Clone)]
pub struct BasePair {
    pub label: String,
    pub x: Vector,
    pub y: Vector,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub parameters: BTreeMap<String, f64>,
    pub metric: MetricField,
    /// The `(lambda, omega, h)` form of the metric.
    pub stationary: StationaryMetric,
    pub entry: BoundaryHypersurface,
    pub exit: BoundaryHypersurface,
    pub grids: Grids,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn build(cfg: &Config) -> Result<Self, Fault> {
        let d = &cfg.scenario;
        if d.name.trim().is_empty() {
            return Err(scenario_error("scenario name is empty"));
        }
        let table = parameter_table(d.kind);
        for key in d.parameters.keys() {
            if !table.iter().any(|(k, ..)| k == key) {
                return Err(scenario_error(format!(
                    "parameter '{key}' is not accepted by {}",
                    d.kind.as_str()
                )));
            }
        }
        let mut parameters = BTreeMap::new();
        for &(key, default, lo, hi) in table {
            let value = d.parameters.get(key).copied().unwrap_or(default);
            if !(lo..=hi).contains(&value) {
                return Err(scenario_error(format!(
                    "parameter {key} = {value} is outside [{lo}, {hi}]"
                )));
            }
            parameters.insert(key.to_string(), value);
        }
        check_grids(&d.grids, d.kind)?;
        let p = |k: &str| parameters[k];
        let stationary = match d.kind {
            ScenarioKind::MinkowskiSlab | ScenarioKind::ProductDisk => flat_stationary(models::euclidean(2)),
            ScenarioKind::PerturbedProduct => flat_stationary(models::conformal_bump_metric(p("amplitude"))),
            ScenarioKind::StationaryRot => models::stationary_rot(p("B")),
            ScenarioKind::Custom => {
                let a = p("lambda_bump");
                let lambda = ScalarField::new(move |x| 1.0 + a * (-x.norm_squared()).exp())
                    .with_gradient(move |x| x * (-2.0 * a * (-x.norm_squared()).exp()))
                    .positive();
                StationaryMetric::new(
                    lambda,
                    models::nonuniform_rotation_form(p("B"), p("k")),
                    models::conformal_bump_metric(p("h_bump")),
                )
            }
        };
        let metric = match d.kind {
            ScenarioKind::MinkowskiSlab => models::minkowski(3),
            ScenarioKind::ProductDisk => models::product(models::euclidean(2)),
            ScenarioKind::PerturbedProduct => models::perturbed_product(p("amplitude")),
            _ => stationary.assembled(),
        };
        let (entry, exit) = match d.kind {
            ScenarioKind::MinkowskiSlab => (
                BoundaryHypersurface::plane(3, 1, 0.0, -1.0, SurfaceType::Timelike),
                BoundaryHypersurface::plane(3, 1, p("width"), 1.0, SurfaceType::Timelike),
            ),
            ScenarioKind::ProductDisk => {
                let c = BoundaryHypersurface::cylinder(p("radius"));
                (c.clone(), c)
            }
            _ => {
                let c = BoundaryHypersurface::cylinder(1.0);
                (c.clone(), c)
            }
        };
        Ok(Self {
            name: d.name.clone(),
            kind: d.kind,
            tolerances: Tolerances::resolve(&d.tolerances)?,
            parameters,
            metric,
            stationary,
            entry,
            exit,
            grids: d.grids.clone(),
        })
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name)
    }

    pub fn is_slab(&self) -> bool {
        self.kind == ScenarioKind::MinkowskiSlab
    }

    /// Radius of the spatial disk; `None` for the slab.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::MinkowskiSlab => None,
            ScenarioKind::ProductDisk => Some(self.parameters["radius"]),
            _ => Some(1.0),
        }
    }

    /// Fails unless the spatial domain is the unit disk.
    pub fn require_unit_disk(&self, command: &str) -> Result<(), Fault> {
        if self.radius() == Some(1.0) {
            return Ok(());
        }
        Err(scenario_error(format!(
            "{command} needs a unit-disk scenario, {} is not one",
            self.name
        )))
    }

    /// The stationary form with `lambda = 1`, which has the same scattering
    /// relation up to positive rescaling.
    pub fn normalized_stationary(&self) -> StationaryMetric {
        conformal_normalize(&self.stationary)
    }

    fn boundary_point(&self, s: f64) -> Vector {
        match self.radius() {
            Some(r) => Vector::from_vec(vec![r * s.cos(), r * s.sin()]),
            None => Vector::from_vec(vec![0.0, s]),
        }
    }

    /// Boundary parameter of the `i`-th of `n` grid points.
    fn grid_param(&self, i: usize, n: usize, offset: f64) -> f64 {
        if self.is_slab() {
            -1.0 + 2.0 * (i as f64 + 0.5) / n as f64
        } else {
            offset + 2.0 * PI * i as f64 / n as f64
        }
    }

    pub fn rays(&self) -> Vec<Ray> {
        let g = &self.grids.rays;
        let mut out = Vec::new();
        for i in 0..g.count {
            let s = self.grid_param(i, g.count, 0.3);
            for (j, &a) in g.slopes.iter().enumerate() {
                let (x, v_proj) = match self.radius() {
                    Some(r) => (
                        Vector::from_vec(vec![0.0, r * s.cos(), r * s.sin()]),
                        Vector::from_vec(vec![1.0, -a * s.sin(), a * s.cos()]),
                    ),
                    None => (Vector::from_vec(vec![0.0, 0.0, s]), Vector::from_vec(vec![1.0, 0.0, a])),
                };
                out.push(Ray {
                    label: format!("ray {i}.{j}"),
                    x,
                    v_proj,
                });
            }
        }
        out
    }

    /// Base pairs `(x, y)`, with `x` on the entry boundary and `y` on the exit.
    pub fn base_pairs(&self, count: usize) -> Vec<BasePair> {
        let g = &self.grids.pairs;
        (0..count)
            .map(|i| {
                let s = self.grid_param(i, count, 0.2);
                let sep = g.separations[i % g.separations.len()];
                let (x, y) = match self.radius() {
                    Some(_) => (self.boundary_point(s), self.boundary_point(s + sep)),
                    None => {
                        let w = self.parameters["width"];
                        (
                            Vector::from_vec(vec![0.0, s]),
                            Vector::from_vec(vec![w, s + sep - 1.35]),
                        )
                    }
                };
                BasePair {
                    label: format!("pair {i}"),
                    x,
                    y,
                }
            })
            .collect()
    }

    /// Spacetime pairs `((0, x), (dt, y))` over base pairs and time offsets.
    pub fn spacetime_pairs(&self) -> Vec<(String, Vector, Vector)> {
        let mut out = Vec::new();
        for bp in self.base_pairs(self.grids.pairs.count) {
            for (j, &dt) in self.grids.pairs.time_offsets.iter().enumerate() {
                out.push((format!("{}.{j}", bp.label), spacetime(0.0, &bp.x), spacetime(dt, &bp.y)));
            }
        }
        out
    }

    /// A base function vanishing to third order on the spatial boundary,
    /// positive inside.
    pub fn interior_bump(&self) -> ScalarField {
        match self.radius() {
            Some(r) => {
                let r2 = r * r;
                ScalarField::new(move |x| {
                    let q = 1.0 - x.norm_squared() / r2;
                    if q > 0.0 {
                        q.powi(4)
                    } else {
                        0.0
                    }
                })
                .with_gradient(move |x| {
                    let q = 1.0 - x.norm_squared() / r2;
                    if q > 0.0 {
                        x * (-8.0 * q.powi(3) / r2)
                    } else {
                        Vector::zeros(2)
                    }
                })
            }
            None => {
                let w = self.parameters["width"];
                ScalarField::new(move |x| {
                    let q = 4.0 * x[0] * (w - x[0]) / (w * w);
                    if q > 0.0 {
                        q.powi(4)
                    } else {
                        0.0
                    }
                })
                .with_gradient(move |x| {
                    let q = 4.0 * x[0] * (w - x[0]) / (w * w);
                    if q > 0.0 {
                        let dq = 4.0 * (w - 2.0 * x[0]) / (w * w);
                        Vector::from_vec(vec![4.0 * q.powi(3) * dq, 0.0])
                    } else {
                        Vector::zeros(2)
                    }
                })
            }
        }
    }

    /// A point well inside the spatial domain, scaled by `s` in `[-1, 1]`.
    pub fn interior_point(&self, s: [f64; 2]) -> [f64; 2] {
        match self.radius() {
            Some(r) => [0.5 * r * s[0], 0.5 * r * s[1]],
            None => {
                let w = self.parameters["width"];
                [0.5 * w + 0.25 * w * s[0], 0.5 * s[1]]
            }
        }
    }

    /// Sample points of the spatial domain for Jacobian and positivity checks.
    pub fn samples(&self) -> Vec<Vector> {
        let mut out = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                let s = [-1.0 + 0.25 * i as f64, -1.0 + 0.25 * j as f64];
                let p = match self.radius() {
                    Some(r) if s[0] * s[0] + s[1] * s[1] < 1.0 => Some([0.96 * r * s[0], 0.96 * r * s[1]]),
                    Some(_) => None,
                    None => {
                        let w = self.parameters["width"];
                        Some([0.5 * w * (1.0 + s[0]), s[1]])
                    }
                };
                if let Some(p) = p {
                    out.push(Vector::from_vec(p.to_vec()));
                }
            }
        }
        out
    }
}

fn flat_stationary(h: MetricField) -> StationaryMetric {
    StationaryMetric::new(ScalarField::constant(1.0, 2), scatterlab::CovectorField::zero(2), h)
}

fn check_grids(g: &Grids, kind: ScenarioKind) -> Result<(), Fault> {
    if g.rays.count == 0 || g.rays.slopes.is_empty() {
        return Err(scenario_error("ray grid is empty"));
    }
    if g.rays.slopes.iter().any(|a| !(a.abs() < 1.0)) {
        return Err(scenario_error("ray slopes must lie in (-1, 1)"));
    }
    if g.pairs.count == 0 || g.pairs.separations.is_empty() || g.pairs.time_offsets.is_empty() {
        return Err(scenario_error("pair grid is empty"));
    }
    if kind != ScenarioKind::MinkowskiSlab && g.pairs.separations.iter().any(|s| !(*s > 0.0 && *s < 2.0 * PI)) {
        return Err(scenario_error("pair separations must lie in (0, 2 pi)"));
    }
    if g.pairs.time_offsets.iter().any(|t| !t.is_finite()) {
        return Err(scenario_error("time offsets must be finite"));
    }
    let s = &g.sweep;
    if s.lines == 0 || s.samples < 2 || !(s.dt_min < s.dt_max) {
        return Err(scenario_error(
            "sweep grid needs lines > 0, samples >= 2 and dt_min < dt_max",
        ));
    }
    let c = &g.collar;
    if c.tangential == 0 || c.normal == 0 || !(c.depth > 0.0 && c.depth < 1.0) {
        return Err(scenario_error("collar grid needs positive counts and depth in (0, 1)"));
    }
    Ok(())
}
