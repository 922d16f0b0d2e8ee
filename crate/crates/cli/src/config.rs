//! Run configuration, read from a JSON file.
//!
//! Every field except `scenario.name` and `scenario.kind` has a default, so
//! `{"scenario": {"name": "disk", "kind": "product_disk"}}` is a complete config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use scatterlab::connect::{MichelConfig, ShootingConfig};
use scatterlab::geometry::IntegrationConfig;
use scatterlab::scattering::ScatterConfig;
use serde::{Deserialize, Serialize};

use crate::error::Fault;

pub const DEFAULT_SEED: u64 = 0x5ca7_7e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioDescriptor,
    #[serde(default)]
    pub integration: IntegrationSettings,
    #[serde(default)]
    pub shooting: ShootingSettings,
    #[serde(default)]
    pub experiment: ExperimentOptions,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Optional flat CSV of all record values.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    MinkowskiSlab,
    ProductDisk,
    PerturbedProduct,
    StationaryRot,
    Custom,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::MinkowskiSlab => "minkowski_slab",
            ScenarioKind::ProductDisk => "product_disk",
            ScenarioKind::PerturbedProduct => "perturbed_product",
            ScenarioKind::StationaryRot => "stationary_rot",
            ScenarioKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub rays: RayGrid,
    pub pairs: PairGrid,
    pub sweep: SweepGrid,
    pub collar: CollarGrid,
}

/// Entry rays: `count` base points times every tangential slope in `slopes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RayGrid {
    pub count: usize,
    pub slopes: Vec<f64>,
}

impl Default for RayGrid {
    fn default() -> Self {
        Self {
            count: 10,
            slopes: vec![-0.8, -0.4, 0.0, 0.35, 0.7],
        }
    }
}

/// Boundary pairs: `count` base points, each paired with the point
/// `separations[i % len]` further along the boundary and every time offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairGrid {
    pub count: usize,
    pub separations: Vec<f64>,
    pub time_offsets: Vec<f64>,
}

impl Default for PairGrid {
    fn default() -> Self {
        Self {
            count: 20,
            separations: vec![0.9, 1.35, 1.8, 2.25],
            time_offsets: vec![0.3, 0.9, 1.5, 2.1],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub lines: usize,
    pub samples: usize,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            lines: 20,
            samples: 40,
            dt_min: 0.05,
            dt_max: 2.55,
        }
    }
}

/// `tangential x normal` points in the collar `0 <= rho <= depth`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollarGrid {
    pub tangential: usize,
    pub normal: usize,
    pub depth: f64,
}

impl Default for CollarGrid {
    fn default() -> Self {
        Self {
            tangential: 24,
            normal: 11,
            depth: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationSettings {
    pub step: f64,
    pub max_steps: usize,
    pub sigma_max: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        let d = ScatterConfig::default();
        Self {
            step: d.integration.step,
            max_steps: d.integration.max_steps,
            sigma_max: d.sigma_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingSettings {
    pub tol: f64,
    pub polish_tol: f64,
    pub max_iter: usize,
    pub max_condition: f64,
    pub fd_rel: f64,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        let d = ShootingConfig::default();
        Self {
            tol: d.tol,
            polish_tol: d.polish_tol,
            max_iter: d.max_iter,
            max_condition: d.max_condition,
            fd_rel: d.fd_rel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `g + tau |dx|^2`.
    SpatialScale,
    /// `g + tau q |dx|^2` with a Gaussian `q`.
    Gaussian,
    /// `(1 + tau c) g`.
    Conformal,
    /// `g + tau d^s v` with `v` vanishing on the boundary.
    Potential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Twist,
    TimeShift,
    Conformal,
    Composite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentOptions {
    /// Tangential finite-difference step of the Michel checks.
    pub fd_step: f64,
    /// Step of the central difference in `tau`.
    pub tau_step: f64,
    pub sigma_tol: f64,
    pub families: Vec<FamilyKind>,
    pub transforms: Vec<TransformKind>,
    /// Number of random perturbation triples in `lin-equivalence`.
    pub perturbations: usize,
    /// Flow length of the Hamiltonian checks.
    pub flow_length: f64,
    pub flow_step: f64,
    /// Amplitude of the gauge term added before the normal-coordinate check.
    pub normal_gauge: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        let m = MichelConfig::default();
        Self {
            fd_step: m.fd_step,
            tau_step: 1e-4,
            sigma_tol: m.sigma_tol,
            families: vec![FamilyKind::SpatialScale],
            transforms: vec![
                TransformKind::Twist,
                TransformKind::TimeShift,
                TransformKind::Conformal,
                TransformKind::Composite,
            ],
            perturbations: 1,
            flow_length: 1.2,
            flow_step: 1e-3,
            normal_gauge: 0.3,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Fault> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Fault::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Fault> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Fault::Parse(format!("config: {e}")))?;
        cfg.check_numbers()?;
        Ok(cfg)
    }

    /// A config for `kind` with every default.
    pub fn for_kind(name: &str, kind: ScenarioKind) -> Self {
        Self {
            scenario: ScenarioDescriptor {
                name: name.to_string(),
                kind,
                parameters: BTreeMap::new(),
                grids: Grids::default(),
                tolerances: BTreeMap::new(),
            },
            integration: IntegrationSettings::default(),
            shooting: ShootingSettings::default(),
            experiment: ExperimentOptions::default(),
            seed: None,
            csv: None,
        }
    }

    fn check_numbers(&self) -> Result<(), Fault> {
        let i = &self.integration;
        let s = &self.shooting;
        let e = &self.experiment;
        let positive = [
            ("integration.step", i.step),
            ("integration.sigma_max", i.sigma_max),
            ("shooting.tol", s.tol),
            ("shooting.polish_tol", s.polish_tol),
            ("shooting.max_condition", s.max_condition),
            ("shooting.fd_rel", s.fd_rel),
            ("experiment.fd_step", e.fd_step),
            ("experiment.tau_step", e.tau_step),
            ("experiment.sigma_tol", e.sigma_tol),
            ("experiment.flow_length", e.flow_length),
            ("experiment.flow_step", e.flow_step),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Fault::Parse(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if i.max_steps == 0 || s.max_iter == 0 {
            return Err(Fault::Parse("max_steps and max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn integration(&self) -> IntegrationConfig {
        IntegrationConfig {
            step: self.integration.step,
            max_steps: self.integration.max_steps,
        }
    }

    pub fn scatter(&self) -> ScatterConfig {
        ScatterConfig {
            integration: self.integration(),
            sigma_max: self.integration.sigma_max,
        }
    }

    pub fn shooting(&self) -> ShootingConfig {
        let s = &self.shooting;
        ShootingConfig {
            integration: self.integration(),
            tol: s.tol,
            polish_tol: s.polish_tol,
            max_iter: s.max_iter,
            max_condition: s.max_condition,
            fd_rel: s.fd_rel,
        }
    }

    pub fn michel(&self) -> MichelConfig {
        MichelConfig {
            shooting: self.shooting(),
            scatter: self.scatter(),
            fd_step: self.experiment.fd_step,
            sigma_tol: self.experiment.sigma_tol,
        }
    }
}
