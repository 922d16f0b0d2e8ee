//! Command dispatch and report assembly.

use std::collections::BTreeMap;
use std::time::Instant;

use clap::ValueEnum;

use crate::config::{Config, FamilyKind, ScenarioKind, DEFAULT_SEED};
use crate::error::Fault;
use crate::experiments::{self as ex, Context, Outcome};
use crate::report::{FailureInfo, Record, Report, Residual};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    #[value(name = "scatter")]
    Scatter,
    #[value(name = "connect")]
    Connect,
    #[value(name = "defining-r-sweep")]
    DefiningRSweep,
    #[value(name = "michel")]
    Michel,
    #[value(name = "verify-thm1")]
    VerifyThm1,
    #[value(name = "kernel-tests")]
    KernelTests,
    #[value(name = "verify-thmmag")]
    VerifyThmMag,
    #[value(name = "magnetic-michel")]
    MagneticMichel,
    #[value(name = "lin-equivalence")]
    LinEquivalence,
    #[value(name = "gauge-invariance")]
    GaugeInvariance,
    #[value(name = "conformal-reparam")]
    ConformalReparam,
    #[value(name = "normal-coords")]
    NormalCoords,
    #[value(name = "all")]
    All,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Scatter => "scatter",
            Command::Connect => "connect",
            Command::DefiningRSweep => "defining-r-sweep",
            Command::Michel => "michel",
            Command::VerifyThm1 => "verify-thm1",
            Command::KernelTests => "kernel-tests",
            Command::VerifyThmMag => "verify-thmmag",
            Command::MagneticMichel => "magnetic-michel",
            Command::LinEquivalence => "lin-equivalence",
            Command::GaugeInvariance => "gauge-invariance",
            Command::ConformalReparam => "conformal-reparam",
            Command::NormalCoords => "normal-coords",
            Command::All => "all",
        }
    }
}

/// Seed precedence: command line, then config, then [`DEFAULT_SEED`].
pub fn resolve_seed(cfg: &Config, seed_override: Option<u64>) -> u64 {
    seed_override.or(cfg.seed).unwrap_or(DEFAULT_SEED)
}

/// Runs `command`. Numerical failures are reported inside the returned
/// report; only configuration problems are returned as errors.
pub fn run(command: Command, cfg: &Config, seed_override: Option<u64>) -> Result<Report, Fault> {
    let seed = resolve_seed(cfg, seed_override);
    let start = Instant::now();
    let mut report = match command {
        Command::All => run_all(cfg, seed)?,
        c => run_single(Job::Command(c), cfg, seed)?,
    };
    report.summary.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// The numerical failure recorded in `report`, if any.
pub fn numerical_fault(report: &Report) -> Option<Fault> {
    report.failure.as_ref().map(|f| Fault::Numerical {
        record: f.record,
        label: f.label.clone(),
        message: f.message.clone(),
    })
}

#[derive(Clone, Copy)]
enum Job {
    Command(Command),
    Convergence,
}

impl Job {
    fn name(self) -> &'static str {
        match self {
            Job::Command(c) => c.as_str(),
            Job::Convergence => "convergence",
        }
    }
}

fn run_single(job: Job, cfg: &Config, seed: u64) -> Result<Report, Fault> {
    let scenario = Scenario::build(cfg)?;
    let ctx = Context {
        scenario: &scenario,
        config: cfg,
        seed,
    };
    let outcomes = match job {
        Job::Command(c) => match c {
            Command::Scatter => ex::scatter_rays(&ctx),
            Command::Connect => ex::connect(&ctx),
            Command::DefiningRSweep => ex::defining_r_sweep(&ctx),
            Command::Michel => ex::michel(&ctx),
            Command::VerifyThm1 => ex::verify_thm1(&ctx),
            Command::KernelTests => ex::kernel_tests(&ctx),
            Command::VerifyThmMag => ex::verify_thmmag(&ctx),
            Command::MagneticMichel => ex::magnetic_michel_pairs(&ctx),
            Command::LinEquivalence => ex::lin_equivalence(&ctx),
            Command::GaugeInvariance => ex::gauge_invariance(&ctx),
            Command::ConformalReparam => ex::conformal_reparam(&ctx),
            Command::NormalCoords => ex::normal_coords(&ctx),
            Command::All => unreachable!("the suite is not a single experiment"),
        },
        Job::Convergence => ex::convergence(&ctx),
    }?;
    Ok(collect(job.name(), &scenario, seed, outcomes))
}

/// Keeps records up to the first failure, which becomes the report's failure.
fn collect(experiment: &str, s: &Scenario, seed: u64, outcomes: Vec<Outcome>) -> Report {
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => {
                failure = Some(FailureInfo {
                    record: records.len(),
                    label: f.label,
                    message: f.message,
                });
                break;
            }
        }
    }
    Report::assemble(
        experiment,
        &s.name,
        s.kind.as_str(),
        seed,
        s.parameters.clone(),
        records,
        failure,
        0.0,
    )
}

fn canonical(cfg: &Config, kind: ScenarioKind) -> Config {
    let mut c = cfg.clone();
    c.scenario.name = kind.as_str().to_string();
    c.scenario.kind = kind;
    c.scenario.parameters = match kind {
        ScenarioKind::Custom => BTreeMap::from([
            ("B".to_string(), 0.2),
            ("k".to_string(), 0.3),
            ("lambda_bump".to_string(), 0.3),
            ("h_bump".to_string(), 0.1),
        ]),
        _ => BTreeMap::new(),
    };
    c
}

struct Criterion {
    name: &'static str,
    runs: &'static [(ScenarioKind, Job)],
    /// Residual names kept from the runs; empty keeps all.
    keep: &'static [&'static str],
}

use ScenarioKind::{Custom, MinkowskiSlab, PerturbedProduct, ProductDisk, StationaryRot};

const CRITERIA: &[Criterion] = &[
    Criterion {
        name: "conservation",
        runs: &[
            (PerturbedProduct, Job::Command(Command::Scatter)),
            (StationaryRot, Job::Command(Command::Scatter)),
            (Custom, Job::Command(Command::Scatter)),
            (ProductDisk, Job::Command(Command::ConformalReparam)),
        ],
        keep: &["speed_drift", "magnetic_speed_drift", "hamiltonian"],
    },
    Criterion {
        name: "trichotomy",
        runs: &[
            (MinkowskiSlab, Job::Command(Command::Connect)),
            (ProductDisk, Job::Command(Command::Connect)),
            (ProductDisk, Job::Command(Command::DefiningRSweep)),
            (StationaryRot, Job::Command(Command::DefiningRSweep)),
        ],
        keep: &[],
    },
    Criterion {
        name: "michel",
        runs: &[
            (ProductDisk, Job::Command(Command::Michel)),
            (StationaryRot, Job::Command(Command::Michel)),
        ],
        keep: &[],
    },
    Criterion {
        name: "linearization",
        runs: &[(ProductDisk, Job::Command(Command::VerifyThm1))],
        keep: &[],
    },
    Criterion {
        name: "kernel",
        runs: &[
            (ProductDisk, Job::Command(Command::KernelTests)),
            (PerturbedProduct, Job::Command(Command::KernelTests)),
        ],
        keep: &[],
    },
    Criterion {
        name: "reduction",
        runs: &[(StationaryRot, Job::Command(Command::VerifyThmMag))],
        keep: &["reduction_ode", "k_drift", "speed_identity"],
    },
    Criterion {
        name: "magnetic scattering",
        runs: &[
            (StationaryRot, Job::Command(Command::VerifyThmMag)),
            (Custom, Job::Command(Command::VerifyThmMag)),
        ],
        keep: &[
            "exit_point",
            "exit_direction",
            "length",
            "action",
            "exit_time_component",
            "round_trip",
        ],
    },
    Criterion {
        name: "magnetic michel",
        runs: &[
            (StationaryRot, Job::Command(Command::MagneticMichel)),
            (Custom, Job::Command(Command::MagneticMichel)),
        ],
        keep: &[],
    },
    Criterion {
        name: "linearization equivalence",
        runs: &[(StationaryRot, Job::Command(Command::LinEquivalence))],
        keep: &[],
    },
    Criterion {
        name: "gauge invariance",
        runs: &[(StationaryRot, Job::Command(Command::GaugeInvariance))],
        keep: &[],
    },
    Criterion {
        name: "conformal reparametrization",
        runs: &[(PerturbedProduct, Job::Command(Command::ConformalReparam))],
        keep: &[],
    },
    Criterion {
        name: "normal coordinates",
        runs: &[
            (StationaryRot, Job::Command(Command::NormalCoords)),
            (Custom, Job::Command(Command::NormalCoords)),
        ],
        keep: &[],
    },
    Criterion {
        name: "convergence orders",
        runs: &[(ProductDisk, Job::Convergence)],
        keep: &[],
    },
];

/// One record per acceptance criterion, each holding the worst residual of
/// every contributing run on the canonical scenarios.
fn run_all(cfg: &Config, seed: u64) -> Result<Report, Fault> {
    let mut cache: Vec<((ScenarioKind, &'static str), Report)> = Vec::new();
    let mut records = Vec::new();
    let mut failure = None;
    for (n, crit) in CRITERIA.iter().enumerate() {
        let mut rec = Record::new(format!("criterion {}: {}", n + 1, crit.name));
        for &(kind, job) in crit.runs {
            let key = (kind, job.name());
            let sub = match cache.iter().find(|(k, _)| *k == key) {
                Some((_, r)) => r.clone(),
                None => {
                    let mut c = canonical(cfg, kind);
                    if matches!(job, Job::Command(Command::VerifyThm1)) {
                        c.experiment.families = vec![
                            FamilyKind::SpatialScale,
                            FamilyKind::Gaussian,
                            FamilyKind::Conformal,
                            FamilyKind::Potential,
                        ];
                    }
                    let r = run_single(job, &c, seed)?;
                    cache.push((key, r.clone()));
                    r
                }
            };
            let prefix = format!("{}/{}", kind.as_str(), job.name());
            rec = rec.output(&format!("{prefix}/records"), sub.records.len());
            for res in sub.residual_maxima() {
                if crit.keep.is_empty() || crit.keep.contains(&res.name.as_str()) {
                    rec = rec.residual(Residual {
                        name: format!("{prefix}/{}", res.name),
                        ..res
                    });
                }
            }
            if let Some(f) = &sub.failure {
                rec = rec
                    .output(
                        &format!("{prefix}/failure"),
                        format!("record {} ({}): {}", f.record, f.label, f.message),
                    )
                    .max(&format!("{prefix}/computed"), 1.0, 0.0);
                failure.get_or_insert(FailureInfo {
                    record: n,
                    label: format!("{prefix} {}", f.label),
                    message: f.message.clone(),
                });
            }
        }
        records.push(rec);
    }
    Ok(Report::assemble(
        "all",
        "canonical",
        "suite",
        seed,
        BTreeMap::new(),
        records,
        failure,
        0.0,
    ))
}
