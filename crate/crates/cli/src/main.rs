use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::Parser;
use scatterlab_cli::runner::{numerical_fault, run, Command};
use scatterlab_cli::{Config, Fault};

/// Numerical experiments on Lorentzian scattering rigidity.
#[derive(Parser)]
#[command(name = "scatterlab", version)]
struct Args {
    command: Command,
    /// JSON scenario configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to rayon's choice.
    #[arg(long)]
    threads: Option<usize>,
}

fn exit(code: u8) -> ExitCode {
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match Config::load(&args.config) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("{f}");
            return exit(f.exit_code());
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("{}", Fault::Parse("--threads must be positive".into()));
            return exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot start thread pool: {e}");
            return exit(3);
        }
    }
    let report = match run(args.command, &cfg, args.seed) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("{f}");
            return exit(f.exit_code());
        }
    };
    let written = report
        .write_json(args.out.as_deref())
        .context("writing report")
        .and_then(|_| match &cfg.csv {
            Some(p) => report.write_csv(p).with_context(|| format!("writing {}", p.display())),
            None => Ok(()),
        });
    if let Err(e) = written {
        eprintln!("{e:#}");
        return exit(3);
    }
    if let Some(f) = numerical_fault(&report) {
        eprintln!("{f}");
        return exit(f.exit_code());
    }
    if report.summary.pass {
        exit(0)
    } else {
        for r in report.records.iter().filter(|r| !r.pass) {
            for res in r.residuals.iter().filter(|x| !x.pass) {
                eprintln!(
                    "record {} ({}): {} = {:e} outside {:e}",
                    r.index, r.label, res.name, res.value, res.tolerance
                );
            }
        }
        exit(1)
    }
}
