// SPDX-License-Identifier: Apache-2.0

//! `janglab`: command-line front end for the capillary Jang pipeline.

use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};
use janglab_core::mass::positivity_experiment;
use janglab_core::par::{with_jobs, Exec};
use janglab_core::pipeline::{run_pipeline, ExitCode, Failure, PipelineConfig, Run, Stage};
use janglab_core::report::{emit_report, Artifacts};
use janglab_core::Error;
use serde_json::Value;

const DEFAULT_OUT: &str = "janglab-out";

#[derive(Parser)]
#[command(name = "janglab", version, about = "Capillary Jang equation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and export its profiles.
    Gen(Common),
    /// Find r0 and export the barrier profile.
    Barrier(Common),
    /// Solve the exhaustion sequence.
    Solve(Common),
    /// Solve and run every enabled audit.
    Audit(Common),
    /// Fit the mass coefficient of the dataset.
    Mass(Common),
    /// Everything: solve, audits and mass.
    Pipeline(Common),
    /// Positivity experiment over a batch of perturbed datasets.
    Experiment(Experiment),
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config or bare dataset JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (JANGLAB_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of grid intervals.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Newton tolerance factor.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Clone)]
struct Experiment {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Dimension (ignored when --config is given).
    #[arg(long, default_value_t = 4)]
    dim: usize,
}

fn label(code: ExitCode) -> &'static str {
    match code {
        ExitCode::Ok => "ok",
        ExitCode::Io => "io",
        ExitCode::Config => "config",
        ExitCode::DecViolation => "dec-violation",
        ExitCode::Solver => "solver",
        ExitCode::Audit => "audit",
    }
}

fn out_dir(common: &Common, cfg: Option<&PipelineConfig>) -> PathBuf {
    if let Some(env) = std::env::var_os("JANGLAB_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn exec_for(jobs: usize) -> Exec {
    if jobs == 1 {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

/// Reads the config and applies flag overrides; the echo is the raw JSON
/// (or raw text when it does not parse).
fn load(common: &Common) -> (Value, Result<PipelineConfig, Error>) {
    let Some(path) = &common.config else {
        return (Value::Null, Err(Error::InvalidArgument("--config is required".into())));
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            return (Value::Null, Err(Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))))
        }
    };
    let echo = serde_json::from_str(&text).unwrap_or(Value::String(text.clone()));
    let cfg = PipelineConfig::from_json(&text).and_then(|mut c| {
        override_fields(&mut c, common);
        c.validate()?;
        Ok(c)
    });
    (echo, cfg)
}

fn override_fields(cfg: &mut PipelineConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.dataset.seed = Some(s);
    }
    if let Some(n) = common.grid_n {
        cfg.dataset.grid.intervals = n;
    }
    if let Some(t) = common.tol {
        cfg.solver.tol = t;
    }
}

fn finish(code: ExitCode, message: Option<&str>) -> ProcessExit {
    if let Some(m) = message {
        eprintln!("error[{}]: {m}", label(code));
    }
    ProcessExit::from(u8::from(code))
}

fn write_failure(dir: &std::path::Path, echo: &Value, failure: &Failure) -> ProcessExit {
    let mut art = Artifacts::default();
    let written = art
        .add_json("config.json", echo)
        .and_then(|_| art.add_json("error.json", failure))
        .and_then(|_| art.write(dir, failure.code));
    if let Err(e) = written {
        return finish(ExitCode::Io, Some(&e.to_string()));
    }
    finish(failure.code, Some(&failure.message))
}

fn config_failure(e: &Error) -> Failure {
    Failure { code: ExitCode::Config, stage: "config".into(), message: e.to_string() }
}

fn run_stage(common: &Common, stage: Stage) -> ProcessExit {
    let (echo, cfg) = load(common);
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return write_failure(&out_dir(common, None), &echo, &config_failure(&e)),
    };
    let dir = out_dir(common, Some(&cfg));
    let exec = exec_for(common.jobs);
    let run: Run = with_jobs(exec, common.jobs, || run_pipeline(&cfg, stage, exec));
    let echo = serde_json::to_value(&run.config).unwrap_or(echo);
    match emit_report(&run, &echo, &dir) {
        Ok(m) => {
            println!("{} files in {} (exit {})", m.files.len() + 1, dir.display(), u8::from(m.exit_code));
            finish(run.exit_code(), run.failure.as_ref().map(|f| f.message.as_str()))
        }
        Err(e) => finish(ExitCode::Io, Some(&e.to_string())),
    }
}

fn run_experiment(args: &Experiment) -> ProcessExit {
    let common = &args.common;
    let (template, echo) = if common.config.is_some() {
        match load(common) {
            (echo, Ok(c)) => (c, echo),
            (echo, Err(e)) => return write_failure(&out_dir(common, None), &echo, &config_failure(&e)),
        }
    } else {
        let mut c = PipelineConfig::perturbed(args.dim, common.seed.unwrap_or(1));
        override_fields(&mut c, common);
        let echo = serde_json::to_value(&c).unwrap_or(Value::Null);
        (c, echo)
    };
    let dir = out_dir(common, Some(&template));
    let n = template.dataset.n;
    let seed = template.dataset.seed.unwrap_or(1);
    let exec = exec_for(common.jobs);
    let report = match with_jobs(exec, common.jobs, || positivity_experiment(&template, n, args.count, seed, exec)) {
        Ok(r) => r,
        Err(e) => return write_failure(&dir, &echo, &config_failure(&e)),
    };
    let code = if report.passed { ExitCode::Ok } else { ExitCode::Audit };
    let mut art = Artifacts::default();
    art.add("experiment.csv", report.to_csv());
    let written = art
        .add_json("config.json", &echo)
        .and_then(|_| art.add_json("experiment.json", &report))
        .and_then(|_| art.write(&dir, code));
    if let Err(e) = written {
        return finish(ExitCode::Io, Some(&e.to_string()));
    }
    println!(
        "{}/{} eligible datasets with alpha > 0 ({} total) in {}",
        report.positive,
        report.eligible,
        report.count,
        dir.display()
    );
    finish(code, (!report.passed).then_some("an eligible dataset has alpha <= 0"))
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(c) => run_stage(c, Stage::Data),
        Command::Barrier(c) => run_stage(c, Stage::Barrier),
        Command::Solve(c) => run_stage(c, Stage::Solve),
        Command::Audit(c) => run_stage(c, Stage::Audit),
        Command::Mass(c) => run_stage(c, Stage::Mass),
        Command::Pipeline(c) => run_stage(c, Stage::Full),
        Command::Experiment(e) => run_experiment(e),
    }
}
