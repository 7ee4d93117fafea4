// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs: dataset, `r0`, capillary configuration, exhaustion, audits
//! and the mass fit, with failures classified by exit code.

use serde::{Deserialize, Serialize};

use crate::barrier::{
    barrier_inequality_audit, default_candidates, find_r0_with, ode_residual_audit, BarrierAudit, BarrierProfile,
};
use crate::error::{Error, Result};
use crate::geometry::capillary::{select_capillary_config, CapillaryConfig};
use crate::geometry::curvature::constraint_fields;
use crate::geometry::data::{make_dataset, DatasetSpec, GridSpec, RadialInitialData};
use crate::grid::RadialGrid;
use crate::jang::{estimate_audits, exhaustion_solve_with, EstimateReport, JangLimit, NewtonOptions};
use crate::mass::{
    alphas_agree, decay_report, default_alpha_window, fit_alpha_graph, fit_alpha_in, DecayFit, DecayReport,
};
use crate::metric::stability::default_test_functions;
use crate::metric::{
    build_graph_geometry, build_shielding, consequence_audit, neighborhood_audit, schoen_yau_audit, shielding_audit,
    stability_audit, ConsequenceReport, IdentityReport, JangGraphGeometry, NeighborhoodReport, ShieldingData,
    StabilityReport,
};
use crate::par::Exec;

pub const IDENTITY_MAX_REL_ERR: f64 = 1e-3;
pub const IDENTITY_MIN_ORDER: f64 = 1.9;
const MAX_EXTENSIONS: usize = 6;
const BARRIER_SAMPLES: usize = 200;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "u8")]
pub enum ExitCode {
    Ok = 0,
    Io = 1,
    Config = 2,
    DecViolation = 3,
    Solver = 4,
    Audit = 5,
}

impl From<ExitCode> for u8 {
    fn from(c: ExitCode) -> u8 {
        c as u8
    }
}

impl ExitCode {
    pub fn classify(e: &Error) -> ExitCode {
        match e {
            Error::InvalidArgument(_) | Error::Json(_) => ExitCode::Config,
            Error::DecViolation { .. } | Error::GenerationFailure(_) => ExitCode::DecViolation,
            Error::Io(_) => ExitCode::Io,
            Error::AuditInapplicable(_)
            | Error::FitFailure { .. }
            | Error::InsufficientData { .. }
            | Error::InadmissibleTestFunction(_)
            | Error::ShieldingFailure(_) => ExitCode::Audit,
            _ => ExitCode::Solver,
        }
    }
}

fn default_tol() -> f64 {
    NewtonOptions::default().tol
}
fn default_max_iterations() -> usize {
    NewtonOptions::default().max_iterations
}
fn default_schedule() -> Vec<f64> {
    vec![64.0, 128.0, 256.0]
}
fn default_test_function_count() -> usize {
    50
}
fn default_stability_seed() -> u64 {
    1
}
fn default_candidate_count() -> usize {
    8
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { tol: default_tol(), max_iterations: default_max_iterations() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditToggles {
    #[serde(default = "yes")]
    pub estimates: bool,
    #[serde(default = "yes")]
    pub identity: bool,
    #[serde(default = "yes")]
    pub consequence: bool,
    #[serde(default = "yes")]
    pub neighborhoods: bool,
    #[serde(default = "yes")]
    pub shielding: bool,
    #[serde(default = "yes")]
    pub stability: bool,
    #[serde(default = "yes")]
    pub decay: bool,
}

impl Default for AuditToggles {
    fn default() -> Self {
        AuditToggles {
            estimates: true,
            identity: true,
            consequence: true,
            neighborhoods: true,
            shielding: true,
            stability: true,
            decay: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Exhaustion radii in units of `r0`.
    #[serde(default = "default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub audits: AuditToggles,
    /// Random spline test functions for the stability audit.
    #[serde(default = "default_test_function_count")]
    pub test_functions: usize,
    #[serde(default = "default_stability_seed")]
    pub stability_seed: u64,
    #[serde(default = "default_candidate_count")]
    pub r0_candidates: usize,
    /// Grow `r_max` (same first cell) until it covers the last exhaustion radius.
    #[serde(default = "yes")]
    pub extend_grid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl PipelineConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        PipelineConfig {
            dataset,
            solver: SolverSpec::default(),
            schedule: default_schedule(),
            audits: AuditToggles::default(),
            test_functions: default_test_function_count(),
            stability_seed: default_stability_seed(),
            r0_candidates: default_candidate_count(),
            extend_grid: true,
            out: None,
        }
    }

    /// Perturbed-DEC data on a 4096-interval geometric grid.
    pub fn perturbed(n: usize, seed: u64) -> Self {
        PipelineConfig::new(DatasetSpec {
            family: "perturbed-dec".into(),
            n,
            params: serde_json::json!({}),
            grid: GridSpec { r_max: 1024.0, intervals: 4096, policy: "geometric".into(), stretch: Some(1.0012) },
            seed: Some(seed),
        })
    }

    /// Accepts a full pipeline config or a bare dataset spec.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let cfg = if v.get("dataset").is_some() {
            serde_json::from_value(v)?
        } else {
            PipelineConfig::new(serde_json::from_value(v)?)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let d = &self.dataset;
        if d.n < 4 {
            return bad(format!("dimension must be >= 4, got {}", d.n));
        }
        d.family()?;
        let g = &d.grid;
        if !(g.r_max > 0.0 && g.r_max.is_finite()) {
            return bad(format!("grid r_max must be positive, got {}", g.r_max));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iterations == 0 {
            return bad("solver tolerances must be positive".into());
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&k| !(k > 32.0)) {
            return bad("schedule radii must exceed 32 r0".into());
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return bad("schedule must be increasing".into());
        }
        if self.r0_candidates == 0 {
            return bad("need at least one r0 candidate".into());
        }
        g.build()?;
        Ok(())
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.solver.tol, max_iterations: self.solver.max_iterations, ..NewtonOptions::default() }
    }
}

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Data,
    Barrier,
    Solve,
    Audit,
    /// Dataset and mass fit only.
    Mass,
    Full,
}

impl Stage {
    fn barrier(self) -> bool {
        !matches!(self, Stage::Data | Stage::Mass)
    }
    fn solve(self) -> bool {
        matches!(self, Stage::Solve | Stage::Audit | Stage::Full)
    }
    fn audit(self) -> bool {
        matches!(self, Stage::Audit | Stage::Full)
    }
    fn mass(self) -> bool {
        matches!(self, Stage::Mass | Stage::Full)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub code: ExitCode,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierSummary {
    pub r0: f64,
    pub n: usize,
    pub quad_tol: f64,
    pub max_ode_residual: f64,
    pub inequality_passed: bool,
    pub first_violation: Option<f64>,
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(skip)]
    pub audit: BarrierAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audits {
    pub geometry: JangGraphGeometry,
    pub estimates: Option<EstimateReport>,
    pub identity: Option<IdentityReport>,
    pub consequence: Option<ConsequenceReport>,
    pub neighborhoods: Option<NeighborhoodReport>,
    pub shielding: Option<(ShieldingData, [bool; 6])>,
    pub stability: Option<StabilityReport>,
    pub decay: Option<DecayReport>,
}

impl Audits {
    pub fn identity_passed(&self) -> bool {
        self.identity.is_none_or(|r| {
            r.max_rel_err < IDENTITY_MAX_REL_ERR && r.order.is_some_and(|o| o >= IDENTITY_MIN_ORDER)
        })
    }

    pub fn passed(&self) -> bool {
        self.estimates.as_ref().is_none_or(|e| e.passed())
            && self.identity_passed()
            && self.consequence.as_ref().is_none_or(|c| c.passed)
            && self.neighborhoods.as_ref().is_none_or(|c| c.passed)
            && self.shielding.as_ref().is_none_or(|(_, b)| b.iter().all(|&x| x))
            && self.stability.as_ref().is_none_or(|s| s.passed)
            && self.decay.as_ref().is_none_or(|d| d.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub alpha: f64,
    pub fit: DecayFit,
    pub alpha_graph: Option<f64>,
    pub graph_fit: Option<DecayFit>,
    pub graph_agrees: Option<bool>,
    pub positive: bool,
}

/// Everything a run produced; later stages are `None` after a failure.
#[derive(Debug, Clone)]
pub struct Run {
    /// Effective configuration (after grid extension).
    pub config: PipelineConfig,
    pub data: Option<RadialInitialData>,
    pub grid: Option<RadialGrid>,
    /// `min(mu - |J|)` and where it is attained.
    pub min_margin: Option<(f64, f64)>,
    pub barrier: Option<BarrierSummary>,
    pub capillary: Option<CapillaryConfig>,
    pub limit: Option<JangLimit>,
    pub audits: Option<Audits>,
    pub mass: Option<MassReport>,
    pub failure: Option<Failure>,
}

impl Run {
    pub fn exit_code(&self) -> ExitCode {
        self.failure.as_ref().map_or(ExitCode::Ok, |f| f.code)
    }
}

fn fail(run: &mut Run, stage: &str, e: &Error) {
    run.failure = Some(Failure { code: ExitCode::classify(e), stage: stage.into(), message: e.to_string() });
}

/// Geometric stretch with the same first cell reaching `r_max` in `intervals` steps.
pub fn stretch_for(first_cell: f64, intervals: usize, r_max: f64) -> f64 {
    let reach = |s: f64| first_cell * (s.powi(intervals as i32) - 1.0) / (s - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while reach(hi) < r_max {
        hi = 1.0 + 2.0 * (hi - 1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reach(mid) < r_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn extended(grid: &GridSpec, built: &RadialGrid, r_max: f64) -> GridSpec {
    let mut g = grid.clone();
    match grid.policy.as_str() {
        "geometric" => {
            g.stretch = Some(stretch_for(built.nodes()[1], grid.intervals, r_max));
        }
        _ => {
            g.intervals = (grid.intervals as f64 * r_max / grid.r_max).ceil() as usize;
        }
    }
    g.r_max = r_max;
    g
}

fn generate(spec: &DatasetSpec) -> Result<(RadialInitialData, RadialGrid, (f64, f64))> {
    let grid = spec.grid.build()?;
    let data = make_dataset(&spec.family()?, spec.n, &grid, spec.seed)?;
    let (m, r) = constraint_fields(&data, &grid)?.min_margin();
    if !(m > 0.0) {
        return Err(Error::DecViolation { min_margin: m, radius: r });
    }
    Ok((data, grid, (m, r)))
}

/// Finds `r0`, growing the grid when the schedule does not fit.
fn locate_r0(run: &mut Run, exec: Exec) -> Result<f64> {
    let last = *run.config.schedule.last().expect("validated");
    for _ in 0..=MAX_EXTENSIONS {
        let (data, grid) = (run.data.as_ref().unwrap(), run.grid.as_ref().unwrap());
        let r0 = find_r0_with(data, grid, &default_candidates(data, run.config.r0_candidates), exec)?;
        let needed = last * r0;
        if grid.r_max() >= needed {
            return Ok(r0);
        }
        if !run.config.extend_grid {
            return Err(Error::InvalidArgument(format!(
                "grid r_max = {} does not reach {last} r0 = {needed}",
                grid.r_max()
            )));
        }
        let spec = extended(&run.config.dataset.grid, grid, needed * (1.0 + 1e-6));
        run.config.dataset.grid = spec;
        let (data, grid, margin) = generate(&run.config.dataset)?;
        run.data = Some(data);
        run.grid = Some(grid);
        run.min_margin = Some(margin);
    }
    Err(Error::InvalidArgument("grid extension did not settle".into()))
}

fn summarize_barrier(data: &RadialInitialData, grid: &RadialGrid, r0: f64) -> Result<BarrierSummary> {
    let bp = BarrierProfile::new(r0, data.n)?;
    let (lo, hi) = (r0 * (1.0 + 1e-3), 64.0 * r0);
    let samples: Vec<f64> = (0..BARRIER_SAMPLES)
        .map(|k| lo * (hi / lo).powf(k as f64 / (BARRIER_SAMPLES - 1) as f64))
        .collect();
    let max_ode_residual = ode_residual_audit(&bp, &samples)?;
    let audit = barrier_inequality_audit(data, &bp, grid)?;
    Ok(BarrierSummary {
        r0,
        n: data.n,
        quad_tol: bp.quad_tol,
        max_ode_residual,
        inequality_passed: audit.passes(),
        first_violation: audit.first_violation(),
        samples,
        audit,
    })
}

fn solve(config: &PipelineConfig, data: &RadialInitialData, grid: &RadialGrid, r0: f64) -> Result<(CapillaryConfig, JangLimit)> {
    let cap = select_capillary_config(data, r0, grid)?;
    let schedule: Vec<f64> = config.schedule.iter().map(|k| k * r0).collect();
    let limit = exhaustion_solve_with(data, &cap, grid, &schedule, config.newton())?;
    Ok((cap, limit))
}

fn geometry_of(data: &RadialInitialData, cap: &CapillaryConfig, limit: &JangLimit) -> Result<JangGraphGeometry> {
    build_graph_geometry(data, cap, &limit.last_state().w, &limit.last_domain().grid)
}

fn run_audits(run: &Run, exec: Exec) -> Result<Audits> {
    let cfg = &run.config;
    let t = &cfg.audits;
    let (data, grid) = (run.data.as_ref().unwrap(), run.grid.as_ref().unwrap());
    let (cap, limit) = (run.capillary.as_ref().unwrap(), run.limit.as_ref().unwrap());
    let r0 = cap.r0;
    let geometry = geometry_of(data, cap, limit)?;
    let refined = if t.identity || t.estimates {
        let fine = grid.refine();
        let (cap2, lim2) = solve(cfg, data, &fine, r0)?;
        let geo2 = geometry_of(data, &cap2, &lim2)?;
        Some((cap2, lim2, geo2))
    } else {
        None
    };
    let estimates = if t.estimates {
        let bp = BarrierProfile::new(r0, data.n)?;
        Some(estimate_audits(data, cap, limit, &bp, refined.as_ref().map(|(c, l, _)| (c, l)))?)
    } else {
        None
    };
    let identity = t.identity.then(|| schoen_yau_audit(&geometry, refined.as_ref().map(|(_, _, g)| g)));
    let consequence = t.consequence.then(|| consequence_audit(cap, &geometry));
    let neighborhoods = t.neighborhoods.then(|| neighborhood_audit(cap, &geometry));
    let shielding = t.shielding.then(|| {
        let sd = build_shielding(cap, &geometry);
        let bullets = shielding_audit(&sd);
        (sd, bullets)
    });
    let stability = if t.stability {
        let fns = default_test_functions(r0, cfg.test_functions, cfg.stability_seed);
        Some(stability_audit(cap, &geometry, &fns, exec)?)
    } else {
        None
    };
    let decay = t.decay.then(|| decay_report(&geometry, r0, data.delta));
    Ok(Audits { geometry, estimates, identity, consequence, neighborhoods, shielding, stability, decay })
}

fn fit_mass(run: &Run) -> Result<MassReport> {
    let (data, grid) = (run.data.as_ref().unwrap(), run.grid.as_ref().unwrap());
    let window = default_alpha_window(grid);
    let (alpha, fit) = fit_alpha_in(data, grid, window)?;
    // the graph fit is an audit; its failure does not hide alpha
    let graph = run.audits.as_ref().map(|a| fit_alpha_graph(&a.geometry, window).ok());
    let graph_ok = graph.flatten();
    Ok(MassReport {
        alpha,
        fit,
        alpha_graph: graph_ok.map(|g| g.0),
        graph_fit: graph_ok.map(|g| g.1),
        graph_agrees: graph.map(|g| g.is_some_and(|g| alphas_agree(alpha, g.0))),
        positive: alpha > 0.0,
    })
}

/// Runs `config` up to `stage`. Never panics on bad input; the failure, if
/// any, is recorded in the returned [`Run`].
pub fn run_pipeline(config: &PipelineConfig, stage: Stage, exec: Exec) -> Run {
    let mut run = Run {
        config: config.clone(),
        data: None,
        grid: None,
        min_margin: None,
        barrier: None,
        capillary: None,
        limit: None,
        audits: None,
        mass: None,
        failure: None,
    };
    if let Err(e) = config.validate() {
        fail(&mut run, "config", &e);
        return run;
    }
    match generate(&config.dataset) {
        Ok((data, grid, margin)) => {
            run.data = Some(data);
            run.grid = Some(grid);
            run.min_margin = Some(margin);
        }
        Err(e) => {
            fail(&mut run, "dataset", &e);
            return run;
        }
    }
    if stage.barrier() {
        let r0 = match locate_r0(&mut run, exec) {
            Ok(r0) => r0,
            Err(e) => {
                fail(&mut run, "barrier", &e);
                return run;
            }
        };
        match summarize_barrier(run.data.as_ref().unwrap(), run.grid.as_ref().unwrap(), r0) {
            Ok(b) => run.barrier = Some(b),
            Err(e) => {
                fail(&mut run, "barrier", &e);
                return run;
            }
        }
    }
    if stage.solve() {
        let r0 = run.barrier.as_ref().unwrap().r0;
        match solve(&run.config, run.data.as_ref().unwrap(), run.grid.as_ref().unwrap(), r0) {
            Ok((cap, limit)) => {
                run.capillary = Some(cap);
                run.limit = Some(limit);
            }
            Err(e) => {
                fail(&mut run, "solve", &e);
                return run;
            }
        }
    }
    if stage.audit() {
        match run_audits(&run, exec) {
            Ok(a) => run.audits = Some(a),
            Err(e) => {
                fail(&mut run, "audit", &e);
                return run;
            }
        }
    }
    if stage.mass() {
        match fit_mass(&run) {
            Ok(m) => run.mass = Some(m),
            Err(e) => {
                fail(&mut run, "mass", &e);
                return run;
            }
        }
    }
    let audits_ok = run.audits.as_ref().is_none_or(|a| a.passed());
    let mass_ok = run.mass.as_ref().is_none_or(|m| m.graph_agrees != Some(false));
    if !(audits_ok && mass_ok) {
        run.failure = Some(Failure {
            code: ExitCode::Audit,
            stage: "audit".into(),
            message: failed_audits(&run).join(", "),
        });
    }
    run
}

/// Names of the failed audits.
pub fn failed_audits(run: &Run) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(a) = &run.audits {
        let mut push = |ok: bool, name: &str| {
            if !ok {
                out.push(name.to_string());
            }
        };
        push(a.estimates.as_ref().is_none_or(|e| e.passed()), "estimates");
        push(a.identity_passed(), "identity");
        push(a.consequence.as_ref().is_none_or(|c| c.passed), "consequence");
        push(a.neighborhoods.as_ref().is_none_or(|c| c.passed), "neighborhoods");
        push(a.shielding.as_ref().is_none_or(|(_, b)| b.iter().all(|&x| x)), "shielding");
        push(a.stability.as_ref().is_none_or(|s| s.passed), "stability");
        push(a.decay.as_ref().is_none_or(|d| d.passed), "decay");
    }
    if run.mass.as_ref().is_some_and(|m| m.graph_agrees == Some(false)) {
        out.push("mass-graph-agreement".into());
    }
    out
}
