// SPDX-License-Identifier: Apache-2.0

//! Damped Newton for the discrete capillary problem, continuation in `lambda`
//! and the exhaustion `r_j -> infinity`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::capillary::CapillaryConfig;
use crate::geometry::curvature::q_norm;
use crate::geometry::data::{Local, RadialInitialData};
use crate::grid::RadialGrid;
use crate::linalg::solve_tridiagonal;

use super::operator::{jang_partials, jang_pointwise};

pub const CAUCHY_TOL: f64 = 1e-8;
pub const MIN_LAMBDA_STEP: f64 = 1.0 / 256.0;
const LAMBDA_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_damping_failures: usize,
    pub armijo: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iterations: 60, max_damping_failures: 30, armijo: 1e-4 }
    }
}

/// `M^{(j)}`: the grid cut at the node nearest `r_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDomain {
    pub r_j: f64,
    pub grid: RadialGrid,
}

impl TruncatedDomain {
    pub fn new(full: &RadialGrid, r_j: f64, r0: f64) -> Result<Self> {
        if r_j > full.r_max() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("r_j = {r_j} beyond grid end {}", full.r_max())));
        }
        let grid = full.truncate(r_j);
        let r_j = grid.r_max();
        if r_j <= 32.0 * r0 {
            return Err(Error::InvalidArgument(format!("r_j = {r_j} must exceed 32 r0 = {}", 32.0 * r0)));
        }
        Ok(TruncatedDomain { r_j, grid })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTrace {
    pub lambda: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub damping_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JangState {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub residual_norm: f64,
    pub trace: Vec<StepTrace>,
}

/// Discrete residual and Jacobian with the nodal data cached.
pub struct Discretization<'a> {
    n: usize,
    grid: &'a RadialGrid,
    locals: Vec<Local>,
    /// `tau^2 zeta^2` at the nodes.
    absorption: Vec<f64>,
    q_sup: f64,
}

impl<'a> Discretization<'a> {
    pub fn new(data: &RadialInitialData, config: &CapillaryConfig, grid: &'a RadialGrid) -> Self {
        let locals = data.nodal(grid);
        let tau2 = config.tau * config.tau;
        let absorption = grid.nodes().iter().map(|&r| tau2 * config.zeta_at(r).powi(2)).collect();
        let q_sup = locals.iter().map(|l| q_norm(data.n, l)).fold(0.0, f64::max);
        Discretization { n: data.n, grid, locals, absorption, q_sup }
    }

    pub fn len(&self) -> usize {
        self.locals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locals.is_empty()
    }

    /// Convergence scale `tau^2 sup|w| + sup|q|_g`.
    pub fn scale(&self, w: &[f64]) -> f64 {
        let tau2 = self.absorption[0];
        tau2 * w.iter().fold(0.0f64, |m, v| m.max(v.abs())) + self.q_sup
    }

    fn stencil(&self, w: &[f64], i: usize) -> (f64, f64, [f64; 3], [f64; 3]) {
        let (d1, d2) = self.grid.interior_weights(i);
        let w1 = d1[0] * w[i - 1] + d1[1] * w[i] + d1[2] * w[i + 1];
        let w2 = d2[0] * w[i - 1] + d2[1] * w[i] + d2[2] * w[i + 1];
        (w1, w2, d1, d2)
    }

    fn origin_second(&self, w: &[f64]) -> (f64, f64) {
        let h = self.grid.nodes()[1];
        (2.0 * (w[1] - w[0]) / (h * h), 2.0 / (h * h))
    }

    pub fn residual(&self, w: &[f64], lambda: f64) -> Vec<f64> {
        let last = self.len() - 1;
        let mut f = vec![0.0; self.len()];
        let (w2, _) = self.origin_second(w);
        f[0] = jang_pointwise(self.n, &self.locals[0], 0.0, w2, lambda) - self.absorption[0] * w[0];
        for i in 1..last {
            let (w1, w2, _, _) = self.stencil(w, i);
            f[i] = jang_pointwise(self.n, &self.locals[i], w1, w2, lambda) - self.absorption[i] * w[i];
        }
        f[last] = w[last];
        f
    }

    /// Tridiagonal Jacobian `(sub, diag, sup)` of [`Self::residual`].
    pub fn jacobian(&self, w: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let len = self.len();
        let last = len - 1;
        let (mut sub, mut diag, mut sup) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let (_, c) = self.origin_second(w);
        let k = self.n as f64 / self.locals[0].a;
        diag[0] = -k * c - self.absorption[0];
        sup[0] = k * c;
        for i in 1..last {
            let (w1, w2, d1, d2) = self.stencil(w, i);
            let (p1, p2) = jang_partials(self.n, &self.locals[i], w1, w2, lambda);
            sub[i] = p1 * d1[0] + p2 * d2[0];
            diag[i] = p1 * d1[1] + p2 * d2[1] - self.absorption[i];
            sup[i] = p1 * d1[2] + p2 * d2[2];
        }
        diag[last] = 1.0;
        (sub, diag, sup)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY })
}

fn converged(norm: f64, scale: f64, tol: f64) -> bool {
    norm <= tol * scale || norm == 0.0
}

/// Damped Newton at fixed `lambda` starting from `w_init`.
pub fn newton_solve(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    domain: &TruncatedDomain,
    lambda: f64,
    w_init: &[f64],
) -> Result<JangState> {
    newton_solve_with(data, config, domain, lambda, w_init, NewtonOptions::default())
}

pub fn newton_solve_with(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    domain: &TruncatedDomain,
    lambda: f64,
    w_init: &[f64],
    opts: NewtonOptions,
) -> Result<JangState> {
    let disc = Discretization::new(data, config, &domain.grid);
    newton_on(&disc, lambda, w_init, opts)
}

pub fn newton_on(disc: &Discretization, lambda: f64, w_init: &[f64], opts: NewtonOptions) -> Result<JangState> {
    if w_init.len() != disc.len() {
        return Err(Error::InvalidArgument("w_init must have one value per node".into()));
    }
    if w_init[disc.len() - 1] != 0.0 {
        return Err(Error::InvalidArgument("w_init must vanish at r_j".into()));
    }
    let mut w = w_init.to_vec();
    let mut f = disc.residual(&w, lambda);
    let mut norm = sup_norm(&f);
    if !norm.is_finite() {
        return Err(Error::NumericalDegeneracy("non-finite residual at the initial guess".into()));
    }
    let mut iterations = 0;
    let mut damping_count = 0;
    let mut failures = 0;
    while !converged(norm, disc.scale(&w), opts.tol) {
        if iterations == opts.max_iterations {
            return Err(Error::NewtonDivergence { iterations, residual: norm });
        }
        iterations += 1;
        let (sub, diag, sup) = disc.jacobian(&w, lambda);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = solve_tridiagonal(&sub, &diag, &sup, &rhs).map_err(|row| Error::SingularJacobian { row })?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let ft = disc.residual(&trial, lambda);
            let nt = sup_norm(&ft);
            if nt <= (1.0 - opts.armijo * t) * norm {
                w = trial;
                f = ft;
                norm = nt;
                failures = 0;
                break;
            }
            damping_count += 1;
            failures += 1;
            if failures >= opts.max_damping_failures {
                return Err(Error::NewtonDivergence { iterations, residual: norm });
            }
            t *= 0.5;
        }
    }
    let step = StepTrace { lambda, iterations, residual_norm: norm, damping_count };
    Ok(JangState { w, lambda, residual_norm: norm, trace: vec![step] })
}

fn is_newton_failure(e: &Error) -> bool {
    matches!(e, Error::NewtonDivergence { .. } | Error::SingularJacobian { .. } | Error::NumericalDegeneracy(_))
}

/// Path-follows `lambda` from 0 (where `w = 0` solves the problem) to 1.
pub fn continuation_solve(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    domain: &TruncatedDomain,
) -> Result<JangState> {
    let disc = Discretization::new(data, config, &domain.grid);
    continue_from(&disc, 0.0, vec![0.0; disc.len()], NewtonOptions::default())
}

fn continue_from(disc: &Discretization, start: f64, w0: Vec<f64>, opts: NewtonOptions) -> Result<JangState> {
    let mut state = newton_on(disc, start, &w0, opts)?;
    let mut trace = state.trace.clone();
    let mut step = LAMBDA_STEP;
    while state.lambda < 1.0 {
        let mut target = state.lambda + step;
        if target > 1.0 - 1e-9 {
            target = 1.0;
        }
        match newton_on(disc, target, &state.w, opts) {
            Ok(next) => {
                trace.extend(&next.trace);
                state = next;
                step = (2.0 * step).min(LAMBDA_STEP);
            }
            Err(e) if is_newton_failure(&e) => {
                step *= 0.5;
                if step < MIN_LAMBDA_STEP {
                    return Err(Error::ContinuationFailure { lambda: state.lambda, step });
                }
            }
            Err(e) => return Err(e),
        }
    }
    state.trace = trace;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionStep {
    pub r_j: f64,
    pub steps: Vec<StepTrace>,
    pub residual_norm: f64,
    /// `sup_{[0, R_c]} |u^{(j)} - u^{(j-1)}|` (absent for the first radius).
    pub cauchy_diff: Option<f64>,
    pub sup_gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JangLimit {
    /// Last iterate on the full grid, zero beyond the last `r_j`.
    pub u: Vec<f64>,
    pub grid: RadialGrid,
    pub r0: f64,
    pub trace: Vec<ExhaustionStep>,
    pub converged_radius: f64,
    /// Solutions `u^{(j)}` on their own truncated grids.
    pub iterates: Vec<(TruncatedDomain, JangState)>,
}

impl JangLimit {
    pub fn last_domain(&self) -> &TruncatedDomain {
        &self.iterates.last().expect("nonempty schedule").0
    }

    pub fn last_state(&self) -> &JangState {
        &self.iterates.last().expect("nonempty schedule").1
    }
}

pub fn default_schedule(r0: f64) -> Vec<f64> {
    vec![64.0 * r0, 128.0 * r0, 256.0 * r0]
}

/// `sup |dw|_g = sup |w'| / sqrt(a)` over a truncated domain.
pub fn sup_gradient(data: &RadialInitialData, grid: &RadialGrid, w: &[f64]) -> f64 {
    let d = grid.derivative(w, crate::grid::Parity::Even);
    grid.nodes().iter().zip(d).map(|(&r, v)| v.abs() / data.a_at(r).sqrt()).fold(0.0, f64::max)
}

/// Solves on each `r_j` of `schedule` (warm-starting at `lambda = 1` from the
/// previous radius, falling back to continuation) and checks the Cauchy
/// criterion on `[0, schedule[0]]`.
pub fn exhaustion_solve(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    grid: &RadialGrid,
    schedule: &[f64],
) -> Result<JangLimit> {
    exhaustion_solve_with(data, config, grid, schedule, NewtonOptions::default())
}

pub fn exhaustion_solve_with(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    grid: &RadialGrid,
    schedule: &[f64],
    opts: NewtonOptions,
) -> Result<JangLimit> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("schedule must be nonempty and increasing".into()));
    }
    let r0 = config.r0;
    let compact = grid.window(0.0, schedule[0]).end;
    let mut u_prev: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut ever_converged = false;
    let mut converged_radius = 0.0;
    for &r_j in schedule {
        let domain = TruncatedDomain::new(grid, r_j, r0)?;
        let disc = Discretization::new(data, config, &domain.grid);
        let state = match &u_prev {
            Some(prev) => {
                let mut init = prev[..disc.len()].to_vec();
                init[disc.len() - 1] = 0.0;
                match newton_on(&disc, 1.0, &init, opts) {
                    Ok(s) => s,
                    Err(e) if is_newton_failure(&e) => continue_from(&disc, 0.0, vec![0.0; disc.len()], opts)?,
                    Err(e) => return Err(e),
                }
            }
            None => continue_from(&disc, 0.0, vec![0.0; disc.len()], opts)?,
        };
        let mut u = vec![0.0; grid.len()];
        u[..state.w.len()].copy_from_slice(&state.w);
        let cauchy_diff = u_prev.as_ref().map(|p| {
            (0..compact).map(|i| (u[i] - p[i]).abs()).fold(0.0, f64::max)
        });
        if let (Some(d), Some(p)) = (cauchy_diff, &u_prev) {
            if d < CAUCHY_TOL {
                ever_converged = true;
            }
            let bad = (0..state.w.len()).find(|&i| (u[i] - p[i]).abs() >= CAUCHY_TOL);
            converged_radius = match bad {
                Some(0) => 0.0,
                Some(i) => grid.nodes()[i - 1],
                None => domain.r_j,
            };
        }
        trace.push(ExhaustionStep {
            r_j: domain.r_j,
            steps: state.trace.clone(),
            residual_norm: state.residual_norm,
            cauchy_diff,
            sup_gradient: sup_gradient(data, &domain.grid, &state.w),
        });
        iterates.push((domain, state));
        u_prev = Some(u);
    }
    if schedule.len() > 1 && !ever_converged {
        let last_diff = trace.last().and_then(|s| s.cauchy_diff).unwrap_or(f64::NAN);
        return Err(Error::ExhaustionNonconvergence { last_diff });
    }
    Ok(JangLimit { u: u_prev.expect("nonempty schedule"), grid: grid.clone(), r0, trace, converged_radius, iterates })
}

/// Rows `r,w,residual` of a state on its domain.
pub fn solution_csv(grid: &RadialGrid, w: &[f64], residual: &[f64]) -> String {
    let mut out = String::from("r,w,residual\n");
    for ((r, w), f) in grid.nodes().iter().zip(w).zip(residual) {
        out.push_str(&format!("{r:e},{w:e},{f:e}\n"));
    }
    out
}

/// Trace JSON: one `{lambda, iterations, residual_norm, damping_count}` per step.
pub fn trace_json(steps: &[StepTrace]) -> serde_json::Value {
    serde_json::to_value(steps).expect("plain numbers serialize")
}
