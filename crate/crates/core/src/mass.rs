// SPDX-License-Identifier: Apache-2.0

//! Asymptotic fits: the coefficient `alpha` in `g = (1 + alpha r^{2-n}) dx^2 + ...`
//! and power-law decay exponents.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::data::RadialInitialData;
use crate::grid::RadialGrid;
use crate::metric::{JangGraphGeometry, BOUNDARY_NODES};
use crate::par::{self, Exec};
use crate::pipeline::{run_pipeline, PipelineConfig, Stage};

pub const MIN_FIT_NODES: usize = 8;
pub const MAX_FIT_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub fit_window: (f64, f64),
    pub rms_residual: f64,
    pub usable: usize,
}

/// `[r_max/4, r_max/2]`.
pub fn default_alpha_window(grid: &RadialGrid) -> (f64, f64) {
    (0.25 * grid.r_max(), 0.5 * grid.r_max())
}

/// Log-log regression of `|profile|` against `r` over nodes in `window`,
/// skipping zeros and non-finite values.
pub fn fit_decay_exponent(profile: &[f64], grid: &RadialGrid, window: (f64, f64)) -> Result<DecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .window(window.0, window.1)
        .filter(|&i| profile[i] != 0.0 && profile[i].is_finite() && grid.nodes()[i] > 0.0)
        .map(|i| (grid.nodes()[i].ln(), profile[i].abs().ln()))
        .unzip();
    let m = xs.len();
    if m < MIN_FIT_NODES {
        return Err(Error::InsufficientData { usable: m });
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { usable: 1 });
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum();
    Ok(DecayFit {
        exponent,
        amplitude: intercept.exp(),
        fit_window: window,
        rms_residual: (ss / m as f64).sqrt(),
        usable: m,
    })
}

/// Least-squares coefficient of `r^{2-n}` for nodal values of `g_rr - 1`.
/// The reported exponent is the model's `2 - n`; the residual is the rms of
/// `ln(y / (alpha r^{2-n}))`, infinite when a node has the wrong sign.
pub fn fit_alpha_profile(excess: &[f64], grid: &RadialGrid, n: usize, window: (f64, f64)) -> Result<(f64, DecayFit)> {
    let idx: Vec<usize> = grid.window(window.0, window.1).filter(|&i| grid.nodes()[i] > 0.0).collect();
    if idx.len() < MIN_FIT_NODES {
        return Err(Error::InsufficientData { usable: idx.len() });
    }
    let model = |r: f64| r.powf(2.0 - n as f64);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &idx {
        let x = model(grid.nodes()[i]);
        sxy += x * excess[i];
        sxx += x * x;
    }
    let alpha = sxy / sxx;
    let rms = if alpha == 0.0 {
        if idx.iter().all(|&i| excess[i] == 0.0) { 0.0 } else { f64::INFINITY }
    } else {
        let ss: f64 = idx
            .iter()
            .map(|&i| {
                let ratio = excess[i] / (alpha * model(grid.nodes()[i]));
                if ratio > 0.0 { ratio.ln().powi(2) } else { f64::INFINITY }
            })
            .sum();
        (ss / idx.len() as f64).sqrt()
    };
    let fit = DecayFit {
        exponent: 2.0 - n as f64,
        amplitude: alpha,
        fit_window: window,
        rms_residual: rms,
        usable: idx.len(),
    };
    if !(rms < MAX_FIT_RMS) {
        return Err(Error::FitFailure { rms });
    }
    Ok((alpha, fit))
}

/// `alpha` from the radial metric coefficient `a` of the data.
pub fn fit_alpha(data: &RadialInitialData, grid: &RadialGrid) -> Result<(f64, DecayFit)> {
    fit_alpha_in(data, grid, default_alpha_window(grid))
}

pub fn fit_alpha_in(data: &RadialInitialData, grid: &RadialGrid, window: (f64, f64)) -> Result<(f64, DecayFit)> {
    let excess: Vec<f64> = data.nodal(grid).iter().map(|l| l.a - 1.0).collect();
    fit_alpha_profile(&excess, grid, data.n, window)
}

/// `alpha` from `g_check_rr - 1` of the graph metric, on the part of `window`
/// inside the graph's grid.
pub fn fit_alpha_graph(geo: &JangGraphGeometry, window: (f64, f64)) -> Result<(f64, DecayFit)> {
    let excess: Vec<f64> = geo.g_check_rr.iter().map(|a| a - 1.0).collect();
    let hi = window.1.min(geo.grid.r_max());
    fit_alpha_profile(&excess, &geo.grid, geo.n, (window.0, hi))
}

/// Agreement of the two mass fits: `|alpha_graph - alpha| <= 1e-3 |alpha|`.
pub fn alphas_agree(alpha: f64, alpha_graph: f64) -> bool {
    (alpha_graph - alpha).abs() <= 1e-3 * alpha.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub fit: Option<DecayFit>,
    pub bound: f64,
    pub passed: bool,
}

impl SlopeCheck {
    /// A profile vanishing on the whole window passes without a fit.
    fn new(profile: &[f64], grid: &RadialGrid, window: (f64, f64), bound: f64) -> Self {
        let mut idx = grid.window(window.0, window.1).peekable();
        if idx.peek().is_some() && idx.all(|i| profile[i] == 0.0) {
            return SlopeCheck { fit: None, bound, passed: true };
        }
        let fit = fit_decay_exponent(profile, grid, window).ok();
        let passed = fit.is_some_and(|f| f.exponent <= bound && f.rms_residual < MAX_FIT_RMS);
        SlopeCheck { fit, bound, passed }
    }
}

/// Decay of `|u|`, `|Xi|` and `|R_check|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub u: SlopeCheck,
    pub xi: SlopeCheck,
    pub r_check: SlopeCheck,
    pub passed: bool,
}

/// `|u|` on `[32 r0, r_J / 2]` against `3 - n + 0.2`; `|Xi|` and `|R_check|`
/// on the outer third (boundary nodes excluded) against `3 - 2n + 0.3` and
/// `-(n + 2 delta) + 0.3`.
pub fn decay_report(geo: &JangGraphGeometry, r0: f64, delta: f64) -> DecayReport {
    let grid = &geo.grid;
    let nodes = grid.nodes();
    let n = geo.n as f64;
    let abs = |v: &[f64]| v.iter().map(|x| x.abs()).collect::<Vec<_>>();
    let third = grid.outer_third();
    let last = third.end.saturating_sub(1 + BOUNDARY_NODES).max(third.start);
    let outer = (nodes[third.start], nodes[last]);
    let u = SlopeCheck::new(&abs(&geo.u), grid, (32.0 * r0, 0.5 * grid.r_max()), 3.0 - n + 0.2);
    let xi = SlopeCheck::new(&abs(&geo.xi_rad), grid, outer, 3.0 - 2.0 * n + 0.3);
    let r_check = SlopeCheck::new(&abs(&geo.r_check), grid, outer, -(n + 2.0 * delta) + 0.3);
    let passed = u.passed && xi.passed && r_check.passed;
    DecayReport { u, xi, r_check, passed }
}

/// One dataset of the positivity experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub n: usize,
    pub min_margin: f64,
    pub alpha: Option<f64>,
    pub identity_err: Option<f64>,
    pub audits_passed: bool,
    pub exit_code: u8,
    pub error: Option<String>,
}

impl ExperimentRecord {
    /// Strict DEC and every audit green.
    pub fn eligible(&self) -> bool {
        self.min_margin > 0.0 && self.audits_passed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub eligible: usize,
    pub positive: usize,
    /// Every eligible dataset has `alpha > 0`.
    pub passed: bool,
    pub records: Vec<ExperimentRecord>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NaN".to_string(), |x| format!("{x:e}"));
        let mut out = String::from("seed,n,min_margin,alpha,identity_err,audits_passed\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:e},{},{},{}\n",
                r.seed,
                r.n,
                r.min_margin,
                opt(r.alpha),
                opt(r.identity_err),
                r.audits_passed
            ));
        }
        out
    }
}

fn experiment_record(template: &PipelineConfig, n: usize, seed: u64) -> ExperimentRecord {
    let mut cfg = template.clone();
    cfg.dataset.n = n;
    cfg.dataset.seed = Some(seed);
    let run = run_pipeline(&cfg, Stage::Full, Exec::Sequential);
    ExperimentRecord {
        seed,
        n,
        min_margin: run.min_margin.map_or(f64::NAN, |m| m.0),
        alpha: run.mass.as_ref().map(|m| m.alpha),
        identity_err: run.audits.as_ref().and_then(|a| a.identity).map(|i| i.max_rel_err),
        audits_passed: run.failure.is_none(),
        exit_code: run.exit_code().into(),
        error: run.failure.as_ref().map(|f| format!("{}: {}", f.stage, f.message)),
    }
}

/// Runs the full pipeline on `count` datasets with seeds `seed, seed + 1, ...`
/// built from `template`. Datasets run concurrently under `exec`; records come
/// back sorted by seed.
pub fn positivity_experiment(
    template: &PipelineConfig,
    n: usize,
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let mut records = par::map_indexed(exec, count, |i| experiment_record(template, n, seed + i as u64));
    records.sort_by_key(|r| r.seed);
    let eligible = records.iter().filter(|r| r.eligible()).count();
    let positive = records.iter().filter(|r| r.eligible() && r.alpha.is_some_and(|a| a > 0.0)).count();
    Ok(ExperimentReport { n, count, seed, eligible, positive, passed: eligible == positive, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};

    #[test]
    fn exact_power_law() {
        let g = build_grid(100.0, 400, Spacing::Uniform).unwrap();
        let p: Vec<f64> = g.nodes().iter().map(|r| 3.0 * r.powi(-5)).collect();
        let f = fit_decay_exponent(&p, &g, (10.0, 90.0)).unwrap();
        assert!((f.exponent + 5.0).abs() < 1e-8 && (f.amplitude - 3.0).abs() < 1e-6);
        assert!(matches!(fit_decay_exponent(&p, &g, (10.0, 10.5)), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn exact_alpha_model() {
        let g = build_grid(400.0, 800, Spacing::Uniform).unwrap();
        let y: Vec<f64> = g.nodes().iter().map(|r| 0.3 * r.powi(-2)).collect();
        let (alpha, fit) = fit_alpha_profile(&y, &g, 4, default_alpha_window(&g)).unwrap();
        assert!((alpha - 0.3).abs() < 1e-10 && fit.rms_residual < 1e-10);
        let zero = vec![0.0; g.len()];
        assert_eq!(fit_alpha_profile(&zero, &g, 4, default_alpha_window(&g)).unwrap().0, 0.0);
        let bad: Vec<f64> = g.nodes().iter().map(|r| (r * 0.3).sin() * 1e-3).collect();
        assert!(matches!(fit_alpha_profile(&bad, &g, 4, default_alpha_window(&g)), Err(Error::FitFailure { .. })));
    }
}
