// SPDX-License-Identifier: Apache-2.0

//! Numerical audits of the C^0, gradient and decay estimates for solutions.

use serde::Serialize;

use crate::barrier::BarrierProfile;
use crate::error::{Error, Result};
use crate::geometry::capillary::{cutoff, CapillaryConfig};
use crate::geometry::curvature::{q_covariant_norm, q_norm, ricci_eigenvalues, sectional_curvatures};
use crate::geometry::data::RadialInitialData;
use crate::grid::{Parity, RadialGrid};
use crate::mass::{fit_decay_exponent, DecayFit};

use super::solve::{JangLimit, JangState, TruncatedDomain};

/// Relative tolerance (in units of the solve scale) of the pointwise bounds.
pub const BOUND_TOL: f64 = 1e-8;
const GRADIENT_SPREAD: f64 = 0.05;
const STABILITY: f64 = 0.1;
const C0_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub passed: bool,
    /// Largest `|w| - bound` seen (negative when every node has slack).
    pub worst_excess: f64,
    pub first_violation: Option<f64>,
}

impl BoundCheck {
    fn new() -> Self {
        BoundCheck { passed: true, worst_excess: f64::NEG_INFINITY, first_violation: None }
    }

    fn record(&mut self, r: f64, value: f64, bound: f64, slack: f64) {
        let excess = value - bound;
        self.worst_excess = self.worst_excess.max(excess);
        if !(excess <= slack) {
            self.passed = false;
            if self.first_violation.is_none() {
                self.first_violation = Some(r);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiKind {
    /// Coordinate ball near the outer boundary, constant from the solution.
    Outer,
    /// Geodesic ball in the interior.
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientAuditSpec {
    /// `A`; chosen as the smallest admissible value (at least 4) when `None`.
    pub a: Option<f64>,
    pub sigma: f64,
    pub kind: PsiKind,
    pub center: f64,
}

impl GradientAuditSpec {
    /// Ball at `3 r_j / 4` of radius `r_j / 8` and a unit-`r0` ball at `4 r0`.
    pub fn defaults(r0: f64, r_j: f64) -> [GradientAuditSpec; 2] {
        [
            GradientAuditSpec { a: None, sigma: 0.125 * r_j, kind: PsiKind::Outer, center: 0.75 * r_j },
            GradientAuditSpec { a: None, sigma: r0, kind: PsiKind::Inner, center: 4.0 * r0 },
        ]
    }
}

/// Smallest `A` each hypothesis of the interior gradient estimate needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypotheses {
    pub ricci: f64,
    pub q: f64,
    pub dq: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub hess_psi: f64,
    pub w_bound: f64,
    pub boundary_ok: bool,
}

impl Hypotheses {
    fn required(&self) -> f64 {
        [self.ricci, self.q, self.dq, self.psi, self.dpsi, self.hess_psi, self.w_bound].into_iter().fold(4.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientAudit {
    pub spec: GradientAuditSpec,
    pub a: f64,
    pub c0: f64,
    pub hypotheses: Hypotheses,
    /// `sup (exp(A^2 (w - psi) / sigma) - 1) sqrt(1 + |dw|^2)` over the ball.
    pub sup: f64,
}

/// Evaluates the estimate on a radial solution `w` over `grid`. Radial
/// symmetry reduces the supremum to the ray through the center, where the
/// distance to the center is smallest for a given `r`.
pub fn gradient_audit(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    grid: &RadialGrid,
    w: &[f64],
    spec: GradientAuditSpec,
) -> Result<GradientAudit> {
    let n = data.n;
    let nf = n as f64;
    let sigma = spec.sigma;
    if !(sigma > 0.0) || spec.center - sigma < 0.0 || spec.center + sigma > grid.r_max() {
        return Err(Error::AuditInapplicable(format!("ball ({}, {sigma}) leaves the domain", spec.center)));
    }
    let idx: Vec<usize> = grid.window(spec.center - sigma, spec.center + sigma).collect();
    if idx.len() < 3 {
        return Err(Error::AuditInapplicable("ball contains fewer than 3 nodes".into()));
    }
    let nodes = grid.nodes();
    let locals = data.nodal(grid);
    let dw = grid.derivative(w, Parity::Even);

    // distance along the ray
    let dist: Vec<f64> = match spec.kind {
        PsiKind::Outer => idx.iter().map(|&i| (nodes[i] - spec.center).abs()).collect(),
        PsiKind::Inner => {
            let sqrt_a: Vec<f64> = locals.iter().map(|l| l.a.sqrt()).collect();
            let c = grid.nearest(spec.center);
            idx.iter()
                .map(|&i| {
                    let (lo, hi) = if i < c { (i, c) } else { (c, i) };
                    grid.integrate_range(&sqrt_a, lo, hi)
                })
                .collect()
        }
    };
    let inside: Vec<(usize, f64)> = idx.iter().zip(&dist).filter(|(_, d)| **d < sigma).map(|(&i, &d)| (i, d)).collect();
    let c0 = (inside.iter().map(|&(i, _)| w[i].abs()).fold(0.0, f64::max) / sigma).max(C0_FLOOR);
    let psi = |d: f64| 2.0 * c0 / sigma * (2.0 * d * d - sigma * sigma);

    let mut h = Hypotheses {
        ricci: 0.0,
        q: 0.0,
        dq: 0.0,
        psi: 8.0 * c0,
        dpsi: 0.0,
        hess_psi: 0.0,
        w_bound: 0.0,
        boundary_ok: true,
    };
    for &(i, _) in &inside {
        let l = &locals[i];
        let lam_min = l.a.min(l.c);
        let (ric_r, ric_t) = ricci_eigenvalues(n, l);
        h.ricci = h.ricci.max(-ric_r.min(ric_t) * sigma * sigma);
        h.q = h.q.max(nf * q_norm(n, l) * sigma);
        h.dq = h.dq.max(nf * q_covariant_norm(n, l) * sigma * sigma);
        let hess_d2 = match spec.kind {
            PsiKind::Outer => {
                // |D^2 |x-p|^2|_g <= (2 sqrt(n) + 2 sigma |Gamma|) / lambda_min in Cartesian coordinates
                let r = l.r.max(f64::MIN_POSITIVE);
                let dg = l.c1.abs() * nf.sqrt() + (l.a1 - l.c1).abs() + 2.0 * (nf - 1.0).sqrt() * (l.a - l.c).abs() / r;
                let gamma = 1.5 * dg / lam_min;
                h.dpsi = h.dpsi.max(32.0 * c0 / lam_min.sqrt());
                (2.0 * nf.sqrt() + 2.0 * sigma * gamma) / lam_min
            }
            PsiKind::Inner => {
                // Hessian comparison: d D^2 d <= (1 + k sigma) g for sectional curvature >= -k^2
                let (kr, kt) = sectional_curvatures(n, l);
                let k = (-kr.min(kt)).max(0.0).sqrt();
                h.dpsi = h.dpsi.max(32.0 * c0);
                2.0 * nf.sqrt() * (1.0 + k * sigma)
            }
        };
        h.hess_psi = h.hess_psi.max(16.0 * nf * c0 * hess_d2);
        let (z, dz) = cutoff(config.r0, l.r);
        let (z, dz) = (config.tau * z, config.tau * dz.abs() / l.a.sqrt());
        h.w_bound = h.w_bound.max((1.0 + z * z * sigma * sigma + dz * dz * sigma.powi(4)) * w[i].abs() / sigma);
    }
    // w < psi on the boundary sphere
    for (&i, &d) in idx.iter().zip(&dist) {
        if (d - sigma).abs() <= 1e-9 * sigma || d >= sigma {
            h.boundary_ok &= w[i] < psi(sigma);
        }
    }

    let a = match spec.a {
        Some(a) => {
            if !(a >= 4.0) || a < h.required() || !h.boundary_ok {
                return Err(Error::AuditInapplicable(format!(
                    "A = {a} below the required {} (boundary ok: {})",
                    h.required(),
                    h.boundary_ok
                )));
            }
            a
        }
        None => {
            if !h.boundary_ok {
                return Err(Error::AuditInapplicable("w >= psi on the boundary".into()));
            }
            h.required()
        }
    };
    let sup = inside
        .iter()
        .map(|&(i, d)| {
            let e = (a * a / sigma * (w[i] - psi(d))).exp_m1();
            e * (1.0 + dw[i] * dw[i] / locals[i].a).sqrt()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GradientAudit { spec: GradientAuditSpec { a: Some(a), ..spec }, a, c0, hypotheses: h, sup })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientStability {
    pub coarse: GradientAudit,
    pub fine: Option<GradientAudit>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    /// `|w| <= b(r) - b(r_j)` on `(r0, r_j]`.
    pub barrier: BoundCheck,
    /// `|w| <= 2 r0^{n-2} r^{3-n}` on `(2 r0, r_j]`.
    pub decay: BoundCheck,
    /// `sup |w| <= max{2^{4-n} r0, tau^{-2} sup n|q|}`.
    pub sup: BoundCheck,
    pub gradient_sups: Vec<f64>,
    pub gradient_uniform: bool,
    pub u_fit: Option<DecayFit>,
    pub du_fit: Option<DecayFit>,
    pub decay_fit: bool,
    pub gradient_estimate: Vec<GradientStability>,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.barrier.passed
            && self.decay.passed
            && self.sup.passed
            && self.gradient_uniform
            && self.decay_fit
            && self.gradient_estimate.iter().all(|g| g.passed)
    }
}

fn solve_scale(data: &RadialInitialData, config: &CapillaryConfig, grid: &RadialGrid, w: &[f64]) -> f64 {
    let q_sup = data.nodal(grid).iter().map(|l| q_norm(data.n, l)).fold(0.0, f64::max);
    config.tau * config.tau * w.iter().fold(0.0f64, |m, v| m.max(v.abs())) + q_sup
}

fn check_state(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    bp: &BarrierProfile,
    domain: &TruncatedDomain,
    state: &JangState,
    report: &mut EstimateReport,
) -> Result<()> {
    let n = data.n as f64;
    let r0 = bp.r0;
    let slack = BOUND_TOL * solve_scale(data, config, &domain.grid, &state.w);
    let b_j = bp.value(domain.r_j)?;
    for (&r, &w) in domain.grid.nodes().iter().zip(&state.w) {
        if r - r0 >= 1e-9 * r0 {
            report.barrier.record(r, w.abs(), bp.value(r)? - b_j, slack);
        }
        if r > 2.0 * r0 {
            report.decay.record(r, w.abs(), 2.0 * r0.powf(n - 2.0) * r.powf(3.0 - n), slack);
        }
    }
    let q_sup = data.nodal(&domain.grid).iter().map(|l| q_norm(data.n, l)).fold(0.0, f64::max);
    let cap = (2f64.powf(4.0 - n) * r0).max(n * q_sup / (config.tau * config.tau));
    let sup_w = state.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    report.sup.record(domain.r_j, sup_w, cap, slack);
    Ok(())
}

/// Audits (i)-(vi) on every iterate of `limit`. `refined`, when given, is the
/// same problem on the doubled grid and is used for the stability test of (vi).
pub fn estimate_audits(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    limit: &JangLimit,
    bp: &BarrierProfile,
    refined: Option<(&CapillaryConfig, &JangLimit)>,
) -> Result<EstimateReport> {
    let mut report = EstimateReport {
        barrier: BoundCheck::new(),
        decay: BoundCheck::new(),
        sup: BoundCheck::new(),
        gradient_sups: limit.trace.iter().map(|t| t.sup_gradient).collect(),
        gradient_uniform: true,
        u_fit: None,
        du_fit: None,
        decay_fit: true,
        gradient_estimate: vec![],
    };
    for (domain, state) in &limit.iterates {
        check_state(data, config, bp, domain, state, &mut report)?;
    }

    let mut sorted = report.gradient_sups.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    report.gradient_uniform = sorted.iter().all(|g| g.is_finite() && (g - median).abs() <= GRADIENT_SPREAD * median);

    let domain = limit.last_domain();
    let w = &limit.last_state().w;
    if w.iter().any(|v| *v != 0.0) {
        let n = data.n as f64;
        // the Dirichlet layer near r_j is excluded
        let window = (32.0 * bp.r0, 0.5 * domain.r_j);
        let du = domain.grid.derivative(w, Parity::Even);
        match (fit_decay_exponent(w, &domain.grid, window), fit_decay_exponent(&du, &domain.grid, window)) {
            (Ok(fu), Ok(fd)) => {
                report.decay_fit = fu.exponent <= -(n - 3.0) + 0.2 && fd.exponent <= -(n - 2.0) + 0.2;
                report.u_fit = Some(fu);
                report.du_fit = Some(fd);
            }
            _ => report.decay_fit = false,
        }
    }

    for spec in GradientAuditSpec::defaults(bp.r0, domain.r_j) {
        let mut coarse = gradient_audit(data, config, &domain.grid, w, spec)?;
        let fine = match refined {
            Some((cfg, lim)) => {
                let (grid, w_fine) = (&lim.last_domain().grid, &lim.last_state().w);
                let fine = gradient_audit(data, cfg, grid, w_fine, spec)?;
                // compare at a common A
                let common = GradientAuditSpec { a: Some(coarse.a.max(fine.a)), ..spec };
                coarse = gradient_audit(data, config, &domain.grid, w, common)?;
                Some(gradient_audit(data, cfg, grid, w_fine, common)?)
            }
            None => None,
        };
        let passed = coarse.sup.is_finite()
            && fine.as_ref().is_none_or(|f| {
                f.sup.is_finite() && (f.sup - coarse.sup).abs() <= STABILITY * f.sup.abs().max(coarse.sup.abs())
            });
        report.gradient_estimate.push(GradientStability { coarse, fine, passed });
    }
    Ok(report)
}
