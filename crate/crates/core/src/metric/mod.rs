// SPDX-License-Identifier: Apache-2.0

//! Geometry of the graph metric `g + du (x) du`, the Schoen-Yau identity and
//! its consequences.

pub mod shielding;
pub mod stability;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::capillary::{cutoff, CapillaryConfig};
use crate::geometry::curvature::{
    graph_curvature_shift, log_areal_derivative, momentum_density, q_norm, warped_scalar_curvature,
};
use crate::geometry::data::{Local, RadialInitialData};
use crate::grid::{Parity, RadialGrid};
use crate::jang::operator::frame_hessian;

pub use shielding::{build_shielding, neighborhood_audit, shielding_audit, NeighborhoodReport, ShieldingData};
pub use stability::{stability_audit, StabilityReport, TestFunction};

/// Trailing nodes left out of nodewise audits: the Dirichlet row and the
/// one-sided stencils next to it.
pub const BOUNDARY_NODES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct JangGraphGeometry {
    pub n: usize,
    pub grid: RadialGrid,
    pub locals: Vec<Local>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
    /// `a + u'^2`.
    pub g_check_rr: Vec<f64>,
    pub g_check_rr1: Vec<f64>,
    /// `c r^2`.
    pub g_check_tan: Vec<f64>,
    /// Coordinate component `Xi_r`.
    pub xi: Vec<f64>,
    /// Unit-frame component `Xi_r / sqrt(a + u'^2)`.
    pub xi_rad: Vec<f64>,
    pub div_xi: Vec<f64>,
    pub r_check: Vec<f64>,
    /// `R_g`, and `R_check - R_g` evaluated without cancellation.
    pub r_base: Vec<f64>,
    pub r_shift: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
}

impl JangGraphGeometry {
    /// Nodes covered by nodewise audits.
    pub fn audited(&self) -> std::ops::Range<usize> {
        0..self.grid.len().saturating_sub(BOUNDARY_NODES)
    }

    /// `1/2 R - |Xi|^2 + div Xi` of the graph metric.
    pub fn lhs(&self, i: usize) -> f64 {
        0.5 * self.r_check[i] - self.xi_rad[i] * self.xi_rad[i] + self.div_xi[i]
    }

    /// `|du|_g^2`.
    pub fn grad_sq(&self, i: usize) -> f64 {
        self.du[i] * self.du[i] / self.locals[i].a
    }
}

/// Graph geometry of `u` on `grid` with `Theta = tau^2 zeta^2 u`.
pub fn build_graph_geometry(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    u: &[f64],
    grid: &RadialGrid,
) -> Result<JangGraphGeometry> {
    let du = grid.derivative(u, Parity::Even);
    let tau2 = config.tau * config.tau;
    let (theta, dtheta) = grid
        .nodes()
        .iter()
        .zip(u.iter().zip(&du))
        .map(|(&r, (&u, &du))| {
            let (z, dz) = cutoff(config.r0, r);
            (tau2 * z * z * u, tau2 * (2.0 * z * dz * u + z * z * du))
        })
        .unzip();
    assemble(data, u, grid, theta, dtheta)
}

/// Graph geometry of an arbitrary `w` with a given source `Theta`.
pub fn build_with_source(data: &RadialInitialData, w: &[f64], grid: &RadialGrid, theta: Vec<f64>) -> Result<JangGraphGeometry> {
    let dtheta = grid.derivative(&theta, Parity::Even);
    assemble(data, w, grid, theta, dtheta)
}

fn assemble(
    data: &RadialInitialData,
    u: &[f64],
    grid: &RadialGrid,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
) -> Result<JangGraphGeometry> {
    if u.len() != grid.len() {
        return Err(Error::InvalidArgument("u must have one value per node".into()));
    }
    let n = data.n;
    let nf = n as f64;
    let locals = data.nodal(grid);
    let du = grid.derivative(u, Parity::Even);
    let ddu = grid.second_derivative(u, Parity::Even);
    let len = u.len();
    let mut g_rr = vec![0.0; len];
    let mut g_rr1 = vec![0.0; len];
    let mut g_tan = vec![0.0; len];
    let mut r_check = vec![0.0; len];
    let mut r_base = vec![0.0; len];
    let mut r_shift = vec![0.0; len];
    let mut xi = vec![0.0; len];
    for i in 0..len {
        let l = &locals[i];
        let big_a = l.a + du[i] * du[i];
        let big_a1 = l.a1 + 2.0 * du[i] * ddu[i];
        g_rr[i] = big_a;
        g_rr1[i] = big_a1;
        g_tan[i] = l.c * l.r * l.r;
        r_base[i] = warped_scalar_curvature(n, l.r, l.a, l.a1, l.a2, l.c, l.c1, l.c2);
        r_shift[i] = graph_curvature_shift(n, l, du[i], ddu[i]);
        r_check[i] = r_base[i] + r_shift[i];
        let s = 1.0 + du[i] * du[i] / l.a;
        let s1 = 2.0 * du[i] * ddu[i] / l.a - du[i] * du[i] * l.a1 / (l.a * l.a);
        xi[i] = 0.5 * s1 / s - l.q_rad * du[i] / s.sqrt();
    }
    let dxi = grid.derivative(&xi, Parity::Odd);
    let mut div_xi = vec![0.0; len];
    for i in 0..len {
        div_xi[i] = match log_areal_derivative(&locals[i]) {
            None => nf * dxi[i] / g_rr[i],
            Some(k) => (dxi[i] + xi[i] * ((nf - 1.0) * k - g_rr1[i] / (2.0 * g_rr[i]))) / g_rr[i],
        };
    }
    let xi_rad: Vec<f64> = xi.iter().zip(&g_rr).map(|(x, a)| x / a.sqrt()).collect();
    if let Some(i) = (0..len).find(|&i| !(r_check[i].is_finite() && div_xi[i].is_finite() && xi[i].is_finite())) {
        return Err(Error::NumericalDegeneracy(format!("graph geometry not finite at r = {}", grid.nodes()[i])));
    }
    Ok(JangGraphGeometry {
        n,
        grid: grid.clone(),
        locals,
        u: u.to_vec(),
        du,
        ddu,
        g_check_rr: g_rr,
        g_check_rr1: g_rr1,
        g_check_tan: g_tan,
        xi,
        xi_rad,
        div_xi,
        r_check,
        r_base,
        r_shift,
        theta,
        dtheta,
    })
}

/// Right side of the Schoen-Yau identity at node `i`.
pub fn identity_rhs(geo: &JangGraphGeometry, i: usize) -> f64 {
    0.5 * geo.r_base[i] + rhs_without_curvature(geo, i)
}

/// Both sides minus `R_g / 2`, which they share.
fn reduced_sides(geo: &JangGraphGeometry, i: usize) -> (f64, f64) {
    let lhs = 0.5 * geo.r_shift[i] - geo.xi_rad[i] * geo.xi_rad[i] + geo.div_xi[i];
    (lhs, rhs_without_curvature(geo, i))
}

fn rhs_without_curvature(geo: &JangGraphGeometry, i: usize) -> f64 {
    let n = geo.n;
    let m = n as f64 - 1.0;
    let l = &geo.locals[i];
    let (u1, u2) = (geo.du[i], geo.ddu[i]);
    let s = 1.0 + u1 * u1 / l.a;
    let rs = s.sqrt();
    let (h_rr, h_tt) = frame_hessian(l, u1, u2);
    let hr = h_rr / rs - l.q_rad;
    let ht = h_tt / rs - l.q_tan;
    let tr = l.q_rad + m * l.q_tan;
    let mu_rest = 0.5 * (tr * tr - (l.q_rad * l.q_rad + m * l.q_tan * l.q_tan));
    let th = geo.theta[i];
    0.5 * (hr * hr / (s * s) + m * ht * ht) + mu_rest - u1 / l.a.sqrt() * momentum_density(n, l) / rs
        + u1 * geo.dtheta[i] / (l.a * rs)
        + 0.5 * th * th
        + th * (l.q_rad / s + m * l.q_tan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_radius: f64,
    /// Observed order from this grid and its refinement.
    pub order: Option<f64>,
}

fn identity_errors(geo: &JangGraphGeometry) -> (f64, f64, f64) {
    let mut max_err: f64 = 0.0;
    let mut max_rhs: f64 = 0.0;
    let mut worst = 0.0;
    for i in geo.audited() {
        let rhs = identity_rhs(geo, i);
        let (lhs_red, rhs_red) = reduced_sides(geo, i);
        let err = (lhs_red - rhs_red).abs();
        if err > max_err {
            max_err = err;
            worst = geo.grid.nodes()[i];
        }
        max_rhs = max_rhs.max(rhs.abs());
    }
    (max_err, max_rhs, worst)
}

/// Compares both sides of the identity nodewise; `fine` is the same solve on
/// the refined grid.
pub fn schoen_yau_audit(geo: &JangGraphGeometry, fine: Option<&JangGraphGeometry>) -> IdentityReport {
    let (err, rhs, worst) = identity_errors(geo);
    let rel = if rhs > 0.0 { err / rhs } else { err };
    let order = fine.map(|f| {
        let (err_f, _, _) = identity_errors(f);
        (err / err_f).log2()
    });
    IdentityReport { max_rel_err: rel, max_abs_err: err, worst_radius: worst, order }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsequenceReport {
    pub passed: bool,
    pub min_margin: f64,
    pub min_radius: f64,
    pub first_violation: Option<f64>,
    pub tolerance: f64,
    #[serde(skip)]
    pub margin: Vec<f64>,
}

/// Lower bound `Q + (kappa0^2 - tau^2 u^2)|d zeta|^2 + (kappa1 - tau^2 |u|) zeta^2 n |q|`.
pub fn consequence_bound(config: &CapillaryConfig, n: usize, l: &Local, u: f64) -> f64 {
    let tau2 = config.tau * config.tau;
    let (z, dz) = cutoff(config.r0, l.r);
    let dz2 = dz * dz / l.a;
    config.q_at(l.r)
        + (config.kappa0 * config.kappa0 - tau2 * u * u) * dz2
        + (config.kappa1 - tau2 * u.abs()) * z * z * n as f64 * q_norm(n, l)
}

/// `LHS - bound` at every audited node; passes when it is at least
/// `-1e-8 (tau^2 sup|u| + sup|q|)`.
pub fn consequence_audit(config: &CapillaryConfig, geo: &JangGraphGeometry) -> ConsequenceReport {
    let n = geo.n;
    let nodes = geo.grid.nodes();
    let q_sup = geo.locals.iter().map(|l| q_norm(n, l)).fold(0.0, f64::max);
    let u_sup = geo.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-8 * (config.tau * config.tau * u_sup + q_sup);
    let margin: Vec<f64> =
        geo.audited().map(|i| geo.lhs(i) - consequence_bound(config, n, &geo.locals[i], geo.u[i])).collect();
    let (k, min_margin) =
        margin.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc });
    let first_violation = margin.iter().position(|&m| !(m >= -tolerance)).map(|i| nodes[i]);
    ConsequenceReport {
        passed: first_violation.is_none(),
        min_margin,
        min_radius: nodes[k],
        first_violation,
        tolerance,
        margin,
    }
}
