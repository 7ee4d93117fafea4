// SPDX-License-Identifier: Apache-2.0

//! Warped-product tensor calculus for `g = a dr^2 + rho(r)^2 sigma`, `rho = r sqrt(c)`.

use serde::Serialize;

use super::data::{Local, RadialInitialData};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::quad;

const DEGENERACY_FLOOR: f64 = 1e-10;

/// Areal radius `rho = r sqrt(c)` and its first two `r`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Areal {
    pub rho: f64,
    pub rho1: f64,
    pub rho2: f64,
}

pub fn areal(r: f64, c: f64, c1: f64, c2: f64) -> Areal {
    let sc = c.sqrt();
    Areal {
        rho: r * sc,
        rho1: sc + r * c1 / (2.0 * sc),
        rho2: c1 / sc + r * (c2 / (2.0 * sc) - c1 * c1 / (4.0 * c * sc)),
    }
}

/// Coordinate Christoffel symbols `(Gamma^r_rr, Gamma^r_tt / sigma, Gamma^t_rt)`.
pub fn christoffel(a: f64, a1: f64, ar: Areal) -> (f64, f64, f64) {
    (a1 / (2.0 * a), -ar.rho * ar.rho1 / a, ar.rho1 / ar.rho)
}

/// Scalar curvature of `A dr^2 + c r^2 sigma` in dimension `n`. At `r = 0`
/// the even-profile limit `n(n-1)(A''(0) - 3 c''(0)) / (2 A(0)^2)` is used.
#[allow(clippy::too_many_arguments)]
pub fn warped_scalar_curvature(n: usize, r: f64, a: f64, a1: f64, a2: f64, c: f64, c1: f64, c2: f64) -> f64 {
    let m = n as f64 - 1.0;
    if r == 0.0 {
        return (m + 1.0) * m * (0.5 * a2 - 1.5 * c2) / (a * a);
    }
    let ar = areal(r, c, c1, c2);
    let rho_s = ar.rho1 / a.sqrt();
    let rho_ss = (ar.rho2 - ar.rho1 * a1 / (2.0 * a)) / a;
    -2.0 * m * rho_ss / ar.rho + m * (m - 1.0) * (1.0 - rho_s * rho_s) / (ar.rho * ar.rho)
}

/// `R(A dr^2 + c r^2 sigma) - R(a dr^2 + c r^2 sigma)` for `A = a + u'^2`,
/// `A' = a' + 2 u' u''`, arranged so that no O(1) terms cancel.
pub fn graph_curvature_shift(n: usize, l: &Local, u1: f64, u2: f64) -> f64 {
    let m = n as f64 - 1.0;
    if l.r == 0.0 {
        return (m + 1.0) * m * u2 * u2 / (l.a * l.a);
    }
    let ar = areal(l.r, l.c, l.c1, l.c2);
    let v = u1 * u1;
    let big_a = l.a + v;
    let w = 2.0 * u1 * u2;
    let inv_diff = -v / (l.a * big_a);
    let ratio_diff = (w * l.a * l.a - l.a1 * (2.0 * l.a * v + v * v)) / (l.a * l.a * big_a * big_a);
    let d_rho_ss = ar.rho2 * inv_diff - 0.5 * ar.rho1 * ratio_diff;
    let d_rho_s2 = ar.rho1 * ar.rho1 * inv_diff;
    -2.0 * m * d_rho_ss / ar.rho - m * (m - 1.0) * d_rho_s2 / (ar.rho * ar.rho)
}

/// Orthonormal-frame Ricci eigenvalues `(radial, tangential)`.
pub fn ricci_eigenvalues(n: usize, l: &Local) -> (f64, f64) {
    if l.r == 0.0 {
        let iso = warped_scalar_curvature(n, 0.0, l.a, l.a1, l.a2, l.c, l.c1, l.c2) / n as f64;
        return (iso, iso);
    }
    let ar = areal(l.r, l.c, l.c1, l.c2);
    let rho_s = ar.rho1 / l.a.sqrt();
    let rho_ss = (ar.rho2 - ar.rho1 * l.a1 / (2.0 * l.a)) / l.a;
    let m = n as f64 - 1.0;
    let k = rho_ss / ar.rho;
    (-m * k, -k + (m - 1.0) * (1.0 - rho_s * rho_s) / (ar.rho * ar.rho))
}

/// Sectional curvatures `(radial planes, tangential planes)`.
pub fn sectional_curvatures(n: usize, l: &Local) -> (f64, f64) {
    if l.r == 0.0 {
        let k = warped_scalar_curvature(n, 0.0, l.a, l.a1, l.a2, l.c, l.c1, l.c2) / (n * (n - 1)) as f64;
        return (k, k);
    }
    let ar = areal(l.r, l.c, l.c1, l.c2);
    let rho_s = ar.rho1 / l.a.sqrt();
    let rho_ss = (ar.rho2 - ar.rho1 * l.a1 / (2.0 * l.a)) / l.a;
    (-rho_ss / ar.rho, (1.0 - rho_s * rho_s) / (ar.rho * ar.rho))
}

/// `rho'/rho`, or `None` at the origin.
pub fn log_areal_derivative(l: &Local) -> Option<f64> {
    (l.r > 0.0).then(|| {
        let ar = areal(l.r, l.c, l.c1, l.c2);
        ar.rho1 / ar.rho
    })
}

pub fn q_norm(n: usize, l: &Local) -> f64 {
    (l.q_rad * l.q_rad + (n as f64 - 1.0) * l.q_tan * l.q_tan).sqrt()
}

pub fn q_trace(n: usize, l: &Local) -> f64 {
    l.q_rad + (n as f64 - 1.0) * l.q_tan
}

/// Frame component of `J_k = g^{ij} D_i q_{jk} - d_k tr(q)`:
/// `(n-1)/sqrt(a) * ((rho'/rho)(q_rad - q_tan) - q_tan')`.
pub fn momentum_density(n: usize, l: &Local) -> f64 {
    match log_areal_derivative(l) {
        None => 0.0,
        Some(k) => (n as f64 - 1.0) / l.a.sqrt() * (k * (l.q_rad - l.q_tan) - l.q_tan1),
    }
}

/// `|Dq|_g` for diagonal radial `q`.
pub fn q_covariant_norm(n: usize, l: &Local) -> f64 {
    let m = n as f64 - 1.0;
    let sa = l.a.sqrt();
    let cross = log_areal_derivative(l).map_or(0.0, |k| k * (l.q_rad - l.q_tan) / sa);
    (l.q_rad1 * l.q_rad1 / l.a + m * l.q_tan1 * l.q_tan1 / l.a + 2.0 * m * cross * cross).sqrt()
}

fn check_nondegenerate(locals: &[Local]) -> Result<()> {
    if let Some(l) = locals.iter().find(|l| !(l.a >= DEGENERACY_FLOOR && l.c >= DEGENERACY_FLOOR)) {
        return Err(Error::NumericalDegeneracy(format!(
            "a = {:e}, c = {:e} at r = {}",
            l.a, l.c, l.r
        )));
    }
    Ok(())
}

/// `R_g` at every node.
pub fn scalar_curvature(data: &RadialInitialData, grid: &RadialGrid) -> Result<Vec<f64>> {
    let locals = data.nodal(grid);
    check_nondegenerate(&locals)?;
    Ok(locals
        .iter()
        .map(|l| warped_scalar_curvature(data.n, l.r, l.a, l.a1, l.a2, l.c, l.c1, l.c2))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintFields {
    pub r: Vec<f64>,
    pub r_g: Vec<f64>,
    pub mu: Vec<f64>,
    pub j_rad: Vec<f64>,
    pub margin: Vec<f64>,
}

impl ConstraintFields {
    /// `(min margin, radius where attained)`.
    pub fn min_margin(&self) -> (f64, f64) {
        self.margin
            .iter()
            .zip(&self.r)
            .fold((f64::INFINITY, 0.0), |acc, (&m, &r)| if m < acc.0 { (m, r) } else { acc })
    }
}

pub fn constraint_fields(data: &RadialInitialData, grid: &RadialGrid) -> Result<ConstraintFields> {
    let n = data.n;
    let locals = data.nodal(grid);
    check_nondegenerate(&locals)?;
    let mut f = ConstraintFields {
        r: Vec::with_capacity(locals.len()),
        r_g: Vec::with_capacity(locals.len()),
        mu: Vec::with_capacity(locals.len()),
        j_rad: Vec::with_capacity(locals.len()),
        margin: Vec::with_capacity(locals.len()),
    };
    for l in &locals {
        let r_g = warped_scalar_curvature(n, l.r, l.a, l.a1, l.a2, l.c, l.c1, l.c2);
        let qn = q_norm(n, l);
        let tr = q_trace(n, l);
        let mu = 0.5 * (r_g - qn * qn + tr * tr);
        let j = momentum_density(n, l);
        f.r.push(l.r);
        f.r_g.push(r_g);
        f.mu.push(mu);
        f.j_rad.push(j);
        f.margin.push(mu - j.abs());
    }
    Ok(f)
}

/// `int_{r_from}^{r_to} sqrt(a) dr`.
pub fn geodesic_distance(data: &RadialInitialData, r_from: f64, r_to: f64) -> Result<f64> {
    if !(r_from >= 0.0) || !(r_to >= r_from) {
        return Err(Error::InvalidArgument(format!("need 0 <= r_from <= r_to, got [{r_from}, {r_to}]")));
    }
    quad::integrate_with(|r| data.a_at(r).sqrt(), r_from, r_to, 1e-13, 1e-15 * (r_to - r_from), 4000)
}
