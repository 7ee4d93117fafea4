// SPDX-License-Identifier: Apache-2.0

//! The quadratic form `int |df|^2 + R f^2 / 2 - Q f^2` of the graph metric on
//! radial test functions that are constant near infinity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::JangGraphGeometry;
use crate::error::{Error, Result};
use crate::geometry::capillary::CapillaryConfig;
use crate::par::{self, Exec};
use crate::spline::CubicSpline;

const SPLINE_KNOTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// Smooth bump rising on `[lo, mid]` and falling on `[mid, hi]`, zero outside.
    Bump { lo: f64, hi: f64 },
    /// Cubic spline through `(knots, values)`, equal to the last value beyond the last knot.
    Spline { knots: Vec<f64>, values: Vec<f64> },
}

fn smoothstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    (x * x * x * (10.0 + x * (-15.0 + 6.0 * x)), 30.0 * x * x * (1.0 - x) * (1.0 - x))
}

impl TestFunction {
    /// `(f, f')` at every radius.
    pub fn sample(&self, r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestFunction::Constant(c) => (vec![*c; r.len()], vec![0.0; r.len()]),
            TestFunction::Bump { lo, hi } => {
                let half = 0.5 * (hi - lo);
                r.iter()
                    .map(|&r| {
                        if r <= *lo || r >= *hi {
                            (0.0, 0.0)
                        } else if r <= lo + half {
                            let (s, ds) = smoothstep((r - lo) / half);
                            (s, ds / half)
                        } else {
                            let (s, ds) = smoothstep((hi - r) / half);
                            (s, -ds / half)
                        }
                    })
                    .unzip()
            }
            TestFunction::Spline { knots, values } => {
                let sp = CubicSpline::new(knots, values);
                let end = *knots.last().unwrap();
                let tail = *values.last().unwrap();
                r.iter().map(|&r| if r >= end { (tail, 0.0) } else { (sp.eval(r), sp.derivative(r)) }).unzip()
            }
        }
    }
}

/// `f == 1`, a bump on `[8 r0, 32 r0]` and `count` random splines on `[0, 32 r0]`.
pub fn default_test_functions(r0: f64, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = 32.0 * r0;
    let knots: Vec<f64> = (0..SPLINE_KNOTS).map(|k| end * k as f64 / (SPLINE_KNOTS - 1) as f64).collect();
    let mut out = vec![TestFunction::Constant(1.0), TestFunction::Bump { lo: 8.0 * r0, hi: end }];
    for _ in 0..count {
        let values = (0..SPLINE_KNOTS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        out.push(TestFunction::Spline { knots: knots.clone(), values });
    }
    out
}

/// `|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    let half_gamma = if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product::<f64>()
    } else {
        let k = (n - 1) / 2;
        (0..k).fold(std::f64::consts::PI.sqrt(), |g, j| g * (j as f64 + 0.5))
    };
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / half_gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormValue {
    pub value: f64,
    pub scale: f64,
    /// `int div(f^2 Xi)` minus the flux through the outer sphere, relative.
    pub divergence_defect: f64,
}

/// Volume weight `sqrt(A) rho^{n-1} |S^{n-1}|` at the nodes.
fn volume_weights(geo: &JangGraphGeometry) -> Vec<f64> {
    let omega = sphere_area(geo.n);
    (0..geo.grid.len())
        .map(|i| {
            let l = &geo.locals[i];
            omega * geo.g_check_rr[i].sqrt() * (l.r * l.c.sqrt()).powi(geo.n as i32 - 1)
        })
        .collect()
}

/// `Ê = { |u| < min{kappa0/tau, kappa1/tau^2} }` at the nodes.
pub fn admissible_region(config: &CapillaryConfig, geo: &JangGraphGeometry) -> Vec<bool> {
    let cap = 2.0 * config.u_cap();
    geo.u.iter().map(|u| u.abs() < cap).collect()
}

pub fn check_admissible(f: &TestFunction, region: &[bool], r: &[f64]) -> Result<()> {
    let (vals, _) = f.sample(r);
    match (0..r.len()).find(|&i| !region[i] && vals[i] != 0.0) {
        Some(i) => Err(Error::InadmissibleTestFunction(format!("nonzero at r = {} outside the admissible set", r[i]))),
        None => Ok(()),
    }
}

pub fn quadratic_form(config: &CapillaryConfig, geo: &JangGraphGeometry, f: &TestFunction) -> FormValue {
    let r = geo.grid.nodes();
    let (fv, df) = f.sample(r);
    let vol = volume_weights(geo);
    let hi = geo.audited().end - 1;
    let mut form = vec![0.0; r.len()];
    let mut size = vec![0.0; r.len()];
    let mut div = vec![0.0; r.len()];
    let mut div_size = vec![0.0; r.len()];
    for i in 0..r.len() {
        let a = geo.g_check_rr[i];
        let q = config.q_at(r[i]);
        let grad = df[i] * df[i] / a;
        let f2 = fv[i] * fv[i];
        form[i] = (grad + 0.5 * geo.r_check[i] * f2 - q * f2) * vol[i];
        size[i] = (grad + 0.5 * geo.r_check[i].abs() * f2 + q * f2) * vol[i];
        let d1 = f2 * geo.div_xi[i];
        let d2 = 2.0 * fv[i] * df[i] * geo.xi[i] / a;
        div[i] = (d1 + d2) * vol[i];
        div_size[i] = (d1.abs() + d2.abs()) * vol[i];
    }
    let flux = vol[hi] * fv[hi] * fv[hi] * geo.xi[hi] / geo.g_check_rr[hi];
    let div_int = geo.grid.integrate_range(&div, 0, hi);
    let div_scale = geo.grid.integrate_range(&div_size, 0, hi).max(f64::MIN_POSITIVE);
    FormValue {
        value: geo.grid.integrate_range(&form, 0, hi),
        scale: geo.grid.integrate_range(&size, 0, hi),
        divergence_defect: (div_int - flux).abs() / div_scale,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n_tested: usize,
    pub min_value: f64,
    pub max_divergence_defect: f64,
    pub passed: bool,
    pub values: Vec<FormValue>,
}

/// Evaluates the form on every test function; all must be admissible.
pub fn stability_audit(
    config: &CapillaryConfig,
    geo: &JangGraphGeometry,
    fns: &[TestFunction],
    exec: Exec,
) -> Result<StabilityReport> {
    let region = admissible_region(config, geo);
    for f in fns {
        check_admissible(f, &region, geo.grid.nodes())?;
    }
    let values = par::map(exec, fns, |f| quadratic_form(config, geo, f));
    let min_value = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let passed = values.iter().all(|v| v.value >= -1e-8 * v.scale);
    let max_divergence_defect = values.iter().map(|v| v.divergence_defect).fold(0.0, f64::max);
    Ok(StabilityReport { n_tested: values.len(), min_value, max_divergence_defect, passed, values })
}
