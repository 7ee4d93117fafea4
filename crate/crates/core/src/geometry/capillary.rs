// SPDX-License-Identifier: Apache-2.0

//! Cutoff `zeta`, the constants `kappa0, kappa1, s0, s1, tau` and the density
//! floor `Q` that parametrize the capillary Jang problems.

use serde::Serialize;

use super::curvature::{constraint_fields, geodesic_distance, q_norm};
use super::data::RadialInitialData;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;

const KAPPA_SAFETY: f64 = 4.0;
const Q_FRACTION: f64 = 0.45;
const COLLAR_CONSTANT: f64 = 128.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapillaryConfig {
    pub n: usize,
    pub r0: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub s0: f64,
    pub s1: f64,
    pub tau: f64,
    /// `E0 = { r > e0_threshold }`, `e0_threshold = 8 r0`.
    pub e0_threshold: f64,
    /// Inner radius of the g-geodesic `2 s0` collar of `E0`.
    pub collar_inner: f64,
    #[serde(skip)]
    pub r: Vec<f64>,
    #[serde(skip)]
    pub zeta: Vec<f64>,
    /// `|d zeta|_g` at the nodes.
    #[serde(skip)]
    pub dzeta: Vec<f64>,
    #[serde(skip)]
    pub q: Vec<f64>,
}

/// Quintic smoothstep cutoff: 1 on `r <= 4 r0`, 0 on `r >= 8 r0`. Returns `(zeta, zeta')`.
pub fn cutoff(r0: f64, r: f64) -> (f64, f64) {
    let x = ((8.0 * r0 - r) / (4.0 * r0)).clamp(0.0, 1.0);
    let z = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
    let dz = if x > 0.0 && x < 1.0 { -30.0 * x * x * (1.0 - x) * (1.0 - x) / (4.0 * r0) } else { 0.0 };
    (z, dz)
}

impl CapillaryConfig {
    /// `zeta` at any radius.
    pub fn zeta_at(&self, r: f64) -> f64 {
        cutoff(self.r0, r).0
    }

    /// `Q` at any radius inside the grid (linear between nodes).
    pub fn q_at(&self, r: f64) -> f64 {
        let i = self.r.partition_point(|&x| x <= r);
        if i == 0 {
            return self.q[0];
        }
        if i >= self.r.len() {
            return *self.q.last().unwrap();
        }
        let t = (r - self.r[i - 1]) / (self.r[i] - self.r[i - 1]);
        self.q[i - 1] + t * (self.q[i] - self.q[i - 1])
    }

    /// `(1/2) min{kappa0 / tau, kappa1 / tau^2}`.
    pub fn u_cap(&self) -> f64 {
        0.5 * (self.kappa0 / self.tau).min(self.kappa1 / (self.tau * self.tau))
    }

    /// Left side of the `tau` inequality, `2^{10-3n} r0 + s1 + 2 s0`.
    pub fn collar_length(&self) -> f64 {
        2f64.powi(10 - 3 * self.n as i32) * self.r0 + self.s1 + 2.0 * self.s0
    }
}

pub fn select_capillary_config(data: &RadialInitialData, r0: f64, grid: &RadialGrid) -> Result<CapillaryConfig> {
    let n = data.n;
    let nf = n as f64;
    let fields = constraint_fields(data, grid)?;
    let (min_margin, radius) = fields.min_margin();
    if !(min_margin > 0.0) {
        return Err(Error::DecViolation { min_margin, radius });
    }
    if !(r0 > 0.0) || grid.r_max() < 64.0 * r0 {
        return Err(Error::InvalidArgument(format!(
            "grid r_max = {} must cover 64 r0 = {}",
            grid.r_max(),
            64.0 * r0
        )));
    }
    let locals = data.nodal(grid);
    let r: Vec<f64> = grid.nodes().to_vec();
    let (zeta, dzeta): (Vec<f64>, Vec<f64>) = locals
        .iter()
        .map(|l| {
            let (z, dz) = cutoff(r0, l.r);
            (z, dz.abs() / l.a.sqrt())
        })
        .unzip();
    let margin = &fields.margin;

    let kappa0 = dzeta
        .iter()
        .zip(margin)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, m)| m / (KAPPA_SAFETY * d * d))
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let kappa1 = locals
        .iter()
        .zip(&zeta)
        .zip(margin)
        .filter(|((l, z), _)| **z > 0.0 && q_norm(n, l) > 0.0)
        .map(|((l, z), m)| m / (KAPPA_SAFETY * z * z * nf * q_norm(n, l)))
        .fold(f64::INFINITY, f64::min);
    let kappa1 = if kappa1.is_finite() { kappa1 } else { 1.0 };

    let decay = nf + 2.0 * data.delta;
    let m_q = r
        .iter()
        .zip(margin)
        .map(|(x, m)| m * (1.0 + x).powf(decay))
        .fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = r
        .iter()
        .zip(margin)
        .map(|(x, m)| Q_FRACTION * m.min(m_q * (1.0 + x).powf(-decay)))
        .collect();
    let mut q = raw.clone();
    for i in 1..raw.len() - 1 {
        q[i] = (raw[i - 1] + raw[i] + raw[i + 1]) / 3.0;
    }

    let e0 = 8.0 * r0;
    let s0 = r0 / 4.0;
    let collar_inner = collar_inner_radius(data, e0, 2.0 * s0)?;
    let q_collar = r
        .iter()
        .zip(&q)
        .filter(|(x, _)| **x >= collar_inner && **x <= e0)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    if !q_collar.is_finite() {
        return Err(Error::ConfigFailure("no grid node inside the 2 s0 collar of E0".into()));
    }
    let s1 = s0.max(2.0 * COLLAR_CONSTANT / (s0 * q_collar));
    let len = 2f64.powi(10 - 3 * n as i32) * r0 + s1 + 2.0 * s0;
    let tau = (kappa0 / (2.0 * len)).min((kappa1 / (2.0 * len)).sqrt());

    let cfg = CapillaryConfig {
        n,
        r0,
        kappa0,
        kappa1,
        s0,
        s1,
        tau,
        e0_threshold: e0,
        collar_inner,
        r,
        zeta,
        dzeta,
        q,
    };
    let report = check_capillary_config(data, grid, &cfg)?;
    if !report.all() {
        return Err(Error::ConfigFailure(format!("{report:?}")));
    }
    Ok(cfg)
}

/// Smallest radius within g-distance `width` of `{r >= outer}` (0 when the collar
/// swallows the origin), by bisection on the geodesic distance.
pub fn collar_inner_radius(data: &RadialInitialData, outer: f64, width: f64) -> Result<f64> {
    if geodesic_distance(data, 0.0, outer)? <= width {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, outer);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if geodesic_distance(data, mid, outer)? > width {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CapillaryReport {
    pub cutoff_supports: bool,
    pub density_floor: bool,
    pub q_decay: bool,
    pub collar: bool,
    pub tau: bool,
}

impl CapillaryReport {
    pub fn all(&self) -> bool {
        self.cutoff_supports && self.density_floor && self.q_decay && self.collar && self.tau
    }
}

/// Re-derives every invariant from the returned fields. Distances here are
/// Simpson sums over the nodes, not the adaptive quadrature the constructor uses.
pub fn check_capillary_config(
    data: &RadialInitialData,
    grid: &RadialGrid,
    cfg: &CapillaryConfig,
) -> Result<CapillaryReport> {
    let n = data.n;
    let nf = n as f64;
    let fields = constraint_fields(data, grid)?;
    let locals = data.nodal(grid);
    let nodes = grid.nodes();
    if cfg.r.len() != nodes.len() {
        return Err(Error::InvalidArgument("config was built on a different grid".into()));
    }

    let cutoff_supports = nodes.iter().zip(&cfg.zeta).all(|(&r, &z)| {
        (0.0..=1.0).contains(&z) && (r <= 8.0 * cfg.r0 || z == 0.0) && (r > 4.0 * cfg.r0 || z == 1.0)
    });

    let density_floor = (0..nodes.len()).all(|i| {
        let lhs = fields.margin[i]
            - cfg.kappa0 * cfg.kappa0 * cfg.dzeta[i] * cfg.dzeta[i]
            - cfg.kappa1 * cfg.zeta[i] * cfg.zeta[i] * nf * q_norm(n, &locals[i]);
        cfg.q[i] > 0.0 && lhs >= cfg.q[i]
    });

    let decay = nf + 2.0 * data.delta;
    let outer = grid.outer_third();
    let weighted: Vec<f64> = outer.clone().map(|i| cfg.q[i] * nodes[i].powf(decay)).collect();
    let q_decay = weighted.iter().all(|w| w.is_finite() && *w <= 2.0 * weighted[0]);

    // Distance from each node to E0 by Simpson sums of sqrt(a).
    let e0 = 8.0 * cfg.r0;
    let sqrt_a: Vec<f64> = locals.iter().map(|l| l.a.sqrt()).collect();
    let e0_idx = nodes.partition_point(|&r| r <= e0);
    let mut collar_ok = cfg.s1 >= cfg.s0;
    let bound = COLLAR_CONSTANT / (cfg.s1 * cfg.s0);
    for i in (0..e0_idx).rev() {
        let tail = data.at(e0).a.sqrt();
        let within = grid.integrate_range(&sqrt_a, i, e0_idx - 1)
            + 0.5 * (e0 - nodes[e0_idx - 1]) * (sqrt_a[e0_idx - 1] + tail);
        if within > 2.0 * cfg.s0 {
            break;
        }
        collar_ok &= cfg.q[i] > bound;
    }

    let tau = cfg.collar_length() <= cfg.u_cap() * (1.0 + 1e-12);
    Ok(CapillaryReport { cutoff_supports, density_floor, q_decay, collar: collar_ok, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::data::Extrinsic;
    use crate::grid::{build_grid, Spacing};

    fn dec_data() -> RadialInitialData {
        let q = Extrinsic::Decaying { e1: 1e-3, e2: -5e-4, scale: 1.0, power: 5.0 };
        RadialInitialData::conformal(4, 1.0, 0.5, 1.0, None, q).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(1.0, 3.9), (1.0, 0.0));
        assert_eq!(cutoff(1.0, 8.1), (0.0, 0.0));
        let (z, dz) = cutoff(1.0, 6.0);
        assert!((z - 0.5).abs() < 1e-15 && dz < 0.0);
    }

    #[test]
    fn flat_is_dec_violation() {
        let g = build_grid(100.0, 256, Spacing::Geometric { stretch: 1.01 }).unwrap();
        let d = RadialInitialData::flat(4).unwrap();
        assert!(matches!(select_capillary_config(&d, 1.0, &g), Err(Error::DecViolation { .. })));
    }

    #[test]
    fn config_passes_checker_and_tau_formula() {
        let g = build_grid(200.0, 1024, Spacing::Geometric { stretch: 1.004 }).unwrap();
        let d = dec_data();
        let c = select_capillary_config(&d, 2.0, &g).unwrap();
        assert!(check_capillary_config(&d, &g, &c).unwrap().all());
        let len = 2f64.powi(-2) * 2.0 + c.s1 + 2.0 * c.s0;
        let tau = (c.kappa0 / (2.0 * len)).min((c.kappa1 / (2.0 * len)).sqrt());
        assert_eq!(c.tau, tau);
        assert_eq!(c.s0, 0.5);
    }

    #[test]
    fn vanishing_q_defaults_kappa1() {
        let g = build_grid(200.0, 512, Spacing::Geometric { stretch: 1.008 }).unwrap();
        let d = RadialInitialData::conformal(4, 1.0, 0.5, 1.0, None, Extrinsic::Zero).unwrap();
        let c = select_capillary_config(&d, 2.0, &g).unwrap();
        assert_eq!(c.kappa1, 1.0);
    }

    #[test]
    fn checker_catches_doubled_q() {
        let g = build_grid(200.0, 1024, Spacing::Geometric { stretch: 1.004 }).unwrap();
        let d = dec_data();
        let mut c = select_capillary_config(&d, 2.0, &g).unwrap();
        c.q.iter_mut().for_each(|v| *v *= 3.0);
        assert!(!check_capillary_config(&d, &g, &c).unwrap().density_floor);
    }
}
