// SPDX-License-Identifier: Apache-2.0

//! Collars of `E0 = { r > 8 r0 }` in the graph metric and the shielding
//! function `Phi` with its modified density `Q_hat`.

use serde::Serialize;

use super::JangGraphGeometry;
use crate::geometry::capillary::CapillaryConfig;

const POLE_OFFSET: f64 = 1e-8;
const POLE_DEPTH: f64 = -1e6;

/// Distance from every node to `{ r >= e0 }` for the metric `h dr^2` with
/// `sqrt_h` sampled at the nodes.
pub fn distance_to_outer(geo: &JangGraphGeometry, sqrt_h: &[f64], e0: f64) -> Vec<f64> {
    let grid = &geo.grid;
    let nodes = grid.nodes();
    let cum = grid.cumulative_nodal(sqrt_h);
    let k = nodes.partition_point(|&r| r < e0);
    let at_e0 = if k == 0 {
        0.0
    } else if k == nodes.len() {
        cum[k - 1]
    } else {
        let t = (e0 - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
        let h_e0 = sqrt_h[k - 1] + t * (sqrt_h[k] - sqrt_h[k - 1]);
        cum[k - 1] + 0.5 * (e0 - nodes[k - 1]) * (sqrt_h[k - 1] + h_e0)
    };
    nodes.iter().zip(&cum).map(|(&r, &c)| if r >= e0 { 0.0 } else { (at_e0 - c).max(0.0) }).collect()
}

pub fn graph_distance(geo: &JangGraphGeometry, e0: f64) -> Vec<f64> {
    let s: Vec<f64> = geo.g_check_rr.iter().map(|a| a.sqrt()).collect();
    distance_to_outer(geo, &s, e0)
}

pub fn base_distance(geo: &JangGraphGeometry, e0: f64) -> Vec<f64> {
    let s: Vec<f64> = geo.locals.iter().map(|l| l.a.sqrt()).collect();
    distance_to_outer(geo, &s, e0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborhoodReport {
    /// `|u| <= (1/2) min{kappa0/tau, kappa1/tau^2}` on the wide collar.
    pub u_bound: bool,
    pub max_u_ratio: f64,
    /// Graph distance dominates base distance at every node.
    pub distance_comparison: bool,
    /// The narrow graph collar lies in the narrow base collar.
    pub collar_inclusion: bool,
    /// `Q > 128/(s1 s0)` on the narrow collar.
    pub density_floor: bool,
    pub narrow_collar_nodes: usize,
    pub passed: bool,
}

pub fn neighborhood_audit(config: &CapillaryConfig, geo: &JangGraphGeometry) -> NeighborhoodReport {
    let e0 = config.e0_threshold;
    let d_check = graph_distance(geo, e0);
    let d_base = base_distance(geo, e0);
    let wide = config.s1 + 2.0 * config.s0;
    let narrow = 2.0 * config.s0;
    let cap = config.u_cap();
    let mut max_u_ratio: f64 = 0.0;
    for (d, u) in d_check.iter().zip(&geo.u) {
        if *d <= wide {
            max_u_ratio = max_u_ratio.max(u.abs() / cap);
        }
    }
    let distance_comparison = d_check.iter().zip(&d_base).all(|(c, b)| *c >= *b * (1.0 - 1e-12));
    let floor = 128.0 / (config.s1 * config.s0);
    let mut collar_inclusion = true;
    let mut density_floor = true;
    let mut narrow_collar_nodes = 0;
    for i in 0..d_check.len() {
        let r = geo.grid.nodes()[i];
        if r < e0 && d_check[i] <= narrow {
            narrow_collar_nodes += 1;
            collar_inclusion &= d_base[i] <= narrow;
            density_floor &= config.q_at(r) > floor;
        }
    }
    let u_bound = max_u_ratio <= 1.0;
    NeighborhoodReport {
        u_bound,
        max_u_ratio,
        distance_comparison,
        collar_inclusion,
        density_floor,
        narrow_collar_nodes,
        passed: u_bound && distance_comparison && collar_inclusion && density_floor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShieldingData {
    /// Smallest radius of `E` (0 when `E` reaches the origin).
    pub e_outer_radius: f64,
    pub boundary_empty: bool,
    pub pole: f64,
    pub e0_threshold: f64,
    pub collar_width: f64,
    #[serde(skip)]
    pub r: Vec<f64>,
    #[serde(skip)]
    pub in_e: Vec<bool>,
    #[serde(skip)]
    pub d_profile: Vec<f64>,
    #[serde(skip)]
    pub phi: Vec<f64>,
    /// `|d Phi|` in the graph metric.
    #[serde(skip)]
    pub dphi: Vec<f64>,
    #[serde(skip)]
    pub q: Vec<f64>,
    #[serde(skip)]
    pub q_hat: Vec<f64>,
}

fn smoothstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    (x * x * x * (10.0 + x * (-15.0 + 6.0 * x)), 30.0 * x * x * (1.0 - x) * (1.0 - x))
}

/// `Phi(d) = S(d/s0) (16/D - 16/(D - d))` with pole `D` at the collar width,
/// or just beyond the last node of `E` when `E` has a boundary on the grid.
pub fn build_shielding(config: &CapillaryConfig, geo: &JangGraphGeometry) -> ShieldingData {
    let e0 = config.e0_threshold;
    let width = config.s1 + 2.0 * config.s0;
    let d = graph_distance(geo, e0);
    let in_e: Vec<bool> = d.iter().map(|&d| d < width).collect();
    let boundary_empty = in_e.iter().all(|&b| b);
    let pole = if boundary_empty {
        width
    } else {
        let d_last = d.iter().zip(&in_e).filter(|(_, e)| **e).map(|(d, _)| *d).fold(0.0, f64::max);
        d_last + POLE_OFFSET * d_last.max(1.0)
    };
    let nodes = geo.grid.nodes();
    let e_outer_radius = nodes.iter().zip(&in_e).find(|(_, e)| **e).map_or(f64::INFINITY, |(r, _)| *r);
    let s0 = config.s0;
    let len = nodes.len();
    let (mut phi, mut dphi, mut q, mut q_hat) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for i in 0..len {
        q[i] = config.q_at(nodes[i]);
        if !in_e[i] {
            phi[i] = f64::NEG_INFINITY;
            dphi[i] = f64::INFINITY;
            continue;
        }
        if nodes[i] >= e0 {
            q_hat[i] = 0.5 * q[i];
            continue;
        }
        let (s, ds) = smoothstep(d[i] / s0);
        let gap = pole - d[i];
        // 16/D - 16/(D-d) without cancellation
        let pole_term = -16.0 * d[i] / (pole * gap);
        phi[i] = s * pole_term;
        dphi[i] = (ds / s0 * pole_term - s * 16.0 / (gap * gap)).abs();
        q_hat[i] = 0.5 * q[i].min(q[i] + 0.5 * phi[i] * phi[i] - 2.0 * dphi[i]);
    }
    ShieldingData {
        e_outer_radius,
        boundary_empty,
        pole,
        e0_threshold: e0,
        collar_width: width,
        r: nodes.to_vec(),
        in_e,
        d_profile: d,
        phi,
        dphi,
        q,
        q_hat,
    }
}

/// The six properties, in order: `E` contains the closure of `E0`; `E` lies in
/// the collar; `Phi = 0, Q_hat = Q/2` on `E0`; `Phi <= 0, Q_hat > 0` on `E`;
/// `Phi` blows down at the boundary of `E` (vacuous when it is empty);
/// `Q + Phi^2/2 - 2|dPhi| >= 2 Q_hat` on `E`.
pub fn shielding_audit(sd: &ShieldingData) -> [bool; 6] {
    let e0 = sd.e0_threshold;
    let idx = 0..sd.r.len();
    let in_e: Vec<usize> = idx.clone().filter(|&i| sd.in_e[i]).collect();
    let contains_e0 = idx.clone().all(|i| sd.r[i] < e0 || sd.in_e[i]);
    let in_collar = in_e.iter().all(|&i| sd.d_profile[i] < sd.collar_width);
    let on_e0 = idx.clone().filter(|&i| sd.r[i] >= e0).all(|i| sd.phi[i] == 0.0 && sd.q_hat[i] == 0.5 * sd.q[i]);
    let signs = in_e.iter().all(|&i| sd.phi[i] <= 0.0 && sd.q_hat[i] > 0.0);
    let blow_down = sd.boundary_empty || in_e.first().is_some_and(|&i| sd.phi[i] < POLE_DEPTH);
    let absorbs = in_e
        .iter()
        .all(|&i| sd.q[i] + 0.5 * sd.phi[i] * sd.phi[i] - 2.0 * sd.dphi[i] >= 2.0 * sd.q_hat[i]);
    [contains_e0, in_collar, on_e0, signs, blow_down, absorbs]
}
