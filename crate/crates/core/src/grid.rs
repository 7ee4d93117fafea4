// SPDX-License-Identifier: Apache-2.0

//! Radial grids and the finite-difference / quadrature stencils built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of intervals.
pub const MIN_INTERVALS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Geometric { stretch: f64 },
}

/// Parity of a radial profile under `r -> -r`; decides the ghost value at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

pub fn build_grid(r_max: f64, intervals: usize, spacing: Spacing) -> Result<RadialGrid> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
    }
    if intervals < MIN_INTERVALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_INTERVALS} intervals, got {intervals}"
        )));
    }
    let nodes = match spacing {
        Spacing::Uniform => (0..=intervals)
            .map(|i| r_max * i as f64 / intervals as f64)
            .collect(),
        Spacing::Geometric { stretch } => {
            if !(stretch > 1.0) || !stretch.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "geometric stretch must exceed 1, got {stretch}"
                )));
            }
            let total = stretch.powi(intervals as i32) - 1.0;
            let mut nodes: Vec<f64> = (0..=intervals)
                .map(|i| r_max * (stretch.powi(i as i32) - 1.0) / total)
                .collect();
            nodes[intervals] = r_max;
            nodes
        }
    };
    Ok(RadialGrid { nodes, spacing })
}

impl RadialGrid {
    /// Wraps explicit nodes; used for sampled profiles read from disk.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_INTERVALS + 1 {
            return Err(Error::InvalidArgument(format!(
                "need at least {} nodes, got {}",
                MIN_INTERVALS + 1,
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidArgument("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("nodes must be strictly increasing".into()));
        }
        Ok(RadialGrid { nodes, spacing: Spacing::Uniform })
            .map(|mut g| {
                g.spacing = g.detect_spacing();
                g
            })
    }

    fn detect_spacing(&self) -> Spacing {
        let h: Vec<f64> = self.nodes.windows(2).map(|w| w[1] - w[0]).collect();
        let ratio = h[1] / h[0];
        if h.windows(2).all(|w| (w[1] / w[0] - 1.0).abs() < 1e-9) {
            Spacing::Uniform
        } else {
            Spacing::Geometric { stretch: ratio }
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Index of the node closest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 1,
            Err(i) => {
                if r - self.nodes[i - 1] <= self.nodes[i] - r {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// The grid cut at the node nearest to `r_cut`.
    pub fn truncate(&self, r_cut: f64) -> Self {
        let last = self.nearest(r_cut).max(MIN_INTERVALS);
        RadialGrid { nodes: self.nodes[..=last].to_vec(), spacing: self.spacing }
    }

    /// Doubles the resolution; every coarse node is kept.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        match self.spacing {
            Spacing::Geometric { stretch } => {
                let s = stretch.sqrt();
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    // w0 + h0' with h0' = h/(1+s), the fine interval ratio being s.
                    nodes.push(w[0] + (w[1] - w[0]) / (1.0 + s));
                }
                nodes.push(self.r_max());
                RadialGrid { nodes, spacing: Spacing::Geometric { stretch: s } }
            }
            Spacing::Uniform => {
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    nodes.push(0.5 * (w[0] + w[1]));
                }
                nodes.push(self.r_max());
                RadialGrid { nodes, spacing: Spacing::Uniform }
            }
        }
    }

    /// Index range of the nodes in the outer third `[2 r_max / 3, r_max]`.
    pub fn outer_third(&self) -> std::ops::Range<usize> {
        let start = self.nodes.partition_point(|&r| r < 2.0 * self.r_max() / 3.0);
        start..self.nodes.len()
    }

    /// Indices with `lo <= r <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.nodes.partition_point(|&r| r < lo);
        let end = self.nodes.partition_point(|&r| r <= hi);
        start..end.max(start)
    }

    fn spacings(&self, i: usize) -> (f64, f64) {
        let n = &self.nodes;
        if i == 0 {
            (n[1], n[1])
        } else {
            (n[i] - n[i - 1], n[i + 1] - n[i])
        }
    }

    /// Three-point weights `(w_minus, w_center, w_plus)` of the first and second
    /// derivative at interior node `i` (central, second order on smooth grids).
    pub fn interior_weights(&self, i: usize) -> ([f64; 3], [f64; 3]) {
        let (hm, hp) = self.spacings(i);
        let d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
        let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
        (d1, d2)
    }

    /// First derivative at every node. The origin uses the mirrored ghost node
    /// implied by `parity`; the last node uses a one-sided three-point stencil.
    pub fn derivative(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let n = self.nodes.len();
        assert_eq!(f.len(), n);
        let mut out = vec![0.0; n];
        out[0] = match parity {
            Parity::Even => 0.0,
            Parity::Odd => (f[1] - (-f[1])) / (2.0 * self.nodes[1]),
        };
        for i in 1..n - 1 {
            let (d1, _) = self.interior_weights(i);
            out[i] = d1[0] * f[i - 1] + d1[1] * f[i] + d1[2] * f[i + 1];
        }
        let (x0, x1, x2) = (self.nodes[n - 3], self.nodes[n - 2], self.nodes[n - 1]);
        out[n - 1] = f[n - 3] * (x2 - x1) / ((x0 - x1) * (x0 - x2))
            + f[n - 2] * (x2 - x0) / ((x1 - x0) * (x1 - x2))
            + f[n - 1] * (2.0 * x2 - x0 - x1) / ((x2 - x0) * (x2 - x1));
        out
    }

    /// Second derivative at every node (same boundary treatment as [`Self::derivative`]).
    pub fn second_derivative(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let n = self.nodes.len();
        assert_eq!(f.len(), n);
        let mut out = vec![0.0; n];
        let h = self.nodes[1];
        out[0] = match parity {
            Parity::Even => 2.0 * (f[1] - f[0]) / (h * h),
            Parity::Odd => 0.0,
        };
        for i in 1..n - 1 {
            let (_, d2) = self.interior_weights(i);
            out[i] = d2[0] * f[i - 1] + d2[1] * f[i] + d2[2] * f[i + 1];
        }
        let (x0, x1, x2) = (self.nodes[n - 3], self.nodes[n - 2], self.nodes[n - 1]);
        out[n - 1] = 2.0
            * (f[n - 3] / ((x0 - x1) * (x0 - x2))
                + f[n - 2] / ((x1 - x0) * (x1 - x2))
                + f[n - 1] / ((x2 - x0) * (x2 - x1)));
        out
    }

    /// Composite Simpson rule over the whole grid (nonuniform panels of two
    /// intervals, trapezoid on a leftover interval).
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.integrate_range(f, 0, self.nodes.len() - 1)
    }

    /// Simpson rule between node indices `lo <= hi`.
    pub fn integrate_range(&self, f: &[f64], lo: usize, hi: usize) -> f64 {
        let x = &self.nodes;
        let mut sum = 0.0;
        let mut i = lo;
        while i + 2 <= hi {
            let h0 = x[i + 1] - x[i];
            let h1 = x[i + 2] - x[i + 1];
            let hs = h0 + h1;
            sum += hs / 6.0
                * (f[i] * (2.0 - h1 / h0) + f[i + 1] * hs * hs / (h0 * h1) + f[i + 2] * (2.0 - h0 / h1));
            i += 2;
        }
        if i < hi {
            sum += 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
        }
        sum
    }

    /// Cumulative integral of nodal values from the origin, integrating on each
    /// interval the quadratic through it and one neighbour.
    pub fn cumulative_nodal(&self, f: &[f64]) -> Vec<f64> {
        let x = &self.nodes;
        let n = x.len();
        assert_eq!(f.len(), n);
        let mut out = vec![0.0; n];
        let g = 0.5 / 3f64.sqrt();
        for i in 0..n - 1 {
            let j = if i + 2 < n { i } else { i - 1 };
            let (x0, x1, x2) = (x[j], x[j + 1], x[j + 2]);
            let p = |t: f64| {
                f[j] * (t - x1) * (t - x2) / ((x0 - x1) * (x0 - x2))
                    + f[j + 1] * (t - x0) * (t - x2) / ((x1 - x0) * (x1 - x2))
                    + f[j + 2] * (t - x0) * (t - x1) / ((x2 - x0) * (x2 - x1))
            };
            let (a, b) = (x[i], x[i + 1]);
            let (m, h) = (0.5 * (a + b), b - a);
            out[i + 1] = out[i] + 0.5 * h * (p(m - g * h) + p(m + g * h));
        }
        out
    }

    /// Cumulative integral of `f` from the origin to every node, Simpson per interval.
    pub fn cumulative<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.nodes.windows(2) {
            let h = w[1] - w[0];
            acc += h / 6.0 * (f(w[0]) + 4.0 * f(0.5 * (w[0] + w[1])) + f(w[1]));
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_nodal_exact_for_quadratics() {
        let g = build_grid(5.0, 40, Spacing::Geometric { stretch: 1.03 }).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| 3.0 * r * r - r + 2.0).collect();
        let c = g.cumulative_nodal(&f);
        for (r, v) in g.nodes().iter().zip(&c) {
            assert!((v - (r * r * r - 0.5 * r * r + 2.0 * r)).abs() < 1e-11);
        }
    }

    #[test]
    fn uniform_spacing() {
        let g = build_grid(10.0, 16, Spacing::Uniform).unwrap();
        assert_eq!(g.len(), 17);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 0.625).abs() < 1e-14);
        }
    }

    #[test]
    fn geometric_ratio_constant() {
        let g = build_grid(100.0, 1024, Spacing::Geometric { stretch: 1.005 }).unwrap();
        let n = g.nodes();
        assert_eq!(n[0], 0.0);
        assert!((g.r_max() - 100.0).abs() < 1e-12);
        for i in 1..n.len() - 1 {
            let ratio = (n[i + 1] - n[i]) / (n[i] - n[i - 1]);
            assert!((ratio - 1.005).abs() < 1e-9, "ratio {ratio} at {i}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(build_grid(-1.0, 64, Spacing::Uniform), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(1.0, 8, Spacing::Uniform), Err(Error::InvalidArgument(_))));
        assert!(build_grid(1.0, 64, Spacing::Geometric { stretch: 0.9 }).is_err());
    }

    #[test]
    fn refine_keeps_coarse_nodes() {
        let g = build_grid(50.0, 64, Spacing::Geometric { stretch: 1.03 }).unwrap();
        let f = g.refine();
        assert_eq!(f.intervals(), 128);
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((f.nodes()[2 * i] - r).abs() < 1e-12 * (1.0 + r));
        }
        let n = f.nodes();
        for i in 1..n.len() - 1 {
            let ratio = (n[i + 1] - n[i]) / (n[i] - n[i - 1]);
            assert!((ratio - 1.03f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn derivatives_second_order() {
        let coarse = build_grid(2.0, 256, Spacing::Geometric { stretch: 1.01 }).unwrap();
        let err = |g: &RadialGrid| {
            let m = g.intervals();
            let f: Vec<f64> = g.nodes().iter().map(|r| (r * r).cos()).collect();
            let d1 = g.derivative(&f, Parity::Even);
            let d2 = g.second_derivative(&f, Parity::Even);
            g.nodes()
                .iter()
                .enumerate()
                .take(m - 1)
                .map(|(i, r)| {
                    let e1 = (d1[i] + 2.0 * r * (r * r).sin()).abs();
                    let e2 = (d2[i] + 2.0 * (r * r).sin() + 4.0 * r * r * (r * r).cos()).abs();
                    e1.max(e2)
                })
                .fold(0.0, f64::max)
        };
        let order = (err(&coarse) / err(&coarse.refine())).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn simpson_exact_for_quadratics() {
        let exact = 9.0 - 9.0;
        let g = build_grid(3.0, 32, Spacing::Geometric { stretch: 1.07 }).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| r * r - 2.0 * r).collect();
        assert!((g.integrate(&f) - exact).abs() < 1e-12);
    }
}
