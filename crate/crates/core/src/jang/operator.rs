// SPDX-License-Identifier: Apache-2.0

//! The Jang operator
//! `g^{ik} g^{jl} (g_ij - w_i w_j / (1+|dw|^2)) ((1+|dw|^2)^{-1/2} D^2_kl w - lambda q_kl)`
//! reduced to radial functions, its discretization and Jacobian.

use crate::geometry::capillary::CapillaryConfig;
use crate::geometry::curvature::{log_areal_derivative, q_trace};
use crate::geometry::data::{Local, RadialInitialData};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;

/// Orthonormal-frame Hessian `(H_rr, H_tt)` of a radial function with `w' = w1`, `w'' = w2`.
pub fn frame_hessian(l: &Local, w1: f64, w2: f64) -> (f64, f64) {
    let h_rr = (w2 - l.a1 * w1 / (2.0 * l.a)) / l.a;
    let h_tt = match log_areal_derivative(l) {
        Some(k) => k * w1 / l.a,
        None => w2 / l.a,
    };
    (h_rr, h_tt)
}

/// Pointwise Jang operator with `(w', w'')` given. At `r = 0` the even limit
/// `n w''/a - lambda tr(q)` applies.
pub fn jang_pointwise(n: usize, l: &Local, w1: f64, w2: f64, lambda: f64) -> f64 {
    if l.r == 0.0 {
        return n as f64 * w2 / l.a - lambda * q_trace(n, l);
    }
    let v2 = w1 * w1 / l.a;
    let s = 1.0 + v2;
    let (h_rr, h_tt) = frame_hessian(l, w1, w2);
    let m = n as f64 - 1.0;
    h_rr / (s * s.sqrt()) - lambda * l.q_rad / s + m * (h_tt / s.sqrt() - lambda * l.q_tan)
}

/// Partial derivatives `(dJ/dw', dJ/dw'')` of [`jang_pointwise`] for `r > 0`.
pub fn jang_partials(n: usize, l: &Local, w1: f64, w2: f64, lambda: f64) -> (f64, f64) {
    let m = n as f64 - 1.0;
    let s = 1.0 + w1 * w1 / l.a;
    let rs = s.sqrt();
    let (h_rr, h_tt) = frame_hessian(l, w1, w2);
    let k = log_areal_derivative(l).expect("r > 0");
    let ds = 2.0 * w1 / l.a;
    let d_w2 = 1.0 / (l.a * s * rs);
    let d_w1 = -l.a1 / (2.0 * l.a * l.a) / (s * rs)
        + m * k / (l.a * rs)
        + ds * (-1.5 * h_rr / (s * s * rs) + lambda * l.q_rad / (s * s) - 0.5 * m * h_tt / (s * rs));
    (d_w1, d_w2)
}

/// Discrete first and second derivatives of nodal values (even at the origin,
/// one-sided at the outer end).
pub fn nodal_derivatives(grid: &RadialGrid, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    use crate::grid::Parity;
    (grid.derivative(w, Parity::Even), grid.second_derivative(w, Parity::Even))
}

/// Jang operator at every node.
pub fn jang_operator(data: &RadialInitialData, w: &[f64], lambda: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    if w.len() != grid.len() {
        return Err(Error::InvalidArgument("w must have one value per node".into()));
    }
    let locals = data.nodal(grid);
    let (w1, w2) = nodal_derivatives(grid, w);
    let out: Vec<f64> = locals
        .iter()
        .enumerate()
        .map(|(i, l)| jang_pointwise(data.n, l, w1[i], w2[i], lambda))
        .collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy(format!("1 + |dw|^2 overflowed at r = {}", grid.nodes()[i])));
    }
    Ok(out)
}

/// Discrete residual of the capillary problem: interior rows carry
/// `J(w) - tau^2 zeta^2 w`, the last row the Dirichlet condition `w(r_j) = 0`.
/// The origin row uses the mirrored ghost node (discrete Neumann condition).
pub fn capillary_residual(
    data: &RadialInitialData,
    config: &CapillaryConfig,
    w: &[f64],
    lambda: f64,
    grid: &RadialGrid,
) -> Result<Vec<f64>> {
    let mut out = jang_operator(data, w, lambda, grid)?;
    let tau2 = config.tau * config.tau;
    let last = out.len() - 1;
    for (i, (v, &r)) in out.iter_mut().zip(grid.nodes()).enumerate() {
        if i == last {
            *v = w[i];
        } else {
            let z = config.zeta_at(r);
            *v -= tau2 * z * z * w[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::data::Extrinsic;

    #[test]
    fn zero_function_gives_minus_lambda_trace() {
        let q = Extrinsic::Decaying { e1: 0.2, e2: 0.1, scale: 1.0, power: 5.0 };
        let d = RadialInitialData::conformal(4, 1.0, 0.5, 1.0, None, q).unwrap();
        for r in [0.0, 0.3, 2.0] {
            let l = d.at(r);
            let got = jang_pointwise(4, &l, 0.0, 0.0, 0.7);
            assert!((got + 0.7 * q_trace(4, &l)).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_structure() {
        let d = RadialInitialData::flat(5).unwrap();
        let l = d.at(1.7);
        let (w1, w2) = (0.8f64, -0.3f64);
        let want = w2 / (1.0 + w1 * w1).powf(1.5) + 4.0 / 1.7 * w1 / (1.0 + w1 * w1).sqrt();
        assert!((jang_pointwise(5, &l, w1, w2, 1.0) - want).abs() < 1e-14);
    }

    #[test]
    fn partials_match_finite_differences() {
        let q = Extrinsic::Decaying { e1: 0.2, e2: -0.1, scale: 1.0, power: 5.0 };
        let d = RadialInitialData::conformal(5, 1.3, 0.5, 0.8, Some((0.2, 0.4)), q).unwrap();
        let l = d.at(0.9);
        let (w1, w2, lam) = (-0.6, 1.1, 0.4);
        let (d1, d2) = jang_partials(5, &l, w1, w2, lam);
        let h = 1e-6;
        let f = |a: f64, b: f64| jang_pointwise(5, &l, a, b, lam);
        assert!((d1 - (f(w1 + h, w2) - f(w1 - h, w2)) / (2.0 * h)).abs() < 1e-7);
        assert!((d2 - (f(w1, w2 + h) - f(w1, w2 - h)) / (2.0 * h)).abs() < 1e-7);
    }
}
