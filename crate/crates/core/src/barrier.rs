// SPDX-License-Identifier: Apache-2.0

//! The radial barrier `b(s) = r0 int_{s/r0}^inf (t^{2n-4} - 1)^{-1/2} dt` and
//! audits of the inequalities it is built to satisfy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::data::RadialInitialData;
use crate::grid::RadialGrid;
use crate::jang::operator::jang_pointwise;
use crate::par::{self, Exec};
use crate::quad;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierProfile {
    pub r0: f64,
    pub n: usize,
    pub quad_tol: f64,
}

impl BarrierProfile {
    pub fn new(r0: f64, n: usize) -> Result<Self> {
        Self::with_tolerance(r0, n, DEFAULT_QUAD_TOL)
    }

    pub fn with_tolerance(r0: f64, n: usize, quad_tol: f64) -> Result<Self> {
        if !(r0 > 0.0) || n < 4 || !(quad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("bad barrier parameters r0={r0}, n={n}, tol={quad_tol}")));
        }
        Ok(BarrierProfile { r0, n, quad_tol })
    }

    fn power(&self) -> f64 {
        2.0 * self.n as f64 - 4.0
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !(s - self.r0 >= 1e-9 * self.r0) || !s.is_finite() {
            return Err(Error::DomainError(format!("barrier needs s > r0 = {}, got {s}", self.r0)));
        }
        Ok(())
    }

    /// `b(s)` by quadrature. On `[s/r0, 2]` the substitution `t = 1 + v^2`
    /// removes the inverse square root at `t = 1`; beyond 2, `x = 1/t` maps the
    /// infinite tail onto a bounded smooth integrand.
    pub fn value(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        let k = self.power();
        let n = self.n as i32;
        let t_lo = s / self.r0;
        let mut total = 0.0;
        if t_lo < 2.0 {
            let v_lo = (t_lo - 1.0).sqrt();
            let near = |v: f64| {
                let v2 = v * v;
                if v2 == 0.0 {
                    2.0 / k.sqrt()
                } else {
                    2.0 * v / (k * v2.ln_1p()).exp_m1().sqrt()
                }
            };
            total += quad::integrate(near, v_lo, 1.0, self.quad_tol * 0.1)?;
        }
        let x_hi = 1.0 / t_lo.max(2.0);
        let tail = |x: f64| x.powi(n - 4) / (1.0 - x.powf(k)).sqrt();
        total += quad::integrate(tail, 0.0, x_hi, self.quad_tol * 0.1)?;
        Ok(self.r0 * total)
    }

    /// `b'(s) = -((s/r0)^{2n-4} - 1)^{-1/2}`.
    pub fn slope(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(-1.0 / self.gap(s).sqrt())
    }

    fn gap(&self, s: f64) -> f64 {
        (self.power() * (s / self.r0).ln()).exp_m1()
    }

    /// `b''(s)` from differentiating the closed form of `b'`.
    pub fn curvature(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        let k = self.power();
        let t = s / self.r0;
        Ok(0.5 * k * t.powf(k - 1.0) / (self.r0 * self.gap(s).powf(1.5)))
    }

    pub fn eval(&self, s: f64) -> Result<(f64, f64, f64)> {
        Ok((self.value(s)?, self.slope(s)?, self.curvature(s)?))
    }

    /// `s b'' + (n-1)(1+b'^2) b' + (1+b'^2)^{3/2} r0^{n-2} s^{2-n}`.
    pub fn ode_residual(&self, s: f64) -> Result<f64> {
        let b1 = self.slope(s)?;
        let b2 = self.curvature(s)?;
        let nf = self.n as f64;
        let w = 1.0 + b1 * b1;
        Ok(s * b2 + (nf - 1.0) * w * b1 + w * w.sqrt() * self.r0.powf(nf - 2.0) * s.powf(2.0 - nf))
    }

    /// Upper bound `2 r0^{n-2} s^{3-n}` valid for `s > 2 r0`.
    pub fn tail_bound(&self, s: f64) -> f64 {
        let nf = self.n as f64;
        2.0 * self.r0.powf(nf - 2.0) * s.powf(3.0 - nf)
    }

    /// Rows `s,b,bprime,bsecond,ode_residual`.
    pub fn to_csv(&self, samples: &[f64]) -> Result<String> {
        let mut out = String::from("s,b,bprime,bsecond,ode_residual\n");
        for &s in samples {
            let (b, b1, b2) = self.eval(s)?;
            out.push_str(&format!("{s:e},{b:e},{b1:e},{b2:e},{:e}\n", self.ode_residual(s)?));
        }
        Ok(out)
    }
}

/// Largest absolute ODE residual over `samples` (0 when empty).
pub fn ode_residual_audit(bp: &BarrierProfile, samples: &[f64]) -> Result<f64> {
    samples.iter().try_fold(0.0f64, |acc, &s| {
        if s <= bp.r0 * (1.0 + 1e-6) {
            return Err(Error::DomainError(format!("sample {s} too close to r0")));
        }
        Ok(acc.max(bp.ode_residual(s)?.abs()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierAudit {
    pub r: Vec<f64>,
    /// Jang operator of the barrier with `-q` (`lambda = 1`).
    pub minus: Vec<f64>,
    /// Jang operator of the barrier with `+q` (`lambda = -1`).
    pub plus: Vec<f64>,
}

impl BarrierAudit {
    pub fn passes(&self) -> bool {
        self.minus.iter().chain(&self.plus).all(|&v| v < 0.0)
    }

    pub fn first_violation(&self) -> Option<f64> {
        (0..self.r.len()).find(|&i| self.minus[i] >= 0.0 || self.plus[i] >= 0.0).map(|i| self.r[i])
    }
}

/// Evaluates both barrier inequalities at the grid nodes in `(r0, r_max]`.
pub fn barrier_inequality_audit(
    data: &RadialInitialData,
    bp: &BarrierProfile,
    grid: &RadialGrid,
) -> Result<BarrierAudit> {
    if data.n != bp.n {
        return Err(Error::InvalidArgument("barrier and data dimensions differ".into()));
    }
    let start = grid.nodes().partition_point(|&r| r <= bp.r0);
    if start >= grid.len() {
        return Err(Error::DomainError(format!("no grid node beyond r0 = {}", bp.r0)));
    }
    let locals = data.nodal(grid);
    let mut audit = BarrierAudit { r: vec![], minus: vec![], plus: vec![] };
    for l in &locals[start..] {
        if l.r - bp.r0 < 1e-9 * bp.r0 {
            continue;
        }
        let b1 = bp.slope(l.r)?;
        let b2 = bp.curvature(l.r)?;
        audit.r.push(l.r);
        audit.minus.push(jang_pointwise(data.n, l, b1, b2, 1.0));
        audit.plus.push(jang_pointwise(data.n, l, b1, b2, -1.0));
    }
    Ok(audit)
}

/// Default ladder `R * 2^k`, `k = 0..count`, `R` the dataset's characteristic radius.
pub fn default_candidates(data: &RadialInitialData, count: usize) -> Vec<f64> {
    let base = data.characteristic_radius();
    (0..count).map(|k| base * 2f64.powi(k as i32)).collect()
}

/// Smallest candidate whose barrier passes the audit on `(r0, r_max]`.
pub fn find_r0(data: &RadialInitialData, grid: &RadialGrid, candidates: &[f64]) -> Result<f64> {
    find_r0_with(data, grid, candidates, Exec::default())
}

pub fn find_r0_with(data: &RadialInitialData, grid: &RadialGrid, candidates: &[f64], exec: Exec) -> Result<f64> {
    if candidates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("candidates must be increasing".into()));
    }
    let passed = par::map(exec, candidates, |&r0| -> Result<bool> {
        if r0 >= grid.r_max() {
            return Ok(false);
        }
        let bp = BarrierProfile::new(r0, data.n)?;
        Ok(barrier_inequality_audit(data, &bp, grid)?.passes())
    });
    for (r0, ok) in candidates.iter().zip(passed) {
        if ok? {
            return Ok(*r0);
        }
    }
    Err(Error::NoAdmissibleR0 { tried: candidates.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_is_minus_one_at_fourth_root_two() {
        let bp = BarrierProfile::new(1.7, 4).unwrap();
        let s = 1.7 * 2f64.powf(0.25);
        assert!((bp.slope(s).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn positive_decreasing() {
        for n in 4..=8 {
            let bp = BarrierProfile::new(1.0, n).unwrap();
            let mut prev = f64::INFINITY;
            for s in [1.0 + 1e-8, 1.01, 1.5, 3.0, 10.0, 100.0] {
                let b = bp.value(s).unwrap();
                assert!(b > 0.0 && b < prev);
                assert!(bp.slope(s).unwrap() < 0.0);
                prev = b;
            }
        }
    }

    #[test]
    fn domain_errors() {
        let bp = BarrierProfile::new(1.0, 4).unwrap();
        assert!(matches!(bp.value(1.0), Err(Error::DomainError(_))));
        assert!(matches!(bp.slope(0.5), Err(Error::DomainError(_))));
        assert_eq!(ode_residual_audit(&bp, &[]).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_value_for_n4() {
        // n = 4: int (t^4 - 1)^{-1/2} has no elementary form, but at n = 4 the
        // tail integrand at x = 1/t is (1 - x^4)^{-1/2}; check against a dense
        // midpoint sum of the original integral truncated far out plus the x-tail.
        let bp = BarrierProfile::new(1.0, 4).unwrap();
        let s = 3.0;
        let m = 2_000_000;
        let (lo, hi) = (3.0f64, 3000.0f64);
        let h = (hi - lo) / m as f64;
        let mut sum = 0.0;
        for i in 0..m {
            let t = lo + (i as f64 + 0.5) * h;
            sum += h / (t.powi(4) - 1.0).sqrt();
        }
        // tail beyond 3000: int_0^{1/3000} (1-x^4)^{-1/2} dx ~ 1/3000
        sum += 1.0 / 3000.0;
        assert!((bp.value(s).unwrap() - sum).abs() < 1e-8);
    }
}
