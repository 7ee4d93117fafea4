// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::OnceLock;

use common::{perturbed, Setup};
use janglab_core::barrier::BarrierProfile;
use janglab_core::grid::{build_grid, Spacing};
use janglab_core::mass::{default_alpha_window, fit_alpha_profile};
use janglab_core::metric::{build_graph_geometry, build_shielding};
use proptest::prelude::*;

fn setup() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| perturbed(4, 5, 1024, 1.004, 512.0))
}

fn wave(r: &[f64], amp: f64, freq: f64, phase: f64) -> Vec<f64> {
    r.iter().map(|x| amp * (freq * x + phase).cos() / (1.0 + 0.01 * x * x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graph_metric_dominates_base(amp in -20.0f64..20.0, freq in 0.01f64..2.0, phase in 0.0f64..6.3) {
        let s = setup();
        let u = wave(s.grid.nodes(), amp, freq, phase);
        let geo = build_graph_geometry(&s.data, &s.config, &u, &s.grid).unwrap();
        for i in 0..geo.grid.len() {
            let a = geo.locals[i].a;
            prop_assert!(geo.g_check_rr[i] >= a);
            let du2 = geo.du[i] * geo.du[i];
            // |du|^2 measured in the graph metric
            prop_assert!(du2 / geo.g_check_rr[i] <= 1.0);
        }
    }

    #[test]
    fn reduced_density_is_at_most_half(amp in -5.0f64..5.0, freq in 0.01f64..1.0) {
        let s = setup();
        let u = wave(s.grid.nodes(), amp, freq, 0.0);
        let geo = build_graph_geometry(&s.data, &s.config, &u, &s.grid).unwrap();
        let sd = build_shielding(&s.config, &geo);
        for (qh, q) in sd.q_hat.iter().zip(&sd.q) {
            prop_assert!(*qh <= 0.5 * q);
        }
    }

    #[test]
    fn alpha_fit_is_linear_and_scale_covariant(alpha in 0.01f64..10.0, k in 0.5f64..4.0, n in 4usize..8) {
        let grid = build_grid(1000.0, 2000, Spacing::Uniform).unwrap();
        let p = 2.0 - n as f64;
        let excess: Vec<f64> = grid.nodes().iter().map(|&r| if r > 0.0 { alpha * (r / k).powf(p) } else { 0.0 }).collect();
        let (fit, _) = fit_alpha_profile(&excess, &grid, n, default_alpha_window(&grid)).unwrap();
        let want = alpha * k.powf(-p);
        prop_assert!((fit / want - 1.0).abs() < 1e-9, "{} vs {}", fit, want);
    }

    #[test]
    fn barrier_is_positive_and_decreasing(r0 in 0.1f64..50.0, n in 4usize..8) {
        let bp = BarrierProfile::new(r0, n).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let s = r0 * (1.0 + 0.05 * k as f64 * k as f64);
            let (b, b1, _) = bp.eval(s).unwrap();
            prop_assert!(b > 0.0 && b1 < 0.0 && b < prev);
            prev = b;
        }
    }
}
