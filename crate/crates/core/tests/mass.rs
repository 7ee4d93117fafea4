// SPDX-License-Identifier: Apache-2.0

use janglab_core::geometry::{select_capillary_config, Extrinsic, RadialInitialData};
use janglab_core::grid::{build_grid, Spacing};
use janglab_core::mass::*;
use janglab_core::par::Exec;
use janglab_core::pipeline::{run_pipeline, ExitCode, PipelineConfig, Stage};
use janglab_core::Error;

#[test]
fn exact_model_is_recovered() {
    let grid = build_grid(2000.0, 4000, Spacing::Uniform).unwrap();
    let r = grid.nodes();
    let a: Vec<f64> = r.iter().map(|&r| 1.0 + 0.3 / (1.0 + r * r)).collect();
    let data = RadialInitialData::sampled(4, &grid, a, vec![1.0; r.len()], vec![0.0; r.len()], vec![0.0; r.len()])
        .unwrap();
    let excess: Vec<f64> = r.iter().map(|&r| if r > 0.0 { 0.3 * r.powi(-2) } else { 0.0 }).collect();
    let (alpha, fit) = fit_alpha_profile(&excess, &grid, 4, default_alpha_window(&grid)).unwrap();
    assert!((alpha - 0.3).abs() < 1e-10);
    assert!(fit.rms_residual < 1e-10);
    let (alpha, _) = fit_alpha(&data, &grid).unwrap();
    assert!((alpha - 0.3).abs() < 1e-6, "{alpha}");
}

#[test]
fn flat_alpha_is_zero() {
    let grid = build_grid(1000.0, 1000, Spacing::Uniform).unwrap();
    let (alpha, fit) = fit_alpha(&RadialInitialData::flat(4).unwrap(), &grid).unwrap();
    assert_eq!(alpha, 0.0);
    assert_eq!(fit.rms_residual, 0.0);
}

#[test]
fn schwarzschild_alpha() {
    let grid = build_grid(2048.0, 2048, Spacing::Geometric { stretch: 1.002 }).unwrap();
    for (n, m) in [(4usize, 1.0), (5, 1.0), (4, 0.4)] {
        let data = RadialInitialData::schwarzschild(n, m, 1.0).unwrap();
        let (alpha, _) = fit_alpha(&data, &grid).unwrap();
        let expect = 2.0 * m / (n as f64 - 2.0);
        assert!((alpha / expect - 1.0).abs() < 0.01, "n = {n}: {alpha}");
    }
    // a small decaying q does not move alpha
    let data = RadialInitialData::schwarzschild(4, 1.0, 1.0)
        .unwrap()
        .with_extrinsic(Extrinsic::Decaying { e1: 1e-4, e2: -1e-4, scale: 1.0, power: 5.0 });
    let (alpha, _) = fit_alpha(&data, &grid).unwrap();
    assert!(alpha > 0.0 && (alpha - 1.0).abs() < 0.02);
}

#[test]
fn alpha_scales_with_radius() {
    let n = 4;
    let data = RadialInitialData::schwarzschild(n, 1.0, 1.0).unwrap();
    let grid = build_grid(1000.0, 2000, Spacing::Uniform).unwrap();
    let wide = build_grid(2000.0, 2000, Spacing::Uniform).unwrap();
    let excess = |g: &janglab_core::grid::RadialGrid, k: f64| -> Vec<f64> {
        g.nodes().iter().map(|&r| data.a_at(r / k) - 1.0).collect()
    };
    let (a1, _) = fit_alpha_profile(&excess(&grid, 1.0), &grid, n, default_alpha_window(&grid)).unwrap();
    let (a2, _) = fit_alpha_profile(&excess(&wide, 2.0), &wide, n, default_alpha_window(&wide)).unwrap();
    assert!((a2 / a1 - 4.0).abs() < 1e-9, "{a1} {a2}");
}

#[test]
fn bad_asymptotics_fail_the_fit() {
    let grid = build_grid(1000.0, 1000, Spacing::Uniform).unwrap();
    let excess: Vec<f64> = grid.nodes().iter().map(|&r| (r / 30.0).sin() / (1.0 + r)).collect();
    assert!(matches!(fit_alpha_profile(&excess, &grid, 4, default_alpha_window(&grid)), Err(Error::FitFailure { .. })));
    let few = build_grid(100.0, 16, Spacing::Uniform).unwrap();
    let p = vec![1.0; few.len()];
    assert!(matches!(fit_decay_exponent(&p, &few, (25.0, 50.0)), Err(Error::InsufficientData { .. })));
}

#[test]
fn decay_exponent_of_exact_power() {
    let grid = build_grid(500.0, 1000, Spacing::Geometric { stretch: 1.003 }).unwrap();
    let p: Vec<f64> = grid.nodes().iter().map(|r| 2.0 * r.powi(-5)).collect();
    let f = fit_decay_exponent(&p, &grid, grid.outer_third().map(|i| grid.nodes()[i]).fold((f64::MAX, 0.0), |w, r| (w.0.min(r), w.1.max(r)))).unwrap();
    assert!((f.exponent + 5.0).abs() < 1e-8);
    assert!((f.amplitude - 2.0).abs() < 1e-6);
}

#[test]
fn pipeline_mass_and_graph_mass_agree() {
    let run = run_pipeline(&PipelineConfig::perturbed(4, 3), Stage::Full, Exec::Parallel);
    assert_eq!(run.exit_code(), ExitCode::Ok, "{:?}", run.failure);
    let m = run.mass.unwrap();
    assert!(m.positive);
    assert_eq!(m.graph_agrees, Some(true));
    assert!((m.alpha_graph.unwrap() - m.alpha).abs() <= 1e-3 * m.alpha);
}

#[test]
fn decay_slopes_settle_toward_infinity() {
    let run = run_pipeline(&PipelineConfig::perturbed(4, 5), Stage::Audit, Exec::Parallel);
    let geo = &run.audits.as_ref().unwrap().geometry;
    let r_j = geo.grid.r_max();
    let abs: Vec<f64> = geo.r_check.iter().map(|x| x.abs()).collect();
    let slopes: Vec<f64> = [(0.1, 0.3), (0.2, 0.5), (0.4, 0.9)]
        .iter()
        .map(|(lo, hi)| fit_decay_exponent(&abs, &geo.grid, (lo * r_j, hi * r_j)).unwrap().exponent)
        .collect();
    assert!((slopes[2] - slopes[1]).abs() <= 0.05, "{slopes:?}");
}

#[test]
fn positivity_experiment_twenty_datasets() {
    let template = PipelineConfig::perturbed(4, 1);
    let rep = positivity_experiment(&template, 4, 20, 1, Exec::Parallel).unwrap();
    assert_eq!(rep.records.len(), 20);
    assert!(rep.records.windows(2).all(|w| w[0].seed < w[1].seed));
    assert_eq!(rep.eligible, 20);
    assert_eq!(rep.positive, 20);
    assert!(rep.passed);
    let csv = rep.to_csv();
    assert!(csv.starts_with("seed,n,min_margin,alpha,identity_err,audits_passed\n"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn experiment_is_order_independent() {
    let template = PipelineConfig::perturbed(4, 1);
    let par = positivity_experiment(&template, 4, 3, 40, Exec::Parallel).unwrap();
    let seq = positivity_experiment(&template, 4, 3, 40, Exec::Sequential).unwrap();
    assert_eq!(par, seq);
    assert!(matches!(positivity_experiment(&template, 4, 0, 1, Exec::Sequential), Err(Error::InvalidArgument(_))));
}

#[test]
fn flat_data_is_rejected() {
    let grid = build_grid(1024.0, 1024, Spacing::Uniform).unwrap();
    let flat = RadialInitialData::flat(4).unwrap();
    assert!(matches!(select_capillary_config(&flat, 2.0, &grid), Err(Error::DecViolation { .. })));
    let mut cfg = PipelineConfig::perturbed(4, 1);
    cfg.dataset.family = "flat".into();
    let run = run_pipeline(&cfg, Stage::Full, Exec::Sequential);
    assert_eq!(run.exit_code(), ExitCode::DecViolation);
}
