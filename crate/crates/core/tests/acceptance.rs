// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always reach the output; exits nonzero on any FAIL.

use std::time::{Duration, Instant};

use janglab_core::barrier::{default_candidates, find_r0, ode_residual_audit, BarrierProfile};
use janglab_core::geometry::{scalar_curvature, select_capillary_config, Extrinsic, RadialInitialData};
use janglab_core::grid::{build_grid, Spacing};
use janglab_core::jang::solve::Discretization;
use janglab_core::jang::{capillary_residual, continuation_solve, newton_solve, TruncatedDomain};
use janglab_core::mass::{default_alpha_window, fit_alpha, fit_alpha_profile, positivity_experiment};
use janglab_core::metric::stability::{check_admissible, TestFunction};
use janglab_core::metric::{build_graph_geometry, consequence_audit, schoen_yau_audit, shielding_audit};
use janglab_core::par::Exec;
use janglab_core::pipeline::{run_pipeline, ExitCode, PipelineConfig, Run, Stage};
use janglab_core::report::emit_report;
use janglab_core::Error;

// pinned tolerances
const CURVATURE_TOL: f64 = 1e-6;
const MIN_ORDER: f64 = 1.9;
const ODE_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 2e-10;
const BOUND_SLACK: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-3;
const DEGENERATE_TOL: f64 = 1e-12;
const EXACT_ALPHA_TOL: f64 = 1e-10;
const SCHWARZSCHILD_ALPHA_TOL: f64 = 0.01;

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, detail: String::new() }
    }

    fn expect(&mut self, ok: bool, what: String) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&what);
        if !ok {
            self.detail.push_str(" (!)");
            self.ok = false;
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn curvature() -> Check {
    let mut c = Check::new();
    let (_, took) = timed(|| {
        let grid = build_grid(2048.0, 2048, Spacing::Geometric { stretch: 1.002 }).unwrap();
        for (label, data, core) in [
            ("flat n=4", RadialInitialData::flat(4).unwrap(), 0.0),
            ("flat n=5", RadialInitialData::flat(5).unwrap(), 0.0),
            ("schw n=4", RadialInitialData::schwarzschild(4, 1.0, 1.0).unwrap(), 1.0),
            ("schw n=5", RadialInitialData::schwarzschild(5, 1.0, 1.0).unwrap(), 1.0),
        ] {
            let r = scalar_curvature(&data, &grid).unwrap();
            let worst = grid.nodes().iter().zip(&r).filter(|(x, _)| **x >= core).map(|(_, v)| v.abs()).fold(0.0, f64::max);
            c.expect(worst < CURVATURE_TOL, format!("{label} max|R| {worst:.1e}"));
        }
        // round unit sphere from nodal samples: a = 1, c = (sin r / r)^2
        for n in [4usize, 5] {
            let want = (n * (n - 1)) as f64;
            let errs: Vec<f64> = [256, 512, 1024]
                .iter()
                .map(|&k| {
                    let grid = build_grid(3.0, k, Spacing::Uniform).unwrap();
                    let x = grid.nodes();
                    let cs: Vec<f64> = x.iter().map(|&r| if r == 0.0 { 1.0 } else { (r.sin() / r).powi(2) }).collect();
                    let zero = vec![0.0; x.len()];
                    let data = RadialInitialData::sampled(n, &grid, vec![1.0; x.len()], cs, zero.clone(), zero).unwrap();
                    let rg = scalar_curvature(&data, &grid).unwrap();
                    x.iter().zip(&rg).filter(|(r, _)| **r >= 0.5 && **r <= 2.5).map(|(_, v)| (v - want).abs()).fold(0.0, f64::max)
                })
                .collect();
            let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
            c.expect(order >= MIN_ORDER, format!("sphere n={n} err {:.1e} order {order:.2}", errs[2]));
        }
    });
    c.expect(took < Duration::from_secs(1), format!("{:.2}s", took.as_secs_f64()));
    c
}

fn barrier() -> Check {
    let mut c = Check::new();
    let (_, took) = timed(|| {
        for (n, r0) in [(4usize, 1.0), (5, 2.0), (4, 10.0)] {
            let bp = BarrierProfile::new(r0, n).unwrap();
            let ratio = (64.0f64 / 1.001).powf(1.0 / 199.0);
            let samples: Vec<f64> = (0..200).map(|k| r0 * 1.001 * ratio.powi(k)).collect();
            let res = ode_residual_audit(&bp, &samples).unwrap();
            c.expect(res < ODE_TOL, format!("n={n} r0={r0} ode {res:.1e}"));
            let margin = samples
                .iter()
                .filter(|&&s| s > 2.0 * r0)
                .map(|&s| bp.tail_bound(s) - bp.value(s).unwrap())
                .fold(f64::INFINITY, f64::min);
            c.expect(margin >= 0.0, format!("tail margin {margin:.1e}"));
        }
        let data = RadialInitialData::schwarzschild(4, 1.0, 1.0).unwrap();
        let grid = build_grid(1024.0, 4096, Spacing::Geometric { stretch: 1.0012 }).unwrap();
        let r0 = find_r0(&data, &grid, &default_candidates(&data, 8)).unwrap();
        let bp = BarrierProfile::new(r0, 4).unwrap();
        let near = build_grid(64.0 * r0, 4096, Spacing::Geometric { stretch: 1.0012 }).unwrap();
        let audit = janglab_core::barrier::barrier_inequality_audit(&data, &bp, &near).unwrap();
        let worst = audit.minus.iter().chain(&audit.plus).fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        c.expect(audit.passes(), format!("schw n=4 r0={r0} max operator {worst:.1e} at {} nodes", audit.r.len()));
    });
    c.expect(took < Duration::from_secs(5), format!("{:.2}s", took.as_secs_f64()));
    c
}

fn solver(run: &Run, solve_time: Duration) -> Check {
    let mut c = Check::new();
    let data = run.data.as_ref().unwrap();
    let cap = run.capillary.as_ref().unwrap();
    let limit = run.limit.as_ref().unwrap();
    let grid = run.grid.as_ref().unwrap();
    let r0 = cap.r0;

    let dom = TruncatedDomain::new(grid, 64.0 * r0, r0).unwrap();
    let zero = vec![0.0; dom.grid.len()];
    let at_zero = newton_solve(data, cap, &dom, 0.0, &zero).unwrap();
    let flat = data.with_extrinsic(Extrinsic::Zero);
    let q_zero = continuation_solve(&flat, cap, &dom).unwrap();
    c.expect(sup(&at_zero.w) == 0.0 && sup(&q_zero.w) == 0.0, "w = 0 exact at lambda 0 and q 0".into());

    let mut newton = 0.0f64;
    let mut symmetry = 0.0f64;
    for (d, st) in &limit.iterates {
        let scale = Discretization::new(data, cap, &d.grid).scale(&st.w);
        newton = newton.max(st.residual_norm / scale);
        let neg: Vec<f64> = st.w.iter().map(|v| -v).collect();
        symmetry = symmetry.max(sup(&capillary_residual(data, cap, &neg, -1.0, &d.grid).unwrap()) / scale);
    }
    c.expect(newton < NEWTON_TOL, format!("newton {newton:.1e}"));
    c.expect(symmetry < SYMMETRY_TOL, format!("sign symmetry {symmetry:.1e}"));

    let est = run.audits.as_ref().unwrap().estimates.as_ref().unwrap();
    let excess = [&est.barrier, &est.decay, &est.sup].iter().map(|b| b.worst_excess).fold(f64::NEG_INFINITY, f64::max);
    c.expect(
        janglab_core::jang::audit::BOUND_TOL == BOUND_SLACK && est.barrier.passed && est.decay.passed && est.sup.passed,
        format!("bounds hold within {BOUND_SLACK:e} scale, worst excess {excess:.1e}"),
    );
    c.expect(est.gradient_estimate.iter().all(|g| g.passed), "gradient stability under refinement".into());

    let coarse = build_grid(256.0, 1024, Spacing::Geometric { stretch: 1.004 }).unwrap();
    let ws: Vec<Vec<f64>> = [coarse.clone(), coarse.refine(), coarse.refine().refine()]
        .iter()
        .map(|g| {
            let cfg = select_capillary_config(data, r0, g).unwrap();
            continuation_solve(data, &cfg, &TruncatedDomain::new(g, 64.0 * r0, r0).unwrap()).unwrap().w
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| (0..a.len()).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max);
    let order = (diff(&ws[0], &ws[1]) / diff(&ws[1], &ws[2])).log2();
    c.expect(order >= MIN_ORDER, format!("grid order {order:.2}"));
    c.expect(solve_time < Duration::from_secs(30), format!("N=4096 solve {:.2}s", solve_time.as_secs_f64()));
    c
}

fn identity(run: &Run) -> Check {
    let mut c = Check::new();
    let rep = run.audits.as_ref().unwrap().identity.unwrap();
    let order = rep.order.unwrap_or(f64::NAN);
    c.expect(rep.max_rel_err < IDENTITY_TOL, format!("N=4096 rel err {:.1e}", rep.max_rel_err));
    c.expect(order >= MIN_ORDER, format!("order {order:.2}"));

    let data = run.data.as_ref().unwrap().with_extrinsic(Extrinsic::Zero);
    let grid = build_grid(512.0, 1024, Spacing::Geometric { stretch: 1.004 }).unwrap();
    let r0 = find_r0(&data, &grid, &default_candidates(&data, 8)).unwrap();
    let cfg = select_capillary_config(&data, r0, &grid).unwrap();
    let geo = build_graph_geometry(&data, &cfg, &vec![0.0; grid.len()], &grid).unwrap();
    let degenerate = schoen_yau_audit(&geo, None).max_rel_err;
    c.expect(degenerate < DEGENERATE_TOL, format!("u = q = 0 rel err {degenerate:.1e}"));
    c
}

fn consequences(run: &Run) -> Check {
    let mut c = Check::new();
    let audits = run.audits.as_ref().unwrap();
    let cap = run.capillary.as_ref().unwrap();
    let geo = &audits.geometry;
    let r = geo.grid.nodes();

    let cons = audits.consequence.as_ref().unwrap();
    c.expect(cons.passed && cons.min_margin >= -cons.tolerance, format!("consequence margin {:.1e}", cons.min_margin));
    let stab = audits.stability.as_ref().unwrap();
    c.expect(stab.n_tested >= 50 && stab.passed, format!("stability {} fns min {:.1e}", stab.n_tested, stab.min_value));
    let (sd, bullets) = audits.shielding.as_ref().unwrap();
    c.expect(*bullets == [true; 6], "shielding 6/6".into());

    // density raised on (4 r0, 8 r0): exactly those nodes fail
    let (lo, hi) = (4.0 * cap.r0, 8.0 * cap.r0);
    let lhs_max = geo.audited().map(|i| geo.lhs(i)).fold(0.0, f64::max);
    let mut bad = cap.clone();
    bad.q.iter_mut().zip(r).filter(|(_, x)| **x > lo && **x < hi).for_each(|(q, _)| *q += 2.0 * lhs_max);
    let rep = consequence_audit(&bad, geo);
    let located = rep.margin.iter().zip(r).all(|(m, x)| (*m < -rep.tolerance) == (*x > lo && *x < hi));
    c.expect(!rep.passed && located, "raised density fails on (4r0, 8r0) only".into());

    let e0 = sd.e0_threshold;
    let mut shrunk = sd.clone();
    let k = shrunk.r.iter().position(|&x| x >= e0).unwrap();
    shrunk.in_e[k] = false;
    let mut doubled = sd.clone();
    doubled.q_hat.iter_mut().zip(&sd.r).filter(|(_, x)| **x < e0).for_each(|(q, _)| *q *= 2.0);
    let mut bounded = sd.clone();
    bounded.boundary_empty = false;
    let predicted = [(shrunk, 0usize), (doubled, 5), (bounded, 4)]
        .iter()
        .all(|(s, bullet)| shielding_audit(s).iter().enumerate().all(|(i, b)| *b == (i != *bullet)));
    c.expect(predicted, "E shrunk/Q_hat doubled/finite boundary fail bullets 1/6/5 only".into());

    let mut region = janglab_core::metric::stability::admissible_region(cap, geo);
    let k = r.iter().position(|&x| x > 10.0 * cap.r0).unwrap();
    region[k] = false;
    let bump = TestFunction::Bump { lo: 8.0 * cap.r0, hi: 32.0 * cap.r0 };
    let rejected = matches!(check_admissible(&bump, &region, r), Err(Error::InadmissibleTestFunction(_)));
    c.expect(rejected, "inadmissible test function rejected".into());
    c
}

fn decay(run: &Run) -> Check {
    let mut c = Check::new();
    let d = run.audits.as_ref().unwrap().decay.as_ref().unwrap();
    for (label, s) in [("u", &d.u), ("xi", &d.xi), ("R", &d.r_check)] {
        let e = s.fit.as_ref().map_or(f64::NAN, |f| f.exponent);
        c.expect(s.passed, format!("{label} slope {e:.2} <= {:.2}", s.bound));
    }
    c
}

fn mass() -> Check {
    let mut c = Check::new();
    let grid = build_grid(2000.0, 4000, Spacing::Uniform).unwrap();
    let excess: Vec<f64> = grid.nodes().iter().map(|&r| if r > 0.0 { 0.3 * r.powi(-2) } else { 0.0 }).collect();
    let (alpha, _) = fit_alpha_profile(&excess, &grid, 4, default_alpha_window(&grid)).unwrap();
    c.expect((alpha - 0.3).abs() < EXACT_ALPHA_TOL, format!("exact model err {:.1e}", (alpha - 0.3).abs()));

    let grid = build_grid(2048.0, 2048, Spacing::Geometric { stretch: 1.002 }).unwrap();
    for n in [4usize, 5] {
        let (alpha, _) = fit_alpha(&RadialInitialData::schwarzschild(n, 1.0, 1.0).unwrap(), &grid).unwrap();
        let rel = alpha / (2.0 / (n as f64 - 2.0)) - 1.0;
        c.expect(rel.abs() < SCHWARZSCHILD_ALPHA_TOL, format!("schw n={n} rel {rel:.1e}"));
    }

    let (rep, took) = timed(|| positivity_experiment(&PipelineConfig::perturbed(4, 1), 4, 20, 1, Exec::Parallel).unwrap());
    c.expect(
        rep.eligible == 20 && rep.positive == 20,
        format!("experiment {}/{} positive of 20", rep.positive, rep.eligible),
    );
    c.expect(took < Duration::from_secs(20 * 60), format!("{:.1}s", took.as_secs_f64()));
    c
}

fn determinism() -> Check {
    let mut c = Check::new();
    let cfg = PipelineConfig::perturbed(4, 11);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = vec![];
    for (dir, exec) in dirs.iter().zip([Exec::Parallel, Exec::Parallel, Exec::Sequential]) {
        let run = run_pipeline(&cfg, Stage::Full, exec);
        let echo = serde_json::to_value(&run.config).unwrap();
        manifests.push(emit_report(&run, &echo, dir.path()).unwrap());
    }
    let same_manifest = manifests.windows(2).all(|w| w[0] == w[1]);
    let same_bytes = manifests[0].files.iter().all(|f| {
        let a = std::fs::read(dirs[0].path().join(&f.name)).unwrap();
        dirs[1..].iter().all(|d| std::fs::read(d.path().join(&f.name)).unwrap() == a)
    });
    c.expect(
        same_manifest && same_bytes,
        format!("{} files identical over 3 runs (par, par, seq)", manifests[0].files.len()),
    );
    c
}

fn main() {
    let cfg = PipelineConfig::perturbed(4, 7);
    let (_, solve_time) = timed(|| run_pipeline(&cfg, Stage::Solve, Exec::Parallel));
    let run = run_pipeline(&cfg, Stage::Full, Exec::Parallel);
    assert_eq!(run.exit_code(), ExitCode::Ok, "{:?}", run.failure);

    let checks = [
        ("curvature oracle", curvature()),
        ("barrier suite", barrier()),
        ("solver suite", solver(&run, solve_time)),
        ("schoen-yau identity", identity(&run)),
        ("consequence/stability/shielding", consequences(&run)),
        ("decay", decay(&run)),
        ("mass", mass()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let tag = if check.ok { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", k + 1, check.detail);
        failed += usize::from(!check.ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
