// SPDX-License-Identifier: Apache-2.0

//! Artifact files of a run and the hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::jang::solve::{solution_csv, trace_json};
use crate::jang::capillary_residual;
use crate::pipeline::{ExitCode, Run};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub exit_code: ExitCode,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn contains(&self, name: &str) -> bool {
        self.files.iter().any(|f| f.name == name)
    }
}

/// In-memory artifact set, keyed by file name.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.to_string(), bytes.into());
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(|s| s.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(|v| v.as_slice())
    }

    /// Writes every file and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, exit_code: ExitCode) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
            files.push(ManifestEntry { name: name.clone(), sha256: hex(&Sha256::digest(bytes)), bytes: bytes.len() });
        }
        let manifest = Manifest { exit_code, files };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn identity_json(run: &Run) -> Value {
    let a = run.audits.as_ref().unwrap();
    a.identity.map_or(Value::Null, |r| {
        json!({
            "max_rel_err": r.max_rel_err,
            "order": r.order,
            "max_abs_err": r.max_abs_err,
            "worst_radius": r.worst_radius,
            "passed": a.identity_passed(),
        })
    })
}

/// `{identity, consequence, neighborhoods, shielding, stability}`; disabled audits are `null`.
pub fn audits_json(run: &Run) -> Option<Value> {
    let a = run.audits.as_ref()?;
    let stability = a.stability.as_ref().map_or(Value::Null, |s| {
        json!({
            "n_tested": s.n_tested,
            "min_value": s.min_value,
            "max_divergence_defect": s.max_divergence_defect,
            "passed": s.passed,
        })
    });
    let shielding = a.shielding.as_ref().map_or(Value::Null, |(_, b)| json!(b));
    Some(json!({
        "identity": identity_json(run),
        "consequence": a.consequence.as_ref().map_or(Ok(Value::Null), serde_json::to_value).ok()?,
        "neighborhoods": a.neighborhoods.as_ref().map_or(Ok(Value::Null), serde_json::to_value).ok()?,
        "shielding": shielding,
        "stability": stability,
    }))
}

fn geometry_csv(run: &Run) -> Option<String> {
    let g = &run.audits.as_ref()?.geometry;
    let mut out = String::from("r,u,g_check_rr,g_check_tan,xi_rad,div_xi,r_check,theta\n");
    for (i, r) in g.grid.nodes().iter().enumerate() {
        out.push_str(&format!(
            "{r:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            g.u[i], g.g_check_rr[i], g.g_check_tan[i], g.xi_rad[i], g.div_xi[i], g.r_check[i], g.theta[i]
        ));
    }
    Some(out)
}

fn shielding_csv(run: &Run) -> Option<String> {
    let (sd, _) = run.audits.as_ref()?.shielding.as_ref()?;
    let mut out = String::from("r,in_e,d,phi,dphi,q,q_hat\n");
    for i in 0..sd.r.len() {
        out.push_str(&format!(
            "{:e},{},{:e},{:e},{:e},{:e},{:e}\n",
            sd.r[i], sd.in_e[i] as u8, sd.d_profile[i], sd.phi[i], sd.dphi[i], sd.q[i], sd.q_hat[i]
        ));
    }
    Some(out)
}

/// Artifacts of `run`. A run that failed before producing data only carries
/// the configuration echo and the error record.
pub fn collect(run: &Run, config_echo: &Value) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    art.add_json("config.json", config_echo)?;
    if let Some(f) = &run.failure {
        art.add_json("error.json", f)?;
    }
    if let (Some(data), Some(grid)) = (&run.data, &run.grid) {
        art.add("data.csv", data.to_csv(grid));
        art.add_json(
            "dataset.json",
            &json!({
                "label": data.label,
                "n": data.n,
                "delta": data.delta,
                "min_margin": run.min_margin.map(|m| m.0),
                "min_margin_radius": run.min_margin.map(|m| m.1),
                "grid": run.config.dataset.grid,
            }),
        )?;
    }
    if let Some(b) = &run.barrier {
        let bp = crate::barrier::BarrierProfile::with_tolerance(b.r0, b.n, b.quad_tol)?;
        art.add("barrier.csv", bp.to_csv(&b.samples)?);
        art.add_json("barrier.json", b)?;
    }
    if let Some(c) = &run.capillary {
        art.add_json("capillary.json", c)?;
    }
    if let (Some(limit), Some(data), Some(cap)) = (&run.limit, &run.data, &run.capillary) {
        for (k, (dom, st)) in limit.iterates.iter().enumerate() {
            let res = capillary_residual(data, cap, &st.w, st.lambda, &dom.grid)?;
            let csv = solution_csv(&dom.grid, &st.w, &res);
            if k + 1 == limit.iterates.len() {
                art.add("solution.csv", csv.clone());
            }
            art.add(&format!("solution_rj{k}.csv"), csv);
        }
        let trace: Vec<Value> = limit
            .trace
            .iter()
            .map(|t| {
                json!({
                    "r_j": t.r_j,
                    "cauchy_diff": t.cauchy_diff,
                    "sup_gradient": t.sup_gradient,
                    "residual_norm": t.residual_norm,
                    "steps": trace_json(&t.steps),
                })
            })
            .collect();
        art.add_json("trace.json", &trace)?;
    }
    if let Some(a) = &run.audits {
        if let Some(v) = audits_json(run) {
            art.add_json("audits.json", &v)?;
        }
        if let Some(e) = &a.estimates {
            art.add_json("estimates.json", e)?;
        }
        if let Some(d) = &a.decay {
            art.add_json("decay.json", d)?;
        }
        if let Some(csv) = geometry_csv(run) {
            art.add("geometry.csv", csv);
        }
        if let Some(csv) = shielding_csv(run) {
            art.add("shielding.csv", csv);
        }
    }
    if let Some(m) = &run.mass {
        art.add_json("mass.json", m)?;
    }
    Ok(art)
}

/// Collects and writes the artifacts of `run` into `dir`.
pub fn emit_report(run: &Run, config_echo: &Value, dir: &Path) -> Result<Manifest> {
    collect(run, config_echo)?.write(dir, run.exit_code())
}
