// SPDX-License-Identifier: Apache-2.0

//! Rotationally symmetric initial data sets `(g, q)` with
//! `g = a(r) dr^2 + c(r) r^2 sigma` and `q` diagonal in the orthonormal frame
//! with radial eigenvalue `q_rad` and tangential eigenvalue `q_tan`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Parity, RadialGrid, Spacing};
use crate::spline::CubicSpline;

/// Default decay exponent for generated families.
pub const DEFAULT_DELTA: f64 = 0.5;
/// Rejection/rescale budget of the perturbed-DEC generator.
pub const MAX_RESCALES: usize = 40;

/// Profile values and radial derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Local {
    pub r: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub q_rad: f64,
    pub q_rad1: f64,
    pub q_tan: f64,
    pub q_tan1: f64,
}

/// `(1 + x^2)^(-p/2)` and its first two derivatives in `x`.
fn lump(p: f64, x: f64) -> (f64, f64, f64) {
    let s = 1.0 + x * x;
    let f = s.powf(-0.5 * p);
    let f1 = -p * x * f / s;
    let f2 = -p * f / s + p * (p + 2.0) * x * x * f / (s * s);
    (f, f1, f2)
}

/// One superharmonic-or-not term `amp * (1 + (r/scale)^2)^(-power/2)` of a conformal factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lump {
    pub amp: f64,
    pub power: f64,
    pub scale: f64,
}

/// Conformal factor `phi` with `g = phi^(4/(n-2)) g_flat`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConformalFactor {
    /// Exterior `1 + m/(2 r^(n-2))` for `r >= core`, glued to the potential of the
    /// smooth density `K (1 - r^2/core^2)^3` inside (C^4 across the core radius).
    SchwarzschildCore { mass: f64, core: f64, density: f64 },
    Lumps(Vec<Lump>),
}

impl ConformalFactor {
    fn schwarzschild(n: usize, mass: f64, core: f64) -> Self {
        let nf = n as f64;
        let s: f64 = (0..4).map(|k| binom3(k) * sign(k) / (nf + 2.0 * k as f64)).sum();
        let density = mass * (nf - 2.0) / (2.0 * core.powf(nf) * s);
        ConformalFactor::SchwarzschildCore { mass, core, density }
    }

    /// `(phi, phi', phi'')` at radius `r` in dimension `n`.
    pub fn eval(&self, n: usize, r: f64) -> (f64, f64, f64) {
        let nf = n as f64;
        match self {
            ConformalFactor::SchwarzschildCore { mass, core, density } => {
                if r >= *core {
                    let p = nf - 2.0;
                    (
                        1.0 + 0.5 * mass * r.powf(-p),
                        -0.5 * mass * p * r.powf(-p - 1.0),
                        0.5 * mass * p * (p + 1.0) * r.powf(-p - 2.0),
                    )
                } else {
                    let edge = 1.0 + 0.5 * mass * core.powf(2.0 - nf);
                    let (mut phi, mut d1, mut d2) = (edge, 0.0, 0.0);
                    for k in 0..4 {
                        let kf = k as f64;
                        let ck = binom3(k) * sign(k) / (core.powf(2.0 * kf) * (nf + 2.0 * kf));
                        phi += density * ck * (core.powf(2.0 * kf + 2.0) - r.powf(2.0 * kf + 2.0))
                            / (2.0 * kf + 2.0);
                        d1 -= density * ck * r.powf(2.0 * kf + 1.0);
                        d2 -= density * ck * (2.0 * kf + 1.0) * r.powf(2.0 * kf);
                    }
                    (phi, d1, d2)
                }
            }
            ConformalFactor::Lumps(lumps) => {
                let (mut phi, mut d1, mut d2) = (1.0, 0.0, 0.0);
                for l in lumps {
                    let (f, f1, f2) = lump(l.power, r / l.scale);
                    phi += l.amp * f;
                    d1 += l.amp * f1 / l.scale;
                    d2 += l.amp * f2 / (l.scale * l.scale);
                }
                (phi, d1, d2)
            }
        }
    }

    /// Flat Laplacian of `phi` (closed form), used as an independent curvature oracle.
    pub fn laplacian(&self, n: usize, r: f64) -> f64 {
        let nf = n as f64;
        match self {
            ConformalFactor::SchwarzschildCore { core, density, .. } => {
                if r >= *core {
                    0.0
                } else {
                    -density * (1.0 - r * r / (core * core)).powi(3)
                }
            }
            ConformalFactor::Lumps(lumps) => lumps
                .iter()
                .map(|l| {
                    let x = r / l.scale;
                    let s = 1.0 + x * x;
                    l.amp * l.power * s.powf(-0.5 * l.power - 2.0) * ((l.power + 2.0 - nf) * x * x - nf)
                        / (l.scale * l.scale)
                })
                .sum(),
        }
    }
}

fn binom3(k: usize) -> f64 {
    [1.0, 3.0, 3.0, 1.0][k]
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Extrinsic curvature models.
#[derive(Debug, Clone, PartialEq)]
pub enum Extrinsic {
    Zero,
    /// `q = value * g`.
    PureTrace { value: f64 },
    /// `q_tan = e1 f_k(x)`, `q_rad = q_tan + e2 x^2 (1+x^2)^(-k/2-1)`, `x = r/scale`,
    /// with `f_k(x) = (1+x^2)^(-k/2)`; isotropic at the origin.
    Decaying { e1: f64, e2: f64, scale: f64, power: f64 },
}

impl Extrinsic {
    /// `(q_rad, q_rad', q_tan, q_tan')`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64, f64) {
        match *self {
            Extrinsic::Zero => (0.0, 0.0, 0.0, 0.0),
            Extrinsic::PureTrace { value } => (value, 0.0, value, 0.0),
            Extrinsic::Decaying { e1, e2, scale, power } => {
                let x = r / scale;
                let (f, f1, _) = lump(power, x);
                let (h, h1, _) = lump(power + 2.0, x);
                let t = e1 * f;
                let t1 = e1 * f1 / scale;
                let aniso = e2 * x * x * h;
                let aniso1 = e2 * (2.0 * x * h + x * x * h1) / scale;
                (t + aniso, t1 + aniso1, t, t1)
            }
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        match *self {
            Extrinsic::Zero => Extrinsic::Zero,
            Extrinsic::PureTrace { value } => Extrinsic::PureTrace { value: value * factor },
            Extrinsic::Decaying { e1, e2, scale, power } => {
                Extrinsic::Decaying { e1: e1 * factor, e2: e2 * factor, scale, power }
            }
        }
    }
}

/// Nodal samples with spline interpolation in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfiles {
    pub grid: RadialGrid,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub q_rad: Vec<f64>,
    pub q_tan: Vec<f64>,
    splines: [CubicSpline; 4],
}

impl SampledProfiles {
    fn at(&self, r: f64) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.splines[k].eval(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    Analytic { metric: ConformalFactor, extrinsic: Extrinsic },
    Flat { extrinsic: Extrinsic },
    Sampled(Box<SampledProfiles>),
}

/// Dataset families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Flat {
        #[serde(default)]
        q_trace: f64,
    },
    Schwarzschild {
        m: f64,
        #[serde(default = "default_core")]
        core_radius: f64,
    },
    Conformal {
        alpha: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        bump_alpha: f64,
        #[serde(default = "half")]
        bump_scale: f64,
        /// Optional decaying `q` on top of the conformal metric.
        #[serde(default)]
        q_amplitude: f64,
    },
    PerturbedDec {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_core() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
/// Default relative size of `q` in the perturbed-DEC family.
pub fn default_amplitude() -> f64 {
    3e-5
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialInitialData {
    pub n: usize,
    pub alpha_decl: Option<f64>,
    pub delta: f64,
    pub kind: ProfileKind,
    /// Human-readable family tag, e.g. `"perturbed-dec"`.
    pub label: String,
}

impl RadialInitialData {
    pub fn flat(n: usize) -> Result<Self> {
        Self::flat_with(n, Extrinsic::Zero)
    }

    pub fn flat_with(n: usize, extrinsic: Extrinsic) -> Result<Self> {
        check_dimension(n)?;
        Ok(RadialInitialData {
            n,
            alpha_decl: Some(0.0),
            delta: DEFAULT_DELTA,
            kind: ProfileKind::Flat { extrinsic },
            label: "flat".into(),
        })
    }

    pub fn schwarzschild(n: usize, mass: f64, core: f64) -> Result<Self> {
        check_dimension(n)?;
        if !(mass >= 0.0) {
            return Err(Error::InvalidArgument(format!("schwarzschild mass must be >= 0, got {mass}")));
        }
        if !(core > 0.0) {
            return Err(Error::InvalidArgument("core radius must be positive".into()));
        }
        let nf = n as f64;
        Ok(RadialInitialData {
            n,
            alpha_decl: Some(2.0 * mass / (nf - 2.0)),
            delta: 0.5 * (nf - 2.0),
            kind: ProfileKind::Analytic {
                metric: ConformalFactor::schwarzschild(n, mass, core),
                extrinsic: Extrinsic::Zero,
            },
            label: "schwarzschild".into(),
        })
    }

    /// Conformally flat data whose conformal factor is a sum of lumps; for
    /// `delta < 1` a negative lump of power `n - 2 + 2 delta` sets the decay gap
    /// while keeping `phi` superharmonic, so `R_g > 0` whenever all masses are positive.
    pub fn conformal(
        n: usize,
        alpha: f64,
        delta: f64,
        scale: f64,
        bump: Option<(f64, f64)>,
        extrinsic: Extrinsic,
    ) -> Result<Self> {
        check_dimension(n)?;
        if !(delta > 0.0) || !(scale > 0.0) {
            return Err(Error::InvalidArgument("delta and scale must be positive".into()));
        }
        let nf = n as f64;
        let amp = |alpha: f64, scale: f64| alpha * (nf - 2.0) / (4.0 * scale.powf(nf - 2.0));
        let main = amp(alpha, scale);
        let mut lumps = vec![Lump { amp: main, power: nf - 2.0, scale }];
        if delta < 1.0 {
            let power = nf - 2.0 + 2.0 * delta;
            lumps.push(Lump { amp: -0.5 * (nf - 2.0) / power * main, power, scale });
        }
        let mut total = alpha;
        if let Some((bump_alpha, bump_scale)) = bump {
            if bump_alpha != 0.0 {
                if !(bump_scale > 0.0) {
                    return Err(Error::InvalidArgument("bump scale must be positive".into()));
                }
                lumps.push(Lump { amp: amp(bump_alpha, bump_scale), power: nf - 2.0, scale: bump_scale });
                total += bump_alpha;
            }
        }
        Ok(RadialInitialData {
            n,
            alpha_decl: Some(total),
            delta: delta.min(1.0),
            kind: ProfileKind::Analytic { metric: ConformalFactor::Lumps(lumps), extrinsic },
            label: "conformal".into(),
        })
    }

    /// Nodal samples on `grid` (even profiles at the origin).
    pub fn sampled(
        n: usize,
        grid: &RadialGrid,
        a: Vec<f64>,
        c: Vec<f64>,
        q_rad: Vec<f64>,
        q_tan: Vec<f64>,
    ) -> Result<Self> {
        check_dimension(n)?;
        let len = grid.len();
        if [a.len(), c.len(), q_rad.len(), q_tan.len()].iter().any(|&l| l != len) {
            return Err(Error::InvalidArgument("profile length differs from grid".into()));
        }
        if a.iter().chain(&c).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("a and c must be positive".into()));
        }
        let x = grid.nodes();
        let splines = [&a, &c, &q_rad, &q_tan].map(|y| CubicSpline::new(x, y));
        Ok(RadialInitialData {
            n,
            alpha_decl: None,
            delta: DEFAULT_DELTA,
            kind: ProfileKind::Sampled(Box::new(SampledProfiles {
                grid: grid.clone(),
                a,
                c,
                q_rad,
                q_tan,
                splines,
            })),
            label: "sampled".into(),
        })
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, ProfileKind::Sampled(_))
    }

    pub fn extrinsic(&self) -> Option<&Extrinsic> {
        match &self.kind {
            ProfileKind::Analytic { extrinsic, .. } | ProfileKind::Flat { extrinsic } => Some(extrinsic),
            ProfileKind::Sampled(_) => None,
        }
    }

    /// Same metric, extrinsic curvature multiplied by `factor`.
    pub fn with_scaled_q(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            ProfileKind::Analytic { extrinsic, .. } | ProfileKind::Flat { extrinsic } => {
                *extrinsic = extrinsic.scaled(factor);
            }
            ProfileKind::Sampled(s) => {
                let q_rad: Vec<f64> = s.q_rad.iter().map(|v| v * factor).collect();
                let q_tan: Vec<f64> = s.q_tan.iter().map(|v| v * factor).collect();
                let (a, c) = (s.a.clone(), s.c.clone());
                let rebuilt = Self::sampled(self.n, &s.grid, a, c, q_rad, q_tan).expect("valid samples");
                out.kind = rebuilt.kind;
            }
        }
        out
    }

    /// Same metric, a different `q` model (analytic data only).
    pub fn with_extrinsic(&self, q: Extrinsic) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            ProfileKind::Analytic { extrinsic, .. } | ProfileKind::Flat { extrinsic } => *extrinsic = q,
            ProfileKind::Sampled(_) => panic!("with_extrinsic needs analytic data"),
        }
        out
    }

    /// Pointwise values (analytic derivatives, or spline values without derivatives
    /// for sampled data; use [`Self::nodal`] for sampled derivatives).
    pub fn at(&self, r: f64) -> Local {
        let n = self.n;
        match &self.kind {
            ProfileKind::Flat { extrinsic } => {
                let (p, p1, t, t1) = extrinsic.eval(r);
                Local { r, a: 1.0, c: 1.0, q_rad: p, q_rad1: p1, q_tan: t, q_tan1: t1, ..Default::default() }
            }
            ProfileKind::Analytic { metric, extrinsic } => {
                let (phi, d1, d2) = metric.eval(n, r);
                let e = 4.0 / (n as f64 - 2.0);
                let a = phi.powf(e);
                let a1 = e * phi.powf(e - 1.0) * d1;
                let a2 = e * (e - 1.0) * phi.powf(e - 2.0) * d1 * d1 + e * phi.powf(e - 1.0) * d2;
                let (p, p1, t, t1) = extrinsic.eval(r);
                Local { r, a, a1, a2, c: a, c1: a1, c2: a2, q_rad: p, q_rad1: p1, q_tan: t, q_tan1: t1 }
            }
            ProfileKind::Sampled(s) => {
                let [a, c, p, t] = s.at(r);
                Local { r, a, c, q_rad: p, q_tan: t, ..Default::default() }
            }
        }
    }

    /// `a(r)` alone; cheap path for quadrature.
    pub fn a_at(&self, r: f64) -> f64 {
        self.at(r).a
    }

    /// Values and derivatives at every node of `grid`: closed forms for analytic
    /// profiles, second-order central differences for sampled ones.
    pub fn nodal(&self, grid: &RadialGrid) -> Vec<Local> {
        match &self.kind {
            ProfileKind::Sampled(s) => {
                let same = s.grid.nodes() == grid.nodes();
                let values = |k: usize, stored: &Vec<f64>| -> Vec<f64> {
                    if same {
                        stored.clone()
                    } else {
                        grid.nodes().iter().map(|&r| s.splines[k].eval(r)).collect()
                    }
                };
                let a = values(0, &s.a);
                let c = values(1, &s.c);
                let p = values(2, &s.q_rad);
                let t = values(3, &s.q_tan);
                let (a1, a2) = (grid.derivative(&a, Parity::Even), grid.second_derivative(&a, Parity::Even));
                let (c1, c2) = (grid.derivative(&c, Parity::Even), grid.second_derivative(&c, Parity::Even));
                let p1 = grid.derivative(&p, Parity::Even);
                let t1 = grid.derivative(&t, Parity::Even);
                grid.nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| Local {
                        r,
                        a: a[i],
                        a1: a1[i],
                        a2: a2[i],
                        c: c[i],
                        c1: c1[i],
                        c2: c2[i],
                        q_rad: p[i],
                        q_rad1: p1[i],
                        q_tan: t[i],
                        q_tan1: t1[i],
                    })
                    .collect()
            }
            _ => grid.nodes().iter().map(|&r| self.at(r)).collect(),
        }
    }

    /// Conformal factor of analytic conformally flat data.
    pub fn conformal_factor(&self) -> Option<&ConformalFactor> {
        match &self.kind {
            ProfileKind::Analytic { metric, .. } => Some(metric),
            _ => None,
        }
    }

    /// Characteristic radius used to seed the `r0` candidate ladder.
    pub fn characteristic_radius(&self) -> f64 {
        match &self.kind {
            ProfileKind::Analytic { metric: ConformalFactor::SchwarzschildCore { core, .. }, .. } => *core,
            ProfileKind::Analytic { metric: ConformalFactor::Lumps(l), .. } => {
                l.iter().map(|x| x.scale).fold(0.0, f64::max)
            }
            _ => 1.0,
        }
    }

    /// CSV export with header `r,a,c,q_rad,q_tan`.
    pub fn to_csv(&self, grid: &RadialGrid) -> String {
        let mut out = String::from("r,a,c,q_rad,q_tan\n");
        for l in self.nodal(grid) {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", l.r, l.a, l.c, l.q_rad, l.q_tan));
        }
        out
    }

    /// Reads the CSV written by [`Self::to_csv`] as sampled data.
    pub fn from_csv(n: usize, text: &str) -> Result<Self> {
        let mut cols: [Vec<f64>; 5] = Default::default();
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,a,c,q_rad,q_tan" => {}
            _ => return Err(Error::InvalidArgument("expected header r,a,c,q_rad,q_tan".into())),
        }
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidArgument(format!("line {}: expected 5 fields", k + 2)));
            }
            for (col, f) in cols.iter_mut().zip(fields) {
                col.push(f.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("line {}: bad number {f:?}", k + 2))
                })?);
            }
        }
        let [r, a, c, p, t] = cols;
        let grid = RadialGrid::from_nodes(r)?;
        Self::sampled(n, &grid, a, c, p, t)
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 4, got {n}")));
    }
    Ok(())
}

/// Generates a dataset of `family` on `grid`; the perturbed-DEC family is seeded
/// and its `q` is halved until the DEC margin is positive at every node.
pub fn make_dataset(family: &Family, n: usize, grid: &RadialGrid, seed: Option<u64>) -> Result<RadialInitialData> {
    match *family {
        Family::Flat { q_trace } => {
            let q = if q_trace == 0.0 { Extrinsic::Zero } else { Extrinsic::PureTrace { value: q_trace } };
            RadialInitialData::flat_with(n, q)
        }
        Family::Schwarzschild { m, core_radius } => RadialInitialData::schwarzschild(n, m, core_radius),
        Family::Conformal { alpha, delta, scale, bump_alpha, bump_scale, q_amplitude } => {
            let q = if q_amplitude == 0.0 {
                Extrinsic::Zero
            } else {
                Extrinsic::Decaying { e1: q_amplitude, e2: q_amplitude, scale, power: n as f64 + 2.0 * delta }
            };
            RadialInitialData::conformal(n, alpha, delta, scale, Some((bump_alpha, bump_scale)), q)
        }
        Family::PerturbedDec { amplitude } => perturbed_dec(n, amplitude, grid, seed.unwrap_or(0)),
    }
}

fn perturbed_dec(n: usize, amplitude: f64, grid: &RadialGrid, seed: u64) -> Result<RadialInitialData> {
    check_dimension(n)?;
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument("perturbed-dec amplitude must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.gen_range(0.5..2.0);
    let scale = rng.gen_range(0.7..1.5);
    let bump_alpha = rng.gen_range(0.0..0.5);
    let bump_scale = rng.gen_range(0.3..0.8);
    let e1 = amplitude * rng.gen_range(-1.0..1.0);
    let e2 = amplitude * rng.gen_range(-1.0..1.0);
    let q_scale = rng.gen_range(0.5..1.5);
    let q = Extrinsic::Decaying { e1, e2, scale: q_scale, power: n as f64 + 2.0 * DEFAULT_DELTA };
    let mut data =
        RadialInitialData::conformal(n, alpha, DEFAULT_DELTA, scale, Some((bump_alpha, bump_scale)), q)?;
    data.label = "perturbed-dec".into();
    for _ in 0..MAX_RESCALES {
        let fields = super::curvature::constraint_fields(&data, grid)?;
        if fields.min_margin().0 > 0.0 {
            return Ok(data);
        }
        data = data.with_scaled_q(0.5);
    }
    Err(Error::GenerationFailure(format!(
        "seed {seed}: DEC margin still non-positive after {MAX_RESCALES} halvings"
    )))
}

/// Grid section of the dataset JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub policy: String,
    #[serde(default)]
    pub stretch: Option<f64>,
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        let spacing = match self.policy.as_str() {
            "uniform" => Spacing::Uniform,
            "geometric" => Spacing::Geometric {
                stretch: self
                    .stretch
                    .ok_or_else(|| Error::InvalidArgument("geometric grid needs a stretch".into()))?,
            },
            other => return Err(Error::InvalidArgument(format!("unknown grid policy {other:?}"))),
        };
        build_grid(self.r_max, self.intervals, spacing)
    }
}

/// `{ "family", "n", "params", "grid", "seed" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: String,
    pub n: usize,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl DatasetSpec {
    pub fn family(&self) -> Result<Family> {
        let mut obj = match &self.params {
            serde_json::Value::Object(m) => m.clone(),
            serde_json::Value::Null => Default::default(),
            _ => return Err(Error::InvalidArgument("params must be an object".into())),
        };
        obj.insert("family".into(), serde_json::Value::String(self.family.clone()));
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::InvalidArgument(format!("family parameters: {e}")))
    }

    pub fn build(&self) -> Result<(RadialInitialData, RadialGrid)> {
        check_dimension(self.n)?;
        let grid = self.grid.build()?;
        let data = make_dataset(&self.family()?, self.n, &grid, self.seed)?;
        Ok((data, grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_profiles() {
        let d = RadialInitialData::flat(4).unwrap();
        let l = d.at(3.0);
        assert_eq!((l.a, l.c, l.q_rad, l.q_tan), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn schwarzschild_exterior_closed_form() {
        let d = RadialInitialData::schwarzschild(4, 1.0, 1.0).unwrap();
        for r in [1.0, 1.5, 3.0, 10.0] {
            let l = d.at(r);
            let expect = (1.0 + 1.0 / (2.0 * r * r)).powi(2);
            assert!((l.a - expect).abs() < 1e-14 && (l.c - expect).abs() < 1e-14);
        }
        assert_eq!(d.alpha_decl, Some(1.0));
    }

    #[test]
    fn schwarzschild_core_is_smooth_and_even() {
        let d = RadialInitialData::schwarzschild(5, 0.7, 1.2).unwrap();
        let m = d.conformal_factor().unwrap();
        let eps = 1e-7;
        for k in 0..3 {
            let below = m.eval(5, 1.2 - eps);
            let above = m.eval(5, 1.2 + eps);
            let (x, y) = match k {
                0 => (below.0, above.0),
                1 => (below.1, above.1),
                _ => (below.2, above.2),
            };
            assert!((x - y).abs() < 1e-5, "derivative {k} jumps: {x} vs {y}");
        }
        assert_eq!(m.eval(5, 0.0).1, 0.0);
        let l = d.at(0.0);
        assert_eq!(l.a, l.c);
    }

    #[test]
    fn rejects_low_dimension_and_negative_mass() {
        assert!(RadialInitialData::flat(3).is_err());
        assert!(matches!(RadialInitialData::schwarzschild(4, -1.0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lump_laplacian_matches_derivatives() {
        let f = ConformalFactor::Lumps(vec![
            Lump { amp: 0.3, power: 2.0, scale: 0.8 },
            Lump { amp: -0.1, power: 3.0, scale: 0.8 },
        ]);
        for r in [0.3, 1.0, 4.0] {
            let (_, d1, d2) = f.eval(4, r);
            let lap = d2 + 3.0 * d1 / r;
            assert!((lap - f.laplacian(4, r)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_roundtrip_is_sampled() {
        let g = build_grid(5.0, 32, Spacing::Uniform).unwrap();
        let d = RadialInitialData::schwarzschild(4, 0.5, 1.0).unwrap();
        let back = RadialInitialData::from_csv(4, &d.to_csv(&g)).unwrap();
        assert!(!back.is_analytic());
        assert!((back.at(1.875).a - d.at(1.875).a).abs() < 1e-12);
        assert!((back.at(2.0).a - d.at(2.0).a).abs() < 1e-3);
    }

    #[test]
    fn dataset_spec_parses_family() {
        let spec: DatasetSpec = serde_json::from_str(
            r#"{"family":"schwarzschild","n":4,"params":{"m":1.0},
                "grid":{"r_max":50,"N":256,"policy":"geometric","stretch":1.01},"seed":3}"#,
        )
        .unwrap();
        assert_eq!(spec.family().unwrap(), Family::Schwarzschild { m: 1.0, core_radius: 1.0 });
        let (d, g) = spec.build().unwrap();
        assert_eq!(d.n, 4);
        assert_eq!(g.intervals(), 256);
    }
}
