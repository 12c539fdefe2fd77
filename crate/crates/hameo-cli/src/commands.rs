//! The eight subcommands. Each handler resolves its configuration
//! (file first, inline flags override), runs the corresponding library
//! routines, and emits a stamped JSON report plus a CSV table through
//! [`crate::emit`].

use std::path::PathBuf;

use clap::Args;
use hameo::algebra::{self, Reparameterization};
use hameo::calabi::{
    cal_path, cal_twist, twist_generating_ham, wild_truncated, CalConvention, RadialProfile,
    TwistMap, K_MAX,
};
use hameo::config::{load_config, ExperimentConfig, HamSpec, ProfileSpec, SurfaceName, DEFAULT_SEED};
use hameo::families::{random_pair_with, WeightStyle};
use hameo::flow::{advance, integrate_flow, StepControl};
use hameo::geometry::vec3;
use hameo::hofer::{
    self, DisplacementProblem, DisplacementReport, HamFamily, TargetRegion,
};
use hameo::limits::{self, HamiltonianSequence, ProbeOptions, RefinementProbe};
use hameo::verify;
use hameo::{sample_grid, Error, Grid, Result, Surface, SurfacePoint, Vec3};
use rayon::prelude::*;
use serde::Serialize;

use crate::emit::{self, Cell, Stamp};

// ---------------------------------------------------------------------------
// shared argument plumbing
// ---------------------------------------------------------------------------

/// Experiment settings shared by the config-driven subcommands. Every
/// field can come from `--config <file>`; inline flags win on conflict.
#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// JSON experiment config file; the flags below override its fields
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Surface name: "disc" or "sphere" (default disc without a config)
    #[arg(long, value_name = "NAME")]
    pub surface: Option<String>,
    /// Disc radius (disc only; default 1)
    #[arg(long, value_name = "R")]
    pub radius: Option<f64>,
    /// Hamiltonian spec: JSON object or a bare name, e.g. 'sphere_height'
    /// or '{"ham":"shear","strength":0.4,"half":0.2,"taper":0.05}'
    #[arg(long, value_name = "SPEC")]
    pub ham: Option<String>,
    /// Second Hamiltonian spec (same format as --ham)
    #[arg(long, value_name = "SPEC")]
    pub second: Option<String>,
    /// Sample-grid resolution: "N1xN2", or a single "N" for NxN
    #[arg(long, value_name = "N1xN2")]
    pub grid: Option<String>,
    /// Nominal integrator step; substeps snap to frame boundaries
    #[arg(long, value_name = "H")]
    pub step: Option<f64>,
    /// Number of stored frames across the time span
    #[arg(long, value_name = "N")]
    pub frames: Option<usize>,
    /// Seed for randomized selections
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Report path: JSON there plus a CSV sibling (a ".csv" path puts the
    /// table there and the JSON beside it). Omitted: JSON to stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Load the config file (if any) and fold the inline flags over it.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::new(SurfaceName::Disc),
        };
        if let Some(name) = &self.surface {
            cfg.surface = parse_surface_name(name)?;
        }
        if let Some(r) = self.radius {
            cfg.radius = Some(r);
        }
        if let Some(spec) = &self.ham {
            cfg.ham = Some(parse_ham_spec(spec)?);
        }
        if let Some(spec) = &self.second {
            cfg.second = Some(parse_ham_spec(spec)?);
        }
        if let Some(dims) = &self.grid {
            cfg.grid = Some(parse_grid_dims(dims)?);
        }
        if let Some(v) = self.step {
            cfg.step = Some(v);
        }
        if let Some(v) = self.frames {
            cfg.frames = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(path) = &self.out {
            cfg.out = Some(path.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_surface_name(name: &str) -> Result<SurfaceName> {
    match name.trim() {
        "disc" => Ok(SurfaceName::Disc),
        "sphere" => Ok(SurfaceName::Sphere),
        other => Err(Error::Config(format!(
            "unknown surface {other:?}; expected \"disc\" or \"sphere\""
        ))),
    }
}

/// Inline Hamiltonian specs accept either a JSON object or a bare name
/// (sugar for the field-free variants, e.g. `sphere_height`).
fn parse_ham_spec(text: &str) -> Result<HamSpec> {
    let trimmed = text.trim();
    let json = if trimmed.starts_with('{') {
        trimmed.to_string()
    } else {
        format!("{{\"ham\":\"{trimmed}\"}}")
    };
    serde_json::from_str::<HamSpec>(&json)
        .map_err(|e| Error::Config(format!("hamiltonian spec {trimmed:?}: {e}")))
}

fn parse_grid_dims(text: &str) -> Result<(usize, usize)> {
    let bad = |t: &str| Error::Config(format!("grid {t:?}: expected \"N1xN2\" or \"N\""));
    let parts: Vec<&str> = text.trim().split(['x', 'X', ',']).collect();
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(text));
    match parts.as_slice() {
        [n] => {
            let n = parse(n)?;
            Ok((n, n))
        }
        [n1, n2] => Ok((parse(n1)?, parse(n2)?)),
        _ => Err(bad(text)),
    }
}

/// Common setup: resolved config, concrete surface, sample grid, and
/// integrator controls.
fn setup(common: &CommonArgs) -> Result<(ExperimentConfig, Surface, Grid, StepControl)> {
    let cfg = common.resolve()?;
    let surface = cfg.surface()?;
    let (n1, n2) = cfg.grid_dims();
    let grid = sample_grid(surface, n1, n2)?;
    let ctrl = cfg.step_control();
    ctrl.validate()?;
    Ok((cfg, surface, grid, ctrl))
}

fn require_ham(cfg: &ExperimentConfig, sub: &str) -> Result<HamSpec> {
    cfg.ham.clone().ok_or_else(|| {
        Error::Config(format!(
            "'{sub}' needs a Hamiltonian: pass --ham <spec> or put \"ham\" in the config"
        ))
    })
}

/// Run fingerprint: canonical config (with the output path blanked, so
/// where a report lands never changes its content) plus the subcommand's
/// own parameters.
fn stamp_for(cfg: &ExperimentConfig, extra: &str) -> Stamp {
    let mut hashed = cfg.clone();
    hashed.out = None;
    let canonical = format!("{}|{extra}", hashed.canonical_json());
    Stamp::new(&canonical, cfg.seed())
}

fn out_path(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.out.as_ref().map(PathBuf::from)
}

fn surface_name(surface: Surface) -> String {
    match surface {
        Surface::Disc { radius } if radius == 1.0 => "disc".into(),
        Surface::Disc { radius } => format!("disc(radius {radius})"),
        Surface::Sphere => "sphere".into(),
    }
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Start of the reported time span
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// End of the reported time span
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
}

#[derive(Serialize)]
struct FlowReport {
    #[serde(flatten)]
    stamp: Stamp,
    surface: String,
    ham: String,
    t0: f64,
    t1: f64,
    step: f64,
    frames: usize,
    grid: [usize; 2],
    points: usize,
    /// Sup over frames and points of the generator drift along its own
    /// flow; only meaningful (and only reported) for autonomous inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    conservation_drift: Option<f64>,
    /// Sup deviation from the closed-form flow, when one exists and the
    /// span starts at 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_flow_deviation: Option<f64>,
}

/// Chart used for a trajectory row, with its two coordinates. Disc points
/// report polar coordinates; sphere points report the equal-area
/// cylinder chart, falling back to planar hemisphere coordinates inside
/// the pole caps the cylinder chart excludes.
fn chart_cells(surface: Surface, p: Vec3) -> (&'static str, f64, f64) {
    match surface {
        Surface::Disc { .. } => match SurfacePoint::from_ambient(surface, p) {
            Ok(SurfacePoint::Polar { r, theta }) => ("polar", r, theta),
            _ => ("euclidean", p[0], p[1]),
        },
        Surface::Sphere => match SurfacePoint::from_ambient(surface, p) {
            Ok(SurfacePoint::Cylinder { z, phi }) => ("cylinder", z, phi),
            _ if p[2] >= 0.0 => ("north_xy", p[0], p[1]),
            _ => ("south_xy", p[0], p[1]),
        },
    }
}

pub fn flow(args: &FlowArgs) -> Result<()> {
    let (cfg, surface, grid, ctrl) = setup(&args.common)?;
    let h = require_ham(&cfg, "flow")?.build(surface)?;
    let (t0, t1) = (args.t0, args.t1);
    if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1 && t1 <= 1.0) {
        return Err(Error::Range(format!(
            "time span [{t0}, {t1}] must satisfy 0 <= t0 < t1 <= 1"
        )));
    }
    let frames = ctrl.frames;
    let times: Vec<f64> = (0..frames)
        .map(|k| t0 + (t1 - t0) * k as f64 / (frames - 1) as f64)
        .collect();

    // March every grid point through the span, keeping each frame.
    let trajectories: Vec<Vec<Vec3>> = grid
        .points
        .par_iter()
        .map(|&p0| {
            let mut traj = Vec::with_capacity(frames);
            let mut p = p0;
            traj.push(p);
            for k in 1..frames {
                p = advance(&h, times[k - 1], times[k], p, ctrl.step)?;
                traj.push(p);
            }
            Ok(traj)
        })
        .collect::<Result<_>>()?;

    let conservation_drift = h.is_autonomous().then(|| {
        trajectories
            .iter()
            .map(|traj| {
                let h0 = h.eval_raw(times[0], traj[0]);
                traj.iter()
                    .zip(&times)
                    .map(|(&p, &t)| (h.eval_raw(t, p) - h0).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    });
    let exact_flow_deviation = (h.has_exact_flow() && t0 == 0.0).then(|| {
        trajectories
            .iter()
            .map(|traj| {
                traj.iter()
                    .zip(&times)
                    .filter_map(|(&p, &t)| {
                        h.exact_flow_point(t, traj[0]).map(|q| vec3::dist(p, q))
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    });

    let stamp = stamp_for(&cfg, &format!("flow|t0={t0}|t1={t1}"));
    let report = FlowReport {
        stamp: stamp.clone(),
        surface: surface_name(surface),
        ham: h.label().to_string(),
        t0,
        t1,
        step: ctrl.step,
        frames,
        grid: [grid.n1, grid.n2],
        points: grid.points.len(),
        conservation_drift,
        exact_flow_deviation,
    };

    let mut rows = Vec::with_capacity(frames * grid.points.len());
    for (k, &t) in times.iter().enumerate() {
        for (i, traj) in trajectories.iter().enumerate() {
            let (chart, c1, c2) = chart_cells(surface, traj[k]);
            rows.push(vec![
                Cell::Float(t),
                Cell::Int(i as i64),
                Cell::Str(chart.to_string()),
                Cell::Float(c1),
                Cell::Float(c2),
            ]);
        }
    }
    emit::emit_report(
        out_path(&cfg).as_deref(),
        &report,
        &stamp,
        &["t", "grid_index", "chart", "c1", "c2"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// algebra
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct AlgebraArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct AlgebraReport {
    #[serde(flatten)]
    stamp: Stamp,
    surface: String,
    ham: String,
    second: String,
    step: f64,
    grid: [usize; 2],
    residuals: Vec<ResidualRow>,
    max_residual: f64,
}

#[derive(Serialize)]
struct ResidualRow {
    check: &'static str,
    residual: f64,
}

/// Sup over grid points of `dist(lhs(x), rhs(x))`.
fn sup_gap(
    grid: &Grid,
    lhs: impl Fn(Vec3) -> Result<Vec3> + Sync,
    rhs: impl Fn(Vec3) -> Result<Vec3> + Sync,
) -> Result<f64> {
    grid.points
        .par_iter()
        .map(|&x| Ok(vec3::dist(lhs(x)?, rhs(x)?)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

pub fn algebra(args: &AlgebraArgs) -> Result<()> {
    let (cfg, surface, grid, ctrl) = setup(&args.common)?;
    let (h, f) = match (&cfg.ham, &cfg.second) {
        (Some(a), Some(b)) => (a.build(surface)?, b.build(surface)?),
        (None, None) => random_pair_with(surface, cfg.seed(), WeightStyle::SignFixed),
        _ => {
            return Err(Error::Config(
                "pass both --ham and --second, or neither to draw a seeded random pair".into(),
            ))
        }
    };
    let step = ctrl.step;

    // Product: the composite generator's time-1 flow against the
    // composition of the two flows.
    let prod = algebra::raw_product(&h, &f, step)?;
    let product_law = sup_gap(
        &grid,
        |x| advance(&prod, 0.0, 1.0, x, step),
        |x| advance(&h, 0.0, 1.0, advance(&f, 0.0, 1.0, x, step)?, step),
    )?;

    // Inverse: the inverse generator's flow undoes the original flow.
    let flow_h = integrate_flow(&h, &grid, ctrl)?;
    let inv = algebra::inverse_ham(&h, &flow_h)?;
    let inverse_law = sup_gap(
        &grid,
        |x| advance(&inv, 0.0, 1.0, advance(&h, 0.0, 1.0, x, step)?, step),
        Ok,
    )?;

    // Time rescaling: the slowed generator's time-1 map is the original
    // flow at the rescaled time.
    let s = 0.5;
    let slowed = algebra::time_rescale_ham(&h, s)?;
    let time_rescale = sup_gap(
        &grid,
        |x| advance(&slowed, 0.0, 1.0, x, step),
        |x| advance(&h, 0.0, s, x, step),
    )?;

    // Reparameterization: same endpoint, same norm.
    let zeta = Reparameterization::flat(0.3)?;
    let rep = algebra::reparameterize_ham(&h, &zeta)?;
    let reparam_flow = sup_gap(
        &grid,
        |x| advance(&rep, 0.0, 1.0, x, step),
        |x| advance(&h, 0.0, 1.0, x, step),
    )?;
    let reparam_norm =
        (rep.hofer_norm(&grid).l1 - h.hofer_norm(&grid).l1).abs();

    // Generator-level consistency of the product along the two paths.
    let flow_f = integrate_flow(&f, &grid, ctrl)?;
    let dev_additivity = algebra::dev_of_product_check(&flow_h, &flow_f)?;

    let residuals = vec![
        ResidualRow { check: "product_law", residual: product_law },
        ResidualRow { check: "inverse_law", residual: inverse_law },
        ResidualRow { check: "time_rescale", residual: time_rescale },
        ResidualRow { check: "reparameterization_flow", residual: reparam_flow },
        ResidualRow { check: "reparameterization_norm", residual: reparam_norm },
        ResidualRow { check: "dev_additivity", residual: dev_additivity },
    ];
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);

    let stamp = stamp_for(&cfg, "algebra");
    let report = AlgebraReport {
        stamp: stamp.clone(),
        surface: surface_name(surface),
        ham: h.label().to_string(),
        second: f.label().to_string(),
        step,
        grid: [grid.n1, grid.n2],
        residuals,
        max_residual,
    };
    let rows: Vec<Vec<Cell>> = report
        .residuals
        .iter()
        .map(|r| vec![Cell::Str(r.check.to_string()), Cell::Float(r.residual)])
        .collect();
    emit::emit_report(
        out_path(&cfg).as_deref(),
        &report,
        &stamp,
        &["check", "residual"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// hofer
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct HoferArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct HoferReport {
    #[serde(flatten)]
    stamp: Stamp,
    surface: String,
    ham: String,
    /// Path length: time integral of the generator's oscillation.
    leng: f64,
    /// Time-integrated oscillation norm of the generator.
    norm_l1: f64,
    /// Sup-over-time oscillation norm of the generator.
    norm_sup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    second: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leng_second: Option<f64>,
    /// Uniform distance between the two paths (maps and inverses).
    #[serde(skip_serializing_if = "Option::is_none")]
    d_c0: Option<f64>,
    /// Path-space metric: d_c0 plus the length of the connecting path.
    #[serde(skip_serializing_if = "Option::is_none")]
    d_ham: Option<f64>,
}

pub fn hofer_cmd(args: &HoferArgs) -> Result<()> {
    let (cfg, surface, grid, ctrl) = setup(&args.common)?;
    let h = require_ham(&cfg, "hofer")?.build(surface)?;
    let path = integrate_flow(&h, &grid, ctrl)?;
    let norm = h.hofer_norm(&grid);

    let mut report = HoferReport {
        stamp: stamp_for(&cfg, "hofer"),
        surface: surface_name(surface),
        ham: h.label().to_string(),
        leng: hofer::leng(&path),
        norm_l1: norm.l1,
        norm_sup: norm.sup,
        second: None,
        leng_second: None,
        d_c0: None,
        d_ham: None,
    };
    if let Some(spec) = &cfg.second {
        let g = spec.build(surface)?;
        let path_g = integrate_flow(&g, &grid, ctrl)?;
        report.second = Some(g.label().to_string());
        report.leng_second = Some(hofer::leng(&path_g));
        report.d_c0 = Some(hofer::d_bar(&path, &path_g)?);
        report.d_ham = Some(hofer::d_ham(&path, &path_g)?);
    }

    let stamp = report.stamp.clone();
    let mut rows = vec![
        vec![Cell::Str("leng".into()), Cell::Float(report.leng)],
        vec![Cell::Str("norm_l1".into()), Cell::Float(report.norm_l1)],
        vec![Cell::Str("norm_sup".into()), Cell::Float(report.norm_sup)],
    ];
    for (name, value) in [
        ("leng_second", report.leng_second),
        ("d_c0", report.d_c0),
        ("d_ham", report.d_ham),
    ] {
        if let Some(v) = value {
            rows.push(vec![Cell::Str(name.into()), Cell::Float(v)]);
        }
    }
    emit::emit_report(
        out_path(&cfg).as_deref(),
        &report,
        &stamp,
        &["quantity", "value"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// displace
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct DisplaceArgs {
    /// Target region JSON: {"kind":"ball","center":[x,y],"radius":r}
    /// (disc) or {"kind":"cap","zmin":z} (sphere)
    #[arg(long, value_name = "JSON")]
    pub target: String,
    /// Witness family: "disc-translations" or "cap-rotations"
    #[arg(long, value_name = "NAME")]
    pub family: String,
    /// Cap on objective evaluations across all restarts
    #[arg(long, default_value_t = 400)]
    pub budget: usize,
    /// Separation margin override for the displacement check
    #[arg(long, value_name = "EPS")]
    pub tolerance: Option<f64>,
    /// Report path: JSON plus a CSV sibling. Omitted: JSON to stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DisplaceCliReport {
    #[serde(flatten)]
    stamp: Stamp,
    family: String,
    budget: usize,
    #[serde(flatten)]
    report: DisplacementReport,
    /// Label of the cheapest displacing Hamiltonian found, when feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
}

pub fn displace(args: &DisplaceArgs) -> Result<()> {
    let target: TargetRegion = serde_json::from_str(&args.target)
        .map_err(|e| Error::Config(format!("target {:?}: {e}", args.target)))?;
    let family = HamFamily::by_name(&args.family)?;
    let problem = DisplacementProblem {
        target: target.clone(),
        family,
        budget: args.budget,
        tolerance: args.tolerance,
    };
    let (report, witness) = hofer::displacement_energy_upper(&problem)?;

    let canonical = format!(
        "displace|target={}|family={}|budget={}|tolerance={:?}",
        serde_json::to_string(&target)?,
        args.family,
        args.budget,
        args.tolerance,
    );
    let stamp = Stamp::new(&canonical, DEFAULT_SEED);
    let mut rows = vec![
        vec![
            Cell::Str("feasible".into()),
            Cell::Str(report.feasible.to_string()),
        ],
        vec![Cell::Str("value".into()), Cell::OptFloat(report.value)],
        vec![Cell::Str("floor".into()), Cell::OptFloat(report.floor)],
        vec![
            Cell::Str("evaluations".into()),
            Cell::Int(report.evaluations as i64),
        ],
    ];
    if let Some(params) = &report.params {
        for (i, &p) in params.iter().enumerate() {
            rows.push(vec![Cell::Str(format!("param_{i}")), Cell::Float(p)]);
        }
    }
    let cli_report = DisplaceCliReport {
        stamp: stamp.clone(),
        family: args.family.clone(),
        budget: args.budget,
        report,
        witness: witness.map(|w| w.label().to_string()),
    };
    emit::emit_report(
        args.out.as_deref(),
        &cli_report,
        &stamp,
        &["quantity", "value"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// cal
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CalArgs {
    /// Radial twist profile JSON {"lo":..,"hi":..,"amp":..}: evaluates
    /// both the closed-form route and the path-integral route
    #[arg(long, value_name = "JSON", conflicts_with = "ham")]
    pub profile: Option<String>,
    /// Compactly supported disc Hamiltonian spec: path-integral route
    #[arg(long, value_name = "SPEC")]
    pub ham: Option<String>,
    /// Disc radius for --ham mode (default 1)
    #[arg(long, value_name = "R")]
    pub radius: Option<f64>,
    /// Volume convention: "raw" (plain area form) or "normalized"
    /// (area form scaled to unit total mass)
    #[arg(long, default_value = "raw")]
    pub convention: String,
    /// Report path: JSON plus a CSV sibling. Omitted: JSON to stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CalReport {
    #[serde(flatten)]
    stamp: Stamp,
    convention: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<ProfileSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ham: Option<String>,
    /// Closed-form annulus-integral value (profile mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    direct: Option<f64>,
    /// Time-and-area integral of the generating Hamiltonian.
    via_path: f64,
    /// Relative gap between the two routes (profile mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_gap: Option<f64>,
}

fn parse_convention(name: &str) -> Result<CalConvention> {
    match name.trim() {
        "raw" => Ok(CalConvention::Raw),
        "normalized" => Ok(CalConvention::Normalized),
        other => Err(Error::Config(format!(
            "unknown convention {other:?}; expected \"raw\" or \"normalized\""
        ))),
    }
}

pub fn cal(args: &CalArgs) -> Result<()> {
    let convention = parse_convention(&args.convention)?;
    let (report, stamp) = match (&args.profile, &args.ham) {
        (Some(text), None) => {
            let spec: ProfileSpec = serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("profile {text:?}: {e}")))?;
            let rho = spec.build()?;
            let mut direct = cal_twist(&rho);
            if convention == CalConvention::Normalized {
                direct /= std::f64::consts::PI; // twist profiles live on the unit disc
            }
            let via_path = cal_path(&twist_generating_ham(&rho), convention)?;
            let rel_gap = (direct - via_path).abs() / direct.abs().max(1e-12);
            let canonical = format!(
                "cal|profile={}|convention={}",
                serde_json::to_string(&spec)?,
                args.convention,
            );
            let stamp = Stamp::new(&canonical, DEFAULT_SEED);
            (
                CalReport {
                    stamp: stamp.clone(),
                    convention: args.convention.clone(),
                    profile: Some(spec),
                    ham: None,
                    direct: Some(direct),
                    via_path,
                    rel_gap: Some(rel_gap),
                },
                stamp,
            )
        }
        (None, Some(text)) => {
            let spec = parse_ham_spec(text)?;
            let surface = Surface::Disc { radius: args.radius.unwrap_or(1.0) };
            let h = spec.build(surface)?;
            let via_path = cal_path(&h, convention)?;
            let canonical = format!(
                "cal|ham={}|radius={}|convention={}",
                serde_json::to_string(&spec)?,
                args.radius.unwrap_or(1.0),
                args.convention,
            );
            let stamp = Stamp::new(&canonical, DEFAULT_SEED);
            (
                CalReport {
                    stamp: stamp.clone(),
                    convention: args.convention.clone(),
                    profile: None,
                    ham: Some(h.label().to_string()),
                    direct: None,
                    via_path,
                    rel_gap: None,
                },
                stamp,
            )
        }
        _ => {
            return Err(Error::Config(
                "'cal' needs exactly one of --profile or --ham".into(),
            ))
        }
    };

    let mut rows = vec![vec![
        Cell::Str("via_path".into()),
        Cell::Float(report.via_path),
    ]];
    if let Some(v) = report.direct {
        rows.insert(0, vec![Cell::Str("direct".into()), Cell::Float(v)]);
    }
    if let Some(v) = report.rel_gap {
        rows.push(vec![Cell::Str("rel_gap".into()), Cell::Float(v)]);
    }
    emit::emit_report(
        args.out.as_deref(),
        &report,
        &stamp,
        &["quantity", "value"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// wild
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct WildArgs {
    /// Truncation depth: the tower multiplies rescaled twist levels 1..=K
    #[arg(long = "K", value_name = "K")]
    pub k: u32,
    /// Grid side for map comparisons (NxN on the unit disc)
    #[arg(long, default_value_t = 64, value_name = "N")]
    pub grid: usize,
    /// Report path: JSON plus a CSV sibling. Omitted: JSON to stdout
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct WildLevelRow {
    k: u32,
    /// Invariant of the single level-k twist (calibrated to 1).
    cal: f64,
    /// Sup distance between the level-k twist and the half-rescale
    /// conjugate of the 16th power of level k-1 (absent at k = 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    conjugation_residual: Option<f64>,
}

#[derive(Serialize)]
struct WildTruncationRow {
    k: u32,
    /// Invariant of the depth-k truncated tower: grows like k.
    cal: f64,
    /// Uniform distance to the previous truncation (identity at k = 1):
    /// shrinks with the level supports, so the maps converge uniformly
    /// while `cal` diverges.
    map_gap_to_previous: f64,
}

/// Largest point displacement of a twist map. Consecutive truncations of
/// the tower differ exactly by one level on its own annulus (the level
/// supports are pairwise disjoint), so this is the uniform distance
/// between them. Rotational symmetry reduces the sup to a radial scan.
fn twist_displacement(twist: &TwistMap) -> f64 {
    let (lo, hi) = twist.profile().support();
    let n = 4096;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / n as f64;
            let p = [r, 0.0, 0.0];
            vec3::dist(twist.apply(p), p)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Serialize)]
struct WildReport {
    #[serde(flatten)]
    stamp: Stamp,
    k: u32,
    grid: [usize; 2],
    levels: Vec<WildLevelRow>,
    truncations: Vec<WildTruncationRow>,
    /// Invariant of the full depth-K truncation.
    cal: f64,
}

pub fn wild(args: &WildArgs) -> Result<()> {
    if !(1..=K_MAX).contains(&args.k) {
        return Err(Error::Range(format!(
            "truncation depth {} outside 1..={K_MAX}",
            args.k
        )));
    }
    let base = RadialProfile::unit();
    let grid = sample_grid(Surface::unit_disc(), args.grid, args.grid)?;

    let mut levels = Vec::with_capacity(args.k as usize);
    for k in 1..=args.k {
        let rho_k = base.dyadic(k)?;
        let conjugation_residual = if k >= 2 {
            let direct = TwistMap::new(rho_k.clone());
            let conjugated = TwistMap::new(base.dyadic(k - 1)?)
                .power(16.0)
                .rescale_conjugate(0.5)?;
            let gap = grid
                .points
                .par_iter()
                .map(|&p| vec3::dist(direct.apply(p), conjugated.apply(p)))
                .reduce(|| 0.0, f64::max);
            Some(gap)
        } else {
            None
        };
        levels.push(WildLevelRow { k, cal: cal_twist(&rho_k), conjugation_residual });
    }

    let mut truncations = Vec::with_capacity(args.k as usize);
    for k in 1..=args.k {
        let (_map, cal) = wild_truncated(k, &base, &grid)?;
        // Depth k-1 = identity at k = 1, so the column is total.
        let gap = twist_displacement(&TwistMap::new(base.dyadic(k)?));
        truncations.push(WildTruncationRow { k, cal, map_gap_to_previous: gap });
    }
    let cal_total = truncations.last().map(|row| row.cal).unwrap_or(0.0);

    let canonical = format!("wild|K={}|grid={}", args.k, args.grid);
    let stamp = Stamp::new(&canonical, DEFAULT_SEED);
    let report = WildReport {
        stamp: stamp.clone(),
        k: args.k,
        grid: [args.grid, args.grid],
        levels,
        truncations,
        cal: cal_total,
    };

    let rows: Vec<Vec<Cell>> = report
        .levels
        .iter()
        .zip(&report.truncations)
        .map(|(lev, tr)| {
            vec![
                Cell::Int(lev.k as i64),
                Cell::Float(lev.cal),
                Cell::OptFloat(lev.conjugation_residual),
                Cell::Float(tr.cal),
                Cell::Float(tr.map_gap_to_previous),
            ]
        })
        .collect();
    emit::emit_report(
        args.report.as_deref(),
        &report,
        &stamp,
        &[
            "k",
            "level_cal",
            "conjugation_residual",
            "truncated_cal",
            "map_gap_to_previous",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// limits
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
#[command(group(
    clap::ArgGroup::new("mode").required(true).args(["suite", "study"])
))]
pub struct LimitsArgs {
    /// Bundled sequence: decay|constant|geometric|shrinking|oscillatory
    #[arg(long, value_name = "NAME")]
    pub suite: Option<String>,
    /// Number of leading sequence terms to examine
    #[arg(long, default_value_t = limits::DEFAULT_PREFIX)]
    pub prefix: usize,
    /// Ratio-test threshold for the decay flags
    #[arg(long, default_value_t = limits::DEFAULT_DECAY_THRESHOLD)]
    pub threshold: f64,
    /// Step-refinement study instead: conservation|one-param|exact-flow
    #[arg(long, value_name = "KIND")]
    pub study: Option<String>,
    /// Refinement levels for --study (each halves the step)
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Coarsest nominal step for --study (snapped to a power of two)
    #[arg(long, default_value_t = 1.6e-2)]
    pub nominal_step: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct StudyReport {
    #[serde(flatten)]
    stamp: Stamp,
    surface: String,
    ham: String,
    study: String,
    nominal_step: f64,
    levels: usize,
    rows: Vec<limits::StudyRow>,
}

pub fn limits_cmd(args: &LimitsArgs) -> Result<()> {
    if let Some(name) = &args.suite {
        return limits_suite(args, name);
    }
    let study = args.study.as_deref().expect("clap group guarantees a mode");
    let probe = match study {
        "conservation" => RefinementProbe::Conservation,
        "one-param" | "one_param" => RefinementProbe::OneParam {
            pairs: vec![(1.0 / 3.0, 1.0 / 3.0), (0.25, 0.5)],
        },
        "exact-flow" | "exact_flow" => RefinementProbe::ExactFlow,
        other => {
            return Err(Error::Config(format!(
                "unknown study {other:?}; expected conservation, one-param, or exact-flow"
            )))
        }
    };

    let (cfg, surface, grid, _ctrl) = setup(&args.common)?;
    let h = require_ham(&cfg, "limits --study")?.build(surface)?;
    let rows = limits::refinement_study(&h, &grid, &probe, args.nominal_step, args.levels)?;
    let stamp = stamp_for(
        &cfg,
        &format!(
            "limits|study={study}|levels={}|nominal_step={}",
            args.levels, args.nominal_step
        ),
    );
    let report = StudyReport {
        stamp: stamp.clone(),
        surface: surface_name(surface),
        ham: h.label().to_string(),
        study: study.to_string(),
        nominal_step: args.nominal_step,
        levels: args.levels,
        rows,
    };
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Float(r.step),
                Cell::Float(r.residual),
                Cell::OptFloat(r.observed_order),
            ]
        })
        .collect();
    emit::emit_report(
        out_path(&cfg).as_deref(),
        &report,
        &stamp,
        &["step", "residual", "observed_order"],
        &rows,
    )
}

fn limits_suite(args: &LimitsArgs, name: &str) -> Result<()> {
    let cfg = args.common.resolve()?;
    let seq = HamiltonianSequence::by_name(name, args.prefix)?;
    let mut opts = ProbeOptions { threshold: args.threshold, ..ProbeOptions::default() };
    if let Some(dims) = cfg.grid {
        opts.grid = dims;
    }
    if let Some(step) = cfg.step {
        opts.step = step;
    }
    if let Some(frames) = cfg.frames {
        opts.frames = frames;
    }

    let table = limits::hamiltonian_limit_table_with(&seq, &opts)?;
    let probe = limits::uniqueness_probe_with(&seq, &opts)?;
    // One merged report: the gap table plus the probe's verdict flags.
    let mut flags = table.flags.clone();
    for flag in &probe.flags {
        if !flags.contains(flag) {
            flags.push(flag.clone());
        }
    }

    let stamp = stamp_for(
        &cfg,
        &format!(
            "limits|suite={name}|prefix={}|threshold={}",
            args.prefix, args.threshold
        ),
    );
    let mut doc = serde_json::to_value(&table)?;
    doc["flags"] = serde_json::to_value(&flags)?;
    doc["config_hash"] = serde_json::Value::String(stamp.config_hash.clone());
    doc["seed"] = serde_json::Value::from(stamp.seed);
    doc["prefix"] = serde_json::Value::from(args.prefix);

    let rows: Vec<Vec<Cell>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.i as i64),
                Cell::Int(r.j as i64),
                Cell::Float(r.ham_gap),
                Cell::Float(r.flow_gap),
            ]
        })
        .collect();
    emit::emit_report(
        out_path(&cfg).as_deref(),
        &doc,
        &stamp,
        &["i", "j", "ham_gap", "flow_gap"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Check suite: flow|algebra|calabi|hofer|limits|all
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Seed feeding the randomized checks
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report path: JSON plus a CSV sibling (stdout keeps the table)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    stamp: Stamp,
    suite: String,
    passed: usize,
    failed: usize,
    results: Vec<verify::CheckResult>,
}

/// Runs the suite and prints a summary table. Exit code 0 when every
/// check passes, 1 otherwise.
pub fn verify_cmd(args: &VerifyArgs) -> Result<u8> {
    let results = verify::run_suite(&args.suite, args.seed)?;
    let passed = results.iter().filter(|r| r.passed).count();
    let failed = results.len() - passed;

    let suite_w = results.iter().map(|r| r.suite.len()).max().unwrap_or(5).max(5);
    let name_w = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    println!("{:<suite_w$}  {:<name_w$}  {:<6}  detail", "suite", "check", "status");
    for r in &results {
        let status = if r.passed { "pass" } else { "FAIL" };
        println!("{:<suite_w$}  {:<name_w$}  {status:<6}  {}", r.suite, r.name, r.detail);
    }
    println!(
        "{} checks: {passed} passed, {failed} failed (suite {}, seed {})",
        results.len(),
        args.suite,
        args.seed
    );

    let stamp = Stamp::new(&format!("verify|suite={}", args.suite), args.seed);
    if args.out.is_some() {
        let report = VerifyReport {
            stamp: stamp.clone(),
            suite: args.suite.clone(),
            passed,
            failed,
            results,
        };
        let rows: Vec<Vec<Cell>> = report
            .results
            .iter()
            .map(|r| {
                vec![
                    Cell::Str(r.suite.to_string()),
                    Cell::Str(r.name.to_string()),
                    Cell::Str(if r.passed { "pass" } else { "fail" }.into()),
                    Cell::Str(r.detail.replace(',', ";")),
                ]
            })
            .collect();
        emit::emit_report(
            args.out.as_deref(),
            &report,
            &stamp,
            &["suite", "check", "status", "detail"],
            &rows,
        )?;
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

