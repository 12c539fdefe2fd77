//! Numerical flows of Hamiltonian vector fields.
//!
//! The field is the symplectic gradient for the area form of each surface:
//! on the disc `X = (∂H/∂y, −∂H/∂x)`, on the sphere `X = p × ∇H` (the
//! cross product discards any normal component of the ambient gradient, so
//! families may return gradients with a harmless normal part).
//!
//! Sign check, once and for all: with `H = z` on the sphere the field is
//! `p × ẑ = (y, −x, 0)`, a clockwise rotation about the vertical axis —
//! azimuth decreases at unit rate. On the disc, `H = (x² + y²)/2` gives
//! `X = (y, −x)`, the clockwise unit rotation. All closed-form flows in
//! [`crate::hamiltonian`] follow the same convention and the tests below
//! pin it against the integrator.
//!
//! Integration is classical fourth-order Runge–Kutta with a fixed step.
//! Sphere trajectories are pulled back to the unit sphere after every step
//! (the drift being corrected is itself O(step⁵), so the projection does
//! not disturb the order of the method). Disc trajectories that leave the
//! disc abort with a hard error: a Hamiltonian respecting the boundary
//! condition cannot do that, so escaping is evidence of a bad input, not
//! something to clamp away.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{vec3, Grid, Surface, Vec3};
use crate::hamiltonian::Hamiltonian;

/// Default integrator step. Fine enough that fourth-order truncation error
/// sits near the rounding floor for unit-size fields over unit time.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Default number of stored frames (including both endpoints of [0, 1]).
pub const DEFAULT_FRAMES: usize = 33;

/// Integrator controls: nominal step size and number of stored frames.
///
/// Within each inter-frame segment the integrator takes
/// `ceil(segment / step)` equal substeps, so frames land exactly on their
/// times and the effective step never exceeds the nominal one.
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub step: f64,
    pub frames: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { step: DEFAULT_STEP, frames: DEFAULT_FRAMES }
    }
}

impl StepControl {
    pub fn with_step(step: f64) -> StepControl {
        StepControl { step, ..StepControl::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 1e-9 && self.step <= 0.1) {
            return Err(Error::Range(format!(
                "integrator step {} outside (1e-9, 0.1]",
                self.step
            )));
        }
        if !(2..=4097).contains(&self.frames) {
            return Err(Error::Range(format!(
                "frame count {} outside 2..=4097",
                self.frames
            )));
        }
        Ok(())
    }
}

/// Hamiltonian vector field at `(t, p)`.
pub fn vector_field(h: &Hamiltonian, t: f64, p: Vec3) -> Vec3 {
    let g = h.gradient(t, p);
    match h.surface() {
        Surface::Disc { .. } => [g[1], -g[0], 0.0],
        Surface::Sphere => vec3::cross(p, g),
    }
}

fn rk4_step(h: &Hamiltonian, t: f64, p: Vec3, dt: f64) -> Vec3 {
    let k1 = vector_field(h, t, p);
    let k2 = vector_field(h, t + 0.5 * dt, vec3::add(p, vec3::scale(0.5 * dt, k1)));
    let k3 = vector_field(h, t + 0.5 * dt, vec3::add(p, vec3::scale(0.5 * dt, k2)));
    let k4 = vector_field(h, t + dt, vec3::add(p, vec3::scale(dt, k3)));
    let incr = vec3::add(
        vec3::add(k1, vec3::scale(2.0, k2)),
        vec3::add(vec3::scale(2.0, k3), k4),
    );
    let q = vec3::add(p, vec3::scale(dt / 6.0, incr));
    match h.surface() {
        Surface::Sphere => vec3::normalize(q),
        Surface::Disc { .. } => q,
    }
}

fn check_inside(surface: Surface, p: Vec3) -> Result<()> {
    if !vec3::is_finite(p) {
        return Err(Error::Integration("trajectory diverged (non-finite)".into()));
    }
    if let Surface::Disc { radius } = surface {
        let r = p[0].hypot(p[1]);
        // tiny tolerance: a legitimate trajectory can graze the boundary from
        // inside by rounding, but a field violating the boundary condition
        // marches out by O(step) per step and trips this immediately
        if r > radius * (1.0 + 1e-9) {
            return Err(Error::Integration(format!(
                "trajectory left the disc (r = {r:.6}, radius {radius}); \
                 the generator violates the boundary condition"
            )));
        }
    }
    Ok(())
}

/// Integrate one point from time `t0` to `t1` (either direction) with
/// substeps of size at most `step`.
pub fn advance(h: &Hamiltonian, t0: f64, t1: f64, p: Vec3, step: f64) -> Result<Vec3> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(p);
    }
    let n = (span.abs() / step).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let mut q = p;
    let mut t = t0;
    for k in 0..n {
        q = rk4_step(h, t, q, dt);
        t = t0 + span * (k + 1) as f64 / n as f64;
        check_inside(h.surface(), q)?;
    }
    Ok(q)
}

/// A numerically integrated Hamiltonian path: the images of every grid
/// point at each stored frame time in [0, 1].
#[derive(Clone)]
pub struct FlowPath {
    generator: Hamiltonian,
    grid: Grid,
    step: f64,
    times: Vec<f64>,
    /// `frames[k][i]` = image of `grid.points[i]` at `times[k]`.
    frames: Vec<Vec<Vec3>>,
}

/// Integrate the flow of `h` over the unit time interval on every grid
/// point. Always numerical: closed-form flows, when a family has them, are
/// reserved for oracles and composition — using them here would make every
/// law check vacuous.
pub fn integrate_flow(h: &Hamiltonian, grid: &Grid, ctrl: StepControl) -> Result<FlowPath> {
    ctrl.validate()?;
    if grid.surface != h.surface() {
        return Err(Error::Contract("grid and Hamiltonian surfaces differ".into()));
    }
    let times: Vec<f64> = (0..ctrl.frames)
        .map(|k| k as f64 / (ctrl.frames - 1) as f64)
        .collect();
    let trajectories: Vec<Result<Vec<Vec3>>> = grid
        .points
        .par_iter()
        .map(|&x0| {
            let mut traj = Vec::with_capacity(ctrl.frames);
            traj.push(x0);
            let mut q = x0;
            for w in times.windows(2) {
                q = advance(h, w[0], w[1], q, ctrl.step)?;
                traj.push(q);
            }
            Ok(traj)
        })
        .collect();
    let mut frames = vec![Vec::with_capacity(grid.points.len()); ctrl.frames];
    for traj in trajectories {
        let traj = traj?;
        for (k, q) in traj.into_iter().enumerate() {
            frames[k].push(q);
        }
    }
    Ok(FlowPath {
        generator: h.clone(),
        grid: grid.clone(),
        step: ctrl.step,
        times,
        frames,
    })
}

impl FlowPath {
    pub fn generator(&self) -> &Hamiltonian {
        &self.generator
    }

    /// Whether this path was integrated from (a clone of) `h`.
    pub fn is_generated_by(&self, h: &Hamiltonian) -> bool {
        self.generator.same_function(h)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[Vec<Vec3>] {
        &self.frames
    }

    /// Images of the grid points at the final time.
    pub fn final_points(&self) -> &[Vec3] {
        self.frames.last().expect("a path has at least two frames")
    }

    /// Images of the grid points at an arbitrary time, by linear
    /// interpolation between adjacent frames (renormalized on the sphere).
    /// With the default 33 frames the interpolation error is O(Δt²) ≈ 1e-3
    /// of the inter-frame motion — fine for plots and coarse metrics; use a
    /// frame time or [`advance`] when full accuracy matters.
    pub fn frame_at(&self, t: f64) -> Result<Vec<Vec3>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Range(format!("frame time {t} outside [0, 1]")));
        }
        let n = self.times.len() - 1;
        let pos = t * n as f64;
        let k = (pos.floor() as usize).min(n - 1);
        let a = pos - k as f64;
        let interp = self.frames[k]
            .iter()
            .zip(&self.frames[k + 1])
            .map(|(&p, &q)| {
                let m = vec3::add(vec3::scale(1.0 - a, p), vec3::scale(a, q));
                match self.grid.surface {
                    Surface::Sphere => vec3::normalize(m),
                    Surface::Disc { .. } => m,
                }
            })
            .collect();
        Ok(interp)
    }

    /// Uniform distance between two paths over shared frames and grid:
    /// `max_{k,i} |frames₁[k][i] − frames₂[k][i]|`.
    pub fn c0_distance(&self, other: &FlowPath) -> Result<f64> {
        if self.grid.points.len() != other.grid.points.len()
            || self.times.len() != other.times.len()
        {
            return Err(Error::Contract(
                "paths sampled on different grids or frame ladders".into(),
            ));
        }
        let mut worst = 0.0f64;
        for (fa, fb) in self.frames.iter().zip(&other.frames) {
            for (&p, &q) in fa.iter().zip(fb) {
                worst = worst.max(vec3::dist(p, q));
            }
        }
        Ok(worst)
    }

    /// Largest deviation of the stored frames from a closed-form path map
    /// `(t, x₀) ↦ φᵗ(x₀)`.
    pub fn max_deviation_from(&self, reference: impl Fn(f64, Vec3) -> Vec3 + Sync) -> f64 {
        self.frames
            .par_iter()
            .enumerate()
            .map(|(k, frame)| {
                let t = self.times[k];
                frame
                    .iter()
                    .zip(&self.grid.points)
                    .map(|(&q, &x0)| vec3::dist(q, reference(t, x0)))
                    .fold(0.0f64, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Snapshot of the time-1 map, optionally with inverse samples obtained
    /// by integrating backwards from each grid point. The attached
    /// evaluators integrate on demand (closed form when the generator has
    /// one), returning a non-finite point if a trajectory escapes — loud
    /// rather than silently clamped.
    pub fn final_map(&self, with_inverse: bool) -> Result<DiscreteMap> {
        let preimage = if with_inverse {
            let pts: Result<Vec<Vec3>> = self
                .grid
                .points
                .par_iter()
                .map(|&x| advance(&self.generator, 1.0, 0.0, x, self.step))
                .collect();
            Some(pts?)
        } else {
            None
        };
        let bad = [f64::NAN, f64::NAN, f64::NAN];
        let (hf, hi) = (self.generator.clone(), self.generator.clone());
        let (sf, si) = (self.step, self.step);
        let fwd: SurfaceMap = std::sync::Arc::new(move |p| match hf.exact_flow_point(1.0, p) {
            Some(q) => q,
            None => advance(&hf, 0.0, 1.0, p, sf).unwrap_or(bad),
        });
        let inv: SurfaceMap = std::sync::Arc::new(move |p| match hi.exact_inverse_point(1.0, p) {
            Some(q) => q,
            None => advance(&hi, 1.0, 0.0, p, si).unwrap_or(bad),
        });
        Ok(DiscreteMap {
            surface: self.grid.surface,
            source: self.grid.points.clone(),
            image: self.final_points().to_vec(),
            preimage,
            evaluator: Some(MapEvaluator { fwd, inv }),
        })
    }
}

/// A surface self-map as a shareable closure.
pub type SurfaceMap = std::sync::Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;

/// Forward/inverse evaluators attached to a sampled map, so operations that
/// need the map at arbitrary points (conjugation, composition) can have it.
#[derive(Clone)]
pub struct MapEvaluator {
    pub fwd: SurfaceMap,
    pub inv: SurfaceMap,
}

/// A sampled area-preserving map: images (and optionally preimages) of a
/// fixed set of sample points, plus optional closures for evaluating the
/// map off the samples. The common currency between numerically integrated
/// flows and closed-form twist maps.
#[derive(Clone)]
pub struct DiscreteMap {
    pub surface: Surface,
    pub source: Vec<Vec3>,
    pub image: Vec<Vec3>,
    pub preimage: Option<Vec<Vec3>>,
    pub evaluator: Option<MapEvaluator>,
}

impl DiscreteMap {
    /// Sample a closed-form map (and inverse, if given) on a grid, keeping
    /// the closures for off-grid evaluation.
    pub fn from_fn(grid: &Grid, f: SurfaceMap, f_inv: Option<SurfaceMap>) -> DiscreteMap {
        let image: Vec<Vec3> = grid.points.par_iter().map(|&p| f(p)).collect();
        let preimage = f_inv
            .as_ref()
            .map(|g| grid.points.par_iter().map(|&p| g(p)).collect());
        let evaluator = f_inv.map(|inv| MapEvaluator { fwd: f, inv });
        DiscreteMap {
            surface: grid.surface,
            source: grid.points.clone(),
            image,
            preimage,
            evaluator,
        }
    }

    /// The identity map on a grid.
    pub fn identity(grid: &Grid) -> DiscreteMap {
        DiscreteMap::from_fn(grid, std::sync::Arc::new(|p| p), Some(std::sync::Arc::new(|p| p)))
    }

    /// Uniform distance `max_i |f(x_i) − g(x_i)|`, plus the same over
    /// preimages when both maps carry them (uniform convergence of maps
    /// *and* inverses is what the limit diagnostics need).
    pub fn c0_distance(&self, other: &DiscreteMap) -> Result<f64> {
        if self.source.len() != other.source.len() {
            return Err(Error::Contract("maps sampled on different grids".into()));
        }
        let fwd = self
            .image
            .iter()
            .zip(&other.image)
            .map(|(&p, &q)| vec3::dist(p, q))
            .fold(0.0f64, f64::max);
        let bwd = match (&self.preimage, &other.preimage) {
            (Some(a), Some(b)) => a
                .iter()
                .zip(b)
                .map(|(&p, &q)| vec3::dist(p, q))
                .fold(0.0f64, f64::max),
            _ => 0.0,
        };
        Ok(fwd.max(bwd))
    }

    /// Uniform distance to the identity.
    pub fn identity_gap(&self) -> f64 {
        let fwd = self
            .image
            .iter()
            .zip(&self.source)
            .map(|(&p, &q)| vec3::dist(p, q))
            .fold(0.0f64, f64::max);
        let bwd = self
            .preimage
            .as_ref()
            .map(|pre| {
                pre.iter()
                    .zip(&self.source)
                    .map(|(&p, &q)| vec3::dist(p, q))
                    .fold(0.0f64, f64::max)
            })
            .unwrap_or(0.0);
        fwd.max(bwd)
    }
}

/// Largest drift of an autonomous Hamiltonian along its own numerical flow:
/// `max over frames t, grid points x of |H(φᵗ(x)) − H(x)|`. Exactly zero
/// for the true flow, so the value is a pure integration diagnostic.
pub fn conservation_residual(h: &Hamiltonian, grid: &Grid, ctrl: StepControl) -> Result<f64> {
    if !h.is_autonomous() {
        return Err(Error::Contract(
            "conservation residual requires a time-independent Hamiltonian".into(),
        ));
    }
    let path = integrate_flow(h, grid, ctrl)?;
    let h0: Vec<f64> = grid.points.iter().map(|&p| h.eval_raw(0.0, p)).collect();
    let mut worst = 0.0f64;
    for frame in path.frames() {
        for (q, &v0) in frame.iter().zip(&h0) {
            worst = worst.max((h.eval_raw(0.0, *q) - v0).abs());
        }
    }
    Ok(worst)
}

/// One-parameter-group defect at `(t, s)`:
/// `max_x |φ^{t+s}(x) − φ^t(φ^s(x))|`, where every flow starts its clock at
/// time zero. Near zero for autonomous generators; order-one for genuinely
/// time-dependent ones — that contrast is the diagnostic.
pub fn one_param_residual(
    h: &Hamiltonian,
    grid: &Grid,
    t: f64,
    s: f64,
    step: f64,
) -> Result<f64> {
    for v in [t, s] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range(format!("group parameter {v} outside [0, 1]")));
        }
    }
    if t + s > 1.0 + 1e-12 {
        return Err(Error::Range(format!("t + s = {} exceeds 1", t + s)));
    }
    let worst = grid
        .points
        .par_iter()
        .map(|&x| -> Result<f64> {
            let joint = advance(h, 0.0, t + s, x, step)?;
            let first = advance(h, 0.0, s, x, step)?;
            let split = advance(h, 0.0, t, first, step)?;
            Ok(vec3::dist(joint, split))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(worst)
}

/// Largest deviation of the numerical flow from the family's closed-form
/// flow over the stored frames, when the generator has one.
pub fn exact_flow_deviation(
    h: &Hamiltonian,
    grid: &Grid,
    ctrl: StepControl,
) -> Result<Option<f64>> {
    if !h.has_exact_flow() {
        return Ok(None);
    }
    let path = integrate_flow(h, grid, ctrl)?;
    let dev = path.max_deviation_from(|t, x| {
        h.exact_flow_point(t, x).expect("exact flow checked above")
    });
    Ok(Some(dev))
}

/// Stencil half-width for the flow-Jacobian determinant. Balances the
/// O(δ²) truncation of the central difference against the O(ε/δ)
/// amplification of integrator rounding; 1e-4 puts both near 1e-8.
const JACOBIAN_DELTA: f64 = 1e-4;

/// Jacobian determinant of a surface map at `x` from a central-difference
/// stencil of half-width `JACOBIAN_DELTA`, formed in local orthonormal
/// frames at the point and at its image.
pub fn stencil_jacobian_det(f: &(dyn Fn(Vec3) -> Vec3 + Sync), surface: Surface, x: Vec3) -> f64 {
    stencil_jacobian_det_with(f, surface, x, JACOBIAN_DELTA)
}

/// As [`stencil_jacobian_det`] with a caller-chosen stencil half-width, so
/// high-accuracy callers can Richardson-extrapolate across widths.
pub fn stencil_jacobian_det_with(
    f: &(dyn Fn(Vec3) -> Vec3 + Sync),
    surface: Surface,
    x: Vec3,
    delta: f64,
) -> f64 {
    let (e1, e2) = match surface {
        Surface::Disc { .. } => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        Surface::Sphere => crate::hamiltonian::tangent_basis(x),
    };
    let lift = |a: f64, b: f64| -> Vec3 {
        let q = vec3::add(x, vec3::add(vec3::scale(a, e1), vec3::scale(b, e2)));
        match surface {
            Surface::Sphere => vec3::normalize(q),
            Surface::Disc { .. } => q,
        }
    };
    let d = delta;
    let px = f(lift(d, 0.0));
    let mx = f(lift(-d, 0.0));
    let py = f(lift(0.0, d));
    let my = f(lift(0.0, -d));
    let img = f(x);
    let (f1, f2) = match surface {
        Surface::Disc { .. } => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        Surface::Sphere => crate::hamiltonian::tangent_basis(img),
    };
    let col = |plus: Vec3, minus: Vec3| -> (f64, f64) {
        let diff = vec3::scale(0.5 / d, vec3::sub(plus, minus));
        (vec3::dot(diff, f1), vec3::dot(diff, f2))
    };
    let (a11, a21) = col(px, mx);
    let (a12, a22) = col(py, my);
    a11 * a22 - a12 * a21
}

/// Worst deviation of a surface map's Jacobian determinant from 1 over the
/// sample points: the area-preservation diagnostic for closed-form maps.
pub fn map_area_distortion(
    f: &(dyn Fn(Vec3) -> Vec3 + Sync),
    surface: Surface,
    samples: &[Vec3],
) -> f64 {
    samples
        .par_iter()
        .map(|&x| (stencil_jacobian_det(f, surface, x) - 1.0).abs())
        .reduce(|| 0.0, f64::max)
}

/// Worst deviation of the flow's Jacobian determinant from 1 over the
/// sample points, at time `t`.
pub fn area_distortion(h: &Hamiltonian, samples: &[Vec3], t: f64, step: f64) -> Result<f64> {
    let surface = h.surface();
    let worst = samples
        .par_iter()
        .map(|&x| -> Result<f64> {
            // probe the stencil first so an escaping trajectory surfaces as
            // an error, not a NaN determinant
            advance(h, 0.0, t, x, step)?;
            let flow = |p: Vec3| -> Vec3 {
                advance(h, 0.0, t, p, step).unwrap_or([f64::NAN, f64::NAN, f64::NAN])
            };
            let det = stencil_jacobian_det(&flow, surface, x);
            if !det.is_finite() {
                return Err(Error::Integration(
                    "stencil trajectory escaped during area check".into(),
                ));
            }
            Ok((det - 1.0).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(worst)
}
