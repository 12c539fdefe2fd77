//! Time-dependent Hamiltonian functions on a surface.
//!
//! A [`Hamiltonian`] is stored as a closure `(t, point) → ℝ` over ambient
//! coordinates, together with everything the rest of the crate needs to use
//! it honestly:
//!
//! * an optional analytic ambient gradient (finite differences otherwise);
//! * an optional closed-form flow map, present for the built-in families
//!   whose orbits are known (height/axis profiles on the sphere, radial and
//!   off-centre twists on the disc). The numeric integrator never consults
//!   it — it exists so that algebra operations can evaluate compositions at
//!   flowed points without accumulating integration error, and so tests have
//!   independent oracles;
//! * normalization mode and declared support, which the disc boundary
//!   condition and the quadratures rely on.
//!
//! Closures keep composition exact: operations like `H#F` must evaluate `F`
//! at flowed points that lie off every grid, so a grid-sampled
//! representation would throw accuracy away.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::expr::{self, Env, Expr, Var};
use crate::geometry::{vec3, Grid, Surface, SurfacePoint, Vec3};
use crate::quad;

/// Normalization convention attached to a Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Closed surface: each `H_t` integrates to zero.
    MeanZero,
    /// Surface with boundary: each `H_t` is compactly supported in the
    /// interior.
    CompactSupport,
}

/// Declared support of a disc Hamiltonian (the region outside of which the
/// evaluator is identically zero). `Whole` means "unknown or everything" —
/// legal for evaluation, rejected by operations that need a genuine compact
/// support (normalization, Calabi quadrature).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Support {
    Whole,
    /// Contained in the centred closed disc of this radius.
    CenteredDisc { radius: f64 },
    /// Contained in the centred annulus `lo ≤ r ≤ hi`.
    Annulus { lo: f64, hi: f64 },
    /// Contained in the closed ball around an off-centre point.
    Ball { center: [f64; 2], radius: f64 },
}

impl Support {
    /// Radius of the smallest centred disc containing the support, if the
    /// support is bounded away from "everything".
    pub fn enclosing_radius(&self) -> Option<f64> {
        match *self {
            Support::Whole => None,
            Support::CenteredDisc { radius } => Some(radius),
            Support::Annulus { hi, .. } => Some(hi),
            Support::Ball { center, radius } => {
                Some((center[0] * center[0] + center[1] * center[1]).sqrt() + radius)
            }
        }
    }

    /// Support of `x ↦ H(x/a)` (dilation by `a`).
    pub fn scale(&self, a: f64) -> Support {
        match *self {
            Support::Whole => Support::Whole,
            Support::CenteredDisc { radius } => Support::CenteredDisc { radius: a * radius },
            Support::Annulus { lo, hi } => Support::Annulus { lo: a * lo, hi: a * hi },
            Support::Ball { center, radius } => Support::Ball {
                center: [a * center[0], a * center[1]],
                radius: a * radius,
            },
        }
    }

    fn union(&self, other: &Support) -> Support {
        match (self.enclosing_radius(), other.enclosing_radius()) {
            (Some(a), Some(b)) => Support::CenteredDisc { radius: a.max(b) },
            _ => Support::Whole,
        }
    }
}

/// Scalar time weight `w(t)` with a closed-form primitive `W(t) = ∫₀ᵗ w`.
/// `H(t, x) = w(t)·H₀(x)` has flow `φ(t) = φ_{H₀}(W(t))` when `H₀` is
/// autonomous, so built-in families stay exactly integrable under time
/// weighting.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeWeight {
    /// `w ≡ 1`.
    One,
    /// Polynomial `w(t) = Σ cₖ tᵏ`.
    Poly(Vec<f64>),
    /// `w(t) = amp · π · freq · sin(2π · freq · t)`, i.e.
    /// `W(t) = amp · sin²(π · freq · t)`. Used by the oscillatory limit
    /// families: `W` sweeps back and forth, so the flow keeps returning to
    /// the identity while `w` stays large.
    SinSq { freq: f64, amp: f64 },
}

impl TimeWeight {
    pub fn weight(&self, t: f64) -> f64 {
        match self {
            TimeWeight::One => 1.0,
            TimeWeight::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            TimeWeight::SinSq { freq, amp } => {
                let w = std::f64::consts::PI * freq;
                amp * w * (2.0 * w * t).sin()
            }
        }
    }

    /// `W(t) = ∫₀ᵗ w(s) ds`.
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            TimeWeight::One => t,
            TimeWeight::Poly(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().rev() {
                    acc = acc * t + ck / (k as f64 + 1.0);
                }
                acc * t
            }
            TimeWeight::SinSq { freq, amp } => {
                let s = (std::f64::consts::PI * freq * t).sin();
                amp * s * s
            }
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, TimeWeight::One)
    }
}

pub type EvalFn = dyn Fn(f64, Vec3) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(f64, Vec3) -> Vec3 + Send + Sync;
pub type MapFn = dyn Fn(f64, Vec3) -> Vec3 + Send + Sync;

/// Closed-form time-`t` flow map of a Hamiltonian, with its inverse.
/// Available only for families whose orbits are known exactly.
#[derive(Clone)]
pub struct ExactFlow {
    pub forward: Arc<MapFn>,
    pub inverse: Arc<MapFn>,
}

/// Hofer-type norms of a Hamiltonian: `l1 = ∫₀¹ osc H_t dt` and
/// `sup = max_t osc H_t` over the sampled times.
#[derive(Clone, Copy, Debug)]
pub struct HoferNorm {
    pub l1: f64,
    pub sup: f64,
}

/// Finite-difference step for gradient fallbacks.
const FD_STEP: f64 = 5e-6;

/// A time-dependent Hamiltonian on a surface.
#[derive(Clone)]
pub struct Hamiltonian {
    surface: Surface,
    normalization: Normalization,
    support: Support,
    autonomous: bool,
    smooth: bool,
    label: String,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    exact: Option<ExactFlow>,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("surface", &self.surface)
            .field("label", &self.label)
            .field("autonomous", &self.autonomous)
            .field("smooth", &self.smooth)
            .field("support", &self.support)
            .finish()
    }
}

impl Hamiltonian {
    /// Low-level constructor. Callers outside this module (the algebra and
    /// Calabi operations) use it to assemble derived Hamiltonians; prefer
    /// the named builders for anything user-facing.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        surface: Surface,
        normalization: Normalization,
        support: Support,
        autonomous: bool,
        smooth: bool,
        label: String,
        eval: Arc<EvalFn>,
        grad: Option<Arc<GradFn>>,
        exact: Option<ExactFlow>,
    ) -> Hamiltonian {
        Hamiltonian {
            surface,
            normalization,
            support,
            autonomous,
            smooth,
            label,
            eval,
            grad,
            exact,
        }
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: String) {
        self.label = label;
    }

    /// Whether two handles share the same evaluation closure, i.e. denote
    /// the same Hamiltonian (clones share the closure).
    pub fn same_function(&self, other: &Hamiltonian) -> bool {
        Arc::ptr_eq(&self.eval, &other.eval)
    }

    pub fn has_exact_flow(&self) -> bool {
        self.exact.is_some()
    }

    /// Closed-form time-`t` flow map, if this family has one.
    pub fn exact_flow_point(&self, t: f64, p: Vec3) -> Option<Vec3> {
        self.exact.as_ref().map(|e| (e.forward)(t, p))
    }

    /// Closed-form inverse of the time-`t` flow map, if available.
    pub fn exact_inverse_point(&self, t: f64, p: Vec3) -> Option<Vec3> {
        self.exact.as_ref().map(|e| (e.inverse)(t, p))
    }

    pub(crate) fn exact_flow(&self) -> Option<&ExactFlow> {
        self.exact.as_ref()
    }

    /// Evaluate at ambient coordinates. Total: no domain checks, no panics.
    pub fn eval_raw(&self, t: f64, p: Vec3) -> f64 {
        (self.eval)(t, p)
    }

    /// Evaluate at a chart point, with chart/domain validation.
    pub fn eval_point(&self, t: f64, point: &SurfacePoint) -> Result<f64> {
        let p = point.to_ambient(self.surface)?;
        Ok(self.eval_raw(t, p))
    }

    /// Ambient gradient of `H_t`. Analytic when the family provides one,
    /// otherwise central finite differences: in-plane for the disc, along a
    /// deterministic tangent basis for the sphere. Only the tangential part
    /// matters to the flow (the sphere field is `p × ∇H`).
    pub fn gradient(&self, t: f64, p: Vec3) -> Vec3 {
        if let Some(g) = &self.grad {
            return g(t, p);
        }
        match self.surface {
            Surface::Disc { .. } => {
                let dx = (self.eval_raw(t, [p[0] + FD_STEP, p[1], 0.0])
                    - self.eval_raw(t, [p[0] - FD_STEP, p[1], 0.0]))
                    / (2.0 * FD_STEP);
                let dy = (self.eval_raw(t, [p[0], p[1] + FD_STEP, 0.0])
                    - self.eval_raw(t, [p[0], p[1] - FD_STEP, 0.0]))
                    / (2.0 * FD_STEP);
                [dx, dy, 0.0]
            }
            Surface::Sphere => {
                let (e1, e2) = tangent_basis(p);
                let d1 = (self.eval_raw(t, vec3::add(p, vec3::scale(FD_STEP, e1)))
                    - self.eval_raw(t, vec3::sub(p, vec3::scale(FD_STEP, e1))))
                    / (2.0 * FD_STEP);
                let d2 = (self.eval_raw(t, vec3::add(p, vec3::scale(FD_STEP, e2)))
                    - self.eval_raw(t, vec3::sub(p, vec3::scale(FD_STEP, e2))))
                    / (2.0 * FD_STEP);
                vec3::add(vec3::scale(d1, e1), vec3::scale(d2, e2))
            }
        }
    }

    /// Min and max of `H_t` over the surface: grid scan plus a deterministic
    /// shrinking compass search in chart coordinates around the best cells.
    /// The polish step matters: oscillation must be a function of the *true*
    /// extrema (which are invariant under composition with bijections), not
    /// of where the grid happens to sample.
    pub fn osc_range(&self, t: f64, grid: &Grid) -> (f64, f64) {
        use rayon::prelude::*;
        let vals: Vec<f64> = grid.points.par_iter().map(|&p| self.eval_raw(t, p)).collect();
        let mut imin = 0;
        let mut imax = 0;
        for (i, &v) in vals.iter().enumerate() {
            if v < vals[imin] {
                imin = i;
            }
            if v > vals[imax] {
                imax = i;
            }
        }
        let lo = self.polish_extremum(t, grid, imin, false).min(vals[imin]);
        let hi = self.polish_extremum(t, grid, imax, true).max(vals[imax]);
        (lo, hi)
    }

    /// Oscillation `max H_t − min H_t`.
    pub fn oscillation(&self, t: f64, grid: &Grid) -> f64 {
        let (lo, hi) = self.osc_range(t, grid);
        hi - lo
    }

    fn polish_extremum(&self, t: f64, grid: &Grid, idx: usize, maximize: bool) -> f64 {
        let (mut a, mut b) = grid.coords[idx];
        let (range1, wrap2) = match grid.surface {
            Surface::Disc { radius } => ((0.0, radius * radius / 2.0), true),
            Surface::Sphere => ((-1.0 + 1e-12, 1.0 - 1e-12), true),
        };
        let eval_at = |a: f64, b: f64| -> f64 {
            let a = a.clamp(range1.0, range1.1);
            let p = match grid.surface {
                Surface::Disc { .. } => {
                    let r = (2.0 * a).max(0.0).sqrt();
                    [r * b.cos(), r * b.sin(), 0.0]
                }
                Surface::Sphere => {
                    let rho = (1.0 - a * a).max(0.0).sqrt();
                    [rho * b.cos(), rho * b.sin(), a]
                }
            };
            let v = self.eval_raw(t, p);
            if maximize {
                v
            } else {
                -v
            }
        };
        let mut s1 = (range1.1 - range1.0) / grid.n1 as f64;
        let mut s2 = 2.0 * std::f64::consts::PI / grid.n2 as f64;
        let mut best = eval_at(a, b);
        for _ in 0..90 {
            let candidates = [(a + s1, b), (a - s1, b), (a, b + s2), (a, b - s2)];
            let mut improved = false;
            for &(ca, cb) in &candidates {
                let v = eval_at(ca, cb);
                if v > best {
                    best = v;
                    a = ca.clamp(range1.0, range1.1);
                    b = cb;
                    improved = true;
                }
            }
            if !improved {
                s1 *= 0.5;
                s2 *= 0.5;
                if s1 < 1e-11 && s2 < 1e-11 {
                    break;
                }
            }
            let _ = wrap2; // angles need no explicit wrap: evaluation is periodic
        }
        if maximize {
            best
        } else {
            -best
        }
    }

    /// Hofer norms: `l1 = ∫₀¹ osc H_t dt` (Simpson over the unit time
    /// interval) and `sup = max` over the sampled times. Autonomous
    /// Hamiltonians need a single oscillation.
    pub fn hofer_norm(&self, grid: &Grid) -> HoferNorm {
        if self.autonomous {
            let osc = self.oscillation(0.0, grid);
            return HoferNorm { l1: osc, sup: osc };
        }
        use rayon::prelude::*;
        let nodes = quad::simpson_nodes(0.0, 1.0, quad::TIME_NODES);
        let (l1, sup) = nodes
            .into_par_iter()
            .map(|(t, w)| {
                let osc = self.oscillation(t, grid);
                (w * osc, osc)
            })
            .reduce(|| (0.0, 0.0), |(s, m), (ws, osc)| (s + ws, m.max(osc)));
        HoferNorm { l1, sup }
    }

    /// Mean of `H_t` against the area measure, via the grid quadrature.
    pub fn mean_on(&self, grid: &Grid, t: f64) -> f64 {
        grid.mean(|p| self.eval_raw(t, p))
    }

    /// Enforce the normalization convention.
    ///
    /// * Mean-zero (sphere): subtract the per-time grid mean. The mean is
    ///   computed against the same quadrature the invariant is checked with,
    ///   so the normalized Hamiltonian integrates to zero on the grid to
    ///   rounding, and renormalizing is a pointwise no-op. Constants do not
    ///   move points, so flows, gradients and oscillations are untouched.
    /// * Compact support (disc): verify the declared support stays strictly
    ///   inside the boundary; the function itself is already normalized.
    pub fn normalize(&self, grid: &Grid) -> Result<Hamiltonian> {
        if grid.surface != self.surface {
            return Err(Error::Contract(
                "normalization grid belongs to a different surface".into(),
            ));
        }
        match self.normalization {
            Normalization::CompactSupport => {
                let Surface::Disc { radius } = self.surface else {
                    return Err(Error::Contract(
                        "compact-support normalization only applies to the disc".into(),
                    ));
                };
                match self.support.enclosing_radius() {
                    Some(r) if r < radius * (1.0 - 1e-12) => Ok(self.clone()),
                    Some(r) => Err(Error::Normalization(format!(
                        "support radius {r} touches the disc boundary (radius {radius})"
                    ))),
                    None => Err(Error::Normalization(
                        "support is not declared compact; cannot certify the boundary condition"
                            .into(),
                    )),
                }
            }
            Normalization::MeanZero => {
                let inner = self.clone();
                let grid = grid.clone();
                let cache: Arc<RwLock<HashMap<u64, f64>>> = Arc::new(RwLock::new(HashMap::new()));
                let mean_of = move |t: f64| -> f64 {
                    let key = t.to_bits();
                    if let Some(&m) = cache.read().expect("mean cache poisoned").get(&key) {
                        return m;
                    }
                    let mut sum = 0.0;
                    for &p in &grid.points {
                        sum += inner.eval_raw(t, p);
                    }
                    let m = sum * grid.cell_weight / grid.surface.total_area();
                    cache.write().expect("mean cache poisoned").insert(key, m);
                    m
                };
                let inner_eval = Arc::clone(&self.eval);
                let autonomous = self.autonomous;
                // For autonomous Hamiltonians resolve the constant up front
                // so evaluation stays lock-free.
                let fixed = if autonomous { Some(mean_of(0.0)) } else { None };
                let eval: Arc<EvalFn> = Arc::new(move |t, p| {
                    let m = match fixed {
                        Some(m) => m,
                        None => mean_of(t),
                    };
                    inner_eval(t, p) - m
                });
                Ok(Hamiltonian {
                    surface: self.surface,
                    normalization: self.normalization,
                    support: self.support,
                    autonomous: self.autonomous,
                    smooth: self.smooth,
                    label: format!("{}·normalized", self.label),
                    eval,
                    grad: self.grad.clone(),
                    exact: self.exact.clone(),
                })
            }
        }
    }

    // ------------------------------------------------------------------
    // Built-in families
    // ------------------------------------------------------------------

    /// Height function `H = z` on the sphere. Flow: rotation about the
    /// vertical axis with angular velocity −1.
    pub fn sphere_height() -> Hamiltonian {
        Hamiltonian::axis_profile([0.0, 0.0, 1.0], &[0.0, 1.0], TimeWeight::One)
            .expect("height profile is valid")
    }

    /// Profile of an axis height: `H(t, p) = w(t) · f(⟨p, n̂⟩)` with `f` a
    /// polynomial, adjusted by a constant so the sphere mean of `f` vanishes.
    /// The flow rotates each latitude circle `⟨p, n̂⟩ = s` about `n̂` by the
    /// angle `−f′(s) · W(t)`, which is exact for all time weights.
    pub fn axis_profile(axis: Vec3, coeffs: &[f64], weight: TimeWeight) -> Result<Hamiltonian> {
        if coeffs.is_empty() || coeffs.len() > 16 {
            return Err(Error::Range(
                "axis profile needs 1..=16 polynomial coefficients".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Range("axis profile coefficients must be finite".into()));
        }
        let n = vec3::norm(axis);
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::Range("axis must be a nonzero vector".into()));
        }
        let axis = vec3::scale(1.0 / n, axis);
        // Sphere mean of sᵏ (s uniform on [−1, 1] under the area measure):
        // 0 for odd k, 1/(k+1) for even k.
        let mean: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| k % 2 == 0)
            .map(|(k, &c)| c / (k as f64 + 1.0))
            .sum();
        let mut f = coeffs.to_vec();
        f[0] -= mean;
        let fprime: Vec<f64> = f
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        let horner = |c: &[f64], s: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck);

        let autonomous = weight.is_one();
        let (fe, fg, ff, fi) = (f.clone(), fprime.clone(), fprime.clone(), fprime);
        let (we, wf) = (weight.clone(), weight.clone());
        let eval: Arc<EvalFn> =
            Arc::new(move |t, p| we.weight(t) * horner(&fe, vec3::dot(p, axis)));
        let grad: Arc<GradFn> = {
            let wg = weight.clone();
            Arc::new(move |t, p| vec3::scale(wg.weight(t) * horner(&fg, vec3::dot(p, axis)), axis))
        };
        let forward: Arc<MapFn> = Arc::new(move |t, p| {
            let s = vec3::dot(p, axis);
            vec3::rotate_about(p, axis, -horner(&ff, s) * wf.primitive(t))
        });
        let wi = weight.clone();
        let inverse: Arc<MapFn> = Arc::new(move |t, p| {
            let s = vec3::dot(p, axis);
            vec3::rotate_about(p, axis, horner(&fi, s) * wi.primitive(t))
        });
        Ok(Hamiltonian {
            surface: Surface::Sphere,
            normalization: Normalization::MeanZero,
            support: Support::Whole,
            autonomous,
            smooth: true,
            label: format!("axis-profile(deg {})", f.len() - 1),
            eval,
            grad: Some(grad),
            exact: Some(ExactFlow { forward, inverse }),
        })
    }

    /// Off-centre smooth bump on the disc:
    /// `H(p) = A · exp(−1 / (1 − |p−c|²/R²))` inside the ball of radius `R`
    /// about `c`, zero outside. The flow rotates circles about `c` (angular
    /// velocity depends only on the distance from `c`), hence is exact.
    /// Two bumps with different centres do not commute — the work-horse for
    /// generic non-commuting disc pairs.
    pub fn bump_twist(
        surface: Surface,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    ) -> Result<Hamiltonian> {
        let Surface::Disc { radius: disc_r } = surface else {
            return Err(Error::Contract("bump twists live on the disc".into()));
        };
        surface.validate()?;
        if !(radius.is_finite() && radius > 0.0) || !amplitude.is_finite() {
            return Err(Error::Range("bump radius/amplitude invalid".into()));
        }
        let off = (center[0] * center[0] + center[1] * center[1]).sqrt();
        if off + radius >= disc_r * (1.0 - 1e-9) {
            return Err(Error::Range(format!(
                "bump (centre offset {off}, radius {radius}) does not fit strictly inside the disc"
            )));
        }
        let r2 = radius * radius;
        // H as a function of v = |p−c|²/R²; dH/dv = −H/(1−v)².
        let val = move |v: f64| -> f64 {
            if v < 1.0 {
                amplitude * (-1.0 / (1.0 - v)).exp()
            } else {
                0.0
            }
        };
        let eval: Arc<EvalFn> = Arc::new(move |_t, p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            val((dx * dx + dy * dy) / r2)
        });
        let grad: Arc<GradFn> = Arc::new(move |_t, p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let v = (dx * dx + dy * dy) / r2;
            if v >= 1.0 {
                return [0.0, 0.0, 0.0];
            }
            let h = val(v);
            let dh_dv = -h / ((1.0 - v) * (1.0 - v));
            let c = 2.0 * dh_dv / r2;
            [c * dx, c * dy, 0.0]
        });
        // Angular velocity about c: X = (∂H/∂y, −∂H/∂x) = dH/dv·(2/R²)·(Δy, −Δx),
        // i.e. ω(v) = −2·(dH/dv)/R², counter-clockwise for positive amplitude.
        let omega = move |v: f64| -> f64 {
            if v >= 1.0 {
                return 0.0;
            }
            let h = val(v);
            2.0 * h / ((1.0 - v) * (1.0 - v)) / r2
        };
        let rot = move |p: Vec3, angle: f64| -> Vec3 {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let (s, c) = angle.sin_cos();
            [
                center[0] + c * dx - s * dy,
                center[1] + s * dx + c * dy,
                0.0,
            ]
        };
        let forward: Arc<MapFn> = Arc::new(move |t, p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let v = (dx * dx + dy * dy) / r2;
            if v >= 1.0 {
                return p; // identity outside the bump, exactly
            }
            rot(p, omega(v) * t)
        });
        let inverse: Arc<MapFn> = Arc::new(move |t, p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let v = (dx * dx + dy * dy) / r2;
            if v >= 1.0 {
                return p;
            }
            rot(p, -omega(v) * t)
        });
        Ok(Hamiltonian {
            surface,
            normalization: Normalization::CompactSupport,
            support: Support::Ball { center, radius },
            autonomous: true,
            smooth: true,
            label: format!("bump-twist@({:.3},{:.3})", center[0], center[1]),
            eval,
            grad: Some(grad),
            exact: Some(ExactFlow { forward, inverse }),
        })
    }

    /// Horizontal shear profile on the unit disc, the witness family for
    /// displacing a small ball by translation. `H = c · S(y) · χ(|p|)` where
    /// `S` ramps from 0 to its total rise across a plateau of slope one
    /// (half-width `half`, smoothstep tapers of width `taper`) and `χ` is a
    /// radial cutoff that is identically 1 for `|p| ≤ 0.82`. On the cutoff
    /// plateau the flow is the horizontal translation `x ↦ x + c·S′(y)·t`.
    pub fn shear(strength: f64, half: f64, taper: f64) -> Result<Hamiltonian> {
        if !(strength.is_finite() && strength.abs() <= 10.0) {
            return Err(Error::Range("shear strength must be finite, |c| ≤ 10".into()));
        }
        if !(0.001..=0.4).contains(&half) || !(0.01..=0.5).contains(&taper) {
            return Err(Error::Range(
                "shear plateau half-width in [0.001, 0.4], taper in [0.01, 0.5]".into(),
            ));
        }
        let eval: Arc<EvalFn> = Arc::new(move |_t, p| {
            strength * shear_s(p[1], half, taper) * radial_cutoff(p[0].hypot(p[1]))
        });
        let grad: Arc<GradFn> = Arc::new(move |_t, p| {
            let rho = p[0].hypot(p[1]);
            let s = shear_s(p[1], half, taper);
            let sp = shear_sprime(p[1], half, taper);
            let chi = radial_cutoff(rho);
            let chip = radial_cutoff_prime(rho);
            let (ux, uy) = if rho > 1e-300 {
                (p[0] / rho, p[1] / rho)
            } else {
                (0.0, 0.0)
            };
            [
                strength * s * chip * ux,
                strength * (sp * chi + s * chip * uy),
                0.0,
            ]
        });
        Ok(Hamiltonian {
            surface: Surface::unit_disc(),
            normalization: Normalization::CompactSupport,
            support: Support::CenteredDisc { radius: 0.97 },
            autonomous: true,
            smooth: true,
            label: format!("shear(c={strength:.4}, h={half:.4}, w={taper:.4})"),
            eval,
            grad: Some(grad),
            exact: None,
        })
    }

    /// Hamiltonian from an expression over the surface's chart variables
    /// (`r`, `theta` on the disc; `z`, `phi` on the sphere; `t` always).
    /// No closed-form flow; gradients fall back to finite differences.
    pub fn from_expr(surface: Surface, formula: &str) -> Result<Hamiltonian> {
        surface.validate()?;
        let ast: Expr = expr::parse(formula)?;
        let allowed = match surface {
            Surface::Disc { .. } => [Var::R, Var::Theta],
            Surface::Sphere => [Var::Z, Var::Phi],
        };
        ast.check_vars(&allowed)?;
        let autonomous = !ast.vars().contains(&Var::T);
        let (normalization, support) = match surface {
            // The declared support is the whole disc: nothing certifies a
            // user expression vanishes near the boundary, so normalization
            // will refuse it rather than silently assume.
            Surface::Disc { radius } => (
                Normalization::CompactSupport,
                Support::CenteredDisc { radius },
            ),
            Surface::Sphere => (Normalization::MeanZero, Support::Whole),
        };
        let eval: Arc<EvalFn> = Arc::new(move |t, p| {
            let mut env = Env { t, ..Env::default() };
            match surface {
                Surface::Disc { .. } => {
                    env.r = p[0].hypot(p[1]);
                    env.theta = crate::geometry::reduce_angle(p[1].atan2(p[0]));
                }
                Surface::Sphere => {
                    let q = vec3::normalize(p);
                    env.z = q[2];
                    env.phi = crate::geometry::reduce_angle(q[1].atan2(q[0]));
                }
            }
            ast.eval(&env)
        });
        Ok(Hamiltonian {
            surface,
            normalization,
            support,
            autonomous,
            smooth: true,
            label: format!("expr({formula})"),
            eval,
            grad: None,
            exact: None,
        })
    }

    /// `c · H`. For autonomous `H` the flow is the time-rescaled flow of
    /// `H`, so exactness is preserved.
    pub fn scaled(c: f64, inner: &Hamiltonian) -> Result<Hamiltonian> {
        if !c.is_finite() {
            return Err(Error::Range("scale factor must be finite".into()));
        }
        let ie = Arc::clone(&inner.eval);
        let eval: Arc<EvalFn> = Arc::new(move |t, p| c * ie(t, p));
        let grad = inner.grad.as_ref().map(|g| {
            let g = Arc::clone(g);
            let gf: Arc<GradFn> = Arc::new(move |t, p| vec3::scale(c, g(t, p)));
            gf
        });
        let exact = if inner.autonomous {
            inner.exact.as_ref().map(|e| {
                let (f, i) = (Arc::clone(&e.forward), Arc::clone(&e.inverse));
                ExactFlow {
                    forward: Arc::new(move |t, p| f(c * t, p)),
                    inverse: Arc::new(move |t, p| i(c * t, p)),
                }
            })
        } else {
            None
        };
        Ok(Hamiltonian {
            surface: inner.surface,
            normalization: inner.normalization,
            support: inner.support,
            autonomous: inner.autonomous,
            smooth: inner.smooth,
            label: format!("{c}·{}", inner.label),
            eval,
            grad,
            exact,
        })
    }

    /// Pointwise sum. No closed-form flow in general (this is how the tests
    /// build genuinely generic fields).
    pub fn sum(terms: &[Hamiltonian]) -> Result<Hamiltonian> {
        let Some(first) = terms.first() else {
            return Err(Error::Contract("sum of zero Hamiltonians".into()));
        };
        if terms.iter().any(|h| h.surface != first.surface) {
            return Err(Error::Contract("sum terms live on different surfaces".into()));
        }
        if terms.len() == 1 {
            return Ok(first.clone());
        }
        let evals: Vec<Arc<EvalFn>> = terms.iter().map(|h| Arc::clone(&h.eval)).collect();
        let eval: Arc<EvalFn> = Arc::new(move |t, p| evals.iter().map(|e| e(t, p)).sum());
        let grad = if terms.iter().all(|h| h.grad.is_some()) {
            let grads: Vec<Arc<GradFn>> =
                terms.iter().map(|h| Arc::clone(h.grad.as_ref().unwrap())).collect();
            let gf: Arc<GradFn> = Arc::new(move |t, p| {
                grads
                    .iter()
                    .fold([0.0, 0.0, 0.0], |acc, g| vec3::add(acc, g(t, p)))
            });
            Some(gf)
        } else {
            None
        };
        let support = terms
            .iter()
            .skip(1)
            .fold(terms[0].support, |acc, h| acc.union(&h.support));
        Ok(Hamiltonian {
            surface: first.surface,
            normalization: first.normalization,
            support,
            autonomous: terms.iter().all(|h| h.autonomous),
            smooth: terms.iter().all(|h| h.smooth),
            label: format!("sum({})", terms.len()),
            eval,
            grad,
            exact: None,
        })
    }

    /// `H(t, x) = w(t) · H₀(x)` for autonomous `H₀`. Orbits are those of
    /// `H₀` traversed with the reparameterized clock `W(t)`, so exact flows
    /// survive.
    pub fn time_weighted(weight: TimeWeight, inner: &Hamiltonian) -> Result<Hamiltonian> {
        if !inner.autonomous {
            return Err(Error::Contract(
                "time weighting expects an autonomous inner Hamiltonian".into(),
            ));
        }
        let ie = Arc::clone(&inner.eval);
        let we = weight.clone();
        let eval: Arc<EvalFn> = Arc::new(move |t, p| we.weight(t) * ie(t, p));
        let grad = inner.grad.as_ref().map(|g| {
            let g = Arc::clone(g);
            let wg = weight.clone();
            let gf: Arc<GradFn> = Arc::new(move |t, p| vec3::scale(wg.weight(t), g(t, p)));
            gf
        });
        let exact = inner.exact.as_ref().map(|e| {
            let (f, i) = (Arc::clone(&e.forward), Arc::clone(&e.inverse));
            let (wf, wi) = (weight.clone(), weight.clone());
            ExactFlow {
                forward: Arc::new(move |t, p| f(wf.primitive(t), p)),
                inverse: Arc::new(move |t, p| i(wi.primitive(t), p)),
            }
        });
        Ok(Hamiltonian {
            surface: inner.surface,
            normalization: inner.normalization,
            support: inner.support,
            autonomous: false,
            smooth: inner.smooth,
            label: format!("w(t)·{}", inner.label),
            eval,
            grad,
            exact,
        })
    }
}

/// Deterministic orthonormal tangent basis at a sphere point.
pub fn tangent_basis(p: Vec3) -> (Vec3, Vec3) {
    let ax = p[0].abs();
    let ay = p[1].abs();
    let az = p[2].abs();
    let helper: Vec3 = if ax <= ay && ax <= az {
        [1.0, 0.0, 0.0]
    } else if ay <= az {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = vec3::normalize(vec3::cross(p, helper));
    let e2 = vec3::normalize(vec3::cross(p, e1));
    (e1, e2)
}

// Quintic smoothstep q(σ) = 6σ⁵ − 15σ⁴ + 10σ³ on [0, 1] and its primitive
// Q(σ) = σ⁶ − 3σ⁵ + 2.5σ⁴ (so Q(1) = 1/2).
fn smoothstep(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else if sigma >= 1.0 {
        1.0
    } else {
        sigma * sigma * sigma * (10.0 + sigma * (-15.0 + 6.0 * sigma))
    }
}

fn smoothstep_primitive(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else if sigma >= 1.0 {
        sigma - 0.5
    } else {
        let s4 = sigma * sigma * sigma * sigma;
        s4 * (2.5 + sigma * (-3.0 + sigma))
    }
}

/// Ramp profile for the shear family: S′ is 0 below the rise, smoothsteps up
/// to slope 1, holds slope 1 on |y| ≤ half, and smoothsteps back to 0.
fn shear_sprime(y: f64, half: f64, taper: f64) -> f64 {
    if y <= -half - taper || y >= half + taper {
        0.0
    } else if y < -half {
        smoothstep((y + half + taper) / taper)
    } else if y <= half {
        1.0
    } else {
        smoothstep((half + taper - y) / taper)
    }
}

fn shear_s(y: f64, half: f64, taper: f64) -> f64 {
    if y <= -half - taper {
        0.0
    } else if y < -half {
        taper * smoothstep_primitive((y + half + taper) / taper)
    } else if y <= half {
        taper * 0.5 + (y + half)
    } else if y < half + taper {
        taper + 2.0 * half - taper * smoothstep_primitive((half + taper - y) / taper)
    } else {
        taper + 2.0 * half
    }
}

const CUTOFF_INNER: f64 = 0.82;
const CUTOFF_OUTER: f64 = 0.97;

fn radial_cutoff(rho: f64) -> f64 {
    1.0 - smoothstep((rho - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER))
}

fn radial_cutoff_prime(rho: f64) -> f64 {
    let w = CUTOFF_OUTER - CUTOFF_INNER;
    let sigma = (rho - CUTOFF_INNER) / w;
    if !(0.0..=1.0).contains(&sigma) {
        return 0.0;
    }
    let ds = sigma * sigma * (30.0 + sigma * (-60.0 + 30.0 * sigma));
    -ds / w
}
