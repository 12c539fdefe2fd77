//! Calabi invariants of compactly supported disc paths, exact twist maps
//! built from radial profiles, and the dyadic "wild" construction: a tower
//! of ever-smaller, ever-faster twists whose truncations all carry the same
//! invariant, so the invariant of the K-fold product grows linearly in K.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{DiscreteMap, SurfaceMap};
use crate::geometry::{vec3, Grid, Surface, Vec3};
use crate::hamiltonian::{Hamiltonian, Normalization, Support};
use crate::quad;

/// Deepest admissible dyadic level. Level k lives on radii around 2⁻ᵏ with
/// amplitudes around 16ᵏ; past 20 the supports fall below any realistic
/// grid resolution while the amplitudes strain double precision.
pub const K_MAX: u32 = 20;

/// Node count for one-dimensional radial quadratures. The integrands are
/// smooth bumps whose derivatives all vanish at the support endpoints, so
/// composite Simpson converges far beyond its nominal order here.
const RADIAL_NODES: usize = 2049;

/// Radial node count for the two-dimensional Calabi quadrature.
const CAL_RADIAL_NODES: usize = 1025;

/// Angular node count for the two-dimensional Calabi quadrature. The
/// integrand is smooth and periodic in the angle, where the trapezoid rule
/// is spectrally accurate.
const CAL_ANGULAR_NODES: usize = 256;

/// Time node count for the Calabi integral of a time-dependent path. The
/// time dependence of every generator here is smooth, so a moderate count
/// reaches rounding level while keeping the triple quadrature affordable.
const CAL_TIME_NODES: usize = 65;

/// Smooth radial bump supported on `(lo, hi) ⊂ (0, 1)`:
/// `ρ(r) = amp · exp(−1/(1−s²))` where `s` is the affine coordinate taking
/// `[lo, hi]` onto `[−1, 1]`. All derivatives vanish at the endpoints, so ρ
/// extends smoothly by zero.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    lo: f64,
    hi: f64,
    amp: f64,
}

impl RadialProfile {
    /// A bump on `(lo, hi)`, which must sit strictly inside `(0, 1)`.
    pub fn bump(lo: f64, hi: f64, amp: f64) -> Result<RadialProfile> {
        if !(lo.is_finite() && hi.is_finite() && amp.is_finite()) {
            return Err(Error::Range("profile parameters must be finite".into()));
        }
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Range(format!(
                "profile support ({lo}, {hi}) must sit strictly inside (0, 1)"
            )));
        }
        Ok(RadialProfile { lo, hi, amp })
    }

    /// The open support interval `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn amplitude(&self) -> f64 {
        self.amp
    }

    /// Profile value at radius `r` (zero outside the support).
    pub fn eval(&self, r: f64) -> f64 {
        let s = (2.0 * r - (self.lo + self.hi)) / (self.hi - self.lo);
        if s.abs() >= 1.0 {
            return 0.0;
        }
        self.amp * (-1.0 / (1.0 - s * s)).exp()
    }

    /// The calibrated unit profile: a bump inside `(1/2, 1)` whose
    /// amplitude is fixed numerically so that [`cal_twist`] of it equals
    /// exactly 1. The outer edge stops at 0.99 so the support closure stays
    /// strictly inside the open disc (and 0.99 halves exactly in binary, so
    /// dyadic copies inherit exact support arithmetic).
    pub fn unit() -> RadialProfile {
        let raw = RadialProfile { lo: 0.5, hi: 0.99, amp: 1.0 };
        let c = cal_twist(&raw);
        RadialProfile { amp: 1.0 / c, ..raw }
    }

    /// Level-`k` dyadic copy `ρ_k(r) = 2⁴⁽ᵏ⁻¹⁾ · ρ₁(2ᵏ⁻¹ r)`: support halves
    /// `k−1` times, amplitude grows 16-fold per level, and [`cal_twist`] is
    /// preserved exactly (the 2⁴ gain cancels the r³·dr scaling).
    ///
    /// The base profile must live in `(1/2, 1)` so the levels have pairwise
    /// disjoint supports.
    pub fn dyadic(&self, k: u32) -> Result<RadialProfile> {
        if k == 0 || k > K_MAX {
            return Err(Error::Range(format!("dyadic level {k} outside 1..={K_MAX}")));
        }
        if self.lo < 0.5 {
            return Err(Error::Contract(
                "dyadic towers need a base profile supported in (1/2, 1)".into(),
            ));
        }
        let shrink = 0.5f64.powi(k as i32 - 1);
        let gain = 16f64.powi(k as i32 - 1);
        Ok(RadialProfile {
            lo: self.lo * shrink,
            hi: self.hi * shrink,
            amp: self.amp * gain,
        })
    }
}

/// Calabi invariant of the twist of `ρ` by its one-dimensional radial
/// reduction.
///
/// The twist's autonomous generator is `F(r) = ∫_r¹ s ρ(s) ds`; integrating
/// it over the disc in polar coordinates and once by parts gives
/// `∫_D F dx∧dy = π ∫₀¹ r³ ρ(r) dr`, which is what this computes (over the
/// support interval). This reduction is the form that is invariant along
/// the dyadic family and scales as a⁴ under [`alexander_rescale`].
pub fn cal_twist(rho: &RadialProfile) -> f64 {
    let (lo, hi) = rho.support();
    PI * quad::simpson(|r| r * r * r * rho.eval(r), lo, hi, RADIAL_NODES)
}

/// Which volume form the Calabi integral uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalConvention {
    /// The plain area form dx∧dy. Default for the twist-tower suite, where
    /// the calibrated unit twist has invariant exactly 1.
    Raw,
    /// The area form divided by total disc area, i.e. normalized to total
    /// mass 1.
    Normalized,
}

/// Calabi invariant of the path generated by `h`: the time-and-area
/// integral of the generator, taken with the convention's volume form.
///
/// Requires a compactly supported generator whose declared support stays
/// strictly inside the open disc; the area quadrature is adapted to that
/// support so deep dyadic levels are resolved as accurately as level one.
pub fn cal_path(h: &Hamiltonian, convention: CalConvention) -> Result<f64> {
    let Surface::Disc { radius: disc_r } = h.surface() else {
        return Err(Error::Contract(
            "the Calabi invariant is defined for compactly supported disc paths".into(),
        ));
    };
    if h.normalization() != Normalization::CompactSupport {
        return Err(Error::Contract(
            "the Calabi invariant needs a compactly supported generator".into(),
        ));
    }
    let support = h.support();
    let Some(enclosing) = support.enclosing_radius() else {
        return Err(Error::Contract(
            "generator support is unbounded; it must stay inside the open disc".into(),
        ));
    };
    if enclosing >= disc_r * (1.0 - 1e-9) {
        return Err(Error::Contract(format!(
            "generator support (radius {enclosing}) touches the disc boundary"
        )));
    }

    let area_integral = |t: f64| -> f64 {
        match support {
            Support::CenteredDisc { radius } => polar_integral(h, t, [0.0, 0.0], 0.0, radius),
            Support::Annulus { lo, hi } => polar_integral(h, t, [0.0, 0.0], lo, hi),
            Support::Ball { center, radius } => polar_integral(h, t, center, 0.0, radius),
            Support::Whole => unreachable!("unbounded support rejected above"),
        }
    };
    let raw = if h.is_autonomous() {
        area_integral(0.0)
    } else {
        quad::simpson(area_integral, 0.0, 1.0, CAL_TIME_NODES)
    };
    Ok(match convention {
        CalConvention::Raw => raw,
        CalConvention::Normalized => raw / (PI * disc_r * disc_r),
    })
}

/// `∫∫ H(t, c + r·e(θ)) r dθ dr` over `r ∈ [r_lo, r_hi]` in polar
/// coordinates about `c`: Simpson radially, trapezoid in the angle.
fn polar_integral(h: &Hamiltonian, t: f64, center: [f64; 2], r_lo: f64, r_hi: f64) -> f64 {
    let nodes = quad::simpson_nodes(r_lo, r_hi, CAL_RADIAL_NODES);
    let dtheta = std::f64::consts::TAU / CAL_ANGULAR_NODES as f64;
    nodes
        .into_par_iter()
        .map(|(r, w)| {
            let mut ring = 0.0;
            for j in 0..CAL_ANGULAR_NODES {
                let theta = j as f64 * dtheta;
                let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin(), 0.0];
                ring += h.eval_raw(t, p);
            }
            w * ring * dtheta * r
        })
        .sum()
}

/// Autonomous generator of the twist `(r, θ) ↦ (r, θ + t·ρ(r))` on the
/// unit disc: `F(r) = ∫_r¹ s ρ(s) ds`, so `F′(r) = −r·ρ(r)` and `F(1) = 0`.
/// `F` is constant (not zero) on `r ≤ lo` and vanishes for `r ≥ hi`.
///
/// The radial primitive is tabulated once on the support (cumulative
/// per-cell Simpson) and evaluated by C¹ cubic Hermite interpolation with
/// the analytic slope; the gradient and the flow are closed-form.
pub fn twist_generating_ham(rho: &RadialProfile) -> Hamiltonian {
    let (lo, hi) = rho.support();
    const CELLS: usize = 2048;
    let h = (hi - lo) / CELLS as f64;
    // values[i] = F(lo + i·h), accumulated from F(hi) = 0 downwards
    let mut values = vec![0.0f64; CELLS + 1];
    for i in (0..CELLS).rev() {
        let a = lo + i as f64 * h;
        let b = a + h;
        values[i] = values[i + 1] + quad::simpson(|s| s * rho.eval(s), a, b, 5);
    }
    let plateau = values[0];

    let table = Arc::new(values);
    let rho_f = rho.clone();
    let eval_profile = rho.clone();
    let f_of_r = move |r: f64| -> f64 {
        if r >= hi {
            return 0.0;
        }
        if r <= lo {
            return plateau;
        }
        let u = (r - lo) / h;
        let cell = (u as usize).min(CELLS - 1);
        let x = u - cell as f64;
        let (f0, f1) = (table[cell], table[cell + 1]);
        let r0 = lo + cell as f64 * h;
        let r1 = r0 + h;
        let (d0, d1) = (-r0 * eval_profile.eval(r0), -r1 * eval_profile.eval(r1));
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * f0
            + (x3 - 2.0 * x2 + x) * h * d0
            + (-2.0 * x3 + 3.0 * x2) * f1
            + (x3 - x2) * h * d1
    };

    let eval = {
        let f_of_r = f_of_r.clone();
        Arc::new(move |_t: f64, p: Vec3| f_of_r(p[0].hypot(p[1])))
    };
    let grad = {
        let rho_g = rho.clone();
        Arc::new(move |_t: f64, p: Vec3| -> Vec3 {
            // ∇F = F′(r)·(x/r, y/r) = −ρ(r)·(x, y), smooth through r = 0
            let r = p[0].hypot(p[1]);
            let v = rho_g.eval(r);
            [-v * p[0], -v * p[1], 0.0]
        })
    };
    let twist = move |t: f64, p: Vec3, sign: f64| -> Vec3 {
        let r = p[0].hypot(p[1]);
        let angle = sign * t * rho_f.eval(r);
        if angle == 0.0 {
            return p;
        }
        vec3::rotate_about(p, [0.0, 0.0, 1.0], angle)
    };
    let fwd = {
        let twist = twist.clone();
        Arc::new(move |t: f64, p: Vec3| twist(t, p, 1.0))
    };
    let inv = Arc::new(move |t: f64, p: Vec3| twist(t, p, -1.0));

    Hamiltonian::custom(
        Surface::unit_disc(),
        Normalization::CompactSupport,
        Support::CenteredDisc { radius: hi },
        true,
        true,
        format!("twist[{lo:.4},{hi:.4}]"),
        eval,
        Some(grad),
        Some(crate::hamiltonian::ExactFlow { forward: fwd, inverse: inv }),
    )
}

/// The exact area-preserving twist `(r, θ) ↦ (r, θ + n·ρ(r))` of the unit
/// disc (`n` = `turns`, 1 for the plain twist). Radii are preserved
/// exactly and the Jacobian determinant is identically 1.
#[derive(Clone, Debug)]
pub struct TwistMap {
    profile: RadialProfile,
    turns: f64,
}

impl TwistMap {
    pub fn new(profile: RadialProfile) -> TwistMap {
        TwistMap { profile, turns: 1.0 }
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn turns(&self) -> f64 {
        self.turns
    }

    /// The n-th power: same radial structure, n-fold twist angle.
    pub fn power(&self, n: f64) -> TwistMap {
        TwistMap { profile: self.profile.clone(), turns: self.turns * n }
    }

    /// Twist angle at radius `r`.
    pub fn angle_at(&self, r: f64) -> f64 {
        self.turns * self.profile.eval(r)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotate(p, 1.0)
    }

    pub fn invert_point(&self, p: Vec3) -> Vec3 {
        self.rotate(p, -1.0)
    }

    fn rotate(&self, p: Vec3, sign: f64) -> Vec3 {
        let r = p[0].hypot(p[1]);
        let angle = sign * self.angle_at(r);
        if angle == 0.0 {
            return p;
        }
        vec3::rotate_about(p, [0.0, 0.0, 1.0], angle)
    }

    /// Conjugate by the linear shrinking `R_a(x) = a·x`: the result is
    /// again a twist, with profile `r ↦ turns·ρ(r/a)` supported on the
    /// scaled interval — in closed form, so the conjugation is exact.
    pub fn rescale_conjugate(&self, a: f64) -> Result<TwistMap> {
        if !(a.is_finite() && 0.0 < a && a < 1.0) {
            return Err(Error::Range(format!("rescale factor {a} outside (0, 1)")));
        }
        Ok(TwistMap {
            profile: RadialProfile {
                lo: self.profile.lo * a,
                hi: self.profile.hi * a,
                amp: self.profile.amp * self.turns,
            },
            turns: 1.0,
        })
    }

    /// Sample this twist (and its inverse) on a grid.
    pub fn discretize(&self, grid: &Grid) -> Result<DiscreteMap> {
        if !matches!(grid.surface, Surface::Disc { .. }) {
            return Err(Error::Contract("twist maps live on the disc".into()));
        }
        let fwd_map = self.clone();
        let inv_map = self.clone();
        let fwd: SurfaceMap = Arc::new(move |p| fwd_map.apply(p));
        let inv: SurfaceMap = Arc::new(move |p| inv_map.invert_point(p));
        Ok(DiscreteMap::from_fn(grid, fwd, Some(inv)))
    }
}

/// Conjugate an arbitrary evaluable disc map by `R_a(x) = a·x`, extending
/// by the identity outside the shrunken disc: `x ↦ a·m(x/a)` for `|x| < a`.
pub fn rescale_conjugate_map(a: f64, m: &DiscreteMap, grid: &Grid) -> Result<DiscreteMap> {
    if !(a.is_finite() && 0.0 < a && a < 1.0) {
        return Err(Error::Range(format!("rescale factor {a} outside (0, 1)")));
    }
    if !matches!(m.surface, Surface::Disc { .. }) {
        return Err(Error::Contract("rescale conjugation lives on the disc".into()));
    }
    let Some(eval) = m.evaluator.clone() else {
        return Err(Error::Contract(
            "rescale conjugation needs an off-grid evaluator for the inner map".into(),
        ));
    };
    let (f, g) = (eval.fwd, eval.inv);
    let fwd: SurfaceMap = Arc::new(move |p: Vec3| {
        if p[0].hypot(p[1]) >= a {
            return p;
        }
        vec3::scale(a, f(vec3::scale(1.0 / a, p)))
    });
    let inv: SurfaceMap = Arc::new(move |p: Vec3| {
        if p[0].hypot(p[1]) >= a {
            return p;
        }
        vec3::scale(a, g(vec3::scale(1.0 / a, p)))
    });
    Ok(DiscreteMap::from_fn(grid, fwd, Some(inv)))
}

/// Alexander-type rescaling of a compactly supported disc generator:
/// `H ↦ a²·H(t, x/a)`, the generator of the conjugated path
/// `R_a ∘ φ_H^t ∘ R_a⁻¹`. Its Calabi invariant scales by a⁴ (a² from the
/// value, a² from the area substitution).
///
/// `eta` is the declared boundary margin: the input support must stay in
/// the disc of radius `(1−eta)·R`, and the output support shrinks to
/// radius `a·(1−eta)·R`.
pub fn alexander_rescale(h: &Hamiltonian, a: f64, eta: f64) -> Result<Hamiltonian> {
    let Surface::Disc { radius: disc_r } = h.surface() else {
        return Err(Error::Contract("rescaling is a disc construction".into()));
    };
    if !(a.is_finite() && 0.0 < a && a <= 1.0) {
        return Err(Error::Range(format!("rescale factor {a} outside (0, 1]")));
    }
    if !(eta.is_finite() && (0.0..1.0).contains(&eta)) {
        return Err(Error::Range(format!("margin {eta} outside [0, 1)")));
    }
    let allowed = disc_r * (1.0 - eta);
    match h.support().enclosing_radius() {
        None => {
            return Err(Error::Contract(
                "rescaling needs a compactly supported generator".into(),
            ))
        }
        Some(r) if r > allowed * (1.0 + 1e-12) => {
            return Err(Error::Contract(format!(
                "support radius {r} exceeds the declared margin radius {allowed}"
            )));
        }
        Some(_) => {}
    }

    let inner = h.clone();
    let eval = Arc::new(move |t: f64, p: Vec3| {
        let q = vec3::scale(1.0 / a, p);
        if q[0].hypot(q[1]) >= disc_r {
            return 0.0;
        }
        a * a * inner.eval_raw(t, q)
    });
    let exact = h.exact_flow().map(|flows| {
        let (f, g) = (flows.forward.clone(), flows.inverse.clone());
        let wrap = move |map: Arc<crate::hamiltonian::MapFn>| -> Arc<crate::hamiltonian::MapFn> {
            Arc::new(move |t: f64, p: Vec3| {
                if p[0].hypot(p[1]) >= a * disc_r {
                    return p;
                }
                vec3::scale(a, map(t, vec3::scale(1.0 / a, p)))
            })
        };
        crate::hamiltonian::ExactFlow { forward: wrap(f), inverse: wrap(g) }
    });
    Ok(Hamiltonian::custom(
        h.surface(),
        Normalization::CompactSupport,
        h.support().scale(a),
        h.is_autonomous(),
        h.is_smooth(),
        format!("rescale[{a}]({})", h.label()),
        eval,
        None,
        exact,
    ))
}

/// The K-level truncation of the wild tower: the exact composition of the
/// dyadic twists at levels 1..=K (their supports are pairwise disjoint, so
/// the composition order is immaterial and each point is moved by at most
/// one level). Returns the sampled map and its Calabi invariant, which is
/// the sum of the per-level twist invariants — K for a calibrated base.
pub fn wild_truncated(k: u32, base: &RadialProfile, grid: &Grid) -> Result<(DiscreteMap, f64)> {
    if k == 0 || k > K_MAX {
        return Err(Error::Range(format!("truncation level {k} outside 1..={K_MAX}")));
    }
    if grid.surface != Surface::unit_disc() {
        return Err(Error::Contract("the wild tower is built on the unit disc".into()));
    }
    let levels: Vec<RadialProfile> = (1..=k).map(|i| base.dyadic(i)).collect::<Result<_>>()?;
    let cal = levels.iter().map(cal_twist).sum();

    let fwd_levels = levels.clone();
    let inv_levels = levels;
    let fwd: SurfaceMap = Arc::new(move |p| apply_tower(&fwd_levels, p, 1.0));
    let inv: SurfaceMap = Arc::new(move |p| apply_tower(&inv_levels, p, -1.0));
    Ok((DiscreteMap::from_fn(grid, fwd, Some(inv)), cal))
}

/// Apply the tower to one point: at most one level's annulus contains it.
fn apply_tower(levels: &[RadialProfile], p: Vec3, sign: f64) -> Vec3 {
    let r = p[0].hypot(p[1]);
    for rho in levels {
        let (lo, hi) = rho.support();
        if r > lo && r < hi {
            let angle = sign * rho.eval(r);
            return vec3::rotate_about(p, [0.0, 0.0, 1.0], angle);
        }
    }
    p
}
