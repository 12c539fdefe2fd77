//! Group operations on Hamiltonian paths, at the level of generators.
//!
//! A path of area-preserving maps is represented throughout by its
//! generating Hamiltonian; the operations here build the generator of the
//! composed, inverted, rescaled, reparameterized, or conjugated path. The
//! flow-level identities these constructions promise (flow of the product
//! generator = pointwise composition of flows, etc.) are verified by the
//! integration tests, always by integrating the constructed generator
//! numerically and comparing against independently composed flows.
//!
//! Composition-order convention (frozen by experiment — see the tests):
//! with the field convention of [`crate::flow`], the product generator
//!
//! ```text
//! (H # F)(t, x) = H(t, x) + F(t, (φ_H^t)⁻¹(x))
//! ```
//!
//! generates `t ↦ φ_H^t ∘ φ_F^t` (the `H`-flow applied last). Composing
//! with the *forward* map `φ_H^t` instead generates neither composition
//! order; the experiment in `tests/algebra_laws.rs` demonstrates all of
//! this numerically and pins the convention. Relatedly, the inverse-path
//! generator `H̄(t,x) = −H(t, φ_H^t(x))` is exact as written, and
//! `H̄ # H` is trivial at flow level without being pointwise zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{self, DiscreteMap, FlowPath};
use crate::geometry::{vec3, Surface, SurfacePoint, Vec3};
use crate::hamiltonian::{Hamiltonian, Support};
use crate::quad;

/// Tolerance for the area-preservation pre-check on conjugating maps.
/// Stencil truncation is O(δ²) ≈ 1e-8 and flow-map evaluators add O(step⁴);
/// a genuinely non-area-preserving map fails by orders of magnitude.
const CONJUGATION_AREA_TOL: f64 = 1e-5;

/// A smooth monotone time reparameterization ζ: [0,1] → [0,1].
///
/// The canonical family is boundary-flat: ζ ≡ 0 on [0, ε₀/2] and ζ ≡ 1 on
/// [1 − ε₀/2, 1], with ζ′ ≥ 0 throughout. The identity (the ε₀ → 0 limit)
/// and the power stubs `t ↦ tᵏ` are admitted as special cases for norms
/// and tests.
#[derive(Clone)]
pub struct Reparameterization {
    label: String,
    flat_width: f64,
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    deriv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Reparameterization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Reparameterization({})", self.label)
    }
}

impl Reparameterization {
    pub fn identity() -> Reparameterization {
        Reparameterization {
            label: "id".into(),
            flat_width: 0.0,
            value: Arc::new(|t| t),
            deriv: Arc::new(|_| 1.0),
        }
    }

    /// Boundary-flat reparameterization with flat ends of half-width
    /// `flat_width / 2`, interpolated by the quintic smoothstep (C² across
    /// the joints, ζ′ ≥ 0).
    pub fn flat(flat_width: f64) -> Result<Reparameterization> {
        if !(flat_width > 0.0 && flat_width < 1.0) {
            return Err(Error::Range(format!(
                "flat width {flat_width} outside (0, 1)"
            )));
        }
        let a = flat_width / 2.0;
        let len = 1.0 - flat_width;
        let value = Arc::new(move |t: f64| smoothstep((t - a) / len));
        let deriv = Arc::new(move |t: f64| smoothstep_deriv((t - a) / len) / len);
        Ok(Reparameterization {
            label: format!("flat({flat_width})"),
            flat_width,
            value,
            deriv,
        })
    }

    /// Power stub `ζ(t) = tᵏ`, monotone with correct endpoints but not
    /// boundary-flat; admitted for norm tests.
    pub fn power(k: f64) -> Result<Reparameterization> {
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::Range(format!("power exponent {k} must be ≥ 1")));
        }
        Ok(Reparameterization {
            label: format!("t^{k}"),
            flat_width: 0.0,
            value: Arc::new(move |t: f64| t.max(0.0).powf(k)),
            deriv: Arc::new(move |t: f64| k * t.max(0.0).powf(k - 1.0)),
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    pub fn flat_width(&self) -> f64 {
        self.flat_width
    }

    pub fn is_identity(&self) -> bool {
        self.label == "id"
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

fn smoothstep_deriv(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        0.0
    } else {
        s * s * (30.0 + s * (-60.0 + 30.0 * s))
    }
}

/// Size of ζ as a deformation of the identity:
/// `‖ζ − id‖_C⁰ + ∫₀¹ |ζ′(t) − 1| dt`. Zero exactly for the identity.
pub fn zeta_norm(zeta: &Reparameterization) -> f64 {
    let sup = quad::max_scan(|t| (zeta.value(t) - t).abs(), 0.0, 1.0, 2001);
    let l1 = quad::integral_abs(|t| zeta.deriv(t) - 1.0, 0.0, 1.0, 2001);
    sup + l1
}

/// `(t, x) ↦ (φ_H^t)⁻¹(x)`, closed-form when available, otherwise
/// integrating backwards on demand (escape → NaN, which poisons downstream
/// values loudly instead of silently clamping).
fn inverse_flow_map(h: &Hamiltonian, step: f64) -> Arc<dyn Fn(f64, Vec3) -> Vec3 + Send + Sync> {
    let h = h.clone();
    Arc::new(move |t, x| match h.exact_inverse_point(t, x) {
        Some(q) => q,
        None => flow::advance(&h, t, 0.0, x, step).unwrap_or([f64::NAN, f64::NAN, f64::NAN]),
    })
}

fn forward_flow_map(h: &Hamiltonian, step: f64) -> Arc<dyn Fn(f64, Vec3) -> Vec3 + Send + Sync> {
    let h = h.clone();
    Arc::new(move |t, x| match h.exact_flow_point(t, x) {
        Some(q) => q,
        None => flow::advance(&h, 0.0, t, x, step).unwrap_or([f64::NAN, f64::NAN, f64::NAN]),
    })
}

fn union_support(a: &Hamiltonian, b: &Hamiltonian) -> Support {
    match (a.support().enclosing_radius(), b.support().enclosing_radius()) {
        (Some(x), Some(y)) => Support::CenteredDisc { radius: x.max(y) },
        _ => Support::Whole,
    }
}

/// Product generator without the final normalization pass; used internally
/// and by the definitional consistency checks.
pub fn raw_product(h: &Hamiltonian, f: &Hamiltonian, step: f64) -> Result<Hamiltonian> {
    if h.surface() != f.surface() {
        return Err(Error::Contract("product factors live on different surfaces".into()));
    }
    let inv_h = inverse_flow_map(h, step);
    let (hc, fc) = (h.clone(), f.clone());
    let eval = Arc::new(move |t: f64, x: Vec3| hc.eval_raw(t, x) + fc.eval_raw(t, inv_h(t, x)));
    // closed-form flow of the product = pointwise composition, H-flow last
    let exact = match (h.exact_flow(), f.exact_flow()) {
        (Some(eh), Some(ef)) => {
            let (hf, ff) = (Arc::clone(&eh.forward), Arc::clone(&ef.forward));
            let (hi, fi) = (Arc::clone(&eh.inverse), Arc::clone(&ef.inverse));
            Some(crate::hamiltonian::ExactFlow {
                forward: Arc::new(move |t, x| hf(t, ff(t, x))),
                inverse: Arc::new(move |t, x| fi(t, hi(t, x))),
            })
        }
        _ => None,
    };
    Ok(Hamiltonian::custom(
        h.surface(),
        h.normalization(),
        union_support(h, f),
        false, // composition with a flow injects time dependence
        h.is_smooth() && f.is_smooth(),
        format!("({})#({})", h.label(), f.label()),
        eval,
        None,
        exact,
    ))
}

/// Generator of the pointwise-composed path `t ↦ φ_H^t ∘ φ_F^t`:
/// `(H # F)(t, x) = H(t, x) + F(t, (φ_H^t)⁻¹(x))`, re-normalized on the
/// flow's grid. `flow_h` must be an integrated path of `H` — it supplies
/// the normalization grid and the fallback step for inverse-flow
/// evaluation.
pub fn product_ham(h: &Hamiltonian, f: &Hamiltonian, flow_h: &FlowPath) -> Result<Hamiltonian> {
    if !flow_h.is_generated_by(h) {
        return Err(Error::Contract(
            "supplied flow was not generated by the first product factor".into(),
        ));
    }
    raw_product(h, f, flow_h.step())?.normalize(flow_h.grid())
}

/// Generator of the inverse path `t ↦ (φ_H^t)⁻¹`:
/// `H̄(t, x) = −H(t, φ_H^t(x))`. For autonomous `H` this is exactly `−H`
/// (the generator is conserved along its own flow), so that form is used
/// directly — same function, no integration error.
pub fn inverse_ham(h: &Hamiltonian, flow_h: &FlowPath) -> Result<Hamiltonian> {
    if !flow_h.is_generated_by(h) {
        return Err(Error::Contract(
            "supplied flow was not generated by the Hamiltonian being inverted".into(),
        ));
    }
    if h.is_autonomous() {
        let mut inv = Hamiltonian::scaled(-1.0, h)?;
        inv.set_label(format!("inv({})", h.label()));
        return Ok(inv);
    }
    let fwd_h = forward_flow_map(h, flow_h.step());
    let hc = h.clone();
    let eval = Arc::new(move |t: f64, x: Vec3| -hc.eval_raw(t, fwd_h(t, x)));
    let exact = h.exact_flow().map(|e| crate::hamiltonian::ExactFlow {
        forward: Arc::clone(&e.inverse),
        inverse: Arc::clone(&e.forward),
    });
    Ok(Hamiltonian::custom(
        h.surface(),
        h.normalization(),
        h.support(),
        false,
        h.is_smooth(),
        format!("inv({})", h.label()),
        eval,
        None,
        exact,
    ))
}

/// Generator `H^s(t, x) = s·H(st, x)` of the speed-`s` path: its time-1
/// map is the time-`s` map of `H`.
pub fn time_rescale_ham(h: &Hamiltonian, s: f64) -> Result<Hamiltonian> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("rescale speed {s} outside [0, 1]")));
    }
    let hc = h.clone();
    let eval = Arc::new(move |t: f64, x: Vec3| s * hc.eval_raw(s * t, x));
    let hg = h.clone();
    let grad = Some(Arc::new(move |t: f64, x: Vec3| {
        vec3::scale(s, hg.gradient(s * t, x))
    }) as Arc<dyn Fn(f64, Vec3) -> Vec3 + Send + Sync>);
    let exact = h.exact_flow().map(|e| {
        let (f, i) = (Arc::clone(&e.forward), Arc::clone(&e.inverse));
        crate::hamiltonian::ExactFlow {
            forward: Arc::new(move |t, x| f(s * t, x)),
            inverse: Arc::new(move |t, x| i(s * t, x)),
        }
    });
    Ok(Hamiltonian::custom(
        h.surface(),
        h.normalization(),
        h.support(),
        h.is_autonomous(),
        h.is_smooth(),
        format!("({})^s({s})", h.label()),
        eval,
        grad,
        exact,
    ))
}

/// Generator `H^ζ(t, x) = ζ′(t)·H(ζ(t), x)` of the time-reparameterized
/// path `t ↦ φ_H^{ζ(t)}`. Oscillation at each time scales by ζ′(t), so the
/// time-integral norm is preserved under the substitution u = ζ(t).
pub fn reparameterize_ham(h: &Hamiltonian, zeta: &Reparameterization) -> Result<Hamiltonian> {
    if zeta.is_identity() {
        return Ok(h.clone());
    }
    let hc = h.clone();
    let z = zeta.clone();
    let eval = Arc::new(move |t: f64, x: Vec3| z.deriv(t) * hc.eval_raw(z.value(t), x));
    let hg = h.clone();
    let zg = zeta.clone();
    let grad = Some(Arc::new(move |t: f64, x: Vec3| {
        vec3::scale(zg.deriv(t), hg.gradient(zg.value(t), x))
    }) as Arc<dyn Fn(f64, Vec3) -> Vec3 + Send + Sync>);
    let exact = h.exact_flow().map(|e| {
        let (f, i) = (Arc::clone(&e.forward), Arc::clone(&e.inverse));
        let (zf, zi) = (zeta.clone(), zeta.clone());
        crate::hamiltonian::ExactFlow {
            forward: Arc::new(move |t, x| f(zf.value(t), x)),
            inverse: Arc::new(move |t, x| i(zi.value(t), x)),
        }
    });
    Ok(Hamiltonian::custom(
        h.surface(),
        h.normalization(),
        h.support(),
        false,
        h.is_smooth(),
        format!("({})∘{}", h.label(), zeta.label()),
        eval,
        grad,
        exact,
    ))
}

/// Generator `H∘ψ` of the conjugated path `t ↦ ψ⁻¹ ∘ φ_H^t ∘ ψ`, for an
/// area-preserving map ψ. The map must carry evaluators (sampled images
/// alone cannot be composed), and is spot-checked for area preservation
/// with a Jacobian stencil before use.
pub fn conjugate_ham(h: &Hamiltonian, psi: &DiscreteMap) -> Result<Hamiltonian> {
    if psi.surface != h.surface() {
        return Err(Error::Contract("conjugating map lives on a different surface".into()));
    }
    let Some(eval_psi) = psi.evaluator.clone() else {
        return Err(Error::Contract(
            "conjugation needs an evaluable map, not bare samples".into(),
        ));
    };
    // deterministic spot check: up to 12 sample points, kept away from the
    // disc rim so the Jacobian stencil stays inside the surface
    let margin = match h.surface() {
        Surface::Disc { radius } => radius * 0.9,
        Surface::Sphere => f64::INFINITY,
    };
    let stride = (psi.source.len() / 12).max(1);
    let samples: Vec<Vec3> = psi
        .source
        .iter()
        .copied()
        .step_by(stride)
        .filter(|p| p[0].hypot(p[1]) < margin)
        .take(12)
        .collect();
    let fwd = Arc::clone(&eval_psi.fwd);
    let dist = flow::map_area_distortion(&*fwd, h.surface(), &samples);
    if !(dist < CONJUGATION_AREA_TOL) {
        return Err(Error::Contract(format!(
            "conjugating map is not area-preserving (|det J − 1| up to {dist:.3e})"
        )));
    }
    let hc = h.clone();
    let psi_fwd = Arc::clone(&eval_psi.fwd);
    let eval = Arc::new(move |t: f64, x: Vec3| hc.eval_raw(t, psi_fwd(x)));
    let exact = h.exact_flow().map(|e| {
        let (f, i) = (Arc::clone(&e.forward), Arc::clone(&e.inverse));
        let (pf1, pi1) = (Arc::clone(&eval_psi.fwd), Arc::clone(&eval_psi.inv));
        let (pf2, pi2) = (Arc::clone(&eval_psi.fwd), Arc::clone(&eval_psi.inv));
        crate::hamiltonian::ExactFlow {
            forward: Arc::new(move |t, x| pi1(f(t, pf1(x)))),
            inverse: Arc::new(move |t, x| pi2(i(t, pf2(x)))),
        }
    });
    // the support of H∘ψ is ψ⁻¹(supp H); without structure on ψ there is no
    // honest enclosing radius, so the declared support widens to "unknown"
    let support = match h.surface() {
        Surface::Disc { .. } => Support::Whole,
        Surface::Sphere => h.support(),
    };
    Ok(Hamiltonian::custom(
        h.surface(),
        h.normalization(),
        support,
        h.is_autonomous(),
        h.is_smooth(),
        format!("({})∘ψ", h.label()),
        eval,
        None,
        exact,
    ))
}

/// Generator evaluated along the path's own flow:
/// `Tan(λ)(t, x) = H(t, φ_H^t(x))`. Constant in `t` for autonomous
/// generators (conservation); equal to `Dev(λ)(t, ·) ∘ λ(t)` by definition,
/// where `Dev(λ)(t, ·) = H_t`.
pub fn tan_map(path: &FlowPath, t: f64, x: &SurfacePoint) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("path time {t} outside [0, 1]")));
    }
    let h = path.generator();
    let p = x.to_ambient(h.surface())?;
    let q = match h.exact_flow_point(t, p) {
        Some(q) => q,
        None => flow::advance(h, 0.0, t, p, path.step())?,
    };
    Ok(h.eval_raw(t, q))
}

/// Consistency residual of the product rule for generators read along
/// paths: sup over the grid and frame times of
/// `|Dev(λ₁λ₂)(t, x) − (Dev(λ₁)(t, x) + Dev(λ₂)(t, λ₁(t)⁻¹ x))|`,
/// where `Dev` of a generated path is its generator. Near zero by
/// construction; the residual measures the inverse-flow evaluation error.
pub fn dev_of_product_check(flow1: &FlowPath, flow2: &FlowPath) -> Result<f64> {
    if flow1.grid().points.len() != flow2.grid().points.len()
        || flow1.grid().surface != flow2.grid().surface
    {
        return Err(Error::Contract("paths sampled on different grids".into()));
    }
    let (h1, h2) = (flow1.generator(), flow2.generator());
    let product = raw_product(h1, h2, flow1.step())?;
    let inv1 = inverse_flow_map(h1, flow1.step());
    let mut worst = 0.0f64;
    for &t in flow1.times() {
        for &x in &flow1.grid().points {
            let lhs = product.eval_raw(t, x);
            let rhs = h1.eval_raw(t, x) + h2.eval_raw(t, inv1(t, x));
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_flow, StepControl};
    use crate::geometry::sample_grid;
    use crate::hamiltonian::TimeWeight;

    fn centered_bump(radius: f64, amp: f64) -> Hamiltonian {
        Hamiltonian::bump_twist(Surface::unit_disc(), [0.0, 0.0], radius, amp).unwrap()
    }

    #[test]
    fn zeta_norm_examples() {
        assert_eq!(zeta_norm(&Reparameterization::identity()), 0.0);
        // ζ = t²: ‖ζ − id‖_C⁰ = 1/4 at t = 1/2; ∫|2t − 1| = 1/2
        let n = zeta_norm(&Reparameterization::power(2.0).unwrap());
        assert!((n - 0.75).abs() < 1e-9, "norm(t²) = {n}");
    }

    #[test]
    fn zeta_norm_grows_with_flat_width() {
        let mut prev = 0.0;
        for w in [0.1, 0.3, 0.5, 0.7] {
            let n = zeta_norm(&Reparameterization::flat(w).unwrap());
            assert!(n > prev, "norm should grow with flat width: {n} after {prev}");
            prev = n;
        }
    }

    #[test]
    fn flat_reparameterizations_are_flat_and_monotone() {
        let z = Reparameterization::flat(0.2).unwrap();
        assert_eq!(z.value(0.05), 0.0);
        assert_eq!(z.value(0.96), 1.0);
        let mut prev = -1.0;
        for k in 0..=100 {
            let v = z.value(k as f64 / 100.0);
            assert!(v >= prev);
            assert!(z.deriv(k as f64 / 100.0) >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn product_with_zero_is_pointwise_identity() {
        let h = centered_bump(0.4, 0.8);
        let zero = Hamiltonian::scaled(0.0, &centered_bump(0.3, 1.0)).unwrap();
        let p = raw_product(&h, &zero, 1e-2).unwrap();
        for x in [[0.1, 0.2, 0.0], [0.0, 0.0, 0.0], [-0.3, 0.1, 0.0]] {
            for t in [0.0, 0.4, 1.0] {
                assert!((p.eval_raw(t, x) - h.eval_raw(t, x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn radial_pair_product_is_the_sum() {
        // concentric bumps: both flows preserve |x|, so F∘(φ_H^t)⁻¹ = F
        let h = centered_bump(0.45, 0.7);
        let f = centered_bump(0.3, -0.4);
        let p = raw_product(&h, &f, 1e-2).unwrap();
        let mut worst = 0.0f64;
        for x in [[0.05, 0.0, 0.0], [0.2, 0.1, 0.0], [0.25, -0.25, 0.0]] {
            for t in [0.3, 1.0] {
                let want = h.eval_raw(t, x) + f.eval_raw(t, x);
                worst = worst.max((p.eval_raw(t, x) - want).abs());
            }
        }
        assert!(worst < 1e-9, "radial product deviates from sum by {worst}");
    }

    #[test]
    fn product_checks_flow_provenance() {
        let grid = sample_grid(Surface::unit_disc(), 8, 8).unwrap();
        let h = centered_bump(0.4, 0.8);
        let f = centered_bump(0.3, 1.0);
        let flow_f = integrate_flow(&f, &grid, StepControl::default()).unwrap();
        assert!(matches!(
            product_ham(&h, &f, &flow_f),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn autonomous_inverse_is_minus_h() {
        let grid = sample_grid(Surface::unit_disc(), 8, 8).unwrap();
        let h = centered_bump(0.35, 0.9);
        let fl = integrate_flow(&h, &grid, StepControl::default()).unwrap();
        let inv = inverse_ham(&h, &fl).unwrap();
        for x in [[0.1, 0.05, 0.0], [0.2, -0.2, 0.0]] {
            assert!((inv.eval_raw(0.7, x) + h.eval_raw(0.7, x)).abs() < 1e-15);
        }
        // closed-form flows of H and H̄ compose to the identity
        let x = [0.21, -0.07, 0.0];
        let y = inv.exact_flow_point(0.8, h.exact_flow_point(0.8, x).unwrap()).unwrap();
        assert!(vec3::dist(x, y) < 1e-13);
    }

    #[test]
    fn rescale_endpoints_and_half_speed() {
        let h = Hamiltonian::sphere_height();
        assert!(matches!(time_rescale_ham(&h, 1.5), Err(Error::Domain(_))));
        let same = time_rescale_ham(&h, 1.0).unwrap();
        let x = vec3::normalize([0.6, 0.5, 0.6]);
        assert!((same.eval_raw(0.0, x) - h.eval_raw(0.0, x)).abs() < 1e-15);
        let zero = time_rescale_ham(&h, 0.0).unwrap();
        assert_eq!(zero.eval_raw(0.3, x), 0.0);
        assert!(vec3::dist(zero.exact_flow_point(1.0, x).unwrap(), x) < 1e-15);
        // s = 1/2: time-1 map is rotation by −1/2
        let half = time_rescale_ham(&h, 0.5).unwrap();
        let got = half.exact_flow_point(1.0, x).unwrap();
        let want = h.exact_flow_point(0.5, x).unwrap();
        assert!(vec3::dist(got, want) < 1e-15);
    }

    #[test]
    fn reparameterized_path_hits_the_same_endpoint() {
        let h = Hamiltonian::axis_profile([0.2, 0.4, 1.0], &[0.0, 1.0, -0.5], TimeWeight::One)
            .unwrap();
        let z = Reparameterization::flat(0.3).unwrap();
        let hz = reparameterize_ham(&h, &z).unwrap();
        let x = vec3::normalize([0.3, -0.8, 0.5]);
        // endpoint agreement (ζ(1) = 1), exact maps
        let a = hz.exact_flow_point(1.0, x).unwrap();
        let b = h.exact_flow_point(1.0, x).unwrap();
        assert!(vec3::dist(a, b) < 1e-15);
        // interior: φ_{H^ζ}^t = φ_H^{ζ(t)}
        let a = hz.exact_flow_point(0.37, x).unwrap();
        let b = h.exact_flow_point(z.value(0.37), x).unwrap();
        assert!(vec3::dist(a, b) < 1e-15);
        // generator values: ζ′·H∘ζ
        assert!((hz.eval_raw(0.5, x) - z.deriv(0.5) * h.eval_raw(z.value(0.5), x)).abs() < 1e-15);
    }

    #[test]
    fn conjugation_by_identity_and_by_rotation() {
        let grid = sample_grid(Surface::Sphere, 12, 12).unwrap();
        let h = Hamiltonian::sphere_height();
        let id = DiscreteMap::identity(&grid);
        let same = conjugate_ham(&h, &id).unwrap();
        let x = vec3::normalize([0.2, 0.9, 0.37]);
        assert!((same.eval_raw(0.0, x) - h.eval_raw(0.0, x)).abs() < 1e-15);
        // ψ = rotation about the vertical axis fixes H = z
        let rot = Hamiltonian::sphere_height();
        let fl = integrate_flow(&rot, &grid, StepControl::default()).unwrap();
        let psi = fl.final_map(false).unwrap();
        let conj = conjugate_ham(&h, &psi).unwrap();
        assert!((conj.eval_raw(0.0, x) - h.eval_raw(0.0, x)).abs() < 1e-12);
    }

    #[test]
    fn conjugation_rejects_area_distorting_maps() {
        let grid = sample_grid(Surface::unit_disc(), 8, 8).unwrap();
        let h = centered_bump(0.4, 1.0);
        let squeeze = DiscreteMap::from_fn(
            &grid,
            Arc::new(|p: Vec3| [0.5 * p[0], 0.5 * p[1], 0.0]),
            Some(Arc::new(|p: Vec3| [2.0 * p[0], 2.0 * p[1], 0.0])),
        );
        assert!(matches!(
            conjugate_ham(&h, &squeeze),
            Err(Error::Contract(_))
        ));
        let bare = DiscreteMap {
            evaluator: None,
            ..DiscreteMap::identity(&grid)
        };
        assert!(matches!(conjugate_ham(&h, &bare), Err(Error::Contract(_))));
    }

    #[test]
    fn tan_is_constant_along_autonomous_flows() {
        let grid = sample_grid(Surface::Sphere, 8, 8).unwrap();
        let h = Hamiltonian::axis_profile([1.0, 0.2, 0.1], &[0.0, 0.6, 0.3], TimeWeight::One)
            .unwrap();
        let path = integrate_flow(&h, &grid, StepControl::default()).unwrap();
        let x = SurfacePoint::Cylinder { z: 0.4, phi: 1.2 };
        let v0 = tan_map(&path, 0.0, &x).unwrap();
        for t in [0.25, 0.5, 0.75, 1.0] {
            let v = tan_map(&path, t, &x).unwrap();
            assert!((v - v0).abs() < 1e-5, "Tan drifted by {} at t={t}", (v - v0).abs());
        }
    }

    #[test]
    fn dev_product_rule_is_definitionally_tight() {
        let grid = sample_grid(Surface::unit_disc(), 8, 8).unwrap();
        let h = centered_bump(0.45, 0.7);
        let f = centered_bump(0.3, -0.4);
        let fl_h = integrate_flow(&h, &grid, StepControl::default()).unwrap();
        let fl_f = integrate_flow(&f, &grid, StepControl::default()).unwrap();
        let r = dev_of_product_check(&fl_h, &fl_f).unwrap();
        assert!(r < 1e-9, "dev product residual {r}");
    }
}
