//! Seeded random Hamiltonian families with closed-form flows.
//!
//! The flow-level law checks need many "generic" pairs, tight tolerances,
//! and bounded runtimes all at once. These samplers draw from the built-in
//! families whose orbits are known exactly — axis-height profiles on the
//! sphere, off-centre bump twists on the disc — with randomized parameters
//! and optional random time weights. Distinct axes (resp. centres) give
//! genuinely non-commuting pairs, so the group-law tests do not degenerate,
//! while the closed forms keep composed evaluators cheap and the oracles
//! independent of the integrator being tested.
//!
//! All sampling is deterministic given the seed (ChaCha8).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{vec3, Surface, Vec3};
use crate::hamiltonian::{Hamiltonian, TimeWeight};

/// Deterministic RNG for a test seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_axis(rng: &mut ChaCha8Rng) -> Vec3 {
    // rejection-free: z uniform, azimuth uniform → uniform on the sphere
    let z: f64 = rng.random_range(-0.99..0.99);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let rho = (1.0 - z * z).sqrt();
    vec3::normalize([rho * phi.cos(), rho * phi.sin(), z])
}

/// How to sample time weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightStyle {
    /// Weights may change sign over [0, 1].
    Generic,
    /// Weights keep one sign on [0, 1], so `osc H_t = |w(t)|·osc H₀` stays
    /// smooth in `t` and time quadratures of the norm converge at full
    /// order. Norm-identity checks sample with this style.
    SignFixed,
}

/// Random time weight whose primitive at t = 1 stays away from zero, so
/// the sampled path's time-1 map is not the identity by construction.
/// (Integer-frequency sin² weights have W(1) = 0 — that family is reserved
/// for the limit diagnostics, not for generic law-check pairs.)
fn random_weight(rng: &mut ChaCha8Rng, style: WeightStyle) -> TimeWeight {
    match rng.random_range(0..3) {
        0 => TimeWeight::One,
        1 => match style {
            WeightStyle::Generic => loop {
                let c0 = rng.random_range(-1.0..1.0);
                let c1 = rng.random_range(-1.0..1.0);
                if (c0 + c1 / 2.0f64).abs() >= 0.25 {
                    break TimeWeight::Poly(vec![c0, c1]);
                }
            },
            WeightStyle::SignFixed => {
                // w(t) = c₀·(1 + u·t) with |u| < 1 never crosses zero
                let mag = rng.random_range(0.4..1.0);
                let c0 = if rng.random_bool(0.5) { mag } else { -mag };
                let u = rng.random_range(-0.9..0.9);
                TimeWeight::Poly(vec![c0, c0 * u])
            }
        },
        _ => TimeWeight::SinSq {
            // half-integer frequency keeps W(1) = amp·sin²(π·freq) = amp;
            // freq 1/2 additionally keeps sin(2π·freq·t) ≥ 0 on [0, 1]
            freq: match style {
                WeightStyle::Generic => rng.random_range(0..=1) as f64 + 0.5,
                WeightStyle::SignFixed => 0.5,
            },
            amp: rng.random_range(0.2..0.5),
        },
    }
}

/// Random smooth Hamiltonian on the sphere: polynomial profile of a random
/// axis height, degree ≤ 3, coefficients in [−1, 1], with a random time
/// weight. Closed-form flow: latitude rotation about the axis.
pub fn random_sphere_ham(rng: &mut ChaCha8Rng) -> Hamiltonian {
    random_sphere_ham_with(rng, WeightStyle::Generic)
}

/// As [`random_sphere_ham`], with an explicit weight style.
///
/// Coefficient bounds keep the flow's shear (the derivative of the angular
/// velocity across latitudes) small enough that fourth-order integration
/// error is not amplified past ~1e-7 over the unit time horizon.
pub fn random_sphere_ham_with(rng: &mut ChaCha8Rng, style: WeightStyle) -> Hamiltonian {
    let axis = random_axis(rng);
    let deg = rng.random_range(1..=3);
    let mut coeffs = vec![0.0];
    let lead_mag: f64 = rng.random_range(0.3..1.0);
    coeffs.push(if rng.random_bool(0.5) { lead_mag } else { -lead_mag });
    for _ in 1..deg {
        coeffs.push(rng.random_range(-0.35..0.35));
    }
    let weight = random_weight(rng, style);
    Hamiltonian::axis_profile(axis, &coeffs, weight)
        .expect("randomized axis-profile parameters stay in range")
}

/// Random smooth compactly supported Hamiltonian on the unit disc: a bump
/// twist at a random off-centre position, optionally time-weighted.
/// Closed-form flow: rotation about the bump centre.
pub fn random_disc_ham(rng: &mut ChaCha8Rng) -> Hamiltonian {
    random_disc_ham_with(rng, WeightStyle::Generic)
}

/// As [`random_disc_ham`], with an explicit weight style.
///
/// Bump twists shear strongly near the edge of their support (the radial
/// derivative of the angular velocity scales like amp/radius²), and that
/// shear exponentially amplifies integration error in any composed flow.
/// The amplitude/radius bounds here cap the shear so law checks at the
/// default step stay well under 1e-6.
pub fn random_disc_ham_with(rng: &mut ChaCha8Rng, style: WeightStyle) -> Hamiltonian {
    let off: f64 = rng.random_range(0.0..0.3);
    let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let center = [off * ang.cos(), off * ang.sin()];
    let radius: f64 = rng.random_range(0.32..0.45);
    let amp_mag: f64 = rng.random_range(0.05..0.12);
    let amp = if rng.random_bool(0.5) { amp_mag } else { -amp_mag };
    let base = Hamiltonian::bump_twist(Surface::unit_disc(), center, radius, amp)
        .expect("randomized bump parameters stay inside the disc");
    if rng.random_bool(0.5) {
        Hamiltonian::time_weighted(random_weight(rng, style), &base)
            .expect("bump twists are autonomous")
    } else {
        base
    }
}

/// Random Hamiltonian on the given surface.
pub fn random_ham(surface: Surface, rng: &mut ChaCha8Rng) -> Hamiltonian {
    match surface {
        Surface::Sphere => random_sphere_ham(rng),
        Surface::Disc { .. } => random_disc_ham(rng),
    }
}

/// Random non-commuting pair on the given surface (generic parameters make
/// the flows genuinely non-commuting: distinct axes or centres).
pub fn random_pair(surface: Surface, seed: u64) -> (Hamiltonian, Hamiltonian) {
    random_pair_with(surface, seed, WeightStyle::Generic)
}

/// As [`random_pair`], with an explicit weight style.
pub fn random_pair_with(surface: Surface, seed: u64, style: WeightStyle) -> (Hamiltonian, Hamiltonian) {
    let mut r = rng(seed);
    let sample = |r: &mut ChaCha8Rng| match surface {
        Surface::Sphere => random_sphere_ham_with(r, style),
        Surface::Disc { .. } => random_disc_ham_with(r, style),
    };
    (sample(&mut r), sample(&mut r))
}

/// Random *autonomous* Hamiltonian with a closed-form flow, for use as a
/// conjugator (its time-1 map is the conjugating ψ).
pub fn random_conjugator(surface: Surface, seed: u64) -> Hamiltonian {
    let mut r = rng(seed);
    loop {
        let h = random_ham(surface, &mut r);
        if h.is_autonomous() {
            return h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let (a1, b1) = random_pair(Surface::Sphere, 7);
        let (a2, b2) = random_pair(Surface::Sphere, 7);
        let x = vec3::normalize([0.3, -0.5, 0.8]);
        assert_eq!(a1.eval_raw(0.37, x), a2.eval_raw(0.37, x));
        assert_eq!(b1.eval_raw(0.37, x), b2.eval_raw(0.37, x));
        let (a3, _) = random_pair(Surface::Sphere, 8);
        assert_ne!(a1.eval_raw(0.37, x), a3.eval_raw(0.37, x));
    }

    #[test]
    fn sampled_hamiltonians_have_exact_flows() {
        for seed in 0..20 {
            let (a, b) = random_pair(Surface::Sphere, seed);
            assert!(a.has_exact_flow() && b.has_exact_flow());
            let (c, d) = random_pair(Surface::unit_disc(), seed);
            assert!(c.has_exact_flow() && d.has_exact_flow());
        }
    }

    #[test]
    fn generic_pairs_do_not_commute() {
        let x = vec3::normalize([0.4, 0.1, 0.9]);
        let mut noncommuting = 0;
        for seed in 0..10 {
            let (a, b) = random_pair(Surface::Sphere, seed);
            let ab = a
                .exact_flow_point(1.0, b.exact_flow_point(1.0, x).unwrap())
                .unwrap();
            let ba = b
                .exact_flow_point(1.0, a.exact_flow_point(1.0, x).unwrap())
                .unwrap();
            if vec3::dist(ab, ba) > 1e-3 {
                noncommuting += 1;
            }
        }
        assert!(noncommuting >= 8, "only {noncommuting}/10 pairs non-commuting");
    }
}
