//! Cross-module geometry of the path length: triangle inequality under
//! the path product, invariance under area-preserving conjugation,
//! monotonicity of the intrinsic-norm bound in the candidate set, and a
//! brute-force radial oracle for the oscillation of twist generators.

use hameo::algebra::{conjugate_ham, raw_product};
use hameo::calabi::{twist_generating_ham, RadialProfile, TwistMap};
use hameo::families::{random_pair_with, WeightStyle};
use hameo::flow::{integrate_flow, FlowPath, StepControl};
use hameo::geometry::{sample_grid, Surface};
use hameo::hamiltonian::{Hamiltonian, TimeWeight};
use hameo::hofer::{intrinsic_norm_upper, leng};

fn ctrl() -> StepControl {
    StepControl { step: 2e-3, frames: 17 }
}

#[test]
fn path_length_satisfies_the_triangle_inequality_under_products() {
    for surface in [Surface::Sphere, Surface::unit_disc()] {
        let grid = sample_grid(surface, 10, 10).unwrap();
        for seed in 0..6u64 {
            let (h, f) = random_pair_with(surface, 9100 + seed, WeightStyle::SignFixed);
            let path_h = integrate_flow(&h, &grid, ctrl()).unwrap();
            let path_f = integrate_flow(&f, &grid, ctrl()).unwrap();
            let product = raw_product(&h, &f, 2e-3).unwrap();
            let path_hf = integrate_flow(&product, &grid, ctrl()).unwrap();
            let (lhs, a, b) = (leng(&path_hf), leng(&path_h), leng(&path_f));
            assert!(
                lhs <= a + b + 1e-6,
                "{surface:?} seed {seed}: leng(λμ) = {lhs} > {a} + {b}"
            );
        }
    }
}

#[test]
fn path_length_is_invariant_under_area_preserving_conjugation() {
    // sphere: conjugate by the (exact) time-1 map of a latitude-dependent
    // rotation about a tilted axis
    let grid = sample_grid(Surface::Sphere, 24, 24).unwrap();
    let conjugator = Hamiltonian::axis_profile(
        [0.6, 0.0, 0.8],
        &[0.0, 0.7, 0.4],
        TimeWeight::One,
    )
    .unwrap();
    let psi = integrate_flow(&conjugator, &grid, ctrl())
        .unwrap()
        .final_map(true)
        .unwrap();
    for seed in 0..6u64 {
        let (h, _) = random_pair_with(Surface::Sphere, 9400 + seed, WeightStyle::SignFixed);
        let conj = conjugate_ham(&h, &psi).unwrap();
        let (a, b) = (h.hofer_norm(&grid).l1, conj.hofer_norm(&grid).l1);
        assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
            "sphere seed {seed}: ‖H‖ = {a} vs ‖H∘ψ‖ = {b}"
        );
    }

    // disc: conjugate by a twist map (closed-form, certified area-preserving)
    let disc_grid = sample_grid(Surface::unit_disc(), 24, 24).unwrap();
    let twist = TwistMap::new(RadialProfile::bump(0.2, 0.8, 0.6).unwrap());
    let psi_disc = twist.discretize(&disc_grid).unwrap();
    for seed in 0..3u64 {
        let (h, _) = random_pair_with(Surface::unit_disc(), 9500 + seed, WeightStyle::SignFixed);
        let conj = conjugate_ham(&h, &psi_disc).unwrap();
        let (a, b) = (h.hofer_norm(&disc_grid).l1, conj.hofer_norm(&disc_grid).l1);
        assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
            "disc seed {seed}: ‖H‖ = {a} vs ‖H∘ψ‖ = {b}"
        );
    }
}

#[test]
fn adding_candidates_never_increases_the_intrinsic_bound() {
    let grid = sample_grid(Surface::Sphere, 12, 12).unwrap();
    let mk = |c: f64| -> FlowPath {
        let h = Hamiltonian::scaled(c, &Hamiltonian::sphere_height()).unwrap();
        integrate_flow(&h, &grid, ctrl()).unwrap()
    };
    let candidates: Vec<FlowPath> = [0.5, 0.8, 1.1].into_iter().map(mk).collect();
    let target = candidates[0].final_map(false).unwrap();
    // rotations by 0.5 and by 0.5 + 2π present the same time-1 map with
    // different lengths: widening the candidate set keeps the minimum
    let small = intrinsic_norm_upper(&target, &candidates[..1], 1e-4).unwrap().0;
    let wide = intrinsic_norm_upper(&target, &candidates, 1e-4).unwrap().0;
    assert!(wide <= small + 1e-12, "wide {wide} vs small {small}");
    let rewound = mk(0.5 + std::f64::consts::TAU);
    let mut extended = candidates;
    extended.push(rewound);
    // the long way around matches the target map too, but costs 2(0.5+2π)
    let widest = intrinsic_norm_upper(&target, &extended, 2e-3).unwrap();
    assert!(widest.0 <= wide + 1e-12);
    assert_eq!(widest.1, 0, "the short rotation should remain the witness");
}

#[test]
fn twist_generator_oscillation_matches_a_dense_radial_scan() {
    for profile in [
        RadialProfile::unit(),
        RadialProfile::bump(0.25, 0.9, 1.3).unwrap(),
    ] {
        let h = twist_generating_ham(&profile);
        let grid = sample_grid(Surface::unit_disc(), 48, 48).unwrap();
        let osc2d = h.oscillation(0.0, &grid);
        // the generator is radial, so a 1-D brute-force scan of 10⁵ radii
        // is an independent oracle for max − min over the disc
        let n = 100_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            let r = i as f64 / n as f64;
            let v = h.eval_raw(0.0, [r, 0.0, 0.0]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let oracle = hi - lo;
        assert!(
            (osc2d - oracle).abs() < 1e-9 * oracle.max(1e-9),
            "profile {:?}: grid+polish {osc2d} vs radial scan {oracle}",
            profile
        );
    }
}
