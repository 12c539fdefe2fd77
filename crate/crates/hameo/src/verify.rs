//! Named invariant suites: quick, self-contained versions of the
//! library's key identities, each reporting pass/fail with a measured
//! detail line. The CLI `verify` subcommand runs these; the heavyweight
//! versions with full case counts live in the integration tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{inverse_ham, raw_product, reparameterize_ham, Reparameterization};
use crate::calabi::{
    alexander_rescale, cal_path, cal_twist, twist_generating_ham, CalConvention, RadialProfile,
};
use crate::error::{Error, Result};
use crate::families::{random_pair_with, WeightStyle};
use crate::flow::{
    advance, conservation_residual, integrate_flow, one_param_residual, StepControl,
};
use crate::geometry::{sample_grid, Surface};
use crate::hamiltonian::{Hamiltonian, TimeWeight};
use crate::hofer::{energy_capacity_floor, intrinsic_norm_upper, leng};
use crate::limits::{
    hamiltonian_limit_table, refinement_study, uniqueness_probe, HamiltonianSequence,
    RefinementProbe,
};

/// Outcome of one named check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Check body: `Ok(detail)` on pass, `Err(detail)` on failure.
type Outcome = std::result::Result<String, String>;
type Check = (&'static str, &'static str, fn(u64) -> Outcome);

fn pass_if(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ctx(e: impl std::fmt::Display) -> String {
    format!("errored: {e}")
}

// ---------------------------------------------------------------- flow

fn check_conservation_height(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 16, 16).map_err(ctx)?;
    let ctrl = StepControl { step: 1e-3, frames: 9 };
    let residual =
        conservation_residual(&Hamiltonian::sphere_height(), &grid, ctrl).map_err(ctx)?;
    pass_if(residual < 1e-8, format!("height drift {residual:.3e} (< 1e-8)"))
}

fn check_one_param_height(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 12, 12).map_err(ctx)?;
    let r = one_param_residual(&Hamiltonian::sphere_height(), &grid, 1.0 / 3.0, 1.0 / 3.0, 1e-3)
        .map_err(ctx)?;
    pass_if(r < 1e-7, format!("additivity gap {r:.3e} (< 1e-7)"))
}

fn check_one_param_needs_autonomy(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 12, 12).map_err(ctx)?;
    let h = Hamiltonian::axis_profile(
        [0.0, 0.0, 1.0],
        &[0.0, 1.0],
        TimeWeight::Poly(vec![0.0, 1.0]),
    )
    .map_err(ctx)?;
    let r = one_param_residual(&h, &grid, 0.5, 0.5, 1e-3).map_err(ctx)?;
    pass_if(r >= 0.01, format!("time-dependent counterexample gap {r:.3} (≥ 0.01)"))
}

fn check_integrator_order(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 10, 10).map_err(ctx)?;
    let rows = refinement_study(
        &Hamiltonian::sphere_height(),
        &grid,
        &RefinementProbe::ExactFlow,
        4e-3,
        3,
    )
    .map_err(ctx)?;
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.observed_order).collect();
    let ok = orders.iter().all(|o| (3.2..=5.5).contains(o));
    pass_if(ok, format!("flow-error orders under halving: {orders:?} (within [3.2, 5.5])"))
}

// -------------------------------------------------------------- algebra

fn check_product_law(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for surface in [Surface::Sphere, Surface::unit_disc()] {
        let grid = sample_grid(surface, 8, 8).map_err(ctx)?;
        let (h, f) = random_pair_with(surface, seed, WeightStyle::SignFixed);
        let product = raw_product(&h, &f, 2e-3).map_err(ctx)?;
        for &p in &grid.points {
            let via_product = advance(&product, 0.0, 1.0, p, 2e-3).map_err(ctx)?;
            let through_f = advance(&f, 0.0, 1.0, p, 2e-3).map_err(ctx)?;
            let composed = advance(&h, 0.0, 1.0, through_f, 2e-3).map_err(ctx)?;
            let gap = crate::geometry::vec3::dist(via_product, composed);
            worst = worst.max(gap);
        }
    }
    pass_if(worst < 1e-5, format!("product-law gap {worst:.3e} (< 1e-5)"))
}

fn check_inverse_law(seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 8, 8).map_err(ctx)?;
    let (h, _) = random_pair_with(Surface::Sphere, seed, WeightStyle::SignFixed);
    let path = integrate_flow(&h, &grid, StepControl { step: 2e-3, frames: 9 }).map_err(ctx)?;
    let quotient = raw_product(&inverse_ham(&h, &path).map_err(ctx)?, &h, 2e-3).map_err(ctx)?;
    let mut worst = 0.0f64;
    for &p in &grid.points {
        let image = advance(&quotient, 0.0, 1.0, p, 2e-3).map_err(ctx)?;
        worst = worst.max(crate::geometry::vec3::dist(image, p));
    }
    pass_if(worst < 1e-5, format!("inverse-law identity gap {worst:.3e} (< 1e-5)"))
}

fn check_reparam_norm(seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 16, 16).map_err(ctx)?;
    let (h, _) = random_pair_with(Surface::Sphere, seed, WeightStyle::SignFixed);
    let zeta = Reparameterization::flat(0.3).map_err(ctx)?;
    let reparam = reparameterize_ham(&h, &zeta).map_err(ctx)?;
    let (a, b) = (h.hofer_norm(&grid).l1, reparam.hofer_norm(&grid).l1);
    let gap = (a - b).abs();
    pass_if(
        gap <= 1e-6 * a.abs().max(1.0),
        format!("‖H‖ = {a:.9}, ‖H∘ζ‖ = {b:.9}, gap {gap:.3e} (≤ 1e-6)"),
    )
}

// --------------------------------------------------------------- calabi

fn check_twist_two_routes(_seed: u64) -> Outcome {
    let profile = RadialProfile::bump(0.3, 0.85, 0.9).map_err(ctx)?;
    let direct = cal_twist(&profile);
    let via_path =
        cal_path(&twist_generating_ham(&profile), CalConvention::Raw).map_err(ctx)?;
    let gap = (direct - via_path).abs() / direct.abs().max(1e-12);
    pass_if(gap < 1e-6, format!("twist {direct:.9} vs path {via_path:.9}, rel gap {gap:.3e}"))
}

fn check_dyadic_calibration(_seed: u64) -> Outcome {
    let unit = RadialProfile::unit();
    let mut details = Vec::new();
    let mut ok = true;
    for k in 1..=3u32 {
        let value = cal_twist(&unit.dyadic(k).map_err(ctx)?);
        ok &= (value - 1.0).abs() < 1e-6;
        details.push(format!("k={k}: {value:.9}"));
    }
    pass_if(ok, format!("dyadic values {} (all 1 ± 1e-6)", details.join(", ")))
}

fn check_tower_divergence(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::unit_disc(), 24, 24).map_err(ctx)?;
    let (_, cal) = wild_tower(3, &grid)?;
    pass_if((cal - 3.0).abs() < 1e-5, format!("truncated tower value {cal:.9} (≈ 3)"))
}

fn wild_tower(
    k: u32,
    grid: &crate::geometry::Grid,
) -> std::result::Result<(crate::flow::DiscreteMap, f64), String> {
    crate::calabi::wild_truncated(k, &RadialProfile::unit(), grid).map_err(ctx)
}

fn check_rescale_quartic(_seed: u64) -> Outcome {
    let h = twist_generating_ham(&RadialProfile::bump(0.2, 0.6, 0.8).map_err(ctx)?);
    let base = cal_path(&h, CalConvention::Raw).map_err(ctx)?;
    let a = 0.5f64;
    let squeezed = cal_path(&alexander_rescale(&h, a, 0.0).map_err(ctx)?, CalConvention::Raw)
        .map_err(ctx)?;
    let expected = a.powi(4) * base;
    let rel = (squeezed - expected).abs() / expected.abs().max(1e-12);
    pass_if(rel < 1e-8, format!("rescaled {squeezed:.9} vs a⁴·base {expected:.9}, rel {rel:.3e}"))
}

// ---------------------------------------------------------------- hofer

fn check_leng_height(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 24, 24).map_err(ctx)?;
    let path = integrate_flow(
        &Hamiltonian::sphere_height(),
        &grid,
        StepControl { step: 2e-3, frames: 9 },
    )
    .map_err(ctx)?;
    let value = leng(&path);
    pass_if((value - 2.0).abs() < 1e-9, format!("leng of unit rotation {value:.12} (= 2)"))
}

fn check_triangle(seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 10, 10).map_err(ctx)?;
    let ctrl = StepControl { step: 2e-3, frames: 9 };
    let mut worst = f64::NEG_INFINITY;
    for k in 0..3u64 {
        let (h, f) = random_pair_with(Surface::Sphere, seed + k, WeightStyle::SignFixed);
        let product = raw_product(&h, &f, 2e-3).map_err(ctx)?;
        let lhs = leng(&integrate_flow(&product, &grid, ctrl).map_err(ctx)?);
        let rhs = leng(&integrate_flow(&h, &grid, ctrl).map_err(ctx)?)
            + leng(&integrate_flow(&f, &grid, ctrl).map_err(ctx)?);
        worst = worst.max(lhs - rhs);
    }
    pass_if(worst <= 1e-6, format!("worst triangle excess {worst:.3e} (≤ 1e-6)"))
}

fn check_intrinsic_rotation(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 12, 12).map_err(ctx)?;
    let ctrl = StepControl { step: 2e-3, frames: 9 };
    let candidates: Vec<_> = [0.3, 0.5, 0.8]
        .into_iter()
        .map(|c| {
            let h = Hamiltonian::scaled(c, &Hamiltonian::sphere_height())?;
            integrate_flow(&h, &grid, ctrl)
        })
        .collect::<Result<_>>()
        .map_err(ctx)?;
    let target = candidates[1].final_map(false).map_err(ctx)?;
    let (value, index) = intrinsic_norm_upper(&target, &candidates, 1e-4).map_err(ctx)?;
    pass_if(
        index == 1 && (value - 1.0).abs() < 1e-6,
        format!("matched candidate {index} with bound {value:.9} (= 2·0.5)"),
    )
}

fn check_floor_formula(_seed: u64) -> Outcome {
    let floor = energy_capacity_floor(0.1).map_err(ctx)?;
    let expected = std::f64::consts::PI / 200.0;
    pass_if(
        (floor - expected).abs() < 1e-15,
        format!("floor(0.1) = {floor:.12} (= π/200)"),
    )
}

// --------------------------------------------------------------- limits

fn check_uniqueness_decay(_seed: u64) -> Outcome {
    let report =
        uniqueness_probe(&HamiltonianSequence::decay_rotations(12).map_err(ctx)?).map_err(ctx)?;
    pass_if(
        report.has_flag("consistent-with-uniqueness") && !report.has_flag("violation-candidate"),
        format!("decay sequence flags {:?}", report.flags),
    )
}

fn check_uniqueness_stress(_seed: u64) -> Outcome {
    let seq = HamiltonianSequence::oscillatory_reparameterizations(12).map_err(ctx)?;
    let report = uniqueness_probe(&seq).map_err(ctx)?;
    pass_if(
        !report.has_flag("violation-candidate")
            && report.has_flag("stress-row-norms-bounded-sequence-not-cauchy"),
        format!("oscillatory sequence flags {:?}", report.flags),
    )
}

fn check_limit_geometric(_seed: u64) -> Outcome {
    let report = hamiltonian_limit_table(&HamiltonianSequence::geometric_rotations(10).map_err(ctx)?)
        .map_err(ctx)?;
    let ok = ["ham-gaps-decay", "flow-gaps-decay", "cauchy"]
        .iter()
        .all(|f| report.has_flag(f));
    pass_if(ok, format!("geometric sequence flags {:?}", report.flags))
}

fn check_conservation_order(_seed: u64) -> Outcome {
    let grid = sample_grid(Surface::Sphere, 10, 10).map_err(ctx)?;
    let h = Hamiltonian::axis_profile([0.6, 0.0, 0.8], &[0.0, 1.0, 0.5], TimeWeight::One)
        .map_err(ctx)?;
    let rows =
        refinement_study(&h, &grid, &RefinementProbe::Conservation, 1.6e-2, 3).map_err(ctx)?;
    let order = rows[2].observed_order.unwrap_or(f64::NAN);
    pass_if(
        (3.3..=5.8).contains(&order),
        format!("conservation drift order {order:.2} (within [3.3, 5.8])"),
    )
}

// -------------------------------------------------------------- harness

const CHECKS: &[Check] = &[
    ("flow", "conservation-height", check_conservation_height),
    ("flow", "one-param-height", check_one_param_height),
    ("flow", "one-param-needs-autonomy", check_one_param_needs_autonomy),
    ("flow", "integrator-order", check_integrator_order),
    ("algebra", "product-law", check_product_law),
    ("algebra", "inverse-law", check_inverse_law),
    ("algebra", "reparameterization-norm", check_reparam_norm),
    ("calabi", "twist-two-routes", check_twist_two_routes),
    ("calabi", "dyadic-calibration", check_dyadic_calibration),
    ("calabi", "tower-divergence", check_tower_divergence),
    ("calabi", "rescale-quartic", check_rescale_quartic),
    ("hofer", "leng-height", check_leng_height),
    ("hofer", "triangle-inequality", check_triangle),
    ("hofer", "intrinsic-rotation-match", check_intrinsic_rotation),
    ("hofer", "capacity-floor", check_floor_formula),
    ("limits", "uniqueness-decay", check_uniqueness_decay),
    ("limits", "uniqueness-stress-row", check_uniqueness_stress),
    ("limits", "limit-table-geometric", check_limit_geometric),
    ("limits", "conservation-order", check_conservation_order),
];

/// Suite names accepted by [`run_suite`].
pub fn suite_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = CHECKS.iter().map(|c| c.0).collect();
    names.dedup();
    names.push("all");
    names
}

/// Run a named suite (or "all") with the given seed for the randomized
/// checks. Results come back in declaration order regardless of the
/// parallel execution underneath.
pub fn run_suite(suite: &str, seed: u64) -> Result<Vec<CheckResult>> {
    let selected: Vec<&Check> = CHECKS
        .iter()
        .filter(|c| suite == "all" || c.0 == suite)
        .collect();
    if selected.is_empty() {
        return Err(Error::Config(format!(
            "unknown suite '{suite}' (available: {})",
            suite_names().join(", ")
        )));
    }
    Ok(selected
        .par_iter()
        .map(|(suite, name, body)| match body(seed) {
            Ok(detail) => CheckResult { suite, name, passed: true, detail },
            Err(detail) => CheckResult { suite, name, passed: false, detail },
        })
        .collect())
}
