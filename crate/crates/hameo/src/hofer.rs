//! Hofer geometry of Hamiltonian paths: path length, the path-space
//! metric, intrinsic-norm upper bounds over candidate paths, and an
//! optimization-based displacement energy bracketed from below by the
//! energy–capacity floor.
//!
//! The true infima over all Hamiltonians are uncomputable; everything here
//! that approximates an infimum does so over an explicit parametric family
//! and is reported as a certified upper bound, never as the infimum.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{inverse_ham, raw_product};
use crate::error::{Error, Result};
use crate::flow::{advance, integrate_flow, DiscreteMap, FlowPath, StepControl};
use crate::geometry::{sample_grid, Surface, Vec3};
use crate::hamiltonian::{Hamiltonian, TimeWeight};

/// Integration step for displacement feasibility checks. The witness
/// families are mild, smooth fields (translations, rotations), so
/// fourth-order truncation at this step is far below the separation
/// margins the checks enforce.
const DISPLACE_STEP: f64 = 2e-3;

/// Rings (or latitude levels) used when sampling a displacement target.
const TARGET_RINGS: usize = 8;
/// Azimuthal samples per ring.
const TARGET_SPOKES: usize = 24;

/// Hofer length of a path: the time integral of the generator's
/// oscillation, evaluated on the path's own grid.
pub fn leng(path: &FlowPath) -> f64 {
    path.generator().hofer_norm(path.grid()).l1
}

/// C⁰ distance between two paths over the same grid and frame times: the
/// worst chordal distance over frames, taken for the maps *and* for their
/// inverses (the inverse paths are integrated from the inverse
/// generators).
pub fn d_bar(lambda: &FlowPath, mu: &FlowPath) -> Result<f64> {
    let forward = lambda.c0_distance(mu)?;
    let ctrl = StepControl { step: lambda.step(), frames: lambda.times().len() };
    let lam_inv = integrate_flow(&inverse_ham(lambda.generator(), lambda)?, lambda.grid(), ctrl)?;
    let mu_inv = integrate_flow(&inverse_ham(mu.generator(), mu)?, mu.grid(), ctrl)?;
    let backward = lam_inv.c0_distance(&mu_inv)?;
    Ok(forward.max(backward))
}

/// The path-space metric: C⁰ distance plus the length of the quotient
/// path `λ⁻¹μ` (whose generator is built by the path algebra). For λ = μ
/// the quotient generator is pointwise zero, so the metric vanishes
/// exactly.
pub fn d_ham(lambda: &FlowPath, mu: &FlowPath) -> Result<f64> {
    let cbar = d_bar(lambda, mu)?;
    let lam_bar = inverse_ham(lambda.generator(), lambda)?;
    let quotient = raw_product(&lam_bar, mu.generator(), lambda.step())?;
    Ok(cbar + quotient.hofer_norm(lambda.grid()).l1)
}

/// Least length over candidate paths whose time-1 map matches `target`
/// within `delta_match` (others are skipped): an upper bound for the
/// intrinsic norm of the target map. Returns the bound and the index of
/// the witnessing candidate.
pub fn intrinsic_norm_upper(
    target: &DiscreteMap,
    candidates: &[FlowPath],
    delta_match: f64,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, path) in candidates.iter().enumerate() {
        let end = path.final_map(false)?;
        if end.c0_distance(target)? > delta_match {
            continue;
        }
        let len = leng(path);
        if best.map_or(true, |(b, _)| len < b) {
            best = Some((len, i));
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no candidate's time-1 map matches the target within {delta_match}"
        ))
    })
}

/// A compact target region to displace.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetRegion {
    /// Round ball in the unit disc.
    Ball { center: [f64; 2], radius: f64 },
    /// Spherical cap `z > zmin`.
    Cap { zmin: f64 },
}

impl TargetRegion {
    pub fn surface(&self) -> Surface {
        match self {
            TargetRegion::Ball { .. } => Surface::unit_disc(),
            TargetRegion::Cap { .. } => Surface::Sphere,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetRegion::Ball { center, radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::Range("ball radius must be positive".into()));
                }
                let c = center[0].hypot(center[1]);
                if !c.is_finite() || c + radius >= 1.0 {
                    return Err(Error::Range(
                        "ball must sit strictly inside the unit disc".into(),
                    ));
                }
                Ok(())
            }
            TargetRegion::Cap { zmin } => {
                if !(zmin.is_finite() && zmin.abs() < 1.0) {
                    return Err(Error::Range("cap level zmin must lie in (-1, 1)".into()));
                }
                Ok(())
            }
        }
    }

    /// Area of the region (with the ambient area forms used throughout:
    /// dx∧dy on the disc, the round form of total mass 4π on the sphere).
    pub fn area(&self) -> f64 {
        match *self {
            TargetRegion::Ball { radius, .. } => std::f64::consts::PI * radius * radius,
            TargetRegion::Cap { zmin } => std::f64::consts::TAU * (1.0 - zmin),
        }
    }

    /// Total area of the ambient surface.
    pub fn ambient_area(&self) -> f64 {
        match self {
            TargetRegion::Ball { .. } => std::f64::consts::PI,
            TargetRegion::Cap { .. } => 2.0 * std::f64::consts::TAU,
        }
    }

    /// Dense sample of the closed region: `TARGET_RINGS` rings (boundary
    /// included) of `TARGET_SPOKES` points each, plus the center.
    pub fn samples(&self) -> Vec<Vec3> {
        let mut pts = Vec::with_capacity(TARGET_RINGS * TARGET_SPOKES + 1);
        match *self {
            TargetRegion::Ball { center, radius } => {
                pts.push([center[0], center[1], 0.0]);
                for ring in 1..=TARGET_RINGS {
                    let r = radius * ring as f64 / TARGET_RINGS as f64;
                    for spoke in 0..TARGET_SPOKES {
                        let a = std::f64::consts::TAU * spoke as f64 / TARGET_SPOKES as f64;
                        pts.push([center[0] + r * a.cos(), center[1] + r * a.sin(), 0.0]);
                    }
                }
            }
            TargetRegion::Cap { zmin } => {
                pts.push([0.0, 0.0, 1.0]);
                let theta_c = zmin.acos();
                for ring in 1..=TARGET_RINGS {
                    let theta = theta_c * ring as f64 / TARGET_RINGS as f64;
                    let (s, z) = (theta.sin(), theta.cos());
                    for spoke in 0..TARGET_SPOKES {
                        let a = std::f64::consts::TAU * spoke as f64 / TARGET_SPOKES as f64;
                        pts.push([s * a.cos(), s * a.sin(), z]);
                    }
                }
            }
        }
        pts
    }

    /// Whether `p` lies in the region fattened by `margin` (Euclidean for
    /// balls, angular for caps — matching [`Self::separation_unit`]).
    pub fn contains_with_margin(&self, p: Vec3, margin: f64) -> bool {
        match *self {
            TargetRegion::Ball { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) <= radius + margin
            }
            TargetRegion::Cap { zmin } => {
                p[2].clamp(-1.0, 1.0).acos() <= zmin.acos() + margin
            }
        }
    }

    /// The default separation margin: twice the sampling resolution
    /// (Euclidean ring spacing for balls, angular level spacing for caps),
    /// so grid-level emptiness is robust to the discretization.
    pub fn separation_unit(&self) -> f64 {
        match *self {
            TargetRegion::Ball { radius, .. } => 2.0 * radius / TARGET_RINGS as f64,
            TargetRegion::Cap { zmin } => 2.0 * zmin.acos() / TARGET_RINGS as f64,
        }
    }
}

/// A named parametric Hamiltonian family over a box of parameters: the
/// search space for displacement witnesses.
#[derive(Clone)]
pub struct HamFamily {
    label: String,
    lo: Vec<f64>,
    hi: Vec<f64>,
    build: Arc<dyn Fn(&[f64]) -> Result<Hamiltonian> + Send + Sync>,
}

impl HamFamily {
    pub fn new(
        label: impl Into<String>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        build: Arc<dyn Fn(&[f64]) -> Result<Hamiltonian> + Send + Sync>,
    ) -> Result<HamFamily> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Range("parameter box must be nonempty with lo < hi".into()));
        }
        Ok(HamFamily { label: label.into(), lo, hi, build })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn build(&self, params: &[f64]) -> Result<Hamiltonian> {
        if params.len() != self.lo.len() {
            return Err(Error::Range(format!(
                "family '{}' takes {} parameters, got {}",
                self.label,
                self.lo.len(),
                params.len()
            )));
        }
        (self.build)(params)
    }

    /// Rotations about the x-axis: `H = c·x`, rotating the sphere by angle
    /// `c` in unit time, with ‖H‖ = 2|c|. The canonical cap-displacing
    /// family.
    pub fn cap_rotations() -> HamFamily {
        HamFamily::new(
            "cap-rotations",
            vec![0.05],
            vec![3.6],
            Arc::new(|p: &[f64]| {
                Hamiltonian::axis_profile([1.0, 0.0, 0.0], &[0.0, p[0]], TimeWeight::One)
            }),
        )
        .expect("static box is valid")
    }

    /// Compactly supported horizontal shears of the unit disc
    /// (parameters: translation distance, plateau half-width): on the
    /// slope-one plateau the time-1 map translates by the first parameter.
    /// The canonical ball-displacing family.
    pub fn disc_translations() -> HamFamily {
        HamFamily::new(
            "disc-translations",
            vec![0.02, 0.02],
            vec![0.70, 0.35],
            Arc::new(|p: &[f64]| Hamiltonian::shear(p[0], p[1], 0.01)),
        )
        .expect("static box is valid")
    }

    /// Look a family up by its CLI name.
    pub fn by_name(name: &str) -> Result<HamFamily> {
        match name {
            "cap-rotations" => Ok(HamFamily::cap_rotations()),
            "disc-translations" => Ok(HamFamily::disc_translations()),
            other => Err(Error::Config(format!(
                "unknown family '{other}' (available: cap-rotations, disc-translations)"
            ))),
        }
    }
}

/// A displacement-energy search: find the cheapest family member whose
/// time-1 flow moves the target off itself.
#[derive(Clone)]
pub struct DisplacementProblem {
    pub target: TargetRegion,
    pub family: HamFamily,
    /// Cap on objective evaluations across all restarts.
    pub budget: usize,
    /// Separation margin for the displacement check; `None` takes the
    /// target's [`TargetRegion::separation_unit`].
    pub tolerance: Option<f64>,
}

/// Outcome of a displacement search. `value`/`params` are present exactly
/// when `feasible`; `floor` is the analytic energy–capacity lower bound
/// (round-ball targets only).
#[derive(Clone, Debug, Serialize)]
pub struct DisplacementReport {
    pub feasible: bool,
    pub value: Option<f64>,
    pub params: Option<Vec<f64>>,
    pub floor: Option<f64>,
    pub evaluations: usize,
    pub note: String,
}

/// Half the Gromov area of a round disc of radius `r`: the analytic floor
/// under the displacement energy of the ball.
pub fn energy_capacity_floor(radius: f64) -> Result<f64> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::Range("ball radius must be nonnegative".into()));
    }
    Ok(std::f64::consts::PI * radius * radius / 2.0)
}

/// Search the family for the least-norm member that displaces the target,
/// verified on a dense sample of the closed region with a separation
/// margin. Returns the report and, when feasible, the witnessing
/// Hamiltonian. Exceeding half the ambient area is reported infeasible
/// outright: no area-preserving map can displace such a region.
pub fn displacement_energy_upper(
    problem: &DisplacementProblem,
) -> Result<(DisplacementReport, Option<Hamiltonian>)> {
    problem.target.validate()?;
    if problem.budget < 8 {
        return Err(Error::Range("displacement budget must be at least 8".into()));
    }
    let floor = match problem.target {
        TargetRegion::Ball { radius, .. } => Some(energy_capacity_floor(radius)?),
        TargetRegion::Cap { .. } => None,
    };
    if problem.target.area() > 0.5 * problem.target.ambient_area() {
        return Ok((
            DisplacementReport {
                feasible: false,
                value: None,
                params: None,
                floor,
                evaluations: 0,
                note: "target exceeds half the total area; no area-preserving map can displace it"
                    .into(),
            },
            None,
        ));
    }

    let samples = problem.target.samples();
    let margin = problem.tolerance.unwrap_or_else(|| problem.target.separation_unit());
    let norm_grid = sample_grid(problem.target.surface(), 40, 40)?;
    let evals = AtomicUsize::new(0);

    let objective = |params: &[f64]| -> f64 {
        evals.fetch_add(1, Ordering::Relaxed);
        let Ok(h) = problem.family.build(params) else {
            return f64::INFINITY;
        };
        let displaced = samples.iter().all(|&p| {
            let image = match h.exact_flow_point(1.0, p) {
                Some(q) => Ok(q),
                None => advance(&h, 0.0, 1.0, p, DISPLACE_STEP),
            };
            match image {
                Ok(q) => !problem.target.contains_with_margin(q, margin),
                Err(_) => false, // escape from the domain: not a witness
            }
        });
        if !displaced {
            return f64::INFINITY;
        }
        h.hofer_norm(&norm_grid).l1
    };

    let starts = quasi_random_starts(&problem.family.lo, &problem.family.hi, 8);
    let per_start = (problem.budget / starts.len()).max(8);
    let best = starts
        .par_iter()
        .map(|start| {
            pattern_search(&problem.family.lo, &problem.family.hi, start, per_start, &objective)
        })
        .reduce(
            || (f64::INFINITY, Vec::new()),
            |a, b| {
                // deterministic: strictly better value wins; ties break
                // lexicographically on the parameters
                match a.0.partial_cmp(&b.0) {
                    Some(std::cmp::Ordering::Less) => a,
                    Some(std::cmp::Ordering::Greater) => b,
                    _ => {
                        if lex_le(&a.1, &b.1) {
                            a
                        } else {
                            b
                        }
                    }
                }
            },
        );

    let evaluations = evals.load(Ordering::Relaxed);
    if !best.0.is_finite() {
        return Ok((
            DisplacementReport {
                feasible: false,
                value: None,
                params: None,
                floor,
                evaluations,
                note: format!(
                    "no feasible member of '{}' found within the budget",
                    problem.family.label()
                ),
            },
            None,
        ));
    }
    let witness = problem.family.build(&best.1)?;
    Ok((
        DisplacementReport {
            feasible: true,
            value: Some(best.0),
            params: Some(best.1),
            floor,
            evaluations,
            note: format!("upper bound over family '{}'", problem.family.label()),
        },
        Some(witness),
    ))
}

fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() <= b.len()
}

/// Deterministic low-discrepancy starts in the box: van der Corput
/// sequences in bases 2, 3, 5 per coordinate.
fn quasi_random_starts(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    let bases = [2u32, 3, 5];
    (0..count)
        .map(|i| {
            lo.iter()
                .zip(hi)
                .enumerate()
                .map(|(d, (&a, &b))| {
                    let f = van_der_corput(i as u32 + 1, bases[d % bases.len()]);
                    a + f * (b - a)
                })
                .collect()
        })
        .collect()
}

fn van_der_corput(mut n: u32, base: u32) -> f64 {
    let mut result = 0.0;
    let mut denom = 1.0;
    while n > 0 {
        denom *= base as f64;
        result += (n % base) as f64 / denom;
        n /= base;
    }
    result
}

/// Compass pattern search in a box: axis moves with step halving,
/// infeasible points scored +∞. Returns the best point found and its
/// value.
fn pattern_search(
    lo: &[f64],
    hi: &[f64],
    start: &[f64],
    budget: usize,
    objective: &(impl Fn(&[f64]) -> f64 + Sync),
) -> (f64, Vec<f64>) {
    let dim = lo.len();
    let mut steps: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.25 * (b - a)).collect();
    let mut here: Vec<f64> = start.to_vec();
    let mut best = objective(&here);
    let mut used = 1usize;
    while used < budget {
        let mut improved = false;
        'moves: for d in 0..dim {
            for sign in [1.0, -1.0] {
                if used >= budget {
                    break 'moves;
                }
                let mut trial = here.clone();
                trial[d] = (trial[d] + sign * steps[d]).clamp(lo[d], hi[d]);
                if trial[d] == here[d] {
                    continue;
                }
                let val = objective(&trial);
                used += 1;
                if val < best {
                    best = val;
                    here = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
            if steps.iter().zip(lo.iter().zip(hi)).all(|(s, (a, b))| *s < 1e-4 * (b - a)) {
                break;
            }
        }
    }
    (best, here)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{random_pair, rng};
    use crate::geometry::sample_grid;

    fn ctrl() -> StepControl {
        StepControl { step: 2e-3, frames: 17 }
    }

    #[test]
    fn identity_path_has_zero_length() {
        let grid = sample_grid(Surface::Sphere, 10, 10).unwrap();
        let zero = Hamiltonian::scaled(0.0, &Hamiltonian::sphere_height()).unwrap();
        let path = integrate_flow(&zero, &grid, ctrl()).unwrap();
        assert_eq!(leng(&path), 0.0);
    }

    #[test]
    fn height_path_has_length_two() {
        let grid = sample_grid(Surface::Sphere, 24, 24).unwrap();
        let path = integrate_flow(&Hamiltonian::sphere_height(), &grid, ctrl()).unwrap();
        assert!((leng(&path) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn metric_vanishes_on_equal_paths_exactly() {
        let grid = sample_grid(Surface::Sphere, 10, 10).unwrap();
        let (h, _) = random_pair(Surface::Sphere, 11);
        let path = integrate_flow(&h, &grid, ctrl()).unwrap();
        let d = d_ham(&path, &path).unwrap();
        assert_eq!(d, 0.0, "quotient generator is pointwise zero for λ = λ");
    }

    #[test]
    fn metric_against_identity_decays_linearly_in_the_rotation_angle() {
        let grid = sample_grid(Surface::Sphere, 12, 12).unwrap();
        let zero = Hamiltonian::scaled(0.0, &Hamiltonian::sphere_height()).unwrap();
        let id_path = integrate_flow(&zero, &grid, ctrl()).unwrap();
        let r_max = grid
            .points
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0f64, f64::max);
        let mut previous = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let h = Hamiltonian::scaled(eps, &Hamiltonian::sphere_height()).unwrap();
            let path = integrate_flow(&h, &grid, ctrl()).unwrap();
            let d = d_ham(&id_path, &path).unwrap();
            // C⁰ term: worst chordal displacement of a rotation by eps is
            // 2·sin(eps/2) on the widest sampled circle; length term: 2·eps
            let expected = 2.0 * (eps / 2.0).sin() * r_max + 2.0 * eps;
            assert!(
                (d - expected).abs() < 1e-6,
                "eps {eps}: d_ham {d} vs expected {expected}"
            );
            assert!(d < previous / 1.8, "should decay linearly: {d} vs {previous}");
            previous = d;
        }
    }

    #[test]
    fn metric_is_symmetric_on_random_pairs() {
        let grid = sample_grid(Surface::Sphere, 10, 10).unwrap();
        for seed in 0..3u64 {
            let (h, f) = random_pair(Surface::Sphere, 700 + seed);
            let a = integrate_flow(&h, &grid, ctrl()).unwrap();
            let b = integrate_flow(&f, &grid, ctrl()).unwrap();
            let ab = d_ham(&a, &b).unwrap();
            let ba = d_ham(&b, &a).unwrap();
            let scale = ab.abs().max(1e-9);
            assert!(
                (ab - ba).abs() / scale < 1e-5,
                "seed {seed}: {ab} vs {ba}"
            );
        }
    }

    #[test]
    fn a_path_and_its_inverse_have_equal_length() {
        let grid = sample_grid(Surface::Sphere, 16, 16).unwrap();
        for seed in [5u64, 6, 7] {
            let (h, _) = random_pair(Surface::Sphere, seed);
            let path = integrate_flow(&h, &grid, ctrl()).unwrap();
            let inv = inverse_ham(&h, &path).unwrap();
            let inv_path = integrate_flow(&inv, &grid, ctrl()).unwrap();
            let (a, b) = (leng(&path), leng(&inv_path));
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "seed {seed}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn intrinsic_norm_picks_the_matching_rotation() {
        let grid = sample_grid(Surface::Sphere, 12, 12).unwrap();
        let mk = |c: f64| {
            let h = Hamiltonian::scaled(c, &Hamiltonian::sphere_height()).unwrap();
            integrate_flow(&h, &grid, ctrl()).unwrap()
        };
        let candidates: Vec<FlowPath> = [0.3, 0.5, 0.8, 1.2].into_iter().map(mk).collect();
        let target = candidates[1].final_map(false).unwrap();
        let (value, index) = intrinsic_norm_upper(&target, &candidates, 1e-4).unwrap();
        assert_eq!(index, 1);
        assert!((value - 2.0 * 0.5).abs() < 1e-6, "norm bound {value}");
        // a tighter candidate set without the match is infeasible
        let err = intrinsic_norm_upper(&target, &candidates[2..], 1e-4);
        assert!(matches!(err, Err(Error::Infeasible(_))));
        // identity target with the identity candidate gives zero
        let zero = Hamiltonian::scaled(0.0, &Hamiltonian::sphere_height()).unwrap();
        let id_path = integrate_flow(&zero, &grid, ctrl()).unwrap();
        let id_map = DiscreteMap::identity(&grid);
        let (v0, _) = intrinsic_norm_upper(&id_map, &[id_path], 1e-9).unwrap();
        assert_eq!(v0, 0.0);
    }

    #[test]
    fn floor_formula() {
        assert!((energy_capacity_floor(0.1).unwrap() - std::f64::consts::PI / 200.0).abs() < 1e-15);
        assert_eq!(energy_capacity_floor(0.0).unwrap(), 0.0);
        assert!(energy_capacity_floor(-1.0).is_err());
    }

    #[test]
    fn oversized_targets_report_infeasible_without_search() {
        let problem = DisplacementProblem {
            target: TargetRegion::Cap { zmin: -0.5 },
            family: HamFamily::cap_rotations(),
            budget: 64,
            tolerance: None,
        };
        let (report, witness) = displacement_energy_upper(&problem).unwrap();
        assert!(!report.feasible && report.evaluations == 0 && witness.is_none());
        let ball = DisplacementProblem {
            target: TargetRegion::Ball { center: [0.0, 0.0], radius: 0.8 },
            family: HamFamily::disc_translations(),
            budget: 64,
            tolerance: None,
        };
        let (report, _) = displacement_energy_upper(&ball).unwrap();
        assert!(!report.feasible);
        assert!(report.note.contains("half the total area"));
    }

    #[test]
    fn cap_displacement_matches_the_rotation_construction() {
        let target = TargetRegion::Cap { zmin: 0.9 };
        let problem = DisplacementProblem {
            target: target.clone(),
            family: HamFamily::cap_rotations(),
            budget: 400,
            tolerance: None,
        };
        let (report, witness) = displacement_energy_upper(&problem).unwrap();
        assert!(report.feasible, "{}", report.note);
        let value = report.value.unwrap();
        // two caps of angular radius θ_c are disjoint only when the axis
        // tilts by more than 2θ_c, and ‖c·x‖ = 2|c|: the search can do no
        // better than 4θ_c, and with margin overhead should stay close
        let theta_c = 0.9f64.acos();
        assert!(value >= 4.0 * theta_c - 1e-9, "value {value} below geometric bound");
        assert!(
            value <= (4.0 * theta_c + 2.0 * target.separation_unit()) * 1.05,
            "value {value} too far above the construction"
        );
        // the witness really displaces the sampled cap
        let w = witness.unwrap();
        let margin = target.separation_unit();
        for p in target.samples() {
            let q = w.exact_flow_point(1.0, p).unwrap();
            assert!(!target.contains_with_margin(q, margin));
        }
    }

    #[test]
    fn ball_displacement_sits_in_the_energy_bracket() {
        let radius = 0.1;
        let target = TargetRegion::Ball { center: [0.0, 0.0], radius };
        let problem = DisplacementProblem {
            target: target.clone(),
            family: HamFamily::disc_translations(),
            budget: 300,
            tolerance: None,
        };
        let (report, witness) = displacement_energy_upper(&problem).unwrap();
        assert!(report.feasible, "{}", report.note);
        let value = report.value.unwrap();
        let floor = report.floor.unwrap();
        assert!((floor - std::f64::consts::PI / 200.0).abs() < 1e-15);
        assert!(value >= floor, "upper bound {value} below the floor {floor}");
        // explicit construction: translate by 2r + margin on a plateau
        // just covering the ball; its norm is an independent upper oracle
        let margin = target.separation_unit();
        let oracle_h =
            Hamiltonian::shear(2.0 * radius + margin + 0.005, radius + 0.01, 0.01).unwrap();
        let norm_grid = sample_grid(Surface::unit_disc(), 40, 40).unwrap();
        let oracle = oracle_h.hofer_norm(&norm_grid).l1;
        assert!(
            value <= oracle * 1.10,
            "optimizer value {value} should be within 10% of the construction {oracle}"
        );
        let w = witness.unwrap();
        for p in target.samples() {
            let q = advance(&w, 0.0, 1.0, p, DISPLACE_STEP).unwrap();
            assert!(!target.contains_with_margin(q, margin));
        }
    }

    #[test]
    fn target_validation_and_serialization() {
        assert!(TargetRegion::Ball { center: [0.8, 0.0], radius: 0.3 }.validate().is_err());
        assert!(TargetRegion::Cap { zmin: 1.0 }.validate().is_err());
        let t = TargetRegion::Ball { center: [0.1, -0.2], radius: 0.15 };
        let json = serde_json::to_string(&t).unwrap();
        let back: TargetRegion = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad: std::result::Result<TargetRegion, _> =
            serde_json::from_str(r#"{"kind":"ball","center":[0,0],"radius":0.1,"x":1}"#);
        assert!(bad.is_err(), "unknown fields must be rejected");
    }

    #[test]
    fn family_lookup_and_box_guards() {
        assert!(HamFamily::by_name("cap-rotations").is_ok());
        assert!(HamFamily::by_name("nope").is_err());
        let fam = HamFamily::disc_translations();
        assert_eq!(fam.dim(), 2);
        assert!(fam.build(&[0.1]).is_err(), "wrong arity");
        let _ = rng(0); // keep the families helper linked into this test
    }
}
