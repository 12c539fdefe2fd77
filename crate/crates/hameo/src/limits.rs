//! Convergence experiments: step-refinement studies for the integrator's
//! conserved quantities, finite-prefix limit tables for sequences of
//! Hamiltonians, and a uniqueness probe pairing flow collapse against
//! generator norms.
//!
//! Everything here examines finite prefixes and reports decay tables with
//! ratio-test verdict flags; nothing claims a limit exists beyond the
//! computed numbers.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::inverse_ham;
use crate::calabi::{alexander_rescale, twist_generating_ham, RadialProfile};
use crate::error::{Error, Result};
pub use crate::flow::{conservation_residual, one_param_residual};
use crate::flow::{exact_flow_deviation, integrate_flow, FlowPath, StepControl};
use crate::geometry::{sample_grid, Grid, Surface, Vec3};
use crate::hamiltonian::{Hamiltonian, TimeWeight};

/// Default number of sequence terms examined: geometric-decay diagnostics
/// stabilize within about ten terms at double precision.
pub const DEFAULT_PREFIX: usize = 12;
/// Default tail/head ratio below which a column counts as decaying.
pub const DEFAULT_DECAY_THRESHOLD: f64 = 0.1;
/// Time nodes for sup-norm scans of time-dependent generators.
const SUP_TIME_NODES: usize = 65;
/// Gaps below this are treated as exact zeros by the verdict logic.
const GAP_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------
// step-refinement studies

/// One level of a step-refinement ladder. `observed_order` is
/// log₂(previous residual / this residual), absent on the first level.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StudyRow {
    pub step: f64,
    pub residual: f64,
    pub observed_order: Option<f64>,
}

/// Largest power of two not exceeding `nominal`: refinement ladders use
/// exactly representable steps so halving is exact and frame times of
/// different levels coincide bit-for-bit.
pub fn snap_step(nominal: f64) -> Result<f64> {
    if !(nominal.is_finite() && 0.0 < nominal && nominal <= 0.5) {
        return Err(Error::Range(format!("step {nominal} outside (0, 0.5]")));
    }
    let k = (-nominal.log2()).ceil() as i32;
    Ok((2.0f64).powi(-k))
}

/// Which conserved quantity a refinement study tracks.
#[derive(Clone, Debug)]
pub enum RefinementProbe {
    /// Drift of the (autonomous) generator along its own flow.
    Conservation,
    /// Worst additivity gap `φ^{t+s}` vs `φ^t∘φ^s` over the given pairs.
    OneParam { pairs: Vec<(f64, f64)> },
    /// Deviation from the generator's closed-form flow.
    ExactFlow,
}

/// Residuals of `probe` for `h` on a ladder of `levels` halved steps
/// starting at the snapped `nominal_step`, with observed convergence
/// orders between consecutive levels.
pub fn refinement_study(
    h: &Hamiltonian,
    grid: &Grid,
    probe: &RefinementProbe,
    nominal_step: f64,
    levels: usize,
) -> Result<Vec<StudyRow>> {
    if !(1..=8).contains(&levels) {
        return Err(Error::Range(format!("refinement levels {levels} outside 1..=8")));
    }
    let base = snap_step(nominal_step)?;
    let residuals: Result<Vec<(f64, f64)>> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let step = base * (2.0f64).powi(-(k as i32));
            let ctrl = StepControl { step, frames: 9 };
            let residual = match probe {
                RefinementProbe::Conservation => conservation_residual(h, grid, ctrl)?,
                RefinementProbe::OneParam { pairs } => {
                    let mut worst = 0.0f64;
                    for &(t, s) in pairs {
                        worst = worst.max(one_param_residual(h, grid, t, s, step)?);
                    }
                    worst
                }
                RefinementProbe::ExactFlow => exact_flow_deviation(h, grid, ctrl)?
                    .ok_or_else(|| {
                        Error::Contract("generator carries no closed-form flow".into())
                    })?,
            };
            Ok((step, residual))
        })
        .collect();
    let residuals = residuals?;
    Ok(residuals
        .iter()
        .enumerate()
        .map(|(k, &(step, residual))| StudyRow {
            step,
            residual,
            observed_order: (k > 0).then(|| (residuals[k - 1].1 / residual).log2()),
        })
        .collect())
}

// ---------------------------------------------------------------------
// sequences

/// A labeled finite sequence of Hamiltonians on one surface.
#[derive(Clone)]
pub struct HamiltonianSequence {
    label: String,
    terms: Vec<Hamiltonian>,
}

impl HamiltonianSequence {
    pub fn new(label: impl Into<String>, terms: Vec<Hamiltonian>) -> Result<HamiltonianSequence> {
        if terms.len() < 2 {
            return Err(Error::Range("a sequence needs at least two terms".into()));
        }
        let surface = terms[0].surface();
        if terms.iter().any(|h| h.surface() != surface) {
            return Err(Error::Contract("sequence terms live on different surfaces".into()));
        }
        Ok(HamiltonianSequence { label: label.into(), terms })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn terms(&self) -> &[Hamiltonian] {
        &self.terms
    }

    pub fn surface(&self) -> Surface {
        self.terms[0].surface()
    }

    fn check_prefix(prefix: usize) -> Result<usize> {
        if !(2..=40).contains(&prefix) {
            return Err(Error::Range(format!("prefix {prefix} outside 2..=40")));
        }
        Ok(prefix)
    }

    /// `H_i = z / i`: generators and flows both decay.
    pub fn decay_rotations(prefix: usize) -> Result<HamiltonianSequence> {
        let n = Self::check_prefix(prefix)?;
        let terms: Result<Vec<_>> = (1..=n)
            .map(|i| Hamiltonian::scaled(1.0 / i as f64, &Hamiltonian::sphere_height()))
            .collect();
        HamiltonianSequence::new("decay-rotations", terms?)
    }

    /// `H_i = z` for every `i`: nothing moves toward the identity.
    pub fn constant_rotations(prefix: usize) -> Result<HamiltonianSequence> {
        let n = Self::check_prefix(prefix)?;
        HamiltonianSequence::new(
            "constant-rotations",
            (0..n).map(|_| Hamiltonian::sphere_height()).collect(),
        )
    }

    /// `H_i = z·(1 + 2⁻ⁱ)`: converges geometrically to the unit rotation.
    pub fn geometric_rotations(prefix: usize) -> Result<HamiltonianSequence> {
        let n = Self::check_prefix(prefix)?;
        let terms: Result<Vec<_>> = (1..=n)
            .map(|i| {
                Hamiltonian::scaled(1.0 + (2.0f64).powi(-(i as i32)), &Hamiltonian::sphere_height())
            })
            .collect();
        HamiltonianSequence::new("geometric-rotations", terms?)
    }

    /// Squeezed twists `a_i²·H(x/a_i)` with `a_i = ½(1 + 2⁻ⁱ) → ½`: a
    /// convergent rescaling sequence staying inside the smooth category.
    pub fn shrinking_supports(prefix: usize) -> Result<HamiltonianSequence> {
        let n = Self::check_prefix(prefix)?;
        let base = twist_generating_ham(&RadialProfile::bump(0.2, 0.45, 0.8)?);
        let terms: Result<Vec<_>> = (1..=n)
            .map(|i| alexander_rescale(&base, 0.5 * (1.0 + (2.0f64).powi(-(i as i32))), 0.0))
            .collect();
        HamiltonianSequence::new("shrinking-supports", terms?)
    }

    /// `H_i(t, x) = w_i(t)·z` with `w_i` integrating to `sin²(π·i·t)/i`:
    /// the flows sweep smaller and smaller rotations and return to the
    /// identity, lengths stay bounded, but the generators converge to
    /// nothing — a stress row for the uniqueness probe.
    pub fn oscillatory_reparameterizations(prefix: usize) -> Result<HamiltonianSequence> {
        let n = Self::check_prefix(prefix)?;
        let terms: Result<Vec<_>> = (1..=n)
            .map(|i| {
                Hamiltonian::axis_profile(
                    [0.0, 0.0, 1.0],
                    &[0.0, 1.0],
                    TimeWeight::SinSq { freq: i as f64, amp: 1.0 / i as f64 },
                )
            })
            .collect();
        HamiltonianSequence::new("oscillatory-reparameterizations", terms?)
    }

    /// Bundled sequence names accepted by [`Self::by_name`].
    pub fn names() -> &'static [&'static str] {
        &["decay", "constant", "geometric", "shrinking", "oscillatory"]
    }

    pub fn by_name(name: &str, prefix: usize) -> Result<HamiltonianSequence> {
        match name {
            "decay" => Self::decay_rotations(prefix),
            "constant" => Self::constant_rotations(prefix),
            "geometric" => Self::geometric_rotations(prefix),
            "shrinking" => Self::shrinking_supports(prefix),
            "oscillatory" => Self::oscillatory_reparameterizations(prefix),
            other => Err(Error::Config(format!(
                "unknown sequence '{other}' (available: {})",
                Self::names().join(", ")
            ))),
        }
    }
}

// ---------------------------------------------------------------------
// convergence reports

/// Pairwise gap between terms `i < j`: sup-norm gap of the generators and
/// C⁰ gap of the flows (forward and inverse paths).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapRow {
    pub i: usize,
    pub j: usize,
    pub ham_gap: f64,
    pub flow_gap: f64,
}

/// Decay data for a finite sequence prefix. Columns are raw numbers; the
/// flags are ratio-test verdicts at `threshold` and never claim more than
/// the prefix shows.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub rows: Vec<GapRow>,
    /// Time-integrated oscillation of each term (the path length).
    pub lengths: Vec<f64>,
    /// Largest single-time oscillation of each term.
    pub sup_oscs: Vec<f64>,
    /// Plain sup norm of each term over grid × time.
    pub sup_norms: Vec<f64>,
    /// C⁰ distance of each term's path (and its inverse) from the identity.
    pub flow_gaps_to_id: Vec<f64>,
    /// `moduli[k]` = worst generator gap among pairs with both indices ≥ k.
    pub cauchy_moduli: Vec<f64>,
    /// Worst observed flow-gap / generator-gap ratio (empirical Lipschitz
    /// constant), absent when every generator gap is zero.
    pub lipschitz: Option<f64>,
    pub threshold: f64,
    pub flags: Vec<String>,
}

impl ConvergenceReport {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Grid, integrator, and verdict settings for the sequence experiments.
#[derive(Clone, Copy, Debug)]
pub struct ProbeOptions {
    pub grid: (usize, usize),
    pub step: f64,
    pub frames: usize,
    pub threshold: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { grid: (14, 14), step: 2e-3, frames: 9, threshold: DEFAULT_DECAY_THRESHOLD }
    }
}

struct SequenceMetrics {
    rows: Vec<GapRow>,
    lengths: Vec<f64>,
    sup_oscs: Vec<f64>,
    sup_norms: Vec<f64>,
    flow_gaps_to_id: Vec<f64>,
    cauchy_moduli: Vec<f64>,
    lipschitz: Option<f64>,
}

/// Sup of |H_i − H_j| over the grid and a fixed time ladder (single time
/// slice when both terms are autonomous). `j = None` measures |H_i|.
fn sup_gap(a: &Hamiltonian, b: Option<&Hamiltonian>, grid: &Grid) -> f64 {
    let autonomous = a.is_autonomous() && b.map_or(true, |h| h.is_autonomous());
    let nodes = if autonomous { 1 } else { SUP_TIME_NODES };
    let mut worst = 0.0f64;
    for k in 0..nodes {
        let t = if nodes == 1 { 0.0 } else { k as f64 / (nodes - 1) as f64 };
        for &p in &grid.points {
            let v = a.eval_raw(t, p) - b.map_or(0.0, |h| h.eval_raw(t, p));
            worst = worst.max(v.abs());
        }
    }
    worst
}

fn compute_metrics(seq: &HamiltonianSequence, opts: &ProbeOptions) -> Result<SequenceMetrics> {
    let grid = sample_grid(seq.surface(), opts.grid.0, opts.grid.1)?;
    let ctrl = StepControl { step: opts.step, frames: opts.frames };
    let identity = |_t: f64, p: Vec3| p;

    struct TermData {
        forward: FlowPath,
        inverse: FlowPath,
        length: f64,
        sup_osc: f64,
        sup_norm: f64,
        gap_to_id: f64,
    }
    let per_term: Result<Vec<TermData>> = seq
        .terms
        .par_iter()
        .map(|h| {
            let forward = integrate_flow(h, &grid, ctrl)?;
            let inverse = integrate_flow(&inverse_ham(h, &forward)?, &grid, ctrl)?;
            let norm = h.hofer_norm(&grid);
            let gap_to_id = forward
                .max_deviation_from(identity)
                .max(inverse.max_deviation_from(identity));
            Ok(TermData {
                forward,
                inverse,
                length: norm.l1,
                sup_osc: norm.sup,
                sup_norm: sup_gap(h, None, &grid),
                gap_to_id,
            })
        })
        .collect();
    let per_term = per_term?;

    let n = seq.terms.len();
    let mut rows = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let ham_gap = sup_gap(&seq.terms[i], Some(&seq.terms[j]), &grid);
            let flow_gap = per_term[i]
                .forward
                .c0_distance(&per_term[j].forward)?
                .max(per_term[i].inverse.c0_distance(&per_term[j].inverse)?);
            rows.push(GapRow { i, j, ham_gap, flow_gap });
        }
    }
    let cauchy_moduli: Vec<f64> = (0..n.saturating_sub(1))
        .map(|k| {
            rows.iter()
                .filter(|r| r.i >= k)
                .map(|r| r.ham_gap)
                .fold(0.0, f64::max)
        })
        .collect();
    let lipschitz = rows
        .iter()
        .filter(|r| r.ham_gap > GAP_FLOOR)
        .map(|r| r.flow_gap / r.ham_gap)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    Ok(SequenceMetrics {
        rows,
        lengths: per_term.iter().map(|t| t.length).collect(),
        sup_oscs: per_term.iter().map(|t| t.sup_osc).collect(),
        sup_norms: per_term.iter().map(|t| t.sup_norm).collect(),
        flow_gaps_to_id: per_term.iter().map(|t| t.gap_to_id).collect(),
        cauchy_moduli,
        lipschitz,
    })
}

/// Tail/head ratio test: does the column decay below `threshold` across
/// the prefix? Exact zeros pass.
fn decays(column: &[f64], threshold: f64) -> bool {
    match (column.first(), column.last()) {
        (Some(&head), Some(&tail)) => tail <= threshold * head + GAP_FLOOR,
        _ => false,
    }
}

fn assemble(metrics: SequenceMetrics, label: &str, threshold: f64, flags: Vec<String>) -> ConvergenceReport {
    ConvergenceReport {
        label: label.into(),
        rows: metrics.rows,
        lengths: metrics.lengths,
        sup_oscs: metrics.sup_oscs,
        sup_norms: metrics.sup_norms,
        flow_gaps_to_id: metrics.flow_gaps_to_id,
        cauchy_moduli: metrics.cauchy_moduli,
        lipschitz: metrics.lipschitz,
        threshold,
        flags,
    }
}

/// Pairwise gap table for a sequence prefix: generator sup gaps, flow C⁰
/// gaps, Cauchy moduli, and decay flags.
pub fn hamiltonian_limit_table(seq: &HamiltonianSequence) -> Result<ConvergenceReport> {
    hamiltonian_limit_table_with(seq, &ProbeOptions::default())
}

pub fn hamiltonian_limit_table_with(
    seq: &HamiltonianSequence,
    opts: &ProbeOptions,
) -> Result<ConvergenceReport> {
    let metrics = compute_metrics(seq, opts)?;
    let mut flags = Vec::new();
    if metrics.rows.iter().all(|r| r.ham_gap <= GAP_FLOOR && r.flow_gap <= GAP_FLOOR) {
        flags.push("all-gaps-zero".into());
        flags.push("cauchy".into());
    } else {
        let successive_ham: Vec<f64> = metrics
            .rows
            .iter()
            .filter(|r| r.j == r.i + 1)
            .map(|r| r.ham_gap)
            .collect();
        let successive_flow: Vec<f64> = metrics
            .rows
            .iter()
            .filter(|r| r.j == r.i + 1)
            .map(|r| r.flow_gap)
            .collect();
        if decays(&successive_ham, opts.threshold) {
            flags.push("ham-gaps-decay".into());
        }
        if decays(&successive_flow, opts.threshold) {
            flags.push("flow-gaps-decay".into());
        }
        if decays(&metrics.cauchy_moduli, opts.threshold) {
            flags.push("cauchy".into());
        }
    }
    Ok(assemble(metrics, seq.label(), opts.threshold, flags))
}

/// Pair flow collapse against generator norms: flags "consistent with
/// uniqueness" when flows and norms decay jointly, and "violation
/// candidate" only when the flows collapse to the identity, the
/// generators form a Cauchy sequence, and the norms stay bounded away
/// from zero — the configuration the structural theory rules out.
pub fn uniqueness_probe(seq: &HamiltonianSequence) -> Result<ConvergenceReport> {
    uniqueness_probe_with(seq, &ProbeOptions::default())
}

pub fn uniqueness_probe_with(
    seq: &HamiltonianSequence,
    opts: &ProbeOptions,
) -> Result<ConvergenceReport> {
    let metrics = compute_metrics(seq, opts)?;
    let collapse = decays(&metrics.flow_gaps_to_id, opts.threshold);
    let norms_vanish = decays(&metrics.sup_norms, opts.threshold);
    let cauchy = decays(&metrics.cauchy_moduli, opts.threshold)
        || metrics.rows.iter().all(|r| r.ham_gap <= GAP_FLOOR);
    let mut flags = Vec::new();
    if cauchy {
        flags.push("cauchy".into());
    }
    flags.push(
        match (collapse, norms_vanish, cauchy) {
            (false, _, _) => "inapplicable-flows-do-not-collapse",
            (true, true, _) => "consistent-with-uniqueness",
            (true, false, true) => "violation-candidate",
            (true, false, false) => "stress-row-norms-bounded-sequence-not-cauchy",
        }
        .into(),
    );
    Ok(assemble(metrics, seq.label(), opts.threshold, flags))
}
