//! One-dimensional quadrature and root/extremum helpers.
//!
//! Composite Simpson is the workhorse: every integrand in this crate is
//! piecewise smooth, and the few that are not (|ζ′ − 1| has kinks where ζ′
//! crosses 1) are split at their kinks first.

/// Composite Simpson rule with `n` nodes (`n` odd, ≥ 3) on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd node count ≥ 3");
    let h = (b - a) / (n - 1) as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Default node count for time quadrature on `[0, 1]`.
///
/// Sized so that integrands that are only piecewise-C³ in time (e.g. a
/// norm of a path composed with a polynomial-ramp time substitution, whose
/// third derivative jumps at the ramp junctions) still integrate to well
/// under 1e-8: the junction panels contribute O(h⁴) with a modest constant.
pub const TIME_NODES: usize = 513;

/// Simpson nodes-and-weights for `[a, b]`, for callers that need to evaluate
/// the integrand once per node and reuse the samples.
pub fn simpson_nodes(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 3 && n % 2 == 1);
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// Bisection for a sign change of `f` on `[lo, hi]`; the caller guarantees
/// `f(lo)` and `f(hi)` have opposite signs. Returns the root to `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (flo <= 0.0) == (fm <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// ∫_a^b |f| dt for piecewise-smooth `f`: scan for sign changes on a dense
/// grid, pin each crossing by bisection, then apply Simpson on each
/// single-sign piece.
pub fn integral_abs<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, scan: usize) -> f64 {
    let mut cuts = vec![a];
    let h = (b - a) / scan as f64;
    let mut prev = f(a);
    for i in 1..=scan {
        let t = a + i as f64 * h;
        let cur = f(t);
        if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
            cuts.push(bisect(f, t - h, t, 1e-14));
        }
        prev = cur;
    }
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] < 1e-15 {
            continue;
        }
        total += simpson(|t| f(t).abs(), w[0], w[1], 65);
    }
    total
}

/// Maximum of a smooth scalar function on `[a, b]`: dense scan followed by a
/// shrinking three-point refinement around the best sample. Deterministic.
pub fn max_scan<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scan: usize) -> f64 {
    let h = (b - a) / scan as f64;
    let mut best_t = a;
    let mut best = f(a);
    for i in 1..=scan {
        let t = a + i as f64 * h;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // local refinement: shrink a bracket around best_t
    let mut lo = (best_t - h).max(a);
    let mut hi = (best_t + h).min(b);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let f1 = f(m1);
        let f2 = f(m2);
        if f1 > best {
            best = f1;
        }
        if f2 > best {
            best = f2;
        }
        if f1 < f2 {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|t| 3.0 * t * t * t - t + 2.0, 0.0, 1.0, 3);
        let exact = 3.0 / 4.0 - 0.5 + 2.0;
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn simpson_converges_on_smooth_integrand() {
        let exact = 1.0 - (-1.0f64).exp();
        let coarse = (simpson(|t| (-t).exp(), 0.0, 1.0, 9) - exact).abs();
        let fine = (simpson(|t| (-t).exp(), 0.0, 1.0, 17) - exact).abs();
        assert!(fine < coarse / 10.0, "no fourth-order gain: {coarse} -> {fine}");
        // composite Simpson error ≤ (b−a)·h⁴·max|f⁗|/180 ≈ 8e-14 at 513 nodes
        assert!((simpson(|t| (-t).exp(), 0.0, 1.0, TIME_NODES) - exact).abs() < 1e-10);
    }

    #[test]
    fn nodes_match_direct_rule() {
        let direct = simpson(|t| (1.0 + t * t).ln(), 0.0, 2.0, 33);
        let via_nodes: f64 = simpson_nodes(0.0, 2.0, 33)
            .into_iter()
            .map(|(t, w)| w * (1.0 + t * t).ln())
            .sum();
        assert!((direct - via_nodes).abs() < 1e-14);
    }

    #[test]
    fn abs_integral_handles_sign_changes() {
        // ∫₀¹ |2t − 1| dt = 1/2, kink at t = 1/2.
        let v = integral_abs(|t| 2.0 * t - 1.0, 0.0, 1.0, 64);
        assert!((v - 0.5).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn scan_max_finds_interior_extremum() {
        // max of t(1−t) on [0,1] is 1/4 at t = 1/2.
        let v = max_scan(|t| t * (1.0 - t), 0.0, 1.0, 100);
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0, 1e-13);
        assert!((r - 2.0f64.sqrt()).abs() < 1e-12);
    }
}
