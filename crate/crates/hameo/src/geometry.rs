//! Surfaces, charts, sample grids, and distances.
//!
//! Two model surfaces are supported, each with a fixed area form:
//!
//! * the closed disc of radius `R` in the plane, with the standard area form
//!   (in polar coordinates `r dr ∧ dθ`, equivalently `du ∧ dθ` for
//!   `u = r²/2`);
//! * the round unit sphere, described away from the poles by cylinder
//!   coordinates `(z, φ)` in which the area form is `dz ∧ dφ` (the classical
//!   equal-area projection).
//!
//! All internal computation uses ambient coordinates — points in the plane
//! `z = 0` for the disc, unit vectors in `ℝ³` for the sphere — so that flows,
//! distances and interpolation never hit chart seams. The chart types exist
//! for I/O and for evaluating chart-coordinate expressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the polar caps excluded from cylinder-chart evaluation.
/// Chart quantities (`φ`, `∂/∂φ`) degenerate at the poles; points with
/// `|z| > 1 - POLE_MARGIN` are rejected by chart conversions. Ambient-space
/// computation is unaffected.
pub const POLE_MARGIN: f64 = 1e-6;

/// A point in ambient coordinates. Disc points live in the plane `z = 0`;
/// sphere points are unit vectors.
pub type Vec3 = [f64; 3];

/// Small fixed-size vector helpers; enough linear algebra for this crate
/// without pulling a matrix library into the hot path.
pub mod vec3 {
    use super::Vec3;

    pub fn add(a: Vec3, b: Vec3) -> Vec3 {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn scale(s: f64, a: Vec3) -> Vec3 {
        [s * a[0], s * a[1], s * a[2]]
    }

    pub fn dot(a: Vec3, b: Vec3) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(a: Vec3) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn dist(a: Vec3, b: Vec3) -> f64 {
        norm(sub(a, b))
    }

    pub fn normalize(a: Vec3) -> Vec3 {
        let n = norm(a);
        if n == 0.0 {
            a
        } else {
            scale(1.0 / n, a)
        }
    }

    /// Rotation of `p` about the unit axis `axis` by `angle` (Rodrigues).
    pub fn rotate_about(p: Vec3, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        let k_cross_p = cross(axis, p);
        let k_dot_p = dot(axis, p);
        add(
            add(scale(c, p), scale(s, k_cross_p)),
            scale(k_dot_p * (1.0 - c), axis),
        )
    }

    pub fn is_finite(a: Vec3) -> bool {
        a[0].is_finite() && a[1].is_finite() && a[2].is_finite()
    }
}

/// The model surface an experiment runs on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "surface", rename_all = "lowercase")]
pub enum Surface {
    /// Closed round disc of the given radius, centred at the origin.
    Disc { radius: f64 },
    /// Round unit sphere.
    Sphere,
}

impl Surface {
    /// Unit disc.
    pub fn unit_disc() -> Surface {
        Surface::Disc { radius: 1.0 }
    }

    pub fn is_disc(&self) -> bool {
        matches!(self, Surface::Disc { .. })
    }

    /// Total area: `πR²` for the disc, `4π` for the sphere.
    pub fn total_area(&self) -> f64 {
        match self {
            Surface::Disc { radius } => std::f64::consts::PI * radius * radius,
            Surface::Sphere => 4.0 * std::f64::consts::PI,
        }
    }

    /// Whether an ambient point lies on (or in) the surface, with a small
    /// tolerance for integrator round-off.
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Surface::Disc { radius } => {
                p[2] == 0.0 && (p[0] * p[0] + p[1] * p[1]).sqrt() <= radius * (1.0 + 1e-12)
            }
            Surface::Sphere => (vec3::norm(p) - 1.0).abs() <= 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Surface::Disc { radius } = self {
            if !radius.is_finite() || *radius <= 0.0 || *radius > 1e3 {
                return Err(Error::Range(format!(
                    "disc radius must be in (0, 1e3], got {radius}"
                )));
            }
        }
        Ok(())
    }
}

/// A surface point in one of the supported charts. `Polar` and `Euclidean`
/// describe disc points, `Cylinder` describes sphere points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "lowercase")]
pub enum SurfacePoint {
    Polar { r: f64, theta: f64 },
    Euclidean { x: f64, y: f64 },
    Cylinder { z: f64, phi: f64 },
}

/// Reduce an angle to `[0, 2π)`.
pub fn reduce_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    // rem_euclid can return exactly 2π after rounding for tiny negative input
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

impl SurfacePoint {
    /// Canonical chart reduction: angles into `[0, 2π)`, with domain checks
    /// against the given surface (disc radius bound, pole margin).
    pub fn reduce(&self, surface: Surface) -> Result<SurfacePoint> {
        match (*self, surface) {
            (SurfacePoint::Polar { r, theta }, Surface::Disc { radius }) => {
                if !r.is_finite() || r < 0.0 || r > radius * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "polar radius {r} outside disc of radius {radius}"
                    )));
                }
                Ok(SurfacePoint::Polar {
                    r,
                    theta: reduce_angle(theta),
                })
            }
            (SurfacePoint::Euclidean { x, y }, Surface::Disc { radius }) => {
                let r = (x * x + y * y).sqrt();
                if !r.is_finite() || r > radius * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "euclidean point ({x}, {y}) outside disc of radius {radius}"
                    )));
                }
                Ok(*self)
            }
            (SurfacePoint::Cylinder { z, phi }, Surface::Sphere) => {
                if !z.is_finite() || z.abs() > 1.0 - POLE_MARGIN {
                    return Err(Error::Domain(format!(
                        "cylinder height {z} inside the excluded pole caps (|z| > {})",
                        1.0 - POLE_MARGIN
                    )));
                }
                Ok(SurfacePoint::Cylinder {
                    z,
                    phi: reduce_angle(phi),
                })
            }
            (p, s) => Err(Error::Domain(format!(
                "chart {p:?} does not belong to surface {s:?}"
            ))),
        }
    }

    /// Ambient coordinates of the point (disc: plane `z = 0`; sphere: unit
    /// vector).
    pub fn to_ambient(&self, surface: Surface) -> Result<Vec3> {
        let reduced = self.reduce(surface)?;
        Ok(match reduced {
            SurfacePoint::Polar { r, theta } => [r * theta.cos(), r * theta.sin(), 0.0],
            SurfacePoint::Euclidean { x, y } => [x, y, 0.0],
            SurfacePoint::Cylinder { z, phi } => {
                let rho = (1.0 - z * z).max(0.0).sqrt();
                [rho * phi.cos(), rho * phi.sin(), z]
            }
        })
    }

    /// Canonical chart for an ambient point: polar for the disc, cylinder for
    /// the sphere. Sphere points inside the pole caps are rejected (the chart
    /// is meaningless there); use ambient coordinates instead.
    pub fn from_ambient(surface: Surface, p: Vec3) -> Result<SurfacePoint> {
        match surface {
            Surface::Disc { radius } => {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if r > radius * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "ambient point at radius {r} outside disc of radius {radius}"
                    )));
                }
                Ok(SurfacePoint::Polar {
                    r,
                    theta: reduce_angle(p[1].atan2(p[0])),
                })
            }
            Surface::Sphere => {
                let q = vec3::normalize(p);
                if q[2].abs() > 1.0 - POLE_MARGIN {
                    return Err(Error::Domain(format!(
                        "sphere point with z = {} lies in the excluded pole cap",
                        q[2]
                    )));
                }
                Ok(SurfacePoint::Cylinder {
                    z: q[2],
                    phi: reduce_angle(q[1].atan2(q[0])),
                })
            }
        }
    }
}

/// Ambient (chordal) distance between two surface points. Chart-independent:
/// straight-line distance in the plane for the disc, chord length in `ℝ³`
/// for the sphere. Satisfies the metric axioms exactly.
pub fn point_distance(surface: Surface, a: &SurfacePoint, b: &SurfacePoint) -> Result<f64> {
    Ok(vec3::dist(a.to_ambient(surface)?, b.to_ambient(surface)?))
}

/// An equal-weight area sample of the surface, used for quadrature, for
/// flow verification grids, and for oscillation scans.
///
/// Midpoint rule in the area-linear chart coordinates: `(u, θ)` with
/// `u = r²/2` on the disc, `(z, φ)` on the sphere. Because the area density
/// is constant in these coordinates, every cell carries the same weight and
/// the weights sum to the exact total area.
#[derive(Clone, Debug)]
pub struct Grid {
    pub surface: Surface,
    /// Cells along the radial/height coordinate.
    pub n1: usize,
    /// Cells along the angular coordinate.
    pub n2: usize,
    /// Cell-centre points, row-major: index `i * n2 + j` is radial/height
    /// cell `i`, angular cell `j`.
    pub points: Vec<Vec3>,
    /// Chart coordinates of the cell centres (`(u, θ)` or `(z, φ)`).
    pub coords: Vec<(f64, f64)>,
    /// Quadrature weight per cell (constant).
    pub cell_weight: f64,
}

/// Minimum admissible cells per side. Coarser grids make every tolerance in
/// the crate meaningless.
pub const MIN_GRID_SIDE: usize = 8;
pub const MAX_GRID_SIDE: usize = 4096;

/// Build the standard verification grid at resolution `n1 × n2`.
pub fn sample_grid(surface: Surface, n1: usize, n2: usize) -> Result<Grid> {
    surface.validate()?;
    for n in [n1, n2] {
        if !(MIN_GRID_SIDE..=MAX_GRID_SIDE).contains(&n) {
            return Err(Error::Range(format!(
                "grid side {n} outside [{MIN_GRID_SIDE}, {MAX_GRID_SIDE}]"
            )));
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut points = Vec::with_capacity(n1 * n2);
    let mut coords = Vec::with_capacity(n1 * n2);
    let cell_weight;
    match surface {
        Surface::Disc { radius } => {
            let u_max = radius * radius / 2.0;
            let du = u_max / n1 as f64;
            let dth = two_pi / n2 as f64;
            cell_weight = du * dth;
            for i in 0..n1 {
                let u = (i as f64 + 0.5) * du;
                let r = (2.0 * u).sqrt();
                for j in 0..n2 {
                    let th = (j as f64 + 0.5) * dth;
                    points.push([r * th.cos(), r * th.sin(), 0.0]);
                    coords.push((u, th));
                }
            }
        }
        Surface::Sphere => {
            let dz = 2.0 / n1 as f64;
            let dph = two_pi / n2 as f64;
            cell_weight = dz * dph;
            for i in 0..n1 {
                let z = -1.0 + (i as f64 + 0.5) * dz;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                for j in 0..n2 {
                    let ph = (j as f64 + 0.5) * dph;
                    points.push([rho * ph.cos(), rho * ph.sin(), z]);
                    coords.push((z, ph));
                }
            }
        }
    }
    Ok(Grid {
        surface,
        n1,
        n2,
        points,
        coords,
        cell_weight,
    })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total quadrature mass (equals the surface area exactly).
    pub fn total_weight(&self) -> f64 {
        self.cell_weight * self.len() as f64
    }

    /// Quadrature of `f` over the surface. Deterministic: the parallel map
    /// preserves index order and the reduction is a sequential sum.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        use rayon::prelude::*;
        let vals: Vec<f64> = self.points.par_iter().map(|&p| f(p)).collect();
        self.cell_weight * vals.iter().sum::<f64>()
    }

    /// Mean value of `f` against the area measure.
    pub fn mean<F>(&self, f: F) -> f64
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        self.integrate(f) / self.surface.total_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn grid_weights_sum_to_exact_area() {
        for (surface, area) in [
            (Surface::unit_disc(), PI),
            (Surface::Disc { radius: 0.3 }, 0.09 * PI),
            (Surface::Sphere, 4.0 * PI),
        ] {
            let g = sample_grid(surface, 32, 48).unwrap();
            let total = g.total_weight();
            assert!(
                (total - area).abs() <= 1e-10 * area,
                "area mismatch: {total} vs {area}"
            );
        }
    }

    #[test]
    fn constant_function_integrates_to_area() {
        let g = sample_grid(Surface::Sphere, 16, 16).unwrap();
        let v = g.integrate(|_| 1.0);
        assert!((v - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn sphere_height_has_zero_mean_by_symmetry() {
        let g = sample_grid(Surface::Sphere, 32, 32).unwrap();
        let m = g.mean(|p| p[2]);
        assert!(m.abs() < 1e-14, "grid mean of z should vanish, got {m}");
    }

    #[test]
    fn disc_moment_matches_closed_form() {
        // ∫_D r² dA over the unit disc = π/2; midpoint in (u, θ) integrates
        // r² = 2u exactly (linear in u).
        let g = sample_grid(Surface::unit_disc(), 16, 16).unwrap();
        let v = g.integrate(|p| p[0] * p[0] + p[1] * p[1]);
        assert!((v - PI / 2.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn chart_roundtrip_disc() {
        let surface = Surface::unit_disc();
        let p = SurfacePoint::Polar {
            r: 0.7,
            theta: 2.0 * PI + 1.25, // reduces to 1.25
        };
        let q = p.reduce(surface).unwrap();
        match q {
            SurfacePoint::Polar { r, theta } => {
                assert!((r - 0.7).abs() < 1e-15);
                assert!((theta - 1.25).abs() < 1e-12);
            }
            _ => panic!("chart kind changed"),
        }
        let amb = p.to_ambient(surface).unwrap();
        let back = SurfacePoint::from_ambient(surface, amb).unwrap();
        let d = point_distance(surface, &p, &back).unwrap();
        assert!(d < 1e-14);
    }

    #[test]
    fn chart_roundtrip_sphere() {
        let surface = Surface::Sphere;
        let p = SurfacePoint::Cylinder { z: -0.4, phi: 5.9 };
        let amb = p.to_ambient(surface).unwrap();
        assert!((vec3::norm(amb) - 1.0).abs() < 1e-15);
        let back = SurfacePoint::from_ambient(surface, amb).unwrap();
        let d = point_distance(surface, &p, &back).unwrap();
        assert!(d < 1e-14);
    }

    #[test]
    fn pole_caps_are_rejected_by_charts() {
        let p = SurfacePoint::Cylinder { z: 1.0 - 1e-9, phi: 0.0 };
        assert!(p.reduce(Surface::Sphere).is_err());
        let north = [0.0, 0.0, 1.0];
        assert!(SurfacePoint::from_ambient(Surface::Sphere, north).is_err());
    }

    #[test]
    fn points_outside_disc_are_rejected() {
        let surface = Surface::unit_disc();
        let p = SurfacePoint::Polar { r: 1.2, theta: 0.0 };
        assert!(p.reduce(surface).is_err());
        let e = SurfacePoint::Euclidean { x: 0.9, y: 0.9 };
        assert!(e.reduce(surface).is_err());
    }

    #[test]
    fn distance_metric_axioms_on_samples() {
        let surface = Surface::Sphere;
        let pts = [
            SurfacePoint::Cylinder { z: 0.0, phi: 0.0 },
            SurfacePoint::Cylinder { z: 0.5, phi: 1.0 },
            SurfacePoint::Cylinder { z: -0.7, phi: 4.0 },
        ];
        for a in &pts {
            assert_eq!(point_distance(surface, a, a).unwrap(), 0.0);
            for b in &pts {
                let dab = point_distance(surface, a, b).unwrap();
                let dba = point_distance(surface, b, a).unwrap();
                assert_eq!(dab, dba);
                for c in &pts {
                    let dac = point_distance(surface, a, c).unwrap();
                    let dcb = point_distance(surface, c, b).unwrap();
                    assert!(dab <= dac + dcb + 1e-15);
                }
            }
        }
    }

    #[test]
    fn grid_resolution_bounds_are_enforced() {
        assert!(sample_grid(Surface::Sphere, 4, 32).is_err());
        assert!(sample_grid(Surface::Sphere, 32, 8192).is_err());
        assert!(sample_grid(Surface::Disc { radius: -1.0 }, 32, 32).is_err());
    }

    #[test]
    fn rotation_helper_is_orthogonal() {
        let p = vec3::normalize([0.3, -0.5, 0.81]);
        let axis = vec3::normalize([1.0, 2.0, -0.5]);
        let q = vec3::rotate_about(p, axis, 2.3);
        assert!((vec3::norm(q) - 1.0).abs() < 1e-14);
        let back = vec3::rotate_about(q, axis, -2.3);
        assert!(vec3::dist(p, back) < 1e-14);
    }
}
