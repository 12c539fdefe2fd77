//! Experiment configuration: strict JSON descriptions of surfaces,
//! Hamiltonians, grids, and integrator settings. Unknown keys are
//! rejected and every numeric parameter is range-checked before any
//! computation starts, so a bad config fails at parse time with a
//! line/column diagnostic.

use serde::{Deserialize, Serialize};

use crate::calabi::{twist_generating_ham, RadialProfile};
use crate::error::{Error, Result};
use crate::flow::StepControl;
use crate::geometry::Surface;
use crate::hamiltonian::{Hamiltonian, TimeWeight};

/// Seed used by randomized suites when none is given; fixed so CI runs
/// are reproducible.
pub const DEFAULT_SEED: u64 = 7;

/// Bounds accepted for grid resolutions.
pub const GRID_RANGE: (usize, usize) = (8, 4096);
/// Bounds accepted for frame counts.
pub const FRAMES_RANGE: (usize, usize) = (2, 4097);

/// Strict reader for internally tagged JSON objects. The serde derive
/// cannot reject unknown keys in internally tagged enums, so the tagged
/// specs below deserialize through this helper: the tag picks the
/// variant, each field is consumed by name, and leftovers are errors.
struct StrictMap {
    tag: String,
    tag_key: &'static str,
    map: serde_json::Map<String, serde_json::Value>,
}

impl StrictMap {
    fn read<'de, D: serde::Deserializer<'de>>(
        d: D,
        tag_key: &'static str,
    ) -> std::result::Result<StrictMap, D::Error> {
        use serde::de::Error as _;
        let mut map = serde_json::Map::deserialize(d)?;
        let tag = match map.remove(tag_key) {
            Some(serde_json::Value::String(s)) => s,
            Some(_) => return Err(D::Error::custom(format!("'{tag_key}' must be a string"))),
            None => return Err(D::Error::custom(format!("missing '{tag_key}' tag"))),
        };
        Ok(StrictMap { tag, tag_key, map })
    }

    fn take<T: serde::de::DeserializeOwned, E: serde::de::Error>(
        &mut self,
        key: &str,
    ) -> std::result::Result<T, E> {
        let value = self.map.remove(key).ok_or_else(|| {
            E::custom(format!("'{}' requires field '{key}'", self.tag))
        })?;
        serde_json::from_value(value)
            .map_err(|e| E::custom(format!("field '{key}' of '{}': {e}", self.tag)))
    }

    fn take_optional<T: serde::de::DeserializeOwned, E: serde::de::Error>(
        &mut self,
        key: &str,
    ) -> std::result::Result<Option<T>, E> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(value) => serde_json::from_value(value)
                .map(Some)
                .map_err(|e| E::custom(format!("field '{key}' of '{}': {e}", self.tag))),
        }
    }

    fn finish<T, E: serde::de::Error>(self, spec: T) -> std::result::Result<T, E> {
        if let Some(key) = self.map.keys().next() {
            return Err(E::custom(format!(
                "unknown field '{key}' for {} '{}'",
                self.tag_key, self.tag
            )));
        }
        Ok(spec)
    }

    fn unknown_tag<T, E: serde::de::Error>(&self, allowed: &str) -> std::result::Result<T, E> {
        Err(E::custom(format!(
            "unknown {} '{}' (expected one of: {allowed})",
            self.tag_key, self.tag
        )))
    }
}

/// Which surface an experiment runs on, as the plain string the config
/// schema uses; a disc's radius is the sibling `radius` key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceName {
    Disc,
    Sphere,
}

/// Time dependence of a named Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    One,
    Poly { coeffs: Vec<f64> },
    SinSq { freq: f64, amp: f64 },
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut m = StrictMap::read(d, "kind")?;
        let spec = match m.tag.as_str() {
            "one" => WeightSpec::One,
            "poly" => WeightSpec::Poly { coeffs: m.take("coeffs")? },
            "sin_sq" => WeightSpec::SinSq { freq: m.take("freq")?, amp: m.take("amp")? },
            _ => return m.unknown_tag("one, poly, sin_sq"),
        };
        m.finish(spec)
    }
}

impl WeightSpec {
    pub fn build(&self) -> TimeWeight {
        match self {
            WeightSpec::One => TimeWeight::One,
            WeightSpec::Poly { coeffs } => TimeWeight::Poly(coeffs.clone()),
            WeightSpec::SinSq { freq, amp } => TimeWeight::SinSq { freq: *freq, amp: *amp },
        }
    }
}

/// A radial bump profile for twist constructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub lo: f64,
    pub hi: f64,
    pub amp: f64,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<RadialProfile> {
        RadialProfile::bump(self.lo, self.hi, self.amp)
    }
}

/// A Hamiltonian, either as a named builtin with parameters or as an
/// arithmetic expression in the surface's coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "ham", rename_all = "snake_case")]
pub enum HamSpec {
    SphereHeight,
    AxisProfile {
        axis: [f64; 3],
        coeffs: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        weight: Option<WeightSpec>,
    },
    Twist { profile: ProfileSpec },
    BumpTwist {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    Shear {
        strength: f64,
        half: f64,
        taper: f64,
    },
    Scaled { c: f64, inner: Box<HamSpec> },
    Expr { formula: String },
}

impl<'de> Deserialize<'de> for HamSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut m = StrictMap::read(d, "ham")?;
        let spec = match m.tag.as_str() {
            "sphere_height" => HamSpec::SphereHeight,
            "axis_profile" => HamSpec::AxisProfile {
                axis: m.take("axis")?,
                coeffs: m.take("coeffs")?,
                weight: m.take_optional("weight")?,
            },
            "twist" => HamSpec::Twist { profile: m.take("profile")? },
            "bump_twist" => HamSpec::BumpTwist {
                center: m.take("center")?,
                radius: m.take("radius")?,
                amplitude: m.take("amplitude")?,
            },
            "shear" => HamSpec::Shear {
                strength: m.take("strength")?,
                half: m.take("half")?,
                taper: m.take("taper")?,
            },
            "scaled" => HamSpec::Scaled { c: m.take("c")?, inner: m.take("inner")? },
            "expr" => HamSpec::Expr { formula: m.take("formula")? },
            _ => {
                return m.unknown_tag(
                    "sphere_height, axis_profile, twist, bump_twist, shear, scaled, expr",
                )
            }
        };
        m.finish(spec)
    }
}

impl HamSpec {
    /// Build the Hamiltonian on `surface`, rejecting combinations that
    /// belong to the other surface as configuration errors.
    pub fn build(&self, surface: Surface) -> Result<Hamiltonian> {
        let want_sphere = |what: &str| -> Result<()> {
            if surface == Surface::Sphere {
                Ok(())
            } else {
                Err(Error::Config(format!("'{what}' is a sphere Hamiltonian")))
            }
        };
        let want_disc = |what: &str| -> Result<()> {
            if matches!(surface, Surface::Disc { .. }) {
                Ok(())
            } else {
                Err(Error::Config(format!("'{what}' is a disc Hamiltonian")))
            }
        };
        match self {
            HamSpec::SphereHeight => {
                want_sphere("sphere_height")?;
                Ok(Hamiltonian::sphere_height())
            }
            HamSpec::AxisProfile { axis, coeffs, weight } => {
                want_sphere("axis_profile")?;
                let w = weight.as_ref().map_or(TimeWeight::One, WeightSpec::build);
                Hamiltonian::axis_profile(*axis, coeffs, w)
            }
            HamSpec::Twist { profile } => {
                want_disc("twist")?;
                if surface != Surface::unit_disc() {
                    return Err(Error::Config(
                        "twist generators are built on the unit disc".into(),
                    ));
                }
                Ok(twist_generating_ham(&profile.build()?))
            }
            HamSpec::BumpTwist { center, radius, amplitude } => {
                want_disc("bump_twist")?;
                Hamiltonian::bump_twist(surface, *center, *radius, *amplitude)
            }
            HamSpec::Shear { strength, half, taper } => {
                want_disc("shear")?;
                if surface != Surface::unit_disc() {
                    return Err(Error::Config("shears are built on the unit disc".into()));
                }
                Hamiltonian::shear(*strength, *half, *taper)
            }
            HamSpec::Scaled { c, inner } => {
                let h = inner.build(surface)?;
                Hamiltonian::scaled(*c, &h)
            }
            HamSpec::Expr { formula } => Hamiltonian::from_expr(surface, formula),
        }
    }
}

/// A complete experiment description. Fields beyond `surface` are
/// optional so one schema serves every subcommand; each subcommand states
/// which fields it requires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub surface: SurfaceName,
    /// Disc radius; only meaningful with `"surface": "disc"` (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ham: Option<HamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<HamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn new(surface: SurfaceName) -> ExperimentConfig {
        ExperimentConfig {
            surface,
            radius: None,
            ham: None,
            second: None,
            grid: None,
            step: None,
            frames: None,
            seed: None,
            out: None,
        }
    }

    /// The surface the config describes, with the radius applied.
    pub fn surface(&self) -> Result<Surface> {
        let surface = match (self.surface, self.radius) {
            (SurfaceName::Disc, radius) => Surface::Disc { radius: radius.unwrap_or(1.0) },
            (SurfaceName::Sphere, None) => Surface::Sphere,
            (SurfaceName::Sphere, Some(_)) => {
                return Err(Error::Config("'radius' only applies to the disc".into()))
            }
        };
        surface.validate()?;
        Ok(surface)
    }

    /// Range checks beyond what the type system enforces. Called by the
    /// parsers, so a loaded config is always validated.
    pub fn validate(&self) -> Result<()> {
        self.surface()?;
        if let Some((n1, n2)) = self.grid {
            for n in [n1, n2] {
                if !(GRID_RANGE.0..=GRID_RANGE.1).contains(&n) {
                    return Err(Error::Range(format!(
                        "grid resolution {n} outside {}..={}",
                        GRID_RANGE.0, GRID_RANGE.1
                    )));
                }
            }
        }
        if let Some(step) = self.step {
            if !(step.is_finite() && 0.0 < step && step <= 0.5) {
                return Err(Error::Range(format!("step {step} outside (0, 0.5]")));
            }
        }
        if let Some(frames) = self.frames {
            if !(FRAMES_RANGE.0..=FRAMES_RANGE.1).contains(&frames) {
                return Err(Error::Range(format!(
                    "frames {frames} outside {}..={}",
                    FRAMES_RANGE.0, FRAMES_RANGE.1
                )));
            }
        }
        Ok(())
    }

    /// Integrator settings with defaults filled in.
    pub fn step_control(&self) -> StepControl {
        let default = StepControl::default();
        StepControl {
            step: self.step.unwrap_or(default.step),
            frames: self.frames.unwrap_or(default.frames),
        }
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        self.grid.unwrap_or((24, 24))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Canonical serialization used for hashing and determinism checks:
    /// field order is fixed by the struct, unset fields are omitted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }
}

/// Parse and validate a config from JSON text. Syntax and schema errors
/// carry the line/column diagnostic from the JSON parser.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    config.validate()?;
    Ok(config)
}

/// Read, parse, and validate a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn parse_error(text: &str, e: &serde_json::Error) -> Error {
    let (line, column) = (e.line(), e.column());
    let offset = text
        .lines()
        .take(line.saturating_sub(1))
        .map(|l| l.len() + 1)
        .sum::<usize>()
        + column.saturating_sub(1);
    Error::Parse {
        offset,
        message: format!("config line {line}, column {column}: {e}"),
    }
}
