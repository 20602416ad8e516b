use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_energy, Direction, Energy, LatticePoint, Potential, SupportBox};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variables that override tolerance knobs.
pub const ENV_DELTA_MIN: &str = "PHASELESS_DELTA_MIN";
pub const ENV_GREEN_TOL: &str = "PHASELESS_GREEN_TOL";
pub const ENV_SCREEN_DELTA: &str = "PHASELESS_SCREEN_DELTA";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    pub dim: usize,
    pub energy: f64,
    pub seed: u64,
    pub potential: PotentialSource,
    /// Direction of the incident wave (normalised on use).
    pub incident: Vec<f64>,
    #[serde(default)]
    pub directions: DirectionSpec,
    /// Offset between the two measurement points (d ≥ 2).
    #[serde(default)]
    pub zeta: Vec<i64>,
    pub s_grid: GeometricGrid,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSource {
    File {
        path: PathBuf,
    },
    Random {
        lo: Vec<i64>,
        hi: Vec<i64>,
        range: [f64; 2],
        #[serde(default)]
        complex: bool,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    /// Explicit directions (normalised on use).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<Vec<f64>>,
    /// Number of seeded random directions passing the exceptional-set screen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl GeometricGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start * self.factor.powi(i as i32))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// Two-point route for d ≥ 2, three-point route for d = 1.
    #[default]
    Auto,
    Prop24,
    Prop25,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub delta_min: f64,
    pub green_tol: f64,
    pub verify: bool,
    /// Directions with dist((k - k*(ω))·ζ, πZ) below this are skipped.
    pub screen_delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            delta_min: crate::recover::DELTA_MIN,
            green_tol: 1e-9,
            verify: true,
            screen_delta: 0.1,
        }
    }
}

impl Tolerances {
    /// Applies the documented environment overrides.
    pub fn with_env(&self) -> Result<Tolerances> {
        let mut t = self.clone();
        let read = |name: &str| -> Result<Option<f64>> {
            match std::env::var(name) {
                Ok(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{name}={v:?} is not a number"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(v) = read(ENV_DELTA_MIN)? {
            t.delta_min = v;
        }
        if let Some(v) = read(ENV_GREEN_TOL)? {
            t.green_tol = v;
        }
        if let Some(v) = read(ENV_SCREEN_DELTA)? {
            t.screen_delta = v;
        }
        Ok(t)
    }
}

/// Grid and fit order for the reference amplitude; defaults depend on d.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_passing: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative potential paths are resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let PotentialSource::File { path: p } = &mut cfg.potential {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dimension {} is not in 1..=3", self.dim));
        }
        let e = self.energy()?;
        if self.dim >= 2 && !e.convex_regime() {
            return Err(Error::NonConvexRegime {
                energy: self.energy,
                dim: self.dim,
            });
        }
        if self.dim == 1 && self.energy == 0.0 {
            return bad("every one-dimensional measurement geometry is degenerate at E = 0".into());
        }
        if self.incident.len() != self.dim {
            return bad(format!(
                "incident has {} components, expected {}",
                self.incident.len(),
                self.dim
            ));
        }
        Direction::new(self.incident.clone())?;
        if self.dim >= 2 {
            if self.zeta.len() != self.dim || self.zeta.iter().all(|&z| z == 0) {
                return bad("zeta must be a non-zero integer vector of the configured dimension".into());
            }
            let n = self.directions.list.len() + self.directions.count.unwrap_or(0);
            if n == 0 {
                return bad("the direction list is empty".into());
            }
            for w in &self.directions.list {
                if w.len() != self.dim {
                    return bad(format!("direction {w:?} has the wrong dimension"));
                }
                Direction::new(w.clone())?;
            }
        }
        if self.method != MethodChoice::Auto && self.dim != 1 {
            return bad("prop24/prop25 apply to d = 1 only".into());
        }
        let g = &self.s_grid;
        if !(g.start > 0.0 && g.factor > 1.0 && g.count > 0) {
            return bad("s_grid needs start > 0, factor > 1, count > 0".into());
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative".into());
        }
        let t = &self.tolerances;
        if !(t.delta_min > 0.0 && t.green_tol > 0.0 && t.screen_delta >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let Some([lo, hi]) = self.expect.slope_window {
            if !(lo < hi) {
                return bad("slope_window must be increasing".into());
            }
        }
        match &self.potential {
            PotentialSource::Random { lo, hi, range, .. } => {
                if lo.len() != self.dim || hi.len() != self.dim {
                    return bad("random potential box has the wrong dimension".into());
                }
                SupportBox::new(lo.clone(), hi.clone())?;
                if !(range[0] < range[1]) {
                    return bad("random potential range is empty".into());
                }
            }
            PotentialSource::File { .. } => {}
        }
        Ok(())
    }

    pub fn energy(&self) -> Result<Energy> {
        check_energy(self.energy, self.dim)
    }

    /// Loads or generates the potential. Random potentials use a ChaCha
    /// stream seeded with `seed`.
    pub fn potential(&self) -> Result<Potential> {
        let v = match &self.potential {
            PotentialSource::File { path } => Potential::load(path)?,
            PotentialSource::Random { lo, hi, range, complex } => {
                let b = SupportBox::new(lo.clone(), hi.clone())?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Potential::random(&b, (range[0], range[1]), *complex, &mut rng)?
            }
        };
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(v)
    }

    pub fn zeta_point(&self) -> LatticePoint {
        LatticePoint::new(self.zeta.clone())
    }
}

/// Warning text for complex potentials.
pub const COMPLEX_POTENTIAL_WARNING: &str = "warning: the potential is complex-valued; the outgoing solution is \
only guaranteed to exist for real potentials or away from spectral singularities";
