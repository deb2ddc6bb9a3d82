//! Run configuration shared by the command-line front end and the self test.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ChartPoint, Surface, SurfaceSpec};

/// Surface given either as shorthand (`"spheroid:1,1,3"`) or as a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceEntry {
    Short(String),
    Full(SurfaceSpec),
}

impl SurfaceEntry {
    pub fn spec(&self) -> Result<SurfaceSpec> {
        match self {
            SurfaceEntry::Short(s) => SurfaceSpec::parse(s),
            SurfaceEntry::Full(s) => Ok(s.clone()),
        }
    }
}

/// Everything a command can be parameterized by. Unused fields stay `None`.
///
/// Files are TOML with these keys at top level; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: Option<SurfaceEntry>,
    pub resolution: Option<usize>,
    /// Coarser resolution used to decide which eigenvalues have converged.
    pub coarse_resolution: Option<usize>,
    pub band_min: Option<f64>,
    pub band_max: Option<f64>,
    /// Take the band as the deepest `band_count` converged eigenvalues.
    pub band_count: Option<usize>,
    pub alpha: Option<f64>,
    /// Bump radius in units of the feature size.
    pub delta: Option<f64>,
    pub p: Option<String>,
    pub q: Option<String>,
    pub lambda: Option<f64>,
    pub omegas: Option<Vec<f64>>,
    pub omega: Option<f64>,
    pub mu0: Option<f64>,
    pub eps0: Option<f64>,
    pub mu1: Option<[f64; 2]>,
    pub eps1: Option<[f64; 2]>,
    pub tol: Option<f64>,
    pub t_end: Option<f64>,
    pub hamiltonian: Option<String>,
    pub xi: Option<[f64; 2]>,
    pub kappas: Option<[f64; 2]>,
    pub variant: Option<String>,
    pub j_min: Option<usize>,
    pub j_max: Option<usize>,
    pub angular_res: Option<usize>,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub direction: Option<[f64; 3]>,
    pub source: Option<[f64; 3]>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: RunConfig) {
        let dst = self;
        let src = other;
        overlay!(dst, src; surface, resolution, coarse_resolution, band_min, band_max, band_count, alpha, delta, p, q,
            lambda, omegas, omega, mu0, eps0, mu1, eps1, tol, t_end, hamiltonian, xi, kappas, variant, j_min, j_max,
            angular_res, radius, samples, direction, source, out, seed);
    }

    /// Hex SHA-256 of the canonical JSON form. The output path is left out so
    /// that identical runs written to different files share a digest.
    #[must_use]
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        if let Some(SurfaceEntry::Short(s)) = &c.surface {
            if let Ok(spec) = SurfaceSpec::parse(s) {
                c.surface = Some(SurfaceEntry::Full(spec));
            }
        }
        let text = serde_json::to_string(&c).unwrap_or_default();
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn surface(&self) -> Result<Surface> {
        match &self.surface {
            Some(s) => Surface::new(s.spec()?),
            None => invalid("no surface given"),
        }
    }

    pub fn resolution_or(&self, default: usize) -> usize {
        self.resolution.unwrap_or(default)
    }

    /// Checks ranges of the fields that are set.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.surface {
            s.spec()?;
        }
        if let Some(r) = self.resolution {
            if !(8..=256).contains(&r) {
                return invalid(format!("resolution {r} outside [8, 256]"));
            }
        }
        if let (Some(c), Some(r)) = (self.coarse_resolution, self.resolution) {
            if c >= r {
                return invalid("coarse_resolution must be below resolution");
            }
        }
        if let (Some(a), Some(b)) = (self.band_min, self.band_max) {
            if a >= b {
                return invalid("band_min must be below band_max");
            }
        }
        for (name, v) in [("tol", self.tol), ("delta", self.delta), ("t_end", self.t_end), ("radius", self.radius)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return invalid(format!("{name} must be positive"));
                }
            }
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return invalid("alpha must be finite");
            }
        }
        if let Some(w) = &self.omegas {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return invalid("omegas must be a nonempty list of positive numbers");
            }
        }
        if let Some(w) = self.omega {
            if !(w >= 0.0 && w.is_finite()) {
                return invalid("omega must be nonnegative");
            }
        }
        Ok(())
    }
}

/// Resolves `pole`, `equator` or explicit chart coordinates `chart:u1,u2`.
pub fn parse_point(surface: &Surface, text: &str) -> Result<ChartPoint> {
    if let Some((chart, coords)) = text.split_once(':') {
        let chart: usize = chart.trim().parse().map_err(|_| Error::Validation(format!("bad chart index in '{text}'")))?;
        if chart > 1 {
            return invalid("chart index must be 0 or 1");
        }
        let u: Vec<f64> = coords
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Validation(format!("bad coordinate in '{text}'"))))
            .collect::<Result<_>>()?;
        if u.len() != 2 || u.iter().any(|x| !x.is_finite()) {
            return invalid(format!("'{text}' needs two finite chart coordinates"));
        }
        return Ok(ChartPoint::new(chart, [u[0], u[1]]));
    }
    surface.named_point(text.trim())
}
