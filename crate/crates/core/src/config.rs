//! Run configuration loaded from TOML.

use crate::error::{Error, Result};
use crate::evolution::Scheme;
use crate::mesh::GeometryKind;
use crate::pressure::PressureBc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Seed for every sampled quantity (random states, power iterations).
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub pressure: PressureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub resolution: usize,
    /// Mesh file to load instead of generating one.
    pub mesh_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PressureConfig {
    pub bc: PressureBc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub linear_tol: f64,
    pub null_tol: f64,
    pub gap_tol: f64,
    pub assumption_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub samples: usize,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { kind: GeometryKind::AnnulusDisc, resolution: 8, mesh_file: None }
    }
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig { lambda: 1.0, mu: 1.0 }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { linear_tol: 1e-8, null_tol: 1e-9, gap_tol: 1e-6, assumption_tol: 1e-3 }
    }
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { t_final: 200.0, dt: 0.05, scheme: Scheme::Midpoint, samples: 5, record_every: 20 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("fsispectra-out"), formats: vec!["json".into(), "csv".into()] }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            geometry: GeometryConfig::default(),
            material: MaterialConfig::default(),
            pressure: PressureConfig::default(),
            solver: SolverConfig::default(),
            evolution: EvolutionConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Config::from_toml(&text).map_err(|e| match e {
            Error::Config(v) => Error::Config(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Collects every violated field rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let pos = |bad: &mut Vec<String>, name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        if self.geometry.resolution < 4 {
            bad.push(format!("geometry.resolution must be at least 4, got {}", self.geometry.resolution));
        }
        pos(&mut bad, "material.lambda", self.material.lambda);
        pos(&mut bad, "material.mu", self.material.mu);
        pos(&mut bad, "solver.linear_tol", self.solver.linear_tol);
        pos(&mut bad, "solver.null_tol", self.solver.null_tol);
        pos(&mut bad, "solver.gap_tol", self.solver.gap_tol);
        pos(&mut bad, "solver.assumption_tol", self.solver.assumption_tol);
        pos(&mut bad, "evolution.dt", self.evolution.dt);
        pos(&mut bad, "evolution.T", self.evolution.t_final);
        if self.evolution.dt >= self.evolution.t_final {
            bad.push(format!("evolution.dt ({}) must be smaller than evolution.T ({})", self.evolution.dt, self.evolution.t_final));
        }
        if self.evolution.samples == 0 {
            bad.push("evolution.samples must be at least 1".into());
        }
        for f in &self.output.formats {
            if f != "json" && f != "csv" {
                bad.push(format!("output.formats: unsupported format '{f}' (expected json or csv)"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// SHA-256 of the canonical TOML rendering, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = OutputConfig::default().directory;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = Config::from_toml("seed = 7\n[geometry]\nresolution = 6\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.geometry.resolution, 6);
        assert_eq!(c.material, MaterialConfig::default());
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "seed = 1\n[geometry]\nresolution = 2\n[solver]\ngap_tol = 0.0\n[evolution]\nT = 1.0\ndt = 2.0\n";
        let Err(Error::Config(v)) = Config::from_toml(text) else { panic!("expected config error") };
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v.iter().any(|m| m.contains("resolution")));
        assert!(v.iter().any(|m| m.contains("gap_tol")));
        assert!(v.iter().any(|m| m.contains("evolution.dt")));
    }

    #[test]
    fn seed_is_required_and_unknown_keys_rejected() {
        assert!(Config::from_toml("[geometry]\nresolution = 6\n").is_err());
        assert!(Config::from_toml("seed = 1\n[geometry]\nresolutoin = 6\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output.directory = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.material.mu = 2.0;
        assert_ne!(a.hash(), b.hash());
    }
}
