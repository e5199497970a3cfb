//! Run configuration: the TOML document a run is driven by, and the
//! predefined configuration for every named suite.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinboard_core::models::{entropy_profile, EntropyFamily, Lattice, ModelSpec, SignMode};
use spinboard_core::SpinMagnitude;

use crate::error::CliError;

/// Names accepted by `--suite`, in the order they are listed to users.
pub const SUITES: [&str; 11] = [
    "coherent",
    "symbols",
    "sandwich",
    "berezin",
    "chessboard-q",
    "chessboard-c",
    "frakp",
    "contours",
    "entropy",
    "spinwave",
    "scan",
];

/// One of the five model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Heisenberg {
        j1: f64,
        j2: f64,
    },
    Xy {
        p: usize,
        #[serde(default)]
        sign: SignMode,
    },
    Nematic {
        p: usize,
    },
    Compass {},
    Onetwenty {},
}

impl ModelConfig {
    pub fn label(&self) -> String {
        match self {
            ModelConfig::Heisenberg { j1, j2 } => format!("heisenberg(j1={j1},j2={j2})"),
            ModelConfig::Xy { p, sign } => format!(
                "xy(p={p},{})",
                if *sign == SignMode::Plus {
                    "plus"
                } else {
                    "minus"
                }
            ),
            ModelConfig::Nematic { p } => format!("nematic(p={p})"),
            ModelConfig::Compass {} => "compass".into(),
            ModelConfig::Onetwenty {} => "onetwenty".into(),
        }
    }

    /// Lattice dimension the model is defined in, if it is fixed.
    pub fn required_dimension(&self) -> Option<usize> {
        match self {
            ModelConfig::Compass {} => Some(2),
            ModelConfig::Onetwenty {} => Some(3),
            _ => None,
        }
    }

    pub fn build(&self, spin: SpinMagnitude, lattice: Lattice) -> Result<ModelSpec, CliError> {
        let spec = match self {
            ModelConfig::Heisenberg { j1, j2 } => {
                ModelSpec::heisenberg_af(spin, *j1, *j2, lattice)?
            }
            ModelConfig::Xy { p, sign } => ModelSpec::nonlinear_xy(
                spin,
                entropy_profile(*p, &EntropyFamily::PowerMean)?,
                *sign,
                lattice,
            )?,
            ModelConfig::Nematic { p } => ModelSpec::nematic(
                spin,
                entropy_profile(*p, &EntropyFamily::PowerMean)?,
                lattice,
            )?,
            ModelConfig::Compass {} => ModelSpec::orbital_compass(spin, lattice)?,
            ModelConfig::Onetwenty {} => ModelSpec::onetwenty(spin, lattice)?,
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub d: usize,
    pub l: usize,
    pub b: usize,
}

/// A complete, serializable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub suite: String,
    pub models: Vec<ModelConfig>,
    /// Spin magnitudes `S` (half-integers).
    pub spins: Vec<f64>,
    pub betas: Vec<f64>,
    pub lattice: LatticeConfig,
    pub seeds: Vec<u64>,
    /// Random probes or Monte Carlo samples per check.
    pub samples: usize,
    /// Monte Carlo sweeps per chain.
    pub sweeps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations always serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(CliError::UnknownSuite(self.suite.clone()));
        }
        let bad = |msg: String| Err(CliError::InvalidConfig(msg));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if let Some(s) = self
            .spins
            .iter()
            .find(|&&s| SpinMagnitude::from_spin(s).is_err())
        {
            return bad(format!("spin {s} is not a positive half-integer"));
        }
        if let Some(b) = self.betas.iter().find(|&&b| !(b >= 0.0 && b.is_finite())) {
            return bad(format!("beta {b} must be finite and nonnegative"));
        }
        if self.lattice.l == 0 || self.lattice.b == 0 || self.lattice.d == 0 {
            return bad("lattice dimensions must be positive".into());
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return bad(format!("tolerance {k} = {v} must be positive"));
        }
        Ok(())
    }

    pub fn spin_magnitudes(&self) -> Result<Vec<SpinMagnitude>, CliError> {
        self.spins
            .iter()
            .map(|&s| SpinMagnitude::from_spin(s).map_err(CliError::from))
            .collect()
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("run configurations always serialize");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style blob identifier: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_id(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn base(suite: &str) -> RunConfig {
    RunConfig {
        suite: suite.into(),
        models: vec![ModelConfig::Heisenberg { j1: 0.5, j2: 0.25 }],
        spins: vec![0.5],
        betas: vec![1.0],
        lattice: LatticeConfig { d: 2, l: 4, b: 2 },
        seeds: vec![1],
        samples: 1000,
        sweeps: 2000,
        out: None,
        tolerances: BTreeMap::new(),
    }
}

/// Predefined configuration of a named suite.
pub fn suite(name: &str) -> Result<RunConfig, CliError> {
    let mut c = base(name);
    match name {
        "coherent" => {
            c.spins = (1..=16).map(|n| n as f64 / 2.0).collect();
            c.betas = vec![];
        }
        "symbols" => {
            c.models = vec![
                ModelConfig::Heisenberg { j1: 0.5, j2: 0.25 },
                ModelConfig::Compass {},
            ];
            c.spins = (1..=8).map(|n| n as f64 / 2.0).collect();
            c.betas = vec![];
            c.lattice = LatticeConfig { d: 2, l: 2, b: 1 };
            c.samples = 100;
        }
        "sandwich" => {
            c.models = vec![
                ModelConfig::Heisenberg { j1: 0.5, j2: 0.25 },
                ModelConfig::Compass {},
            ];
            c.spins = vec![0.5, 1.0, 1.5, 2.0];
            c.betas = vec![0.25, 0.5, 1.0];
            c.lattice = LatticeConfig { d: 2, l: 2, b: 1 };
            c.samples = 100;
        }
        "berezin" => {
            c.spins = vec![0.5, 1.0, 2.0];
            c.betas = vec![0.1, 0.3, 1.0, 3.0, 10.0];
            c.lattice = LatticeConfig { d: 1, l: 2, b: 1 };
        }
        "chessboard-q" => {
            c.betas = vec![1.0];
            c.lattice = LatticeConfig { d: 1, l: 4, b: 1 };
            c.samples = 100_000;
        }
        "chessboard-c" => {
            c.betas = vec![0.0, 1.0, 5.0];
        }
        "frakp" => {
            c.models = vec![ModelConfig::Heisenberg { j1: 0.0, j2: 0.0 }];
            c.betas = vec![0.0, 0.5, 1.0, 2.0];
            c.lattice = LatticeConfig { d: 1, l: 4, b: 2 };
            c.sweeps = 4000;
        }
        "contours" => {
            c.models = vec![];
            c.spins = vec![];
            c.betas = vec![];
            c.lattice = LatticeConfig { d: 2, l: 6, b: 2 };
        }
        "entropy" => {
            c.models = vec![
                ModelConfig::Xy {
                    p: 4,
                    sign: SignMode::Plus,
                },
                ModelConfig::Xy {
                    p: 16,
                    sign: SignMode::Plus,
                },
                ModelConfig::Nematic { p: 16 },
            ];
            c.spins = vec![];
            c.betas = vec![];
        }
        "spinwave" => {
            c.models = vec![ModelConfig::Compass {}];
            c.spins = vec![];
            c.betas = vec![1e4];
            c.lattice = LatticeConfig { d: 2, l: 16, b: 1 };
        }
        "scan" => {
            c.models = vec![
                ModelConfig::Heisenberg { j1: 0.0, j2: 0.0 },
                ModelConfig::Compass {},
                ModelConfig::Xy {
                    p: 16,
                    sign: SignMode::Plus,
                },
            ];
            c.betas = vec![];
            c.lattice = LatticeConfig { d: 2, l: 16, b: 2 };
        }
        other => return Err(CliError::UnknownSuite(other.into())),
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_round_trips_through_toml() {
        for name in SUITES {
            let c = suite(name).unwrap();
            c.validate().unwrap();
            let back = RunConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn floats_survive_serialization() {
        let mut c = suite("sandwich").unwrap();
        c.betas = vec![0.1, 1.0 / 3.0, 1e-300, 123456.789_012_345_67];
        c.tolerances.insert("lower_slack".into(), 1e-10);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = suite("coherent").unwrap().to_toml();
        assert!(matches!(
            RunConfig::from_toml(&format!("colour = 3\n{text}")),
            Err(CliError::InvalidConfig(_))
        ));
        let nested = text.replace("[lattice]\n", "[lattice]\nwidth = 2\n");
        assert!(RunConfig::from_toml(&nested).is_err());
        let model = suite("symbols")
            .unwrap()
            .to_toml()
            .replace("kind = \"compass\"", "kind = \"compass\"\nstrength = 1.0");
        assert!(RunConfig::from_toml(&model).is_err());
    }

    #[test]
    fn invalid_values_and_suites() {
        let mut c = suite("coherent").unwrap();
        c.spins = vec![0.3];
        assert!(c.validate().is_err());
        assert!(matches!(
            suite("nonexistent"),
            Err(CliError::UnknownSuite(_))
        ));
        let mut c = suite("coherent").unwrap();
        c.suite = "bogus".into();
        assert!(matches!(
            RunConfig::from_toml(&c.to_toml()),
            Err(CliError::UnknownSuite(_))
        ));
    }

    #[test]
    fn content_id_matches_git_blob_layout() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            content_id(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn suite_contracts() {
        assert_eq!(suite("contours").unwrap().lattice.d, 2);
        assert_eq!(suite("scan").unwrap().models.len(), 3);
        assert_eq!(suite("spinwave").unwrap().lattice.l, 16);
    }
}
