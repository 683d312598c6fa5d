use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything that determines an experiment's output. Unknown fields are
/// rejected so a typo cannot silently fall back to a default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub horizons: Option<Vec<u32>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Fields that enter the config hash. The output directory is left out and
/// the input file enters through its contents, so moving files around does
/// not change the hash.
#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    input_sha256: Option<String>,
    horizons: &'a Option<Vec<u32>>,
    seed: u64,
    tol: Option<f64>,
    trials: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(h) = &self.horizons {
            if h.is_empty() || h[0] == 0 || h.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Usage("horizons must be positive and strictly increasing".into()));
            }
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::Usage(format!("tolerance {t} must be finite and non-negative")));
            }
        }
        if self.trials == Some(0) {
            return Err(CliError::Usage("trials must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self, command: &str, input: Option<&[u8]>) -> String {
        let view = Hashed {
            command,
            input_sha256: input.map(|b| hex::encode(Sha256::digest(b))),
            horizons: &self.horizons,
            seed: self.seed,
            tol: self.tol,
            trials: self.trials,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&view).expect("plain data serializes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"seed": 1, "sed": 2}"#).is_err());
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"seed": 7, "horizons": [8, 16]}"#).unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = ExperimentConfig { out: Some("a".into()), ..Default::default() };
        let b = ExperimentConfig { out: Some("b".into()), ..Default::default() };
        assert_eq!(a.hash("check", Some(b"x")), b.hash("check", Some(b"x")));
        assert_ne!(a.hash("check", Some(b"x")), a.hash("check", Some(b"y")));
        assert_ne!(a.hash("check", None), a.hash("ldp", None));
    }

    #[test]
    fn bad_horizons_are_usage_errors() {
        let cfg = ExperimentConfig { horizons: Some(vec![16, 8]), ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
