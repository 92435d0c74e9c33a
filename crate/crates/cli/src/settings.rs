use std::path::Path;

use serde::Deserialize;
use vesselkit::Config;

use crate::error::CliError;

pub const CONFIG_ENV: &str = "VESSELKIT_CONFIG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tol: Option<f64>,
    steps_per_unit: Option<usize>,
    probes: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub steps_per_unit: Option<usize>,
    pub probes: Option<usize>,
    pub seed: Option<u64>,
}

/// Defaults, then the file named by `VESSELKIT_CONFIG`, then flags.
pub fn resolve(config_path: Option<&Path>, flags: &Overrides) -> Result<Config, CliError> {
    let file = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    let mut c = Config::default();
    c.tol = flags.tol.or(file.tol).unwrap_or(c.tol);
    c.steps_per_unit = flags.steps_per_unit.or(file.steps_per_unit).unwrap_or(c.steps_per_unit);
    c.probes = flags.probes.or(file.probes).unwrap_or(c.probes);
    c.seed = flags.seed.or(file.seed).unwrap_or(c.seed);
    if !(c.tol.is_finite() && c.tol > 0.0) {
        return Err(CliError::Input(format!("tol must be positive, got {}", c.tol)));
    }
    if c.steps_per_unit == 0 {
        return Err(CliError::Input("steps must be positive".into()));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"tol": 1e-6, "probes": 5}"#).unwrap();
        let flags = Overrides { probes: Some(7), ..Default::default() };
        let c = resolve(Some(&path), &flags).unwrap();
        assert_eq!((c.tol, c.probes, c.seed, c.steps_per_unit), (1e-6, 7, 0, 200));
        std::fs::write(&path, r#"{"tolerance": 1e-6}"#).unwrap();
        assert!(resolve(Some(&path), &flags).is_err());
    }
}
