//! `--config` files: a flat TOML table whose keys are the long flag names.
//! Values given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub gt: Option<PathBuf>,
    pub gt_format: Option<String>,
    pub predictions: Option<PathBuf>,
    pub ssu_mode: Option<String>,
    pub header_class: Option<String>,
    pub column_threshold: Option<f64>,
    pub score_threshold: Option<f64>,
    pub weights: Option<String>,
    pub overlap_policy: Option<String>,
    pub f1_iou: Option<f64>,
    pub no_map: Option<bool>,
    pub report: Option<PathBuf>,
    pub format: Option<String>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub page: Option<String>,
    pub input: Option<PathBuf>,
    pub input_format: Option<String>,
    pub preset: Option<String>,
    pub spec: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Parses `c,o,t` weights, e.g. `1,1,1`.
pub fn parse_weights(s: &str) -> Result<cote_core::CoteWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("weights {s:?}: {e}"))?;
    match parts[..] {
        [coverage, overlap, trespass] if parts.iter().all(|v| v.is_finite()) => Ok(cote_core::CoteWeights {
            coverage,
            overlap,
            trespass,
        }),
        _ => Err(format!(
            "weights {s:?}: expected three finite numbers `coverage,overlap,trespass`"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        let w = parse_weights("1, 0.5,2").unwrap();
        assert_eq!((w.coverage, w.overlap, w.trespass), (1.0, 0.5, 2.0));
        assert!(parse_weights("1,2").is_err());
        assert!(parse_weights("1,x,2").is_err());
        assert!(parse_weights("1,inf,2").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
        let c: FileConfig = toml::from_str("score-threshold = 0.25\nssu-mode = \"fallback\"").unwrap();
        assert_eq!(c.score_threshold, Some(0.25));
        assert_eq!(c.ssu_mode.as_deref(), Some("fallback"));
    }
}
