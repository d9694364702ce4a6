use std::path::Path;

use serde::Deserialize;

use crate::CliError;

/// `simulate` settings from a file; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: Option<usize>,
    pub q: Option<usize>,
    #[serde(rename = "L", alias = "l")]
    pub l: Option<String>,
    pub eps: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub pairs: Option<Vec<(usize, usize)>>,
}

impl SimConfig {
    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let bad = |e: String| CliError::Data(format!("{}: {e}", path.display()));
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }
}
