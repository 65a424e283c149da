//! Optional TOML run configuration mirroring every CLI flag.
//!
//! Flags given on the command line override file values. Unknown keys are
//! rejected. Schema (all keys optional):
//!
//! ```toml
//! jobs = 2                      # default worker count for `trials`
//!
//! [synth]
//! out = "dataset"
//! genres = 6
//! clips_per_genre = "15,14,11,10,9,7"
//! seed = 7
//! similar_pair = "fourfloor,warmfloor"
//! different_pair = "dirge,sprint"
//!
//! [separate]
//! out = "stems"
//! method = "hpss3"
//! force = false
//!
//! [featurize]
//! manifest = "dataset/manifest.csv"
//! variant = "stems3"            # stems3 | mix_full | mix_novox
//! separator = "external"        # builtin | external
//! out = "features.ssgt"
//!
//! [trials]
//! features_stems3 = "stems3.ssgt"
//! features_full = "full.ssgt"
//! features_novox = "novox.ssgt"
//! trials = 50
//! epochs = 6
//! base_seed = 17
//! out = "results.csv"
//! summary = "summary.txt"
//! jobs = 1
//!
//! [report]
//! out = "figure.svg"
//! stats = "stats.txt"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub jobs: Option<usize>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub separate: SeparateSection,
    #[serde(default)]
    pub featurize: FeaturizeSection,
    #[serde(default)]
    pub trials: TrialsSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub out: Option<PathBuf>,
    pub genres: Option<usize>,
    pub clips_per_genre: Option<String>,
    pub seed: Option<u64>,
    pub similar_pair: Option<String>,
    pub different_pair: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateSection {
    pub out: Option<PathBuf>,
    pub method: Option<String>,
    pub force: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturizeSection {
    pub manifest: Option<PathBuf>,
    pub variant: Option<String>,
    pub separator: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsSection {
    pub features_stems3: Option<PathBuf>,
    pub features_full: Option<PathBuf>,
    pub features_novox: Option<PathBuf>,
    pub trials: Option<usize>,
    pub epochs: Option<usize>,
    pub base_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub out: Option<PathBuf>,
    pub stats: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}
