//! `manifest.json`: everything needed to repeat a run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// An input file with its contents embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
    pub contents: String,
}

impl InputFile {
    pub fn new(path: impl Into<String>, contents: String) -> Self {
        InputFile {
            path: path.into(),
            sha256: digest(&contents),
            contents,
        }
    }

    pub fn verify(&self) -> bool {
        digest(&self.contents) == self.sha256
    }
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub experiment: String,
    pub model: u8,
    pub trial: u32,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub network: InputFile,
    pub scenario: InputFile,
    /// The scenario with every default written out.
    pub resolved_scenario: String,
    pub demographics: Option<InputFile>,
    pub meals: Option<InputFile>,
    pub models: Vec<u8>,
    pub trials: u32,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub sweep: Option<String>,
    pub dump_hydraulics: bool,
    pub dump_quality: bool,
    pub timings: Vec<TrialTiming>,
}
