use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stratify::pipeline::PipelineSettings;
use stratify::sim::ScenarioConfig;
use stratify::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// An input file and the digest it had when the run started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn new(role: &str, path: &Path) -> Result<Self> {
        let absolute = std::fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
        Ok(InputFile {
            role: role.into(),
            path: absolute,
            sha256: sha256_file(path)?,
        })
    }

    /// Fails when the file has changed since the manifest was written.
    pub fn verify(&self) -> Result<()> {
        let now = sha256_file(&self.path)?;
        if now != self.sha256 {
            return Err(Error::Data(format!(
                "{} ({}) differs from the file recorded in the manifest",
                self.path.display(),
                self.role
            )));
        }
        Ok(())
    }
}

/// Everything needed to repeat a run: command, seed, resolved settings,
/// inputs with digests, and the versions that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// Stage seeds derived from `seed`; the seeds inside `settings` are
    /// placeholders replaced by these at run time.
    pub stage_seeds: BTreeMap<String, u64>,
    pub settings: PipelineSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// Retained stage-2 iterations averaged into the similarity matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_iterations: Option<u64>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, settings: PipelineSettings) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("stratify".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("rng".into(), "ChaCha8 (rand_chacha 0.9), SplitMix64 seed tree".into());
        let stage_seeds = BTreeMap::from([
            ("stage1".to_string(), PipelineSettings::stage1_seed(seed)),
            ("stage2".to_string(), PipelineSettings::stage2_seed(seed)),
        ]);
        Manifest {
            command: command.into(),
            seed,
            stage_seeds,
            settings,
            scenario: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            similarity_iterations: None,
            versions,
        }
    }

    pub fn input(&self, role: &str) -> Option<&InputFile> {
        self.inputs.iter().find(|f| f.role == role)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
