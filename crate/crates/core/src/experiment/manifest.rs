//! The output directory's manifest: plan, seeds and artifact hashes.
//!
//! One writer per run. Entries from earlier commands are kept unless the
//! file they describe was rewritten or removed; the document carries no
//! timestamps, so identical runs give identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::relative_to;
use super::ExperimentPlan;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
    /// Command that last wrote the file.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan_name: String,
    pub plan_sha256: String,
    pub plan: toml::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Keyed by path relative to the output directory.
    pub artifacts: BTreeMap<String, Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

impl Manifest {
    pub fn path(plan: &ExperimentPlan) -> PathBuf {
        plan.output_root().join("manifest.json")
    }

    /// Start from the existing manifest, re-pointed at `plan`.
    pub fn open(plan: &ExperimentPlan) -> Self {
        let text = plan.to_toml();
        let mut seeds = BTreeMap::new();
        seeds.insert("plan".into(), plan.seed);
        seeds.insert("population".into(), plan.population.seed);
        seeds.insert("schedule".into(), plan.schedule.rng_seed);
        seeds.insert("split".into(), plan.split.rng_seed);
        seeds.insert("repetitions".into(), plan.repetitions as u64);
        let previous: Option<Manifest> = fs::read_to_string(Self::path(plan))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        Manifest {
            plan_name: plan.name.clone(),
            plan_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            plan: toml::from_str(&text).expect("plan round-trips"),
            seeds,
            artifacts: previous.map(|m| m.artifacts).unwrap_or_default(),
        }
    }

    pub fn record(&mut self, plan: &ExperimentPlan, path: &Path, command: &str) -> Result<()> {
        let (sha256, bytes) = sha256_file(path)?;
        let key = relative_to(&plan.output_root(), path);
        self.artifacts.insert(
            key,
            Artifact {
                sha256,
                bytes,
                command: command.to_string(),
            },
        );
        Ok(())
    }

    /// Drop entries whose file is gone, then write.
    pub fn write(&mut self, plan: &ExperimentPlan) -> Result<PathBuf> {
        let root = plan.output_root();
        self.artifacts.retain(|k, _| root.join(k).exists());
        let path = Self::path(plan);
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Metadata(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
