use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub ok: bool,
}

/// Provenance of one run: what ran, how long each stage took, what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

/// Runs named stages, timing each and keeping the manifest current. A failed
/// stage writes the partial manifest before the error is returned.
pub struct StageRunner {
    out: PathBuf,
    manifest: RunManifest,
}

impl StageRunner {
    pub fn new(command: &str, out: &Path, config_hash: &str, seed_value: u64) -> Self {
        StageRunner {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: config_hash.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: seed_value,
                stages: Vec::new(),
                artifacts: Vec::new(),
                failed_stage: None,
                error: None,
            },
        }
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<(T, Vec<String>)>) -> Result<T> {
        log::info!("stage {name}");
        let start = Instant::now();
        let result = f(&self.out);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok((value, artifacts)) => {
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    seconds,
                    ok: true,
                });
                self.manifest.artifacts.extend(artifacts);
                Ok(value)
            }
            Err(e) => {
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    seconds,
                    ok: false,
                });
                self.manifest.failed_stage = Some(name.to_string());
                self.manifest.error = Some(e.to_string());
                if let Err(w) = self.write() {
                    log::error!("could not write partial manifest: {w}");
                }
                Err(Error::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }

    fn write(&self) -> Result<()> {
        crate::io::write_json(&self.out.join("manifest.json"), &self.manifest)
    }

    /// Writes the final manifest.
    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.artifacts.push("manifest.json".into());
        self.write()?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_stage_leaves_partial_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut runner = StageRunner::new("run", dir.path(), "abc", 1);
        runner.stage("first", |_| Ok(((), vec!["a.json".into()]))).unwrap();
        let err = runner
            .stage::<()>("second", |_| Err(Error::Data("boom".into())))
            .unwrap_err();
        assert!(matches!(&err, Error::Stage { stage, .. } if stage == "second"));
        assert_eq!(err.exit_code(), 3);
        let m: RunManifest = crate::io::read_json(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.failed_stage.as_deref(), Some("second"));
        assert_eq!(m.artifacts, vec!["a.json".to_string()]);
        assert_eq!(m.stages.len(), 2);
    }
}
