//! Output files collected in memory, written together with a hashed manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Settings, CONFIG_VERSION};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub package: String,
    pub command: String,
    pub operator: String,
    /// Settings after merging file and flags.
    pub settings: Settings,
    pub passed: bool,
    pub files: Vec<ManifestEntry>,
}

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.add(name, text.into_bytes());
        Ok(())
    }

    /// Runs a writer into a buffer and stores the result.
    pub fn csv<E: std::fmt::Display>(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.add(name, buf);
        Ok(())
    }

    /// Removes files of an earlier manifest, writes every artifact and the
    /// manifest. Output depends only on the inputs.
    pub fn write(self, cfg: &RunConfig, passed: bool) -> Result<Manifest, CliError> {
        let out = &cfg.out;
        let old = out.join(MANIFEST);
        if let Ok(text) = fs::read_to_string(&old) {
            if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
                for f in m.files {
                    let _ = fs::remove_file(out.join(f.path));
                }
            }
        }
        fs::create_dir_all(out).map_err(|e| io(out, e))?;
        let mut files = Vec::new();
        for (name, bytes) in &self.files {
            let path = out.join(name);
            fs::write(&path, bytes).map_err(|e| io(&path, e))?;
            files.push(ManifestEntry { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        let mut settings = cfg.settings.clone();
        settings.version = Some(CONFIG_VERSION);
        settings.command = Some(cfg.command);
        let manifest = Manifest {
            version: CONFIG_VERSION,
            package: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command: cfg.command.name().into(),
            operator: cfg.operator.name.clone(),
            settings,
            passed,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| io(&old, e))?;
        text.push('\n');
        fs::write(&old, text).map_err(|e| io(&old, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
