//! Provenance records written into every output directory: tool version,
//! config hash and one hash per input file. No timestamps, so identical runs
//! produce identical records.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

pub const FILE_NAME: &str = "provenance.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool: String,
    pub config_sha256: String,
    /// (label, sha256 of file contents), in the order given.
    pub inputs: Vec<(String, String)>,
    /// Free-form (key, value) lines, e.g. pair ids and ranks.
    pub notes: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn config_hash(cfg: &PipelineConfig) -> String {
    sha256_hex(cfg.to_canonical_text().as_bytes())
}

/// Record for a run of `cfg` over the labelled input files.
pub fn version_stamp(cfg: &PipelineConfig, inputs: &[(&str, &Path)]) -> Result<Provenance> {
    let inputs = inputs
        .iter()
        .map(|(label, path)| {
            let bytes = std::fs::read(path).map_err(|e| Error::io(*path, e))?;
            Ok((label.to_string(), sha256_hex(&bytes)))
        })
        .collect::<Result<_>>()?;
    Ok(Provenance {
        tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config_sha256: config_hash(cfg),
        inputs,
        notes: Vec::new(),
    })
}

impl Provenance {
    pub fn with_note(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.notes.push((key.into(), value.into()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool\t{}", self.tool);
        let _ = writeln!(s, "config_sha256\t{}", self.config_sha256);
        for (label, hash) in &self.inputs {
            let _ = writeln!(s, "input\t{label}\t{hash}");
        }
        for (k, v) in &self.notes {
            let _ = writeln!(s, "note\t{k}\t{v}");
        }
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let (mut tool, mut config) = (None, None);
        let (mut inputs, mut notes) = (Vec::new(), Vec::new());
        for line in text.lines().filter(|l| !l.is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["tool", t] => tool = Some(t.to_string()),
                ["config_sha256", h] => config = Some(h.to_string()),
                ["input", l, h] => inputs.push((l.to_string(), h.to_string())),
                ["note", k, v] => notes.push((k.to_string(), v.to_string())),
                _ => return Err(format!("malformed provenance line {line:?}")),
            }
        }
        Ok(Self {
            tool: tool.ok_or("missing tool line")?,
            config_sha256: config.ok_or("missing config_sha256 line")?,
            inputs,
            notes,
        })
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
