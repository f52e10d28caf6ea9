//! Artifact writing. CSVs get a `<name>.meta.json` sidecar with the resolved
//! config; JSON artifacts embed it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Artifacts<'a> {
    dir: PathBuf,
    command: &'static str,
    config: &'a RunConfig,
    hash: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config_hash: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a T>,
}

/// First 12 hex digits of the SHA-256 of the config's JSON form.
pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))[..12].to_string()
}

impl<'a> Artifacts<'a> {
    pub fn create(dir: &Path, command: &'static str, config: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
            hash: config_hash(config),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn write_json_file<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Write `name` through `fill`, plus its config sidecar.
    pub fn csv<F>(&self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> ratchet_core::Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        fill(&mut w)?;
        w.flush()?;
        let sidecar: Envelope<'_, ()> = Envelope {
            command: self.command,
            config_hash: &self.hash,
            config: self.config,
            file: Some(name),
            result: None,
        };
        self.write_json_file(&format!("{name}.meta.json"), &sidecar)
    }

    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> Result<(), CliError> {
        let doc = Envelope {
            command: self.command,
            config_hash: &self.hash,
            config: self.config,
            file: None,
            result: Some(result),
        };
        self.write_json_file(name, &doc)
    }
}
