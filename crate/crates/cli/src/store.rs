//! Configuration loading and the files of one output directory.

use crate::error::{io_error, CliError, Result};
use hda_core::experiment::{ExperimentConfig, Seeds};
use hda_core::io::{decode_hda, encode_hda, Container, HdaFile};
use hda_core::net::NetParams;
use hda_core::HdaError;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Output directory used when neither the flag nor the config names one.
pub const DEFAULT_OUTPUT: &str = "hda-out";

/// Parses and validates a TOML config. A seed override replaces every seed,
/// including the training shuffle seed.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let config_error = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| config_error(e.to_string()))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| config_error(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seeds = Seeds::overridden(s);
        cfg.training.seed = cfg.seeds.training;
    }
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(cfg)
}

/// `--out`, else the config's directory under `$HDA_DATA_DIR` (or the
/// working directory).
pub fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig, data_root: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => {
            let root = data_root.unwrap_or(Path::new("."));
            root.join(cfg.output_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUTPUT)))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A loaded input with the hash recorded in the provenance of its products.
pub struct Loaded<T> {
    pub value: T,
    pub name: String,
    pub sha256: String,
}

pub struct Store {
    pub dir: PathBuf,
    pub cfg: ExperimentConfig,
}

impl Store {
    pub fn open(dir: PathBuf, cfg: ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(io_error(&dir))?;
        Ok(Store { dir, cfg })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn read_bytes(&self, name: &str) -> Result<Loaded<Vec<u8>>> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(io_error(&path))?;
        Ok(Loaded {
            sha256: sha256_hex(&bytes),
            name: name.to_string(),
            value: bytes,
        })
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(io_error(&path))?;
        Ok(path)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn read_container(&self, name: &str) -> Result<Loaded<Container>> {
        let raw = self.read_bytes(name)?;
        match decode_hda(&raw.value).map_err(|e| located(&self.path(name), e))? {
            HdaFile::Container(c) => Ok(Loaded {
                value: c,
                name: raw.name,
                sha256: raw.sha256,
            }),
            _ => Err(located(
                &self.path(name),
                HdaError::Malformed {
                    offset: 4,
                    reason: "expected an archive container".into(),
                },
            )),
        }
    }

    pub fn write_container(&self, name: &str, c: Container) -> Result<PathBuf> {
        self.write_bytes(name, &encode_hda(&HdaFile::Container(c)))
    }

    pub fn read_net(&self, name: &str) -> Result<Loaded<NetParams>> {
        let raw = self.read_bytes(name)?;
        Ok(Loaded {
            value: hda_core::net::io::from_bytes(&raw.value).map_err(|e| located(&self.path(name), e))?,
            name: raw.name,
            sha256: raw.sha256,
        })
    }

    pub fn write_net(&self, name: &str, net: &NetParams) -> Result<PathBuf> {
        self.write_bytes(name, &hda_core::net::io::to_bytes(net))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Header of every product: its kind, the resolved config, the seeds and
    /// the hashes of the inputs it was derived from.
    pub fn provenance(&self, kind: &str, inputs: &[(&str, &str)]) -> Value {
        let inputs: BTreeMap<&str, &str> = inputs.iter().copied().collect();
        json!({
            "kind": kind,
            "config": self.cfg.to_json(),
            "seeds": self.cfg.seeds,
            "inputs": inputs,
        })
    }

    /// Names of files in the output directory with the given prefix and
    /// suffix, sorted, with both stripped.
    pub fn list(&self, prefix: &str, suffix: &str) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_error(&self.dir))? {
            let name = entry.map_err(io_error(&self.dir))?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_prefix(prefix).and_then(|s| s.strip_suffix(suffix)) {
                names.push(stem.to_string());
            }
        }
        names.sort();
        Ok(names)
    }
}

/// Attaches the file path to I/O and format errors.
fn located(path: &Path, e: HdaError) -> CliError {
    match e {
        HdaError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        HdaError::Malformed { offset, reason } => CliError::Core(HdaError::Malformed {
            offset,
            reason: format!("{}: {reason}", path.display()),
        }),
        e => CliError::Core(e),
    }
}
