//! Shared plumbing: failure classes, device loading and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cavimag::sweep::device_preset;
use cavimag::{DeviceConfig, Manifest};
use clap::Args;

/// Exit code 1 for usage and configuration problems, 2 for numerical failures.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<cavimag::Error> for Failure {
    fn from(e: cavimag::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Device selection shared by the subcommands that need one.
#[derive(Debug, Clone, Args)]
pub struct DeviceArgs {
    /// Device configuration file (JSON, reporting units).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub device: Option<PathBuf>,
    /// Built-in device: 3.6GHz or 9.2GHz.
    #[arg(long, value_name = "ID")]
    pub preset: Option<String>,
    /// Reference field of the resonator damping model when the file has no `b_ref_t`.
    #[arg(long, value_name = "MT", default_value_t = 0.0)]
    pub b_ref_mt: f64,
}

impl DeviceArgs {
    pub fn is_set(&self) -> bool {
        self.device.is_some() || self.preset.is_some()
    }

    pub fn load(&self, config: &mut CommandConfig) -> CliResult<DeviceConfig> {
        match (&self.device, &self.preset) {
            (Some(path), _) => {
                let d = DeviceConfig::from_path(path, self.b_ref_mt * 1e-3)?;
                config.device = Some(path.clone());
                Ok(d)
            }
            (None, Some(id)) => {
                let d = device_preset(id)?;
                config.preset = Some(id.clone());
                Ok(d)
            }
            (None, None) => Err(Failure::usage("a device is required: pass --device PATH or --preset ID")),
        }
    }
}

/// What a run read, what it was told, and where it wrote.
#[derive(Debug, Default)]
pub struct CommandConfig {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub device: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl CommandConfig {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), ..Default::default() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.overrides.insert(key.to_string(), value.to_string());
    }

    /// Writes the manifest next to `primary` (or to `explicit`) and returns its path.
    pub fn write_manifest(&self, primary: Option<&Path>, explicit: Option<&Path>) -> CliResult<PathBuf> {
        let path = match (explicit, primary) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => sibling(p, ".manifest.json"),
            (None, None) => PathBuf::from(format!("cavimag-{}.manifest.json", self.command)),
        };
        let args: Vec<String> = std::env::args().skip(1).collect();
        let mut m = Manifest::new(self.command.clone(), args, self.seed);
        if let Some(d) = &self.device {
            m.add_file(d)?;
        }
        if let Some(id) = &self.preset {
            let text = device_preset(id)?.to_json().to_string();
            m.add_bytes(format!("preset:{id}"), text.as_bytes());
        }
        for p in &self.inputs {
            m.add_file(p)?;
        }
        m.write(&path)?;
        Ok(path)
    }
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}
