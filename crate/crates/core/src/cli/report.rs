//! Report envelope, constants manifest and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimates::RungConstants;

/// Schema version of the constants manifest, embedded in every report.
pub const MANIFEST_VERSION: &str = "1.0.0";

/// File name of the constants manifest inside an output directory.
pub const MANIFEST_FILE: &str = "constants.json";

/// Key excluded when reports are compared for determinism.
pub const TIMESTAMP_KEY: &str = "timestamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub manifest_version: String,
    pub seed: u64,
    pub config: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub first_failure: Option<String>,
    pub result: Value,
    pub timestamp: u64,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: Value, checks: Vec<Check>, result: Value) -> Self {
        let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.name.clone());
        Report {
            command: command.into(),
            manifest_version: MANIFEST_VERSION.into(),
            seed,
            config,
            pass: first_failure.is_none(),
            first_failure,
            checks,
            result,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    /// One row per check.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = String::from("command,check,pass,detail\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(&self.command),
                csv_field(&c.name),
                c.pass,
                csv_field(&c.detail)
            ));
        }
        out.into_bytes()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parsed report with the timestamp removed, for comparisons.
pub fn without_timestamp(bytes: &[u8]) -> Result<Value> {
    let mut v: Value = serde_json::from_slice(bytes)?;
    if let Some(m) = v.as_object_mut() {
        m.remove(TIMESTAMP_KEY);
    }
    Ok(v)
}

/// Constants extracted by the verification campaigns. Later campaigns merge
/// their entries into the manifest of the same output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsManifest {
    pub version: String,
    /// Metric the constants were extracted for.
    pub metric: Option<Value>,
    /// Decay constants of the metric perturbation.
    pub c_basic: Option<[f64; 3]>,
    /// Searched radius of the incoming cutoff.
    pub r0: Option<f64>,
    /// Lower bound `-{p2, b} >= c1 <x>^{-1} b`.
    pub c1: Option<f64>,
    pub c0_plateau: Option<f64>,
    pub c0_transition: Option<f64>,
    pub c0_outgoing: Option<f64>,
    /// Searched radius of the outgoing cutoff.
    pub r0_outgoing: Option<f64>,
    #[serde(default)]
    pub rungs: Vec<RungConstants>,
}

impl ConstantsManifest {
    pub fn empty() -> Self {
        ConstantsManifest {
            version: MANIFEST_VERSION.into(),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read(path)?;
        let m: ConstantsManifest = serde_json::from_slice(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Config {
                path: format!("{}: version", path.display()),
                message: format!("manifest version {} differs from {MANIFEST_VERSION}", m.version),
            });
        }
        Ok(m)
    }

    /// Fields set in `other` replace those here; rung constants are merged by
    /// rung index.
    pub fn merge(&mut self, other: &ConstantsManifest) {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f.clone(); })*};
        }
        take!(metric, c_basic, r0, c1, c0_plateau, c0_transition, c0_outgoing, r0_outgoing);
        for r in &other.rungs {
            match self.rungs.iter_mut().find(|s| s.j == r.j) {
                Some(s) => *s = *r,
                None => self.rungs.push(*r),
            }
        }
        self.rungs.sort_by_key(|r| r.j);
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
