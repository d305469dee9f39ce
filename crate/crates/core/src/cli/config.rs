//! Experiment configuration files.
//!
//! A config is a single JSON object. Loading goes through a generic JSON
//! value first so `--set` overrides and catalogue checks can be applied, then
//! through typed records whose errors name the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::{
    BundleParams, DiffusionFamily, JumpFamily, Model, RegimeRecord, RegimeSchedule, SystemSpec,
};
use crate::error::{Error, Result};
use crate::matcore::Mat;
use crate::noisegen::{LevyMeasureRecord, SUPPORTED_LEVY_KINDS};

pub const DEFAULT_MTERM_PATHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionRecord {
    Constant {
        s0: Vec<Vec<f64>>,
    },
    Affine {
        s0: Vec<Vec<f64>>,
        slopes: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpRecord {
    LinearInMark {
        g0: Vec<Vec<f64>>,
        #[serde(default)]
        slopes: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepPolicy {
    Explicit(f64),
    Auto(AutoStep),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoStep {
    Auto,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self::Auto(AutoStep::Auto)
    }
}

impl StepPolicy {
    pub fn explicit(&self) -> Option<f64> {
        match self {
            Self::Explicit(h) => Some(*h),
            Self::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub system: SystemRecord,
    pub diffusion: DiffusionRecord,
    pub jump: JumpRecord,
    pub levy: LevyMeasureRecord,
    pub horizon: f64,
    pub regime: RegimeRecord,
    pub paths_per_point: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub internal_step: StepPolicy,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mterm_paths: Option<usize>,
}

fn default_output_dir() -> String {
    "out".to_string()
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub horizon: f64,
    pub schedule: RegimeSchedule,
    pub paths_per_point: usize,
    pub master_seed: u64,
    pub step: StepPolicy,
    pub output_dir: PathBuf,
    pub mterm_paths: usize,
    /// SHA-256 of the effective configuration, hex encoded.
    pub checksum: String,
    /// The effective configuration after overrides.
    pub effective: Value,
}

impl ExperimentConfig {
    /// Bundle parameters for ladder entry `i`.
    pub fn bundle_params(&self, i: usize) -> BundleParams {
        let p = self.schedule.points()[i];
        BundleParams {
            epsilon: p.epsilon,
            delta: p.delta,
            c: self.schedule.limit_c(),
            horizon: self.horizon,
            step: self.step.explicit(),
        }
    }
}

fn mat(rows: &[Vec<f64>], field: &str) -> Result<Mat> {
    Mat::from_rows(rows).map_err(|e| relabel(e, field))
}

fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::Dimension(m) => Error::Dimension(format!("{field}: {m}")),
        Error::Config(m) => Error::Config(format!("{field}: {m}")),
        other => other,
    }
}

fn mats(list: &[Vec<Vec<f64>>], field: &str) -> Result<Vec<Mat>> {
    list.iter()
        .enumerate()
        .map(|(i, m)| mat(m, &format!("{field}[{i}]")))
        .collect()
}

impl ConfigRecord {
    pub fn build(&self, checksum: String, effective: Value) -> Result<ExperimentConfig> {
        let s = &self.system;
        let system = SystemSpec::new(
            mat(&s.a, "system.a")?,
            mat(&s.b, "system.b")?,
            mat(&s.k, "system.k")?,
            s.y0.clone(),
        )?;
        let n = system.n();
        let diffusion = match &self.diffusion {
            DiffusionRecord::Constant { s0 } => {
                DiffusionFamily::constant(mat(s0, "diffusion.s0")?)?
            }
            DiffusionRecord::Affine { s0, slopes } => DiffusionFamily::affine(
                mat(s0, "diffusion.s0")?,
                mats(slopes, "diffusion.slopes")?,
            )?,
        };
        let jump = match &self.jump {
            JumpRecord::LinearInMark { g0, slopes } => {
                JumpFamily::linear_in_mark(mat(g0, "jump.g0")?, mats(slopes, "jump.slopes")?)?
            }
        };
        let levy = self.levy.build(n)?;
        let model = Model::new(system, diffusion, jump, levy)?;

        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        let schedule = RegimeSchedule::from_record(&self.regime)?;
        if let Some(h) = self.internal_step.explicit() {
            for (i, p) in schedule.points().iter().enumerate() {
                if !(h > 0.0) || h > p.delta / 20.0 {
                    return Err(Error::Config(format!(
                        "internal_step {h} exceeds delta/20 = {} at ladder entry {i}",
                        p.delta / 20.0
                    )));
                }
            }
        }
        let mterm_paths = self.mterm_paths.unwrap_or(DEFAULT_MTERM_PATHS);
        if mterm_paths == 0 {
            return Err(Error::Config("mterm_paths must be positive".into()));
        }
        Ok(ExperimentConfig {
            model,
            horizon: self.horizon,
            schedule,
            paths_per_point: self.paths_per_point,
            master_seed: self.master_seed,
            step: self.internal_step,
            output_dir: PathBuf::from(&self.output_dir),
            mterm_paths,
            checksum,
            effective,
        })
    }
}

/// Assigns `value` at a dotted path such as `regime.c` or `levy.atoms.0.mass`.
pub fn apply_override(root: &mut Value, key: &str, value: &str) -> Result<()> {
    let parsed =
        serde_json::from_str::<Value>(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), parsed);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| {
                    Error::Config(format!("override `{key}`: `{part}` is not an array index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!(
                        "override `{key}`: index {idx} out of range ({len})"
                    ))
                })?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::Config(format!(
                    "override `{key}`: `{part}` does not address an object or array"
                )))
            }
        };
    }
    Ok(())
}

fn precheck_kinds(root: &Value) -> Result<()> {
    if let Some(kind) = root.pointer("/levy/kind").and_then(Value::as_str) {
        if !SUPPORTED_LEVY_KINDS.contains(&kind) {
            return Err(Error::UnsupportedMeasure(format!(
                "levy.kind `{kind}` is not supported; only finite-activity measures {SUPPORTED_LEVY_KINDS:?} can be simulated exactly"
            )));
        }
    }
    for (field, allowed) in [
        ("diffusion", &["constant", "affine"][..]),
        ("jump", &["linear_in_mark"][..]),
    ] {
        if let Some(kind) = root
            .pointer(&format!("/{field}/kind"))
            .and_then(Value::as_str)
        {
            if !allowed.contains(&kind) {
                return Err(Error::UnsupportedFamily(format!(
                    "{field}.kind `{kind}` is not in the catalogue {allowed:?}"
                )));
            }
        }
    }
    Ok(())
}

fn typed_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    if inner.line() > 0 {
        Error::Config(format!(
            "field `{path}`: {} (line {}, column {})",
            strip_position(&inner.to_string()),
            inner.line(),
            inner.column()
        ))
    } else {
        Error::Config(format!("field `{path}`: {inner}"))
    }
}

fn strip_position(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

/// Overrides applied on top of the file contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub sets: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.sets.is_empty() && self.seed.is_none() && self.paths.is_none() && self.out.is_none()
    }

    fn apply(&self, root: &mut Value) -> Result<()> {
        for (k, v) in &self.sets {
            apply_override(root, k, v)?;
        }
        let obj = root
            .as_object_mut()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        if let Some(seed) = self.seed {
            obj.insert("master_seed".into(), Value::from(seed));
        }
        if let Some(paths) = self.paths {
            obj.insert("paths_per_point".into(), Value::from(paths));
        }
        if let Some(out) = &self.out {
            obj.insert(
                "output_dir".into(),
                Value::from(out.to_string_lossy().into_owned()),
            );
        }
        Ok(())
    }
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "invalid JSON: {} (line {}, column {})",
            strip_position(&e.to_string()),
            e.line(),
            e.column()
        ))
    })?;
    if !root.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    overrides.apply(&mut root)?;
    precheck_kinds(&root)?;

    let record: ConfigRecord = if overrides.is_empty() {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(typed_error)?
    } else {
        serde_path_to_error::deserialize(root.clone()).map_err(typed_error)?
    };
    record.build(experiment_checksum(&root)?, root)
}

/// SHA-256 of the effective config with `output_dir` removed, so the same
/// experiment written to two places carries the same checksum.
fn experiment_checksum(root: &Value) -> Result<String> {
    let mut hashed = root.clone();
    if let Value::Object(map) = &mut hashed {
        map.remove("output_dir");
    }
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&hashed)?)))
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}
