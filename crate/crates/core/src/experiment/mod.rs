//! End-to-end experiments driven by a TOML plan.
//!
//! A plan fixes one device population, a list of scenarios, the capture and
//! training settings, and which accuracy matrices and comparisons to run.
//! Every output lands under the plan's output directory:
//!
//! ```text
//! <output_dir>/population.toml
//! <output_dir>/datasets/<scenario>/devNN_txNN.sigmf-{meta,data}
//! <output_dir>/models/<scenario>_<repr>_<band>_rN.ckpt (+ _history.csv)
//! <output_dir>/results/*.csv, *.json
//! <output_dir>/spectra/*.csv
//! <output_dir>/manifest.json
//! ```
//!
//! Plan schema (all sections but `population` and `scenario` optional):
//!
//! ```toml
//! name = "desk"
//! output_dir = "out/desk"      # relative to the plan file
//! seed = 1
//! repetitions = 3              # training seeds per matrix / comparison
//!
//! [population]
//! count = 10
//! seed = 7
//! [population.spread]          # PopulationSpread fields
//! phase_noise_max = 0.45
//!
//! [[receiver]]                 # ReceiverProfile, one per receiver_id used
//! receiver_id = 1
//! phase_noise_magnitude = 0.0
//! gain_db = 0.0
//! iq_gain_imbalance_db = 0.0
//! iq_phase_imbalance_rad = 0.0
//! dc_offset = [0.0, 0.0]
//! rng_seed = 11
//!
//! [capture]                    # CaptureConfig fields
//! [signal]                     # duration_s, transmissions, payload_symbols
//! [model]                      # conv_blocks, filters, leaky_slope, dropout
//! [schedule]                   # TrainSchedule fields
//! [split]                      # SplitSpec fields
//!
//! [[scenario]]
//! id = "d1"
//! day = 1
//! location = "room"
//! config_id = 1
//! receiver_id = 1
//! # snr_db, delay_spread_s, num_taps override the location preset
//!
//! [[matrix]]
//! axis = "day"
//! scenarios = ["d1", "d2"]
//! representations = ["iq", "fft"]
//!
//! [oob]
//! scenario = "d1"
//!
//! [spectra]
//! config_ids = [1, 2, 3, 4]
//! phase_noise = [0.0, 0.2, 0.4]
//! ```
//!
//! Overrides use dotted paths into this document, with array elements
//! addressed by index: `schedule.max_epochs=5`, `scenario.0.snr_db=10`.

mod dataset;
mod manifest;
mod runs;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capture::{CaptureConfig, Representation};
use crate::channel::{Location, ScenarioSpec};
use crate::cnn::{CnnArchitecture, SplitSpec, TrainSchedule};
use crate::error::{Error, Result};
use crate::impairments::{PopulationSpread, ReceiverProfile};

pub use dataset::{generate_scenario_dataset, load_population, load_scenario_frames, write_population};
pub use manifest::{Artifact, Manifest};
pub use runs::{
    AccuracyMatrix, Experiment, MatrixCell, OobReport, OobRow, RunKey, SpectrumExport, TrainedRun,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationPlan {
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub spread: PopulationSpread,
}

/// What each device transmits in each scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalPlan {
    pub duration_s: f64,
    /// Recordings per device per scenario.
    pub transmissions: u32,
    pub payload_symbols: usize,
}

impl Default for SignalPlan {
    fn default() -> Self {
        Self {
            duration_s: 2.0,
            transmissions: 10,
            payload_symbols: 32,
        }
    }
}

/// Architecture knobs; window length and class count come from the capture
/// config and the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPlan {
    pub conv_blocks: usize,
    pub filters: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl Default for ModelPlan {
    fn default() -> Self {
        let a = CnnArchitecture::default();
        Self {
            conv_blocks: a.conv_blocks,
            filters: a.filters,
            leaky_slope: a.leaky_slope,
            dropout: a.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPlan {
    pub id: String,
    pub day: u32,
    pub location: Location,
    pub config_id: u8,
    pub receiver_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_spread_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_taps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Day,
    Location,
    Config,
    Receiver,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Day => "day",
            Axis::Location => "location",
            Axis::Config => "config",
            Axis::Receiver => "receiver",
        }
    }
}

fn both_representations() -> Vec<Representation> {
    Representation::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPlan {
    pub axis: Axis,
    pub scenarios: Vec<String>,
    #[serde(default = "both_representations")]
    pub representations: Vec<Representation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OobPlan {
    pub scenario: String,
    #[serde(default = "both_representations")]
    pub representations: Vec<Representation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraPlan {
    pub config_ids: Vec<u8>,
    pub phase_noise: Vec<f64>,
    pub duration_s: f64,
}

impl Default for SpectraPlan {
    fn default() -> Self {
        Self {
            config_ids: vec![1, 2, 3, 4],
            phase_noise: vec![0.0, 0.2, 0.4],
            duration_s: 1.0,
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: u32,
    pub population: PopulationPlan,
    #[serde(default, rename = "receiver")]
    pub receivers: Vec<ReceiverProfile>,
    #[serde(default)]
    pub capture: CaptureConfig,
    #[serde(default)]
    pub signal: SignalPlan,
    #[serde(default)]
    pub model: ModelPlan,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioPlan>,
    #[serde(default, rename = "matrix")]
    pub matrices: Vec<MatrixPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oob: Option<OobPlan>,
    #[serde(default)]
    pub spectra: SpectraPlan,
    /// Directory relative output paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentPlan {
    /// Read a plan file and apply `key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base, overrides).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str, base_dir: PathBuf, overrides: &[String]) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: PathBuf::from("<plan>"),
            message,
        };
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut plan: ExperimentPlan = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        plan.base_dir = base_dir;
        plan.validate()?;
        Ok(plan)
    }

    /// The resolved plan as TOML, overrides applied.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.name.is_empty() {
            return bad("plan name must not be empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.population.count < 2 {
            return Err(Error::PopulationTooSmall(self.population.count));
        }
        self.population.spread.validate()?;
        self.capture.validate()?;
        self.schedule.validate()?;
        self.split.validate()?;
        self.architecture().validate()?;
        let s = &self.signal;
        if !(s.duration_s.is_finite() && s.duration_s > 0.0) || s.transmissions == 0 {
            return bad("signal needs a positive duration and at least one transmission".into());
        }
        if s.duration_s * self.capture.sample_rate_hz < self.capture.window_len as f64 {
            return bad("a transmission is shorter than one capture window".into());
        }
        if self.scenarios.is_empty() {
            return bad("plan lists no scenarios".into());
        }
        let mut ids = BTreeSet::new();
        let mut keys = BTreeSet::new();
        let mut rx_ids = BTreeSet::new();
        for r in &self.receivers {
            if !rx_ids.insert(r.receiver_id) {
                return bad(format!("receiver {} listed twice", r.receiver_id));
            }
        }
        for sc in &self.scenarios {
            let safe = !sc.id.is_empty()
                && sc.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !safe {
                return bad(format!("scenario id {:?} must be [A-Za-z0-9_-]+", sc.id));
            }
            if !ids.insert(sc.id.as_str()) {
                return bad(format!("scenario {} listed twice", sc.id));
            }
            let spec = self.spec_of(sc);
            spec.validate()?;
            if !keys.insert(spec.axis_key()) {
                return bad(format!("scenario {} repeats the coordinates of another", sc.id));
            }
            if !rx_ids.contains(&sc.receiver_id) {
                return bad(format!("scenario {} uses unlisted receiver {}", sc.id, sc.receiver_id));
            }
        }
        for m in &self.matrices {
            if m.scenarios.is_empty() || m.representations.is_empty() {
                return bad(format!("{} matrix needs scenarios and representations", m.axis.as_str()));
            }
            for id in &m.scenarios {
                if !ids.contains(id.as_str()) {
                    return bad(format!("{} matrix references unknown scenario {id}", m.axis.as_str()));
                }
            }
        }
        if let Some(o) = &self.oob {
            if !ids.contains(o.scenario.as_str()) {
                return bad(format!("oob comparison references unknown scenario {}", o.scenario));
            }
        }
        for &c in &self.spectra.config_ids {
            crate::channel::config_spreading_factor(c)?;
        }
        Ok(())
    }

    pub fn architecture(&self) -> CnnArchitecture {
        CnnArchitecture {
            window_len: self.capture.window_len,
            conv_blocks: self.model.conv_blocks,
            filters: self.model.filters,
            num_classes: self.population.count,
            leaky_slope: self.model.leaky_slope,
            dropout: self.model.dropout,
        }
    }

    fn spec_of(&self, sc: &ScenarioPlan) -> ScenarioSpec {
        let mut spec = ScenarioSpec::preset(
            sc.id.clone(),
            sc.day,
            sc.location,
            sc.config_id,
            sc.receiver_id,
            self.seed,
        );
        if let Some(v) = sc.snr_db {
            spec.snr_db = v;
        }
        if let Some(v) = sc.delay_spread_s {
            spec.delay_spread_s = v;
        }
        if let Some(v) = sc.num_taps {
            spec.num_taps = v;
        }
        spec
    }

    pub fn scenario(&self, id: &str) -> Result<ScenarioSpec> {
        self.scenarios
            .iter()
            .find(|s| s.id == id)
            .map(|s| self.spec_of(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {id}")))
    }

    pub fn scenario_specs(&self) -> Vec<ScenarioSpec> {
        self.scenarios.iter().map(|s| self.spec_of(s)).collect()
    }

    pub fn receiver(&self, id: u32) -> Result<&ReceiverProfile> {
        self.receivers
            .iter()
            .find(|r| r.receiver_id == id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown receiver {id}")))
    }

    pub fn output_root(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            self.output_dir.clone()
        } else {
            self.base_dir.join(&self.output_dir)
        }
    }

    pub fn population_path(&self) -> PathBuf {
        self.output_root().join("population.toml")
    }

    pub fn dataset_dir(&self, scenario_id: &str) -> PathBuf {
        self.output_root().join("datasets").join(scenario_id)
    }

    pub fn models_dir(&self) -> PathBuf {
        self.output_root().join("models")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.output_root().join("results")
    }

    pub fn spectra_dir(&self) -> PathBuf {
        self.output_root().join("spectra")
    }
}

/// Set `path=value` inside a TOML document. The value is read as a TOML
/// literal when it parses as one, else as a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let bad = |m: String| Error::InvalidConfig(format!("override {assignment:?}: {m}"));
    let (path, raw) = assignment.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad("empty key".into()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut node = doc
        .entry(keys[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for k in &keys[1..] {
        node = match node {
            toml::Value::Table(t) => t
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = k.parse().map_err(|_| bad(format!("{k} is not an array index")))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| bad(format!("index {i} out of range ({len})")))?
            }
            _ => return Err(bad(format!("cannot descend into {k}"))),
        };
    }
    *node = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SMALL: &str = r#"
name = "t"
output_dir = "out"
seed = 5

[population]
count = 3
seed = 2

[[receiver]]
receiver_id = 1
phase_noise_magnitude = 0.0
gain_db = 0.0
iq_gain_imbalance_db = 0.0
iq_phase_imbalance_rad = 0.0
dc_offset = [0.0, 0.0]
rng_seed = 3

[capture]
window_len = 1024
stride = 1024

[signal]
duration_s = 0.02
transmissions = 3
payload_symbols = 4

[model]
conv_blocks = 2
filters = 4

[[scenario]]
id = "a"
day = 1
location = "room"
config_id = 1
receiver_id = 1

[[scenario]]
id = "b"
day = 2
location = "room"
config_id = 1
receiver_id = 1

[[matrix]]
axis = "day"
scenarios = ["a", "b"]
"#;

    #[test]
    fn parses_with_defaults() {
        let p = ExperimentPlan::from_toml(SMALL, PathBuf::from("/x"), &[]).unwrap();
        assert_eq!(p.scenarios.len(), 2);
        assert_eq!(p.matrices[0].representations, Representation::ALL.to_vec());
        assert_eq!(p.output_root(), PathBuf::from("/x/out"));
        assert_eq!(p.architecture().num_classes, 3);
        assert_eq!(p.schedule, TrainSchedule::default());
        let back = ExperimentPlan::from_toml(&p.to_toml(), PathBuf::from("/x"), &[]).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn overrides_reach_nested_and_indexed_keys() {
        let o = [
            "schedule.max_epochs=3".to_string(),
            "scenario.1.snr_db=7.5".to_string(),
            "output_dir=/tmp/elsewhere".to_string(),
            "capture.representation=iq".to_string(),
        ];
        let p = ExperimentPlan::from_toml(SMALL, PathBuf::new(), &o).unwrap();
        assert_eq!(p.schedule.max_epochs, 3);
        assert_eq!(p.scenarios[1].snr_db, Some(7.5));
        assert_eq!(p.scenario("b").unwrap().snr_db, 7.5);
        assert_eq!(p.output_root(), PathBuf::from("/tmp/elsewhere"));
        assert_eq!(p.capture.representation, Representation::Iq);
    }

    #[test]
    fn rejects_bad_plans() {
        let cases = [
            "matrix.0.scenarios=[\"a\", \"zz\"]",
            "scenario.1.day=1",
            "scenario.0.receiver_id=9",
            "population.count=1",
            "scenario.0.id=\"../up\"",
            "signal.duration_s=0.0001",
        ];
        for c in cases {
            let r = ExperimentPlan::from_toml(SMALL, PathBuf::new(), &[c.to_string()]);
            assert!(r.is_err(), "{c} accepted");
        }
        assert!(ExperimentPlan::from_toml(SMALL, PathBuf::new(), &["nokey".into()]).is_err());
        assert!(ExperimentPlan::from_toml(SMALL, PathBuf::new(), &["bogus=1".into()]).is_err());
        assert!(ExperimentPlan::from_toml(SMALL, PathBuf::new(), &["scenario.7.day=1".into()]).is_err());
    }

    #[test]
    fn presets_share_channel_seed_across_config_and_receiver() {
        let p = ExperimentPlan::from_toml(SMALL, PathBuf::new(), &[]).unwrap();
        let a = p.scenario("a").unwrap();
        let b = p.scenario("b").unwrap();
        assert_ne!(a.rng_seed, b.rng_seed);
        let c = ExperimentPlan::from_toml(SMALL, PathBuf::new(), &["scenario.1.day=1".into(), "scenario.1.config_id=4".into()])
            .unwrap()
            .scenario("b")
            .unwrap();
        assert_eq!(a.rng_seed, c.rng_seed);
    }
}
