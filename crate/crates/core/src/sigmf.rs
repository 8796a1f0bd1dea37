//! SigMF-style recordings: `<name>.sigmf-data` + `<name>.sigmf-meta`.
//!
//! Samples are interleaved little-endian `f32` I/Q pairs (`cf32_le`). The
//! metadata is a JSON document with the usual `global` / `captures` /
//! `annotations` sections. Scenario labels have no core SigMF vocabulary,
//! so they live under the `lorafp:` namespace:
//!
//! ```json
//! {
//!   "global": {
//!     "core:datatype": "cf32_le",
//!     "core:sample_rate": 1000000.0,
//!     "core:version": "1.0.0",
//!     "core:description": "...",
//!     "lorafp:device_id": 3
//!   },
//!   "captures": [
//!     { "core:sample_start": 0, "core:frequency": 915000000.0,
//!       "core:datetime": "2021-06-01T10:00:00Z" }
//!   ],
//!   "annotations": [
//!     { "core:sample_start": 0, "core:sample_count": 1000000,
//!       "lorafp:scenario": { "scenario_id": "day1", "day": 1, "location": "room",
//!                            "config_id": 1, "receiver_id": 1, "transmission": 0 } }
//!   ]
//! }
//! ```
//!
//! Unknown keys anywhere in the document are kept and written back.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::channel::Location;
use crate::error::{Error, Result};
use crate::signal::ComplexSampleBuffer;

pub const DATATYPE: &str = "cf32_le";
pub const DATA_EXT: &str = "sigmf-data";
pub const META_EXT: &str = "sigmf-meta";
pub const SIGMF_VERSION: &str = "1.0.0";
const NS_SCENARIO: &str = "lorafp:scenario";
const NS_DEVICE: &str = "lorafp:device_id";

/// Scenario labels attached to a recording.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioFields {
    pub scenario_id: String,
    pub day: u32,
    pub location: Location,
    pub config_id: u8,
    pub receiver_id: u32,
    #[serde(default)]
    pub transmission: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub datatype: String,
    pub datetime: String,
    pub device_id: u32,
    pub scenario: ScenarioFields,
    pub description: String,
    /// The document as last read, carrying any keys this crate does not know.
    pub raw: Option<Value>,
}

impl RecordingMeta {
    pub fn new(device_id: u32, scenario: ScenarioFields) -> Self {
        Self {
            sample_rate_hz: crate::signal::DEFAULT_SAMPLE_RATE_HZ,
            carrier_hz: crate::signal::DEFAULT_CARRIER_HZ,
            datatype: DATATYPE.to_string(),
            datetime: String::new(),
            device_id,
            scenario,
            description: String::new(),
            raw: None,
        }
    }

    /// Metadata document for a recording of `sample_count` samples.
    pub fn to_json(&self, sample_count: usize) -> Value {
        let mut doc = match &self.raw {
            Some(Value::Object(m)) => Value::Object(m.clone()),
            _ => json!({}),
        };
        let root = doc.as_object_mut().expect("object");
        let global = section_object(root, "global");
        global.insert("core:datatype".into(), json!(self.datatype));
        global.insert("core:sample_rate".into(), json!(self.sample_rate_hz));
        global
            .entry("core:version")
            .or_insert_with(|| json!(SIGMF_VERSION));
        global.insert("core:description".into(), json!(self.description));
        global.insert(NS_DEVICE.into(), json!(self.device_id));

        let capture = first_in_array(root, "captures");
        capture.insert("core:sample_start".into(), json!(0));
        capture.insert("core:frequency".into(), json!(self.carrier_hz));
        capture.insert("core:datetime".into(), json!(self.datetime));

        let ann = first_in_array(root, "annotations");
        ann.insert("core:sample_start".into(), json!(0));
        ann.insert("core:sample_count".into(), json!(sample_count));
        ann.insert(
            NS_SCENARIO.into(),
            serde_json::to_value(&self.scenario).expect("scenario serialises"),
        );
        doc
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Metadata(m.to_string());
        let global = doc.get("global").and_then(Value::as_object).ok_or_else(|| bad("missing global"))?;
        let datatype = global
            .get("core:datatype")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing core:datatype"))?;
        if datatype != DATATYPE {
            return Err(Error::UnknownDatatype(datatype.to_string()));
        }
        let sample_rate_hz = global
            .get("core:sample_rate")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing core:sample_rate"))?;
        if !(sample_rate_hz > 0.0) {
            return Err(bad("sample rate must be positive"));
        }
        let capture = doc
            .get("captures")
            .and_then(Value::as_array)
            .and_then(|a| a.first());
        let carrier_hz = capture
            .and_then(|c| c.get("core:frequency"))
            .and_then(Value::as_f64)
            .unwrap_or(0.0);
        let datetime = capture
            .and_then(|c| c.get("core:datetime"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let scenario = doc
            .get("annotations")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().find_map(|x| x.get(NS_SCENARIO)))
            .ok_or_else(|| bad("missing lorafp:scenario annotation"))?;
        let scenario: ScenarioFields =
            serde_json::from_value(scenario.clone()).map_err(|e| Error::Metadata(e.to_string()))?;
        let device_id = global
            .get(NS_DEVICE)
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing lorafp:device_id"))? as u32;
        Ok(Self {
            sample_rate_hz,
            carrier_hz,
            datatype: datatype.to_string(),
            datetime,
            device_id,
            scenario,
            description: global
                .get("core:description")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            raw: Some(doc.clone()),
        })
    }
}

fn section_object<'a>(root: &'a mut Map<String, Value>, key: &str) -> &'a mut Map<String, Value> {
    let v = root.entry(key).or_insert_with(|| json!({}));
    if !v.is_object() {
        *v = json!({});
    }
    v.as_object_mut().expect("object")
}

fn first_in_array<'a>(root: &'a mut Map<String, Value>, key: &str) -> &'a mut Map<String, Value> {
    let v = root.entry(key).or_insert_with(|| json!([]));
    if !v.is_array() {
        *v = json!([]);
    }
    let arr = v.as_array_mut().expect("array");
    if arr.is_empty() || !arr[0].is_object() {
        arr.insert(0, json!({}));
    }
    arr[0].as_object_mut().expect("object")
}

/// `base.sigmf-data` and `base.sigmf-meta` for a base path (extension ignored).
pub fn pair_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stem = strip_sigmf_ext(base);
    (
        PathBuf::from(format!("{}.{DATA_EXT}", stem.display())),
        PathBuf::from(format!("{}.{META_EXT}", stem.display())),
    )
}

fn strip_sigmf_ext(p: &Path) -> PathBuf {
    match p.extension().and_then(|e| e.to_str()) {
        Some(DATA_EXT) | Some(META_EXT) => p.with_extension(""),
        _ => p.to_path_buf(),
    }
}

/// Write the sample file and its metadata.
pub fn write_recording(buffer: &ComplexSampleBuffer, meta: &RecordingMeta, path: &Path) -> Result<()> {
    buffer.require_nonempty()?;
    if let Some(i) = buffer
        .samples
        .iter()
        .position(|c| !(c.re.is_finite() && c.im.is_finite()) || !((c.re as f32).is_finite() && (c.im as f32).is_finite()))
    {
        return Err(Error::NonFiniteSample(i));
    }
    let (data_path, meta_path) = pair_paths(path);
    if let Some(dir) = data_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut bytes = Vec::with_capacity(buffer.len() * 8);
    for c in &buffer.samples {
        bytes.extend_from_slice(&(c.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    fs::write(&data_path, &bytes).map_err(|e| Error::io(&data_path, e))?;

    let mut meta = meta.clone();
    meta.sample_rate_hz = buffer.sample_rate_hz;
    meta.carrier_hz = buffer.carrier_hz;
    let doc = meta.to_json(buffer.len());
    let file = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Metadata(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(&meta_path, e))?;
    w.flush().map_err(|e| Error::io(&meta_path, e))
}

pub fn read_meta(path: &Path) -> Result<RecordingMeta> {
    let (_, meta_path) = pair_paths(path);
    if !meta_path.exists() {
        return Err(Error::MissingFile(meta_path));
    }
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Metadata(format!("{}: {e}", meta_path.display())))?;
    RecordingMeta::from_json(&doc)
}

/// Read a recording pair back.
pub fn read_recording(path: &Path) -> Result<(ComplexSampleBuffer, RecordingMeta)> {
    let (data_path, _) = pair_paths(path);
    let meta = read_meta(path)?;
    if !data_path.exists() {
        return Err(Error::MissingFile(data_path));
    }
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::TruncatedData {
            path: data_path,
            len: bytes.len() as u64,
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let buffer = ComplexSampleBuffer::new(samples, meta.sample_rate_hz)?.with_carrier(meta.carrier_hz);
    Ok((buffer, meta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    /// Base path without extension.
    pub path: PathBuf,
    pub device_id: u32,
    pub scenario: ScenarioFields,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGap {
    pub scenario_id: String,
    pub missing_devices: Vec<u32>,
}

/// Recordings found under a directory, grouped by scenario and device.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    /// Sorted by path.
    pub entries: Vec<IndexEntry>,
    pub devices: Vec<u32>,
    pub gaps: Vec<CoverageGap>,
}

impl DatasetIndex {
    pub fn scenario_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.scenario.scenario_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Entries of a scenario grouped by device, each group ordered by transmission.
    pub fn by_device(&self, scenario_id: &str) -> BTreeMap<u32, Vec<&IndexEntry>> {
        let mut map: BTreeMap<u32, Vec<&IndexEntry>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.scenario.scenario_id == scenario_id) {
            map.entry(e.device_id).or_default().push(e);
        }
        for v in map.values_mut() {
            v.sort_by_key(|e| (e.scenario.transmission, e.path.clone()));
        }
        map
    }

    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }
}

fn collect_meta_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_dir() {
            collect_meta_files(&p, out)?;
        } else if p.extension().and_then(|e| e.to_str()) == Some(META_EXT) {
            out.push(p);
        }
    }
    Ok(())
}

/// Scan `root` for recordings whose scenario passes `filter`.
///
/// Devices missing from a scenario are listed in `gaps` rather than failing.
pub fn build_dataset_index(root: &Path, filter: impl Fn(&ScenarioFields) -> bool) -> Result<DatasetIndex> {
    let mut metas = Vec::new();
    collect_meta_files(root, &mut metas)?;
    metas.sort();
    let mut entries = Vec::new();
    for m in metas {
        let meta = read_meta(&m)?;
        if filter(&meta.scenario) {
            entries.push(IndexEntry {
                path: strip_sigmf_ext(&m),
                device_id: meta.device_id,
                scenario: meta.scenario,
            });
        }
    }
    let mut devices: Vec<u32> = entries.iter().map(|e| e.device_id).collect();
    devices.sort_unstable();
    devices.dedup();

    let mut present: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for e in &entries {
        present.entry(e.scenario.scenario_id.as_str()).or_default().push(e.device_id);
    }
    let gaps = present
        .iter()
        .filter_map(|(sid, devs)| {
            let missing: Vec<u32> = devices.iter().copied().filter(|d| !devs.contains(d)).collect();
            (!missing.is_empty()).then(|| CoverageGap {
                scenario_id: sid.to_string(),
                missing_devices: missing,
            })
        })
        .collect::<Vec<_>>();
    for g in &gaps {
        log::warn!("scenario {} is missing devices {:?}", g.scenario_id, g.missing_devices);
    }
    Ok(DatasetIndex {
        entries,
        devices,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(id: &str) -> ScenarioFields {
        ScenarioFields {
            scenario_id: id.into(),
            day: 1,
            location: Location::Room,
            config_id: 1,
            receiver_id: 1,
            transmission: 0,
        }
    }

    fn small_buffer() -> ComplexSampleBuffer {
        let s = (0..10).map(|i| Complex64::new(i as f64 * 0.5, -(i as f64))).collect();
        ComplexSampleBuffer::new(s, 1e6).unwrap()
    }

    #[test]
    fn data_file_size_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("rec");
        write_recording(&small_buffer(), &RecordingMeta::new(3, scenario("a")), &base).unwrap();
        let (d, m) = pair_paths(&base);
        assert_eq!(fs::metadata(&d).unwrap().len(), 80);
        let text = fs::read_to_string(&m).unwrap();
        assert!(text.contains("\"core:sample_rate\": 1000000.0"));
        assert!(text.contains("\"core:frequency\": 915000000.0"));
        assert!(text.contains("\"core:datatype\": \"cf32_le\""));
    }

    #[test]
    fn truncated_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("rec");
        write_recording(&small_buffer(), &RecordingMeta::new(3, scenario("a")), &base).unwrap();
        let (d, m) = pair_paths(&base);
        fs::write(&d, [0u8; 7]).unwrap();
        assert!(matches!(read_recording(&base), Err(Error::TruncatedData { len: 7, .. })));
        fs::remove_file(&d).unwrap();
        assert!(matches!(read_recording(&base), Err(Error::MissingFile(_))));
        fs::remove_file(&m).unwrap();
        assert!(matches!(read_recording(&base), Err(Error::MissingFile(_))));
    }

    #[test]
    fn unknown_datatype() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("rec");
        let mut meta = RecordingMeta::new(3, scenario("a"));
        meta.datatype = "ci16_le".into();
        write_recording(&small_buffer(), &meta, &base).unwrap();
        assert!(matches!(read_recording(&base), Err(Error::UnknownDatatype(t)) if t == "ci16_le"));
    }

    #[test]
    fn non_finite_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("rec");
        let mut b = small_buffer();
        b.samples[4].im = f64::NAN;
        assert!(matches!(
            write_recording(&b, &RecordingMeta::new(0, scenario("a")), &base),
            Err(Error::NonFiniteSample(4))
        ));
        assert!(!pair_paths(&base).0.exists());
    }

    #[test]
    fn unknown_keys_survive_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("rec");
        write_recording(&small_buffer(), &RecordingMeta::new(3, scenario("a")), &base).unwrap();
        let (_, m) = pair_paths(&base);
        let mut doc: Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
        doc["global"]["vendor:antenna"] = json!("vert900");
        doc["extra_section"] = json!({"x": 1});
        fs::write(&m, serde_json::to_string(&doc).unwrap()).unwrap();

        let (buf, meta) = read_recording(&base).unwrap();
        let again = dir.path().join("again");
        write_recording(&buf, &meta, &again).unwrap();
        let doc2: Value = serde_json::from_str(&fs::read_to_string(pair_paths(&again).1).unwrap()).unwrap();
        assert_eq!(doc2["global"]["vendor:antenna"], json!("vert900"));
        assert_eq!(doc2["extra_section"]["x"], json!(1));
        assert_eq!(doc, doc2);
    }

    #[test]
    fn index_groups_and_reports_gaps() {
        let dir = tempfile::tempdir().unwrap();
        for (sid, devs) in [("a", vec![0, 1, 2]), ("b", vec![0, 2])] {
            for d in devs {
                let base = dir.path().join(sid).join(format!("dev{d:02}_tx00"));
                write_recording(&small_buffer(), &RecordingMeta::new(d, scenario(sid)), &base).unwrap();
            }
        }
        let idx = build_dataset_index(dir.path(), |_| true).unwrap();
        assert_eq!(idx.entries.len(), 5);
        assert_eq!(idx.devices, vec![0, 1, 2]);
        assert_eq!(idx.gaps, vec![CoverageGap { scenario_id: "b".into(), missing_devices: vec![1] }]);
        let paths: Vec<_> = idx.entries.iter().map(|e| e.path.clone()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
        assert_eq!(idx.by_device("a").len(), 3);

        let only_a = build_dataset_index(dir.path(), |s| s.scenario_id == "a").unwrap();
        assert!(only_a.is_complete());
    }
}
