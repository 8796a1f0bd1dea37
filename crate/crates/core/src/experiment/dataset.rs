//! Scenario datasets on disk and the frames cut from them.

use std::path::{Path, PathBuf};

use super::ExperimentPlan;
use crate::capture::{active_windows, band_select, frames_at, BandMode, Frame, Representation};
use crate::channel::{apply_channel, realize_channel, ScenarioSpec};
use crate::error::{Error, Result};
use crate::impairments::{apply_device, apply_receiver, generate_population, PopulationFile};
use crate::lora::{synthesize_transmission, SymbolStream};
use crate::seed;
use crate::sigmf::{build_dataset_index, read_recording, write_recording, RecordingMeta, ScenarioFields};

/// Draw the plan's population and write it next to the datasets.
pub fn write_population(plan: &ExperimentPlan) -> Result<PopulationFile> {
    let p = &plan.population;
    let pop = PopulationFile {
        count: p.count,
        seed: p.seed,
        spread: p.spread.clone(),
        devices: generate_population(p.count, p.seed, &p.spread)?,
        receivers: plan.receivers.clone(),
    };
    let path = plan.population_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    pop.write(&path)?;
    Ok(pop)
}

/// The population written by a previous `generate`, checked against the plan.
pub fn load_population(plan: &ExperimentPlan) -> Result<PopulationFile> {
    let path = plan.population_path();
    if !path.exists() {
        return Err(Error::MissingDataset(format!(
            "population ({} not found; run generate first)",
            path.display()
        )));
    }
    let pop = PopulationFile::read(&path)?;
    let p = &plan.population;
    if pop.count != p.count || pop.seed != p.seed || pop.spread != p.spread {
        return Err(Error::InvalidConfig(format!(
            "{} does not match the plan's population; run generate again",
            path.display()
        )));
    }
    Ok(pop)
}

/// Wall-clock label for a recording: transmissions one minute apart,
/// devices in turn, from 09:00 on the scenario's day.
fn synthetic_datetime(day: u32, minute: u64) -> String {
    let m = 9 * 60 + minute;
    let (d, h, mm) = (day as u64 + m / (24 * 60), (m / 60) % 24, m % 60);
    format!("2024-01-{:02}T{h:02}:{mm:02}:00Z", d.min(99))
}

/// Write every device's recordings for one scenario and return their base
/// paths in (device, transmission) order.
///
/// Recording `(d, t)`: payload, phase-noise, AWGN and receiver processes
/// are seeded from `(plan seed, d, t, scenario id)`. The multipath channel
/// of device `d` is drawn once per scenario with link seed `d`.
pub fn generate_scenario_dataset(
    plan: &ExperimentPlan,
    pop: &PopulationFile,
    scenario: &ScenarioSpec,
) -> Result<Vec<PathBuf>> {
    let fs = plan.capture.sample_rate_hz;
    let dir = plan.dataset_dir(&scenario.scenario_id);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let lora = scenario.lora_config();
    let receiver = pop
        .receivers
        .iter()
        .find(|r| r.receiver_id == scenario.receiver_id)
        .ok_or_else(|| Error::InvalidConfig(format!("population lists no receiver {}", scenario.receiver_id)))?;
    let sig = &plan.signal;
    let mut written = Vec::new();
    for dev in &pop.devices {
        let d = dev.device_id as u64;
        let channel = realize_channel(scenario, d)?;
        for t in 0..sig.transmissions {
            let rec_seed = seed::derive_str(seed::derive(seed::derive(plan.seed, d), t as u64), &scenario.scenario_id);
            let payload = SymbolStream::random(lora.spreading_factor, sig.payload_symbols, seed::derive(rec_seed, 1));
            let clean = synthesize_transmission(&lora, &payload, fs, sig.duration_s)?;
            let tx = apply_device(&clean, &dev.reseeded(rec_seed))?;
            let air = apply_channel(&tx, &channel, seed::derive(rec_seed, 2))?;
            let rx = apply_receiver(&air, &receiver.reseeded(rec_seed))?;

            let mut meta = RecordingMeta::new(
                dev.device_id,
                ScenarioFields {
                    scenario_id: scenario.scenario_id.clone(),
                    day: scenario.day,
                    location: scenario.location,
                    config_id: scenario.config_id,
                    receiver_id: scenario.receiver_id,
                    transmission: t,
                },
            );
            meta.sample_rate_hz = fs;
            meta.datetime = synthetic_datetime(scenario.day, d * sig.transmissions as u64 + t as u64);
            meta.description = format!(
                "device {} transmission {t}, SF{}, {} day {}",
                dev.device_id, lora.spreading_factor, scenario.location, scenario.day
            );
            let base = dir.join(format!("dev{:02}_tx{t:02}", dev.device_id));
            write_recording(&rx, &meta, &base)
                .map_err(|e| Error::Dataset(format!("recording {}: {e}", base.display())))?;
            written.push(base);
        }
    }
    log::info!("scenario {}: {} recordings in {}", scenario.scenario_id, written.len(), dir.display());
    Ok(written)
}

/// Frames of every recording of a scenario, labelled by device id.
///
/// Windows are chosen on the raw capture, so both band modes yield the same
/// frame positions and counts.
pub fn load_scenario_frames(
    plan: &ExperimentPlan,
    scenario_id: &str,
    representation: Representation,
    band_mode: BandMode,
) -> Result<Vec<Frame>> {
    let dir = plan.dataset_dir(scenario_id);
    if !dir.is_dir() {
        return Err(Error::MissingDataset(scenario_id.to_string()));
    }
    let index = build_dataset_index(&dir, |s| s.scenario_id == scenario_id)?;
    if index.entries.is_empty() {
        return Err(Error::MissingDataset(scenario_id.to_string()));
    }
    if index.devices.len() < 2 {
        return Err(Error::Dataset(format!(
            "scenario {scenario_id} has a single device; cannot train a classifier"
        )));
    }
    let classes = plan.population.count;
    let mut cfg = plan.capture.clone();
    cfg.representation = representation;
    let mut frames = Vec::new();
    for e in &index.entries {
        if e.device_id as usize >= classes {
            return Err(Error::LabelOutOfRange {
                label: e.device_id,
                classes,
            });
        }
        let (raw, _) = read_recording(&e.path)?;
        let starts = active_windows(&raw, cfg.window_len, cfg.stride);
        let selected = band_select(&raw, band_mode, cfg.signal_bandwidth_hz)?;
        frames.extend(frames_at(&selected, &cfg, &starts, e.device_id, scenario_id, e.scenario.transmission));
    }
    Ok(frames)
}

pub(crate) fn relative_to(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datetimes_roll_over_hours() {
        assert_eq!(synthetic_datetime(3, 0), "2024-01-03T09:00:00Z");
        assert_eq!(synthetic_datetime(3, 75), "2024-01-03T10:15:00Z");
        assert_eq!(synthetic_datetime(1, 15 * 60), "2024-01-02T00:00:00Z");
    }
}
